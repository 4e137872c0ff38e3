//! Orthonormal local frame construction and rotation.

use crate::fem::VectorField;
use crate::mesh::Mesh;
use crate::parallel::map_indexed;
use nalgebra::{Rotation3, Unit, Vector3};

/// A transmural gradient shorter than this is treated as degenerate and the
/// transmural axis falls back to a neighbour average (or +z).
const DEGENERATE_GRADIENT: f64 = 1e-12;

/// A normal seed whose component orthogonal to the transmural axis is
/// shorter than this is treated as parallel to it; a coordinate axis seeds
/// the orthogonalization instead.
const DEGENERATE_NORMAL: f64 = 1e-10;

/// Orthonormal local coordinate system at one vertex: longitudinal,
/// normal and transmural axes, in that order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub e_l: Vector3<f64>,
    pub e_n: Vector3<f64>,
    pub e_t: Vector3<f64>,
}

/// How many vertices needed each degeneracy fallback.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameFallbacks {
    pub e_t: usize,
    pub e_n: usize,
}

/// Builds the local frame at every vertex: `e_t` along the transmural
/// gradient, `e_n` the normal seed orthogonalized against it, and
/// `e_l = e_n x e_t` closing a right-handed triplet.
///
/// Degeneracies never fail: a vanishing gradient borrows the volume-weighted
/// average axis of its (non-degenerate) neighbours, then falls back to +z; a
/// normal seed parallel to `e_t` is replaced by the coordinate axis with the
/// smallest component along `e_t`. Both cases are counted in the returned
/// [`FrameFallbacks`].
///
/// # Panics
/// Panics if the field lengths do not match the mesh vertex count.
pub fn build_frame(
    mesh: &Mesh,
    grad_phi: &VectorField,
    k: &VectorField,
) -> (Vec<Frame>, FrameFallbacks) {
    build_frame_impl(mesh, grad_phi, k, false)
}

/// Single-threaded twin of [`build_frame`]; bitwise-identical output.
pub fn build_frame_sequential(
    mesh: &Mesh,
    grad_phi: &VectorField,
    k: &VectorField,
) -> (Vec<Frame>, FrameFallbacks) {
    build_frame_impl(mesh, grad_phi, k, true)
}

pub(crate) fn build_frame_impl(
    mesh: &Mesh,
    grad_phi: &VectorField,
    k: &VectorField,
    sequential: bool,
) -> (Vec<Frame>, FrameFallbacks) {
    let nv = mesh.n_vertices();
    assert_eq!(grad_phi.len(), nv, "gradient field does not match the mesh");
    assert_eq!(k.len(), nv, "normal field does not match the mesh");
    let grads = grad_phi.vectors();
    let seeds = k.vectors();

    // Pass 1: transmural axis wherever the gradient is usable. Each slot
    // depends only on its own index, so this is deterministic in parallel.
    let pass1: Vec<Option<Vector3<f64>>> =
        map_indexed(sequential, nv, |v| unit_or_none(&grads[v]));
    let e_t_fallbacks = pass1.iter().filter(|t| t.is_none()).count();

    // Pass 2: fill degenerate slots from the pass-1 snapshot only, so the
    // result does not depend on the order the slots are filled in.
    let e_t: Vec<Vector3<f64>> = if e_t_fallbacks == 0 {
        pass1.iter().map(|t| t.expect("no degenerate slots")).collect()
    } else {
        let neighbors = mesh.vertex_neighbors();
        let volumes = mesh.vertex_volumes();
        map_indexed(sequential, nv, |v| match pass1[v] {
            Some(t) => t,
            None => fallback_axis_from_neighbors(v, &pass1, &neighbors, &volumes),
        })
    };

    let frames_flagged = map_indexed(sequential, nv, |v| frame_at(e_t[v], seeds[v]));
    let e_n_fallbacks = frames_flagged.iter().filter(|(_, fell)| *fell).count();
    let frames = frames_flagged.into_iter().map(|(frame, _)| frame).collect();
    (
        frames,
        FrameFallbacks {
            e_t: e_t_fallbacks,
            e_n: e_n_fallbacks,
        },
    )
}

fn unit_or_none(g: &Vector3<f64>) -> Option<Vector3<f64>> {
    let n = g.norm();
    if n < DEGENERATE_GRADIENT {
        None
    } else {
        Some(g / n)
    }
}

/// Volume-weighted average of the valid neighbouring axes; +z when no
/// neighbour helps or the average itself degenerates (antipodal neighbours).
fn fallback_axis_from_neighbors(
    v: usize,
    pass1: &[Option<Vector3<f64>>],
    neighbors: &[Vec<usize>],
    volumes: &[f64],
) -> Vector3<f64> {
    let mut sum = Vector3::zeros();
    let mut weight = 0.0;
    for &u in &neighbors[v] {
        if let Some(t) = pass1[u] {
            sum += volumes[u] * t;
            weight += volumes[u];
        }
    }
    if weight > 0.0 {
        let avg = sum / weight;
        if avg.norm() >= DEGENERATE_GRADIENT {
            return avg.normalize();
        }
    }
    Vector3::z()
}

/// Frame at one vertex from its transmural axis and normal seed; the flag
/// reports whether the coordinate-axis fallback seeded `e_n`.
fn frame_at(e_t: Vector3<f64>, seed: Vector3<f64>) -> (Frame, bool) {
    let residual = seed - e_t * seed.dot(&e_t);
    let norm = residual.norm();
    let (e_n, fell_back) = if norm < DEGENERATE_NORMAL {
        (orthogonal_axis(&e_t), true)
    } else {
        (residual / norm, false)
    };
    let e_l = e_n.cross(&e_t).normalize();
    (Frame { e_l, e_n, e_t }, fell_back)
}

/// Coordinate axis with the smallest magnitude along `e_t` (ties take the
/// lowest index), orthogonalized against `e_t`. Its orthogonal component has
/// squared length `1 - e_t[i]^2 >= 2/3`, so normalization is always safe.
fn orthogonal_axis(e_t: &Vector3<f64>) -> Vector3<f64> {
    let mags = [e_t.x.abs(), e_t.y.abs(), e_t.z.abs()];
    let mut best = 0;
    for i in 1..3 {
        if mags[i] < mags[best] {
            best = i;
        }
    }
    let mut axis = Vector3::zeros();
    axis[best] = 1.0;
    let residual = axis - e_t * axis.dot(e_t);
    residual.normalize()
}

/// Rotates a frame into the fiber triplet `(f, n, s)`: the longitudinal and
/// normal axes turn counter-clockwise about `e_t` by the helical angle
/// `alpha`, then the transmural and rotated normal axes turn
/// counter-clockwise about the rotated longitudinal axis (that is, about
/// `f`) by the sheetlet angle `beta`. Both angles are in degrees and follow
/// the right-hand rule. The result is the same proper rotation applied to
/// the whole frame, so `det[f n s] = +1` whenever the input frame is
/// right-handed.
pub fn rotate_frame(
    frame: &Frame,
    alpha_deg: f64,
    beta_deg: f64,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let about_t =
        Rotation3::from_axis_angle(&Unit::new_normalize(frame.e_t), alpha_deg.to_radians());
    let f = about_t * frame.e_l;
    let n_mid = about_t * frame.e_n;
    let about_f = Rotation3::from_axis_angle(&Unit::new_normalize(f), beta_deg.to_radians());
    let s = about_f * frame.e_t;
    let n = about_f * n_mid;
    (f, n, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_slab_mesh, ElementKind};
    use proptest::prelude::*;

    fn unit_cube() -> Mesh {
        generate_slab_mesh([1.0, 1.0, 1.0], [1, 1, 1], ElementKind::Hex8).unwrap()
    }

    fn constant_fields(mesh: &Mesh, g: Vector3<f64>, k: Vector3<f64>) -> (VectorField, VectorField) {
        (
            VectorField::new(vec![g; mesh.n_vertices()]),
            VectorField::new(vec![k; mesh.n_vertices()]),
        )
    }

    fn assert_orthonormal(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>, tol: f64) {
        for v in [a, b, c] {
            assert!((v.norm() - 1.0).abs() <= tol, "non-unit axis {v:?}");
        }
        assert!(a.dot(b).abs() <= tol);
        assert!(a.dot(c).abs() <= tol);
        assert!(b.dot(c).abs() <= tol);
        let det = a.dot(&b.cross(c));
        assert!((det - 1.0).abs() <= 10.0 * tol, "det {det} != 1");
    }

    /// Test-local Rodrigues rotation used as an independent oracle.
    fn rodrigues(axis: Vector3<f64>, deg: f64, v: Vector3<f64>) -> Vector3<f64> {
        let u = axis.normalize();
        let t = deg.to_radians();
        v * t.cos() + u.cross(&v) * t.sin() + u * (u.dot(&v) * (1.0 - t.cos()))
    }

    #[test]
    fn canonical_gradient_and_seed_give_the_canonical_frame() {
        let mesh = unit_cube();
        let (g, k) = constant_fields(&mesh, Vector3::x(), Vector3::z());
        let (frames, fallbacks) = build_frame(&mesh, &g, &k);
        assert_eq!(fallbacks, FrameFallbacks::default());
        for frame in frames {
            assert_eq!(frame.e_t, Vector3::x());
            assert_eq!(frame.e_n, Vector3::z());
            assert_eq!(frame.e_l, Vector3::y());
        }
    }

    #[test]
    fn parallel_seed_falls_back_to_a_coordinate_axis() {
        let mesh = unit_cube();
        // Seed parallel to the gradient: every vertex needs the fallback.
        let (g, k) = constant_fields(&mesh, Vector3::x(), Vector3::new(2.0, 0.0, 0.0));
        let (frames, fallbacks) = build_frame(&mesh, &g, &k);
        assert_eq!(fallbacks.e_n, mesh.n_vertices());
        assert_eq!(fallbacks.e_t, 0);
        for frame in &frames {
            assert_orthonormal(&frame.e_l, &frame.e_n, &frame.e_t, 1e-12);
            // Smallest component of e_t = x is the y axis (ties take y over z
            // only by index; both are zero, so index 1 wins).
            assert_eq!(frame.e_n, Vector3::y());
        }
    }

    #[test]
    fn degenerate_gradient_borrows_the_neighbour_average() {
        let mesh = unit_cube();
        let mut grads = vec![Vector3::x(); mesh.n_vertices()];
        grads[0] = Vector3::zeros();
        let g = VectorField::new(grads);
        let k = VectorField::new(vec![Vector3::z(); mesh.n_vertices()]);
        let (frames, fallbacks) = build_frame(&mesh, &g, &k);
        assert_eq!(fallbacks.e_t, 1);
        // All neighbours agree on +x, so the average lands there too.
        assert!((frames[0].e_t - Vector3::x()).norm() < 1e-15);
    }

    #[test]
    fn all_degenerate_gradients_fall_back_to_plus_z() {
        let mesh = unit_cube();
        let (g, k) = constant_fields(&mesh, Vector3::zeros(), Vector3::x());
        let (frames, fallbacks) = build_frame(&mesh, &g, &k);
        assert_eq!(fallbacks.e_t, mesh.n_vertices());
        for frame in &frames {
            assert_eq!(frame.e_t, Vector3::z());
            assert_orthonormal(&frame.e_l, &frame.e_n, &frame.e_t, 1e-12);
        }
    }

    #[test]
    fn identity_rotation_returns_the_frame_axes() {
        let frame = Frame {
            e_l: Vector3::y(),
            e_n: Vector3::z(),
            e_t: Vector3::x(),
        };
        let (f, n, s) = rotate_frame(&frame, 0.0, 0.0);
        assert_eq!(f, frame.e_l);
        assert_eq!(n, frame.e_n);
        assert_eq!(s, frame.e_t);
    }

    #[test]
    fn quarter_turn_about_the_transmural_axis() {
        let frame = Frame {
            e_l: Vector3::y(),
            e_n: Vector3::z(),
            e_t: Vector3::x(),
        };
        // Rotating e_l = y about e_t = x by +90 degrees lands on +z.
        let (f, n, s) = rotate_frame(&frame, 90.0, 0.0);
        assert!((f - Vector3::z()).norm() < 1e-15);
        assert!((n - (-Vector3::y())).norm() < 1e-15);
        assert!((s - Vector3::x()).norm() < 1e-15);
    }

    #[test]
    fn helical_angle_is_measured_from_the_longitudinal_axis() {
        let frame = Frame {
            e_l: Vector3::y(),
            e_n: Vector3::z(),
            e_t: Vector3::x(),
        };
        let (f, _, _) = rotate_frame(&frame, 30.0, 0.0);
        let angle = frame.e_l.dot(&f).acos().to_degrees();
        assert!((angle - 30.0).abs() < 1e-9);
        assert!(f.dot(&frame.e_t).abs() < 1e-12);
    }

    #[test]
    fn rotation_matches_an_independent_rodrigues_oracle() {
        let frame = frame_at(
            Vector3::new(0.3, -0.4, 0.8661).normalize(),
            Vector3::new(-0.2, 0.9, 0.1),
        )
        .0;
        for (alpha, beta) in [(37.0, -12.5), (-80.0, 63.0), (120.0, 45.0)] {
            let (f, n, s) = rotate_frame(&frame, alpha, beta);
            let f_ref = rodrigues(frame.e_t, alpha, frame.e_l);
            let n_mid = rodrigues(frame.e_t, alpha, frame.e_n);
            let s_ref = rodrigues(f_ref, beta, frame.e_t);
            let n_ref = rodrigues(f_ref, beta, n_mid);
            assert!((f - f_ref).norm() < 1e-12);
            assert!((n - n_ref).norm() < 1e-12);
            assert!((s - s_ref).norm() < 1e-12);
        }
    }

    #[test]
    fn sheet_axis_tilts_from_the_transmural_axis_by_beta() {
        let frame = frame_at(Vector3::x(), Vector3::new(0.1, 0.2, 1.0)).0;
        for beta in [-45.0, -10.0, 25.0, 60.0_f64] {
            let (_, _, s) = rotate_frame(&frame, 33.0, beta);
            assert!((s.dot(&frame.e_t) - beta.to_radians().cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_and_sequential_frames_are_bitwise_identical() {
        let mesh = generate_slab_mesh([1.0, 0.8, 0.6], [3, 3, 3], ElementKind::Tet4).unwrap();
        let grads: Vec<Vector3<f64>> = (0..mesh.n_vertices())
            .map(|v| {
                let p = mesh.vertex(v);
                Vector3::new(1.0 + p.y, p.x - 0.3, p.z * 0.5)
            })
            .collect();
        let seeds: Vec<Vector3<f64>> = (0..mesh.n_vertices())
            .map(|v| {
                let p = mesh.vertex(v);
                Vector3::new(p.z, 1.0, -p.x)
            })
            .collect();
        let g = VectorField::new(grads);
        let k = VectorField::new(seeds);
        let (par, fp) = build_frame(&mesh, &g, &k);
        let (seq, fs) = build_frame_sequential(&mesh, &g, &k);
        assert_eq!(fp, fs);
        for (a, b) in par.iter().zip(&seq) {
            assert_eq!(a, b);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn frames_are_orthonormal_for_random_inputs(
            gx in -1.0f64..1.0, gy in -1.0f64..1.0, gz in -1.0f64..1.0,
            kx in -1.0f64..1.0, ky in -1.0f64..1.0, kz in -1.0f64..1.0,
            alpha in -180.0f64..180.0, beta in -90.0f64..90.0,
        ) {
            let g = Vector3::new(gx, gy, gz);
            let k = Vector3::new(kx, ky, kz);
            prop_assume!(g.norm() > 1e-6);
            let (frame, _) = frame_at(g.normalize(), k);
            assert_orthonormal(&frame.e_l, &frame.e_n, &frame.e_t, 1e-12);
            let (f, n, s) = rotate_frame(&frame, alpha, beta);
            assert_orthonormal(&f, &n, &s, 1e-12);
        }
    }
}
