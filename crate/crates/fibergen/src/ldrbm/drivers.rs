//! Geometry drivers: per-kind assembly of the full fiber pipeline.

use super::frame::{build_frame_impl, rotate_frame};
use super::laws::angle_laws;
use super::potentials::{
    atrial_normals_impl, boundary_set, normal_bt_impl, normal_doste_impl, normal_rl_impl,
    snap_point, transmural_impl, Exec,
};
use super::{
    AngleSet, Diagnostics, FiberResult, GeometryConfig, LdrbmError, LvAlgorithm,
};
use crate::fem::{DirichletBc, ScalarField, SolverOptions, VectorField};
use crate::mesh::Mesh;
use crate::parallel::map_indexed;
use nalgebra::Vector3;

/// Runs the full pipeline for the configured geometry: transmural potential,
/// driver-specific normal seeds, frame construction and angle rotation.
pub fn generate_fibers(
    mesh: &Mesh,
    config: &GeometryConfig,
    opts: &SolverOptions,
) -> Result<FiberResult, LdrbmError> {
    generate_impl(mesh, config, opts, Exec { sequential: false })
}

/// Single-threaded twin of [`generate_fibers`]; bitwise-identical output.
pub fn generate_fibers_sequential(
    mesh: &Mesh,
    config: &GeometryConfig,
    opts: &SolverOptions,
) -> Result<FiberResult, LdrbmError> {
    generate_impl(mesh, config, opts, Exec { sequential: true })
}

/// Normal seed plus everything the driver wants reported alongside it.
struct Seeds {
    k: VectorField,
    /// Auxiliary potentials in their published order.
    aux: Vec<(String, ScalarField)>,
    /// Endpoint blending weight for the angle laws (complete LV only).
    w_ot: Option<Vec<f64>>,
    /// Atrial bundle classification.
    bundle_id: Option<Vec<i32>>,
}

fn endo_epi_labels(config: &GeometryConfig) -> (&[i32], &[i32]) {
    match config {
        GeometryConfig::Slab(c) => (&c.endo_labels, &c.epi_labels),
        GeometryConfig::SphericalSlab(c) => (&c.endo_labels, &c.epi_labels),
        GeometryConfig::LeftVentricleBased(c) => (&c.endo_labels, &c.epi_labels),
        GeometryConfig::LeftVentricleComplete(c) => (&c.endo_labels, &c.epi_labels),
        GeometryConfig::LeftAtrium(c) => (&c.endo_labels, &c.epi_labels),
    }
}

/// Angle set of the rotated drivers; the atrium never rotates its frame.
fn angle_set(config: &GeometryConfig) -> Option<&AngleSet> {
    match config {
        GeometryConfig::Slab(c) => Some(&c.angles),
        GeometryConfig::SphericalSlab(c) => Some(&c.angles),
        GeometryConfig::LeftVentricleBased(c) => Some(&c.angles),
        GeometryConfig::LeftVentricleComplete(c) => Some(&c.angles),
        GeometryConfig::LeftAtrium(_) => None,
    }
}

fn driver_seeds(
    mesh: &Mesh,
    config: &GeometryConfig,
    opts: &SolverOptions,
    exec: Exec,
    diag: &mut Diagnostics,
) -> Result<Seeds, LdrbmError> {
    let seeds = match config {
        GeometryConfig::Slab(c) => {
            // Apico-basal potential between the whole top and bottom
            // surfaces instead of a point apex.
            let up = boundary_set(mesh, &c.base_up_labels, "base up")?;
            let down = boundary_set(mesh, &c.base_down_labels, "base down")?;
            let bc = DirichletBc::from_sets(&[(&up, 1.0), (&down, 0.0)])?;
            let psi = exec.solve(mesh, &bc, opts, "psi", diag)?;
            let k = exec.gradient(mesh, &psi)?;
            Seeds {
                k,
                aux: vec![("psi".to_string(), psi)],
                w_ot: None,
                bundle_id: None,
            }
        }
        GeometryConfig::SphericalSlab(c) => {
            let north = snap_point(mesh, c.north_pole, "north pole", diag);
            let south = snap_point(mesh, c.south_pole, "south pole", diag);
            let bc = DirichletBc::from_sets(&[(&[north], 1.0), (&[south], 0.0)])?;
            let psi = exec.solve(mesh, &bc, opts, "psi", diag)?;
            let k = exec.gradient(mesh, &psi)?;
            Seeds {
                k,
                aux: vec![("psi".to_string(), psi)],
                w_ot: None,
                bundle_id: None,
            }
        }
        GeometryConfig::LeftVentricleBased(c) => match &c.algorithm {
            LvAlgorithm::Rl { normal_to_base } => Seeds {
                k: normal_rl_impl(mesh, *normal_to_base)?,
                aux: Vec::new(),
                w_ot: None,
                bundle_id: None,
            },
            LvAlgorithm::Bt { apex } => {
                let (k, psi) = normal_bt_impl(mesh, &c.base_labels, *apex, opts, exec, diag)?;
                Seeds {
                    k,
                    aux: vec![("psi".to_string(), psi)],
                    w_ot: None,
                    bundle_id: None,
                }
            }
        },
        GeometryConfig::LeftVentricleComplete(c) => {
            let doste =
                normal_doste_impl(mesh, &c.mv_labels, &c.av_labels, c.apex, opts, exec, diag)?;
            let w_ot = doste.w.values().to_vec();
            Seeds {
                k: doste.k,
                aux: vec![
                    ("psi_ab".to_string(), doste.psi_ab),
                    ("psi_ot".to_string(), doste.psi_ot),
                    ("w".to_string(), doste.w),
                ],
                w_ot: Some(w_ot),
                bundle_id: None,
            }
        }
        GeometryConfig::LeftAtrium(c) => {
            let atrial = atrial_normals_impl(mesh, c, opts, exec, diag)?;
            Seeds {
                k: atrial.k,
                aux: vec![
                    ("psi_ab".to_string(), atrial.psi_ab),
                    ("psi_v".to_string(), atrial.psi_v),
                    ("psi_r".to_string(), atrial.psi_r),
                ],
                w_ot: None,
                bundle_id: Some(atrial.bundle_id),
            }
        }
    };
    Ok(seeds)
}

fn generate_impl(
    mesh: &Mesh,
    config: &GeometryConfig,
    opts: &SolverOptions,
    exec: Exec,
) -> Result<FiberResult, LdrbmError> {
    let mut diag = Diagnostics::default();
    let nv = mesh.n_vertices();

    let (endo_labels, epi_labels) = endo_epi_labels(config);
    let phi = transmural_impl(mesh, endo_labels, epi_labels, opts, exec, &mut diag)?;
    let grad_phi = exec.gradient(mesh, &phi)?;

    let seeds = driver_seeds(mesh, config, opts, exec, &mut diag)?;
    let (frames, fallbacks) = build_frame_impl(mesh, &grad_phi, &seeds.k, exec.sequential);
    diag.et_fallbacks = fallbacks.e_t;
    diag.en_fallbacks = fallbacks.e_n;

    let mut aux = seeds.aux;
    let (f, n, s) = match angle_set(config) {
        // Atrial clause: the frame itself is the fiber triplet, bitwise.
        None => (
            frames.iter().map(|fr| fr.e_l).collect::<Vec<_>>(),
            frames.iter().map(|fr| fr.e_n).collect::<Vec<_>>(),
            frames.iter().map(|fr| fr.e_t).collect::<Vec<_>>(),
        ),
        Some(angles) => {
            let phi_values = phi.values();
            let w_ot = seeds.w_ot;
            let rotated = map_indexed(exec.sequential, nv, |v| {
                let (alpha, beta) =
                    angle_laws(phi_values[v], angles, w_ot.as_ref().map(|w| w[v]));
                let (f, n, s) = rotate_frame(&frames[v], alpha, beta);
                (f, n, s, alpha)
            });
            let mut f = Vec::with_capacity(nv);
            let mut n = Vec::with_capacity(nv);
            let mut s = Vec::with_capacity(nv);
            let mut alpha_deg = Vec::with_capacity(nv);
            for (fv, nv_, sv, av) in rotated {
                f.push(fv);
                n.push(nv_);
                s.push(sv);
                alpha_deg.push(av);
            }
            aux.push(("alpha_deg".to_string(), ScalarField::new(alpha_deg)));
            (f, n, s)
        }
    };

    // Radial fibers swap the fiber and sheet axes; negating the normal keeps
    // the triplet right-handed.
    let (f, n, s) = match config {
        GeometryConfig::SphericalSlab(c) if c.radial_fibers => {
            let swapped_n: Vec<Vector3<f64>> = n.iter().map(|v| -v).collect();
            (s, swapped_n, f)
        }
        _ => (f, n, s),
    };

    Ok(FiberResult {
        f: VectorField::new(f),
        n: VectorField::new(n),
        s: VectorField::new(s),
        phi,
        aux,
        bundle_id: seeds.bundle_id,
        diagnostics: diag,
    })
}
