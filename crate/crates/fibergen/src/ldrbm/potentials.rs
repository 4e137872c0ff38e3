//! Harmonic potentials behind each geometry driver.

use super::{
    AtriumConfig, Diagnostics, LdrbmError, SnappedPoint, BUNDLE_APICOBASAL, BUNDLE_LPV,
    BUNDLE_MV, BUNDLE_RPV,
};
use crate::fem::{
    nodal_gradient, nodal_gradient_sequential, solve_laplace, solve_laplace_sequential,
    DirichletBc, ScalarField, SolverOptions, VectorField,
};
use crate::mesh::Mesh;
use nalgebra::{Point3, Vector3};

/// Routes every solve and gradient recovery through either the dispatching
/// (possibly parallel) or the strictly sequential code path.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Exec {
    pub(crate) sequential: bool,
}

impl Exec {
    pub(crate) fn solve(
        &self,
        mesh: &Mesh,
        bc: &DirichletBc,
        opts: &SolverOptions,
        name: &str,
        diag: &mut Diagnostics,
    ) -> Result<ScalarField, LdrbmError> {
        let (field, stats) = if self.sequential {
            solve_laplace_sequential(mesh, bc, opts)?
        } else {
            solve_laplace(mesh, bc, opts)?
        };
        diag.solves.push((name.to_string(), stats));
        Ok(field)
    }

    pub(crate) fn gradient(
        &self,
        mesh: &Mesh,
        field: &ScalarField,
    ) -> Result<VectorField, LdrbmError> {
        let g = if self.sequential {
            nodal_gradient_sequential(mesh, field)?
        } else {
            nodal_gradient(mesh, field)?
        };
        Ok(g)
    }
}

/// Boundary vertices carrying any of `labels`; empty sets are an error named
/// after the boundary role they were meant to fill.
pub(crate) fn boundary_set(
    mesh: &Mesh,
    labels: &[i32],
    role: &str,
) -> Result<Vec<usize>, LdrbmError> {
    let set = mesh.boundary_vertices_with_labels(labels);
    if set.is_empty() {
        return Err(LdrbmError::EmptyBoundarySet(role.to_string()));
    }
    Ok(set)
}

/// Snaps a user-supplied coordinate to the nearest mesh vertex and records
/// the snap in the run report.
pub(crate) fn snap_point(
    mesh: &Mesh,
    requested: Point3<f64>,
    role: &str,
    diag: &mut Diagnostics,
) -> usize {
    let vertex = mesh.nearest_vertex(requested);
    diag.snapped_points.push(SnappedPoint {
        role: role.to_string(),
        requested,
        snapped: mesh.vertex(vertex),
        vertex,
    });
    vertex
}

/// Sorted union of two ascending vertex lists.
fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.sort_unstable();
    out.dedup();
    out
}

/// Number of vertices two ascending lists share.
fn shared_count(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut shared) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    shared
}

pub(crate) fn transmural_impl(
    mesh: &Mesh,
    endo_labels: &[i32],
    epi_labels: &[i32],
    opts: &SolverOptions,
    exec: Exec,
    diag: &mut Diagnostics,
) -> Result<ScalarField, LdrbmError> {
    let endo = boundary_set(mesh, endo_labels, "endo")?;
    let epi = boundary_set(mesh, epi_labels, "epi")?;
    let bc = DirichletBc::from_sets(&[(&epi, 1.0), (&endo, 0.0)])?;
    exec.solve(mesh, &bc, opts, "phi", diag)
}

/// Transmural potential: 1 on the epicardium, 0 on the endocardium,
/// homogeneous Neumann elsewhere.
pub fn transmural_potential(
    mesh: &Mesh,
    endo_labels: &[i32],
    epi_labels: &[i32],
    opts: &SolverOptions,
) -> Result<ScalarField, LdrbmError> {
    transmural_impl(
        mesh,
        endo_labels,
        epi_labels,
        opts,
        Exec { sequential: false },
        &mut Diagnostics::default(),
    )
}

pub(crate) fn normal_rl_impl(
    mesh: &Mesh,
    normal_to_base: Vector3<f64>,
) -> Result<VectorField, LdrbmError> {
    if !(normal_to_base.norm() > 0.0) {
        return Err(LdrbmError::ZeroVector);
    }
    Ok(VectorField::new(vec![normal_to_base; mesh.n_vertices()]))
}

/// Constant normal seed along the outward basal direction. The vector is
/// passed through unnormalized; frame construction normalizes it.
pub fn normal_rl(mesh: &Mesh, normal_to_base: Vector3<f64>) -> Result<VectorField, LdrbmError> {
    normal_rl_impl(mesh, normal_to_base)
}

pub(crate) fn normal_bt_impl(
    mesh: &Mesh,
    base_labels: &[i32],
    apex: Point3<f64>,
    opts: &SolverOptions,
    exec: Exec,
    diag: &mut Diagnostics,
) -> Result<(VectorField, ScalarField), LdrbmError> {
    let base = boundary_set(mesh, base_labels, "base")?;
    let apex_vertex = snap_point(mesh, apex, "apex", diag);
    let bc = DirichletBc::from_sets(&[(&base, 1.0), (&[apex_vertex], 0.0)])?;
    let psi = exec.solve(mesh, &bc, opts, "psi", diag)?;
    let k = exec.gradient(mesh, &psi)?;
    Ok((k, psi))
}

/// Apico-basal normal seed: the gradient of the potential with 1 on the base
/// surface and 0 at the vertex nearest to `apex` (the snap is recorded in
/// the run report of [`super::generate_fibers`]).
pub fn normal_bt(
    mesh: &Mesh,
    base_labels: &[i32],
    apex: Point3<f64>,
    opts: &SolverOptions,
) -> Result<(VectorField, ScalarField), LdrbmError> {
    normal_bt_impl(
        mesh,
        base_labels,
        apex,
        opts,
        Exec { sequential: false },
        &mut Diagnostics::default(),
    )
}

/// Normal seed of the complete left ventricle, plus the three potentials
/// that produced it.
#[derive(Debug, Clone)]
pub struct DosteNormals {
    pub k: VectorField,
    /// Ring interpolation weight: 1 on the mitral ring and at the apex, 0 on
    /// the aortic ring.
    pub w: ScalarField,
    /// Apico-basal potential: 1 on the mitral ring, 0 at the apex.
    pub psi_ab: ScalarField,
    /// Outflow-tract potential: 1 on the aortic ring, 0 at the apex.
    pub psi_ot: ScalarField,
}

pub(crate) fn normal_doste_impl(
    mesh: &Mesh,
    mv_labels: &[i32],
    av_labels: &[i32],
    apex: Point3<f64>,
    opts: &SolverOptions,
    exec: Exec,
    diag: &mut Diagnostics,
) -> Result<DosteNormals, LdrbmError> {
    let mv = boundary_set(mesh, mv_labels, "MV")?;
    let av = boundary_set(mesh, av_labels, "AV")?;
    let shared = shared_count(&mv, &av);
    if shared > 0 {
        return Err(LdrbmError::OverlappingRings(shared));
    }
    let apex_vertex = snap_point(mesh, apex, "apex", diag);

    let bc_ab = DirichletBc::from_sets(&[(&mv, 1.0), (&[apex_vertex], 0.0)])?;
    let psi_ab = exec.solve(mesh, &bc_ab, opts, "psi_ab", diag)?;
    let bc_ot = DirichletBc::from_sets(&[(&av, 1.0), (&[apex_vertex], 0.0)])?;
    let psi_ot = exec.solve(mesh, &bc_ot, opts, "psi_ot", diag)?;
    let mv_and_apex = union(&mv, &[apex_vertex]);
    let bc_w = DirichletBc::from_sets(&[(&mv_and_apex, 1.0), (&av, 0.0)])?;
    let w = exec.solve(mesh, &bc_w, opts, "w", diag)?;

    let grad_ab = exec.gradient(mesh, &psi_ab)?;
    let grad_ot = exec.gradient(mesh, &psi_ot)?;
    let k = VectorField::new(
        (0..mesh.n_vertices())
            .map(|v| {
                let wv = w[v];
                wv * grad_ab.vectors()[v] + (1.0 - wv) * grad_ot.vectors()[v]
            })
            .collect(),
    );
    Ok(DosteNormals { k, w, psi_ab, psi_ot })
}

/// Normal seed of the complete left ventricle: the nodal convex combination
/// `k = w grad(psi_ab) + (1 - w) grad(psi_ot)` of an apico-basal and an
/// outflow-tract potential, weighted by the ring interpolation field `w`.
pub fn normal_doste(
    mesh: &Mesh,
    mv_labels: &[i32],
    av_labels: &[i32],
    apex: Point3<f64>,
    opts: &SolverOptions,
) -> Result<DosteNormals, LdrbmError> {
    normal_doste_impl(
        mesh,
        mv_labels,
        av_labels,
        apex,
        opts,
        Exec { sequential: false },
        &mut Diagnostics::default(),
    )
}

/// Atrial normal seeds, bundle classification and the three potentials that
/// produced them.
#[derive(Debug, Clone)]
pub struct AtrialNormals {
    pub k: VectorField,
    /// Per-vertex bundle class (`BUNDLE_*` constants).
    pub bundle_id: Vec<i32>,
    /// Apico-basal potential: 1 on every ring, 0 at the (appendage) apex.
    pub psi_ab: ScalarField,
    /// Inter-vein potential: 1 on the left veins ring, 0 on the right.
    pub psi_v: ScalarField,
    /// Ring potential: 1 on the mitral ring, 0 on both vein rings.
    pub psi_r: ScalarField,
}

/// Vertex with the largest distance to the closest vertex of `set`; ties
/// take the lowest index.
fn farthest_vertex_from(mesh: &Mesh, set: &[usize]) -> usize {
    let mut best = 0;
    let mut best_distance = -1.0;
    for v in 0..mesh.n_vertices() {
        let p = mesh.vertex(v);
        let distance = set
            .iter()
            .map(|&u| (mesh.vertex(u) - p).norm_squared())
            .fold(f64::INFINITY, f64::min);
        if distance > best_distance {
            best_distance = distance;
            best = v;
        }
    }
    best
}

pub(crate) fn atrial_normals_impl(
    mesh: &Mesh,
    config: &AtriumConfig,
    opts: &SolverOptions,
    exec: Exec,
    diag: &mut Diagnostics,
) -> Result<AtrialNormals, LdrbmError> {
    let mv = boundary_set(mesh, &config.mv_labels, "MV")?;
    let lpv = boundary_set(mesh, &config.lpv_labels, "LPV")?;
    let rpv = boundary_set(mesh, &config.rpv_labels, "RPV")?;

    let apex_vertex = match config.appendage_apex {
        Some(p) => snap_point(mesh, p, "appendage apex", diag),
        None => farthest_vertex_from(mesh, &mv),
    };

    // Ring potential: the mitral ring against both vein rings.
    let veins = union(&lpv, &rpv);
    let bc_r = DirichletBc::from_sets(&[(&mv, 1.0), (&veins, 0.0)])?;
    let psi_r = exec.solve(mesh, &bc_r, opts, "psi_r", diag)?;

    // Inter-vein potential: left veins against right veins.
    let bc_v = DirichletBc::from_sets(&[(&lpv, 1.0), (&rpv, 0.0)])?;
    let psi_v = exec.solve(mesh, &bc_v, opts, "psi_v", diag)?;

    // Apico-basal potential: every ring against the apex.
    let rings = union(&mv, &veins);
    let bc_ab = DirichletBc::from_sets(&[(&rings, 1.0), (&[apex_vertex], 0.0)])?;
    let psi_ab = exec.solve(mesh, &bc_ab, opts, "psi_ab", diag)?;

    let grad_ab = exec.gradient(mesh, &psi_ab)?;
    let grad_r = exec.gradient(mesh, &psi_r)?;
    let grad_v = exec.gradient(mesh, &psi_v)?;

    // Strict threshold comparisons: tau_mv = 1 (and so on) must exclude the
    // bundle even on its own ring, where the potential is exactly 1.
    let nv = mesh.n_vertices();
    let mut bundle_id = vec![BUNDLE_APICOBASAL; nv];
    let mut k = vec![Vector3::zeros(); nv];
    for v in 0..nv {
        let (bundle, normal) = if psi_r[v] > config.tau_mv {
            (BUNDLE_MV, grad_r.vectors()[v])
        } else if psi_v[v] > config.tau_lpv {
            (BUNDLE_LPV, grad_v.vectors()[v])
        } else if psi_v[v] < config.tau_rpv {
            // Flip the sign so the seed points toward the right veins ring,
            // matching the toward-the-ring orientation of the other bundles.
            (BUNDLE_RPV, -grad_v.vectors()[v])
        } else {
            (BUNDLE_APICOBASAL, grad_ab.vectors()[v])
        };
        bundle_id[v] = bundle;
        k[v] = normal;
    }

    Ok(AtrialNormals {
        k: VectorField::new(k),
        bundle_id,
        psi_ab,
        psi_v,
        psi_r,
    })
}

/// Atrial normal seeds: vertices are classified into the mitral, left-vein,
/// right-vein or apico-basal bundle by thresholding two ring potentials, and
/// each bundle takes the gradient of its own potential as the normal seed.
pub fn atrial_normals(
    mesh: &Mesh,
    config: &AtriumConfig,
    opts: &SolverOptions,
) -> Result<AtrialNormals, LdrbmError> {
    atrial_normals_impl(
        mesh,
        config,
        opts,
        Exec { sequential: false },
        &mut Diagnostics::default(),
    )
}
