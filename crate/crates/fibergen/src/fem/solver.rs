//! Dirichlet elimination and a Jacobi-preconditioned conjugate gradient
//! solver for the assembled Laplace problems.

use super::{assemble_stiffness, assemble_stiffness_sequential, CsrMatrix, FemError, ScalarField};
use crate::mesh::Mesh;
use std::collections::BTreeMap;

/// A set of Dirichlet constraints, one value per constrained vertex.
#[derive(Debug, Clone)]
pub struct DirichletBc {
    /// Sorted by vertex, no duplicates.
    constraints: Vec<(usize, f64)>,
}

impl DirichletBc {
    /// Merges `(vertices, value)` sets into one constraint list. A vertex may
    /// appear in several sets only with the same value; an empty union is
    /// rejected because it leaves the Laplace problem singular.
    pub fn from_sets(sets: &[(&[usize], f64)]) -> Result<Self, FemError> {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (vertices, value) in sets {
            for &v in *vertices {
                match map.insert(v, *value) {
                    None => {}
                    Some(prev) if prev == *value => {}
                    Some(prev) => {
                        return Err(FemError::ConflictingDirichlet {
                            vertex: v,
                            a: prev,
                            b: *value,
                        })
                    }
                }
            }
        }
        if map.is_empty() {
            return Err(FemError::NoDirichlet);
        }
        Ok(DirichletBc {
            constraints: map.into_iter().collect(),
        })
    }

    pub fn constraints(&self) -> &[(usize, f64)] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    Jacobi,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when the residual norm drops below `rel_tol * |b|`.
    pub rel_tol: f64,
    /// ... or below this absolute floor, whichever is larger.
    pub abs_tol: f64,
    /// Iteration cap; `None` means ten times the number of unknowns.
    pub max_iters: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_iters: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Symmetric Dirichlet elimination: constrained rows and columns are zeroed
/// with a unit diagonal, and the right-hand side absorbs the moved columns.
/// Returns the right-hand side; iteration order is fixed, so this is
/// deterministic.
fn apply_dirichlet(
    k: &mut CsrMatrix,
    bc: &DirichletBc,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>), FemError> {
    let mut is_bc = vec![false; n];
    let mut g = vec![0.0; n];
    for &(v, value) in bc.constraints() {
        if v >= n {
            return Err(FemError::DanglingBcVertex {
                vertex: v,
                n_vertices: n,
            });
        }
        is_bc[v] = true;
        g[v] = value;
    }
    let mut b = vec![0.0; n];
    for i in 0..n {
        let (cols, vals) = k.row_mut(i);
        if is_bc[i] {
            for (idx, &j) in cols.iter().enumerate() {
                vals[idx] = if j == i { 1.0 } else { 0.0 };
            }
            b[i] = g[i];
        } else {
            for (idx, &j) in cols.iter().enumerate() {
                if is_bc[j] {
                    b[i] -= vals[idx] * g[j];
                    vals[idx] = 0.0;
                }
            }
        }
    }
    Ok((b, g))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients; matrix-vector products may run in
/// parallel, every reduction is sequential.
fn pcg(
    k: &CsrMatrix,
    b: &[f64],
    mut x: Vec<f64>,
    opts: &SolverOptions,
    sequential: bool,
) -> Result<(Vec<f64>, SolveStats), FemError> {
    let n = k.n();
    let norm_b = norm(b);
    if norm_b == 0.0 {
        // Zero data means the zero solution, exactly.
        return Ok((
            vec![0.0; n],
            SolveStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let tol = f64::max(opts.rel_tol * norm_b, opts.abs_tol);
    let max_iters = opts.max_iters.unwrap_or(10 * n);

    let inv_diag: Option<Vec<f64>> = match opts.preconditioner {
        Preconditioner::Jacobi => {
            let mut inv = k.diagonal();
            for d in &mut inv {
                if !(*d > 0.0) {
                    return Err(FemError::Breakdown(0));
                }
                *d = 1.0 / *d;
            }
            Some(inv)
        }
        Preconditioner::None => None,
    };
    let precondition = |r: &[f64]| -> Vec<f64> {
        match &inv_diag {
            Some(inv) => r.iter().zip(inv).map(|(x, m)| x * m).collect(),
            None => r.to_vec(),
        }
    };
    let spmv = |v: &[f64]| -> Vec<f64> {
        if sequential {
            k.mul_vec_sequential(v)
        } else {
            k.mul_vec(v)
        }
    };

    let kx = spmv(&x);
    let mut r: Vec<f64> = b.iter().zip(&kx).map(|(bi, ki)| bi - ki).collect();
    let mut res = norm(&r);
    if res <= tol {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                residual: res,
            },
        ));
    }
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    for it in 1..=max_iters {
        let kp = spmv(&p);
        let pkp = dot(&p, &kp);
        if !pkp.is_finite() || pkp <= 0.0 {
            return Err(FemError::Breakdown(it));
        }
        let alpha = rz / pkp;
        for i in 0..n {
            x[i] += alpha * p[i];
        }
        for i in 0..n {
            r[i] -= alpha * kp[i];
        }
        res = norm(&r);
        if res <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    residual: res,
                },
            ));
        }
        z = precondition(&r);
        let rz_next = dot(&r, &z);
        if !rz_next.is_finite() || rz_next <= 0.0 {
            return Err(FemError::Breakdown(it));
        }
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(FemError::NoConvergence {
        iterations: max_iters,
        residual: res,
    })
}

fn solve_impl(
    mesh: &Mesh,
    bc: &DirichletBc,
    opts: &SolverOptions,
    sequential: bool,
) -> Result<(ScalarField, SolveStats), FemError> {
    let mut k = if sequential {
        assemble_stiffness_sequential(mesh)?
    } else {
        assemble_stiffness(mesh)?
    };
    let n = mesh.n_vertices();
    let (b, g) = apply_dirichlet(&mut k, bc, n)?;
    // Starting from the boundary values keeps constrained entries exact for
    // the whole iteration (their residual starts and stays at zero).
    let (x, stats) = pcg(&k, &b, g, opts, sequential)?;
    Ok((ScalarField::new(x), stats))
}

/// Solves `-div(grad u) = 0` with the given Dirichlet data.
pub fn solve_laplace(
    mesh: &Mesh,
    bc: &DirichletBc,
    opts: &SolverOptions,
) -> Result<(ScalarField, SolveStats), FemError> {
    solve_impl(mesh, bc, opts, false)
}

/// Single-threaded twin of [`solve_laplace`]; bitwise-identical output.
pub fn solve_laplace_sequential(
    mesh: &Mesh,
    bc: &DirichletBc,
    opts: &SolverOptions,
) -> Result<(ScalarField, SolveStats), FemError> {
    solve_impl(mesh, bc, opts, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{
        generate_slab_mesh, ElementKind, Mesh, SLAB_LABEL_ENDO, SLAB_LABEL_EPI,
    };
    use nalgebra::Point3;

    fn slab_bc(mesh: &Mesh) -> DirichletBc {
        let endo = mesh.boundary_vertices_with_labels(&[SLAB_LABEL_ENDO]);
        let epi = mesh.boundary_vertices_with_labels(&[SLAB_LABEL_EPI]);
        DirichletBc::from_sets(&[(&endo, 0.0), (&epi, 1.0)]).unwrap()
    }

    #[test]
    fn linear_solution_is_reproduced_to_solver_tolerance() {
        for kind in [ElementKind::Tet4, ElementKind::Hex8] {
            let extent = [2.0, 1.0, 1.0];
            let mesh = generate_slab_mesh(extent, [4, 3, 3], kind).unwrap();
            let bc = slab_bc(&mesh);
            let (u, stats) = solve_laplace(&mesh, &bc, &SolverOptions::default()).unwrap();
            assert!(stats.iterations > 0);
            for (v, value) in mesh.vertices().iter().zip(u.values()) {
                let exact = v.x / extent[0];
                assert!(
                    (value - exact).abs() < 1e-10,
                    "{kind:?}: u({v:?}) = {value}, want {exact}"
                );
            }
        }
    }

    #[test]
    fn boundary_values_are_bitwise_exact() {
        let mesh = generate_slab_mesh([1.0, 1.0, 1.0], [3, 3, 3], ElementKind::Hex8).unwrap();
        let bc = slab_bc(&mesh);
        let (u, _) = solve_laplace(&mesh, &bc, &SolverOptions::default()).unwrap();
        for &(v, value) in bc.constraints() {
            assert_eq!(u[v].to_bits(), value.to_bits());
        }
    }

    #[test]
    fn zero_boundary_data_returns_exact_zeros_without_iterating() {
        let mesh = generate_slab_mesh([1.0, 1.0, 1.0], [2, 2, 2], ElementKind::Tet4).unwrap();
        let endo = mesh.boundary_vertices_with_labels(&[SLAB_LABEL_ENDO]);
        let bc = DirichletBc::from_sets(&[(&endo, 0.0)]).unwrap();
        let (u, stats) = solve_laplace(&mesh, &bc, &SolverOptions::default()).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(u.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let mesh = generate_slab_mesh([1.0, 1.0, 1.0], [4, 4, 4], ElementKind::Hex8).unwrap();
        let bc = slab_bc(&mesh);
        let opts = SolverOptions {
            max_iters: Some(1),
            ..SolverOptions::default()
        };
        match solve_laplace(&mesh, &bc, &opts) {
            Err(FemError::NoConvergence { iterations: 1, residual }) => {
                assert!(residual > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn jacobi_and_unpreconditioned_solutions_agree() {
        let mesh = generate_slab_mesh([1.5, 1.0, 0.7], [4, 3, 3], ElementKind::Tet4).unwrap();
        let bc = slab_bc(&mesh);
        let jacobi = SolverOptions::default();
        let plain = SolverOptions {
            preconditioner: Preconditioner::None,
            ..SolverOptions::default()
        };
        let (a, _) = solve_laplace(&mesh, &bc, &jacobi).unwrap();
        let (b, _) = solve_laplace(&mesh, &bc, &plain).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn vertex_renumbering_does_not_change_the_solution() {
        let mesh = generate_slab_mesh([1.0, 1.0, 1.0], [3, 2, 2], ElementKind::Tet4).unwrap();
        let n = mesh.n_vertices();
        // Reverse the vertex numbering.
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut verts = vec![Point3::origin(); n];
        for (old, &new) in perm.iter().enumerate() {
            verts[new] = mesh.vertex(old);
        }
        let cells: Vec<usize> = (0..mesh.n_cells())
            .flat_map(|c| mesh.cell(c).iter().map(|&v| perm[v]).collect::<Vec<_>>())
            .collect();
        let faces: Vec<usize> = (0..mesh.n_faces())
            .flat_map(|f| mesh.face(f).iter().map(|&v| perm[v]).collect::<Vec<_>>())
            .collect();
        let labels: Vec<i32> = (0..mesh.n_faces()).map(|f| mesh.face_label(f)).collect();
        let renumbered = Mesh::new(verts, ElementKind::Tet4, cells, faces, labels).unwrap();

        let (a, _) = solve_laplace(&mesh, &slab_bc(&mesh), &SolverOptions::default()).unwrap();
        let (b, _) =
            solve_laplace(&renumbered, &slab_bc(&renumbered), &SolverOptions::default()).unwrap();
        for old in 0..n {
            assert!((a[old] - b[perm[old]]).abs() < 1e-9);
        }
    }

    #[test]
    fn conflicting_and_empty_constraints_are_rejected() {
        match DirichletBc::from_sets(&[(&[1, 2], 0.0), (&[2, 3], 1.0)]) {
            Err(FemError::ConflictingDirichlet { vertex: 2, a, b }) => {
                assert_eq!((a, b), (0.0, 1.0));
            }
            other => panic!("expected ConflictingDirichlet, got {other:?}"),
        }
        // The same value twice is not a conflict.
        assert!(DirichletBc::from_sets(&[(&[1, 2], 0.5), (&[2, 3], 0.5)]).is_ok());
        match DirichletBc::from_sets(&[]) {
            Err(FemError::NoDirichlet) => {}
            other => panic!("expected NoDirichlet, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_constraint_is_rejected() {
        let mesh = generate_slab_mesh([1.0, 1.0, 1.0], [1, 1, 1], ElementKind::Hex8).unwrap();
        let bc = DirichletBc::from_sets(&[(&[0], 0.0), (&[999], 1.0)]).unwrap();
        match solve_laplace(&mesh, &bc, &SolverOptions::default()) {
            Err(FemError::DanglingBcVertex { vertex: 999, .. }) => {}
            other => panic!("expected DanglingBcVertex, got {other:?}"),
        }
    }
}
