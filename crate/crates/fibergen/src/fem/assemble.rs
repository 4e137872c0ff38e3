//! Stiffness matrix assembly for P1 tetrahedra and Q1 hexahedra.
//!
//! Per-cell element matrices are computed independently (in parallel under
//! the `parallel` feature) and then accumulated into the CSR matrix on one
//! thread in ascending cell order. Floating-point sums therefore happen in
//! one fixed order and the assembled matrix is bitwise independent of the
//! thread count.

use super::{CsrMatrix, FemError};
use crate::mesh::{hex_jacobian, hex_shape_gradients, ElementKind, Mesh};
use crate::parallel::{dispatch_fill_chunks, seq_fill_chunks};
use nalgebra::{Matrix3, Vector3};

const GAUSS: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// Builds the sparsity pattern of the P1/Q1 stiffness matrix: one row per
/// vertex, with the vertex itself and every cell-sharing neighbor as columns.
fn csr_structure(mesh: &Mesh) -> Result<CsrMatrix, FemError> {
    let neighbors = mesh.vertex_neighbors();
    let mut rows = Vec::with_capacity(neighbors.len());
    for (i, nb) in neighbors.into_iter().enumerate() {
        if nb.is_empty() {
            return Err(FemError::UnconnectedVertex(i));
        }
        let mut row = nb;
        let pos = row.binary_search(&i).unwrap_err();
        row.insert(pos, i);
        rows.push(row);
    }
    Ok(CsrMatrix::from_structure(&rows))
}

/// Writes the element stiffness matrix of cell `c` into `out` (row-major,
/// `nloc * nloc` entries). Returns `false` for a non-positive Jacobian.
fn element_matrix(mesh: &Mesh, c: usize, out: &mut [f64]) -> bool {
    let cell = mesh.cell(c);
    let vertices = mesh.vertices();
    match mesh.kind() {
        ElementKind::Tet4 => {
            let p0 = vertices[cell[0]];
            let d = Matrix3::from_columns(&[
                vertices[cell[1]] - p0,
                vertices[cell[2]] - p0,
                vertices[cell[3]] - p0,
            ]);
            let det = d.determinant();
            if !(det > 0.0) {
                return false;
            }
            let Some(dinv) = d.try_inverse() else { return false };
            let g1: Vector3<f64> = dinv.row(0).transpose();
            let g2: Vector3<f64> = dinv.row(1).transpose();
            let g3: Vector3<f64> = dinv.row(2).transpose();
            let g0 = -(g1 + g2 + g3);
            let g = [g0, g1, g2, g3];
            let vol = det / 6.0;
            for a in 0..4 {
                for b in 0..4 {
                    out[a * 4 + b] = vol * g[a].dot(&g[b]);
                }
            }
            true
        }
        ElementKind::Hex8 => {
            out.fill(0.0);
            for &gz in &[-GAUSS, GAUSS] {
                for &gy in &[-GAUSS, GAUSS] {
                    for &gx in &[-GAUSS, GAUSS] {
                        let jac = hex_jacobian(vertices, cell, gx, gy, gz);
                        let det = jac.determinant();
                        if !(det > 0.0) {
                            return false;
                        }
                        let Some(jinv) = jac.try_inverse() else { return false };
                        let jinv_t = jinv.transpose();
                        let ref_grads = hex_shape_gradients(gx, gy, gz);
                        let mut g = [Vector3::zeros(); 8];
                        for (a, rg) in ref_grads.iter().enumerate() {
                            g[a] = jinv_t * Vector3::new(rg[0], rg[1], rg[2]);
                        }
                        for a in 0..8 {
                            for b in 0..8 {
                                out[a * 8 + b] += det * g[a].dot(&g[b]);
                            }
                        }
                    }
                }
            }
            true
        }
    }
}

fn assemble_impl(mesh: &Mesh, sequential: bool) -> Result<CsrMatrix, FemError> {
    let mut k = csr_structure(mesh)?;
    let nloc = mesh.kind().nodes_per_cell();
    let n_cells = mesh.n_cells();

    // Chunk layout per cell: nloc*nloc element entries plus one status slot
    // (0 = ok, 1 = degenerate), so a single parallel pass fills everything.
    let stride = nloc * nloc + 1;
    let mut buf = vec![0.0f64; n_cells * stride];
    let fill = |c: usize, chunk: &mut [f64]| {
        let ok = element_matrix(mesh, c, &mut chunk[..nloc * nloc]);
        chunk[nloc * nloc] = if ok { 0.0 } else { 1.0 };
    };
    if sequential {
        seq_fill_chunks(&mut buf, stride, fill);
    } else {
        dispatch_fill_chunks(&mut buf, stride, fill);
    }

    for c in 0..n_cells {
        let chunk = &buf[c * stride..(c + 1) * stride];
        if chunk[nloc * nloc] != 0.0 {
            return Err(FemError::DegenerateCell { cell: c });
        }
        let cell = mesh.cell(c);
        for a in 0..nloc {
            for b in 0..nloc {
                k.add_at(cell[a], cell[b], chunk[a * nloc + b]);
            }
        }
    }
    Ok(k)
}

/// Assembles the stiffness matrix of the Laplace operator with unit
/// conductivity. Element matrices are computed in parallel; accumulation is
/// sequential in cell order, so the result is bit-deterministic.
pub fn assemble_stiffness(mesh: &Mesh) -> Result<CsrMatrix, FemError> {
    assemble_impl(mesh, false)
}

/// Single-threaded twin of [`assemble_stiffness`]; bitwise-identical output.
pub fn assemble_stiffness_sequential(mesh: &Mesh) -> Result<CsrMatrix, FemError> {
    assemble_impl(mesh, true)
}
