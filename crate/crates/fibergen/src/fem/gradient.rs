//! Nodal gradient recovery from P1/Q1 scalar fields.
//!
//! Element gradients (constant per tetrahedron; the cell-center value for a
//! hexahedron) are averaged to vertices with cell volumes as weights. The
//! per-vertex sums run over incident cells in ascending cell order, so the
//! result does not depend on threading.

use super::{FemError, ScalarField, VectorField};
use crate::mesh::{hex_jacobian, hex_shape_gradients, ElementKind, Mesh};
use crate::parallel::{dispatch_map, seq_map};
use nalgebra::{Matrix3, Vector3};

/// Gradient of the interpolated field on cell `c` (evaluated at the cell
/// center for hexahedra).
fn cell_gradient(mesh: &Mesh, c: usize, u: &[f64]) -> Vector3<f64> {
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
            let du = Vector3::new(
                u[cell[1]] - u[cell[0]],
                u[cell[2]] - u[cell[0]],
                u[cell[3]] - u[cell[0]],
            );
            match d.try_inverse() {
                Some(dinv) => dinv.transpose() * du,
                None => Vector3::zeros(),
            }
        }
        ElementKind::Hex8 => {
            let jac = hex_jacobian(vertices, cell, 0.0, 0.0, 0.0);
            let ref_grads = hex_shape_gradients(0.0, 0.0, 0.0);
            let mut du = Vector3::zeros();
            for (a, rg) in ref_grads.iter().enumerate() {
                du += u[cell[a]] * Vector3::new(rg[0], rg[1], rg[2]);
            }
            match jac.try_inverse() {
                Some(jinv) => jinv.transpose() * du,
                None => Vector3::zeros(),
            }
        }
    }
}

fn gradient_impl(
    mesh: &Mesh,
    field: &ScalarField,
    sequential: bool,
) -> Result<VectorField, FemError> {
    if field.len() != mesh.n_vertices() {
        return Err(FemError::LengthMismatch {
            got: field.len(),
            expected: mesh.n_vertices(),
        });
    }
    let u = field.values();
    let n_cells = mesh.n_cells();

    let per_cell = |c: usize| -> (Vector3<f64>, f64) {
        (cell_gradient(mesh, c, u), mesh.cell_volume(c))
    };
    let cell_data: Vec<(Vector3<f64>, f64)> = if sequential {
        seq_map(n_cells, per_cell)
    } else {
        dispatch_map(n_cells, per_cell)
    };

    // Incident cells per vertex, ascending by construction.
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
    for c in 0..n_cells {
        for &v in mesh.cell(c) {
            incident[v].push(c);
        }
    }

    let per_vertex = |v: usize| -> Vector3<f64> {
        let mut sum = Vector3::zeros();
        let mut weight = 0.0;
        for &c in &incident[v] {
            let (g, vol) = cell_data[c];
            sum += vol * g;
            weight += vol;
        }
        if weight > 0.0 {
            sum / weight
        } else {
            Vector3::zeros()
        }
    };
    let grads = if sequential {
        seq_map(mesh.n_vertices(), per_vertex)
    } else {
        dispatch_map(mesh.n_vertices(), per_vertex)
    };
    Ok(VectorField::new(grads))
}

/// Volume-weighted recovery of nodal gradients.
pub fn nodal_gradient(mesh: &Mesh, field: &ScalarField) -> Result<VectorField, FemError> {
    gradient_impl(mesh, field, false)
}

/// Single-threaded twin of [`nodal_gradient`]; bitwise-identical output.
pub fn nodal_gradient_sequential(
    mesh: &Mesh,
    field: &ScalarField,
) -> Result<VectorField, FemError> {
    gradient_impl(mesh, field, true)
}
