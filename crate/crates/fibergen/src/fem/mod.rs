//! Linear finite elements on simplicial and hexahedral meshes.
//!
//! The module provides exactly what the fiber pipeline needs: continuous
//! piecewise-(tri)linear Laplace solves with Dirichlet boundary conditions,
//! and recovery of nodal gradients from the resulting scalar fields.
//!
//! * [`assemble_stiffness`] builds the P1/Q1 stiffness matrix in CSR form
//!   (tet gradients are constant per cell; hexahedra are integrated with a
//!   2x2x2 Gauss rule on the trilinear map).
//! * [`solve_laplace`] eliminates Dirichlet rows and columns symmetrically
//!   and runs a Jacobi-preconditioned conjugate gradient iteration.
//! * [`nodal_gradient`] averages per-cell gradients to vertices with cell
//!   volumes as weights.
//!
//! All kernels are data-parallel but bit-deterministic: per-cell and per-row
//! work runs on the thread pool while every reduction happens in a fixed
//! sequential order, so the `*_sequential` twins return bitwise-identical
//! results (they exist so benchmarks and tests can compare the two paths).

mod assemble;
mod gradient;
mod solver;
mod sparse;

pub use assemble::{assemble_stiffness, assemble_stiffness_sequential};
pub use gradient::{nodal_gradient, nodal_gradient_sequential};
pub use solver::{
    solve_laplace, solve_laplace_sequential, DirichletBc, Preconditioner, SolveStats,
    SolverOptions,
};
pub use sparse::CsrMatrix;

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("cell {cell} has a non-positive Jacobian at a quadrature point")]
    DegenerateCell { cell: usize },
    #[error("vertex {0} is not part of any cell, the stiffness matrix would be singular")]
    UnconnectedVertex(usize),
    #[error("vertex {vertex} is constrained to both {a} and {b}")]
    ConflictingDirichlet { vertex: usize, a: f64, b: f64 },
    #[error("no Dirichlet constraints given, the Laplace problem is singular")]
    NoDirichlet,
    #[error("Dirichlet constraint references vertex {vertex}, but the mesh has {n_vertices} vertices")]
    DanglingBcVertex { vertex: usize, n_vertices: usize },
    #[error("conjugate gradients stopped after {iterations} iterations with residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("conjugate gradients broke down at iteration {0} (operator is not positive definite)")]
    Breakdown(usize),
    #[error("field has {got} values but the mesh has {expected} vertices")]
    LengthMismatch { got: usize, expected: usize },
}

/// One `f64` per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        ScalarField(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// One 3-vector per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField(Vec<Vector3<f64>>);

impl VectorField {
    pub fn new(vectors: Vec<Vector3<f64>>) -> Self {
        VectorField(vectors)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn vectors(&self) -> &[Vector3<f64>] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Vector3<f64>> {
        self.0
    }
}

impl std::ops::Index<usize> for VectorField {
    type Output = Vector3<f64>;
    fn index(&self, i: usize) -> &Vector3<f64> {
        &self.0[i]
    }
}
