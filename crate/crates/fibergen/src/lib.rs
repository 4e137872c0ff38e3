//! Rule-based cardiac fiber generation on tetrahedral and hexahedral meshes.
//!
//! The library solves Laplace problems on a volumetric mesh to build smooth
//! intramural coordinates (transmural, apicobasal, inter-valve), derives an
//! orthonormal local frame from their gradients, and rotates that frame by
//! pointwise angle laws to produce fiber (`f`), sheet (`s`) and sheet-normal
//! (`n`) unit vectors at every mesh vertex. Five geometry drivers are
//! provided: a flat or curved slab, an idealized left ventricle (with either
//! a prescribed base normal or an apex-to-base potential), a left ventricle
//! with both mitral and aortic rings, and a left atrium with bundle-based
//! directions.
//!
//! Modules:
//! - [`mesh`]: mesh type, generators, Gmsh I/O, uniform refinement;
//! - [`fem`]: P1 stiffness assembly, CG solver, nodal gradient recovery;
//! - [`ldrbm`]: potentials, frames, angle laws, and the geometry drivers;
//! - [`output`]: VTU (ASCII XML) result writer;
//! - [`analysis`]: point location, interpolation, inter-mesh fiber
//!   comparison;
//! - [`params`]: declarative parameter tree with prm/json/xml round-trip;
//! - [`cli`]: the command-line front end used by the `fibergen` binary.
//!
//! The numeric core is data-parallel via `rayon` when the default `parallel`
//! feature is enabled, and falls back to sequential loops without it. Both
//! paths produce bitwise-identical results: parallelism is only used for
//! embarrassingly parallel maps, and every reduction happens in a fixed
//! sequential order.

pub mod analysis;
pub mod fem;
pub mod ldrbm;
pub mod mesh;
pub mod output;
pub(crate) mod parallel;
