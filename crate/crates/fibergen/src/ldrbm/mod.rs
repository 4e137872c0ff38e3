//! Laplace–Dirichlet rule-based fiber construction.
//!
//! Every geometry driver follows the same pipeline: solve a transmural
//! potential `phi` (1 on the epicardium, 0 on the endocardium) plus a
//! driver-specific family of harmonic "normal direction" fields, build an
//! orthonormal local frame `[e_l, e_n, e_t]` from their nodal gradients, and
//! rotate it by the linear helical/sheetlet angle laws into the fiber triplet
//! `(f, n, s)` at every vertex.

mod drivers;
mod frame;
mod laws;
mod potentials;

pub use drivers::{generate_fibers, generate_fibers_sequential};
pub use frame::{
    build_frame, build_frame_sequential, rotate_frame, Frame, FrameFallbacks,
};
pub use laws::angle_laws;
pub use potentials::{
    atrial_normals, normal_bt, normal_doste, normal_rl, transmural_potential,
    AtrialNormals, DosteNormals,
};

use crate::fem::{FemError, ScalarField, SolveStats, VectorField};
use nalgebra::{Point3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdrbmError {
    /// A boundary role (endo, epi, base, a valve ring, ...) selected no
    /// vertices on the mesh, either because the label list is empty or
    /// because no boundary face carries any of the labels.
    #[error("boundary set for role `{0}` selects no vertices")]
    EmptyBoundarySet(String),
    /// The prescribed base normal must have a positive length.
    #[error("the normal-to-base vector must be non-zero")]
    ZeroVector,
    /// The mitral and aortic ring label sets share vertices, so the ring
    /// interpolation potential would receive conflicting boundary values.
    #[error("mitral and aortic valve rings share {0} boundary vertices")]
    OverlappingRings(usize),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Helical (`alpha`) and sheetlet (`beta`) rotation angles, in degrees, at
/// the endocardial and epicardial ends of the transmural coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSet {
    pub alpha_endo: f64,
    pub alpha_epi: f64,
    pub beta_endo: f64,
    pub beta_epi: f64,
    /// Outflow-tract endpoint angles (complete left ventricle only); `None`
    /// leaves the plain transmural law in effect everywhere.
    pub ot: Option<OtAngles>,
}

/// Endpoint angles, in degrees, that replace the [`AngleSet`] values around
/// the outflow tract of the complete left ventricle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtAngles {
    pub alpha_endo: f64,
    pub alpha_epi: f64,
    pub beta_endo: f64,
    pub beta_epi: f64,
}

impl AngleSet {
    pub fn new(alpha_endo: f64, alpha_epi: f64, beta_endo: f64, beta_epi: f64) -> Self {
        AngleSet {
            alpha_endo,
            alpha_epi,
            beta_endo,
            beta_epi,
            ot: None,
        }
    }

    pub fn with_ot(mut self, ot: OtAngles) -> Self {
        self.ot = Some(ot);
        self
    }

    /// All four endpoint angles zero: the frame is left unrotated.
    pub fn zero() -> Self {
        AngleSet::new(0.0, 0.0, 0.0, 0.0)
    }
}

/// Cartesian slab with the transmural direction across the lateral walls and
/// the apico-basal potential between the top and bottom surfaces.
#[derive(Debug, Clone)]
pub struct SlabConfig {
    pub endo_labels: Vec<i32>,
    pub epi_labels: Vec<i32>,
    pub base_up_labels: Vec<i32>,
    pub base_down_labels: Vec<i32>,
    pub angles: AngleSet,
}

/// Spherical shell with the apico-basal potential between two pole vertices;
/// `radial_fibers` swaps the fiber and sheet axes so the fibers point
/// radially instead of circumferentially.
#[derive(Debug, Clone)]
pub struct SphericalSlabConfig {
    pub endo_labels: Vec<i32>,
    pub epi_labels: Vec<i32>,
    pub north_pole: Point3<f64>,
    pub south_pole: Point3<f64>,
    pub radial_fibers: bool,
    pub angles: AngleSet,
}

/// Normal-direction strategy for the based left ventricle.
#[derive(Debug, Clone)]
pub enum LvAlgorithm {
    /// Constant normal along the prescribed outward base direction.
    Rl { normal_to_base: Vector3<f64> },
    /// Apico-basal potential between the base surface and an apex vertex.
    Bt { apex: Point3<f64> },
}

/// Left ventricle cut by a basal plane (one artificial boundary ring).
#[derive(Debug, Clone)]
pub struct LvConfig {
    pub base_labels: Vec<i32>,
    pub endo_labels: Vec<i32>,
    pub epi_labels: Vec<i32>,
    pub algorithm: LvAlgorithm,
    pub angles: AngleSet,
}

/// Complete left ventricle with mitral and aortic valve rings; the normal
/// field blends an apico-basal and an outflow-tract potential.
#[derive(Debug, Clone)]
pub struct LvCompleteConfig {
    pub mv_labels: Vec<i32>,
    pub av_labels: Vec<i32>,
    pub endo_labels: Vec<i32>,
    pub epi_labels: Vec<i32>,
    pub apex: Point3<f64>,
    pub angles: AngleSet,
}

/// Left atrium with a mitral ring and two pulmonary vein rings; vertices are
/// classified into bundles and each bundle follows its own normal field.
#[derive(Debug, Clone)]
pub struct AtriumConfig {
    pub mv_labels: Vec<i32>,
    pub lpv_labels: Vec<i32>,
    pub rpv_labels: Vec<i32>,
    pub endo_labels: Vec<i32>,
    pub epi_labels: Vec<i32>,
    /// Apex of the atrial appendage; `None` (idealized geometry) selects the
    /// vertex farthest from the mitral ring instead.
    pub appendage_apex: Option<Point3<f64>>,
    pub tau_mv: f64,
    pub tau_lpv: f64,
    pub tau_rpv: f64,
}

/// Geometry driver selection plus its role labels, coordinates and angles.
#[derive(Debug, Clone)]
pub enum GeometryConfig {
    Slab(SlabConfig),
    SphericalSlab(SphericalSlabConfig),
    LeftVentricleBased(LvConfig),
    LeftVentricleComplete(LvCompleteConfig),
    LeftAtrium(AtriumConfig),
}

/// Atrial bundle classes stored in [`FiberResult::bundle_id`].
pub const BUNDLE_APICOBASAL: i32 = 0;
pub const BUNDLE_MV: i32 = 1;
pub const BUNDLE_LPV: i32 = 2;
pub const BUNDLE_RPV: i32 = 3;

/// A user-supplied coordinate that was snapped to the nearest mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct SnappedPoint {
    pub role: String,
    pub requested: Point3<f64>,
    pub snapped: Point3<f64>,
    pub vertex: usize,
}

/// Run report: degeneracy fallbacks, snapped coordinates and solver work.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Vertices whose transmural gradient was degenerate; their axis came
    /// from the neighbour average (or the global +z fallback).
    pub et_fallbacks: usize,
    /// Vertices whose normal seed was numerically parallel to the transmural
    /// axis; a coordinate axis seeded the orthogonalization instead.
    pub en_fallbacks: usize,
    /// User-supplied coordinates snapped to mesh vertices.
    pub snapped_points: Vec<SnappedPoint>,
    /// Named Laplace solves in execution order.
    pub solves: Vec<(String, SolveStats)>,
}

/// Nodal fiber frame plus every potential that produced it.
#[derive(Debug, Clone)]
pub struct FiberResult {
    /// Fiber direction `f`.
    pub f: VectorField,
    /// Sheet-normal direction `n`.
    pub n: VectorField,
    /// Sheet (transmural) direction `s`.
    pub s: VectorField,
    /// Transmural potential.
    pub phi: ScalarField,
    /// Driver-specific auxiliary nodal scalars, in a stable per-driver order.
    pub aux: Vec<(String, ScalarField)>,
    /// Atrial bundle classification (left atrium only).
    pub bundle_id: Option<Vec<i32>>,
    pub diagnostics: Diagnostics,
}
