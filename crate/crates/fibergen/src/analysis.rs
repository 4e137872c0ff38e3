//! Cross-mesh fiber comparison.
//!
//! A fiber field computed on one mesh is interpolated at arbitrary points —
//! typically the vertices of a finer reference mesh — and compared against
//! the reference field vertex by vertex.  The per-vertex metric is the angle
//! between the two directions, taken sign-invariantly because fibers are
//! line fields: a global orientation flip must not register as error.

use nalgebra::{Matrix3, Point3, Vector3};
use thiserror::Error;

use crate::fem::VectorField;
use crate::mesh::{hex_jacobian, hex_shape_values, ElementKind, Mesh};
use crate::parallel;

/// Barycentric-coordinate tolerance for tetrahedral membership tests.
const TET_TOL: f64 = 1e-10;
/// Reference-coordinate tolerance for hexahedral membership tests.
const HEX_TOL: f64 = 1e-10;
/// Physical acceptance band, relative to the mesh's average cell size:
/// points outside every cell by more than this are flagged instead of
/// interpolated.
const OUTSIDE_BAND_REL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("field has {got} entries, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Per-vertex angular deviation between two fiber fields, in degrees.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    /// Δθ at each reference vertex, in `[0, 90]` degrees.
    pub per_vertex_deg: Vec<f64>,
    /// Mean of `per_vertex_deg` (degrees).
    pub avg_error: f64,
    /// Maximum of `per_vertex_deg` (degrees).
    pub max_error: f64,
    /// Reference vertices that fell outside every source cell and were
    /// assigned the nearest source vertex's value.
    pub n_points_outside: usize,
}

/// A field sampled at query points by [`locate_and_interpolate`].
#[derive(Debug, Clone)]
pub struct InterpolatedField {
    /// One vector per query point, in query order.
    pub vectors: Vec<Vector3<f64>>,
    /// Query points outside every source cell (assigned nearest-vertex
    /// values).
    pub n_outside: usize,
}

/// Uniform-grid accelerator over cell bounding boxes.
struct CellLocator<'a> {
    mesh: &'a Mesh,
    origin: Point3<f64>,
    inv_h: [f64; 3],
    dims: [usize; 3],
    bins: Vec<Vec<u32>>,
    /// Physical half-width of the acceptance band around each cell.
    band: f64,
}

impl<'a> CellLocator<'a> {
    fn build(mesh: &'a Mesh) -> Self {
        let stats = mesh.statistics();
        let band = OUTSIDE_BAND_REL * stats.h_avg;
        let verts = mesh.vertices();
        let mut lo = verts[0];
        let mut hi = verts[0];
        for p in verts {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let mut dims = [1usize; 3];
        let mut inv_h = [0.0f64; 3];
        for a in 0..3 {
            let extent = (hi[a] - lo[a]).max(stats.h_avg * 1e-3);
            dims[a] = ((extent / stats.h_avg).round() as usize).clamp(1, 128);
            inv_h[a] = dims[a] as f64 / extent;
        }
        let mut bins = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let pad = band + 1e-12 * (hi - lo).norm();
        for c in 0..mesh.n_cells() {
            let cell = mesh.cell(c);
            let mut clo = verts[cell[0]];
            let mut chi = verts[cell[0]];
            for &v in cell {
                for a in 0..3 {
                    clo[a] = clo[a].min(verts[v][a]);
                    chi[a] = chi[a].max(verts[v][a]);
                }
            }
            let b0 = Self::bin_coords(&lo, &inv_h, &dims, &Point3::new(clo.x - pad, clo.y - pad, clo.z - pad));
            let b1 = Self::bin_coords(&lo, &inv_h, &dims, &Point3::new(chi.x + pad, chi.y + pad, chi.z + pad));
            for i in b0[0]..=b1[0] {
                for j in b0[1]..=b1[1] {
                    for k in b0[2]..=b1[2] {
                        bins[(i * dims[1] + j) * dims[2] + k].push(c as u32);
                    }
                }
            }
        }
        Self { mesh, origin: lo, inv_h, dims, bins, band }
    }

    fn bin_coords(
        origin: &Point3<f64>,
        inv_h: &[f64; 3],
        dims: &[usize; 3],
        p: &Point3<f64>,
    ) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let t = ((p[a] - origin[a]) * inv_h[a]).floor();
            out[a] = (t.max(0.0) as usize).min(dims[a] - 1);
        }
        out
    }

    fn bin_of(&self, p: &Point3<f64>) -> [usize; 3] {
        Self::bin_coords(&self.origin, &self.inv_h, &self.dims, p)
    }

    /// Interpolates `field` at `p`.  The `bool` is true when `p` was outside
    /// every cell beyond the acceptance band and got the nearest vertex's
    /// value.
    fn sample(&self, field: &[Vector3<f64>], p: &Point3<f64>) -> (Vector3<f64>, bool) {
        let b = self.bin_of(p);
        let own = &self.bins[(b[0] * self.dims[1] + b[1]) * self.dims[2] + b[2]];

        // Exact pass: a cell containing `p` is always registered in `p`'s
        // own bin because cell boxes cover their cells.
        for &c in own {
            if let Some(hit) = self.try_cell_exact(field, c as usize, p) {
                return (hit, false);
            }
        }

        // Banded pass over the 3x3x3 bin neighborhood: take the candidate
        // whose clamped-to-cell image lies closest to `p`.
        let mut best: Option<(f64, Vector3<f64>)> = None;
        for i in b[0].saturating_sub(1)..(b[0] + 2).min(self.dims[0]) {
            for j in b[1].saturating_sub(1)..(b[1] + 2).min(self.dims[1]) {
                for k in b[2].saturating_sub(1)..(b[2] + 2).min(self.dims[2]) {
                    for &c in &self.bins[(i * self.dims[1] + j) * self.dims[2] + k] {
                        let (d2, value) = self.clamped_sample(field, c as usize, p);
                        if best.as_ref().is_none_or(|(bd, _)| d2 < *bd) {
                            best = Some((d2, value));
                        }
                    }
                }
            }
        }
        if let Some((d2, value)) = best {
            if d2.sqrt() <= self.band {
                return (value, false);
            }
        }

        // Outside the band: nearest source vertex, lowest index on ties.
        let verts = self.mesh.vertices();
        let mut vmin = 0usize;
        let mut dmin = f64::INFINITY;
        for (v, q) in verts.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < dmin {
                dmin = d;
                vmin = v;
            }
        }
        (field[vmin], true)
    }

    /// Membership test with interpolation; `None` when `p` is not in cell
    /// `c` (within tolerance).  Query points coinciding bitwise with a cell
    /// vertex short-circuit to that vertex's value.
    fn try_cell_exact(
        &self,
        field: &[Vector3<f64>],
        c: usize,
        p: &Point3<f64>,
    ) -> Option<Vector3<f64>> {
        let verts = self.mesh.vertices();
        let cell = self.mesh.cell(c);
        for &v in cell {
            let q = verts[v];
            if p.x == q.x && p.y == q.y && p.z == q.z {
                return Some(field[v]);
            }
        }
        match self.mesh.kind() {
            ElementKind::Tet4 => {
                let lam = tet_barycentric(verts, cell, p)?;
                if lam.iter().all(|&l| l >= -TET_TOL) {
                    let mut out = Vector3::zeros();
                    for (i, &v) in cell.iter().enumerate() {
                        out += lam[i] * field[v];
                    }
                    Some(out)
                } else {
                    None
                }
            }
            ElementKind::Hex8 => {
                let xi = hex_inverse_map(verts, cell, p)?;
                if xi.iter().all(|&x| x.abs() <= 1.0 + HEX_TOL) {
                    let shape = hex_shape_values(xi[0], xi[1], xi[2]);
                    let mut out = Vector3::zeros();
                    for (i, &v) in cell.iter().enumerate() {
                        out += shape[i] * field[v];
                    }
                    Some(out)
                } else {
                    None
                }
            }
        }
    }

    /// Squared distance from `p` to the image of its clamped local
    /// coordinates in cell `c`, plus the field value there.
    fn clamped_sample(
        &self,
        field: &[Vector3<f64>],
        c: usize,
        p: &Point3<f64>,
    ) -> (f64, Vector3<f64>) {
        let verts = self.mesh.vertices();
        let cell = self.mesh.cell(c);
        let (weights, mapped): (Vec<f64>, Point3<f64>) = match self.mesh.kind() {
            ElementKind::Tet4 => {
                let lam = tet_barycentric(verts, cell, p).unwrap_or([0.25; 4]);
                let mut clamped = lam.map(|l| l.max(0.0));
                let sum: f64 = clamped.iter().sum();
                for l in &mut clamped {
                    *l /= sum;
                }
                let mut x = Vector3::zeros();
                for (i, &v) in cell.iter().enumerate() {
                    x += clamped[i] * verts[v].coords;
                }
                (clamped.to_vec(), Point3::from(x))
            }
            ElementKind::Hex8 => {
                let xi = hex_inverse_map(verts, cell, p).unwrap_or([0.0; 3]);
                let clamped = xi.map(|x| x.clamp(-1.0, 1.0));
                let shape = hex_shape_values(clamped[0], clamped[1], clamped[2]);
                let mut x = Vector3::zeros();
                for (i, &v) in cell.iter().enumerate() {
                    x += shape[i] * verts[v].coords;
                }
                (shape.to_vec(), Point3::from(x))
            }
        };
        let mut out = Vector3::zeros();
        for (i, &v) in cell.iter().enumerate() {
            out += weights[i] * field[v];
        }
        ((p - mapped).norm_squared(), out)
    }
}

/// Barycentric coordinates of `p` in the tet `cell`; `None` for a degenerate
/// cell.
fn tet_barycentric(
    verts: &[Point3<f64>],
    cell: &[usize],
    p: &Point3<f64>,
) -> Option<[f64; 4]> {
    let p0 = verts[cell[0]];
    let d = Matrix3::from_columns(&[
        verts[cell[1]] - p0,
        verts[cell[2]] - p0,
        verts[cell[3]] - p0,
    ]);
    let inv = d.try_inverse()?;
    let lam = inv * (p - p0);
    Some([1.0 - lam.x - lam.y - lam.z, lam.x, lam.y, lam.z])
}

/// Inverts the trilinear map of a hex by Newton iteration; returns reference
/// coordinates (possibly outside `[-1,1]^3` for exterior points), or `None`
/// when the iteration does not converge.
fn hex_inverse_map(verts: &[Point3<f64>], cell: &[usize], p: &Point3<f64>) -> Option<[f64; 3]> {
    let scale: f64 = (verts[cell[6]] - verts[cell[0]]).norm().max(f64::MIN_POSITIVE);
    let mut xi = [0.0f64; 3];
    for _ in 0..30 {
        let shape = hex_shape_values(xi[0], xi[1], xi[2]);
        let mut x = Vector3::zeros();
        for (i, &v) in cell.iter().enumerate() {
            x += shape[i] * verts[v].coords;
        }
        let r = p.coords - x;
        if r.norm() <= 1e-14 * scale {
            return Some(xi);
        }
        let j = hex_jacobian(verts, cell, xi[0], xi[1], xi[2]);
        let step = j.try_inverse()? * r;
        xi[0] += step.x;
        xi[1] += step.y;
        xi[2] += step.z;
        // Keep the iterate in the basin of the cell-local branch.
        for x in &mut xi {
            *x = x.clamp(-4.0, 4.0);
        }
        if step.norm() <= 1e-15 {
            return Some(xi);
        }
    }
    let shape = hex_shape_values(xi[0], xi[1], xi[2]);
    let mut x = Vector3::zeros();
    for (i, &v) in cell.iter().enumerate() {
        x += shape[i] * verts[v].coords;
    }
    if (p.coords - x).norm() <= 1e-10 * scale {
        Some(xi)
    } else {
        None
    }
}

/// Samples a nodal vector field of `mesh` at arbitrary points.
///
/// Points are located with barycentric coordinates (tets) or a Newton
/// inversion of the trilinear map (hexes) and interpolated with the cell's
/// shape functions.  Points outside every cell by more than
/// `1e-8 * h_avg` are counted in `n_outside` and given the nearest source
/// vertex's value.
///
/// # Panics
/// Panics when `field` is not nodal on `mesh`.
pub fn locate_and_interpolate(
    mesh: &Mesh,
    field: &VectorField,
    points: &[Point3<f64>],
) -> InterpolatedField {
    assert_eq!(
        field.len(),
        mesh.n_vertices(),
        "field must be nodal on the source mesh"
    );
    let locator = CellLocator::build(mesh);
    let vectors = field.vectors();
    let sampled = parallel::map_indexed(false, points.len(), |i| {
        locator.sample(vectors, &points[i])
    });
    let n_outside = sampled.iter().filter(|(_, outside)| *outside).count();
    InterpolatedField {
        vectors: sampled.into_iter().map(|(v, _)| v).collect(),
        n_outside,
    }
}

/// Angle in degrees between two line directions (sign-invariant).
fn line_angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot = (a.dot(b) / (na * nb)).clamp(-1.0, 1.0);
    dot.abs().acos().to_degrees()
}

/// Per-vertex angular deviation of `coarse_at_ref` from `reference`.
///
/// Both vectors are normalized and compared as line directions: the dot
/// product's absolute value feeds `arccos`, so a global sign flip yields
/// zero error.  `n_points_outside` is left at zero; [`mesh_sensitivity`]
/// fills it in.
pub fn angle_error(
    coarse_at_ref: &[Vector3<f64>],
    reference: &VectorField,
) -> Result<SensitivityReport, AnalysisError> {
    if coarse_at_ref.len() != reference.len() {
        return Err(AnalysisError::LengthMismatch {
            got: coarse_at_ref.len(),
            expected: reference.len(),
        });
    }
    let per_vertex_deg: Vec<f64> = coarse_at_ref
        .iter()
        .zip(reference.vectors())
        .map(|(a, b)| line_angle_deg(a, b))
        .collect();
    let max_error = per_vertex_deg.iter().copied().fold(0.0, f64::max);
    let avg_error = if per_vertex_deg.is_empty() {
        0.0
    } else {
        per_vertex_deg.iter().sum::<f64>() / per_vertex_deg.len() as f64
    };
    Ok(SensitivityReport {
        per_vertex_deg,
        avg_error,
        max_error,
        n_points_outside: 0,
    })
}

/// Interpolates `coarse_field` at the vertices of `reference_mesh` and
/// reports the angular deviation from `reference_field` there.
pub fn mesh_sensitivity(
    coarse_mesh: &Mesh,
    coarse_field: &VectorField,
    reference_mesh: &Mesh,
    reference_field: &VectorField,
) -> Result<SensitivityReport, AnalysisError> {
    if coarse_field.len() != coarse_mesh.n_vertices() {
        return Err(AnalysisError::LengthMismatch {
            got: coarse_field.len(),
            expected: coarse_mesh.n_vertices(),
        });
    }
    if reference_field.len() != reference_mesh.n_vertices() {
        return Err(AnalysisError::LengthMismatch {
            got: reference_field.len(),
            expected: reference_mesh.n_vertices(),
        });
    }
    let sampled = locate_and_interpolate(coarse_mesh, coarse_field, reference_mesh.vertices());
    let mut report = angle_error(&sampled.vectors, reference_field)?;
    report.n_points_outside = sampled.n_outside;
    Ok(report)
}

/// Machine-readable form of a report: a `vertex_id,dtheta_deg` CSV followed
/// by `avg_deg=` and `max_deg=` summary lines.
pub fn report_csv(report: &SensitivityReport) -> String {
    let mut out = String::with_capacity(32 * report.per_vertex_deg.len() + 64);
    out.push_str("vertex_id,dtheta_deg\n");
    for (v, dt) in report.per_vertex_deg.iter().enumerate() {
        out.push_str(&format!("{v},{dt}\n"));
    }
    out.push_str(&format!("avg_deg={}\n", report.avg_error));
    out.push_str(&format!("max_deg={}\n", report.max_error));
    out
}
