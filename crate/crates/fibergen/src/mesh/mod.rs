//! Volumetric meshes with labeled boundary faces.
//!
//! A [`Mesh`] holds vertices, a homogeneous set of volume cells (linear
//! tetrahedra or trilinear hexahedra) and the subset of boundary faces that
//! carry an integer label. Labels identify anatomical surfaces (epicardium,
//! endocardium, valve rings, ...) and drive the Dirichlet data of the Laplace
//! problems downstream. Faces without a physical meaning simply do not appear
//! in the face list; the solver treats them as homogeneous Neumann.

mod generate;
mod msh;
mod refine;

pub use generate::{
    generate_curved_slab_mesh, generate_holed_shell_mesh, generate_shell_mesh, generate_slab_mesh,
    ShellHole, SLAB_LABEL_BASE_DOWN, SLAB_LABEL_BASE_UP, SLAB_LABEL_ENDO, SLAB_LABEL_EPI,
    SLAB_LABEL_SIDE,
};
pub use msh::{parse_msh, write_msh, MshError, MshVersion};
pub use refine::refine_hex_uniform;

use nalgebra::{Matrix3, Point3, Vector3};
use thiserror::Error;

/// Volume element kind. A mesh is homogeneous: all cells share one kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Tet4,
    Hex8,
}

impl ElementKind {
    pub fn nodes_per_cell(self) -> usize {
        match self {
            ElementKind::Tet4 => 4,
            ElementKind::Hex8 => 8,
        }
    }

    pub fn nodes_per_face(self) -> usize {
        match self {
            ElementKind::Tet4 => 3,
            ElementKind::Hex8 => 4,
        }
    }

    /// Local vertex pairs forming the cell edges.
    pub fn edges(self) -> &'static [(usize, usize)] {
        match self {
            ElementKind::Tet4 => &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
            ElementKind::Hex8 => &[
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 0),
                (4, 5),
                (5, 6),
                (6, 7),
                (7, 4),
                (0, 4),
                (1, 5),
                (2, 6),
                (3, 7),
            ],
        }
    }

    /// Local vertex tuples of the cell faces (as unordered sets).
    pub fn faces(self) -> &'static [&'static [usize]] {
        match self {
            ElementKind::Tet4 => &[&[0, 1, 2], &[0, 1, 3], &[0, 2, 3], &[1, 2, 3]],
            ElementKind::Hex8 => &[
                &[0, 1, 2, 3],
                &[4, 5, 6, 7],
                &[0, 1, 5, 4],
                &[1, 2, 6, 5],
                &[2, 3, 7, 6],
                &[3, 0, 4, 7],
            ],
        }
    }
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh is empty: {0}")]
    EmptyMesh(&'static str),
    #[error("cell {cell} references vertex {vertex}, but the mesh has {n_vertices} vertices")]
    DanglingIndex {
        cell: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("boundary face {face} is not a face of exactly one volume cell")]
    InvalidBoundaryFace { face: usize },
    #[error("cell {cell} is degenerate (non-positive volume after orientation fix-up)")]
    DegenerateCell { cell: usize },
    #[error("cell/face node list length is not a multiple of the element arity")]
    ArityMismatch,
    #[error("scaling factor must be positive, got {0}")]
    NonPositiveFactor(f64),
    #[error("operation requires a hexahedral mesh")]
    NotHexMesh,
    #[error("slab extent must be positive along every axis, got {0:?}")]
    NonPositiveExtent([f64; 3]),
    #[error("shell radii must satisfy 0 < r_inner < r_outer")]
    InvalidRadii,
    #[error("invalid shell hole: {0}")]
    InvalidHole(&'static str),
}

/// Per-mesh size and shape summary. Lengths are in mesh units.
///
/// `h` of a cell is its longest edge; `quality` is the worst per-cell ratio of
/// longest to shortest edge (1.0 for a cubic cell).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub n_vertices: usize,
    pub n_cells: usize,
    pub h_min: f64,
    pub h_avg: f64,
    pub h_max: f64,
    pub quality: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point3<f64>>,
    kind: ElementKind,
    /// Flat connectivity, stride `kind.nodes_per_cell()`.
    cells: Vec<usize>,
    /// Flat labeled boundary faces, stride `kind.nodes_per_face()`.
    faces: Vec<usize>,
    face_labels: Vec<i32>,
}

impl Mesh {
    /// Builds a mesh and enforces its invariants: non-empty, indices in range,
    /// positive cell volumes (cells with negative orientation are repaired by
    /// a canonical vertex swap, not rejected), and every labeled face matching
    /// exactly one cell face that lies on the boundary.
    pub fn new(
        vertices: Vec<Point3<f64>>,
        kind: ElementKind,
        mut cells: Vec<usize>,
        faces: Vec<usize>,
        face_labels: Vec<i32>,
    ) -> Result<Self, MeshError> {
        let npc = kind.nodes_per_cell();
        let npf = kind.nodes_per_face();
        if vertices.is_empty() {
            return Err(MeshError::EmptyMesh("no vertices"));
        }
        if cells.is_empty() {
            return Err(MeshError::EmptyMesh("no cells"));
        }
        if cells.len() % npc != 0 || faces.len() % npf != 0 {
            return Err(MeshError::ArityMismatch);
        }
        if face_labels.len() != faces.len() / npf {
            return Err(MeshError::ArityMismatch);
        }
        for (c, chunk) in cells.chunks(npc).enumerate() {
            for &v in chunk {
                if v >= vertices.len() {
                    return Err(MeshError::DanglingIndex {
                        cell: c,
                        vertex: v,
                        n_vertices: vertices.len(),
                    });
                }
            }
        }
        for (f, chunk) in faces.chunks(npf).enumerate() {
            for &v in chunk {
                if v >= vertices.len() {
                    return Err(MeshError::DanglingIndex {
                        cell: f,
                        vertex: v,
                        n_vertices: vertices.len(),
                    });
                }
            }
        }

        // Orientation fix-up: repair inverted cells by a canonical swap
        // (tets: swap the last two vertices; hexes: exchange bottom and top
        // quads), then insist on a positive volume.
        for c in 0..cells.len() / npc {
            let chunk = &mut cells[c * npc..(c + 1) * npc];
            let vol = signed_cell_volume(&vertices, kind, chunk);
            if vol <= 0.0 {
                match kind {
                    ElementKind::Tet4 => chunk.swap(2, 3),
                    ElementKind::Hex8 => {
                        for i in 0..4 {
                            chunk.swap(i, i + 4);
                        }
                    }
                }
                let fixed = signed_cell_volume(&vertices, kind, chunk);
                if !(fixed > 0.0) {
                    return Err(MeshError::DegenerateCell { cell: c });
                }
            }
        }

        let mesh = Mesh {
            vertices,
            kind,
            cells,
            faces,
            face_labels,
        };
        mesh.check_boundary_faces()?;
        Ok(mesh)
    }

    /// Each labeled face must match a cell face that no second cell shares.
    fn check_boundary_faces(&self) -> Result<(), MeshError> {
        use std::collections::HashMap;
        let mut count: HashMap<Vec<usize>, u32> = HashMap::new();
        for c in 0..self.n_cells() {
            let cell = self.cell(c);
            for face in self.kind.faces() {
                let mut key: Vec<usize> = face.iter().map(|&l| cell[l]).collect();
                key.sort_unstable();
                *count.entry(key).or_insert(0) += 1;
            }
        }
        for f in 0..self.n_faces() {
            let mut key: Vec<usize> = self.face(f).to_vec();
            key.sort_unstable();
            if count.get(&key) != Some(&1) {
                return Err(MeshError::InvalidBoundaryFace { face: f });
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / self.kind.nodes_per_cell()
    }

    pub fn n_faces(&self) -> usize {
        self.face_labels.len()
    }

    pub fn vertex(&self, i: usize) -> Point3<f64> {
        self.vertices[i]
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let npc = self.kind.nodes_per_cell();
        &self.cells[c * npc..(c + 1) * npc]
    }

    pub fn face(&self, f: usize) -> &[usize] {
        let npf = self.kind.nodes_per_face();
        &self.faces[f * npf..(f + 1) * npf]
    }

    pub fn face_label(&self, f: usize) -> i32 {
        self.face_labels[f]
    }

    /// Sorted list of the distinct boundary labels present.
    pub fn labels(&self) -> Vec<i32> {
        let mut l = self.face_labels.clone();
        l.sort_unstable();
        l.dedup();
        l
    }

    /// Uniformly scales every vertex coordinate.
    pub fn scale(&self, factor: f64) -> Result<Mesh, MeshError> {
        if !(factor > 0.0) {
            return Err(MeshError::NonPositiveFactor(factor));
        }
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v *= factor;
        }
        Ok(out)
    }

    /// Vertex indices lying on any boundary face whose label is in `labels`,
    /// ascending and deduplicated.
    pub fn boundary_vertices_with_labels(&self, labels: &[i32]) -> Vec<usize> {
        let mut out = Vec::new();
        for f in 0..self.n_faces() {
            if labels.contains(&self.face_label(f)) {
                out.extend_from_slice(self.face(f));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Index of the vertex closest to `p`; ties resolve to the smallest index.
    pub fn nearest_vertex(&self, p: Point3<f64>) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = (v - p).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Volume of cell `c` (trilinear hex volumes by exact 2x2x2 Gauss
    /// integration of the Jacobian determinant).
    pub fn cell_volume(&self, c: usize) -> f64 {
        signed_cell_volume(&self.vertices, self.kind, self.cell(c))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_volume(c)).sum()
    }

    pub fn statistics(&self) -> MeshStats {
        let edges = self.kind.edges();
        let mut h_min = f64::INFINITY;
        let mut h_max = 0.0f64;
        let mut h_sum = 0.0;
        let mut quality = 0.0f64;
        for c in 0..self.n_cells() {
            let cell = self.cell(c);
            let mut longest = 0.0f64;
            let mut shortest = f64::INFINITY;
            for &(a, b) in edges {
                let len = (self.vertices[cell[a]] - self.vertices[cell[b]]).norm();
                longest = longest.max(len);
                shortest = shortest.min(len);
            }
            h_min = h_min.min(longest);
            h_max = h_max.max(longest);
            h_sum += longest;
            quality = quality.max(longest / shortest);
        }
        MeshStats {
            n_vertices: self.n_vertices(),
            n_cells: self.n_cells(),
            h_min,
            h_avg: h_sum / self.n_cells() as f64,
            h_max,
            quality,
        }
    }

    /// For every vertex, the sum of the volumes of the cells touching it.
    pub fn vertex_volumes(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_vertices()];
        for c in 0..self.n_cells() {
            let vol = self.cell_volume(c);
            for &v in self.cell(c) {
                out[v] += vol;
            }
        }
        out
    }

    /// Vertex-to-vertex adjacency through shared cells (sorted, deduplicated,
    /// self excluded).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices()];
        for c in 0..self.n_cells() {
            let cell = self.cell(c);
            for &a in cell {
                for &b in cell {
                    if a != b {
                        out[a].push(b);
                    }
                }
            }
        }
        for list in &mut out {
            list.sort_unstable();
            list.dedup();
        }
        out
    }
}

/// Signed volume of a single cell; positive for correctly oriented cells.
fn signed_cell_volume(vertices: &[Point3<f64>], kind: ElementKind, cell: &[usize]) -> f64 {
    match kind {
        ElementKind::Tet4 => {
            let d = Matrix3::from_columns(&[
                vertices[cell[1]] - vertices[cell[0]],
                vertices[cell[2]] - vertices[cell[0]],
                vertices[cell[3]] - vertices[cell[0]],
            ]);
            d.determinant() / 6.0
        }
        ElementKind::Hex8 => {
            // detJ has per-variable degree <= 2, so 2-point Gauss is exact.
            const G: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)
            let mut vol = 0.0;
            for &gz in &[-G, G] {
                for &gy in &[-G, G] {
                    for &gx in &[-G, G] {
                        vol += hex_jacobian(vertices, cell, gx, gy, gz).determinant();
                    }
                }
            }
            vol
        }
    }
}

/// Reference coordinates of the 8 hex nodes, Gmsh/VTK ordering: bottom quad
/// counterclockwise, then top quad.
pub(crate) const HEX_REF: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Gradients of the 8 trilinear shape functions at reference point (x, y, z).
pub(crate) fn hex_shape_gradients(x: f64, y: f64, z: f64) -> [[f64; 3]; 8] {
    let mut out = [[0.0; 3]; 8];
    for (i, r) in HEX_REF.iter().enumerate() {
        out[i] = [
            0.125 * r[0] * (1.0 + r[1] * y) * (1.0 + r[2] * z),
            0.125 * (1.0 + r[0] * x) * r[1] * (1.0 + r[2] * z),
            0.125 * (1.0 + r[0] * x) * (1.0 + r[1] * y) * r[2],
        ];
    }
    out
}

/// Values of the 8 trilinear shape functions at reference point (x, y, z).
pub(crate) fn hex_shape_values(x: f64, y: f64, z: f64) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (i, r) in HEX_REF.iter().enumerate() {
        out[i] = 0.125 * (1.0 + r[0] * x) * (1.0 + r[1] * y) * (1.0 + r[2] * z);
    }
    out
}

/// Jacobian of the trilinear map at a reference point: column k holds
/// d(x,y,z)/d(ref_k).
pub(crate) fn hex_jacobian(
    vertices: &[Point3<f64>],
    cell: &[usize],
    x: f64,
    y: f64,
    z: f64,
) -> Matrix3<f64> {
    let grads = hex_shape_gradients(x, y, z);
    let mut j = Matrix3::zeros();
    for (i, g) in grads.iter().enumerate() {
        let p: Vector3<f64> = vertices[cell[i]].coords;
        for a in 0..3 {
            for b in 0..3 {
                j[(a, b)] += p[a] * g[b];
            }
        }
    }
    j
}
