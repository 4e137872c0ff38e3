//! Uniform refinement of hexahedral meshes.

use super::{ElementKind, Mesh, MeshError};
use nalgebra::Point3;
use std::collections::HashMap;

/// Splits every hexahedron into 8 children through edge, face and cell
/// midpoints. Midpoints are arithmetic means of the defining corner vertices,
/// which reproduces the trilinear cell geometry exactly, so the refined mesh
/// covers the same domain (and volume) as the input. Boundary quads split into
/// 4 children inheriting the parent label.
pub fn refine_hex_uniform(mesh: &Mesh) -> Result<Mesh, MeshError> {
    if mesh.kind() != ElementKind::Hex8 {
        return Err(MeshError::NotHexMesh);
    }

    let mut vertices: Vec<Point3<f64>> = mesh.vertices().to_vec();
    // Keyed by the sorted corner indices of the defining entity, so shared
    // edges/faces dedup exactly regardless of float coordinates.
    let mut midpoint_ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut midpoint = |corners: &[usize], vertices: &mut Vec<Point3<f64>>| -> usize {
        let mut key = corners.to_vec();
        key.sort_unstable();
        *midpoint_ids.entry(key).or_insert_with(|| {
            let mut sum = nalgebra::Vector3::zeros();
            for &c in corners {
                sum += vertices[c].coords;
            }
            vertices.push(Point3::from(sum / corners.len() as f64));
            vertices.len() - 1
        })
    };

    // 3x3x3 lattice per cell: corners at even coordinates, midpoints odd.
    // Local corner c sits at lattice position derived from HEX_REF.
    const CORNER_AT: [(usize, usize, usize); 8] = [
        (0, 0, 0),
        (2, 0, 0),
        (2, 2, 0),
        (0, 2, 0),
        (0, 0, 2),
        (2, 0, 2),
        (2, 2, 2),
        (0, 2, 2),
    ];

    let mut cells: Vec<usize> = Vec::with_capacity(mesh.n_cells() * 64);
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        let mut lattice = [[[usize::MAX; 3]; 3]; 3];
        for (a, &(x, y, z)) in CORNER_AT.iter().enumerate() {
            lattice[x][y][z] = cell[a];
        }
        for x in 0..3 {
            for y in 0..3 {
                for z in 0..3 {
                    if lattice[x][y][z] != usize::MAX {
                        continue;
                    }
                    // Corners of the smallest even-aligned box containing
                    // (x,y,z): the defining entity of this midpoint.
                    let spans = |v: usize| if v == 1 { vec![0usize, 2] } else { vec![v] };
                    let mut corners = Vec::new();
                    for &cx in &spans(x) {
                        for &cy in &spans(y) {
                            for &cz in &spans(z) {
                                corners.push(lattice[cx][cy][cz]);
                            }
                        }
                    }
                    lattice[x][y][z] = midpoint(&corners, &mut vertices);
                }
            }
        }
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..2 {
                    cells.extend_from_slice(&[
                        lattice[i][j][k],
                        lattice[i + 1][j][k],
                        lattice[i + 1][j + 1][k],
                        lattice[i][j + 1][k],
                        lattice[i][j][k + 1],
                        lattice[i + 1][j][k + 1],
                        lattice[i + 1][j + 1][k + 1],
                        lattice[i][j + 1][k + 1],
                    ]);
                }
            }
        }
    }

    let mut faces: Vec<usize> = Vec::with_capacity(mesh.n_faces() * 16);
    let mut labels: Vec<i32> = Vec::with_capacity(mesh.n_faces() * 4);
    for f in 0..mesh.n_faces() {
        let q = mesh.face(f);
        let label = mesh.face_label(f);
        let e01 = midpoint(&[q[0], q[1]], &mut vertices);
        let e12 = midpoint(&[q[1], q[2]], &mut vertices);
        let e23 = midpoint(&[q[2], q[3]], &mut vertices);
        let e30 = midpoint(&[q[3], q[0]], &mut vertices);
        let center = midpoint(&[q[0], q[1], q[2], q[3]], &mut vertices);
        for child in [
            [q[0], e01, center, e30],
            [e01, q[1], e12, center],
            [center, e12, q[2], e23],
            [e30, center, e23, q[3]],
        ] {
            faces.extend_from_slice(&child);
            labels.push(label);
        }
    }

    Mesh::new(vertices, ElementKind::Hex8, cells, faces, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_slab_mesh, SLAB_LABEL_ENDO};

    #[test]
    fn refine_rejects_tet_meshes() {
        let m = generate_slab_mesh([1.0, 1.0, 1.0], [1, 1, 1], ElementKind::Tet4).unwrap();
        assert!(matches!(refine_hex_uniform(&m), Err(MeshError::NotHexMesh)));
    }

    #[test]
    fn refine_unit_cube_counts() {
        let m = generate_slab_mesh([1.0, 1.0, 1.0], [1, 1, 1], ElementKind::Hex8).unwrap();
        let r = refine_hex_uniform(&m).unwrap();
        assert_eq!(r.n_cells(), 8);
        assert_eq!(r.n_vertices(), 27);
        assert_eq!(r.n_faces(), 24);
        assert!((r.total_volume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn refine_preserves_volume_and_labels_on_distorted_mesh() {
        // Distort a slab so cells are genuine trilinear hexes, then refine.
        let m = generate_slab_mesh([2.0, 1.0, 1.0], [2, 2, 2], ElementKind::Hex8).unwrap();
        let warped: Vec<Point3<f64>> = m
            .vertices()
            .iter()
            .map(|p| {
                Point3::new(
                    p.x + 0.08 * (p.y * 2.1).sin() * p.z,
                    p.y + 0.05 * (p.x * 1.7).cos() * p.z,
                    p.z + 0.06 * p.x * p.y,
                )
            })
            .collect();
        let mut cells = Vec::new();
        for c in 0..m.n_cells() {
            cells.extend_from_slice(m.cell(c));
        }
        let mut faces = Vec::new();
        let mut labels = Vec::new();
        for f in 0..m.n_faces() {
            faces.extend_from_slice(m.face(f));
            labels.push(m.face_label(f));
        }
        let warped = Mesh::new(warped, ElementKind::Hex8, cells, faces, labels).unwrap();

        let refined = refine_hex_uniform(&warped).unwrap();
        assert_eq!(refined.n_cells(), warped.n_cells() * 8);
        assert_eq!(refined.n_faces(), warped.n_faces() * 4);
        assert!((refined.total_volume() - warped.total_volume()).abs() < 1e-14);

        // Label areas survive: endocardial vertex count grows as expected for
        // a 2x2 quad patch refined to 4x4.
        assert_eq!(
            refined.boundary_vertices_with_labels(&[SLAB_LABEL_ENDO]).len(),
            25
        );

        // Refinement halves the mesh size h.
        let h0 = warped.statistics().h_max;
        let h1 = refined.statistics().h_max;
        assert!(h1 < 0.62 * h0);
    }
}
