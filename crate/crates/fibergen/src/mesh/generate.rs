//! Analytic test-mesh generators.
//!
//! These produce small labeled meshes for tests, demos and convergence
//! studies: rectangular and cylindrically bent slabs (hex or tet) and
//! cube-sphere shells, optionally with rectangular through-holes whose walls
//! carry their own labels (valve rings, vessel ostia).

use super::{ElementKind, Mesh, MeshError};
use nalgebra::{Point3, Vector3};
use std::collections::{HashMap, HashSet};

/// Default boundary labels of the slab generators: the `x = 0` wall is the
/// endocardial side, `x = Lx` the epicardial side, `z = Lz` / `z = 0` the top
/// and bottom surfaces, and the `y` walls carry a throwaway label.
pub const SLAB_LABEL_EPI: i32 = 10;
pub const SLAB_LABEL_ENDO: i32 = 20;
pub const SLAB_LABEL_BASE_UP: i32 = 50;
pub const SLAB_LABEL_BASE_DOWN: i32 = 60;
pub const SLAB_LABEL_SIDE: i32 = 70;

/// Kuhn subdivision of a hexahedron into 6 tetrahedra around the main
/// diagonal 0-6. Neighboring cells split this way share face diagonals, so a
/// structured grid of such hexes stays conforming.
const KUHN_TETS: [[usize; 4]; 6] = [
    [0, 1, 2, 6],
    [0, 1, 5, 6],
    [0, 3, 2, 6],
    [0, 3, 7, 6],
    [0, 4, 5, 6],
    [0, 4, 7, 6],
];

/// Rectangular slab `[0, Lx] x [0, Ly] x [0, Lz]` on a uniform grid.
pub fn generate_slab_mesh(
    extent: [f64; 3],
    divisions: [usize; 3],
    kind: ElementKind,
) -> Result<Mesh, MeshError> {
    if extent.iter().any(|&e| !(e > 0.0)) {
        return Err(MeshError::NonPositiveExtent(extent));
    }
    if divisions.contains(&0) {
        return Err(MeshError::EmptyMesh("zero divisions along an axis"));
    }
    let [nx, ny, nz] = divisions;
    let vid = |i: usize, j: usize, k: usize| i + j * (nx + 1) + k * (nx + 1) * (ny + 1);

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Point3::new(
                    extent[0] * i as f64 / nx as f64,
                    extent[1] * j as f64 / ny as f64,
                    extent[2] * k as f64 / nz as f64,
                ));
            }
        }
    }

    let mut hexes: Vec<[usize; 8]> = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                hexes.push([
                    vid(i, j, k),
                    vid(i + 1, j, k),
                    vid(i + 1, j + 1, k),
                    vid(i, j + 1, k),
                    vid(i, j, k + 1),
                    vid(i + 1, j, k + 1),
                    vid(i + 1, j + 1, k + 1),
                    vid(i, j + 1, k + 1),
                ]);
            }
        }
    }

    // Boundary quads with the grid's in-plane axes ordered so that the
    // (low,low) -> (high,high) diagonal matches the Kuhn face diagonals.
    let mut quads: Vec<([usize; 4], i32)> = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            quads.push((
                [vid(0, j, k), vid(0, j + 1, k), vid(0, j + 1, k + 1), vid(0, j, k + 1)],
                SLAB_LABEL_ENDO,
            ));
            quads.push((
                [
                    vid(nx, j, k),
                    vid(nx, j + 1, k),
                    vid(nx, j + 1, k + 1),
                    vid(nx, j, k + 1),
                ],
                SLAB_LABEL_EPI,
            ));
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            quads.push((
                [vid(i, j, 0), vid(i + 1, j, 0), vid(i + 1, j + 1, 0), vid(i, j + 1, 0)],
                SLAB_LABEL_BASE_DOWN,
            ));
            quads.push((
                [
                    vid(i, j, nz),
                    vid(i + 1, j, nz),
                    vid(i + 1, j + 1, nz),
                    vid(i, j + 1, nz),
                ],
                SLAB_LABEL_BASE_UP,
            ));
        }
    }
    for k in 0..nz {
        for i in 0..nx {
            quads.push((
                [vid(i, 0, k), vid(i + 1, 0, k), vid(i + 1, 0, k + 1), vid(i, 0, k + 1)],
                SLAB_LABEL_SIDE,
            ));
            quads.push((
                [
                    vid(i, ny, k),
                    vid(i + 1, ny, k),
                    vid(i + 1, ny, k + 1),
                    vid(i, ny, k + 1),
                ],
                SLAB_LABEL_SIDE,
            ));
        }
    }

    build_from_hexes(vertices, hexes, quads, kind)
}

/// Slab bent around the z axis: x becomes the radial (transmural) direction,
/// starting at `bend_radius`, and y becomes the azimuthal arc length measured
/// at the inner wall. Labels are the slab labels; the `x = 0` endocardial wall
/// maps onto the inner cylinder.
pub fn generate_curved_slab_mesh(
    extent: [f64; 3],
    divisions: [usize; 3],
    kind: ElementKind,
    bend_radius: f64,
) -> Result<Mesh, MeshError> {
    if !(bend_radius > 0.0) {
        return Err(MeshError::NonPositiveFactor(bend_radius));
    }
    if extent[1] / bend_radius >= std::f64::consts::TAU {
        return Err(MeshError::NonPositiveExtent(extent));
    }
    let slab = generate_slab_mesh(extent, divisions, kind)?;
    let mapped = slab
        .vertices()
        .iter()
        .map(|p| {
            let theta = p.y / bend_radius;
            let r = bend_radius + p.x;
            Point3::new(r * theta.cos(), r * theta.sin(), p.z)
        })
        .collect();
    let (cells, faces, labels) = flatten(&slab);
    Mesh::new(mapped, kind, cells, faces, labels)
}

/// Rectangular through-hole in a cube-sphere shell: cells `i0 <= i < i0+size`,
/// `j0 <= j < j0+size` of cube face `face` (0..6) are removed across all
/// radial layers and the exposed walls get `label`.
#[derive(Debug, Clone, Copy)]
pub struct ShellHole {
    pub face: usize,
    pub i0: usize,
    pub j0: usize,
    pub size: usize,
    pub label: i32,
}

/// Closed spherical shell between two concentric spheres, meshed with
/// hexahedra by projecting a subdivided cube (6 faces of `subdivisions`^2
/// columns, `layers` cells across the wall). Vertices lie exactly on the
/// spheres of their radial level.
pub fn generate_shell_mesh(
    subdivisions: usize,
    layers: usize,
    r_inner: f64,
    r_outer: f64,
    inner_label: i32,
    outer_label: i32,
) -> Result<Mesh, MeshError> {
    generate_holed_shell_mesh(
        subdivisions,
        layers,
        r_inner,
        r_outer,
        inner_label,
        outer_label,
        &[],
    )
}

/// [`generate_shell_mesh`] with rectangular through-holes. Each hole must lie
/// strictly inside one cube face (at least one cell away from the face edge)
/// and holes must not overlap or touch.
pub fn generate_holed_shell_mesh(
    subdivisions: usize,
    layers: usize,
    r_inner: f64,
    r_outer: f64,
    inner_label: i32,
    outer_label: i32,
    holes: &[ShellHole],
) -> Result<Mesh, MeshError> {
    let n = subdivisions;
    if n == 0 || layers == 0 {
        return Err(MeshError::EmptyMesh("zero shell subdivisions or layers"));
    }
    if !(0.0 < r_inner && r_inner < r_outer) {
        return Err(MeshError::InvalidRadii);
    }

    let mut removed: HashSet<(usize, usize, usize)> = HashSet::new();
    for hole in holes {
        if hole.face >= 6
            || hole.size == 0
            || hole.i0 == 0
            || hole.j0 == 0
            || hole.i0 + hole.size >= n
            || hole.j0 + hole.size >= n
        {
            return Err(MeshError::InvalidHole("hole not strictly inside a cube face"));
        }
        for i in hole.i0..hole.i0 + hole.size {
            for j in hole.j0..hole.j0 + hole.size {
                if !removed.insert((hole.face, i, j)) {
                    return Err(MeshError::InvalidHole("holes overlap"));
                }
            }
        }
    }

    // Integer cube coordinates in {-n..n} dedup vertices shared between faces.
    let cube_point = |face: usize, i: usize, j: usize| -> (i64, i64, i64) {
        let a = 2 * i as i64 - n as i64;
        let b = 2 * j as i64 - n as i64;
        let m = n as i64;
        match face {
            0 => (m, a, b),
            1 => (-m, a, b),
            2 => (a, m, b),
            3 => (a, -m, b),
            4 => (a, b, m),
            5 => (a, b, -m),
            _ => unreachable!(),
        }
    };

    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut ids: HashMap<(i64, i64, i64, usize), usize> = HashMap::new();
    let mut vertex = |face: usize, i: usize, j: usize, l: usize| -> usize {
        let (cx, cy, cz) = cube_point(face, i, j);
        *ids.entry((cx, cy, cz, l)).or_insert_with(|| {
            let dir = Vector3::new(cx as f64, cy as f64, cz as f64).normalize();
            let r = r_inner + (r_outer - r_inner) * l as f64 / layers as f64;
            vertices.push(Point3::from(dir * r));
            vertices.len() - 1
        })
    };

    let mut hexes: Vec<[usize; 8]> = Vec::new();
    let mut quads: Vec<([usize; 4], i32)> = Vec::new();
    for face in 0..6 {
        for i in 0..n {
            for j in 0..n {
                if removed.contains(&(face, i, j)) {
                    continue;
                }
                let ring = |l: usize, vertex: &mut dyn FnMut(usize, usize, usize, usize) -> usize| {
                    [
                        vertex(face, i, j, l),
                        vertex(face, i + 1, j, l),
                        vertex(face, i + 1, j + 1, l),
                        vertex(face, i, j + 1, l),
                    ]
                };
                for l in 0..layers {
                    let lo = ring(l, &mut vertex);
                    let hi = ring(l + 1, &mut vertex);
                    hexes.push([lo[0], lo[1], lo[2], lo[3], hi[0], hi[1], hi[2], hi[3]]);
                }
                quads.push((ring(0, &mut vertex), inner_label));
                quads.push((ring(layers, &mut vertex), outer_label));
            }
        }
    }

    // Hole walls: for every removed column, each lateral quad shared with a
    // kept column becomes a boundary face labeled by the hole.
    for hole in holes {
        let f = hole.face;
        for i in hole.i0..hole.i0 + hole.size {
            for j in hole.j0..hole.j0 + hole.size {
                // (edge endpoints, neighbor column) per lateral direction
                let sides = [
                    ((i, j), (i, j + 1), (i.wrapping_sub(1), j)),
                    ((i + 1, j), (i + 1, j + 1), (i + 1, j)),
                    ((i, j), (i + 1, j), (i, j.wrapping_sub(1))),
                    ((i, j + 1), (i + 1, j + 1), (i, j + 1)),
                ];
                for &(a, b, nb) in &sides {
                    if removed.contains(&(f, nb.0, nb.1)) {
                        continue;
                    }
                    for l in 0..layers {
                        quads.push((
                            [
                                vertex(f, a.0, a.1, l),
                                vertex(f, b.0, b.1, l),
                                vertex(f, b.0, b.1, l + 1),
                                vertex(f, a.0, a.1, l + 1),
                            ],
                            hole.label,
                        ));
                    }
                }
            }
        }
    }

    build_from_hexes(vertices, hexes, quads, ElementKind::Hex8)
}

/// Assembles a Mesh from hex bricks, splitting into Kuhn tetrahedra when a
/// tetrahedral mesh is requested.
fn build_from_hexes(
    vertices: Vec<Point3<f64>>,
    hexes: Vec<[usize; 8]>,
    quads: Vec<([usize; 4], i32)>,
    kind: ElementKind,
) -> Result<Mesh, MeshError> {
    match kind {
        ElementKind::Hex8 => {
            let mut cells = Vec::with_capacity(hexes.len() * 8);
            for h in &hexes {
                cells.extend_from_slice(h);
            }
            let mut faces = Vec::with_capacity(quads.len() * 4);
            let mut labels = Vec::with_capacity(quads.len());
            for (q, label) in &quads {
                faces.extend_from_slice(q);
                labels.push(*label);
            }
            Mesh::new(vertices, kind, cells, faces, labels)
        }
        ElementKind::Tet4 => {
            let mut cells = Vec::with_capacity(hexes.len() * 24);
            for h in &hexes {
                for t in &KUHN_TETS {
                    cells.extend(t.iter().map(|&l| h[l]));
                }
            }
            let mut faces = Vec::with_capacity(quads.len() * 6);
            let mut labels = Vec::with_capacity(quads.len() * 2);
            for &([a, b, c, d], label) in &quads {
                faces.extend_from_slice(&[a, b, c, a, c, d]);
                labels.push(label);
                labels.push(label);
            }
            Mesh::new(vertices, kind, cells, faces, labels)
        }
    }
}

fn flatten(mesh: &Mesh) -> (Vec<usize>, Vec<usize>, Vec<i32>) {
    let mut cells = Vec::new();
    for c in 0..mesh.n_cells() {
        cells.extend_from_slice(mesh.cell(c));
    }
    let mut faces = Vec::new();
    let mut labels = Vec::new();
    for f in 0..mesh.n_faces() {
        faces.extend_from_slice(mesh.face(f));
        labels.push(mesh.face_label(f));
    }
    (cells, faces, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slab_counts_and_volume() {
        let m = generate_slab_mesh([2.0, 1.0, 1.0], [2, 1, 1], ElementKind::Hex8).unwrap();
        assert_eq!(m.n_vertices(), 3 * 2 * 2);
        assert_eq!(m.n_cells(), 2);
        assert!((m.total_volume() - 2.0).abs() < 1e-14);
        // 10 boundary quads: 2 per x wall is 2, 2 per z wall is 4, y walls 4.
        assert_eq!(m.n_faces(), 10);

        let t = generate_slab_mesh([2.0, 1.0, 1.0], [2, 1, 1], ElementKind::Tet4).unwrap();
        assert_eq!(t.n_cells(), 12);
        assert_eq!(t.n_faces(), 20);
        assert!((t.total_volume() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn slab_quality_for_anisotropic_cell() {
        let m = generate_slab_mesh([2.0, 1.0, 1.0], [1, 1, 1], ElementKind::Hex8).unwrap();
        let stats = m.statistics();
        assert_eq!(stats.n_cells, 1);
        assert!((stats.quality - 2.0).abs() < 1e-14);
        assert!((stats.h_max - 2.0).abs() < 1e-14);
    }

    #[test]
    fn slab_labels_cover_expected_planes() {
        let m = generate_slab_mesh([1.0, 1.0, 1.0], [2, 2, 2], ElementKind::Hex8).unwrap();
        for f in 0..m.n_faces() {
            let label = m.face_label(f);
            for &v in m.face(f) {
                let p = m.vertex(v);
                match label {
                    SLAB_LABEL_ENDO => assert_eq!(p.x, 0.0),
                    SLAB_LABEL_EPI => assert_eq!(p.x, 1.0),
                    SLAB_LABEL_BASE_UP => assert_eq!(p.z, 1.0),
                    SLAB_LABEL_BASE_DOWN => assert_eq!(p.z, 0.0),
                    SLAB_LABEL_SIDE => assert!(p.y == 0.0 || p.y == 1.0),
                    other => panic!("unexpected label {other}"),
                }
            }
        }
        let endo = m.boundary_vertices_with_labels(&[SLAB_LABEL_ENDO]);
        assert_eq!(endo.len(), 9);
        let both = m.boundary_vertices_with_labels(&[SLAB_LABEL_ENDO, SLAB_LABEL_EPI]);
        assert_eq!(both.len(), 18);
    }

    #[test]
    fn slab_rejects_bad_inputs() {
        assert!(matches!(
            generate_slab_mesh([0.0, 1.0, 1.0], [1, 1, 1], ElementKind::Hex8),
            Err(MeshError::NonPositiveExtent(_))
        ));
        assert!(matches!(
            generate_slab_mesh([1.0, 1.0, 1.0], [1, 0, 1], ElementKind::Hex8),
            Err(MeshError::EmptyMesh(_))
        ));
    }

    #[test]
    fn curved_slab_keeps_topology_and_bends_walls() {
        let flat = generate_slab_mesh([1.0, 4.0, 2.0], [2, 8, 4], ElementKind::Hex8).unwrap();
        let bent =
            generate_curved_slab_mesh([1.0, 4.0, 2.0], [2, 8, 4], ElementKind::Hex8, 4.0).unwrap();
        assert_eq!(bent.n_vertices(), flat.n_vertices());
        assert_eq!(bent.n_cells(), flat.n_cells());
        assert_eq!(bent.n_faces(), flat.n_faces());
        // Endocardial wall sits on the inner cylinder r = R, epicardial on R + Lx.
        for f in 0..bent.n_faces() {
            let label = bent.face_label(f);
            for &v in bent.face(f) {
                let p = bent.vertex(v);
                let r = (p.x * p.x + p.y * p.y).sqrt();
                if label == SLAB_LABEL_ENDO {
                    assert!((r - 4.0).abs() < 1e-12);
                } else if label == SLAB_LABEL_EPI {
                    assert!((r - 5.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shell_is_watertight_between_two_spheres() {
        let m = generate_shell_mesh(4, 2, 0.5, 1.0, 1, 2).unwrap();
        assert_eq!(m.n_cells(), 6 * 16 * 2);
        // Every vertex sits on one of the three radial levels.
        for v in m.vertices() {
            let r = v.coords.norm();
            let ok = [0.5, 0.75, 1.0].iter().any(|&lvl| (r - lvl).abs() < 1e-12);
            assert!(ok, "unexpected radius {r}");
        }
        // Boundary faces are exactly the inner and outer sphere patches.
        assert_eq!(m.n_faces(), 2 * 6 * 16);
        let exact = 4.0 / 3.0 * std::f64::consts::PI * (1.0f64.powi(3) - 0.5f64.powi(3));
        let vol = m.total_volume();
        // Polyhedral approximation from below; ~7% at this resolution.
        assert!(vol > 0.85 * exact && vol < exact, "vol {vol} vs {exact}");
    }

    #[test]
    fn holed_shell_exposes_labeled_walls() {
        let hole = ShellHole {
            face: 4,
            i0: 2,
            j0: 2,
            size: 2,
            label: 40,
        };
        let m = generate_holed_shell_mesh(6, 2, 0.5, 1.0, 1, 2, &[hole]).unwrap();
        assert_eq!(m.n_cells(), (6 * 36 - 4) * 2);
        let ring = m.boundary_vertices_with_labels(&[40]);
        // 8 rim edges times 3 radial levels of vertices.
        assert_eq!(ring.len(), 8 * 3);
        // Rim vertices belong to face 4 of the cube (z is the largest coord).
        for &v in &ring {
            let p = m.vertex(v);
            assert!(p.z > p.x.abs() && p.z > p.y.abs());
        }
    }

    #[test]
    fn holed_shell_rejects_edge_and_overlapping_holes() {
        let edge = ShellHole {
            face: 0,
            i0: 0,
            j0: 2,
            size: 1,
            label: 9,
        };
        assert!(matches!(
            generate_holed_shell_mesh(4, 1, 0.5, 1.0, 1, 2, &[edge]),
            Err(MeshError::InvalidHole(_))
        ));
        let a = ShellHole {
            face: 0,
            i0: 1,
            j0: 1,
            size: 2,
            label: 9,
        };
        let b = ShellHole {
            face: 0,
            i0: 2,
            j0: 2,
            size: 1,
            label: 8,
        };
        assert!(matches!(
            generate_holed_shell_mesh(6, 1, 0.5, 1.0, 1, 2, &[a, b]),
            Err(MeshError::InvalidHole(_))
        ));
    }

    #[test]
    fn tet_slab_is_conforming() {
        // Conformity check: every interior triangle face appears exactly twice.
        use std::collections::HashMap;
        let m = generate_slab_mesh([1.0, 1.0, 1.0], [2, 2, 2], ElementKind::Tet4).unwrap();
        let mut faces: HashMap<[usize; 3], usize> = HashMap::new();
        for c in 0..m.n_cells() {
            let cell = m.cell(c);
            for f in ElementKind::Tet4.faces() {
                let mut key = [cell[f[0]], cell[f[1]], cell[f[2]]];
                key.sort_unstable();
                *faces.entry(key).or_insert(0) += 1;
            }
        }
        let boundary = faces.values().filter(|&&n| n == 1).count();
        assert!(faces.values().all(|&n| n == 1 || n == 2));
        // 6 walls x 4 quads x 2 triangles
        assert_eq!(boundary, 48);
        assert_eq!(m.n_faces(), 48);
    }
}
