//! Gmsh `msh` ASCII reader and writer (format versions 4.1 and 2.2).
//!
//! Only the subset needed for labeled volumetric meshes is supported: tet4 /
//! hex8 volume elements (type codes 4 / 5) plus tri3 / quad4 surface elements
//! (codes 2 / 3) whose physical tag becomes the boundary label. In version
//! 4.1 files the physical tag of a surface element comes from its geometric
//! entity, so `$Entities` is read too. Binary files and any other element
//! types are rejected; unknown sections are skipped. Node tags may be sparse
//! and are remapped to dense zero-based indices in file order.

use super::{ElementKind, Mesh, MeshError};
use nalgebra::Point3;
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MshVersion {
    V22,
    V41,
}

#[derive(Debug, Error)]
pub enum MshError {
    #[error("unsupported msh format version {0:?} (supported: 2.2, 4.1)")]
    UnsupportedVersion(String),
    #[error("binary msh files are not supported")]
    BinaryFormatUnsupported,
    #[error("mesh mixes element kinds (tet/hex volume cells or mismatched surface elements)")]
    MixedElementKinds,
    #[error("element references unknown node tag {0}")]
    DanglingIndex(i64),
    #[error("unsupported element type code {0} (supported: 2, 3, 4, 5)")]
    UnsupportedElementType(i32),
    #[error("malformed msh file in section {section}: {message}")]
    Syntax { section: String, message: String },
    #[error("missing required section {0}")]
    MissingSection(&'static str),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

fn syntax(section: &str, message: impl Into<String>) -> MshError {
    MshError::Syntax {
        section: section.to_string(),
        message: message.into(),
    }
}

/// Whitespace token cursor over a section body.
struct Tokens<'a> {
    iter: std::str::SplitWhitespace<'a>,
    section: &'a str,
}

impl<'a> Tokens<'a> {
    fn new(body: &'a str, section: &'a str) -> Self {
        Tokens {
            iter: body.split_whitespace(),
            section,
        }
    }

    fn next(&mut self) -> Result<&'a str, MshError> {
        self.iter
            .next()
            .ok_or_else(|| syntax(self.section, "unexpected end of section"))
    }

    fn int(&mut self) -> Result<i64, MshError> {
        let tok = self.next()?;
        tok.parse()
            .map_err(|_| syntax(self.section, format!("expected integer, got {tok:?}")))
    }

    fn usize(&mut self) -> Result<usize, MshError> {
        let tok = self.next()?;
        tok.parse()
            .map_err(|_| syntax(self.section, format!("expected count, got {tok:?}")))
    }

    fn float(&mut self) -> Result<f64, MshError> {
        let tok = self.next()?;
        tok.parse()
            .map_err(|_| syntax(self.section, format!("expected number, got {tok:?}")))
    }

    fn finished(&mut self) -> Result<(), MshError> {
        match self.iter.next() {
            None => Ok(()),
            Some(tok) => Err(syntax(self.section, format!("trailing data {tok:?}"))),
        }
    }
}

struct RawElements {
    volume_kind: Option<ElementKind>,
    cells: Vec<i64>,
    surface_kind: Option<ElementKind>,
    faces: Vec<i64>,
    face_labels: Vec<i32>,
}

/// Parses an ASCII Gmsh mesh (versions 2.2 and 4.1).
pub fn parse_msh(text: &str) -> Result<Mesh, MshError> {
    // Split into sections: $Name ... $EndName.
    let mut sections: Vec<(&str, &str)> = Vec::new();
    let mut rest = text;
    loop {
        let Some(start) = rest.find('$') else { break };
        let after = &rest[start + 1..];
        let name_end = after
            .find(|c: char| c.is_whitespace())
            .ok_or_else(|| syntax("file", "dangling section marker"))?;
        let name = &after[..name_end];
        let body_start = start + 1 + name_end;
        let terminator = format!("$End{name}");
        let body_end = rest[body_start..]
            .find(&terminator)
            .ok_or(MshError::MissingSection("section terminator"))
            .map_err(|_| syntax(name, format!("missing {terminator}")))?;
        sections.push((name, &rest[body_start..body_start + body_end]));
        rest = &rest[body_start + body_end + terminator.len()..];
    }

    let find = |name: &str| sections.iter().find(|(n, _)| *n == name).map(|(_, b)| *b);

    let format = find("MeshFormat").ok_or(MshError::MissingSection("$MeshFormat"))?;
    let mut t = Tokens::new(format, "MeshFormat");
    let version = t.next()?.to_string();
    let file_type = t.int()?;
    let _data_size = t.int()?;
    if file_type != 0 {
        return Err(MshError::BinaryFormatUnsupported);
    }
    let version = match version.as_str() {
        "2.2" => MshVersion::V22,
        "4.1" => MshVersion::V41,
        _ => return Err(MshError::UnsupportedVersion(version)),
    };

    let nodes_body = find("Nodes").ok_or(MshError::MissingSection("$Nodes"))?;
    let elements_body = find("Elements").ok_or(MshError::MissingSection("$Elements"))?;

    let (coords, tag_to_index) = match version {
        MshVersion::V22 => parse_nodes_v22(nodes_body)?,
        MshVersion::V41 => parse_nodes_v41(nodes_body)?,
    };

    let raw = match version {
        MshVersion::V22 => parse_elements_v22(elements_body)?,
        MshVersion::V41 => {
            // Surface labels live on the geometric entities.
            let surface_physical = match find("Entities") {
                Some(body) => parse_entities(body)?,
                None => HashMap::new(),
            };
            parse_elements_v41(elements_body, &surface_physical)?
        }
    };

    let kind = raw.volume_kind.ok_or(MshError::MissingSection("volume elements"))?;
    if let Some(sk) = raw.surface_kind {
        let expected = match kind {
            ElementKind::Tet4 => ElementKind::Tet4,
            ElementKind::Hex8 => ElementKind::Hex8,
        };
        // tri with tet, quad with hex
        let matches = match (expected, sk) {
            (ElementKind::Tet4, ElementKind::Tet4) => true,
            (ElementKind::Hex8, ElementKind::Hex8) => true,
            _ => false,
        };
        if !matches {
            return Err(MshError::MixedElementKinds);
        }
    }

    let map = |tags: &[i64]| -> Result<Vec<usize>, MshError> {
        tags.iter()
            .map(|t| tag_to_index.get(t).copied().ok_or(MshError::DanglingIndex(*t)))
            .collect()
    };
    let cells = map(&raw.cells)?;
    let faces = map(&raw.faces)?;

    Ok(Mesh::new(coords, kind, cells, faces, raw.face_labels)?)
}

fn parse_nodes_v22(body: &str) -> Result<(Vec<Point3<f64>>, HashMap<i64, usize>), MshError> {
    let mut t = Tokens::new(body, "Nodes");
    let n = t.usize()?;
    let mut coords = Vec::with_capacity(n);
    let mut tags = HashMap::with_capacity(n);
    for i in 0..n {
        let tag = t.int()?;
        let (x, y, z) = (t.float()?, t.float()?, t.float()?);
        if tags.insert(tag, i).is_some() {
            return Err(syntax("Nodes", format!("duplicate node tag {tag}")));
        }
        coords.push(Point3::new(x, y, z));
    }
    t.finished()?;
    Ok((coords, tags))
}

fn parse_nodes_v41(body: &str) -> Result<(Vec<Point3<f64>>, HashMap<i64, usize>), MshError> {
    let mut t = Tokens::new(body, "Nodes");
    let blocks = t.usize()?;
    let total = t.usize()?;
    let (_min, _max) = (t.int()?, t.int()?);
    let mut coords = Vec::with_capacity(total);
    let mut tags = HashMap::with_capacity(total);
    for _ in 0..blocks {
        let _dim = t.int()?;
        let _entity = t.int()?;
        let parametric = t.int()?;
        if parametric != 0 {
            return Err(syntax("Nodes", "parametric nodes are not supported"));
        }
        let in_block = t.usize()?;
        let mut block_tags = Vec::with_capacity(in_block);
        for _ in 0..in_block {
            block_tags.push(t.int()?);
        }
        for tag in block_tags {
            let (x, y, z) = (t.float()?, t.float()?, t.float()?);
            if tags.insert(tag, coords.len()).is_some() {
                return Err(syntax("Nodes", format!("duplicate node tag {tag}")));
            }
            coords.push(Point3::new(x, y, z));
        }
    }
    t.finished()?;
    if coords.len() != total {
        return Err(syntax("Nodes", "node count does not match header"));
    }
    Ok((coords, tags))
}

/// Returns surface entity tag -> first physical tag (0 when untagged).
fn parse_entities(body: &str) -> Result<HashMap<i64, i32>, MshError> {
    let mut t = Tokens::new(body, "Entities");
    let (np, nc, ns, nv) = (t.usize()?, t.usize()?, t.usize()?, t.usize()?);
    for _ in 0..np {
        let _tag = t.int()?;
        for _ in 0..3 {
            t.float()?;
        }
        let n_phys = t.usize()?;
        for _ in 0..n_phys {
            t.int()?;
        }
    }
    let mut skip_bbox_entity = |with_bounding: bool| -> Result<(i64, i32), MshError> {
        let tag = t.int()?;
        for _ in 0..6 {
            t.float()?;
        }
        let n_phys = t.usize()?;
        let mut phys = 0i32;
        for k in 0..n_phys {
            let p = t.int()?;
            if k == 0 {
                phys = p as i32;
            }
        }
        if with_bounding {
            let n_bound = t.usize()?;
            for _ in 0..n_bound {
                t.int()?;
            }
        }
        Ok((tag, phys))
    };
    for _ in 0..nc {
        skip_bbox_entity(true)?;
    }
    let mut surfaces = HashMap::with_capacity(ns);
    for _ in 0..ns {
        let (tag, phys) = skip_bbox_entity(true)?;
        surfaces.insert(tag, phys);
    }
    for _ in 0..nv {
        skip_bbox_entity(true)?;
    }
    Ok(surfaces)
}

fn element_kind_of(code: i32) -> Result<(u8, ElementKind, usize), MshError> {
    // (dimension, kind-slot, nodes); surface kinds reuse ElementKind to mark
    // tri-vs-quad (Tet4 slot = tri3, Hex8 slot = quad4).
    match code {
        2 => Ok((2, ElementKind::Tet4, 3)),
        3 => Ok((2, ElementKind::Hex8, 4)),
        4 => Ok((3, ElementKind::Tet4, 4)),
        5 => Ok((3, ElementKind::Hex8, 8)),
        other => Err(MshError::UnsupportedElementType(other)),
    }
}

fn merge_kind(slot: &mut Option<ElementKind>, kind: ElementKind) -> Result<(), MshError> {
    match slot {
        None => {
            *slot = Some(kind);
            Ok(())
        }
        Some(k) if *k == kind => Ok(()),
        Some(_) => Err(MshError::MixedElementKinds),
    }
}

fn parse_elements_v22(body: &str) -> Result<RawElements, MshError> {
    let mut t = Tokens::new(body, "Elements");
    let n = t.usize()?;
    let mut raw = RawElements {
        volume_kind: None,
        cells: Vec::new(),
        surface_kind: None,
        faces: Vec::new(),
        face_labels: Vec::new(),
    };
    for _ in 0..n {
        let _tag = t.int()?;
        let code = t.int()? as i32;
        let n_tags = t.usize()?;
        let mut physical = 0i32;
        for k in 0..n_tags {
            let tag = t.int()?;
            if k == 0 {
                physical = tag as i32;
            }
        }
        let (dim, kind, nodes) = element_kind_of(code)?;
        if dim == 3 {
            merge_kind(&mut raw.volume_kind, kind)?;
            for _ in 0..nodes {
                raw.cells.push(t.int()?);
            }
        } else {
            merge_kind(&mut raw.surface_kind, kind)?;
            for _ in 0..nodes {
                raw.faces.push(t.int()?);
            }
            raw.face_labels.push(physical);
        }
    }
    t.finished()?;
    Ok(raw)
}

fn parse_elements_v41(
    body: &str,
    surface_physical: &HashMap<i64, i32>,
) -> Result<RawElements, MshError> {
    let mut t = Tokens::new(body, "Elements");
    let blocks = t.usize()?;
    let total = t.usize()?;
    let (_min, _max) = (t.int()?, t.int()?);
    let mut seen = 0usize;
    let mut raw = RawElements {
        volume_kind: None,
        cells: Vec::new(),
        surface_kind: None,
        faces: Vec::new(),
        face_labels: Vec::new(),
    };
    for _ in 0..blocks {
        let dim = t.int()?;
        let entity = t.int()?;
        let code = t.int()? as i32;
        let in_block = t.usize()?;
        let (code_dim, kind, nodes) = element_kind_of(code)?;
        if code_dim as i64 != dim {
            return Err(syntax(
                "Elements",
                format!("element type {code} in a dimension-{dim} block"),
            ));
        }
        for _ in 0..in_block {
            let _tag = t.int()?;
            if code_dim == 3 {
                merge_kind(&mut raw.volume_kind, kind)?;
                for _ in 0..nodes {
                    raw.cells.push(t.int()?);
                }
            } else {
                merge_kind(&mut raw.surface_kind, kind)?;
                for _ in 0..nodes {
                    raw.faces.push(t.int()?);
                }
                raw.face_labels
                    .push(surface_physical.get(&entity).copied().unwrap_or(0));
            }
            seen += 1;
        }
    }
    t.finished()?;
    if seen != total {
        return Err(syntax("Elements", "element count does not match header"));
    }
    Ok(raw)
}

/// Serializes a mesh as ASCII msh. Coordinates use the shortest representation
/// that reparses to the identical f64, so write-then-parse round-trips exactly.
/// Boundary faces are grouped per label (one surface entity per label in 4.1).
pub fn write_msh(mesh: &Mesh, version: MshVersion) -> String {
    match version {
        MshVersion::V22 => write_msh_v22(mesh),
        MshVersion::V41 => write_msh_v41(mesh),
    }
}

/// Labels in order of first appearance, with the face ids carrying each.
fn faces_by_label(mesh: &Mesh) -> Vec<(i32, Vec<usize>)> {
    let mut order: Vec<i32> = Vec::new();
    let mut groups: HashMap<i32, Vec<usize>> = HashMap::new();
    for f in 0..mesh.n_faces() {
        let label = mesh.face_label(f);
        groups.entry(label).or_insert_with(|| {
            order.push(label);
            Vec::new()
        });
        groups.get_mut(&label).unwrap().push(f);
    }
    order.into_iter().map(|l| (l, groups.remove(&l).unwrap())).collect()
}

fn write_msh_v41(mesh: &Mesh) -> String {
    let groups = faces_by_label(mesh);
    let surface_code = match mesh.kind() {
        ElementKind::Tet4 => 2,
        ElementKind::Hex8 => 3,
    };
    let volume_code = match mesh.kind() {
        ElementKind::Tet4 => 4,
        ElementKind::Hex8 => 5,
    };

    let mut out = String::new();
    out.push_str("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n");

    // One surface entity per label (entity tag = label) plus one volume.
    let _ = writeln!(out, "$Entities\n0 0 {} 1", groups.len());
    for (label, _) in &groups {
        let _ = writeln!(out, "{label} 0 0 0 0 0 0 1 {label} 0");
    }
    out.push_str("1 0 0 0 0 0 0 0 0\n$EndEntities\n");

    let n = mesh.n_vertices();
    let _ = writeln!(out, "$Nodes\n1 {n} 1 {n}\n3 1 0 {n}");
    for tag in 1..=n {
        let _ = writeln!(out, "{tag}");
    }
    for v in mesh.vertices() {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    out.push_str("$EndNodes\n");

    let total = mesh.n_faces() + mesh.n_cells();
    let _ = writeln!(out, "$Elements\n{} {} 1 {}", groups.len() + 1, total, total);
    let mut tag = 1usize;
    for (label, faces) in &groups {
        let _ = writeln!(out, "2 {label} {surface_code} {}", faces.len());
        for &f in faces {
            let _ = write!(out, "{tag}");
            for &v in mesh.face(f) {
                let _ = write!(out, " {}", v + 1);
            }
            out.push('\n');
            tag += 1;
        }
    }
    let _ = writeln!(out, "3 1 {volume_code} {}", mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let _ = write!(out, "{tag}");
        for &v in mesh.cell(c) {
            let _ = write!(out, " {}", v + 1);
        }
        out.push('\n');
        tag += 1;
    }
    out.push_str("$EndElements\n");
    out
}

fn write_msh_v22(mesh: &Mesh) -> String {
    let surface_code = match mesh.kind() {
        ElementKind::Tet4 => 2,
        ElementKind::Hex8 => 3,
    };
    let volume_code = match mesh.kind() {
        ElementKind::Tet4 => 4,
        ElementKind::Hex8 => 5,
    };
    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    let _ = writeln!(out, "$Nodes\n{}", mesh.n_vertices());
    for (i, v) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(out, "{} {} {} {}", i + 1, v.x, v.y, v.z);
    }
    out.push_str("$EndNodes\n");
    let _ = writeln!(out, "$Elements\n{}", mesh.n_faces() + mesh.n_cells());
    let mut tag = 1usize;
    for f in 0..mesh.n_faces() {
        let label = mesh.face_label(f);
        let _ = write!(out, "{tag} {surface_code} 2 {label} {label}");
        for &v in mesh.face(f) {
            let _ = write!(out, " {}", v + 1);
        }
        out.push('\n');
        tag += 1;
    }
    for c in 0..mesh.n_cells() {
        let _ = write!(out, "{tag} {volume_code} 2 0 1");
        for &v in mesh.cell(c) {
            let _ = write!(out, " {}", v + 1);
        }
        out.push('\n');
        tag += 1;
    }
    out.push_str("$EndElements\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_slab_mesh;

    const TET_V41: &str = "\
$MeshFormat
4.1 0 8
$EndMeshFormat
$Entities
0 0 1 1
7 0 0 0 0 0 0 1 42 0
1 0 0 0 1 1 1 0 0
$EndEntities
$Nodes
2 4 1 5
3 1 0 3
1
2
3
0 0 0
1 0 0
0 1 0
0 1 0 1
5
0 0 1
$EndNodes
$Elements
2 2 1 2
2 7 2 1
1 1 2 3
3 1 4 1
2 1 2 3 5
$EndElements
";

    #[test]
    fn parse_v41_with_sparse_tags_and_entity_labels() {
        let mesh = parse_msh(TET_V41).unwrap();
        assert_eq!(mesh.n_vertices(), 4);
        assert_eq!(mesh.n_cells(), 1);
        assert_eq!(mesh.kind(), ElementKind::Tet4);
        assert_eq!(mesh.n_faces(), 1);
        // Physical tag 42 comes from surface entity 7.
        assert_eq!(mesh.face_label(0), 42);
        // Sparse node tag 5 mapped densely.
        assert_eq!(mesh.vertex(3), Point3::new(0.0, 0.0, 1.0));
        assert_eq!(mesh.cell(0), &[0, 1, 2, 3]);
    }

    #[test]
    fn rejects_binary_and_unknown_versions() {
        let binary = "$MeshFormat\n4.1 1 8\n$EndMeshFormat\n";
        assert!(matches!(parse_msh(binary), Err(MshError::BinaryFormatUnsupported)));
        let v30 = "$MeshFormat\n3.0 0 8\n$EndMeshFormat\n";
        assert!(matches!(parse_msh(v30), Err(MshError::UnsupportedVersion(v)) if v == "3.0"));
    }

    #[test]
    fn rejects_unsupported_element_types() {
        // Same file with an extra line element (type 1).
        let text = TET_V41.replace(
            "$Elements\n2 2 1 2\n",
            "$Elements\n3 3 1 3\n1 1 1 1\n3 1 2\n",
        );
        assert!(matches!(
            parse_msh(&text),
            Err(MshError::UnsupportedElementType(1))
        ));
    }

    #[test]
    fn rejects_mixed_volume_kinds() {
        let text = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
9
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
5 2 0 0
6 3 0 0
7 3 1 0
8 2 1 0
9 2 0 1
$EndNodes
$Elements
2
1 4 2 0 1 1 2 3 4
2 5 2 0 1 5 6 7 8 9 9 9 9
$EndElements
";
        assert!(matches!(parse_msh(text), Err(MshError::MixedElementKinds)));
    }

    #[test]
    fn rejects_dangling_node_tags() {
        let text = TET_V41.replace("2 1 2 3 5", "2 1 2 3 99");
        assert!(matches!(parse_msh(&text), Err(MshError::DanglingIndex(99))));
    }

    #[test]
    fn reports_missing_terminator() {
        let text = "$MeshFormat\n4.1 0 8\n";
        let err = parse_msh(text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("$EndMeshFormat"), "{msg}");
    }

    #[test]
    fn surface_elements_without_physical_tag_get_label_zero() {
        let text = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
$EndNodes
$Elements
2
1 2 0 1 2 3
2 4 0 1 2 3 4
$EndElements
";
        let mesh = parse_msh(text).unwrap();
        assert_eq!(mesh.face_label(0), 0);
    }

    #[test]
    fn roundtrip_both_versions() {
        for kind in [ElementKind::Hex8, ElementKind::Tet4] {
            let mesh = generate_slab_mesh([1.0, 2.0, 0.5], [2, 3, 1], kind).unwrap();
            for version in [MshVersion::V41, MshVersion::V22] {
                let text = write_msh(&mesh, version);
                let back = parse_msh(&text).unwrap();
                assert_eq!(back.n_vertices(), mesh.n_vertices());
                assert_eq!(back.kind(), mesh.kind());
                for (a, b) in mesh.vertices().iter().zip(back.vertices()) {
                    assert_eq!(a, b, "coordinates must round-trip exactly");
                }
                for c in 0..mesh.n_cells() {
                    assert_eq!(mesh.cell(c), back.cell(c));
                }
                // Faces keep label association (order may group by label).
                let mut before: Vec<(Vec<usize>, i32)> = (0..mesh.n_faces())
                    .map(|f| {
                        let mut v = mesh.face(f).to_vec();
                        v.sort_unstable();
                        (v, mesh.face_label(f))
                    })
                    .collect();
                let mut after: Vec<(Vec<usize>, i32)> = (0..back.n_faces())
                    .map(|f| {
                        let mut v = back.face(f).to_vec();
                        v.sort_unstable();
                        (v, back.face_label(f))
                    })
                    .collect();
                before.sort();
                after.sort();
                assert_eq!(before, after);
            }
        }
    }
}
