//! VTU (VTK XML unstructured-grid) export of fiber generation results.
//!
//! A single ASCII `.vtu` file holds the mesh (points and cells) together with
//! point-data arrays for the fiber frame (`fiber_f`, `sheet_s`,
//! `sheet_normal_n`), the transmural potential `phi`, one scalar array per
//! auxiliary potential, and — for atrial results — an `Int32` `bundle_id`
//! array.  Reals are printed with 17 significant digits so that reading the
//! file back reproduces every `f64` bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ldrbm::FiberResult;
use crate::mesh::{ElementKind, Mesh};

/// Where (and whether) to write the result file.
#[derive(Debug, Clone)]
pub struct OutputSpec {
    /// When `false`, [`write_vtu`] refuses to touch the filesystem.
    pub enabled: bool,
    /// Target file; `.vtu` is appended when the name has no extension.
    pub path: PathBuf,
}

impl OutputSpec {
    pub fn new(enabled: bool, path: impl Into<PathBuf>) -> Self {
        Self { enabled, path: path.into() }
    }
}

#[derive(Debug, Error)]
pub enum OutputError {
    /// The spec has `enabled = false`; nothing was written.
    #[error("output is disabled")]
    DisabledOutput,
    /// The target path has an empty file name.
    #[error("output filename is empty")]
    EmptyFilename,
    #[error("failed to write `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// VTK cell type codes for the two supported element kinds.
fn vtk_cell_type(kind: ElementKind) -> u8 {
    match kind {
        ElementKind::Tet4 => 10,
        ElementKind::Hex8 => 12,
    }
}

/// Renders the complete VTU document as a string.
///
/// Vertex order matches the mesh; the point-data arrays appear in the fixed
/// order `fiber_f`, `sheet_s`, `sheet_normal_n`, `phi`, then one array per
/// auxiliary scalar in result order, then `bundle_id` when present.
pub fn render_vtu(mesh: &Mesh, result: &FiberResult) -> String {
    let nv = mesh.n_vertices();
    let nc = mesh.n_cells();
    // ~90 bytes per float triple; preallocate generously to avoid rehashing.
    let mut out = String::with_capacity(256 + nv * 96 * 4 + nc * 48);

    out.push_str("<?xml version=\"1.0\"?>\n");
    out.push_str(
        "<VTKFile type=\"UnstructuredGrid\" version=\"0.1\" byte_order=\"LittleEndian\">\n",
    );
    out.push_str("  <UnstructuredGrid>\n");
    let _ = writeln!(
        out,
        "    <Piece NumberOfPoints=\"{nv}\" NumberOfCells=\"{nc}\">"
    );

    out.push_str("      <Points>\n");
    out.push_str(
        "        <DataArray type=\"Float64\" NumberOfComponents=\"3\" format=\"ascii\">\n",
    );
    for v in 0..nv {
        let p = mesh.vertex(v);
        let _ = writeln!(out, "          {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
    }
    out.push_str("        </DataArray>\n");
    out.push_str("      </Points>\n");

    out.push_str("      <Cells>\n");
    out.push_str("        <DataArray type=\"Int64\" Name=\"connectivity\" format=\"ascii\">\n");
    for c in 0..nc {
        out.push_str("         ");
        for &v in mesh.cell(c) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out.push_str("        </DataArray>\n");
    out.push_str("        <DataArray type=\"Int64\" Name=\"offsets\" format=\"ascii\">\n");
    let nodes = mesh.kind().nodes_per_cell();
    for c in 0..nc {
        let _ = writeln!(out, "          {}", (c + 1) * nodes);
    }
    out.push_str("        </DataArray>\n");
    out.push_str("        <DataArray type=\"UInt8\" Name=\"types\" format=\"ascii\">\n");
    let code = vtk_cell_type(mesh.kind());
    for _ in 0..nc {
        let _ = writeln!(out, "          {code}");
    }
    out.push_str("        </DataArray>\n");
    out.push_str("      </Cells>\n");

    out.push_str("      <PointData Vectors=\"fiber_f\">\n");
    push_vector_array(&mut out, "fiber_f", result.f.vectors());
    push_vector_array(&mut out, "sheet_s", result.s.vectors());
    push_vector_array(&mut out, "sheet_normal_n", result.n.vectors());
    push_scalar_array(&mut out, "phi", result.phi.values());
    for (name, field) in &result.aux {
        push_scalar_array(&mut out, name, field.values());
    }
    if let Some(bundle) = &result.bundle_id {
        let _ = writeln!(
            out,
            "        <DataArray type=\"Int32\" Name=\"bundle_id\" format=\"ascii\">"
        );
        for id in bundle {
            let _ = writeln!(out, "          {id}");
        }
        out.push_str("        </DataArray>\n");
    }
    out.push_str("      </PointData>\n");

    out.push_str("    </Piece>\n");
    out.push_str("  </UnstructuredGrid>\n");
    out.push_str("</VTKFile>\n");
    out
}

fn push_vector_array(out: &mut String, name: &str, vectors: &[nalgebra::Vector3<f64>]) {
    let _ = writeln!(
        out,
        "        <DataArray type=\"Float64\" Name=\"{name}\" NumberOfComponents=\"3\" format=\"ascii\">"
    );
    for v in vectors {
        let _ = writeln!(out, "          {:.16e} {:.16e} {:.16e}", v.x, v.y, v.z);
    }
    out.push_str("        </DataArray>\n");
}

fn push_scalar_array(out: &mut String, name: &str, values: &[f64]) {
    let _ = writeln!(
        out,
        "        <DataArray type=\"Float64\" Name=\"{name}\" format=\"ascii\">"
    );
    for x in values {
        let _ = writeln!(out, "          {x:.16e}");
    }
    out.push_str("        </DataArray>\n");
}

/// Writes the result as a VTU file and returns the path actually written.
///
/// The write happens on the calling thread; rendering is deterministic, so
/// the same result always produces the same bytes.
pub fn write_vtu(
    mesh: &Mesh,
    result: &FiberResult,
    spec: &OutputSpec,
) -> Result<PathBuf, OutputError> {
    if !spec.enabled {
        return Err(OutputError::DisabledOutput);
    }
    let mut path = spec.path.clone();
    match path.file_name() {
        None => return Err(OutputError::EmptyFilename),
        Some(name) if name.is_empty() => return Err(OutputError::EmptyFilename),
        Some(_) => {}
    }
    if path.extension().is_none() {
        path.set_extension("vtu");
    }
    let body = render_vtu(mesh, result);
    let io_err = |source| OutputError::Io { path: path.clone(), source };
    let mut file = fs::File::create(&path).map_err(io_err)?;
    file.write_all(body.as_bytes()).map_err(io_err)?;
    Ok(path)
}

/// Re-reads the point-data arrays of a VTU file written by [`write_vtu`].
///
/// Only the subset of the format that `render_vtu` emits is understood; this
/// exists so results can be loaded back for comparisons and reports.
pub fn read_vtu_point_data(path: &Path) -> Result<Vec<(String, Vec<f64>)>, OutputError> {
    let io_err = |source| OutputError::Io { path: path.to_path_buf(), source };
    let text = fs::read_to_string(path).map_err(io_err)?;
    Ok(parse_point_data(&text))
}

/// Extracts `(name, flat values)` for every named point-data array in the
/// document, in file order.  Integer arrays come back as `f64`.
pub fn parse_point_data(text: &str) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    let Some(start) = text.find("<PointData") else {
        return out;
    };
    let end = text[start..].find("</PointData>").map_or(text.len(), |e| start + e);
    let mut rest = &text[start..end];
    while let Some(tag) = rest.find("<DataArray") {
        rest = &rest[tag..];
        let Some(tag_end) = rest.find('>') else { break };
        let header = &rest[..tag_end];
        let name = header
            .split("Name=\"")
            .nth(1)
            .and_then(|s| s.split('"').next())
            .unwrap_or("")
            .to_string();
        rest = &rest[tag_end + 1..];
        let Some(close) = rest.find("</DataArray>") else { break };
        let values = rest[..close]
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().expect("numeric VTU payload"))
            .collect();
        out.push((name, values));
        rest = &rest[close..];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::SolverOptions;
    use crate::ldrbm::{generate_fibers, AngleSet, GeometryConfig, SlabConfig};
    use crate::mesh::{
        generate_slab_mesh, SLAB_LABEL_BASE_DOWN, SLAB_LABEL_BASE_UP, SLAB_LABEL_ENDO,
        SLAB_LABEL_EPI,
    };

    fn slab_result() -> (Mesh, FiberResult) {
        let mesh = generate_slab_mesh([1.0, 1.0, 1.0], [2, 2, 2], ElementKind::Hex8).unwrap();
        let config = GeometryConfig::Slab(SlabConfig {
            endo_labels: vec![SLAB_LABEL_ENDO],
            epi_labels: vec![SLAB_LABEL_EPI],
            base_up_labels: vec![SLAB_LABEL_BASE_UP],
            base_down_labels: vec![SLAB_LABEL_BASE_DOWN],
            angles: AngleSet::new(60.0, -60.0, -45.0, 45.0),
        });
        let result = generate_fibers(&mesh, &config, &SolverOptions::default()).unwrap();
        (mesh, result)
    }

    #[test]
    fn slab_file_has_six_point_data_arrays() {
        let (mesh, result) = slab_result();
        let text = render_vtu(&mesh, &result);
        let arrays = parse_point_data(&text);
        let names: Vec<&str> = arrays.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            ["fiber_f", "sheet_s", "sheet_normal_n", "phi", "psi", "alpha_deg"]
        );
        assert!(text.contains(&format!("NumberOfPoints=\"{}\"", mesh.n_vertices())));
        assert!(text.contains(&format!("NumberOfCells=\"{}\"", mesh.n_cells())));
    }

    #[test]
    fn cell_types_match_element_kind() {
        for (kind, code) in [(ElementKind::Hex8, "12"), (ElementKind::Tet4, "10")] {
            let mesh = generate_slab_mesh([1.0, 1.0, 1.0], [1, 1, 1], kind).unwrap();
            let config = GeometryConfig::Slab(SlabConfig {
                endo_labels: vec![SLAB_LABEL_ENDO],
                epi_labels: vec![SLAB_LABEL_EPI],
                base_up_labels: vec![SLAB_LABEL_BASE_UP],
                base_down_labels: vec![SLAB_LABEL_BASE_DOWN],
                angles: AngleSet::zero(),
            });
            let result = generate_fibers(&mesh, &config, &SolverOptions::default()).unwrap();
            let text = render_vtu(&mesh, &result);
            let types = text
                .split("Name=\"types\"")
                .nth(1)
                .unwrap()
                .split('>')
                .nth(1)
                .unwrap()
                .split('<')
                .next()
                .unwrap()
                .trim()
                .to_string();
            assert!(types.split_whitespace().all(|t| t == code));
        }
    }

    #[test]
    fn write_then_reparse_is_exact() {
        let (mesh, result) = slab_result();
        let dir = std::env::temp_dir().join("fibergen_output_roundtrip");
        fs::create_dir_all(&dir).unwrap();
        let spec = OutputSpec::new(true, dir.join("fibers"));
        let path = write_vtu(&mesh, &result, &spec).unwrap();
        assert_eq!(path.extension().unwrap(), "vtu");

        let arrays = read_vtu_point_data(&path).unwrap();
        let lookup = |name: &str| {
            arrays
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v.clone())
                .unwrap()
        };
        let f = lookup("fiber_f");
        assert_eq!(f.len(), 3 * mesh.n_vertices());
        for v in 0..mesh.n_vertices() {
            for c in 0..3 {
                let got = f[3 * v + c];
                let want = result.f.vectors()[v][c];
                assert!(
                    (got - want).abs() <= 1e-12,
                    "fiber_f[{v}][{c}]: {got} vs {want}"
                );
                // 17 significant digits round-trip f64 exactly.
                assert_eq!(got.to_bits(), want.to_bits());
            }
        }
        let phi = lookup("phi");
        for v in 0..mesh.n_vertices() {
            assert_eq!(phi[v].to_bits(), result.phi[v].to_bits());
        }
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn disabled_output_writes_nothing() {
        let (mesh, result) = slab_result();
        let dir = std::env::temp_dir().join("fibergen_output_disabled");
        fs::create_dir_all(&dir).unwrap();
        let spec = OutputSpec::new(false, dir.join("fibers"));
        match write_vtu(&mesh, &result, &spec) {
            Err(OutputError::DisabledOutput) => {}
            other => panic!("expected DisabledOutput, got {other:?}"),
        }
        assert!(!dir.join("fibers.vtu").exists());
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn empty_filename_is_rejected() {
        let (mesh, result) = slab_result();
        let spec = OutputSpec::new(true, "");
        match write_vtu(&mesh, &result, &spec) {
            Err(OutputError::EmptyFilename) => {}
            other => panic!("expected EmptyFilename, got {other:?}"),
        }
    }

    #[test]
    fn io_error_reports_path() {
        let (mesh, result) = slab_result();
        let spec = OutputSpec::new(true, "/nonexistent_dir_for_sure/fibers.vtu");
        match write_vtu(&mesh, &result, &spec) {
            Err(OutputError::Io { path, .. }) => {
                assert_eq!(path, PathBuf::from("/nonexistent_dir_for_sure/fibers.vtu"));
            }
            other => panic!("expected Io error, got {other:?}"),
        }
    }

    #[test]
    fn bundle_id_written_as_int32_for_atrial_results() {
        use crate::ldrbm::AtriumConfig;
        use crate::mesh::{generate_holed_shell_mesh, ShellHole};
        let holes = [
            ShellHole { face: 5, i0: 3, j0: 3, size: 2, label: 40 },
            ShellHole { face: 4, i0: 1, j0: 1, size: 2, label: 50 },
            ShellHole { face: 4, i0: 5, j0: 5, size: 2, label: 20 },
        ];
        let mesh = generate_holed_shell_mesh(8, 2, 0.8, 1.0, 10, 30, &holes).unwrap();
        let config = GeometryConfig::LeftAtrium(AtriumConfig {
            mv_labels: vec![40],
            lpv_labels: vec![50],
            rpv_labels: vec![20],
            endo_labels: vec![30],
            epi_labels: vec![10],
            appendage_apex: None,
            tau_mv: 0.65,
            tau_lpv: 0.85,
            tau_rpv: 0.15,
        });
        let result = generate_fibers(&mesh, &config, &SolverOptions::default()).unwrap();
        let text = render_vtu(&mesh, &result);
        assert!(text.contains("<DataArray type=\"Int32\" Name=\"bundle_id\""));
        let arrays = parse_point_data(&text);
        let (last_name, ids) = arrays.last().unwrap();
        assert_eq!(last_name, "bundle_id");
        assert_eq!(ids.len(), mesh.n_vertices());
        let expect: Vec<f64> = result
            .bundle_id
            .as_ref()
            .unwrap()
            .iter()
            .map(|&b| f64::from(b))
            .collect();
        assert_eq!(ids, &expect);
    }
}
