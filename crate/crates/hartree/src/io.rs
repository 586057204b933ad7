//! On-disk formats: field files (a JSON header next to a raw little-endian
//! binary payload, guarded by a SHA-256 checksum), the evolution-trace CSV,
//! and run manifests. Values round-trip bit-identically.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::EvolutionTrace;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, RealField, SpectralGrid};

/// A field read back from disk.
#[derive(Debug, Clone)]
pub enum StoredField {
    Real(RealField),
    Complex(ComplexField),
}

impl StoredField {
    pub fn grid(&self) -> &SpectralGrid {
        match self {
            StoredField::Real(f) => f.grid(),
            StoredField::Complex(f) => f.grid(),
        }
    }

    /// Promote to a complex field (real parts when stored real).
    pub fn into_complex(self) -> ComplexField {
        match self {
            StoredField::Real(f) => f.to_complex(),
            StoredField::Complex(f) => f,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldHeader {
    dim: usize,
    n: usize,
    half_width: f64,
    /// "real" or "complex"
    kind: String,
    layout: String,
    encoding: String,
    /// Payload file name, relative to the header's directory.
    payload: String,
    /// Hex SHA-256 of the payload bytes.
    sha256: String,
    /// Number of 64-bit scalars in the payload.
    count: usize,
}

fn payload_path(header_path: &Path) -> PathBuf {
    let mut name = header_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "field".into());
    name.push_str(".bin");
    header_path.with_file_name(name)
}

fn scalars_to_bytes(scalars: impl Iterator<Item = f64>) -> Vec<u8> {
    let mut bytes = Vec::new();
    for s in scalars {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    bytes
}

fn write_field_files(
    header_path: &Path,
    grid: &SpectralGrid,
    kind: &str,
    bytes: Vec<u8>,
    count: usize,
) -> Result<()> {
    let payload = payload_path(header_path);
    let digest = hex_digest(&bytes);
    let header = FieldHeader {
        dim: grid.dim(),
        n: grid.points_per_dim(),
        half_width: grid.half_width(),
        kind: kind.into(),
        layout: "row-major".into(),
        encoding: "little-endian-f64".into(),
        payload: payload
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: digest,
        count,
    };
    fs::write(&payload, &bytes)?;
    let mut text = serde_json::to_string_pretty(&header).expect("header serializes");
    text.push('\n');
    fs::write(header_path, text)?;
    Ok(())
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn write_real_field(header_path: &Path, field: &RealField) -> Result<()> {
    let bytes = scalars_to_bytes(field.values().iter().copied());
    write_field_files(
        header_path,
        field.grid(),
        "real",
        bytes,
        field.values().len(),
    )
}

pub fn write_complex_field(header_path: &Path, field: &ComplexField) -> Result<()> {
    let bytes = scalars_to_bytes(field.values().iter().flat_map(|v| [v.re, v.im]));
    write_field_files(
        header_path,
        field.grid(),
        "complex",
        bytes,
        2 * field.values().len(),
    )
}

pub fn read_field(header_path: &Path) -> Result<StoredField> {
    let path_str = header_path.display().to_string();
    let fail = |reason: &str| Error::FileFormat {
        path: path_str.clone(),
        reason: reason.into(),
    };
    let text = fs::read_to_string(header_path)?;
    let header: FieldHeader =
        serde_json::from_str(&text).map_err(|e| fail(&format!("bad header: {e}")))?;
    if header.layout != "row-major" || header.encoding != "little-endian-f64" {
        return Err(fail("unsupported layout or encoding"));
    }
    let grid = SpectralGrid::new(header.dim, header.n, header.half_width)?;
    let payload = header_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.payload);
    let bytes = fs::read(&payload)?;
    if bytes.len() != header.count * 8 {
        return Err(fail(&format!(
            "payload holds {} bytes, header promises {}",
            bytes.len(),
            header.count * 8
        )));
    }
    if hex_digest(&bytes) != header.sha256 {
        return Err(fail("payload checksum mismatch"));
    }
    let scalars: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    match header.kind.as_str() {
        "real" => {
            if scalars.len() != grid.len() {
                return Err(fail("scalar count does not match the grid"));
            }
            Ok(StoredField::Real(RealField::new(grid, scalars)?))
        }
        "complex" => {
            if scalars.len() != 2 * grid.len() {
                return Err(fail("scalar count does not match the grid"));
            }
            let values = scalars
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect();
            Ok(StoredField::Complex(ComplexField::new(grid, values)?))
        }
        other => Err(fail(&format!("unknown field kind {other:?}"))),
    }
}

/// Fixed-order CSV with 17 significant digits per value; optional columns stay
/// empty when the run had no reference state.
pub fn write_trace_csv(path: &Path, trace: &EvolutionTrace) -> Result<()> {
    let mut out = String::from("t,mass,energy,bound_quantity,orbit_distance,phase\n");
    for row in &trace.rows {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
            row.t,
            row.mass,
            row.energy,
            row.bound_quantity,
            opt(row.orbit_distance),
            opt(row.phase),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Everything needed to reproduce a run: the command, the fully resolved
/// parameter set, and the produced files.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: String,
    pub created_utc: String,
    pub parameters: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, parameters: serde_json::Value, outputs: Vec<String>) -> Self {
        RunManifest {
            command: command.into(),
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            created_utc: chrono::Utc::now().to_rfc3339(),
            parameters,
            outputs,
        }
    }
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let mut file = fs::File::create(path)?;
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Write any serializable report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
