//! Plain-text persistence: comma-separated matrices with an id header and
//! TOML sidecar manifests.

use std::fs;
use std::path::{Path, PathBuf};

use ftsbench_numeric::DenseMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::generators::GeneratorSpec;
use crate::panel::ReturnPanel;

pub const PANEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("line {line}: cannot parse {value:?} as a number")]
    Number { line: usize, value: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Width { line: usize, expected: usize, found: usize },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("content hash mismatch: manifest {expected}, file {found}")]
    HashMismatch { expected: String, found: String },
    #[error("invalid panel: {0}")]
    Panel(#[from] crate::panel::PanelError),
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| IoError::File { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Formats a value so that it parses back to the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes a matrix with a header row.
pub fn matrix_to_csv(header: &[String], m: &DenseMatrix) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in 0..m.rows() {
        w.write_record(m.row(r).iter().map(|&v| fmt_f64(v))).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Parses a header row and a rectangular block of numbers.
pub fn csv_to_matrix(text: &str) -> Result<(Vec<String>, DenseMatrix), IoError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| IoError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().any(String::is_empty) {
        return Err(IoError::Csv("empty header field".into()));
    }
    let width = header.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IoError::Csv(e.to_string()))?;
        let line = k + 2;
        if record.len() != width {
            return Err(IoError::Width { line, expected: width, found: record.len() });
        }
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| IoError::Number { line, value: field.to_string() })?;
            values.push(v);
        }
        rows += 1;
    }
    let m = DenseMatrix::from_vec(rows, width, values).map_err(|e| IoError::Csv(e.to_string()))?;
    Ok((header, m))
}

fn labels_to_csv(name: &str, labels: &[u8]) -> String {
    let mut s = String::with_capacity(labels.len() * 2 + name.len() + 1);
    s.push_str(name);
    s.push('\n');
    for l in labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    s
}

fn csv_to_labels(text: &str) -> Result<Vec<u8>, IoError> {
    let mut lines = text.lines();
    lines.next().ok_or_else(|| IoError::Csv("missing header".into()))?;
    lines
        .enumerate()
        .map(|(k, l)| l.trim().parse::<u8>().map_err(|_| IoError::Number { line: k + 2, value: l.to_string() }))
        .collect()
}

/// Sidecar describing a persisted panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelManifest {
    pub schema_version: u32,
    pub steps: usize,
    pub instruments: Vec<String>,
    /// SHA-256 of the returns file.
    pub content_hash: String,
    pub spec_hash: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub spec: Option<GeneratorSpec>,
}

impl PanelManifest {
    pub fn from_toml(text: &str) -> Result<Self, IoError> {
        let m: Self = toml::from_str(text).map_err(|e| IoError::Manifest(e.to_string()))?;
        if m.schema_version != PANEL_SCHEMA_VERSION {
            return Err(IoError::Manifest(format!("unsupported schema version {}", m.schema_version)));
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

/// Sibling path `<stem>.<suffix>` next to a panel file.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Writes `path` (returns), `.variance`, `.jumps`, `.regime` and `.manifest.toml`.
pub fn write_panel(path: &Path, panel: &ReturnPanel, spec: Option<&GeneratorSpec>) -> Result<PanelManifest, IoError> {
    panel.validate()?;
    let returns = matrix_to_csv(&panel.instruments, &panel.returns);
    write_text(path, &returns)?;
    write_text(&sidecar(path, "variance"), &matrix_to_csv(&panel.instruments, &panel.variance))?;
    let mut jump_header = panel.instruments.clone();
    jump_header.push("large_regime".into());
    let jumps = DenseMatrix::from_fn(panel.steps(), panel.instrument_count() + 1, |t, i| {
        if i < panel.instrument_count() {
            panel.jumps[(t, i)]
        } else {
            f64::from(panel.jump_regime[t])
        }
    });
    write_text(&sidecar(path, "jumps"), &matrix_to_csv(&jump_header, &jumps))?;
    write_text(&sidecar(path, "regime"), &labels_to_csv("regime", &panel.regime))?;
    let manifest = PanelManifest {
        schema_version: PANEL_SCHEMA_VERSION,
        steps: panel.steps(),
        instruments: panel.instruments.clone(),
        content_hash: sha256_hex(returns.as_bytes()),
        spec_hash: panel.spec_hash.clone(),
        seed: spec.map(|s| s.seed),
        spec: spec.cloned(),
    };
    write_text(&sidecar(path, "manifest.toml"), &manifest.to_toml())?;
    Ok(manifest)
}

/// Parses a returns file into a panel with zeroed auxiliary channels.
pub fn parse_panel_csv(text: &str) -> Result<ReturnPanel, IoError> {
    let (ids, returns) = csv_to_matrix(text)?;
    let mut panel = ReturnPanel::from_returns(returns);
    panel.instruments = ids;
    panel.validate()?;
    Ok(panel)
}

/// Reads a panel and whichever sidecars exist. A manifest, if present, must
/// match the returns file's hash.
pub fn read_panel(path: &Path) -> Result<ReturnPanel, IoError> {
    let text = read_text(path)?;
    let mut panel = parse_panel_csv(&text)?;
    let (t, n) = panel.returns.shape();
    let manifest_path = sidecar(path, "manifest.toml");
    if manifest_path.exists() {
        let manifest = PanelManifest::from_toml(&read_text(&manifest_path)?)?;
        let found = sha256_hex(text.as_bytes());
        if manifest.content_hash != found {
            return Err(IoError::HashMismatch { expected: manifest.content_hash, found });
        }
        panel.spec_hash = manifest.spec_hash;
    }
    let variance = sidecar(path, "variance");
    if variance.exists() {
        panel.variance = csv_to_matrix(&read_text(&variance)?)?.1;
    }
    let jumps = sidecar(path, "jumps");
    if jumps.exists() {
        let (_, m) = csv_to_matrix(&read_text(&jumps)?)?;
        if m.cols() != n + 1 {
            return Err(IoError::Width { line: 1, expected: n + 1, found: m.cols() });
        }
        panel.jumps = DenseMatrix::from_fn(m.rows(), n, |r, c| m[(r, c)]);
        panel.jump_regime = (0..m.rows()).map(|r| m[(r, n)] as u8).collect();
    }
    let regime = sidecar(path, "regime");
    if regime.exists() {
        panel.regime = csv_to_labels(&read_text(&regime)?)?;
    }
    debug_assert_eq!(panel.returns.rows(), t);
    panel.validate()?;
    Ok(panel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{build_dataset, presets};

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DenseMatrix::from_vec(2, 2, vec![0.1, -1e-300, std::f64::consts::PI, 1.0 / 3.0]).unwrap();
        let ids = vec!["A".to_string(), "B".to_string()];
        let (h, back) = csv_to_matrix(&matrix_to_csv(&ids, &m)).unwrap();
        assert_eq!(h, ids);
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(matches!(csv_to_matrix("a,b\n1,2,3\n"), Err(IoError::Width { .. })));
        assert!(matches!(csv_to_matrix("a,b\n1,x\n"), Err(IoError::Number { .. })));
        assert!(parse_panel_csv("a,b\n1,NaN\n").is_err());
        assert!(parse_panel_csv("a,b\n").is_err());
    }

    #[test]
    fn panel_round_trip_with_sidecars() {
        let dir = tempfile::tempdir().unwrap();
        let spec = presets::heston_plus(3, 300, 1, 4);
        let panel = build_dataset(&spec).unwrap();
        let path = dir.path().join("data/heston_plus.csv");
        let manifest = write_panel(&path, &panel, Some(&spec)).unwrap();
        assert_eq!(manifest.spec, Some(spec.clone()));
        assert_eq!(read_panel(&path).unwrap(), panel);
        let parsed = PanelManifest::from_toml(&read_text(&sidecar(&path, "manifest.toml")).unwrap()).unwrap();
        assert_eq!(parsed, manifest);

        fs::write(&path, matrix_to_csv(&panel.instruments, &panel.variance)).unwrap();
        assert!(matches!(read_panel(&path), Err(IoError::HashMismatch { .. })));
    }
}
