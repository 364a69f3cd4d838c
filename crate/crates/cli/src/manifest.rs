use std::path::Path;

use ftsbench_core::io::{read_text, sha256_hex, write_text};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// One executed unit of a stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub id: String,
    pub stage: String,
    /// Hash of everything the cell's outputs depend on.
    pub key: String,
    pub status: CellStatus,
    #[serde(default)]
    pub error: Option<String>,
    pub seconds: f64,
    #[serde(default)]
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub cells: Vec<CellRecord>,
}

impl RunManifest {
    pub fn new(config_hash: &str) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            cells: Vec::new(),
        }
    }

    pub fn cell(&self, id: &str) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.id == id)
    }

    /// Replaces or appends a record, keeping cells sorted by id.
    pub fn upsert(&mut self, record: CellRecord) {
        match self.cells.binary_search_by(|c| c.id.as_str().cmp(&record.id)) {
            Ok(k) => self.cells[k] = record,
            Err(k) => self.cells.insert(k, record),
        }
    }

    pub fn failed(&self) -> Vec<&CellRecord> {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let m: Self = toml::from_str(text).map_err(|e| CliError::Manifest(e.to_string()))?;
        if m.schema_version != MANIFEST_SCHEMA {
            return Err(CliError::Manifest(format!("unsupported schema version {}", m.schema_version)));
        }
        Ok(m)
    }

    pub fn read(out_dir: &Path) -> Result<Self, CliError> {
        let text = read_text(&out_dir.join(MANIFEST_FILE)).map_err(|e| CliError::Manifest(e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        write_text(&out_dir.join(MANIFEST_FILE), &self.to_toml()).map_err(|e| CliError::Io(e.to_string()))
    }

    /// Artifacts that are missing or whose content no longer matches.
    pub fn verify(&self, out_dir: &Path) -> Vec<String> {
        self.cells
            .iter()
            .flat_map(|c| &c.artifacts)
            .filter(|a| !artifact_matches(out_dir, a))
            .map(|a| a.path.clone())
            .collect()
    }
}

pub fn artifact_matches(out_dir: &Path, a: &Artifact) -> bool {
    std::fs::read(out_dir.join(&a.path)).map(|b| sha256_hex(&b) == a.sha256).unwrap_or(false)
}

/// Hashes a file written by a stage.
pub fn artifact(out_dir: &Path, rel: &str) -> Result<Artifact, CliError> {
    let bytes = std::fs::read(out_dir.join(rel)).map_err(|e| CliError::Io(format!("{rel}: {e}")))?;
    Ok(Artifact { path: rel.to_string(), sha256: sha256_hex(&bytes) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        let mut m = RunManifest::new("abc");
        m.upsert(CellRecord {
            id: "z".into(),
            stage: "generate".into(),
            key: "k".into(),
            status: CellStatus::Ok,
            error: None,
            seconds: 0.5,
            artifacts: vec![artifact(dir.path(), "a.csv").unwrap()],
        });
        m.upsert(CellRecord { id: "a".into(), stage: "fit".into(), key: "k2".into(), status: CellStatus::Failed, error: Some("x".into()), seconds: 0.0, artifacts: vec![] });
        assert_eq!(m.cells[0].id, "a");
        m.write(dir.path()).unwrap();
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        assert!(back.verify(dir.path()).is_empty());
        std::fs::write(dir.path().join("a.csv"), "x\n2\n").unwrap();
        assert_eq!(back.verify(dir.path()), vec!["a.csv".to_string()]);
        std::fs::remove_file(dir.path().join("a.csv")).unwrap();
        assert_eq!(back.verify(dir.path()).len(), 1);
        assert_eq!(back.failed().len(), 1);
    }

    #[test]
    fn rejects_foreign_schema() {
        let text = RunManifest::new("h").to_toml().replace("schema_version = 1", "schema_version = 7");
        assert!(RunManifest::from_toml(&text).is_err());
    }
}
