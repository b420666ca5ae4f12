use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    parameters: serde_json::Value,
    wall_clock_seconds: f64,
    outputs: Vec<OutputFile>,
}

#[derive(Serialize)]
struct OutputFile {
    path: String,
    sha256: String,
}

/// Writes the CSV to `out` (or stdout) and, for files, a sidecar
/// `<stem>.manifest.json`.
pub fn write_outputs(
    command: &str,
    out: Option<&Path>,
    table: &Table,
    parameters: serde_json::Value,
    seconds: f64,
) -> Result<()> {
    let csv = table.to_csv();
    let Some(path) = out else {
        std::io::stdout().write_all(csv.as_bytes())?;
        return Ok(());
    };
    std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        parameters,
        wall_clock_seconds: seconds,
        outputs: vec![OutputFile {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(csv.as_bytes())),
        }],
    };
    let manifest_path = path.with_extension("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, text + "\n")
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_trailing_newline() {
        let t = Table {
            header: vec!["a".into(), "b".into()],
            rows: vec![vec!["1".into(), "0.500000".into()]],
        };
        assert_eq!(t.to_csv(), "a,b\n1,0.500000\n");
    }

    #[test]
    fn manifest_sits_next_to_csv() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run.csv");
        let t = Table {
            header: vec!["x".into()],
            rows: vec![],
        };
        write_outputs("coverage", Some(&out), &t, serde_json::json!({}), 0.0).unwrap();
        assert!(dir.path().join("run.manifest.json").exists());
    }
}
