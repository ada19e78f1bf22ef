//! Output directory: CSV reports, key=value summaries and the manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::CliError;

/// Shortest round-trip form of a real, with an exponent when needed.
pub fn real(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn flag(b: bool) -> String {
    if b { "pass".into() } else { "fail".into() }
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.path(name);
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn key_values(&self, name: &str, pairs: &[(String, String)]) -> Result<(), CliError> {
        let mut text = String::new();
        for (k, v) in pairs {
            text.push_str(&format!("{k}={v}\n"));
        }
        self.bytes(name, text.as_bytes())
    }

    pub fn bytes(&self, name: &str, data: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        let mut f = fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        f.write_all(data).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn manifest(&self, subcommand: &str, cfg: &RunConfig) -> Result<(), CliError> {
        let mut pairs = vec![
            ("subcommand".to_string(), subcommand.to_string()),
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("seed".to_string(), cfg.master_seed.to_string()),
            ("config_sha256".to_string(), cfg.hash()),
        ];
        pairs.extend(cfg.flatten().into_iter().map(|(k, v)| (format!("config.{k}"), v)));
        self.key_values("manifest.txt", &pairs)
    }
}
