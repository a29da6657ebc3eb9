//! Output directory bookkeeping, manifests and the error contract.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clines_core::error::ErrorKind;
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, RunConfig};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "CLINES_OUT";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(clines_core::Error),
    Io(String),
}

impl CliError {
    /// Process exit code: 2 for bad input or unusable output location,
    /// 3 for invariant violations, 4 for numerical failure.
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Invariant => 3,
                ErrorKind::Numerical => 4,
                ErrorKind::Io => 2,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self.code() {
            2 if matches!(self, CliError::Config(_)) => "config",
            2 => "io",
            3 => "invariant",
            _ => "numerical",
        }
    }

    pub fn to_json(&self, command: Option<&str>) -> Json {
        let message = match self {
            CliError::Config(m) | CliError::Io(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        };
        let diagnostic = match self {
            CliError::Core(e) => json!(format!("{e:?}")),
            _ => Json::Null,
        };
        json!({
            "error": {
                "code": self.code(),
                "kind": self.kind(),
                "command": command,
                "message": message,
                "diagnostic": diagnostic,
            }
        })
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<clines_core::Error> for CliError {
    fn from(e: clines_core::Error) -> Self {
        match e {
            clines_core::Error::Io(m) => CliError::Io(m),
            e => CliError::Core(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// `--out` if given, else `$CLINES_OUT/<name>`, else `clines-out/<name>`.
pub fn resolve_dir(explicit: Option<&Path>, name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let root = std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("clines-out"));
            root.join(name)
        }
    }
}

/// A run's output directory; records every file written with its digest.
pub struct OutDir {
    pub path: PathBuf,
    files: Vec<(String, String)>,
}

impl OutDir {
    pub fn create(path: PathBuf) -> CliResult<Self> {
        std::fs::create_dir_all(&path)
            .map_err(|e| CliError::Io(format!("cannot create output directory `{}`: {e}", path.display())))?;
        Ok(Self {
            path,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let target = self.path.join(name);
        std::fs::write(&target, bytes)
            .map_err(|e| CliError::Io(format!("cannot write `{}`: {e}", target.display())))?;
        let digest = Sha256::digest(bytes);
        let hex = digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), hex));
        Ok(())
    }

    /// Runs a core CSV writer into a file.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> CliResult<()>
    where
        F: FnOnce(&mut Vec<u8>) -> clines_core::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn write_json(&mut self, name: &str, value: &Json) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialise");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json`: resolved config with provenance, toolkit
    /// version, output digests and the command's summary.
    pub fn finish(mut self, cfg: &RunConfig, threads: usize, report: Json) -> CliResult<PathBuf> {
        let outputs: Vec<Json> = self
            .files
            .iter()
            .map(|(n, h)| json!({ "file": n, "sha256": h }))
            .collect();
        let manifest = json!({
            "toolkit": { "name": "clines", "version": env!("CARGO_PKG_VERSION") },
            "command": cfg.command.name(),
            "preset": cfg.preset.map(|p| p.name()),
            "run_id": cfg.run_id(),
            "config": cfg.to_json(),
            "assumed": cfg.assumed_keys(),
            "runtime": { "threads": threads },
            "outputs": outputs,
            "report": report,
        });
        self.write_json("manifest.json", &manifest)?;
        Ok(self.path)
    }
}
