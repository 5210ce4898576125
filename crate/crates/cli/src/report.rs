use std::fmt;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use regimen::corpus::CorpusError;
use regimen::model::ModelError;
use regimen::numerics::NumericsError;
use regimen::synthgen::SynthError;
use regimen::traineval::TrainError;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// An error that already knows its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code,
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Failure::new(5, "config", message)
    }

    pub fn missing(path: &Path) -> Self {
        Failure::new(4, "missing-path", format!("{} does not exist", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

fn corpus_code(e: &CorpusError) -> (i32, &'static str) {
    match e {
        CorpusError::UnknownProfile(_) => (3, "unknown-profile"),
        CorpusError::Io { source, .. } if source.kind() == ErrorKind::NotFound => (4, "missing-path"),
        CorpusError::MissingAnnotations(_) => (4, "missing-path"),
        CorpusError::Io { .. } => (7, "io"),
        CorpusError::InvalidSchema(_) => (5, "config"),
        _ => (6, "validation"),
    }
}

fn numerics_code(e: &NumericsError) -> Option<(i32, &'static str)> {
    match e {
        NumericsError::Io { source, .. } if source.kind() == ErrorKind::NotFound => Some((4, "missing-path")),
        NumericsError::Checkpoint(_) => Some((6, "validation")),
        _ => None,
    }
}

fn model_code(e: &ModelError) -> Option<(i32, &'static str)> {
    match e {
        ModelError::Corpus(c) => Some(corpus_code(c)),
        ModelError::Numerics(n) => numerics_code(n),
        ModelError::Checkpoint(_) => Some((6, "validation")),
        ModelError::InvalidConfig(_) => Some((5, "config")),
        _ => None,
    }
}

/// Maps an error chain onto the documented exit codes.
pub fn classify(err: &anyhow::Error) -> (i32, &'static str) {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return (f.code, f.kind);
        }
        if let Some(c) = cause.downcast_ref::<CorpusError>() {
            return corpus_code(c);
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return (5, "config");
        }
        if let Some(s) = cause.downcast_ref::<SynthError>() {
            return match s {
                SynthError::Corpus(c) => corpus_code(c),
                SynthError::InvalidConfig(_) => (5, "config"),
            };
        }
        if let Some(t) = cause.downcast_ref::<TrainError>() {
            let code = match t {
                TrainError::Corpus(c) => Some(corpus_code(c)),
                TrainError::InvalidConfig(_) => Some((5, "config")),
                TrainError::Window(_) => Some((5, "config")),
                TrainError::Model(m) => model_code(m),
                TrainError::Numerics(n) => numerics_code(n),
                _ => None,
            };
            if let Some(c) = code {
                return c;
            }
        }
        if let Some(m) = cause.downcast_ref::<ModelError>() {
            if let Some(c) = model_code(m) {
                return c;
            }
        }
        if let Some(c) = cause.downcast_ref::<NumericsError>().and_then(numerics_code) {
            return c;
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == ErrorKind::NotFound {
                return (4, "missing-path");
            }
        }
    }
    (7, "runtime")
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    exit_code: i32,
    message: String,
}

pub fn error_json(kind: &str, code: i32, message: String) -> String {
    serde_json::to_string(&ErrorJson {
        error: kind,
        exit_code: code,
        message,
    })
    .expect("error serializes")
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)? + "\n";
    write_atomic(path, json.as_bytes())
}

#[derive(Serialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one artifact-producing run, written last as `run.json`.
#[derive(Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub tool_version: &'static str,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<OutputFile>,
    pub wall_seconds: f64,
}

pub struct RunRecorder {
    subcommand: &'static str,
    started: Instant,
}

impl RunRecorder {
    pub fn start(subcommand: &'static str) -> Self {
        RunRecorder {
            subcommand,
            started: Instant::now(),
        }
    }

    /// Hashes every regular file in `out` (except the manifest itself) and
    /// writes `out/run.json`.
    pub fn finish(self, out: &Path, seed: Option<u64>, config: serde_json::Value, inputs: Vec<PathBuf>) -> Result<()> {
        let mut names: Vec<_> = fs::read_dir(out)
            .with_context(|| format!("listing {}", out.display()))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name())
            .filter(|n| n != "run.json" && !n.to_string_lossy().starts_with('.'))
            .collect();
        names.sort();
        let mut outputs = Vec::with_capacity(names.len());
        for n in names {
            let path = out.join(&n);
            let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            outputs.push(OutputFile {
                path: PathBuf::from(n),
                sha256: hex(&Sha256::digest(&bytes)),
            });
        }
        let manifest = RunManifest {
            subcommand: self.subcommand,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            inputs,
            outputs,
            wall_seconds: self.started.elapsed().as_secs_f64(),
        };
        write_json(&out.join("run.json"), &manifest)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
