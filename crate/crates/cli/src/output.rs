//! Staged outputs, run manifests and exit-code mapping.

use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use tempfile::NamedTempFile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Precondition(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Precondition(_) => EXIT_PRECONDITION,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Precondition(m) => write!(f, "{m}"),
        }
    }
}

impl From<patchtext::Error> for CliError {
    fn from(e: patchtext::Error) -> Self {
        match e {
            patchtext::Error::Precondition(_) => CliError::Precondition(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_context(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Outputs are written to temporary files beside their targets and renamed
/// into place only once every output of the run has been produced.
#[derive(Default)]
pub struct Staged {
    files: Vec<(PathBuf, NamedTempFile)>,
}

impl Staged {
    pub fn add(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let mut tmp = NamedTempFile::new_in(&dir).map_err(io_context(&dir))?;
        tmp.write_all(bytes).map_err(io_context(path))?;
        tmp.as_file().sync_all().map_err(io_context(path))?;
        self.files.push((path.to_path_buf(), tmp));
        Ok(())
    }

    pub fn paths(&self) -> Vec<PathBuf> {
        self.files.iter().map(|(p, _)| p.clone()).collect()
    }

    pub fn commit(self) -> CliResult<()> {
        for (path, tmp) in self.files {
            tmp.persist(&path).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e.error)))?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub toolkit_version: &'static str,
    pub duration_seconds: f64,
}

/// Collects what a run read and wrote; finished into a manifest.
pub struct Run {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub staged: Staged,
    started: Instant,
}

impl Run {
    pub fn new(subcommand: &str) -> Self {
        Run {
            subcommand: subcommand.to_string(),
            config: serde_json::Value::Null,
            seeds: Vec::new(),
            inputs: Vec::new(),
            staged: Staged::default(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        self.staged.add(path, bytes)
    }

    /// Writes the manifest to `manifest`, or beside the first output as
    /// `<output>.manifest.json`, then commits every output.
    pub fn finish(mut self, manifest: Option<&Path>) -> CliResult<()> {
        let outputs = self.staged.paths();
        let target = match (manifest, outputs.first()) {
            (Some(m), _) => Some(m.to_path_buf()),
            (None, Some(first)) => Some(PathBuf::from(format!("{}.manifest.json", first.display()))),
            (None, None) => None,
        };
        if let Some(target) = target {
            let m = RunManifest {
                subcommand: self.subcommand.clone(),
                config: self.config.clone(),
                seeds: self.seeds.clone(),
                inputs: self.inputs.clone(),
                outputs,
                toolkit_version: env!("CARGO_PKG_VERSION"),
                duration_seconds: self.started.elapsed().as_secs_f64(),
            };
            let mut bytes = serde_json::to_vec_pretty(&m)?;
            bytes.push(b'\n');
            self.staged.add(&target, &bytes)?;
        }
        self.staged.commit()
    }
}
