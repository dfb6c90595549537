//! Workspace layout, atomic writes and per-stage run manifests.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use lanlan_core::Error;

pub const MANIFEST_DIR: &str = "manifests";

#[derive(Debug)]
pub enum CliError {
    /// Missing or invalid input: exit status 2.
    Input(String),
    /// A stage ran and failed: exit status 1.
    Stage { stage: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Stage { .. } => 1,
        }
    }

    /// Sorts a library error into bad input or stage failure.
    pub fn from_core(stage: &str, e: Error) -> Self {
        let input = match &e {
            Error::Io { source, .. } => source.kind() == io::ErrorKind::NotFound,
            Error::MissingColumn(_) | Error::InvalidInput { .. } | Error::Config(_) | Error::ConflictingLabel { .. } => true,
            _ => false,
        };
        if input {
            CliError::Input(format!("{stage}: {e}"))
        } else {
            CliError::Stage { stage: stage.to_string(), message: e.to_string() }
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) => f.write_str(msg),
            CliError::Stage { stage, message } => write!(f, "stage `{stage}` failed: {message}"),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn open(root: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(root.join(MANIFEST_DIR))
            .map_err(|e| CliError::Input(format!("cannot create workspace {}: {e}", root.display())))?;
        Ok(Self { root })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Workspace-relative form with `/` separators, or the path as given
    /// when it lies outside the workspace.
    pub fn display(&self, path: &Path) -> String {
        match path.strip_prefix(&self.root) {
            Ok(rel) => rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
            Err(_) => path.display().to_string(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    stage: &'a str,
    tool_version: &'a str,
    config_sha256: &'a str,
    seed: Option<u64>,
    settings: &'a Value,
    inputs: &'a [FileEntry],
    outputs: &'a [FileEntry],
}

/// Bookkeeping for one stage: every byte read or written goes through here
/// so the manifest lists exactly what the stage consumed and produced.
pub struct StageRun<'a> {
    ws: &'a Workspace,
    name: &'static str,
    config_sha256: String,
    seed: Option<u64>,
    settings: Value,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

impl<'a> StageRun<'a> {
    pub fn new(ws: &'a Workspace, name: &'static str, config: &Value, seed: Option<u64>, settings: Value) -> Self {
        let canonical = serde_json::to_vec(&serde_json::json!({ "config": config, "settings": settings }))
            .expect("JSON values always serialize");
        Self {
            ws,
            name,
            config_sha256: sha256_hex(&canonical),
            seed,
            settings,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Checks up front that every declared input exists.
    pub fn require(&self, paths: &[&Path]) -> CliResult<()> {
        match paths.iter().find(|p| !p.is_file()) {
            Some(p) => Err(CliError::Input(format!("{}: missing input {}", self.name, p.display()))),
            None => Ok(()),
        }
    }

    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => CliError::Input(format!("{}: missing input {}", self.name, path.display())),
            _ => CliError::Input(format!("{}: cannot read {}: {e}", self.name, path.display())),
        })?;
        self.inputs.push(FileEntry { path: self.ws.display(path), sha256: sha256_hex(&bytes), bytes: bytes.len() });
        Ok(bytes)
    }

    pub fn read_ws(&mut self, rel: &str) -> CliResult<Vec<u8>> {
        let path = self.ws.path(rel);
        self.read(&path)
    }

    pub fn write(&mut self, rel: &str, bytes: Vec<u8>) -> CliResult<()> {
        let path = self.ws.path(rel);
        write_atomic(&path, &bytes).map_err(|e| CliError::Stage {
            stage: self.name.to_string(),
            message: format!("cannot write {}: {e}", path.display()),
        })?;
        self.outputs.push(FileEntry { path: rel.to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() });
        Ok(())
    }

    /// Renders an output with one of the library writers.
    pub fn write_with(&mut self, rel: &str, render: impl FnOnce(&mut Vec<u8>) -> lanlan_core::Result<()>) -> CliResult<()> {
        let mut buf = Vec::new();
        render(&mut buf).map_err(|e| self.fail(e))?;
        self.write(rel, buf)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Stage {
            stage: self.name.to_string(),
            message: format!("cannot serialize {rel}: {e}"),
        })?;
        bytes.push(b'\n');
        self.write(rel, bytes)
    }

    pub fn fail(&self, e: Error) -> CliError {
        CliError::from_core(self.name, e)
    }

    pub fn finish(self) -> CliResult<()> {
        let manifest = Manifest {
            stage: self.name,
            tool_version: env!("CARGO_PKG_VERSION"),
            config_sha256: &self.config_sha256,
            seed: self.seed,
            settings: &self.settings,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        let path = self.ws.path(&format!("{MANIFEST_DIR}/{}.json", self.name));
        write_atomic(&path, &bytes).map_err(|e| CliError::Stage {
            stage: self.name.to_string(),
            message: format!("cannot write manifest: {e}"),
        })?;
        log::info!("{}: wrote {} outputs", self.name, self.outputs.len());
        Ok(())
    }
}
