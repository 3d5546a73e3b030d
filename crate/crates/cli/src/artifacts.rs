//! Artifact files: atomic writes and the provenance envelope carried by
//! every JSON output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use qrng_core::rng::GENERATOR_ID;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "qrng";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub generator: String,
    pub seed: u64,
    pub run_config: RunConfig,
}

impl Provenance {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            generator: GENERATOR_ID.into(),
            seed: cfg.seed,
            run_config: cfg.clone(),
        }
    }
}

/// A JSON artifact: provenance, a kind tag naming the payload, the payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub provenance: Provenance,
    pub kind: String,
    pub data: T,
}

/// Output directory plus helpers for writing named artifacts into it.
#[derive(Debug, Clone)]
pub struct ArtifactDir {
    root: PathBuf,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| {
            CliError::io(format!(
                "cannot create output directory {}: {e}",
                root.display()
            ))
        })?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn write_text(&self, name: &str, text: &str) -> CliResult<PathBuf> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(
        &self,
        name: &str,
        kind: &str,
        cfg: &RunConfig,
        data: &T,
    ) -> CliResult<PathBuf> {
        let env = Envelope {
            provenance: Provenance::new(cfg),
            kind: kind.into(),
            data,
        };
        let mut text =
            serde_json::to_string_pretty(&env).map_err(|e| CliError::new("json", e.to_string()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Read a file produced by an earlier stage; a missing file names the
    /// stage that makes it.
    pub fn read_bytes(&self, name: &str, producer: &str) -> CliResult<Vec<u8>> {
        let path = self.path(name);
        fs::read(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::missing_artifact(format!(
                    "missing artifact {}: run `qrng {producer}` first",
                    path.display()
                ))
            } else {
                CliError::io(format!("cannot read {}: {e}", path.display()))
            }
        })
    }

    pub fn read_json<T: DeserializeOwned>(
        &self,
        name: &str,
        kind: &str,
        producer: &str,
    ) -> CliResult<Envelope<T>> {
        let bytes = self.read_bytes(name, producer)?;
        read_envelope(&bytes, &self.path(name), kind)
    }
}

pub fn read_envelope<T: DeserializeOwned>(
    bytes: &[u8],
    path: &Path,
    kind: &str,
) -> CliResult<Envelope<T>> {
    let env: Envelope<T> = serde_json::from_slice(bytes).map_err(|e| {
        CliError::new(
            "parse",
            format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()),
        )
    })?;
    if env.kind != kind {
        return Err(CliError::new(
            "parse",
            format!(
                "{} holds a `{}` artifact, expected `{kind}`",
                path.display(),
                env.kind
            ),
        ));
    }
    Ok(env)
}

/// Write to a temporary sibling and rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::io(format!("invalid output path {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let io_err = |e: std::io::Error| CliError::io(format!("cannot write {}: {e}", path.display()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err)
}
