//! Run manifests: the exact command, effective config and content hashes of
//! every input and output, enough to rerun a stage and diff the result.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::{execute, Command};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "bitext";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Absolute for inputs, relative to the output directory for outputs.
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub argv: Vec<String>,
    pub command: Command,
    pub config: PipelineConfig,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn manifest_name(cmd: &Command) -> String {
    format!("{}.manifest.json", cmd.name())
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Hashes a file, or every file below a directory in sorted order.
fn digest_inputs(paths: &[PathBuf]) -> CliResult<Vec<FileDigest>> {
    let mut files = Vec::new();
    for p in paths {
        collect_files(p, &mut files)?;
    }
    files
        .into_iter()
        .map(|path| {
            Ok(FileDigest {
                sha256: sha256_file(&path)?,
                path,
            })
        })
        .collect()
}

fn collect_files(p: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    if p.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(p)
            .map_err(|e| CliError::data(format!("{}: {e}", p.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|e| !e.to_string_lossy().ends_with(".manifest.json"))
            .collect();
        entries.sort();
        for e in entries {
            collect_files(&e, out)?;
        }
    } else {
        out.push(p.to_path_buf());
    }
    Ok(())
}

fn digest_outputs(out: &Path, names: &[String]) -> CliResult<Vec<FileDigest>> {
    names
        .iter()
        .map(|n| {
            Ok(FileDigest {
                path: PathBuf::from(n),
                sha256: sha256_file(&out.join(n))?,
            })
        })
        .collect()
}

/// Runs a command and writes its manifest next to the outputs.
pub fn run_recorded(
    mut cmd: Command,
    cfg: &PipelineConfig,
    out: &Path,
    argv: Vec<String>,
) -> CliResult<Manifest> {
    cmd.resolve_inputs()?;
    let inputs = digest_inputs(&cmd.input_paths())?;
    let names = execute(&cmd, cfg, out)?;
    let manifest = Manifest {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv,
        outputs: digest_outputs(out, &names)?,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        config: cfg.clone(),
        command: cmd,
        inputs,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::data(e.to_string()))? + "\n";
    let path = out.join(manifest_name(&manifest.command));
    fs::write(&path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> CliResult<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if m.tool != TOOL {
        return Err(CliError::data(format!("{} is not a {TOOL} manifest", path.display())));
    }
    if m.config.hash() != m.config_hash {
        return Err(CliError::data("manifest config does not match its hash"));
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RerunReport {
    pub identical: Vec<PathBuf>,
    pub differing: Vec<PathBuf>,
}

/// Re-executes a recorded run into `out` and compares every output hash.
pub fn rerun(manifest: &Manifest, out: &Path) -> CliResult<RerunReport> {
    let now = digest_inputs(&manifest.command.input_paths())?;
    if now != manifest.inputs {
        return Err(CliError::data("inputs changed since the recorded run"));
    }
    let names = execute(&manifest.command, &manifest.config, out)?;
    let fresh = digest_outputs(out, &names)?;
    let mut report = RerunReport {
        identical: Vec::new(),
        differing: Vec::new(),
    };
    for old in &manifest.outputs {
        match fresh.iter().find(|f| f.path == old.path) {
            Some(f) if f.sha256 == old.sha256 => report.identical.push(old.path.clone()),
            _ => report.differing.push(old.path.clone()),
        }
    }
    for f in &fresh {
        if !manifest.outputs.iter().any(|o| o.path == f.path) {
            report.differing.push(f.path.clone());
        }
    }
    Ok(report)
}
