//! Command-line pipeline around `bitext-core`: layered configuration, run
//! manifests and the synthetic comparison experiment.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Command;
pub use config::{ConfigFlags, PipelineConfig};
pub use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "bitext", version, about = "Mine, edit and evaluate noisy bitext")]
pub struct Cli {
    #[command(flatten)]
    pub flags: ConfigFlags,
    /// Directory receiving artifacts and the run manifest.
    #[arg(long, short = 'o', global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub cmd: TopCommand,
}

#[derive(Subcommand, Debug)]
pub enum TopCommand {
    #[command(flatten)]
    Run(Command),
    /// Re-execute a recorded run into --out-dir and compare every output byte for byte.
    Rerun { manifest: PathBuf },
    /// Print the effective configuration as TOML.
    ShowConfig,
}

/// Parses `argv` (program name first) and runs it.
pub fn run_cli(argv: Vec<String>) -> CliResult<()> {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        // help and version
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::config("arguments", e.to_string())),
    };
    match cli.cmd {
        TopCommand::ShowConfig => {
            print!("{}", PipelineConfig::resolve(&cli.flags)?.to_toml());
            Ok(())
        }
        TopCommand::Rerun { manifest } => {
            let m = manifest::read_manifest(&manifest)?;
            let r = manifest::rerun(&m, &cli.out_dir)?;
            for p in &r.identical {
                println!("identical\t{}", p.display());
            }
            for p in &r.differing {
                println!("DIFFERENT\t{}", p.display());
            }
            if r.differing.is_empty() {
                Ok(())
            } else {
                Err(CliError::data(format!("{} outputs differ from the recorded run", r.differing.len())))
            }
        }
        TopCommand::Run(cmd) => {
            let cfg = PipelineConfig::resolve(&cli.flags)?;
            let m = manifest::run_recorded(cmd, &cfg, &cli.out_dir, argv)?;
            for o in &m.outputs {
                println!("{}", cli.out_dir.join(&o.path).display());
            }
            if let Command::Experiment(_) = m.command {
                if let Ok(t) = std::fs::read_to_string(cli.out_dir.join("report.tsv")) {
                    print!("{t}");
                }
            }
            Ok(())
        }
    }
}
