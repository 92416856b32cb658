mod commands;
mod dataset;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use cscf_core::synth::SceneSpec;

use commands::*;
use settings::Settings;

/// Shared-dictionary visible/infrared image fusion.
///
/// Settings come from built-in defaults, then `--config`, then `--set`
/// overrides and the dedicated flags. Set `CSCF_LOG` to error, info or
/// debug to control logging.
#[derive(Parser, Debug)]
#[command(name = "cscf", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key=value settings file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: current directory; metrics print to
    /// stdout unless given)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 = all cores
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Override a setting, e.g. `--set atoms=16`
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a planted synthetic pair set
    Synth {
        #[arg(long, default_value_t = 8)]
        pairs: usize,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, default_value_t = 4)]
        atoms: usize,
        #[arg(long, default_value_t = 5)]
        kernel: usize,
        #[arg(long, default_value_t = 0.05)]
        density: f64,
    },
    /// Random aligned crops of every pair
    Patches {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Learn a shared dictionary
    Learn {
        #[arg(long)]
        input: PathBuf,
        /// Starting dictionary
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Fit the visible-to-infrared coefficient transfer
    FitTransfer {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        ridge: Option<f64>,
    },
    /// Synthesize pseudo-infrared images from visible ones
    InferIr {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        transfer: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Fuse visible images with their pseudo-infrared counterparts
    Fuse {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        transfer: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Quality metrics of images (files or directories)
    Metrics {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Learn, fit and fuse in one run
    Pipeline {
        #[arg(long)]
        input: PathBuf,
    },
}

fn settings(common: &Common, extra: &[String]) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &common.config {
        s.load_file(path)?;
    }
    s.apply_overrides(&common.overrides)?;
    s.apply_overrides(extra)?;
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    s.validate()?;
    Ok(s)
}

fn run(cli: Cli) -> Result<usize> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.threads)
        .build_global()
        .context("configuring the thread pool")?;
    let common = &cli.common;
    let out_dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let out = out_dir.as_path();
    match &cli.command {
        Command::Synth {
            pairs,
            size,
            atoms,
            kernel,
            density,
        } => {
            let spec = SceneSpec {
                atoms: *atoms,
                kernel: *kernel,
                height: *size,
                width: *size,
                pairs: *pairs,
                density: *density,
                ..SceneSpec::default()
            };
            let s = settings(common, &[])?;
            synth(&spec, s.seed, out)
        }
        Command::Patches { input, size, count } => {
            let mut extra = Vec::new();
            if let Some(v) = size {
                extra.push(format!("patch_size={v}"));
            }
            if let Some(v) = count {
                extra.push(format!("patch_count={v}"));
            }
            let s = settings(common, &extra)?;
            s.log_header("patches");
            patches(&s, input, out)
        }
        Command::Learn { input, init } => {
            let extra: Vec<String> = init
                .iter()
                .map(|p| format!("init={}", p.display()))
                .collect();
            let s = settings(common, &extra)?;
            s.log_header("learn");
            learn(&s, input, out).map(|(_, e)| e)
        }
        Command::FitTransfer { dict, input, ridge } => {
            let extra: Vec<String> = ridge.iter().map(|r| format!("ridge={r}")).collect();
            let s = settings(common, &extra)?;
            s.log_header("fit-transfer");
            fit_transfer_cmd(&s, &load_dictionary(dict)?, input, out).map(|(_, e)| e)
        }
        Command::InferIr {
            dict,
            transfer,
            input,
        } => {
            let s = settings(common, &[])?;
            s.log_header("infer-ir");
            let (d, op, p) = (
                load_dictionary(dict)?,
                load_transfer(transfer)?,
                load_provider(&s)?,
            );
            infer_ir_cmd(&s, &d, &op, &p, input, out)
        }
        Command::Fuse {
            dict,
            transfer,
            input,
        } => {
            let s = settings(common, &[])?;
            s.log_header("fuse");
            let (d, op, p) = (
                load_dictionary(dict)?,
                load_transfer(transfer)?,
                load_provider(&s)?,
            );
            fuse_cmd(&s, &d, &op, &p, input, out, false)
        }
        Command::Metrics { paths } => metrics_cmd(paths, common.out.as_deref()),
        Command::Pipeline { input } => {
            let s = settings(common, &[])?;
            s.log_header("pipeline");
            pipeline(&s, input, out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CSCF_LOG", "info")).init();
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            log::error!("{n} item(s) failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
