//! Effective run settings: defaults, then the config file, then flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use cscf_core::afri::GateConfig;
use cscf_core::jsrl::{DictInit, JsrlConfig};
use cscf_core::solver::{StageParams, StageSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProviderKind {
    Identity,
    Calibrated,
    File,
}

impl FromStr for ProviderKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ProviderKind::Identity),
            "calibrated" => Ok(ProviderKind::Calibrated),
            "file" => Ok(ProviderKind::File),
            other => bail!("unknown provider {other:?} (expected identity, calibrated or file)"),
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Identity => "identity",
            ProviderKind::Calibrated => "calibrated",
            ProviderKind::File => "file",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub atoms: usize,
    pub kernel: usize,
    pub inner_blocks: usize,
    pub outer_iters: usize,
    pub growth: f64,
    pub params: StageParams,
    pub encode_iters: usize,
    pub ridge: f64,
    pub provider: ProviderKind,
    pub provider_path: Option<PathBuf>,
    pub gate_window: usize,
    pub gate_temperature: f64,
    pub patch_size: usize,
    /// crops per pair; 0 trains on whole images
    pub patch_count: usize,
    pub checkpoint: bool,
    pub init: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        let jsrl = JsrlConfig::default();
        let gate = GateConfig::default();
        Settings {
            seed: 0,
            atoms: jsrl.atoms,
            kernel: jsrl.kernel,
            inner_blocks: jsrl.inner_blocks,
            outer_iters: jsrl.outer_iters,
            growth: 1.0,
            params: StageParams::default(),
            encode_iters: 20,
            ridge: 1e-6,
            provider: ProviderKind::Identity,
            provider_path: None,
            gate_window: gate.window,
            gate_temperature: gate.temperature,
            patch_size: 128,
            patch_count: 0,
            checkpoint: false,
            init: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("invalid value {value:?} for {key}: {e}"))
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.params;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "atoms" => self.atoms = parse(key, value)?,
            "kernel" => self.kernel = parse(key, value)?,
            "inner_blocks" => self.inner_blocks = parse(key, value)?,
            "outer_iters" => self.outer_iters = parse(key, value)?,
            "growth" => self.growth = parse(key, value)?,
            "mu1" => p.mu1 = parse(key, value)?,
            "mu2" => p.mu2 = parse(key, value)?,
            "mu3" => p.mu3 = parse(key, value)?,
            "beta1" => p.beta1 = parse(key, value)?,
            "beta2" => p.beta2 = parse(key, value)?,
            "beta3" => p.beta3 = parse(key, value)?,
            "lambda1" => p.lambda1 = parse(key, value)?,
            "lambda2" => p.lambda2 = parse(key, value)?,
            "lambda3" => p.lambda3 = parse(key, value)?,
            "encode_iters" => self.encode_iters = parse(key, value)?,
            "ridge" => self.ridge = parse(key, value)?,
            "provider" => self.provider = value.parse()?,
            "provider_path" => self.provider_path = Some(PathBuf::from(value)),
            "gate_window" => self.gate_window = parse(key, value)?,
            "gate_temperature" => self.gate_temperature = parse(key, value)?,
            "patch_size" => self.patch_size = parse(key, value)?,
            "patch_count" => self.patch_count = parse(key, value)?,
            "checkpoint" => self.checkpoint = parse(key, value)?,
            "init" => self.init = Some(PathBuf::from(value)),
            other => bail!("unknown setting {other:?}"),
        }
        Ok(())
    }

    /// Applies a `key=value` file; blank lines and `#` comments are ignored.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key=value", path.display(), n + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<()> {
        for kv in pairs {
            let (key, value) = kv
                .split_once('=')
                .with_context(|| format!("override {kv:?} is not key=value"))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.params;
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".into())
        };
        vec![
            ("seed", self.seed.to_string()),
            ("atoms", self.atoms.to_string()),
            ("kernel", self.kernel.to_string()),
            ("inner_blocks", self.inner_blocks.to_string()),
            ("outer_iters", self.outer_iters.to_string()),
            ("growth", self.growth.to_string()),
            ("mu1", p.mu1.to_string()),
            ("mu2", p.mu2.to_string()),
            ("mu3", p.mu3.to_string()),
            ("beta1", p.beta1.to_string()),
            ("beta2", p.beta2.to_string()),
            ("beta3", p.beta3.to_string()),
            ("lambda1", p.lambda1.to_string()),
            ("lambda2", p.lambda2.to_string()),
            ("lambda3", p.lambda3.to_string()),
            ("encode_iters", self.encode_iters.to_string()),
            ("ridge", self.ridge.to_string()),
            ("provider", self.provider.to_string()),
            ("provider_path", path(&self.provider_path)),
            ("gate_window", self.gate_window.to_string()),
            ("gate_temperature", self.gate_temperature.to_string()),
            ("patch_size", self.patch_size.to_string()),
            ("patch_count", self.patch_count.to_string()),
            ("checkpoint", self.checkpoint.to_string()),
            ("init", path(&self.init)),
        ]
    }

    pub fn log_header(&self, command: &str) {
        log::info!("cscf {command}: effective settings");
        for (k, v) in self.entries() {
            log::info!("  {k} = {v}");
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.jsrl(DictInit::RandomUnit).validate()?;
        self.gate().validate()?;
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            bail!("ridge must be nonnegative, got {}", self.ridge);
        }
        if self.patch_size == 0 {
            bail!("patch_size must be positive");
        }
        if self.provider == ProviderKind::File && self.provider_path.is_none() {
            bail!("provider=file needs provider_path");
        }
        Ok(())
    }

    pub fn jsrl(&self, init: DictInit) -> JsrlConfig {
        JsrlConfig {
            atoms: self.atoms,
            kernel: self.kernel,
            inner_blocks: self.inner_blocks,
            outer_iters: self.outer_iters,
            schedule: StageSchedule {
                base: self.params,
                growth: self.growth,
            },
            seed: self.seed,
            init,
        }
    }

    pub fn gate(&self) -> GateConfig {
        GateConfig {
            window: self.gate_window,
            temperature: self.gate_temperature,
        }
    }
}
