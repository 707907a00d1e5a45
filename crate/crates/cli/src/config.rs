//! Run configuration.
//!
//! One TOML file holds every setting; every key is optional. Sections:
//!
//! ```toml
//! out = "runs/demo"          # output directory (or --out)
//! variant = "full"           # full | no_sem | no_rec
//! checkpoint = "runs/demo/checkpoint.bin"   # eval only
//! variants = ["h", "concat", "average"]     # eval only
//!
//! [data]
//! manifest = "data/manifest.toml"   # omit to use the synthetic generator
//! normalization = "minmax"          # synthetic data only
//! [data.synth]
//! n = 600
//! k = 3
//! dims = [20, 30]
//! separation = 10.0
//! noise = 1.0
//! seed = 0
//!
//! [model]      # lambda1, lambda2, tau, latent_dim, *_hidden, stop_grad_degradation, joint_reconstruction
//! [schedule]   # pretrain_epochs, joint_epochs, batch_size, learning_rate, seed, shuffle
//! [eval]       # cluster_trials, restarts, max_iters, train_fractions, split_trials, k_neighbors, seed
//! [gradcheck]  # seeds
//! [sweep]      # lambda1 = [...], lambda2 = [...], tau = [...]
//! ```
//!
//! `model.input_dims` and `model.k` are taken from the dataset. Overrides use
//! dotted keys (`--set model.lambda1=0.5`); values are parsed as TOML and fall
//! back to plain strings. Precedence: command line, then file, then defaults.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use scmrl_core::data::{load_dataset, synth_multiview, MultiViewDataset, Normalization, SynthSpec};
use scmrl_core::eval::EvalProtocol;
use scmrl_core::model::ScmrlConfig;
use scmrl_core::training::{TrainSchedule, Variant};
use scmrl_core::Error;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    pub normalization: Normalization,
    pub synth: SynthSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    H,
    Concat,
    Average,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::H => "h",
            Representation::Concat => "concat",
            Representation::Average => "average",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    /// Instances are seeded `schedule.seed .. schedule.seed + seeds`.
    pub seeds: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { seeds: 20 }
    }
}

/// Empty axes fall back to the value in `[model]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub variant: Variant,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub variants: Vec<Representation>,
    pub data: DataConfig,
    pub model: ScmrlConfig,
    pub schedule: TrainSchedule,
    pub eval: EvalProtocol,
    pub gradcheck: GradcheckConfig,
    pub sweep: SweepGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: None,
            variant: Variant::Full,
            checkpoint: None,
            variants: vec![Representation::H],
            data: DataConfig::default(),
            model: ScmrlConfig::default(),
            schedule: TrainSchedule::default(),
            eval: EvalProtocol::default(),
            gradcheck: GradcheckConfig::default(),
            sweep: SweepGrid::default(),
        }
    }
}

/// Parses an override value as TOML, falling back to a bare string.
pub fn parse_value(text: &str) -> Value {
    match format!("v = {text}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(text.to_string()),
    }
}

/// Sets `dotted` in `table`, creating intermediate tables.
pub fn set_dotted(table: &mut Table, dotted: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = dotted.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!(Error::Usage(format!("bad override key {dotted:?}")));
    }
    let (last, path) = parts.split_last().expect("non-empty");
    let mut cur = table;
    for p in path {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => bail!(Error::Usage(format!("override {dotted:?}: {p} is not a section"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Splits `key=value`.
pub fn parse_assignment(text: &str) -> Result<(String, Value)> {
    match text.split_once('=') {
        Some((k, v)) => Ok((k.trim().to_string(), parse_value(v.trim()))),
        None => bail!(Error::Usage(format!("override {text:?} is not of the form key=value"))),
    }
}

impl RunConfig {
    /// Defaults, then `file`, then `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut table = match file {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
                text.parse::<Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => Table::new(),
        };
        for (key, value) in overrides {
            set_dotted(&mut table, key, value.clone())?;
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            bail!(Error::Config("variants must name at least one representation".into()));
        }
        let axes = [&self.sweep.lambda1, &self.sweep.lambda2, &self.sweep.tau];
        if axes.iter().any(|a| a.iter().any(|v| !v.is_finite())) {
            bail!(Error::Config("sweep values must be finite".into()));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path> {
        match &self.out {
            Some(p) => Ok(p),
            None => bail!(Error::Usage("no output directory (pass --out or set `out`)".into())),
        }
    }

    pub fn load_dataset(&self) -> Result<MultiViewDataset> {
        match &self.data.manifest {
            Some(path) => Ok(load_dataset(path)?),
            None => Ok(synth_multiview(&self.data.synth)?.normalized(self.data.normalization)),
        }
    }

    /// Fills the dataset-derived model fields and applies the ablation.
    pub fn bind_dataset(&mut self, dataset: &MultiViewDataset) -> Result<()> {
        let dims = dataset.dims();
        if !self.model.input_dims.is_empty() && self.model.input_dims != dims {
            bail!(Error::Config(format!(
                "model.input_dims {:?} does not match the dataset's {:?}",
                self.model.input_dims, dims
            )));
        }
        self.model.input_dims = dims;
        self.model.k = dataset.k();
        self.model = self.variant.apply(&self.model);
        self.model.validate()?;
        self.schedule.validate(self.model.k)?;
        Ok(())
    }

    /// Makes manifest paths absolute so the echoed file works from anywhere.
    pub fn absolutize(&mut self) -> Result<()> {
        for p in [&mut self.data.manifest, &mut self.checkpoint].into_iter().flatten() {
            if p.is_relative() {
                *p = std::env::current_dir().context("current directory")?.join(&*p);
            }
        }
        Ok(())
    }

    /// Creates the output directory and writes the resolved configuration.
    pub fn echo(&self) -> Result<PathBuf> {
        let dir = self.out_dir()?.to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
        let text = toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize configuration: {e}")))?;
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
        Ok(dir)
    }
}
