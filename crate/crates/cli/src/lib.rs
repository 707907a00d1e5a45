//! `scmrl` command-line driver: synthesize data, train, evaluate, check
//! gradients and sweep objective weights.
//!
//! Every command resolves a [`config::RunConfig`] (defaults, then `--config`,
//! then `--set key=value` and dedicated flags), writes it to
//! `<out>/config.toml`, and only then does its work. Nothing is written
//! outside the output directory.
//!
//! Exit codes: 0 success, 1 usage or configuration, 2 data or IO, 3 numeric.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use scmrl_core::{Error, ErrorKind};
use toml::Value;

use config::{parse_assignment, RunConfig, CONFIG_FILE};

#[derive(Debug, Parser)]
#[command(name = "scmrl", version, about = "Semantic-consistency multi-view representation learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Dotted-key override, e.g. `model.lambda1=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed for data synthesis, initialization, batching and evaluation.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic multi-view dataset (CSV views, labels, manifest).
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// Comma-separated view widths.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long)]
        separation: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Pretrain, initialize H and train jointly; writes history.csv and checkpoint.bin.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pretrain_epochs: Option<usize>,
        #[arg(long)]
        joint_epochs: Option<usize>,
        /// full, no_sem or no_rec.
        #[arg(long)]
        variant: Option<String>,
        /// Dataset manifest (default: synthetic data).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Continue from <out>/checkpoint.bin when present.
        #[arg(long)]
        resume: bool,
    },
    /// Cluster and classify representations of a trained checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated subset of h, concat, average.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Finite-difference check of every loss term on tiny random instances.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Number of random instances.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Train and evaluate over a λ1 × λ2 × τ grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        lambda1: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        lambda2: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        tau: Vec<f64>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

struct Overrides(Vec<(String, Value)>);

impl Overrides {
    fn new(common: &Common) -> Result<Self> {
        let mut list = common.set.iter().map(|s| parse_assignment(s)).collect::<Result<Vec<_>>>()?;
        if let Some(seed) = common.seed {
            let v = Value::Integer(i64::try_from(seed).map_err(|_| Error::Usage(format!("seed {seed} exceeds 2^63 - 1")))?);
            for key in ["schedule.seed", "eval.seed", "data.synth.seed"] {
                list.push((key.into(), v.clone()));
            }
        }
        if let Some(out) = &common.out {
            list.push(("out".into(), path_value(out)));
        }
        Ok(Self(list))
    }

    fn push(&mut self, key: &str, value: Option<Value>) {
        if let Some(v) = value {
            self.0.push((key.into(), v));
        }
    }

    fn resolve(&self, file: Option<&std::path::Path>) -> Result<RunConfig> {
        RunConfig::resolve(file, &self.0)
    }
}

fn path_value(p: &std::path::Path) -> Value {
    Value::String(p.to_string_lossy().into_owned())
}

fn int(v: Option<usize>) -> Option<Value> {
    v.map(|x| Value::Integer(x as i64))
}

fn floats(v: &[f64]) -> Option<Value> {
    (!v.is_empty()).then(|| Value::Array(v.iter().map(|&x| Value::Float(x)).collect()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { common, n, k, dims, separation, noise } => {
            let mut o = Overrides::new(&common)?;
            o.push("data.synth.n", int(n));
            o.push("data.synth.k", int(k));
            o.push("data.synth.dims", (!dims.is_empty()).then(|| Value::Array(dims.iter().map(|&d| Value::Integer(d as i64)).collect())));
            o.push("data.synth.separation", separation.map(Value::Float));
            o.push("data.synth.noise", noise.map(Value::Float));
            let manifest = commands::synth(o.resolve(common.config.as_deref())?)?;
            println!("wrote {}", manifest.display());
        }
        Command::Train { common, pretrain_epochs, joint_epochs, variant, manifest, resume } => {
            let mut o = Overrides::new(&common)?;
            o.push("schedule.pretrain_epochs", int(pretrain_epochs));
            o.push("schedule.joint_epochs", int(joint_epochs));
            o.push("variant", variant.map(Value::String));
            o.push("data.manifest", manifest.as_deref().map(path_value));
            let trainer = commands::train(o.resolve(common.config.as_deref())?, resume)?;
            if let Some(last) = trainer.report.history.last() {
                println!(
                    "{} epoch {}: rec {:.6} deg {:.6} sem {:.6} total {:.6}",
                    last.phase, last.epoch, last.rec, last.deg, last.sem, last.total
                );
            }
        }
        Command::Eval { common, checkpoint, variants, manifest } => {
            let mut o = Overrides::new(&common)?;
            o.push("checkpoint", checkpoint.as_deref().map(path_value));
            o.push("variants", (!variants.is_empty()).then(|| Value::Array(variants.into_iter().map(Value::String).collect())));
            o.push("data.manifest", manifest.as_deref().map(path_value));
            // Without --config, reuse the configuration saved beside the checkpoint.
            let beside = checkpoint.as_ref().and_then(|c| c.parent()).map(|d| d.join(CONFIG_FILE)).filter(|p| p.exists());
            let file = common.config.clone().or(beside);
            for r in commands::eval(o.resolve(file.as_deref())?)? {
                println!("{:<8} {:<12} {:.4} ± {:.4}", r.variant, r.metric, r.mean, r.std);
            }
        }
        Command::Gradcheck { common, seeds } => {
            let mut o = Overrides::new(&common)?;
            o.push("gradcheck.seeds", seeds.map(|s| Value::Integer(s as i64)));
            let rows = commands::gradcheck(o.resolve(common.config.as_deref())?, None)?;
            for line in commands::gradcheck_summary(&rows) {
                println!("{line}");
            }
            commands::gradcheck_verdict(&rows)?;
        }
        Command::Sweep { common, lambda1, lambda2, tau, manifest } => {
            let mut o = Overrides::new(&common)?;
            o.push("sweep.lambda1", floats(&lambda1));
            o.push("sweep.lambda2", floats(&lambda2));
            o.push("sweep.tau", floats(&tau));
            o.push("data.manifest", manifest.as_deref().map(path_value));
            let rows = commands::sweep(o.resolve(common.config.as_deref())?)?;
            let failed: Vec<_> = rows.iter().filter(|r| r.status != "ok").collect();
            println!("{} rows, {} from failed cells", rows.len(), failed.len());
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Usage(e.to_string()))?;
    run(cli)
}

/// Process exit code for a failed command.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}
