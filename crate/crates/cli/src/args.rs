use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gammamix::dpm::{FitOptions, InitPolicy, Model, PriorConfig};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output directory.
pub const OUTDIR_ENV: &str = "GAMMAMIX_OUTDIR";
pub const DEFAULT_OUTDIR: &str = "gammamix-out";

pub const SUBCOMMANDS: &[&str] = &["simulate", "fit", "l1-quantiles", "approx-study", "rerun"];

#[derive(Debug, Parser)]
#[command(
    name = "gammamix",
    version,
    about = "Dirichlet-process mixtures of Gamma kernels: simulate, fit, evaluate"
)]
pub struct Cli {
    /// key=value file of flag defaults (flags on the command line win)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Log verbosity (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Draw an i.i.d. sample from a named density
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Fit the mixture model by MCMC
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Posterior L1 quantiles over simulated datasets
    #[command(name = "l1-quantiles", args_override_self = true)]
    L1Quantiles(L1Args),
    /// Smoothing-error rates over a list of kernel shapes
    #[command(name = "approx-study", args_override_self = true)]
    ApproxStudy(ApproxArgs),
    /// Re-run a command from its manifest and compare outputs
    #[command(args_override_self = true)]
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::L1Quantiles(_) => "l1-quantiles",
            Command::ApproxStudy(_) => "approx-study",
            Command::Rerun(_) => "rerun",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
pub struct OutDir {
    /// Output directory
    #[arg(long, env = OUTDIR_ENV, default_value = DEFAULT_OUTDIR)]
    #[serde(skip)]
    pub outdir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Density spec, e.g. exp, gamma:0.4:1, folded-t:5
    #[arg(long)]
    pub density: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV (default: <outdir>/sample.csv)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub dir: OutDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct PriorArgs {
    #[arg(long, default_value_t = Model::Gamma)]
    pub model: Model,
    /// DP mass m
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    /// Base-measure exponent a > 1
    #[arg(long = "base-a", default_value_t = 2.0)]
    pub base_a: f64,
    /// sqrt(z) ~ Gamma(zb, zc)
    #[arg(long, default_value_t = 1.0)]
    pub zb: f64,
    #[arg(long, default_value_t = 1.0)]
    pub zc: f64,
    /// Random-walk weight in the z proposal
    #[arg(long, default_value_t = 0.01)]
    pub wz: f64,
    /// Random-walk concentration in the z proposal
    #[arg(long, default_value_t = 10.0)]
    pub bz: f64,
}

impl PriorArgs {
    pub fn prior(&self) -> PriorConfig {
        PriorConfig {
            mass: self.mass,
            base_a: self.base_a,
            zb: self.zb,
            zc: self.zc,
            w_z: self.wz,
            b_z: self.bz,
            model: self.model,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 20_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 10_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
}

impl ChainArgs {
    pub fn options(&self, seed: u64) -> FitOptions {
        FitOptions {
            iters: self.iters,
            burnin: self.burnin,
            thin: self.thin,
            seed,
            init: InitPolicy::SingleCluster,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// CSV with a header `x` and one positive value per row
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Evaluation grid MIN:MAX:N, evenly spaced (default: 400 log-spaced
    /// points on [min(x)/10, 3 max(x)])
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    #[serde(skip)]
    pub dir: OutDir,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct L1Args {
    #[arg(long)]
    pub density: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub seeds: Vec<u64>,
    /// Output CSV (default: <outdir>/l1_quantiles.csv)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub dir: OutDir,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ApproxArgs {
    #[arg(long)]
    pub density: String,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(
        long = "z-list",
        value_delimiter = ',',
        default_value = "50,100,200,400,800"
    )]
    pub z_list: Vec<f64>,
    /// Output CSV (default: <outdir>/approx_study.csv)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub dir: OutDir,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    /// Manifest written by an earlier run
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the reproduced outputs
    #[arg(long)]
    pub outdir: PathBuf,
}
