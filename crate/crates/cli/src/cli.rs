use std::path::PathBuf;

use careflow::pipeline::Ablation;
use clap::{Args, Parser, Subcommand};

use crate::config::Overrides;

#[derive(Debug, Parser)]
#[command(
    name = "careflow",
    version,
    about = "Cyclic adaptive rectified flow for cross-modal feature alignment"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (spec JSON plus per-split CSVs).
    GenData(GenDataArgs),
    /// Train a model and write checkpoint, report and per-epoch CSV.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(EvalArgs),
    /// Train the full model and the four ablations over several seeds.
    Ablate(AblateArgs),
    /// Compare analytic and finite-difference gradients of every loss.
    Gradcheck(GradcheckArgs),
    /// Export 2-D coordinates and scatter plots of features before and after mapping.
    ExportPlot(ExportPlotArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: OverrideArgs,
}

#[derive(Debug, Args)]
pub struct OverrideArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// One of no_alignment, no_cyclic, no_adaptive, no_one_to_many.
    #[arg(long)]
    pub ablate: Option<Ablation>,
    #[arg(long)]
    pub alpha_f: Option<f64>,
    #[arg(long)]
    pub alpha_b: Option<f64>,
    #[arg(long)]
    pub beta: Option<usize>,
    #[arg(long)]
    pub euler_steps: Option<usize>,
}

impl OverrideArgs {
    pub fn to_overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            ablate: self.ablate,
            alpha_f: self.alpha_f,
            alpha_b: self.alpha_b,
            beta: self.beta,
            euler_steps: self.euler_steps,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset directory written by gen-data; generated in memory when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of consecutive seeds starting at the configured seed.
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Also write the report as gradcheck.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Test hook: perturb analytic coordinate INDEX of check NAME (`NAME:INDEX`).
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExportPlotArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: PathBuf,
}
