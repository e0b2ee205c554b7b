use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use skipsnn::baselines::Policy;
use skipsnn::experiment::{eval_checkpoint, Checkpoint, Experiment, ExperimentConfig, PolicySpec};
use skipsnn::spiketrain::read_dataset;

#[derive(Parser)]
#[command(name = "skipsnn", version, about = "Gated spiking networks: data, training, evaluation, sweeps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run only this seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ignore matching checkpoints already in the output directory.
    #[arg(long)]
    fresh: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write train/validation/test dataset files for each seed.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train stage 1, stage 2 (at `train.lambda`) or both.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "both")]
        stage: Stage,
        /// Stage-1 checkpoint to start stage 2 from.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
        /// Gate policy; defaults to skipsnn for stage-2 checkpoints, snn otherwise.
        #[arg(long)]
        policy: Option<PolicySpec>,
        /// Seed for random-skip masks.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of per-sample traces to export.
        #[arg(long, default_value_t = 10)]
        traces: usize,
    },
    /// Train one controller per (lambda, seed) and tabulate the trade-off.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated lambdas; overrides the config list.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Compare the configured gate policies on each seed's trained model.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Print the built-in default config.
    DefaultConfig,
}

fn experiment(common: &Common) -> Result<(Experiment, Vec<u64>)> {
    let cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    let seeds = match common.seed {
        Some(s) => vec![s],
        None => cfg.seeds.clone(),
    };
    let mut exp = Experiment::new(cfg, common.out.clone())?;
    exp.fresh = common.fresh;
    Ok((exp, seeds))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Cmd::GenData { common } => {
            let (exp, seeds) = experiment(&common)?;
            exp.gen_data(&seeds)?;
            println!("{}", exp.out.display());
        }
        Cmd::Train {
            common,
            stage,
            checkpoint,
        } => {
            let (exp, seeds) = experiment(&common)?;
            let init = checkpoint
                .map(|p| Checkpoint::load(&p).with_context(|| format!("loading {}", p.display())))
                .transpose()?;
            let stage = match stage {
                Stage::One => 1,
                Stage::Two => 2,
                Stage::Both => 3,
            };
            if init.is_some() && stage != 2 {
                bail!("--checkpoint is only used with --stage 2");
            }
            exp.train(&seeds, stage, init.as_ref())?;
            println!("{}", exp.out.display());
        }
        Cmd::Eval {
            checkpoint,
            data,
            out,
            policy,
            seed,
            traces,
        } => {
            let ck = Checkpoint::load(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let ds = read_dataset(&data).with_context(|| format!("reading {}", data.display()))?;
            let spec = policy.unwrap_or(if ck.stage == 2 { PolicySpec::SkipSnn } else { PolicySpec::Snn });
            let policy = match spec {
                PolicySpec::Snn => Policy::AlwaysAwake,
                PolicySpec::SkipSnn => Policy::Learned,
                PolicySpec::FixedSkip(Some(fraction)) => Policy::Fixed { fraction },
                PolicySpec::RandomSkip(Some(p)) => Policy::Random { p, seed },
                _ => bail!("eval needs an explicit fraction, e.g. `fixed-skip:0.2`"),
            };
            let r = eval_checkpoint(&ck, &ds, policy, &out, traces)?;
            println!(
                "policy={} accuracy={:.6} awake_frac={:.6} mflops={:.6}",
                r.policy, r.accuracy, r.awake_frac, r.mflops
            );
        }
        Cmd::Sweep { common, lambdas } => {
            let (exp, seeds) = experiment(&common)?;
            let lambdas = lambdas.unwrap_or_else(|| exp.cfg.lambdas.clone());
            if lambdas.is_empty() {
                bail!("no lambdas to sweep");
            }
            exp.sweep(&seeds, &lambdas)?;
            print!("{}", std::fs::read_to_string(exp.out.join("sweep_summary.csv"))?);
        }
        Cmd::Compare { common } => {
            let (exp, seeds) = experiment(&common)?;
            exp.compare(&seeds)?;
            print!("{}", std::fs::read_to_string(exp.out.join("compare.csv"))?);
        }
        Cmd::DefaultConfig => println!("{}", ExperimentConfig::default().to_json()),
    }
    Ok(())
}
