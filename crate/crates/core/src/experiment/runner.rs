use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::checkpoint::Checkpoint;
use super::config::{ExperimentConfig, PolicySpec};
use crate::baselines::{evaluate_policy, Policy, PolicyResult};
use crate::dynamics::{skipsnn_forward, GateMode, ModelParams};
use crate::error::{Error, Result};
use crate::metrics::{Component, FlopLedger};
use crate::spiketrain::{generate_split, write_dataset, GeneratedSample, SpikeDataset, SpikeTrain, Split};
use crate::training::{train_stage1, train_stage2, EpochLog, TrainOutcome};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The three splits generated for one run seed.
#[derive(Clone, Debug)]
pub struct SeedData {
    pub train: Vec<SpikeTrain>,
    pub validation: Vec<SpikeTrain>,
    pub test: Vec<GeneratedSample>,
}

impl SeedData {
    pub fn test_trains(&self) -> Vec<SpikeTrain> {
        self.test.iter().map(|g| g.train.clone()).collect()
    }
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(17) ^ stream.wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

/// One seed drives the dataset, the weight initialization and the shuffling.
pub fn generate_data(cfg: &ExperimentConfig, seed: u64) -> Result<SeedData> {
    let spec = crate::spiketrain::DatasetSpec {
        seed,
        ..cfg.dataset.clone()
    };
    let trains = |split, n| -> Result<Vec<SpikeTrain>> {
        Ok(generate_split(&spec, split, n)?.into_iter().map(|g| g.train).collect())
    };
    Ok(SeedData {
        train: trains(Split::Train, cfg.split.train)?,
        validation: trains(Split::Validation, cfg.split.validation)?,
        test: generate_split(&spec, Split::Test, cfg.split.test)?,
    })
}

pub fn init_params(cfg: &ExperimentConfig, seed: u64) -> Result<ModelParams<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    ModelParams::init(
        &cfg.architecture,
        cfg.dataset.num_channels,
        cfg.dataset.num_classes,
        cfg.lif,
        &mut rng,
    )
}

pub fn run_stage1(cfg: &ExperimentConfig, seed: u64, data: &SeedData) -> Result<TrainOutcome<f64>> {
    let train_cfg = crate::training::TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    train_stage1(
        &data.train,
        &data.validation,
        init_params(cfg, seed)?,
        &train_cfg,
        &cfg.surrogates.stage1,
    )
}

pub fn run_stage2(
    cfg: &ExperimentConfig,
    seed: u64,
    data: &SeedData,
    stage1: ModelParams<f64>,
    lambda: f64,
) -> Result<TrainOutcome<f64>> {
    let train_cfg = crate::training::TrainConfig {
        seed,
        lambda,
        ..cfg.train.clone()
    };
    train_stage2(
        &data.train,
        &data.validation,
        stage1,
        &train_cfg,
        &cfg.surrogates.stage2_main,
        &cfg.surrogates.stage2_controller,
    )
}

/// Fraction of awake steps that fall inside the embedded signal window.
pub fn localization(test: &[GeneratedSample], masks: &[Vec<bool>], signal_len: usize) -> f64 {
    let (mut inside, mut awake) = (0usize, 0usize);
    for (g, m) in test.iter().zip(masks) {
        for (t, _) in m.iter().enumerate().filter(|(_, &b)| b) {
            awake += 1;
            if g.in_signal(t, signal_len) {
                inside += 1;
            }
        }
    }
    if awake == 0 {
        0.0
    } else {
        inside as f64 / awake as f64
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One `sweep` row: a stage-2 model for one (lambda, seed) evaluated on the test split.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    pub awake_frac: f64,
    pub accuracy: f64,
    pub mflops: f64,
    /// Accuracy of the same network with the gate forced open.
    pub snn_accuracy: f64,
    /// Input-matmul flops relative to the forced-open network.
    pub input_ratio: f64,
    /// Total flops relative to the forced-open network.
    pub total_ratio: f64,
    pub localization: f64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str =
        "lambda,seed,awake_frac,accuracy,mflops,snn_accuracy,input_ratio,total_ratio,localization";

    fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.lambda,
            self.seed,
            self.awake_frac,
            self.accuracy,
            self.mflops,
            self.snn_accuracy,
            self.input_ratio,
            self.total_ratio,
            self.localization
        )
    }
}

/// One `compare` row for one seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub seed: u64,
    pub policy: String,
    /// Target fraction for fixed-skip, Bernoulli parameter for random-skip,
    /// lambda for skipsnn, empty for snn.
    pub param: Option<f64>,
    pub awake_frac: f64,
    pub accuracy: f64,
    pub mflops: f64,
}

fn opt_field(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

fn summary_line(out: &mut String, key: &str, rows: &[[f64; 3]]) {
    let col = |i: usize| mean_std(&rows.iter().map(|r| r[i]).collect::<Vec<_>>());
    let (a, sa) = col(0);
    let (b, sb) = col(1);
    let (c, sc) = col(2);
    let _ = writeln!(out, "{key},{},{a:.6},{sa:.6},{b:.6},{sb:.6},{c:.6},{sc:.6}", rows.len());
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SweepRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Mean and standard deviation over seeds, one line per lambda in order of appearance.
pub fn sweep_summary_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("lambda,n,awake_frac_mean,awake_frac_std,accuracy_mean,accuracy_std,mflops_mean,mflops_std\n");
    let mut lambdas: Vec<f64> = Vec::new();
    for r in rows {
        if !lambdas.contains(&r.lambda) {
            lambdas.push(r.lambda);
        }
    }
    for l in lambdas {
        let group: Vec<[f64; 3]> = rows
            .iter()
            .filter(|r| r.lambda == l)
            .map(|r| [r.awake_frac, r.accuracy, r.mflops])
            .collect();
        summary_line(&mut s, &l.to_string(), &group);
    }
    s
}

pub fn compare_seeds_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from("seed,policy,param,awake_frac,accuracy,mflops\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{:.6}",
            r.seed,
            r.policy,
            opt_field(r.param),
            r.awake_frac,
            r.accuracy,
            r.mflops
        );
    }
    s
}

fn policy_groups(rows: &[CompareRow]) -> Vec<(String, Vec<&CompareRow>)> {
    let mut groups: Vec<(String, Vec<&CompareRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| g.0 == r.policy) {
            Some(g) => g.1.push(r),
            None => groups.push((r.policy.clone(), vec![r])),
        }
    }
    groups
}

/// `policy,param,awake_frac,accuracy,mflops` with seed means; `param` is the
/// mean parameter when every seed has one.
pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from("policy,param,awake_frac,accuracy,mflops\n");
    for (name, group) in policy_groups(rows) {
        let mean = |f: &dyn Fn(&CompareRow) -> f64| mean_std(&group.iter().map(|r| f(r)).collect::<Vec<_>>()).0;
        let param = group
            .iter()
            .map(|r| r.param)
            .collect::<Option<Vec<f64>>>()
            .map(|ps| mean_std(&ps).0);
        let _ = writeln!(
            s,
            "{name},{},{:.6},{:.6},{:.6}",
            opt_field(param),
            mean(&|r| r.awake_frac),
            mean(&|r| r.accuracy),
            mean(&|r| r.mflops)
        );
    }
    s
}

pub fn compare_summary_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from("policy,n,awake_frac_mean,awake_frac_std,accuracy_mean,accuracy_std,mflops_mean,mflops_std\n");
    for (name, group) in policy_groups(rows) {
        let g: Vec<[f64; 3]> = group.iter().map(|r| [r.awake_frac, r.accuracy, r.mflops]).collect();
        summary_line(&mut s, &name, &g);
    }
    s
}

/// Provenance written next to every output.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub code_version: String,
    pub created_unix: u64,
    pub outputs: Vec<String>,
}

/// A validated config bound to an output directory.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub hash: String,
    pub out: PathBuf,
    /// Retrain even when a matching checkpoint exists.
    pub fresh: bool,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig, out: Option<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
        Ok(Self {
            hash: cfg.hash(),
            cfg,
            out,
            fresh: false,
        })
    }

    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.out.join(format!("seed-{seed}"))
    }

    pub fn stage1_path(&self, seed: u64) -> PathBuf {
        self.seed_dir(seed).join("stage1.ckpt.json")
    }

    pub fn stage2_path(&self, seed: u64, lambda: f64) -> PathBuf {
        self.seed_dir(seed).join(format!("stage2-lambda-{lambda}.ckpt.json"))
    }

    fn mkdir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        Ok(())
    }

    pub fn write_manifest(&self, dir: &Path, command: &str, seeds: &[u64], outputs: &[&str]) -> Result<()> {
        let m = Manifest {
            command: command.into(),
            config_hash: self.hash.clone(),
            seeds: seeds.to_vec(),
            code_version: CODE_VERSION.into(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        };
        self.mkdir(dir)?;
        std::fs::write(dir.join(format!("{command}.manifest.json")), serde_json::to_string_pretty(&m)? + "\n")?;
        std::fs::write(dir.join("config.json"), self.cfg.to_json() + "\n")?;
        Ok(())
    }

    fn cached(&self, path: &Path, stage: u8, seed: u64, lambda: Option<f64>) -> Option<Checkpoint> {
        if self.fresh || !path.exists() {
            return None;
        }
        Checkpoint::load(path)
            .ok()
            .filter(|ck| ck.matches(stage, seed, &self.hash, lambda))
    }

    fn write_log(path: &Path, log: &[EpochLog]) -> Result<()> {
        let mut s = String::from(EpochLog::CSV_HEADER);
        s.push('\n');
        for l in log {
            s.push_str(&l.csv_row());
            s.push('\n');
        }
        std::fs::write(path, s)?;
        Ok(())
    }

    /// Writes the three splits of every seed as dataset files.
    pub fn gen_data(&self, seeds: &[u64]) -> Result<()> {
        for &seed in seeds {
            let data = generate_data(&self.cfg, seed)?;
            let dir = self.seed_dir(seed);
            self.mkdir(&dir)?;
            let d = &self.cfg.dataset;
            let ds = |trains: Vec<SpikeTrain>| SpikeDataset::new(d.num_channels, d.horizon, d.num_classes, trains);
            write_dataset(dir.join("train.txt"), &ds(data.train)?)?;
            write_dataset(dir.join("validation.txt"), &ds(data.validation)?)?;
            write_dataset(dir.join("test.txt"), &ds(data.test.into_iter().map(|g| g.train).collect())?)?;
            let offsets: String = std::iter::once("sample,signal_start\n".to_string())
                .chain(
                    generate_split(&crate::spiketrain::DatasetSpec { seed, ..d.clone() }, Split::Test, self.cfg.split.test)?
                        .iter()
                        .enumerate()
                        .map(|(i, g)| format!("{i},{}\n", g.signal_start)),
                )
                .collect();
            std::fs::write(dir.join("test_offsets.csv"), offsets)?;
            self.write_manifest(
                &dir,
                "gen-data",
                &[seed],
                &["train.txt", "validation.txt", "test.txt", "test_offsets.csv"],
            )?;
            info!("seed {seed}: wrote datasets to {}", dir.display());
        }
        Ok(())
    }

    /// Stage-1 network for a seed, trained or loaded from a matching checkpoint.
    pub fn stage1(&self, seed: u64, data: &SeedData) -> Result<ModelParams<f64>> {
        let path = self.stage1_path(seed);
        if let Some(ck) = self.cached(&path, 1, seed, None) {
            info!("seed {seed}: reusing {}", path.display());
            return Ok(ck.params);
        }
        self.mkdir(&self.seed_dir(seed))?;
        let clock = Instant::now();
        let out = run_stage1(&self.cfg, seed, data)?;
        let secs = clock.elapsed().as_secs_f64();
        info!("seed {seed}: stage 1 done, best epoch {}", out.best_epoch);
        Self::write_log(&self.seed_dir(seed).join("stage1_log.csv"), &out.log)?;
        Checkpoint::new(1, seed, &self.hash, None, out.params.clone())
            .with_train_seconds(secs)
            .save(&path)?;
        Ok(out.params)
    }

    /// Stage-2 model for a seed and lambda, trained or loaded.
    pub fn stage2(&self, seed: u64, data: &SeedData, stage1: &ModelParams<f64>, lambda: f64) -> Result<ModelParams<f64>> {
        let path = self.stage2_path(seed, lambda);
        if let Some(ck) = self.cached(&path, 2, seed, Some(lambda)) {
            info!("seed {seed}: reusing {}", path.display());
            return Ok(ck.params);
        }
        self.mkdir(&self.seed_dir(seed))?;
        let clock = Instant::now();
        let out = run_stage2(&self.cfg, seed, data, stage1.clone(), lambda)?;
        let secs = clock.elapsed().as_secs_f64();
        info!("seed {seed} lambda {lambda}: stage 2 done, best epoch {}", out.best_epoch);
        Self::write_log(
            &self.seed_dir(seed).join(format!("stage2-lambda-{lambda}_log.csv")),
            &out.log,
        )?;
        Checkpoint::new(2, seed, &self.hash, Some(lambda), out.params.clone())
            .with_train_seconds(secs)
            .save(&path)?;
        Ok(out.params)
    }

    /// `stage` is 1, 2 or 3 (both). Stage 2 alone starts from `init`, or from
    /// the seed's stage-1 checkpoint when none is given.
    pub fn train(&self, seeds: &[u64], stage: u8, init: Option<&Checkpoint>) -> Result<()> {
        seeds.par_iter().try_for_each(|&seed| -> Result<()> {
            let data = generate_data(&self.cfg, seed)?;
            let mut outputs = vec![];
            let base = match (stage, init) {
                (2, Some(ck)) => {
                    if ck.stage != 1 {
                        return Err(Error::InvalidArgument("stage 2 needs a stage-1 checkpoint".into()));
                    }
                    ck.params.clone()
                }
                (2, None) => {
                    let path = self.stage1_path(seed);
                    Checkpoint::load(&path)
                        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?
                        .params
                }
                _ => {
                    outputs.extend(["stage1.ckpt.json".to_string(), "stage1_log.csv".to_string()]);
                    self.stage1(seed, &data)?
                }
            };
            if stage >= 2 {
                let l = self.cfg.train.lambda;
                self.stage2(seed, &data, &base, l)?;
                outputs.push(format!("stage2-lambda-{l}.ckpt.json"));
                outputs.push(format!("stage2-lambda-{l}_log.csv"));
            }
            let refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
            self.write_manifest(&self.seed_dir(seed), "train", &[seed], &refs)
        })
    }

    fn sweep_seed(&self, seed: u64, lambdas: &[f64]) -> Result<Vec<SweepRow>> {
        let data = generate_data(&self.cfg, seed)?;
        let base = self.stage1(seed, &data)?;
        let test = data.test_trains();
        let snn = evaluate_policy(&test, &base, Policy::AlwaysAwake)?;
        lambdas
            .iter()
            .map(|&lambda| {
                let p = self.stage2(seed, &data, &base, lambda)?;
                let learned = evaluate_policy(&test, &p, Policy::Learned)?;
                let snn_here = evaluate_policy(&test, &p, Policy::AlwaysAwake)?;
                Ok(SweepRow {
                    lambda,
                    seed,
                    awake_frac: learned.awake_frac,
                    accuracy: learned.accuracy,
                    mflops: learned.mflops,
                    snn_accuracy: snn.accuracy,
                    input_ratio: component_ratio(&learned.ledger, &snn_here.ledger, Some(Component::InputMatmul)),
                    total_ratio: component_ratio(&learned.ledger, &snn_here.ledger, None),
                    localization: localization(&data.test, &learned.awake_masks, self.cfg.dataset.signal_len),
                })
            })
            .collect()
    }

    /// Trains one stage-2 model per (lambda, seed) and writes `sweep.csv`
    /// and `sweep_summary.csv`.
    pub fn sweep(&self, seeds: &[u64], lambdas: &[f64]) -> Result<Vec<SweepRow>> {
        let per_seed: Vec<Vec<SweepRow>> = seeds
            .par_iter()
            .map(|&s| self.sweep_seed(s, lambdas))
            .collect::<Result<_>>()?;
        let mut rows = Vec::with_capacity(seeds.len() * lambdas.len());
        for &l in lambdas {
            for seed_rows in &per_seed {
                rows.extend(seed_rows.iter().filter(|r| r.lambda == l).cloned());
            }
        }
        self.mkdir(&self.out)?;
        std::fs::write(self.out.join("sweep.csv"), sweep_csv(&rows))?;
        std::fs::write(self.out.join("sweep_summary.csv"), sweep_summary_csv(&rows))?;
        self.write_manifest(&self.out, "sweep", seeds, &["sweep.csv", "sweep_summary.csv"])?;
        Ok(rows)
    }

    fn compare_seed(&self, seed: u64) -> Result<Vec<CompareRow>> {
        let data = generate_data(&self.cfg, seed)?;
        let base = self.stage1(seed, &data)?;
        let lambda = self.cfg.train.lambda;
        let trained = self.stage2(seed, &data, &base, lambda)?;
        let test = data.test_trains();
        let learned_frac = evaluate_policy(&test, &trained, Policy::Learned)?.awake_frac;
        let mut rows = Vec::new();
        for spec in &self.cfg.policies {
            let (policy, param) = match *spec {
                PolicySpec::Snn => (Policy::AlwaysAwake, None),
                PolicySpec::SkipSnn => (Policy::Learned, Some(lambda)),
                PolicySpec::FixedSkip(f) => {
                    let f = f.unwrap_or(learned_frac).clamp(1e-3, 1.0);
                    (Policy::Fixed { fraction: f }, Some(f))
                }
                PolicySpec::RandomSkip(p) => {
                    let p = p.unwrap_or(learned_frac);
                    (
                        Policy::Random {
                            p,
                            seed: derive_seed(seed, 2),
                        },
                        Some(p),
                    )
                }
            };
            let r: PolicyResult = evaluate_policy(&test, &trained, policy)?;
            rows.push(CompareRow {
                seed,
                policy: policy.name().into(),
                param,
                awake_frac: r.awake_frac,
                accuracy: r.accuracy,
                mflops: r.mflops,
            });
        }
        Ok(rows)
    }

    /// Evaluates every configured policy on each seed's stage-2 model (at
    /// `train.lambda`) and writes `compare.csv`, `compare_seeds.csv` and
    /// `compare_summary.csv`.
    pub fn compare(&self, seeds: &[u64]) -> Result<Vec<CompareRow>> {
        let per_seed: Vec<Vec<CompareRow>> = seeds
            .par_iter()
            .map(|&s| self.compare_seed(s))
            .collect::<Result<_>>()?;
        let rows: Vec<CompareRow> = per_seed.into_iter().flatten().collect();
        self.mkdir(&self.out)?;
        std::fs::write(self.out.join("compare.csv"), compare_csv(&rows))?;
        std::fs::write(self.out.join("compare_seeds.csv"), compare_seeds_csv(&rows))?;
        std::fs::write(self.out.join("compare_summary.csv"), compare_summary_csv(&rows))?;
        self.write_manifest(
            &self.out,
            "compare",
            seeds,
            &["compare.csv", "compare_seeds.csv", "compare_summary.csv"],
        )?;
        Ok(rows)
    }
}

fn component_ratio(num: &FlopLedger, den: &FlopLedger, tag: Option<Component>) -> f64 {
    let f = |l: &FlopLedger| match tag {
        Some(c) => l.component(c).flops(),
        None => l.total().flops(),
    } as f64;
    let d = f(den);
    if d == 0.0 {
        0.0
    } else {
        f(num) / d
    }
}

/// What `eval` computes for one checkpoint and dataset.
#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub policy: String,
    pub samples: usize,
    pub accuracy: f64,
    pub awake_frac: f64,
    pub mflops: f64,
    pub ledger: serde_json::Value,
}

/// Writes `metrics.json`, per-sample traces for the first `traces` samples
/// and `masked.txt`, the dataset with hibernated columns blanked.
pub fn eval_checkpoint(
    ck: &Checkpoint,
    data: &SpikeDataset,
    policy: Policy,
    out: &Path,
    traces: usize,
) -> Result<EvalReport> {
    if data.num_channels != ck.params.num_inputs() || data.num_classes != ck.params.num_classes() {
        return Err(Error::Shape(format!(
            "dataset is P={} C={}, checkpoint expects P={} C={}",
            data.num_channels,
            data.num_classes,
            ck.params.num_inputs(),
            ck.params.num_classes()
        )));
    }
    let r = evaluate_policy(&data.trains, &ck.params, policy)?;
    std::fs::create_dir_all(out)?;
    let report = EvalReport {
        policy: policy.name().into(),
        samples: data.trains.len(),
        accuracy: r.accuracy,
        awake_frac: r.awake_frac,
        mflops: r.mflops,
        ledger: r.ledger.to_json(),
    };
    std::fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&report)? + "\n")?;

    let masked: Vec<SpikeTrain> = data
        .trains
        .iter()
        .zip(&r.awake_masks)
        .map(|(x, m)| x.masked(m))
        .collect::<Result<_>>()?;
    let masked = SpikeDataset::new(data.num_channels, data.horizon, data.num_classes, masked)?;
    write_dataset(out.join("masked.txt"), &masked)?;

    if traces > 0 {
        let dir = out.join("traces");
        std::fs::create_dir_all(&dir)?;
        for (i, x) in data.trains.iter().enumerate().take(traces) {
            let mode = match policy {
                Policy::Learned => GateMode::Learned,
                _ => GateMode::External(&r.awake_masks[i]),
            };
            let tr = skipsnn_forward(x, &ck.params, mode, &mut FlopLedger::new())?;
            let mut json = tr.to_json();
            json["label"] = x.label().into();
            json["prediction"] = r.predictions[i].into();
            std::fs::write(dir.join(format!("sample-{i}.json")), serde_json::to_string(&json)? + "\n")?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn compare_csv_means_over_seeds() {
        let row = |seed, policy: &str, param, acc| CompareRow {
            seed,
            policy: policy.into(),
            param,
            awake_frac: 0.5,
            accuracy: acc,
            mflops: 1.0,
        };
        let rows = vec![
            row(0, "snn", None, 1.0),
            row(0, "fixed-skip", Some(0.2), 0.5),
            row(1, "snn", None, 0.8),
            row(1, "fixed-skip", Some(0.4), 0.7),
        ];
        let csv = compare_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "policy,param,awake_frac,accuracy,mflops");
        assert_eq!(lines[1], "snn,,0.500000,0.900000,1.000000");
        assert_eq!(lines[2], "fixed-skip,0.300000,0.500000,0.600000,1.000000");
    }

    #[test]
    fn localization_counts_awake_steps_in_window() {
        let mk = |start| GeneratedSample {
            train: SpikeTrain::zeros(1, 6, 0).unwrap(),
            signal_start: start,
        };
        let test = vec![mk(1), mk(3)];
        let masks = vec![
            vec![false, true, true, false, false, true],
            vec![true, false, false, true, false, false],
        ];
        assert_eq!(localization(&test, &masks, 2), 3.0 / 5.0);
        assert_eq!(localization(&test, &[vec![false; 6], vec![false; 6]], 2), 0.0);
    }
}
