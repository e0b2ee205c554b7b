//! Two-stage training.
//!
//! Stage 1 pins the gate open and fits the layer weights on the
//! classification loss alone. Stage 2 freezes the layer weights, lets the
//! controller drive the gate and fits only the controller weights on
//! classification plus the awake-time penalty, annealing the controller
//! surrogate width as it goes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{skipsnn_forward_with, Firing, GateMode, ModelParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spiketrain::SpikeTrain;

use super::bptt::{bptt, BpttOptions, GradientSet, LossParts};
use super::loss::{classification_loss, penalty_loss};
use super::optim::{Optimizer, OptimizerKind, ParamMask};
use super::surrogate::SurrogateConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Awake-time penalty multiplier (stage 2 only).
    pub lambda: f64,
    pub learning_rate: f64,
    pub learning_rate_stage2: f64,
    pub epochs_stage1: usize,
    pub epochs_stage2: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Also fit the voting matrix in stage 1.
    pub train_voting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            learning_rate: 1e-3,
            learning_rate_stage2: 3e-3,
            epochs_stage1: 50,
            epochs_stage2: 30,
            batch_size: 32,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            patience: 10,
            train_voting: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.lambda >= 0.0) {
            return bad("lambda must be >= 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate_stage2 > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.epochs_stage1 == 0 || self.epochs_stage2 == 0 {
            return bad("epoch budgets must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }
}

/// One row of the per-epoch training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub stage: u8,
    pub loss: f64,
    pub cls_loss: f64,
    pub penalty: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub awake_frac: f64,
    /// Controller surrogate width this epoch (epsilon when rectangular).
    pub delta: f64,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "epoch,stage,loss,cls_loss,penalty,train_acc,val_acc,awake_frac,delta";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.epoch,
            self.stage,
            self.loss,
            self.cls_loss,
            self.penalty,
            self.train_acc,
            self.val_acc,
            self.awake_frac,
            self.delta
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<S> {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: ModelParams<S>,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
}

/// Aggregate of a forward-only pass over a sample set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalSummary {
    pub loss: f64,
    pub cls_loss: f64,
    pub penalty: f64,
    pub accuracy: f64,
    pub awake_frac: f64,
}

pub fn evaluate<S: Scalar>(
    samples: &[SpikeTrain],
    params: &ModelParams<S>,
    mode: GateMode<'_>,
    lambda: f64,
) -> Result<EvalSummary> {
    if samples.is_empty() {
        return Ok(EvalSummary::default());
    }
    let per: Vec<(f64, f64, bool, f64)> = samples
        .par_iter()
        .map(|x| {
            let tr = skipsnn_forward_with(x, params, mode, Firing::Heaviside, None)?;
            let cls = classification_loss(&tr, x.label(), &params.voting)?.as_f64();
            let pen = penalty_loss(&tr.gate, S::lit(lambda)).as_f64();
            Ok((cls, pen, tr.predict(&params.voting) == x.label(), tr.awake_fraction()))
        })
        .collect::<Result<_>>()?;
    let n = per.len() as f64;
    let cls = per.iter().map(|p| p.0).sum::<f64>() / n;
    let pen = per.iter().map(|p| p.1).sum::<f64>() / n;
    Ok(EvalSummary {
        loss: cls + pen,
        cls_loss: cls,
        penalty: pen,
        accuracy: per.iter().filter(|p| p.2).count() as f64 / n,
        awake_frac: per.iter().map(|p| p.3).sum::<f64>() / n,
    })
}

/// Stage 1: gate forced open, classification loss only, layer weights updated.
/// `cfg.lambda` is ignored.
pub fn train_stage1<S: Scalar>(
    train: &[SpikeTrain],
    val: &[SpikeTrain],
    params: ModelParams<S>,
    cfg: &TrainConfig,
    surrogate: &SurrogateConfig,
) -> Result<TrainOutcome<S>> {
    let stage = StageSpec {
        stage: 1,
        learned_gate: false,
        lambda: 0.0,
        lr: cfg.learning_rate,
        epochs: cfg.epochs_stage1,
        mask: ParamMask {
            layers: true,
            controller: false,
            voting: cfg.train_voting,
        },
    };
    run_stage(train, val, params, cfg, &stage, surrogate, surrogate)
}

/// Stage 2: layer weights frozen, controller drives the gate, loss includes
/// the awake penalty, only the controller weights are updated.
pub fn train_stage2<S: Scalar>(
    train: &[SpikeTrain],
    val: &[SpikeTrain],
    params: ModelParams<S>,
    cfg: &TrainConfig,
    main_surrogate: &SurrogateConfig,
    controller_surrogate: &SurrogateConfig,
) -> Result<TrainOutcome<S>> {
    let stage = StageSpec {
        stage: 2,
        learned_gate: true,
        lambda: cfg.lambda,
        lr: cfg.learning_rate_stage2,
        epochs: cfg.epochs_stage2,
        mask: ParamMask {
            layers: false,
            controller: true,
            voting: false,
        },
    };
    run_stage(train, val, params, cfg, &stage, main_surrogate, controller_surrogate)
}

struct StageSpec {
    stage: u8,
    learned_gate: bool,
    lambda: f64,
    lr: f64,
    epochs: usize,
    mask: ParamMask,
}

struct SampleStep<S> {
    loss: LossParts<S>,
    grads: GradientSet<S>,
    correct: bool,
    awake: f64,
}

fn run_stage<S: Scalar>(
    train: &[SpikeTrain],
    val: &[SpikeTrain],
    mut params: ModelParams<S>,
    cfg: &TrainConfig,
    stage: &StageSpec,
    main_surrogate: &SurrogateConfig,
    controller_surrogate: &SurrogateConfig,
) -> Result<TrainOutcome<S>> {
    cfg.validate()?;
    main_surrogate.validate()?;
    controller_surrogate.validate()?;
    params.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mode = if stage.learned_gate {
        GateMode::Learned
    } else {
        GateMode::ForcedAwake
    };
    let mut opt = Optimizer::new(cfg.optimizer, stage.lr, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (u64::from(stage.stage) << 56));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(stage.epochs);
    let mut best: Option<(f64, usize, ModelParams<S>)> = None;
    let mut since_best = 0;

    for epoch in 0..stage.epochs {
        let opts = BpttOptions {
            main: main_surrogate.at_epoch::<S>(epoch),
            controller: controller_surrogate.at_epoch::<S>(epoch),
            lambda: S::lit(stage.lambda),
            reset_grad: false,
        };
        order.shuffle(&mut rng);
        let (mut loss, mut cls, mut pen, mut correct, mut awake) = (0.0, 0.0, 0.0, 0usize, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let steps: Vec<SampleStep<S>> = batch
                .par_iter()
                .map(|&i| {
                    let x = &train[i];
                    let tr = skipsnn_forward_with(x, &params, mode, Firing::Heaviside, None)?;
                    let (l, g) = bptt(&tr, x, x.label(), &params, &opts)?;
                    Ok(SampleStep {
                        loss: l,
                        grads: g,
                        correct: tr.predict(&params.voting) == x.label(),
                        awake: tr.awake_fraction(),
                    })
                })
                .collect::<Result<_>>()?;
            let mut sum = GradientSet::zeros_like(&params);
            for s in &steps {
                sum.add_assign(&s.grads);
                loss += s.loss.total.as_f64();
                cls += s.loss.classification.as_f64();
                pen += s.loss.penalty.as_f64();
                correct += usize::from(s.correct);
                awake += s.awake;
            }
            if !loss.is_finite() || !sum.all_finite() {
                return Err(Error::Diverged {
                    stage: stage.stage,
                    epoch,
                    loss,
                });
            }
            sum.scale(S::one() / S::lit(batch.len() as f64));
            opt.update(&mut params, &sum, stage.mask);
        }
        let n = train.len() as f64;
        let val_summary = evaluate(val, &params, mode, stage.lambda)?;
        let entry = EpochLog {
            epoch,
            stage: stage.stage,
            loss: loss / n,
            cls_loss: cls / n,
            penalty: pen / n,
            train_acc: correct as f64 / n,
            val_acc: val_summary.accuracy,
            awake_frac: if val.is_empty() { awake / n } else { val_summary.awake_frac },
            delta: controller_surrogate.width_at(epoch),
        };
        log::info!("{}", entry.csv_row());
        log.push(entry);

        if val.is_empty() {
            continue;
        }
        let score = val_summary.loss;
        if best.as_ref().map_or(true, |(b, _, _)| score < *b) {
            best = Some((score, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let (best_epoch, params) = match best {
        Some((_, e, p)) => (e, p),
        None => (log.len().saturating_sub(1), params),
    };
    Ok(TrainOutcome {
        params,
        log,
        best_epoch,
    })
}
