//! Skip policies used as comparisons for the learned gate: a fixed periodic
//! schedule and i.i.d. Bernoulli masks, both applied to a stage-1 network
//! through the external-mask gate mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{skipsnn_forward, GateMode, ModelParams};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, FlopLedger};
use crate::scalar::Scalar;
use crate::spiketrain::SpikeTrain;

/// Longest awake+skip period considered by [`fixed_skip_mask`].
pub const MAX_FIXED_PERIOD: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Fixed,
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkipSchedule {
    pub mask: Vec<bool>,
    pub kind: ScheduleKind,
    pub target_fraction: f64,
}

impl SkipSchedule {
    pub fn realized_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&b| b).count() as f64 / self.mask.len().max(1) as f64
    }
}

/// Awake/skip run lengths `(m, n)` whose ratio `m / (m + n)` is closest to
/// `fraction`, preferring the shorter period on ties.
pub fn fixed_skip_period(fraction: f64, max_period: usize) -> Result<(usize, usize)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fixed-skip fraction {fraction} outside (0, 1]"
        )));
    }
    let mut best = (1, 0);
    let mut best_err = f64::INFINITY;
    for period in 1..=max_period.max(1) {
        for awake in 1..=period {
            let err = (awake as f64 / period as f64 - fraction).abs();
            if err < best_err - 1e-12 {
                best_err = err;
                best = (awake, period - awake);
            }
        }
    }
    Ok(best)
}

/// Periodic mask starting awake: `m` awake steps then `n` skipped, repeated.
pub fn fixed_skip_mask(steps: usize, fraction: f64) -> Result<SkipSchedule> {
    let (m, n) = fixed_skip_period(fraction, MAX_FIXED_PERIOD.min(steps.max(1)))?;
    let period = m + n;
    Ok(SkipSchedule {
        mask: (0..steps).map(|t| t % period < m).collect(),
        kind: ScheduleKind::Fixed,
        target_fraction: fraction,
    })
}

/// Each step awake independently with probability `p`.
pub fn random_skip_mask<R: Rng + ?Sized>(steps: usize, p: f64, rng: &mut R) -> Result<SkipSchedule> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("random-skip probability {p} outside [0, 1]")));
    }
    Ok(SkipSchedule {
        mask: (0..steps).map(|_| rng.gen_bool(p)).collect(),
        kind: ScheduleKind::Random,
        target_fraction: p,
    })
}

/// How the gate is chosen during evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Policy {
    /// Every input admitted (the plain network).
    AlwaysAwake,
    /// The trained controller.
    Learned,
    Fixed { fraction: f64 },
    /// Masks redrawn per sample from a seed derived from `(seed, sample index)`.
    Random { p: f64, seed: u64 },
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::AlwaysAwake => "snn",
            Policy::Learned => "skipsnn",
            Policy::Fixed { .. } => "fixed-skip",
            Policy::Random { .. } => "random-skip",
        }
    }

    fn mask_for(&self, steps: usize, index: usize) -> Result<Option<Vec<bool>>> {
        Ok(match *self {
            Policy::AlwaysAwake | Policy::Learned => None,
            Policy::Fixed { fraction } => Some(fixed_skip_mask(steps, fraction)?.mask),
            Policy::Random { p, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index as u64);
                Some(random_skip_mask(steps, p, &mut rng)?.mask)
            }
        })
    }
}

#[derive(Clone, Debug)]
pub struct PolicyResult {
    pub accuracy: f64,
    /// Mean realized awake fraction over samples.
    pub awake_frac: f64,
    /// Mean MFLOPs per sample.
    pub mflops: f64,
    /// Ledger summed over all samples.
    pub ledger: FlopLedger,
    pub predictions: Vec<usize>,
    pub awake_masks: Vec<Vec<bool>>,
}

pub fn evaluate_policy<S: Scalar>(
    samples: &[SpikeTrain],
    params: &ModelParams<S>,
    policy: Policy,
) -> Result<PolicyResult> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    let per: Vec<(usize, Vec<bool>, FlopLedger)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mask = policy.mask_for(x.steps(), i)?;
            let mode = match (&policy, &mask) {
                (Policy::Learned, _) => GateMode::Learned,
                (_, Some(m)) => GateMode::External(m),
                (_, None) => GateMode::ForcedAwake,
            };
            let mut ledger = FlopLedger::new();
            let tr = skipsnn_forward(x, params, mode, &mut ledger)?;
            Ok((tr.predict(&params.voting), tr.awake_mask(), ledger))
        })
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = samples.iter().map(SpikeTrain::label).collect();
    let predictions: Vec<usize> = per.iter().map(|p| p.0).collect();
    let ledger: FlopLedger = per.iter().map(|p| &p.2).sum();
    let awake_masks: Vec<Vec<bool>> = per.into_iter().map(|p| p.1).collect();
    let n = samples.len() as f64;
    Ok(PolicyResult {
        accuracy: accuracy(&predictions, &labels)?,
        awake_frac: crate::metrics::awake_fraction(awake_masks.iter().map(Vec::as_slice))?,
        mflops: ledger.total_mflops() / n,
        ledger,
        predictions,
        awake_masks,
    })
}
