//! Central finite differences on a smoothed forward pass.
//!
//! Replacing every step function by `sigma((u - v_th) / delta)` makes the loss
//! differentiable, so [`bptt`] run with the matching bump surrogate and
//! `reset_grad` enabled must agree with the finite differences here.

use crate::dynamics::{skipsnn_forward_with, Firing, GateMode, ModelParams};
use crate::error::{Error, Result};
use crate::spiketrain::SpikeTrain;

use super::bptt::{bptt, BpttOptions, GradientSet};
use super::loss::{classification_loss, penalty_loss};
use super::surrogate::Surrogate;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Loss of the smoothed forward pass.
pub fn smoothed_loss(
    x: &SpikeTrain,
    label: usize,
    params: &ModelParams<f64>,
    mode: GateMode<'_>,
    delta: f64,
    lambda: f64,
) -> Result<f64> {
    let trace = skipsnn_forward_with(x, params, mode, Firing::Logistic { temperature: delta }, None)?;
    let loss = classification_loss(&trace, label, &params.voting)? + penalty_loss(&trace.gate, lambda);
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFiniteLoss)
    }
}

/// Gradient of [`smoothed_loss`] by central differences with step `h` on every parameter.
pub fn fd_oracle_gradients(
    x: &SpikeTrain,
    label: usize,
    params: &ModelParams<f64>,
    mode: GateMode<'_>,
    delta: f64,
    lambda: f64,
    h: f64,
) -> Result<GradientSet<f64>> {
    let mut grads = GradientSet::zeros_like(params);
    let mut probe = params.clone();
    let n_groups = grads.slices().len();
    for group in 0..n_groups {
        let len = grads.slices()[group].len();
        for idx in 0..len {
            let orig = param_slot(&mut probe, group, idx);
            *param_slot_mut(&mut probe, group, idx) = orig + h;
            let plus = smoothed_loss(x, label, &probe, mode, delta, lambda)?;
            *param_slot_mut(&mut probe, group, idx) = orig - h;
            let minus = smoothed_loss(x, label, &probe, mode, delta, lambda)?;
            *param_slot_mut(&mut probe, group, idx) = orig;
            grads.slices_mut()[group][idx] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grads)
}

/// Analytic gradient of the same smoothed loss.
pub fn smoothed_bptt_gradients(
    x: &SpikeTrain,
    label: usize,
    params: &ModelParams<f64>,
    mode: GateMode<'_>,
    delta: f64,
    lambda: f64,
) -> Result<GradientSet<f64>> {
    let trace = skipsnn_forward_with(x, params, mode, Firing::Logistic { temperature: delta }, None)?;
    let bump = Surrogate::LogisticDerivative { delta };
    let opts = BpttOptions {
        main: bump,
        controller: bump,
        lambda,
        reset_grad: true,
    };
    Ok(bptt(&trace, x, label, params, &opts)?.1)
}

/// Largest `|a - b| / max(|a|, |b|, floor)` over all entries.
pub fn max_relative_error(a: &GradientSet<f64>, b: &GradientSet<f64>, floor: f64) -> f64 {
    a.slices()
        .into_iter()
        .flatten()
        .zip(b.slices().into_iter().flatten())
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

fn param_slot(p: &mut ModelParams<f64>, group: usize, idx: usize) -> f64 {
    *param_slot_mut(p, group, idx)
}

fn param_slot_mut(p: &mut ModelParams<f64>, group: usize, idx: usize) -> &mut f64 {
    let nl = p.layer_weights.len();
    match group {
        g if g < nl => &mut p.layer_weights[g].as_mut_slice()[idx],
        g if g == nl => &mut p.ctrl_wz[idx],
        g if g == nl + 1 => &mut p.ctrl_wo[idx],
        _ => &mut p.voting.as_mut_slice()[idx],
    }
}
