//! Reverse sweep over a recorded forward trace.
//!
//! Spike nonlinearities are differentiated through a surrogate `h(u)`. The
//! main network and the controller each get their own surrogate. The reset
//! factors `(1 - z)` and `(1 - a)` are held constant unless
//! [`BpttOptions::reset_grad`] is set, which makes the sweep the exact
//! gradient of a smoothed forward (used for finite-difference checks).

use crate::dynamics::{ForwardTrace, ModelParams};
use crate::error::{shape_err, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::spiketrain::SpikeTrain;

use super::loss::one_hot_sq_error;
use super::surrogate::Surrogate;

#[derive(Clone, Copy, Debug)]
pub struct BpttOptions<S> {
    pub main: Surrogate<S>,
    pub controller: Surrogate<S>,
    pub lambda: S,
    pub reset_grad: bool,
}

/// One gradient array per [`ModelParams`] field, same shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet<S> {
    pub layer_weights: Vec<Matrix<S>>,
    pub ctrl_wz: Vec<S>,
    pub ctrl_wo: Vec<S>,
    pub voting: Matrix<S>,
}

impl<S: Scalar> GradientSet<S> {
    pub fn zeros_like(p: &ModelParams<S>) -> Self {
        Self {
            layer_weights: p
                .layer_weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            ctrl_wz: vec![S::zero(); p.ctrl_wz.len()],
            ctrl_wo: vec![S::zero(); p.ctrl_wo.len()],
            voting: Matrix::zeros(p.voting.rows(), p.voting.cols()),
        }
    }

    /// Slices in the same order as [`ModelParams`] fields.
    pub fn slices(&self) -> Vec<&[S]> {
        let mut v: Vec<&[S]> = self.layer_weights.iter().map(Matrix::as_slice).collect();
        v.push(&self.ctrl_wz);
        v.push(&self.ctrl_wo);
        v.push(self.voting.as_slice());
        v
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [S]> {
        let mut v: Vec<&mut [S]> = self.layer_weights.iter_mut().map(Matrix::as_mut_slice).collect();
        v.push(&mut self.ctrl_wz);
        v.push(&mut self.ctrl_wo);
        v.push(self.voting.as_mut_slice());
        v
    }

    pub fn add_assign(&mut self, other: &GradientSet<S>) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: S) {
        for a in self.slices_mut() {
            a.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn max_abs(&self) -> S {
        self.slices()
            .into_iter()
            .flatten()
            .fold(S::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.slices().into_iter().flatten().all(|x| x.is_finite())
    }
}

/// Loss decomposition returned with the gradients.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts<S> {
    pub total: S,
    pub classification: S,
    pub penalty: S,
}

/// Gradients of `classification + lambda * mean(gate)` for the sample `x`
/// that produced `trace`.
pub fn bptt<S: Scalar>(
    trace: &ForwardTrace<S>,
    x: &SpikeTrain,
    label: usize,
    params: &ModelParams<S>,
    opts: &BpttOptions<S>,
) -> Result<(LossParts<S>, GradientSet<S>)> {
    let sizes = params.sizes();
    if trace.sizes != sizes || trace.steps != x.steps() || x.channels() != sizes[0] {
        return shape_err("trace, input and params disagree on shapes");
    }
    let steps = trace.steps;
    let n_layers = params.layer_weights.len();
    let tau = params.lif.tau;
    let v_th = params.lif.v_th;
    let t_inv = S::one() / S::lit(steps as f64);

    let rates = trace.class_rates(&params.voting);
    let classification = one_hot_sq_error(&rates, label)?;
    let penalty = super::loss::penalty_loss(&trace.gate, opts.lambda);

    let mut grads = GradientSet::zeros_like(params);

    // dL/dr_c, then dL/dz_out (the same at every step)
    let out = n_layers - 1;
    let s_out = sizes[out + 1];
    let d_rate: Vec<S> = rates
        .iter()
        .enumerate()
        .map(|(c, &r)| S::lit(-2.0) * (S::from_bit(c == label) - r))
        .collect();
    let mut dz_out = vec![S::zero(); s_out];
    for (c, &dr) in d_rate.iter().enumerate() {
        for (j, &m) in params.voting.row(c).iter().enumerate() {
            dz_out[j] += dr * m * t_inv;
        }
    }
    {
        let mut counts = vec![S::zero(); s_out];
        for t in 0..steps {
            for (n, &z) in counts.iter_mut().zip(trace.layer_z(out, t)) {
                *n += z;
            }
        }
        for (c, &dr) in d_rate.iter().enumerate() {
            for (j, g) in grads.voting.row_mut(c).iter_mut().enumerate() {
                *g = dr * counts[j] * t_inv;
            }
        }
    }

    // transposed copies make the backward products contiguous
    let w_t: Vec<Matrix<S>> = params.layer_weights.iter().map(Matrix::transpose).collect();
    let mut grad_t: Vec<Matrix<S>> = params
        .layer_weights
        .iter()
        .map(|w| Matrix::zeros(w.cols(), w.rows()))
        .collect();

    let learned = trace.learned_gate;
    let mut du_next: Vec<Vec<S>> = sizes[1..].iter().map(|&s| vec![S::zero(); s]).collect();
    let mut du_cur: Vec<Vec<S>> = du_next.clone();
    let mut dz = vec![S::zero(); *sizes[1..].iter().max().unwrap()];
    let mut h = dz.clone();
    let mut dv_next = S::zero();
    let mut dgate_next = S::zero();
    let penalty_grad = super::loss::penalty_grad(steps, opts.lambda);

    for t in (0..steps).rev() {
        // controller at t: v_t feeds v_{t+1}; a_t is the gate of step t+1
        let mut dv = S::zero();
        if learned {
            let mut da = if t + 1 < steps { dgate_next } else { S::zero() };
            let a = trace.ctrl_a[t];
            if opts.reset_grad && t + 1 < steps {
                da -= tau * trace.ctrl_v[t] * dv_next;
            }
            dv = da * opts.controller.eval(trace.ctrl_v[t], v_th) + tau * (S::one() - a) * dv_next;
            if dv != S::zero() {
                let z1 = trace.layer_z(0, t);
                for (g, &z) in grads.ctrl_wz.iter_mut().zip(z1) {
                    if z != S::zero() {
                        *g += dv * z;
                    }
                }
                for (g, &o) in grads.ctrl_wo.iter_mut().zip(trace.pulses_at(t)) {
                    if o != 0 {
                        *g += dv;
                    }
                }
            }
        }

        for k in (0..n_layers).rev() {
            let s = sizes[k + 1];
            let u = trace.layer_u(k, t);
            let z = trace.layer_z(k, t);
            let dz = &mut dz[..s];
            let h = &mut h[..s];
            for (hi, &ui) in h.iter_mut().zip(u) {
                *hi = opts.main.eval(ui, v_th);
            }
            dz.iter_mut().for_each(|d| *d = S::zero());
            if k == out {
                dz.copy_from_slice(&dz_out);
            }
            if k < out {
                let above = &du_cur[k + 1];
                if above.iter().any(|&d| d != S::zero()) {
                    let wt = &w_t[k + 1];
                    for i in 0..s {
                        if h[i] != S::zero() {
                            dz[i] += wt.row(i).iter().zip(above).map(|(&w, &d)| w * d).sum::<S>();
                        }
                    }
                }
            }
            if k == 0 && dv != S::zero() {
                for (d, &w) in dz.iter_mut().zip(&params.ctrl_wz) {
                    *d += w * dv;
                }
            }
            if opts.reset_grad && t + 1 < steps {
                for i in 0..s {
                    dz[i] -= tau * u[i] * du_next[k][i];
                }
            }
            let duk = &mut du_cur[k];
            for i in 0..s {
                duk[i] = dz[i] * h[i] + tau * (S::one() - z[i]) * du_next[k][i];
            }

            // weight gradient, accumulated transposed: g_t[j][i] += du_i * in_j
            let gt = &mut grad_t[k];
            if k == 0 {
                let gate = trace.gate[t];
                if gate != S::zero() {
                    for ch in x.active_channels(t) {
                        for (g, &d) in gt.row_mut(ch).iter_mut().zip(duk.iter()) {
                            *g += d * gate;
                        }
                    }
                }
            } else {
                let zin = trace.layer_z(k - 1, t);
                for (j, &zj) in zin.iter().enumerate() {
                    if zj != S::zero() {
                        for (g, &d) in gt.row_mut(j).iter_mut().zip(duk.iter()) {
                            *g += d * zj;
                        }
                    }
                }
            }
        }

        // gate of step t multiplies W0 x_t
        if learned && t > 0 {
            let mut dgate = penalty_grad[t];
            let du0 = &du_cur[0];
            for ch in x.active_channels(t) {
                dgate += w_t[0].row(ch).iter().zip(du0).map(|(&w, &d)| w * d).sum::<S>();
            }
            dgate_next = dgate;
        } else {
            dgate_next = S::zero();
        }
        dv_next = dv;
        std::mem::swap(&mut du_next, &mut du_cur);
    }

    for (g, gt) in grads.layer_weights.iter_mut().zip(&grad_t) {
        *g = gt.transpose();
    }
    Ok((
        LossParts {
            total: classification + penalty,
            classification,
            penalty,
        },
        grads,
    ))
}
