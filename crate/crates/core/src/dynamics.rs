//! Leaky integrate-and-fire layers, the gating controller and the gated
//! forward pass over a spike train.
//!
//! Per step `t`, with gate `g_t` (the controller output of the previous step):
//!
//! ```text
//! u1_t = tau * u1_{t-1} * (1 - z1_{t-1}) + g_t * W0 x_t
//! uk_t = tau * uk_{t-1} * (1 - zk_{t-1}) + W_{k-1} z(k-1)_t        k >= 2
//! zk_t = fire(uk_t - v_th)
//! v_t  = tau * v_{t-1} * (1 - a_{t-1}) + wz . z1_t + wo . o_t
//! a_t  = fire(v_t - v_th)
//! ```
//!
//! where `o_t` are the periodic synchronisation pulses. Only the input
//! product is gated; decay, deeper layers and the controller always run.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{Component, FlopLedger, GateState};
use crate::scalar::Scalar;
use crate::spiketrain::SpikeTrain;

/// Step function with the threshold itself firing.
#[inline]
pub fn heaviside<S: Scalar>(x: S) -> S {
    S::from_bit(x >= S::zero())
}

#[inline]
pub fn logistic<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", deny_unknown_fields)]
pub struct LifConfig<S> {
    pub tau: S,
    pub v_th: S,
}

impl<S: Scalar> Default for LifConfig<S> {
    fn default() -> Self {
        Self {
            tau: S::lit(0.5),
            v_th: S::one(),
        }
    }
}

impl<S: Scalar> LifConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= S::zero() && self.tau <= S::one()) {
            return Err(Error::InvalidArgument(format!("tau {} outside [0, 1]", self.tau)));
        }
        if !(self.v_th > S::zero()) {
            return Err(Error::InvalidArgument(format!("v_th {} must be positive", self.v_th)));
        }
        Ok(())
    }
}

/// Spike nonlinearity used in the forward pass.
///
/// `Heaviside` is the real model. `Logistic` replaces every step function with
/// `sigma((u - v_th) / temperature)`, which makes the whole forward smooth so
/// it can be checked against finite differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Firing<S> {
    Heaviside,
    Logistic { temperature: S },
}

impl<S: Scalar> Firing<S> {
    #[inline]
    pub fn fire(&self, x: S) -> S {
        match *self {
            Firing::Heaviside => heaviside(x),
            Firing::Logistic { temperature } => logistic(x / temperature),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerState<S> {
    pub u: Vec<S>,
    pub z: Vec<S>,
}

impl<S: Scalar> LayerState<S> {
    pub fn zeros(size: usize) -> Self {
        Self {
            u: vec![S::zero(); size],
            z: vec![S::zero(); size],
        }
    }
}

/// One LIF update: `u = tau * u_prev * (1 - z_prev) + current`, `z = H(u - v_th)`.
pub fn lif_layer_step<S: Scalar>(
    prev: &LayerState<S>,
    input_current: &[S],
    cfg: &LifConfig<S>,
) -> Result<LayerState<S>> {
    if prev.u.len() != input_current.len() || prev.z.len() != prev.u.len() {
        return shape_err(format!(
            "layer of {} neurons fed {} currents",
            prev.u.len(),
            input_current.len()
        ));
    }
    let u: Vec<S> = prev
        .u
        .iter()
        .zip(&prev.z)
        .zip(input_current)
        .map(|((&u, &z), &c)| cfg.tau * u * (S::one() - z) + c)
        .collect();
    let z = u.iter().map(|&u| heaviside(u - cfg.v_th)).collect();
    Ok(LayerState { u, z })
}

/// Binary pulse vector at step `t`: entry `i` fires iff `t % periods[i] == 0`.
pub fn pulse_vector(t: usize, periods: &[usize]) -> Vec<u8> {
    periods.iter().map(|&p| u8::from(t % p == 0)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerState<S> {
    pub v: S,
    pub a: S,
}

impl<S: Scalar> ControllerState<S> {
    /// `v = 0`, `a = 1`: the network is awake for the first input.
    pub fn initial() -> Self {
        Self {
            v: S::zero(),
            a: S::one(),
        }
    }
}

pub fn controller_step<S: Scalar>(
    prev: &ControllerState<S>,
    z1: &[S],
    pulses: &[u8],
    params: &ModelParams<S>,
) -> Result<ControllerState<S>> {
    if z1.len() != params.ctrl_wz.len() || pulses.len() != params.ctrl_wo.len() {
        return shape_err(format!(
            "controller expects {} hidden spikes and {} pulses, got {} and {}",
            params.ctrl_wz.len(),
            params.ctrl_wo.len(),
            z1.len(),
            pulses.len()
        ));
    }
    let lif = &params.lif;
    let v = controller_potential(prev, z1, pulses, params);
    Ok(ControllerState {
        v,
        a: heaviside(v - lif.v_th),
    })
}

#[inline]
fn controller_potential<S: Scalar>(
    prev: &ControllerState<S>,
    z1: &[S],
    pulses: &[u8],
    params: &ModelParams<S>,
) -> S {
    let mut v = params.lif.tau * prev.v * (S::one() - prev.a);
    for (&w, &z) in params.ctrl_wz.iter().zip(z1) {
        if z != S::zero() {
            v += w * z;
        }
    }
    for (&w, &o) in params.ctrl_wo.iter().zip(pulses) {
        if o != 0 {
            v += w;
        }
    }
    v
}

/// All trainable and fixed quantities of a gated network.
///
/// `layer_weights[k]` maps layer `k` (the input for `k = 0`) to layer `k + 1`
/// and has shape `(sizes[k+1], sizes[k])`. The controller reads the first
/// hidden layer through `ctrl_wz` and the pulses through `ctrl_wo`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ModelParams<S> {
    pub layer_weights: Vec<Matrix<S>>,
    pub ctrl_wz: Vec<S>,
    pub ctrl_wo: Vec<S>,
    pub pulse_periods: Vec<usize>,
    pub voting: Matrix<S>,
    pub lif: LifConfig<S>,
}

/// Network shape and initial controller weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    /// Neurons per hidden layer, input and output excluded.
    pub hidden: Vec<usize>,
    /// Output neurons per class.
    pub vote_width: usize,
    pub pulse_periods: Vec<usize>,
    /// Initial weight of every hidden-to-controller synapse.
    pub ctrl_init_wz: f64,
    /// Initial pulse-to-controller weights, one per pulse.
    pub ctrl_init_wo: Vec<f64>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64],
            vote_width: 1,
            pulse_periods: vec![1, 10, 100],
            ctrl_init_wz: 0.1,
            ctrl_init_wo: vec![1.0, 0.1, 0.1],
        }
    }
}

impl Architecture {
    /// Full layer sizes `[P, hidden..., C * vote_width]`.
    pub fn sizes(&self, inputs: usize, classes: usize) -> Vec<usize> {
        let mut s = vec![inputs];
        s.extend(&self.hidden);
        s.push(classes * self.vote_width);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.vote_width == 0 {
            return Err(Error::InvalidArgument("vote_width must be >= 1".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidArgument("hidden layers must be non-empty".into()));
        }
        if self.pulse_periods.iter().any(|&p| p == 0) {
            return Err(Error::InvalidArgument("pulse periods must be >= 1".into()));
        }
        if self.ctrl_init_wo.len() != self.pulse_periods.len() {
            return Err(Error::InvalidArgument(format!(
                "{} initial pulse weights for {} pulses",
                self.ctrl_init_wo.len(),
                self.pulse_periods.len()
            )));
        }
        Ok(())
    }
}

impl<S: Scalar> ModelParams<S> {
    /// Glorot-uniform layer weights, constant controller weights and
    /// class-block voting with weight `1 / vote_width`.
    pub fn init<R: Rng + ?Sized>(
        arch: &Architecture,
        inputs: usize,
        classes: usize,
        lif: LifConfig<S>,
        rng: &mut R,
    ) -> Result<Self> {
        arch.validate()?;
        lif.validate()?;
        if inputs == 0 || classes == 0 {
            return Err(Error::InvalidArgument("need at least one input and one class".into()));
        }
        let sizes = arch.sizes(inputs, classes);
        let layer_weights = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let b = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Matrix::from_fn(fan_out, fan_in, |_, _| S::lit(rng.gen_range(-b..=b)))
            })
            .collect();
        let first_hidden = sizes[1];
        let out = *sizes.last().unwrap();
        let vote = S::lit(1.0 / arch.vote_width as f64);
        let voting = Matrix::from_fn(classes, out, |c, j| {
            if j / arch.vote_width == c {
                vote
            } else {
                S::zero()
            }
        });
        Ok(Self {
            layer_weights,
            ctrl_wz: vec![S::lit(arch.ctrl_init_wz); first_hidden],
            ctrl_wo: arch.ctrl_init_wo.iter().map(|&w| S::lit(w)).collect(),
            pulse_periods: arch.pulse_periods.clone(),
            voting,
            lif,
        })
    }

    /// Layer sizes including the input layer.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layer_weights[0].cols()];
        s.extend(self.layer_weights.iter().map(Matrix::rows));
        s
    }

    pub fn num_inputs(&self) -> usize {
        self.layer_weights[0].cols()
    }

    pub fn num_classes(&self) -> usize {
        self.voting.rows()
    }

    pub fn validate(&self) -> Result<()> {
        self.lif.validate()?;
        if self.layer_weights.is_empty() {
            return shape_err("no layers");
        }
        for (k, w) in self.layer_weights.windows(2).enumerate() {
            if w[1].cols() != w[0].rows() {
                return shape_err(format!(
                    "layer {} has {} outputs but layer {} expects {} inputs",
                    k,
                    w[0].rows(),
                    k + 1,
                    w[1].cols()
                ));
            }
        }
        if self.ctrl_wz.len() != self.layer_weights[0].rows() {
            return shape_err(format!(
                "ctrl_wz has {} entries for a first hidden layer of {}",
                self.ctrl_wz.len(),
                self.layer_weights[0].rows()
            ));
        }
        if self.ctrl_wo.len() != self.pulse_periods.len() {
            return shape_err(format!(
                "ctrl_wo has {} entries for {} pulses",
                self.ctrl_wo.len(),
                self.pulse_periods.len()
            ));
        }
        if self.pulse_periods.iter().any(|&p| p == 0) {
            return Err(Error::InvalidArgument("pulse periods must be >= 1".into()));
        }
        let out = self.layer_weights.last().unwrap().rows();
        if self.voting.cols() != out {
            return shape_err(format!(
                "voting matrix has {} columns for {} output neurons",
                self.voting.cols(),
                out
            ));
        }
        Ok(())
    }

    pub fn cast<T: Scalar>(&self) -> ModelParams<T> {
        let m = |m: &Matrix<S>| {
            Matrix::from_vec(m.rows(), m.cols(), m.as_slice().iter().map(|x| T::lit(x.as_f64())).collect())
                .unwrap()
        };
        let v = |v: &[S]| v.iter().map(|x| T::lit(x.as_f64())).collect();
        ModelParams {
            layer_weights: self.layer_weights.iter().map(m).collect(),
            ctrl_wz: v(&self.ctrl_wz),
            ctrl_wo: v(&self.ctrl_wo),
            pulse_periods: self.pulse_periods.clone(),
            voting: m(&self.voting),
            lif: LifConfig {
                tau: T::lit(self.lif.tau.as_f64()),
                v_th: T::lit(self.lif.v_th.as_f64()),
            },
        }
    }
}

/// Where the gate applied at each step comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateMode<'a> {
    /// The controller output of the previous step, starting awake.
    Learned,
    /// Always awake; the controller is simulated but never consulted.
    ForcedAwake,
    /// A supplied schedule, one bit per step (true = awake).
    External(&'a [bool]),
}

impl GateMode<'_> {
    pub fn is_learned(&self) -> bool {
        matches!(self, GateMode::Learned)
    }
}

/// Everything the forward pass computed, one entry per step.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace<S> {
    /// Layer sizes including the input layer.
    pub sizes: Vec<usize>,
    pub steps: usize,
    /// `u[k][t * sizes[k+1] + i]` for non-input layer `k`.
    pub u: Vec<Vec<S>>,
    pub z: Vec<Vec<S>>,
    /// Controller potential and output per step.
    pub ctrl_v: Vec<S>,
    pub ctrl_a: Vec<S>,
    /// Gate multiplying the input at each step (the awake mask).
    pub gate: Vec<S>,
    /// Pulse vectors, `pulses[t * p + i]`.
    pub pulses: Vec<u8>,
    pub num_pulses: usize,
    /// Number of input events admitted at each step (zero while hibernating).
    pub gated_events: Vec<u32>,
    pub learned_gate: bool,
}

impl<S: Scalar> ForwardTrace<S> {
    #[inline]
    pub fn layer_u(&self, k: usize, t: usize) -> &[S] {
        let s = self.sizes[k + 1];
        &self.u[k][t * s..(t + 1) * s]
    }

    #[inline]
    pub fn layer_z(&self, k: usize, t: usize) -> &[S] {
        let s = self.sizes[k + 1];
        &self.z[k][t * s..(t + 1) * s]
    }

    #[inline]
    pub fn pulses_at(&self, t: usize) -> &[u8] {
        &self.pulses[t * self.num_pulses..(t + 1) * self.num_pulses]
    }

    pub fn num_layers(&self) -> usize {
        self.u.len()
    }

    pub fn output_z(&self, t: usize) -> &[S] {
        self.layer_z(self.num_layers() - 1, t)
    }

    /// Awake mask as booleans (gate > 1/2 for smoothed traces).
    pub fn awake_mask(&self) -> Vec<bool> {
        let half = S::lit(0.5);
        self.gate.iter().map(|&g| g > half).collect()
    }

    pub fn awake_fraction(&self) -> f64 {
        self.gate.iter().map(|g| g.as_f64()).sum::<f64>() / self.steps as f64
    }

    /// Time-averaged voted output per class, `(1/T) sum_t M z_out_t`.
    pub fn class_rates(&self, voting: &Matrix<S>) -> Vec<S> {
        let out = self.num_layers() - 1;
        let s = self.sizes[out + 1];
        let mut counts = vec![S::zero(); s];
        for t in 0..self.steps {
            for (c, &z) in counts.iter_mut().zip(self.layer_z(out, t)) {
                *c += z;
            }
        }
        let inv_t = S::one() / S::lit(self.steps as f64);
        (0..voting.rows())
            .map(|c| {
                voting
                    .row(c)
                    .iter()
                    .zip(&counts)
                    .map(|(&m, &n)| m * n)
                    .sum::<S>()
                    * inv_t
            })
            .collect()
    }

    /// Argmax of the class rates, lowest index winning ties.
    pub fn predict(&self, voting: &Matrix<S>) -> usize {
        argmax_lowest(&self.class_rates(voting))
    }

    /// JSON export for raster plots: awake bit, controller potential and
    /// spike indices of every layer per step.
    pub fn to_json(&self) -> serde_json::Value {
        let steps: Vec<serde_json::Value> = (0..self.steps)
            .map(|t| {
                let spikes: Vec<Vec<usize>> = (0..self.num_layers())
                    .map(|k| {
                        self.layer_z(k, t)
                            .iter()
                            .enumerate()
                            .filter_map(|(i, &z)| (z > S::lit(0.5)).then_some(i))
                            .collect()
                    })
                    .collect();
                serde_json::json!({
                    "t": t,
                    "awake": self.gate[t] > S::lit(0.5),
                    "v": self.ctrl_v[t].as_f64(),
                    "spikes": spikes,
                })
            })
            .collect();
        serde_json::json!({ "sizes": self.sizes, "steps": steps })
    }
}

pub fn argmax_lowest<S: Scalar>(xs: &[S]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Runs the gated network over `x`, charging `ledger` for the work done.
pub fn skipsnn_forward<S: Scalar>(
    x: &SpikeTrain,
    params: &ModelParams<S>,
    mode: GateMode<'_>,
    ledger: &mut FlopLedger,
) -> Result<ForwardTrace<S>> {
    skipsnn_forward_with(x, params, mode, Firing::Heaviside, Some(ledger))
}

/// Forward pass with an explicit firing nonlinearity and optional accounting.
pub fn skipsnn_forward_with<S: Scalar>(
    x: &SpikeTrain,
    params: &ModelParams<S>,
    mode: GateMode<'_>,
    firing: Firing<S>,
    mut ledger: Option<&mut FlopLedger>,
) -> Result<ForwardTrace<S>> {
    params.validate()?;
    if x.channels() != params.num_inputs() {
        return shape_err(format!(
            "input has {} channels, network expects {}",
            x.channels(),
            params.num_inputs()
        ));
    }
    let steps = x.steps();
    if let GateMode::External(mask) = mode {
        if mask.len() != steps {
            return shape_err(format!("gate mask has {} entries for {} steps", mask.len(), steps));
        }
    }
    let sizes = params.sizes();
    let n_layers = params.layer_weights.len();
    let tau = params.lif.tau;
    let v_th = params.lif.v_th;
    let np = params.pulse_periods.len();

    let mut trace = ForwardTrace {
        sizes: sizes.clone(),
        steps,
        u: sizes[1..].iter().map(|&s| Vec::with_capacity(s * steps)).collect(),
        z: sizes[1..].iter().map(|&s| Vec::with_capacity(s * steps)).collect(),
        ctrl_v: Vec::with_capacity(steps),
        ctrl_a: Vec::with_capacity(steps),
        gate: Vec::with_capacity(steps),
        pulses: Vec::with_capacity(steps * np),
        num_pulses: np,
        gated_events: Vec::with_capacity(steps),
        learned_gate: mode.is_learned(),
    };

    let mut current: Vec<Vec<S>> = sizes[1..].iter().map(|&s| vec![S::zero(); s]).collect();
    let mut ctrl = ControllerState::<S>::initial();
    let mut pulses = vec![0u8; np];

    for t in 0..steps {
        let gate = match mode {
            GateMode::Learned => ctrl.a,
            GateMode::ForcedAwake => S::one(),
            GateMode::External(mask) => S::from_bit(mask[t]),
        };
        let state = GateState::from_gate(gate > S::lit(0.5));
        trace.gate.push(gate);

        // input product, skipped entirely while hibernating
        let cur0 = &mut current[0];
        cur0.iter_mut().for_each(|c| *c = S::zero());
        let mut admitted = 0u32;
        if gate != S::zero() {
            let w0 = &params.layer_weights[0];
            for ch in x.active_channels(t) {
                admitted += 1;
                for (i, c) in cur0.iter_mut().enumerate() {
                    *c += w0[(i, ch)];
                }
            }
            if gate != S::one() {
                cur0.iter_mut().for_each(|c| *c *= gate);
            }
            if let Some(l) = ledger.as_deref_mut() {
                l.charge_matmul_event_driven(w0.shape(), admitted as usize, Component::InputMatmul, state);
            }
        }
        trace.gated_events.push(admitted);

        for k in 0..n_layers {
            let s = sizes[k + 1];
            if k > 0 {
                let cur = &mut current[k];
                let zin = &trace.z[k - 1][t * sizes[k]..(t + 1) * sizes[k]];
                params.layer_weights[k].mul_vec_sparse(zin, cur);
                if let Some(l) = ledger.as_deref_mut() {
                    let active = zin.iter().filter(|&&z| z != S::zero()).count();
                    l.charge_matmul_event_driven(params.layer_weights[k].shape(), active, Component::HiddenMatmul, state);
                }
            }
            let cur = &current[k];
            for i in 0..s {
                let (u_prev, z_prev) = if t == 0 {
                    (S::zero(), S::zero())
                } else {
                    (trace.u[k][(t - 1) * s + i], trace.z[k][(t - 1) * s + i])
                };
                let u = tau * u_prev * (S::one() - z_prev) + cur[i];
                trace.u[k].push(u);
                trace.z[k].push(firing.fire(u - v_th));
            }
            if let Some(l) = ledger.as_deref_mut() {
                l.charge_decay(s, Component::Decay, state);
            }
        }

        for (o, &p) in pulses.iter_mut().zip(&params.pulse_periods) {
            *o = u8::from(t % p == 0);
        }
        trace.pulses.extend_from_slice(&pulses);
        let z1 = &trace.z[0][t * sizes[1]..(t + 1) * sizes[1]];
        let v = controller_potential(&ctrl, z1, &pulses, params);
        ctrl = ControllerState {
            v,
            a: firing.fire(v - v_th),
        };
        trace.ctrl_v.push(ctrl.v);
        trace.ctrl_a.push(ctrl.a);
        if mode.is_learned() {
            if let Some(l) = ledger.as_deref_mut() {
                let active = z1.iter().filter(|&&z| z != S::zero()).count();
                l.charge_matmul_event_driven((1, sizes[1]), active, Component::Controller, state);
                l.charge_decay(1, Component::Controller, state);
                let fired = pulses.iter().filter(|&&o| o != 0).count();
                l.charge_matmul_event_driven((1, np), fired, Component::Pulses, state);
            }
        }
    }
    Ok(trace)
}

/// Controller-free network: plain layered LIF with every input admitted.
/// Returns the spike vectors of every non-input layer, `[layer][t][i]`.
pub fn snn_forward<S: Scalar>(x: &SpikeTrain, params: &ModelParams<S>) -> Result<Vec<Vec<Vec<S>>>> {
    params.validate()?;
    if x.channels() != params.num_inputs() {
        return shape_err("input channel count does not match the network");
    }
    let mut states: Vec<LayerState<S>> =
        params.layer_weights.iter().map(|w| LayerState::zeros(w.rows())).collect();
    let mut out = vec![Vec::with_capacity(x.steps()); states.len()];
    for t in 0..x.steps() {
        let mut input: Vec<S> = x.column(t).iter().map(|&b| S::from_bit(b != 0)).collect();
        for (k, w) in params.layer_weights.iter().enumerate() {
            let current: Vec<S> = (0..w.rows())
                .map(|i| w.row(i).iter().zip(&input).map(|(&a, &b)| a * b).sum())
                .collect();
            states[k] = lif_layer_step(&states[k], &current, &params.lif)?;
            out[k].push(states[k].z.clone());
            input = states[k].z.clone();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lif() -> LifConfig<f64> {
        LifConfig { tau: 0.5, v_th: 1.0 }
    }

    #[test]
    fn heaviside_boundary_fires() {
        assert_eq!(heaviside(-0.5f64), 0.0);
        assert_eq!(heaviside(0.0f64), 1.0);
        assert_eq!(heaviside(3.2f32), 1.0);
    }

    #[test]
    fn one_neuron_hand_trace() {
        let mut st = LayerState::zeros(1);
        let mut us = vec![];
        let mut zs = vec![];
        for c in [1.0, 0.0, 1.0] {
            st = lif_layer_step(&st, &[c], &lif()).unwrap();
            us.push(st.u[0]);
            zs.push(st.z[0]);
        }
        assert_eq!(us, vec![1.0, 0.0, 1.0]);
        assert_eq!(zs, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn zero_tau_is_memoryless() {
        let cfg = LifConfig { tau: 0.0, v_th: 1.0 };
        let mut st = LayerState::zeros(2);
        for c in [[0.3, 0.9], [0.2, -0.4], [0.7, 0.1]] {
            st = lif_layer_step(&st, &c, &cfg).unwrap();
            assert_eq!(st.u, c.to_vec());
        }
    }

    #[test]
    fn huge_threshold_is_pure_leaky_integration() {
        let cfg = LifConfig { tau: 0.5, v_th: 1e12 };
        let mut st = LayerState::zeros(1);
        let mut expect = 0.0;
        for c in [1.0, 2.0, -0.5, 0.25] {
            st = lif_layer_step(&st, &[c], &cfg).unwrap();
            expect = 0.5 * expect + c;
            assert_eq!(st.u[0], expect);
            assert_eq!(st.z[0], 0.0);
        }
    }

    #[test]
    fn layer_step_rejects_bad_shapes() {
        assert!(lif_layer_step(&LayerState::<f64>::zeros(2), &[1.0], &lif()).is_err());
    }

    #[test]
    fn pulses() {
        assert_eq!(pulse_vector(17, &[1]), vec![1]);
        assert_eq!(pulse_vector(0, &[1, 10, 100]), vec![1, 1, 1]);
        assert_eq!(pulse_vector(30, &[1, 10, 100]), vec![1, 1, 0]);
    }

    fn tiny_params(wz: Vec<f64>, wo: Vec<f64>, periods: Vec<usize>) -> ModelParams<f64> {
        ModelParams {
            layer_weights: vec![Matrix::filled(1, 1, 1.0), Matrix::filled(1, 1, 1.0)],
            ctrl_wz: wz,
            ctrl_wo: wo,
            pulse_periods: periods,
            voting: Matrix::identity(1),
            lif: lif(),
        }
    }

    #[test]
    fn controller_zero_weights_stays_silent() {
        let p = tiny_params(vec![0.0], vec![0.0], vec![1]);
        let s = controller_step(&ControllerState { v: 0.0, a: 0.0 }, &[1.0], &[1], &p).unwrap();
        assert_eq!((s.v, s.a), (0.0, 0.0));
    }

    #[test]
    fn controller_resets_after_firing() {
        let p = tiny_params(vec![0.0], vec![0.0], vec![1]);
        let s = controller_step(&ControllerState { v: 123.0, a: 1.0 }, &[0.0], &[0], &p).unwrap();
        assert_eq!(s.v, 0.0);
    }

    #[test]
    fn controller_arithmetic() {
        let mut p = tiny_params(vec![0.5, 0.5], vec![0.3], vec![1]);
        p.layer_weights = vec![Matrix::filled(2, 1, 1.0), Matrix::filled(1, 2, 1.0)];
        let s = controller_step(&ControllerState { v: 0.4, a: 0.0 }, &[1.0, 1.0], &[1], &p).unwrap();
        assert!((s.v - 1.5).abs() < 1e-15);
        assert_eq!(s.a, 1.0);
        assert!(controller_step(&ControllerState { v: 0.4, a: 0.0 }, &[1.0], &[1], &p).is_err());
    }

    #[test]
    fn hand_network_gated_trace() {
        // 1 input -> 1 hidden -> 1 output, all weights 1, controller reads the hidden
        // neuron with weight 2 and has no pulses.
        let p = tiny_params(vec![2.0], vec![], vec![]);
        let x = SpikeTrain::from_fn(1, 3, 0, |_, _| true).unwrap();
        let mut ledger = FlopLedger::new();
        let tr = skipsnn_forward(&x, &p, GateMode::Learned, &mut ledger).unwrap();
        // t1: u=1 fires; v=2, a=1. t2: reset, u=1 fires; v=2. t3 likewise.
        assert_eq!(tr.gate, vec![1.0, 1.0, 1.0]);
        assert_eq!(tr.u[0], vec![1.0, 1.0, 1.0]);
        assert_eq!(tr.z[0], vec![1.0, 1.0, 1.0]);
        assert_eq!(tr.u[1], vec![1.0, 1.0, 1.0]);
        assert_eq!(tr.z[1], vec![1.0, 1.0, 1.0]);
        assert_eq!(tr.ctrl_v, vec![2.0, 2.0, 2.0]);
        assert_eq!(tr.ctrl_a, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn all_zero_mask_is_input_blind() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let arch = Architecture {
            hidden: vec![6],
            ..Architecture::default()
        };
        let p = ModelParams::<f64>::init(&arch, 5, 3, lif(), &mut rng).unwrap();
        let x = SpikeTrain::from_fn(5, 20, 1, |_, _| rng.gen_bool(0.5)).unwrap();
        let mask = vec![false; 20];
        let tr = skipsnn_forward(&x, &p, GateMode::External(&mask), &mut FlopLedger::new()).unwrap();
        assert!(tr.z.iter().all(|layer| layer.iter().all(|&z| z == 0.0)));
        let rates = tr.class_rates(&p.voting);
        assert!(rates.iter().all(|&r| r == rates[0]));
        assert_eq!(tr.predict(&p.voting), 0);
    }

    #[test]
    fn mask_length_is_checked() {
        let p = tiny_params(vec![1.0], vec![], vec![]);
        let x = SpikeTrain::zeros(1, 4, 0).unwrap();
        let mask = vec![true; 3];
        assert!(skipsnn_forward(&x, &p, GateMode::External(&mask), &mut FlopLedger::new()).is_err());
        let wrong = SpikeTrain::zeros(2, 4, 0).unwrap();
        assert!(skipsnn_forward(&wrong, &p, GateMode::ForcedAwake, &mut FlopLedger::new()).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax_lowest(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax_lowest(&[0.0f32, 0.0]), 0);
    }

    #[test]
    fn trace_json_lists_spikes() {
        let p = tiny_params(vec![2.0], vec![], vec![]);
        let x = SpikeTrain::from_fn(1, 2, 0, |t, _| t == 0).unwrap();
        let tr = skipsnn_forward(&x, &p, GateMode::Learned, &mut FlopLedger::new()).unwrap();
        let j = tr.to_json();
        assert_eq!(j["steps"][0]["spikes"][0], serde_json::json!([0]));
        assert_eq!(j["steps"][1]["awake"], true);
    }
}
