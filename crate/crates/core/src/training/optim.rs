use serde::{Deserialize, Serialize};

use crate::dynamics::ModelParams;
use crate::scalar::Scalar;

use super::bptt::GradientSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    /// Plain gradient descent.
    Sgd,
    /// Adaptive moment estimation.
    Adam,
}

/// Which parameter groups an update may touch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamMask {
    pub layers: bool,
    pub controller: bool,
    pub voting: bool,
}

impl ParamMask {
    fn allows(&self, group: usize, n_layers: usize) -> bool {
        if group < n_layers {
            self.layers
        } else if group < n_layers + 2 {
            self.controller
        } else {
            self.voting
        }
    }
}

pub(crate) fn param_slices_mut<S: Scalar>(p: &mut ModelParams<S>) -> Vec<&mut [S]> {
    let mut v: Vec<&mut [S]> = p.layer_weights.iter_mut().map(|m| m.as_mut_slice()).collect();
    v.push(&mut p.ctrl_wz);
    v.push(&mut p.ctrl_wo);
    v.push(p.voting.as_mut_slice());
    v
}

#[derive(Clone, Debug)]
pub struct Optimizer<S> {
    kind: OptimizerKind,
    lr: S,
    beta1: S,
    beta2: S,
    eps: S,
    step: i32,
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
}

impl<S: Scalar> Optimizer<S> {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ModelParams<S>) -> Self {
        let shapes: Vec<usize> = {
            let mut p = params.clone();
            param_slices_mut(&mut p).iter().map(|s| s.len()).collect()
        };
        Self {
            kind,
            lr: S::lit(lr),
            beta1: S::lit(0.9),
            beta2: S::lit(0.999),
            eps: S::lit(1e-8),
            step: 0,
            m: shapes.iter().map(|&n| vec![S::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![S::zero(); n]).collect(),
        }
    }

    pub fn update(&mut self, params: &mut ModelParams<S>, grads: &GradientSet<S>, mask: ParamMask) {
        let n_layers = params.layer_weights.len();
        self.step += 1;
        let bc1 = S::one() - self.beta1.powi(self.step);
        let bc2 = S::one() - self.beta2.powi(self.step);
        for (group, (p, g)) in param_slices_mut(params).into_iter().zip(grads.slices()).enumerate() {
            if !mask.allows(group, n_layers) {
                continue;
            }
            match self.kind {
                OptimizerKind::Sgd => {
                    for (w, &d) in p.iter_mut().zip(g) {
                        *w -= self.lr * d;
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.m[group], &mut self.v[group]);
                    for i in 0..p.len() {
                        let d = g[i];
                        m[i] = self.beta1 * m[i] + (S::one() - self.beta1) * d;
                        v[i] = self.beta2 * v[i] + (S::one() - self.beta2) * d * d;
                        let mh = m[i] / bc1;
                        let vh = v[i] / bc2;
                        p[i] -= self.lr * mh / (vh.sqrt() + self.eps);
                    }
                }
            }
        }
    }
}
