//! Stand-ins for the derivative of the step function in the backward pass.

use serde::{Deserialize, Serialize};

use crate::dynamics::logistic;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rectangular window of height `1/epsilon` and width `epsilon` around the threshold.
#[inline]
pub fn rect_surrogate<S: Scalar>(u: S, v_th: S, epsilon: S) -> S {
    if (u - v_th).abs() < epsilon / S::lit(2.0) {
        S::one() / epsilon
    } else {
        S::zero()
    }
}

/// `1 / (1 + exp((u - v_th) / delta))`, evaluated without overflow.
///
/// Decreasing in `u`: close to 1 well below threshold, 1/2 at threshold.
#[inline]
pub fn sigmoid_surrogate<S: Scalar>(u: S, v_th: S, delta: S) -> S {
    logistic(-(u - v_th) / delta)
}

/// Derivative of `sigma((u - v_th) / delta)` with respect to `u`; a symmetric bump.
#[inline]
pub fn logistic_derivative<S: Scalar>(u: S, v_th: S, delta: S) -> S {
    let s = logistic((u - v_th) / delta);
    s * (S::one() - s) / delta
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    Rectangular,
    /// The decreasing logistic used for the controller, with annealed width.
    Sigmoid,
    /// Bump-shaped `d sigma / du` with annealed width.
    LogisticDerivative,
}

/// A surrogate with its width fixed, as used for one backward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Surrogate<S> {
    Rectangular { epsilon: S },
    Sigmoid { delta: S },
    LogisticDerivative { delta: S },
}

impl<S: Scalar> Surrogate<S> {
    #[inline]
    pub fn eval(&self, u: S, v_th: S) -> S {
        match *self {
            Surrogate::Rectangular { epsilon } => rect_surrogate(u, v_th, epsilon),
            Surrogate::Sigmoid { delta } => sigmoid_surrogate(u, v_th, delta),
            Surrogate::LogisticDerivative { delta } => logistic_derivative(u, v_th, delta),
        }
    }
}

/// Surrogate settings including the annealing schedule of the width `delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    pub kind: SurrogateKind,
    pub epsilon: f64,
    pub delta: f64,
    pub delta_decay: f64,
    pub anneal_every: usize,
}

impl SurrogateConfig {
    pub fn rectangular(epsilon: f64) -> Self {
        Self {
            kind: SurrogateKind::Rectangular,
            epsilon,
            delta: 1.0,
            delta_decay: 0.5,
            anneal_every: 10,
        }
    }

    pub fn sigmoid(delta: f64, delta_decay: f64, anneal_every: usize) -> Self {
        Self {
            kind: SurrogateKind::Sigmoid,
            epsilon: 1.0,
            delta,
            delta_decay,
            anneal_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.epsilon > 0.0) {
            return bad("surrogate epsilon must be positive");
        }
        if !(self.delta > 0.0) {
            return bad("surrogate delta must be positive");
        }
        if !(self.delta_decay > 0.0 && self.delta_decay < 1.0) {
            return bad("delta_decay must lie in (0, 1)");
        }
        if self.anneal_every == 0 {
            return bad("anneal_every must be >= 1");
        }
        Ok(())
    }

    /// `delta * delta_decay ^ floor(epoch / anneal_every)`, epochs counted from 0.
    pub fn delta_at(&self, epoch: usize) -> f64 {
        let decays = (epoch / self.anneal_every) as i32;
        self.delta * self.delta_decay.powi(decays)
    }

    /// The width in effect at `epoch`: epsilon for the rectangular kind, delta otherwise.
    pub fn width_at(&self, epoch: usize) -> f64 {
        match self.kind {
            SurrogateKind::Rectangular => self.epsilon,
            _ => self.delta_at(epoch),
        }
    }

    pub fn at_epoch<S: Scalar>(&self, epoch: usize) -> Surrogate<S> {
        match self.kind {
            SurrogateKind::Rectangular => Surrogate::Rectangular {
                epsilon: S::lit(self.epsilon),
            },
            SurrogateKind::Sigmoid => Surrogate::Sigmoid {
                delta: S::lit(self.delta_at(epoch)),
            },
            SurrogateKind::LogisticDerivative => Surrogate::LogisticDerivative {
                delta: S::lit(self.delta_at(epoch)),
            },
        }
    }
}
