//! Event-driven multiply/add accounting and classification metrics.
//!
//! One flop per multiplication and one per addition. Synaptic work is charged
//! only for inputs that carry an event; threshold comparisons and pulse
//! generation are free.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    InputMatmul,
    HiddenMatmul,
    Decay,
    Controller,
    Pulses,
}

impl Component {
    pub const ALL: [Component; 5] = [
        Component::InputMatmul,
        Component::HiddenMatmul,
        Component::Decay,
        Component::Controller,
        Component::Pulses,
    ];

    fn idx(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::InputMatmul => "input-matmul",
            Component::HiddenMatmul => "hidden-matmul",
            Component::Decay => "decay",
            Component::Controller => "controller",
            Component::Pulses => "pulses",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateState {
    Awake,
    Hibernating,
}

impl GateState {
    pub fn from_gate(awake: bool) -> Self {
        if awake {
            GateState::Awake
        } else {
            GateState::Hibernating
        }
    }

    fn idx(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub mults: u64,
    pub adds: u64,
}

impl OpCount {
    pub fn flops(&self) -> u64 {
        self.mults + self.adds
    }
}

impl Add for OpCount {
    type Output = OpCount;
    fn add(self, o: OpCount) -> OpCount {
        OpCount {
            mults: self.mults + o.mults,
            adds: self.adds + o.adds,
        }
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, o: OpCount) {
        *self = *self + o;
    }
}

/// Multiply/add counters split by network component and gate state.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlopLedger {
    counts: [[OpCount; 2]; 5],
}

impl FlopLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, tag: Component, state: GateState, ops: OpCount) {
        self.counts[tag.idx()][state.idx()] += ops;
    }

    /// Charges `W v` for a `rows x cols` matrix when `active` entries of `v` are nonzero:
    /// one multiply per row and active input, `active - 1` accumulating adds per row,
    /// and one add per row to merge into the membrane potential.
    pub fn charge_matmul_event_driven(
        &mut self,
        (rows, cols): (usize, usize),
        active: usize,
        tag: Component,
        state: GateState,
    ) {
        debug_assert!(active <= cols, "{active} active inputs for {cols} columns");
        if active == 0 {
            return;
        }
        let r = rows as u64;
        let n = active as u64;
        self.charge(
            tag,
            state,
            OpCount {
                mults: r * n,
                adds: r * (n - 1) + r,
            },
        );
    }

    /// Leak and reset for `size` neurons: `tau * u` and `* (1 - z)` are two
    /// multiplies, `1 - z` is one add.
    pub fn charge_decay(&mut self, size: usize, tag: Component, state: GateState) {
        let s = size as u64;
        self.charge(
            tag,
            state,
            OpCount {
                mults: 2 * s,
                adds: s,
            },
        );
    }

    pub fn get(&self, tag: Component, state: GateState) -> OpCount {
        self.counts[tag.idx()][state.idx()]
    }

    pub fn component(&self, tag: Component) -> OpCount {
        self.get(tag, GateState::Awake) + self.get(tag, GateState::Hibernating)
    }

    pub fn state(&self, state: GateState) -> OpCount {
        Component::ALL
            .iter()
            .fold(OpCount::default(), |acc, &c| acc + self.get(c, state))
    }

    pub fn total(&self) -> OpCount {
        self.state(GateState::Awake) + self.state(GateState::Hibernating)
    }

    pub fn total_mflops(&self) -> f64 {
        self.total().flops() as f64 / 1e6
    }

    pub fn merge(&mut self, other: &FlopLedger) {
        for c in 0..5 {
            for s in 0..2 {
                self.counts[c][s] += other.counts[c][s];
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut components = serde_json::Map::new();
        for c in Component::ALL {
            components.insert(
                c.name().to_string(),
                serde_json::json!({
                    "awake": self.get(c, GateState::Awake),
                    "hibernating": self.get(c, GateState::Hibernating),
                }),
            );
        }
        let total = self.total();
        serde_json::json!({
            "components": components,
            "total": { "mults": total.mults, "adds": total.adds },
            "mflops": self.total_mflops(),
        })
    }
}

impl AddAssign<&FlopLedger> for FlopLedger {
    fn add_assign(&mut self, rhs: &FlopLedger) {
        self.merge(rhs);
    }
}

impl<'a> std::iter::Sum<&'a FlopLedger> for FlopLedger {
    fn sum<I: Iterator<Item = &'a FlopLedger>>(iter: I) -> FlopLedger {
        let mut out = FlopLedger::new();
        for l in iter {
            out.merge(l);
        }
        out
    }
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Mean awake fraction over a collection of awake masks.
pub fn awake_fraction<'a, I>(masks: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a [bool]>,
{
    let (mut awake, mut total) = (0usize, 0usize);
    for m in masks {
        awake += m.iter().filter(|&&b| b).count();
        total += m.len();
    }
    if total == 0 {
        return Err(Error::InvalidArgument("awake fraction of no timesteps".into()));
    }
    Ok(awake as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: GateState = GateState::Awake;

    #[test]
    fn matmul_charges() {
        let mut l = FlopLedger::new();
        l.charge_matmul_event_driven((4, 10), 0, Component::InputMatmul, A);
        assert_eq!(l.total(), OpCount::default());
        l.charge_matmul_event_driven((4, 10), 1, Component::InputMatmul, A);
        assert_eq!(l.total(), OpCount { mults: 4, adds: 4 });
        let mut l = FlopLedger::new();
        l.charge_matmul_event_driven((4, 10), 3, Component::InputMatmul, A);
        assert_eq!(l.total(), OpCount { mults: 12, adds: 12 });
    }

    #[test]
    fn decay_charges() {
        let mut l = FlopLedger::new();
        l.charge_decay(0, Component::Decay, A);
        assert_eq!(l.total_mflops(), 0.0);
        l.charge_decay(10, Component::Decay, A);
        assert_eq!(l.total(), OpCount { mults: 20, adds: 10 });

        let mut l = FlopLedger::new();
        for _ in 0..300 {
            l.charge_decay(128, Component::Decay, GateState::Hibernating);
        }
        assert_eq!(l.component(Component::Decay).mults, 300 * 2 * 128);
    }

    #[test]
    fn dense_charge_equals_all_active_event_charge() {
        let (r, c) = (7, 5);
        let mut dense = FlopLedger::new();
        dense.charge(
            Component::HiddenMatmul,
            A,
            OpCount {
                mults: (r * c) as u64,
                adds: (r * c) as u64,
            },
        );
        let mut ev = FlopLedger::new();
        ev.charge_matmul_event_driven((r, c), c, Component::HiddenMatmul, A);
        assert_eq!(dense, ev);
    }

    #[test]
    fn merge_is_additive_and_commutative() {
        let mut a = FlopLedger::new();
        a.charge_decay(3, Component::Decay, A);
        let mut b = FlopLedger::new();
        b.charge_matmul_event_driven((2, 2), 2, Component::Pulses, GateState::Hibernating);
        let ab: FlopLedger = [&a, &b].into_iter().sum();
        let ba: FlopLedger = [&b, &a].into_iter().sum();
        assert_eq!(ab, ba);
        assert_eq!(ab.total(), a.total() + b.total());
        assert_eq!(FlopLedger::new().total_mflops(), 0.0);
    }

    #[test]
    fn json_has_full_breakdown() {
        let mut l = FlopLedger::new();
        l.charge_decay(1, Component::Controller, GateState::Hibernating);
        let j = l.to_json();
        assert_eq!(j["components"]["controller"]["hibernating"]["mults"], 2);
        assert_eq!(j["components"]["input-matmul"]["awake"]["adds"], 0);
        assert_eq!(j["total"]["adds"], 1);
    }

    #[test]
    fn accuracy_and_awake_fraction() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0], &[1, 2]).unwrap(), 0.5);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
        let all = vec![true; 300];
        assert_eq!(awake_fraction([all.as_slice()]).unwrap(), 1.0);
        let half = [true, false];
        assert_eq!(awake_fraction([&half[..], &all[..2]]).unwrap(), 0.75);
        assert!(awake_fraction(std::iter::empty::<&[bool]>()).is_err());
    }
}
