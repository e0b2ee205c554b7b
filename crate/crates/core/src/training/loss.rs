use crate::dynamics::ForwardTrace;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Squared distance between the one-hot label and the time-averaged voted output.
pub fn classification_loss<S: Scalar>(trace: &ForwardTrace<S>, label: usize, voting: &Matrix<S>) -> Result<S> {
    let rates = trace.class_rates(voting);
    one_hot_sq_error(&rates, label)
}

pub(crate) fn one_hot_sq_error<S: Scalar>(rates: &[S], label: usize) -> Result<S> {
    if label >= rates.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            rates.len()
        )));
    }
    Ok(rates
        .iter()
        .enumerate()
        .map(|(c, &r)| {
            let d = S::from_bit(c == label) - r;
            d * d
        })
        .sum())
}

/// `lambda * sum(mask) / T`.
pub fn penalty_loss<S: Scalar>(awake_mask: &[S], lambda: S) -> S {
    if awake_mask.is_empty() {
        return S::zero();
    }
    lambda * awake_mask.iter().copied().sum::<S>() / S::lit(awake_mask.len() as f64)
}

/// Derivative of [`penalty_loss`] with respect to each mask entry: `lambda / T` everywhere.
pub fn penalty_grad<S: Scalar>(steps: usize, lambda: S) -> Vec<S> {
    if steps == 0 {
        return Vec::new();
    }
    vec![lambda / S::lit(steps as f64); steps]
}
