use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
}

fn check(y_true: &[i8], y_pred: &[i8]) -> Result<()> {
    if y_true.is_empty() {
        return Err(Error::Empty("metric inputs"));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    if let Some(bad) = y_true.iter().chain(y_pred).find(|&&v| v != 1 && v != -1) {
        return Err(Error::InvalidParameter(format!("labels must be ±1, found {bad}")));
    }
    Ok(())
}

pub fn accuracy(y_true: &[i8], y_pred: &[i8]) -> Result<f64> {
    check(y_true, y_pred)?;
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// `(sensitivity + specificity) / 2`; needs both classes in `y_true`.
pub fn balanced_accuracy(y_true: &[i8], y_pred: &[i8]) -> Result<f64> {
    check(y_true, y_pred)?;
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == 1 {
            pos += 1;
            tp += usize::from(p == 1);
        } else {
            neg += 1;
            tn += usize::from(p == -1);
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((tp as f64 / pos as f64 + tn as f64 / neg as f64) / 2.0)
}

pub fn metrics(y_true: &[i8], y_pred: &[i8]) -> Result<Metrics> {
    Ok(Metrics {
        accuracy: accuracy(y_true, y_pred)?,
        balanced_accuracy: balanced_accuracy(y_true, y_pred)?,
    })
}
