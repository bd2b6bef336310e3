use serde::{Deserialize, Serialize};

use super::run::Trace;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AveragingWeights {
    Uniform,
    /// `w_t = (1/α_t)(1 − α_t (A + M C))` with constant `A`, `M`, `C`.
    StepWeighted { a: f64, m: f64, c: f64 },
    /// Explicit unnormalized weights, one per averaged iterate.
    Custom(Vec<f64>),
}

/// `x̄_k = Σ_{t<k} w_t x_t / Σ_{t<k} w_t` over the iterates `x_0, …, x_{k−1}`
/// of a trace recorded with `keep_iterates`, where `k` is the step count.
pub fn averaged_iterate(trace: &Trace, weights: &AveragingWeights) -> Result<Vec<f64>> {
    let k = trace.stepsizes.len();
    if trace.iterates.len() < k.max(1) {
        return Err(Error::InvalidConfig(
            "averaging needs the iterates kept at every step".into(),
        ));
    }
    // A run with no steps averages its single starting point.
    let count = k.max(1);
    let points = &trace.iterates[..count];
    let w: Vec<f64> = match weights {
        AveragingWeights::Uniform => vec![1.0; count],
        AveragingWeights::StepWeighted { a, m, c } => {
            if k == 0 {
                vec![1.0]
            } else {
                trace
                    .stepsizes
                    .iter()
                    .map(|alpha| (1.0 / alpha) * (1.0 - alpha * (a + m * c)))
                    .collect()
            }
        }
        AveragingWeights::Custom(w) => {
            check_len(count, w.len())?;
            w.clone()
        }
    };
    weighted_mean(points, &w)
}

pub(crate) fn weighted_mean(points: &[Vec<f64>], w: &[f64]) -> Result<Vec<f64>> {
    if let Some((t, v)) = w.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "averaging weight {t} is {v}; the stepsize exceeds the cap"
        )));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidConfig("averaging weights sum to zero".into()));
    }
    let d = points[0].len();
    let mut out = vec![0.0; d];
    for (p, wt) in points.iter().zip(w) {
        for (o, v) in out.iter_mut().zip(p) {
            *o += wt / total * v;
        }
    }
    Ok(out)
}
