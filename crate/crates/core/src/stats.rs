//! Per-window medians and accuracy summaries.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::text_model::DistanceProfile;

/// Median of `values`; the mean of the two middle values for even length.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_unstable_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

/// Window-by-window median of equally long estimates.
pub fn median_profile(runs: &[DistanceProfile]) -> Result<DistanceProfile> {
    let Some(first) = runs.first() else {
        return Err(Error::Parameter("median of zero executions".into()));
    };
    let len = first.len();
    if let Some(bad) = runs.iter().find(|r| r.len() != len) {
        return Err(Error::LengthMismatch {
            left: len,
            right: bad.len(),
        });
    }
    let mut column = vec![0.0; runs.len()];
    let values = (0..len)
        .map(|j| {
            for (slot, r) in column.iter_mut().zip(runs) {
                *slot = r.values()[j];
            }
            median(&mut column)
        })
        .collect();
    Ok(DistanceProfile::estimate(values))
}

/// Slack on the `(1 +- eps)` boundary for floating-point products.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorStats {
    pub fraction_within_epsilon: f64,
    pub max_relative_error: f64,
    pub p95_relative_error: f64,
    pub mean_relative_error: f64,
}

/// Relative error of one window. Zero-distance windows are exact only when
/// the estimate is zero too.
pub fn relative_error(estimate: f64, exact: f64) -> f64 {
    if exact == 0.0 {
        if estimate == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (estimate - exact).abs() / exact
    }
}

pub fn error_stats(
    estimate: &DistanceProfile,
    exact: &DistanceProfile,
    epsilon: f64,
) -> Result<ErrorStats> {
    if estimate.len() != exact.len() {
        return Err(Error::LengthMismatch {
            left: estimate.len(),
            right: exact.len(),
        });
    }
    if exact.is_empty() {
        return Err(Error::Parameter("empty profiles".into()));
    }
    let mut rel: Vec<f64> = estimate
        .values()
        .iter()
        .zip(exact.values())
        .map(|(&e, &d)| relative_error(e, d))
        .collect();
    let within = rel.iter().filter(|&&r| r <= epsilon + BOUNDARY_SLACK).count();
    rel.sort_unstable_by(f64::total_cmp);
    let count = rel.len();
    // nearest-rank percentile
    let p95_rank = ((0.95 * count as f64).ceil() as usize).clamp(1, count);
    Ok(ErrorStats {
        fraction_within_epsilon: within as f64 / count as f64,
        max_relative_error: rel[count - 1],
        p95_relative_error: rel[p95_rank - 1],
        mean_relative_error: rel.iter().sum::<f64>() / count as f64,
    })
}
