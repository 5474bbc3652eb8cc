use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// Spans (in trading days) of the moving averages added to the frame.
pub const EWMA_SPANS: [usize; 4] = [3, 7, 14, 30];

/// Weighting convention of the moving average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EwmaMode {
    /// Finite-horizon weights `(1-a)^i` normalised by their sum.
    #[default]
    Adjusted,
    /// `y_t = a x_t + (1-a) y_{t-1}`, seeded with `y_0 = x_0`.
    Recursive,
}

/// Exponentially weighted moving average with `a = 2 / (span + 1)`.
pub fn ewma(series: &[f64], span: usize) -> Result<Vec<f64>> {
    ewma_with(series, span, EwmaMode::Adjusted)
}

pub fn ewma_with(series: &[f64], span: usize, mode: EwmaMode) -> Result<Vec<f64>> {
    if span == 0 {
        return Err(validation("ewma span must be at least 1"));
    }
    if series.is_empty() {
        return Err(validation("ewma of an empty series"));
    }
    let alpha = 2.0 / (span as f64 + 1.0);
    let decay = 1.0 - alpha;
    let mut out = Vec::with_capacity(series.len());
    match mode {
        EwmaMode::Adjusted => {
            let (mut num, mut den) = (0.0, 0.0);
            for &x in series {
                num = x + decay * num;
                den = 1.0 + decay * den;
                out.push(num / den);
            }
        }
        EwmaMode::Recursive => {
            let mut y = series[0];
            for &x in series {
                y = alpha * x + decay * y;
                out.push(y);
            }
        }
    }
    Ok(out)
}
