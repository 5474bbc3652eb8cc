//! Natural cubic spline through arbitrary increasing knots.

use crate::error::{validation, Result};

/// Piecewise cubic interpolant with zero second derivative at both ends.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    moments: Vec<f64>,
}

impl NaturalSpline {
    /// Fits the spline by solving the tridiagonal moment system with the
    /// Thomas algorithm.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(validation(format!("{} knots but {} values", xs.len(), ys.len())));
        }
        let n = xs.len();
        if n < 2 {
            return Err(validation("a spline needs at least 2 knots"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) || xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(validation("knots must be finite and strictly increasing"));
        }

        let mut moments = vec![0.0; n];
        if n > 2 {
            let m = n - 2;
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let slope: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

            // row k (knot k + 1): h[k] M[k] + 2(h[k] + h[k+1]) M[k+1] + h[k+1] M[k+2] = 6 (slope[k+1] - slope[k])
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for k in 0..m {
                diag[k] = 2.0 * (h[k] + h[k + 1]);
                rhs[k] = 6.0 * (slope[k + 1] - slope[k]);
            }
            for k in 1..m {
                let w = h[k] / diag[k - 1];
                diag[k] -= w * h[k];
                rhs[k] -= w * rhs[k - 1];
            }
            moments[m] = rhs[m - 1] / diag[m - 1];
            for k in (0..m - 1).rev() {
                moments[k + 1] = (rhs[k] - h[k + 1] * moments[k + 2]) / diag[k];
            }
        }
        Ok(NaturalSpline { xs: xs.to_vec(), ys: ys.to_vec(), moments })
    }

    /// Evaluates the spline; points outside the knot range use the end
    /// segments.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let u = 1.0 - t;
        let linear = u * self.ys[i] + t * self.ys[i + 1];
        let curve = h * h / 6.0 * ((u * u * u - u) * self.moments[i] + (t * t * t - t) * self.moments[i + 1]);
        linear + curve
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }
}
