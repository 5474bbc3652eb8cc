use serde::{Deserialize, Serialize};

use super::frame::{DateRange, FeatureFrame};
use crate::error::{validation, Result};

/// Name under which the target's statistics are stored.
pub const TARGET_COLUMN: &str = "target";
/// Standard deviations below this are treated as constant columns.
pub const MIN_STD: f64 = 1e-12;

/// Per-column z-score statistics (feature columns followed by the target).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fit_range: DateRange,
}

impl ScalerParams {
    fn index_of(&self, column: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| validation(format!("scaler has no column {column:?}")))
    }

    fn check_frame(&self, frame: &FeatureFrame) -> Result<()> {
        let k = frame.width();
        if self.columns.len() != k + 1 || self.columns[..k] != frame.columns[..] {
            return Err(validation(format!(
                "scaler columns ({}) do not match frame columns ({})",
                self.columns.len() - 1,
                k
            )));
        }
        Ok(())
    }
}

/// Fits mean and population std on the rows dated inside `fit_range`.
pub fn fit_scaler(frame: &FeatureFrame, fit_range: DateRange) -> Result<ScalerParams> {
    let rows: Vec<usize> = (0..frame.len()).filter(|&i| fit_range.contains(frame.dates[i])).collect();
    if rows.is_empty() {
        return Err(validation(format!(
            "fit range {}..{} selects no rows",
            fit_range.start, fit_range.end
        )));
    }
    let n = rows.len() as f64;
    let k = frame.width();
    let mut mean = Vec::with_capacity(k + 1);
    let mut std = Vec::with_capacity(k + 1);
    let mut push = |values: &dyn Fn(usize) -> f64| {
        let m = rows.iter().map(|&i| values(i)).sum::<f64>() / n;
        let var = rows.iter().map(|&i| (values(i) - m).powi(2)).sum::<f64>() / n;
        let s = var.sqrt();
        mean.push(m);
        std.push(if s < MIN_STD { 1.0 } else { s });
    };
    for j in 0..k {
        push(&|i| frame.values[[i, j]]);
    }
    push(&|i| frame.target[i]);

    let mut columns = frame.columns.clone();
    columns.push(TARGET_COLUMN.into());
    Ok(ScalerParams { columns, mean, std, fit_range })
}

/// Standardises every feature column and the target.
pub fn apply_scaler(frame: &FeatureFrame, params: &ScalerParams) -> Result<FeatureFrame> {
    params.check_frame(frame)?;
    let k = frame.width();
    let mut out = frame.clone();
    for ((_, j), v) in out.values.indexed_iter_mut() {
        *v = (*v - params.mean[j]) / params.std[j];
    }
    for v in &mut out.target {
        *v = (*v - params.mean[k]) / params.std[k];
    }
    Ok(out)
}

/// Maps standardised values of `column` back to original units.
pub fn inverse_scale(values: &[f64], params: &ScalerParams, column: &str) -> Result<Vec<f64>> {
    let j = params.index_of(column)?;
    Ok(values.iter().map(|z| z * params.std[j] + params.mean[j]).collect())
}

/// Standardises raw values of `column`.
pub fn scale_values(values: &[f64], params: &ScalerParams, column: &str) -> Result<Vec<f64>> {
    let j = params.index_of(column)?;
    Ok(values.iter().map(|x| (x - params.mean[j]) / params.std[j]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn frame(cols: &[&[f64]], target: &[f64]) -> FeatureFrame {
        let n = target.len();
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        FeatureFrame {
            dates: (0..n).map(|i| start + chrono::Days::new(i as u64)).collect(),
            columns: (0..cols.len()).map(|j| format!("c{j}")).collect(),
            values: Array2::from_shape_fn((n, cols.len()), |(i, j)| cols[j][i]),
            target: target.to_vec(),
        }
    }

    #[test]
    fn two_point_and_constant_columns() {
        let f = frame(&[&[0.0, 2.0], &[5.0, 5.0]], &[1.0, 3.0]);
        let p = fit_scaler(&f, f.date_range().unwrap()).unwrap();
        assert_eq!((p.mean[0], p.std[0]), (1.0, 1.0));
        assert_eq!(p.std[1], 1.0);
        let s = apply_scaler(&f, &p).unwrap();
        assert_eq!(s.values.column(0).to_vec(), vec![-1.0, 1.0]);
        assert_eq!(s.values.column(1).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn known_mean_std_round_trip() {
        let f = frame(&[&[8.0, 12.0]], &[8.0, 12.0]);
        let p = fit_scaler(&f, f.date_range().unwrap()).unwrap();
        assert_eq!((p.mean[0], p.std[0]), (10.0, 2.0));
        assert_eq!(scale_values(&[14.0], &p, "c0").unwrap(), vec![2.0]);
        assert_eq!(inverse_scale(&[2.0], &p, "target").unwrap(), vec![14.0]);
    }

    #[test]
    fn fit_range_restricts_rows() {
        let f = frame(&[&[0.0, 2.0, 100.0]], &[0.0, 0.0, 0.0]);
        let r = DateRange { start: f.dates[0], end: f.dates[1] };
        let p = fit_scaler(&f, r).unwrap();
        assert_eq!(p.mean[0], 1.0);
        let empty = DateRange { start: f.dates[2] + chrono::Days::new(1), end: f.dates[2] + chrono::Days::new(3) };
        assert!(fit_scaler(&f, empty).is_err());
    }

    #[test]
    fn mismatched_frames_rejected() {
        let f = frame(&[&[0.0, 2.0]], &[1.0, 3.0]);
        let g = frame(&[&[0.0, 2.0], &[1.0, 1.0]], &[1.0, 3.0]);
        let p = fit_scaler(&f, f.date_range().unwrap()).unwrap();
        assert!(apply_scaler(&g, &p).is_err());
        assert!(inverse_scale(&[1.0], &p, "nope").is_err());
    }

    proptest! {
        #[test]
        fn apply_then_inverse_is_identity(rows in prop::collection::vec((-1e4f64..1e4, -1.0f64..1.0, 0.0f64..1e6), 2..30)) {
            let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let t: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let f = frame(&[&a, &b], &t);
            let p = fit_scaler(&f, f.date_range().unwrap()).unwrap();
            let s = apply_scaler(&f, &p).unwrap();
            for (j, name) in ["c0", "c1"].iter().enumerate() {
                let back = inverse_scale(&s.values.column(j).to_vec(), &p, name).unwrap();
                for (x, y) in back.iter().zip(f.values.column(j)) {
                    prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
                }
            }
            let back = inverse_scale(&s.target, &p, TARGET_COLUMN).unwrap();
            for (x, y) in back.iter().zip(&t) {
                prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }
}
