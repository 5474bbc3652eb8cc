//! Error metrics in original price units and report writers.

use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{contract, validation, Result};
use crate::features::{inverse_scale, ScalerParams, WindowedSet, TARGET_COLUMN};
use crate::nn::{predict, Network};

fn six_places<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    let r = (x * 1e6).round() / 1e6;
    // avoid "-0.0" in reports
    s.serialize_f64(if r == 0.0 { 0.0 } else { r })
}

/// Test-set metrics for one (dataset, model) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub model: String,
    pub n: usize,
    pub p: usize,
    #[serde(serialize_with = "six_places")]
    pub mae: f64,
    #[serde(serialize_with = "six_places")]
    pub rmse: f64,
    #[serde(serialize_with = "six_places")]
    pub r2_adjusted: f64,
    #[serde(rename = "mape_percent", serialize_with = "six_places")]
    pub mape: f64,
    /// Unadjusted coefficient of determination.
    #[serde(skip)]
    pub r2: f64,
}

/// MAE, RMSE, MAPE (percent) and adjusted R² with `p` regressors.
pub fn compute_metrics(y_true: &[f64], y_pred: &[f64], p: usize) -> Result<EvalReport> {
    let n = y_true.len();
    if y_pred.len() != n {
        return Err(contract(format!("{n} targets but {} predictions", y_pred.len())));
    }
    if n < 2 {
        return Err(validation(format!("need at least 2 samples, got {n}")));
    }
    if n <= p + 1 {
        return Err(validation(format!("adjusted R² undefined: n = {n} must exceed p + 1 = {}", p + 1)));
    }
    if y_true.iter().chain(y_pred).any(|v| !v.is_finite()) {
        return Err(validation("non-finite value in targets or predictions"));
    }
    if let Some(i) = y_true.iter().position(|y| *y == 0.0) {
        return Err(validation(format!("MAPE undefined: y_true[{i}] is zero")));
    }
    let nf = n as f64;
    let mean = y_true.iter().sum::<f64>() / nf;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(validation("R² undefined: targets are constant"));
    }
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut pct = 0.0;
    for (y, yh) in y_true.iter().zip(y_pred) {
        let e = y - yh;
        abs += e.abs();
        sq += e * e;
        pct += 100.0 * e.abs() / y.abs();
    }
    let r2 = 1.0 - sq / ss_tot;
    Ok(EvalReport {
        dataset: String::new(),
        model: String::new(),
        n,
        p,
        mae: abs / nf,
        rmse: (sq / nf).sqrt(),
        mape: pct / nf,
        r2_adjusted: 1.0 - (1.0 - r2) * (nf - 1.0) / (nf - p as f64 - 1.0),
        r2,
    })
}

/// Predictions and actual targets of a windowed test set, in price units.
pub fn predict_prices(network: &Network, windows: &WindowedSet, scaler: &ScalerParams) -> Result<(Vec<f64>, Vec<f64>)> {
    if scaler.columns.len() != windows.width() + 1 || scaler.columns.last().map(String::as_str) != Some(TARGET_COLUMN) {
        return Err(contract(format!(
            "scaler covers {} feature columns, windows have {}",
            scaler.columns.len().saturating_sub(1),
            windows.width()
        )));
    }
    let scaled = predict(network, windows)?;
    let pred = inverse_scale(&scaled, scaler, TARGET_COLUMN)?;
    let actual = inverse_scale(&windows.targets, scaler, TARGET_COLUMN)?;
    Ok((actual, pred))
}

/// Runs the model over scaled test windows and scores it in price units.
pub fn evaluate_model(
    network: &Network,
    windows: &WindowedSet,
    scaler: &ScalerParams,
    p: usize,
    dataset: &str,
    model: &str,
) -> Result<EvalReport> {
    let (actual, pred) = predict_prices(network, windows, scaler)?;
    let mut report = compute_metrics(&actual, &pred, p)?;
    report.dataset = dataset.into();
    report.model = model.into();
    Ok(report)
}

pub fn report_json(reports: &[EvalReport]) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(reports)?;
    out.push(b'\n');
    Ok(out)
}

pub fn report_csv(reports: &[EvalReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "model", "n", "p", "mae", "rmse", "r2_adjusted", "mape_percent"])?;
    for r in reports {
        w.write_record([
            r.dataset.clone(),
            r.model.clone(),
            r.n.to_string(),
            r.p.to_string(),
            format!("{:.6}", r.mae),
            format!("{:.6}", r.rmse),
            format!("{:.6}", r.r2_adjusted),
            format!("{:.6}", r.mape),
        ])?;
    }
    w.into_inner().map_err(|e| contract(e.to_string()))
}

/// Writes the combined report as `report.json` and `report.csv` in `dir`.
pub fn write_reports(reports: &[EvalReport], dir: &Path) -> Result<()> {
    crate::io_util::write_atomic(&dir.join("report.json"), &report_json(reports)?)?;
    crate::io_util::write_atomic(&dir.join("report.csv"), &report_csv(reports)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_fixture() {
        let r = compute_metrics(&[100.0, 200.0], &[110.0, 190.0], 0).unwrap();
        assert_eq!(r.mae, 10.0);
        assert_eq!(r.rmse, 10.0);
        assert_eq!(r.mape, 7.5);
        // ss_tot = 2 * 50^2, ss_res = 200
        assert_eq!(r.r2, 1.0 - 200.0 / 5000.0);
        assert_eq!(r.r2_adjusted, r.r2);
    }

    #[test]
    fn perfect_predictions() {
        let y = [3.0, 5.0, 4.0, 8.0];
        let r = compute_metrics(&y, &y, 1).unwrap();
        assert_eq!((r.mae, r.rmse, r.mape, r.r2_adjusted), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn mean_predictor_has_non_positive_r2() {
        let y = [1.0, 2.0, 3.0, 4.0, 10.0];
        let m = y.iter().sum::<f64>() / 5.0;
        let r = compute_metrics(&y, &[m; 5], 2).unwrap();
        assert!(r.r2.abs() < 1e-15);
        assert!(r.r2_adjusted <= 0.0);
    }

    #[test]
    fn negative_r2_adjusted_not_clamped() {
        let r = compute_metrics(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0], 1).unwrap();
        assert!(r.r2_adjusted < -1.0);
    }

    #[test]
    fn undefined_cases_rejected() {
        assert!(compute_metrics(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], 0).is_err());
        assert!(compute_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], 2).is_err());
        assert!(compute_metrics(&[1.0, 2.0], &[1.0], 0).is_err());
        assert!(compute_metrics(&[5.0, 5.0, 5.0], &[5.0, 5.0, 4.0], 0).is_err());
    }

    #[test]
    fn json_uses_six_decimals_and_fixed_keys() {
        let mut r = compute_metrics(&[100.0, 200.0, 300.0], &[101.0, 199.0, 300.5], 1).unwrap();
        r.mae = 1.23456789;
        r.dataset = "Y".into();
        r.model = "gru".into();
        let v: serde_json::Value = serde_json::from_slice(&report_json(&[r]).unwrap()).unwrap();
        let row = v[0].as_object().unwrap();
        let keys: Vec<&str> = row.keys().map(String::as_str).collect();
        assert_eq!(keys, ["dataset", "mae", "mape_percent", "model", "n", "p", "r2_adjusted", "rmse"]);
        assert_eq!(row["mae"].as_f64().unwrap(), 1.234568);
    }

    #[test]
    fn csv_layout() {
        let mut r = compute_metrics(&[100.0, 200.0], &[110.0, 190.0], 0).unwrap();
        r.dataset = "Y+T".into();
        r.model = "lstm".into();
        let text = String::from_utf8(report_csv(&[r]).unwrap()).unwrap();
        assert_eq!(
            text,
            "dataset,model,n,p,mae,rmse,r2_adjusted,mape_percent\nY+T,lstm,2,0,10.000000,10.000000,0.960000,7.500000\n"
        );
    }

    fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (4usize..40).prop_flat_map(|n| {
            (prop::collection::vec(1.0f64..1000.0, n), prop::collection::vec(-50.0f64..50.0, n))
                .prop_map(|(y, noise)| {
                    let yh = y.iter().zip(&noise).map(|(a, b)| a + b).collect();
                    (y, yh)
                })
        })
    }

    proptest! {
        #[test]
        fn mae_bounded_by_rmse((y, yh) in pairs()) {
            let r = compute_metrics(&y, &yh, 1).unwrap();
            prop_assert!(r.mae <= r.rmse * (1.0 + 1e-12));
        }

        #[test]
        fn permutation_invariant((y, yh) in pairs(), rot in 0usize..40) {
            let k = rot % y.len();
            let mut y2 = y.clone();
            let mut yh2 = yh.clone();
            y2.rotate_left(k);
            yh2.rotate_left(k);
            let a = compute_metrics(&y, &yh, 1).unwrap();
            let b = compute_metrics(&y2, &yh2, 1).unwrap();
            for (u, v) in [(a.mae, b.mae), (a.rmse, b.rmse), (a.mape, b.mape), (a.r2_adjusted, b.r2_adjusted)] {
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
            }
        }

        #[test]
        fn adjustment_lowers_imperfect_r2((y, yh) in pairs()) {
            let r = compute_metrics(&y, &yh, 1).unwrap();
            if r.r2 < 1.0 {
                prop_assert!(r.r2_adjusted <= r.r2);
            }
        }
    }
}
