//! Computes MAE, RMSE, adjusted R² and MAPE for a small hand-made forecast
//! and prints the report in both output formats.
//!
//! ```text
//! cargo run --example evaluate_metrics
//! ```

use sentiment_forecast::eval::{compute_metrics, report_csv, report_json};

fn main() -> sentiment_forecast::Result<()> {
    let actual = [101.0, 103.5, 102.0, 106.0, 108.5, 107.0, 110.0, 111.5];
    let forecast = [100.2, 102.9, 103.1, 105.2, 107.9, 108.3, 109.1, 112.4];

    let mut report = compute_metrics(&actual, &forecast, 2)?;
    report.dataset = "demo".into();
    report.model = "hand".into();
    println!("MAE {:.4}  RMSE {:.4}  R2 {:.4}  R2a {:.4}  MAPE {:.4}%", report.mae, report.rmse, report.r2, report.r2_adjusted, report.mape);
    print!("{}", String::from_utf8_lossy(&report_csv(std::slice::from_ref(&report))?));
    print!("{}", String::from_utf8_lossy(&report_json(&[report])?));
    Ok(())
}
