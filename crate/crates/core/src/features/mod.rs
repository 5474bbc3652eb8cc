//! Feature engineering: daily aggregation, gap imputation, moving averages,
//! scaling, chronological splitting and windowing.

pub mod ewma;
pub mod frame;
pub mod scaler;
pub mod spline;

pub use ewma::{ewma, ewma_with, EwmaMode, EWMA_SPANS};
pub use frame::{
    aggregate_daily, align_to_trading_days, assemble_feature_frame, assemble_price_frame, bars_on_dates,
    chrono_split, equalize_coverage, impute_spline, make_windows, price_columns, sentiment_columns, split_index,
    split_windows, DailySentiment, DateRange, FeatureFrame, WindowedSet, SENTIMENT_CHANNELS,
};
pub use scaler::{apply_scaler, fit_scaler, inverse_scale, scale_values, ScalerParams, TARGET_COLUMN};
pub use spline::NaturalSpline;
