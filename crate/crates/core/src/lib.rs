//! Next-day closing-price forecasting from daily OHLCV history fused with
//! aggregated social-media sentiment.
//!
//! The pipeline runs ingest → sentiment scoring → feature engineering →
//! recurrent-network training → evaluation; [`runner`] wires the stages
//! together from declarative experiment configs.

pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
mod io_util;
pub mod nn;
pub mod runner;
pub mod seed;
pub mod sentiment;
pub mod synthetic;

pub use error::{Error, Result};
pub use io_util::write_atomic;
