//! Basis-oriented time series aggregation for power system dispatch models.
//!
//! Hours whose optimal dual solution coincides can be replaced by their centroid without
//! changing the optimal objective. Under ramping, the unit of aggregation becomes a chunk of
//! consecutive hours joined by binding ramp rows.

pub mod aggregator;
pub mod basis;
pub mod enumerate;
mod error;
pub mod partition;
pub mod psom;
pub mod synth;
pub mod system;

pub use error::CoreError;
