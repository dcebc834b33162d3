//! Benchmark generation and probing for exact multi-digit multiplication.

pub mod arith;
pub mod backend;
pub mod cost;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod hash;
pub mod probe;
pub mod render;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod trace;

pub use arith::{Operand, Problem};
pub use cost::{CostParams, HeuristicKind};
pub use error::{Error, Result};
pub use rng::SeededRng;

/// Version string embedded in every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type LogisticFit64 = stats::LogisticFit<f64>;
pub type LogisticFit32 = stats::LogisticFit<f32>;
pub type ErrorRateFit64 = stats::ErrorRateFit<f64>;
pub type ErrorRateFit32 = stats::ErrorRateFit<f32>;
pub type ProbeResult64 = probe::ProbeResult<f64>;
pub type ProbeResult32 = probe::ProbeResult<f32>;
pub type ContrastiveResult64 = probe::ContrastiveResult<f64>;
pub type LowRankUpdate64 = geometry::LowRankUpdate<f64>;
pub type LowRankUpdate32 = geometry::LowRankUpdate<f32>;
pub type SimilarityReport64 = geometry::SimilarityReport<f64>;
