//! Shared fixtures for the benchmarks.

use g3m_core::validation::engine::Resolution;
use g3m_core::{MarketModel, PoolState};

/// Balanced 30 bp pool.
pub fn pool() -> PoolState {
    PoolState::new(100.0, 100.0, 0.5, 0.997).expect("valid pool")
}

/// Relative variance 0.04, no drift.
pub fn model() -> MarketModel {
    MarketModel::constant(0.0, 0.0, 0.04, 0.0, 0.0)
}

pub fn resolution(kappa: f64) -> Resolution {
    Resolution::new(kappa).expect("kappa in (0, 1]")
}

/// Evenly spaced points strictly inside (0, 1).
pub fn interior(points: usize) -> Vec<f64> {
    (1..=points)
        .map(|i| i as f64 / (points + 1) as f64)
        .collect()
}
