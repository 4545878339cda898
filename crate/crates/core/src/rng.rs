//! Reproducible random streams keyed by `(seed, path, purpose)`.
//!
//! Each path owns a handful of independent ChaCha streams, so results do not
//! depend on how paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Brownian increments driving the relative price.
    Price = 0,
    /// Increments orthogonal to the relative price (the numeraire leg).
    Orthogonal = 1,
    /// Stochastic volatility and drift coefficients.
    Coefficients = 2,
    /// Arbitrageur arrival times.
    Arrivals = 3,
}

const PURPOSES: u64 = 8;

pub fn stream(seed: u64, path: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path.wrapping_mul(PURPOSES).wrapping_add(purpose as u64));
    rng
}

/// Pairwise summation; the result is independent of thread count because
/// the reduction tree depends only on the slice length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
