//! Kolmogorov–Smirnov test of the simulated mispricing against its
//! stationary law under constant coefficients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{simulate_market_path, Resolution};
use crate::error::{domain, Result};
use crate::market::MarketModel;

/// Asymptotic 5% critical value of `√N · D`.
pub const KS_CRITICAL_5PCT: f64 = 1.358;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryConfig {
    pub mu: f64,
    pub sigma: f64,
    /// Band half-width.
    pub c: f64,
    pub paths: usize,
    pub samples_per_path: usize,
    /// Burn-in, in relaxation times `1/λ₁`.
    pub burn_in: f64,
    /// Spacing between retained samples, in relaxation times.
    pub stride: f64,
    pub resolution: Resolution,
    pub seed: u64,
    /// Multiple of the 5% critical value used as the pass threshold.
    pub threshold_factor: f64,
}

impl StationaryConfig {
    pub fn new(mu: f64, sigma: f64, c: f64, seed: u64) -> StationaryConfig {
        StationaryConfig {
            mu,
            sigma,
            c,
            paths: 250,
            samples_per_path: 10,
            burn_in: 5.0,
            stride: 5.0,
            resolution: Resolution { kappa: 0.02 },
            seed,
            threshold_factor: 1.5,
        }
    }

    pub fn theta(&self) -> f64 {
        2.0 * self.mu / (self.sigma * self.sigma)
    }

    /// Spectral gap `λ₁ = ½σ²((π/(2c))² + θ²/4)`.
    pub fn lambda1(&self) -> f64 {
        let th = self.theta();
        0.5 * self.sigma
            * self.sigma
            * ((std::f64::consts::PI / (2.0 * self.c)).powi(2) + 0.25 * th * th)
    }

    /// Stationary distribution function: uniform for `θ = 0`, truncated
    /// exponential otherwise.
    pub fn cdf(&self, x: f64) -> f64 {
        let c = self.c;
        let x = x.clamp(-c, c);
        let th = self.theta();
        if th.abs() < 1e-12 {
            (x + c) / (2.0 * c)
        } else {
            (th * (x + c)).exp_m1() / (2.0 * th * c).exp_m1()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub ks_statistic: f64,
    pub threshold: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Kolmogorov–Smirnov distance between a sample and a distribution function.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs())
    })
}

/// Runs independent paths from the band centre, discards the burn-in and
/// keeps samples spaced `stride` relaxation times apart.
pub fn stationary_test(cfg: &StationaryConfig) -> Result<StationaryReport> {
    if !(cfg.sigma > 0.0 && cfg.c > 0.0) {
        return domain("stationary test needs positive sigma and band");
    }
    if cfg.burn_in < 5.0 {
        return domain("burn-in must cover at least five relaxation times");
    }
    if !(cfg.stride > 0.0) || cfg.paths == 0 || cfg.samples_per_path == 0 {
        return domain("stride, paths and samples must be positive");
    }
    let relax = 1.0 / cfg.lambda1();
    let burn_steps = (cfg.burn_in / cfg.stride).ceil() as usize;
    let steps = burn_steps + cfg.samples_per_path - 1;
    let horizon = steps as f64 * cfg.stride * relax;
    let model = MarketModel::constant(cfg.mu, 0.0, cfg.sigma * cfg.sigma, 0.0, 0.0);
    let per_path: Vec<Vec<f64>> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|p| {
            let sp = simulate_market_path(
                &model,
                cfg.c,
                0.0,
                horizon,
                steps,
                cfg.resolution,
                cfg.seed,
                p,
            )?;
            Ok((burn_steps..=steps).map(|i| sp.scaled_z(i)).collect())
        })
        .collect::<Result<_>>()?;
    let mut samples: Vec<f64> = per_path.into_iter().flatten().collect();
    let n = samples.len();
    let d = ks_statistic(&mut samples, |x| cfg.cdf(x));
    let threshold = cfg.threshold_factor * KS_CRITICAL_5PCT / (n as f64).sqrt();
    Ok(StationaryReport {
        ks_statistic: d,
        threshold,
        samples: n,
        pass: d < threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let mut xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!((ks_statistic(&mut xs, |x| x) - 0.0005).abs() < 1e-12);
        let mut ys: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 2000.0).collect();
        assert!(ks_statistic(&mut ys, |x| x.clamp(0.0, 1.0)) > 0.49);
    }

    #[test]
    fn cdf_shapes() {
        let u = StationaryConfig::new(0.0, 0.2, 0.1, 0);
        assert_eq!(u.cdf(0.0), 0.5);
        let e = StationaryConfig::new(0.05, 0.2, 0.1, 0);
        assert!(e.cdf(0.0) < 0.5 && (e.cdf(0.1) - 1.0).abs() < 1e-15);
        let neg = StationaryConfig::new(-0.05, 0.2, 0.1, 0);
        assert!(neg.cdf(0.0) > 0.5);
        assert!((u.lambda1() - 0.02 * (std::f64::consts::PI / 0.2).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn small_uniform_run() {
        let cfg = StationaryConfig {
            paths: 60,
            resolution: Resolution { kappa: 0.1 },
            ..StationaryConfig::new(0.0, 0.2, 0.1, 3)
        };
        let r = stationary_test(&cfg).unwrap();
        assert_eq!(r.samples, 600);
        assert!(r.pass, "{r:?}");
        let tilted = StationaryConfig { mu: 0.05, ..cfg };
        assert!(stationary_test(&tilted).unwrap().pass);
    }

    #[test]
    fn rejects_short_burn_in() {
        let cfg = StationaryConfig {
            burn_in: 1.0,
            ..StationaryConfig::new(0.0, 0.2, 0.1, 3)
        };
        assert!(stationary_test(&cfg).is_err());
    }
}
