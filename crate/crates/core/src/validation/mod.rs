//! Monte Carlo experiments that check the analytic results: growth-rate
//! estimates, discrete-to-continuous convergence, the stationary law of the
//! mispricing and the spectral solution of the regulator problem.

pub mod cross_check;
pub mod engine;
pub mod stationary;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amm::PoolState;
use crate::arbitrage::{
    inventory_from_regulators, liquidity_from_regulators, log_add, run_discrete_arbitrage,
    skorokhod_regulators, wealth_path, ArbPath, ArrivalSpec, MispricingBand,
};
use crate::error::{domain, Result};
use crate::growth::{
    growth_rate_stochastic, lp_growth_rate, GrowthParams, GrowthReport, LimitDistribution,
};
use crate::market::{
    simulate_stochastic_vol_drift, simulate_time_dependent_vol, simulate_two_asset, MarketModel,
    Variant,
};
use crate::rng::mean_stderr;
use engine::{simulate_market_path, Resolution, SimulatedPath};

pub use cross_check::{spectral_cross_check, CrossCheckRow};
pub use stationary::{stationary_test, StationaryConfig, StationaryReport};

/// Initial pool reserves and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSeed {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub gamma: f64,
}

impl PoolSeed {
    pub fn pool(&self) -> Result<PoolState> {
        PoolState::new(self.x, self.y, self.w, self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Pass band in standard errors.
    pub k_sigma: f64,
    /// Absolute floor of the pass band.
    pub abs_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances {
            k_sigma: 4.0,
            abs_tol: 0.0,
        }
    }
}

fn default_resolution() -> Resolution {
    Resolution::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: MarketModel,
    pub pool: PoolSeed,
    /// Years.
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    /// Discrete arbitrage arrivals; continuous arbitrage when absent.
    #[serde(default)]
    pub arrivals: Option<ArrivalSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_resolution")]
    pub resolution: Resolution,
    /// Replace the price term of each path by its expectation.
    #[serde(default)]
    pub control_variate: bool,
    /// Initial mispricing.
    #[serde(default)]
    pub z0: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) || self.steps == 0 || self.paths == 0 {
            return domain("horizon, steps and paths must be positive");
        }
        if !(self.tolerances.k_sigma > 0.0 && self.tolerances.abs_tol >= 0.0) {
            return domain("tolerances must be positive");
        }
        if !(self.pool.gamma > 0.0 && self.pool.gamma <= 1.0) {
            return domain(format!("gamma out of range (0,1]: {}", self.pool.gamma));
        }
        if self.arrivals.is_some() && self.pool.gamma == 1.0 {
            return domain("discrete arbitrage needs a fee");
        }
        self.pool.pool()?;
        match &self.model.variant {
            Variant::Constant => {
                self.model.cholesky()?;
            }
            Variant::TimeDependentSigma { table } => {
                crate::market::VolTable::new(table.t.clone(), table.sigma.clone())?;
            }
            Variant::StochasticIndependent { spec } => spec.validate()?,
        }
        Ok(())
    }

    /// Long-run drift of `ln S_X`; variants carry the relative drift
    /// on top of a deterministic numeraire.
    fn effective_mu_x(&self) -> Result<f64> {
        Ok(match &self.model.variant {
            Variant::Constant => self.model.mu_x,
            Variant::TimeDependentSigma { .. } => self.model.mu_y,
            Variant::StochasticIndependent { spec } => {
                let atoms = spec.limit_distribution()?;
                self.model.mu_y + atoms.iter().map(|(p, m, _)| p * m).sum::<f64>()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub label: String,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub z_score: f64,
    pub pass: bool,
    pub runtime_secs: f64,
    pub k_sigma: f64,
    pub abs_tol: f64,
}

impl EstimateReport {
    pub fn new(
        label: impl Into<String>,
        estimate: f64,
        stderr: f64,
        target: f64,
        tol: Tolerances,
        runtime_secs: f64,
    ) -> EstimateReport {
        let gap = (estimate - target).abs();
        let z_score = if stderr > 0.0 {
            (estimate - target) / stderr
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(estimate - target)
        };
        EstimateReport {
            label: label.into(),
            estimate,
            stderr,
            target,
            z_score,
            pass: gap <= tol.abs_tol.max(tol.k_sigma * stderr),
            runtime_secs,
            k_sigma: tol.k_sigma,
            abs_tol: tol.abs_tol,
        }
    }
}

/// Analytic long-run growth for the experiment's model and pool. With no
/// fee the pool earns nothing from arbitrage and grows at the drift part.
pub fn analytic_target(cfg: &ExperimentConfig) -> Result<GrowthReport> {
    let (w, gamma) = (cfg.pool.w, cfg.pool.gamma);
    let mu_x = cfg.effective_mu_x()?;
    let mu_y = cfg.model.mu_y;
    let sigma2 = match &cfg.model.variant {
        Variant::Constant => cfg.model.sigma2(),
        Variant::TimeDependentSigma { table } => table.sigma.last().map(|s| s * s).unwrap_or(0.0),
        Variant::StochasticIndependent { spec } => spec
            .limit_distribution()?
            .iter()
            .map(|(p, _, s2)| p * s2)
            .sum(),
    };
    let drift_part = w * mu_x + (1.0 - w) * mu_y;
    let degenerate = |alpha: f64, beta: f64, fee_part: f64| GrowthReport {
        w,
        gamma,
        alpha,
        beta,
        rate: drift_part + fee_part,
        drift_part,
        fee_part,
        g: if sigma2 > 0.0 {
            fee_part / (0.5 * w * (1.0 - w) * sigma2)
        } else {
            f64::NAN
        },
        spt_excess: 0.5 * w * (1.0 - w) * sigma2,
        alpha_stderr: None,
        beta_stderr: None,
    };
    if gamma == 1.0 {
        return Ok(degenerate(f64::INFINITY, f64::INFINITY, 0.0));
    }
    match &cfg.model.variant {
        Variant::Constant => {
            let mu = cfg.model.mu();
            if sigma2 <= 0.0 {
                // Deterministic relative price: the regulators absorb the drift.
                let k = crate::arbitrage::RegulatorCoefficients::new(w, gamma)?;
                let (alpha, beta) = ((-mu).max(0.0), mu.max(0.0));
                return Ok(degenerate(alpha, beta, k.ell_l * alpha + k.ell_u * beta));
            }
            lp_growth_rate(&GrowthParams::gbm(w, gamma, mu_x, mu_y, mu, sigma2.sqrt()))
        }
        Variant::TimeDependentSigma { .. } => {
            lp_growth_rate(&GrowthParams::gbm(w, gamma, mu_x, mu_y, 0.0, sigma2.sqrt()))
        }
        Variant::StochasticIndependent { spec } => {
            let dist = LimitDistribution::Discrete(spec.limit_distribution()?);
            growth_rate_stochastic(&dist, gamma, w, mu_x, mu_y, 0, cfg.seed)
        }
    }
}

/// Per-path growth contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathGrowth {
    /// `(ln V_T - ln V_0)/T`.
    pub rate: f64,
    /// `(ln ℓ_T - ln ℓ_0)/T`.
    pub fee: f64,
    /// `(w Δln S_X + (1-w) Δln S_Y)/T`.
    pub price: f64,
}

/// Builds the pool path implied by simulated regulators.
fn arb_path_from_regulators(pool: &PoolState, sp: &SimulatedPath, ln_s0: f64) -> Result<ArbPath> {
    let (w, gamma) = (pool.w(), pool.gamma());
    let ln_s: Vec<f64> = sp.ln_s.iter().map(|v| ln_s0 + v).collect();
    let (ln_x, ln_y) = inventory_from_regulators(&sp.l, &sp.u, w, gamma, pool.x(), pool.y())?;
    let ln_ell0 = pool.ell().ln();
    let ln_ell = liquidity_from_regulators(&sp.l, &sp.u, w, gamma)?
        .into_iter()
        .map(|v| ln_ell0 + v)
        .collect();
    let ln_p = ln_s.iter().zip(&sp.z).map(|(s, z)| s - z).collect();
    let ln_v = (0..ln_s.len())
        .map(|i| log_add(ln_s[i] + ln_x[i], ln_y[i]))
        .collect();
    Ok(ArbPath {
        t: sp.t.clone(),
        ln_s,
        z: sp.z.clone(),
        l: sp.l.clone(),
        u: sp.u.clone(),
        ln_p,
        ln_x,
        ln_y,
        ln_ell,
        ln_v,
    })
}

/// One simulated pool path with the asset log prices behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpPath {
    pub arb: ArbPath,
    pub ln_sx: Vec<f64>,
    pub ln_sy: Vec<f64>,
}

/// Simulates the market and the pool's response for path `path`.
pub fn simulate_lp_path(cfg: &ExperimentConfig, path: u64) -> Result<LpPath> {
    let pool = cfg.pool.pool()?;
    let gamma = cfg.pool.gamma;
    let ln_p0 = pool.spot_price().ln();
    let ln_s0 = ln_p0 + cfg.z0;
    let (arb, ln_sx, ln_sy) = match cfg.arrivals {
        None => {
            let c = -gamma.ln();
            let sp = simulate_market_path(
                &cfg.model,
                c,
                cfg.z0,
                cfg.horizon,
                cfg.steps,
                cfg.resolution,
                cfg.seed,
                path,
            )?;
            let arb = arb_path_from_regulators(&pool, &sp, ln_s0)?;
            let ln_sx = arb
                .ln_s
                .iter()
                .zip(&sp.ln_sy)
                .map(|(s, y)| s + y)
                .collect::<Vec<f64>>();
            (arb, ln_sx, sp.ln_sy)
        }
        Some(spec) => {
            let bundle = match &cfg.model.variant {
                Variant::Constant => {
                    simulate_two_asset(&cfg.model, cfg.horizon, cfg.steps, cfg.seed, path)?
                }
                Variant::TimeDependentSigma { table } => {
                    simulate_time_dependent_vol(table, cfg.horizon, cfg.steps, cfg.seed, path)?
                }
                Variant::StochasticIndependent { spec } => {
                    simulate_stochastic_vol_drift(spec, cfg.horizon, cfg.steps, cfg.seed, path)?
                }
            };
            let ln_sy = bundle
                .ln_sy
                .clone()
                .unwrap_or_else(|| bundle.t.iter().map(|t| cfg.model.mu_y * t).collect());
            let ln_s: Vec<f64> = bundle.ln_s.iter().map(|v| ln_s0 + v).collect();
            let idx = spec.indices(&bundle.t, cfg.seed, path)?;
            let arb = run_discrete_arbitrage(&pool, &bundle.t, &ln_s, &idx)?;
            let ln_sx = ln_s.iter().zip(&ln_sy).map(|(s, y)| s + y).collect();
            (arb, ln_sx, ln_sy)
        }
    };
    Ok(LpPath { arb, ln_sx, ln_sy })
}

/// Simulates one path and values the LP position along it.
pub fn simulate_path_growth(cfg: &ExperimentConfig, path: u64) -> Result<PathGrowth> {
    let (w, gamma) = (cfg.pool.w, cfg.pool.gamma);
    let LpPath { arb, ln_sx, ln_sy } = simulate_lp_path(cfg, path)?;
    let ln_v = wealth_path(&arb, &ln_sx, &ln_sy, w, gamma)?;
    let n = ln_v.len() - 1;
    let t = cfg.horizon;
    Ok(PathGrowth {
        rate: (ln_v[n] - ln_v[0]) / t,
        fee: (arb.ln_ell[n] - arb.ln_ell[0]) / t,
        price: (w * (ln_sx[n] - ln_sx[0]) + (1.0 - w) * (ln_sy[n] - ln_sy[0])) / t,
    })
}

/// Growth estimates over all paths with their analytic targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthEstimate {
    pub rate: EstimateReport,
    pub fee_part: EstimateReport,
    pub target: GrowthReport,
}

/// Monte Carlo estimate of the long-run growth rate and its fee part.
pub fn mc_growth(cfg: &ExperimentConfig) -> Result<GrowthEstimate> {
    cfg.validate()?;
    let start = Instant::now();
    let target = analytic_target(cfg)?;
    let samples: Vec<PathGrowth> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|p| simulate_path_growth(cfg, p))
        .collect::<Result<_>>()?;
    let rates: Vec<f64> = if cfg.control_variate {
        let expected = target.drift_part;
        samples
            .iter()
            .map(|s| s.rate - s.price + expected)
            .collect()
    } else {
        samples.iter().map(|s| s.rate).collect()
    };
    let fees: Vec<f64> = samples.iter().map(|s| s.fee).collect();
    let (m, se) = mean_stderr(&rates);
    let (fm, fse) = mean_stderr(&fees);
    let secs = start.elapsed().as_secs_f64();
    Ok(GrowthEstimate {
        rate: EstimateReport::new("growth rate", m, se, target.rate, cfg.tolerances, secs),
        fee_part: EstimateReport::new("fee part", fm, fse, target.fee_part, cfg.tolerances, secs),
        target,
    })
}

/// `(ln V_T - ln V_0)/T` averaged over paths against the analytic rate.
pub fn mc_growth_estimate(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    Ok(mc_growth(cfg)?.rate)
}

/// Growth estimates for a sequence of output-step counts, each against the
/// finest level's estimate.
pub fn growth_convergence(cfg: &ExperimentConfig, steps: &[usize]) -> Result<Vec<EstimateReport>> {
    if steps.len() < 3 {
        return domain("a convergence study needs at least three levels");
    }
    let runs: Vec<EstimateReport> = steps
        .iter()
        .map(|&n| {
            mc_growth_estimate(&ExperimentConfig {
                steps: n,
                ..cfg.clone()
            })
        })
        .collect::<Result<_>>()?;
    let finest = runs.last().unwrap().estimate;
    Ok(runs
        .into_iter()
        .zip(steps)
        .map(|(r, n)| {
            EstimateReport::new(
                format!("steps={n}"),
                r.estimate,
                r.stderr,
                finest,
                cfg.tolerances,
                r.runtime_secs,
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// Arrivals per year.
    pub rate: f64,
    pub arrivals: usize,
    pub gap_l: f64,
    pub gap_u: f64,
    /// `max(gap_l, gap_u)`.
    pub gap: f64,
}

/// Sup-norm distance between the regulators of discrete arbitrage at each
/// arrival rate and the continuous (Skorokhod) regulators of the same path.
pub fn regulator_convergence(
    pool: &PoolState,
    t: &[f64],
    ln_s: &[f64],
    rates: &[f64],
) -> Result<Vec<ConvergenceRow>> {
    if rates.len() < 3 {
        return domain("a convergence study needs at least three levels");
    }
    let band = MispricingBand::from_gamma(pool.gamma())?;
    let z0 = ln_s[0] - pool.spot_price().ln();
    let cont = skorokhod_regulators(ln_s, band, z0)?;
    rates
        .iter()
        .map(|&rate| {
            let idx = ArrivalSpec::Uniform { rate }.indices(t, 0, 0)?;
            let d = run_discrete_arbitrage(pool, t, ln_s, &idx)?;
            let gap_l =
                d.l.iter()
                    .zip(&cont.l)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let gap_u =
                d.u.iter()
                    .zip(&cont.u)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            Ok(ConvergenceRow {
                rate,
                arrivals: idx.len(),
                gap_l,
                gap_u,
                gap: gap_l.max(gap_u),
            })
        })
        .collect()
}

/// True when `xs` never increases, allowing `violations` exceptions.
pub fn monotone_non_increasing(xs: &[f64], violations: usize) -> bool {
    xs.windows(2).filter(|w| w[1] > w[0]).count() <= violations
}
