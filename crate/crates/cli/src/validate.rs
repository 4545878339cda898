//! `g3m validate`: the reproducibility suite at desk scale.
//!
//! Each check compares library output against a closed form or a second
//! method. `tolerance_scale` multiplies every tolerance, so values below
//! one tighten the suite.

use std::f64::consts::PI;
use std::time::Instant;

use serde::Serialize;

use g3m_core::arbitrage::{inventory_from_regulators, run_discrete_arbitrage};
use g3m_core::growth::{
    alpha_beta_gbm, alpha_beta_quadrature, growth_rate_stochastic, growth_ratio, optimal_fee,
    LimitDistribution,
};
use g3m_core::market::simulate_relative_gbm;
use g3m_core::spectral::{eigensystem, CoefficientField};
use g3m_core::validation::engine::Resolution;
use g3m_core::validation::{
    mc_growth, monotone_non_increasing, regulator_convergence, spectral_cross_check,
    stationary_test, EstimateReport, ExperimentConfig, PoolSeed, StationaryConfig, Tolerances,
};
use g3m_core::{MarketModel, PoolState, StochasticSpec, Variant, VolTable};

use crate::config::{RunConfig, ValidateConfig};
use crate::manifest::Outputs;
use crate::{config_err, runtime_err, Context, Failure};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub reports: Vec<EstimateReport>,
    pub runtime_secs: f64,
}

type CheckFn = fn(&Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)>;

struct Suite {
    seed: u64,
    scale: f64,
}

impl Suite {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            k_sigma: 4.0 * self.scale,
            abs_tol: 0.0,
        }
    }
}

const CHECKS: [(&str, CheckFn); 12] = [
    ("closed-form", closed_form),
    ("zero-fee-limit", zero_fee_limit),
    ("symmetry", symmetry),
    ("growth", growth),
    ("stationary", stationary),
    ("spectrum", spectrum),
    ("cross-check", cross_check),
    ("convergence", convergence),
    ("equivalence", equivalence),
    ("optimum", optimum),
    ("time-inhomogeneous", time_inhomogeneous),
    ("stochastic-vol", stochastic_vol),
];

fn closed_form(s: &Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)> {
    let sigma = 0.2;
    let mut worst = 0.0f64;
    for gamma in [0.9, 0.99, 0.997] {
        for theta in [-5.0, -2.5, 0.0, 2.5, 5.0] {
            let mu = theta * sigma * sigma / 2.0;
            let (qa, qb) =
                alpha_beta_quadrature(&CoefficientField::gbm(mu, sigma, gamma, 201)?, gamma)?;
            let (ca, cb) = alpha_beta_gbm(mu, sigma, gamma)?;
            worst = worst
                .max(((qa - ca) / ca).abs())
                .max(((qb - cb) / cb).abs());
        }
    }
    Ok((
        worst <= 1e-8 * s.scale,
        format!("max relative gap {worst:.2e}"),
        vec![],
    ))
}

fn zero_fee_limit(s: &Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)> {
    let mut worst = 0.0f64;
    for w in [0.1, 0.3, 0.5, 0.7, 0.9] {
        for theta in [0.0, 2.5, -2.5] {
            worst = worst.max((growth_ratio(w, 1.0 - 1e-8, theta)? - 1.0).abs());
        }
    }
    Ok((
        worst < 1e-4 * s.scale,
        format!("max |g - 1| = {worst:.2e}"),
        vec![],
    ))
}

fn symmetry(s: &Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)> {
    let mut worst = 0.0f64;
    for gamma in [0.9, 0.99, 0.997] {
        for k in 1..10 {
            let w = 0.1 * k as f64;
            for theta in [0.0, 2.5, 5.0] {
                let l = growth_ratio(w, gamma, -theta)?;
                let r = growth_ratio(1.0 - w, gamma, theta)?;
                worst = worst.max((l - r).abs() / r.abs().max(1.0));
            }
        }
    }
    Ok((
        worst <= 1e-12 * s.scale,
        format!("max gap {worst:.2e}"),
        vec![],
    ))
}

fn growth(s: &Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)> {
    let cfg = ExperimentConfig {
        model: MarketModel::constant(0.02, 0.01, 0.16, 0.0, 0.0),
        pool: PoolSeed {
            x: 100.0,
            y: 100.0,
            w: 0.5,
            gamma: 0.99,
        },
        horizon: 5.0,
        steps: 500,
        paths: 400,
        seed: s.seed,
        arrivals: None,
        tolerances: s.tolerances(),
        resolution: Resolution::new(0.5)?,
        control_variate: true,
        z0: 0.0,
    };
    let est = mc_growth(&cfg)?;
    let detail = format!(
        "rate {:.6} ± {:.1e} vs {:.6}",
        est.rate.estimate, est.rate.stderr, est.rate.target
    );
    Ok((est.rate.pass, detail, vec![est.rate, est.fee_part]))
}

fn stationary(s: &Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)> {
    let mut pass = true;
    let mut notes = Vec::new();
    for mu in [0.0, 0.05] {
        let cfg = StationaryConfig {
            threshold_factor: 1.5 * s.scale,
            ..StationaryConfig::new(mu, 0.2, 0.1, s.seed)
        };
        let r = stationary_test(&cfg)?;
        pass &= r.pass;
        notes.push(format!(
            "θ={:.2}: D = {:.4} vs {:.4}",
            cfg.theta(),
            r.ks_statistic,
            r.threshold
        ));
    }
    Ok((pass, notes.join("; "), vec![]))
}

fn spectrum(s: &Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)> {
    let eig = eigensystem(&CoefficientField::constant(0.0, 2f64.sqrt(), 1.0, 2001)?, 8)?;
    let worst = (1..=5)
        .map(|k| {
            let exact = (k as f64 * PI / 2.0).powi(2);
            (eig.lambdas[k] - exact).abs() / exact
        })
        .fold(0.0f64, f64::max);
    Ok((
        worst <= 1e-6 * s.scale,
        format!("max relative error {worst:.2e}"),
        vec![],
    ))
}

fn cross_check(s: &Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)> {
    let field = CoefficientField::constant(0.0, 2f64.sqrt(), 1.0, 2001)?;
    let rows = spectral_cross_check(
        &field,
        -1.0,
        1.0,
        0.0,
        &[1.0, 3.0],
        100_000,
        64,
        Resolution::new(0.05)?,
        s.seed,
    )?;
    let mut pass = true;
    let mut notes = Vec::new();
    for r in &rows {
        match r.rel_err {
            Some(e) => {
                pass &= e <= 0.01 * s.scale;
                notes.push(format!("τ={}: {:.3}%", r.tau, 100.0 * e));
            }
            None => notes.push(format!("τ={}: skipped", r.tau)),
        }
    }
    Ok((pass, notes.join(", "), vec![]))
}

fn convergence(s: &Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)> {
    let path = simulate_relative_gbm(0.0, 0.2, 1.0, 1_000_000, s.seed, 0)?;
    let pool = PoolState::new(100.0, 100.0, 0.5, 0.997)?;
    let rows = regulator_convergence(&pool, &path.t, &path.ln_s, &[10.0, 1e2, 1e3, 1e4])?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let shown: Vec<String> = gaps.iter().map(|g| format!("{g:.3e}")).collect();
    Ok((
        monotone_non_increasing(&gaps, 0),
        format!("gaps [{}]", shown.join(", ")),
        vec![],
    ))
}

fn equivalence(s: &Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)> {
    let n = 100_000;
    let pool = PoolState::new(100.0, 100.0, 0.5, 0.997)?;
    let t: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let ln_s: Vec<f64> = t.iter().map(|&x| 0.01 * (10.0 * PI * x).sin()).collect();
    let every: Vec<usize> = (0..=n).collect();
    let arb = run_discrete_arbitrage(&pool, &t, &ln_s, &every)?;
    let (lx, ly) = inventory_from_regulators(&arb.l, &arb.u, 0.5, 0.997, 100.0, 100.0)?;
    let worst = (0..=n)
        .map(|i| {
            (lx[i] - arb.ln_x[i])
                .exp_m1()
                .abs()
                .max((ly[i] - arb.ln_y[i]).exp_m1().abs())
        })
        .fold(0.0f64, f64::max);
    Ok((
        worst <= 1e-8 * s.scale,
        format!("max relative reserve gap {worst:.2e}"),
        vec![],
    ))
}

fn optimum(_: &Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)> {
    for wi in 1..10 {
        for ti in -10..=10 {
            let opt = optimal_fee(0.1 * wi as f64, 0.5 * ti as f64, 2000)?;
            if opt.interior && opt.g_star > 1.0 {
                let d = format!(
                    "w = {:.1}, θ = {:.1}, γ* = {:.6}, g* = {:.6}",
                    opt.w, opt.theta, opt.gamma_star, opt.g_star
                );
                return Ok((true, d, vec![]));
            }
        }
    }
    Ok((false, "no interior optimum found".into(), vec![]))
}

fn time_inhomogeneous(s: &Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)> {
    let s_inf = 0.2;
    let mut gaps = Vec::new();
    let mut reports = Vec::new();
    for horizon in [10.0, 20.0, 40.0] {
        let steps = (horizon * 50.0) as usize;
        let table = VolTable::from_fn(|t| s_inf * (1.0 + (-t).exp()).sqrt(), horizon, steps)?;
        let cfg = ExperimentConfig {
            model: MarketModel {
                variant: Variant::TimeDependentSigma { table },
                ..MarketModel::constant(0.0, 0.0, 0.0, 0.0, 0.0)
            },
            pool: PoolSeed {
                x: 100.0,
                y: 100.0,
                w: 0.5,
                gamma: 0.99,
            },
            horizon,
            steps,
            paths: 1000,
            seed: s.seed,
            arrivals: None,
            tolerances: s.tolerances(),
            resolution: Resolution::new(0.5)?,
            control_variate: true,
            z0: 0.0,
        };
        let est = mc_growth(&cfg)?;
        gaps.push((est.rate.estimate - est.target.rate).abs());
        reports.push(est.rate);
    }
    let pass = gaps[0] > gaps[1] && gaps[1] > gaps[2];
    Ok((
        pass,
        format!("gaps {:.2e}, {:.2e}, {:.2e}", gaps[0], gaps[1], gaps[2]),
        reports,
    ))
}

fn stochastic_vol(s: &Suite) -> g3m_core::Result<(bool, String, Vec<EstimateReport>)> {
    let gamma = 0.99;
    let spec = StochasticSpec::MarkovSwitch {
        mu: vec![0.0; 3],
        sigma: vec![0.05f64.sqrt(), 0.1, 0.3],
        rates: vec![vec![0.0, 1.0, 1.0], vec![0.0; 3], vec![0.0; 3]],
        initial: 0,
        epsilon: 1e-6,
    };
    let atoms = spec.limit_distribution()?;
    let exact = growth_rate_stochastic(
        &LimitDistribution::Discrete(atoms),
        gamma,
        0.5,
        0.0,
        0.0,
        0,
        0,
    )?;
    let expect = -0.05 / (4.0 * gamma.ln());
    let enum_ok = ((exact.alpha - expect) / expect).abs() <= 1e-12 * s.scale;
    let cfg = ExperimentConfig {
        model: MarketModel {
            variant: Variant::StochasticIndependent { spec },
            ..MarketModel::constant(0.0, 0.0, 0.0, 0.0, 0.0)
        },
        pool: PoolSeed {
            x: 100.0,
            y: 100.0,
            w: 0.5,
            gamma,
        },
        horizon: 20.0,
        steps: 2000,
        paths: 2000,
        seed: s.seed,
        arrivals: None,
        tolerances: s.tolerances(),
        resolution: Resolution::new(0.5)?,
        control_variate: true,
        z0: 0.0,
    };
    let est = mc_growth(&cfg)?;
    let d = format!(
        "α = {:.10}; MC {:.6} ± {:.1e} vs {:.6}",
        exact.alpha, est.rate.estimate, est.rate.stderr, est.rate.target
    );
    Ok((enum_ok && est.rate.pass, d, vec![est.rate]))
}

pub fn run(ctx: &Context, mut cfg: ValidateConfig) -> Result<(), Failure> {
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    if !(cfg.tolerance_scale > 0.0 && cfg.tolerance_scale.is_finite()) {
        return Err(config_err("tolerance scale must be positive"));
    }
    if let Some(bad) = cfg
        .only
        .iter()
        .find(|n| !CHECKS.iter().any(|(name, _)| name == n))
    {
        let names: Vec<&str> = CHECKS.iter().map(|(n, _)| *n).collect();
        return Err(config_err(format!(
            "unknown check {bad:?}; available: {}",
            names.join(", ")
        )));
    }
    let suite = Suite {
        seed: cfg.seed,
        scale: cfg.tolerance_scale,
    };
    let mut outcomes = Vec::new();
    for (name, check) in CHECKS
        .iter()
        .filter(|(n, _)| cfg.only.is_empty() || cfg.only.iter().any(|o| o == n))
    {
        let start = Instant::now();
        let (pass, detail, reports) =
            check(&suite).map_err(|e| runtime_err(format!("{name}: {e}")))?;
        let outcome = CheckOutcome {
            name: name.to_string(),
            pass,
            detail,
            reports,
            runtime_secs: start.elapsed().as_secs_f64(),
        };
        println!(
            "{} {:<20} {}",
            if pass { "PASS" } else { "FAIL" },
            outcome.name,
            outcome.detail
        );
        outcomes.push(outcome);
    }
    let mut out = Outputs::new(&ctx.out)?;
    // Timings stay in the manifest so the table itself is reproducible.
    let mut table = serde_json::to_value(&outcomes).map_err(runtime_err)?;
    strip_key(&mut table, "runtime_secs");
    out.write_json("validation.json", &table)?;
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| o.name.as_str())
        .collect();
    let results = serde_json::to_value(&outcomes).map_err(runtime_err)?;
    let seed = cfg.seed;
    out.finish(
        ctx,
        &RunConfig {
            validate: Some(cfg),
            ..Default::default()
        },
        Some(seed),
        results,
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed.join(", ")))
    }
}

fn strip_key(v: &mut serde_json::Value, key: &str) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove(key);
            m.values_mut().for_each(|x| strip_key(x, key));
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(|x| strip_key(x, key)),
        _ => {}
    }
}
