//! Reference-market log-price paths.
//!
//! Component prices follow `d ln S^X = μ_X dt + dW^X`, `d ln S^Y = μ_Y dt + dW^Y`
//! with covariance rates `σ^{XX}, σ^{YY}, σ^{XY}`; the relative price
//! `S = S^X/S^Y` then has drift `μ = μ_X - μ_Y` and variance rate
//! `σ² = σ^{XX} + σ^{YY} - 2σ^{XY}`. Increments are exact Gaussians given
//! the coefficients at the left endpoint of each step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{stream, Purpose};

/// Piecewise-linear volatility schedule `σ(t)`, constant beyond its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolTable {
    pub t: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl VolTable {
    pub fn new(t: Vec<f64>, sigma: Vec<f64>) -> Result<VolTable> {
        if t.is_empty() || t.len() != sigma.len() {
            return domain("volatility table needs matching, non-empty knot and value columns");
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("volatility table knots must be strictly increasing");
        }
        if let Some(s) = sigma.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return domain(format!("negative or non-finite volatility {s} in table"));
        }
        Ok(VolTable { t, sigma })
    }

    pub fn constant(sigma: f64) -> Result<VolTable> {
        VolTable::new(vec![0.0], vec![sigma])
    }

    /// Tabulates `f` on `n + 1` equally spaced knots over `[0, horizon]`.
    pub fn from_fn(f: impl Fn(f64) -> f64, horizon: f64, n: usize) -> Result<VolTable> {
        let n = n.max(1);
        let t: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
        let sigma = t.iter().map(|&s| f(s)).collect();
        VolTable::new(t, sigma)
    }

    pub fn eval(&self, s: f64) -> f64 {
        let k = self.t.partition_point(|&x| x <= s);
        if k == 0 {
            return self.sigma[0];
        }
        if k == self.t.len() {
            return self.sigma[k - 1];
        }
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let a = (s - t0) / (t1 - t0);
        self.sigma[k - 1] * (1.0 - a) + self.sigma[k] * a
    }
}

/// Independent stochastic coefficients `(μ̃_t, σ̃_t)` of the relative price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StochasticSpec {
    /// Continuous-time Markov chain over `(μ, σ)` states with generator
    /// off-diagonal `rates[i][j]`.
    MarkovSwitch {
        mu: Vec<f64>,
        sigma: Vec<f64>,
        rates: Vec<Vec<f64>>,
        initial: usize,
        epsilon: f64,
    },
    /// Mean-reverting volatility `dσ = κ(σ̄ - σ)dt + η dW'` floored at
    /// `epsilon`, with constant drift.
    MeanReverting {
        mu: f64,
        sigma0: f64,
        sigma_bar: f64,
        kappa: f64,
        eta: f64,
        epsilon: f64,
    },
}

impl StochasticSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            StochasticSpec::MarkovSwitch {
                mu,
                sigma,
                rates,
                initial,
                epsilon,
            } => {
                let k = mu.len();
                if k == 0
                    || sigma.len() != k
                    || rates.len() != k
                    || rates.iter().any(|r| r.len() != k)
                {
                    return domain("Markov switch needs matching state and rate dimensions");
                }
                if *initial >= k {
                    return domain(format!("initial state {initial} out of range"));
                }
                if rates
                    .iter()
                    .flatten()
                    .any(|r| !(*r >= 0.0 && r.is_finite()))
                {
                    return domain("switching rates must be non-negative");
                }
                if !(*epsilon > 0.0) {
                    return domain("ellipticity floor must be positive");
                }
                if let Some(&s) = sigma.iter().find(|&&s| !(s >= *epsilon)) {
                    return Err(Error::Ellipticity {
                        value: s,
                        floor: *epsilon,
                    });
                }
            }
            StochasticSpec::MeanReverting {
                sigma0,
                sigma_bar,
                kappa,
                eta,
                epsilon,
                ..
            } => {
                if !(*epsilon > 0.0) {
                    return domain("ellipticity floor must be positive");
                }
                if !(*kappa >= 0.0 && *eta >= 0.0) {
                    return domain("mean reversion speed and vol-of-vol must be non-negative");
                }
                if *sigma0 < *epsilon || *sigma_bar < *epsilon {
                    return Err(Error::Ellipticity {
                        value: sigma0.min(*sigma_bar),
                        floor: *epsilon,
                    });
                }
            }
        }
        Ok(())
    }

    /// Law of the `t → ∞` limit of `(μ̃, σ̃²)` as weighted points, when the
    /// process declares one. A Markov switch has a limit only if every
    /// recurrent state is absorbing; the limit is then the absorption law.
    pub fn limit_distribution(&self) -> Result<Vec<(f64, f64, f64)>> {
        match self {
            StochasticSpec::MarkovSwitch {
                mu,
                sigma,
                rates,
                initial,
                ..
            } => {
                self.validate()?;
                let k = mu.len();
                let out_rate: Vec<f64> = (0..k)
                    .map(|i| (0..k).filter(|&j| j != i).map(|j| rates[i][j]).sum())
                    .collect();
                let absorbing: Vec<bool> = out_rate.iter().map(|&r| r == 0.0).collect();
                // Absorption probabilities from the initial state by
                // iterating the embedded jump chain to convergence.
                let mut mass = vec![0.0; k];
                mass[*initial] = 1.0;
                let mut settled = vec![0.0; k];
                for _ in 0..100_000 {
                    let mut next = vec![0.0; k];
                    for i in 0..k {
                        if mass[i] == 0.0 {
                            continue;
                        }
                        if absorbing[i] {
                            settled[i] += mass[i];
                            continue;
                        }
                        for j in 0..k {
                            if j != i {
                                next[j] += mass[i] * rates[i][j] / out_rate[i];
                            }
                        }
                    }
                    mass = next;
                    if mass.iter().sum::<f64>() < 1e-15 {
                        break;
                    }
                }
                if mass.iter().sum::<f64>() > 1e-12 {
                    return domain(
                        "Markov switch has a recurrent class that is not absorbing; no limit law",
                    );
                }
                Ok((0..k)
                    .filter(|&i| settled[i] > 0.0)
                    .map(|i| (settled[i], mu[i], sigma[i] * sigma[i]))
                    .collect())
            }
            StochasticSpec::MeanReverting { .. } => domain(
                "mean-reverting volatility is ergodic and does not converge; no limit law declared",
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Constant,
    /// Deterministic `σ(t)` for the relative price, zero drift.
    TimeDependentSigma {
        table: VolTable,
    },
    StochasticIndependent {
        spec: StochasticSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketModel {
    pub mu_x: f64,
    #[serde(default)]
    pub mu_y: f64,
    #[serde(default)]
    pub sigma_xx: f64,
    #[serde(default)]
    pub sigma_yy: f64,
    #[serde(default)]
    pub sigma_xy: f64,
    #[serde(default)]
    pub variant: Variant,
}

impl MarketModel {
    pub fn constant(
        mu_x: f64,
        mu_y: f64,
        sigma_xx: f64,
        sigma_yy: f64,
        sigma_xy: f64,
    ) -> MarketModel {
        MarketModel {
            mu_x,
            mu_y,
            sigma_xx,
            sigma_yy,
            sigma_xy,
            variant: Variant::Constant,
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu_x - self.mu_y
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma_xx + self.sigma_yy - 2.0 * self.sigma_xy
    }

    /// Lower-triangular factor `[[a, 0], [b, d]]` of the covariance matrix.
    pub fn cholesky(&self) -> Result<(f64, f64, f64)> {
        let (sxx, syy, sxy) = (self.sigma_xx, self.sigma_yy, self.sigma_xy);
        if ![sxx, syy, sxy].iter().all(|v| v.is_finite()) {
            return Err(Error::Covariance("non-finite entries".into()));
        }
        let scale = sxx.abs().max(syy.abs()).max(f64::MIN_POSITIVE);
        let det = sxx * syy - sxy * sxy;
        if sxx < 0.0 || syy < 0.0 || det < -1e-12 * scale * scale {
            return Err(Error::Covariance(format!(
                "[[{sxx}, {sxy}], [{sxy}, {syy}]] has a negative eigenvalue"
            )));
        }
        let a = sxx.sqrt();
        let b = if a > 0.0 { sxy / a } else { 0.0 };
        if a == 0.0 && sxy.abs() > 1e-12 * scale {
            return Err(Error::Covariance(
                "zero variance with non-zero covariance".into(),
            ));
        }
        let d = (syy - b * b).max(0.0).sqrt();
        Ok((a, b, d))
    }
}

/// Sampled paths. Component prices are present for two-asset simulations;
/// coefficient paths for stochastic or time-dependent variants.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PathBundle {
    pub t: Vec<f64>,
    pub ln_sx: Option<Vec<f64>>,
    pub ln_sy: Option<Vec<f64>>,
    pub ln_s: Vec<f64>,
    pub sigma_t: Option<Vec<f64>>,
    pub mu_t: Option<Vec<f64>>,
    pub seed: u64,
}

pub const PATHBUNDLE_SCHEMA: &str = "pathbundle/1";

impl PathBundle {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# g3m-schema: {PATHBUNDLE_SCHEMA}")?;
        let mut cols: Vec<(&str, &Vec<f64>)> = vec![("t", &self.t)];
        if let Some(v) = &self.ln_sx {
            cols.push(("ln_sx", v));
        }
        if let Some(v) = &self.ln_sy {
            cols.push(("ln_sy", v));
        }
        cols.push(("ln_s", &self.ln_s));
        if let Some(v) = &self.sigma_t {
            cols.push(("sigma_t", v));
        }
        if let Some(v) = &self.mu_t {
            cols.push(("mu_t", v));
        }
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(cols.iter().map(|c| c.0))?;
        for i in 0..self.t.len() {
            wtr.write_record(cols.iter().map(|c| format!("{:e}", c.1[i])))?;
        }
        wtr.flush()
    }
}

fn check_horizon(horizon: f64, n: usize) -> Result<f64> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    if n == 0 {
        return domain("need at least one step");
    }
    Ok(horizon / n as f64)
}

fn grid(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Correlated component paths with exact Gaussian increments. Component X
/// draws from the price stream and the orthogonal component from its own
/// stream, both keyed by `path`.
pub fn simulate_two_asset(
    model: &MarketModel,
    horizon: f64,
    n: usize,
    seed: u64,
    path: u64,
) -> Result<PathBundle> {
    let dt = check_horizon(horizon, n)?;
    if model.variant != Variant::Constant {
        return domain("two-asset simulation supports the constant-coefficient variant only");
    }
    let (a, b, d) = model.cholesky()?;
    let sq = dt.sqrt();
    let mut r1 = stream(seed, path, Purpose::Price);
    let mut r2 = stream(seed, path, Purpose::Orthogonal);
    let mut sx = Vec::with_capacity(n + 1);
    let mut sy = Vec::with_capacity(n + 1);
    let (mut x, mut y) = (0.0, 0.0);
    sx.push(x);
    sy.push(y);
    for _ in 0..n {
        let e1 = normal(&mut r1);
        let e2 = normal(&mut r2);
        x += model.mu_x * dt + a * sq * e1;
        y += model.mu_y * dt + (b * e1 + d * e2) * sq;
        sx.push(x);
        sy.push(y);
    }
    let ln_s = sx.iter().zip(&sy).map(|(p, q)| p - q).collect();
    Ok(PathBundle {
        t: grid(horizon, n),
        ln_sx: Some(sx),
        ln_sy: Some(sy),
        ln_s,
        sigma_t: None,
        mu_t: None,
        seed,
    })
}

/// `ln S_t = μt + σB_t` on the grid, starting at zero.
pub fn simulate_relative_gbm(
    mu: f64,
    sigma: f64,
    horizon: f64,
    n: usize,
    seed: u64,
    path: u64,
) -> Result<PathBundle> {
    let dt = check_horizon(horizon, n)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be non-negative, got {sigma}"));
    }
    let sq = sigma * dt.sqrt();
    let mut rng = stream(seed, path, Purpose::Price);
    let mut ln_s = Vec::with_capacity(n + 1);
    ln_s.push(0.0);
    let mut acc = 0.0;
    for i in 1..=n {
        let e = normal(&mut rng);
        acc += sq * e;
        // Drift is added from the step index, not accumulated, so the
        // σ = 0 path is exactly μt.
        ln_s.push(mu * (horizon * i as f64 / n as f64) + acc);
    }
    Ok(PathBundle {
        t: grid(horizon, n),
        ln_s,
        seed,
        ..Default::default()
    })
}

/// Driftless relative price with deterministic volatility, evaluated at the
/// left endpoint of each step.
pub fn simulate_time_dependent_vol(
    table: &VolTable,
    horizon: f64,
    n: usize,
    seed: u64,
    path: u64,
) -> Result<PathBundle> {
    let dt = check_horizon(horizon, n)?;
    let t = grid(horizon, n);
    let sq = dt.sqrt();
    let mut rng = stream(seed, path, Purpose::Price);
    let mut ln_s = Vec::with_capacity(n + 1);
    let mut sig = Vec::with_capacity(n + 1);
    ln_s.push(0.0);
    for i in 0..n {
        let s = table.eval(t[i]);
        if s < 0.0 {
            return domain(format!("negative volatility {s} at t = {}", t[i]));
        }
        sig.push(s);
        let e = normal(&mut rng);
        ln_s.push(ln_s[i] + s * sq * e);
    }
    sig.push(table.eval(horizon));
    Ok(PathBundle {
        t,
        ln_s,
        sigma_t: Some(sig),
        mu_t: Some(vec![0.0; n + 1]),
        seed,
        ..Default::default()
    })
}

/// Stateful sampler of independent coefficient paths on a fixed step.
pub struct CoefficientSampler<'a> {
    spec: &'a StochasticSpec,
    rng: ChaCha8Rng,
    state: usize,
    sigma: f64,
}

impl<'a> CoefficientSampler<'a> {
    pub fn new(spec: &'a StochasticSpec, seed: u64, path: u64) -> Result<CoefficientSampler<'a>> {
        spec.validate()?;
        let (state, sigma) = match spec {
            StochasticSpec::MarkovSwitch { sigma, initial, .. } => (*initial, sigma[*initial]),
            StochasticSpec::MeanReverting { sigma0, .. } => (0, *sigma0),
        };
        Ok(CoefficientSampler {
            spec,
            rng: stream(seed, path, Purpose::Coefficients),
            state,
            sigma,
        })
    }

    /// Current `(μ̃, σ̃)`.
    pub fn current(&self) -> (f64, f64) {
        match self.spec {
            StochasticSpec::MarkovSwitch { mu, sigma, .. } => (mu[self.state], sigma[self.state]),
            StochasticSpec::MeanReverting { mu, .. } => (*mu, self.sigma),
        }
    }

    /// Advances the coefficients over `dt`. Chain switches are sampled
    /// exactly in continuous time; the diffusion uses one Euler step.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        match self.spec {
            StochasticSpec::MarkovSwitch {
                rates,
                sigma,
                epsilon,
                ..
            } => {
                let mut left = dt;
                loop {
                    let row = &rates[self.state];
                    let total: f64 = row
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != self.state)
                        .map(|(_, r)| r)
                        .sum();
                    if total == 0.0 {
                        break;
                    }
                    let wait: f64 = Exp1.sample(&mut self.rng);
                    let wait = wait / total;
                    if wait > left {
                        break;
                    }
                    left -= wait;
                    let mut pick = self.rng.random::<f64>() * total;
                    let mut next = self.state;
                    for (j, r) in row.iter().enumerate() {
                        if j == self.state {
                            continue;
                        }
                        next = j;
                        if pick < *r {
                            break;
                        }
                        pick -= r;
                    }
                    self.state = next;
                }
                if sigma[self.state] < *epsilon {
                    return Err(Error::Ellipticity {
                        value: sigma[self.state],
                        floor: *epsilon,
                    });
                }
            }
            StochasticSpec::MeanReverting {
                sigma_bar,
                kappa,
                eta,
                epsilon,
                ..
            } => {
                let e = normal(&mut self.rng);
                let s = self.sigma + kappa * (sigma_bar - self.sigma) * dt + eta * dt.sqrt() * e;
                self.sigma = s.max(*epsilon);
            }
        }
        Ok(())
    }
}

/// Relative price driven by independent stochastic coefficients. The
/// coefficient stream and the price stream are distinct sub-streams of the
/// seed.
pub fn simulate_stochastic_vol_drift(
    spec: &StochasticSpec,
    horizon: f64,
    n: usize,
    seed: u64,
    path: u64,
) -> Result<PathBundle> {
    let dt = check_horizon(horizon, n)?;
    let mut coeffs = CoefficientSampler::new(spec, seed, path)?;
    let mut rng = stream(seed, path, Purpose::Price);
    let sq = dt.sqrt();
    let mut ln_s = vec![0.0];
    let mut sig = Vec::with_capacity(n + 1);
    let mut mus = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (m, s) = coeffs.current();
        sig.push(s);
        mus.push(m);
        let e = normal(&mut rng);
        ln_s.push(ln_s[i] + m * dt + s * sq * e);
        coeffs.advance(dt)?;
    }
    let (m, s) = coeffs.current();
    sig.push(s);
    mus.push(m);
    Ok(PathBundle {
        t: grid(horizon, n),
        ln_s,
        sigma_t: Some(sig),
        mu_t: Some(mus),
        seed,
        ..Default::default()
    })
}
