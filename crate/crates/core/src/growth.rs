//! Long-run logarithmic growth of the liquidity provider.
//!
//! The mispricing regulators grow linearly in the long run,
//! `E[L_T]/T → α` and `E[U_T]/T → β`, and the LP's expected log growth is
//! `w μ_X + (1-w) μ_Y + k_L α + k_U β` with fee weights
//! `k_L = (1-γ)w(1-w)/(1-w+γw)` and `k_U = (1-γ)w(1-w)/(γ(1-w)+w)`.
//! Dividing the fee part by the rebalancing excess growth `w(1-w)σ²/2`
//! gives the growth ratio `g(w, γ)`.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arbitrage::RegulatorCoefficients;
use crate::error::{domain, Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::rng::{mean_stderr, stream, Purpose};
use crate::spectral::time_dependent::TimeDependentSystem;
use crate::spectral::CoefficientField;

const THETA_SERIES: f64 = 1e-6;

fn check_gamma(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return domain(format!("gamma out of range (0,1): {gamma}"));
    }
    Ok(-gamma.ln())
}

fn check_weight(w: f64) -> Result<()> {
    if !(w > 0.0 && w < 1.0) {
        return domain(format!("weight out of range (0,1): {w}"));
    }
    Ok(())
}

/// `(α̂, β̂)` with `α = (σ²/2) α̂` and `β = (σ²/2) β̂` for constant
/// coefficients on the band `[-c, c]`.
fn unit_alpha_beta(theta: f64, c: f64) -> (f64, f64) {
    if theta.abs() < THETA_SERIES {
        let tc = theta * c;
        let base = 1.0 / (2.0 * c);
        (
            base * (1.0 - tc + tc * tc / 3.0),
            base * (1.0 + tc + tc * tc / 3.0),
        )
    } else {
        let x = 2.0 * theta * c;
        (theta / x.exp_m1(), theta / -(-x).exp_m1())
    }
}

/// Closed-form `(α, β)` for constant drift `mu` and volatility `sigma` of the
/// relative log price: the stationary mispricing is a truncated exponential
/// with tilt `θ = 2μ/σ²`.
pub fn alpha_beta_gbm(mu: f64, sigma: f64, gamma: f64) -> Result<(f64, f64)> {
    let c = check_gamma(gamma)?;
    if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
        return domain(format!(
            "need finite mu and positive sigma, got ({mu}, {sigma})"
        ));
    }
    let theta = 2.0 * mu / (sigma * sigma);
    let (a, b) = unit_alpha_beta(theta, c);
    let half = 0.5 * sigma * sigma;
    Ok((half * a, half * b))
}

/// Quadrature of the stationary averages
/// `α = ∫[σ²/(4c) + μ(x/(2c) - ½)]ω / ∫ω` and `β` with `+½`, using
/// nested adaptive Simpson for the speed measure itself.
pub fn alpha_beta_quadrature(field: &CoefficientField, gamma: f64) -> Result<(f64, f64)> {
    let c = check_gamma(gamma)?;
    if (field.c() - c).abs() > 1e-12 * c {
        return domain(format!(
            "field band {} does not match -ln(gamma) = {c}",
            field.c()
        ));
    }
    let avg = StationaryAverager::new(field)?;
    let var = avg.mean(|x| field.sigma(x).powi(2))?;
    let drift_slope = avg.mean(|x| field.mu(x) * x / (2.0 * c))?;
    let drift = avg.mean(|x| field.mu(x))?;
    let alpha = var / (4.0 * c) + drift_slope - 0.5 * drift;
    let beta = var / (4.0 * c) + drift_slope + 0.5 * drift;
    Ok((alpha, beta))
}

/// Stationary expectations `∫fω/∫ω` with `ω` evaluated by quadrature.
struct StationaryAverager<'a> {
    field: &'a CoefficientField,
    edges: Vec<f64>,
    phi: Vec<f64>,
    norm: f64,
}

const PANELS: usize = 32;

impl<'a> StationaryAverager<'a> {
    fn new(field: &'a CoefficientField) -> Result<StationaryAverager<'a>> {
        let c = field.c();
        let edges: Vec<f64> = (0..=PANELS)
            .map(|i| -c + 2.0 * c * i as f64 / PANELS as f64)
            .collect();
        let mut phi = vec![0.0];
        for w in edges.windows(2) {
            let step = adaptive_simpson(|x| ratio(field, x), w[0], w[1], 1e-14)?;
            phi.push(phi.last().unwrap() + step);
        }
        // Shift so the largest exponent is zero.
        let top = phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        phi.iter_mut().for_each(|p| *p -= top);
        let mut avg = StationaryAverager {
            field,
            edges,
            phi,
            norm: 1.0,
        };
        avg.norm = avg.integrate(|_| 1.0)?;
        if !(avg.norm > 0.0 && avg.norm.is_finite()) {
            return Err(Error::Quadrature(
                "speed measure normalizer is degenerate".into(),
            ));
        }
        Ok(avg)
    }

    fn omega(&self, panel: usize, x: f64) -> f64 {
        let x0 = self.edges[panel];
        let inner = if x == x0 {
            0.0
        } else {
            adaptive_simpson(|s| ratio(self.field, s), x0, x, 1e-14).unwrap_or(f64::NAN)
        };
        let s = self.field.sigma(x);
        2.0 / (s * s) * (self.phi[panel] + inner).exp()
    }

    fn integrate(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let c = self.field.c();
        let mut total = 0.0;
        for p in 0..PANELS {
            let (a, b) = (self.edges[p], self.edges[p + 1]);
            // Scale for a relative tolerance of about 1e-12 per panel.
            let scale = (f(a) * self.omega(p, a))
                .abs()
                .max((f(b) * self.omega(p, b)).abs())
                .max(1e-300)
                * (b - a);
            total += adaptive_simpson(|x| f(x) * self.omega(p, x), a, b, 1e-12 * scale)?;
        }
        if !total.is_finite() {
            return Err(Error::Quadrature(format!(
                "stationary average diverged on [{}, {c}]",
                -c
            )));
        }
        Ok(total)
    }

    fn mean(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        Ok(self.integrate(f)? / self.norm)
    }
}

fn ratio(field: &CoefficientField, x: f64) -> f64 {
    let s = field.sigma(x);
    2.0 * field.mu(x) / (s * s)
}

/// Coefficients of the mispricing generator.
#[derive(Debug, Clone)]
pub enum Coefficients {
    /// Constant drift and volatility of `ln(S_X/S_Y)`.
    Gbm {
        mu: f64,
        sigma: f64,
    },
    Field(CoefficientField),
}

#[derive(Debug, Clone)]
pub struct GrowthParams {
    pub w: f64,
    pub gamma: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    pub coefficients: Coefficients,
}

impl GrowthParams {
    pub fn gbm(w: f64, gamma: f64, mu_x: f64, mu_y: f64, mu: f64, sigma: f64) -> GrowthParams {
        GrowthParams {
            w,
            gamma,
            mu_x,
            mu_y,
            coefficients: Coefficients::Gbm { mu, sigma },
        }
    }

    /// `θ = 2μ/σ²` for constant coefficients.
    pub fn theta(&self) -> Option<f64> {
        match &self.coefficients {
            Coefficients::Gbm { mu, sigma } => Some(2.0 * mu / (sigma * sigma)),
            Coefficients::Field(f) => f.constants().map(|(mu, s)| 2.0 * mu / (s * s)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_weight(self.w)?;
        check_gamma(self.gamma)?;
        if !(self.mu_x.is_finite() && self.mu_y.is_finite()) {
            return domain("component drifts must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub w: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Total long-run `E[ln V_T]/T`.
    pub rate: f64,
    pub drift_part: f64,
    pub fee_part: f64,
    pub g: f64,
    pub spt_excess: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta_stderr: Option<f64>,
}

impl GrowthReport {
    /// Assembles the report from the regulator rates and the effective
    /// variance of the relative price.
    pub fn assemble(
        w: f64,
        gamma: f64,
        mu_x: f64,
        mu_y: f64,
        alpha: f64,
        beta: f64,
        sigma2: f64,
    ) -> Result<GrowthReport> {
        check_weight(w)?;
        check_gamma(gamma)?;
        let k = RegulatorCoefficients::new(w, gamma)?;
        let drift_part = w * mu_x + (1.0 - w) * mu_y;
        let fee_part = k.ell_l * alpha + k.ell_u * beta;
        let spt_excess = 0.5 * w * (1.0 - w) * sigma2;
        let rate = drift_part + fee_part;
        debug_assert_eq!(rate, drift_part + fee_part);
        Ok(GrowthReport {
            w,
            gamma,
            alpha,
            beta,
            rate,
            drift_part,
            fee_part,
            g: fee_part / spt_excess,
            spt_excess,
            alpha_stderr: None,
            beta_stderr: None,
        })
    }
}

/// Long-run expected log growth of the LP.
pub fn lp_growth_rate(params: &GrowthParams) -> Result<GrowthReport> {
    params.validate()?;
    let (alpha, beta, sigma2) = match &params.coefficients {
        Coefficients::Gbm { mu, sigma } => {
            let (a, b) = alpha_beta_gbm(*mu, *sigma, params.gamma)?;
            (a, b, sigma * sigma)
        }
        Coefficients::Field(f) => {
            let (a, b) = alpha_beta_quadrature(f, params.gamma)?;
            let var = StationaryAverager::new(f)?.mean(|x| f.sigma(x).powi(2))?;
            (a, b, var)
        }
    };
    GrowthReport::assemble(
        params.w,
        params.gamma,
        params.mu_x,
        params.mu_y,
        alpha,
        beta,
        sigma2,
    )
}

/// Growth ratio `g(w, γ)` for tilt `θ`; independent of `σ`.
pub fn growth_ratio(w: f64, gamma: f64, theta: f64) -> Result<f64> {
    check_weight(w)?;
    let c = check_gamma(gamma)?;
    if !theta.is_finite() {
        return domain("theta must be finite");
    }
    let (a, b) = unit_alpha_beta(theta, c);
    let big_a = (1.0 - gamma) / (1.0 - w + gamma * w);
    let big_b = (1.0 - gamma) / (gamma * (1.0 - w) + w);
    Ok(big_a * a + big_b * b)
}

/// `lim_{γ→0} g(w, γ)`.
pub fn growth_ratio_zero_fee_limit(w: f64, theta: f64) -> f64 {
    if theta > 0.0 {
        theta / w
    } else if theta < 0.0 {
        -theta / (1.0 - w)
    } else {
        0.0
    }
}

pub const GAMMA_MIN: f64 = 1e-4;
pub const GAMMA_MAX: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalFee {
    pub w: f64,
    pub theta: f64,
    pub gamma_star: f64,
    pub g_star: f64,
    /// True when `g*` beats both endpoint limits by more than `1e-9`.
    pub interior: bool,
}

/// Uniform `γ` grid on `[GAMMA_MIN, GAMMA_MAX]`.
pub fn gamma_grid(points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n)
        .map(|i| GAMMA_MIN + (GAMMA_MAX - GAMMA_MIN) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Maximizes `g(w, ·)` over a `γ` grid of at least 1000 points and refines
/// the best cell by golden-section search.
pub fn optimal_fee(w: f64, theta: f64, points: usize) -> Result<OptimalFee> {
    let grid = gamma_grid(points.max(1000));
    let values: Vec<f64> = grid
        .iter()
        .map(|&g| growth_ratio(w, g, theta))
        .collect::<Result<_>>()?;
    let best = argmax(&values);
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (mut gamma_star, mut g_star) = (grid[best], values[best]);
    let f = |g: f64| growth_ratio(w, g, theta).unwrap_or(f64::NEG_INFINITY);
    let (gs, vs) = golden_max(f, lo, hi, 1e-13);
    if vs > g_star {
        gamma_star = gs;
        g_star = vs;
    }
    let upper = 1.0;
    let lower = growth_ratio_zero_fee_limit(w, theta);
    let interior = g_star > upper + 1e-9 && g_star > lower + 1e-9;
    Ok(OptimalFee {
        w,
        theta,
        gamma_star,
        g_star,
        interior,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `g` on a `w × γ` grid at fixed `θ`, with the best `γ` per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub theta: f64,
    pub w: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `g[i][j] = g(w[i], gamma[j])`.
    pub g: Vec<Vec<f64>>,
    pub argmax: Vec<usize>,
}

pub fn heatmap(w: &[f64], gamma: &[f64], theta: f64) -> Result<Heatmap> {
    if w.is_empty() || gamma.is_empty() {
        return domain("heatmap ranges must be non-empty");
    }
    let g: Vec<Vec<f64>> = w
        .par_iter()
        .map(|&wi| {
            gamma
                .iter()
                .map(|&gj| growth_ratio(wi, gj, theta))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let argmax = g.iter().map(|row| argmax(row)).collect();
    Ok(Heatmap {
        theta,
        w: w.to_vec(),
        gamma: gamma.to_vec(),
        g,
        argmax,
    })
}

pub const HEATMAP_SCHEMA: &str = "heatmap/1";

impl Heatmap {
    /// Long format: one row per cell, flagging each row's maximum.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# g3m-schema: {HEATMAP_SCHEMA}")?;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["theta", "w", "gamma", "g", "row_max"])?;
        for (i, row) in self.g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                wtr.write_record([
                    format!("{:e}", self.theta),
                    format!("{:e}", self.w[i]),
                    format!("{:e}", self.gamma[j]),
                    format!("{:e}", v),
                    u8::from(self.argmax[i] == j).to_string(),
                ])?;
            }
        }
        wtr.flush()
    }
}

/// Growth rate from the declared long-run limits of time-varying
/// coefficients.
pub fn growth_rate_time_inhomo(
    limit_field: &CoefficientField,
    gamma: f64,
    w: f64,
    mu_x: f64,
    mu_y: f64,
) -> Result<GrowthReport> {
    lp_growth_rate(&GrowthParams {
        w,
        gamma,
        mu_x,
        mu_y,
        coefficients: Coefficients::Field(limit_field.clone()),
    })
}

/// Draws one `(μ, σ²)` pair.
pub type CoefficientDraw = Box<dyn Fn(&mut ChaCha8Rng) -> (f64, f64) + Send + Sync>;

/// Law of the long-run limits `(μ, σ²)` of independent stochastic
/// coefficients.
pub enum LimitDistribution {
    /// Atoms `(probability, μ, σ²)`.
    Discrete(Vec<(f64, f64, f64)>),
    /// Draws `(μ, σ²)`; expectations are estimated by Monte Carlo.
    Sampler(CoefficientDraw),
}

impl std::fmt::Debug for LimitDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LimitDistribution::Discrete(atoms) => f.debug_tuple("Discrete").field(atoms).finish(),
            LimitDistribution::Sampler(_) => f.write_str("Sampler(..)"),
        }
    }
}

/// `α = E[α(μ, σ)]`, `β = E[β(μ, σ)]` over the limit law; the effective
/// variance is `E[σ²]`.
pub fn growth_rate_stochastic(
    dist: &LimitDistribution,
    gamma: f64,
    w: f64,
    mu_x: f64,
    mu_y: f64,
    samples: usize,
    seed: u64,
) -> Result<GrowthReport> {
    check_gamma(gamma)?;
    let point = |mu: f64, s2: f64| -> Result<(f64, f64)> {
        if !(s2 > 0.0) {
            return Err(Error::Ellipticity {
                value: s2.max(0.0).sqrt(),
                floor: 0.0,
            });
        }
        alpha_beta_gbm(mu, s2.sqrt(), gamma)
    };
    match dist {
        LimitDistribution::Discrete(atoms) => {
            let total: f64 = atoms.iter().map(|a| a.0).sum();
            if atoms.is_empty()
                || atoms.iter().any(|a| !(a.0 >= 0.0))
                || (total - 1.0).abs() > 1e-12
            {
                return domain("limit distribution weights must be non-negative and sum to one");
            }
            let (mut alpha, mut beta, mut var) = (0.0, 0.0, 0.0);
            for &(p, mu, s2) in atoms {
                if p == 0.0 {
                    continue;
                }
                let (a, b) = point(mu, s2)?;
                alpha += p * a;
                beta += p * b;
                var += p * s2;
            }
            GrowthReport::assemble(w, gamma, mu_x, mu_y, alpha, beta, var)
        }
        LimitDistribution::Sampler(draw) => {
            if samples < 1000 {
                return domain("Monte Carlo limit law needs at least 1000 samples");
            }
            let draws: Vec<(f64, f64, f64)> = (0..samples as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream(seed, i, Purpose::Coefficients);
                    let (mu, s2) = draw(&mut rng);
                    point(mu, s2).map(|(a, b)| (a, b, s2))
                })
                .collect::<Result<_>>()?;
            let alphas: Vec<f64> = draws.iter().map(|d| d.0).collect();
            let betas: Vec<f64> = draws.iter().map(|d| d.1).collect();
            let vars: Vec<f64> = draws.iter().map(|d| d.2).collect();
            for (name, xs) in [("alpha", &alphas), ("beta", &betas), ("sigma^2", &vars)] {
                tail_check(name, xs)?;
            }
            let (alpha, sa) = mean_stderr(&alphas);
            let (beta, sb) = mean_stderr(&betas);
            let (var, _) = mean_stderr(&vars);
            let mut r = GrowthReport::assemble(w, gamma, mu_x, mu_y, alpha, beta, var)?;
            r.alpha_stderr = Some(sa);
            r.beta_stderr = Some(sb);
            Ok(r)
        }
    }
}

/// Rejects samples whose mean is dominated by a few draws or disagrees
/// between halves, symptoms of a missing expectation.
fn tail_check(name: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Integrability(format!("non-finite {name} draw")));
    }
    let sum: f64 = xs.iter().map(|x| x.abs()).sum();
    let largest = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if sum > 0.0 && largest > 0.05 * sum {
        return Err(Error::Integrability(format!(
            "one {name} draw carries {:.0}% of the total",
            100.0 * largest / sum
        )));
    }
    let half = xs.len() / 2;
    let (m1, s1) = mean_stderr(&xs[..half]);
    let (m2, s2) = mean_stderr(&xs[half..]);
    let spread = (s1 * s1 + s2 * s2).sqrt();
    if (m1 - m2).abs() > 6.0 * spread && (m1 - m2).abs() > 1e-12 * m1.abs().max(m2.abs()) {
        return Err(Error::Integrability(format!(
            "{name} halves disagree: {m1} vs {m2}"
        )));
    }
    Ok(())
}

/// Growth rate over `[0, horizon]` for driftless mispricing with
/// deterministic volatility: `α = β = (1/(4c)) · (1/T)∫σ²`.
pub fn growth_rate_time_dependent_vol(
    sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
    gamma: f64,
    w: f64,
    mu_x: f64,
    mu_y: f64,
    horizon: f64,
) -> Result<GrowthReport> {
    let c = check_gamma(gamma)?;
    if !(horizon > 0.0) {
        return domain("horizon must be positive");
    }
    let sys = TimeDependentSystem::new(sigma, c, 1)?;
    let var = sys.integrated_variance(0.0, horizon)? / horizon;
    let alpha = var / (4.0 * c);
    GrowthReport::assemble(w, gamma, mu_x, mu_y, alpha, alpha, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, proptest};
    use rand::Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gbm_closed_forms() {
        let (a, b) = alpha_beta_gbm(0.0, 1.0, (-1f64).exp()).unwrap();
        assert!((a - 0.25).abs() < 1e-15 && (b - 0.25).abs() < 1e-15);
        let (a, b) = alpha_beta_gbm(0.0, 1.0, 0.997).unwrap();
        assert!(rel(a, 1.0 / (4.0 * -(0.997f64).ln())) < 1e-14 && a == b);
        assert!((a - 83.2083).abs() < 1e-4);
        let (a, b) = alpha_beta_gbm(0.05, 0.2, 0.997).unwrap();
        // Independent evaluation through powers of γ.
        let th = 2.5;
        let g = 0.997f64;
        assert!(rel(a, th * 0.04 / (2.0 * (g.powf(-2.0 * th) - 1.0))) < 1e-10);
        assert!(rel(b, th * 0.04 / (2.0 * (1.0 - g.powf(2.0 * th)))) < 1e-10);
        assert!((b - a - 0.05).abs() < 1e-12);
        assert!((a - 3.303_393_4).abs() < 1e-6 && (b - 3.353_393_4).abs() < 1e-6);
    }

    #[test]
    fn theta_continuity() {
        let (a0, b0) = alpha_beta_gbm(0.0, 0.3, 0.99).unwrap();
        for mu in [4.5e-10, -4.5e-10, 4.5e-8, 1e-6] {
            let (a, b) = alpha_beta_gbm(mu, 0.3, 0.99).unwrap();
            assert!(rel(a, a0) < 1e-6 && rel(b, b0) < 1e-6);
        }
        // Either side of the series switch agrees.
        let c = 0.2;
        let (lo, _) = unit_alpha_beta(0.999_999e-6, c);
        let (hi, _) = unit_alpha_beta(1.000_001e-6, c);
        assert!(rel(lo, hi) < 1e-12);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for gamma in [0.9, 0.99, 0.997, 0.9997] {
            for theta in [-5.0, -2.5, 0.0, 2.5, 5.0] {
                let sigma = 0.3;
                let mu = theta * sigma * sigma / 2.0;
                let field = CoefficientField::gbm(mu, sigma, gamma, 51).unwrap();
                let (qa, qb) = alpha_beta_quadrature(&field, gamma).unwrap();
                let (a, b) = alpha_beta_gbm(mu, sigma, gamma).unwrap();
                assert!(
                    rel(qa, a) < 1e-8 && rel(qb, b) < 1e-8,
                    "γ={gamma} θ={theta}: {qa} {a} / {qb} {b}"
                );
            }
        }
        let field = CoefficientField::gbm(0.0, 0.3, 0.99, 51).unwrap();
        assert!(alpha_beta_quadrature(&field, 0.98).is_err());
    }

    #[test]
    fn spt_limit_and_known_values() {
        for w in [0.1, 0.5, 0.9] {
            for theta in [-2.5, 0.0, 2.5] {
                assert!((growth_ratio(w, 1.0 - 1e-8, theta).unwrap() - 1.0).abs() < 1e-4);
            }
        }
        let r = lp_growth_rate(&GrowthParams::gbm(0.5, 0.997, 0.03, 0.03, 0.0, 1.0)).unwrap();
        let gamma = 0.997f64;
        let g = -2.0 * (1.0 - gamma) / ((1.0 + gamma) * gamma.ln());
        assert!(rel(r.g, g) < 1e-12);
        assert!((r.g - 0.999_999_2).abs() < 1e-7);
        assert!((r.fee_part - 0.125 * g).abs() < 1e-12);
        assert_eq!(r.rate, r.drift_part + r.fee_part);
        assert!((r.drift_part - 0.03).abs() < 1e-15);
        let near_one =
            lp_growth_rate(&GrowthParams::gbm(0.3, 1.0 - 1e-8, 0.0, 0.0, 0.0, 1.0)).unwrap();
        assert!((near_one.fee_part - 0.5 * 0.3 * 0.7).abs() < 1e-5);
        let edge = lp_growth_rate(&GrowthParams::gbm(1e-9, 0.997, 0.0, 0.0, 0.0, 1.0)).unwrap();
        assert!(edge.fee_part < 1e-8);
    }

    #[test]
    fn field_report_matches_gbm_report() {
        let field = CoefficientField::gbm(0.02, 0.25, 0.99, 51).unwrap();
        let a = growth_rate_time_inhomo(&field, 0.99, 0.4, 0.01, 0.02).unwrap();
        let b = lp_growth_rate(&GrowthParams::gbm(0.4, 0.99, 0.01, 0.02, 0.02, 0.25)).unwrap();
        assert!(rel(a.rate, b.rate) < 1e-9 && rel(a.g, b.g) < 1e-8);
        assert!(rel(a.spt_excess, b.spt_excess) < 1e-10);
    }

    #[test]
    fn ratio_matches_report() {
        for (w, theta) in [(0.2, -3.0), (0.5, 0.0), (0.8, 1.7)] {
            let sigma = 0.4;
            let r = lp_growth_rate(&GrowthParams::gbm(
                w,
                0.95,
                0.0,
                0.0,
                theta * sigma * sigma / 2.0,
                sigma,
            ))
            .unwrap();
            assert!((growth_ratio(w, 0.95, theta).unwrap() - r.g).abs() < 1e-10);
        }
    }

    #[test]
    fn optimal_fee_behaviour() {
        let o = optimal_fee(0.5, 0.0, 2000).unwrap();
        assert!(!o.interior);
        assert!(o.gamma_star > 1.0 - 1e-3);
        assert!(growth_ratio(0.5, 1e-300, 0.0).unwrap() < 0.01);
        let o = optimal_fee(0.1, 0.0, 2000).unwrap();
        assert!(o.interior && o.g_star > 1.0);
        assert!((o.gamma_star - 0.0557).abs() < 2e-3, "{o:?}");
        assert!((o.g_star - 1.2696).abs() < 1e-3, "{o:?}");
        // Golden-section never loses to the grid.
        let grid = gamma_grid(1000);
        let best = grid
            .iter()
            .map(|&g| growth_ratio(0.1, g, 0.0).unwrap())
            .fold(0.0, f64::max);
        assert!(o.g_star >= best);
    }

    #[test]
    fn heatmap_consistency() {
        let hm = heatmap(&[0.3], &[0.99], 1.0).unwrap();
        assert_eq!(hm.g, vec![vec![growth_ratio(0.3, 0.99, 1.0).unwrap()]]);
        let ws = [0.2, 0.35, 0.5, 0.65, 0.8];
        let gs = gamma_grid(1000);
        let hm = heatmap(&ws, &gs, 0.0).unwrap();
        for i in 0..ws.len() {
            for j in 0..gs.len() {
                let (a, b) = (hm.g[i][j], hm.g[ws.len() - 1 - i][j]);
                assert!((a - b).abs() <= 8.0 * f64::EPSILON * a);
            }
            let o = optimal_fee(ws[i], 0.0, 1000).unwrap();
            assert!((gs[hm.argmax[i]] - o.gamma_star).abs() <= gs[1] - gs[0]);
        }
        let mut buf = Vec::new();
        hm.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# g3m-schema: heatmap/1\ntheta,w,gamma,g,row_max\n"));
        assert_eq!(text.lines().filter(|l| l.ends_with(",1")).count(), ws.len());
        assert!(heatmap(&[], &gs, 0.0).is_err());
    }

    #[test]
    fn stochastic_limits() {
        let gamma = 0.99f64;
        let two_point = LimitDistribution::Discrete(vec![(0.5, 0.0, 0.01), (0.5, 0.0, 0.09)]);
        let r = growth_rate_stochastic(&two_point, gamma, 0.5, 0.0, 0.0, 0, 0).unwrap();
        let exact = -0.05 / (4.0 * gamma.ln());
        assert!((r.alpha - exact).abs() < 1e-12 * exact && (r.beta - exact).abs() < 1e-12 * exact);

        let point = LimitDistribution::Discrete(vec![(1.0, 0.01, 0.04)]);
        let r = growth_rate_stochastic(&point, gamma, 0.5, 0.0, 0.0, 0, 0).unwrap();
        let (a, b) = alpha_beta_gbm(0.01, 0.2, gamma).unwrap();
        assert_eq!((r.alpha, r.beta), (a, b));

        let uniform =
            LimitDistribution::Sampler(Box::new(|rng| (0.0, rng.random_range(0.01..0.09))));
        let r = growth_rate_stochastic(&uniform, gamma, 0.5, 0.0, 0.0, 20_000, 7).unwrap();
        let se = r.alpha_stderr.unwrap();
        assert!(
            (r.alpha - exact).abs() < 4.0 * se,
            "{} vs {exact} ± {se}",
            r.alpha
        );

        // σ² with infinite mean.
        let heavy = LimitDistribution::Sampler(Box::new(|rng| {
            (0.0, 0.01 / rng.random::<f64>().max(1e-300).powi(2))
        }));
        assert!(matches!(
            growth_rate_stochastic(&heavy, gamma, 0.5, 0.0, 0.0, 20_000, 7),
            Err(Error::Integrability(_))
        ));
        let bad = LimitDistribution::Discrete(vec![(0.6, 0.0, 0.01), (0.6, 0.0, 0.09)]);
        assert!(growth_rate_stochastic(&bad, gamma, 0.5, 0.0, 0.0, 0, 0).is_err());
    }

    #[test]
    fn time_dependent_vol_rate() {
        let gamma = 0.99;
        let r = growth_rate_time_dependent_vol(|_| 0.2, gamma, 0.5, 0.0, 0.0, 10.0).unwrap();
        let g = lp_growth_rate(&GrowthParams::gbm(0.5, gamma, 0.0, 0.0, 0.0, 0.2)).unwrap();
        assert!(rel(r.rate, g.rate) < 1e-10);
        let mut prev = f64::INFINITY;
        for t in [10.0, 100.0, 1000.0] {
            let r = growth_rate_time_dependent_vol(
                |s| 0.2 * (1.0 + (-s).exp()).sqrt(),
                gamma,
                0.5,
                0.0,
                0.0,
                t,
            )
            .unwrap();
            let gap = r.rate - g.rate;
            assert!(gap > 0.0 && gap < prev);
            prev = gap;
        }
    }

    proptest! {
        #[test]
        fn ratio_symmetries(d in 0.0f64..0.49, gamma in 0.01f64..0.9999, theta in -8.0f64..8.0) {
            let w = 0.5 + d;
            let g0 = growth_ratio(w, gamma, 0.0).unwrap();
            let g1 = growth_ratio(1.0 - w, gamma, 0.0).unwrap();
            prop_assert!((g0 - g1).abs() <= 4.0 * f64::EPSILON * g0);
            let a = growth_ratio(w, gamma, -theta).unwrap();
            let b = growth_ratio(1.0 - w, gamma, theta).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn fee_rates_positive(mu in -0.5f64..0.5, sigma in 0.05f64..2.0, gamma in 0.5f64..0.9999) {
            let (a, b) = alpha_beta_gbm(mu, sigma, gamma).unwrap();
            prop_assert!(a > 0.0 && b > 0.0);
            prop_assert!((b - a - mu).abs() <= 1e-9 * (a + b));
        }
    }
}
