//! Fine-step simulation of the reflected mispricing.
//!
//! A Gaussian random walk clamped at the band edges overshoots less than the
//! continuous process it approximates, and under-counts the regulators by a
//! term of order `σ√h`. Clamping instead at the shifted edges
//! `±(c - β σ√h)` with `β = -ζ(½)/√(2π)` removes that leading term
//! (the Siegmund/Asmussen–Glynn–Pitman correction), leaving an `O(h)` bias.
//! Each output step is split into `k` sub-steps with `σ√h ≤ κ c`.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::market::{CoefficientSampler, MarketModel, Variant};
use crate::rng::{stream, Purpose};
use crate::spectral::CoefficientField;

/// `-ζ(1/2)/√(2π)`.
pub const OVERSHOOT: f64 = 0.582_597_157_939_010_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Largest sub-step standard deviation as a fraction of `c`.
    pub kappa: f64,
}

impl Default for Resolution {
    fn default() -> Resolution {
        Resolution { kappa: 0.5 }
    }
}

impl Resolution {
    pub fn new(kappa: f64) -> Result<Resolution> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return domain(format!("resolution kappa must lie in (0, 1], got {kappa}"));
        }
        Ok(Resolution { kappa })
    }

    /// Sub-steps needed over `dt` at volatility `sigma` on half-width `c`.
    pub fn substeps(&self, dt: f64, sigma: f64, c: f64) -> usize {
        let need = dt * sigma * sigma / (self.kappa * c).powi(2);
        (need.ceil() as usize).max(1)
    }
}

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Relative price, numeraire leg and regulators on the output grid. `z`
/// lives on the shifted band; see [`SimulatedPath::scaled_z`].
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SimulatedPath {
    pub t: Vec<f64>,
    /// `ln(S_X/S_Y)` relative to its initial value.
    pub ln_s: Vec<f64>,
    pub ln_sy: Vec<f64>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    /// Half-width of the shifted band used on each output step.
    pub c_eff: Vec<f64>,
    pub c: f64,
}

impl SimulatedPath {
    /// Mispricing mapped back from the shifted band onto `[-c, c]`.
    pub fn scaled_z(&self, i: usize) -> f64 {
        let ce = self.c_eff[i.min(self.c_eff.len() - 1)];
        if ce > 0.0 {
            self.z[i] * self.c / ce
        } else {
            0.0
        }
    }
}

/// Per-step source of the relative-price coefficients. One lives per path,
/// so the large sampler variant is not boxed.
#[allow(clippy::large_enum_variant)]
enum Coefficients<'a> {
    Constant { mu: f64, sigma: f64 },
    Table(&'a crate::market::VolTable),
    Stochastic(CoefficientSampler<'a>),
}

impl Coefficients<'_> {
    /// `(μ, σ)` for the step `[t0, t1]`, then advances.
    fn step(&mut self, t0: f64, t1: f64) -> Result<(f64, f64)> {
        match self {
            Coefficients::Constant { mu, sigma } => Ok((*mu, *sigma)),
            Coefficients::Table(table) => {
                // Simpson average of σ² keeps the integrated variance exact
                // to fourth order.
                let v = |s: f64| table.eval(s).powi(2);
                let var = (v(t0) + 4.0 * v(0.5 * (t0 + t1)) + v(t1)) / 6.0;
                Ok((0.0, var.sqrt()))
            }
            Coefficients::Stochastic(sampler) => {
                let out = sampler.current();
                sampler.advance(t1 - t0)?;
                Ok(out)
            }
        }
    }
}

/// Conditional law of the numeraire increment given the relative one.
struct Numeraire {
    mu_y: f64,
    mu: f64,
    beta: f64,
    resid_sd: f64,
}

impl Numeraire {
    fn new(model: &MarketModel) -> Result<Numeraire> {
        match model.variant {
            Variant::Constant => {
                model.cholesky()?;
                let s2 = model.sigma2();
                let (beta, resid) = if s2 > 0.0 {
                    let cov = model.sigma_xy - model.sigma_yy;
                    (cov / s2, (model.sigma_yy - cov * cov / s2).max(0.0))
                } else {
                    (0.0, model.sigma_yy.max(0.0))
                };
                Ok(Numeraire {
                    mu_y: model.mu_y,
                    mu: model.mu(),
                    beta,
                    resid_sd: resid.sqrt(),
                })
            }
            _ => Ok(Numeraire {
                mu_y: model.mu_y,
                mu: 0.0,
                beta: 0.0,
                resid_sd: 0.0,
            }),
        }
    }

    fn increment(&self, d_rel: f64, dt: f64, rng: &mut ChaCha8Rng) -> f64 {
        let mut dy = self.mu_y * dt + self.beta * (d_rel - self.mu * dt);
        if self.resid_sd > 0.0 {
            let e: f64 = StandardNormal.sample(rng);
            dy += self.resid_sd * dt.sqrt() * e;
        }
        dy
    }
}

/// Simulates the reflected mispricing of `model` on `[-c, c]` from `z0`
/// over `n` output steps.
#[allow(clippy::too_many_arguments)]
pub fn simulate_market_path(
    model: &MarketModel,
    c: f64,
    z0: f64,
    horizon: f64,
    n: usize,
    res: Resolution,
    seed: u64,
    path: u64,
) -> Result<SimulatedPath> {
    if !(horizon > 0.0 && horizon.is_finite()) || n == 0 {
        return domain("need a positive horizon and at least one step");
    }
    if !(c >= 0.0 && c.is_finite()) || !(z0.abs() <= c) {
        return domain(format!("initial mispricing {z0} outside [-{c}, {c}]"));
    }
    let mut coeffs = match &model.variant {
        Variant::Constant => {
            model.cholesky()?;
            Coefficients::Constant {
                mu: model.mu(),
                sigma: model.sigma2().max(0.0).sqrt(),
            }
        }
        Variant::TimeDependentSigma { table } => Coefficients::Table(table),
        Variant::StochasticIndependent { spec } => {
            Coefficients::Stochastic(CoefficientSampler::new(spec, seed, path)?)
        }
    };
    let numeraire = Numeraire::new(model)?;
    let mut price = stream(seed, path, Purpose::Price);
    let mut ortho = stream(seed, path, Purpose::Orthogonal);

    let dt = horizon / n as f64;
    let mut out = SimulatedPath {
        c,
        ..Default::default()
    };
    for v in [
        &mut out.t,
        &mut out.ln_s,
        &mut out.ln_sy,
        &mut out.l,
        &mut out.u,
        &mut out.z,
        &mut out.c_eff,
    ] {
        v.reserve(n + 1);
    }
    let (mut s, mut y, mut l, mut u) = (
        Neumaier::default(),
        Neumaier::default(),
        Neumaier::default(),
        Neumaier::default(),
    );
    let mut z = z0;
    let push = |out: &mut SimulatedPath, t: f64, s: f64, y: f64, l: f64, u: f64, z: f64| {
        out.t.push(t);
        out.ln_s.push(s);
        out.ln_sy.push(y);
        out.l.push(l);
        out.u.push(u);
        out.z.push(z);
    };
    push(&mut out, 0.0, 0.0, 0.0, 0.0, 0.0, z);
    for i in 0..n {
        let (t0, t1) = (i as f64 * dt, (i + 1) as f64 * dt);
        let (mu, sigma) = coeffs.step(t0, t1)?;
        let (ds, dl, du, ce);
        if c == 0.0 {
            // Without fees the pool tracks the price exactly.
            let e: f64 = StandardNormal.sample(&mut price);
            ds = mu * dt + sigma * dt.sqrt() * e;
            (dl, du, ce) = ((-ds).max(0.0), ds.max(0.0), 0.0);
        } else {
            let k = res.substeps(dt, sigma, c);
            let h = dt / k as f64;
            let sd = sigma * h.sqrt();
            ce = (c - OVERSHOOT * sd).max(0.0);
            let (mut acc_s, mut acc_l, mut acc_u) = (0.0, 0.0, 0.0);
            // Re-enter the band if it narrowed since the last step.
            if z > ce {
                acc_u += z - ce;
                z = ce;
            } else if z < -ce {
                acc_l += -ce - z;
                z = -ce;
            }
            let m = mu * h;
            // Branch-free clamp: edge hits are too frequent to predict.
            for _ in 0..k {
                let e: f64 = StandardNormal.sample(&mut price);
                let d = m + sd * e;
                acc_s += d;
                let w = z + d;
                acc_u += (w - ce).max(0.0);
                acc_l += (-ce - w).max(0.0);
                z = w.clamp(-ce, ce);
            }
            (ds, dl, du) = (acc_s, acc_l, acc_u);
        }
        if c == 0.0 {
            z = 0.0;
        }
        s.add(ds);
        l.add(dl);
        u.add(du);
        y.add(numeraire.increment(ds, dt, &mut ortho));
        out.c_eff.push(ce);
        push(&mut out, t1, s.value(), y.value(), l.value(), u.value(), z);
    }
    let last = *out.c_eff.last().unwrap();
    out.c_eff.push(last);
    Ok(out)
}

/// Terminal regulators and mispricing of a state-dependent reflected
/// diffusion `dZ = μ(Z)dt + σ(Z)dW` on the field's band, by Euler steps with
/// the edge-dependent continuity correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub l: f64,
    pub u: f64,
    pub z: f64,
}

pub fn simulate_field(
    field: &CoefficientField,
    z0: f64,
    tau: f64,
    res: Resolution,
    seed: u64,
    path: u64,
) -> Result<FieldSample> {
    let c = field.c();
    if !(z0.abs() <= c) {
        return domain(format!("initial mispricing {z0} outside [-{c}, {c}]"));
    }
    if !(tau > 0.0) {
        return domain("horizon must be positive");
    }
    let sigma_max = field
        .grid()
        .iter()
        .map(|&x| field.sigma(x))
        .fold(0.0f64, f64::max);
    let k = res.substeps(tau, sigma_max, c);
    let h = tau / k as f64;
    let sq = h.sqrt();
    let lo = -c + OVERSHOOT * field.sigma(-c) * sq;
    let hi = c - OVERSHOOT * field.sigma(c) * sq;
    if !(lo < hi) {
        return domain("band too narrow for the resolution");
    }
    let mut rng = stream(seed, path, Purpose::Price);
    let (mut z, mut l, mut u) = (z0.clamp(lo, hi), 0.0, 0.0);
    let constants = field.constants();
    for _ in 0..k {
        let (mu, sigma) = match constants {
            Some(ms) => ms,
            None => (field.mu(z), field.sigma(z)),
        };
        let e: f64 = StandardNormal.sample(&mut rng);
        let w = z + mu * h + sigma * sq * e;
        u += (w - hi).max(0.0);
        l += (lo - w).max(0.0);
        z = w.clamp(lo, hi);
    }
    Ok(FieldSample { l, u, z })
}
