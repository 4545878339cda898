//! Sturm–Liouville machinery for the mispricing diffusion reflected at
//! `±c`.
//!
//! The generator `G = ½σ²(x)∂² + μ(x)∂` with Neumann boundaries is written in
//! the self-adjoint form `G u = (1/ω)(p u')'` with `p = e^Φ`,
//! `Φ(x) = ∫_{-c}^x 2μ/σ²` and speed measure `ω = (2/σ²) e^Φ`. Its
//! eigenfunctions are orthonormal under `ω`, the stationary density is
//! `ω/∫ω`, and the expected regulator functional
//! `u(t, x) = E[g(Z_T) + ∫f - ∫a dL + ∫b dU]` solves a Neumann problem whose
//! eigen-expansion is assembled here.

pub mod time_dependent;
pub mod tridiag;

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::quadrature::{dot, simpson_weights, trapezoid_weights};
use tridiag::SymTridiag;

pub use time_dependent::TimeDependentSystem;

pub type CoefFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Drift and volatility of the mispricing on `[-c, c]`, sampled on `m`
/// equally spaced nodes.
#[derive(Clone)]
pub struct CoefficientField {
    mu: CoefFn,
    sigma: CoefFn,
    c: f64,
    m: usize,
    epsilon: f64,
    constants: Option<(f64, f64)>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("c", &self.c)
            .field("m", &self.m)
            .field("epsilon", &self.epsilon)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

pub const DEFAULT_NODES: usize = 2001;
pub const DEFAULT_MODES: usize = 64;
const DEFAULT_EPSILON: f64 = 1e-12;

impl CoefficientField {
    pub fn new(
        mu: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
        c: f64,
        m: usize,
    ) -> Result<CoefficientField> {
        let field = CoefficientField {
            mu: Arc::new(mu),
            sigma: Arc::new(sigma),
            c,
            m,
            epsilon: DEFAULT_EPSILON,
            constants: None,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn constant(mu: f64, sigma: f64, c: f64, m: usize) -> Result<CoefficientField> {
        let mut f = CoefficientField::new(move |_| mu, move |_| sigma, c, m)?;
        f.constants = Some((mu, sigma));
        Ok(f)
    }

    /// Constant coefficients on the band of fee parameter `gamma`.
    pub fn gbm(mu: f64, sigma: f64, gamma: f64, m: usize) -> Result<CoefficientField> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return domain(format!("gamma out of range (0,1): {gamma}"));
        }
        CoefficientField::constant(mu, sigma, -gamma.ln(), m)
    }

    /// Sets the strong-ellipticity floor `σ ≥ ε`.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<CoefficientField> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return domain(format!("band half-width must be positive, got {}", self.c));
        }
        if self.m < 51 || self.m.is_multiple_of(2) {
            return domain(format!(
                "node count must be odd and at least 51, got {}",
                self.m
            ));
        }
        if !(self.epsilon > 0.0) {
            return domain("ellipticity floor must be positive");
        }
        for x in self.grid() {
            let s = self.sigma(x);
            if !(s >= self.epsilon) {
                return Err(Error::Ellipticity {
                    value: s,
                    floor: self.epsilon,
                });
            }
            if !self.mu(x).is_finite() {
                return domain(format!("drift is not finite at x = {x}"));
            }
        }
        Ok(())
    }

    pub fn mu(&self, x: f64) -> f64 {
        (self.mu)(x)
    }

    pub fn sigma(&self, x: f64) -> f64 {
        (self.sigma)(x)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `(μ, σ)` when the field was built from constants.
    pub fn constants(&self) -> Option<(f64, f64)> {
        self.constants
    }

    pub fn h(&self) -> f64 {
        2.0 * self.c / (self.m - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        grid(self.c, self.m)
    }
}

fn grid(c: f64, m: usize) -> Vec<f64> {
    let h = 2.0 * c / (m - 1) as f64;
    (0..m)
        .map(|i| if i == m - 1 { c } else { -c + i as f64 * h })
        .collect()
}

/// Speed-measure samples on the grid together with `p` at cell midpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedMeasure {
    pub x: Vec<f64>,
    pub omega: Vec<f64>,
    /// `p = e^Φ` at the midpoints `x_i + h/2`.
    pub p_mid: Vec<f64>,
    /// `∫ω dx` by composite Simpson.
    pub normalizer: f64,
    pub h: f64,
}

fn speed_measure_on(field: &CoefficientField, m: usize) -> Result<SpeedMeasure> {
    let c = field.c;
    let x = grid(c, m);
    let h = 2.0 * c / (m - 1) as f64;
    let ratio = |s: f64| -> Result<f64> {
        let sig = field.sigma(s);
        if !(sig >= field.epsilon) {
            return Err(Error::Ellipticity {
                value: sig,
                floor: field.epsilon,
            });
        }
        Ok(2.0 * field.mu(s) / (sig * sig))
    };
    let mut omega = Vec::with_capacity(m);
    let mut p_mid = Vec::with_capacity(m - 1);
    // Φ is accumulated with Simpson's rule on half cells, so both node and
    // midpoint values are fourth-order accurate.
    let mut phi = 0.0f64;
    let mut f_left = ratio(x[0])?;
    for i in 0..m {
        let sig = field.sigma(x[i]);
        omega.push(2.0 / (sig * sig) * phi.exp());
        if i + 1 == m {
            break;
        }
        let q = 0.25 * h;
        let f_q1 = ratio(x[i] + q)?;
        let f_mid = ratio(x[i] + 2.0 * q)?;
        let f_q3 = ratio(x[i] + 3.0 * q)?;
        let f_right = ratio(x[i + 1])?;
        let phi_mid = phi + q / 3.0 * (f_left + 4.0 * f_q1 + f_mid);
        p_mid.push(phi_mid.exp());
        phi = phi_mid + q / 3.0 * (f_mid + 4.0 * f_q3 + f_right);
        f_left = f_right;
    }
    if omega
        .iter()
        .chain(&p_mid)
        .any(|v| !v.is_finite() || *v <= 0.0)
    {
        return domain("speed measure overflows; drift too large for the band");
    }
    let normalizer = if m % 2 == 1 {
        dot(&simpson_weights(m, h), &omega)
    } else {
        dot(&trapezoid_weights(m, h), &omega)
    };
    Ok(SpeedMeasure {
        x,
        omega,
        p_mid,
        normalizer,
        h,
    })
}

/// `ω(x) = (2/σ²(x)) exp(∫_{-c}^x 2μ/σ²)` on the field's grid.
pub fn speed_measure(field: &CoefficientField) -> Result<SpeedMeasure> {
    speed_measure_on(field, field.m)
}

/// Stationary density `ω/∫ω`.
pub fn stationary_density(sm: &SpeedMeasure) -> Vec<f64> {
    sm.omega.iter().map(|w| w / sm.normalizer).collect()
}

/// Stationary distribution function on the grid, by cumulative Simpson on
/// cell pairs and trapezoid on the last odd cell.
pub fn stationary_cdf(sm: &SpeedMeasure) -> Vec<f64> {
    let q = stationary_density(sm);
    let h = sm.h;
    let mut cdf = vec![0.0; q.len()];
    for i in 1..q.len() {
        cdf[i] = if i % 2 == 0 {
            cdf[i - 2] + h / 3.0 * (q[i - 2] + 4.0 * q[i - 1] + q[i])
        } else {
            cdf[i - 1] + 0.5 * h * (q[i - 1] + q[i])
        };
    }
    cdf
}

/// Truncated eigensystem of the reflected generator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigensystem {
    pub x: Vec<f64>,
    /// Eigenvalues after Richardson extrapolation from grids `h` and `2h`.
    pub lambdas: Vec<f64>,
    /// Eigenvalues of the fine-grid discretization.
    pub lambdas_fine: Vec<f64>,
    /// Eigenfunctions on the grid, orthonormal under the trapezoid rule
    /// weighted by `ω`.
    pub efuns: Vec<Vec<f64>>,
    pub omega: Vec<f64>,
    pub p_mid: Vec<f64>,
    pub weights: Vec<f64>,
    pub simpson: Vec<f64>,
    pub c: f64,
    pub h: f64,
}

fn operator(sm: &SpeedMeasure) -> Result<(SymTridiag, Vec<f64>)> {
    let m = sm.omega.len();
    let h = sm.h;
    let mass: Vec<f64> = trapezoid_weights(m, h)
        .iter()
        .zip(&sm.omega)
        .map(|(w, o)| w * o)
        .collect();
    let d = (0..m)
        .map(|i| {
            let left = if i > 0 { sm.p_mid[i - 1] } else { 0.0 };
            let right = if i + 1 < m { sm.p_mid[i] } else { 0.0 };
            (left + right) / (h * mass[i])
        })
        .collect();
    let e = (0..m - 1)
        .map(|i| -sm.p_mid[i] / (h * (mass[i] * mass[i + 1]).sqrt()))
        .collect();
    Ok((SymTridiag::new(d, e)?, mass))
}

/// First `k` Neumann modes of `-(1/ω)(p u')' = λu` by a flux-conservative
/// finite-difference discretization with lumped mass. Eigenvalues are
/// Richardson-extrapolated against the grid of every other node; the sign
/// convention is `e₀ > 0` and `e_k(-c) > 0`.
pub fn eigensystem(field: &CoefficientField, k: usize) -> Result<Eigensystem> {
    let m = field.m;
    if k == 0 {
        return domain("need at least one mode");
    }
    if k > m / 8 {
        return Err(Error::Resolution(format!(
            "{k} modes cannot be resolved on {m} nodes (at most {})",
            m / 8
        )));
    }
    let sm = speed_measure(field)?;
    let coarse = speed_measure_on(field, m.div_ceil(2))?;
    let (b_fine, mass) = operator(&sm)?;
    let (b_coarse, _) = operator(&coarse)?;

    let mut lambdas = Vec::with_capacity(k);
    let mut fine = Vec::with_capacity(k);
    for j in 0..k {
        let lf = b_fine.eigenvalue(j)?;
        let lc = b_coarse.eigenvalue(j)?;
        fine.push(lf);
        lambdas.push((4.0 * lf - lc) / 3.0);
    }
    let top = k - 1;
    if top > 0 && (lambdas[top] - fine[top]).abs() > 0.05 * fine[top].abs() {
        return Err(Error::Resolution(format!(
            "mode {top} changes by {:.1}% under grid refinement",
            100.0 * (lambdas[top] - fine[top]).abs() / fine[top].abs()
        )));
    }
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Convergence("computed spectrum is not simple".into()));
    }

    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut efuns = Vec::with_capacity(k);
    for (j, &lf) in fine.iter().enumerate() {
        let v = b_fine.eigenvector(lf, &vs)?;
        let mut u: Vec<f64> = v.iter().zip(&mass).map(|(vi, mi)| vi / mi.sqrt()).collect();
        let flip = if j == 0 {
            u.iter().sum::<f64>() < 0.0
        } else {
            u[0] < 0.0
        };
        if flip {
            u.iter_mut().for_each(|x| *x = -*x);
        }
        vs.push(v);
        efuns.push(u);
    }
    // The constant mode is exactly Neumann-harmonic.
    lambdas[0] = lambdas[0].max(0.0);

    Ok(Eigensystem {
        x: sm.x,
        lambdas,
        lambdas_fine: fine,
        efuns,
        weights: trapezoid_weights(m, sm.h),
        simpson: simpson_weights(m, sm.h),
        omega: sm.omega,
        p_mid: sm.p_mid,
        c: field.c,
        h: sm.h,
    })
}

pub const EIGENSYSTEM_SCHEMA: &str = "eigensystem/1";

impl Eigensystem {
    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }

    /// `∫ f g ω` by the trapezoid rule.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.omega)
            .zip(f.iter().zip(g))
            .map(|((w, o), (a, b))| w * o * a * b)
            .sum()
    }

    /// `ω`-weighted Gram matrix of the eigenfunctions.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.efuns
            .iter()
            .map(|a| self.efuns.iter().map(|b| self.inner(a, b)).collect())
            .collect()
    }

    /// Linear interpolation of grid samples at `z`.
    pub fn interpolate(&self, f: &[f64], z: f64) -> f64 {
        let m = self.x.len();
        let s = ((z + self.c) / self.h).clamp(0.0, (m - 1) as f64);
        let i = (s.floor() as usize).min(m - 2);
        let a = s - i as f64;
        f[i] * (1.0 - a) + f[i + 1] * a
    }

    /// Average of `f` under the stationary law, by Simpson's rule.
    pub fn stationary_mean(&self, f: &[f64]) -> f64 {
        let num: f64 = self
            .simpson
            .iter()
            .zip(&self.omega)
            .zip(f)
            .map(|((w, o), v)| w * o * v)
            .sum();
        num / dot(&self.simpson, &self.omega)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# g3m-schema: {EIGENSYSTEM_SCHEMA}")?;
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["x".to_string(), "omega".to_string()];
        header.extend((0..self.modes()).map(|k| format!("e{k}")));
        wtr.write_record(&header)?;
        for i in 0..self.x.len() {
            let mut row = vec![format!("{:e}", self.x[i]), format!("{:e}", self.omega[i])];
            row.extend(self.efuns.iter().map(|e| format!("{:e}", e[i])));
            wtr.write_record(&row)?;
        }
        wtr.flush()
    }
}

/// Coefficients `ξ_n = ∫ f e_n ω` by the trapezoid rule.
pub fn expand(f: &[f64], eig: &Eigensystem) -> Result<Vec<f64>> {
    if f.len() != eig.x.len() {
        return Err(Error::GridMismatch {
            expected: eig.x.len(),
            found: f.len(),
        });
    }
    Ok(eig.efuns.iter().map(|e| eig.inner(f, e)).collect())
}

/// `Σ ξ_n e_n` on the grid.
pub fn reconstruct(coeffs: &[f64], eig: &Eigensystem) -> Vec<f64> {
    let mut out = vec![0.0; eig.x.len()];
    for (a, e) in coeffs.iter().zip(&eig.efuns) {
        for (o, v) in out.iter_mut().zip(e) {
            *o += a * v;
        }
    }
    out
}

/// Quadratic with slopes `a` at `-c` and `b` at `c`, and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Shim {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Shim {
    pub fn value(&self, x: f64) -> f64 {
        (self.b - self.a) * x * x / (4.0 * self.c) + (self.b + self.a) * x / 2.0
    }

    pub fn slope(&self, x: f64) -> f64 {
        (self.b - self.a) * x / (2.0 * self.c) + (self.b + self.a) / 2.0
    }

    pub fn curvature(&self) -> f64 {
        (self.b - self.a) / (2.0 * self.c)
    }
}

/// Spectral solution of the Neumann problem at time-to-go `tau`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeSolution {
    pub tau: f64,
    pub shim: Shim,
    /// Long-run growth `ξ₀e₀ = ∫hω/∫ω` of the solution per unit time.
    pub rate: f64,
    /// Stationary mean of the terminal data after the shim.
    pub eta0: f64,
    /// Combined coefficients of `e_n`, `n ≥ 1`; entry 0 is unused.
    pub coeffs: Vec<f64>,
    /// Size of the last retained term, a proxy for the truncation error.
    pub tail: f64,
    pub u: Vec<f64>,
}

impl PdeSolution {
    pub fn eval(&self, eig: &Eigensystem, z: f64) -> f64 {
        let mut v = self.shim.value(z) + self.rate * self.tau + self.eta0;
        for (a, e) in self.coeffs.iter().zip(&eig.efuns).skip(1) {
            v += a * eig.interpolate(e, z);
        }
        v
    }
}

const MIN_RELAXATION: f64 = 0.05;

/// Solves `u_t + G u + f = 0`, `u(T) = g`, `u_x(-c) = a`, `u_x(c) = b` at
/// time-to-go `tau = T - t` on the eigensystem's grid.
///
/// Writing `u = v + s` with the quadratic shim `s` leaves a homogeneous
/// Neumann problem for `v` with source `h = f + G s` and terminal
/// `k = g - s`, whose expansion is
/// `v = Σ [ξ_n/λ_n (1 - e^{-λ_n τ}) + η_n e^{-λ_n τ}] e_n`
/// with the `n = 0` term read as `ξ₀τ + η₀`. The zeroth-mode averages are
/// taken with Simpson's rule; higher modes with the discrete inner product.
#[allow(clippy::too_many_arguments)]
pub fn solve_neumann_pde(
    field: &CoefficientField,
    eig: &Eigensystem,
    f: &[f64],
    g: &[f64],
    a: f64,
    b: f64,
    tau: f64,
) -> Result<PdeSolution> {
    let m = eig.x.len();
    for len in [f.len(), g.len(), field.m] {
        if len != m {
            return Err(Error::GridMismatch {
                expected: m,
                found: len,
            });
        }
    }
    if (field.c - eig.c).abs() > 1e-14 * field.c {
        return domain("eigensystem was built for a different band");
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return domain(format!("time to go must be positive, got {tau}"));
    }
    if eig.modes() > 1 && tau * eig.lambdas[1] < MIN_RELAXATION {
        return Err(Error::Resolution(format!(
            "horizon {tau} is shorter than {MIN_RELAXATION}/λ₁ = {}",
            MIN_RELAXATION / eig.lambdas[1]
        )));
    }
    let shim = Shim { a, b, c: field.c };
    let h: Vec<f64> = eig
        .x
        .iter()
        .zip(f)
        .map(|(&x, fx)| {
            let s = field.sigma(x);
            fx + 0.5 * s * s * shim.curvature() + field.mu(x) * shim.slope(x)
        })
        .collect();
    let k: Vec<f64> = eig
        .x
        .iter()
        .zip(g)
        .map(|(&x, gx)| gx - shim.value(x))
        .collect();
    let rate = eig.stationary_mean(&h);
    let eta0 = eig.stationary_mean(&k);
    let xi = expand(&h, eig)?;
    let eta = expand(&k, eig)?;
    let mut coeffs = vec![0.0; eig.modes()];
    for n in 1..eig.modes() {
        let lam = eig.lambdas[n];
        let decay = (-lam * tau).exp();
        coeffs[n] = xi[n] / lam * (-(-lam * tau).exp_m1()) + eta[n] * decay;
    }
    let mut u = vec![0.0; m];
    for (i, &x) in eig.x.iter().enumerate() {
        u[i] = shim.value(x) + rate * tau + eta0;
    }
    for n in 1..eig.modes() {
        for (ui, ei) in u.iter_mut().zip(&eig.efuns[n]) {
            *ui += coeffs[n] * ei;
        }
    }
    let tail = if eig.modes() > 1 {
        // The last two modes, since symmetric data leaves every other one
        // empty.
        let first = eig.modes().saturating_sub(2).max(1);
        (first..eig.modes())
            .map(|n| {
                let lam = eig.lambdas[n];
                let emax = eig.efuns[n].iter().fold(0.0f64, |a, v| a.max(v.abs()));
                (xi[n].abs() / lam + eta[n].abs() * (-lam * tau).exp()) * emax
            })
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let scale = 1.0 + u.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if tail > 1e-6 * scale {
        return Err(Error::Resolution(format!(
            "truncation tail {tail:e} exceeds tolerance; add modes or lengthen the horizon"
        )));
    }
    Ok(PdeSolution {
        tau,
        shim,
        rate,
        eta0,
        coeffs,
        tail,
        u,
    })
}

/// `E[-a(L_T - L_t) + b(U_T - U_t) | Z_t = z0]` from the spectral solution.
pub fn expected_regulators(
    field: &CoefficientField,
    eig: &Eigensystem,
    a: f64,
    b: f64,
    tau: f64,
    z0: f64,
) -> Result<f64> {
    if !(z0 >= -field.c && z0 <= field.c) {
        return domain(format!("z0 = {z0} outside [{}, {}]", -field.c, field.c));
    }
    let zeros = vec![0.0; eig.x.len()];
    let sol = solve_neumann_pde(field, eig, &zeros, &zeros, a, b, tau)?;
    Ok(sol.eval(eig, z0))
}

/// Long-run rate `lim E[-a L_T + b U_T]/T`, the stationary mean of
/// `½σ² s'' + μ s'` on the grid.
pub fn regulator_rate_limit(field: &CoefficientField, eig: &Eigensystem, a: f64, b: f64) -> f64 {
    let shim = Shim { a, b, c: field.c };
    let h: Vec<f64> = eig
        .x
        .iter()
        .map(|&x| {
            let s = field.sigma(x);
            0.5 * s * s * shim.curvature() + field.mu(x) * shim.slope(x)
        })
        .collect();
    eig.stationary_mean(&h)
}

fn check_transition(eig: &Eigensystem, tau: f64) -> Result<()> {
    if !(tau > 0.0) {
        return domain("transition density needs T > t");
    }
    if eig.modes() > 1 && tau * eig.lambdas[1] < MIN_RELAXATION {
        return Err(Error::Resolution(format!(
            "(T - t)λ₁ = {} below {MIN_RELAXATION}",
            tau * eig.lambdas[1]
        )));
    }
    let last = eig.lambdas[eig.modes() - 1];
    if eig.modes() > 1 && (-last * tau).exp() * (eig.modes() as f64) > 1e-10 {
        return Err(Error::Resolution(format!(
            "{} modes do not resolve the density at T - t = {tau}",
            eig.modes()
        )));
    }
    Ok(())
}

/// Transition density `p(T, y | t, x) = Σ e^{-λ_k τ} e_k(x) e_k(y) ω(y)`.
pub fn transition_density(eig: &Eigensystem, tau: f64, y: f64, x: f64) -> Result<f64> {
    check_transition(eig, tau)?;
    for v in [x, y] {
        if !(v >= -eig.c && v <= eig.c) {
            return domain(format!("{v} outside [{}, {}]", -eig.c, eig.c));
        }
    }
    let mut s = 0.0;
    for (lam, e) in eig.lambdas.iter().zip(&eig.efuns) {
        s += (-lam * tau).exp() * eig.interpolate(e, x) * eig.interpolate(e, y);
    }
    Ok(s * eig.interpolate(&eig.omega, y))
}

/// Transition density between all grid nodes: row `i` is `p(T, · | t, x_i)`.
pub fn transition_matrix(eig: &Eigensystem, tau: f64) -> Result<Vec<Vec<f64>>> {
    check_transition(eig, tau)?;
    let m = eig.x.len();
    let decay: Vec<f64> = eig.lambdas.iter().map(|l| (-l * tau).exp()).collect();
    Ok((0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let s: f64 = eig
                        .efuns
                        .iter()
                        .zip(&decay)
                        .map(|(e, d)| d * e[i] * e[j])
                        .sum();
                    s * eig.omega[j]
                })
                .collect()
        })
        .collect())
}
