//! Driftless reflected diffusion with deterministic volatility `σ(t)`.
//!
//! With `μ ≡ 0` the spatial eigenfunctions do not depend on time: they are
//! the unit-weight Neumann modes `e₀ = 1/√(2c)`,
//! `e_k = cos(kπ(x + c)/(2c))/√c` with factors `κ_k = (kπ/(2c))²`, and each
//! coefficient of the shifted solution evolves independently:
//! `v_n(t) = e^{-κ_n I(t,T)} k_n + ∫_t^T h_n(s) e^{-κ_n I(t,s)} ds` where
//! `I(t,s) = ½∫_t^s σ²`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::{CoefFn, Shim};
use crate::error::{domain, Error, Result};
use crate::market::VolTable;
use crate::quadrature::{adaptive_simpson, adaptive_simpson_panels};

const QUAD_TOL: f64 = 1e-10;
const TAIL_TOL: f64 = 1e-8;

#[derive(Clone)]
pub struct TimeDependentSystem {
    sigma: CoefFn,
    /// Kinks of `σ(t)`, used to split quadratures.
    breaks: Vec<f64>,
    c: f64,
    modes: usize,
}

impl fmt::Debug for TimeDependentSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeDependentSystem")
            .field("c", &self.c)
            .field("modes", &self.modes)
            .field("breaks", &self.breaks.len())
            .finish_non_exhaustive()
    }
}

impl TimeDependentSystem {
    pub fn new(
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
        c: f64,
        modes: usize,
    ) -> Result<TimeDependentSystem> {
        if !(c > 0.0 && c.is_finite()) {
            return domain(format!("band half-width must be positive, got {c}"));
        }
        if modes == 0 {
            return domain("need at least one mode");
        }
        Ok(TimeDependentSystem {
            sigma: Arc::new(sigma),
            breaks: Vec::new(),
            c,
            modes,
        })
    }

    pub fn from_table(table: &VolTable, c: f64, modes: usize) -> Result<TimeDependentSystem> {
        let t = table.clone();
        let mut sys = TimeDependentSystem::new(move |s| t.eval(s), c, modes)?;
        sys.breaks = table.t.clone();
        Ok(sys)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Spatial eigenfactor `κ_n`; the generator eigenvalue at time `s` is
    /// `½σ²(s)κ_n`.
    pub fn kappa(&self, n: usize) -> f64 {
        (n as f64 * PI / (2.0 * self.c)).powi(2)
    }

    pub fn basis(&self, n: usize, x: f64) -> f64 {
        if n == 0 {
            1.0 / (2.0 * self.c).sqrt()
        } else {
            (n as f64 * PI * (x + self.c) / (2.0 * self.c)).cos() / self.c.sqrt()
        }
    }

    fn variance(&self, s: f64) -> Result<f64> {
        let v = (self.sigma)(s);
        if !(v.is_finite()) {
            return domain(format!("volatility not finite at t = {s}"));
        }
        Ok(v * v)
    }

    /// `∫_t0^t1 σ²(s) ds`, split at the kinks of the schedule.
    pub fn integrated_variance(&self, t0: f64, t1: f64) -> Result<f64> {
        if t1 < t0 {
            return domain("integration limits out of order");
        }
        self.variance(t0)?;
        let mut knots = vec![t0];
        knots.extend(self.breaks.iter().copied().filter(|&b| b > t0 && b < t1));
        knots.push(t1);
        let mut total = 0.0;
        for w in knots.windows(2) {
            total += adaptive_simpson(|s| (self.sigma)(s).powi(2), w[0], w[1], QUAD_TOL)?;
        }
        if !total.is_finite() {
            return domain("integrated variance is not finite");
        }
        Ok(total)
    }

    /// `k_n = ∫(g - s) e_n dx` by adaptive Simpson.
    fn terminal_coeffs(&self, g: &dyn Fn(f64) -> f64, shim: Shim) -> Result<Vec<f64>> {
        let c = self.c;
        (0..self.modes)
            .map(|n| {
                adaptive_simpson_panels(
                    |x| (g(x) - shim.value(x)) * self.basis(n, x),
                    -c,
                    c,
                    2 * n + 3,
                    1e-13,
                )
            })
            .collect()
    }

    /// `v_n(t)` for all retained modes given `g` and boundary slopes.
    pub fn coefficients(
        &self,
        g: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        t: f64,
        horizon: f64,
    ) -> Result<Vec<f64>> {
        if !(horizon > t) {
            return domain("horizon must exceed the evaluation time");
        }
        let shim = Shim { a, b, c: self.c };
        let k = self.terminal_coeffs(g, shim)?;
        let var = self.integrated_variance(t, horizon)?;
        // The source ½σ²s'' is constant in x, so only the zeroth mode is
        // forced and its factor e^{-κ₀ I} is one.
        let h0_integral = 0.5 * shim.curvature() * var * (2.0 * self.c).sqrt();
        let mut v = Vec::with_capacity(self.modes);
        v.push(k[0] + h0_integral);
        for (n, kn) in k.iter().enumerate().skip(1) {
            v.push((-0.5 * self.kappa(n) * var).exp() * kn);
        }
        if self.modes > 1 {
            // Two modes, since symmetric data leaves every other one empty.
            let last = v[self.modes.saturating_sub(2).max(1)..]
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()))
                / self.c.sqrt();
            if last > TAIL_TOL {
                return Err(Error::Resolution(format!(
                    "truncation tail {last:e} with {} modes; lengthen the horizon or add modes",
                    self.modes
                )));
            }
        }
        Ok(v)
    }

    /// `u(t, z) = E[g(Z_T) - a(L_T - L_t) + b(U_T - U_t) | Z_t = z]`.
    pub fn solve(
        &self,
        g: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        t: f64,
        horizon: f64,
        z: f64,
    ) -> Result<f64> {
        if !(z >= -self.c && z <= self.c) {
            return domain(format!("z = {z} outside [{}, {}]", -self.c, self.c));
        }
        let v = self.coefficients(g, a, b, t, horizon)?;
        let shim = Shim { a, b, c: self.c };
        Ok(shim.value(z)
            + v.iter()
                .enumerate()
                .map(|(n, vn)| vn * self.basis(n, z))
                .sum::<f64>())
    }

    pub fn expected_regulators(&self, a: f64, b: f64, t: f64, horizon: f64, z: f64) -> Result<f64> {
        self.solve(&|_| 0.0, a, b, t, horizon, z)
    }

    /// `(b - a)/(4c) · (1/(T - t))∫_t^T σ²`, the time-averaged regulator
    /// rate over `[t, T]`.
    pub fn average_rate(&self, a: f64, b: f64, t: f64, horizon: f64) -> Result<f64> {
        Ok((b - a) / (4.0 * self.c) * self.integrated_variance(t, horizon)? / (horizon - t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eigensystem, expected_regulators, CoefficientField};

    #[test]
    fn basis_is_orthonormal() {
        let sys = TimeDependentSystem::new(|_| 1.0, 0.7, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let v = adaptive_simpson_panels(
                    |x| sys.basis(i, x) * sys.basis(j, x),
                    -0.7,
                    0.7,
                    11,
                    1e-13,
                )
                .unwrap();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_volatility_matches_homogeneous_solver() {
        let (sigma, c) = (2f64.sqrt(), 1.0);
        let field = CoefficientField::constant(0.0, sigma, c, 2001).unwrap();
        let eig = eigensystem(&field, 64).unwrap();
        let sys = TimeDependentSystem::new(move |_| sigma, c, 64).unwrap();
        for &(tau, z) in &[(1.0, 0.0), (2.0, 0.5), (1.5, -0.8)] {
            let a = expected_regulators(&field, &eig, -1.0, 1.0, tau, z).unwrap();
            let b = sys.expected_regulators(-1.0, 1.0, 0.0, tau, z).unwrap();
            assert!(
                (a - b).abs() < 1e-5 * a.abs().max(1.0),
                "tau={tau} z={z}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn time_average_limit() {
        // σ²(s) = 1 + 1/(1 + s): the time average tends to one.
        let sys = TimeDependentSystem::new(|s| (1.0 + 1.0 / (1.0 + s)).sqrt(), 1.0, 32).unwrap();
        let mut prev = f64::INFINITY;
        for &t in &[100.0, 1000.0, 10000.0] {
            let r = sys.expected_regulators(-1.0, 1.0, 0.0, t, 0.0).unwrap() / t;
            let gap = (r - 0.5).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-3);
        let avg = sys.average_rate(-1.0, 1.0, 0.0, 10000.0).unwrap();
        assert!((avg - 0.5 * (1.0 + 10001f64.ln() / 10000.0)).abs() < 1e-9);
    }

    #[test]
    fn piecewise_table() {
        let table = VolTable::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 2.0]).unwrap();
        let sys = TimeDependentSystem::from_table(&table, 1.0, 16).unwrap();
        // ∫_0^1 (1 + s)² ds = 7/3, then 4 per unit time.
        let v = sys.integrated_variance(0.0, 3.0).unwrap();
        assert!((v - (7.0 / 3.0 + 8.0)).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TimeDependentSystem::new(|_| 1.0, 0.0, 4).is_err());
        let sys = TimeDependentSystem::new(|_| f64::NAN, 1.0, 4).unwrap();
        assert!(sys.integrated_variance(0.0, 1.0).is_err());
        let sys = TimeDependentSystem::new(|_| 1.0, 1.0, 64).unwrap();
        assert!(matches!(
            sys.expected_regulators(-1.0, 1.0, 0.0, 1e-4, 0.0),
            Err(Error::Resolution(_))
        ));
    }
}
