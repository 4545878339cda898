//! Adaptive Simpson quadrature and fixed-grid rules.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` to the given absolute tolerance with
/// Richardson-corrected adaptive Simpson.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut evals = 3usize;
    let v = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut evals)?;
    if !v.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite integral on [{a}, {b}]"
        )));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand near {m}")));
    }
    if delta.abs() <= 15.0 * tol || (m - a).abs() <= f64::EPSILON * m.abs().max(1.0) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || *evals > 20_000_000 {
        return Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}] (error estimate {:e}, tolerance {tol:e})",
            delta.abs() / 15.0
        )));
    }
    Ok(
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals)?
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals)?,
    )
}

/// Adaptive Simpson with a relative tolerance, using a coarse estimate of
/// the integral magnitude as the scale.
pub fn adaptive_simpson_rel<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> Result<f64> {
    let n = 64;
    let h = (b - a) / n as f64;
    let scale: f64 = (0..=n).map(|i| f(a + i as f64 * h).abs()).sum::<f64>() * h.abs();
    let tol = (rel * scale).max(f64::MIN_POSITIVE);
    adaptive_simpson(f, a, b, tol)
}

/// Adaptive Simpson on `panels` equal sub-intervals, each with an equal
/// share of the tolerance. Splitting guards against the initial samples
/// landing on a symmetric pattern of zeros of an oscillatory integrand.
pub fn adaptive_simpson_panels<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    tol: f64,
) -> Result<f64> {
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == n { b } else { lo + h };
        total += adaptive_simpson(&f, lo, hi, tol / n as f64)?;
    }
    Ok(total)
}

/// Trapezoid weights for `m` equally spaced nodes with spacing `h`.
pub fn trapezoid_weights(m: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; m];
    if m > 0 {
        w[0] = 0.5 * h;
        w[m - 1] = 0.5 * h;
    }
    w
}

/// Composite Simpson weights; `m` must be odd.
pub fn simpson_weights(m: usize, h: f64) -> Vec<f64> {
    assert!(
        m >= 3 && m % 2 == 1,
        "Simpson weights need an odd node count"
    );
    let mut w: Vec<f64> = (0..m)
        .map(|i| {
            if i % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            }
        })
        .collect();
    w[0] = h / 3.0;
    w[m - 1] = h / 3.0;
    w
}

pub fn dot(w: &[f64], f: &[f64]) -> f64 {
    w.iter().zip(f).map(|(a, b)| a * b).sum()
}
