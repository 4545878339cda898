//! Spectral expectation of the regulator functional against direct
//! simulation of the reflected diffusion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{simulate_field, Resolution};
use crate::error::{Error, Result};
use crate::rng::mean_stderr;
use crate::spectral::{eigensystem, expected_regulators, CoefficientField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckRow {
    pub tau: f64,
    /// `None` when the spectral side cannot resolve the horizon.
    pub spectral: Option<f64>,
    pub mc: f64,
    pub mc_stderr: f64,
    pub rel_err: Option<f64>,
    pub skipped: Option<String>,
}

/// `E[-a L_τ + b U_τ | Z_0 = z0]` by the eigen-expansion and by Monte Carlo
/// for each horizon `τ`.
#[allow(clippy::too_many_arguments)]
pub fn spectral_cross_check(
    field: &CoefficientField,
    a: f64,
    b: f64,
    z0: f64,
    horizons: &[f64],
    paths: usize,
    modes: usize,
    res: Resolution,
    seed: u64,
) -> Result<Vec<CrossCheckRow>> {
    let eig = eigensystem(field, modes)?;
    horizons
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let (spectral, skipped) = match expected_regulators(field, &eig, a, b, tau, z0) {
                Ok(v) => (Some(v), None),
                Err(Error::Resolution(msg)) => (None, Some(msg)),
                Err(e) => return Err(e),
            };
            let offset = (k * paths) as u64;
            let values: Vec<f64> = (0..paths as u64)
                .into_par_iter()
                .map(|p| {
                    simulate_field(field, z0, tau, res, seed, offset + p)
                        .map(|s| -a * s.l + b * s.u)
                })
                .collect::<Result<_>>()?;
            let (mc, mc_stderr) = mean_stderr(&values);
            let rel_err = spectral.map(|s| {
                if s == 0.0 {
                    (mc - s).abs()
                } else {
                    (mc - s).abs() / s.abs()
                }
            });
            Ok(CrossCheckRow {
                tau,
                spectral,
                mc,
                mc_stderr,
                rel_err,
                skipped,
            })
        })
        .collect()
}
