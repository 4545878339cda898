//! Arbitrage against a reference market: the optimal arbitrageur trade,
//! discrete and continuous mispricing dynamics, and the regulator processes
//! `L` and `U` that drive reserves, liquidity and LP wealth.
//!
//! The mispricing `Z = ln(S/P)` lives in the band `[-c, c]` with
//! `c = -ln γ`. When it leaves the band the arbitrageur trades the pool price
//! back to the nearest edge; the cumulative pushes at the lower and upper
//! edges are `L` and `U`, so that `ln P = ln P₀ + U - L`.

use std::io::{BufRead, Write};

use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::amm::{weight_entropy, Leg, PoolState, TradeResult};
use crate::error::{domain, Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MispricingBand {
    pub c: f64,
}

impl MispricingBand {
    pub fn from_gamma(gamma: f64) -> Result<MispricingBand> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return domain(format!("gamma out of range (0,1]: {gamma}"));
        }
        Ok(MispricingBand { c: -gamma.ln() })
    }

    pub fn lower(&self) -> f64 {
        -self.c
    }

    pub fn upper(&self) -> f64 {
        self.c
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= -self.c && z <= self.c
    }
}

/// Projects `z_pre` onto the band. Returns `(z_post, J)` with
/// `J = z_post - z_pre`; a positive jump belongs to `L`, a negative one to `U`.
pub fn clamp_mispricing(z_pre: f64, band: MispricingBand) -> (f64, f64) {
    let z = z_pre.min(band.c).max(-band.c);
    (z, z - z_pre)
}

/// Newton iteration safeguarded by bisection for an increasing function with
/// a sign change on `[lo, hi]`.
fn solve_increasing(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, dv) = f(x);
        if v == 0.0 {
            return x;
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - v / dv;
        let next = if newton > lo && newton < hi && dv > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE)
            || hi - lo <= f64::EPSILON * hi.abs()
        {
            return next;
        }
        x = next;
    }
    x
}

/// Profit-maximizing arbitrage against reference price `s`.
///
/// If `s` exceeds the pool's ask `P/γ` the arbitrageur buys X until the
/// marginal ask equals `s`, leaving the pool price at `γs`; if `s` is below
/// the bid `γP` they sell X until the pool price is `s/γ`. Inside the band
/// there is no trade.
pub fn optimal_arb_trade(pool: &PoolState, s: f64) -> Result<Option<TradeResult>> {
    if !(s > 0.0 && s.is_finite()) {
        return domain(format!(
            "reference price must be positive and finite, got {s}"
        ));
    }
    let band = MispricingBand::from_gamma(pool.gamma())?;
    let z = (s / pool.spot_price()).ln();
    if band.contains(z) {
        return Ok(None);
    }
    let (w, gamma) = (pool.w(), pool.gamma());
    let r = (1.0 - w) / w;
    let dx = if z > band.c {
        // Buying X. With b = -w/(1-w)·ln(x'/x), the log price moves by
        // ln(1 + (e^b - 1)/γ) + (1-w)/w·b.
        let target = z - band.c;
        let b = solve_increasing(
            |b| {
                let e = b.exp_m1();
                (
                    (e / gamma).ln_1p() + r * b - target,
                    (e + 1.0) / (gamma + e) + r,
                )
            },
            0.0,
            w * target,
        );
        pool.x() * (-r * b).exp_m1()
    } else {
        // Selling X. With a = ln(1 + γΔx/x), the log price moves by
        // -w/(1-w)·a - ln(1 + (e^a - 1)/γ).
        let target = -(z + band.c);
        let a = solve_increasing(
            |a| {
                let e = a.exp_m1();
                (
                    a / r + (e / gamma).ln_1p() - target,
                    1.0 / r + (e + 1.0) / (gamma + e),
                )
            },
            0.0,
            (1.0 - w) * target,
        );
        pool.x() * a.exp_m1() / gamma
    };
    pool.execute_trade(Leg::from_delta_x(dx)).map(Some)
}

/// When arbitrageurs show up along a time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalSpec {
    /// At every grid point.
    EveryStep,
    /// Deterministic arrivals every `1/rate` years.
    Uniform { rate: f64 },
    /// Poisson arrivals with the given intensity per year.
    Poisson { rate: f64 },
}

impl ArrivalSpec {
    /// Grid indices of the arrivals. Each arrival is snapped to the first grid
    /// point at or after it; duplicates collapse.
    pub fn indices(&self, t: &[f64], seed: u64, path: u64) -> Result<Vec<usize>> {
        if t.is_empty() {
            return Ok(Vec::new());
        }
        let t0 = t[0];
        let t_end = t[t.len() - 1];
        let times: Vec<f64> = match *self {
            ArrivalSpec::EveryStep => return Ok((0..t.len()).collect()),
            ArrivalSpec::Uniform { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return domain(format!("arrival rate must be positive, got {rate}"));
                }
                let count = ((t_end - t0) * rate * (1.0 + 1e-12)).floor() as usize;
                (1..=count).map(|k| t0 + k as f64 / rate).collect()
            }
            ArrivalSpec::Poisson { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return domain(format!("arrival rate must be positive, got {rate}"));
                }
                let mut rng = stream(seed, path, Purpose::Arrivals);
                let exp = Exp::new(rate).map_err(|e| Error::Domain(e.to_string()))?;
                let mut out = Vec::new();
                let mut s = t0 + exp.sample(&mut rng);
                while s <= t_end {
                    out.push(s);
                    s += exp.sample(&mut rng);
                }
                out
            }
        };
        let mut idx = Vec::with_capacity(times.len());
        let mut j = 0;
        for s in times {
            while j < t.len() && t[j] < s - 1e-12 * (1.0 + s.abs()) {
                j += 1;
            }
            if j == t.len() {
                break;
            }
            if idx.last() != Some(&j) {
                idx.push(j);
            }
        }
        Ok(idx)
    }
}

/// Time grid with the mispricing, regulators, pool state and LP wealth.
/// `ln_v` is the log wealth in units of Y with the Y price as numeraire.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ArbPath {
    pub t: Vec<f64>,
    pub ln_s: Vec<f64>,
    pub z: Vec<f64>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub ln_p: Vec<f64>,
    pub ln_x: Vec<f64>,
    pub ln_y: Vec<f64>,
    pub ln_ell: Vec<f64>,
    pub ln_v: Vec<f64>,
}

pub const ARBPATH_SCHEMA: &str = "arbpath/1";
const ARBPATH_COLUMNS: [&str; 10] = [
    "t", "ln_s", "z", "l", "u", "ln_p", "ln_x", "ln_y", "ln_ell", "ln_v",
];

impl ArbPath {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn columns(&self) -> [&Vec<f64>; 10] {
        [
            &self.t,
            &self.ln_s,
            &self.z,
            &self.l,
            &self.u,
            &self.ln_p,
            &self.ln_x,
            &self.ln_y,
            &self.ln_ell,
            &self.ln_v,
        ]
    }

    /// Checks the path invariants: monotone regulators starting at zero,
    /// `ln P = ln P₀ + U - L`, `z = ln S - ln P` and non-decreasing
    /// liquidity. With a band, also checks that `z` never leaves it (which
    /// only holds for continuous arbitrage or arrivals at every step).
    pub fn check_invariants(&self, band: Option<MispricingBand>, tol: f64) -> Result<()> {
        let n = self.len();
        for col in self.columns() {
            if col.len() != n {
                return Err(Error::GridMismatch {
                    expected: n,
                    found: col.len(),
                });
            }
        }
        if n == 0 {
            return Ok(());
        }
        if self.l[0] != 0.0 || self.u[0] != 0.0 {
            return Err(Error::SelfCheck("regulators must start at zero".into()));
        }
        for i in 0..n {
            if band.is_some_and(|b| self.z[i].abs() > b.c + tol) {
                return Err(Error::SelfCheck(format!(
                    "z = {} leaves the band at index {i}",
                    self.z[i]
                )));
            }
            let scale = 1.0 + self.ln_p[0].abs() + self.u[i] + self.l[i];
            if (self.ln_p[i] - (self.ln_p[0] + self.u[i] - self.l[i])).abs() > tol * scale {
                return Err(Error::SelfCheck(format!(
                    "ln P ≠ ln P₀ + U - L at index {i}"
                )));
            }
            if (self.z[i] - (self.ln_s[i] - self.ln_p[i])).abs() > tol * (1.0 + self.ln_s[i].abs())
            {
                return Err(Error::SelfCheck(format!("z ≠ ln S - ln P at index {i}")));
            }
            if i > 0 {
                if self.l[i] < self.l[i - 1] {
                    return Err(Error::Monotonicity {
                        series: "l",
                        index: i,
                    });
                }
                if self.u[i] < self.u[i - 1] {
                    return Err(Error::Monotonicity {
                        series: "u",
                        index: i,
                    });
                }
                if self.ln_ell[i] < self.ln_ell[i - 1] - tol * (1.0 + self.ln_ell[i].abs()) {
                    return Err(Error::Monotonicity {
                        series: "ln_ell",
                        index: i,
                    });
                }
            }
        }
        Ok(())
    }

    /// Writes the path as CSV behind a `# g3m-schema:` comment line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# g3m-schema: {ARBPATH_SCHEMA}")?;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(ARBPATH_COLUMNS)?;
        let cols = self.columns();
        for i in 0..self.len() {
            wtr.write_record(cols.iter().map(|c| format!("{:e}", c[i])))?;
        }
        wtr.flush()
    }

    /// Reads a path written by [`ArbPath::write_csv`]; rejects other schema
    /// versions and column layouts.
    pub fn read_csv<R: BufRead>(mut input: R) -> Result<ArbPath> {
        let mut first = String::new();
        input
            .read_line(&mut first)
            .map_err(|e| Error::Domain(format!("cannot read schema line: {e}")))?;
        let version = first.trim().strip_prefix("# g3m-schema:").map(str::trim);
        if version != Some(ARBPATH_SCHEMA) {
            return domain(format!(
                "unsupported schema line {:?}, expected {ARBPATH_SCHEMA}",
                first.trim()
            ));
        }
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Domain(e.to_string()))?
            .clone();
        if headers.iter().ne(ARBPATH_COLUMNS) {
            return domain(format!("unexpected columns {:?}", headers));
        }
        let mut p = ArbPath::default();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Domain(format!("row {}: {e}", row + 1)))?;
            let mut vals = [0.0; 10];
            for (k, v) in rec.iter().enumerate() {
                vals[k] = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Domain(format!("row {}: bad number {v:?}", row + 1)))?;
            }
            p.t.push(vals[0]);
            p.ln_s.push(vals[1]);
            p.z.push(vals[2]);
            p.l.push(vals[3]);
            p.u.push(vals[4]);
            p.ln_p.push(vals[5]);
            p.ln_x.push(vals[6]);
            p.ln_y.push(vals[7]);
            p.ln_ell.push(vals[8]);
            p.ln_v.push(vals[9]);
        }
        Ok(p)
    }
}

fn check_grid(t: &[f64], ln_s: &[f64]) -> Result<()> {
    if t.len() != ln_s.len() {
        return Err(Error::GridMismatch {
            expected: t.len(),
            found: ln_s.len(),
        });
    }
    if t.is_empty() {
        return domain("empty time grid");
    }
    if t.windows(2).any(|p| !(p[1] > p[0])) {
        return domain("time grid must be strictly increasing");
    }
    if ln_s.iter().any(|v| !v.is_finite()) {
        return domain("non-finite log price");
    }
    Ok(())
}

/// Replays the discrete arbitrage model: the pool only moves at arrivals,
/// where the arbitrageur executes [`optimal_arb_trade`]. At each arrival the
/// regulators are checked against their running-supremum representation.
pub fn run_discrete_arbitrage(
    pool: &PoolState,
    t: &[f64],
    ln_s: &[f64],
    arrivals: &[usize],
) -> Result<ArbPath> {
    check_grid(t, ln_s)?;
    let band = MispricingBand::from_gamma(pool.gamma())?;
    let ln_p0 = pool.spot_price().ln();
    let z0 = ln_s[0] - ln_p0;
    if !band.contains(z0) {
        return Err(Error::InitialCondition(format!(
            "initial mispricing {z0} outside [{}, {}]",
            -band.c, band.c
        )));
    }
    if arrivals.windows(2).any(|p| p[1] <= p[0]) || arrivals.last().is_some_and(|&i| i >= t.len()) {
        return domain("arrival indices must be increasing grid indices");
    }

    let n = t.len();
    let mut out = ArbPath {
        t: t.to_vec(),
        ln_s: ln_s.to_vec(),
        ..Default::default()
    };
    let mut cur = *pool;
    let (mut l, mut u) = (0.0f64, 0.0f64);
    let (mut sup_l, mut sup_u) = (0.0f64, 0.0f64);
    let ln_gp0 = pool.gamma().ln() + ln_p0;
    let ln_p0_over_g = ln_p0 - pool.gamma().ln();
    let mut next = arrivals.iter().peekable();
    for i in 0..n {
        if next.peek() == Some(&&i) {
            next.next();
            let z_pre = ln_s[i] - cur.spot_price().ln();
            let (_, j) = clamp_mispricing(z_pre, band);
            if j != 0.0 {
                if let Some(trade) = optimal_arb_trade(&cur, ln_s[i].exp())? {
                    cur = trade.new_state;
                }
                if j > 0.0 {
                    l += j;
                } else {
                    u -= j;
                }
            }
            sup_l = sup_l.max((-(ln_s[i] - ln_gp0 - u)).max(0.0));
            sup_u = sup_u.max((-(ln_p0_over_g - ln_s[i] - l)).max(0.0));
            let tol = 1e-9 * (1.0 + ln_s[i].abs() + l + u);
            if (sup_l - l).abs() > tol || (sup_u - u).abs() > tol {
                return Err(Error::SelfCheck(format!(
                    "running-supremum representation fails at index {i}: L={l} vs {sup_l}, U={u} vs {sup_u}"
                )));
            }
        }
        let ln_p = cur.spot_price().ln();
        let ln_x = cur.x().ln();
        let ln_y = cur.y().ln();
        out.z.push(ln_s[i] - ln_p);
        out.l.push(l);
        out.u.push(u);
        out.ln_p.push(ln_p);
        out.ln_x.push(ln_x);
        out.ln_y.push(ln_y);
        out.ln_ell.push(cur.ell().ln());
        out.ln_v.push(log_add(ln_s[i] + ln_x, ln_y));
    }
    Ok(out)
}

/// `ln(e^a + e^b)` without overflow.
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Output of the two-sided Skorokhod map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regulators {
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub z: Vec<f64>,
}

/// Two-sided Skorokhod map on `[-c, c]` by sequential clamping of grid
/// increments.
pub fn skorokhod_regulators(ln_s: &[f64], band: MispricingBand, z0: f64) -> Result<Regulators> {
    if !band.contains(z0) {
        return domain(format!("z0 = {z0} outside [{}, {}]", -band.c, band.c));
    }
    if ln_s.is_empty() {
        return domain("empty path");
    }
    let n = ln_s.len();
    let mut r = Regulators {
        l: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
    };
    let (mut z, mut l, mut u) = (z0, 0.0, 0.0);
    r.l.push(0.0);
    r.u.push(0.0);
    r.z.push(z0);
    for i in 1..n {
        let (zc, j) = clamp_mispricing(z + (ln_s[i] - ln_s[i - 1]), band);
        if j > 0.0 {
            l += j;
        } else {
            u -= j;
        }
        z = zc;
        r.l.push(l);
        r.u.push(u);
        r.z.push(z);
    }
    Ok(r)
}

/// Coefficients of `d ln x`, `d ln y` and `d ln ℓ` with respect to `dL` and
/// `dU` under continuous arbitrage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegulatorCoefficients {
    pub x_l: f64,
    pub x_u: f64,
    pub y_l: f64,
    pub y_u: f64,
    pub ell_l: f64,
    pub ell_u: f64,
}

impl RegulatorCoefficients {
    pub fn new(w: f64, gamma: f64) -> Result<RegulatorCoefficients> {
        if !(w > 0.0 && w < 1.0) {
            return domain(format!("weight out of range (0,1): {w}"));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return domain(format!("gamma out of range (0,1]: {gamma}"));
        }
        let dl = 1.0 - w + gamma * w;
        let du = gamma * (1.0 - w) + w;
        let fee = (1.0 - gamma) * w * (1.0 - w);
        Ok(RegulatorCoefficients {
            x_l: (1.0 - w) / dl,
            x_u: -gamma * (1.0 - w) / du,
            y_l: -gamma * w / dl,
            y_u: w / du,
            ell_l: fee / dl,
            ell_u: fee / du,
        })
    }
}

fn check_regulators(l: &[f64], u: &[f64]) -> Result<()> {
    if l.len() != u.len() {
        return Err(Error::GridMismatch {
            expected: l.len(),
            found: u.len(),
        });
    }
    if let Some(i) = (1..l.len()).find(|&i| l[i] < l[i - 1]) {
        return Err(Error::Monotonicity {
            series: "l",
            index: i,
        });
    }
    if let Some(i) = (1..u.len()).find(|&i| u[i] < u[i - 1]) {
        return Err(Error::Monotonicity {
            series: "u",
            index: i,
        });
    }
    Ok(())
}

/// Log reserves driven by the regulators, starting from `(x0, y0)`.
pub fn inventory_from_regulators(
    l: &[f64],
    u: &[f64],
    w: f64,
    gamma: f64,
    x0: f64,
    y0: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_regulators(l, u)?;
    let k = RegulatorCoefficients::new(w, gamma)?;
    if !(x0 > 0.0 && y0 > 0.0) {
        return domain("initial reserves must be positive");
    }
    let (lx0, ly0) = (x0.ln(), y0.ln());
    let (l0, u0) = (
        l.first().copied().unwrap_or(0.0),
        u.first().copied().unwrap_or(0.0),
    );
    let ln_x = l
        .iter()
        .zip(u)
        .map(|(&a, &b)| lx0 + k.x_l * (a - l0) + k.x_u * (b - u0))
        .collect();
    let ln_y = l
        .iter()
        .zip(u)
        .map(|(&a, &b)| ly0 + k.y_l * (a - l0) + k.y_u * (b - u0))
        .collect();
    Ok((ln_x, ln_y))
}

/// Log liquidity relative to its initial value.
pub fn liquidity_from_regulators(l: &[f64], u: &[f64], w: f64, gamma: f64) -> Result<Vec<f64>> {
    check_regulators(l, u)?;
    let k = RegulatorCoefficients::new(w, gamma)?;
    let (l0, u0) = (
        l.first().copied().unwrap_or(0.0),
        u.first().copied().unwrap_or(0.0),
    );
    Ok(l.iter()
        .zip(u)
        .map(|(&a, &b)| k.ell_l * (a - l0) + k.ell_u * (b - u0))
        .collect())
}

/// Continuous-arbitrage path on a grid: Skorokhod regulators of the
/// reference log price, with reserves and liquidity from the regulator
/// formulas.
pub fn continuous_arb_path(pool: &PoolState, t: &[f64], ln_s: &[f64]) -> Result<ArbPath> {
    check_grid(t, ln_s)?;
    let band = MispricingBand::from_gamma(pool.gamma())?;
    let ln_p0 = pool.spot_price().ln();
    let z0 = ln_s[0] - ln_p0;
    if !band.contains(z0) {
        return Err(Error::InitialCondition(format!(
            "initial mispricing {z0} outside the band"
        )));
    }
    let reg = skorokhod_regulators(ln_s, band, z0)?;
    let (ln_x, ln_y) =
        inventory_from_regulators(&reg.l, &reg.u, pool.w(), pool.gamma(), pool.x(), pool.y())?;
    let ln_ell0 = pool.ell().ln();
    let ln_ell: Vec<f64> = liquidity_from_regulators(&reg.l, &reg.u, pool.w(), pool.gamma())?
        .into_iter()
        .map(|v| ln_ell0 + v)
        .collect();
    let ln_p: Vec<f64> = reg
        .l
        .iter()
        .zip(&reg.u)
        .map(|(l, u)| ln_p0 + u - l)
        .collect();
    let ln_v = (0..t.len())
        .map(|i| log_add(ln_s[i] + ln_x[i], ln_y[i]))
        .collect();
    Ok(ArbPath {
        t: t.to_vec(),
        ln_s: ln_s.to_vec(),
        z: reg.z,
        l: reg.l,
        u: reg.u,
        ln_p,
        ln_x,
        ln_y,
        ln_ell,
        ln_v,
    })
}

/// `d = ln((S x + y)/(P x + y))` as a function of the mispricing.
pub fn wealth_ratio(z: f64, w: f64) -> f64 {
    (w * z.exp_m1()).ln_1p()
}

/// Log LP wealth `ln(S^X x + S^Y y)` from the decomposition
/// `ln ℓ + w ln S^X + (1-w) ln S^Y - w Z + 𝒮_w + d`, cross-checked against
/// direct valuation of the reserves.
pub fn wealth_path(
    arb: &ArbPath,
    ln_sx: &[f64],
    ln_sy: &[f64],
    w: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    let n = arb.len();
    for len in [
        ln_sx.len(),
        ln_sy.len(),
        arb.z.len(),
        arb.ln_ell.len(),
        arb.ln_x.len(),
        arb.ln_y.len(),
    ] {
        if len != n {
            return Err(Error::GridMismatch {
                expected: n,
                found: len,
            });
        }
    }
    if !(w > 0.0 && w < 1.0) {
        return domain(format!("weight out of range (0,1): {w}"));
    }
    MispricingBand::from_gamma(gamma)?;
    let entropy = weight_entropy(w);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if ((ln_sx[i] - ln_sy[i]) - arb.ln_s[i]).abs() > 1e-12 * (1.0 + arb.ln_s[i].abs()) {
            return domain(format!("ln S^X - ln S^Y differs from ln S at index {i}"));
        }
        let z = arb.z[i];
        let ln_v = arb.ln_ell[i] + w * ln_sx[i] + (1.0 - w) * ln_sy[i] - w * z
            + entropy
            + wealth_ratio(z, w);
        let direct = log_add(ln_sx[i] + arb.ln_x[i], ln_sy[i] + arb.ln_y[i]);
        if (ln_v - direct).abs() > 1e-9 * (1.0 + direct.abs()) {
            return Err(Error::SelfCheck(format!(
                "wealth decomposition {ln_v} disagrees with direct valuation {direct} at index {i}"
            )));
        }
        out.push(ln_v);
    }
    Ok(out)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn regulated_path_invariants(steps in prop::collection::vec(-0.01f64..0.01, 1..300), gamma in 0.98f64..0.9999) {
            let band = MispricingBand::from_gamma(gamma).unwrap();
            let mut ln_s = vec![0.0];
            for d in &steps {
                ln_s.push(ln_s.last().unwrap() + d);
            }
            let r = skorokhod_regulators(&ln_s, band, 0.0).unwrap();
            for i in 0..ln_s.len() {
                prop_assert!(r.z[i].abs() <= band.c + 1e-14);
                prop_assert!((r.z[i] - (ln_s[i] + r.l[i] - r.u[i])).abs() < 1e-12);
            }
            // Liquidity equals the weighted log reserves up to a constant.
            let (lx, ly) = inventory_from_regulators(&r.l, &r.u, 0.3, gamma, 1.0, 1.0).unwrap();
            let ell = liquidity_from_regulators(&r.l, &r.u, 0.3, gamma).unwrap();
            for i in 0..ln_s.len() {
                prop_assert!((0.3 * lx[i] + 0.7 * ly[i] - ell[i]).abs() < 1e-13);
                if i > 0 { prop_assert!(ell[i] >= ell[i - 1]); }
            }
        }

        #[test]
        fn discrete_replay_invariants(steps in prop::collection::vec(-0.01f64..0.01, 1..200), w in 0.1f64..0.9) {
            let p = PoolState::new(50.0, 70.0, w, 0.995).unwrap();
            let mut ln_s = vec![p.spot_price().ln()];
            for d in &steps {
                ln_s.push(ln_s.last().unwrap() + d);
            }
            let t: Vec<f64> = (0..ln_s.len()).map(|i| i as f64).collect();
            let arr: Vec<usize> = (0..ln_s.len()).step_by(3).collect();
            let a = run_discrete_arbitrage(&p, &t, &ln_s, &arr).unwrap();
            a.check_invariants(None, 1e-10).unwrap();
            let band = MispricingBand::from_gamma(0.995).unwrap();
            for &i in &arr { prop_assert!(a.z[i].abs() <= band.c + 1e-12); }
        }
    }
}
