//! `g3m analyze-csv`: mispricing of an observed pool price against a
//! reference price.
//!
//! Input columns are `timestamp,pool_price,reference_price`, with
//! timestamps in epoch seconds or ISO-8601. An optional first line
//! `# g3m-schema: prices/1` pins the format version.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::Outputs;
use crate::{config_err, runtime_err, Context, Failure};

pub const PRICES_SCHEMA: &str = "prices/1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRow {
    pub t: f64,
    pub pool: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub rows: usize,
    pub gamma: f64,
    /// Band half-width `-ln γ`.
    pub c: f64,
    pub in_band_fraction: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub z_mean: f64,
    /// Pool-price decreases that end on the lower edge.
    pub regulator_l: f64,
    /// Pool-price increases that end on the upper edge.
    pub regulator_u: f64,
    pub boundary_moves: usize,
    pub interior_moves: usize,
    pub median_spacing_secs: f64,
}

fn parse_time(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    if let Ok(d) = DateTime::parse_from_rfc3339(s) {
        return Some(d.timestamp() as f64 + d.timestamp_subsec_nanos() as f64 * 1e-9);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(d) = NaiveDateTime::parse_from_str(s, fmt) {
            let u = d.and_utc();
            return Some(u.timestamp() as f64 + u.timestamp_subsec_nanos() as f64 * 1e-9);
        }
    }
    None
}

/// Parses and checks a price series. Errors name the 1-based data row.
pub fn read_prices<R: Read>(input: R) -> Result<Vec<PriceRow>, String> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| e.to_string())?;
    let rest: Box<dyn Read> = if let Some(tag) = first.trim().strip_prefix('#') {
        let version = tag.trim().strip_prefix("g3m-schema:").map(str::trim);
        if version != Some(PRICES_SCHEMA) {
            return Err(format!(
                "unsupported schema line {:?}, expected {PRICES_SCHEMA}",
                first.trim()
            ));
        }
        Box::new(reader)
    } else {
        Box::new(std::io::Cursor::new(first.into_bytes()).chain(reader))
    };
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(rest);
    let headers = csv.headers().map_err(|e| e.to_string())?.clone();
    let expect = ["timestamp", "pool_price", "reference_price"];
    if headers.iter().collect::<Vec<_>>() != expect {
        return Err(format!(
            "header must be {}, found {}",
            expect.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        ));
    }
    let mut rows: Vec<PriceRow> = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| format!("row {row}: {e}"))?;
        let t =
            parse_time(&rec[0]).ok_or_else(|| format!("row {row}: bad timestamp {:?}", &rec[0]))?;
        let num = |k: usize, name: &str| -> Result<f64, String> {
            let v: f64 = rec[k]
                .parse()
                .map_err(|_| format!("row {row}: bad {name} {:?}", &rec[k]))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("row {row}: {name} must be positive, got {v}"));
            }
            Ok(v)
        };
        let (pool, reference) = (num(1, "pool_price")?, num(2, "reference_price")?);
        if let Some(prev) = rows.last() {
            if !(t > prev.t) {
                return Err(format!("row {row}: timestamps must be strictly increasing"));
            }
        }
        rows.push(PriceRow { t, pool, reference });
    }
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    Ok(rows)
}

pub fn analyze(rows: &[PriceRow], gamma: f64) -> Analysis {
    let c = -gamma.ln();
    let tol = 1e-9 + 1e-6 * c;
    let z: Vec<f64> = rows.iter().map(|r| (r.reference / r.pool).ln()).collect();
    let inside = z.iter().filter(|v| v.abs() <= c + tol).count();
    let (mut l, mut u, mut boundary, mut interior) = (0.0, 0.0, 0, 0);
    for i in 1..rows.len() {
        let dp = (rows[i].pool / rows[i - 1].pool).ln();
        if dp == 0.0 {
            continue;
        }
        if dp > 0.0 && z[i] >= c - tol {
            u += dp;
            boundary += 1;
        } else if dp < 0.0 && z[i] <= -c + tol {
            l -= dp;
            boundary += 1;
        } else {
            interior += 1;
        }
    }
    let mut gaps: Vec<f64> = rows.windows(2).map(|w| w[1].t - w[0].t).collect();
    gaps.sort_by(|a, b| a.total_cmp(b));
    let median = match gaps.len() {
        0 => 0.0,
        n if n % 2 == 1 => gaps[n / 2],
        n => 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]),
    };
    Analysis {
        rows: rows.len(),
        gamma,
        c,
        in_band_fraction: inside as f64 / rows.len() as f64,
        z_min: z.iter().cloned().fold(f64::INFINITY, f64::min),
        z_max: z.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        z_mean: z.iter().sum::<f64>() / z.len() as f64,
        regulator_l: l,
        regulator_u: u,
        boundary_moves: boundary,
        interior_moves: interior,
        median_spacing_secs: median,
    }
}

pub fn run(ctx: &Context, input: &Path, gamma: f64) -> Result<(), Failure> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(config_err(format!("gamma out of range (0,1): {gamma}")));
    }
    let file =
        std::fs::File::open(input).map_err(|e| config_err(format!("{}: {e}", input.display())))?;
    let rows = read_prices(file).map_err(|e| config_err(format!("{}: {e}", input.display())))?;
    let a = analyze(&rows, gamma);
    let mut out = Outputs::new(&ctx.out)?;
    out.write_json("analysis.json", &a)?;
    println!("{}", serde_json::to_string_pretty(&a).map_err(runtime_err)?);
    let results = serde_json::json!({ "input": input.display().to_string(), "gamma": gamma });
    out.finish(ctx, &RunConfig::default(), None, results)
}
