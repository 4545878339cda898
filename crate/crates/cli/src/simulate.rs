//! `g3m simulate`: pool paths under continuous or discrete arbitrage.

use rayon::prelude::*;

use g3m_core::validation::{simulate_lp_path, ExperimentConfig};
use g3m_core::ArbPath;

use crate::config::RunConfig;
use crate::manifest::Outputs;
use crate::{config_err, runtime_err, Context, Failure, Format};

pub const LONG_SCHEMA: &str = "arbpath-long/1";

pub fn run(ctx: &Context, mut cfg: ExperimentConfig, long: bool) -> Result<(), Failure> {
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(config_err)?;
    let paths: Vec<ArbPath> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|p| simulate_lp_path(&cfg, p).map(|lp| lp.arb))
        .collect::<Result<_, _>>()
        .map_err(runtime_err)?;
    let mut out = Outputs::new(&ctx.out)?;
    match (ctx.format, long) {
        (Format::Json, _) => {
            out.write_json("paths.json", &paths)?;
        }
        (Format::Csv, true) => {
            out.write("paths.csv", &long_csv(&paths)?)?;
        }
        (Format::Csv, false) => {
            let width = (paths.len().saturating_sub(1)).to_string().len().max(4);
            for (i, p) in paths.iter().enumerate() {
                let mut buf = Vec::new();
                p.write_csv(&mut buf).map_err(runtime_err)?;
                out.write(&format!("path_{i:0width$}.csv"), &buf)?;
            }
        }
    }
    let seed = cfg.seed;
    let summary = serde_json::json!({
        "paths": paths.len(),
        "final_ln_v": paths.iter().map(|p| p.ln_v.last().copied()).collect::<Vec<_>>(),
    });
    eprintln!("wrote {} path(s) to {}", paths.len(), ctx.out.display());
    out.finish(
        ctx,
        &RunConfig {
            simulate: Some(cfg),
            ..Default::default()
        },
        Some(seed),
        summary,
    )
}

fn long_csv(paths: &[ArbPath]) -> Result<Vec<u8>, Failure> {
    let mut buf = format!("# g3m-schema: {LONG_SCHEMA}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "path", "t", "ln_s", "z", "l", "u", "ln_p", "ln_x", "ln_y", "ln_ell", "ln_v",
        ])
        .map_err(runtime_err)?;
        for (k, p) in paths.iter().enumerate() {
            for i in 0..p.len() {
                let row = [
                    p.t[i],
                    p.ln_s[i],
                    p.z[i],
                    p.l[i],
                    p.u[i],
                    p.ln_p[i],
                    p.ln_x[i],
                    p.ln_y[i],
                    p.ln_ell[i],
                    p.ln_v[i],
                ];
                let mut rec = vec![k.to_string()];
                rec.extend(row.iter().map(|v| format!("{v:e}")));
                w.write_record(&rec).map_err(runtime_err)?;
            }
        }
        w.flush().map_err(runtime_err)?;
    }
    Ok(buf)
}
