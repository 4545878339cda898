//! `g3m heatmap`: growth ratio over a (w, γ) grid for each θ.

use std::fmt::Write as _;

use g3m_core::growth::{heatmap, Heatmap};

use crate::config::{HeatmapConfig, RunConfig};
use crate::manifest::Outputs;
use crate::{config_err, runtime_err, Context, Failure, Format};

/// Gnuplot `nonuniform matrix` text: first row is the γ axis, then one row
/// per weight.
pub fn matrix_text(h: &Heatmap) -> String {
    let mut s = String::new();
    let _ = write!(s, "{}", h.gamma.len());
    for g in &h.gamma {
        let _ = write!(s, " {g:e}");
    }
    s.push('\n');
    for (w, row) in h.w.iter().zip(&h.g) {
        let _ = write!(s, "{w:e}");
        for v in row {
            let _ = write!(s, " {v:e}");
        }
        s.push('\n');
    }
    s
}

pub fn run(ctx: &Context, cfg: HeatmapConfig) -> Result<(), Failure> {
    let w = cfg.w.values("w")?;
    let gamma = cfg.gamma.values("gamma")?;
    if cfg.theta.is_empty() {
        return Err(config_err("theta list is empty"));
    }
    if let Some(g) = gamma.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
        return Err(config_err(format!("gamma out of range (0,1): {g}")));
    }
    if let Some(x) = w.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
        return Err(config_err(format!("weight out of range (0,1): {x}")));
    }
    let maps: Vec<Heatmap> = cfg
        .theta
        .iter()
        .map(|&t| heatmap(&w, &gamma, t))
        .collect::<Result<_, _>>()
        .map_err(runtime_err)?;
    let mut out = Outputs::new(&ctx.out)?;
    for (k, h) in maps.iter().enumerate() {
        match ctx.format {
            Format::Csv => {
                let mut buf = Vec::new();
                h.write_csv(&mut buf).map_err(runtime_err)?;
                out.write(&format!("heatmap_{k}.csv"), &buf)?;
            }
            Format::Json => {
                out.write_json(&format!("heatmap_{k}.json"), h)?;
            }
        }
        if cfg.matrix {
            out.write(&format!("heatmap_{k}.dat"), matrix_text(h).as_bytes())?;
        }
    }
    let summary: Vec<_> = maps
        .iter()
        .map(|h| {
            let best: Vec<f64> = h.argmax.iter().map(|&j| h.gamma[j]).collect();
            serde_json::json!({ "theta": h.theta, "row_argmax_gamma": best })
        })
        .collect();
    eprintln!("wrote {} heatmap(s) to {}", maps.len(), ctx.out.display());
    out.finish(
        ctx,
        &RunConfig {
            heatmap: Some(cfg),
            ..Default::default()
        },
        None,
        serde_json::Value::Array(summary),
    )
}
