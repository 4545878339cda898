//! `g3m growth`: long-run growth report for one parameter set.

use rand_distr::{Distribution, Normal};

use g3m_core::growth::{
    growth_rate_stochastic, lp_growth_rate, GrowthParams, GrowthReport, LimitDistribution,
};

use crate::config::{CoefficientConfig, GrowthConfig, RunConfig};
use crate::manifest::Outputs;
use crate::{config_err, runtime_err, Context, Failure, Format};

fn check(cfg: &GrowthConfig) -> Result<(), Failure> {
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        return Err(config_err(format!(
            "gamma out of range (0,1): {}",
            cfg.gamma
        )));
    }
    if !(cfg.w > 0.0 && cfg.w < 1.0) {
        return Err(config_err(format!("weight out of range (0,1): {}", cfg.w)));
    }
    match &cfg.coefficients {
        CoefficientConfig::Gbm { sigma, .. } if !(*sigma > 0.0) => {
            Err(config_err("sigma must be positive"))
        }
        CoefficientConfig::Mixture { atoms } if atoms.is_empty() => {
            Err(config_err("mixture needs at least one atom"))
        }
        CoefficientConfig::LognormalVariance {
            sd_log, samples, ..
        } if !(*sd_log >= 0.0) || *samples < 1000 => Err(config_err(
            "log-normal variance needs sd_log >= 0 and at least 1000 samples",
        )),
        _ => Ok(()),
    }
}

pub fn report(cfg: &GrowthConfig, seed_override: Option<u64>) -> Result<GrowthReport, Failure> {
    check(cfg)?;
    let (w, gamma, mu_x, mu_y) = (cfg.w, cfg.gamma, cfg.mu_x, cfg.mu_y);
    match &cfg.coefficients {
        CoefficientConfig::Gbm { mu, sigma } => {
            let params = GrowthParams::gbm(w, gamma, mu_x, mu_y, *mu, *sigma);
            params.validate().map_err(config_err)?;
            lp_growth_rate(&params).map_err(runtime_err)
        }
        CoefficientConfig::Mixture { atoms } => {
            let atoms = atoms.iter().map(|a| (a[0], a[1], a[2])).collect();
            growth_rate_stochastic(
                &LimitDistribution::Discrete(atoms),
                gamma,
                w,
                mu_x,
                mu_y,
                0,
                0,
            )
            .map_err(config_err)
        }
        CoefficientConfig::LognormalVariance {
            mu,
            mean_log,
            sd_log,
            samples,
            seed,
        } => {
            let normal = Normal::new(*mean_log, *sd_log).map_err(config_err)?;
            let mu = *mu;
            let dist =
                LimitDistribution::Sampler(Box::new(move |rng| (mu, normal.sample(rng).exp())));
            growth_rate_stochastic(
                &dist,
                gamma,
                w,
                mu_x,
                mu_y,
                *samples,
                seed_override.unwrap_or(*seed),
            )
            .map_err(runtime_err)
        }
    }
}

/// Aligned two-column table of the report.
pub fn table(r: &GrowthReport) -> String {
    let mut rows = vec![
        ("w", format!("{}", r.w)),
        ("gamma", format!("{}", r.gamma)),
        ("alpha", format!("{:.10}", r.alpha)),
        ("beta", format!("{:.10}", r.beta)),
        ("rate", format!("{:.10}", r.rate)),
        ("drift_part", format!("{:.10}", r.drift_part)),
        ("fee_part", format!("{:.10}", r.fee_part)),
        ("spt_excess", format!("{:.10}", r.spt_excess)),
        ("g", format!("{:.10}", r.g)),
    ];
    if let (Some(a), Some(b)) = (r.alpha_stderr, r.beta_stderr) {
        rows.push(("alpha_stderr", format!("{a:.3e}")));
        rows.push(("beta_stderr", format!("{b:.3e}")));
    }
    rows.iter().map(|(k, v)| format!("{k:<12} {v}\n")).collect()
}

pub fn run(ctx: &Context, cfg: GrowthConfig) -> Result<(), Failure> {
    let r = report(&cfg, ctx.seed)?;
    let mut out = Outputs::new(&ctx.out)?;
    out.write_json("growth.json", &r)?;
    let text = table(&r);
    if ctx.format == Format::Csv {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record([
                "w",
                "gamma",
                "alpha",
                "beta",
                "rate",
                "drift_part",
                "fee_part",
                "spt_excess",
                "g",
            ])
            .map_err(runtime_err)?;
            let vals = [
                r.w,
                r.gamma,
                r.alpha,
                r.beta,
                r.rate,
                r.drift_part,
                r.fee_part,
                r.spt_excess,
                r.g,
            ];
            w.write_record(vals.iter().map(|v| format!("{v:e}")))
                .map_err(runtime_err)?;
            w.flush().map_err(runtime_err)?;
        }
        out.write("growth.csv", &buf)?;
    }
    print!("{text}");
    let results = serde_json::to_value(&r).map_err(runtime_err)?;
    out.finish(
        ctx,
        &RunConfig {
            growth: Some(cfg),
            ..Default::default()
        },
        ctx.seed,
        results,
    )
}
