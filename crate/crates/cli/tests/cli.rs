use std::path::Path;
use std::process::{Command, Output};

use g3m_core::arbitrage::run_discrete_arbitrage;
use g3m_core::growth::optimal_fee;
use g3m_core::market::simulate_relative_gbm;
use g3m_core::{ArbPath, ArrivalSpec, PoolState};
use serde_json::Value;

fn g3m(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_g3m"))
        .args(args)
        .env_remove("G3M_OUT")
        .env_remove("G3M_THREADS")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SIM: &str = "[simulate]
horizon = 1.0
steps = 400
paths = 3
seed = 5

[simulate.model]
mu_x = 0.01
sigma_xx = 0.09

[simulate.pool]
x = 100.0
y = 100.0
w = 0.5
gamma = 0.997
";

#[test]
fn growth_baseline_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = g3m(&["growth", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&out.join("growth.json"));
    assert!((r["g"].as_f64().unwrap() - 0.9999992).abs() < 1e-7);
    assert!(String::from_utf8_lossy(&o.stdout).contains("fee_part"));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "growth");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["version"].is_string());
}

#[test]
fn growth_near_zero_fee_and_stochastic_block() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("g.toml");
    std::fs::write(&cfg, "[growth]\nw = 0.3\ngamma = 0.9999999\ncoefficients = { kind = \"gbm\", mu = 0.01, sigma = 0.2 }\n").unwrap();
    let out = dir.path().join("a");
    let o = g3m(&[
        "growth",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((json(&out.join("growth.json"))["g"].as_f64().unwrap() - 1.0).abs() < 1e-4);

    std::fs::write(
        &cfg,
        "[growth]\nw = 0.5\ngamma = 0.99\n[growth.coefficients]\nkind = \"lognormal_variance\"\nmu = 0.0\nmean_log = -3.0\nsd_log = 0.5\nsamples = 20000\nseed = 3\n",
    )
    .unwrap();
    let out = dir.path().join("b");
    let o = g3m(&[
        "growth",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&out.join("growth.json"));
    assert!(r["alpha_stderr"].as_f64().unwrap() > 0.0 && r["beta_stderr"].as_f64().unwrap() > 0.0);
}

#[test]
fn bad_gamma_and_unknown_keys_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, SIM.replace("gamma = 0.997", "gamma = 1.5")).unwrap();
    let o = g3m(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma out of range"));

    std::fs::write(&cfg, format!("{SIM}bogus = 1\n")).unwrap();
    let o = g3m(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn simulate_writes_versioned_paths_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(&cfg, SIM).unwrap();
    let first = dir.path().join("first");
    let o = g3m(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for i in 0..3 {
        let text = std::fs::read(first.join(format!("path_000{i}.csv"))).unwrap();
        let p = ArbPath::read_csv(&text[..]).unwrap();
        assert_eq!(p.len(), 401);
        assert!(p.z.iter().all(|z| z.abs() <= -(0.997f64.ln()) + 1e-12));
    }

    // Replaying the manifest on another thread count reproduces every file.
    let second = dir.path().join("second");
    let manifest = first.join("manifest.json");
    let o = g3m(&[
        "simulate",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (a, b) = (json(&manifest), json(&second.join("manifest.json")));
    assert_eq!(a["outputs"], b["outputs"]);
    assert_eq!(a["config_hash"], b["config_hash"]);

    let long = dir.path().join("long");
    let o = g3m(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        long.to_str().unwrap(),
        "--long",
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(long.join("paths.csv")).unwrap();
    assert!(text.starts_with("# g3m-schema: arbpath-long/1\npath,t,"));
    assert_eq!(text.lines().count(), 2 + 3 * 401);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_g3m"))
        .arg("growth")
        .env("G3M_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("growth.json").exists());
}

#[test]
fn heatmap_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("h.toml");
    std::fs::write(
        &cfg,
        "[heatmap]\ntheta = [0.0, 2.5]\nmatrix = true\nw = { start = 0.1, stop = 0.9, points = 9 }\ngamma = { start = 0.01, stop = 0.99, points = 99 }\n",
    )
    .unwrap();
    let out = dir.path().join("h");
    let o = g3m(&[
        "heatmap",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("heatmap_1.csv").exists() && out.join("heatmap_0.dat").exists());

    let text = std::fs::read_to_string(out.join("heatmap_0.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# g3m-schema: heatmap/1"));
    let body = lines.collect::<Vec<_>>().join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| {
            r.unwrap()
                .iter()
                .map(|v| v.parse::<f64>().unwrap())
                .collect()
        })
        .collect();
    let g = |w: f64, gamma: f64| {
        rows.iter()
            .find(|r| (r[1] - w).abs() < 1e-9 && (r[2] - gamma).abs() < 1e-9)
            .unwrap()[3]
    };
    for w in [0.1, 0.2, 0.3, 0.4] {
        for gamma in [0.01, 0.5, 0.99] {
            let (a, b) = (g(w, gamma), g(1.0 - w, gamma));
            assert!((a - b).abs() <= 1e-12 * a.abs(), "w={w} gamma={gamma}");
        }
    }
    // The per-row maximum sits on the grid point next to the refined optimum.
    for w in [0.1, 0.5] {
        let best = rows
            .iter()
            .find(|r| (r[1] - w).abs() < 1e-9 && r[4] == 1.0)
            .unwrap()[2];
        let opt = optimal_fee(w, 0.0, 2000).unwrap();
        assert!(
            (best - opt.gamma_star).abs() <= 0.01 + 1e-12,
            "w={w}: {best} vs {}",
            opt.gamma_star
        );
    }

    std::fs::write(&cfg, "[heatmap]\ntheta = [0.0]\nw = { start = 0.1, stop = 0.9, points = 0 }\ngamma = { start = 0.1, stop = 0.9, points = 5 }\n").unwrap();
    let o = g3m(&[
        "heatmap",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_subset_and_tightened_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = g3m(&[
        "validate",
        "--only",
        "stationary",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("PASS stationary"));
    let table = json(&out.join("validation.json"));
    assert_eq!(table.as_array().unwrap().len(), 1);

    let o = g3m(&[
        "validate",
        "--only",
        "growth",
        "--tolerance-scale",
        "1e-3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("FAIL growth"));

    let o = g3m(&[
        "validate",
        "--only",
        "nonsense",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

fn write_prices(path: &Path, rows: &[(f64, f64, f64)]) {
    let mut s = String::from("timestamp,pool_price,reference_price\n");
    for (t, p, r) in rows {
        s.push_str(&format!("{t},{p:e},{r:e}\n"));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn analyze_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.csv");
    write_prices(
        &input,
        &(0..50)
            .map(|i| (60.0 * i as f64, 1.5, 1.5))
            .collect::<Vec<_>>(),
    );
    let out = dir.path().join("a");
    let o = g3m(&[
        "analyze-csv",
        "--input",
        input.to_str().unwrap(),
        "--gamma",
        "0.997",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = json(&out.join("analysis.json"));
    assert_eq!(a["in_band_fraction"], 1.0);
    assert_eq!(
        (a["z_min"].as_f64(), a["z_max"].as_f64()),
        (Some(0.0), Some(0.0))
    );
    assert_eq!(a["median_spacing_secs"], 60.0);

    // A series produced by the discrete arbitrage replay stays in the band
    // and its boundary moves add up to the replay's regulators.
    let bundle = simulate_relative_gbm(0.0, 0.3, 1.0, 5000, 9, 0).unwrap();
    let pool = PoolState::new(100.0, 100.0, 0.5, 0.997).unwrap();
    let idx = ArrivalSpec::Poisson { rate: 2000.0 }
        .indices(&bundle.t, 9, 0)
        .unwrap();
    let arb = run_discrete_arbitrage(&pool, &bundle.t, &bundle.ln_s, &idx).unwrap();
    let rows: Vec<(f64, f64, f64)> = idx
        .iter()
        .map(|&i| (bundle.t[i] * 3.15e7, arb.ln_p[i].exp(), arb.ln_s[i].exp()))
        .collect();
    let input = dir.path().join("arb.csv");
    write_prices(&input, &rows);
    let o = g3m(&[
        "analyze-csv",
        "--input",
        input.to_str().unwrap(),
        "--gamma",
        "0.997",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = json(&out.join("analysis.json"));
    assert_eq!(a["in_band_fraction"], 1.0);
    let (l, u) = (
        arb.l.last().unwrap() - arb.l[idx[0]],
        arb.u.last().unwrap() - arb.u[idx[0]],
    );
    assert!(
        (a["regulator_l"].as_f64().unwrap() - l).abs() < 1e-6 * (1.0 + l),
        "{a} vs {l}"
    );
    assert!((a["regulator_u"].as_f64().unwrap() - u).abs() < 1e-6 * (1.0 + u));

    let input = dir.path().join("bad.csv");
    write_prices(&input, &[(0.0, 1.0, 1.0), (1.0, 1.0, 1.0), (2.0, 0.0, 1.0)]);
    let o = g3m(&[
        "analyze-csv",
        "--input",
        input.to_str().unwrap(),
        "--gamma",
        "0.997",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}
