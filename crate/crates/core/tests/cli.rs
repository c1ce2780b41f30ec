use std::path::Path;
use std::process::{Command, Output};

use ma_toolkit::bench::{ExperimentKind, ScenarioConfig};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ma-toolkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: &ScenarioConfig) -> String {
    let p = dir.join(name);
    std::fs::write(&p, cfg.to_toml().unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "version = 1\nkind = \"crb-sweep\"\nbogus = 3\n").unwrap();
    let out = cli(&["crb-sweep", "--quiet", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let crb = write_config(
        dir.path(),
        "crb.toml",
        &ScenarioConfig::defaults(ExperimentKind::CrbSweep),
    );
    assert_eq!(
        cli(&["wsr-sweep", "--quiet", "--config", &crb])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        cli(&["crb-sweep", "--quiet", "--config", &crb, "--reps", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        cli(&["crb-sweep", "--quiet", "--config", "/nonexistent/x.toml"])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(
        cli(&[
            "crb-sweep",
            "--quiet",
            "--config",
            &crb,
            "--out",
            "/nonexistent/dir/out.csv"
        ])
        .status
        .code(),
        Some(4)
    );

    let mut v2 = ScenarioConfig::defaults(ExperimentKind::CrbSweep);
    v2.version = 2;
    let v2 = write_config(dir.path(), "v2.toml", &v2);
    assert_eq!(
        cli(&["crb-sweep", "--quiet", "--config", &v2])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sidecar_records_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("crb.csv");
    let o = cli(&[
        "crb-sweep",
        "--quiet",
        "--seed",
        "77",
        "--reps",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap())
            .unwrap();
    let mut cfg = ScenarioConfig::defaults(ExperimentKind::CrbSweep);
    cfg.seed = 77;
    cfg.repetitions = 3;
    cfg.output = Some(out.clone());
    assert_eq!(meta["config_digest"], cfg.digest());
    assert_eq!(meta["master_seed"], 77);
    assert_eq!(meta["kind"], "crb-sweep");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("sweep_value,method,mean,std_error,repetitions\n"));
}

#[test]
fn crb_sweep_edge_follows_inverse_square_length() {
    let mut cfg = ScenarioConfig::defaults(ExperimentKind::CrbSweep);
    cfg.repetitions = 2;
    cfg.crb_sweep.as_mut().unwrap().n_antennas = 2;
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.toml", &cfg);
    let o = cli(&["crb-sweep", "--quiet", "--config", &path]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    let edge: Vec<f64> = rows(&csv)
        .iter()
        .filter(|r| r[1] == "edge")
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(edge.len(), 4);
    for w in edge.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }
}

#[test]
fn flat_single_path_wsr_is_method_independent() {
    let mut cfg = ScenarioConfig::defaults(ExperimentKind::WsrSweep);
    cfg.repetitions = 2;
    {
        let w = cfg.wsr_sweep.as_mut().unwrap();
        w.users = 1;
        w.paths = 1;
        w.n_antennas = 2;
        w.sizes = vec![1.0, 2.0];
        w.settings.pso.swarm = 10;
        w.settings.pso.iters = 20;
        w.settings.gradient.starts = 2;
        w.settings.zo.iters = 20;
    }
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "w.toml", &cfg);
    let o = cli(&["wsr-sweep", "--quiet", "--config", &path]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let means: Vec<f64> = rows(&String::from_utf8(o.stdout).unwrap())
        .iter()
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(means.len(), 12);
    for m in &means {
        assert!((m - means[0]).abs() <= 1e-9 * means[0], "{means:?}");
    }
}

#[test]
fn noiseless_nmse_sweep_reaches_exact_recovery() {
    let mut cfg = ScenarioConfig::defaults(ExperimentKind::NmseSweep);
    cfg.repetitions = 3;
    {
        let n = cfg.nmse_sweep.as_mut().unwrap();
        n.measurements = vec![1, 60];
        n.paths = 2;
        n.eval_points = 64;
    }
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "n.toml", &cfg);
    let o = cli(&["nmse-sweep", "--quiet", "--config", &path]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for r in rows(&String::from_utf8(o.stdout).unwrap()) {
        let v: f64 = r[2].parse().unwrap();
        if r[0] == "60" {
            assert!(v <= 1e-6, "{r:?}");
        } else {
            assert!(v > 0.1, "{r:?}");
        }
    }
}

#[test]
fn single_runs_produce_output() {
    let dir = tempfile::tempdir().unwrap();
    let est = cli(&["estimate", "--quiet", "--seed", "3"]);
    assert!(est.status.success());
    assert!(String::from_utf8(est.stdout)
        .unwrap()
        .starts_with("tx_u,tx_v,rx_u,rx_v,gain_re,gain_im\n"));

    let mut demo = ScenarioConfig::defaults(ExperimentKind::ChannelDemo);
    demo.channel_demo.as_mut().unwrap().resolution = 0.5;
    let path = write_config(dir.path(), "d.toml", &demo);
    let d = cli(&["channel-demo", "--quiet", "--config", &path]);
    assert!(d.status.success());
    let csv = String::from_utf8(d.stdout).unwrap();
    assert!(csv.starts_with("x,y,re,im,magnitude\n"));
    assert_eq!(csv.lines().count(), 1 + 9 * 9);

    let mut opt = ScenarioConfig::defaults(ExperimentKind::Optimize);
    {
        let c = opt.optimize.as_mut().unwrap();
        c.settings.pso.swarm = 8;
        c.settings.pso.iters = 10;
    }
    let path = write_config(dir.path(), "o.toml", &opt);
    let out = dir.path().join("trace.csv");
    let o = cli(&[
        "optimize",
        "--quiet",
        "--config",
        &path,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap())
            .unwrap();
    assert!(meta["objective_value"].as_f64().unwrap() >= meta["fpa_value"].as_f64().unwrap());
}
