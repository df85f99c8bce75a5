use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use znl::cli::{read_sidecar, PipelineConfig};
use znl::diagnostics::DiagnosticsReport;
use znl::markov::{sha256_hex, ZnlModel};

fn znl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_znl")).args(args).current_dir(dir).env_remove("ZNL_THREADS").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, cfg: &PipelineConfig) -> String {
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path.display().to_string()
}

fn period_two_csv(dir: &Path) -> String {
    let mut text = String::new();
    for n in 0..40 {
        text.push_str(if n % 2 == 0 { "0,0\n" } else { "1,1\n" });
    }
    let path = dir.join("p2.csv");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn generate_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let out = znl(&["generate", "--out", "h", "--n", "10000"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("h/series.csv")).unwrap();
    assert_eq!(text.lines().count(), 10_001);
    assert!(text.lines().all(|l| l.split(',').count() == 2));

    let out = znl(&["generate", "--system", "lorenz96", "--out", "l", "--n", "50", "--header"], dir.path());
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(dir.path().join("l/series.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x0,x1,x2,x3,x4,x5,x6,x7,x8,x9");
    assert_eq!(text.lines().count(), 52);
}

#[test]
fn csv_passthrough_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let src = period_two_csv(dir.path());
    let cfg = PipelineConfig { system: znl::cli::SystemKind::Csv, csv_path: Some(src.clone().into()), ..Default::default() };
    let config = write_config(dir.path(), &cfg);
    assert_eq!(code(&znl(&["generate", "--config", &config, "--out", "o"], dir.path())), 0);
    assert_eq!(fs::read(dir.path().join("o/series.csv")).unwrap(), fs::read(&src).unwrap());
    let prov = read_sidecar(&dir.path().join("o/series.csv")).unwrap();
    assert_eq!(prov.inputs[0].sha256, sha256_hex(&fs::read(&src).unwrap()));
}

#[test]
fn period_two_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let src = period_two_csv(dir.path());
    let fit = znl(&["fit", "--series", &src, "--out", "o"], dir.path());
    assert_eq!(code(&fit), 0, "{}", String::from_utf8_lossy(&fit.stderr));
    let model_path = dir.path().join("o/model.json");
    let first = fs::read(&model_path).unwrap();
    let model = ZnlModel::from_json(&String::from_utf8(first.clone()).unwrap()).unwrap();
    assert_eq!(model.len(), 2);
    assert_eq!(code(&znl(&["fit", "--series", &src, "--out", "o"], dir.path())), 0);
    assert_eq!(fs::read(&model_path).unwrap(), first);

    let sim = znl(&["simulate", "--out", "o", "--steps", "50", "--seed", "4"], dir.path());
    assert_eq!(code(&sim), 0);
    let run = fs::read_to_string(dir.path().join("o/run.csv")).unwrap();
    assert_eq!(run.lines().count(), 52);
    let again = znl(&["simulate", "--out", "o", "--steps", "50", "--seed", "4"], dir.path());
    assert_eq!(code(&again), 0);
    assert_eq!(fs::read_to_string(dir.path().join("o/run.csv")).unwrap(), run);
    let symbols: Vec<usize> = run.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for w in symbols.windows(2) {
        assert!(model.transitions().prob(w[0], w[1]) > 0.0);
    }

    let diag = znl(&["diagnose", "--out", "o", "--series", &src, "--lags", "5"], dir.path());
    assert_eq!(code(&diag), 0, "{}", String::from_utf8_lossy(&diag.stderr));
    let report: DiagnosticsReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    // the ridge fit lands within about γ of the two training points
    assert!(report.hauss_fwd < 2e-3 && report.hauss_bwd < 2e-3, "{report:?}");
    assert!(report.l1_fwd.is_finite() && report.autocorr_rel_err.is_finite());
    assert!(fs::read_to_string(dir.path().join("o/autocorr_true.csv")).unwrap().starts_with("lag,value\n1,"));
}

#[test]
fn sidecars_echo_config_and_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let out = znl(&["pipeline", "--out", "p", "--n", "2000", "--steps", "3000", "--delta", "0.15"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let p = dir.path().join("p");
    for name in ["series.csv", "model.json", "run.csv", "report.json", "theta.csv"] {
        let prov = read_sidecar(&p.join(name)).unwrap();
        assert_eq!(prov.config.delta, 0.15);
        assert_eq!(prov.config.n, 2000);
        assert_eq!(prov.output.sha256, sha256_hex(&fs::read(p.join(name)).unwrap()));
    }
    let model_side = read_sidecar(&p.join("model.json")).unwrap();
    assert_eq!(model_side.inputs[0].sha256, sha256_hex(&fs::read(p.join("series.csv")).unwrap()));
    let model = ZnlModel::from_json(&fs::read_to_string(p.join("model.json")).unwrap()).unwrap();
    assert_eq!(model_side.details["states"].as_u64().unwrap() as usize, model.len());
    let run_side = read_sidecar(&p.join("run.csv")).unwrap();
    assert_eq!(run_side.details["model_sha256"].as_str().unwrap(), model.hash());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&znl(&["pipeline", "--delta", "-1"], d)), 1);
    assert_eq!(code(&znl(&["nonsense"], d)), 1);
    assert_eq!(code(&znl(&["--help"], d)), 0);

    let threads = Command::new(env!("CARGO_BIN_EXE_znl"))
        .args(["generate", "--out", "t", "--n", "10"])
        .current_dir(d)
        .env("ZNL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&threads), 1);

    fs::write(d.join("bad.json"), "{ not json").unwrap();
    assert_eq!(code(&znl(&["generate", "--config", "bad.json"], d)), 1);
    assert_eq!(code(&znl(&["fit", "--series", "missing.csv", "--out", "o"], d)), 2);
    fs::write(d.join("garbage.csv"), "1,2\n3,x\n").unwrap();
    let out = znl(&["fit", "--series", "garbage.csv", "--out", "o"], d);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    // every raw weight underflows at a far start; the abort policy stops the run
    let src = period_two_csv(d);
    let cfg = PipelineConfig {
        bandwidth: Some(1e-4),
        x0: Some(vec![50.0, 50.0]),
        domain_policy: znl::markov::DomainPolicy::Abort,
        steps: 10,
        ..Default::default()
    };
    let config = write_config(d, &cfg);
    assert_eq!(code(&znl(&["fit", "--config", &config, "--series", &src, "--out", "o"], d)), 0);
    let sim = znl(&["simulate", "--config", &config, "--out", "o"], d);
    assert_eq!(code(&sim), 3, "{}", String::from_utf8_lossy(&sim.stderr));
    assert!(String::from_utf8_lossy(&sim.stderr).contains("step 1"));
    let prov = read_sidecar(&d.join("o/run.csv")).unwrap();
    assert_eq!(prov.details["complete"], serde_json::Value::Bool(false));

    // a pipeline failure names its stage
    let cfg = PipelineConfig { system: znl::cli::SystemKind::Lorenz96, n: 200, ..Default::default() };
    let config = write_config(d, &cfg);
    let out = znl(&["pipeline", "--config", &config, "--out", "l96"], d);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage fit"));
}

#[test]
fn thread_cap_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["pipeline", "--n", "1500", "--steps", "2000", "--out"];
    let one = Command::new(env!("CARGO_BIN_EXE_znl")).args(args).arg("a").current_dir(d).env("ZNL_THREADS", "1").output().unwrap();
    let two = Command::new(env!("CARGO_BIN_EXE_znl")).args(args).arg("b").current_dir(d).env("ZNL_THREADS", "3").output().unwrap();
    assert_eq!((code(&one), code(&two)), (0, 0));
    for name in ["series.csv", "model.json", "run.csv", "report.json"] {
        assert_eq!(fs::read(d.join("a").join(name)).unwrap(), fs::read(d.join("b").join(name)).unwrap(), "{name}");
    }
}
