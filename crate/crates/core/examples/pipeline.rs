//! The command-line pipeline driven from code: generate, fit, simulate and
//! diagnose into a scratch directory, then print the report.

use znl::cli::{cmd_diagnose, cmd_fit, cmd_generate, cmd_simulate, read_sidecar, PipelineConfig, SystemKind};

fn main() -> znl::Result<()> {
    let out = std::env::temp_dir().join("znl-pipeline-example");
    let cfg = PipelineConfig { system: SystemKind::Henon, n: 10_000, steps: 50_000, out: out.clone(), ..Default::default() };

    let series = cmd_generate(&cfg)?;
    let model = cmd_fit(&cfg, &series)?;
    let run = cmd_simulate(&cfg, &model)?;
    let report = cmd_diagnose(&cfg, &model, &run, &series)?;

    let fit = read_sidecar(&model)?;
    println!("model {} ({} states, sha256 {})", model.display(), fit.details["states"], &fit.output.sha256[..16]);
    let text = std::fs::read_to_string(&report).map_err(|e| znl::ZnlError::Data(e.to_string()))?;
    let value: serde_json::Value = serde_json::from_str(&text).expect("report is JSON");
    for key in ["hauss_fwd", "hauss_bwd", "l1_fwd", "l1_bwd", "autocorr_rel_err", "spread_p99", "mean_offset"] {
        println!("{key:>16}: {}", value[key]);
    }
    println!("{:>16}: {}", "theta_curve", value["theta_curve"]);
    println!("artifacts in {}", out.display());
    Ok(())
}
