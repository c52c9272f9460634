use std::path::{Path, PathBuf};

use satadapt::bounds::BmsbParams;
use satadapt::cli::{self, BoundsReport, CheckReport};
use satadapt::config::Config;
use satadapt::experiments::Manifest;
use satadapt::linalg::Matrix;
use satadapt::system::NoiseSpec;

fn cfg_path(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name).display().to_string()
}

fn run(args: &[&str]) -> i32 {
    cli::run(std::iter::once("satadapt").chain(args.iter().copied()))
}

fn out(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn simulate_writes_trials_series_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = out(&tmp, "sim");
    let sys1 = cfg_path("system1.json");
    let code = run(&["simulate", "--config", &sys1, "--trials", "7", "--horizon", "40", "--seed", "7", "--mode", "uncontrolled", "--out", o.to_str().unwrap()]);
    assert_eq!(code, 0);
    let trials = std::fs::read_dir(o.join("trials")).unwrap().count();
    assert_eq!(trials, 7);
    let series = std::fs::read_to_string(o.join("series.csv")).unwrap();
    assert_eq!(series.lines().next(), Some("t,median,p90"));
    assert_eq!(series.lines().count(), 42);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(o.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["master_seed"], 7);
    assert_eq!(m["config"]["mode"], "uncontrolled");
    assert_eq!(m["config"]["trials"], 7);
    let first = std::fs::read_to_string(o.join("trials/trial_0000.csv")).unwrap();
    assert_eq!(first.lines().next(), Some("t,x_1,x_2,u_1,v_1,norm_x"));
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (out(&tmp, "a"), out(&tmp, "b"));
    let sys1 = cfg_path("system2.json");
    assert_eq!(run(&["simulate", "--config", &sys1, "--trials", "3", "--horizon", "30", "--out", a.to_str().unwrap()]), 0);
    let text = std::fs::read_to_string(a.join("manifest.json")).unwrap();
    let m: Manifest<satadapt::experiments::ExperimentConfig> = serde_json::from_str(&text).unwrap();
    let again = satadapt::experiments::run_experiment(&m.config, 1).unwrap();
    satadapt::experiments::write_experiment(&b, &m.config, &again).unwrap();
    for f in ["series.csv", "trials/trial_0002.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_and_usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = out(&tmp, "x");
    let o = o.to_str().unwrap();
    assert_eq!(run(&["simulate", "--config", "/no/such/file.json", "--out", o]), 2);
    assert_eq!(run(&["simulate", "--config", &cfg_path("system1.json"), "--mode", "sideways", "--out", o]), 2);
    assert_eq!(run(&["simulate", "--config", &cfg_path("system1.json"), "--set", "plant.c=2", "--out", o]), 2);
    assert_eq!(run(&["frobnicate"]), 2);

    let no_bmsb = out(&tmp, "nobmsb.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(cfg_path("system1.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("bmsb");
    std::fs::write(&no_bmsb, v.to_string()).unwrap();
    assert_eq!(run(&["bounds", "--config", no_bmsb.to_str().unwrap(), "--out", o]), 2);
    assert_eq!(run(&["simulate", "--config", no_bmsb.to_str().unwrap(), "--trials", "2", "--horizon", "10", "--out", o]), 0);
}

#[test]
fn bounds_report_round_trips_and_flags_inadmissible_plant() {
    let tmp = tempfile::tempdir().unwrap();
    let o = out(&tmp, "b");
    assert_eq!(run(&["bounds", "--config", &cfg_path("system1.json"), "--set", "bounds.mgf_samples=20000", "--out", o.to_str().unwrap()]), 0);
    let text = std::fs::read_to_string(o.join("bounds.json")).unwrap();
    let r: BoundsReport = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&r).unwrap(), text.trim_end());
    assert_eq!(serde_json::from_str::<BoundsReport>(&serde_json::to_string(&r).unwrap()).unwrap(), r);
    assert!(!r.admissible);
    assert!(r.q1 > 0.0 && r.m_q > 0.0 && r.big_m_q.is_finite());
    assert!(r.rows.iter().all(|row| row.estimation_error_at_t0.is_finite() && row.moment.is_none()));

    assert_eq!(run(&["bounds", "--config", &cfg_path("margin.json"), "--set", "bounds.mgf_samples=20000", "--out", o.to_str().unwrap()]), 0);
    let r: BoundsReport = serde_json::from_str(&std::fs::read_to_string(o.join("bounds.json")).unwrap()).unwrap();
    assert!(r.admissible && r.explicit.is_some());
    for row in &r.rows {
        assert_eq!(row.envelope.len(), 4);
        assert!(row.envelope.windows(2).all(|w| w[1].moment <= w[0].moment));
    }
}

#[test]
fn zero_noise_report() {
    let mut cfg = Config::load(Path::new(&cfg_path("system3.json")), &[]).unwrap();
    cfg.plant.disturbance = NoiseSpec::zero(2);
    cfg.plant.excitation = NoiseSpec::zero(1);
    cfg.bounds.mgf_samples = 100;
    cfg.bmsb = Some(BmsbParams { k: 1, gamma_sb: Matrix::identity(3).scale(0.01), p: 0.5 });
    let ctx = satadapt::bounds::BoundContext::build(&cfg.plant, cfg.bmsb.clone().unwrap(), cfg.mgf_options()).unwrap();
    assert_eq!(ctx.m_v_bar.estimate, 0.0);
    assert_eq!(ctx.m_w_bar.estimate, 0.0);
    let r0 = ctx.drift_rates(0.0).unwrap();
    let expect = (-ctx.sat_radius() / ctx.sub.norm_r_pinv).exp();
    assert!((r0.lambda - expect).abs() < 1e-15 && r0.lambda < 1.0);
}

#[test]
fn check_passes_and_injected_fault_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let sys1 = cfg_path("system1.json");
    let small = ["--set", "bounds.mgf_samples=20000", "--set", "diagnostics.matrix_samples=300", "--set", "diagnostics.control_samples=1000", "--set", "diagnostics.drift_inner_samples=300"];
    let good = out(&tmp, "good");
    let mut args = vec!["check", "--config", &sys1, "--out", good.to_str().unwrap()];
    args.extend(small);
    assert_eq!(run(&args), 0);
    let r: CheckReport = serde_json::from_str(&std::fs::read_to_string(good.join("check.json")).unwrap()).unwrap();
    assert!(r.violations.is_empty() && !r.fault_injected);
    assert_eq!(r.drift[0].epsilon, 0.0);

    let bad = out(&tmp, "bad");
    let mut args = vec!["check", "--config", &sys1, "--inject-fault", "--out", bad.to_str().unwrap()];
    args.extend(small);
    assert_eq!(run(&args), 1);
    let r: CheckReport = serde_json::from_str(&std::fs::read_to_string(bad.join("check.json")).unwrap()).unwrap();
    assert!(r.fault_injected && !r.violations.is_empty());
}

#[test]
fn diagnose_writes_coverage_fractions() {
    let tmp = tempfile::tempdir().unwrap();
    let o = out(&tmp, "d");
    let code = run(&[
        "diagnose",
        "--config",
        &cfg_path("system1.json"),
        "--set",
        "bounds.mgf_samples=20000",
        "--set",
        "diagnostics.trials=5",
        "--out",
        o.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(o.join("diagnose.json")).unwrap()).unwrap();
    let est = &v["estimation"]["ran"];
    let frac = est["successes"].as_f64().unwrap() / est["trials"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&frac));
    assert!(v["stability"]["skipped"].is_string());
    let p = v["small_ball"]["proxy"]["p_hat"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn figure_commands_write_series() {
    let tmp = tempfile::tempdir().unwrap();
    let o = out(&tmp, "f2");
    assert_eq!(run(&["figure2", "--trials", "4", "--horizon", "50", "--x0", "1,2", "--x0", "0,-3", "--out", o.to_str().unwrap()]), 0);
    let mut names: Vec<String> = std::fs::read_dir(&o).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["manifest.json", "summary.json", "x0_0_-3.csv", "x0_1_2.csv"]);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(o.join("manifest.json")).unwrap()).unwrap();
    assert!(m["config"].get("workers").is_none());
}
