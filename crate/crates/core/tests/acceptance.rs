//! End-to-end acceptance criteria. Each test prints one PASS/FAIL line to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use satadapt::bounds::BoundContext;
use satadapt::config::Config;
use satadapt::controller::{ClosedLoop, ControlMode};
use satadapt::diagnostics;
use satadapt::experiments::{self, Figure1Data, Figure2Data, SuiteOptions};
use satadapt::linalg::vec;
use satadapt::rng::{self, streams};
use satadapt::system::NoiseSpec;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{verdict}] criterion {id:>2} {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn config(name: &str) -> Config {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    Config::load(&path, &[]).unwrap()
}

fn context(cfg: &Config) -> BoundContext {
    BoundContext::build(&cfg.plant, cfg.bmsb.clone().unwrap(), cfg.mgf_options()).unwrap()
}

fn suite_options() -> SuiteOptions {
    SuiteOptions { seed: 0, trials: 100, horizon: 1000, workers: 0 }
}

fn figure1() -> &'static (Figure1Data, f64) {
    static DATA: OnceLock<(Figure1Data, f64)> = OnceLock::new();
    DATA.get_or_init(|| {
        let start = Instant::now();
        let d = experiments::figure1_suite(&suite_options()).unwrap();
        (d, start.elapsed().as_secs_f64())
    })
}

fn figure2() -> &'static Figure2Data {
    static DATA: OnceLock<Figure2Data> = OnceLock::new();
    DATA.get_or_init(|| experiments::figure2_suite(&suite_options(), &experiments::default_x0_set()).unwrap())
}

#[test]
fn criterion_01_controlled_bounded_uncontrolled_grows() {
    let (data, secs) = figure1();
    let mut pass = *secs < 120.0;
    let mut parts = Vec::new();
    for s in &data.controlled {
        let r = s.series.median_at(1000) / s.series.median_at(500);
        pass &= r <= 2.0;
        parts.push(format!("{} m1000/m500 = {r:.3}", s.name));
    }
    let un = &data.uncontrolled.series;
    let growth = un.median_at(1000) / un.median_at(100);
    let gap = un.median_at(1000) / data.controlled[0].series.median_at(1000);
    pass &= growth >= 3.0 && gap >= 5.0;
    parts.push(format!("uncontrolled m1000/m100 = {growth:.3}, gap = {gap:.2}, {secs:.1}s"));
    report(1, "median norms", pass, parts.join("; "));
}

#[test]
fn criterion_02_common_steady_state() {
    let data = figure2();
    let finals: Vec<f64> = data.runs.iter().map(|r| r.series.median_at(1000)).collect();
    let lo = finals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = finals.iter().cloned().fold(0.0, f64::max);
    for (x0, r) in data.x0.iter().zip(&data.runs) {
        assert!((r.series.median_at(0) - vec::norm(x0)).abs() < 1e-12);
    }
    report(2, "varying x0", hi <= 1.25 * lo, format!("medians at t=1000 {finals:.3?}, max/min = {:.3}", hi / lo));
}

#[test]
fn criterion_03_input_constraint() {
    let (f1, _) = figure1();
    let f2 = figure2();
    let all: Vec<_> = f1.controlled.iter().chain([&f1.uncontrolled]).chain(&f2.runs).collect();
    let violations: usize = all.iter().map(|s| s.control_violations).sum();
    let worst = all.iter().map(|s| s.max_control_norm).fold(0.0, f64::max);
    report(3, "input constraint", violations == 0 && worst <= 1.0, format!("{violations} violations, max |U| = {worst:.6}"));
}

#[test]
fn criterion_04_perturbation_inequalities() {
    let cfg = config("system1.json");
    let start = Instant::now();
    let r = diagnostics::certify_inequalities(&cfg.plant, 10_000, 100_000, &mut rng::stream(0, streams::INEQUALITIES)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let sizes_ok = r.checks.iter().all(|c| c.samples >= 10_000) && r.checks.iter().rev().take(2).all(|c| c.samples >= 100_000);
    let detail = r.checks.iter().map(|c| format!("{} {}/{}", c.name, c.violations, c.samples)).collect::<Vec<_>>().join(", ");
    report(
        4,
        "perturbation inequalities",
        r.violations() == 0 && sizes_ok && secs < 60.0,
        format!("{detail}, convexity {}/{}, {secs:.1}s", r.convexity.violations, r.convexity.points),
    );
}

#[test]
fn criterion_05_drift() {
    let cfg = config("system1.json");
    let ctx = context(&cfg);
    let mut rng = rng::stream(0, streams::DRIFT);
    let mut parts = Vec::new();
    let mut pass = true;
    for eps in [0.0, ctx.m_q / 2.0] {
        let theta = if eps == 0.0 { cfg.plant.theta_true() } else { diagnostics::perturbed_estimate(&cfg.plant, eps, &mut rng) };
        let r = diagnostics::verify_drift(&ctx, eps, &theta, 50, 10_000, &mut rng).unwrap();
        let inside = r.points.iter().filter(|p| p.inside).count();
        pass &= r.violations == 0 && r.points.len() == 50 && inside > 0 && inside < 50;
        parts.push(format!("eps = {eps:.3e}: {}/{} violations ({inside} inside)", r.violations, r.points.len()));
    }
    report(5, "one-step drift", pass, parts.join("; "));
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

#[test]
fn criterion_06_least_squares() {
    let mut quiet = config("system1.json").plant;
    quiet.disturbance = NoiseSpec::zero(2);
    let theta = quiet.theta_true();
    let mut cl = ClosedLoop::new(&quiet, ControlMode::Adaptive, false).unwrap();
    cl.run(50, &mut rng::stream(0, 0)).unwrap();
    let noiseless = (&cl.ols.solve().unwrap() - &theta).spectral_norm();

    let noisy = config("system1.json").plant;
    let (mut early, mut late) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let mut cl = ClosedLoop::new(&noisy, ControlMode::Adaptive, false).unwrap();
        let mut rng = rng::stream(seed, 0);
        let mut errs = [f64::NAN; 2];
        while cl.time() < 4000 {
            cl.advance_block(&mut rng, |t, ols| {
                let slot = match t {
                    250 => 0,
                    4000 => 1,
                    _ => return,
                };
                errs[slot] = (&ols.solve().unwrap() - &theta).spectral_norm();
            })
            .unwrap();
        }
        early.push(errs[0]);
        late.push(errs[1]);
    }
    let (m_early, m_late) = (median(early), median(late));
    report(
        6,
        "least squares",
        noiseless <= 1e-8 && m_late < m_early,
        format!("noiseless error {noiseless:.2e}; median error T=250 {m_early:.4}, T=4000 {m_late:.4}"),
    );
}

#[test]
fn criterion_07_estimation_coverage() {
    let cfg = config("system1.json");
    let ctx = context(&cfg);
    let t0 = ctx.burn_in_t0(0.2, &cfg.plant.x0).unwrap() as usize;
    let r = diagnostics::coverage_estimation_bound(&ctx, 0.2, 50, t0 + 2000, 0, 0).unwrap();
    report(
        7,
        "estimation error coverage",
        r.fraction() >= 0.8,
        format!("{}: {}/{} trials, min margin {:.3}", r.label, r.successes, r.trials, r.min_margin()),
    );
}

#[test]
fn criterion_08_moment_envelope_coverage() {
    let sys1 = context(&config("system1.json"));
    let cfg = config("margin.json");
    let ctx = context(&cfg);
    let eps = ctx.default_epsilon().unwrap();
    let tau0 = ctx.moment_envelope(eps, 0.2, &cfg.plant.x0).unwrap().tau0;
    let r = diagnostics::coverage_moment_envelope(&ctx, eps, 0.2, 50, &[tau0, 2 * tau0, 4 * tau0], 0, 0).unwrap();
    let detail = r.per_tau.iter().map(|c| format!("{} {}/{}", c.label, c.successes, c.trials)).collect::<Vec<_>>().join(", ");
    report(
        8,
        "moment envelope coverage",
        r.max_exceedance() <= 0.2 && r.taus.len() == 3,
        format!("default plant admissible: {}; synthetic config eps = {eps:.4}, {detail}", sys1.admissible_interval().is_some()),
    );
}

#[test]
fn criterion_09_constant_relations() {
    let mut checked = 0;
    let mut violations = Vec::new();
    let deltas = [0.3, 0.2, 0.1, 0.01, 0.001];

    let cfg = config("margin.json");
    let ctx = context(&cfg);
    let eps = ctx.default_epsilon().unwrap();
    let l = ctx.stabilization_constants(eps).unwrap();
    let t1 = ctx.explicit_constants(&[0.0], Some(eps)).unwrap();
    let rates = ctx.drift_rates(eps).unwrap();
    let n3 = rates.beta / (1.0 - rates.lambda);
    if (t1.n3 - n3).abs() > 1e-12 * n3 {
        violations.push(format!("N3 {} vs {n3}", t1.n3));
    }
    for &delta in &deltas {
        for x0 in [0.0, 1.0, 5.0, 20.0] {
            let x0 = [x0];
            checked += 1;
            let tau0 = ctx.stabilization_time(eps, delta, &x0).unwrap() as f64;
            let stabilization = l.l2(&x0) + l.l1 * (1.0 / delta).ln();
            if tau0 > stabilization {
                violations.push(format!("tau0 {tau0} > {stabilization} at delta {delta}, x0 {x0:?}"));
            }
            let t1 = ctx.explicit_constants(&x0, Some(eps)).unwrap();
            let ln_k = ctx.transient_log_constant(eps, delta / 2.0, &x0).unwrap();
            let rhs = t1.log_n2_x0 + t1.n1 * (2.0 / delta).ln();
            if ln_k > rhs {
                violations.push(format!("ln K {ln_k} > {rhs} at delta {delta}, x0 {x0:?}"));
            }
        }
    }
    report(9, "constant relations", violations.is_empty() && checked == 20, format!("{checked} grid points, N3 = {n3:.4}, {} violations {violations:?}", violations.len()));
}

struct Dirs(tempfile::TempDir);

impl Dirs {
    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_10_determinism() {
    let cfgs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let sys1 = cfgs.join("system1.json").display().to_string();
    let margin = cfgs.join("margin.json").display().to_string();
    let tmp = Dirs(tempfile::tempdir().unwrap());
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("simulate", vec!["--config".into(), sys1.clone(), "--trials".into(), "12".into(), "--horizon".into(), "300".into()]),
        ("figure1", vec!["--trials".into(), "12".into(), "--horizon".into(), "300".into()]),
        ("figure2", vec!["--trials".into(), "12".into(), "--horizon".into(), "300".into()]),
        ("bounds", vec!["--config".into(), sys1.clone(), "--set".into(), "bounds.mgf_samples=20000".into()]),
        (
            "check",
            vec![
                "--config".into(),
                sys1.clone(),
                "--set".into(),
                "bounds.mgf_samples=20000".into(),
                "--set".into(),
                "diagnostics.matrix_samples=500".into(),
                "--set".into(),
                "diagnostics.control_samples=2000".into(),
                "--set".into(),
                "diagnostics.drift_inner_samples=200".into(),
            ],
        ),
        (
            "diagnose",
            vec!["--config".into(), margin, "--set".into(), "bounds.mgf_samples=20000".into(), "--set".into(), "diagnostics.trials=6".into()],
        ),
    ];
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for (verb, flags) in &commands {
        let mut outputs = Vec::new();
        for (run, workers) in [(0, "1"), (1, "3"), (2, "3")] {
            let out = tmp.path(&format!("{verb}_{run}"));
            let mut args = vec!["satadapt".to_string(), verb.to_string(), "--out".into(), out.display().to_string(), "--workers".into(), workers.into()];
            args.extend(flags.iter().cloned());
            assert_eq!(satadapt::cli::run(&args), 0, "{verb} failed");
            outputs.push(files(&out));
        }
        compared += outputs[0].len();
        if outputs[0].is_empty() || outputs.iter().any(|o| o != &outputs[0]) {
            mismatched.push(*verb);
        }
    }
    report(10, "determinism", mismatched.is_empty(), format!("{} commands, {compared} files byte-identical across 3 runs and 2 worker counts; mismatched {mismatched:?}", commands.len()));
}
