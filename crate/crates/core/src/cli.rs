//! Command-line front end.
//!
//! Exit codes: 0 when the command ran and found nothing wrong, 1 when it ran
//! and found invariant violations, 2 for usage, configuration and I/O errors.
//! Worker counts never reach any output file, so outputs are byte-identical
//! across `--workers` values.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundContext, DriftRates, StabilizationConstants, MarginCheck, MgfEstimate, MomentEnvelope, ExplicitConstants};
use crate::config::Config;
use crate::controller::ControlMode;
use crate::diagnostics::{self, BmsbProxy, CoverageReport, DriftReport, InequalityReport, MomentCoverage};
use crate::error::{Error, Result};
use crate::experiments::{self, Manifest, NamedSeries, SuiteOptions};
use crate::rng::{self, streams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "satadapt", version, about = "Saturated adaptive control: simulation, bounds and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo closed-loop runs on a configured plant.
    Simulate(RunArgs),
    /// Median and 90th-percentile state norms on the three reference plants.
    Figure1(SuiteArgs),
    /// First reference plant from several initial states.
    Figure2(Figure2Args),
    /// Evaluate the closed-form constants and envelopes.
    Bounds(RunArgs),
    /// Certify the perturbation inequalities and the one-step drift.
    Check(CheckArgs),
    /// Coverage of the estimation and stability envelopes, plus the small-ball proxy.
    Diagnose(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    mode: Option<ControlMode>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Override a config entry, e.g. `--set plant.u_max=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Check the drift against rates shrunk far below their true values.
    #[arg(long)]
    inject_fault: bool,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = experiments::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = experiments::DEFAULT_HORIZON)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args, Debug)]
struct Figure2Args {
    #[command(flatten)]
    suite: SuiteArgs,
    /// Initial state as comma-separated entries; repeatable.
    #[arg(long = "x0", value_name = "X1,X2")]
    x0: Vec<String>,
}

impl RunArgs {
    fn load(&self) -> Result<Config> {
        let mut overrides = self.set.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("experiment.seed={s}"));
        }
        if let Some(t) = self.trials {
            overrides.push(format!("experiment.trials={t}"));
        }
        if let Some(h) = self.horizon {
            overrides.push(format!("experiment.horizon={h}"));
        }
        if let Some(m) = self.mode {
            overrides.push(format!("experiment.mode={m}"));
        }
        Config::load(&self.config, &overrides)
    }

    fn out_dir(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

impl SuiteArgs {
    fn options(&self) -> SuiteOptions {
        SuiteOptions { seed: self.seed, trials: self.trials, horizon: self.horizon, workers: self.workers }
    }
}

/// Outcome of a command that ran to completion.
pub struct Outcome {
    pub violations: Vec<String>,
}

impl Outcome {
    fn clean() -> Self {
        Self { violations: Vec::new() }
    }
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(o) if o.violations.is_empty() => EXIT_OK,
        Ok(o) => {
            for v in &o.violations {
                eprintln!("violation: {v}");
            }
            EXIT_VIOLATION
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Simulate(a) => simulate(&a),
        Command::Figure1(a) => figure1(&a),
        Command::Figure2(a) => figure2(&a),
        Command::Bounds(a) => bounds(&a),
        Command::Check(a) => check(&a),
        Command::Diagnose(a) => diagnose(&a),
    }
}

fn simulate(args: &RunArgs) -> Result<Outcome> {
    let cfg = args.load()?;
    let exp = cfg.experiment_config();
    let result = experiments::run_experiment(&exp, args.workers)?;
    let out = args.out_dir("out/simulate");
    experiments::write_experiment(&out, &exp, &result)?;
    let mut o = Outcome::clean();
    if result.control_violations > 0 {
        o.violations.push(format!("{} control inputs exceed u_max = {}", result.control_violations, exp.plant.u_max));
    }
    println!("wrote {} trials to {}", exp.trials, out.display());
    Ok(o)
}

/// Per-series summary written next to the figure CSVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub name: String,
    pub final_median: f64,
    pub final_p90: f64,
    pub max_control_norm: f64,
    pub control_violations: usize,
}

fn write_suite(dir: &Path, command: &str, opts: &SuiteOptions, series: &[&NamedSeries]) -> Result<Outcome> {
    let mut o = Outcome::clean();
    let mut summary = Vec::new();
    for s in series {
        experiments::write_series_csv(&dir.join(format!("{}.csv", s.name)), &s.series)?;
        let (final_median, final_p90) = (*s.series.median.last().unwrap_or(&0.0), *s.series.p90.last().unwrap_or(&0.0));
        summary.push(SeriesSummary {
            name: s.name.clone(),
            final_median,
            final_p90,
            max_control_norm: s.max_control_norm,
            control_violations: s.control_violations,
        });
        if s.control_violations > 0 {
            o.violations.push(format!("{}: {} control inputs exceed u_max", s.name, s.control_violations));
        }
    }
    experiments::write_json(&dir.join("summary.json"), &summary)?;
    experiments::write_json(&dir.join("manifest.json"), &Manifest::new(command, opts.seed, opts))?;
    println!("wrote {} series to {}", series.len(), dir.display());
    Ok(o)
}

fn figure1(args: &SuiteArgs) -> Result<Outcome> {
    let opts = args.options();
    let data = experiments::figure1_suite(&opts)?;
    let mut all: Vec<&NamedSeries> = data.controlled.iter().collect();
    all.push(&data.uncontrolled);
    write_suite(&args.out, "figure1", &opts, &all)
}

fn parse_x0(s: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad x0 entry {t:?}"))))
        .collect::<Result<_>>()?;
    if v.len() != 2 {
        return Err(Error::Config(format!("x0 {s:?} must have two entries")));
    }
    Ok(v)
}

fn figure2(args: &Figure2Args) -> Result<Outcome> {
    let opts = args.suite.options();
    let x0_set = if args.x0.is_empty() { experiments::default_x0_set() } else { args.x0.iter().map(|s| parse_x0(s)).collect::<Result<_>>()? };
    let data = experiments::figure2_suite(&opts, &x0_set)?;
    let all: Vec<&NamedSeries> = data.runs.iter().collect();
    write_suite(&args.suite.out, "figure2", &opts, &all)
}

fn context(cfg: &Config) -> Result<BoundContext> {
    BoundContext::build(&cfg.plant, cfg.require_bmsb()?.clone(), cfg.mgf_options())
}

/// One point of the stability envelopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub tau: u64,
    /// Bound on `|Xbar_tau|` with the transient constant resolved.
    pub moment: f64,
    /// The x0/delta-explicit form.
    pub explicit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub delta: f64,
    /// Burn-in time after which the estimation error bound applies.
    pub burn_in_t0: u64,
    pub estimation_error_at_t0: f64,
    /// Radius used for the stabilization time.
    pub stabilization_epsilon: f64,
    /// First sub-sampled index after which the estimate stays in the radius.
    pub stabilization_time: u64,
    /// Closed-form upper bound on the stabilization time.
    pub stabilization_time_bound: f64,
    pub moment: Option<MomentEnvelope>,
    pub envelope: Vec<EnvelopePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub kappa: usize,
    pub norm_r: f64,
    pub norm_r_pinv: f64,
    pub sigma_min_r: f64,
    pub saturation_radius: f64,
    pub q1: f64,
    pub m_q: f64,
    pub big_m_q: f64,
    pub m_v_bar: MgfEstimate,
    pub m_w_bar: MgfEstimate,
    pub margin: MarginCheck,
    /// Whether some radius gives a contracting drift.
    pub admissible: bool,
    pub admissible_interval: Option<(f64, f64)>,
    pub drift_at_zero: DriftRates,
    pub drift: Option<DriftRates>,
    pub stabilization: StabilizationConstants,
    pub explicit: Option<ExplicitConstants>,
    pub rows: Vec<DeltaRow>,
}

pub fn bounds_report(cfg: &Config, ctx: &BoundContext) -> Result<BoundsReport> {
    let x0 = &cfg.plant.x0;
    let admissible_interval = ctx.admissible_interval();
    let epsilon = match (cfg.bounds.epsilon, admissible_interval) {
        (Some(e), _) => Some(e),
        (None, Some(_)) => Some(ctx.default_epsilon()?),
        (None, None) => None,
    };
    let drift = epsilon.map(|e| ctx.drift_rates(e)).transpose()?;
    let stab_eps = epsilon.unwrap_or(ctx.m_q / 2.0);
    let explicit = epsilon.filter(|_| admissible_interval.is_some()).map(|e| ctx.explicit_constants(x0, Some(e))).transpose()?;
    let stabilization = ctx.stabilization_constants(stab_eps)?;
    let mut rows = Vec::new();
    for &delta in &cfg.bounds.deltas {
        let t0 = ctx.burn_in_t0(delta, x0)?;
        let moment = match (epsilon, admissible_interval) {
            (Some(e), Some(_)) => Some(ctx.moment_envelope(e, delta, x0)?),
            _ => None,
        };
        let envelope = match (&moment, &explicit) {
            (Some(m), Some(t1)) => cfg.bounds.taus.iter().map(|&tau| EnvelopePoint { tau, moment: m.at(tau), explicit: t1.envelope(delta, tau) }).collect(),
            _ => Vec::new(),
        };
        rows.push(DeltaRow {
            delta,
            burn_in_t0: t0,
            estimation_error_at_t0: ctx.estimation_error(t0, delta, x0)?,
            stabilization_epsilon: stab_eps,
            stabilization_time: ctx.stabilization_time(stab_eps, delta, x0)?,
            stabilization_time_bound: stabilization.tau_bound(delta, x0),
            moment,
            envelope,
        });
    }
    Ok(BoundsReport {
        kappa: ctx.kappa(),
        norm_r: ctx.sub.norm_r,
        norm_r_pinv: ctx.sub.norm_r_pinv,
        sigma_min_r: ctx.sub.sigma_min_r,
        saturation_radius: ctx.sat_radius(),
        q1: ctx.q1,
        m_q: ctx.m_q,
        big_m_q: ctx.big_m_q,
        m_v_bar: ctx.m_v_bar,
        m_w_bar: ctx.m_w_bar,
        margin: ctx.check_margin(),
        admissible: admissible_interval.is_some(),
        admissible_interval,
        drift_at_zero: ctx.drift_rates(0.0)?,
        drift,
        stabilization,
        explicit,
        rows,
    })
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, file: &str, value: &T) -> Result<()> {
    match out {
        Some(dir) => {
            let path = dir.join(file);
            experiments::write_json(&path, value)?;
            println!("wrote {}", path.display());
        }
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn bounds(args: &RunArgs) -> Result<Outcome> {
    let cfg = args.load()?;
    let ctx = context(&cfg)?;
    let report = bounds_report(&cfg, &ctx)?;
    emit_json(&args.out, "bounds.json", &report)?;
    Ok(Outcome::clean())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub inequalities: InequalityReport,
    pub drift: Vec<DriftReport>,
    pub fault_injected: bool,
    pub violations: Vec<String>,
}

/// Divides `lambda` and `beta` by `e^10`.
pub fn faulty_rates(r: DriftRates) -> DriftRates {
    let (ln_lambda, ln_beta) = (r.ln_lambda - 10.0, r.ln_beta - 10.0);
    DriftRates { lambda: ln_lambda.exp(), beta: ln_beta.exp(), ln_lambda, ln_beta, ..r }
}

pub fn check_report(cfg: &Config, ctx: &BoundContext, inject_fault: bool) -> Result<CheckReport> {
    let dg = &cfg.diagnostics;
    let seed = cfg.experiment.seed;
    let inequalities = diagnostics::certify_inequalities(&cfg.plant, dg.matrix_samples, dg.control_samples, &mut rng::stream(seed, streams::INEQUALITIES))?;
    let mut rng = rng::stream(seed, streams::DRIFT);
    let mut drift = Vec::new();
    for eps in [0.0, ctx.m_q / 2.0] {
        let theta = if eps == 0.0 { cfg.plant.theta_true() } else { diagnostics::perturbed_estimate(&cfg.plant, eps, &mut rng) };
        let report = if inject_fault {
            diagnostics::verify_drift_with_rates(ctx, faulty_rates(ctx.drift_rates(eps)?), &theta, dg.drift_states, dg.drift_inner_samples, &mut rng)?
        } else {
            diagnostics::verify_drift(ctx, eps, &theta, dg.drift_states, dg.drift_inner_samples, &mut rng)?
        };
        drift.push(report);
    }
    let mut violations = Vec::new();
    for c in inequalities.checks.iter().filter(|c| c.violations > 0) {
        violations.push(format!("{}: {} of {} samples violate the bound", c.name, c.violations, c.samples));
    }
    if inequalities.convexity.violations > 0 {
        violations.push(format!("convexity: {} of {} grid points", inequalities.convexity.violations, inequalities.convexity.points));
    }
    for r in drift.iter().filter(|r| r.violations > 0) {
        violations.push(format!("drift at eps = {}: {} of {} states exceed the bound", r.epsilon, r.violations, r.points.len()));
    }
    Ok(CheckReport { inequalities, drift, fault_injected: inject_fault, violations })
}

fn check(args: &CheckArgs) -> Result<Outcome> {
    let cfg = args.run.load()?;
    let ctx = context(&cfg)?;
    let report = check_report(&cfg, &ctx, args.inject_fault)?;
    emit_json(&args.run.out, "check.json", &report)?;
    Ok(Outcome { violations: report.violations })
}

/// A diagnostic that either ran or was skipped with a reason.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section<T> {
    Ran(T),
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyReport {
    /// Unconditional surrogate, not the conditional small-ball probability itself.
    pub proxy: BmsbProxy,
    pub declared_p: f64,
    pub below_declared: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub estimation: Section<CoverageReport>,
    pub stability: Section<MomentCoverage>,
    pub small_ball: ProxyReport,
    pub violations: Vec<String>,
}

pub fn diagnose_report(cfg: &Config, ctx: &BoundContext, workers: usize) -> Result<DiagnoseReport> {
    let dg = &cfg.diagnostics;
    let seed = cfg.experiment.seed;
    let x0 = &cfg.plant.x0;
    let mut violations = Vec::new();

    let horizon = match dg.horizon {
        Some(h) => h,
        None => ctx.burn_in_t0(dg.delta, x0)? as usize + 1000,
    };
    let estimation = match diagnostics::coverage_estimation_bound(ctx, dg.delta, dg.trials, horizon, seed, workers) {
        Ok(r) => {
            if !r.meets_target() {
                violations.push(format!("{}: coverage {} below {}", r.label, r.fraction(), r.target_probability));
            }
            Section::Ran(r)
        }
        Err(e @ (Error::InsufficientData(_) | Error::InvalidArgument(_))) => Section::Skipped(e.to_string()),
        Err(e) => return Err(e),
    };

    let eps = match dg.epsilon {
        Some(e) => Some(e),
        None => ctx.admissible_interval().map(|_| ctx.default_epsilon()).transpose()?,
    };
    let stability = match eps {
        None => Section::Skipped("no radius gives a contracting drift".into()),
        Some(e) => {
            let tau0 = ctx.moment_envelope(e, dg.delta, x0)?.tau0;
            let taus: Vec<u64> = dg.tau_multiples.iter().map(|k| k * tau0).collect();
            let r = diagnostics::coverage_moment_envelope(ctx, e, dg.delta, dg.trials, &taus, seed, workers)?;
            for c in r.per_tau.iter().filter(|c| !c.meets_target()) {
                violations.push(format!("{}: coverage {} below {}", c.label, c.fraction(), c.target_probability));
            }
            Section::Ran(r)
        }
    };

    let bmsb = cfg.require_bmsb()?;
    let exp = cfg.experiment_config();
    let n_traj = dg.bmsb_trials.max(1);
    let data = experiments::par_map(workers, n_traj, |i| Ok(diagnostics::covariates(&experiments::run_trial(&exp, i)?)))?;
    let proxy = diagnostics::bmsb_proxy(&data, bmsb.k, &bmsb.gamma_sb, dg.zeta_samples, &mut rng::stream(seed, streams::BMSB))?;
    let small_ball = ProxyReport { below_declared: proxy.p_hat < bmsb.p, declared_p: bmsb.p, proxy };
    Ok(DiagnoseReport { estimation, stability, small_ball, violations })
}

fn diagnose(args: &RunArgs) -> Result<Outcome> {
    let cfg = args.load()?;
    let ctx = context(&cfg)?;
    let report = diagnose_report(&cfg, &ctx, args.workers)?;
    if report.small_ball.below_declared {
        eprintln!("note: small-ball proxy {} is below the declared p = {}", report.small_ball.proxy.p_hat, report.small_ball.declared_p);
    }
    emit_json(&args.out, "diagnose.json", &report)?;
    Ok(Outcome { violations: report.violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["satadapt"]), EXIT_USAGE);
        assert_eq!(run(["satadapt", "simulate"]), EXIT_USAGE);
        assert_eq!(run(["satadapt", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["satadapt", "bounds", "--config", "/nonexistent/cfg.json"]), EXIT_USAGE);
        assert_eq!(run(["satadapt", "figure2", "--out", "/tmp/x", "--x0", "1,a"]), EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["satadapt", "--help"]), EXIT_OK);
    }

    #[test]
    fn x0_parsing() {
        assert_eq!(parse_x0("5, -2.5").unwrap(), vec![5.0, -2.5]);
        assert!(parse_x0("1").is_err());
        assert!(parse_x0("1,2,3").is_err());
    }

    #[test]
    fn faulty_rates_shrink() {
        let r = DriftRates { lambda: 0.5, beta: 2.0, epsilon: 0.1, ln_lambda: 0.5f64.ln(), ln_beta: 2f64.ln() };
        let f = faulty_rates(r);
        assert!((f.lambda / r.lambda - (-10f64).exp()).abs() < 1e-15);
        assert_eq!(f.epsilon, r.epsilon);
    }
}
