//! Batch trials, percentile series and the reference figure suites.
//!
//! Trial `i` of an experiment draws from `rng::stream(master_seed, i)`, so a
//! single trial can be replayed in isolation and results do not depend on how
//! trials are scheduled. Worker pools only change wall-clock time.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::BmsbParams;
use crate::controller::{ClosedLoop, ControlMode};
use crate::error::{Error, Result};
use crate::linalg::{vec, Matrix};
use crate::rng::{self, streams, Rng};
use crate::system::{standard_normal, NoiseSpec, PlantConfig, Trajectory};

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_HORIZON: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    pub trials: usize,
    /// Raw time steps.
    pub horizon: usize,
    pub master_seed: u64,
    pub mode: ControlMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bmsb: Option<BmsbParams>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.horizon < self.plant.kappa {
            return Err(Error::Config(format!("horizon must be at least kappa = {}", self.plant.kappa)));
        }
        if let Some(b) = &self.bmsb {
            b.validate(self.plant.n() + self.plant.m())?;
        }
        Ok(())
    }
}

/// Per-time median and 90th percentile of `|X_t|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentileSeries {
    pub times: Vec<usize>,
    pub median: Vec<f64>,
    pub p90: Vec<f64>,
}

impl PercentileSeries {
    pub fn at(&self, t: usize) -> Option<(f64, f64)> {
        let i = self.times.binary_search(&t).ok()?;
        Some((self.median[i], self.p90[i]))
    }

    pub fn median_at(&self, t: usize) -> f64 {
        self.at(t).map_or(f64::NAN, |(m, _)| m)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub series: PercentileSeries,
    /// Trajectories truncated to the horizon, in trial order.
    pub trials: Vec<Trajectory>,
    pub max_control_norm: f64,
    /// Steps with `|U_t| > U_max`, over all trials.
    pub control_violations: usize,
}

/// Nearest-rank percentile: the sorted value at 1-based rank `ceil(q N)`.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile of an empty sample".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("q must lie in (0, 1), got {q}")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v[nearest_rank(v.len(), q) - 1])
}

fn nearest_rank(n: usize, q: f64) -> usize {
    // The offset absorbs representation error in products such as 0.9 * 100.
    (((q * n as f64) - 1e-9).ceil() as usize).clamp(1, n)
}

/// Runs `f(0), .., f(n-1)` on `workers` threads (0 picks the rayon default) and
/// returns the results in index order.
pub fn par_map<T: Send>(workers: usize, n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

/// One trial of `cfg`, replayable from its index alone.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Trajectory> {
    let mut rng = rng::stream(cfg.master_seed, trial as u64);
    simulate(&cfg.plant, cfg.mode, cfg.horizon, &mut rng)
}

/// Closed-loop run of exactly `horizon` raw steps.
pub fn simulate(plant: &PlantConfig, mode: ControlMode, horizon: usize, rng: &mut Rng) -> Result<Trajectory> {
    let mut cl = ClosedLoop::new(plant, mode, true)?;
    cl.run(horizon.div_ceil(plant.kappa), rng)?;
    let mut traj = cl.into_trajectory().expect("recording enabled");
    traj.states.truncate(horizon + 1);
    traj.controls.truncate(horizon);
    traj.excitations.truncate(horizon);
    traj.disturbances.truncate(horizon);
    traj.estimates.truncate(horizon / plant.kappa + 1);
    Ok(traj)
}

pub fn percentile_series(norms: &[Vec<f64>]) -> Result<PercentileSeries> {
    let len = norms.first().map(Vec::len).ok_or_else(|| Error::InvalidArgument("no trials".into()))?;
    let mut series = PercentileSeries { times: (0..len).collect(), median: Vec::with_capacity(len), p90: Vec::with_capacity(len) };
    let mut column = Vec::with_capacity(norms.len());
    for t in 0..len {
        column.clear();
        column.extend(norms.iter().map(|n| n[t]));
        column.sort_by(f64::total_cmp);
        series.median.push(column[nearest_rank(column.len(), 0.5) - 1]);
        series.p90.push(column[nearest_rank(column.len(), 0.9) - 1]);
    }
    Ok(series)
}

pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    cfg.validate()?;
    let trials = par_map(workers, cfg.trials, |i| run_trial(cfg, i))?;
    let norms: Vec<Vec<f64>> = trials.iter().map(Trajectory::state_norms).collect();
    let series = percentile_series(&norms)?;
    let u_max = cfg.plant.u_max;
    let control_violations = trials.iter().flat_map(|t| &t.controls).filter(|u| vec::norm(u) > u_max).count();
    let max_control_norm = trials.iter().map(Trajectory::max_control_norm).fold(0.0, f64::max);
    Ok(ExperimentResult { series, trials, max_control_norm, control_violations })
}

/// The three two-state plants of the reference study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferencePlant {
    /// Rotation by pi/4, `B = (0, 1)`.
    Rotation,
    /// Rotation by -pi/2, `B = (0.3, -0.5)`.
    QuarterTurn,
    /// Rotation by pi/4 scaled by 0.8, `B = (0.5, 0)`.
    DampedRotation,
}

impl ReferencePlant {
    pub const ALL: [ReferencePlant; 3] = [Self::Rotation, Self::QuarterTurn, Self::DampedRotation];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rotation => "system1",
            Self::QuarterTurn => "system2",
            Self::DampedRotation => "system3",
        }
    }

    pub fn matrices(self) -> (Matrix, Matrix) {
        let rot = |phi: f64, s: f64| {
            let (sn, cs) = phi.sin_cos();
            Matrix::from_rows(&[&[s * cs, s * sn], &[-s * sn, s * cs]])
        };
        let q = std::f64::consts::FRAC_PI_4;
        match self {
            Self::Rotation => (rot(q, 1.0), Matrix::column(&[0.0, 1.0])),
            Self::QuarterTurn => (rot(-2.0 * q, 1.0), Matrix::column(&[0.3, -0.5])),
            Self::DampedRotation => (rot(q, 0.8), Matrix::column(&[0.5, 0.0])),
        }
    }

    /// `U_max = 1`, `C = 0.4`, `kappa = 2`, scalar uniform excitation, `Sigma_W = var I`.
    pub fn plant(self, disturbance_var: f64, x0: Vec<f64>, theta0: Matrix) -> PlantConfig {
        let (a, b) = self.matrices();
        PlantConfig {
            a,
            b,
            kappa: 2,
            disturbance: NoiseSpec::isotropic(2, disturbance_var),
            excitation: NoiseSpec::uniform_ball(1, 0.4),
            u_max: 1.0,
            c: 0.4,
            x0,
            theta0,
        }
    }
}

/// Initial estimate with standard normal entries, drawn from the reserved stream of `seed`.
pub fn random_theta0(n: usize, m: usize, seed: u64) -> Matrix {
    let mut rng = rng::stream(seed, streams::INITIAL_ESTIMATE);
    loop {
        let m0 = Matrix::new(n, n + m, standard_normal(n * (n + m), &mut rng)).expect("shape");
        if m0.columns(n, m).max_abs() > 0.0 {
            return m0;
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedSeries {
    pub name: String,
    pub series: PercentileSeries,
    pub max_control_norm: f64,
    pub control_violations: usize,
}

impl NamedSeries {
    fn from_result(name: impl Into<String>, r: &ExperimentResult) -> Self {
        Self { name: name.into(), series: r.series.clone(), max_control_norm: r.max_control_norm, control_violations: r.control_violations }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seed: u64,
    pub trials: usize,
    pub horizon: usize,
    #[serde(skip)]
    pub workers: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 0, trials: DEFAULT_TRIALS, horizon: DEFAULT_HORIZON, workers: 0 }
    }
}

fn suite_config(plant: PlantConfig, mode: ControlMode, opts: &SuiteOptions) -> ExperimentConfig {
    ExperimentConfig { plant, trials: opts.trials, horizon: opts.horizon, master_seed: opts.seed, mode, bmsb: None }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Figure1Data {
    pub controlled: Vec<NamedSeries>,
    pub uncontrolled: NamedSeries,
}

/// Adaptive runs on the three reference plants plus the first one left uncontrolled, `Sigma_W = I`, `x0 = 0`.
pub fn figure1_suite(opts: &SuiteOptions) -> Result<Figure1Data> {
    let mut controlled = Vec::new();
    for p in ReferencePlant::ALL {
        let plant = p.plant(1.0, vec![0.0, 0.0], random_theta0(2, 1, opts.seed));
        let r = run_experiment(&suite_config(plant, ControlMode::Adaptive, opts), opts.workers)?;
        controlled.push(NamedSeries::from_result(p.name(), &r));
    }
    let plant = ReferencePlant::Rotation.plant(1.0, vec![0.0, 0.0], random_theta0(2, 1, opts.seed));
    let r = run_experiment(&suite_config(plant, ControlMode::Uncontrolled, opts), opts.workers)?;
    Ok(Figure1Data { controlled, uncontrolled: NamedSeries::from_result("system1_uncontrolled", &r) })
}

pub fn default_x0_set() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![5.0, 5.0], vec![20.0, 0.0], vec![0.0, -50.0]]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Figure2Data {
    pub x0: Vec<Vec<f64>>,
    pub runs: Vec<NamedSeries>,
}

/// Adaptive runs on the first reference plant with `Sigma_W = 0.1 I` from each initial state.
pub fn figure2_suite(opts: &SuiteOptions, x0_set: &[Vec<f64>]) -> Result<Figure2Data> {
    let mut runs = Vec::new();
    for x0 in x0_set {
        let plant = ReferencePlant::Rotation.plant(0.1, x0.clone(), random_theta0(2, 1, opts.seed));
        let r = run_experiment(&suite_config(plant, ControlMode::Adaptive, opts), opts.workers)?;
        let name = format!("x0_{}", x0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("_"));
        runs.push(NamedSeries::from_result(name, &r));
    }
    Ok(Figure2Data { x0: x0_set.to_vec(), runs })
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

/// Columns `t,x_1..x_n,u_1..u_m,v_1..v_m,norm_x`; input cells are empty on the final row.
pub fn write_trial_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let n = traj.states[0].len();
    let m = traj.controls.first().map_or(0, Vec::len);
    let mut f = create(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|i| format!("u_{i}")));
    header.extend((1..=m).map(|i| format!("v_{i}")));
    header.push("norm_x".into());
    writeln!(f, "{}", header.join(","))?;
    for (t, x) in traj.states.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(x.iter().map(f64::to_string));
        match (traj.controls.get(t), traj.excitations.get(t)) {
            (Some(u), Some(v)) => {
                row.extend(u.iter().map(f64::to_string));
                row.extend(v.iter().map(f64::to_string));
            }
            _ => row.extend(std::iter::repeat_n(String::new(), 2 * m)),
        }
        row.push(vec::norm(x).to_string());
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Columns `t,median,p90`.
pub fn write_series_csv(path: &Path, series: &PercentileSeries) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "t,median,p90")?;
    for ((t, m), p) in series.times.iter().zip(&series.median).zip(&series.p90) {
        writeln!(f, "{t},{m},{p}")?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest<C> {
    pub command: String,
    pub version: String,
    pub master_seed: u64,
    pub config: C,
}

impl<C> Manifest<C> {
    pub fn new(command: &str, master_seed: u64, config: C) -> Self {
        Self { command: command.into(), version: env!("CARGO_PKG_VERSION").into(), master_seed, config }
    }
}

/// Writes `series.csv`, `trials/trial_XXXX.csv` and `manifest.json` under `dir`.
pub fn write_experiment(dir: &Path, cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<()> {
    write_series_csv(&dir.join("series.csv"), &result.series)?;
    for (i, traj) in result.trials.iter().enumerate() {
        write_trial_csv(&dir.join("trials").join(format!("trial_{i:04}.csv")), traj)?;
    }
    write_json(&dir.join("manifest.json"), &Manifest::new("simulate", cfg.master_seed, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[5.0, 1.0, 3.0, 2.0, 4.0], 0.5).unwrap(), 3.0);
        let hundred: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(percentile(&hundred, 0.9).unwrap(), 90.0);
        assert_eq!(percentile(&[7.5], 0.1).unwrap(), 7.5);
        assert_eq!(percentile(&[7.5], 0.99).unwrap(), 7.5);
        assert!(percentile(&[], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn percentile_permutation_invariant_and_monotone(mut v in proptest::collection::vec(-1e3f64..1e3, 1..60), q1 in 0.01f64..0.99, q2 in 0.01f64..0.99) {
            let a = percentile(&v, q1).unwrap();
            v.reverse();
            prop_assert_eq!(a, percentile(&v, q1).unwrap());
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            prop_assert!(percentile(&v, lo).unwrap() <= percentile(&v, hi).unwrap());
        }
    }

    fn small_cfg(mode: ControlMode, trials: usize) -> ExperimentConfig {
        let plant = ReferencePlant::Rotation.plant(1.0, vec![0.0, 0.0], random_theta0(2, 1, 3));
        ExperimentConfig { plant, trials, horizon: 60, master_seed: 11, mode, bmsb: None }
    }

    #[test]
    fn single_trial_series_is_its_norms() {
        let cfg = small_cfg(ControlMode::Adaptive, 1);
        let r = run_experiment(&cfg, 1).unwrap();
        let norms = r.trials[0].state_norms();
        assert_eq!(r.series.median, norms);
        assert_eq!(r.series.p90, norms);
        assert_eq!(r.series.times.len(), 61);
    }

    #[test]
    fn trials_replay_in_isolation_and_ignore_worker_count() {
        let cfg = small_cfg(ControlMode::Adaptive, 6);
        let a = run_experiment(&cfg, 1).unwrap();
        let b = run_experiment(&cfg, 3).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.trials, b.trials);
        assert_eq!(run_trial(&cfg, 4).unwrap(), a.trials[4]);
        assert!(a.series.p90.iter().zip(&a.series.median).all(|(p, m)| p >= m));
        assert_eq!(a.control_violations, 0);
    }

    #[test]
    fn odd_horizon_is_truncated() {
        let mut cfg = small_cfg(ControlMode::Adaptive, 1);
        cfg.horizon = 7;
        let t = run_trial(&cfg, 0).unwrap();
        assert_eq!(t.states.len(), 8);
        assert_eq!(t.controls.len(), 7);
    }

    #[test]
    fn uncontrolled_random_walk_grows() {
        let mut cfg = small_cfg(ControlMode::Uncontrolled, 200);
        cfg.horizon = 400;
        let r = run_experiment(&cfg, 0).unwrap();
        assert!(r.series.median_at(400) > 3.0 * r.series.median_at(40));
        assert!(r.trials.iter().flat_map(|t| &t.controls).all(|u| u.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn reference_plants_are_reachable() {
        for p in ReferencePlant::ALL {
            let (a, b) = p.matrices();
            assert!(crate::system::is_reachable(&a, &b, 2).unwrap().0, "{}", p.name());
        }
        let (a2, _) = ReferencePlant::QuarterTurn.matrices();
        assert!((&a2 - &Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]])).max_abs() < 1e-15);
    }

    #[test]
    fn csv_writers_roundtrip_shape() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg(ControlMode::Adaptive, 2);
        let r = run_experiment(&cfg, 1).unwrap();
        write_experiment(dir.path(), &cfg, &r).unwrap();
        let series = fs::read_to_string(dir.path().join("series.csv")).unwrap();
        assert_eq!(series.lines().count(), 62);
        let trial = fs::read_to_string(dir.path().join("trials/trial_0001.csv")).unwrap();
        let mut lines = trial.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1,x_2,u_1,v_1,norm_x");
        assert_eq!(lines.next().unwrap().split(',').count(), 6);
        assert!(trial.lines().last().unwrap().starts_with("60,"));
        let manifest: Manifest<ExperimentConfig> = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest.config, cfg);
    }
}
