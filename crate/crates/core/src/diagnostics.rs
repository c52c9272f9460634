//! Monte Carlo checks of the probabilistic and perturbation claims.
//!
//! Coverage reports count how often a high-probability bound held over
//! independent closed-loop trials. The drift check estimates the one-block
//! conditional exponential moment at sampled states. The inequality suites test
//! the deterministic perturbation inequalities on random instances. A
//! violation in the deterministic suites or in the drift check means a bug;
//! coverage fractions are reported against their advertised level.

use serde::{Deserialize, Serialize};

use crate::bounds::perturbation::{q10, q9, PairConstants};
use crate::bounds::{BoundContext, DriftRates};
use crate::controller::{block_control, deadbeat_gain, sat, ClosedLoop, ControlMode, ControllerState};
use crate::error::{Error, Result};
use crate::estimator::split_theta;
use crate::experiments::par_map;
use crate::linalg::{vec, Matrix};
use crate::rng::{self, Rng};
use crate::system::{plant_step, standard_normal, PlantConfig, Trajectory};
use rand::Rng as _;

const Z95: f64 = 1.959_963_984_540_054;

/// Relative slack allowed for rounding in the deterministic inequality suites.
const INEQ_RTOL: f64 = 1e-10;
const INEQ_ATOL: f64 = 1e-12;

fn exceeds(lhs: f64, rhs: f64) -> bool {
    lhs > rhs * (1.0 + INEQ_RTOL) + INEQ_ATOL
}

/// Comparison in the log domain; the slack only absorbs rounding of exact deadbeat steps.
fn exceeds_log(lhs: f64, rhs: f64) -> bool {
    lhs > rhs + INEQ_ATOL * rhs.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub label: String,
    pub trials: usize,
    pub successes: usize,
    pub target_probability: f64,
    /// Worst `bound - observed` over the checked indices of each trial.
    pub per_trial_margin: Vec<f64>,
}

impl CoverageReport {
    fn from_margins(label: impl Into<String>, target_probability: f64, per_trial_margin: Vec<f64>) -> Self {
        let successes = per_trial_margin.iter().filter(|&&m| m >= 0.0).count();
        Self { label: label.into(), trials: per_trial_margin.len(), successes, target_probability, per_trial_margin }
    }

    pub fn fraction(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.successes as f64 / self.trials as f64
    }

    pub fn meets_target(&self) -> bool {
        self.fraction() >= self.target_probability
    }

    pub fn min_margin(&self) -> f64 {
        self.per_trial_margin.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `ln(mean(exp(y)))` with a jackknife standard error.
pub fn log_mean_exp_jackknife(ys: &[f64]) -> Result<(f64, f64)> {
    let n = ys.len();
    if n < 2 {
        return Err(Error::MonteCarlo("jackknife needs at least two draws".into()));
    }
    let ymax = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !ymax.is_finite() {
        return Err(Error::MonteCarlo("non-finite draw; increase samples or reduce the state scale".into()));
    }
    let e: Vec<f64> = ys.iter().map(|y| (y - ymax).exp()).collect();
    let s: f64 = e.iter().sum();
    let nf = n as f64;
    let est = ymax + (s / nf).ln();
    // Leave-one-out estimates relative to the full one.
    let shift = (nf / (nf - 1.0)).ln();
    let loo: Vec<f64> = e.iter().map(|ei| shift + (-ei / s).ln_1p()).collect();
    let mean = loo.iter().sum::<f64>() / nf;
    let var = loo.iter().map(|d| (d - mean).powi(2)).sum::<f64>() * (nf - 1.0) / nf;
    let se = var.sqrt();
    if !(est.is_finite() && se.is_finite()) {
        return Err(Error::MonteCarlo("moment estimate is not finite; increase samples".into()));
    }
    Ok((est, se))
}

/// A matrix at spectral distance exactly `radius` from `m`.
pub fn on_sphere(m: &Matrix, radius: f64, rng: &mut Rng) -> Matrix {
    let (r, c) = m.shape();
    loop {
        let e = Matrix::new(r, c, standard_normal(r * c, rng)).expect("shape");
        let nrm = e.spectral_norm();
        if nrm > 1e-12 {
            return m + &e.scale(radius / nrm);
        }
    }
}

/// A matrix within spectral distance `radius` of `m`; a quarter of draws land on the boundary.
pub fn in_ball(m: &Matrix, radius: f64, rng: &mut Rng) -> Matrix {
    let s = if rng.random::<f64>() < 0.25 { 1.0 } else { rng.random::<f64>() };
    on_sphere(m, radius * s, rng)
}

/// `[A + E_A, B + E_B]` with `|E_A| = |E_B| = eps`.
pub fn perturbed_estimate(plant: &PlantConfig, eps: f64, rng: &mut Rng) -> Matrix {
    let a = on_sphere(&plant.a, eps, rng);
    let b = on_sphere(&plant.b, eps, rng);
    Matrix::hstack(&[a, b]).expect("shapes")
}

fn unit(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v = standard_normal(dim, rng);
        let n = vec::norm(&v);
        if n > 1e-12 {
            return vec::scale(&v, 1.0 / n);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftPoint {
    pub z: Vec<f64>,
    pub inside: bool,
    pub log_estimate: f64,
    pub ci_halfwidth: f64,
    pub log_bound: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub epsilon: f64,
    pub rates: DriftRates,
    pub inner_samples: usize,
    pub points: Vec<DriftPoint>,
    pub violations: usize,
}

impl DriftReport {
    pub fn violation_fraction(&self) -> f64 {
        self.violations as f64 / self.points.len().max(1) as f64
    }
}

/// One-block conditional moment check of the drift inequality with `theta_bar` frozen.
pub fn verify_drift(ctx: &BoundContext, epsilon: f64, theta_perturbed: &Matrix, z_samples: usize, inner_samples: usize, rng: &mut Rng) -> Result<DriftReport> {
    let rates = ctx.drift_rates(epsilon)?;
    let n = ctx.n();
    let (a_bar, b_bar) = split_theta(theta_perturbed, n);
    let slack = epsilon * (1.0 + 1e-9) + 1e-15;
    if (&a_bar - &ctx.plant.a).spectral_norm() > slack || (&b_bar - &ctx.plant.b).spectral_norm() > slack {
        return Err(Error::InvalidArgument(format!("estimate lies outside the {epsilon}-ball")));
    }
    verify_drift_with_rates(ctx, rates, theta_perturbed, z_samples, inner_samples, rng)
}

/// As [`verify_drift`] but against caller-supplied rates; used for fault injection.
pub fn verify_drift_with_rates(
    ctx: &BoundContext,
    rates: DriftRates,
    theta: &Matrix,
    z_samples: usize,
    inner_samples: usize,
    rng: &mut Rng,
) -> Result<DriftReport> {
    if inner_samples < 2 || z_samples == 0 {
        return Err(Error::InvalidArgument("need at least one state and two inner samples".into()));
    }
    let plant = &ctx.plant;
    let d = plant.d();
    let ctrl = ControllerState::new(theta.clone(), d, plant.kappa)?;
    let dist = plant.disturbance.sampler();
    let exc = plant.excitation.sampler();
    let mut points = Vec::with_capacity(z_samples);
    let mut ys = vec![0.0; inner_samples];
    for j in 0..z_samples {
        let u = unit(ctx.n(), rng);
        let s = if j % 2 == 0 { rng.random::<f64>() } else { 20f64.powf(rng.random::<f64>().max(1e-6)) };
        let gu = vec::norm(&ctx.sub.gain.apply(&u));
        let z = if gu > 0.0 { vec::scale(&u, s * d / gu) } else { vec::scale(&u, s) };
        let inside = ctx.sub.in_deadbeat_region(&z, d);
        for y in ys.iter_mut() {
            let v_fwd: Vec<Vec<f64>> = (0..plant.kappa).map(|_| exc.sample(rng)).collect();
            let v_newest: Vec<Vec<f64>> = v_fwd.into_iter().rev().collect();
            let block = block_control(&ctrl, &z, &v_newest)?;
            let mut x = z.clone();
            for ui in block.u_block {
                let ui = vec::clamp_norm(ui, plant.u_max);
                x = plant_step(&plant.a, &plant.b, &x, &ui, &dist.sample(rng))?;
            }
            *y = vec::norm(&x);
        }
        let (log_estimate, se) = log_mean_exp_jackknife(&ys)?;
        let ci = Z95 * se;
        let log_bound = if inside { rates.ln_beta } else { rates.ln_lambda + vec::norm(&z) };
        points.push(DriftPoint { z, inside, log_estimate, ci_halfwidth: ci, log_bound, violated: exceeds_log(log_estimate - 3.0 * ci, log_bound) });
    }
    let violations = points.iter().filter(|p| p.violated).count();
    Ok(DriftReport { epsilon: rates.epsilon, rates, inner_samples, points, violations })
}

/// Fraction of trials on which the estimation error stays below its envelope over `[T0, horizon]`.
pub fn coverage_estimation_bound(ctx: &BoundContext, delta: f64, trials: usize, horizon: usize, seed: u64, workers: usize) -> Result<CoverageReport> {
    let plant = &ctx.plant;
    if plant.disturbance.is_zero() && plant.excitation.is_zero() {
        return Err(Error::InsufficientData("noise-free, unexcited data never becomes informative".into()));
    }
    let x0 = plant.x0.clone();
    let t0 = ctx.burn_in_t0(delta, &x0)? as usize;
    if horizon < t0 {
        return Err(Error::InvalidArgument(format!("horizon {horizon} is shorter than the burn-in time {t0}")));
    }
    let envelope: Vec<f64> = (t0..=horizon).map(|t| ctx.estimation_error(t as u64, delta, &x0)).collect::<Result<_>>()?;
    let theta = plant.theta_true();
    let margins = par_map(workers, trials, |i| {
        let mut rng = rng::stream(seed, i as u64);
        let mut cl = ClosedLoop::new(plant, ControlMode::Adaptive, false)?;
        let mut worst = f64::INFINITY;
        let mut failure = None;
        while cl.time() < horizon {
            cl.advance_block(&mut rng, |t, ols| {
                if t < t0 || t > horizon || failure.is_some() {
                    return;
                }
                match ols.solve() {
                    Ok(est) => worst = worst.min(envelope[t - t0] - (&est - &theta).spectral_norm()),
                    Err(e) => failure = Some(e),
                }
            })?;
        }
        failure.map_or(Ok(worst), Err)
    })?;
    Ok(CoverageReport::from_margins(format!("estimation error over [{t0}, {horizon}]"), 1.0 - delta, margins))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCoverage {
    pub epsilon: f64,
    pub delta: f64,
    pub tau0: u64,
    pub taus: Vec<u64>,
    pub envelopes: Vec<f64>,
    pub per_tau: Vec<CoverageReport>,
}

impl MomentCoverage {
    pub fn max_exceedance(&self) -> f64 {
        self.per_tau.iter().map(|r| 1.0 - r.fraction()).fold(0.0, f64::max)
    }
}

/// Per-`tau` fraction of trials with `|Xbar_tau|` below the moment envelope.
pub fn coverage_moment_envelope(ctx: &BoundContext, epsilon: f64, delta: f64, trials: usize, tau_checks: &[u64], seed: u64, workers: usize) -> Result<MomentCoverage> {
    let plant = &ctx.plant;
    let env = ctx.moment_envelope(epsilon, delta, &plant.x0)?;
    if !(env.at(0) > vec::norm(&plant.x0)) {
        return Err(Error::InvalidArgument("envelope at tau = 0 does not exceed |x0|".into()));
    }
    let mut taus = tau_checks.to_vec();
    taus.sort_unstable();
    taus.dedup();
    let last = *taus.last().ok_or_else(|| Error::InvalidArgument("no tau to check".into()))?;
    let envelopes: Vec<f64> = taus.iter().map(|&t| env.at(t)).collect();
    let per_trial: Vec<Vec<f64>> = par_map(workers, trials, |i| {
        let mut rng = rng::stream(seed, i as u64);
        let mut cl = ClosedLoop::new(plant, ControlMode::Adaptive, false)?;
        let mut out = Vec::with_capacity(taus.len());
        let mut next = 0;
        for tau in 0..=last {
            while next < taus.len() && taus[next] == tau {
                out.push(envelopes[next] - vec::norm(cl.state()));
                next += 1;
            }
            if tau < last {
                cl.advance_block(&mut rng, |_, _| {})?;
            }
        }
        Ok(out)
    })?;
    let per_tau = taus
        .iter()
        .enumerate()
        .map(|(k, t)| CoverageReport::from_margins(format!("moment envelope at tau = {t}"), 1.0 - delta, per_trial.iter().map(|m| m[k]).collect()))
        .collect();
    Ok(MomentCoverage { epsilon, delta, tau0: env.tau0, taus, envelopes, per_tau })
}

/// Covariates `Z_t = (X_t, U_t)` for `t < T`.
pub fn covariates(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.controls.iter().zip(&traj.states).map(|(u, x)| x.iter().chain(u).copied().collect()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmsbProxy {
    /// Unconditional small-ball proxy, minimized over sampled directions.
    pub p_hat: f64,
    pub zeta_samples: usize,
    pub windows: usize,
}

/// Unconditional surrogate of the block small-ball probability.
pub fn bmsb_proxy(data: &[Vec<Vec<f64>>], k: usize, gamma_sb: &Matrix, zeta_samples: usize, rng: &mut Rng) -> Result<BmsbProxy> {
    if k == 0 || zeta_samples == 0 {
        return Err(Error::InvalidArgument("k and zeta_samples must be positive".into()));
    }
    let windows: usize = data.iter().map(|s| s.len().saturating_sub(k)).sum();
    if windows == 0 {
        return Err(Error::InsufficientData(format!("need at least {} covariates in some trajectory", k + 1)));
    }
    let dim = gamma_sb.rows();
    if data.iter().flatten().any(|z| z.len() != dim) {
        return Err(Error::Dimension(format!("covariates must have dimension {dim}")));
    }
    let mut p_hat = f64::INFINITY;
    for _ in 0..zeta_samples {
        let zeta = unit(dim, rng);
        let thr = vec::dot(&zeta, &gamma_sb.apply(&zeta)).max(0.0).sqrt();
        let mut total = 0.0;
        for seq in data {
            if seq.len() <= k {
                continue;
            }
            let hit: Vec<f64> = seq.iter().map(|z| if vec::dot(&zeta, z).abs() >= thr { 1.0 } else { 0.0 }).collect();
            for j in 0..seq.len() - k {
                total += hit[j + 1..=j + k].iter().sum::<f64>() / k as f64;
            }
        }
        p_hat = p_hat.min(total / windows as f64);
    }
    Ok(BmsbProxy { p_hat, zeta_samples, windows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub samples: usize,
    pub violations: usize,
    /// Largest observed `lhs / rhs` over pairs with `rhs > 1e-9`.
    pub worst_ratio: f64,
}

impl InequalityCheck {
    fn new(name: &str) -> Self {
        Self { name: name.into(), samples: 0, violations: 0, worst_ratio: 0.0 }
    }

    fn record(&mut self, lhs: f64, rhs: f64) {
        self.samples += 1;
        if exceeds(lhs, rhs) || !lhs.is_finite() {
            self.violations += 1;
        }
        if rhs > 1e-9 {
            self.worst_ratio = self.worst_ratio.max(lhs / rhs);
        }
    }
}

fn random_dims(rng: &mut Rng) -> usize {
    rng.random_range(1..=4)
}

fn random_matrix(r: usize, c: usize, rng: &mut Rng) -> Matrix {
    let s = 10f64.powf(rng.random_range(-1.0..1.0));
    Matrix::new(r, c, standard_normal(r * c, rng)).expect("shape").scale(s)
}

/// Inverse of a square nonsingular matrix.
fn inverse(m: &Matrix) -> Matrix {
    m.pinv()
}

pub fn check_product_bound(samples: usize, rng: &mut Rng) -> InequalityCheck {
    let mut c = InequalityCheck::new("product perturbation");
    for _ in 0..samples {
        let (d1, d2, d3) = (random_dims(rng), random_dims(rng), random_dims(rng));
        let m1 = random_matrix(d1, d2, rng);
        let n1 = random_matrix(d2, d3, rng);
        let m2 = &m1 + &random_matrix(d1, d2, rng);
        let n2 = &n1 + &random_matrix(d2, d3, rng);
        let dm = (&m2 - &m1).spectral_norm();
        let dn = (&n2 - &n1).spectral_norm();
        let lhs = (&(&m2 * &n2) - &(&m1 * &n1)).spectral_norm();
        c.record(lhs, dm * dn + m1.spectral_norm() * dn + n1.spectral_norm() * dm);
    }
    c
}

pub fn check_inverse_bound(samples: usize, rng: &mut Rng) -> InequalityCheck {
    let mut c = InequalityCheck::new("inverse perturbation");
    while c.samples < samples {
        let d = random_dims(rng);
        let m1 = random_matrix(d, d, rng);
        let (smin, smax) = (m1.sigma_min(), m1.spectral_norm());
        if smin < 1e-4 * smax {
            continue;
        }
        let delta = smin * 0.999 * rng.random::<f64>();
        let m2 = in_ball(&m1, delta, rng);
        let inv1 = inverse(&m1);
        let ni = inv1.spectral_norm();
        let lhs = (&inverse(&m2) - &inv1).spectral_norm();
        c.record(lhs, ni * ni * delta / (1.0 - ni * delta));
    }
    c
}

pub fn check_power_bound(samples: usize, rng: &mut Rng) -> Result<InequalityCheck> {
    let mut c = InequalityCheck::new("power perturbation");
    for _ in 0..samples {
        let d = random_dims(rng);
        let m1 = random_matrix(d, d, rng);
        let delta = rng.random::<f64>().max(1e-6);
        let i = rng.random_range(1..=5);
        let m2 = in_ball(&m1, delta, rng);
        c.record((&m2.pow(i) - &m1.pow(i)).spectral_norm(), q10(delta, i, &m1)?);
    }
    Ok(c)
}

pub fn check_power_product_bound(samples: usize, rng: &mut Rng) -> InequalityCheck {
    let mut c = InequalityCheck::new("power-product perturbation");
    for _ in 0..samples {
        let (d1, d2) = (random_dims(rng), random_dims(rng));
        let m1 = random_matrix(d1, d1, rng);
        let n1 = random_matrix(d1, d2, rng);
        let delta = rng.random::<f64>().max(1e-6);
        let i = rng.random_range(0..=5);
        let m2 = in_ball(&m1, delta, rng);
        let n2 = in_ball(&n1, delta, rng);
        let lhs = (&(&m2.pow(i) * &n2) - &(&m1.pow(i) * &n1)).spectral_norm();
        c.record(lhs, q9(delta, i, &m1, &n1));
    }
    c
}

pub fn check_saturation_bound(samples: usize, rng: &mut Rng) -> InequalityCheck {
    let mut c = InequalityCheck::new("saturation difference");
    for _ in 0..samples {
        let d = random_dims(rng);
        let r = 10f64.powf(rng.random_range(-1.0..1.0));
        let x1 = vec::scale(&standard_normal(d, rng), r * 10f64.powf(rng.random_range(-1.0..1.0)));
        let x2 = vec::scale(&standard_normal(d, rng), r * 10f64.powf(rng.random_range(-1.0..1.0)));
        let lhs = vec::norm(&vec::sub(&sat(&x2, r), &sat(&x1, r)));
        c.record(lhs, vec::norm(&vec::sub(&x2, &x1)));
        let (n1, n2) = (vec::norm(&x1), vec::norm(&x2));
        if n1 > r && n2 > r {
            let dir = vec::sub(&vec::scale(&x2, 1.0 / n2), &vec::scale(&x1, 1.0 / n1));
            c.record(lhs, r * vec::norm(&dir));
        }
    }
    c
}

pub fn check_direction_bound(samples: usize, rng: &mut Rng) -> InequalityCheck {
    let mut c = InequalityCheck::new("normalized image perturbation");
    while c.samples < samples {
        let d2 = random_dims(rng);
        let d1 = rng.random_range(d2..=4);
        let m1 = random_matrix(d1, d2, rng);
        let smin = m1.sigma_min();
        if smin < 1e-4 * m1.spectral_norm() {
            continue;
        }
        let delta = smin * 0.999 * rng.random::<f64>();
        let m2 = in_ball(&m1, delta, rng);
        let x = standard_normal(d2, rng);
        let (y1, y2) = (m1.apply(&x), m2.apply(&x));
        let lhs = vec::norm(&vec::sub(&vec::scale(&y2, 1.0 / vec::norm(&y2)), &vec::scale(&y1, 1.0 / vec::norm(&y1))));
        c.record(lhs, 2.0 * delta / (smin - delta));
    }
    c
}

fn random_state(n: usize, rng: &mut Rng) -> Vec<f64> {
    vec::scale(&unit(n, rng), 10f64.powf(rng.random_range(-3.0..3.0)))
}

fn saturated_gap(a: &Matrix, b: &Matrix, kappa: usize, g: &Matrix, eps: f64, r: f64, rng: &mut Rng) -> Result<f64> {
    let a2 = in_ball(a, eps, rng);
    let b2 = in_ball(b, eps, rng);
    let g2 = deadbeat_gain(&a2, &b2, kappa)?;
    let x = random_state(a.rows(), rng);
    let u1 = sat(&vec::scale(&g.apply(&x), -1.0), r);
    let u2 = sat(&vec::scale(&g2.apply(&x), -1.0), r);
    Ok(vec::norm(&vec::sub(&u2, &u1)))
}

/// Saturated certainty-equivalent control error against `q2(eps, r)`, `eps` up to `0.9 q1`.
pub fn check_control_error(plant: &PlantConfig, samples: usize, rng: &mut Rng) -> Result<InequalityCheck> {
    let pair = PairConstants::new(&plant.a, &plant.b, plant.kappa)?;
    let q1 = pair.q1()?;
    let g = deadbeat_gain(&plant.a, &plant.b, plant.kappa)?;
    let r = plant.d();
    let mut c = InequalityCheck::new("saturated control error");
    for _ in 0..samples {
        let eps = 0.9 * q1 * rng.random::<f64>();
        let bound = pair.q2_below(eps, r, q1)?;
        c.record(saturated_gap(&plant.a, &plant.b, plant.kappa, &g, eps, r, rng)?, bound);
    }
    Ok(c)
}

/// Saturated control error against the linear bound `M_q D eps` on `[0, m_q]`.
pub fn check_linear_control_error(plant: &PlantConfig, samples: usize, rng: &mut Rng) -> Result<InequalityCheck> {
    let pair = PairConstants::new(&plant.a, &plant.b, plant.kappa)?;
    let l1 = pair.radii()?;
    let g = deadbeat_gain(&plant.a, &plant.b, plant.kappa)?;
    let d = plant.d();
    let mut c = InequalityCheck::new("linear control error");
    for _ in 0..samples {
        let eps = l1.m_q * rng.random::<f64>();
        c.record(saturated_gap(&plant.a, &plant.b, plant.kappa, &g, eps, d, rng)?, l1.big_m_q * d * eps);
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCheck {
    pub points: usize,
    pub violations: usize,
    pub worst_excess: f64,
}

/// Midpoint convexity of `eps -> q2(eps, r)` on an even grid of `[0, q1/2]`.
pub fn check_q2_convexity(plant: &PlantConfig, points: usize) -> Result<ConvexityCheck> {
    let pair = PairConstants::new(&plant.a, &plant.b, plant.kappa)?;
    let q1 = pair.q1()?;
    let r = plant.d();
    let n = points.max(3);
    let vals: Vec<f64> = (0..n).map(|i| pair.q2_below(0.5 * q1 * i as f64 / (n - 1) as f64, r, q1)).collect::<Result<_>>()?;
    let mut out = ConvexityCheck { points: n, violations: 0, worst_excess: f64::NEG_INFINITY };
    for mid in 1..n - 1 {
        for h in 1..=mid.min(n - 1 - mid) {
            let chord = 0.5 * (vals[mid - h] + vals[mid + h]);
            let excess = vals[mid] - chord;
            out.worst_excess = out.worst_excess.max(excess);
            if excess > 1e-12 * chord.abs().max(1.0) {
                out.violations += 1;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub checks: Vec<InequalityCheck>,
    pub convexity: ConvexityCheck,
}

impl InequalityReport {
    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum::<usize>() + self.convexity.violations
    }
}

/// All perturbation suites: `matrix_samples` for the generic matrix inequalities,
/// `control_samples` for the two saturated-control bounds on `plant`.
pub fn certify_inequalities(plant: &PlantConfig, matrix_samples: usize, control_samples: usize, rng: &mut Rng) -> Result<InequalityReport> {
    let checks = vec![
        check_product_bound(matrix_samples, rng),
        check_inverse_bound(matrix_samples, rng),
        check_power_bound(matrix_samples, rng)?,
        check_power_product_bound(matrix_samples, rng),
        check_saturation_bound(matrix_samples, rng),
        check_direction_bound(matrix_samples, rng),
        check_control_error(plant, control_samples, rng)?,
        check_linear_control_error(plant, control_samples, rng)?,
    ];
    Ok(InequalityReport { checks, convexity: check_q2_convexity(plant, 401)? })
}
