//! Saturated certainty-equivalent deadbeat control and the adaptive loop.
//!
//! Every `kappa` steps the controller reads `x_{kappa tau}`, computes the
//! deadbeat gain of its current estimate, saturates the resulting stacked
//! input to radius `D`, adds a fresh excitation block, and plays the block
//! out over the next `kappa` steps. The stacked input is ordered newest
//! first: its first `m` entries are applied last.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{split_theta, OlsState};
use crate::linalg::{vec, Matrix};
use crate::rng::{self, Rng};
use crate::system::{plant_step, reachability_matrix, NoiseSampler, PlantConfig, Trajectory};

/// Radial projection onto the closed ball of radius `r`.
pub fn sat(x: &[f64], r: f64) -> Vec<f64> {
    let nrm = vec::norm(x);
    if nrm <= r {
        return x.to_vec();
    }
    vec::clamp_norm(vec::scale(x, r / nrm), r)
}

/// `g(A, B) = R_kappa(A, B)^+ A^kappa`.
pub fn deadbeat_gain(a_hat: &Matrix, b_hat: &Matrix, kappa: usize) -> Result<Matrix> {
    let r = reachability_matrix(a_hat, b_hat, kappa)?;
    Ok(&r.pinv() * &a_hat.pow(kappa))
}

#[derive(Clone, Debug)]
pub struct ControllerState {
    pub theta_bar: Matrix,
    pub d: f64,
    pub kappa: usize,
    gain: Matrix,
}

impl ControllerState {
    pub fn new(theta_bar: Matrix, d: f64, kappa: usize) -> Result<Self> {
        let n = theta_bar.rows();
        if theta_bar.cols() <= n {
            return Err(Error::Dimension("estimate must be n x (n+m) with m > 0".into()));
        }
        let (a, b) = split_theta(&theta_bar, n);
        let gain = deadbeat_gain(&a, &b, kappa)?;
        Ok(Self { theta_bar, d, kappa, gain })
    }

    pub fn set_estimate(&mut self, theta_bar: Matrix) -> Result<()> {
        *self = Self::new(theta_bar, self.d, self.kappa)?;
        Ok(())
    }

    pub fn gain(&self) -> &Matrix {
        &self.gain
    }

    pub fn n(&self) -> usize {
        self.theta_bar.rows()
    }

    pub fn m(&self) -> usize {
        self.theta_bar.cols() - self.n()
    }
}

/// Output of one block decision.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockControl {
    /// Per-step inputs in forward time order.
    pub u_block: Vec<Vec<f64>>,
    /// `sat_D(-g xbar)` in newest-first stacking.
    pub ce_part: Vec<f64>,
}

/// Splits a newest-first stack into forward-time blocks of length `m`.
pub fn unstack_newest_first(stacked: &[f64], m: usize) -> Vec<Vec<f64>> {
    let mut blocks: Vec<Vec<f64>> = stacked.chunks(m).map(<[f64]>::to_vec).collect();
    blocks.reverse();
    blocks
}

/// Block input for the sub-sampled step; `v_block` is newest first.
pub fn block_control(state: &ControllerState, x_bar: &[f64], v_block: &[Vec<f64>]) -> Result<BlockControl> {
    let m = state.m();
    if v_block.len() != state.kappa || v_block.iter().any(|v| v.len() != m) {
        return Err(Error::Dimension(format!("expected {} excitation blocks of length {m}", state.kappa)));
    }
    let demand = vec::scale(&state.gain.mul_vec(x_bar)?, -1.0);
    let ce_part = sat(&demand, state.d);
    let stacked = vec::add(&ce_part, &vec::stack(v_block));
    Ok(BlockControl { u_block: unstack_newest_first(&stacked, m), ce_part })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Algorithm as designed: least-squares re-estimation every block.
    #[default]
    Adaptive,
    /// Controller uses the true parameters and never re-estimates.
    FrozenTruth,
    /// Zero input.
    Uncontrolled,
}

impl std::str::FromStr for ControlMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(ControlMode::Adaptive),
            "frozen_truth" => Ok(ControlMode::FrozenTruth),
            "uncontrolled" => Ok(ControlMode::Uncontrolled),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for ControlMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ControlMode::Adaptive => "adaptive",
            ControlMode::FrozenTruth => "frozen_truth",
            ControlMode::Uncontrolled => "uncontrolled",
        })
    }
}

/// Running closed loop, advanced one block at a time.
pub struct ClosedLoop {
    cfg: PlantConfig,
    mode: ControlMode,
    learning: bool,
    pub controller: ControllerState,
    pub ols: OlsState,
    x: Vec<f64>,
    t: usize,
    dist: NoiseSampler,
    exc: NoiseSampler,
    record: Option<Trajectory>,
}

impl ClosedLoop {
    pub fn new(cfg: &PlantConfig, mode: ControlMode, record: bool) -> Result<Self> {
        cfg.validate()?;
        let theta = match mode {
            ControlMode::FrozenTruth => cfg.theta_true(),
            _ => cfg.theta0.clone(),
        };
        Self::build(cfg, mode, theta, mode == ControlMode::Adaptive, record)
    }

    /// A loop whose controller keeps `theta` forever.
    pub fn with_fixed_estimate(cfg: &PlantConfig, theta: Matrix, record: bool) -> Result<Self> {
        cfg.validate()?;
        Self::build(cfg, ControlMode::FrozenTruth, theta, false, record)
    }

    fn build(cfg: &PlantConfig, mode: ControlMode, theta: Matrix, learning: bool, record: bool) -> Result<Self> {
        let controller = ControllerState::new(theta.clone(), cfg.d(), cfg.kappa)?;
        let record = record.then(|| Trajectory {
            states: vec![cfg.x0.clone()],
            controls: Vec::new(),
            excitations: Vec::new(),
            disturbances: Vec::new(),
            estimates: vec![theta],
        });
        Ok(Self {
            cfg: cfg.clone(),
            mode,
            learning,
            controller,
            ols: OlsState::new(cfg.n(), cfg.m()),
            x: cfg.x0.clone(),
            t: 0,
            dist: cfg.disturbance.sampler(),
            exc: cfg.excitation.sampler(),
            record,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn mode(&self) -> ControlMode {
        self.mode
    }

    /// Restarts from `x` at time zero, keeping the current controller.
    pub fn reset_state(&mut self, x: Vec<f64>) {
        self.x = x;
        self.t = 0;
    }

    /// One sub-sampled step. `on_transition` sees the time index after each
    /// plant step and the least-squares statistics including that step.
    pub fn advance_block(&mut self, rng: &mut Rng, mut on_transition: impl FnMut(usize, &OlsState)) -> Result<()> {
        let kappa = self.cfg.kappa;
        let m = self.cfg.m();
        let (u_fwd, v_fwd) = if self.mode == ControlMode::Uncontrolled {
            (vec![vec![0.0; m]; kappa], vec![vec![0.0; m]; kappa])
        } else {
            let v_fwd: Vec<Vec<f64>> = (0..kappa).map(|_| self.exc.sample(rng)).collect();
            let v_newest: Vec<Vec<f64>> = v_fwd.iter().rev().cloned().collect();
            let block = block_control(&self.controller, &self.x, &v_newest)?;
            let u_max = self.cfg.u_max;
            // Guard the bound against rounding in the sum of the two parts.
            let u = block.u_block.into_iter().map(|u| vec::clamp_norm(u, u_max)).collect();
            (u, v_fwd)
        };
        for (u, v) in u_fwd.into_iter().zip(v_fwd) {
            let w = self.dist.sample(rng);
            let next = plant_step(&self.cfg.a, &self.cfg.b, &self.x, &u, &w)?;
            if self.learning {
                self.ols.update(&self.x, &u, &next)?;
            }
            self.t += 1;
            on_transition(self.t, &self.ols);
            if let Some(rec) = self.record.as_mut() {
                rec.states.push(next.clone());
                rec.controls.push(u);
                rec.excitations.push(v);
                rec.disturbances.push(w);
            }
            self.x = next;
        }
        if self.learning {
            let theta = self.ols.solve()?;
            self.controller.set_estimate(theta)?;
        }
        if let Some(rec) = self.record.as_mut() {
            rec.estimates.push(self.controller.theta_bar.clone());
        }
        Ok(())
    }

    pub fn run(&mut self, blocks: usize, rng: &mut Rng) -> Result<()> {
        for _ in 0..blocks {
            self.advance_block(rng, |_, _| {})?;
        }
        Ok(())
    }

    pub fn into_trajectory(self) -> Option<Trajectory> {
        self.record
    }
}

/// Runs `horizon_tau` sub-sampled steps of the closed loop in `mode`.
pub fn run_closed_loop(cfg: &PlantConfig, mode: ControlMode, horizon_tau: usize, rng: &mut Rng) -> Result<Trajectory> {
    if horizon_tau == 0 {
        return Err(Error::InvalidArgument("horizon must be at least one block".into()));
    }
    let mut cl = ClosedLoop::new(cfg, mode, true)?;
    cl.run(horizon_tau, rng)?;
    Ok(cl.into_trajectory().expect("recording enabled"))
}

/// The adaptive algorithm on stream 0 of `seed`.
pub fn run_adaptive(cfg: &PlantConfig, horizon_tau: usize, seed: u64) -> Result<Trajectory> {
    run_closed_loop(cfg, ControlMode::Adaptive, horizon_tau, &mut rng::stream(seed, 0))
}
