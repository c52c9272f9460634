//! Ordinary least squares on state-input regressors.
//!
//! The estimate after `t` transitions minimizes `sum_s |x_s - theta z_s|^2`
//! with `z_s = (x_{s-1}, u_{s-1})`. Only the sufficient statistics are kept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::system::Trajectory;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsState {
    n: usize,
    m: usize,
    /// `sum z z^T`.
    pub gram: Matrix,
    /// `sum x_next z^T`.
    pub cross: Matrix,
    /// `sum |x_next|^2`, kept so the objective can be evaluated.
    pub sum_sq: f64,
    pub count: usize,
}

impl OlsState {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            gram: Matrix::zeros(n + m, n + m),
            cross: Matrix::zeros(n, n + m),
            sum_sq: 0.0,
            count: 0,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn update(&mut self, x_prev: &[f64], u_prev: &[f64], x_next: &[f64]) -> Result<()> {
        if x_prev.len() != self.n || u_prev.len() != self.m || x_next.len() != self.n {
            return Err(Error::Dimension(format!(
                "ols update with ({}, {}, {}) for n = {}, m = {}",
                x_prev.len(),
                u_prev.len(),
                x_next.len(),
                self.n,
                self.m
            )));
        }
        let d = self.n + self.m;
        let z = |k: usize| if k < self.n { x_prev[k] } else { u_prev[k - self.n] };
        for i in 0..d {
            let zi = z(i);
            for j in 0..d {
                self.gram[(i, j)] += zi * z(j);
            }
        }
        for i in 0..self.n {
            for j in 0..d {
                self.cross[(i, j)] += x_next[i] * z(j);
            }
        }
        self.sum_sq += x_next.iter().map(|v| v * v).sum::<f64>();
        self.count += 1;
        Ok(())
    }

    /// A minimizer of the least-squares objective; the minimum-norm one when
    /// the Gram matrix is singular.
    pub fn solve(&self) -> Result<Matrix> {
        if self.count == 0 {
            return Err(Error::InsufficientData("no transitions observed".into()));
        }
        if let Some(theta) = linalg::solve_right_spd(&self.cross, &self.gram) {
            return Ok(theta);
        }
        Ok(&self.cross * &self.gram.pinv())
    }

    /// `sum_s |x_s - theta z_s|^2`.
    pub fn objective(&self, theta: &Matrix) -> f64 {
        let tg = &(theta * &self.gram) * &theta.transpose();
        let tc = theta * &self.cross.transpose();
        self.sum_sq - 2.0 * tc.trace() + tg.trace()
    }
}

/// Splits `[A, B]` into its blocks.
pub fn split_theta(theta: &Matrix, n: usize) -> (Matrix, Matrix) {
    let m = theta.cols() - n;
    (theta.columns(0, n), theta.columns(n, m))
}

/// Builds the statistics over the first `t` transitions of a trajectory.
pub fn ols_from_trajectory(traj: &Trajectory, t: usize) -> Result<OlsState> {
    if t > traj.controls.len() {
        return Err(Error::InsufficientData(format!(
            "asked for {t} transitions, trajectory has {}",
            traj.controls.len()
        )));
    }
    let n = traj.states[0].len();
    let m = traj.controls.first().map_or(0, Vec::len);
    let mut ols = OlsState::new(n, m);
    for s in 0..t {
        ols.update(&traj.states[s], &traj.controls[s], &traj.states[s + 1])?;
    }
    Ok(ols)
}

/// The sub-sampled estimate after `kappa * tau` transitions. At `tau = 0`
/// this is the supplied initial estimate, not a least-squares fit.
pub fn subsampled_estimate(traj: &Trajectory, kappa: usize, tau: usize) -> Result<Matrix> {
    if tau == 0 {
        return traj
            .estimates
            .first()
            .cloned()
            .ok_or_else(|| Error::InsufficientData("trajectory has no initial estimate".into()));
    }
    ols_from_trajectory(traj, kappa * tau)?.solve()
}
