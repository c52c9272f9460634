//! The plant, its noise laws, and the sub-sampled view of the closed loop.
//!
//! The plant is `x' = A x + B u + w`. The controller acts once every `kappa`
//! steps, so most quantities are expressed on the sub-sampled sequence
//! `xbar_tau = x_{kappa tau}`:
//!
//! ```text
//! xbar' = A^kappa xbar + R sat_D(-g xbar) + vbar + wbar
//! ```
//!
//! with `R = [B, AB, ..., A^{kappa-1} B]`, `vbar = R * stack(v)` and
//! `wbar = [I, A, ..., A^{kappa-1}] * stack(w)`. Blocks are always stacked
//! newest first.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, vec, Matrix};
use crate::rng::Rng;

/// Distribution of a noise sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Mean-zero Gaussian with the given (PSD) covariance.
    Gaussian { covariance: Matrix },
    /// Uniform on the closed Euclidean ball of radius `bound`.
    UniformBall { dim: usize, bound: f64 },
    /// Identically zero.
    Zero { dim: usize },
}

impl NoiseSpec {
    pub fn gaussian(covariance: Matrix) -> Self {
        NoiseSpec::Gaussian { covariance }
    }

    pub fn isotropic(dim: usize, variance: f64) -> Self {
        NoiseSpec::Gaussian { covariance: Matrix::identity(dim).scale(variance) }
    }

    pub fn uniform_ball(dim: usize, bound: f64) -> Self {
        NoiseSpec::UniformBall { dim, bound }
    }

    pub fn zero(dim: usize) -> Self {
        NoiseSpec::Zero { dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseSpec::Gaussian { covariance } => covariance.rows(),
            NoiseSpec::UniformBall { dim, .. } | NoiseSpec::Zero { dim } => *dim,
        }
    }

    /// Covariance of one draw. For the uniform ball this is `bound^2/(m+2) I`.
    pub fn covariance(&self) -> Matrix {
        match self {
            NoiseSpec::Gaussian { covariance } => covariance.clone(),
            NoiseSpec::UniformBall { dim, bound } => {
                Matrix::identity(*dim).scale(bound * bound / (*dim as f64 + 2.0))
            }
            NoiseSpec::Zero { dim } => Matrix::zeros(*dim, *dim),
        }
    }

    /// Almost-sure norm bound, if any.
    pub fn norm_bound(&self) -> Option<f64> {
        match self {
            NoiseSpec::Gaussian { covariance } if covariance.max_abs() == 0.0 => Some(0.0),
            NoiseSpec::Gaussian { .. } => None,
            NoiseSpec::UniformBall { bound, .. } => Some(*bound),
            NoiseSpec::Zero { .. } => Some(0.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.norm_bound() == Some(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseSpec::Gaussian { covariance } => {
                if !covariance.is_square() || covariance.rows() == 0 {
                    return Err(Error::Config("gaussian covariance must be square and nonempty".into()));
                }
                let (lo, hi) = covariance.sym_eig_bounds()?;
                if lo < -1e-12 * hi.abs().max(1.0) {
                    return Err(Error::Config(format!("gaussian covariance has eigenvalue {lo}")));
                }
            }
            NoiseSpec::UniformBall { dim, bound } => {
                if *dim == 0 || !(bound.is_finite() && *bound >= 0.0) {
                    return Err(Error::Config("uniform_ball needs dim > 0 and a finite bound >= 0".into()));
                }
            }
            NoiseSpec::Zero { dim } => {
                if *dim == 0 {
                    return Err(Error::Config("zero noise needs dim > 0".into()));
                }
            }
        }
        Ok(())
    }

    /// Reusable sampler; factors the covariance once.
    pub fn sampler(&self) -> NoiseSampler {
        match self {
            NoiseSpec::Gaussian { covariance } => NoiseSampler::Gaussian(linalg::psd_factor(covariance)),
            NoiseSpec::UniformBall { dim, bound } => NoiseSampler::Ball { dim: *dim, bound: *bound },
            NoiseSpec::Zero { dim } => NoiseSampler::Zero(*dim),
        }
    }
}

/// Prepared sampler for a [`NoiseSpec`].
#[derive(Clone, Debug)]
pub enum NoiseSampler {
    Gaussian(Matrix),
    Ball { dim: usize, bound: f64 },
    Zero(usize),
}

impl NoiseSampler {
    pub fn dim(&self) -> usize {
        match self {
            NoiseSampler::Gaussian(l) => l.rows(),
            NoiseSampler::Ball { dim, .. } => *dim,
            NoiseSampler::Zero(d) => *d,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        match self {
            NoiseSampler::Gaussian(l) => {
                let z: Vec<f64> = (0..l.cols()).map(|_| StandardNormal.sample(rng)).collect();
                l.apply(&z)
            }
            NoiseSampler::Ball { dim, bound } => sample_ball(*dim, *bound, rng),
            NoiseSampler::Zero(d) => vec![0.0; *d],
        }
    }
}

fn sample_ball(dim: usize, bound: f64, rng: &mut Rng) -> Vec<f64> {
    if bound == 0.0 {
        return vec![0.0; dim];
    }
    let dir = loop {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let nrm = vec::norm(&g);
        if nrm > 1e-300 {
            break vec::scale(&g, 1.0 / nrm);
        }
    };
    let u: f64 = Uniform::new(0.0f64, 1.0).expect("unit interval").sample(rng);
    let radius = bound * u.powf(1.0 / dim as f64);
    vec::clamp_norm(vec::scale(&dir, radius), bound)
}

/// One draw from `spec`.
pub fn sample_noise(spec: &NoiseSpec, rng: &mut Rng) -> Vec<f64> {
    spec.sampler().sample(rng)
}

/// A standard-normal vector, used for random directions.
pub fn standard_normal(dim: usize, rng: &mut Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// The true plant and everything the adaptive controller is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub a: Matrix,
    pub b: Matrix,
    pub kappa: usize,
    pub disturbance: NoiseSpec,
    pub excitation: NoiseSpec,
    pub u_max: f64,
    pub c: f64,
    pub x0: Vec<f64>,
    /// Initial estimate `[A0, B0]` (n x (n+m)); never derived from data.
    pub theta0: Matrix,
}

impl PlantConfig {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    /// Saturation radius `D = U_max - C`.
    pub fn d(&self) -> f64 {
        self.u_max - self.c
    }

    /// `[A, B]`.
    pub fn theta_true(&self) -> Matrix {
        Matrix::hstack(&[self.a.clone(), self.b.clone()]).expect("validated shapes")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.rows();
        if n == 0 || !self.a.is_square() {
            return Err(Error::Config("A must be square and nonempty".into()));
        }
        if self.b.rows() != n || self.b.cols() == 0 {
            return Err(Error::Config(format!("B must be {n} x m with m > 0")));
        }
        let m = self.b.cols();
        if self.kappa == 0 || self.kappa > n {
            return Err(Error::Config(format!("kappa must lie in 1..={n}, got {}", self.kappa)));
        }
        if !(self.u_max.is_finite() && self.u_max > 0.0) {
            return Err(Error::Config("u_max must be positive".into()));
        }
        if !(self.c > 0.0 && self.c < self.u_max) {
            return Err(Error::Config("c must lie in (0, u_max)".into()));
        }
        if self.x0.len() != n || self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("x0 must be a finite {n}-vector")));
        }
        self.disturbance.validate()?;
        self.excitation.validate()?;
        if self.disturbance.dim() != n {
            return Err(Error::Config(format!("disturbance dim must be {n}")));
        }
        if self.excitation.dim() != m {
            return Err(Error::Config(format!("excitation dim must be {m}")));
        }
        match self.excitation.norm_bound() {
            Some(bound) if bound <= self.c => {}
            Some(bound) => {
                return Err(Error::Config(format!("excitation bound {bound} exceeds c = {}", self.c)))
            }
            None => return Err(Error::Config("excitation must be bounded (uniform_ball or zero)".into())),
        }
        if self.theta0.shape() != (n, n + m) {
            return Err(Error::Config(format!("initial estimate must be {n} x {}", n + m)));
        }
        if self.theta0.columns(n, m).max_abs() == 0.0 {
            return Err(Error::Config("initial input matrix estimate must be nonzero".into()));
        }
        Ok(())
    }
}

/// `[B, AB, ..., A^{kappa-1} B]`.
pub fn reachability_matrix(a: &Matrix, b: &Matrix, kappa: usize) -> Result<Matrix> {
    if !a.is_square() || a.rows() != b.rows() {
        return Err(Error::Dimension(format!("A {:?} with B {:?}", a.shape(), b.shape())));
    }
    if kappa == 0 {
        return Err(Error::InvalidArgument("kappa must be at least 1".into()));
    }
    let mut blocks = Vec::with_capacity(kappa);
    let mut cur = b.clone();
    for _ in 0..kappa {
        let next = a.dot(&cur)?;
        blocks.push(cur);
        cur = next;
    }
    Matrix::hstack(&blocks)
}

/// Reachability verdict with the smallest singular value of `R_kappa`.
pub fn is_reachable(a: &Matrix, b: &Matrix, kappa: usize) -> Result<(bool, f64)> {
    let r = reachability_matrix(a, b, kappa)?;
    let smin = if r.cols() < r.rows() { 0.0 } else { r.sigma_min() };
    Ok((smin > 1e-8 * r.spectral_norm().max(1.0), smin))
}

pub fn plant_step(a: &Matrix, b: &Matrix, x: &[f64], u: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let ax = a.mul_vec(x)?;
    let bu = b.mul_vec(u)?;
    if w.len() != ax.len() {
        return Err(Error::Dimension("disturbance length".into()));
    }
    Ok(ax.iter().zip(&bu).zip(w).map(|((p, q), r)| p + q + r).collect())
}

/// Structural quantities of the sub-sampled closed loop.
#[derive(Clone, Debug)]
pub struct SubsampledContext {
    pub kappa: usize,
    pub r_star: Matrix,
    pub r_pinv: Matrix,
    pub a_pow_kappa: Matrix,
    /// `[I, A, ..., A^{kappa-1}]`.
    pub w_stack_map: Matrix,
    pub norm_r: f64,
    pub norm_r_pinv: f64,
    pub sigma_min_r: f64,
    /// Deadbeat gain of the true pair.
    pub gain: Matrix,
}

impl SubsampledContext {
    pub fn build(a: &Matrix, b: &Matrix, kappa: usize) -> Result<Self> {
        let (ok, smin) = is_reachable(a, b, kappa)?;
        if !ok {
            return Err(Error::NotReachable(smin));
        }
        let r_star = reachability_matrix(a, b, kappa)?;
        let r_pinv = r_star.pinv();
        let a_pow_kappa = a.pow(kappa);
        let powers: Vec<Matrix> = (0..kappa).map(|i| a.pow(i)).collect();
        let w_stack_map = Matrix::hstack(&powers)?;
        let gain = &r_pinv * &a_pow_kappa;
        Ok(Self {
            kappa,
            norm_r: r_star.spectral_norm(),
            norm_r_pinv: r_pinv.spectral_norm(),
            sigma_min_r: smin,
            r_star,
            r_pinv,
            a_pow_kappa,
            w_stack_map,
            gain,
        })
    }

    pub fn from_config(cfg: &PlantConfig) -> Result<Self> {
        Self::build(&cfg.a, &cfg.b, cfg.kappa)
    }

    pub fn n(&self) -> usize {
        self.r_star.rows()
    }

    pub fn m(&self) -> usize {
        self.r_star.cols() / self.kappa
    }

    /// `sum_i A^i w_{newest - i}` for a newest-first block.
    pub fn aggregate_disturbance(&self, w_block: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_block(w_block, self.n())?;
        Ok(self.w_stack_map.apply(&vec::stack(w_block)))
    }

    /// `R * stack(v)` for a newest-first block.
    pub fn aggregate_excitation(&self, v_block: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_block(v_block, self.m())?;
        Ok(self.r_star.apply(&vec::stack(v_block)))
    }

    fn check_block(&self, block: &[Vec<f64>], dim: usize) -> Result<()> {
        if block.len() != self.kappa || block.iter().any(|v| v.len() != dim) {
            return Err(Error::Dimension(format!(
                "expected {} blocks of length {dim}",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Whether `z` lies in the unsaturated deadbeat region `|g z| <= D`.
    pub fn in_deadbeat_region(&self, z: &[f64], d: f64) -> bool {
        vec::norm(&self.gain.apply(z)) <= d
    }
}

/// Recorded closed-loop run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `x_0 .. x_T`.
    pub states: Vec<Vec<f64>>,
    /// `u_0 .. u_{T-1}`.
    pub controls: Vec<Vec<f64>>,
    pub excitations: Vec<Vec<f64>>,
    pub disturbances: Vec<Vec<f64>>,
    /// Sub-sampled estimates `theta_bar_0 ..`, one per completed block plus the initial one.
    pub estimates: Vec<Matrix>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    pub fn state_norms(&self) -> Vec<f64> {
        self.states.iter().map(|x| vec::norm(x)).collect()
    }

    pub fn max_control_norm(&self) -> f64 {
        self.controls.iter().map(|u| vec::norm(u)).fold(0.0, f64::max)
    }
}
