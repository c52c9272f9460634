//! Closed-form stability and estimation bounds.
//!
//! A [`BoundContext`] gathers every ground-truth constant the formulas need:
//! the sub-sampled structure of the true pair, the log-MGF constants of the
//! aggregated excitation and disturbance, the Lyapunov perturbation constants
//! `(m_q, M_q)`, and the user-supplied small-ball parameters. All other
//! quantities are methods on the context. Envelopes are computed in the log
//! domain throughout since the constants overflow `f64` otherwise.

pub mod envelope;
pub mod estimation;
pub mod mgf;
pub mod perturbation;

use serde::{Deserialize, Serialize};

pub use envelope::{DriftRates, MarginCheck, MomentEnvelope, ExplicitConstants};
pub use estimation::StabilizationConstants;
pub use mgf::MgfEstimate;
pub use perturbation::{PerturbationRadii, PairConstants, PerturbChain};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{self, streams};
use crate::system::{PlantConfig, SubsampledContext};

/// Block martingale small-ball parameters `(k, Gamma_sb, p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmsbParams {
    pub k: usize,
    pub gamma_sb: Matrix,
    pub p: f64,
}

impl BmsbParams {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("bmsb k must be at least 1".into()));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::Config("bmsb p must lie in (0, 1]".into()));
        }
        if self.gamma_sb.shape() != (d, d) {
            return Err(Error::Config(format!("gamma_sb must be {d} x {d}")));
        }
        self.gamma_sb.cholesky().map_err(|_| Error::Config("gamma_sb must be symmetric positive definite".into()))?;
        Ok(())
    }
}

/// How the log-MGF constants are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgfOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for MgfOptions {
    fn default() -> Self {
        Self { samples: 1_000_000, seed: 0 }
    }
}

/// Ground-truth constants feeding every bound.
#[derive(Clone, Debug)]
pub struct BoundContext {
    pub plant: PlantConfig,
    pub sub: SubsampledContext,
    pub pair: PairConstants,
    pub m_v_bar: MgfEstimate,
    pub m_w_bar: MgfEstimate,
    pub q1: f64,
    pub m_q: f64,
    pub big_m_q: f64,
    pub bmsb: BmsbParams,
    /// `lambda_max(Sigma_W)`.
    pub sigma_sq: f64,
    pub trace_sigma_v: f64,
    pub trace_sigma_w: f64,
    pub norm_b: f64,
    pub lambda_min_gamma: f64,
    pub lambda_max_gamma: f64,
    pub logdet_gamma: f64,
}

impl BoundContext {
    /// Estimates the log-MGF constants by Monte Carlo and assembles the context.
    pub fn build(plant: &PlantConfig, bmsb: BmsbParams, opts: MgfOptions) -> Result<Self> {
        plant.validate()?;
        let sub = SubsampledContext::from_config(plant)?;
        let m_v = mgf::log_mgf_estimate(
            &plant.excitation,
            plant.kappa,
            &sub.r_star,
            opts.samples,
            &mut rng::stream(opts.seed, streams::MGF_EXCITATION),
        )?;
        let m_w = mgf::log_mgf_estimate(
            &plant.disturbance,
            plant.kappa,
            &sub.w_stack_map,
            opts.samples,
            &mut rng::stream(opts.seed, streams::MGF_DISTURBANCE),
        )?;
        Self::with_mgf(plant, bmsb, m_v, m_w)
    }

    /// Assembles the context from externally supplied log-MGF constants.
    pub fn with_mgf(plant: &PlantConfig, bmsb: BmsbParams, m_v_bar: MgfEstimate, m_w_bar: MgfEstimate) -> Result<Self> {
        plant.validate()?;
        let d = plant.n() + plant.m();
        bmsb.validate(d)?;
        for (name, v) in [("excitation", m_v_bar.estimate), ("disturbance", m_w_bar.estimate)] {
            if !v.is_finite() {
                return Err(Error::MonteCarlo(format!("{name} log-MGF constant is not finite")));
            }
        }
        let sub = SubsampledContext::from_config(plant)?;
        let pair = PairConstants::new(&plant.a, &plant.b, plant.kappa)?;
        let q1 = pair.q1()?;
        let l1 = pair.radii()?;
        let (lambda_min_gamma, lambda_max_gamma) = bmsb.gamma_sb.sym_eig_bounds()?;
        let ctx = Self {
            sigma_sq: plant.disturbance.covariance().sym_eig_bounds()?.1.max(0.0),
            trace_sigma_v: plant.excitation.covariance().trace(),
            trace_sigma_w: plant.disturbance.covariance().trace(),
            norm_b: plant.b.spectral_norm(),
            logdet_gamma: bmsb.gamma_sb.logdet_spd()?,
            lambda_min_gamma,
            lambda_max_gamma,
            q1,
            m_q: l1.m_q,
            big_m_q: l1.big_m_q,
            plant: plant.clone(),
            sub,
            pair,
            m_v_bar,
            m_w_bar,
            bmsb,
        };
        ctx.check_error_curve_domain()?;
        Ok(ctx)
    }

    pub fn n(&self) -> usize {
        self.plant.n()
    }

    /// Regressor dimension `n + m`.
    pub fn d(&self) -> usize {
        self.plant.n() + self.plant.m()
    }

    pub fn kappa(&self) -> usize {
        self.plant.kappa
    }

    pub fn sat_radius(&self) -> f64 {
        self.plant.d()
    }

    /// `M_Vbar + M_Wbar`.
    pub fn noise_log_mgf(&self) -> f64 {
        self.m_v_bar.estimate + self.m_w_bar.estimate
    }

    pub fn radii(&self) -> PerturbationRadii {
        PerturbationRadii { m_q: self.m_q, big_m_q: self.big_m_q }
    }
}

/// `ln(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + (-(a - b).abs()).exp().ln_1p()
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_matches_direct() {
        assert!((log_add_exp(1.0, 2.0) - (1f64.exp() + 2f64.exp()).ln()).abs() < 1e-14);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        assert!((log_add_exp(800.0, 800.0) - (800.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn context_invariants() {
        let ctx = test_support::ctx_sys1();
        assert_eq!(ctx.m_q, ctx.q1 / 2.0);
        assert!(ctx.m_v_bar.estimate.is_finite() && ctx.m_w_bar.estimate.is_finite());
        assert!((ctx.sigma_sq - 1.0).abs() < 1e-12);
        assert!((ctx.trace_sigma_v - 0.16 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bmsb_validation() {
        let mut b = test_support::bmsb(3, 0.01, 0.5, 1);
        assert!(b.validate(3).is_ok());
        assert!(b.validate(2).is_err());
        b.p = 0.0;
        assert!(b.validate(3).is_err());
    }
}
