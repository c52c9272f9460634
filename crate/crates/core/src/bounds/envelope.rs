//! Drift rates and the moment envelopes built on them.
//!
//! Everything here is in the log domain. `ln K` grows linearly with the
//! stabilization time and `e^{|x0|}` overflows for moderate states.

use serde::{Deserialize, Serialize};

use super::{log_add_exp, BoundContext};
use crate::error::{Error, Result};
use crate::linalg::vec;

/// Contraction and offset rates `lambda(eps)` and `beta(eps)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftRates {
    pub lambda: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub ln_lambda: f64,
    pub ln_beta: f64,
}

impl DriftRates {
    /// `ln(beta / (1 - lambda))`, infinite when `lambda >= 1`.
    pub fn ln_stationary(&self) -> f64 {
        if self.ln_lambda >= 0.0 {
            return f64::INFINITY;
        }
        self.ln_beta - (-self.ln_lambda.exp_m1()).ln()
    }
}

/// Saturation margin against the noise log-MGF constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginCheck {
    pub satisfied: bool,
    /// `D / |R_*^+|`.
    pub lhs: f64,
    /// `M_Vbar + M_Wbar`.
    pub rhs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplicitConstants {
    pub n1: f64,
    pub log_n2_x0: f64,
    pub n3: f64,
    pub lambda: f64,
    pub epsilon: f64,
}

impl ExplicitConstants {
    /// `ln(2/delta) + ln(N2 (2/delta)^N1 lambda^tau + N3)`.
    pub fn envelope(&self, delta: f64, tau: u64) -> f64 {
        let l2d = (2.0 / delta).ln();
        let lead = self.log_n2_x0 + self.n1 * l2d + tau as f64 * self.lambda.ln();
        l2d + log_add_exp(lead, self.n3.ln())
    }
}

/// Moment envelope with its transient constant resolved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEnvelope {
    pub epsilon: f64,
    pub delta: f64,
    /// `ln K(eps, delta/2, x0)`.
    pub ln_k: f64,
    pub ln_lambda: f64,
    /// `ln(beta / (1 - lambda))`.
    pub ln_stationary: f64,
    /// Stabilization time behind `ln_k`.
    pub tau0: u64,
}

impl MomentEnvelope {
    pub fn at(&self, tau: u64) -> f64 {
        (2.0 / self.delta).ln() + log_add_exp(self.ln_k + tau as f64 * self.ln_lambda, self.ln_stationary)
    }

    pub fn limit(&self) -> f64 {
        (2.0 / self.delta).ln() + self.ln_stationary
    }
}

impl BoundContext {
    pub fn check_margin(&self) -> MarginCheck {
        let lhs = self.sat_radius() / self.sub.norm_r_pinv;
        let rhs = self.noise_log_mgf();
        MarginCheck { satisfied: lhs > rhs, lhs, rhs }
    }

    pub fn drift_rates(&self, epsilon: f64) -> Result<DriftRates> {
        if !(0.0..=self.m_q).contains(&epsilon) {
            return Err(Error::EpsilonOutOfRange { eps: epsilon, reason: format!("requires 0 <= eps <= m_q = {}", self.m_q) });
        }
        let d = self.sat_radius();
        let ln_beta = self.sub.norm_r * self.big_m_q * d * epsilon + self.noise_log_mgf();
        let ln_lambda = ln_beta - d / self.sub.norm_r_pinv;
        Ok(DriftRates { lambda: ln_lambda.exp(), beta: ln_beta.exp(), epsilon, ln_lambda, ln_beta })
    }

    /// Open interval `(0, hi)` of epsilons with `lambda(eps) < 1` and `eps < m_q`.
    pub fn admissible_interval(&self) -> Option<(f64, f64)> {
        let margin = self.check_margin();
        if !margin.satisfied {
            return None;
        }
        let slope = self.sub.norm_r * self.big_m_q * self.sat_radius();
        let hi = self.m_q.min((margin.lhs - margin.rhs) / slope);
        (hi > 0.0).then_some((0.0, hi))
    }

    pub fn default_epsilon(&self) -> Result<f64> {
        let (lo, hi) = self.admissible_interval().ok_or_else(|| Error::EpsilonOutOfRange {
            eps: f64::NAN,
            reason: "saturation margin does not dominate the noise constants".into(),
        })?;
        Ok(0.5 * (lo + hi))
    }

    fn check_admissible(&self, epsilon: f64) -> Result<()> {
        match self.admissible_interval() {
            Some((lo, hi)) if epsilon > lo && epsilon < hi => Ok(()),
            Some((_, hi)) => Err(Error::EpsilonOutOfRange { eps: epsilon, reason: format!("admissible interval is (0, {hi})") }),
            None => Err(Error::EpsilonOutOfRange { eps: epsilon, reason: "no admissible epsilon exists".into() }),
        }
    }

    /// `|R_*| D + M_Vbar + M_Wbar`.
    fn worst_step_log_growth(&self) -> f64 {
        self.sub.norm_r * self.sat_radius() + self.noise_log_mgf()
    }

    /// `ln K(eps, delta, x0)`.
    pub fn transient_log_constant(&self, epsilon: f64, delta: f64, x0: &[f64]) -> Result<f64> {
        Ok(self.transient_parts(epsilon, delta, x0)?.0)
    }

    fn transient_parts(&self, epsilon: f64, delta: f64, x0: &[f64]) -> Result<(f64, u64, DriftRates)> {
        let rates = self.drift_rates(epsilon)?;
        if rates.ln_lambda >= 0.0 {
            return Err(Error::EpsilonOutOfRange { eps: epsilon, reason: format!("lambda = {} is not below 1", rates.lambda) });
        }
        let tau0 = self.stabilization_time(epsilon, delta, x0)?;
        let ln_k = vec::norm(x0) + tau0 as f64 * (self.worst_step_log_growth() - rates.ln_lambda);
        Ok((ln_k, tau0, rates))
    }

    pub fn moment_envelope(&self, epsilon: f64, delta: f64, x0: &[f64]) -> Result<MomentEnvelope> {
        self.check_admissible(epsilon)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
        }
        let (ln_k, tau0, rates) = self.transient_parts(epsilon, delta / 2.0, x0)?;
        Ok(MomentEnvelope { epsilon, delta, ln_k, ln_lambda: rates.ln_lambda, ln_stationary: rates.ln_stationary(), tau0 })
    }

    /// High-probability bound on `|Xbar_tau|` at sub-sampled time `tau`.
    pub fn moment_bound(&self, epsilon: f64, delta: f64, x0: &[f64], tau: u64) -> Result<f64> {
        Ok(self.moment_envelope(epsilon, delta, x0)?.at(tau))
    }

    /// Constants of the x0/delta-explicit envelope; `epsilon` defaults to the admissible midpoint.
    pub fn explicit_constants(&self, x0: &[f64], epsilon: Option<f64>) -> Result<ExplicitConstants> {
        let epsilon = match epsilon {
            Some(e) => e,
            None => self.default_epsilon()?,
        };
        self.check_admissible(epsilon)?;
        let rates = self.drift_rates(epsilon)?;
        let c = self.worst_step_log_growth() - rates.ln_lambda;
        let l = self.stabilization_constants(epsilon)?;
        Ok(ExplicitConstants {
            n1: c * l.l1,
            log_n2_x0: vec::norm(x0) + c * l.l2(x0),
            n3: rates.ln_stationary().exp(),
            lambda: rates.lambda,
            epsilon,
        })
    }

    /// Logarithm of the crude moment bound `e^{|x0|} e^{tau(|R_*| D + M_Vbar + M_Wbar)}`.
    pub fn worst_case_log_moment(&self, x0: &[f64], tau: u64) -> f64 {
        vec::norm(x0) + tau as f64 * self.worst_step_log_growth()
    }

    /// Tail bound under a time-varying estimation radius `h(tau0), .., h(tau - 1)`.
    pub fn varying_radius_envelope(&self, h: &[f64], gamma: f64, log_moment_tau0: f64) -> Result<f64> {
        if h.is_empty() {
            return Err(Error::InvalidArgument("tau must exceed tau0".into()));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        let mut acc = log_moment_tau0;
        for &hi in h {
            let r = self.drift_rates(hi)?;
            acc = log_add_exp(acc + r.ln_lambda, r.ln_beta);
        }
        Ok(acc + (1.0 / gamma).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;

    #[test]
    fn drift_rate_identities() {
        let ctx = ctx_sys1();
        let r0 = ctx.drift_rates(0.0).unwrap();
        let expect = -ctx.sat_radius() / ctx.sub.norm_r_pinv + ctx.noise_log_mgf();
        assert!((r0.ln_lambda - expect).abs() < 1e-14);
        for eps in [0.0, ctx.m_q / 3.0, ctx.m_q] {
            let r = ctx.drift_rates(eps).unwrap();
            let ratio = r.lambda / r.beta;
            assert!((ratio - (-ctx.sat_radius() / ctx.sub.norm_r_pinv).exp()).abs() < 1e-12 * ratio);
        }
        assert!(ctx.drift_rates(ctx.m_q * 1.01).is_err());
        assert!(ctx.drift_rates(-1e-9).is_err());
    }

    #[test]
    fn lambda_below_one_iff_inside_threshold() {
        let ctx = ctx_margin();
        let m = ctx.check_margin();
        assert!(m.satisfied);
        let thr = (m.lhs - m.rhs) / (ctx.sub.norm_r * ctx.big_m_q * ctx.sat_radius());
        for k in 1..50 {
            let eps = ctx.m_q * k as f64 / 50.0;
            assert_eq!(ctx.drift_rates(eps).unwrap().lambda < 1.0, eps < thr, "eps {eps}");
        }
    }

    #[test]
    fn system1_margin_reported() {
        let m = ctx_sys1().check_margin();
        assert!(m.lhs.is_finite() && m.rhs.is_finite());
        assert_eq!(m.satisfied, m.lhs > m.rhs);
    }

    #[test]
    fn transient_constant_structure() {
        let ctx = ctx_margin();
        let eps = ctx.default_epsilon().unwrap();
        let r = ctx.drift_rates(eps).unwrap();
        let tau0 = ctx.stabilization_time(eps, 0.2, &[0.0]).unwrap();
        let ln_k = ctx.transient_log_constant(eps, 0.2, &[0.0]).unwrap();
        let expect = tau0 as f64 * (ctx.sub.norm_r * ctx.sat_radius() + ctx.noise_log_mgf() - r.ln_lambda);
        assert!((ln_k - expect).abs() <= 1e-12 * expect.abs());
        assert!(ctx.transient_log_constant(eps, 0.2, &[2.0]).unwrap() > ln_k);
        // K lambda^tau0 dominates the crude moment bound at tau0.
        assert!(ln_k + tau0 as f64 * r.ln_lambda >= ctx.worst_case_log_moment(&[0.0], tau0) - 1e-9);
    }

    #[test]
    fn moment_bound_shape() {
        let ctx = ctx_margin();
        let eps = ctx.default_epsilon().unwrap();
        let env = ctx.moment_envelope(eps, 0.2, &[0.5]).unwrap();
        let mut prev = f64::INFINITY;
        for tau in [0u64, 1, 10, 100, 10_000] {
            let v = env.at(tau);
            assert!(v < prev);
            prev = v;
        }
        assert!((env.at(100_000_000) - env.limit()).abs() < 1e-9);
        assert!(env.at(0) > 0.5);
        let (_, hi) = ctx.admissible_interval().unwrap();
        assert!(ctx.moment_bound(hi, 0.2, &[0.5], 0).is_err());
        assert!(ctx.moment_bound(0.0, 0.2, &[0.5], 0).is_err());
    }

    #[test]
    fn explicit_constants_relations() {
        let ctx = ctx_margin();
        let x0 = [1.0];
        let t1 = ctx.explicit_constants(&x0, None).unwrap();
        let r = ctx.drift_rates(t1.epsilon).unwrap();
        assert!((t1.n3 - r.beta / (1.0 - r.lambda)).abs() <= 1e-12 * t1.n3);
        assert!((t1.envelope(0.2, u64::MAX / 2) - (t1.n3.ln() + 10f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn sys1_has_no_admissible_epsilon_when_margin_fails() {
        let ctx = ctx_sys1();
        if !ctx.check_margin().satisfied {
            assert!(ctx.admissible_interval().is_none());
            assert!(ctx.explicit_constants(&[0.0, 0.0], None).is_err());
        }
    }

    #[test]
    fn varying_radius_reductions() {
        let ctx = ctx_margin();
        let eps = ctx.m_q / 4.0;
        let r = ctx.drift_rates(eps).unwrap();
        let one = ctx.varying_radius_envelope(&[eps], 0.1, 2.0).unwrap();
        let expect = (1.0f64 / 0.1).ln() + (r.lambda * 2f64.exp() + r.beta).ln();
        assert!((one - expect).abs() < 1e-12);
        // Constant radius gives the geometric form.
        let k = 30;
        let many = ctx.varying_radius_envelope(&vec![eps; k], 0.1, 2.0).unwrap();
        let geo: f64 = r.lambda.powi(k as i32) * 2f64.exp() + r.beta * (1.0 - r.lambda.powi(k as i32)) / (1.0 - r.lambda);
        assert!((many - (10f64.ln() + geo.ln())).abs() < 1e-10);
        assert!(ctx.varying_radius_envelope(&vec![eps; k], 0.01, 2.0).unwrap() > many);
        assert!(ctx.varying_radius_envelope(&[ctx.m_q * 1.1], 0.1, 2.0).is_err());
    }

    #[test]
    fn worst_case_moment_linear() {
        let ctx = ctx_sys1();
        let x0 = [3.0, 4.0];
        assert_eq!(ctx.worst_case_log_moment(&x0, 0), 5.0);
        let a = ctx.worst_case_log_moment(&x0, 1) - 5.0;
        assert!((ctx.worst_case_log_moment(&x0, 7) - 5.0 - 7.0 * a).abs() < 1e-12);
    }
}
