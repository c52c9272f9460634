//! Least-squares error envelope, burn-in time and stabilization time.
//!
//! Both times are "first index after which a predicate holds forever". Each
//! predicate has the form `phi(T) >= 0` with
//!
//! ```text
//! phi(T) = s T - c - 2(d+1) ln(T+1) - d ln(alpha + b T^2)
//! ```
//!
//! which is convex for `T >= sqrt(alpha / b)`. Indices below that point are
//! scanned directly; above it the failing set is an interval located by
//! doubling and bisection. The analytic cap is used only as a search limit.

use serde::{Deserialize, Serialize};

use super::BoundContext;
use crate::error::{Error, Result};
use crate::linalg::vec;

/// `3(-1 + pi^2/6)`.
pub fn union_bound_weight() -> f64 {
    3.0 * (std::f64::consts::PI.powi(2) / 6.0 - 1.0)
}

/// Largest index range scanned exhaustively before the convex regime.
const MAX_BRUTE: u64 = 100_000_000;

/// Internal constants of the stabilization-time bound, for one `epsilon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizationConstants {
    pub epsilon: f64,
    pub kappa: usize,
    pub d: usize,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub l1: f64,
    pub l3: f64,
    pub l5: f64,
    /// `f3(x0) - 4|x0|^2`.
    f3_base: f64,
    /// `max(K1, K4^2 / (eps^2 lambda_min(Gamma)))`.
    scale: f64,
    logdet_gamma: f64,
    lambda_min_gamma: f64,
}

impl StabilizationConstants {
    pub fn f3(&self, x0: &[f64]) -> f64 {
        4.0 * vec::dot(x0, x0) + self.f3_base
    }

    pub fn f4(&self, delta: f64, x0: &[f64]) -> f64 {
        let d = self.d as f64;
        let f1 = union_bound_weight() / delta;
        self.k1 * ((d + 1.0) * f1.ln() + self.k2 + d * self.f3(x0).ln() - self.logdet_gamma)
    }

    pub fn f5(&self, delta: f64, x0: &[f64]) -> f64 {
        let d = self.d as f64;
        let f1 = union_bound_weight() / delta;
        let coef = self.k4 * self.k4 / (self.epsilon * self.epsilon * self.lambda_min_gamma);
        coef * (self.k5 + (d + 1.0) * f1.ln() + d * self.f3(x0).ln() - self.logdet_gamma)
    }

    pub fn l4(&self, x0: &[f64]) -> f64 {
        let d = self.d as f64;
        self.scale * ((d + 1.0) * union_bound_weight().ln() + d * self.f3(x0).ln() + self.k5.max(self.k2))
    }

    pub fn l2(&self, x0: &[f64]) -> f64 {
        (self.l3 + self.l4(x0)) / self.kappa as f64
    }

    /// `L2(x0) + L1 ln(1/delta)`.
    pub fn tau_bound(&self, delta: f64, x0: &[f64]) -> f64 {
        self.l2(x0) + self.l1 * (1.0 / delta).ln()
    }
}

/// `2K ln(2K) - 2K + 1`.
fn tangent_offset(k: f64) -> f64 {
    2.0 * k * (2.0 * k).ln() - 2.0 * k + 1.0
}

/// `phi` on sub-sampled indices `i`, with `T = kappa i`.
#[derive(Clone, Copy, Debug)]
struct Persistence {
    slope: f64,
    offset: f64,
    d: f64,
    alpha: f64,
    b: f64,
    kappa: f64,
}

impl Persistence {
    fn phi(&self, i: u64) -> f64 {
        let t = self.kappa * i as f64;
        self.slope * t - self.offset - 2.0 * (self.d + 1.0) * (t + 1.0).ln() - self.d * (self.alpha + self.b * t * t).ln()
    }

    /// `phi(i + 1) - phi(i)` without cancellation.
    fn forward_diff(&self, i: u64) -> f64 {
        let t = self.kappa * i as f64;
        let k = self.kappa;
        self.slope * k
            - 2.0 * (self.d + 1.0) * (k / (t + 1.0)).ln_1p()
            - self.d * (self.b * k * (2.0 * t + k) / (self.alpha + self.b * t * t)).ln_1p()
    }

    fn convex_from(&self) -> u64 {
        ((self.alpha / self.b).sqrt() / self.kappa).ceil() as u64
    }

    /// Smallest `i0 >= 1` with `phi(i) >= 0` for every `i >= i0`.
    fn first_persistent(&self, cap: f64) -> Result<u64> {
        let limit = if cap.is_finite() && cap > 0.0 { (cap.ceil() as u64).saturating_mul(2).saturating_add(16) } else { u64::MAX / 4 };
        let i_m = self.convex_from().max(1);
        if i_m > MAX_BRUTE {
            return Err(Error::CapExceeded(format!("pre-convex range {i_m} too long to scan")));
        }
        let mut last_fail = None;
        for i in 1..i_m {
            if self.phi(i) < 0.0 {
                last_fail = Some(i);
            }
        }
        let i_star = first_true(i_m, limit, |i| self.forward_diff(i) >= 0.0)
            .ok_or_else(|| Error::CapExceeded(format!("no minimum below {limit}")))?;
        if self.phi(i_star) >= 0.0 {
            return Ok(last_fail.map_or(1, |f| f + 1));
        }
        first_true(i_star + 1, limit, |i| self.phi(i) >= 0.0)
            .ok_or_else(|| Error::CapExceeded(format!("predicate still failing at {limit}")))
    }
}

/// Smallest `i >= lo` with `pred(i)`, for `pred` monotone false-then-true.
fn first_true(lo: u64, limit: u64, pred: impl Fn(u64) -> bool) -> Option<u64> {
    if pred(lo) {
        return Some(lo);
    }
    let mut bad = lo;
    let mut step = 1u64;
    let good = loop {
        let probe = bad.checked_add(step)?;
        if probe > limit {
            if pred(limit) {
                break limit;
            }
            return None;
        }
        if pred(probe) {
            break probe;
        }
        bad = probe;
        step = step.saturating_mul(2);
    };
    let (mut lo, mut hi) = (bad, good);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

impl BoundContext {
    fn check_delta(delta: f64) -> Result<()> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(())
    }

    /// `alpha` such that `f2(x0, T) = alpha + b T^2`.
    fn f2_alpha(&self, x0: &[f64]) -> f64 {
        let dd = self.sat_radius().powi(2);
        4.0 * vec::dot(x0, x0) + 2.0 * (dd + self.trace_sigma_v) + self.lambda_max_gamma
    }

    fn f2_b(&self) -> f64 {
        let dd = self.sat_radius().powi(2);
        4.0 * (self.norm_b * self.norm_b * (dd + self.trace_sigma_v) + self.trace_sigma_w)
    }

    pub fn f2(&self, x0: &[f64], t: f64) -> f64 {
        self.f2_alpha(x0) + self.f2_b() * t * t
    }

    fn k1(&self) -> f64 {
        10.0 * self.bmsb.k as f64 / (self.bmsb.p * self.bmsb.p)
    }

    fn k2(&self) -> f64 {
        2.0 * self.d() as f64 * (10.0 / self.bmsb.p).ln()
    }

    fn k4(&self) -> f64 {
        90.0 * self.sigma_sq.sqrt() / self.bmsb.p
    }

    fn k5(&self) -> f64 {
        self.n() as f64 + self.d() as f64 * (10.0 / self.bmsb.p).ln()
    }

    /// Numerator of the squared error envelope, before dividing by
    /// `T lambda_min(Gamma)` and scaling by `K4^2`.
    fn error_radicand(&self, t: f64, delta: f64, x0: &[f64]) -> f64 {
        let d = self.d() as f64;
        let ln_c = (union_bound_weight() / delta).ln() + 2.0 * (t + 1.0).ln();
        self.k5() + d * (ln_c + self.f2(x0, t).ln()) - self.logdet_gamma + ln_c
    }

    pub(crate) fn check_error_curve_domain(&self) -> Result<()> {
        let r = self.error_radicand(1.0, 1.0, &vec![0.0; self.n()]);
        if !(r > 0.0) {
            return Err(Error::Config(format!(
                "gamma_sb is too large for the error envelope (log-det term {r})"
            )));
        }
        Ok(())
    }

    /// High-probability bound on `|theta_hat_T - theta|` for every `T >= T0`.
    pub fn estimation_error(&self, t: u64, delta: f64, x0: &[f64]) -> Result<f64> {
        Self::check_delta(delta)?;
        if t == 0 {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        let t = t as f64;
        let r = self.error_radicand(t, delta, x0);
        Ok(self.k4() * (r / (t * self.lambda_min_gamma)).sqrt())
    }

    /// Predicate slack of the burn-in condition at `T`; nonnegative iff it holds.
    pub fn burn_in_slack(&self, t: u64, delta: f64, x0: &[f64]) -> f64 {
        let p = self.burn_in_persistence(delta, x0);
        p.phi(t) * self.k1()
    }

    fn burn_in_persistence(&self, delta: f64, x0: &[f64]) -> Persistence {
        let d = self.d() as f64;
        let f1 = union_bound_weight() / delta;
        Persistence {
            slope: 1.0 / self.k1(),
            offset: (d + 1.0) * f1.ln() + self.k2() - self.logdet_gamma,
            d,
            alpha: self.f2_alpha(x0),
            b: self.f2_b(),
            kappa: 1.0,
        }
    }

    fn tail_persistence(&self, epsilon: f64, delta: f64, x0: &[f64]) -> Persistence {
        let d = self.d() as f64;
        let f1 = union_bound_weight() / delta;
        let k4 = self.k4();
        Persistence {
            slope: epsilon * epsilon * self.lambda_min_gamma / (k4 * k4),
            offset: self.k5() + (d + 1.0) * f1.ln() - self.logdet_gamma,
            d,
            alpha: self.f2_alpha(x0),
            b: self.f2_b(),
            kappa: self.kappa() as f64,
        }
    }

    /// Minimal `T0'` such that the burn-in condition holds for all `T >= T0'`.
    pub fn burn_in_t0(&self, delta: f64, x0: &[f64]) -> Result<u64> {
        Self::check_delta(delta)?;
        let l = self.stabilization_constants(1.0)?;
        let cap = l.k3.max(1.0);
        let cap = tangent_offset(cap) + 2.0 * l.f4(delta, x0);
        self.burn_in_persistence(delta, x0).first_persistent(cap)
    }

    /// Minimal `tau >= 1` with `e(kappa i) <= epsilon` for every `i >= tau`.
    pub fn error_tail_index(&self, epsilon: f64, delta: f64, x0: &[f64]) -> Result<u64> {
        Self::check_delta(delta)?;
        if !(epsilon > 0.0) {
            return Err(Error::EpsilonOutOfRange { eps: epsilon, reason: "must be positive".into() });
        }
        if self.sigma_sq == 0.0 {
            return Ok(1);
        }
        let l = self.stabilization_constants(epsilon)?;
        let cap = (tangent_offset(l.k6.max(1.0)) + 2.0 * l.f5(delta, x0)) / self.kappa() as f64;
        self.tail_persistence(epsilon, delta, x0).first_persistent(cap)
    }

    /// Sub-sampled time after which the burn-in has passed and the error envelope stays below `epsilon`.
    pub fn stabilization_time(&self, epsilon: f64, delta: f64, x0: &[f64]) -> Result<u64> {
        if !(epsilon > 0.0 && epsilon <= self.m_q) {
            return Err(Error::EpsilonOutOfRange { eps: epsilon, reason: format!("requires 0 < eps <= m_q = {}", self.m_q) });
        }
        let t0 = self.burn_in_t0(delta, x0)?;
        let kappa = self.kappa() as u64;
        Ok(t0.div_ceil(kappa).max(self.error_tail_index(epsilon, delta, x0)?))
    }

    pub fn stabilization_constants(&self, epsilon: f64) -> Result<StabilizationConstants> {
        if !(epsilon > 0.0) {
            return Err(Error::EpsilonOutOfRange { eps: epsilon, reason: "must be positive".into() });
        }
        let d = self.d();
        let df = d as f64;
        let k1 = self.k1();
        let k2 = self.k2();
        let k3 = k1 * (4.0 * df + 2.0);
        let k4 = self.k4();
        let k5 = self.k5();
        let coef = k4 * k4 / (epsilon * epsilon * self.lambda_min_gamma);
        let k6 = coef * (4.0 * df + 2.0);
        let scale = k1.max(coef);
        let l3 = if k6 > 0.0 { tangent_offset(k3).max(tangent_offset(k6)) } else { tangent_offset(k3) };
        let l5 = scale * (df + 1.0);
        let dd = self.sat_radius().powi(2);
        let f3_base = 2.0 * (dd + self.trace_sigma_v)
            + 4.0 * (self.norm_b * self.norm_b * (dd + self.trace_sigma_v) + self.trace_sigma_w)
            + self.lambda_max_gamma;
        Ok(StabilizationConstants {
            epsilon,
            kappa: self.kappa(),
            d,
            k1,
            k2,
            k3,
            k4,
            k5,
            k6,
            l1: l5 / self.kappa() as f64,
            l3,
            l5,
            f3_base,
            scale,
            logdet_gamma: self.logdet_gamma,
            lambda_min_gamma: self.lambda_min_gamma,
        })
    }
}
