//! Perturbation constants for the certainty-equivalent gain.
//!
//! For estimates within an `eps` spectral-norm ball of the true `(A, B)`,
//! these scalars bound how far powers, products, the reachability matrix,
//! its pseudoinverse and finally the deadbeat gain can move. The critical
//! radii `q3`, `q4` are suprema of sublevel sets and are found by bisection,
//! using that `q5` and `q6` are nondecreasing in `eps`.

use serde::{Deserialize, Serialize};

use crate::controller::deadbeat_gain;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::system::{is_reachable, reachability_matrix};

/// Relative width at which bisection stops.
pub const BISECTION_TOL: f64 = 1e-12;

/// Bound on `|M2^i - M1^i|` for `|M2 - M1| <= delta`.
pub fn q10(delta: f64, i: usize, m: &Matrix) -> Result<f64> {
    if i == 0 {
        return Err(Error::InvalidArgument("q10 is defined for i >= 1".into()));
    }
    let norms: Vec<f64> = (0..i).map(|k| m.pow(k).spectral_norm()).collect();
    Ok(q10_from_norms(delta, i, &norms, m.spectral_norm()))
}

/// `norms[k] = |M^k|` for `k < i`.
fn q10_from_norms(delta: f64, i: usize, norms: &[f64], norm_m: f64) -> f64 {
    let mut q = delta;
    for k in 2..=i {
        q = q * delta + norms[k - 1] * delta + norm_m * q;
    }
    q
}

/// Bound on `|M2^i N2 - M1^i N1|` for perturbations of size `delta`.
pub fn q9(delta: f64, i: usize, m: &Matrix, n: &Matrix) -> f64 {
    if i == 0 {
        return delta;
    }
    let q = q10(delta, i, m).expect("i >= 1");
    q * delta + m.pow(i).spectral_norm() * delta + n.spectral_norm() * q
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbChain {
    pub q5: f64,
    pub q6: f64,
    pub q7: f64,
    pub q8: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRadii {
    pub m_q: f64,
    pub big_m_q: f64,
}

/// Norms of a reachable pair, cached for repeated evaluation.
#[derive(Clone, Debug)]
pub struct PairConstants {
    pub kappa: usize,
    /// `|A^k|` for `k = 0..=kappa`.
    a_pow_norms: Vec<f64>,
    norm_a: f64,
    norm_b: f64,
    pub norm_r: f64,
    pub norm_r_pinv: f64,
    pub norm_rrt_inv: f64,
    pub sigma_min_rrt: f64,
    pub sigma_min_g: f64,
}

impl PairConstants {
    pub fn new(a: &Matrix, b: &Matrix, kappa: usize) -> Result<Self> {
        let (ok, smin) = is_reachable(a, b, kappa)?;
        if !ok {
            return Err(Error::NotReachable(smin));
        }
        let r = reachability_matrix(a, b, kappa)?;
        let rrt = &r * &r.transpose();
        let sigma_min_rrt = rrt.sigma_min();
        Ok(Self {
            kappa,
            a_pow_norms: (0..=kappa).map(|k| a.pow(k).spectral_norm()).collect(),
            norm_a: a.spectral_norm(),
            norm_b: b.spectral_norm(),
            norm_r: r.spectral_norm(),
            norm_r_pinv: r.pinv().spectral_norm(),
            norm_rrt_inv: 1.0 / sigma_min_rrt,
            sigma_min_rrt,
            sigma_min_g: deadbeat_gain(a, b, kappa)?.sigma_min(),
        })
    }

    fn q10(&self, eps: f64, i: usize) -> f64 {
        q10_from_norms(eps, i, &self.a_pow_norms, self.norm_a)
    }

    fn q9(&self, eps: f64, i: usize) -> f64 {
        if i == 0 {
            return eps;
        }
        let q = self.q10(eps, i);
        q * eps + self.a_pow_norms[i] * eps + self.norm_b * q
    }

    /// `sum_{i < kappa} q9(eps, i, A, B)`: bound on the reachability matrix error.
    pub fn reach_error(&self, eps: f64) -> f64 {
        (0..self.kappa).map(|i| self.q9(eps, i)).sum()
    }

    pub fn q6(&self, eps: f64) -> f64 {
        let s = self.reach_error(eps);
        s * s + 2.0 * self.norm_r * s
    }

    pub fn chain(&self, eps: f64) -> Result<PerturbChain> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::EpsilonOutOfRange { eps, reason: "must be finite and nonnegative".into() });
        }
        let s = self.reach_error(eps);
        let q6 = s * s + 2.0 * self.norm_r * s;
        let denom = 1.0 - self.norm_rrt_inv * q6;
        if denom <= 0.0 {
            return Err(Error::EpsilonOutOfRange { eps, reason: "epsilon too large".into() });
        }
        let q8 = self.norm_rrt_inv * self.norm_rrt_inv * q6 / denom;
        let q7 = s * q8 + self.norm_r * q8 + self.norm_rrt_inv * s;
        let qk = self.q10(eps, self.kappa);
        let q5 = q7 * qk + self.norm_r_pinv * qk + self.a_pow_norms[self.kappa] * q7;
        Ok(PerturbChain { q5, q6, q7, q8 })
    }

    /// Gain error bound, `+inf` where the chain is undefined.
    pub fn q5(&self, eps: f64) -> f64 {
        self.chain(eps).map_or(f64::INFINITY, |c| c.q5)
    }

    /// `sup { a > 0 : q6(a) < sigma_min(R R^T) }`.
    pub fn q3(&self) -> Result<f64> {
        let target = self.sigma_min_rrt;
        sup_below(|e| self.q6(e), target)
    }

    /// `sup { a > 0 : q5(a) < sigma_min(g) }`.
    pub fn q4(&self) -> Result<f64> {
        if !(self.sigma_min_g > 0.0) {
            return Err(Error::DegenerateRadius("deadbeat gain is rank deficient".into()));
        }
        sup_below(|e| self.q5(e), self.sigma_min_g)
    }

    pub fn q1(&self) -> Result<f64> {
        Ok(self.q3()?.min(self.q4()?))
    }

    /// Saturated-control error bound at saturation radius `r`.
    pub fn q2(&self, eps: f64, r: f64) -> Result<f64> {
        let q1 = self.q1()?;
        self.q2_below(eps, r, q1)
    }

    pub(crate) fn q2_below(&self, eps: f64, r: f64, q1: f64) -> Result<f64> {
        if !(eps >= 0.0 && eps < q1) {
            return Err(Error::EpsilonOutOfRange { eps, reason: format!("requires 0 <= eps < q1 = {q1}") });
        }
        let q5 = self.chain(eps)?.q5;
        Ok(2.0 * r * q5 / (self.sigma_min_g - q5))
    }

    pub fn radii(&self) -> Result<PerturbationRadii> {
        let q1 = self.q1()?;
        let m_q = q1 / 2.0;
        let q5 = self.chain(m_q)?.q5;
        let gap = self.sigma_min_g - q5;
        if !(gap > 0.0) {
            return Err(Error::DegenerateRadius(format!("sigma_min(g) - q5(m_q) = {gap}")));
        }
        Ok(PerturbationRadii { m_q, big_m_q: 4.0 * q5 / (q1 * gap) })
    }
}

/// Supremum of `{a > 0 : f(a) < target}` for nondecreasing `f` with `f(0) = 0`.
fn sup_below(f: impl Fn(f64) -> f64, target: f64) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::DegenerateRadius(format!("threshold {target} is not positive")));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut guard = 0;
    while f(hi) < target {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::DegenerateRadius("no crossing found".into()));
        }
    }
    while hi - lo > BISECTION_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !(lo > 0.0) {
        return Err(Error::DegenerateRadius("critical radius collapsed to zero".into()));
    }
    Ok(lo)
}

pub fn q1(kappa: usize, a: &Matrix, b: &Matrix) -> Result<f64> {
    PairConstants::new(a, b, kappa)?.q1()
}

pub fn q2(eps: f64, r: f64, kappa: usize, a: &Matrix, b: &Matrix) -> Result<f64> {
    PairConstants::new(a, b, kappa)?.q2(eps, r)
}

pub fn perturb_chain(eps: f64, kappa: usize, a: &Matrix, b: &Matrix) -> Result<PerturbChain> {
    PairConstants::new(a, b, kappa)?.chain(eps)
}

pub fn perturbation_radii(kappa: usize, a: &Matrix, b: &Matrix) -> Result<PerturbationRadii> {
    PairConstants::new(a, b, kappa)?.radii()
}
