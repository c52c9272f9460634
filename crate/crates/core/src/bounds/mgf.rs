//! Log moment generating constants `ln E[exp |map * stack|]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{vec, Matrix};
use crate::rng::Rng;
use crate::system::NoiseSpec;

pub const MIN_SAMPLES: usize = 1000;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgfEstimate {
    pub estimate: f64,
    /// Half-width of a 95% interval; zero for exact values.
    pub ci_halfwidth: f64,
    /// Number of Monte Carlo draws, zero when a closed form was used.
    pub samples: usize,
}

impl MgfEstimate {
    pub fn exact(estimate: f64) -> Self {
        Self { estimate, ci_halfwidth: 0.0, samples: 0 }
    }
}

/// `ln((e^a - 1)/a)`: the log-MGF of `|v|` for `v` uniform on `[-a, a]`.
pub fn uniform_interval_log_mgf(a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    (a.exp_m1() / a).ln()
}

/// `log(mean(exp(y)))` with a delta-method 95% half-width.
pub fn log_mean_exp(ys: &[f64]) -> Result<MgfEstimate> {
    if ys.is_empty() {
        return Err(Error::MonteCarlo("no draws".into()));
    }
    let ymax = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !ymax.is_finite() {
        return Err(Error::MonteCarlo("non-finite draw".into()));
    }
    let n = ys.len() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for &y in ys {
        let e = (y - ymax).exp();
        s1 += e;
        s2 += e * e;
    }
    let mean = s1 / n;
    let var = ((s2 / n) - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(MgfEstimate {
        estimate: ymax + mean.ln(),
        ci_halfwidth: Z95 * (var / n).sqrt() / mean,
        samples: ys.len(),
    })
}

/// Estimates `ln E[exp |map * (x_1; ..; x_blocks)|]` with each `x_i` an
/// independent draw from `spec`.
pub fn log_mgf_estimate(spec: &NoiseSpec, blocks: usize, map: &Matrix, samples: usize, rng: &mut Rng) -> Result<MgfEstimate> {
    if map.cols() != blocks * spec.dim() {
        return Err(Error::Dimension(format!(
            "map has {} columns for {blocks} blocks of dim {}",
            map.cols(),
            spec.dim()
        )));
    }
    if spec.is_zero() || map.max_abs() == 0.0 {
        return Ok(MgfEstimate::exact(0.0));
    }
    // A single scalar uniform coordinate has a closed form.
    if let NoiseSpec::UniformBall { dim: 1, bound } = spec {
        if blocks == 1 {
            return Ok(MgfEstimate::exact(uniform_interval_log_mgf(map.spectral_norm() * bound)));
        }
    }
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("at least {MIN_SAMPLES} samples required")));
    }
    let ys = draw_norms(spec, blocks, map, samples, rng);
    log_mean_exp(&ys)
}

/// `|map * stack|` over fresh draws.
pub fn draw_norms(spec: &NoiseSpec, blocks: usize, map: &Matrix, samples: usize, rng: &mut Rng) -> Vec<f64> {
    let sampler = spec.sampler();
    let mut stack = Vec::with_capacity(blocks * spec.dim());
    (0..samples)
        .map(|_| {
            stack.clear();
            for _ in 0..blocks {
                stack.extend(sampler.sample(rng));
            }
            vec::norm(&map.apply(&stack))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_noise_is_exactly_zero() {
        let est = log_mgf_estimate(&NoiseSpec::zero(2), 2, &Matrix::identity(4).columns(0, 4), 10, &mut rng::stream(0, 0)).unwrap();
        assert_eq!(est, MgfEstimate::exact(0.0));
    }

    #[test]
    fn scalar_uniform_closed_form() {
        let c: f64 = 0.4;
        let expect = ((c.exp() - 1.0) / c).ln();
        assert!((expect - 0.2067).abs() < 1e-4);
        let exact = log_mgf_estimate(&NoiseSpec::uniform_ball(1, c), 1, &Matrix::identity(1), 0, &mut rng::stream(0, 0)).unwrap();
        assert!((exact.estimate - expect).abs() < 1e-15);
        // Monte Carlo path lands inside its own interval around the closed form.
        let ys = draw_norms(&NoiseSpec::uniform_ball(1, c), 1, &Matrix::identity(1), 200_000, &mut rng::stream(1, 0));
        let mc = log_mean_exp(&ys).unwrap();
        assert!((mc.estimate - expect).abs() <= mc.ci_halfwidth * 1.5, "{mc:?}");
    }

    #[test]
    fn doubling_the_map_increases_the_estimate() {
        let spec = NoiseSpec::isotropic(2, 1.0);
        let ys = draw_norms(&spec, 1, &Matrix::identity(2), 5000, &mut rng::stream(2, 0));
        let doubled: Vec<f64> = ys.iter().map(|y| 2.0 * y).collect();
        assert!(log_mean_exp(&doubled).unwrap().estimate > log_mean_exp(&ys).unwrap().estimate);
    }
}
