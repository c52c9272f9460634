//! Monte Carlo check of the one-step drift inequality on the first reference plant.

use satadapt::bounds::{BmsbParams, BoundContext, MgfOptions};
use satadapt::diagnostics::{perturbed_estimate, verify_drift};
use satadapt::experiments::{random_theta0, ReferencePlant};
use satadapt::linalg::Matrix;
use satadapt::rng;

fn main() -> satadapt::Result<()> {
    let plant = ReferencePlant::Rotation.plant(1.0, vec![0.0, 0.0], random_theta0(2, 1, 0));
    let bmsb = BmsbParams { k: 1, gamma_sb: Matrix::identity(3).scale(0.01), p: 0.5 };
    let ctx = BoundContext::build(&plant, bmsb, MgfOptions { samples: 200_000, seed: 0 })?;
    let mut rng = rng::stream(0, 1);
    for eps in [0.0, ctx.m_q / 2.0] {
        let theta = if eps == 0.0 { plant.theta_true() } else { perturbed_estimate(&plant, eps, &mut rng) };
        let r = verify_drift(&ctx, eps, &theta, 20, 2000, &mut rng)?;
        println!("eps = {eps:.2e}: lambda = {:.3}, beta = {:.3}, {} of {} states violate", r.rates.lambda, r.rates.beta, r.violations, r.points.len());
    }
    Ok(())
}
