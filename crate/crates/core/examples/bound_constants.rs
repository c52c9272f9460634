//! Closed-form constants for a plant that meets the saturation margin.

use satadapt::bounds::{BmsbParams, BoundContext, MgfOptions};
use satadapt::linalg::Matrix;
use satadapt::system::{NoiseSpec, PlantConfig};

fn main() -> satadapt::Result<()> {
    let plant = PlantConfig {
        a: Matrix::identity(1),
        b: Matrix::identity(1),
        kappa: 1,
        disturbance: NoiseSpec::isotropic(1, 1e-8),
        excitation: NoiseSpec::uniform_ball(1, 0.5),
        u_max: 5.0,
        c: 0.5,
        x0: vec![0.0],
        theta0: Matrix::from_rows(&[&[0.5, 0.5]]),
    };
    let bmsb = BmsbParams { k: 2, gamma_sb: Matrix::identity(2).scale(0.01), p: 0.3 };
    let ctx = BoundContext::build(&plant, bmsb, MgfOptions::default())?;
    println!("q1 = {:.5}, m_q = {:.5}, M_q = {:.3}", ctx.q1, ctx.m_q, ctx.big_m_q);
    println!("margin: {:?}", ctx.check_margin());
    let eps = ctx.default_epsilon()?;
    let rates = ctx.drift_rates(eps)?;
    println!("eps = {eps:.5}: lambda = {:.4}, beta = {:.4}", rates.lambda, rates.beta);
    let delta = 0.2;
    println!("burn-in T0 = {}", ctx.burn_in_t0(delta, &plant.x0)?);
    let env = ctx.moment_envelope(eps, delta, &plant.x0)?;
    println!("stabilization time = {}, ln K = {:.1}", env.tau0, env.ln_k);
    for tau in [0, env.tau0, 2 * env.tau0, 4 * env.tau0] {
        println!("  |Xbar_{tau}| <= {:.3}", env.at(tau));
    }
    Ok(())
}
