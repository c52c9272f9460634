//! Unconditional small-ball proxy computed from closed-loop covariates.

use satadapt::diagnostics::{bmsb_proxy, covariates};
use satadapt::experiments::{random_theta0, run_trial, ExperimentConfig, ReferencePlant};
use satadapt::controller::ControlMode;
use satadapt::linalg::Matrix;
use satadapt::rng;

fn main() -> satadapt::Result<()> {
    let plant = ReferencePlant::DampedRotation.plant(1.0, vec![0.0, 0.0], random_theta0(2, 1, 0));
    let cfg = ExperimentConfig { plant, trials: 5, horizon: 400, master_seed: 0, mode: ControlMode::Adaptive, bmsb: None };
    let data = (0..cfg.trials).map(|i| Ok(covariates(&run_trial(&cfg, i)?))).collect::<satadapt::Result<Vec<_>>>()?;
    for g in [0.001, 0.01, 0.1] {
        let p = bmsb_proxy(&data, 2, &Matrix::identity(3).scale(g), 200, &mut rng::stream(0, 0))?;
        println!("gamma = {g}: p_hat = {:.3} over {} windows", p.p_hat, p.windows);
    }
    Ok(())
}
