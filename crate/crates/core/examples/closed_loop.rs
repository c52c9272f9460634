//! One adaptive run on the first reference plant, printing the state norm and estimate error.

use satadapt::controller::run_adaptive;
use satadapt::experiments::{random_theta0, ReferencePlant};
use satadapt::linalg::vec;

fn main() -> satadapt::Result<()> {
    let plant = ReferencePlant::Rotation.plant(1.0, vec![0.0, 0.0], random_theta0(2, 1, 0));
    let theta = plant.theta_true();
    let traj = run_adaptive(&plant, 500, 0)?;
    for tau in [0, 5, 50, 500] {
        let err = (&traj.estimates[tau] - &theta).spectral_norm();
        println!("tau {tau:>3}  |X| = {:>8.3}  |theta - theta*| = {err:.4}", vec::norm(&traj.states[2 * tau]));
    }
    println!("max |U| = {:.4}", traj.max_control_norm());
    Ok(())
}
