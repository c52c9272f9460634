//! Randomized certification of the matrix and saturated-control perturbation inequalities.

use satadapt::diagnostics::certify_inequalities;
use satadapt::experiments::{random_theta0, ReferencePlant};
use satadapt::rng;

fn main() -> satadapt::Result<()> {
    let plant = ReferencePlant::QuarterTurn.plant(1.0, vec![0.0, 0.0], random_theta0(2, 1, 0));
    let r = certify_inequalities(&plant, 10_000, 100_000, &mut rng::stream(0, 0))?;
    for c in &r.checks {
        println!("{:<30} {:>7} samples  {} violations  worst ratio {:.4}", c.name, c.samples, c.violations, c.worst_ratio);
    }
    println!("{:<30} {:>7} points   {} violations", "convexity", r.convexity.points, r.convexity.violations);
    Ok(())
}
