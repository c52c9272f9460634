//! Empirical coverage of the estimation-error bound and of the moment envelope.

use satadapt::config::Config;
use satadapt::bounds::BoundContext;
use satadapt::diagnostics::{coverage_estimation_bound, coverage_moment_envelope};
use std::path::Path;

fn load(name: &str) -> satadapt::Result<(Config, BoundContext)> {
    let cfg = Config::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name), &[])?;
    let ctx = BoundContext::build(&cfg.plant, cfg.require_bmsb()?.clone(), cfg.mgf_options())?;
    Ok((cfg, ctx))
}

fn main() -> satadapt::Result<()> {
    let delta = 0.2;
    let (cfg, ctx) = load("system1.json")?;
    let t0 = ctx.burn_in_t0(delta, &cfg.plant.x0)? as usize;
    let r = coverage_estimation_bound(&ctx, delta, 20, t0 + 500, 0, 0)?;
    println!("{}: {}/{} (target {})", r.label, r.successes, r.trials, r.target_probability);

    let (cfg, ctx) = load("margin.json")?;
    let eps = ctx.default_epsilon()?;
    let tau0 = ctx.moment_envelope(eps, delta, &cfg.plant.x0)?.tau0;
    let r = coverage_moment_envelope(&ctx, eps, delta, 20, &[tau0, 2 * tau0], 0, 0)?;
    for (c, env) in r.per_tau.iter().zip(&r.envelopes) {
        println!("{} (bound {env:.3}): {}/{}", c.label, c.successes, c.trials);
    }
    Ok(())
}
