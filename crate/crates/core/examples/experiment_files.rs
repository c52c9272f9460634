//! Runs a configured experiment and writes trial CSVs, the series CSV and a manifest.

use std::path::Path;

use satadapt::config::Config;
use satadapt::experiments::{run_experiment, write_experiment};

fn main() -> satadapt::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/system2.json");
    let cfg = Config::load(&path, &["experiment.trials=10".into(), "experiment.horizon=200".into()])?;
    let exp = cfg.experiment_config();
    let result = run_experiment(&exp, 0)?;
    let out = std::env::temp_dir().join("satadapt_example");
    write_experiment(&out, &exp, &result)?;
    println!("wrote {} trials to {}; final median {:.3}", exp.trials, out.display(), result.series.median_at(200));
    Ok(())
}
