//! Median and 90th-percentile norms for the three reference plants and the uncontrolled baseline.

use satadapt::experiments::{figure1_suite, SuiteOptions};

fn main() -> satadapt::Result<()> {
    let data = figure1_suite(&SuiteOptions::default())?;
    println!("{:<22}{:>10}{:>10}{:>10}", "series", "t=100", "t=500", "t=1000");
    for s in data.controlled.iter().chain([&data.uncontrolled]) {
        let at = |t| s.series.median_at(t);
        println!("{:<22}{:>10.3}{:>10.3}{:>10.3}", s.name, at(100), at(500), at(1000));
    }
    Ok(())
}
