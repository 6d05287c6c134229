// Hourly ad traffic of 270 apps with sampled refresh rates.

use obfusim::adsim::traffic::{RefreshDistribution, TrafficModel};
use obfusim::adsim::{sample_population, PopulationSummary};

pub fn run_example() -> obfusim::Result<PopulationSummary> {
    let summary = sample_population(270, &RefreshDistribution::default(), &TrafficModel::default(), 5)?;
    for g in &summary.groups {
        println!(
            "{:>2} s refresh: {:>3} apps, {:.2} MB per hour",
            g.refresh_rate_s, g.apps, g.mean_hourly_mb
        );
    }
    Ok(summary)
}

#[allow(dead_code)]
fn main() -> obfusim::Result<()> {
    run_example().map(|_| ())
}
