// One day of the default user at each disruption level.

use obfusim::adsim::{run_simulation, SimScenario};
use obfusim::metrics::RunReport;
use obfusim::obfuscation::DisruptionLevel;

pub fn run_example() -> obfusim::Result<Vec<RunReport>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/default.toml");
    let scenario = SimScenario::from_path(path)?;
    let mut reports = Vec::new();
    for level in DisruptionLevel::ALL {
        let r = run_simulation(&scenario.with_level(level), scenario.sim.seed)?;
        println!(
            "{:<6} disruption {:>5.1} %  relevance {:.3}  reduction {:.3}  obfuscation ads {}",
            level.to_string(),
            r.derived.disruption_pct,
            r.derived.relevance,
            r.derived.reduction_ratio,
            r.total_obfuscation_requests()
        );
        reports.push(r);
    }
    Ok(reports)
}

#[allow(dead_code)]
fn main() -> obfusim::Result<()> {
    run_example().map(|_| ())
}
