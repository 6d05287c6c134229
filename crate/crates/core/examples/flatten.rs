// Filling the idle slots of a day of usage with obfuscation activity.

use obfusim::rng;
use obfusim::usage::{bin_usage, flatten_deficit, flatten_plan, synthetic_window_events, usage_variance};

pub fn run_example() -> obfusim::Result<(f64, f64)> {
    let apps = vec!["youtube".to_string(), "viber".to_string()];
    // evening use only: 18:00 to 23:00, 40 busy slots
    let events = synthetic_window_events(
        18 * 3600,
        23 * 3600,
        300,
        40,
        400,
        &apps,
        &mut rng::stream(3, "events"),
    )?;
    let trace = bin_usage(&events, 300, 24 * 3600)?;
    let mean = obfusim::usage::mean_usage(&trace)?;
    let budget = flatten_deficit(&trace, None)?.round() as u64;
    let plan = flatten_plan(&trace, &["skype".to_string(), "comic_shelf".to_string()], budget)?;
    let flat = plan.apply(&trace);
    let before = usage_variance(&trace, mean)?;
    let after = usage_variance(&flat, mean)?;
    println!(
        "mean {mean:.3} per slot, budget {budget}, used {}",
        plan.budget_used
    );
    println!(
        "variance {before:.3} -> {after:.3} over {} slots",
        plan.slots().len()
    );
    Ok((before, after))
}

#[allow(dead_code)]
fn main() -> obfusim::Result<()> {
    run_example().map(|_| ())
}
