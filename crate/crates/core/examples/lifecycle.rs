// A profile moving from empty through establishment to stable.

use obfusim::profiler::{profile_state, ActivityRecord, LifecycleConfig, Phase};

pub fn run_example() -> obfusim::Result<Vec<Phase>> {
    let cfg = LifecycleConfig::default();
    let per_hour = 3600 / cfg.slot_s;
    // four days of steady use, then two quiet days
    let mut history = Vec::new();
    for slot in 0..6 * 24 * per_hour {
        let busy = slot < 4 * 24 * per_hour && slot % 4 == 0;
        history.push(ActivityRecord::new(slot, if busy { 0.05 } else { 0.0 }, busy));
    }
    let mut phases = Vec::new();
    for day in 1..=6 {
        let state = profile_state(&history[..(day * 24 * per_hour) as usize], &cfg)?;
        println!("day {day}: {:?} since slot {}", state.phase, state.entered_at);
        phases.push(state.phase);
    }
    Ok(phases)
}

#[allow(dead_code)]
fn main() -> obfusim::Result<()> {
    run_example().map(|_| ())
}
