// The obfuscation controller over 2,000 slots, against its penalty bound.

use obfusim::control::{ControlBounds, ControlLoop, ControlParams, DeltaDistribution};

pub fn run_example() -> obfusim::Result<bool> {
    let bounds = ControlBounds::new(0.2, 1.2, 0.45)?;
    let base = ControlParams::default();
    let params = ControlParams {
        p_target: base.admissible_target(&bounds, 0.25),
        ..base
    };
    let run = ControlLoop {
        params,
        bounds,
        c_min: 0.01,
        c_max: 0.25,
        delta: DeltaDistribution::Uniform { p_change: 0.4 },
        slots: 2000,
    };
    let records = run.run(11)?;
    let held = records.iter().all(|r| r.average_penalty <= r.bound + 1e-9);
    for r in records.iter().step_by(500) {
        println!(
            "t={:<5} {:<13} eta {:.3}  avg penalty {:.4} <= {:.4}",
            r.t, r.state_case, r.eta_lprime, r.average_penalty, r.bound
        );
    }
    println!("bound held at every slot: {held}");
    Ok(held)
}

#[allow(dead_code)]
fn main() -> obfusim::Result<()> {
    run_example().map(|_| ())
}
