// Obfuscation apps for a poker player who wants gambling hidden.

use obfusim::adsim::SimScenario;
use obfusim::catalog::Cosine;
use obfusim::obfuscation::{candidate_apps, usability, Candidate};

pub fn run_example() -> obfusim::Result<Vec<Candidate>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/default.toml");
    let scenario = SimScenario::from_path(path)?;
    let prepared = scenario.prepare()?;
    let ranked = candidate_apps(
        &prepared.context,
        &scenario.privacy.spec(),
        &prepared.catalog,
        &prepared.interests(),
        &Cosine,
        5,
    )?;
    for c in &ranked {
        let category = &prepared.catalog.app(&c.app)?.category;
        let u = usability(&c.app, &prepared.context, &prepared.catalog, &Cosine)?;
        println!(
            "{:<16} {:<14} score {:.3}  usability {:.3}",
            c.app, category, c.score, u.value
        );
    }
    Ok(ranked)
}

#[allow(dead_code)]
fn main() -> obfusim::Result<()> {
    run_example().map(|_| ())
}
