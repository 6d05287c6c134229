// Interest weightages for a five-app user.
//
// Three apps share category `a`, one is `b` and one is `c`; the user spends
// most of their time in `b`.

use std::collections::BTreeMap;

use obfusim::catalog::load_catalog;
use obfusim::profiler::{assign_weightages, dominance, ContextProfile};

const CATALOG: &str = r#"
include_category_term = false
categories = [{ id = "a", name = "A" }, { id = "b", name = "B" }, { id = "c", name = "C" }]
apps = [
  { id = "a1", category = "a", keywords = ["alpha"], refresh_rate_s = 30 },
  { id = "a2", category = "a", keywords = ["alpha"], refresh_rate_s = 30 },
  { id = "a3", category = "a", keywords = ["alpha"], refresh_rate_s = 30 },
  { id = "b1", category = "b", keywords = ["beta"], refresh_rate_s = 30 },
  { id = "c1", category = "c", keywords = ["gamma"], refresh_rate_s = 30 },
]
"#;

pub fn run_example() -> obfusim::Result<BTreeMap<String, f64>> {
    let catalog = load_catalog(CATALOG)?;
    let usage = BTreeMap::from([
        ("a1".to_string(), 0.1),
        ("a2".to_string(), 0.1),
        ("b1".to_string(), 0.7),
        ("c1".to_string(), 0.1),
    ]);
    let context = ContextProfile::new(["a1", "a2", "a3", "b1", "c1"], usage, &catalog)?;
    let profile = assign_weightages(&context)?;
    let shares = profile.normalized();
    for (category, w) in dominance(&profile)? {
        println!("{category}: weightage {w:.2}, share {:.2}", shares[&category]);
    }
    let t = profile.profile_thresholds();
    println!("thresholds: min {:.2}, max {:.2}", t.min, t.max);
    Ok(profile.weights())
}

#[allow(dead_code)]
fn main() -> obfusim::Result<()> {
    run_example().map(|_| ())
}
