//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::RngExt;

use obfusim::adsim::traffic::{RefreshDistribution, TrafficModel, MB};
use obfusim::adsim::{run_simulation, sample_population, SimScenario};
use obfusim::catalog::{load_catalog, AppCatalog, Cosine};
use obfusim::control::{
    control_step, objective, ControlBounds, ControlLoop, ControlParams, DecisionRule, DeltaDistribution,
    QueueState,
};
use obfusim::metrics::{cost_ratio, reduction_ratio_of, total_utility};
use obfusim::obfuscation::{candidate_apps, usability, DisruptionLevel, Interests, PrivacySpec};
use obfusim::profiler::{assign_weightages, ContextProfile, Phase};
use obfusim::rng;
use obfusim::usage::{flatten_deficit, flatten_plan, mean_usage, usage_variance, UsageTrace};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

const WEIGHTAGE_CATALOG: &str = r#"
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

fn weightage_example() -> Outcome {
    let catalog = load_catalog(WEIGHTAGE_CATALOG).map_err(|e| e.to_string())?;
    let usage = BTreeMap::from([
        ("a1".to_string(), 0.1),
        ("a2".to_string(), 0.1),
        ("b1".to_string(), 0.7),
        ("c1".to_string(), 0.1),
    ]);
    let context =
        ContextProfile::new(["a1", "a2", "a3", "b1", "c1"], usage, &catalog).map_err(|e| e.to_string())?;
    let p = assign_weightages(&context).map_err(|e| e.to_string())?;
    let w = p.weights();
    check(w["a"] == 0.8 && w["b"] == 0.9 && w["c"] == 0.3, || {
        format!("weights {w:?}")
    })?;
    let n = p.normalized();
    let close = [("a", 0.40), ("b", 0.45), ("c", 0.15)]
        .iter()
        .all(|(c, v)| (n[*c] - v).abs() <= 1e-12);
    check(close, || format!("normalized {n:?}"))?;
    Ok("eta = (0.8, 0.9, 0.3), shares (0.40, 0.45, 0.15)".into())
}

fn random_params(r: &mut impl rand::Rng) -> ControlParams {
    ControlParams {
        v: r.random_range(0.01..50.0),
        beta: r.random_range(0.0..2.0),
        epsilon: r.random_range(0.0..1.0),
        p_target: r.random_range(0.0..5.0),
        cost: r.random_range(0.0..3.0),
        pavg_midpoint: r.random_bool(0.5),
        rule: [
            DecisionRule::MinObjective,
            DecisionRule::Pmin,
            DecisionRule::Pavg,
            DecisionRule::Pmax,
        ][r.random_range(0..4)],
    }
}

fn random_bounds(r: &mut impl rand::Rng) -> ControlBounds {
    let lo = r.random_range(0.0..1.0);
    let hi = lo + r.random_range(0.0..2.0);
    ControlBounds::new(lo, hi, r.random_range(0.0..2.0)).expect("valid bounds")
}

fn stable_controller() -> Outcome {
    let mut r = rng::stream(2, "acceptance/stable");
    for i in 0..1000 {
        let params = random_params(&mut r);
        let bounds = random_bounds(&mut r);
        let state = QueueState::new(r.random_range(-1.0..1.0), 0.125);
        let phase = if i % 2 == 0 { Phase::Stable } else { Phase::Empty };
        let d = control_step(&state, phase, 0.0, &bounds, &params).map_err(|e| e.to_string())?;
        check(d.eta == 0.0 && d.objective == 0.0, || format!("draw {i}: {d:?}"))?;
    }
    Ok("1000 draws, eta = 0 and objective = 0".into())
}

fn penalty_bound() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut runs = 0;
    for v in [1.0, 5.0, 25.0] {
        for seed in 0..100u64 {
            let mut r = rng::stream(seed, "acceptance/bound");
            let c_max = r.random_range(0.05..0.5);
            let bounds = random_bounds(&mut r);
            let base = ControlParams {
                v,
                rule: DecisionRule::MinObjective,
                ..random_params(&mut r)
            };
            let params = ControlParams {
                p_target: base.admissible_target(&bounds, c_max),
                ..base
            };
            let delta = if seed % 2 == 0 {
                DeltaDistribution::Uniform {
                    p_change: r.random_range(0.1..0.9),
                }
            } else {
                DeltaDistribution::Poisson {
                    lambda: r.random_range(0.2..3.0),
                    unit: c_max / 3.0,
                }
            };
            let run = ControlLoop {
                params,
                bounds,
                c_min: c_max / 20.0,
                c_max,
                delta,
                slots: 10_000,
            };
            for rec in run.run(seed).map_err(|e| e.to_string())? {
                let slack = rec.bound - rec.average_penalty;
                check(slack >= -1e-9, || {
                    format!(
                        "V={v} seed={seed} t={}: {} > {}",
                        rec.t, rec.average_penalty, rec.bound
                    )
                })?;
                worst = worst.min(slack);
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs x 10000 slots, smallest slack {worst:.3e}"))
}

fn brute_force() -> Outcome {
    let mut r = rng::stream(4, "acceptance/grid");
    for i in 0..200 {
        let params = ControlParams {
            rule: DecisionRule::MinObjective,
            ..random_params(&mut r)
        };
        let bounds = random_bounds(&mut r);
        let state = QueueState::new(r.random_range(-1.0..1.0), 0.125);
        let i_g = r.random_range(0.0..0.5);
        let phase = if r.random_bool(0.5) {
            Phase::Establishment
        } else {
            Phase::Evolution
        };
        let d = control_step(&state, phase, i_g, &bounds, &params).map_err(|e| e.to_string())?;
        let ub = bounds.upper();
        for k in 0..=200 {
            let eta = ub * k as f64 / 200.0;
            let value = if eta < bounds.lower() {
                f64::INFINITY
            } else {
                objective(&state, &params, eta, i_g)
            };
            check(d.objective <= value + 1e-9, || {
                format!("instance {i}: {} > {value} at eta {eta}", d.objective)
            })?;
        }
    }
    Ok("200 instances, never beaten by a 201-point grid".into())
}

/// Smallest variance about the own mean over every way to add `budget` units.
fn exhaustive(bins: &[u64], budget: u64) -> (f64, Vec<Vec<u64>>) {
    fn rec(i: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if i + 1 == cur.len() {
            cur[i] += left;
            out.push(cur.clone());
            cur[i] -= left;
            return;
        }
        for k in 0..=left {
            cur[i] += k;
            rec(i + 1, left - k, cur, out);
            cur[i] -= k;
        }
    }
    let mut all = Vec::new();
    rec(0, budget, &mut bins.to_vec(), &mut all);
    let var = |b: &Vec<u64>| {
        let m = b.iter().sum::<u64>() as f64 / b.len() as f64;
        b.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / b.len() as f64
    };
    let best = all.iter().map(var).fold(f64::INFINITY, f64::min);
    let argmin = all.into_iter().filter(|b| var(b) <= best + 1e-12).collect();
    (best, argmin)
}

fn flattening() -> Outcome {
    let apps = vec!["o0".to_string(), "o1".to_string()];
    let mut r = rng::stream(5, "acceptance/flatten");
    let mut feasible = 0;
    for i in 0..500 {
        let busy = r.random_range(0.05..0.9);
        let mut bins: Vec<u64> = (0..288)
            .map(|_| {
                if r.random_bool(busy) {
                    r.random_range(1..30)
                } else {
                    0
                }
            })
            .collect();
        let integer = i % 2 == 0;
        if integer {
            // nudge the total to a multiple of the bin count
            let rem = bins.iter().sum::<u64>() % 288;
            if rem != 0 {
                bins[0] += 288 - rem;
            }
        }
        let trace = UsageTrace::new(300, bins);
        let mean = mean_usage(&trace).map_err(|e| e.to_string())?;
        let deficit = flatten_deficit(&trace, None).map_err(|e| e.to_string())?;
        let budget = if integer {
            deficit.round() as u64
        } else {
            r.random_range(0..=deficit.ceil() as u64 + 10)
        };
        let plan = flatten_plan(&trace, &apps, budget).map_err(|e| e.to_string())?;
        let flat = plan.apply(&trace);
        let before = usage_variance(&trace, mean).map_err(|e| e.to_string())?;
        let after = usage_variance(&flat, mean).map_err(|e| e.to_string())?;
        check(after <= before + 1e-12, || {
            format!("trace {i}: variance {before} -> {after}")
        })?;
        if integer {
            feasible += 1;
            let residual: f64 = trace
                .bins
                .iter()
                .zip(&flat.bins)
                .filter(|(b, _)| (**b as f64) < mean)
                .map(|(_, f)| (*f as f64 - mean).powi(2))
                .sum();
            check(residual == 0.0, || {
                format!("trace {i}: below-mean residual {residual}")
            })?;
        }
    }

    let fixture = UsageTrace::new(300, vec![4, 0, 0, 4]);
    let plan = flatten_plan(&fixture, &apps, 4).map_err(|e| e.to_string())?;
    let (_, argmin) = exhaustive(&fixture.bins, 4);
    let got = plan.apply(&fixture).bins;
    check(argmin == vec![got.clone()], || {
        format!("fixture {got:?}, oracle {argmin:?}")
    })?;
    Ok(format!(
        "500 traces ({feasible} integer-feasible), fixture -> {got:?}"
    ))
}

fn disruption_ordering() -> Outcome {
    let base = SimScenario::from_path(scenario("default.toml")).map_err(|e| e.to_string())?;
    let targets = SimScenario::from_path(scenario("targets.toml")).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let mut d = Vec::new();
        let mut rel = Vec::new();
        for level in DisruptionLevel::ALL {
            let r = run_simulation(&base.with_level(level), seed).map_err(|e| e.to_string())?;
            d.push(r.derived.disruption_pct);
            let t = run_simulation(&targets.with_level(level), seed).map_err(|e| e.to_string())?;
            let want = targets.privacy.targets[&level] * 100.0;
            check((t.derived.disruption_pct - want).abs() <= 5.0, || {
                format!(
                    "seed {seed} {level}: {:.2} % vs target {want} %",
                    t.derived.disruption_pct
                )
            })?;
            rel.push(t.derived.relevance);
        }
        check(d[0] < d[1] && d[1] < d[2], || {
            format!("seed {seed}: disruption {d:?}")
        })?;
        check(rel[0] >= rel[1] && rel[1] >= rel[2], || {
            format!("seed {seed}: relevance {rel:?}")
        })?;
        if seed == 1 {
            lines.push(format!("default {:.1}/{:.1}/{:.1} %", d[0], d[1], d[2]));
        }
    }
    Ok(format!("{}; targets within 5 pp on 5 seeds", lines.join("")))
}

fn traffic_calibration() -> Outcome {
    let summary = sample_population(270, &RefreshDistribution::default(), &TrafficModel::default(), 1)
        .map_err(|e| e.to_string())?;
    let mb = |b: u64| b as f64 / MB;
    let fast: Vec<f64> = summary
        .samples
        .iter()
        .filter(|s| s.refresh_rate_s <= 30)
        .map(|s| mb(s.hourly_bytes))
        .collect();
    let slow: Vec<f64> = summary
        .samples
        .iter()
        .filter(|s| s.refresh_rate_s >= 45)
        .map(|s| mb(s.hourly_bytes))
        .collect();
    let share = |v: &[f64], lo: f64, hi: f64| {
        v.iter().filter(|x| (lo..=hi).contains(*x)).count() as f64 / v.len() as f64
    };
    let fast_in = share(&fast, 3.0, 5.5);
    let slow_in = share(&slow, 0.5, 2.5);
    check(fast_in >= 0.6, || format!("20/30 s apps in band: {fast_in}"))?;
    check(slow_in >= 0.9, || format!("45/60 s apps in band: {slow_in}"))?;
    for (rate, want) in [(20, 36.0), (30, 47.0), (45, 15.0), (60, 2.0)] {
        let n = summary
            .samples
            .iter()
            .filter(|s| s.refresh_rate_s == rate)
            .count();
        let pct = 100.0 * n as f64 / 270.0;
        check((pct - want).abs() <= 6.0, || {
            format!("{rate} s share {pct:.1} % vs {want} %")
        })?;
    }
    Ok(format!(
        "{:.0} % of 20/30 s apps in 3.0-5.5 MB, {:.0} % of 45/60 s apps in 0.5-2.5 MB",
        fast_in * 100.0,
        slow_in * 100.0
    ))
}

fn low_vs_high() -> Outcome {
    let low = SimScenario::from_path(scenario("overnight_low.toml")).map_err(|e| e.to_string())?;
    let high = SimScenario::from_path(scenario("overnight_high.toml")).map_err(|e| e.to_string())?;
    let l = run_simulation(&low, low.sim.seed).map_err(|e| e.to_string())?;
    let h = run_simulation(&high, high.sim.seed).map_err(|e| e.to_string())?;
    let (a, b) = (l.total_obfuscation_requests(), h.total_obfuscation_requests());
    check(a > 0 && b >= 10 * a, || format!("low {a}, high {b}"))?;
    Ok(format!(
        "obfuscation ad requests {a} vs {b} ({:.1}x)",
        b as f64 / a as f64
    ))
}

fn run_cli(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_obfusim"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())
}

fn dir_bytes(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        let bytes = std::fs::read(entry.path()).map_err(|e| e.to_string())?;
        out.insert(entry.file_name().to_string_lossy().into_owned(), bytes);
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let s = SimScenario::from_path(scenario("default.toml")).map_err(|e| e.to_string())?;
    let a = run_simulation(&s, 9).map_err(|e| e.to_string())?.to_json();
    let b = run_simulation(&s, 9).map_err(|e| e.to_string())?.to_json();
    check(a == b, || "in-process repeat differs".into())?;

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = scenario("default.toml");
    let config = config.to_str().ok_or("non-utf8 path")?;
    let mut outputs = Vec::new();
    for run in ["one", "two"] {
        let out = tmp.path().join(run);
        let out_s = out.to_str().ok_or("non-utf8 path")?;
        let sim = run_cli(&[
            "simulate",
            "--config",
            config,
            "--seed",
            "9",
            "--scenarios",
            "low,medium,high",
            "--out",
            out_s,
        ])?;
        check(sim.status.success(), || {
            String::from_utf8_lossy(&sim.stderr).into_owned()
        })?;
        let rec = run_cli(&["recommend", "--config", config, "--top", "5", "--out", out_s])?;
        check(rec.status.success(), || {
            String::from_utf8_lossy(&rec.stderr).into_owned()
        })?;
        outputs.push((sim.stdout, rec.stdout, dir_bytes(&out)?));
    }
    check(outputs[0] == outputs[1], || {
        "two processes wrote different bytes".into()
    })?;
    let files = &outputs[0].2;
    check(
        files.get("default_medium.json").map(Vec::as_slice) == Some(a.as_bytes()),
        || "process report differs from in-process report".into(),
    )?;
    Ok(format!("{} files identical across processes", files.len()))
}

/// Independent smoothed tf-idf cosine.
fn oracle_cosine(catalog: &AppCatalog, a: &str, b: &str) -> f64 {
    let docs: Vec<(String, Vec<String>)> = catalog
        .apps()
        .iter()
        .map(|app| {
            let mut terms = app.keywords.clone();
            if catalog.include_category_term() {
                let name = &catalog.category(&app.category).unwrap().name;
                terms.push(obfusim::catalog::normalize_term(name).unwrap());
            }
            (app.id.clone(), terms)
        })
        .collect();
    let n = docs.len() as f64;
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for (_, terms) in &docs {
        for t in terms.iter().collect::<BTreeSet<_>>() {
            *df.entry(t.as_str()).or_default() += 1.0;
        }
    }
    let vector = |id: &str| {
        let terms = &docs.iter().find(|(d, _)| d == id).unwrap().1;
        let mut v: BTreeMap<&str, f64> = BTreeMap::new();
        for t in terms {
            *v.entry(t.as_str()).or_default() += 1.0;
        }
        let len = terms.len() as f64;
        v.into_iter()
            .map(|(t, c)| (t, c / len * (1.0 + n / df[t]).ln()))
            .collect::<BTreeMap<_, _>>()
    };
    let (va, vb) = (vector(a), vector(b));
    let dot: f64 = va.iter().map(|(t, x)| x * vb.get(t).unwrap_or(&0.0)).sum();
    let norm = |v: &BTreeMap<&str, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    if dot == 0.0 {
        0.0
    } else {
        dot / (norm(&va) * norm(&vb))
    }
}

fn metric_formulas() -> Outcome {
    // rationals
    for (o, a) in [(1usize, 4usize), (3, 5), (0, 2), (7, 7)] {
        let c = cost_ratio(o, a).map_err(|e| e.to_string())?;
        check(c == o as f64 / a as f64, || format!("cost_ratio({o}, {a}) = {c}"))?;
    }
    for (rp, us) in [(2.0, 0.5), (1.25, 0.75), (0.5, 0.0)] {
        check(total_utility(rp, us) == rp + us, || {
            format!("total_utility({rp}, {us})")
        })?;
    }
    let before = BTreeMap::from([("p".to_string(), 3.0), ("x".to_string(), 1.0)]);
    let after = BTreeMap::from([("p".to_string(), 3.0), ("x".to_string(), 5.0)]);
    let red = reduction_ratio_of(&before, &after, "p").map_err(|e| e.to_string())?;
    // (3/4) / (3/8) = 2
    check(red.ratio == 2.0, || format!("reduction {}", red.ratio))?;

    let s = SimScenario::from_path(scenario("default.toml")).map_err(|e| e.to_string())?;
    let prepared = s.prepare().map_err(|e| e.to_string())?;
    let catalog = &prepared.catalog;
    let ctx = &prepared.context;
    let installed: Vec<&str> = ctx.installed().collect();
    let outsiders: Vec<&str> = catalog
        .apps()
        .iter()
        .map(|a| a.id.as_str())
        .filter(|id| !ctx.is_installed(id))
        .collect();
    let mut compared = 0;
    for cand in &outsiders {
        let mut expected = f64::INFINITY;
        for p in &installed {
            let denom = outsiders
                .iter()
                .map(|q| oracle_cosine(catalog, q, p))
                .fold(0.0, f64::max);
            expected = expected.min(oracle_cosine(catalog, cand, p) / denom.max(1e-9));
        }
        let got = usability(cand, ctx, catalog, &Cosine)
            .map_err(|e| e.to_string())?
            .value;
        check((got - expected).abs() <= 1e-12, || {
            format!("usability({cand}) {got} vs {expected}")
        })?;
        compared += 1;
    }

    let spec = PrivacySpec {
        private_interests: BTreeSet::new(),
        private_app_categories: BTreeSet::from(["gambling".to_string()]),
    };
    let ranked =
        candidate_apps(ctx, &spec, catalog, &Interests::ByCategory, &Cosine, 5).map_err(|e| e.to_string())?;
    for c in &ranked {
        let score = installed
            .iter()
            .map(|p| oracle_cosine(catalog, &c.app, p))
            .fold(0.0, f64::max);
        check((c.score - score).abs() <= 1e-12, || {
            format!("score({}) {} vs {score}", c.app, c.score)
        })?;
    }
    Ok(format!(
        "rational fixtures exact, usability matched on {compared} apps"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "weightage example", Duration::from_secs(1), weightage_example),
        (
            2,
            "stable-state controller",
            Duration::from_secs(5),
            stable_controller,
        ),
        (
            3,
            "time-average penalty bound",
            Duration::from_secs(120),
            penalty_bound,
        ),
        (
            4,
            "closed form vs brute force",
            Duration::from_secs(30),
            brute_force,
        ),
        (5, "flattening", Duration::from_secs(30), flattening),
        (
            6,
            "disruption ordering",
            Duration::from_secs(120),
            disruption_ordering,
        ),
        (
            7,
            "traffic calibration",
            Duration::from_secs(120),
            traffic_calibration,
        ),
        (8, "low vs high ad volume", Duration::from_secs(60), low_vs_high),
        (9, "determinism", Duration::from_secs(60), determinism),
        (10, "metric formulas", Duration::from_secs(10), metric_formulas),
    ];
    let mut failed = 0;
    for (n, name, limit, f) in criteria {
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let result = match result {
            Ok(msg) if took > limit => Err(format!("{msg}; took {took:.2?}, limit {limit:?}")),
            other => other,
        };
        match result {
            Ok(msg) => println!("criterion {n:>2} PASS  {name}: {msg} ({took:.2?})"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {msg} ({took:.2?})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
