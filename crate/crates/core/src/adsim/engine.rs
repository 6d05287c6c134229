//! Slot-by-slot simulation of one user, their obfuscation apps and the ads
//! both receive.
//!
//! The user's own behaviour (the "organic world") is drawn first from its own
//! stream, so every disruption level of a scenario sees the same user.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngExt;

use crate::catalog::Cosine;
use crate::control::{
    advance_queue, compute_b, control_step, penalty_bound, track_request, ControlBounds, QueueState,
    SlotRecord,
};
use crate::error::{Error, Result};
use crate::metrics::{RunReport, TrafficSummary};
use crate::obfuscation::{candidate_apps, plan_weightage, usability, ObfuscationPlan};
use crate::profiler::{
    apply_delta, assign_weightages, dominance, ActivityRecord, EvolutionLimits, InterestProfile,
    LifecycleConfig, LifecycleTracker, ProfileDelta, Source,
};
use crate::rng;
use crate::usage::{flatten_deficit, flatten_plan_masked, UsageTrace};

use super::resources::{resource_accounting, AppActivity};
use super::scenario::{Prepared, SimScenario};
use super::traffic::{ad_traffic, TrafficTotals};

/// How many of the original top categories count as relevant for ads.
const RELEVANT_TOP: usize = 3;

/// The user's own activity in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct OrganicSlot {
    pub active: bool,
    pub app: Option<String>,
    pub requests: u64,
    pub apps_change: Option<(String, f64)>,
    pub history: Option<(String, f64)>,
    pub clicks: u64,
}

impl OrganicSlot {
    fn idle() -> Self {
        OrganicSlot {
            active: false,
            app: None,
            requests: 0,
            apps_change: None,
            history: None,
            clicks: 0,
        }
    }
}

/// Draws the user's slots from the `organic` stream.
pub fn organic_world(
    scenario: &SimScenario,
    prepared: &Prepared,
    initial: &InterestProfile,
    seed: u64,
) -> Result<Vec<OrganicSlot>> {
    let mut rng = rng::stream(seed, "organic");
    let user = &scenario.user;
    let slot_s = scenario.sim.slot_s;
    let slots = scenario.sim.horizon_s / slot_s;
    let (apps, weights): (Vec<&str>, Vec<f64>) = if prepared.context.usage().is_empty() {
        prepared.context.installed().map(|a| (a, 1.0)).unzip()
    } else {
        prepared
            .context
            .usage()
            .iter()
            .map(|(a, s)| (a.as_str(), *s))
            .unzip()
    };
    let pick = WeightedIndex::new(&weights).map_err(|e| Error::invalid("user.usage", e.to_string()))?;
    let categories: Vec<String> = initial.weights().into_keys().collect();
    let [lo, hi] = user.slot_change;

    let mut world = Vec::with_capacity(slots as usize);
    for s in 0..slots {
        let hour = ((s * slot_s / 3600) % 24) as usize;
        if !rng.random_bool(user.activity[hour]) {
            world.push(OrganicSlot::idle());
            continue;
        }
        let app = prepared.catalog.app(apps[pick.sample(&mut rng)])?;
        let requests = (slot_s / u64::from(app.refresh_rate_s)).max(1);
        let change = rng.random_range(lo..=hi);
        let clicks = (0..requests)
            .filter(|_| rng.random_bool(user.ad_click_rate))
            .count() as u64;
        let history = if rng.random_bool(user.history_rate) {
            let c = &categories[rng.random_range(0..categories.len())];
            Some((c.clone(), rng.random_range(lo..=hi)))
        } else {
            None
        };
        world.push(OrganicSlot {
            active: true,
            app: Some(app.id.clone()),
            requests,
            apps_change: Some((app.category.clone(), change)),
            history,
            clicks,
        });
    }
    Ok(world)
}

fn click_weight(clicks: u64, c_min: f64, c_max: f64) -> f64 {
    (clicks as f64 * c_min).min(c_max)
}

/// Runs `scenario` with `seed` (overriding the scenario's own seed).
pub fn run_simulation(scenario: &SimScenario, seed: u64) -> Result<RunReport> {
    scenario.validate()?;
    let prepared = scenario.prepare()?;
    let catalog = &prepared.catalog;
    let interests = prepared.interests();
    let privacy = &scenario.privacy;
    let level = privacy.scenario;
    let c = &scenario.control;
    let slot_s = scenario.sim.slot_s;
    let n = (scenario.sim.horizon_s / slot_s) as usize;

    let initial = assign_weightages(&prepared.context)?;
    let ceiling = scenario.user.ceiling_factor * initial.total();
    let mut profile = initial.clone().with_limits(EvolutionLimits {
        change_max: c.c_max,
        ceiling,
    });
    let world = organic_world(scenario, &prepared, &initial, seed)?;

    // what to run
    let spec = privacy.spec();
    let candidates = candidate_apps(
        &prepared.context,
        &spec,
        catalog,
        &interests,
        &Cosine,
        privacy.candidates,
    )?;
    let bounds = initial.profile_thresholds();
    let eta_target = plan_weightage(level, bounds, &privacy.policy)?;
    let plan = ObfuscationPlan::new(level, &candidates, eta_target, &spec, catalog, &interests)?;
    let mut usabilities = BTreeMap::new();
    for app in &plan.apps {
        usabilities.insert(app.clone(), usability(app, &prepared.context, catalog, &Cosine)?);
    }

    // when to run it
    let trace = UsageTrace::new(slot_s, world.iter().map(|w| w.requests).collect());
    let [start, end] = privacy.obfuscation_hours;
    let mask: Vec<bool> = (0..n as u64)
        .map(|s| {
            let hour = ((s * slot_s / 3600) % 24) as u32;
            hour >= start && hour < end
        })
        .collect();
    let budget = (c.epsilon * flatten_deficit(&trace, Some(&mask))?).round() as u64;
    let schedule = flatten_plan_masked(&trace, &plan.apps, budget, Some(&mask))?;
    let mut units: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); n];
    for ins in &schedule.insertions {
        *units[ins.slot as usize].entry(ins.app.clone()).or_default() += ins.units;
    }
    let scheduled = units.iter().filter(|u| !u.is_empty()).count();

    // how much weight to generate
    let organic_total = initial.total()
        + world
            .iter()
            .map(|w| {
                w.apps_change.as_ref().map_or(0.0, |x| x.1)
                    + w.history.as_ref().map_or(0.0, |x| x.1)
                    + if w.clicks > 0 {
                        click_weight(w.clicks, c.c_min, c.c_max)
                    } else {
                        0.0
                    }
            })
            .sum::<f64>();
    let planned = match privacy.targets.get(&level) {
        Some(d) => d * organic_total / (1.0 - d),
        None => eta_target * plan.apps.len() as f64,
    };
    let per_slot = if scheduled > 0 {
        planned / scheduled as f64
    } else {
        0.0
    };

    // controller
    let cbounds = ControlBounds::new(bounds.min, bounds.max, eta_target)?;
    let admissible = c.params(0.0).admissible_target(&cbounds, 3.0 * c.c_max);
    let params = c.params(admissible);
    let b = compute_b(c.c_max, c.c_min);
    let mut lifecycle = LifecycleTracker::established(
        LifecycleConfig {
            slot_s,
            ..LifecycleConfig::default()
        },
        0,
    );

    let top: Vec<String> = dominance(&initial)?
        .into_iter()
        .take(RELEVANT_TOP)
        .map(|(c, _)| c)
        .collect();
    let mut serving = rng::stream(seed, "serving");

    let mut obfs_weight: BTreeMap<String, f64> = BTreeMap::new();
    let mut obfs_requests = vec![0u64; n];
    let mut obfs_by_app: BTreeMap<String, u64> = BTreeMap::new();
    let mut organic_by_app: BTreeMap<String, u64> = BTreeMap::new();
    let mut owed = 0.0;
    let mut served = 0u64;
    let mut relevant = 0u64;
    let mut queue = QueueState::new(0.0, b);
    let mut r1 = 0.0;
    let mut penalty_sum = 0.0;
    let mut log = Vec::with_capacity(n);

    for (s, w) in world.iter().enumerate() {
        let slot = s as u64;
        let before = profile.total();
        if let Some((cat, x)) = &w.apps_change {
            profile = apply_delta(
                &profile,
                &ProfileDelta::new(slot, Source::AppsUsage).with(cat.clone(), *x),
            )?;
        }
        if let Some((cat, x)) = &w.history {
            profile = apply_delta(
                &profile,
                &ProfileDelta::new(slot, Source::History).with(cat.clone(), *x),
            )?;
        }
        if w.clicks > 0 {
            if let Some((cat, _)) = &w.apps_change {
                let x = click_weight(w.clicks, c.c_min, c.c_max);
                profile = apply_delta(
                    &profile,
                    &ProfileDelta::new(slot, Source::AdInteraction).with(cat.clone(), x),
                )?;
            }
        }
        let organic_change = profile.total() - before;
        if let Some(app) = &w.app {
            *organic_by_app.entry(app.clone()).or_default() += w.requests;
        }

        // organic ads are relevant when they land on an original top interest
        for _ in 0..w.requests {
            let u: f64 = serving.random();
            let on_target: f64 = top
                .iter()
                .map(|c| profile.weight(c) - obfs_weight.get(c).copied().unwrap_or(0.0))
                .sum();
            served += 1;
            if u * profile.total() < on_target {
                relevant += 1;
            }
        }

        if s == 0 {
            r1 = track_request(organic_change, c.c_min).unwrap_or(0.0);
            queue = QueueState::new(r1, b);
        }
        let phase = lifecycle.state().phase;
        let decision = control_step(&queue, phase, organic_change, &cbounds, &params)?;

        let mut obfs_change = 0.0;
        if !units[s].is_empty() {
            owed += per_slot;
            if decision.eta > 0.0 {
                let mut by_category: BTreeMap<String, u64> = BTreeMap::new();
                for (app, u) in &units[s] {
                    *by_category.entry(catalog.app(app)?.category.clone()).or_default() += u;
                    *obfs_by_app.entry(app.clone()).or_default() += u;
                    obfs_requests[s] += u;
                }
                let total_units: u64 = by_category.values().sum();
                let mut delta = ProfileDelta::new(slot, Source::AppsUsage);
                for (cat, u) in &by_category {
                    let x = (owed * *u as f64 / total_units as f64).min(c.c_max);
                    if x > 0.0 {
                        delta = delta.with(cat.clone(), x);
                    }
                }
                let wanted = delta.total();
                if wanted > 0.0 {
                    let t0 = profile.total();
                    profile = apply_delta(&profile, &delta)?;
                    obfs_change = profile.total() - t0;
                    let scale = obfs_change / wanted;
                    for (cat, x) in &delta.changes {
                        *obfs_weight.entry(cat.clone()).or_default() += x * scale;
                    }
                    owed -= wanted;
                }
            }
        }

        lifecycle.observe(ActivityRecord::new(slot, organic_change + obfs_change, w.active))?;
        penalty_sum += decision.penalty;
        let t = slot + 1;
        log.push(SlotRecord {
            t,
            state_case: decision.case,
            eta_lprime: decision.eta,
            penalty: decision.penalty,
            objective: decision.objective,
            r: queue.r,
            q: queue.q,
            bound: penalty_bound(&params, b, r1, t)?,
            average_penalty: penalty_sum / t as f64,
        });
        queue = advance_queue(&queue, organic_change);
    }
    let profile = profile.with_slot(n as u64);

    // traffic and resources
    let model = &scenario.traffic.model;
    let mut traffic = TrafficSummary::default();
    for (app, requests) in &organic_by_app {
        let t = ad_traffic(
            *requests,
            model,
            &mut rng::stream(seed, &format!("traffic/organic/{app}")),
        );
        add_totals(&mut traffic.organic, t);
    }
    let mut activity = Vec::new();
    for (app, requests) in &obfs_by_app {
        let t = ad_traffic(
            *requests,
            model,
            &mut rng::stream(seed, &format!("traffic/obfuscation/{app}")),
        );
        add_totals(&mut traffic.obfuscation, t);
        let a = catalog.app(app)?;
        activity.push(AppActivity {
            app: app.clone(),
            category: a.category.clone(),
            ad_requests: *requests,
            bytes: t.bytes,
            runtime_s: requests * u64::from(a.refresh_rate_s),
        });
    }
    let resources = resource_accounting(
        &activity,
        &scenario.resources.classes,
        &scenario.resources.storage,
        scenario.sim.horizon_s,
    )?;

    let final_phase = lifecycle.state().phase;
    let mut report = RunReport {
        scenario: scenario.name.clone(),
        level,
        seed,
        horizon_s: scenario.sim.horizon_s,
        slot_s,
        installed: prepared.context.installed().map(String::from).collect(),
        private_categories: privacy.private_app_categories.clone(),
        candidates,
        plan,
        usability: usabilities,
        organic_requests: trace.bins,
        obfuscation_requests: obfs_requests,
        profile_before: initial.snapshot(crate::profiler::Phase::Evolution),
        profile_after: profile.snapshot(final_phase),
        obfuscation_weight: obfs_weight,
        unrealized_weight: owed.max(0.0),
        served_ads: served,
        relevant_ads: relevant,
        traffic,
        resources,
        control: log,
        derived: crate::metrics::DerivedMetrics {
            reduction_ratio: 0.0,
            eliminated: false,
            reduction_by_category: BTreeMap::new(),
            reduction_ratio_vs_dominant: 0.0,
            usability: 0.0,
            total_utility: 0.0,
            cost_ratio: 0.0,
            disruption_pct: 0.0,
            relevance: 0.0,
        },
    };
    report.derived = report.recompute_derived()?;
    Ok(report)
}

fn add_totals(acc: &mut TrafficTotals, t: TrafficTotals) {
    acc.ads += t.ads;
    acc.objects += t.objects;
    acc.messages += t.messages;
    acc.bytes += t.bytes;
}
