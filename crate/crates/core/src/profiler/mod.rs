//! Interest profiles: derivation from installed apps, incorporation of
//! browsing history and ad clicks, bounded evolution, and update
//! classification.
//!
//! Raw weights are additive and do not sum to one. `normalized()` is a derived
//! view and is never written back.

pub mod lifecycle;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::catalog::{AppCatalog, InterestTaxonomy};
use crate::error::{Error, Result};

pub use lifecycle::{profile_state, ActivityRecord, LifecycleConfig, LifecycleTracker, Phase, ProfileState};

const SHARE_TOLERANCE: f64 = 1e-9;

/// Installed apps plus the usage-time share of each used app.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextProfile {
    installed: BTreeMap<String, String>,
    usage: BTreeMap<String, f64>,
}

impl ContextProfile {
    /// Apps absent from `usage` (or with share 0) are installed but unused.
    pub fn new<I, S>(installed: I, usage: BTreeMap<String, f64>, catalog: &AppCatalog) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut apps = BTreeMap::new();
        for id in installed {
            let id = id.into();
            let app = catalog.app(&id)?;
            if apps.insert(id.clone(), app.category.clone()).is_some() {
                return Err(Error::invalid("installed", format!("`{id}` listed twice")));
            }
        }
        if apps.is_empty() {
            return Err(Error::invalid(
                "installed",
                "at least one installed app required (n(K_a) >= 1)",
            ));
        }
        let mut sum = 0.0;
        for (id, share) in &usage {
            if !apps.contains_key(id) {
                return Err(Error::invalid(
                    "usage",
                    format!("`{id}` has a usage share but is not installed"),
                ));
            }
            if !share.is_finite() || !(0.0..=1.0).contains(share) {
                return Err(Error::invalid(
                    "usage",
                    format!("share of `{id}` must be in [0, 1]"),
                ));
            }
            sum += share;
        }
        let used = usage.values().any(|s| *s > 0.0);
        if used && (sum - 1.0).abs() > SHARE_TOLERANCE {
            return Err(Error::invalid(
                "usage",
                format!("shares of used apps sum to {sum}, expected 1"),
            ));
        }
        let usage = usage.into_iter().filter(|(_, s)| *s > 0.0).collect();
        Ok(ContextProfile {
            installed: apps,
            usage,
        })
    }

    pub fn installed(&self) -> impl Iterator<Item = &str> {
        self.installed.keys().map(String::as_str)
    }

    pub fn is_installed(&self, app_id: &str) -> bool {
        self.installed.contains_key(app_id)
    }

    pub fn category_of(&self, app_id: &str) -> Option<&str> {
        self.installed.get(app_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.installed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.installed.is_empty()
    }

    pub fn usage_share(&self, app_id: &str) -> f64 {
        self.usage.get(app_id).copied().unwrap_or(0.0)
    }

    pub fn is_used(&self, app_id: &str) -> bool {
        self.usage.contains_key(app_id)
    }

    /// Used apps and their shares.
    pub fn usage(&self) -> &BTreeMap<String, f64> {
        &self.usage
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    /// Shared terms needed between an app and an interest.
    pub min_overlap: usize,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig { min_overlap: 1 }
    }
}

/// Interest categories one catalog app maps to: keyword overlap with any of
/// the category's interests, or an entry in the static category table.
pub fn interests_for_app(
    app_id: &str,
    taxonomy: &InterestTaxonomy,
    catalog: &AppCatalog,
    config: &MappingConfig,
) -> Result<BTreeSet<String>> {
    let app = catalog.app(app_id)?;
    let terms = catalog.term_set(app_id)?;
    let mut out: BTreeSet<String> = taxonomy.mapped(&app.category).iter().cloned().collect();
    for category in taxonomy.categories() {
        let hit = category.interests.iter().any(|interest| {
            let shared = interest
                .keywords
                .iter()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .filter(|k| terms.contains(*k))
                .count();
            shared >= config.min_overlap.max(1)
        });
        if hit {
            out.insert(category.id.clone());
        }
    }
    Ok(out)
}

/// Union of the interest categories generated by every installed app.
pub fn map_context_to_interests(
    context: &ContextProfile,
    taxonomy: &InterestTaxonomy,
    catalog: &AppCatalog,
    config: &MappingConfig,
) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for app in context.installed() {
        out.extend(interests_for_app(app, taxonomy, catalog, config)?);
    }
    Ok(out)
}

/// Per-category weight bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub min: f64,
    pub max: f64,
}

impl Thresholds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min <= 0.0 || min > max {
            return Err(Error::invalid(
                "thresholds",
                format!("need 0 < min <= max, got ({min}, {max})"),
            ));
        }
        Ok(Thresholds { min, max })
    }
}

/// Merges two threshold pairs: min of the mins, max of the maxes.
pub fn merged_thresholds(a: Thresholds, b: Thresholds) -> Thresholds {
    Thresholds {
        min: a.min.min(b.min),
        max: a.max.max(b.max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionLimits {
    /// Largest admissible per-slot change of one category.
    pub change_max: f64,
    /// Convergence ceiling on the total profile weight.
    pub ceiling: f64,
}

/// Which part of the profile a weight belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    AppsUsage,
    History,
    AdInteraction,
}

/// Weighted interest categories at a given slot.
#[derive(Debug, Clone, PartialEq)]
pub struct InterestProfile {
    apps: BTreeMap<String, f64>,
    history: BTreeMap<String, f64>,
    ads: BTreeMap<String, f64>,
    thresholds: BTreeMap<String, Thresholds>,
    limits: EvolutionLimits,
    slot: u64,
}

/// Default ceiling multiple of the established total.
pub const DEFAULT_CEILING_FACTOR: f64 = 10.0;
pub const DEFAULT_CHANGE_MAX: f64 = 0.25;

impl InterestProfile {
    /// Builds an apps-derived profile. Every category gets `min = eta_min` and
    /// `max` = the largest weight.
    pub fn from_weights(weights: BTreeMap<String, f64>, eta_min: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("profile"));
        }
        if let Some((c, w)) = weights.iter().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!("weights.{c}"), format!("{w} is not > 0")));
        }
        let max = weights.values().copied().fold(0.0, f64::max);
        let bounds = Thresholds::new(eta_min.min(max), max)?;
        let total: f64 = weights.values().sum();
        Ok(InterestProfile {
            thresholds: weights.keys().map(|c| (c.clone(), bounds)).collect(),
            apps: weights,
            history: BTreeMap::new(),
            ads: BTreeMap::new(),
            limits: EvolutionLimits {
                change_max: DEFAULT_CHANGE_MAX,
                ceiling: DEFAULT_CEILING_FACTOR * total,
            },
            slot: 0,
        })
    }

    pub fn with_limits(mut self, limits: EvolutionLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_slot(mut self, slot: u64) -> Self {
        self.slot = slot;
        self
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn limits(&self) -> EvolutionLimits {
        self.limits
    }

    /// Unified weight per category: apps + history + ad interactions.
    pub fn weights(&self) -> BTreeMap<String, f64> {
        let mut out = self.apps.clone();
        for map in [&self.history, &self.ads] {
            for (c, w) in map {
                *out.entry(c.clone()).or_default() += w;
            }
        }
        out
    }

    pub fn weight(&self, category: &str) -> f64 {
        [&self.apps, &self.history, &self.ads]
            .iter()
            .filter_map(|m| m.get(category))
            .sum()
    }

    pub fn component(&self, source: Source) -> &BTreeMap<String, f64> {
        match source {
            Source::AppsUsage => &self.apps,
            Source::History => &self.history,
            Source::AdInteraction => &self.ads,
        }
    }

    pub fn history_weight(&self) -> f64 {
        self.history.values().sum()
    }

    pub fn ad_weight(&self) -> f64 {
        self.ads.values().sum()
    }

    pub fn total(&self) -> f64 {
        self.apps.values().sum::<f64>() + self.history_weight() + self.ad_weight()
    }

    /// Each category's share of the total.
    pub fn normalized(&self) -> BTreeMap<String, f64> {
        let total = self.total();
        self.weights()
            .into_iter()
            .map(|(c, w)| (c, if total > 0.0 { w / total } else { 0.0 }))
            .collect()
    }

    pub fn thresholds(&self, category: &str) -> Option<Thresholds> {
        self.thresholds.get(category).copied()
    }

    /// Min of mins and max of maxes over every category.
    pub fn profile_thresholds(&self) -> Thresholds {
        self.thresholds
            .values()
            .copied()
            .reduce(merged_thresholds)
            .expect("profile has at least one category")
    }

    pub fn is_empty(&self) -> bool {
        self.weights().is_empty()
    }

    fn add(&mut self, source: Source, category: &str, amount: f64) {
        if amount <= 0.0 {
            return;
        }
        let map = match source {
            Source::AppsUsage => &mut self.apps,
            Source::History => &mut self.history,
            Source::AdInteraction => &mut self.ads,
        };
        *map.entry(category.to_string()).or_default() += amount;
        let combined = self.weight(category);
        let base = self.profile_thresholds();
        let t = self.thresholds.entry(category.to_string()).or_insert(base);
        t.max = t.max.max(combined);
    }

    pub fn snapshot(&self, state: Phase) -> ProfileSnapshot {
        ProfileSnapshot {
            slot: self.slot,
            weights: self.weights(),
            history_weight: self.history_weight(),
            ad_weight: self.ad_weight(),
            state,
        }
    }
}

/// `η(c) = installed apps in c / n + usage share of c`, keyed by app category.
pub fn assign_weightages(context: &ContextProfile) -> Result<InterestProfile> {
    weigh(context, |app| {
        vec![context.category_of(app).unwrap_or_default().to_string()]
    })
}

/// Same algebra keyed by interest category: each app contributes its full
/// count and usage share to every interest category it maps to.
pub fn assign_interest_weightages(
    context: &ContextProfile,
    taxonomy: &InterestTaxonomy,
    catalog: &AppCatalog,
    config: &MappingConfig,
) -> Result<InterestProfile> {
    let mut mapped = BTreeMap::new();
    for app in context.installed() {
        mapped.insert(app, interests_for_app(app, taxonomy, catalog, config)?);
    }
    weigh(context, |app| mapped[app].iter().cloned().collect())
}

fn weigh(context: &ContextProfile, keys: impl Fn(&str) -> Vec<String>) -> Result<InterestProfile> {
    if context.is_empty() {
        return Err(Error::Empty("context profile"));
    }
    let n = context.len() as f64;
    let mut parts: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for app in context.installed() {
        for key in keys(app) {
            let entry = parts.entry(key).or_default();
            entry.0 += 1.0;
            entry.1 += context.usage_share(app);
        }
    }
    if parts.is_empty() {
        return Err(Error::Empty("interest profile"));
    }
    // (count + n·share) / n rounds once, so decimal inputs come out exact
    let weights = parts
        .into_iter()
        .map(|(key, (count, share))| (key, (count + n * share) / n))
        .collect();
    InterestProfile::from_weights(weights, 1.0 / n)
}

/// Adds a history or ad-interaction weight mapped to `category`.
///
/// The weight must lie in `(min(η_min, 0), η_max]` of the category, or of the
/// whole profile when the category is new.
pub fn incorporate_component(
    profile: &InterestProfile,
    source: Source,
    category: &str,
    weight: f64,
) -> Result<InterestProfile> {
    let t = profile
        .thresholds(category)
        .unwrap_or_else(|| profile.profile_thresholds());
    let lower = t.min.min(0.0);
    if !(weight > lower && weight <= t.max) {
        return Err(Error::OutOfBounds {
            what: "component weight",
            value: weight,
            lower,
            upper: t.max,
        });
    }
    let mut next = profile.clone();
    next.add(source, category, weight);
    Ok(next)
}

/// Per-category profile changes observed in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDelta {
    pub slot: u64,
    pub source: Source,
    pub changes: BTreeMap<String, f64>,
}

impl ProfileDelta {
    pub fn new(slot: u64, source: Source) -> Self {
        ProfileDelta {
            slot,
            source,
            changes: BTreeMap::new(),
        }
    }

    pub fn with(mut self, category: impl Into<String>, change: f64) -> Self {
        *self.changes.entry(category.into()).or_default() += change;
        self
    }

    pub fn total(&self) -> f64 {
        self.changes.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    /// Entry-wise sum. Both deltas must share a source.
    pub fn merge(&self, other: &ProfileDelta) -> Result<ProfileDelta> {
        if self.source != other.source {
            return Err(Error::invalid(
                "delta",
                "cannot merge deltas from different sources",
            ));
        }
        let mut merged = self.clone();
        merged.slot = self.slot.max(other.slot);
        for (c, v) in &other.changes {
            *merged.changes.entry(c.clone()).or_default() += v;
        }
        Ok(merged)
    }
}

/// `I^{t+1} = I^t + C_{t+1}`, capped at the convergence ceiling by scaling the
/// delta down. The slot always advances.
pub fn apply_delta(profile: &InterestProfile, delta: &ProfileDelta) -> Result<InterestProfile> {
    let limit = profile.limits.change_max;
    for (category, &c) in &delta.changes {
        if !(c > 0.0 && c <= limit) {
            return Err(Error::invalid(
                format!("delta.{category}"),
                format!("change {c} outside (0, {limit}]"),
            ));
        }
    }
    let mut next = profile.clone();
    let wanted = delta.total();
    let room = (profile.limits.ceiling - profile.total()).max(0.0);
    let scale = if wanted > room { room / wanted } else { 1.0 };
    for (category, c) in &delta.changes {
        next.add(delta.source, category, c * scale);
    }
    next.slot += 1;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    AppsUninstalled,
    NewAppsInstalled,
    UnusedBecameUsed,
    UsedBecameUnused,
    NoChange,
    /// One bound moved up while the other moved down.
    Mixed,
}

/// Classifies a threshold change assuming the installed set changed.
pub fn classify_update(old: Thresholds, new: Thresholds) -> UpdateKind {
    classify_update_with_apps(old, new, true)
}

/// Both bounds rising means fewer apps or less usage; both falling means more.
/// `installed_set_changed` picks between the install and the usage reading.
pub fn classify_update_with_apps(
    old: Thresholds,
    new: Thresholds,
    installed_set_changed: bool,
) -> UpdateKind {
    use std::cmp::Ordering::*;
    let max = new.max.partial_cmp(&old.max).unwrap_or(Equal);
    let min = new.min.partial_cmp(&old.min).unwrap_or(Equal);
    match (max, min, installed_set_changed) {
        (Equal, Equal, _) => UpdateKind::NoChange,
        (Greater, Greater, true) => UpdateKind::AppsUninstalled,
        (Greater, Greater, false) => UpdateKind::UsedBecameUnused,
        (Less, Less, true) => UpdateKind::NewAppsInstalled,
        (Less, Less, false) => UpdateKind::UnusedBecameUsed,
        _ => UpdateKind::Mixed,
    }
}

/// Categories by weight, heaviest first, ties by id.
pub fn dominance(profile: &InterestProfile) -> Result<Vec<(String, f64)>> {
    let mut ranked: Vec<(String, f64)> = profile.weights().into_iter().collect();
    if ranked.is_empty() {
        return Err(Error::Empty("profile"));
    }
    // BTreeMap order is id-ascending, and the sort is stable
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSnapshot {
    pub slot: u64,
    pub weights: BTreeMap<String, f64>,
    pub history_weight: f64,
    pub ad_weight: f64,
    pub state: Phase,
}
