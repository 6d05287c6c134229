//! Scenario files: the catalog, the simulated user, privacy wishes,
//! controller knobs and simulation settings in one TOML document.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::{AppCatalog, CatalogDocument, InterestTaxonomy};
use crate::control::{ControlParams, DecisionRule};
use crate::error::{Error, Result};
use crate::obfuscation::{DisruptionLevel, Interests, PrivacySpec, WeightagePolicy};
use crate::profiler::{assign_weightages, ContextProfile, MappingConfig};

use super::resources::{ClassTable, StorageTable};
use super::traffic::{RefreshDistribution, TrafficModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub name: String,
    pub catalog: CatalogSection,
    pub user: UserSection,
    pub privacy: PrivacySection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub traffic: TrafficSection,
    #[serde(default)]
    pub resources: ResourcesSection,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Either `path` to a catalog file or the catalog tables inline.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CatalogSection {
    pub path: Option<PathBuf>,
    #[serde(flatten)]
    pub inline: CatalogDocument,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSection {
    pub installed: Vec<String>,
    #[serde(default)]
    pub usage: BTreeMap<String, f64>,
    /// Probability of being active in a slot, one entry per hour of the day.
    #[serde(default = "default_activity")]
    pub activity: Vec<f64>,
    /// Browsing-history events per active slot.
    #[serde(default = "default_history_rate")]
    pub history_rate: f64,
    /// Click probability per organic ad.
    #[serde(default = "default_click_rate")]
    pub ad_click_rate: f64,
    /// Range of the profile change caused by one active slot.
    #[serde(default = "default_slot_change")]
    pub slot_change: [f64; 2],
    /// Profile convergence ceiling as a multiple of the initial total.
    #[serde(default = "default_ceiling_factor")]
    pub ceiling_factor: f64,
}

/// Quiet nights, busy evenings.
pub fn default_activity() -> Vec<f64> {
    vec![
        0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.05, 0.3, 0.5, 0.4, 0.3, 0.3, //
        0.5, 0.4, 0.3, 0.3, 0.3, 0.5, 0.6, 0.7, 0.7, 0.6, 0.4, 0.2,
    ]
}

fn default_history_rate() -> f64 {
    0.1
}

fn default_click_rate() -> f64 {
    0.01
}

fn default_slot_change() -> [f64; 2] {
    [0.01, 0.1]
}

fn default_ceiling_factor() -> f64 {
    50.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySection {
    #[serde(default)]
    pub private_interests: Vec<String>,
    #[serde(default)]
    pub private_app_categories: Vec<String>,
    #[serde(default = "default_level")]
    pub scenario: DisruptionLevel,
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    /// `[start, end)` hours of the day during which obfuscation apps may run.
    #[serde(default = "default_hours")]
    pub obfuscation_hours: [u32; 2],
    /// Desired share of the final profile generated by obfuscation, per level.
    #[serde(default)]
    pub targets: BTreeMap<DisruptionLevel, f64>,
    #[serde(default)]
    pub policy: WeightagePolicy,
}

fn default_level() -> DisruptionLevel {
    DisruptionLevel::Medium
}

fn default_candidates() -> usize {
    3
}

fn default_hours() -> [u32; 2] {
    [0, 24]
}

impl PrivacySection {
    pub fn spec(&self) -> PrivacySpec {
        PrivacySpec {
            private_interests: self.private_interests.iter().cloned().collect(),
            private_app_categories: self.private_app_categories.iter().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub v: f64,
    pub beta: f64,
    pub epsilon: f64,
    /// Desired time-average penalty. Defaults to the worst per-slot penalty.
    #[serde(default)]
    pub p_target: Option<f64>,
    pub cost: f64,
    pub c_min: f64,
    pub c_max: f64,
    #[serde(default)]
    pub pavg_midpoint: bool,
    #[serde(default = "default_rule")]
    pub rule: DecisionRule,
}

fn default_rule() -> DecisionRule {
    DecisionRule::MinObjective
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection {
            v: 5.0,
            beta: 0.5,
            epsilon: 0.5,
            p_target: None,
            cost: 1.0,
            c_min: 0.01,
            c_max: 0.25,
            pavg_midpoint: false,
            rule: DecisionRule::MinObjective,
        }
    }
}

impl ControlSection {
    pub fn params(&self, p_target: f64) -> ControlParams {
        ControlParams {
            v: self.v,
            beta: self.beta,
            epsilon: self.epsilon,
            p_target: self.p_target.unwrap_or(p_target),
            cost: self.cost,
            pavg_midpoint: self.pavg_midpoint,
            rule: self.rule,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub horizon_s: u64,
    pub slot_s: u64,
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            horizon_s: 24 * 3600,
            slot_s: 300,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrafficSection {
    #[serde(flatten)]
    pub model: TrafficModel,
    #[serde(default)]
    pub refresh: RefreshDistribution,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResourcesSection {
    #[serde(flatten)]
    pub classes: ClassTable,
    #[serde(default)]
    pub storage: StorageTable,
}

/// A scenario with its catalog loaded and the user's profile derived.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub catalog: AppCatalog,
    pub taxonomy: Option<InterestTaxonomy>,
    pub context: ContextProfile,
}

impl Prepared {
    pub fn interests(&self) -> Interests<'_> {
        match &self.taxonomy {
            Some(t) => Interests::Taxonomy(t, MappingConfig::default()),
            None => Interests::ByCategory,
        }
    }
}

impl SimScenario {
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut s: SimScenario = toml::from_str(text).map_err(|e| Error::parse("scenario", e))?;
        s.base_dir = base_dir.map(Path::to_path_buf);
        Ok(s)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path.parent()).map_err(|e| Error::parse(path.display().to_string(), e))
    }

    pub fn catalog_document(&self) -> Result<CatalogDocument> {
        match &self.catalog.path {
            Some(p) => {
                let full = match &self.base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.clone(),
                };
                CatalogDocument::from_path(full)
            }
            None => Ok(self.catalog.inline.clone()),
        }
    }

    pub fn prepare(&self) -> Result<Prepared> {
        let doc = self.catalog_document()?;
        let catalog = doc.catalog()?;
        let taxonomy = if doc.interest_categories.is_empty() {
            None
        } else {
            Some(doc.taxonomy(&catalog)?)
        };
        let context = ContextProfile::new(
            self.user.installed.iter().cloned(),
            self.user.usage.clone(),
            &catalog,
        )?;
        Ok(Prepared {
            catalog,
            taxonomy,
            context,
        })
    }

    pub fn with_level(&self, level: DisruptionLevel) -> SimScenario {
        let mut s = self.clone();
        s.privacy.scenario = level;
        s
    }

    /// Every problem with the scenario; empty when it is valid.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |r: Result<()>| {
            if let Err(e) = r {
                out.push(e.to_string());
            }
        };

        let prepared = self.prepare();
        let prepared = match prepared {
            Ok(p) => Some(p),
            Err(e) => {
                push(Err(e));
                None
            }
        };

        let u = &self.user;
        if u.activity.len() != 24 {
            push(Err(Error::invalid(
                "user.activity",
                format!("need 24 hourly values, got {}", u.activity.len()),
            )));
        }
        if u.activity.iter().any(|p| !(0.0..=1.0).contains(p)) {
            push(Err(Error::invalid(
                "user.activity",
                "probabilities must be in [0, 1]",
            )));
        }
        if !(0.0..=1.0).contains(&u.history_rate) {
            push(Err(Error::invalid("user.history_rate", "must be in [0, 1]")));
        }
        if !(0.0..=1.0).contains(&u.ad_click_rate) {
            push(Err(Error::invalid("user.ad_click_rate", "must be in [0, 1]")));
        }
        let [lo, hi] = u.slot_change;
        if !(0.0 < lo && lo <= hi && hi <= self.control.c_max) {
            push(Err(Error::invalid(
                "user.slot_change",
                "need 0 < low <= high <= control.c_max",
            )));
        }
        if !(u.ceiling_factor >= 1.0) {
            push(Err(Error::invalid("user.ceiling_factor", "must be >= 1")));
        }

        let p = &self.privacy;
        if p.private_app_categories.is_empty() {
            push(Err(Error::invalid(
                "privacy.private_app_categories",
                "name at least one category to protect",
            )));
        }
        if p.candidates == 0 {
            push(Err(Error::invalid("privacy.candidates", "must be >= 1")));
        }
        let [start, end] = p.obfuscation_hours;
        if start >= end || end > 24 {
            push(Err(Error::invalid(
                "privacy.obfuscation_hours",
                "need 0 <= start < end <= 24",
            )));
        }
        for (level, t) in &p.targets {
            if !(*t > 0.0 && *t < 1.0) {
                push(Err(Error::invalid(
                    format!("privacy.targets.{level}"),
                    "must be in (0, 1)",
                )));
            }
        }
        if let Some(prep) = &prepared {
            push(self.privacy.spec().validate(&prep.catalog, &prep.interests()));
            match assign_weightages(&prep.context) {
                Ok(profile) => {
                    for c in &p.private_app_categories {
                        if profile.weight(c) <= 0.0 {
                            push(Err(Error::invalid(
                                "privacy.private_app_categories",
                                format!("`{c}` is not in the user's profile"),
                            )));
                        }
                    }
                }
                Err(e) => push(Err(e)),
            }
        }

        let c = &self.control;
        push(c.params(0.0).validate());
        if !(c.v > 0.0) {
            push(Err(Error::invalid("control.v", "must be > 0")));
        }
        if !(0.0 <= c.c_min && c.c_min <= c.c_max && c.c_max.is_finite()) {
            push(Err(Error::invalid("control.c_max", "need 0 <= c_min <= c_max")));
        }
        if !(c.c_max > 0.0) {
            push(Err(Error::invalid("control.c_max", "must be > 0")));
        }

        let s = &self.sim;
        if s.slot_s == 0 || s.horizon_s == 0 || !s.horizon_s.is_multiple_of(s.slot_s) {
            push(Err(Error::invalid(
                "sim",
                "horizon_s must be a positive multiple of slot_s",
            )));
        }

        push(self.traffic.model.validate());
        push(self.traffic.refresh.validate());
        push(self.resources.classes.validate());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!("scenario `{}`", self.name), d.join("; ")))
        }
    }
}
