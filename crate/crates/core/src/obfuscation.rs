//! Obfuscation-app recommendation, scenario weightages and usability.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{AppCatalog, InterestTaxonomy, SimilarityMetric};
use crate::error::{Error, Result};
use crate::profiler::{interests_for_app, ContextProfile, MappingConfig, Thresholds};

pub const DEFAULT_CANDIDATES: usize = 10;
const DENOMINATOR_FLOOR: f64 = 1e-9;

/// Categories the user wants hidden.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacySpec {
    #[serde(default)]
    pub private_interests: BTreeSet<String>,
    #[serde(default)]
    pub private_app_categories: BTreeSet<String>,
}

impl PrivacySpec {
    pub fn is_empty(&self) -> bool {
        self.private_interests.is_empty() && self.private_app_categories.is_empty()
    }

    /// Every private app category must exist in the catalog and every private
    /// interest in `interests`.
    pub fn validate(&self, catalog: &AppCatalog, interests: &Interests) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Empty("privacy spec"));
        }
        for c in &self.private_app_categories {
            if catalog.category(c).is_none() {
                return Err(Error::UnknownCategory(c.clone()));
            }
        }
        for c in &self.private_interests {
            if !interests.knows(c, catalog) {
                return Err(Error::UnknownCategory(c.clone()));
            }
        }
        Ok(())
    }
}

/// How apps map to interest categories.
#[derive(Debug, Clone, Copy)]
pub enum Interests<'a> {
    /// Each app generates exactly its own app category.
    ByCategory,
    Taxonomy(&'a InterestTaxonomy, MappingConfig),
}

impl Interests<'_> {
    pub fn of(&self, app_id: &str, catalog: &AppCatalog) -> Result<BTreeSet<String>> {
        match self {
            Interests::ByCategory => Ok(BTreeSet::from([catalog.app(app_id)?.category.clone()])),
            Interests::Taxonomy(t, cfg) => interests_for_app(app_id, t, catalog, cfg),
        }
    }

    fn knows(&self, category: &str, catalog: &AppCatalog) -> bool {
        match self {
            Interests::ByCategory => catalog.category(category).is_some(),
            Interests::Taxonomy(t, _) => t.contains(category),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub app: String,
    /// Highest similarity to any installed app.
    pub score: f64,
}

/// Top-`k` non-installed apps outside every private category, ranked by
/// highest similarity to an installed app (ties: app id ascending).
pub fn candidate_apps(
    context: &ContextProfile,
    spec: &PrivacySpec,
    catalog: &AppCatalog,
    interests: &Interests,
    metric: &dyn SimilarityMetric,
    k: usize,
) -> Result<Vec<Candidate>> {
    let mut ranked = Vec::new();
    for app in catalog.apps() {
        if context.is_installed(&app.id) || spec.private_app_categories.contains(&app.category) {
            continue;
        }
        let generated = interests.of(&app.id, catalog)?;
        if !generated.is_disjoint(&spec.private_interests) {
            continue;
        }
        let mut score: f64 = 0.0;
        for installed in context.installed() {
            score = score.max(metric.similarity(catalog, &app.id, installed)?);
        }
        ranked.push(Candidate {
            app: app.id.clone(),
            score,
        });
    }
    if ranked.is_empty() {
        return Err(Error::NoEligibleApps);
    }
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.app.cmp(&b.app)));
    ranked.truncate(k);
    Ok(ranked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisruptionLevel {
    Low,
    Medium,
    High,
}

impl DisruptionLevel {
    pub const ALL: [DisruptionLevel; 3] = [Self::Low, Self::Medium, Self::High];

    /// Whether `eta` lies in this level's band for the given bounds.
    pub fn admits(self, eta: f64, bounds: Thresholds) -> bool {
        match self {
            Self::Low => eta > 0.0 && eta <= bounds.min,
            Self::Medium => eta >= bounds.min && eta <= bounds.max,
            Self::High => eta >= bounds.max,
        }
    }
}

impl fmt::Display for DisruptionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Low => "low",
            Self::Medium => "medium",
            Self::High => "high",
        })
    }
}

impl FromStr for DisruptionLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Self::Low),
            "medium" | "med" => Ok(Self::Medium),
            "high" => Ok(Self::High),
            _ => Err(Error::invalid(
                "scenario",
                format!("`{s}` is not low, medium or high"),
            )),
        }
    }
}

/// Representative points inside each disruption band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightagePolicy {
    /// Low = `low_fraction · η_min`.
    pub low_fraction: f64,
    /// High = `high_scale · η_max`.
    pub high_scale: f64,
}

impl Default for WeightagePolicy {
    fn default() -> Self {
        WeightagePolicy {
            low_fraction: 0.5,
            high_scale: 1.5,
        }
    }
}

/// Target obfuscation weightage for a scenario. Medium is the midpoint.
pub fn plan_weightage(level: DisruptionLevel, bounds: Thresholds, policy: &WeightagePolicy) -> Result<f64> {
    let bounds = Thresholds::new(bounds.min, bounds.max)?;
    if !(policy.low_fraction > 0.0 && policy.low_fraction < 1.0) || !(policy.high_scale > 1.0) {
        return Err(Error::invalid(
            "weightage policy",
            "need 0 < low_fraction < 1 and high_scale > 1",
        ));
    }
    Ok(match level {
        DisruptionLevel::Low => bounds.min * policy.low_fraction,
        DisruptionLevel::Medium => (bounds.min + bounds.max) / 2.0,
        DisruptionLevel::High => bounds.max * policy.high_scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Usability {
    pub value: f64,
    /// More than one installed app attains the minimum ratio.
    pub tied: bool,
    /// The installed app that attains the minimum (lowest id on ties).
    pub binding_app: String,
}

/// `U_s = min_p sim(a_o, p) / max_{q ∉ S_a} sim(q, p)` over installed apps `p`.
pub fn usability(
    candidate: &str,
    context: &ContextProfile,
    catalog: &AppCatalog,
    metric: &dyn SimilarityMetric,
) -> Result<Usability> {
    catalog.app(candidate)?;
    if context.is_installed(candidate) {
        return Err(Error::invalid(
            "candidate",
            format!("`{candidate}` is already installed"),
        ));
    }
    let outsiders: Vec<&str> = catalog
        .apps()
        .iter()
        .map(|a| a.id.as_str())
        .filter(|id| !context.is_installed(id))
        .collect();
    let mut best: Option<(f64, String)> = None;
    let mut tied = false;
    for installed in context.installed() {
        let mut denom: f64 = 0.0;
        for q in &outsiders {
            denom = denom.max(metric.similarity(catalog, q, installed)?);
        }
        let ratio = metric.similarity(catalog, candidate, installed)? / denom.max(DENOMINATOR_FLOOR);
        match &best {
            Some((b, _)) if (ratio - b).abs() <= 1e-12 => tied = true,
            Some((b, _)) if ratio > *b => {}
            _ => {
                best = Some((ratio, installed.to_string()));
                tied = false;
            }
        }
    }
    let (value, binding_app) = best.ok_or(Error::Empty("installed app set"))?;
    Ok(Usability {
        value,
        tied,
        binding_app,
    })
}

/// Recommended apps and the weightage they should generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObfuscationPlan {
    pub scenario: DisruptionLevel,
    pub apps: Vec<String>,
    pub target_weightage: f64,
}

impl ObfuscationPlan {
    /// Builds a plan and checks that none of its apps generate a private interest.
    pub fn new(
        scenario: DisruptionLevel,
        candidates: &[Candidate],
        target_weightage: f64,
        spec: &PrivacySpec,
        catalog: &AppCatalog,
        interests: &Interests,
    ) -> Result<Self> {
        for c in candidates {
            let app = catalog.app(&c.app)?;
            if spec.private_app_categories.contains(&app.category)
                || !interests
                    .of(&c.app, catalog)?
                    .is_disjoint(&spec.private_interests)
            {
                return Err(Error::invalid(
                    "plan",
                    format!("`{}` touches a private category", c.app),
                ));
            }
        }
        Ok(ObfuscationPlan {
            scenario,
            apps: candidates.iter().map(|c| c.app.clone()).collect(),
            target_weightage,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}
