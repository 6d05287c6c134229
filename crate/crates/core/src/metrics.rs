//! Run reports and the privacy, utility and cost metrics derived from them.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::adsim::resources::ResourceReport;
use crate::adsim::traffic::TrafficTotals;
use crate::control::SlotRecord;
use crate::error::{Error, Result};
use crate::obfuscation::{Candidate, DisruptionLevel, ObfuscationPlan, Usability};
use crate::profiler::{InterestProfile, ProfileSnapshot};

const SHARE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub ratio: f64,
    /// The private category's share fell below the floor.
    pub eliminated: bool,
}

/// Share of the private category before over its share after. Values above 1
/// mean the category is less dominant than it was.
pub fn reduction_ratio(
    before: &InterestProfile,
    after: &InterestProfile,
    private: &str,
) -> Result<Reduction> {
    reduction_ratio_of(&before.weights(), &after.weights(), private)
}

/// [`reduction_ratio`] over raw weight maps.
pub fn reduction_ratio_of(
    before: &BTreeMap<String, f64>,
    after: &BTreeMap<String, f64>,
    private: &str,
) -> Result<Reduction> {
    let b = share(before, private);
    if b <= 0.0 {
        return Err(Error::invalid(
            "private category",
            format!("`{private}` is not in the profile before obfuscation"),
        ));
    }
    let a = share(after, private);
    Ok(Reduction {
        ratio: b / a.max(SHARE_FLOOR),
        eliminated: a < SHARE_FLOOR,
    })
}

fn share(weights: &BTreeMap<String, f64>, category: &str) -> f64 {
    let total: f64 = weights.values().sum();
    if total <= 0.0 {
        return 0.0;
    }
    weights.get(category).copied().unwrap_or(0.0) / total
}

/// `U_T = R_p + U_s`.
pub fn total_utility(reduction: f64, usability: f64) -> f64 {
    reduction + usability
}

/// `C = |S_o| / |S_a|`.
pub fn cost_ratio(obfuscation_apps: usize, installed_apps: usize) -> Result<f64> {
    if installed_apps == 0 {
        return Err(Error::invalid(
            "installed apps",
            "cost ratio needs at least one installed app",
        ));
    }
    Ok(obfuscation_apps as f64 / installed_apps as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficSummary {
    pub organic: TrafficTotals,
    pub obfuscation: TrafficTotals,
}

/// Numbers computed from the raw report fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedMetrics {
    /// Weakest reduction over the private categories.
    pub reduction_ratio: f64,
    pub eliminated: bool,
    pub reduction_by_category: BTreeMap<String, Reduction>,
    /// Private share before over the share of the new dominant category.
    pub reduction_ratio_vs_dominant: f64,
    /// Mean usability of the obfuscation apps.
    pub usability: f64,
    pub total_utility: f64,
    pub cost_ratio: f64,
    /// Percent of the final profile weight generated by obfuscation apps.
    pub disruption_pct: f64,
    /// Share of organic ads whose category matched the original top interests.
    pub relevance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub level: DisruptionLevel,
    pub seed: u64,
    pub horizon_s: u64,
    pub slot_s: u64,
    pub installed: Vec<String>,
    pub private_categories: Vec<String>,
    pub candidates: Vec<Candidate>,
    pub plan: ObfuscationPlan,
    pub usability: BTreeMap<String, Usability>,
    pub organic_requests: Vec<u64>,
    pub obfuscation_requests: Vec<u64>,
    pub profile_before: ProfileSnapshot,
    pub profile_after: ProfileSnapshot,
    /// Weight added by obfuscation apps, per category.
    pub obfuscation_weight: BTreeMap<String, f64>,
    /// Planned obfuscation weight that found no slot to run in.
    pub unrealized_weight: f64,
    pub served_ads: u64,
    pub relevant_ads: u64,
    pub traffic: TrafficSummary,
    pub resources: ResourceReport,
    pub control: Vec<SlotRecord>,
    pub derived: DerivedMetrics,
}

impl RunReport {
    /// Label used to group runs: `name:level`.
    pub fn label(&self) -> String {
        format!("{}:{}", self.scenario, self.level)
    }

    pub fn total_organic_requests(&self) -> u64 {
        self.organic_requests.iter().sum()
    }

    pub fn total_obfuscation_requests(&self) -> u64 {
        self.obfuscation_requests.iter().sum()
    }

    pub fn total_requests(&self) -> u64 {
        self.total_organic_requests() + self.total_obfuscation_requests()
    }

    pub fn recompute_derived(&self) -> Result<DerivedMetrics> {
        let before = &self.profile_before.weights;
        let after = &self.profile_after.weights;
        let mut by_category = BTreeMap::new();
        for c in &self.private_categories {
            by_category.insert(c.clone(), reduction_ratio_of(before, after, c)?);
        }
        let weakest = by_category
            .values()
            .copied()
            .reduce(|a, b| if b.ratio < a.ratio { b } else { a })
            .ok_or(Error::Empty("private categories"))?;

        let dominant = after.values().copied().fold(0.0, f64::max);
        let after_total: f64 = after.values().sum();
        let private_before = self
            .private_categories
            .iter()
            .map(|c| share(before, c))
            .fold(0.0, f64::max);
        let vs_dominant = if after_total > 0.0 {
            private_before / (dominant / after_total).max(SHARE_FLOOR)
        } else {
            0.0
        };

        let usability = if self.usability.is_empty() {
            0.0
        } else {
            sorted_sum(self.usability.values().map(|u| u.value)) / self.usability.len() as f64
        };
        let obfuscation: f64 = self.obfuscation_weight.values().sum();
        Ok(DerivedMetrics {
            reduction_ratio: weakest.ratio,
            eliminated: weakest.eliminated,
            reduction_by_category: by_category,
            reduction_ratio_vs_dominant: vs_dominant,
            usability,
            total_utility: total_utility(weakest.ratio, usability),
            cost_ratio: cost_ratio(self.plan.apps.len(), self.installed.len())?,
            disruption_pct: if after_total > 0.0 {
                100.0 * obfuscation / after_total
            } else {
                0.0
            },
            relevance: if self.served_ads > 0 {
                self.relevant_ads as f64 / self.served_ads as f64
            } else {
                0.0
            },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Order-independent sum.
fn sorted_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRuns {
    pub label: String,
    pub runs: Vec<RunReport>,
}

/// Groups reports by [`RunReport::label`], in label order.
pub fn group_by_scenario(reports: Vec<RunReport>) -> Vec<ScenarioRuns> {
    let mut groups: BTreeMap<String, Vec<RunReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.label()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(label, runs)| ScenarioRuns { label, runs })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub scenario: String,
    pub disruption_pct: f64,
    pub relevance: f64,
    #[serde(rename = "U_T")]
    pub u_t: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "R_c_bytes")]
    pub r_c_bytes: f64,
    #[serde(rename = "R_p_pct")]
    pub r_p_pct: f64,
    #[serde(rename = "R_b_pct")]
    pub r_b_pct: f64,
}

impl TradeoffRow {
    /// The row for a single run.
    pub fn of(r: &RunReport) -> Self {
        TradeoffRow {
            scenario: r.label(),
            disruption_pct: r.derived.disruption_pct,
            relevance: r.derived.relevance,
            u_t: r.derived.total_utility,
            c: r.derived.cost_ratio,
            r_c_bytes: r.resources.r_c_bytes as f64,
            r_p_pct: r.resources.r_p_pct,
            r_b_pct: r.resources.r_b_pct,
        }
    }
}

/// One row of per-scenario means. Means are taken over sorted values so the
/// result does not depend on run order.
pub fn tradeoff_curve(groups: &[ScenarioRuns]) -> Result<Vec<TradeoffRow>> {
    if groups.is_empty() {
        return Err(Error::Empty("run list"));
    }
    if groups.len() < 2 {
        return Err(Error::invalid(
            "runs",
            "a trade-off curve needs at least two scenarios",
        ));
    }
    groups
        .iter()
        .map(|g| {
            if g.runs.is_empty() {
                return Err(Error::Empty("scenario group"));
            }
            let n = g.runs.len() as f64;
            let mean = |f: &dyn Fn(&RunReport) -> f64| sorted_sum(g.runs.iter().map(f)) / n;
            Ok(TradeoffRow {
                scenario: g.label.clone(),
                disruption_pct: mean(&|r| r.derived.disruption_pct),
                relevance: mean(&|r| r.derived.relevance),
                u_t: mean(&|r| r.derived.total_utility),
                c: mean(&|r| r.derived.cost_ratio),
                r_c_bytes: mean(&|r| r.resources.r_c_bytes as f64),
                r_p_pct: mean(&|r| r.resources.r_p_pct),
                r_b_pct: mean(&|r| r.resources.r_b_pct),
            })
        })
        .collect()
}

/// Writes `scenario,disruption_pct,relevance,U_T,C,R_c_bytes,R_p_pct,R_b_pct`.
pub fn write_tradeoff_csv<W: Write>(rows: &[TradeoffRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::parse("trade-off csv", e))?;
    }
    w.flush().map_err(|e| Error::parse("trade-off csv", e))
}
