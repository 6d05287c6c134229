//! Communication, processing, battery and storage overhead.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::normalize_term;
use crate::error::{Error, Result};

use super::traffic::MB;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCost {
    /// CPU utilization while the app runs, percent.
    pub cpu_pct: f64,
    /// Battery drained per hour of running, percent.
    pub battery_pct_per_h: f64,
}

/// App classes and the app categories that belong to each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassTable {
    pub classes: BTreeMap<String, ClassCost>,
    /// App category → class name.
    pub category_class: BTreeMap<String, String>,
    /// Class for categories missing from `category_class`.
    pub default_class: Option<String>,
}

impl Default for ClassTable {
    fn default() -> Self {
        // midpoints of the measured ranges: games 25–30 % CPU, others 15–20 %,
        // battery 30–40 % per hour
        ClassTable {
            classes: BTreeMap::from([
                (
                    "game".to_string(),
                    ClassCost {
                        cpu_pct: 27.5,
                        battery_pct_per_h: 35.0,
                    },
                ),
                (
                    "low_interaction".to_string(),
                    ClassCost {
                        cpu_pct: 17.5,
                        battery_pct_per_h: 35.0,
                    },
                ),
            ]),
            category_class: BTreeMap::from([("games".to_string(), "game".to_string())]),
            default_class: Some("low_interaction".to_string()),
        }
    }
}

impl ClassTable {
    pub fn class_of(&self, category: &str) -> Result<(&str, ClassCost)> {
        let name = self
            .category_class
            .get(category)
            .or(self.default_class.as_ref())
            .ok_or_else(|| Error::UnknownClass(format!("(none for category `{category}`)")))?;
        let cost = self
            .classes
            .get(name)
            .ok_or_else(|| Error::UnknownClass(name.clone()))?;
        Ok((name, *cost))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, c) in &self.classes {
            if !(c.cpu_pct >= 0.0 && c.battery_pct_per_h >= 0.0) {
                return Err(Error::invalid(
                    format!("resources.classes.{name}"),
                    "costs must be >= 0",
                ));
            }
        }
        for class in self.category_class.values().chain(&self.default_class) {
            if !self.classes.contains_key(class) {
                return Err(Error::UnknownClass(class.clone()));
            }
        }
        Ok(())
    }
}

/// Installation, data and cache sizes in MB (10^6 bytes).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StorageEntry {
    pub installation_mb: f64,
    pub data_mb: f64,
    pub cache_mb: f64,
}

impl StorageEntry {
    pub fn bytes(&self) -> StorageBytes {
        StorageBytes {
            installation: (self.installation_mb * MB).round() as u64,
            data: (self.data_mb * MB).round() as u64,
            cache: (self.cache_mb * MB).round() as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageBytes {
    pub installation: u64,
    pub data: u64,
    pub cache: u64,
}

impl StorageBytes {
    pub fn total(&self) -> u64 {
        self.installation + self.data + self.cache
    }

    fn add(&mut self, other: StorageBytes) {
        self.installation += other.installation;
        self.data += other.data;
        self.cache += other.cache;
    }
}

/// Per-app storage keyed by normalized app name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StorageTable(pub BTreeMap<String, StorageEntry>);

impl Default for StorageTable {
    fn default() -> Self {
        let rows: [(&str, f64, f64, f64); 14] = [
            ("Youtube", 117.0, 2.57, 361.0),
            ("Chrome", 86.88, 15.46, 1.53),
            ("Foxit PDF", 96.42, 1.17, 32.91),
            ("Google Play Store", 93.61, 7.48, 22.25),
            ("Babel", 51.98, 14.79, 0.02),
            ("Google Translate", 5.53, 392.0, 2.04),
            ("Amazon Kindle", 53.30, 123.33, 4.98),
            ("Subway Surf", 156.0, 85.98, 15.57),
            ("File Manager", 8.37, 28.04, 17.83),
            ("London City Guide", 60.98, 88.12, 4.56),
            ("Skype", 62.95, 28.22, 13.41),
            ("Viber", 159.0, 17.35, 0.12),
            ("Adobe Acrobat", 20.91, 0.47, 0.22),
            ("TripView Lite", 28.21, 5.92, 2.09),
        ];
        StorageTable(
            rows.iter()
                .map(|(name, i, d, c)| {
                    (
                        normalize_term(name).expect("non-empty name"),
                        StorageEntry {
                            installation_mb: *i,
                            data_mb: *d,
                            cache_mb: *c,
                        },
                    )
                })
                .collect(),
        )
    }
}

impl StorageTable {
    /// Looks an app up by id or name; `"subway_surf"` finds "Subway Surf".
    pub fn lookup(&self, app: &str) -> Option<StorageEntry> {
        normalize_term(app).and_then(|key| self.0.get(&key).copied())
    }
}

/// What one app did during a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppActivity {
    pub app: String,
    pub category: String,
    pub ad_requests: u64,
    pub bytes: u64,
    pub runtime_s: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppResources {
    pub class: String,
    pub r_c_bytes: u64,
    /// CPU percent averaged over the horizon.
    pub r_p_pct: f64,
    /// Battery percent drained.
    pub r_b_pct: f64,
    pub storage: Option<StorageBytes>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub horizon_s: u64,
    pub apps: BTreeMap<String, AppResources>,
    pub r_c_bytes: u64,
    pub r_p_pct: f64,
    pub r_b_pct: f64,
    pub storage: StorageBytes,
}

/// Sums per-app overheads. CPU and battery are class constants scaled by
/// runtime; bytes come from the traffic model.
pub fn resource_accounting(
    activity: &[AppActivity],
    classes: &ClassTable,
    storage: &StorageTable,
    horizon_s: u64,
) -> Result<ResourceReport> {
    if horizon_s == 0 {
        return Err(Error::invalid("horizon", "must be > 0"));
    }
    let mut report = ResourceReport {
        horizon_s,
        ..ResourceReport::default()
    };
    for a in activity {
        let (class, cost) = classes.class_of(&a.category)?;
        let hours = a.runtime_s as f64 / 3600.0;
        let entry = AppResources {
            class: class.to_string(),
            r_c_bytes: a.bytes,
            r_p_pct: cost.cpu_pct * a.runtime_s as f64 / horizon_s as f64,
            r_b_pct: cost.battery_pct_per_h * hours,
            storage: storage.lookup(&a.app).map(|s| s.bytes()),
        };
        report.r_c_bytes += entry.r_c_bytes;
        report.r_p_pct += entry.r_p_pct;
        report.r_b_pct += entry.r_b_pct;
        if let Some(s) = entry.storage {
            report.storage.add(s);
        }
        report.apps.insert(a.app.clone(), entry);
    }
    Ok(report)
}
