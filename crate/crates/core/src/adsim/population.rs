//! Refresh rates and hourly ad bandwidth over a population of apps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::traffic::{
    ad_traffic_volume, sample_refresh_rate, schedule, RefreshDistribution, TrafficModel, MB,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateGroup {
    pub refresh_rate_s: u32,
    pub apps: usize,
    /// Mean ad traffic of one app running for an hour, MB.
    pub mean_hourly_mb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppSample {
    pub refresh_rate_s: u32,
    pub hourly_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub apps: usize,
    pub samples: Vec<AppSample>,
    pub groups: Vec<RateGroup>,
    /// Mean over all apps, MB per hour.
    pub mean_hourly_mb: f64,
}

/// Draws a refresh rate for each of `apps` apps and the bytes each moves in
/// one hour of use.
pub fn sample_population(
    apps: usize,
    dist: &RefreshDistribution,
    model: &TrafficModel,
    seed: u64,
) -> Result<PopulationSummary> {
    if apps == 0 {
        return Err(Error::Empty("app population"));
    }
    model.validate()?;
    let mut rates_rng = rng::stream(seed, "population");
    let mut by_rate: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    let mut samples = Vec::with_capacity(apps);
    for i in 0..apps {
        let rate = sample_refresh_rate(dist, &mut rates_rng)?;
        let requests = schedule(rate, 3600)?.len() as u64;
        let bytes = ad_traffic_volume(
            requests,
            model,
            &mut rng::stream(seed, &format!("population/{i}")),
        );
        by_rate.entry(rate).or_default().push(bytes);
        samples.push(AppSample {
            refresh_rate_s: rate,
            hourly_bytes: bytes,
        });
    }
    let total: u64 = by_rate.values().flatten().sum();
    Ok(PopulationSummary {
        apps,
        samples,
        groups: by_rate
            .into_iter()
            .map(|(rate, bytes)| RateGroup {
                refresh_rate_s: rate,
                apps: bytes.len(),
                mean_hourly_mb: bytes.iter().sum::<u64>() as f64 / bytes.len() as f64 / MB,
            })
            .collect(),
        mean_hourly_mb: total as f64 / apps as f64 / MB,
    })
}
