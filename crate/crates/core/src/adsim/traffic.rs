//! Per-ad traffic volume and ad refresh schedules.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::catalog::App;
use crate::error::{Error, Result};

pub const MB: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Get,
    Ok,
    Other,
}

/// Measured sizes (bytes) of ad-related objects and control messages.
pub const MESSAGE_TABLE: &[(&str, MessageKind, u32)] = &[
    ("GET /pagead/images", MessageKind::Get, 578),
    ("GET /geocode", MessageKind::Get, 224),
    ("GET /simgad", MessageKind::Get, 252),
    ("GET /mads/gma", MessageKind::Get, 685),
    ("GET /imp", MessageKind::Get, 244),
    ("GET /generate_204", MessageKind::Get, 244),
    ("GET /csi", MessageKind::Get, 595),
    ("200 Ok", MessageKind::Ok, 496),
    ("Ok text/html", MessageKind::Ok, 1200),
    ("Ok PNG", MessageKind::Ok, 1300),
    ("Ok GIF", MessageKind::Ok, 1000),
    ("Ok JPEG", MessageKind::Ok, 1300),
    ("Ok application/json", MessageKind::Ok, 240),
    ("Ok text/javascript", MessageKind::Ok, 800),
    ("Ok text/css", MessageKind::Ok, 824),
    ("DNS Query Request", MessageKind::Other, 68),
    ("DNS Query Response", MessageKind::Other, 334),
    ("POST", MessageKind::Other, 350),
    ("TCP reassembled PDU", MessageKind::Other, 1434),
    ("no content", MessageKind::Other, 396),
    ("TCP Ack", MessageKind::Other, 66),
    ("TCP Syn", MessageKind::Other, 74),
];

/// Which table rows an ad's control messages are drawn from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageMix {
    /// The ad's own GET requests.
    #[default]
    GetOnly,
    GetAndOk,
    AllRows,
}

impl MessageMix {
    pub fn sizes(self) -> Vec<u32> {
        MESSAGE_TABLE
            .iter()
            .filter(|(_, kind, _)| match self {
                MessageMix::GetOnly => *kind == MessageKind::Get,
                MessageMix::GetAndOk => *kind != MessageKind::Other,
                MessageMix::AllRows => true,
            })
            .map(|(_, _, bytes)| *bytes)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficModel {
    pub payload_mean: u32,
    /// Payload is uniform on `[mean − jitter, mean + jitter]`.
    pub payload_jitter: u32,
    pub objects_min: u32,
    pub objects_max: u32,
    pub messages_min: u32,
    pub messages_max: u32,
    pub mix: MessageMix,
}

impl Default for TrafficModel {
    fn default() -> Self {
        TrafficModel {
            payload_mean: 16384,
            payload_jitter: 4096,
            objects_min: 8,
            objects_max: 10,
            messages_min: 30,
            messages_max: 35,
            mix: MessageMix::GetOnly,
        }
    }
}

impl TrafficModel {
    pub fn validate(&self) -> Result<()> {
        if self.payload_mean == 0 || self.payload_jitter >= self.payload_mean {
            return Err(Error::invalid(
                "traffic.payload_jitter",
                "need 0 <= jitter < mean",
            ));
        }
        if self.objects_min > self.objects_max || self.messages_min > self.messages_max {
            return Err(Error::invalid("traffic", "min counts must not exceed max counts"));
        }
        Ok(())
    }

    /// Expected bytes of one ad.
    pub fn mean_ad_bytes(&self) -> f64 {
        let sizes = self.mix.sizes();
        let mean_msg = sizes.iter().map(|&s| f64::from(s)).sum::<f64>() / sizes.len() as f64;
        let msgs = f64::from(self.messages_min + self.messages_max) / 2.0;
        f64::from(self.payload_mean) + msgs * mean_msg
    }
}

/// Bytes and objects moved by a batch of ads.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficTotals {
    pub ads: u64,
    pub objects: u64,
    pub messages: u64,
    pub bytes: u64,
}

/// Draws `requests` ads: payload plus 30–35 control messages each.
pub fn ad_traffic<R: Rng + ?Sized>(requests: u64, model: &TrafficModel, rng: &mut R) -> TrafficTotals {
    let sizes = model.mix.sizes();
    let lo = model.payload_mean - model.payload_jitter;
    let hi = model.payload_mean + model.payload_jitter;
    let mut t = TrafficTotals::default();
    for _ in 0..requests {
        let payload = rng.random_range(lo..=hi);
        let objects = rng.random_range(model.objects_min..=model.objects_max);
        let messages = rng.random_range(model.messages_min..=model.messages_max);
        let control: u64 = (0..messages)
            .map(|_| u64::from(sizes[rng.random_range(0..sizes.len())]))
            .sum();
        t.ads += 1;
        t.objects += u64::from(objects);
        t.messages += u64::from(messages);
        t.bytes += u64::from(payload) + control;
    }
    t
}

pub fn ad_traffic_volume<R: Rng + ?Sized>(requests: u64, model: &TrafficModel, rng: &mut R) -> u64 {
    ad_traffic(requests, model, rng).bytes
}

/// Request times `0, r, 2r, … < horizon` for an app with refresh rate `r`.
pub fn refresh_schedule(app: &App, horizon_s: u64) -> Result<Vec<u64>> {
    schedule(app.refresh_rate_s, horizon_s)
}

pub fn schedule(rate_s: u32, horizon_s: u64) -> Result<Vec<u64>> {
    if horizon_s == 0 {
        return Err(Error::invalid("horizon", "must be > 0"));
    }
    if rate_s == 0 {
        return Err(Error::invalid("refresh_rate_s", "must be > 0"));
    }
    Ok((0..horizon_s).step_by(rate_s as usize).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefreshDistribution {
    pub values: Vec<u32>,
    pub probabilities: Vec<f64>,
}

impl Default for RefreshDistribution {
    fn default() -> Self {
        RefreshDistribution {
            values: vec![20, 30, 45, 60],
            probabilities: vec![0.36, 0.47, 0.15, 0.02],
        }
    }
}

impl RefreshDistribution {
    pub fn validate(&self) -> Result<()> {
        let field = "traffic.refresh.probabilities";
        if self.values.is_empty() || self.values.len() != self.probabilities.len() {
            return Err(Error::invalid(field, "need one probability per value"));
        }
        if self.values.contains(&0) {
            return Err(Error::invalid("traffic.refresh.values", "rates must be > 0"));
        }
        if self.probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid(field, "probabilities must be >= 0"));
        }
        let sum: f64 = self.probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(field, format!("sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

pub fn sample_refresh_rate<R: Rng + ?Sized>(dist: &RefreshDistribution, rng: &mut R) -> Result<u32> {
    dist.validate()?;
    let index = WeightedIndex::new(&dist.probabilities)
        .map_err(|e| Error::invalid("traffic.refresh.probabilities", e.to_string()))?;
    Ok(dist.values[index.sample(rng)])
}
