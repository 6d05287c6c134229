//! Time-binned usage traces and the flattening planner that tops idle slots
//! up with obfuscation-app activity.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::io::{Read, Write};

use rand::seq::index;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SLOT_S: u64 = 300;

/// One usage (ad request) event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageEvent {
    pub timestamp_s: f64,
    pub app: String,
}

impl UsageEvent {
    pub fn new(timestamp_s: f64, app: impl Into<String>) -> Self {
        UsageEvent {
            timestamp_s,
            app: app.into(),
        }
    }
}

/// Per-slot counts over a horizon of `bins.len() * slot_s` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageTrace {
    pub slot_s: u64,
    pub bins: Vec<u64>,
    /// Optional per-slot, per-app breakdown of `bins`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attribution: BTreeMap<u64, BTreeMap<String, u64>>,
}

impl UsageTrace {
    pub fn new(slot_s: u64, bins: Vec<u64>) -> Self {
        UsageTrace {
            slot_s,
            bins,
            attribution: BTreeMap::new(),
        }
    }

    pub fn horizon_s(&self) -> u64 {
        self.bins.len() as u64 * self.slot_s
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Writes `slot_index,count[,app_id]`. The app column appears only when
    /// the trace carries attribution; unattributed remainders get an empty id.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let attributed = !self.attribution.is_empty();
        let header: &[&str] = if attributed {
            &["slot_index", "count", "app_id"]
        } else {
            &["slot_index", "count"]
        };
        let io = |e: csv::Error| Error::parse("usage csv", e);
        w.write_record(header).map_err(io)?;
        for (slot, &count) in self.bins.iter().enumerate() {
            let slot_s = slot.to_string();
            if !attributed {
                w.write_record([slot_s.as_str(), &count.to_string()])
                    .map_err(io)?;
                continue;
            }
            let apps = self.attribution.get(&(slot as u64));
            let mut rest = count;
            for (app, n) in apps.into_iter().flatten() {
                w.write_record([slot_s.as_str(), &n.to_string(), app])
                    .map_err(io)?;
                rest = rest.saturating_sub(*n);
            }
            if rest > 0 || apps.is_none() {
                w.write_record([slot_s.as_str(), &rest.to_string(), ""])
                    .map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::parse("usage csv", e))
    }

    /// Reads the format written by [`UsageTrace::write_csv`]. Repeated slots
    /// accumulate; slots never listed count zero.
    pub fn read_csv<R: Read>(input: R, slot_s: u64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut trace = UsageTrace::new(slot_s, Vec::new());
        for row in r.records() {
            let row = row.map_err(|e| Error::parse("usage csv", e))?;
            let field = |i: usize| row.get(i).unwrap_or("").trim();
            let slot: usize = field(0)
                .parse()
                .map_err(|e| Error::parse("usage csv slot_index", e))?;
            let count: u64 = field(1).parse().map_err(|e| Error::parse("usage csv count", e))?;
            if trace.bins.len() <= slot {
                trace.bins.resize(slot + 1, 0);
            }
            trace.bins[slot] += count;
            let app = field(2);
            if !app.is_empty() {
                *trace
                    .attribution
                    .entry(slot as u64)
                    .or_default()
                    .entry(app.to_string())
                    .or_default() += count;
            }
        }
        Ok(trace)
    }
}

/// Counts events per slot: `bin[i] = #{e : ⌊t_e / slot⌋ = i}`.
pub fn bin_usage(events: &[UsageEvent], slot_s: u64, horizon_s: u64) -> Result<UsageTrace> {
    if slot_s == 0 {
        return Err(Error::invalid("slot_s", "must be > 0"));
    }
    let n = horizon_s.div_ceil(slot_s) as usize;
    let mut trace = UsageTrace::new(slot_s, vec![0; n]);
    for e in events {
        if !(e.timestamp_s >= 0.0 && e.timestamp_s < horizon_s as f64) {
            return Err(Error::invalid(
                "events",
                format!("timestamp {} outside [0, {horizon_s})", e.timestamp_s),
            ));
        }
        let slot = (e.timestamp_s / slot_s as f64).floor() as usize;
        trace.bins[slot] += 1;
        *trace
            .attribution
            .entry(slot as u64)
            .or_default()
            .entry(e.app.clone())
            .or_default() += 1;
    }
    Ok(trace)
}

pub fn mean_usage(trace: &UsageTrace) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Empty("trace"));
    }
    Ok(trace.total() as f64 / trace.len() as f64)
}

/// Mean squared deviation of the bins from `reference`.
pub fn usage_variance(trace: &UsageTrace, reference: f64) -> Result<f64> {
    variance_of(&trace.bins, reference)
}

fn variance_of(bins: &[u64], reference: f64) -> Result<f64> {
    if bins.is_empty() {
        return Err(Error::Empty("trace"));
    }
    let sum: f64 = bins
        .iter()
        .map(|&b| {
            let d = b as f64 - reference;
            d * d
        })
        .sum();
    Ok(sum / bins.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Insertion {
    pub slot: u64,
    pub app: String,
    pub units: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlattenPlan {
    pub insertions: Vec<Insertion>,
    pub budget_used: u64,
}

impl FlattenPlan {
    pub fn is_empty(&self) -> bool {
        self.insertions.is_empty()
    }

    /// Inserted units per slot for a trace of `len` slots.
    pub fn per_slot(&self, len: usize) -> Vec<u64> {
        let mut out = vec![0; len];
        for ins in &self.insertions {
            out[ins.slot as usize] += ins.units;
        }
        out
    }

    /// The trace with the insertions added and attributed.
    pub fn apply(&self, trace: &UsageTrace) -> UsageTrace {
        let mut out = trace.clone();
        for ins in &self.insertions {
            out.bins[ins.slot as usize] += ins.units;
            *out.attribution
                .entry(ins.slot)
                .or_default()
                .entry(ins.app.clone())
                .or_default() += ins.units;
        }
        out
    }

    /// Distinct slots that received at least one unit.
    pub fn slots(&self) -> BTreeSet<u64> {
        self.insertions.iter().map(|i| i.slot).collect()
    }
}

/// Greedy water-filling toward the trace mean.
pub fn flatten_plan(trace: &UsageTrace, apps: &[String], budget: u64) -> Result<FlattenPlan> {
    flatten_plan_masked(trace, apps, budget, None)
}

/// Like [`flatten_plan`], restricted to slots where `mask` is true.
///
/// A unit goes to the currently lowest eligible slot (ties: lowest index) as
/// long as it brings that slot closer to the mean. Apps take units in turn.
pub fn flatten_plan_masked(
    trace: &UsageTrace,
    apps: &[String],
    budget: u64,
    mask: Option<&[bool]>,
) -> Result<FlattenPlan> {
    if budget > 0 && apps.is_empty() {
        return Err(Error::invalid("apps", "a positive budget needs at least one app"));
    }
    if let Some(m) = mask {
        if m.len() != trace.len() {
            return Err(Error::invalid("mask", "length differs from the trace"));
        }
    }
    if budget == 0 || trace.is_empty() {
        return Ok(FlattenPlan::default());
    }
    let mean = mean_usage(trace)?;
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = trace
        .bins
        .iter()
        .enumerate()
        .filter(|(i, &b)| (b as f64) < mean && mask.is_none_or(|m| m[*i]))
        .map(|(i, &b)| Reverse((b, i)))
        .collect();

    let mut units: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut used = 0;
    let mut next_app = 0;
    while used < budget {
        let Some(Reverse((value, slot))) = heap.pop() else {
            break;
        };
        if value as f64 + 0.5 >= mean {
            break;
        }
        let key = (slot, next_app);
        let entry = units.entry(key).or_insert_with(|| {
            order.push(key);
            0
        });
        *entry += 1;
        next_app = (next_app + 1) % apps.len();
        used += 1;
        heap.push(Reverse((value + 1, slot)));
    }

    order.sort();
    let insertions = order
        .into_iter()
        .map(|(slot, app)| Insertion {
            slot: slot as u64,
            app: apps[app].clone(),
            units: units[&(slot, app)],
        })
        .collect();
    Ok(FlattenPlan {
        insertions,
        budget_used: used,
    })
}

/// `Σ max(mean − bin, 0)` over the (masked) slots: the budget that brings
/// every idle slot up to the mean.
pub fn flatten_deficit(trace: &UsageTrace, mask: Option<&[bool]>) -> Result<f64> {
    let mean = mean_usage(trace)?;
    Ok(trace
        .bins
        .iter()
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
        .map(|(_, &b)| (mean - b as f64).max(0.0))
        .sum())
}

/// Spreads `events` usage events over exactly `bins` distinct slots drawn from
/// the window `[start_s, end_s)`, every chosen slot receiving at least one.
pub fn synthetic_window_events<R: Rng + ?Sized>(
    start_s: u64,
    end_s: u64,
    slot_s: u64,
    bins: usize,
    events: usize,
    apps: &[String],
    rng: &mut R,
) -> Result<Vec<UsageEvent>> {
    if slot_s == 0 || end_s <= start_s {
        return Err(Error::invalid("window", "need slot_s > 0 and start < end"));
    }
    let first = start_s.div_ceil(slot_s);
    let last = end_s / slot_s;
    let available = last.saturating_sub(first) as usize;
    if bins > available || events < bins || apps.is_empty() {
        return Err(Error::invalid(
            "window",
            format!("cannot place {events} events in {bins} of {available} slots"),
        ));
    }
    let mut chosen: Vec<u64> = index::sample(rng, available, bins)
        .into_iter()
        .map(|i| first + i as u64)
        .collect();
    chosen.sort_unstable();
    let mut counts = vec![1usize; bins];
    for _ in bins..events {
        counts[rng.random_range(0..bins)] += 1;
    }
    let mut out = Vec::with_capacity(events);
    for (slot, n) in chosen.into_iter().zip(counts) {
        for _ in 0..n {
            let offset = rng.random_range(0.0..slot_s as f64);
            let app = &apps[out.len() % apps.len()];
            out.push(UsageEvent::new((slot * slot_s) as f64 + offset, app.clone()));
        }
    }
    out.sort_by(|a, b| a.timestamp_s.total_cmp(&b.timestamp_s));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn apps(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("o{i}")).collect()
    }

    #[test]
    fn binning_counts() {
        let events = [
            UsageEvent::new(10.0, "a"),
            UsageEvent::new(100.0, "a"),
            UsageEvent::new(299.9, "b"),
        ];
        let t = bin_usage(&events, 300, 1200).unwrap();
        assert_eq!(t.bins, [3, 0, 0, 0]);
        assert_eq!(bin_usage(&[], 300, 1200).unwrap().bins, [0; 4]);
        assert!(bin_usage(&[UsageEvent::new(1200.0, "a")], 300, 1200).is_err());
    }

    #[test]
    fn mean_and_variance() {
        let t = UsageTrace::new(300, vec![0, 2]);
        assert_eq!(mean_usage(&t).unwrap(), 1.0);
        assert_eq!(usage_variance(&t, 1.0).unwrap(), 1.0);
        let c = UsageTrace::new(300, vec![5; 7]);
        assert_eq!(usage_variance(&c, 5.0).unwrap(), 0.0);
        assert!(mean_usage(&UsageTrace::new(300, vec![])).is_err());
    }

    #[test]
    fn four_bin_fixture() {
        let t = UsageTrace::new(300, vec![4, 0, 0, 4]);
        let plan = flatten_plan(&t, &apps(2), 4).unwrap();
        assert_eq!(plan.per_slot(4), [0, 2, 2, 0]);
        assert_eq!(plan.budget_used, 4);
        let flat = plan.apply(&t);
        assert_eq!(flat.bins, [4, 2, 2, 4]);
        assert!(usage_variance(&flat, 2.0).unwrap() < usage_variance(&t, 2.0).unwrap());
        // round robin: o0, o1, o0, o1 over slots 1, 2, 1, 2
        assert_eq!(
            plan.insertions[0],
            Insertion {
                slot: 1,
                app: "o0".into(),
                units: 2
            }
        );
    }

    #[test]
    fn nothing_to_flatten() {
        let t = UsageTrace::new(300, vec![3; 6]);
        assert!(flatten_plan(&t, &apps(1), 10).unwrap().is_empty());
        let u = UsageTrace::new(300, vec![4, 0]);
        assert!(flatten_plan(&u, &[], 0).unwrap().is_empty());
        assert!(flatten_plan(&u, &[], 1).is_err());
    }

    #[test]
    fn mask_limits_slots() {
        let t = UsageTrace::new(300, vec![4, 0, 0, 4]);
        let mask = [true, false, true, true];
        let plan = flatten_plan_masked(&t, &apps(1), 4, Some(&mask)).unwrap();
        assert_eq!(plan.per_slot(4), [0, 0, 2, 0]);
        assert_eq!(flatten_deficit(&t, Some(&mask)).unwrap(), 2.0);
    }

    #[test]
    fn csv_round_trip() {
        let events = [UsageEvent::new(10.0, "a"), UsageEvent::new(400.0, "b")];
        let t = bin_usage(&events, 300, 900).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("slot_index,count,app_id\n"));
        assert_eq!(UsageTrace::read_csv(buf.as_slice(), 300).unwrap(), t);

        let plain = UsageTrace::new(300, vec![1, 0, 2]);
        let mut buf = Vec::new();
        plain.write_csv(&mut buf).unwrap();
        assert_eq!(UsageTrace::read_csv(buf.as_slice(), 300).unwrap(), plain);
    }

    #[test]
    fn overnight_window_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let events = synthetic_window_events(3600, 6 * 3600, 300, 27, 93, &apps(3), &mut rng).unwrap();
        assert_eq!(events.len(), 93);
        let t = bin_usage(&events, 300, 24 * 3600).unwrap();
        assert_eq!(t.bins.iter().filter(|b| **b > 0).count(), 27);
        assert!(events.iter().all(|e| (3600.0..21600.0).contains(&e.timestamp_s)));
    }
}
