//! Profile lifecycle: empty, establishment, evolution and stable phases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Empty,
    Establishment,
    Evolution,
    Stable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifecycleConfig {
    pub slot_s: u64,
    /// Wall time since first activity before a profile counts as established.
    pub establishment_s: u64,
    /// Active slots needed before a profile counts as established.
    pub min_active_slots: u64,
    /// Quiet time after which an evolving profile is stable.
    pub evolution_threshold_s: u64,
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        LifecycleConfig {
            slot_s: 300,
            establishment_s: 72 * 3600,
            min_active_slots: 50,
            evolution_threshold_s: 24 * 3600,
        }
    }
}

/// One slot of observed behaviour. `change` is the total profile change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityRecord {
    pub slot: u64,
    pub change: f64,
    pub active: bool,
}

impl ActivityRecord {
    pub fn new(slot: u64, change: f64, active: bool) -> Self {
        ActivityRecord { slot, change, active }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileState {
    pub phase: Phase,
    pub entered_at: u64,
    pub active_slots: u64,
}

/// Incremental state machine over chronologically ordered records.
#[derive(Debug, Clone)]
pub struct LifecycleTracker {
    config: LifecycleConfig,
    state: ProfileState,
    first_activity: Option<u64>,
    last_change: Option<u64>,
    last_slot: Option<u64>,
}

impl LifecycleTracker {
    pub fn new(config: LifecycleConfig) -> Self {
        LifecycleTracker {
            config,
            state: ProfileState {
                phase: Phase::Empty,
                entered_at: 0,
                active_slots: 0,
            },
            first_activity: None,
            last_change: None,
            last_slot: None,
        }
    }

    /// A tracker for a profile that was already established before `slot`.
    pub fn established(config: LifecycleConfig, slot: u64) -> Self {
        let mut tracker = Self::new(config);
        tracker.state = ProfileState {
            phase: Phase::Evolution,
            entered_at: slot,
            active_slots: config.min_active_slots,
        };
        tracker.first_activity = Some(slot);
        tracker.last_change = Some(slot);
        tracker
    }

    pub fn state(&self) -> ProfileState {
        self.state
    }

    pub fn observe(&mut self, record: ActivityRecord) -> Result<ProfileState> {
        if let Some(previous) = self.last_slot {
            if record.slot < previous {
                return Err(Error::UnorderedHistory {
                    previous,
                    slot: record.slot,
                });
            }
        }
        self.last_slot = Some(record.slot);
        let changed = record.change != 0.0;
        if record.active || changed {
            self.first_activity.get_or_insert(record.slot);
        }
        if record.active {
            self.state.active_slots += 1;
        }
        if changed {
            self.last_change = Some(record.slot);
        }

        let slot = record.slot;
        let cfg = self.config;
        loop {
            let next = match self.state.phase {
                Phase::Empty if self.first_activity.is_some() => Phase::Establishment,
                Phase::Establishment => {
                    let since = slot - self.first_activity.unwrap_or(slot) + 1;
                    if since * cfg.slot_s >= cfg.establishment_s
                        && self.state.active_slots >= cfg.min_active_slots
                    {
                        Phase::Evolution
                    } else {
                        break;
                    }
                }
                Phase::Evolution => {
                    let quiet_from = self.last_change.or(self.first_activity).unwrap_or(slot);
                    if !changed && (slot - quiet_from) * cfg.slot_s >= cfg.evolution_threshold_s {
                        Phase::Stable
                    } else {
                        break;
                    }
                }
                Phase::Stable if changed => Phase::Evolution,
                _ => break,
            };
            self.state.phase = next;
            self.state.entered_at = slot;
        }
        Ok(self.state)
    }
}

/// Replays `history` from an empty profile.
pub fn profile_state(history: &[ActivityRecord], config: &LifecycleConfig) -> Result<ProfileState> {
    let mut tracker = LifecycleTracker::new(*config);
    for record in history {
        tracker.observe(*record)?;
    }
    Ok(tracker.state())
}
