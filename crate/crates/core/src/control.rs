//! Online drift-plus-penalty control of the obfuscation weightage.
//!
//! Each slot the controller tracks the request queue `R`, and in a developing
//! or evolving profile picks the obfuscation weightage `η'` minimizing
//! `R + V·p(η')` among the minimum, average and maximum rules. A stable profile
//! gets no obfuscation.

use std::fmt;
use std::io::Write;

use rand::RngExt;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiler::Phase;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Lowest objective among the three rules.
    MinObjective,
    Pmin,
    Pavg,
    Pmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlParams {
    pub v: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub p_target: f64,
    pub cost: f64,
    #[serde(default)]
    pub pavg_midpoint: bool,
    #[serde(default = "default_rule")]
    pub rule: DecisionRule,
}

fn default_rule() -> DecisionRule {
    DecisionRule::MinObjective
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            v: 5.0,
            beta: 0.5,
            epsilon: 0.5,
            p_target: 1.0,
            cost: 1.0,
            pavg_midpoint: false,
            rule: DecisionRule::MinObjective,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("control.v", self.v),
            ("control.beta", self.beta),
            ("control.epsilon", self.epsilon),
            ("control.p_target", self.p_target),
            ("control.cost", self.cost),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::invalid(
                    field,
                    format!("{value} is not a finite value >= 0"),
                ));
            }
        }
        Ok(())
    }

    /// Worst per-slot penalty when every slot's change is at most `c_max`.
    /// Used as `p'` this makes the time-average bound hold on every path.
    pub fn admissible_target(&self, bounds: &ControlBounds, c_max: f64) -> f64 {
        penalty(self, bounds.upper(), c_max)
    }
}

/// Per-category weightage bounds handed to the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub eta_min: f64,
    pub eta_max: f64,
    /// Largest weightage an obfuscation category may add.
    pub eta_prime_max: f64,
}

impl ControlBounds {
    pub fn new(eta_min: f64, eta_max: f64, eta_prime_max: f64) -> Result<Self> {
        let ok = [eta_min, eta_max, eta_prime_max]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if !ok || eta_min > eta_max {
            return Err(Error::invalid(
                "bounds",
                format!("need 0 <= eta_min <= eta_max and eta_prime_max >= 0, got ({eta_min}, {eta_max}, {eta_prime_max})"),
            ));
        }
        Ok(ControlBounds {
            eta_min,
            eta_max,
            eta_prime_max,
        })
    }

    /// The p_max weightage and upper end of the feasible set.
    pub fn upper(&self) -> f64 {
        self.eta_max.max(self.eta_max + self.eta_prime_max)
    }

    /// The p_min weightage and lower end of the feasible set.
    pub fn lower(&self) -> f64 {
        self.eta_min.max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub r: f64,
    pub t: u64,
    /// Running `Σ R²`.
    pub q: f64,
    pub b: f64,
}

impl QueueState {
    pub fn new(r: f64, b: f64) -> Self {
        QueueState { r, t: 0, q: r * r, b }
    }
}

/// `R = I − C_min`.
pub fn track_request(i_g: f64, c_min: f64) -> Result<f64> {
    if c_min > i_g {
        return Err(Error::OutOfBounds {
            what: "C_min",
            value: c_min,
            lower: f64::NEG_INFINITY,
            upper: i_g,
        });
    }
    Ok(i_g - c_min)
}

/// `R' = I + R`, `t' = t + 1`, `Q' = Q + R'²`.
pub fn advance_queue(state: &QueueState, i_g: f64) -> QueueState {
    let r = i_g + state.r;
    QueueState {
        r,
        t: state.t + 1,
        q: state.q + r * r,
        b: state.b,
    }
}

pub fn lyapunov(history: &[f64]) -> f64 {
    history.iter().map(|r| r * r).sum()
}

pub fn drift(q_next: f64, q_now: f64) -> f64 {
    q_next - q_now
}

/// `p = C·η' + β(I + η') + β·I`.
pub fn penalty(params: &ControlParams, eta: f64, i_g: f64) -> f64 {
    params.cost * eta + params.beta * (i_g + eta) + params.beta * i_g
}

/// `B = ½·max{C_max, C_min}`.
pub fn compute_b(c_max: f64, c_min: f64) -> f64 {
    0.5 * c_max.max(c_min)
}

/// `p' + B/V + R_1/(V·t)`.
pub fn penalty_bound(params: &ControlParams, b: f64, r1: f64, t: u64) -> Result<f64> {
    if params.v <= 0.0 {
        return Err(Error::invalid("control.v", "the penalty bound needs V > 0"));
    }
    if t == 0 {
        return Err(Error::invalid("t", "slots are counted from 1"));
    }
    Ok(params.p_target + b / params.v + r1 / (params.v * t as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateCase {
    Stable,
    DevEvoPmin,
    DevEvoPavg,
    DevEvoPmax,
}

impl fmt::Display for StateCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateCase::Stable => "stable",
            StateCase::DevEvoPmin => "dev_evo_pmin",
            StateCase::DevEvoPavg => "dev_evo_pavg",
            StateCase::DevEvoPmax => "dev_evo_pmax",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlDecision {
    pub eta: f64,
    pub objective: f64,
    pub case: StateCase,
    pub penalty: f64,
}

/// `R + V·p(η')`.
pub fn objective(state: &QueueState, params: &ControlParams, eta: f64, i_g: f64) -> f64 {
    state.r + params.v * penalty(params, eta, i_g)
}

/// One controller decision.
///
/// Empty and stable profiles get `η' = 0` with objective 0. Otherwise the
/// candidates are `max{0, η_min}`, `min{η_min, η_max}` (or the midpoint when
/// `pavg_midpoint` is set) and `max{η_max, η_max + η'_max}`; the configured rule
/// picks one, ties going to the earlier candidate.
pub fn control_step(
    state: &QueueState,
    phase: Phase,
    i_g: f64,
    bounds: &ControlBounds,
    params: &ControlParams,
) -> Result<ControlDecision> {
    let bounds = ControlBounds::new(bounds.eta_min, bounds.eta_max, bounds.eta_prime_max)?;
    if matches!(phase, Phase::Stable | Phase::Empty) {
        return Ok(ControlDecision {
            eta: 0.0,
            objective: params.v * (params.cost * 0.0 + params.beta * 0.0),
            case: StateCase::Stable,
            penalty: penalty(params, 0.0, i_g),
        });
    }
    let pavg = if params.pavg_midpoint {
        (bounds.eta_min + bounds.eta_max) / 2.0
    } else {
        bounds.eta_min.min(bounds.eta_max)
    };
    let candidates = [
        (StateCase::DevEvoPmin, bounds.lower()),
        (StateCase::DevEvoPavg, pavg),
        (StateCase::DevEvoPmax, bounds.upper()),
    ];
    let decide = |(case, eta): (StateCase, f64)| ControlDecision {
        eta,
        objective: objective(state, params, eta, i_g),
        case,
        penalty: penalty(params, eta, i_g),
    };
    let pick = match params.rule {
        DecisionRule::Pmin => candidates[0],
        DecisionRule::Pavg => candidates[1],
        DecisionRule::Pmax => candidates[2],
        DecisionRule::MinObjective => {
            return Ok(candidates
                .into_iter()
                .map(decide)
                .reduce(|best, d| if d.objective < best.objective { d } else { best })
                .expect("three candidates"));
        }
    };
    Ok(decide(pick))
}

/// Per-slot profile-change magnitude, capped at `C_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DeltaDistribution {
    /// With probability `p_change` the change is uniform on `[C_min, C_max]`, else 0.
    Uniform { p_change: f64 },
    /// `min(k·unit, C_max)` with `k ~ Poisson(lambda)`.
    Poisson { lambda: f64, unit: f64 },
}

impl Default for DeltaDistribution {
    fn default() -> Self {
        DeltaDistribution::Uniform { p_change: 0.6 }
    }
}

impl DeltaDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DeltaDistribution::Uniform { p_change } if (0.0..=1.0).contains(&p_change) => Ok(()),
            DeltaDistribution::Poisson { lambda, unit } if lambda > 0.0 && unit >= 0.0 => Ok(()),
            _ => Err(Error::invalid("control.delta", "bad distribution parameters")),
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, c_min: f64, c_max: f64, rng: &mut R) -> f64 {
        match *self {
            DeltaDistribution::Uniform { p_change } => {
                if rng.random_bool(p_change) {
                    if c_max > c_min {
                        rng.random_range(c_min..=c_max)
                    } else {
                        c_max
                    }
                } else {
                    0.0
                }
            }
            DeltaDistribution::Poisson { lambda, unit } => {
                let k: f64 = Poisson::new(lambda).expect("validated lambda").sample(rng);
                (k * unit).min(c_max)
            }
        }
    }
}

/// One row of the decision log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub t: u64,
    pub state_case: StateCase,
    pub eta_lprime: f64,
    pub penalty: f64,
    pub objective: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub bound: f64,
    /// Time-average penalty up to and including this slot.
    pub average_penalty: f64,
}

/// Stand-alone driver that feeds the controller i.i.d. profile changes.
/// A slot without change counts as stable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLoop {
    pub params: ControlParams,
    pub bounds: ControlBounds,
    pub c_min: f64,
    pub c_max: f64,
    pub delta: DeltaDistribution,
    pub slots: u64,
}

impl ControlLoop {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.delta.validate()?;
        ControlBounds::new(
            self.bounds.eta_min,
            self.bounds.eta_max,
            self.bounds.eta_prime_max,
        )?;
        if !(0.0 <= self.c_min && self.c_min <= self.c_max && self.c_max.is_finite()) {
            return Err(Error::invalid("control", "need 0 <= c_min <= c_max"));
        }
        Ok(())
    }

    pub fn run(&self, seed: u64) -> Result<Vec<SlotRecord>> {
        self.validate()?;
        let mut rng = rng::stream(seed, "control");
        let b = compute_b(self.c_max, self.c_min);
        let mut out = Vec::with_capacity(self.slots as usize);
        let mut state = QueueState::new(0.0, b);
        let mut r1 = 0.0;
        let mut sum = 0.0;
        for t in 1..=self.slots {
            let i_g = self.delta.sample(self.c_min, self.c_max, &mut rng);
            if t == 1 {
                r1 = track_request(i_g, self.c_min).unwrap_or(0.0);
                state = QueueState::new(r1, b);
            }
            let phase = if i_g == 0.0 {
                Phase::Stable
            } else {
                Phase::Evolution
            };
            let d = control_step(&state, phase, i_g, &self.bounds, &self.params)?;
            sum += d.penalty;
            out.push(SlotRecord {
                t,
                state_case: d.case,
                eta_lprime: d.eta,
                penalty: d.penalty,
                objective: d.objective,
                r: state.r,
                q: state.q,
                bound: penalty_bound(&self.params, b, r1, t)?,
                average_penalty: sum / t as f64,
            });
            state = advance_queue(&state, i_g);
        }
        Ok(out)
    }
}

/// Writes `t,state_case,eta_lprime,penalty,objective,R,Q,bound`.
pub fn write_decision_log<W: Write>(records: &[SlotRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::parse("decision log", e);
    w.write_record([
        "t",
        "state_case",
        "eta_lprime",
        "penalty",
        "objective",
        "R",
        "Q",
        "bound",
    ])
    .map_err(err)?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.state_case.to_string(),
            r.eta_lprime.to_string(),
            r.penalty.to_string(),
            r.objective.to_string(),
            r.r.to_string(),
            r.q.to_string(),
            r.bound.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::parse("decision log", e))
}
