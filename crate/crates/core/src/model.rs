//! Mission description and the pure sensing / uncertainty functions.
//!
//! Agents move on the segment `[0, L]`. Each target `i` carries an uncertainty
//! state `R_i` that grows at `A_i` while unobserved and is drained at
//! `B_i * P_i` by the joint detection probability `P_i` of the agents in range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A monitored point of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// Position on the mission segment.
    pub position: f64,
    /// Uncertainty growth rate `A_i` while unobserved.
    pub growth: f64,
    /// Uncertainty drain rate `B_i` under full detection.
    pub decay: f64,
    /// Initial uncertainty `R_i(0)`.
    pub initial: f64,
}

/// Static description of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub start: f64,
    /// Initial control value `u_j(0)`; reconciled with the first switching point.
    pub initial_control: i8,
    pub sensing_range: f64,
}

/// Which events each agent's gradient replica is allowed to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoMode {
    /// Every agent sees every event.
    Centralized,
    /// Local information plus globally broadcast depletion events.
    Almost,
    /// Local information only.
    Local,
}

impl InfoMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InfoMode::Centralized => "centralized",
            InfoMode::Almost => "almost",
            InfoMode::Local => "local",
        }
    }
}

impl std::str::FromStr for InfoMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "centralized" => Ok(InfoMode::Centralized),
            "almost" => Ok(InfoMode::Almost),
            "local" => Ok(InfoMode::Local),
            other => Err(format!(
                "unknown information mode '{other}' (expected centralized, almost or local)"
            )),
        }
    }
}

impl std::fmt::Display for InfoMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Numeric settings of the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    /// Fixed integration step of the scenario file. Validated and kept for
    /// round trips; the integrator is exact between events and never steps.
    pub step: f64,
    /// Time tolerance for event localization and simultaneity.
    pub event_tol: f64,
    /// Output sampling period of the trajectory time series.
    pub sample_dt: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            step: 1e-3,
            event_tol: 1e-9,
            sample_dt: 0.1,
        }
    }
}

/// Immutable mission description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub length: f64,
    pub horizon: f64,
    pub targets: Vec<Target>,
    pub agents: Vec<AgentSpec>,
    pub comm_range: f64,
    pub mode: InfoMode,
    pub numerics: Numerics,
}

impl Scenario {
    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    /// Checks every invariant of the mission description.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if !(self.length.is_finite() && self.length > 0.0) {
            return bad(format!(
                "mission length L must be positive, got {}",
                self.length
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon T must be positive, got {}", self.horizon));
        }
        let n = &self.numerics;
        if !(n.step > 0.0 && n.event_tol > 0.0 && n.sample_dt > 0.0)
            || !(n.step.is_finite() && n.event_tol.is_finite() && n.sample_dt.is_finite())
        {
            return bad("numeric settings h, eps_event and sample_dt must be positive".into());
        }
        for (i, t) in self.targets.iter().enumerate() {
            let fail = |reason: String| {
                Err(Error::InvalidTarget {
                    index: i + 1,
                    reason,
                })
            };
            if !(t.position >= 0.0 && t.position <= self.length) {
                return fail(format!(
                    "position {} outside [0, {}]",
                    t.position, self.length
                ));
            }
            if !(t.growth > 0.0 && t.growth.is_finite()) {
                return fail(format!("growth rate A = {} must be positive", t.growth));
            }
            if !(t.decay > t.growth && t.decay.is_finite()) {
                return fail(format!(
                    "decay rate B = {} must exceed growth rate A = {}",
                    t.decay, t.growth
                ));
            }
            if !(t.initial >= 0.0 && t.initial.is_finite()) {
                return fail(format!(
                    "initial uncertainty R0 = {} must be >= 0",
                    t.initial
                ));
            }
        }
        for (j, a) in self.agents.iter().enumerate() {
            let fail = |reason: String| {
                Err(Error::InvalidAgent {
                    index: j + 1,
                    reason,
                })
            };
            if !(a.start >= 0.0 && a.start <= self.length) {
                return fail(format!(
                    "start position {} outside [0, {}]",
                    a.start, self.length
                ));
            }
            if !(-1..=1).contains(&a.initial_control) {
                return fail(format!(
                    "initial control {} not in {{-1, 0, 1}}",
                    a.initial_control
                ));
            }
            if !(a.sensing_range > 0.0 && a.sensing_range.is_finite()) {
                return fail(format!(
                    "sensing range {} must be positive",
                    a.sensing_range
                ));
            }
            if self.comm_range.is_nan() || self.comm_range < 2.0 * a.sensing_range {
                return fail(format!(
                    "communication range {} is below twice the sensing range {}",
                    self.comm_range, a.sensing_range
                ));
            }
        }
        Ok(())
    }
}

/// Linear-decay detection probability of a target at `target` by an agent at `agent`.
pub fn sensing_prob(target: f64, agent: f64, range: f64) -> f64 {
    (1.0 - (target - agent).abs() / range).clamp(0.0, 1.0)
}

/// Derivative of [`sensing_prob`] with respect to the agent position.
///
/// Returns 0 on and beyond the range boundary. When the agent sits exactly on
/// the target, the slope is the one seen from the side the agent came from,
/// given by `incoming` (the sign of the last non-zero velocity).
pub fn sensing_grad(target: f64, agent: f64, range: f64, incoming: i8) -> f64 {
    let gap = target - agent;
    if gap.abs() >= range {
        0.0
    } else if gap > 0.0 {
        1.0 / range
    } else if gap < 0.0 {
        -1.0 / range
    } else {
        f64::from(incoming.signum()) / range
    }
}

/// Joint detection probability `1 - prod(1 - p_j)`.
pub fn joint_detection<I>(probs: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let miss: f64 = probs.into_iter().map(|p| 1.0 - p.clamp(0.0, 1.0)).product();
    (1.0 - miss).clamp(0.0, 1.0)
}

/// Joint detection of `target` by agents at `positions`.
pub fn joint_detection_at(target: &Target, agents: &[AgentSpec], positions: &[f64]) -> f64 {
    joint_detection(
        agents
            .iter()
            .zip(positions)
            .map(|(a, &s)| sensing_prob(target.position, s, a.sensing_range)),
    )
}

/// Time derivative of the uncertainty state.
///
/// Panics if `r` is negative: a negative uncertainty means the integrator
/// missed a depletion event.
pub fn uncertainty_rate(r: f64, detection: f64, growth: f64, decay: f64) -> f64 {
    assert!(r >= 0.0, "negative uncertainty state {r}");
    if r == 0.0 && growth <= decay * detection {
        0.0
    } else {
        growth - decay * detection
    }
}
