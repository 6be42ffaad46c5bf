//! Parametric trajectory policy.
//!
//! Each agent visits its switching points `theta[0..Γ]` in order at unit
//! speed and holds still for `dwell[l]` at point `l`. Once the last dwell has
//! elapsed the agent parks for the rest of the horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AgentSpec;

/// Decision variables of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub theta: Vec<f64>,
    #[serde(rename = "w")]
    pub dwell: Vec<f64>,
}

impl AgentParams {
    pub fn new(theta: Vec<f64>, dwell: Vec<f64>) -> Self {
        AgentParams { theta, dwell }
    }

    /// Number of switching points Γ.
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Checks shape and feasibility; `agent` is the 0-based owner used in messages.
    pub fn validate(&self, agent: usize, length: f64) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidParams {
                agent: agent + 1,
                reason,
            })
        };
        if self.theta.len() != self.dwell.len() {
            return fail(format!(
                "{} switching points but {} dwell times",
                self.theta.len(),
                self.dwell.len()
            ));
        }
        if let Some((l, th)) = self
            .theta
            .iter()
            .enumerate()
            .find(|(_, &th)| !(th >= 0.0 && th <= length))
        {
            return fail(format!("theta[{}] = {th} outside [0, {length}]", l + 1));
        }
        if let Some((l, w)) = self
            .dwell
            .iter()
            .enumerate()
            .find(|(_, &w)| !(w >= 0.0 && w.is_finite()))
        {
            return fail(format!(
                "w[{}] = {w} is not a finite non-negative dwell",
                l + 1
            ));
        }
        Ok(())
    }
}

/// Feasible projection: switching points into `[0, length]`, dwells into `[0, ∞)`.
pub fn project_params(params: &AgentParams, length: f64) -> AgentParams {
    AgentParams {
        theta: params.theta.iter().map(|t| t.clamp(0.0, length)).collect(),
        dwell: params.dwell.iter().map(|w| w.max(0.0)).collect(),
    }
}

/// Control value `u ∈ {-1, 0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Control {
    Neg,
    Zero,
    Pos,
}

impl Control {
    pub fn from_sign(x: f64) -> Control {
        if x > 0.0 {
            Control::Pos
        } else if x < 0.0 {
            Control::Neg
        } else {
            Control::Zero
        }
    }

    pub fn from_i8(v: i8) -> Control {
        match v.signum() {
            1 => Control::Pos,
            -1 => Control::Neg,
            _ => Control::Zero,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Control::Neg => -1,
            Control::Zero => 0,
            Control::Pos => 1,
        }
    }

    pub fn value(self) -> f64 {
        f64::from(self.as_i8())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Moving toward `theta[waypoint]`.
    Transit,
    /// Holding at `theta[waypoint]` until the dwell deadline.
    Dwell,
    /// Every switching point consumed; parked.
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    /// 0-based index of the switching point being approached or dwelt at.
    pub waypoint: usize,
    pub phase: Phase,
    /// Absolute end of the current dwell; meaningful only in [`Phase::Dwell`].
    pub dwell_until: f64,
    pub u: Control,
}

/// A control switch produced by the policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseBoundary {
    pub time: f64,
    pub from: Control,
    pub to: Control,
    pub waypoint: usize,
    /// The agent reaches `theta[waypoint]` at this instant.
    pub arrival: bool,
    /// The agent leaves `theta[waypoint]` toward the next point at this instant.
    pub departure: bool,
    /// No switching point remains after this boundary.
    pub exhausts: bool,
}

/// Phase at `t = 0`: in transit toward the first switching point.
///
/// The direction is `sign(theta[0] - s0)`; a conflicting `initial_control` is
/// overridden with a warning.
pub fn initial_phase(agent: &AgentSpec, params: &AgentParams) -> PhaseState {
    let Some(&first) = params.theta.first() else {
        if agent.initial_control != 0 {
            log::warn!("agent has no switching points; initial control ignored, agent parks");
        }
        return PhaseState {
            waypoint: 0,
            phase: Phase::Exhausted,
            dwell_until: 0.0,
            u: Control::Zero,
        };
    };
    let u = Control::from_sign(first - agent.start);
    if u != Control::from_i8(agent.initial_control) && u != Control::Zero {
        log::warn!(
            "initial control {} conflicts with first switching point {first} from {}; using {}",
            agent.initial_control,
            agent.start,
            u.as_i8()
        );
    }
    PhaseState {
        waypoint: 0,
        phase: Phase::Transit,
        dwell_until: 0.0,
        u,
    }
}

pub fn control_value(phase: &PhaseState) -> Control {
    match phase.phase {
        Phase::Transit => phase.u,
        Phase::Dwell | Phase::Exhausted => Control::Zero,
    }
}

fn heading(params: &AgentParams, waypoint: usize) -> Control {
    match params.theta.get(waypoint + 1) {
        Some(&next) => Control::from_sign(next - params.theta[waypoint]),
        None => Control::Zero,
    }
}

/// Next control switch strictly governed by the policy, or `None` if it does
/// not occur before `horizon` (or the agent is parked).
pub fn next_phase_boundary(
    phase: &PhaseState,
    params: &AgentParams,
    position: f64,
    time: f64,
    horizon: f64,
) -> Option<PhaseBoundary> {
    let boundary = match phase.phase {
        Phase::Exhausted => return None,
        Phase::Transit => {
            let l = phase.waypoint;
            let arrive = time + (params.theta[l] - position).abs();
            let last = l + 1 == params.len();
            if params.dwell[l] > 0.0 {
                PhaseBoundary {
                    time: arrive,
                    from: phase.u,
                    to: Control::Zero,
                    waypoint: l,
                    arrival: true,
                    departure: false,
                    exhausts: false,
                }
            } else {
                PhaseBoundary {
                    time: arrive,
                    from: phase.u,
                    to: heading(params, l),
                    waypoint: l,
                    arrival: true,
                    departure: !last,
                    exhausts: last,
                }
            }
        }
        Phase::Dwell => {
            let l = phase.waypoint;
            let last = l + 1 == params.len();
            PhaseBoundary {
                time: phase.dwell_until,
                from: Control::Zero,
                to: heading(params, l),
                waypoint: l,
                arrival: false,
                departure: !last,
                exhausts: last,
            }
        }
    };
    (boundary.time < horizon).then_some(boundary)
}

/// Phase after `boundary` has been crossed.
pub fn advance_phase(
    phase: &PhaseState,
    boundary: &PhaseBoundary,
    params: &AgentParams,
) -> Result<PhaseState> {
    let mismatch = |what: &str| {
        Err(Error::InvalidScenario(format!(
            "phase boundary does not match phase ({what})"
        )))
    };
    if boundary.waypoint != phase.waypoint {
        return mismatch("waypoint");
    }
    match phase.phase {
        Phase::Exhausted => mismatch("agent is parked"),
        Phase::Transit if !boundary.arrival => mismatch("expected an arrival"),
        Phase::Dwell if boundary.arrival => mismatch("expected a dwell deadline"),
        _ => {
            let next = if boundary.exhausts {
                PhaseState {
                    waypoint: phase.waypoint,
                    phase: Phase::Exhausted,
                    dwell_until: 0.0,
                    u: Control::Zero,
                }
            } else if boundary.departure {
                PhaseState {
                    waypoint: phase.waypoint + 1,
                    phase: Phase::Transit,
                    dwell_until: 0.0,
                    u: boundary.to,
                }
            } else {
                PhaseState {
                    waypoint: phase.waypoint,
                    phase: Phase::Dwell,
                    dwell_until: boundary.time + params.dwell[phase.waypoint],
                    u: Control::Zero,
                }
            };
            Ok(next)
        }
    }
}

/// One constant-velocity piece of an agent trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub position: f64,
    pub u: Control,
    /// Sign of the most recent non-zero velocity (the side an agent parked on
    /// a target arrived from).
    pub heading: Control,
}

/// Complete open-loop trajectory of one agent over `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionPlan {
    pub segments: Vec<Segment>,
    pub switches: Vec<PhaseBoundary>,
}

impl MotionPlan {
    /// Runs the phase machine from `t = 0` to the horizon.
    pub fn build(agent: &AgentSpec, params: &AgentParams, horizon: f64) -> Result<MotionPlan> {
        let mut phase = initial_phase(agent, params);
        let mut heading = [phase.u, Control::from_i8(agent.initial_control)]
            .into_iter()
            .find(|&c| c != Control::Zero)
            .unwrap_or(Control::Pos);
        let mut t = 0.0;
        let mut s = agent.start;
        let mut segments = Vec::new();
        let mut switches = Vec::new();
        while let Some(b) = next_phase_boundary(&phase, params, s, t, horizon) {
            let u = control_value(&phase);
            if b.time > t {
                segments.push(Segment {
                    start: t,
                    end: b.time,
                    position: s,
                    u,
                    heading,
                });
            }
            if b.arrival {
                s = params.theta[b.waypoint];
            }
            t = b.time;
            phase = advance_phase(&phase, &b, params)?;
            if phase.u != Control::Zero {
                heading = phase.u;
            }
            switches.push(b);
        }
        segments.push(Segment {
            start: t,
            end: horizon,
            position: s,
            u: control_value(&phase),
            heading,
        });
        Ok(MotionPlan { segments, switches })
    }

    fn segment_at(&self, t: f64) -> &Segment {
        let k = self.segments.partition_point(|seg| seg.end <= t);
        &self.segments[k.min(self.segments.len() - 1)]
    }

    pub fn position(&self, t: f64) -> f64 {
        let seg = self.segment_at(t);
        seg.position + seg.u.value() * (t - seg.start)
    }

    /// Segment in force on the open interval just after `t`.
    pub fn segment_after(&self, t: f64) -> &Segment {
        self.segment_at(t)
    }
}
