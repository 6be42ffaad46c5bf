use serde::Serialize;

use crate::control::Control;

/// What happened at an event instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    /// `R_i` reaches 0 (ρ⁰).
    Depleted,
    /// `R_i` leaves 0 (ρ⁺).
    Replenishing,
    /// `p_ij` hits 0: agent leaves the sensing range (π⁰).
    SensingLost,
    /// `p_ij` leaves 0: agent enters the sensing range (π⁺).
    SensingGained,
    /// Control switch of agent `j` (ν). `waypoint` is the 0-based switching point.
    Switch {
        from: Control,
        to: Control,
        waypoint: usize,
        arrival: bool,
        departure: bool,
    },
    /// Agent `other` joins the collaborators of `(target, agent)` (Δ⁺).
    CollaboratorJoined {
        other: usize,
    },
    /// Agent `other` leaves the collaborators of `(target, agent)` (Δ⁻).
    CollaboratorLeft {
        other: usize,
    },
    /// Agent passes over the target position; the sign of `∂p/∂s` flips.
    Crossed,
    Horizon,
}

impl EventKind {
    /// Processing class for simultaneous events: target dynamics, sensing,
    /// neighbor sets, agent dynamics, horizon.
    pub fn class(&self) -> u8 {
        match self {
            EventKind::Depleted | EventKind::Replenishing => 0,
            EventKind::SensingLost | EventKind::SensingGained | EventKind::Crossed => 1,
            EventKind::CollaboratorJoined { .. } | EventKind::CollaboratorLeft { .. } => 2,
            EventKind::Switch { .. } => 3,
            EventKind::Horizon => 4,
        }
    }

    /// Stable label used in CSV outputs and event counts.
    pub fn label(&self) -> String {
        match self {
            EventKind::Depleted => "rho0".into(),
            EventKind::Replenishing => "rho+".into(),
            EventKind::SensingLost => "pi0".into(),
            EventKind::SensingGained => "pi+".into(),
            EventKind::Switch { from, to, .. } => {
                format!("nu({},{})", from.as_i8(), to.as_i8())
            }
            EventKind::CollaboratorJoined { .. } => "delta+".into(),
            EventKind::CollaboratorLeft { .. } => "delta-".into(),
            EventKind::Crossed => "cross".into(),
            EventKind::Horizon => "horizon".into(),
        }
    }
}

/// One logged event. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub agent: Option<usize>,
    pub target: Option<usize>,
}

impl Event {
    pub fn is_depletion(&self) -> bool {
        self.kind == EventKind::Depleted
    }

    /// Auxiliary payload: the joining/leaving agent of a Δ event or the
    /// switching point of a ν event.
    pub fn payload(&self) -> Option<usize> {
        match self.kind {
            EventKind::CollaboratorJoined { other } | EventKind::CollaboratorLeft { other } => {
                Some(other)
            }
            EventKind::Switch { waypoint, .. } => Some(waypoint),
            _ => None,
        }
    }

    pub(crate) fn order_key(&self) -> (u8, usize, usize) {
        (
            self.kind.class(),
            self.target.map_or(usize::MAX, |i| i),
            self.agent.map_or(usize::MAX, |j| j),
        )
    }
}
