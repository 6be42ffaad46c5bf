//! Neighborhoods, per-agent event visibility and per-agent gradient replicas.
//!
//! The physics is simulated once. Each agent then runs its own IPA replica
//! over the shared intervals, but only applies the events it is entitled to
//! see under the information mode; targets outside its sensing range are held
//! constant between visible resets.

use serde::Serialize;

use crate::control::AgentParams;
use crate::error::{Error, Result};
use crate::ipa::{
    centralized_gradient, coupling, pair_step, AgentGradient, AgentSensitivity, Gradient,
};
use crate::model::{InfoMode, Scenario};
use crate::simulator::{simulate, Event, EventKind, SimRecord};

/// Neighborhood sets at one instant. Indices are 0-based; all membership
/// tests are boundary inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NeighborSnapshot {
    /// Agents within communication range of each agent.
    pub agents: Vec<Vec<usize>>,
    /// Targets within sensing range of each agent.
    pub targets: Vec<Vec<usize>>,
    /// Agents sensing each target.
    pub sensors: Vec<Vec<usize>>,
}

impl NeighborSnapshot {
    pub fn new(scenario: &Scenario, positions: &[f64]) -> Self {
        let n = scenario.num_agents();
        let agents = (0..n)
            .map(|j| {
                (0..n)
                    .filter(|&k| {
                        k != j && (positions[j] - positions[k]).abs() <= scenario.comm_range
                    })
                    .collect()
            })
            .collect();
        let senses = |i: usize, j: usize| {
            (scenario.targets[i].position - positions[j]).abs() <= scenario.agents[j].sensing_range
        };
        let targets = (0..n)
            .map(|j| {
                (0..scenario.num_targets())
                    .filter(|&i| senses(i, j))
                    .collect()
            })
            .collect();
        let sensors = (0..scenario.num_targets())
            .map(|i| (0..n).filter(|&j| senses(i, j)).collect())
            .collect();
        NeighborSnapshot {
            agents,
            targets,
            sensors,
        }
    }

    /// Collaborators of `agent` on `target`: the other agents sensing it.
    pub fn collaborators(&self, target: usize, agent: usize) -> Vec<usize> {
        self.sensors[target]
            .iter()
            .copied()
            .filter(|&k| k != agent)
            .collect()
    }

    /// Agents whose local events `agent` receives: itself and every
    /// collaborator on any target it senses.
    pub fn informants(&self, agent: usize) -> Vec<usize> {
        let mut out = vec![agent];
        for &i in &self.targets[agent] {
            out.extend(self.sensors[i].iter().copied());
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn is_local(&self, agent: usize, event: &Event) -> bool {
        match event.kind {
            EventKind::Horizon => true,
            EventKind::Switch { .. } => event.agent == Some(agent),
            _ => event
                .target
                .is_some_and(|i| self.targets[agent].contains(&i)),
        }
    }
}

/// Whether `agent` receives `event` under `mode`.
pub fn sees(mode: InfoMode, agent: usize, event: &Event, snapshot: &NeighborSnapshot) -> bool {
    if mode == InfoMode::Centralized {
        return true;
    }
    if mode == InfoMode::Almost && event.kind == EventKind::Depleted {
        return true;
    }
    snapshot
        .informants(agent)
        .into_iter()
        .any(|k| snapshot.is_local(k, event))
}

/// Snapshot at the time of each event, in log order.
pub fn event_snapshots(scenario: &Scenario, record: &SimRecord) -> Vec<NeighborSnapshot> {
    record
        .events
        .iter()
        .map(|e| NeighborSnapshot::new(scenario, &record.positions_at(e.time)))
        .collect()
}

/// Events visible to `agent`, with their log indices.
pub fn visible_events<'r>(
    mode: InfoMode,
    agent: usize,
    record: &'r SimRecord,
    snapshots: &[NeighborSnapshot],
) -> Vec<(usize, &'r Event)> {
    record
        .events
        .iter()
        .enumerate()
        .filter(|(k, e)| sees(mode, agent, e, &snapshots[*k]))
        .collect()
}

/// Every depletion is local to at least one agent.
pub fn check_depletions_local(scenario: &Scenario, record: &SimRecord) -> Result<()> {
    for e in record.events.iter().filter(|e| e.is_depletion()) {
        let i = e.target.expect("depletion names a target");
        let x = scenario.targets[i].position;
        let positions = record.positions_at(e.time);
        let local = positions
            .iter()
            .zip(&scenario.agents)
            .any(|(s, a)| (x - s).abs() <= a.sensing_range + 1e-9);
        if !local {
            return Err(Error::Integration {
                start: e.time,
                end: e.time,
                reason: format!("R_{} depleted with no agent in range", i + 1),
            });
        }
    }
    Ok(())
}

/// Options of the per-agent replicas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaOptions {
    /// In LOCAL mode, zero `∂R_i` when target `i` comes back into range with
    /// `R_i = 0` observed (a depletion must have happened meanwhile).
    pub reentry_reset: bool,
}

impl Default for ReplicaOptions {
    fn default() -> Self {
        ReplicaOptions {
            reentry_reset: true,
        }
    }
}

/// Gradient of one agent computed from its own information only.
pub fn replica_gradient(
    scenario: &Scenario,
    params: &[AgentParams],
    record: &SimRecord,
    mode: InfoMode,
    agent: usize,
    options: ReplicaOptions,
) -> Result<AgentGradient> {
    let j = agent;
    let m = scenario.num_targets();
    let own = &params[j];
    let mut sens = AgentSensitivity::new(own.len());
    let mut dr = vec![vec![0.0; 2 * own.len()]; m];
    let mut acc = vec![0.0; 2 * own.len()];
    let mut in_range = vec![false; m];
    let snapshot_at = |e: &Event| NeighborSnapshot::new(scenario, &record.positions_at(e.time));

    for iv in &record.intervals {
        for event in &record.events[iv.opening.clone()] {
            match event.kind {
                EventKind::Switch {
                    to,
                    waypoint,
                    arrival,
                    departure,
                    ..
                } if event.agent == Some(j) => {
                    sens.apply_switch(
                        own,
                        scenario.agents[j].start,
                        waypoint,
                        arrival,
                        departure,
                        to,
                    );
                }
                EventKind::Depleted | EventKind::Replenishing
                    if sees(mode, j, event, &snapshot_at(event)) =>
                {
                    let i = event.target.expect("target event names a target");
                    dr[i].fill(0.0);
                }
                _ => {}
            }
        }
        for i in 0..m {
            let now = iv.pair(i, j).in_range;
            if mode == InfoMode::Local
                && options.reentry_reset
                && now
                && !in_range[i]
                && iv.targets[i].r_start == 0.0
            {
                dr[i].fill(0.0);
            }
            in_range[i] = now;
            pair_step(
                &mut dr[i],
                &mut acc,
                &sens.ds,
                iv.duration(),
                coupling(scenario, iv, i, j),
            );
        }
    }
    let g = own.len();
    Ok(AgentGradient {
        theta: acc[..g].iter().map(|v| v / record.horizon).collect(),
        dwell: acc[g..].iter().map(|v| v / record.horizon).collect(),
    })
}

/// Per-agent gradients from a simulated record under `mode`. CENTRALIZED
/// uses the full-information pass; the other modes use per-agent replicas.
pub fn gradient_for_record(
    scenario: &Scenario,
    params: &[AgentParams],
    record: &SimRecord,
    mode: InfoMode,
    options: ReplicaOptions,
) -> Result<Gradient> {
    match mode {
        InfoMode::Centralized => centralized_gradient(scenario, params, record),
        _ => (0..scenario.num_agents())
            .map(|j| replica_gradient(scenario, params, record, mode, j, options))
            .collect(),
    }
}

/// Simulates once and returns the per-agent gradients under `mode`.
pub fn decentralized_gradient(
    scenario: &Scenario,
    params: &[AgentParams],
    mode: InfoMode,
) -> Result<Gradient> {
    let record = simulate(scenario, params)?;
    gradient_for_record(scenario, params, &record, mode, ReplicaOptions::default())
}
