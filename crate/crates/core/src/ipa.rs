//! Infinitesimal perturbation analysis over a simulated sample path.
//!
//! Derivative states are piecewise updated: at events (resets of `∂R_i`,
//! switch conditions for `∂s_j`) and across intervals (exact integrals of
//! `∂Ṙ_i/∂θ_j` using the collaboration factors recorded by the simulator).

use serde::Serialize;

use crate::control::{AgentParams, Control};
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::simulator::{Branch, Event, EventKind, IntervalRecord, SimRecord};

/// `∂J/∂θ_j` and `∂J/∂w_j` for one agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentGradient {
    #[serde(rename = "theta_grad")]
    pub theta: Vec<f64>,
    #[serde(rename = "w_grad")]
    pub dwell: Vec<f64>,
}

impl AgentGradient {
    pub fn zeros(len: usize) -> Self {
        AgentGradient {
            theta: vec![0.0; len],
            dwell: vec![0.0; len],
        }
    }

    /// Concatenated `[∂J/∂θ, ∂J/∂w]`.
    pub fn flat(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.dwell).copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.theta
            .iter()
            .chain(&self.dwell)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.dwell).all(|g| g.is_finite())
    }

    fn from_flat(flat: &[f64]) -> Self {
        let g = flat.len() / 2;
        AgentGradient {
            theta: flat[..g].to_vec(),
            dwell: flat[g..].to_vec(),
        }
    }
}

/// Per-agent gradient of the mission cost.
pub type Gradient = Vec<AgentGradient>;

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `∂s_j/∂(θ_j, w_j)`, stored flat as `[θ_1..θ_Γ, w_1..w_Γ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSensitivity {
    pub ds: Vec<f64>,
    /// Current switching-point index ξ.
    pub waypoint: usize,
}

impl AgentSensitivity {
    pub fn new(len: usize) -> Self {
        AgentSensitivity {
            ds: vec![0.0; 2 * len],
            waypoint: 0,
        }
    }

    fn gamma(&self) -> usize {
        self.ds.len() / 2
    }

    /// Applies a control switch of this agent at its waypoint `xi`.
    ///
    /// Arrival: the agent sits at `θ_ξ`. Departure with `u⁺ ≠ 0`: the position
    /// afterwards is `θ_ξ + u⁺ (t - τ_ξ)` with the departure time accumulated
    /// from all previous legs and dwells. A direct reversal is the composition
    /// of both and reproduces `∂s/∂θ_ξ = 2` and the sign flip of earlier terms.
    pub fn apply_switch(
        &mut self,
        params: &AgentParams,
        start: f64,
        xi: usize,
        arrival: bool,
        departure: bool,
        to: Control,
    ) {
        let gamma = self.gamma();
        self.waypoint = xi;
        if arrival {
            self.ds.fill(0.0);
            self.ds[xi] = 1.0;
        }
        let u = to.value();
        if departure && u != 0.0 {
            let theta = &params.theta;
            let prev = |l: usize| if l == 0 { start } else { theta[l - 1] };
            let leg = |l: usize| sgn(theta[l] - prev(l));
            self.ds[xi] -= u * leg(xi);
            for l in 0..xi {
                self.ds[l] -= u * (leg(l) - leg(l + 1));
            }
            for l in 0..=xi {
                self.ds[gamma + l] = -u;
            }
        }
    }
}

/// One interval of derivative dynamics for one `(target, agent)` pair.
///
/// `dr` is `∂R_i/∂(θ_j, w_j)` at the interval start and becomes its value at
/// the end; its time integral is added to `acc`. `coupling` is
/// `B_i ∂p_ij/∂s_j` on an interior arc with the agent in range.
#[inline]
pub(crate) fn pair_step(
    dr: &mut [f64],
    acc: &mut [f64],
    ds: &[f64],
    dt: f64,
    coupling: Option<(f64, f64, f64)>,
) {
    match coupling {
        None => {
            for (a, v) in acc.iter_mut().zip(dr.iter()) {
                *a += v * dt;
            }
        }
        Some((k, g_end, g_area)) => {
            for ((a, v), d) in acc.iter_mut().zip(dr.iter_mut()).zip(ds) {
                *a += *v * dt;
                *a -= k * d * g_area;
                *v -= k * d * g_end;
            }
        }
    }
}

/// Coupling term of target `i` and agent `j` over `iv`, if any.
pub(crate) fn coupling(
    scenario: &Scenario,
    iv: &IntervalRecord,
    i: usize,
    j: usize,
) -> Option<(f64, f64, f64)> {
    let pair = iv.pair(i, j);
    (iv.targets[i].branch == Branch::Interior && pair.in_range && pair.slope != 0.0).then(|| {
        (
            scenario.targets[i].decay * pair.slope,
            pair.g_end,
            pair.g_area,
        )
    })
}

/// Counters of the out-of-range hold/reset properties of `∂R_i/∂θ_j`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SensitivityAudit {
    /// `(i, j)` intervals checked with `i ∉ T_j` and `R_i > 0`.
    pub held_checks: usize,
    /// Depletions checked while `i ∉ T_j`.
    pub reset_checks: usize,
    /// Replenishments checked while `i ∉ T_j`.
    pub replenish_checks: usize,
    pub violations: usize,
}

impl SensitivityAudit {
    pub fn merge(&mut self, other: &SensitivityAudit) {
        self.held_checks += other.held_checks;
        self.reset_checks += other.reset_checks;
        self.replenish_checks += other.replenish_checks;
        self.violations += other.violations;
    }
}

/// Full-information derivative state: `∂s_j` for every agent and `∂R_i/∂·_j`
/// for every pair.
#[derive(Debug, Clone)]
pub struct IpaState {
    pub agents: Vec<AgentSensitivity>,
    /// Dense `[i * N + j]`, each of length `2 Γ_j`.
    pub dr: Vec<Vec<f64>>,
    num_agents: usize,
}

impl IpaState {
    /// Initial state: all derivatives zero (initial conditions do not depend
    /// on the parameters).
    pub fn new(params: &[AgentParams], num_targets: usize) -> Self {
        let n = params.len();
        let mut dr = Vec::with_capacity(num_targets * n);
        for _ in 0..num_targets {
            dr.extend(params.iter().map(|p| vec![0.0; 2 * p.len()]));
        }
        IpaState {
            agents: params
                .iter()
                .map(|p| AgentSensitivity::new(p.len()))
                .collect(),
            dr,
            num_agents: n,
        }
    }

    pub fn dr(&self, target: usize, agent: usize) -> &[f64] {
        &self.dr[target * self.num_agents + agent]
    }

    /// Applies one event with full information.
    pub fn event_update(
        &mut self,
        scenario: &Scenario,
        params: &[AgentParams],
        event: &Event,
    ) -> Result<()> {
        let n = self.num_agents;
        match event.kind {
            EventKind::Depleted => {
                let i = event.target.expect("depletion names a target");
                for v in &mut self.dr[i * n..(i + 1) * n] {
                    v.fill(0.0);
                }
            }
            EventKind::Replenishing => {
                let i = event.target.expect("replenishment names a target");
                for v in &mut self.dr[i * n..(i + 1) * n] {
                    if let Some(bad) = v.iter().find(|d| d.abs() > 1e-9) {
                        return Err(Error::Ipa {
                            time: event.time,
                            reason: format!(
                                "dR_{}/dparam = {bad} when leaving a boundary arc",
                                i + 1
                            ),
                        });
                    }
                    v.fill(0.0);
                }
            }
            EventKind::Switch {
                to,
                waypoint,
                arrival,
                departure,
                ..
            } => {
                let j = event.agent.expect("switch names an agent");
                self.agents[j].apply_switch(
                    &params[j],
                    scenario.agents[j].start,
                    waypoint,
                    arrival,
                    departure,
                    to,
                );
            }
            EventKind::SensingLost
            | EventKind::SensingGained
            | EventKind::CollaboratorJoined { .. }
            | EventKind::CollaboratorLeft { .. }
            | EventKind::Crossed
            | EventKind::Horizon => {}
        }
        Ok(())
    }

    /// Advances every pair across `iv`, accumulating `∫ ∂R_i dt` into the
    /// per-agent accumulators (interval-major, then target order).
    pub fn interval_update(
        &mut self,
        scenario: &Scenario,
        iv: &IntervalRecord,
        acc: &mut [Vec<f64>],
    ) {
        let n = self.num_agents;
        let dt = iv.duration();
        for i in 0..scenario.num_targets() {
            for (j, acc_j) in acc.iter_mut().enumerate().take(n) {
                pair_step(
                    &mut self.dr[i * n + j],
                    acc_j,
                    &self.agents[j].ds,
                    dt,
                    coupling(scenario, iv, i, j),
                );
            }
        }
    }
}

/// Result of the full-information IPA pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedPass {
    pub gradient: Gradient,
    pub audit: SensitivityAudit,
}

/// Full-information IPA gradient.
pub fn centralized_gradient(
    scenario: &Scenario,
    params: &[AgentParams],
    record: &SimRecord,
) -> Result<Gradient> {
    Ok(centralized_pass(scenario, params, record)?.gradient)
}

/// Full-information IPA pass, auditing the out-of-range behavior of
/// `∂R_i/∂θ_j` on the way.
pub fn centralized_pass(
    scenario: &Scenario,
    params: &[AgentParams],
    record: &SimRecord,
) -> Result<CentralizedPass> {
    let n = scenario.num_agents();
    let m = scenario.num_targets();
    let mut state = IpaState::new(params, m);
    let mut acc: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; 2 * p.len()]).collect();
    let mut audit = SensitivityAudit::default();
    // pairs currently in a window with i ∉ T_j that contains a depletion
    let mut depleted_out = vec![false; m * n];
    let mut prev: Option<&IntervalRecord> = None;

    for iv in &record.intervals {
        for event in &record.events[iv.opening.clone()] {
            audit_event(
                &state,
                scenario,
                prev,
                iv,
                event,
                &mut audit,
                &mut depleted_out,
            );
            state.event_update(scenario, params, event)?;
        }
        let before = state.dr.clone();
        state.interval_update(scenario, iv, &mut acc);
        for i in 0..m {
            for j in 0..n {
                let ij = i * n + j;
                if iv.pair(i, j).in_range {
                    depleted_out[ij] = false;
                    continue;
                }
                if depleted_out[ij] {
                    audit.reset_checks += 1;
                    if state.dr[ij].iter().any(|&d| d != 0.0) {
                        audit.violations += 1;
                    }
                }
                if iv.targets[i].r_start > 0.0 || iv.targets[i].r_end > 0.0 {
                    audit.held_checks += 1;
                    if state.dr[ij] != before[ij] {
                        audit.violations += 1;
                    }
                }
            }
        }
        prev = Some(iv);
    }

    let horizon = record.horizon;
    let gradient = acc
        .iter()
        .map(|a| {
            let flat: Vec<f64> = a.iter().map(|v| v / horizon).collect();
            AgentGradient::from_flat(&flat)
        })
        .collect();
    Ok(CentralizedPass { gradient, audit })
}

fn audit_event(
    state: &IpaState,
    scenario: &Scenario,
    prev: Option<&IntervalRecord>,
    next: &IntervalRecord,
    event: &Event,
    audit: &mut SensitivityAudit,
    depleted_out: &mut [bool],
) {
    let n = scenario.num_agents();
    let Some(i) = event.target else { return };
    // i ∉ T_j on both sides of the event
    let outside =
        |j: usize| !next.pair(i, j).in_range && prev.is_none_or(|p| !p.pair(i, j).in_range);
    match event.kind {
        EventKind::Depleted => {
            for j in (0..n).filter(|&j| outside(j)) {
                audit.reset_checks += 1;
                depleted_out[i * n + j] = true;
            }
        }
        EventKind::Replenishing => {
            for j in (0..n).filter(|&j| outside(j)) {
                audit.replenish_checks += 1;
                if state.dr(i, j).iter().any(|&d| d != 0.0) {
                    audit.violations += 1;
                }
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn arrival_sets_unit_sensitivity() {
        let p = AgentParams::new(vec![5.0, 10.0, 15.0], vec![1.0, 1.0, 1.0]);
        let mut s = AgentSensitivity::new(3);
        s.ds[3] = 0.7;
        s.apply_switch(&p, 0.0, 1, true, false, Control::Zero);
        assert_eq!(s.ds, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dwell_departure_sets_dwell_sensitivity() {
        // 0 -> 5 -> 10 -> back to 5
        let p = AgentParams::new(vec![5.0, 10.0, 5.0], vec![1.0, 1.0, 1.0]);
        let mut s = AgentSensitivity::new(3);
        s.apply_switch(&p, 0.0, 1, true, false, Control::Zero);
        s.apply_switch(&p, 0.0, 1, false, true, Control::Neg);
        // ∂τ_dep/∂θ_1 = sgn(10 - 5) = 1; ∂s/∂θ_1 = 1 - (-1)(1) = 2
        assert_eq!(s.ds[1], 2.0);
        // ∂τ/∂θ_0 = sgn(5 - 0) - sgn(10 - 5) = 0
        assert_eq!(s.ds[0], 0.0);
        assert_eq!(&s.ds[3..], &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn direct_reversal_negates_earlier_terms() {
        let p = AgentParams::new(vec![5.0, 10.0, 3.0], vec![0.0, 0.0, 0.0]);
        let mut s = AgentSensitivity::new(3);
        // pass through 5 heading right
        s.apply_switch(&p, 0.0, 0, true, true, Control::Pos);
        let before = s.ds.clone();
        s.apply_switch(&p, 0.0, 1, true, true, Control::Neg);
        assert_eq!(s.ds[1], 2.0);
        assert_eq!(s.ds[0], -before[0]);
        assert_eq!(s.ds[3], -before[3]);
        assert_eq!(s.ds[4], 1.0);
    }

    #[test]
    fn restart_after_dwell_gives_negative_dwell_sensitivity() {
        let p = AgentParams::new(vec![5.0, 10.0], vec![1.0, 1.0]);
        let mut s = AgentSensitivity::new(2);
        s.apply_switch(&p, 0.0, 0, true, false, Control::Zero);
        s.apply_switch(&p, 0.0, 0, false, true, Control::Pos);
        assert_eq!(s.ds[2], -1.0);
    }

    #[test]
    fn lone_agent_interval_decrement() {
        let mut dr = vec![0.0];
        let mut acc = vec![0.0];
        // B = 5, slope 1/3, G = Δt = 2, ∫G = 2
        pair_step(&mut dr, &mut acc, &[1.0], 2.0, Some((5.0 / 3.0, 2.0, 2.0)));
        assert_relative_eq!(dr[0], -5.0 / 3.0 * 2.0);
        assert_relative_eq!(acc[0], -5.0 / 3.0 * 2.0);
    }

    #[test]
    fn hold_accumulates_constant() {
        let mut dr = vec![0.5, -1.0];
        let mut acc = vec![0.0, 0.0];
        pair_step(&mut dr, &mut acc, &[1.0, 1.0], 4.0, None);
        assert_eq!(dr, vec![0.5, -1.0]);
        assert_eq!(acc, vec![2.0, -4.0]);
    }
}
