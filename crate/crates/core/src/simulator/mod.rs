//! Event-driven integration of the coupled agent/target hybrid dynamics.
//!
//! Agent trajectories are open-loop and piecewise linear, so every
//! motion-driven guard (control switches, range-boundary and target
//! crossings) is known in closed form before integration starts. Between two
//! consecutive motion breakpoints every `p_ij` is affine in time, hence `P_i`,
//! `R_i`, `∫R_i` and the collaboration factors `G_ij` are polynomials that are
//! integrated exactly. Uncertainty guards (`R_i → 0`, `A_i - B_i P_i` turning
//! positive on a boundary arc) are roots of those polynomials.

mod events;

use std::collections::BTreeMap;
use std::ops::Range;

pub use events::{Event, EventKind};

use crate::control::{AgentParams, Control, MotionPlan};
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::poly::Poly;

/// Which branch of the uncertainty dynamics is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Branch {
    /// `dR/dt = A - B P`.
    Interior,
    /// `R = 0` held because `A <= B P`.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentInterval {
    /// Position at the start of the interval.
    pub position: f64,
    pub u: Control,
    pub heading: Control,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetInterval {
    pub branch: Branch,
    pub r_start: f64,
    pub r_end: f64,
    /// `∫ R_i dt` over the interval.
    pub r_integral: f64,
    /// Joint detection at the start of the interval.
    pub detection: f64,
    /// `R_i(start + σ)` as a polynomial in the local time `σ`.
    pub r_poly: Poly,
}

/// Coupling of agent `j` with target `i` over one interval.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairTerm {
    /// `p_ij > 0` on the open interval.
    pub in_range: bool,
    /// `∂p_ij/∂s_j`, constant on the interval.
    pub slope: f64,
    /// `G_ij` at the end of the interval: `∫ Π_{g ∈ N_ij} (1 - p_ig) dt`.
    pub g_end: f64,
    /// `∫ G_ij(t) dt` over the interval.
    pub g_area: f64,
}

/// One inter-event interval `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub start: f64,
    pub end: f64,
    /// Events at `start`, in processing order, applied before the interval.
    pub opening: Range<usize>,
    pub agents: Vec<AgentInterval>,
    pub targets: Vec<TargetInterval>,
    /// Dense `[target * num_agents + agent]`.
    pub pairs: Vec<PairTerm>,
}

impl IntervalRecord {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn pair(&self, target: usize, agent: usize) -> &PairTerm {
        &self.pairs[target * self.agents.len() + agent]
    }
}

/// State sampled at the output resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub positions: Vec<f64>,
    pub controls: Vec<Control>,
    pub uncertainty: Vec<f64>,
    pub detection: Vec<f64>,
}

/// Complete output of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub horizon: f64,
    pub events: Vec<Event>,
    pub intervals: Vec<IntervalRecord>,
    /// Events at the horizon, after the last interval.
    pub closing: Range<usize>,
    pub samples: Vec<Sample>,
    pub plans: Vec<MotionPlan>,
    cost: f64,
}

impl SimRecord {
    /// Mission cost `J = (1/T) Σ_k Σ_i ∫ R_i dt`.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn num_agents(&self) -> usize {
        self.plans.len()
    }

    pub fn positions_at(&self, t: f64) -> Vec<f64> {
        self.plans.iter().map(|p| p.position(t)).collect()
    }

    /// Exact `R_i(t)` read from the interval covering `t`.
    pub fn uncertainty_at(&self, target: usize, t: f64) -> f64 {
        let k = self
            .intervals
            .partition_point(|iv| iv.end <= t)
            .min(self.intervals.len() - 1);
        let iv = &self.intervals[k];
        iv.targets[target].r_poly.eval(t - iv.start)
    }

    /// Number of logged events per kind label.
    pub fn event_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.events {
            *counts.entry(e.kind.label()).or_insert(0) += 1;
        }
        counts
    }
}

/// Recomputes `J` from the per-interval integrals.
pub fn cost(record: &SimRecord) -> f64 {
    let total: f64 = record
        .intervals
        .iter()
        .map(|iv| iv.targets.iter().map(|t| t.r_integral).sum::<f64>())
        .sum();
    total / record.horizon
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Zone {
    in_range: bool,
    /// +1 when the target is ahead (`x > s`), -1 behind, 0 on top of it.
    side: f64,
    slope: f64,
}

fn zone(target: f64, position: f64, range: f64, heading: Control) -> Zone {
    let gap = target - position;
    if gap.abs() >= range {
        return Zone {
            in_range: false,
            side: 0.0,
            slope: 0.0,
        };
    }
    let side = if gap > 0.0 {
        1.0
    } else if gap < 0.0 {
        -1.0
    } else {
        0.0
    };
    let slope = if side == 0.0 {
        heading.value() / range
    } else {
        side / range
    };
    Zone {
        in_range: true,
        side,
        slope,
    }
}

/// Motion breakpoints: switch times and crossings of `x_i`, `x_i ± r_j`,
/// merged within `tol`. Always starts at 0 and ends at the horizon.
fn breakpoints(scenario: &Scenario, plans: &[MotionPlan]) -> Vec<f64> {
    let horizon = scenario.horizon;
    let mut times = vec![0.0, horizon];
    for (plan, agent) in plans.iter().zip(&scenario.agents) {
        times.extend(plan.switches.iter().map(|b| b.time));
        for seg in &plan.segments {
            if seg.u == Control::Zero {
                continue;
            }
            for target in &scenario.targets {
                for level in [
                    target.position - agent.sensing_range,
                    target.position,
                    target.position + agent.sensing_range,
                ] {
                    let t = seg.start + (level - seg.position) / seg.u.value();
                    if t > seg.start && t < seg.end {
                        times.push(t);
                    }
                }
            }
        }
    }
    times.retain(|t| (0.0..=horizon).contains(t));
    times.sort_by(f64::total_cmp);
    let tol = scenario.numerics.event_tol;
    let mut merged: Vec<f64> = Vec::with_capacity(times.len());
    for t in times {
        match merged.last() {
            Some(&last) if t - last <= tol => {}
            _ => merged.push(t),
        }
    }
    // snap the tail onto the horizon
    while merged.len() > 1 && horizon - merged[merged.len() - 1] <= tol {
        merged.pop();
    }
    merged.push(horizon);
    merged
}

struct TargetState {
    r: f64,
    branch: Branch,
    just_depleted: bool,
}

/// Simulates the mission over `[0, T]` under the given per-agent parameters.
pub fn simulate(scenario: &Scenario, params: &[AgentParams]) -> Result<SimRecord> {
    scenario.validate()?;
    if params.len() != scenario.num_agents() {
        return Err(Error::InvalidScenario(format!(
            "{} parameter sets for {} agents",
            params.len(),
            scenario.num_agents()
        )));
    }
    for (j, p) in params.iter().enumerate() {
        p.validate(j, scenario.length)?;
    }
    let plans = scenario
        .agents
        .iter()
        .zip(params)
        .map(|(a, p)| MotionPlan::build(a, p, scenario.horizon))
        .collect::<Result<Vec<_>>>()?;
    Integrator::new(scenario, plans).run()
}

struct Integrator<'a> {
    scenario: &'a Scenario,
    plans: Vec<MotionPlan>,
    targets: Vec<TargetState>,
    events: Vec<Event>,
    intervals: Vec<IntervalRecord>,
    samples: Vec<Sample>,
    next_sample: usize,
    pending: Vec<Event>,
}

impl<'a> Integrator<'a> {
    fn new(scenario: &'a Scenario, plans: Vec<MotionPlan>) -> Self {
        let targets = scenario
            .targets
            .iter()
            .map(|t| TargetState {
                r: t.initial,
                branch: Branch::Interior,
                just_depleted: false,
            })
            .collect();
        Integrator {
            scenario,
            plans,
            targets,
            events: Vec::new(),
            intervals: Vec::new(),
            samples: Vec::new(),
            next_sample: 0,
            pending: Vec::new(),
        }
    }

    fn run(mut self) -> Result<SimRecord> {
        let n = self.scenario.num_agents();
        let m = self.scenario.num_targets();
        let bps = breakpoints(self.scenario, &self.plans);

        // switch events keyed by breakpoint index
        let mut switch_at: Vec<Vec<Event>> = vec![Vec::new(); bps.len()];
        for (j, plan) in self.plans.iter().enumerate() {
            for b in &plan.switches {
                if !(b.arrival || b.departure) {
                    continue;
                }
                let k = bps
                    .partition_point(|&t| t <= b.time + self.scenario.numerics.event_tol)
                    .saturating_sub(1);
                switch_at[k].push(Event {
                    time: bps[k],
                    kind: EventKind::Switch {
                        from: b.from,
                        to: b.to,
                        waypoint: b.waypoint,
                        arrival: b.arrival,
                        departure: b.departure,
                    },
                    agent: Some(j),
                    target: None,
                });
            }
        }

        let mut prev_zones: Option<Vec<Zone>> = None;
        for k in 0..bps.len() - 1 {
            let (a, b) = (bps[k], bps[k + 1]);
            let mid = 0.5 * (a + b);
            let agents: Vec<AgentInterval> = self
                .plans
                .iter()
                .map(|plan| {
                    let seg = plan.segment_after(mid);
                    AgentInterval {
                        position: plan.position(a),
                        u: seg.u,
                        heading: seg.heading,
                    }
                })
                .collect();
            let mut zones = Vec::with_capacity(m * n);
            for target in &self.scenario.targets {
                for (j, agent) in self.scenario.agents.iter().enumerate() {
                    let s_mid = self.plans[j].position(mid);
                    zones.push(zone(
                        target.position,
                        s_mid,
                        agent.sensing_range,
                        agents[j].heading,
                    ));
                }
            }
            if let Some(prev) = &prev_zones {
                self.zone_events(a, prev, &zones);
            }
            self.pending.append(&mut switch_at[k]);
            self.motion_interval(a, b, &agents, &zones)?;
            prev_zones = Some(zones);
        }

        let horizon = self.scenario.horizon;
        self.pending.push(Event {
            time: horizon,
            kind: EventKind::Horizon,
            agent: None,
            target: None,
        });
        let closing = self.flush_pending();
        self.sample_until(horizon, true, |_| {
            unreachable!("final sample uses end state")
        });

        let mut record = SimRecord {
            horizon,
            events: self.events,
            intervals: self.intervals,
            closing,
            samples: self.samples,
            plans: self.plans,
            cost: 0.0,
        };
        record.cost = cost(&record);
        Ok(record)
    }

    /// Sensing, crossing and collaborator events at breakpoint `t`.
    fn zone_events(&mut self, t: f64, prev: &[Zone], next: &[Zone]) {
        let n = self.scenario.num_agents();
        for i in 0..self.scenario.num_targets() {
            for k in 0..n {
                let (p, q) = (prev[i * n + k], next[i * n + k]);
                let kind = match (p.in_range, q.in_range) {
                    (false, true) => EventKind::SensingGained,
                    (true, false) => EventKind::SensingLost,
                    (true, true) if p.slope * q.slope < 0.0 => EventKind::Crossed,
                    _ => continue,
                };
                self.pending.push(Event {
                    time: t,
                    kind,
                    agent: Some(k),
                    target: Some(i),
                });
                let delta = match kind {
                    EventKind::SensingGained => EventKind::CollaboratorJoined { other: k },
                    EventKind::SensingLost => EventKind::CollaboratorLeft { other: k },
                    _ => continue,
                };
                for j in (0..n).filter(|&j| j != k) {
                    if prev[i * n + j].in_range || next[i * n + j].in_range {
                        self.pending.push(Event {
                            time: t,
                            kind: delta,
                            agent: Some(j),
                            target: Some(i),
                        });
                    }
                }
            }
        }
    }

    fn flush_pending(&mut self) -> Range<usize> {
        let start = self.events.len();
        let mut batch = std::mem::take(&mut self.pending);
        batch.sort_by_key(Event::order_key);
        self.events.extend(batch);
        start..self.events.len()
    }

    /// Integrates across one motion interval, splitting it at uncertainty guards.
    fn motion_interval(
        &mut self,
        a: f64,
        b: f64,
        agents: &[AgentInterval],
        zones: &[Zone],
    ) -> Result<()> {
        let n = self.scenario.num_agents();
        let m = self.scenario.num_targets();
        let tol = self.scenario.numerics.event_tol;
        let mut t = a;
        // each target changes branch at most twice per crossing of its guard;
        // anything beyond this bound means the guards stopped making progress
        let budget = 64 + 16 * m;
        let mut pieces = 0;
        while t < b {
            pieces += 1;
            if pieces > budget {
                return Err(Error::Integration {
                    start: a,
                    end: b,
                    reason: format!("more than {budget} guard crossings in one motion interval"),
                });
            }
            // p_ij(σ) relative to t
            let probs: Vec<Option<Poly>> = (0..m * n)
                .map(|ij| {
                    let (i, j) = (ij / n, ij % n);
                    let z = zones[ij];
                    z.in_range.then(|| {
                        let x = self.scenario.targets[i].position;
                        let r = self.scenario.agents[j].sensing_range;
                        let s = agents[j].position + agents[j].u.value() * (t - a);
                        Poly::linear(1.0 - z.side * (x - s) / r, z.side * agents[j].u.value() / r)
                    })
                })
                .collect();
            let detection: Vec<Poly> = (0..m)
                .map(|i| {
                    let miss = probs[i * n..(i + 1) * n]
                        .iter()
                        .flatten()
                        .fold(Poly::constant(1.0), |acc, p| {
                            &acc * &(&Poly::constant(1.0) - p)
                        });
                    &Poly::constant(1.0) - &miss
                })
                .collect();
            let rates: Vec<Poly> = self
                .scenario
                .targets
                .iter()
                .zip(&detection)
                .map(|(tg, p)| &Poly::constant(tg.growth) - &p.scale(tg.decay))
                .collect();

            self.settle_branches(t, &rates);
            let opening = self.flush_pending();

            // earliest uncertainty guard in (t, b]
            let span = b - t;
            let mut guards: Vec<(usize, f64)> = Vec::new();
            for (i, st) in self.targets.iter().enumerate() {
                let rate = &rates[i];
                let hit = match st.branch {
                    Branch::Interior => {
                        if rate.degree() == 0 && rate.coeffs()[0] >= 0.0 {
                            None
                        } else {
                            let r = &Poly::constant(st.r) + &rate.integral();
                            r.first_crossing(span, 0.0, |v| v <= 0.0)
                        }
                    }
                    Branch::Boundary => rate.first_crossing(span, tol, |v| v > 0.0),
                };
                if let Some(s) = hit {
                    guards.push((i, s));
                }
            }
            let first = guards.iter().map(|g| g.1).fold(span, f64::min);
            let step = if span - first <= tol { span } else { first };
            let hits: Vec<usize> = guards
                .iter()
                .filter(|g| g.1 <= first + tol)
                .map(|g| g.0)
                .collect();
            let end = if step == span { b } else { t + step };

            self.record_interval(
                t, end, step, opening, agents, a, &probs, &detection, &rates, zones,
            )?;

            for i in hits {
                let st = &mut self.targets[i];
                let kind = match st.branch {
                    Branch::Interior => {
                        st.r = 0.0;
                        st.just_depleted = true;
                        EventKind::Depleted
                    }
                    Branch::Boundary => {
                        st.branch = Branch::Interior;
                        st.r = 0.0;
                        EventKind::Replenishing
                    }
                };
                self.pending.push(Event {
                    time: end,
                    kind,
                    agent: None,
                    target: Some(i),
                });
            }
            t = end;
        }
        Ok(())
    }

    /// Resolves which branch each target is on right after `t`.
    fn settle_branches(&mut self, t: f64, rates: &[Poly]) {
        for (i, st) in self.targets.iter_mut().enumerate() {
            let tg = &self.scenario.targets[i];
            let sign = rates[i].sign_after_zero(1e-12 * (tg.growth + tg.decay));
            match st.branch {
                Branch::Boundary if sign > 0 => {
                    st.branch = Branch::Interior;
                    self.pending.push(Event {
                        time: t,
                        kind: EventKind::Replenishing,
                        agent: None,
                        target: Some(i),
                    });
                }
                Branch::Interior if st.r == 0.0 => {
                    if sign <= 0 {
                        st.branch = Branch::Boundary;
                    } else if st.just_depleted {
                        // grazing contact: leaves zero at once
                        self.pending.push(Event {
                            time: t,
                            kind: EventKind::Replenishing,
                            agent: None,
                            target: Some(i),
                        });
                    }
                }
                _ => {}
            }
            st.just_depleted = false;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn record_interval(
        &mut self,
        t: f64,
        end: f64,
        step: f64,
        opening: Range<usize>,
        agents: &[AgentInterval],
        motion_start: f64,
        probs: &[Option<Poly>],
        detection: &[Poly],
        rates: &[Poly],
        zones: &[Zone],
    ) -> Result<()> {
        let n = self.scenario.num_agents();
        let m = self.scenario.num_targets();
        let mut targets = Vec::with_capacity(m);
        let mut r_polys = Vec::with_capacity(m);
        for (i, st) in self.targets.iter_mut().enumerate() {
            let r_poly = match st.branch {
                Branch::Interior => &Poly::constant(st.r) + &rates[i].integral(),
                Branch::Boundary => Poly::constant(0.0),
            };
            let r_end = r_poly.eval(step);
            let tg = &self.scenario.targets[i];
            if r_end < -1e-9 * (1.0 + tg.decay) {
                return Err(Error::Integration {
                    start: t,
                    end,
                    reason: format!("R_{} = {r_end} below zero (missed depletion event)", i + 1),
                });
            }
            targets.push(TargetInterval {
                branch: st.branch,
                r_start: st.r,
                r_end: r_end.max(0.0),
                r_integral: r_poly.integral().eval(step),
                detection: detection[i].eval(0.0).clamp(0.0, 1.0),
                r_poly: r_poly.clone(),
            });
            st.r = r_end.max(0.0);
            r_polys.push(r_poly);
        }

        let mut pairs = vec![PairTerm::default(); m * n];
        for i in 0..m {
            for j in 0..n {
                let z = zones[i * n + j];
                if !z.in_range {
                    continue;
                }
                let others = probs[i * n..(i + 1) * n]
                    .iter()
                    .enumerate()
                    .filter(|(g, _)| *g != j)
                    .filter_map(|(_, p)| p.as_ref())
                    .fold(Poly::constant(1.0), |acc, p| {
                        &acc * &(&Poly::constant(1.0) - p)
                    });
                let g = others.integral();
                pairs[i * n + j] = PairTerm {
                    in_range: true,
                    slope: z.slope,
                    g_end: g.eval(step),
                    g_area: g.integral().eval(step),
                };
            }
        }

        let agents_now: Vec<AgentInterval> = agents
            .iter()
            .map(|ag| AgentInterval {
                position: ag.position + ag.u.value() * (t - motion_start),
                ..*ag
            })
            .collect();

        self.sample_until(end, false, |ts| {
            let sigma = ts - t;
            Sample {
                time: ts,
                positions: agents_now
                    .iter()
                    .map(|ag| ag.position + ag.u.value() * sigma)
                    .collect(),
                controls: agents_now.iter().map(|ag| ag.u).collect(),
                uncertainty: r_polys.iter().map(|p| p.eval(sigma).max(0.0)).collect(),
                detection: detection
                    .iter()
                    .map(|p| p.eval(sigma).clamp(0.0, 1.0))
                    .collect(),
            }
        });

        self.intervals.push(IntervalRecord {
            start: t,
            end,
            opening,
            agents: agents_now,
            targets,
            pairs,
        });
        Ok(())
    }

    /// Emits samples with time `< end` (or `<= end` at the horizon).
    fn sample_until<F: Fn(f64) -> Sample>(&mut self, end: f64, closing: bool, at: F) {
        let dt = self.scenario.numerics.sample_dt;
        let horizon = self.scenario.horizon;
        loop {
            let ts = self.next_sample as f64 * dt;
            if ts > horizon + 1e-9 * dt {
                return;
            }
            if closing {
                let positions = self.plans.iter().map(|p| p.position(horizon)).collect();
                let controls = self
                    .plans
                    .iter()
                    .map(|p| p.segment_after(horizon).u)
                    .collect();
                let last = self.intervals.last();
                let detection = self.final_detection();
                self.samples.push(Sample {
                    time: ts.min(horizon),
                    positions,
                    controls,
                    uncertainty: last
                        .map(|iv| iv.targets.iter().map(|t| t.r_end).collect())
                        .unwrap_or_default(),
                    detection,
                });
            } else {
                if ts >= end {
                    return;
                }
                self.samples.push(at(ts));
            }
            self.next_sample += 1;
        }
    }

    fn final_detection(&self) -> Vec<f64> {
        let positions: Vec<f64> = self
            .plans
            .iter()
            .map(|p| p.position(self.scenario.horizon))
            .collect();
        self.scenario
            .targets
            .iter()
            .map(|t| crate::model::joint_detection_at(t, &self.scenario.agents, &positions))
            .collect()
    }
}
