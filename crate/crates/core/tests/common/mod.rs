#![allow(dead_code)]

use std::path::PathBuf;

use persimon::cli::{load_scenario, ScenarioSpec};
use persimon::simulator::SimRecord;
use persimon::{AgentParams, AgentSpec, InfoMode, Numerics, Scenario, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

pub fn bundled(name: &str) -> ScenarioSpec {
    load_scenario(&scenario_path(name)).expect("bundled scenario loads")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random mission with the given counts; agents carry `gamma` random
/// switching points and dwells.
pub fn random_mission(
    rng: &mut ChaCha8Rng,
    agents: usize,
    targets: usize,
    horizon: f64,
    gamma: usize,
    length: f64,
) -> (Scenario, Vec<AgentParams>) {
    let targets: Vec<Target> = (0..targets)
        .map(|_| {
            let growth = rng.random_range(0.5..1.5);
            Target {
                position: rng.random_range(0.1 * length..0.9 * length),
                growth,
                decay: growth + rng.random_range(2.0..6.0),
                initial: rng.random_range(0.0..3.0),
            }
        })
        .collect();
    let agent_specs: Vec<AgentSpec> = (0..agents)
        .map(|_| AgentSpec {
            start: rng.random_range(0.0..length),
            initial_control: 1,
            sensing_range: rng.random_range(2.0..4.0),
        })
        .collect();
    let params = (0..agents)
        .map(|_| {
            AgentParams::new(
                (0..gamma)
                    .map(|_| rng.random_range(0.5..length - 0.5))
                    .collect(),
                (0..gamma).map(|_| rng.random_range(0.1..2.0)).collect(),
            )
        })
        .collect();
    let scenario = Scenario {
        length,
        horizon,
        targets,
        agents: agent_specs,
        comm_range: 8.0,
        mode: InfoMode::Almost,
        numerics: Numerics::default(),
    };
    (scenario, params)
}

/// Worst violation of `R ≥ 0` and `|u| ≤ 1` over a record; zero when clean.
pub fn physics_violation(record: &SimRecord) -> f64 {
    let mut worst: f64 = 0.0;
    for iv in &record.intervals {
        for t in &iv.targets {
            worst = worst.max(-t.r_start).max(-t.r_end);
        }
        for a in &iv.agents {
            worst = worst.max(a.u.value().abs() - 1.0);
        }
    }
    for s in &record.samples {
        for r in &s.uncertainty {
            worst = worst.max(-r);
        }
        for u in &s.controls {
            worst = worst.max(u.value().abs() - 1.0);
        }
    }
    worst
}
