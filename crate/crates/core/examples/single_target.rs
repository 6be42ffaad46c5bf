//! One agent parked on one target: the uncertainty decays at rate `B - A`
//! until it hits zero, then stays there. The exact simulator reproduces the
//! hand-computed depletion time and mean uncertainty.
//!
//! Run with `cargo run --example single_target`.

use persimon::{simulate, AgentParams, AgentSpec, InfoMode, Numerics, Scenario, Target};

fn main() -> persimon::Result<()> {
    let target = Target {
        position: 10.0,
        growth: 1.0,
        decay: 5.0,
        initial: 1.0,
    };
    let scenario = Scenario {
        length: 20.0,
        horizon: 1.0,
        targets: vec![target.clone()],
        agents: vec![AgentSpec {
            start: 10.0,
            initial_control: 0,
            sensing_range: 3.0,
        }],
        comm_range: 6.0,
        mode: InfoMode::Centralized,
        numerics: Numerics::default(),
    };
    // one switching point under the agent with a dwell longer than the horizon
    let params = [AgentParams::new(vec![10.0], vec![5.0])];
    let record = simulate(&scenario, &params)?;

    let depletion = target.initial / (target.decay - target.growth);
    let mean = 0.5 * target.initial * depletion / scenario.horizon;
    for e in &record.events {
        println!("t = {:.6}  {}", e.time, e.kind.label());
    }
    println!(
        "depletion time: closed form {depletion}, first rho0 event {:?}",
        record
            .events
            .iter()
            .find(|e| e.is_depletion())
            .map(|e| e.time)
    );
    println!("J: closed form {mean}, simulated {}", record.cost());
    for t in [0.0, 0.1, 0.25, 0.5, 1.0] {
        println!("R({t}) = {:.6}", record.uncertainty_at(0, t));
    }
    Ok(())
}
