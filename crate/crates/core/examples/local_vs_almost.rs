//! Cost of purely local information: the same descent run with LOCAL and
//! ALMOST gradients, plus the CENTRALIZED run that ALMOST reproduces.
//!
//! Run with `cargo run --release --example local_vs_almost`.

use std::path::Path;

use persimon::cli::load_scenario;
use persimon::{optimize, InfoMode, OptimizerConfig};

fn main() -> persimon::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/example2.toml");
    let spec = load_scenario(&path)?;
    let mut finals = Vec::new();
    for mode in [InfoMode::Local, InfoMode::Almost, InfoMode::Centralized] {
        let mut scenario = spec.scenario.clone();
        scenario.mode = mode;
        let config = OptimizerConfig {
            mode,
            ..spec.optimizer
        };
        let run = optimize(&scenario, &spec.params, &config)?;
        println!(
            "{:<12} J0 = {:.4}  J* = {:.4}",
            mode.as_str(),
            run.iterations[0].cost,
            run.final_cost()
        );
        finals.push(run.costs());
    }
    println!(
        "ALMOST and CENTRALIZED histories identical: {}",
        finals[1] == finals[2]
    );
    println!(
        "extra cost of LOCAL information: {:.4}",
        finals[0].last().unwrap() - finals[1].last().unwrap()
    );
    Ok(())
}
