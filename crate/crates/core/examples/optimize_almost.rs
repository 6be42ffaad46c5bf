//! Gradient descent with almost decentralized gradients on the first bundled
//! experiment: three agents, seven targets, 200 iterations.
//!
//! Run with `cargo run --release --example optimize_almost`.

use std::path::Path;

use persimon::cli::load_scenario;
use persimon::optimize;

fn main() -> persimon::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/example1.toml");
    let spec = load_scenario(&path)?;
    let run = optimize(&spec.scenario, &spec.params, &spec.optimizer)?;
    for it in run.iterations.iter().step_by(20) {
        println!("iteration {:>3}  J = {:.4}", it.index, it.cost);
    }
    println!("final J = {:.4} ({:?})", run.final_cost(), run.termination);
    for (j, p) in run.final_params.iter().enumerate() {
        let visited: Vec<String> = p.theta.iter().take(8).map(|v| format!("{v:.1}")).collect();
        println!(
            "agent {} first switching points: {}",
            j + 1,
            visited.join(" ")
        );
    }
    Ok(())
}
