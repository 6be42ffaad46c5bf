//! Which events each agent sees under the three information modes.
//!
//! Simulates the bundled first experiment and counts, per agent, the events
//! visible in LOCAL, ALMOST and CENTRALIZED mode. The difference between
//! ALMOST and LOCAL is always a set of depletions of targets out of range.
//!
//! Run with `cargo run --release --example neighborhoods`.

use std::path::Path;

use persimon::cli::load_scenario;
use persimon::infoplane::{event_snapshots, visible_events, NeighborSnapshot};
use persimon::{simulate, InfoMode};

fn main() -> persimon::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/example1.toml");
    let spec = load_scenario(&path)?;
    let scenario = &spec.scenario;
    let record = simulate(scenario, &spec.params)?;
    let snapshots = event_snapshots(scenario, &record);

    let t = 7.0;
    let snapshot = NeighborSnapshot::new(scenario, &record.positions_at(t));
    println!("at t = {t}: positions {:?}", record.positions_at(t));
    for j in 0..scenario.num_agents() {
        println!(
            "  agent {} informants {:?}",
            j + 1,
            snapshot
                .informants(j)
                .iter()
                .map(|k| k + 1)
                .collect::<Vec<_>>()
        );
    }

    println!("{} events in the log", record.events.len());
    for j in 0..scenario.num_agents() {
        let count = |mode| visible_events(mode, j, &record, &snapshots).len();
        let local = visible_events(InfoMode::Local, j, &record, &snapshots);
        let almost = visible_events(InfoMode::Almost, j, &record, &snapshots);
        let extra = almost
            .iter()
            .filter(|(k, _)| !local.iter().any(|(l, _)| l == k))
            .count();
        println!(
            "agent {}: local {}, almost {} ({} broadcast depletions), centralized {}",
            j + 1,
            count(InfoMode::Local),
            count(InfoMode::Almost),
            extra,
            count(InfoMode::Centralized)
        );
    }
    Ok(())
}
