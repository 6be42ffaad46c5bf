//! IPA gradient against central finite differences on the first bundled
//! experiment, printed as a per-coordinate table.
//!
//! Run with `cargo run --release --example gradient_check`.

use std::path::Path;

use persimon::cli::load_scenario;
use persimon::oracle::grad_check;

fn main() -> persimon::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/example1.toml");
    let spec = load_scenario(&path)?;
    let report = grad_check(&spec.scenario, &spec.params, 1e-2)?;
    print!("{}", report.table());
    Ok(())
}
