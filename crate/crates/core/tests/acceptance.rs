//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use persimon::infoplane::ReplicaOptions;
use persimon::ipa::{centralized_pass, SensitivityAudit};
use persimon::optimizer::{optimize_with, OptRun};
use persimon::oracle::grad_check;
use persimon::simulator::SimRecord;
use persimon::{
    simulate, AgentParams, AgentSpec, InfoMode, Numerics, OptimizerConfig, Scenario, Target,
};

const REFERENCE_ALMOST: f64 = 37.38;
const REFERENCE_LOCAL: f64 = 41.66;
const BAND: f64 = 0.15;

/// Per-simulation checks shared by criteria 1 to 4.
#[derive(Default)]
struct Audit {
    sensitivity: SensitivityAudit,
    simulations: usize,
    worst_physics: f64,
}

impl Audit {
    fn observe(
        &mut self,
        scenario: &Scenario,
        params: &[AgentParams],
        record: &SimRecord,
    ) -> persimon::Result<()> {
        self.sensitivity
            .merge(&centralized_pass(scenario, params, record)?.audit);
        self.simulations += 1;
        self.worst_physics = self
            .worst_physics
            .max(dense_physics_violation(scenario, record));
        Ok(())
    }
}

/// Worst `-R` on a dense grid of every interval and worst `|u| - 1`.
fn dense_physics_violation(scenario: &Scenario, record: &SimRecord) -> f64 {
    let h = scenario.numerics.step.max(record.horizon * 1e-5);
    let mut worst = common::physics_violation(record);
    for iv in &record.intervals {
        let steps = (iv.duration() / h).ceil().max(1.0) as usize;
        for t in &iv.targets {
            for k in 0..=steps {
                let sigma = iv.duration() * k as f64 / steps as f64;
                worst = worst.max(-t.r_poly.eval(sigma) - 1e-12 * (1.0 + t.r_start));
            }
        }
    }
    worst
}

fn run(
    scenario: &Scenario,
    params: &[AgentParams],
    config: &OptimizerConfig,
    audit: &mut Audit,
) -> OptRun {
    optimize_with(
        scenario,
        params,
        config,
        ReplicaOptions::default(),
        |_, p, record| audit.observe(scenario, p, record),
    )
    .expect("optimizer run")
}

/// Largest gradient difference between two runs and whether parameters,
/// costs and termination agree exactly.
fn compare_runs(a: &OptRun, b: &OptRun) -> (f64, bool) {
    let mut worst: f64 = 0.0;
    let mut identical = a.iterations.len() == b.iterations.len()
        && a.termination == b.termination
        && a.final_params == b.final_params;
    for (x, y) in a.iterations.iter().zip(&b.iterations) {
        identical &= x.cost.to_bits() == y.cost.to_bits() && x.params == y.params;
        for (gx, gy) in x.gradient.iter().zip(&y.gradient) {
            for (u, v) in gx.flat().iter().zip(gy.flat()) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    (worst, identical)
}

fn report(number: usize, name: &str, pass: bool, detail: String, started: Instant) -> bool {
    println!(
        "criterion {number} [{}] {name}: {detail} ({:.1}s)",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    pass
}

fn within(value: f64, reference: f64) -> bool {
    (value - reference).abs() <= BAND * reference
}

fn random_equivalence_cases() -> Vec<(Scenario, Vec<AgentParams>)> {
    (0..20u64)
        .map(|seed| {
            let mut rng = common::rng(1000 + seed);
            use rand::Rng;
            let agents = rng.random_range(1..=4);
            let targets = rng.random_range(2..=8);
            let horizon = rng.random_range(20.0..=100.0);
            let gamma = rng.random_range(4..=12);
            common::random_mission(&mut rng, agents, targets, horizon, gamma, 30.0)
        })
        .collect()
}

fn criterion_1(audit: &mut Audit, bundled_almost: &OptRun, bundled_central: &OptRun) -> bool {
    let started = Instant::now();
    let (mut worst, mut identical) = compare_runs(bundled_almost, bundled_central);
    let mut iterations = bundled_almost.iterations.len();
    for (scenario, params) in random_equivalence_cases() {
        let config = |mode| OptimizerConfig {
            max_iters: 30,
            mode,
            ..OptimizerConfig::default()
        };
        let a = run(&scenario, &params, &config(InfoMode::Almost), audit);
        let c = run(&scenario, &params, &config(InfoMode::Centralized), audit);
        let (w, same) = compare_runs(&a, &c);
        worst = worst.max(w);
        identical &= same;
        iterations += a.iterations.len();
    }
    report(
        1,
        "ALMOST gradient equals CENTRALIZED gradient",
        worst <= 1e-12 && identical,
        format!(
            "bundled + 20 random scenarios, {iterations} iterations, max |diff| = {worst:e}, runs identical = {identical}"
        ),
        started,
    )
}

fn criterion_2() -> bool {
    let started = Instant::now();
    let (mut smooth, mut passed, mut configs_failing) = (0, 0, 0);
    for seed in 0..50u64 {
        let mut rng = common::rng(2000 + seed);
        let (scenario, params) = common::random_mission(&mut rng, 2, 3, 20.0, 4, 20.0);
        let rep = grad_check(&scenario, &params, 1e-2).expect("grad check");
        smooth += rep.smooth_count;
        passed += rep.passed;
        if !rep.pass {
            configs_failing += 1;
        }
    }
    let rate = passed as f64 / smooth.max(1) as f64;
    report(
        2,
        "IPA agrees with central finite differences",
        smooth > 0 && rate >= 0.95,
        format!(
            "50 configs, {passed}/{smooth} smooth coordinates within 1e-2 ({:.2}%), {configs_failing} configs below 95%",
            100.0 * rate
        ),
        started,
    )
}

fn criterion_3(almost: &OptRun, elapsed: f64) -> bool {
    let started = Instant::now();
    let j = almost.final_cost();
    report(
        3,
        "experiment 1 (ALMOST) final cost",
        almost.iterations.len() == 201 && within(j, REFERENCE_ALMOST),
        format!(
            "J0 = {:.3}, J* = {j:.3} after 200 iterations, reference {REFERENCE_ALMOST} +/- 15% [{:.2}, {:.2}], run took {elapsed:.1}s",
            almost.iterations[0].cost,
            REFERENCE_ALMOST * (1.0 - BAND),
            REFERENCE_ALMOST * (1.0 + BAND)
        ),
        started,
    )
}

fn criterion_4(almost: &OptRun, local: &OptRun) -> bool {
    let started = Instant::now();
    let (ja, jl, j0) = (
        almost.final_cost(),
        local.final_cost(),
        local.iterations[0].cost,
    );
    report(
        4,
        "experiment 2 (LOCAL) final cost ordering",
        jl > ja && within(jl, REFERENCE_LOCAL) && jl < j0,
        format!(
            "J0 = {j0:.3}, LOCAL J* = {jl:.3} vs ALMOST J* = {ja:.3}, reference {REFERENCE_LOCAL} +/- 15% [{:.2}, {:.2}]",
            REFERENCE_LOCAL * (1.0 - BAND),
            REFERENCE_LOCAL * (1.0 + BAND)
        ),
        started,
    )
}

fn criterion_5(audit: &Audit) -> bool {
    let started = Instant::now();
    let l = &audit.sensitivity;
    report(
        5,
        "out-of-range hold/reset properties of dR/dtheta",
        l.violations == 0 && l.held_checks > 0 && l.reset_checks > 0,
        format!(
            "{} simulations, {} hold checks, {} post-depletion checks, {} replenishment checks, {} violations",
            audit.simulations, l.held_checks, l.reset_checks, l.replenish_checks, l.violations
        ),
        started,
    )
}

fn criterion_6(audit: &Audit) -> bool {
    let started = Instant::now();
    let target = |x: f64, r0: f64, growth: f64| Target {
        position: x,
        growth,
        decay: 5.0,
        initial: r0,
    };
    // no agents: J = Σ (R0 + A T / 2)
    let empty = Scenario {
        length: 40.0,
        horizon: 50.0,
        targets: vec![
            target(5.0, 1.0, 1.0),
            target(20.0, 0.0, 2.0),
            target(33.0, 3.5, 0.5),
        ],
        agents: vec![],
        comm_range: 6.0,
        mode: InfoMode::Centralized,
        numerics: Numerics::default(),
    };
    let expected: f64 = empty
        .targets
        .iter()
        .map(|t| t.initial + t.growth * empty.horizon / 2.0)
        .sum();
    let got = simulate(&empty, &[]).expect("empty scenario").cost();
    let empty_ok = ((got - expected) / expected).abs() <= 1e-6;

    // one agent parked on a single target: R = 1 - 4t until 0.25, then 0
    let dwell = Scenario {
        length: 20.0,
        horizon: 1.0,
        targets: vec![target(10.0, 1.0, 1.0)],
        agents: vec![AgentSpec {
            start: 10.0,
            initial_control: 1,
            sensing_range: 3.0,
        }],
        comm_range: 6.0,
        mode: InfoMode::Centralized,
        numerics: Numerics::default(),
    };
    let closed = simulate(&dwell, &[AgentParams::new(vec![10.0], vec![5.0])])
        .expect("dwell scenario")
        .cost();
    let dwell_ok = (closed - 0.125).abs() <= 1e-4;

    let physics_ok = audit.worst_physics <= 0.0;
    report(
        6,
        "physics invariants",
        empty_ok && dwell_ok && physics_ok,
        format!(
            "no-agent J = {got} (expected {expected}), dwelling J = {closed} (expected 0.125), worst R/u violation over {} simulations = {:e}",
            audit.simulations, audit.worst_physics
        ),
        started,
    )
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("read output dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).expect("read output")));
            }
        }
    }
    out.sort();
    out
}

fn criterion_7() -> bool {
    let started = Instant::now();
    let bin = env!("CARGO_BIN_EXE_persimon");
    let tmp = tempfile::tempdir().expect("tempdir");
    let e1 = common::scenario_path("example1.toml");
    let e2 = common::scenario_path("example2.toml");
    let commands: Vec<(&str, Vec<String>)> = vec![
        (
            "simulate",
            vec!["--scenario".into(), e1.display().to_string()],
        ),
        (
            "simulate",
            vec![
                "--scenario".into(),
                e2.display().to_string(),
                "--audit-events".into(),
            ],
        ),
        (
            "optimize",
            vec!["--scenario".into(), e1.display().to_string()],
        ),
        (
            "optimize",
            vec!["--scenario".into(), e2.display().to_string()],
        ),
        (
            "gradcheck",
            vec!["--scenario".into(), e1.display().to_string()],
        ),
    ];
    let mut identical = 0;
    let mut files = 0;
    for (k, (cmd, args)) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{k}_{rep}"));
            let status = Command::new(bin)
                .arg(cmd)
                .args(args)
                .arg("--out")
                .arg(&out)
                .output()
                .expect("run binary");
            assert!(status.status.success(), "{cmd} failed: {:?}", status);
            outputs.push(read_dir_bytes(&out));
        }
        files += outputs[0].len();
        if outputs[0] == outputs[1] && !outputs[0].is_empty() {
            identical += 1;
        }
    }
    report(
        7,
        "byte-identical outputs across repeated runs",
        identical == commands.len(),
        format!(
            "{identical}/{} bundled commands reproduced, {files} files compared",
            commands.len()
        ),
        started,
    )
}

fn main() {
    let mut audit = Audit::default();
    let example1 = common::bundled("example1.toml");
    let example2 = common::bundled("example2.toml");
    assert_eq!(example1.scenario, {
        let mut s = example2.scenario.clone();
        s.mode = InfoMode::Almost;
        s
    });
    assert_eq!(example1.params, example2.params);

    let t = Instant::now();
    let almost = run(
        &example1.scenario,
        &example1.params,
        &example1.optimizer,
        &mut audit,
    );
    let almost_secs = t.elapsed().as_secs_f64();
    let central = run(
        &example1.scenario,
        &example1.params,
        &OptimizerConfig {
            mode: InfoMode::Centralized,
            ..example1.optimizer
        },
        &mut audit,
    );
    let local = run(
        &example2.scenario,
        &example2.params,
        &example2.optimizer,
        &mut audit,
    );

    let results = [
        criterion_1(&mut audit, &almost, &central),
        criterion_2(),
        criterion_3(&almost, almost_secs),
        criterion_4(&almost, &local),
        criterion_5(&audit),
        criterion_6(&audit),
        criterion_7(),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
