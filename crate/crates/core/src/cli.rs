//! Scenario files, output files and the three commands behind the binary.
//!
//! All indices written to files and messages are 1-based.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::control::AgentParams;
use crate::error::{Error, Result};
use crate::infoplane::{event_snapshots, sees, ReplicaOptions};
use crate::ipa::{centralized_gradient, centralized_pass, Gradient, SensitivityAudit};
use crate::model::{AgentSpec, InfoMode, Numerics, Scenario, Target};
use crate::optimizer::{optimize_with, OptRun, OptimizerConfig};
use crate::oracle::{grad_check_with, FdOptions, FdReport};
use crate::simulator::{simulate, Event, EventKind, SimRecord};

/// Version of the scenario file layout understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema_version: Spanned<u32>,
    #[serde(default = "default_mode")]
    mode: InfoMode,
    r_c: Spanned<f64>,
    mission: Spanned<MissionEntry>,
    #[serde(default)]
    targets: Vec<Spanned<TargetEntry>>,
    #[serde(default)]
    agents: Vec<Spanned<AgentEntry>>,
    #[serde(default)]
    numerics: Option<Spanned<NumericsEntry>>,
    #[serde(default)]
    optimizer: Option<Spanned<OptimizerEntry>>,
}

fn default_mode() -> InfoMode {
    InfoMode::Almost
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MissionEntry {
    #[serde(rename = "L")]
    length: f64,
    #[serde(rename = "T")]
    horizon: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetEntry {
    x: f64,
    #[serde(rename = "A")]
    growth: f64,
    #[serde(rename = "B")]
    decay: f64,
    #[serde(rename = "R0")]
    initial: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentEntry {
    s0: f64,
    u0: i8,
    r: f64,
    #[serde(default)]
    theta0: Vec<f64>,
    #[serde(default)]
    w0: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NumericsEntry {
    h: Option<f64>,
    eps_event: Option<f64>,
    sample_dt: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerEntry {
    a_theta: Option<f64>,
    a_w: Option<f64>,
    eta: Option<f64>,
    epsilon: Option<f64>,
    max_iters: Option<usize>,
}

/// Contents of a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    /// Initial `(θ, w)` per agent.
    pub params: Vec<AgentParams>,
    pub optimizer: OptimizerConfig,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a scenario document. `origin` names it in messages.
pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioSpec> {
    let parse_err = |message: String| Error::Parse {
        path: origin.to_string(),
        message,
    };
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| parse_err(e.to_string().trim_end().to_string()))?;
    let at = |span: std::ops::Range<usize>, what: String| {
        parse_err(format!("line {}: {what}", line_of(text, span.start)))
    };
    if *file.schema_version.get_ref() != SCHEMA_VERSION {
        return Err(at(
            file.schema_version.span(),
            format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version.get_ref()
            ),
        ));
    }

    let defaults = Numerics::default();
    let numerics = file.numerics.as_ref().map_or(defaults, |n| {
        let n = n.get_ref();
        Numerics {
            step: n.h.unwrap_or(defaults.step),
            event_tol: n.eps_event.unwrap_or(defaults.event_tol),
            sample_dt: n.sample_dt.unwrap_or(defaults.sample_dt),
        }
    });
    let mission = file.mission.get_ref();
    let scenario = Scenario {
        length: mission.length,
        horizon: mission.horizon,
        targets: file
            .targets
            .iter()
            .map(|t| {
                let t = t.get_ref();
                Target {
                    position: t.x,
                    growth: t.growth,
                    decay: t.decay,
                    initial: t.initial,
                }
            })
            .collect(),
        agents: file
            .agents
            .iter()
            .map(|a| {
                let a = a.get_ref();
                AgentSpec {
                    start: a.s0,
                    initial_control: a.u0,
                    sensing_range: a.r,
                }
            })
            .collect(),
        comm_range: *file.r_c.get_ref(),
        mode: file.mode,
        numerics,
    };
    scenario.validate().map_err(|e| match &e {
        Error::InvalidTarget { index, .. } => at(file.targets[index - 1].span(), e.to_string()),
        Error::InvalidAgent { index, .. } => {
            let span = if e.to_string().contains("communication range") {
                file.r_c.span()
            } else {
                file.agents[index - 1].span()
            };
            at(span, e.to_string())
        }
        Error::InvalidScenario(m) if m.starts_with("numeric") => at(
            file.numerics.as_ref().map_or(0..0, |n| n.span()),
            e.to_string(),
        ),
        _ => at(file.mission.span(), e.to_string()),
    })?;

    let params: Vec<AgentParams> = file
        .agents
        .iter()
        .map(|a| AgentParams::new(a.get_ref().theta0.clone(), a.get_ref().w0.clone()))
        .collect();
    for (j, p) in params.iter().enumerate() {
        p.validate(j, scenario.length)
            .map_err(|e| at(file.agents[j].span(), e.to_string()))?;
    }

    let base = OptimizerConfig {
        mode: file.mode,
        ..OptimizerConfig::default()
    };
    let optimizer = match &file.optimizer {
        None => base,
        Some(o) => {
            let span = o.span();
            let o = o.get_ref();
            let config = OptimizerConfig {
                a_theta: o.a_theta.unwrap_or(base.a_theta),
                a_w: o.a_w.unwrap_or(base.a_w),
                eta: o.eta.unwrap_or(base.eta),
                epsilon: o.epsilon.unwrap_or(base.epsilon),
                max_iters: o.max_iters.unwrap_or(base.max_iters),
                mode: file.mode,
            };
            config.validate().map_err(|e| at(span, e.to_string()))?;
            config
        }
    };
    Ok(ScenarioSpec {
        scenario,
        params,
        optimizer,
    })
}

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text, &path.display().to_string())
}

/// Parameter file layout: `{"agents": [{"theta": [...], "w": [...]}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub agents: Vec<AgentParams>,
}

pub fn load_params(path: &Path, scenario: &Scenario) -> Result<Vec<AgentParams>> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        path: origin.clone(),
        message: e.to_string(),
    })?;
    let file: ParamsFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: origin.clone(),
        message: e.to_string(),
    })?;
    if file.agents.len() != scenario.num_agents() {
        return Err(Error::Parse {
            path: origin,
            message: format!(
                "{} parameter sets for {} agents",
                file.agents.len(),
                scenario.num_agents()
            ),
        });
    }
    for (j, p) in file.agents.iter().enumerate() {
        p.validate(j, scenario.length)?;
    }
    Ok(file.agents)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_params(path: &Path, params: &[AgentParams]) -> Result<()> {
    write_json(
        path,
        &ParamsFile {
            agents: params.to_vec(),
        },
    )
}

/// `t, s_1..s_N, u_1..u_N, R_1..R_M, P_1..P_M`, one row per sample.
pub fn trajectory_csv(record: &SimRecord, num_targets: usize) -> String {
    let n = record.num_agents();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|j| format!("s_{j}")));
    header.extend((1..=n).map(|j| format!("u_{j}")));
    header.extend((1..=num_targets).map(|i| format!("R_{i}")));
    header.extend((1..=num_targets).map(|i| format!("P_{i}")));
    let mut out = header.join(",");
    out.push('\n');
    for s in &record.samples {
        let mut row = vec![s.time.to_string()];
        row.extend(s.positions.iter().map(f64::to_string));
        row.extend(s.controls.iter().map(|u| u.as_i8().to_string()));
        row.extend(s.uncertainty.iter().map(f64::to_string));
        row.extend(s.detection.iter().map(f64::to_string));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn event_row(e: &Event) -> String {
    let one = |v: Option<usize>| v.map_or(String::new(), |k| (k + 1).to_string());
    format!(
        "{},{},{},{},{}",
        e.time,
        e.kind.label(),
        one(e.agent),
        one(e.target),
        one(e.payload())
    )
}

/// `time, kind, agent, target, payload`. `payload` is the other agent of a
/// collaborator event or the switching-point index of a control switch.
pub fn events_csv(record: &SimRecord) -> String {
    let mut out = String::from("time,kind,agent,target,payload\n");
    for e in &record.events {
        out.push_str(&event_row(e));
        out.push('\n');
    }
    out
}

/// Global event log with a per-agent `visible` column.
pub fn audit_csv(scenario: &Scenario, record: &SimRecord, mode: InfoMode, agent: usize) -> String {
    let snapshots = event_snapshots(scenario, record);
    let mut out = String::from("time,kind,agent,target,payload,visible\n");
    for (e, snap) in record.events.iter().zip(&snapshots) {
        let _ = writeln!(
            out,
            "{},{}",
            event_row(e),
            u8::from(sees(mode, agent, e, snap))
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    #[serde(rename = "J")]
    pub cost: f64,
    pub horizon: f64,
    pub num_agents: usize,
    pub num_targets: usize,
    pub num_intervals: usize,
    pub event_counts: std::collections::BTreeMap<String, usize>,
}

/// Options shared by the commands.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOptions {
    pub scenario: PathBuf,
    pub out: PathBuf,
    pub params: Option<PathBuf>,
    pub mode: Option<InfoMode>,
    pub iters: Option<usize>,
    pub audit_events: bool,
}

impl CommandOptions {
    pub fn new(scenario: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        CommandOptions {
            scenario: scenario.into(),
            out: out.into(),
            params: None,
            mode: None,
            iters: None,
            audit_events: false,
        }
    }

    fn load(&self) -> Result<ScenarioSpec> {
        let mut spec = load_scenario(&self.scenario)?;
        if let Some(p) = &self.params {
            spec.params = load_params(p, &spec.scenario)?;
        }
        if let Some(mode) = self.mode {
            spec.scenario.mode = mode;
            spec.optimizer.mode = mode;
        }
        if let Some(iters) = self.iters {
            spec.optimizer.max_iters = iters;
        }
        Ok(spec)
    }
}

/// Simulates once and writes `trajectory.csv`, `events.csv`, `summary.json`.
pub fn cmd_simulate(opts: &CommandOptions) -> Result<SimulateSummary> {
    let spec = opts.load()?;
    let started = std::time::Instant::now();
    let record = simulate(&spec.scenario, &spec.params)?;
    crate::infoplane::check_depletions_local(&spec.scenario, &record)?;
    log::info!("simulated in {:?}", started.elapsed());
    fs::create_dir_all(&opts.out)?;
    let m = spec.scenario.num_targets();
    fs::write(opts.out.join("trajectory.csv"), trajectory_csv(&record, m))?;
    fs::write(opts.out.join("events.csv"), events_csv(&record))?;
    if opts.audit_events {
        write_audit(
            &opts.out.join("audit"),
            &spec.scenario,
            &record,
            spec.scenario.mode,
            None,
        )?;
    }
    let summary = SimulateSummary {
        cost: record.cost(),
        horizon: record.horizon,
        num_agents: spec.scenario.num_agents(),
        num_targets: m,
        num_intervals: record.intervals.len(),
        event_counts: record.event_counts(),
    };
    write_json(&opts.out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_audit(
    dir: &Path,
    scenario: &Scenario,
    record: &SimRecord,
    mode: InfoMode,
    iteration: Option<usize>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    for j in 0..scenario.num_agents() {
        let name = match iteration {
            Some(l) => format!("iter_{l:04}_agent_{}.csv", j + 1),
            None => format!("agent_{}.csv", j + 1),
        };
        fs::write(dir.join(name), audit_csv(scenario, record, mode, j))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeSummary {
    pub mode: InfoMode,
    pub termination: crate::optimizer::Termination,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Each recorded cost is evaluated before that iteration's update.
    pub cost_convention: &'static str,
    pub config: OptimizerConfig,
    pub sensitivity_audit: SensitivityAudit,
}

/// Iterations between parameter checkpoints.
pub const CHECKPOINT_EVERY: usize = 10;

/// `iteration, J, grad_norm_1..grad_norm_N`.
pub fn cost_history_csv(run: &OptRun, num_agents: usize) -> String {
    let mut out = String::from("iteration,J");
    for j in 1..=num_agents {
        let _ = write!(out, ",grad_norm_{j}");
    }
    out.push('\n');
    for it in &run.iterations {
        let _ = write!(out, "{},{}", it.index, it.cost);
        for g in it.grad_norms() {
            let _ = write!(out, ",{g}");
        }
        out.push('\n');
    }
    out
}

/// Runs the optimizer and writes `cost_history.csv`, `params_final.json`,
/// `checkpoints/params_XXXX.json`, `summary.json` and optional audit logs.
pub fn cmd_optimize(opts: &CommandOptions) -> Result<(OptRun, OptimizeSummary)> {
    let spec = opts.load()?;
    let scenario = &spec.scenario;
    fs::create_dir_all(opts.out.join("checkpoints"))?;
    let audit_dir = opts.out.join("audit");
    let mut sensitivity = SensitivityAudit::default();
    let started = std::time::Instant::now();
    let run = optimize_with(
        scenario,
        &spec.params,
        &spec.optimizer,
        ReplicaOptions::default(),
        |l, params, record| {
            sensitivity.merge(&centralized_pass(scenario, params, record)?.audit);
            if l % CHECKPOINT_EVERY == 0 {
                write_params(
                    &opts
                        .out
                        .join("checkpoints")
                        .join(format!("params_{l:04}.json")),
                    params,
                )?;
            }
            if opts.audit_events {
                write_audit(&audit_dir, scenario, record, spec.optimizer.mode, Some(l))?;
            }
            Ok(())
        },
    )?;
    log::info!(
        "{} iterations in {:?}",
        run.iterations.len(),
        started.elapsed()
    );
    fs::write(
        opts.out.join("cost_history.csv"),
        cost_history_csv(&run, scenario.num_agents()),
    )?;
    write_params(&opts.out.join("params_final.json"), &run.final_params)?;
    let summary = OptimizeSummary {
        mode: spec.optimizer.mode,
        termination: run.termination,
        iterations: run.iterations.len(),
        initial_cost: run.iterations[0].cost,
        final_cost: run.final_cost(),
        cost_convention: "J recorded at the parameters before each update",
        config: spec.optimizer,
        sensitivity_audit: sensitivity,
    };
    write_json(&opts.out.join("summary.json"), &summary)?;
    Ok((run, summary))
}

/// Gradient estimator with every component sign-flipped, used as a negative
/// control for the checker.
pub fn corrupted_gradient(scenario: &Scenario, params: &[AgentParams]) -> Result<Gradient> {
    let record = simulate(scenario, params)?;
    let mut g = centralized_gradient(scenario, params, &record)?;
    for a in &mut g {
        a.theta
            .iter_mut()
            .chain(a.dwell.iter_mut())
            .for_each(|v| *v = -*v);
    }
    Ok(g)
}

/// Compares IPA with finite differences and writes `gradcheck.json`.
pub fn cmd_gradcheck(opts: &CommandOptions, tol: f64, corrupt: bool) -> Result<FdReport> {
    let spec = opts.load()?;
    let options = FdOptions {
        tol,
        ..FdOptions::default()
    };
    let report = if corrupt {
        grad_check_with(&spec.scenario, &spec.params, &options, corrupted_gradient)?
    } else {
        grad_check_with(&spec.scenario, &spec.params, &options, |s, p| {
            let record = simulate(s, p)?;
            centralized_gradient(s, p, &record)
        })?
    };
    fs::create_dir_all(&opts.out)?;
    write_json(&opts.out.join("gradcheck.json"), &report)?;
    Ok(report)
}

/// Labels used in `events.csv`, for documentation and tests.
pub fn event_labels() -> Vec<String> {
    use crate::control::Control;
    let mut labels: Vec<String> = [
        EventKind::Depleted,
        EventKind::Replenishing,
        EventKind::SensingLost,
        EventKind::SensingGained,
        EventKind::CollaboratorJoined { other: 0 },
        EventKind::CollaboratorLeft { other: 0 },
        EventKind::Crossed,
        EventKind::Horizon,
    ]
    .iter()
    .map(EventKind::label)
    .collect();
    for (from, to) in [
        (Control::Pos, Control::Zero),
        (Control::Neg, Control::Zero),
        (Control::Zero, Control::Pos),
        (Control::Zero, Control::Neg),
        (Control::Pos, Control::Neg),
        (Control::Neg, Control::Pos),
        (Control::Pos, Control::Pos),
        (Control::Neg, Control::Neg),
    ] {
        labels.push(
            EventKind::Switch {
                from,
                to,
                waypoint: 0,
                arrival: true,
                departure: true,
            }
            .label(),
        );
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
schema_version = 1
mode = "almost"
r_c = 6.0

[mission]
L = 20.0
T = 10.0

[[targets]]
x = 5.0
A = 1.0
B = 5.0
R0 = 1.0

[[targets]]
x = 12.0
A = 1.0
B = 0.5
R0 = 1.0

[[agents]]
s0 = 0.0
u0 = 1
r = 3.0
theta0 = [5.0]
w0 = [1.0]
"#;

    #[test]
    fn bad_target_is_reported_with_index_and_line() {
        let err = parse_scenario(GOOD, "mem").unwrap_err();
        assert!(err.is_validation());
        let msg = err.to_string();
        assert!(msg.contains("target 2"), "{msg}");
        assert!(msg.contains("line 16"), "{msg}");
    }

    #[test]
    fn good_file_parses() {
        let text = GOOD.replace("B = 0.5", "B = 4.0");
        let spec = parse_scenario(&text, "mem").unwrap();
        assert_eq!(spec.scenario.num_targets(), 2);
        assert_eq!(spec.params[0].theta, vec![5.0]);
        assert_eq!(spec.optimizer.mode, InfoMode::Almost);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = GOOD.replace("B = 0.5", "B = 4.0\nC = 1.0");
        assert!(parse_scenario(&text, "mem").is_err());
    }

    #[test]
    fn labels_are_distinct() {
        let mut l = event_labels();
        let n = l.len();
        l.sort();
        l.dedup();
        assert_eq!(l.len(), n);
    }
}
