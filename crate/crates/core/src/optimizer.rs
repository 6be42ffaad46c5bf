//! Projected gradient descent over switching points and dwell times.

use serde::{Deserialize, Serialize};

use crate::control::{project_params, AgentParams};
use crate::error::{Error, Result};
use crate::infoplane::{check_depletions_local, gradient_for_record, ReplicaOptions};
use crate::ipa::{AgentGradient, Gradient};
use crate::model::{InfoMode, Scenario};
use crate::simulator::{simulate, SimRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub a_theta: f64,
    pub a_w: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub mode: InfoMode,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            a_theta: 0.2,
            a_w: 0.2,
            eta: 0.6,
            epsilon: 1e-4,
            max_iters: 200,
            mode: InfoMode::Almost,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidScenario(what));
        if !(self.a_theta > 0.0 && self.a_w > 0.0) {
            return bad(format!(
                "step scales must be positive (a_theta = {}, a_w = {})",
                self.a_theta, self.a_w
            ));
        }
        if !(self.eta > 0.5 && self.eta <= 1.0) {
            return bad(format!("eta = {} must lie in (0.5, 1]", self.eta));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad(format!("epsilon = {} must be positive", self.epsilon));
        }
        Ok(())
    }
}

/// `scale / (l + 1)^eta`.
pub fn step_size(l: usize, scale: f64, eta: f64) -> f64 {
    scale / ((l + 1) as f64).powf(eta)
}

/// One projected descent step for one agent.
pub fn gd_iterate(
    params: &AgentParams,
    gradient: &AgentGradient,
    alpha_theta: f64,
    alpha_w: f64,
    length: f64,
) -> AgentParams {
    let theta = params
        .theta
        .iter()
        .zip(&gradient.theta)
        .map(|(t, g)| t - alpha_theta * g)
        .collect();
    let dwell = params
        .dwell
        .iter()
        .zip(&gradient.dwell)
        .map(|(w, g)| w - alpha_w * g)
        .collect();
    project_params(&AgentParams::new(theta, dwell), length)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    Tol,
    MaxIters,
}

/// One optimizer iteration: the cost and gradient at `params`, before the
/// update.
#[derive(Debug, Clone, PartialEq)]
pub struct Iteration {
    pub index: usize,
    pub cost: f64,
    pub params: Vec<AgentParams>,
    pub gradient: Gradient,
}

impl Iteration {
    pub fn grad_norms(&self) -> Vec<f64> {
        self.gradient.iter().map(AgentGradient::norm).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptRun {
    pub iterations: Vec<Iteration>,
    pub final_params: Vec<AgentParams>,
    pub termination: Termination,
}

impl OptRun {
    pub fn costs(&self) -> Vec<f64> {
        self.iterations.iter().map(|it| it.cost).collect()
    }

    pub fn final_cost(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |it| it.cost)
    }
}

/// Runs the optimizer with default replica options and no observer.
pub fn optimize(
    scenario: &Scenario,
    initial: &[AgentParams],
    config: &OptimizerConfig,
) -> Result<OptRun> {
    optimize_with(
        scenario,
        initial,
        config,
        ReplicaOptions::default(),
        |_, _, _| Ok(()),
    )
}

/// Runs the optimizer, calling `observer(iteration, params, record)` after
/// every simulation.
///
/// Each iteration simulates, records `J`, evaluates the mode-specific
/// gradient and stops when every agent's gradient norm is below `epsilon` or
/// the iteration budget is spent; otherwise all agents update together.
pub fn optimize_with<F>(
    scenario: &Scenario,
    initial: &[AgentParams],
    config: &OptimizerConfig,
    replica: ReplicaOptions,
    mut observer: F,
) -> Result<OptRun>
where
    F: FnMut(usize, &[AgentParams], &SimRecord) -> Result<()>,
{
    config.validate()?;
    let mut params = initial.to_vec();
    let mut iterations = Vec::new();
    for l in 0.. {
        let record = simulate(scenario, &params)?;
        check_depletions_local(scenario, &record)?;
        observer(l, &params, &record)?;
        let gradient = gradient_for_record(scenario, &params, &record, config.mode, replica)?;
        if let Some(j) = gradient.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                agent: j + 1,
                iteration: l,
            });
        }
        let converged = gradient.iter().all(|g| g.norm() < config.epsilon);
        let next = if converged || l == config.max_iters {
            None
        } else {
            let (at, aw) = (
                step_size(l, config.a_theta, config.eta),
                step_size(l, config.a_w, config.eta),
            );
            Some(
                params
                    .iter()
                    .zip(&gradient)
                    .map(|(p, g)| gd_iterate(p, g, at, aw, scenario.length))
                    .collect::<Vec<_>>(),
            )
        };
        log::debug!("iteration {l}: J = {}", record.cost());
        iterations.push(Iteration {
            index: l,
            cost: record.cost(),
            params: params.clone(),
            gradient,
        });
        match next {
            Some(p) => params = p,
            None => {
                let termination = if converged {
                    Termination::Tol
                } else {
                    Termination::MaxIters
                };
                return Ok(OptRun {
                    iterations,
                    final_params: params,
                    termination,
                });
            }
        }
    }
    unreachable!("the loop only exits by returning")
}
