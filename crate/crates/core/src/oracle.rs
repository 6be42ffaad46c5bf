//! Central finite-difference gradient oracle.
//!
//! Independent of the IPA engine: every value comes from full simulations and
//! their costs only.

use rayon::prelude::*;
use serde::Serialize;

use crate::control::AgentParams;
use crate::error::Result;
use crate::ipa::{centralized_gradient, Gradient};
use crate::model::Scenario;
use crate::simulator::simulate;

/// Absolute slack on the kink test covering rounding in second differences.
const KINK_NOISE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdOptions {
    /// Small and large central-difference steps.
    pub deltas: [f64; 2],
    /// Relative agreement required between the two steps for a coordinate to
    /// count as smooth. Coordinates whose one-sided derivatives differ by more
    /// than half of `tol` are also treated as kinks.
    pub smooth_tol: f64,
    /// Floor of the relative-error denominator.
    pub floor: f64,
    /// Relative error accepted per smooth coordinate.
    pub tol: f64,
    /// Fraction of smooth coordinates that must pass.
    pub pass_threshold: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions {
            deltas: [1e-4, 1e-3],
            smooth_tol: 0.05,
            floor: 1e-8,
            tol: 1e-2,
            pass_threshold: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Theta,
    W,
}

/// One parameter coordinate: agent, kind and 0-based switching-point index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Coordinate {
    pub agent: usize,
    pub kind: ParamKind,
    pub index: usize,
}

impl Coordinate {
    fn shifted(&self, params: &[AgentParams], delta: f64) -> Vec<AgentParams> {
        let mut p = params.to_vec();
        let v = match self.kind {
            ParamKind::Theta => &mut p[self.agent].theta[self.index],
            ParamKind::W => &mut p[self.agent].dwell[self.index],
        };
        *v += delta;
        p
    }

    fn value(&self, params: &[AgentParams]) -> f64 {
        match self.kind {
            ParamKind::Theta => params[self.agent].theta[self.index],
            ParamKind::W => params[self.agent].dwell[self.index],
        }
    }

    fn feasible(&self, params: &[AgentParams], delta: f64, length: f64) -> bool {
        let v = self.value(params);
        match self.kind {
            ParamKind::Theta => v - delta >= 0.0 && v + delta <= length,
            ParamKind::W => v - delta >= 0.0,
        }
    }

    fn ipa(&self, gradient: &Gradient) -> f64 {
        match self.kind {
            ParamKind::Theta => gradient[self.agent].theta[self.index],
            ParamKind::W => gradient[self.agent].dwell[self.index],
        }
    }
}

/// All coordinates in agent, θ-then-w, index order.
pub fn coordinates(params: &[AgentParams]) -> Vec<Coordinate> {
    let mut out = Vec::new();
    for (agent, p) in params.iter().enumerate() {
        for kind in [ParamKind::Theta, ParamKind::W] {
            out.extend((0..p.len()).map(|index| Coordinate { agent, kind, index }));
        }
    }
    out
}

fn cost_at(scenario: &Scenario, params: &[AgentParams]) -> Result<f64> {
    Ok(simulate(scenario, params)?.cost())
}

/// Central difference `(J(p + δe) - J(p - δe)) / 2δ`, or `None` when the
/// perturbation leaves the feasible set.
pub fn fd_gradient(
    scenario: &Scenario,
    params: &[AgentParams],
    coord: Coordinate,
    delta: f64,
) -> Result<Option<f64>> {
    if !coord.feasible(params, delta, scenario.length) {
        return Ok(None);
    }
    let plus = cost_at(scenario, &coord.shifted(params, delta))?;
    let minus = cost_at(scenario, &coord.shifted(params, -delta))?;
    Ok(Some((plus - minus) / (2.0 * delta)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateReport {
    #[serde(flatten)]
    pub coord: Coordinate,
    pub ipa: f64,
    /// Central differences at the two steps, `None` when skipped.
    pub fd_small: Option<f64>,
    pub fd_large: Option<f64>,
    pub rel_error: Option<f64>,
    pub smooth: bool,
    pub skipped: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdReport {
    pub options: FdOptions,
    pub coordinates: Vec<CoordinateReport>,
    pub smooth_count: usize,
    pub passed: usize,
    /// `passed / smooth_count`, or 1 when nothing is smooth.
    pub pass_rate: f64,
    pub pass: bool,
}

impl FdReport {
    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:>5} {:>5} {:>5} {:>14} {:>14} {:>10} {:>6}\n",
            "agent", "kind", "index", "ipa", "fd", "rel_err", "status"
        );
        for c in &self.coordinates {
            let kind = match c.coord.kind {
                ParamKind::Theta => "theta",
                ParamKind::W => "w",
            };
            let status = if c.skipped {
                "skip"
            } else if !c.smooth {
                "kink"
            } else if c.pass {
                "ok"
            } else {
                "FAIL"
            };
            out.push_str(&format!(
                "{:>5} {:>5} {:>5} {:>14.6e} {:>14} {:>10} {:>6}\n",
                c.coord.agent + 1,
                kind,
                c.coord.index + 1,
                c.ipa,
                c.fd_small.map_or("-".into(), |v| format!("{v:.6e}")),
                c.rel_error.map_or("-".into(), |v| format!("{v:.2e}")),
                status
            ));
        }
        out.push_str(&format!(
            "smooth {} passed {} rate {:.4} threshold {} -> {}\n",
            self.smooth_count,
            self.passed,
            self.pass_rate,
            self.options.pass_threshold,
            if self.pass { "PASS" } else { "FAIL" }
        ));
        out
    }
}

fn agree(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}

/// Compares the centralized IPA gradient against finite differences.
pub fn grad_check(scenario: &Scenario, params: &[AgentParams], tol: f64) -> Result<FdReport> {
    let options = FdOptions {
        tol,
        ..FdOptions::default()
    };
    grad_check_with(scenario, params, &options, |s, p| {
        let record = simulate(s, p)?;
        centralized_gradient(s, p, &record)
    })
}

/// Compares an arbitrary gradient estimator against finite differences.
pub fn grad_check_with<F>(
    scenario: &Scenario,
    params: &[AgentParams],
    options: &FdOptions,
    estimator: F,
) -> Result<FdReport>
where
    F: Fn(&Scenario, &[AgentParams]) -> Result<Gradient>,
{
    let gradient = estimator(scenario, params)?;
    let base = cost_at(scenario, params)?;
    let [small, large] = options.deltas;
    let coords = coordinates(params);

    // J at p ± δ for both steps, evaluated in parallel and collected by index
    let shifts: Vec<(usize, f64)> = (0..coords.len())
        .flat_map(|c| [(c, small), (c, -small), (c, large), (c, -large)])
        .collect();
    let costs: Vec<Option<f64>> = shifts
        .par_iter()
        .map(|&(c, d)| {
            let coord = coords[c];
            if !coord.feasible(params, d.abs(), scenario.length) {
                return Ok(None);
            }
            cost_at(scenario, &coord.shifted(params, d)).map(Some)
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(coords.len());
    for (c, coord) in coords.iter().enumerate() {
        let ipa = coord.ipa(&gradient);
        let [p_s, m_s, p_l, m_l] = [
            costs[4 * c],
            costs[4 * c + 1],
            costs[4 * c + 2],
            costs[4 * c + 3],
        ];
        let (Some(p_s), Some(m_s), Some(p_l), Some(m_l)) = (p_s, m_s, p_l, m_l) else {
            reports.push(CoordinateReport {
                coord: *coord,
                ipa,
                fd_small: None,
                fd_large: None,
                rel_error: None,
                smooth: false,
                skipped: true,
                pass: false,
            });
            continue;
        };
        let fd_small = (p_s - m_s) / (2.0 * small);
        let fd_large = (p_l - m_l) / (2.0 * large);
        // forward minus backward quotient behaves like jump + c δ; a
        // non-vanishing jump is a kink, where the central difference averages
        // the two one-sided derivatives
        let spread_s = (p_s - 2.0 * base + m_s) / small;
        let spread_l = (p_l - 2.0 * base + m_l) / large;
        let jump = spread_s - (spread_l - spread_s) / (large - small) * small;
        let smooth = agree(fd_small, fd_large, options.smooth_tol, options.floor)
            && jump.abs() <= 0.5 * options.tol * fd_small.abs().max(options.floor) + KINK_NOISE;
        let rel_error = (ipa - fd_small).abs() / fd_small.abs().max(options.floor);
        reports.push(CoordinateReport {
            coord: *coord,
            ipa,
            fd_small: Some(fd_small),
            fd_large: Some(fd_large),
            rel_error: Some(rel_error),
            smooth,
            skipped: false,
            pass: smooth && rel_error <= options.tol,
        });
    }
    let smooth_count = reports.iter().filter(|r| r.smooth).count();
    let passed = reports.iter().filter(|r| r.pass).count();
    let pass_rate = if smooth_count == 0 {
        1.0
    } else {
        passed as f64 / smooth_count as f64
    };
    Ok(FdReport {
        options: *options,
        coordinates: reports,
        smooth_count,
        passed,
        pass_rate,
        pass: pass_rate >= options.pass_threshold,
    })
}
