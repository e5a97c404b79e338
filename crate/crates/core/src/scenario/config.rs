use serde::Deserialize;

use super::{BoundarySpec, GridSpec, InitialSpec, RelaySpec, ScenarioError, ScenarioSpec, SolverSpec};
use crate::diagnostics::DiagnosticsOptions;
use crate::expr::Expr;
use crate::relay::RelayMode;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    description: Option<String>,
    exact: Option<Expr>,
    grid: GridSpec,
    relay: RawRelay,
    initial: InitialSpec,
    boundary: BoundarySpec,
    solver: RawSolver,
    diagnostics: Option<RawDiagnostics>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRelay {
    alpha: f64,
    beta: f64,
    mode: Option<RelayMode>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    dt: f64,
    t_end: f64,
    theta: Option<f64>,
    event_tol: Option<f64>,
    dt_min: Option<f64>,
    max_inner_iters: Option<usize>,
    max_short_steps: Option<usize>,
    snapshot_stride: Option<usize>,
    max_events: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDiagnostics {
    tol_u: Option<f64>,
    eps_grad: Option<f64>,
    tol_dt: Option<f64>,
    r_nbhd: Option<f64>,
    monotone_tol: Option<f64>,
    eps_margin: Option<f64>,
    growth_centers: Option<usize>,
}

/// A resolved scenario and the fields that were filled with a default,
/// each described as `field = value (rule)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub spec: ScenarioSpec,
    pub defaulted: Vec<String>,
}

struct Defaults(Vec<String>);

impl Defaults {
    fn take<T: std::fmt::Debug>(&mut self, v: Option<T>, field: &str, rule: &str, default: impl FnOnce() -> T) -> T {
        v.unwrap_or_else(|| {
            let d = default();
            self.0.push(format!("{field} = {d:?} ({rule})"));
            d
        })
    }

    fn note(&mut self, present: bool, field: &str, rule: &str) {
        if !present {
            self.0.push(format!("{field} ({rule})"));
        }
    }
}

fn schema_error(text: &str, e: toml::de::Error) -> ScenarioError {
    let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    let message = e.message().to_string();
    let field = message
        .split('`')
        .nth(1)
        .map(str::to_string);
    ScenarioError::Schema { line, field, message }
}

/// Parses a TOML scenario, fills defaults and validates it.
pub fn parse_config(text: &str) -> Result<ParsedConfig, ScenarioError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| schema_error(text, e))?;
    let mut d = Defaults(Vec::new());
    let name = d.take(raw.name, "name", "unnamed scenario", || "custom".to_string());
    let description = d.take(raw.description, "description", "empty", String::new);
    let mode = d.take(raw.relay.mode, "relay.mode", "hysteresis relay", || RelayMode::NonIdeal);
    let s = raw.solver;
    let theta = d.take(s.theta, "solver.theta", "backward Euler", || 1.0);
    let t_end = s.t_end;
    let event_tol = d.take(s.event_tol, "solver.event_tol", "1e-6 * t_end", || 1e-6 * t_end);
    let dt = s.dt;
    let dt_min = d.take(s.dt_min, "solver.dt_min", "min(event_tol, dt)", || event_tol.min(dt));
    let max_inner_iters = d.take(s.max_inner_iters, "solver.max_inner_iters", "bisection cap", || 64);
    let max_short_steps = d.take(s.max_short_steps, "solver.max_short_steps", "underflow streak", || 64);
    let snapshot_stride = d.take(s.snapshot_stride, "solver.snapshot_stride", "every step", || 1);
    d.note(s.max_events.is_some(), "solver.max_events", "unlimited");
    let rd = raw.diagnostics.unwrap_or_default();
    d.note(rd.tol_u.is_some(), "diagnostics.tol_u", "max(10 event_tol max|du/dt|, 1e-6 (beta - alpha))");
    d.note(rd.eps_grad.is_some(), "diagnostics.eps_grad", "sqrt(h)");
    d.note(rd.tol_dt.is_some(), "diagnostics.tol_dt", "10 (h + dt)");
    d.note(rd.r_nbhd.is_some(), "diagnostics.r_nbhd", "3 h");
    d.note(rd.monotone_tol.is_some(), "diagnostics.monotone_tol", "h");
    let defaults = DiagnosticsOptions::default();
    let diagnostics = DiagnosticsOptions {
        tol_u: rd.tol_u,
        eps_grad: rd.eps_grad,
        tol_dt: rd.tol_dt,
        r_nbhd: rd.r_nbhd,
        monotone_tol: rd.monotone_tol,
        eps_margin: d.take(rd.eps_margin, "diagnostics.eps_margin", "interior margin", || defaults.eps_margin),
        growth_centers: d.take(rd.growth_centers, "diagnostics.growth_centers", "sampled centers", || {
            defaults.growth_centers
        }),
    };
    let spec = ScenarioSpec {
        name,
        description,
        exact: raw.exact,
        grid: raw.grid,
        relay: RelaySpec {
            alpha: raw.relay.alpha,
            beta: raw.relay.beta,
            mode,
        },
        initial: raw.initial,
        boundary: raw.boundary,
        solver: SolverSpec {
            dt,
            t_end,
            theta,
            event_tol,
            dt_min,
            max_inner_iters,
            max_short_steps,
            snapshot_stride,
            max_events: s.max_events,
        },
        diagnostics,
    };
    spec.build()?;
    Ok(ParsedConfig {
        spec,
        defaulted: d.0,
    })
}

/// Writes a fully resolved scenario; parsing the output gives back `spec`.
pub fn emit_config(spec: &ScenarioSpec) -> String {
    toml::to_string(spec).expect("scenario specs are representable in TOML")
}
