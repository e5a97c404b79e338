//! Scenario descriptions: what to simulate, on which grid, with which
//! solver and diagnostics settings. Scenarios come from TOML files or from
//! the built-in presets.

mod config;
mod presets;

pub use config::{emit_config, parse_config, ParsedConfig};
pub use presets::{preset, PRESETS};

use std::sync::Arc;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::diagnostics::DiagnosticsOptions;
use crate::discretization::{Axis, BoundaryCondition, BoundaryData, Grid, ScalarField};
use crate::expr::Expr;
use crate::relay::{RelayError, RelayMode, RelayParams};
use crate::solver::{self, RunOutput, SimState, SolverConfig, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("schema error{}{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default(), field.as_ref().map(|f| format!(" in `{f}`")).unwrap_or_default())]
    Schema {
        line: Option<usize>,
        field: Option<String>,
        message: String,
    },
    #[error("invalid `{field}`: {message}")]
    Semantic { field: String, message: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl ScenarioError {
    fn semantic(field: &str, message: impl Into<String>) -> Self {
        ScenarioError::Semantic {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x: AxisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<AxisSpec>,
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        1 + self.y.is_some() as usize
    }

    pub fn build(&self) -> Result<Grid, ScenarioError> {
        let axes = std::iter::once(self.x)
            .chain(self.y)
            .map(|a| Axis { lo: a.lo, hi: a.hi, count: a.count })
            .collect();
        Grid::new(axes).map_err(|e| ScenarioError::semantic("grid", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaySpec {
    pub alpha: f64,
    pub beta: f64,
    pub mode: RelayMode,
}

/// Initial relay value: a fixed sign or the sign of an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    Minus,
    Plus,
    Sign(Expr),
}

impl Selector {
    pub fn as_text(&self) -> String {
        match self {
            Selector::Minus => "minus".into(),
            Selector::Plus => "plus".into(),
            Selector::Sign(e) => e.source().to_string(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, crate::expr::ExprError> {
        match text.trim() {
            "minus" => Ok(Selector::Minus),
            "plus" => Ok(Selector::Plus),
            other => Expr::parse(other).map(Selector::Sign),
        }
    }

    fn value(&self, x: [f64; 2]) -> f64 {
        match self {
            Selector::Minus => -1.0,
            Selector::Plus => 1.0,
            Selector::Sign(e) => {
                let v = e.eval(x[0], x[1], 0.0);
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    f64::NAN
                }
            }
        }
    }
}

impl Serialize for Selector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.as_text())
    }
}

impl<'de> Deserialize<'de> for Selector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Selector::parse(&text).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub phi: Expr,
    pub h0: Selector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottom: Option<BoundaryCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top: Option<BoundaryCondition>,
}

impl BoundarySpec {
    pub fn uniform(c: BoundaryCondition, dim: usize) -> Self {
        Self {
            left: c.clone(),
            right: c.clone(),
            bottom: (dim == 2).then(|| c.clone()),
            top: (dim == 2).then_some(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub dt: f64,
    pub t_end: f64,
    pub theta: f64,
    pub event_tol: f64,
    pub dt_min: f64,
    pub max_inner_iters: usize,
    pub max_short_steps: usize,
    pub snapshot_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub description: String,
    /// Closed-form solution, when one is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<Expr>,
    pub grid: GridSpec,
    pub relay: RelaySpec,
    pub initial: InitialSpec,
    pub boundary: BoundarySpec,
    pub solver: SolverSpec,
    pub diagnostics: DiagnosticsOptions,
}

/// Everything needed to start the solver.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Arc<Grid>,
    pub boundary: BoundaryData,
    pub params: RelayParams,
    pub config: SolverConfig,
    pub initial: SimState,
}

impl ScenarioSpec {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn params(&self) -> Result<RelayParams, ScenarioError> {
        RelayParams::new(self.relay.alpha, self.relay.beta)
            .map_err(|_| ScenarioError::semantic("relay", "alpha must be < beta"))
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            dt_init: s.dt,
            dt_min: s.dt_min,
            t_end: s.t_end,
            theta: s.theta,
            event_tol: s.event_tol,
            max_inner_iters: s.max_inner_iters,
            max_short_steps: s.max_short_steps,
            snapshot_stride: s.snapshot_stride,
            relay_mode: self.relay.mode,
            max_events: s.max_events,
        }
    }

    pub fn boundary_data(&self, grid: &Grid) -> Result<BoundaryData, ScenarioError> {
        let b = &self.boundary;
        let mut faces = vec![b.left.clone(), b.right.clone()];
        match (grid.dim(), &b.bottom, &b.top) {
            (1, None, None) => {}
            (2, Some(lo), Some(hi)) => faces.extend([lo.clone(), hi.clone()]),
            (1, _, _) => return Err(ScenarioError::semantic("boundary", "bottom/top given for a 1D grid")),
            _ => return Err(ScenarioError::semantic("boundary", "2D grids need bottom and top conditions")),
        }
        Ok(BoundaryData::new(grid, faces))
    }

    /// Validates every part of the scenario and assembles the initial state.
    pub fn build(&self) -> Result<Problem, ScenarioError> {
        let params = self.params()?;
        let grid = Arc::new(self.grid.build()?);
        let boundary = self.boundary_data(&grid)?;
        let config = self.solver_config();
        config
            .validate()
            .map_err(|e| ScenarioError::semantic("solver", e.to_string()))?;
        let phi = ScalarField::from_fn(grid.clone(), 0.0, |x| self.initial.phi.eval(x[0], x[1], 0.0));
        if !phi.is_finite() {
            return Err(ScenarioError::semantic("initial.phi", "not finite on the grid"));
        }
        let selectors: Vec<f64> = (0..grid.len()).map(|p| self.initial.h0.value(grid.coord(p))).collect();
        if let Some(p) = selectors.iter().position(|s| s.is_nan()) {
            return Err(ScenarioError::semantic(
                "initial.h0",
                format!("selector expression vanishes at grid point {p}"),
            ));
        }
        let initial = solver::initialize(phi, &selectors, &boundary, params, self.relay.mode).map_err(|e| match e {
            SolverError::Relay(RelayError::InvalidInitialState { input, selector, .. }) => ScenarioError::semantic(
                "initial.h0",
                format!("selector {selector} is inconsistent with phi = {input}"),
            ),
            SolverError::BoundaryMismatch { point, diff } => ScenarioError::semantic(
                "boundary",
                format!("Dirichlet data differs from phi by {diff:e} at grid point {point}"),
            ),
            other => ScenarioError::Solver(other),
        })?;
        Ok(Problem {
            grid,
            boundary,
            params,
            config,
            initial,
        })
    }

    /// Halves the grid spacing and the time step `k` times.
    pub fn refined(&self, k: u32) -> Self {
        let mut s = self.clone();
        let f = 1usize << k;
        s.grid.x.count = (s.grid.x.count - 1) * f + 1;
        if let Some(y) = s.grid.y.as_mut() {
            y.count = (y.count - 1) * f + 1;
        }
        s.solver.dt /= f as f64;
        s.solver.dt_min = s.solver.dt_min.min(s.solver.dt);
        s
    }

    /// Builds and runs the scenario.
    pub fn simulate(&self) -> Result<(Problem, RunOutput), ScenarioError> {
        let problem = self.build()?;
        let out = solver::run(problem.initial.clone(), &problem.boundary, &problem.config)?;
        Ok((problem, out))
    }
}
