//! Time integration of `Δu - ∂ₜu = h[u]` with the relay latched per substep.
//!
//! Each substep solves the theta scheme
//!
//! ```text
//! (I - θ dt Δ) u¹ = u⁰ + (1 - θ) dt Δ u⁰ - dt h⁰
//! ```
//!
//! with `h` frozen at the start of the substep. If the candidate `u¹` would
//! switch any relay, the substep length is bisected until the earliest
//! crossing is bracketed within `event_tol`; the bracket's upper end is
//! committed and every relay that switched by then is latched.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretization::{
    BoundaryData, DiscretizationError, Grid, LaplacianOperator, NodeKind, ScalarField,
    SpaceTimeField,
};
use crate::linalg::{solve_tridiagonal, BandedLu, FactoredBand, LinalgError};
use crate::relay::{RelayError, RelayField, RelayMode, RelayParams, SwitchEvent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Relay(#[from] RelayError),
    #[error("Dirichlet data differs from initial data by {diff:e} at point {point}")]
    BoundaryMismatch { point: usize, diff: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("switches at t={t} keep arriving faster than dt_min (last substep {dt:e}); {} point(s) crossing", points.len())]
    DtUnderflow { t: f64, dt: f64, points: Vec<usize> },
    #[error("event bisection did not converge within {iters} iterations at t={t}")]
    BisectionLimit { t: f64, iters: usize },
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(#[from] LinalgError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error("non-finite solution at t={t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub t_end: f64,
    /// 1 = backward Euler, 0.5 = Crank-Nicolson.
    pub theta: f64,
    pub event_tol: f64,
    pub max_inner_iters: usize,
    /// Consecutive event substeps shorter than `dt_min` tolerated before the
    /// run is stopped with [`SolverError::DtUnderflow`].
    pub max_short_steps: usize,
    pub snapshot_stride: usize,
    pub relay_mode: RelayMode,
    /// Stop with [`RunOutcome::EventLimit`] once this many switches are logged.
    pub max_events: Option<usize>,
}

impl SolverConfig {
    /// Defaults: backward Euler, `event_tol = 1e-6 T`, `dt_min = event_tol`.
    pub fn new(t_end: f64, dt_init: f64) -> Self {
        let event_tol = 1e-6 * t_end;
        Self {
            dt_init,
            dt_min: event_tol.min(dt_init),
            t_end,
            theta: 1.0,
            event_tol,
            max_inner_iters: 64,
            max_short_steps: 64,
            snapshot_stride: 1,
            relay_mode: RelayMode::NonIdeal,
            max_events: None,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::Config(m.to_string()));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init) {
            return bad("need 0 < dt_min <= dt_init");
        }
        if !(self.event_tol > 0.0) {
            return bad("event_tol must be positive");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad("theta must lie in [0, 1]");
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be >= 1");
        }
        if self.max_short_steps == 0 {
            return bad("max_short_steps must be >= 1");
        }
        if self.max_inner_iters == 0 {
            return bad("max_inner_iters must be >= 1");
        }
        Ok(())
    }
}

/// `(u, h[u])` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub u: ScalarField,
    pub relay: RelayField,
    pub t: f64,
}

/// Builds the initial state, validating the initial relay values against
/// `phi` and Dirichlet data against `phi` on the boundary.
pub fn initialize(
    phi: ScalarField,
    selectors: &[f64],
    bd: &BoundaryData,
    params: RelayParams,
    mode: RelayMode,
) -> Result<SimState, SolverError> {
    let op = LaplacianOperator::new(phi.grid.clone(), bd);
    for p in 0..phi.values.len() {
        if let Some(b) = op.dirichlet_value(p, phi.time) {
            let diff = (b - phi.values[p]).abs();
            if !(diff <= 1e-8) {
                return Err(SolverError::BoundaryMismatch { point: p, diff });
            }
        }
    }
    let relay = RelayField::new(params, mode, &phi.values, selectors)?;
    Ok(SimState {
        t: phi.time,
        u: phi,
        relay,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Committed substep length (0 when only pending switches were latched).
    pub dt: f64,
    pub events: Vec<SwitchEvent>,
    pub solves: usize,
}

/// Reusable stepping machinery for one grid and boundary data.
pub struct Stepper {
    op: LaplacianOperator,
    cfg: SolverConfig,
    cache: Vec<(u64, FactoredBand)>,
    short_streak: usize,
}

impl Stepper {
    pub fn new(grid: Arc<Grid>, bd: &BoundaryData, cfg: SolverConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        Ok(Self {
            op: LaplacianOperator::new(grid, bd),
            cfg,
            cache: Vec::new(),
            short_streak: 0,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn operator(&self) -> &LaplacianOperator {
        &self.op
    }

    /// Candidate `u` after a substep of length `dt` with `h` frozen.
    pub fn solve(&mut self, state: &SimState, dt: f64) -> Result<Vec<f64>, SolverError> {
        let theta = self.cfg.theta;
        let t_new = state.t + dt;
        let u0 = &state.u.values;
        let h0 = state.relay.values();
        let n = u0.len();
        let explicit = if theta < 1.0 {
            self.op.apply(u0, state.t)
        } else {
            vec![0.0; n]
        };
        let source_new = if theta > 0.0 {
            self.op.source(t_new)
        } else {
            vec![0.0; n]
        };
        let mut rhs = Vec::with_capacity(n);
        for p in 0..n {
            rhs.push(match self.op.dirichlet_value(p, t_new) {
                Some(b) => b,
                None => {
                    u0[p] + dt * (1.0 - theta) * explicit[p] - dt * h0[p]
                        + theta * dt * source_new[p]
                }
            });
        }
        let u1 = if self.op.grid().dim() == 1 {
            self.solve_1d(dt, &rhs)?
        } else {
            self.solve_banded(dt, &rhs)?
        };
        if u1.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { t: t_new });
        }
        Ok(u1)
    }

    fn solve_1d(&self, dt: f64, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        let n = rhs.len();
        let c = self.cfg.theta * dt;
        let (mut sub, mut diag, mut sup) = (vec![0.0; n], vec![1.0; n], vec![0.0; n]);
        for p in 0..n {
            if self.op.kind(p) != NodeKind::Equation {
                continue;
            }
            for &(q, a) in self.op.entries(p) {
                if q + 1 == p {
                    sub[p] -= c * a;
                } else if q == p {
                    diag[p] -= c * a;
                } else {
                    sup[p] -= c * a;
                }
            }
        }
        Ok(solve_tridiagonal(&sub, &diag, &sup, rhs)?)
    }

    fn solve_banded(&mut self, dt: f64, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        let key = dt.to_bits();
        if let Some((_, lu)) = self.cache.iter().find(|(k, _)| *k == key) {
            return Ok(lu.solve(rhs)?);
        }
        let grid = self.op.grid();
        let n = grid.len();
        let bw = grid.stride(1);
        let c = self.cfg.theta * dt;
        let mut m = BandedLu::new(n, bw);
        for p in 0..n {
            m.add(p, p, 1.0);
            if self.op.kind(p) != NodeKind::Equation {
                continue;
            }
            for &(q, a) in self.op.entries(p) {
                m.add(p, q, -c * a);
            }
        }
        let lu = m.factor()?;
        let x = lu.solve(rhs)?;
        // Slot 0 keeps the first (nominal) step size; slot 1 rotates.
        if self.cache.len() < 2 {
            self.cache.push((key, lu));
        } else {
            self.cache[1] = (key, lu);
        }
        Ok(x)
    }

    fn commit(&mut self, state: &mut SimState, dt: f64, u_new: Vec<f64>) -> Vec<SwitchEvent> {
        let t_new = state.t + dt;
        let events = state.relay.latch(&state.u.values, state.t, &u_new, t_new);
        state.u.values = u_new;
        state.u.time = t_new;
        state.t = t_new;
        events
    }

    /// Advances `state` by one committed substep (possibly shortened to a
    /// relay switch).
    pub fn step(&mut self, state: &mut SimState) -> Result<StepReport, SolverError> {
        if state.relay.any_pending(&state.u.values) {
            let u = state.u.values.clone();
            let events = state.relay.latch(&u, state.t, &u, state.t);
            return Ok(StepReport { dt: 0.0, events, solves: 0 });
        }
        let remaining = self.cfg.t_end - state.t;
        let mut dt = self.cfg.dt_init.min(remaining);
        if remaining - dt <= 1e-9 * self.cfg.dt_init {
            dt = remaining;
        }
        let full = self.solve(state, dt)?;
        let mut solves = 1;
        if !state.relay.any_pending(&full) || dt <= self.cfg.dt_min {
            self.short_streak = 0;
            let events = self.commit(state, dt, full);
            return Ok(StepReport { dt, events, solves });
        }
        let (mut lo, mut hi, mut u_hi) = (0.0f64, dt, full);
        let mut iters = 0;
        while hi - lo > self.cfg.event_tol {
            if iters >= self.cfg.max_inner_iters {
                return Err(SolverError::BisectionLimit { t: state.t, iters });
            }
            iters += 1;
            let mid = 0.5 * (lo + hi);
            let candidate = self.solve(state, mid)?;
            solves += 1;
            if state.relay.any_pending(&candidate) {
                hi = mid;
                u_hi = candidate;
            } else {
                lo = mid;
            }
        }
        if hi < self.cfg.dt_min {
            if self.short_streak >= self.cfg.max_short_steps {
                let points = state.relay.pending(&u_hi).into_iter().map(|(p, _)| p).collect();
                return Err(SolverError::DtUnderflow { t: state.t, dt: hi, points });
            }
            self.short_streak += 1;
        } else {
            self.short_streak = 0;
        }
        let events = self.commit(state, hi, u_hi);
        Ok(StepReport { dt: hi, events, solves })
    }
}

/// Single substep with a throwaway [`Stepper`].
pub fn step(state: &SimState, cfg: &SolverConfig, bd: &BoundaryData) -> Result<SimState, SolverError> {
    let mut stepper = Stepper::new(state.u.grid.clone(), bd, *cfg)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed,
    DtUnderflow { t: f64, dt: f64, points: Vec<usize> },
    EventLimit { t: f64, events: usize },
}

impl RunOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            RunOutcome::Completed => "completed",
            RunOutcome::DtUnderflow { .. } => "dt_underflow",
            RunOutcome::EventLimit { .. } => "event_limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub committed_steps: usize,
    pub linear_solves: usize,
    pub min_substep: f64,
    pub max_substep: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub u: SpaceTimeField,
    /// Relay values at the snapshot times (after latching).
    pub h: SpaceTimeField,
    pub events: Vec<SwitchEvent>,
    pub outcome: RunOutcome,
    pub stats: RunStats,
}

/// Integrates from `state` to `cfg.t_end`. Snapshots are taken every
/// `snapshot_stride` committed substeps, at every substep that latched a
/// switch, and at the final time.
pub fn run(mut state: SimState, bd: &BoundaryData, cfg: &SolverConfig) -> Result<RunOutput, SolverError> {
    let mut stepper = Stepper::new(state.u.grid.clone(), bd, *cfg)?;
    let grid = state.u.grid.clone();
    let mut u_hist = SpaceTimeField::new(grid.clone());
    let mut h_hist = SpaceTimeField::new(grid);
    u_hist.push(state.t, &state.u.values);
    h_hist.push(state.t, state.relay.values());
    let mut stats = RunStats {
        min_substep: f64::INFINITY,
        ..RunStats::default()
    };
    let mut since_snapshot = 0;
    let mut outcome = RunOutcome::Completed;
    let end_slack = 1e-12 * cfg.t_end;
    while state.t < cfg.t_end - end_slack {
        let report = match stepper.step(&mut state) {
            Ok(r) => r,
            Err(SolverError::DtUnderflow { t, dt, points }) => {
                outcome = RunOutcome::DtUnderflow { t, dt, points };
                break;
            }
            Err(e) => return Err(e),
        };
        stats.linear_solves += report.solves;
        if report.dt == 0.0 {
            h_hist.replace_last(state.relay.values());
        } else {
            stats.committed_steps += 1;
            stats.min_substep = stats.min_substep.min(report.dt);
            stats.max_substep = stats.max_substep.max(report.dt);
            since_snapshot += 1;
            let last = state.t >= cfg.t_end - end_slack;
            if since_snapshot >= cfg.snapshot_stride || !report.events.is_empty() || last {
                u_hist.push(state.t, &state.u.values);
                h_hist.push(state.t, state.relay.values());
                since_snapshot = 0;
            }
        }
        if let Some(limit) = cfg.max_events {
            if state.relay.events().len() >= limit {
                if since_snapshot > 0 {
                    u_hist.push(state.t, &state.u.values);
                    h_hist.push(state.t, state.relay.values());
                }
                outcome = RunOutcome::EventLimit {
                    t: state.t,
                    events: state.relay.events().len(),
                };
                break;
            }
        }
    }
    if stats.committed_steps == 0 {
        stats.min_substep = 0.0;
    }
    Ok(RunOutput {
        u: u_hist,
        h: h_hist,
        events: state.relay.events().to_vec(),
        outcome,
        stats,
    })
}

/// Pointwise equation residual `|Δu - ∂ₜu - h|` at interior snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    /// Residual at snapshots `1..len-1`; excluded entries are 0.
    pub field: SpaceTimeField,
    pub excluded: usize,
    pub max: f64,
}

/// Excludes Dirichlet nodes and, per point, snapshots whose neighbouring
/// time levels bracket a switch event at that point.
pub fn residual(
    u_hist: &SpaceTimeField,
    h_hist: &SpaceTimeField,
    bd: &BoundaryData,
    events: &[SwitchEvent],
) -> Result<Residual, SolverError> {
    assert_eq!(u_hist.times(), h_hist.times(), "histories must be aligned");
    let grid = u_hist.grid().clone();
    let op = LaplacianOperator::new(grid.clone(), bd);
    let mut per_point: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    for e in events {
        per_point[e.point].push(e.time);
    }
    let times = u_hist.times();
    let mut field = SpaceTimeField::new(grid.clone());
    let (mut excluded, mut max) = (0usize, 0.0f64);
    for k in 1..u_hist.len().saturating_sub(1) {
        let lap = op.apply(u_hist.row(k), times[k]);
        let dt = crate::discretization::time_derivative(u_hist, k)?;
        let h = h_hist.row(k);
        let (t_lo, t_hi) = (times[k - 1], times[k + 1]);
        let row: Vec<f64> = (0..grid.len())
            .map(|p| {
                let near_event = per_point[p].iter().any(|&te| te >= t_lo && te <= t_hi);
                if op.kind(p) != NodeKind::Equation || near_event {
                    excluded += 1;
                    0.0
                } else {
                    let r = (lap[p] - dt.values[p] - h[p]).abs();
                    max = max.max(r);
                    r
                }
            })
            .collect();
        field.push(times[k], &row);
    }
    Ok(Residual { field, excluded, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::BoundaryCondition;
    use crate::expr::Expr;
    use crate::relay::SwitchDirection;

    fn unit() -> RelayParams {
        RelayParams::new(0.0, 1.0).unwrap()
    }

    fn constant_state(n: usize, u0: f64, h0: f64) -> (SimState, BoundaryData) {
        let g = Arc::new(Grid::line(0.0, 1.0, n).unwrap());
        let bd = BoundaryData::homogeneous_neumann(&g);
        let phi = ScalarField::from_fn(g, 0.0, |_| u0);
        let sel = vec![h0; n];
        (initialize(phi, &sel, &bd, unit(), RelayMode::NonIdeal).unwrap(), bd)
    }

    #[test]
    fn initialize_checks_relay_and_boundary() {
        let (s, _) = constant_state(5, 0.5, -1.0);
        assert!(s.relay.values().iter().all(|v| *v == -1.0));
        let g = Arc::new(Grid::line(0.0, 1.0, 5).unwrap());
        let bd = BoundaryData::homogeneous_neumann(&g);
        let phi = ScalarField::from_fn(g.clone(), 0.0, |_| 2.0);
        assert!(matches!(
            initialize(phi, &[-1.0; 5], &bd, unit(), RelayMode::NonIdeal),
            Err(SolverError::Relay(RelayError::InvalidInitialState { .. }))
        ));
        let dir = BoundaryData::uniform(&g, BoundaryCondition::dirichlet(Expr::constant(0.0)));
        let phi = ScalarField::from_fn(g, 0.0, |_| 0.5);
        assert!(matches!(
            initialize(phi, &[-1.0; 5], &dir, unit(), RelayMode::NonIdeal),
            Err(SolverError::BoundaryMismatch { .. })
        ));
    }

    #[test]
    fn initialize_with_sign_consistent_selector() {
        let g = Arc::new(Grid::line(0.0, 1.0, 21).unwrap());
        let bd = BoundaryData::homogeneous_neumann(&g);
        let phi = ScalarField::from_fn(g, 0.0, |x| 1.2 * (std::f64::consts::PI * x[0]).sin());
        let sel: Vec<f64> = phi.values.iter().map(|&v| if v >= 0.6 { 1.0 } else { -1.0 }).collect();
        let s = initialize(phi.clone(), &sel, &bd, unit(), RelayMode::NonIdeal).unwrap();
        for (u, h) in phi.values.iter().zip(s.relay.values()) {
            if *u >= 1.0 {
                assert_eq!(*h, 1.0);
            }
            if *u <= 0.0 {
                assert_eq!(*h, -1.0);
            }
        }
    }

    #[test]
    fn constant_state_rises_to_beta() {
        let (state, bd) = constant_state(11, 0.5, -1.0);
        let mut cfg = SolverConfig::new(0.6, 1e-3);
        cfg.event_tol = 1e-6;
        cfg.dt_min = 1e-9;
        let out = run(state, &bd, &cfg).unwrap();
        assert_eq!(out.outcome, RunOutcome::Completed);
        assert_eq!(out.events.len(), 11);
        for e in &out.events {
            assert_eq!(e.direction, SwitchDirection::Up);
            assert!((e.time - 0.5).abs() <= 1e-6, "{}", e.time);
            assert!(e.u >= 1.0);
        }
    }

    #[test]
    fn state_on_alpha_with_plus_switches_immediately() {
        let g = Arc::new(Grid::line(0.0, 1.0, 5).unwrap());
        let bd = BoundaryData::homogeneous_neumann(&g);
        let mut state = SimState {
            u: ScalarField::from_fn(g.clone(), 0.0, |_| 0.0),
            relay: RelayField::from_raw(unit(), RelayMode::NonIdeal, vec![1.0; 5]),
            t: 0.0,
        };
        let mut stepper = Stepper::new(g, &bd, SolverConfig::new(1.0, 1e-2)).unwrap();
        let report = stepper.step(&mut state).unwrap();
        assert_eq!(report.dt, 0.0);
        assert_eq!(report.events.len(), 5);
        assert!(report.events.iter().all(|e| e.direction == SwitchDirection::Down));
        assert!(state.relay.values().iter().all(|v| *v == -1.0));
    }

    #[test]
    fn free_step_fn_advances() {
        let (state, bd) = constant_state(5, 0.2, -1.0);
        let next = step(&state, &SolverConfig::new(1.0, 0.01), &bd).unwrap();
        assert!((next.t - 0.01).abs() < 1e-15);
        assert!(next.u.values.iter().all(|v| (v - 0.21).abs() < 1e-12));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::new(1.0, 0.1);
        assert!(cfg.validate().is_ok());
        cfg.dt_min = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::new(1.0, 0.1);
        cfg.theta = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn corrupted_relay_value_shows_in_residual() {
        let (state, bd) = constant_state(11, 0.2, -1.0);
        let cfg = SolverConfig::new(0.2, 1e-3);
        let out = run(state, &bd, &cfg).unwrap();
        let clean = residual(&out.u, &out.h, &bd, &out.events).unwrap();
        assert!(clean.max < 1e-9, "{}", clean.max);
        let k = 50;
        let mut h = SpaceTimeField::new(out.h.grid().clone());
        for j in 0..out.h.len() {
            let mut row = out.h.row(j).to_vec();
            if j == k {
                row[5] = 1.0;
            }
            h.push(out.h.times()[j], &row);
        }
        let bad = residual(&out.u, &h, &bd, &out.events).unwrap();
        let spike = bad.field.value(k - 1, 5);
        assert!((spike - 2.0).abs() < 1e-9, "{spike}");
    }

    #[test]
    fn two_dimensional_step_uses_banded_solve() {
        let g = Arc::new(Grid::rectangle((0.0, 1.0, 9), (0.0, 1.0, 7)).unwrap());
        let bd = BoundaryData::homogeneous_neumann(&g);
        let phi = ScalarField::from_fn(g.clone(), 0.0, |_| 0.4);
        let state = initialize(phi, &vec![-1.0; g.len()], &bd, unit(), RelayMode::NonIdeal).unwrap();
        let next = step(&state, &SolverConfig::new(1.0, 0.05), &bd).unwrap();
        assert!(next.u.values.iter().all(|v| (v - 0.45).abs() < 1e-12));
    }
}
