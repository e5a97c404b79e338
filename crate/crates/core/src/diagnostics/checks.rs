use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::discretization::{gradient, SpaceTimeField};
use crate::free_boundary::{Degeneracy, FacetClass, FreeBoundaryDecomposition, Orientation};
use crate::relay::{RelayParams, SwitchDirection, SwitchEvent};
use crate::solver::RunOutcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtSignViolation {
    pub facet: usize,
    pub class: FacetClass,
    pub x: [f64; 2],
    pub t: f64,
    pub dt_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtSignReport {
    pub tol_dt: f64,
    pub checked_alpha: usize,
    pub checked_beta: usize,
    pub violations: Vec<DtSignViolation>,
    /// Largest violation beyond the tolerance, 0 if none.
    pub max_excess: f64,
    /// `sup |du/dt|` over the nondegenerate threshold facets.
    pub sup_abs_dt_u: Option<f64>,
}

/// `du/dt` across a time-like facet as the difference quotient of its two
/// cells.
pub fn facet_time_derivative(u_hist: &SpaceTimeField, decomp: &FreeBoundaryDecomposition, i: usize) -> f64 {
    let f = &decomp.facets[i];
    let t = u_hist.times();
    let (a, b) = (f.lower, f.upper);
    (u_hist.value(b.snapshot, b.point) - u_hist.value(a.snapshot, a.point))
        / (t[b.snapshot] - t[a.snapshot])
}

/// Sign law on the nondegenerate threshold facets: `du/dt <= tol_dt` on Γ*_α
/// and `du/dt >= -tol_dt` on Γ*_β.
pub fn dt_sign_and_bound_check(
    u_hist: &SpaceTimeField,
    decomp: &FreeBoundaryDecomposition,
    tol_dt: f64,
) -> DtSignReport {
    let mut report = DtSignReport {
        tol_dt,
        checked_alpha: 0,
        checked_beta: 0,
        violations: Vec::new(),
        max_excess: 0.0,
        sup_abs_dt_u: None,
    };
    for (i, f) in decomp.facets.iter().enumerate() {
        if f.orientation != Orientation::TimeLike
            || !f.class.is_threshold()
            || f.degeneracy != Degeneracy::Nondegenerate
        {
            continue;
        }
        let d = facet_time_derivative(u_hist, decomp, i);
        let excess = if f.class == FacetClass::GammaAlpha {
            report.checked_alpha += 1;
            d - tol_dt
        } else {
            report.checked_beta += 1;
            -d - tol_dt
        };
        report.sup_abs_dt_u = Some(report.sup_abs_dt_u.unwrap_or(0.0).max(d.abs()));
        if excess > 0.0 {
            report.max_excess = report.max_excess.max(excess);
            report.violations.push(DtSignViolation {
                facet: i,
                class: f.class,
                x: f.x,
                t: f.t,
                dt_u: d,
            });
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalityViolation {
    pub snapshot: usize,
    pub point: usize,
    pub x: f64,
    pub t: f64,
    pub u: f64,
    pub u_x: f64,
    /// Threshold that was reached with zero slope.
    pub threshold: f64,
    /// Grid point in the neighbourhood carrying the wrong relay value.
    pub offending_point: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransversalityTolerances {
    pub tol_u: f64,
    pub eps_grad: f64,
    pub r_nbhd: f64,
}

/// Flat contact with a threshold must come with the relay already switched
/// on a whole neighbourhood. A snapshot point that has reached β
/// (`beta <= u <= beta + tol_u`) with `|u_x| <= eps_grad` needs `h = +1` at
/// every grid point within `r_nbhd`; dually at α with `h = -1`.
pub fn transversality_check(
    u_hist: &SpaceTimeField,
    h_hist: &SpaceTimeField,
    p: &RelayParams,
    tol: TransversalityTolerances,
) -> Result<Vec<TransversalityViolation>, DiagnosticsError> {
    let grid = u_hist.grid();
    if grid.dim() != 1 {
        return Err(DiagnosticsError::DimensionUnsupported { dim: grid.dim() });
    }
    let n = grid.len();
    let h = grid.spacing(0);
    let reach = (tol.r_nbhd / h + 1e-9).floor() as usize;
    let mut out = Vec::new();
    for k in 0..u_hist.len() {
        let row = u_hist.row(k);
        let hs = h_hist.row(k);
        let snap = u_hist.snapshot(k);
        let ux = &gradient(&snap)[0];
        for i in 0..n {
            if ux[i].abs() > tol.eps_grad {
                continue;
            }
            let u = row[i];
            let (theta, required) = if u >= p.beta() && u <= p.beta() + tol.tol_u {
                (p.beta(), 1.0)
            } else if u <= p.alpha() && u >= p.alpha() - tol.tol_u {
                (p.alpha(), -1.0)
            } else {
                continue;
            };
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(n - 1);
            if let Some(j) = (lo..=hi).find(|&j| hs[j] != required) {
                out.push(TransversalityViolation {
                    snapshot: k,
                    point: i,
                    x: grid.coord(i)[0],
                    t: u_hist.times()[k],
                    u,
                    u_x: ux[i],
                    threshold: theta,
                    offending_point: j,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gamma0Check {
    pub empty: bool,
    pub degenerate: usize,
    pub threshold_facets: usize,
    /// Facet indices, at most [`MAX_WITNESSES`].
    pub witnesses: Vec<usize>,
}

pub const MAX_WITNESSES: usize = 64;

/// Whether no facet outside Γ_v is degenerate.
pub fn gamma0_empty_check(decomp: &FreeBoundaryDecomposition) -> Gamma0Check {
    let mut witnesses = Vec::new();
    let mut degenerate = 0;
    let mut threshold_facets = 0;
    for (i, f) in decomp.facets.iter().enumerate() {
        if f.class == FacetClass::GammaV {
            continue;
        }
        if f.class.is_threshold() {
            threshold_facets += 1;
        }
        if f.degeneracy == Degeneracy::Degenerate {
            degenerate += 1;
            if witnesses.len() < MAX_WITNESSES {
                witnesses.push(i);
            }
        }
    }
    Gamma0Check {
        empty: degenerate == 0,
        degenerate,
        threshold_facets,
        witnesses,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandProbe {
    pub alpha: f64,
    pub beta: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub events: usize,
    pub up_events: usize,
    pub down_events: usize,
    pub first_event: Option<f64>,
    pub last_event: Option<f64>,
    /// Largest number of events latched at a single instant.
    pub max_simultaneous: usize,
    /// Neighbouring grid pairs with opposite relay values in the last snapshot.
    pub final_alternations: usize,
    pub outcome: String,
    pub dt_underflow: bool,
}

/// Observational summary: range of `u`, switching activity and how the run
/// ended.
pub fn band_confinement_probe(
    u_hist: &SpaceTimeField,
    h_hist: &SpaceTimeField,
    p: &RelayParams,
    events: &[SwitchEvent],
    outcome: &RunOutcome,
) -> BandProbe {
    let (u_min, u_max) = u_hist.min_max();
    let up = events.iter().filter(|e| e.direction == SwitchDirection::Up).count();
    let mut max_simultaneous = 0;
    let mut run = 0;
    for (i, e) in events.iter().enumerate() {
        run = if i > 0 && events[i - 1].time == e.time { run + 1 } else { 1 };
        max_simultaneous = usize::max(max_simultaneous, run);
    }
    let final_alternations = if h_hist.is_empty() {
        0
    } else {
        let grid = h_hist.grid();
        let row = h_hist.row(h_hist.len() - 1);
        (0..grid.len())
            .map(|q| {
                let idx = grid.multi_index(q);
                (0..grid.dim())
                    .filter(|&a| idx[a] + 1 < grid.axis(a).count && row[q] != row[q + grid.stride(a)])
                    .count()
            })
            .sum()
    };
    BandProbe {
        alpha: p.alpha(),
        beta: p.beta(),
        u_min,
        u_max,
        events: events.len(),
        up_events: up,
        down_events: events.len() - up,
        first_event: events.first().map(|e| e.time),
        last_event: events.last().map(|e| e.time),
        max_simultaneous,
        final_alternations,
        outcome: outcome.label().to_string(),
        dt_underflow: matches!(outcome, RunOutcome::DtUnderflow { .. }),
    }
}

impl BandProbe {
    pub fn within(&self, tol: f64) -> bool {
        self.u_min >= self.alpha - tol && self.u_max <= self.beta + tol
    }
}
