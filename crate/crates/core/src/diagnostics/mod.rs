//! Quantitative checks run on a finished history: growth rates at the
//! degenerate part of the interface, the sign of `du/dt` on the rest,
//! transversality, the shape of the phase components in 1D and a summary of
//! switching activity.

mod checks;
mod growth;
mod monotone;

pub use checks::{
    band_confinement_probe, dt_sign_and_bound_check, facet_time_derivative, gamma0_empty_check,
    transversality_check, BandProbe, DtSignReport, DtSignViolation, Gamma0Check,
    TransversalityTolerances, TransversalityViolation, MAX_WITNESSES,
};
pub use growth::{
    admissible_radii, cylinder_sup, growth_exponent_grad, growth_exponent_u, least_squares_slope,
    radius_window, GrowthFit, GrowthQuantity, ZERO_FIELD_LEVEL,
};
pub use monotone::{monotone_curve_check, monotone_pieces, ComponentVerdict};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretization::SpaceTimeField;
use crate::free_boundary::{
    self, check_phase_ordering, decompose, gradient_history, level_set_separation,
    parabolic_distance, ClassCounts, Degeneracy, FacetClass, FreeBoundaryDecomposition,
    FreeBoundaryError, Phase, PhaseLabeling, SpaceTimePoint,
};
use crate::relay::RelayParams;
use crate::solver::RunOutput;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("radius window [{lo}, {hi}] admits only {count} radii")]
    WindowTooSmall { lo: f64, hi: f64, count: usize },
    #[error("radii must be positive and strictly increasing")]
    InvalidRadii,
    #[error("check is defined for one space dimension, got {dim}")]
    DimensionUnsupported { dim: usize },
    #[error(transparent)]
    FreeBoundary(#[from] FreeBoundaryError),
}

/// User-facing knobs; unset values are derived from the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_nbhd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone_tol: Option<f64>,
    #[serde(default = "default_eps_margin")]
    pub eps_margin: f64,
    /// Degenerate facets sampled for growth fits; 0 disables the fits.
    #[serde(default = "default_growth_centers")]
    pub growth_centers: usize,
}

fn default_eps_margin() -> f64 {
    0.1
}

fn default_growth_centers() -> usize {
    8
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            tol_u: None,
            eps_grad: None,
            tol_dt: None,
            r_nbhd: None,
            monotone_tol: None,
            eps_margin: default_eps_margin(),
            growth_centers: default_growth_centers(),
        }
    }
}

/// Every tolerance a report was computed with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_u: f64,
    pub eps_grad: f64,
    pub tol_dt: f64,
    pub r_nbhd: f64,
    pub monotone_tol: f64,
    pub eps_margin: f64,
    pub event_tol: f64,
    pub h: f64,
    pub dt: f64,
}

/// Largest difference quotient `|du/dt|` between consecutive snapshots.
pub fn max_time_slope(u_hist: &SpaceTimeField) -> f64 {
    let t = u_hist.times();
    (1..u_hist.len())
        .map(|k| {
            let dt = t[k] - t[k - 1];
            u_hist
                .row(k)
                .iter()
                .zip(u_hist.row(k - 1))
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / dt))
        })
        .fold(0.0, f64::max)
}

impl Tolerances {
    /// Fills unset options. `event_tol` and `dt` are the solver's event
    /// tolerance and nominal step.
    pub fn resolve(
        opts: &DiagnosticsOptions,
        u_hist: &SpaceTimeField,
        p: &RelayParams,
        event_tol: f64,
        dt: f64,
    ) -> Self {
        let h = u_hist.grid().max_spacing();
        Self {
            tol_u: opts
                .tol_u
                .unwrap_or_else(|| free_boundary::default_tol_u(p, event_tol, max_time_slope(u_hist))),
            eps_grad: opts.eps_grad.unwrap_or_else(|| free_boundary::default_eps_grad(h)),
            tol_dt: opts.tol_dt.unwrap_or(10.0 * (h + dt)),
            r_nbhd: opts.r_nbhd.unwrap_or(3.0 * h),
            monotone_tol: opts.monotone_tol.unwrap_or(h),
            eps_margin: opts.eps_margin,
            event_tol,
            h,
            dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCenter {
    pub center: SpaceTimePoint,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GrowthSection {
    pub degenerate_facets: usize,
    pub fits_u: Vec<GrowthFit>,
    pub fits_grad: Vec<GrowthFit>,
    pub skipped: Vec<SkippedCenter>,
}

impl GrowthSection {
    /// Smallest fitted exponent of `sup |u - theta|`.
    pub fn min_exponent_u(&self) -> Option<f64> {
        self.fits_u.iter().filter_map(|f| f.exponent).reduce(f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentCounts {
    pub plus: usize,
    pub minus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub dim: usize,
    pub snapshots: usize,
    pub points: usize,
    pub tolerances: Tolerances,
    /// `sup |u|` over the history.
    pub sup_abs_u: f64,
    pub components: ComponentCounts,
    pub facets: ClassCounts,
    pub unclassified_fraction: f64,
    pub ordering_violations: usize,
    pub gamma_v_violations: usize,
    pub growth: GrowthSection,
    pub dt_sign: DtSignReport,
    /// Distance between the two threshold level sets inside the interior
    /// cylinder; `None` when either set is empty there.
    pub separation: Option<f64>,
    /// `None` in 2D.
    pub transversality: Option<Vec<TransversalityViolation>>,
    pub monotone: Option<Vec<ComponentVerdict>>,
    pub gamma0: Gamma0Check,
    pub band: BandProbe,
}

impl DiagnosticsReport {
    pub fn monotone_pass(&self) -> Option<bool> {
        self.monotone.as_ref().map(|v| v.iter().all(|c| c.pass))
    }

    pub fn transversality_violations(&self) -> Option<usize> {
        self.transversality.as_ref().map(Vec::len)
    }
}

/// Points of the Γ_v facets, the set the growth window must stay clear of.
pub fn gamma_v_points(decomp: &FreeBoundaryDecomposition) -> Vec<SpaceTimePoint> {
    decomp.of_class(FacetClass::GammaV).map(|(_, f)| f.point()).collect()
}

/// Growth fits around up to `count` degenerate threshold facets, chosen at
/// evenly spaced positions in facet order.
pub fn growth_section(
    u_hist: &SpaceTimeField,
    grad_hist: &SpaceTimeField,
    decomp: &FreeBoundaryDecomposition,
    dt: f64,
    count: usize,
) -> GrowthSection {
    let degenerate: Vec<usize> = decomp
        .facets
        .iter()
        .enumerate()
        .filter(|(_, f)| f.class.is_threshold() && f.degeneracy == Degeneracy::Degenerate)
        .map(|(i, _)| i)
        .collect();
    let mut section = GrowthSection {
        degenerate_facets: degenerate.len(),
        ..GrowthSection::default()
    };
    if count == 0 || degenerate.is_empty() {
        return section;
    }
    let gv = gamma_v_points(decomp);
    let picks = count.min(degenerate.len());
    for j in 0..picks {
        let f = &decomp.facets[degenerate[j * degenerate.len() / picks]];
        let center = f.point();
        let theta = decomp.threshold(f.class).expect("threshold class");
        let rho0 = parabolic_distance(center, &gv);
        let (lo, hi) = radius_window(u_hist, center, rho0, dt);
        let radii = match admissible_radii(lo, hi) {
            Ok(r) => r,
            Err(e) => {
                section.skipped.push(SkippedCenter { center, reason: e.to_string() });
                continue;
            }
        };
        match growth_exponent_u(u_hist, center, theta, &radii) {
            Ok(fit) => section.fits_u.push(fit),
            Err(e) => section.skipped.push(SkippedCenter { center, reason: e.to_string() }),
        }
        if let Ok(fit) = growth_exponent_grad(grad_hist, center, theta, &radii) {
            section.fits_grad.push(fit);
        }
    }
    section
}

/// Decomposition plus every diagnostic, in a fixed order.
pub fn analyze(
    run: &RunOutput,
    p: &RelayParams,
    opts: &DiagnosticsOptions,
    event_tol: f64,
    dt: f64,
) -> Result<(PhaseLabeling, FreeBoundaryDecomposition, DiagnosticsReport), DiagnosticsError> {
    let u = &run.u;
    let tol = Tolerances::resolve(opts, u, p, event_tol, dt);
    let (phases, decomp) = decompose(u, &run.h, p, tol.tol_u, tol.eps_grad)?;
    let grad = gradient_history(u);
    let dim = u.grid().dim();
    let growth = growth_section(u, &grad, &decomp, dt, opts.growth_centers);
    let dt_sign = dt_sign_and_bound_check(u, &decomp, tol.tol_dt);
    let sep = level_set_separation(u, p, tol.tol_u, tol.eps_margin);
    let transversality = (dim == 1)
        .then(|| {
            transversality_check(
                u,
                &run.h,
                p,
                TransversalityTolerances {
                    tol_u: tol.tol_u,
                    eps_grad: tol.eps_grad,
                    r_nbhd: tol.r_nbhd,
                },
            )
        })
        .transpose()?;
    let monotone = (dim == 1)
        .then(|| monotone_curve_check(&phases, u.grid(), tol.monotone_tol))
        .transpose()?;
    let report = DiagnosticsReport {
        dim,
        snapshots: u.len(),
        points: u.points(),
        tolerances: tol,
        sup_abs_u: u.max_abs(),
        components: ComponentCounts {
            plus: phases.count(Phase::Plus),
            minus: phases.count(Phase::Minus),
        },
        facets: decomp.counts(),
        unclassified_fraction: decomp.unclassified_fraction(),
        ordering_violations: check_phase_ordering(&decomp).len(),
        gamma_v_violations: free_boundary::gamma_v_characterization_violations(&decomp).len(),
        growth,
        dt_sign,
        separation: sep.is_finite().then_some(sep),
        transversality,
        monotone,
        gamma0: gamma0_empty_check(&decomp),
        band: band_confinement_probe(u, &run.h, p, &run.events, &run.outcome),
    };
    Ok((phases, decomp, report))
}
