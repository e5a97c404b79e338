//! Phases, the interface between them, and its classification.
//!
//! The interface is represented by facets: pairs of face-adjacent space-time
//! cells with opposite relay output. A facet between consecutive snapshots is
//! time-like, one between neighbouring grid points is space-like.

mod geometry;
mod phases;

pub use geometry::{level_set_separation, parabolic_distance, SpaceTimePoint};
pub use phases::{extract_phases, Cell, Component, Phase, PhaseLabeling};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretization::{gradient_magnitude, SpaceTimeField};
use crate::relay::RelayParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FreeBoundaryError {
    #[error("relay field is not binary at snapshot {snapshot}, point {point} (value {value})")]
    NonBinaryField { snapshot: usize, point: usize, value: f64 },
    #[error("histories are not aligned: {0}")]
    Misaligned(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    TimeLike,
    SpaceLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetClass {
    GammaAlpha,
    GammaBeta,
    GammaV,
    Unclassified,
}

impl FacetClass {
    pub const ALL: [FacetClass; 4] = [
        FacetClass::GammaAlpha,
        FacetClass::GammaBeta,
        FacetClass::GammaV,
        FacetClass::Unclassified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FacetClass::GammaAlpha => "gamma_alpha",
            FacetClass::GammaBeta => "gamma_beta",
            FacetClass::GammaV => "gamma_v",
            FacetClass::Unclassified => "unclassified",
        }
    }

    pub fn is_threshold(self) -> bool {
        matches!(self, FacetClass::GammaAlpha | FacetClass::GammaBeta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    Degenerate,
    Nondegenerate,
    NotApplicable,
}

impl Degeneracy {
    pub fn as_str(self) -> &'static str {
        match self {
            Degeneracy::Degenerate => "degenerate",
            Degeneracy::Nondegenerate => "nondegenerate",
            Degeneracy::NotApplicable => "not_applicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceFacet {
    /// Earlier cell for time-like facets, lower-index cell for space-like.
    pub lower: Cell,
    pub upper: Cell,
    pub orientation: Orientation,
    /// Space axis crossed by a space-like facet; 0 for time-like ones.
    pub axis: usize,
    /// Cell the facet's `u` and gradient were read from (time-like facets).
    pub source: Cell,
    pub x: [f64; 2],
    pub t: f64,
    pub lower_phase: Phase,
    pub upper_phase: Phase,
    pub u: f64,
    pub grad: f64,
    pub class: FacetClass,
    pub degeneracy: Degeneracy,
}

impl InterfaceFacet {
    pub fn point(&self) -> SpaceTimePoint {
        SpaceTimePoint { x: self.x, t: self.t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub gamma_alpha: usize,
    pub gamma_beta: usize,
    pub gamma_v: usize,
    pub unclassified: usize,
    pub degenerate: usize,
    pub nondegenerate: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.gamma_alpha + self.gamma_beta + self.gamma_v + self.unclassified
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeBoundaryDecomposition {
    pub params: RelayParams,
    pub tol_u: f64,
    pub eps_grad: Option<f64>,
    pub dim: usize,
    pub facets: Vec<InterfaceFacet>,
}

impl FreeBoundaryDecomposition {
    pub fn of_class(&self, class: FacetClass) -> impl Iterator<Item = (usize, &InterfaceFacet)> {
        self.facets.iter().enumerate().filter(move |(_, f)| f.class == class)
    }

    pub fn counts(&self) -> ClassCounts {
        let mut c = ClassCounts::default();
        for f in &self.facets {
            match f.class {
                FacetClass::GammaAlpha => c.gamma_alpha += 1,
                FacetClass::GammaBeta => c.gamma_beta += 1,
                FacetClass::GammaV => c.gamma_v += 1,
                FacetClass::Unclassified => c.unclassified += 1,
            }
            match f.degeneracy {
                Degeneracy::Degenerate => c.degenerate += 1,
                Degeneracy::Nondegenerate => c.nondegenerate += 1,
                Degeneracy::NotApplicable => {}
            }
        }
        c
    }

    /// Unclassified share of all facets; 0 for an empty interface.
    pub fn unclassified_fraction(&self) -> f64 {
        let c = self.counts();
        if c.total() == 0 {
            0.0
        } else {
            c.unclassified as f64 / c.total() as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn threshold(&self, class: FacetClass) -> Option<f64> {
        match class {
            FacetClass::GammaAlpha => Some(self.params.alpha()),
            FacetClass::GammaBeta => Some(self.params.beta()),
            _ => None,
        }
    }
}

fn check_aligned(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<(), FreeBoundaryError> {
    if **a.grid() != **b.grid() {
        return Err(FreeBoundaryError::Misaligned("grids differ".into()));
    }
    if a.times() != b.times() {
        return Err(FreeBoundaryError::Misaligned(format!(
            "{} vs {} snapshots or different times",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn threshold_gap(u: f64, p: &RelayParams) -> f64 {
    (u - p.alpha()).abs().min((u - p.beta()).abs())
}

/// Builds every facet of the interface and classifies it by the value of `u`
/// there: time-like facets within `tol_u` of α or β go to Γ_α or Γ_β,
/// space-like facets to Γ_v. The jump direction across threshold facets is
/// not part of the class; [`check_phase_ordering`] audits it.
///
/// A time-like facet takes `u` from whichever of its two cells is closer to
/// a threshold, since the switch happened at that cell's time up to the event
/// tolerance. A space-like facet averages its two cells.
pub fn classify_facets(
    phases: &PhaseLabeling,
    u_hist: &SpaceTimeField,
    p: &RelayParams,
    tol_u: f64,
) -> Result<FreeBoundaryDecomposition, FreeBoundaryError> {
    if phases.snapshots() != u_hist.len() || phases.points() != u_hist.points() {
        return Err(FreeBoundaryError::Misaligned(format!(
            "labeling {}x{} vs history {}x{}",
            phases.snapshots(),
            phases.points(),
            u_hist.len(),
            u_hist.points()
        )));
    }
    let grid = u_hist.grid();
    let times = u_hist.times();
    let n = grid.len();
    let mut facets = Vec::new();
    for k in 0..u_hist.len() {
        for pt in 0..n {
            let here = Cell { snapshot: k, point: pt };
            let lab = phases.label(here);
            if k + 1 < u_hist.len() {
                let next = Cell { snapshot: k + 1, point: pt };
                let lab_next = phases.label(next);
                if lab != lab_next {
                    let (ua, ub) = (u_hist.value(k, pt), u_hist.value(k + 1, pt));
                    let source = if threshold_gap(ub, p) < threshold_gap(ua, p) { next } else { here };
                    let u = u_hist.value(source.snapshot, source.point);
                    let class = if (u - p.alpha()).abs() <= tol_u {
                        FacetClass::GammaAlpha
                    } else if (u - p.beta()).abs() <= tol_u {
                        FacetClass::GammaBeta
                    } else {
                        FacetClass::Unclassified
                    };
                    facets.push(InterfaceFacet {
                        lower: here,
                        upper: next,
                        orientation: Orientation::TimeLike,
                        axis: 0,
                        source,
                        x: grid.coord(pt),
                        t: times[source.snapshot],
                        lower_phase: lab,
                        upper_phase: lab_next,
                        u,
                        grad: f64::NAN,
                        class,
                        degeneracy: Degeneracy::NotApplicable,
                    });
                }
            }
            let idx = grid.multi_index(pt);
            for a in 0..grid.dim() {
                if idx[a] + 1 >= grid.axis(a).count {
                    continue;
                }
                let q = pt + grid.stride(a);
                let other = Cell { snapshot: k, point: q };
                let lab_q = phases.label(other);
                if lab == lab_q {
                    continue;
                }
                let (xa, xb) = (grid.coord(pt), grid.coord(q));
                facets.push(InterfaceFacet {
                    lower: here,
                    upper: other,
                    orientation: Orientation::SpaceLike,
                    axis: a,
                    source: here,
                    x: [0.5 * (xa[0] + xb[0]), 0.5 * (xa[1] + xb[1])],
                    t: times[k],
                    lower_phase: lab,
                    upper_phase: lab_q,
                    u: 0.5 * (u_hist.value(k, pt) + u_hist.value(k, q)),
                    grad: f64::NAN,
                    class: FacetClass::GammaV,
                    degeneracy: Degeneracy::NotApplicable,
                });
            }
        }
    }
    Ok(FreeBoundaryDecomposition {
        params: *p,
        tol_u,
        eps_grad: None,
        dim: grid.dim(),
        facets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingViolation {
    pub facet: usize,
    pub class: FacetClass,
    pub x: [f64; 2],
    pub t: f64,
    pub before: Phase,
    pub after: Phase,
}

/// Threshold facets whose phases do not change in the relay's direction
/// when crossed forward in time: Γ_α must have Ω₊ before and Ω₋ after, Γ_β
/// the reverse.
pub fn check_phase_ordering(decomp: &FreeBoundaryDecomposition) -> Vec<OrderingViolation> {
    decomp
        .facets
        .iter()
        .enumerate()
        .filter_map(|(i, f)| {
            let expected = match f.class {
                FacetClass::GammaAlpha => (Phase::Plus, Phase::Minus),
                FacetClass::GammaBeta => (Phase::Minus, Phase::Plus),
                _ => return None,
            };
            ((f.lower_phase, f.upper_phase) != expected).then(|| OrderingViolation {
                facet: i,
                class: f.class,
                x: f.x,
                t: f.t,
                before: f.lower_phase,
                after: f.upper_phase,
            })
        })
        .collect()
}

/// |Du| at every snapshot of a history.
pub fn gradient_history(u_hist: &SpaceTimeField) -> SpaceTimeField {
    u_hist.map_rows(|k, _| gradient_magnitude(&u_hist.snapshot(k)).values)
}

/// Fills `grad` on every facet from `grad` and splits Γ_α ∪ Γ_β into the
/// degenerate part (`grad <= eps_grad`) and the rest.
pub fn split_degeneracy(
    mut decomp: FreeBoundaryDecomposition,
    grad: &SpaceTimeField,
    eps_grad: f64,
) -> FreeBoundaryDecomposition {
    for f in &mut decomp.facets {
        f.grad = match f.orientation {
            Orientation::TimeLike => grad.value(f.source.snapshot, f.source.point),
            Orientation::SpaceLike => {
                0.5 * (grad.value(f.lower.snapshot, f.lower.point)
                    + grad.value(f.upper.snapshot, f.upper.point))
            }
        };
        f.degeneracy = if f.class.is_threshold() {
            if f.grad <= eps_grad {
                Degeneracy::Degenerate
            } else {
                Degeneracy::Nondegenerate
            }
        } else {
            Degeneracy::NotApplicable
        };
    }
    decomp.eps_grad = Some(eps_grad);
    decomp
}

/// Default band half-width for "u equals a threshold" on a grid.
pub fn default_tol_u(p: &RelayParams, event_tol: f64, max_dt_u: f64) -> f64 {
    let width = if p.width().is_finite() { p.width() } else { 1.0 };
    (10.0 * event_tol * max_dt_u).max(1e-6 * width)
}

/// Default gradient threshold separating Γ⁰ from Γ*: the square root of the
/// largest grid spacing.
pub fn default_eps_grad(max_spacing: f64) -> f64 {
    max_spacing.sqrt()
}

/// Phases, classified facets and degeneracy labels in one pass.
pub fn decompose(
    u_hist: &SpaceTimeField,
    h_hist: &SpaceTimeField,
    p: &RelayParams,
    tol_u: f64,
    eps_grad: f64,
) -> Result<(PhaseLabeling, FreeBoundaryDecomposition), FreeBoundaryError> {
    check_aligned(u_hist, h_hist)?;
    let phases = extract_phases(h_hist)?;
    let decomp = classify_facets(&phases, u_hist, p, tol_u)?;
    let decomp = split_degeneracy(decomp, &gradient_history(u_hist), eps_grad);
    Ok((phases, decomp))
}

/// Γ_v facets whose value is not strictly inside the band and whose
/// vertical segment (the run of Γ_v facets between the same two grid points
/// over consecutive snapshots) touches no threshold facet at either end.
pub fn gamma_v_characterization_violations(decomp: &FreeBoundaryDecomposition) -> Vec<usize> {
    let p = &decomp.params;
    let touching: std::collections::HashSet<Cell> = decomp
        .facets
        .iter()
        .filter(|f| f.class.is_threshold())
        .flat_map(|f| [f.lower, f.upper])
        .collect();
    let mut runs: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    for (i, f) in decomp.of_class(FacetClass::GammaV) {
        runs.entry((f.lower.point, f.upper.point)).or_default().push(i);
    }
    let touches = |i: usize| {
        let f = &decomp.facets[i];
        touching.contains(&f.lower) || touching.contains(&f.upper)
    };
    let mut out = Vec::new();
    for list in runs.values() {
        let mut start = 0;
        while start < list.len() {
            let mut end = start;
            while end + 1 < list.len()
                && decomp.facets[list[end + 1]].lower.snapshot == decomp.facets[list[end]].lower.snapshot + 1
            {
                end += 1;
            }
            if !touches(list[start]) && !touches(list[end]) {
                out.extend(list[start..=end].iter().copied().filter(|&i| {
                    let u = decomp.facets[i].u;
                    !(u > p.alpha() + decomp.tol_u && u < p.beta() - decomp.tol_u)
                }));
            }
            start = end + 1;
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::Grid;
    use std::sync::Arc;

    fn line(n: usize) -> Arc<Grid> {
        Arc::new(Grid::line(0.0, 1.0, n).unwrap())
    }

    fn sawtooth(t: f64) -> (f64, f64) {
        // u(0) = 0.5, h = -1 first: rises to 1 at t = 0.5, then period 2
        if t < 0.5 {
            return (0.5 + t, -1.0);
        }
        let s = (t - 0.5) % 2.0;
        if s < 1.0 {
            (1.0 - s, 1.0)
        } else {
            (s - 1.0, -1.0)
        }
    }

    fn oscillator_history(dt: f64, t_end: f64) -> (SpaceTimeField, SpaceTimeField) {
        let g = line(6);
        let mut u = SpaceTimeField::new(g.clone());
        let mut h = SpaceTimeField::new(g.clone());
        let steps = (t_end / dt).round() as usize;
        for k in 0..=steps {
            let t = k as f64 * dt;
            let (uv, hv) = sawtooth(t);
            u.push(t, &vec![uv; 6]);
            h.push(t, &vec![hv; 6]);
        }
        (u, h)
    }

    #[test]
    fn constant_minus_is_one_component() {
        let g = line(5);
        let h = SpaceTimeField::from_fn(g, &[0.0, 0.1, 0.2], |_, _| -1.0);
        let ph = extract_phases(&h).unwrap();
        assert_eq!(ph.components().len(), 1);
        assert_eq!(ph.components()[0].phase, Phase::Minus);
        let u = SpaceTimeField::from_fn(h.grid().clone(), h.times(), |_, _| 0.3);
        let d = classify_facets(&ph, &u, &RelayParams::new(0.0, 1.0).unwrap(), 1e-6).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.unclassified_fraction(), 0.0);
    }

    #[test]
    fn islands_are_separate_components() {
        let g = line(9);
        let h = SpaceTimeField::from_fn(g, &[0.0, 1.0, 2.0], |x, t| {
            let i = (x[0] * 8.0).round() as i32;
            if t == 1.0 && (i == 2 || i == 6) {
                1.0
            } else {
                -1.0
            }
        });
        let ph = extract_phases(&h).unwrap();
        assert_eq!(ph.count(Phase::Plus), 2);
        assert_eq!(ph.count(Phase::Minus), 1);
    }

    #[test]
    fn non_binary_is_rejected() {
        let g = line(3);
        let h = SpaceTimeField::from_fn(g, &[0.0], |x, _| if x[0] > 0.7 { 0.2 } else { 1.0 });
        assert!(matches!(
            extract_phases(&h),
            Err(FreeBoundaryError::NonBinaryField { point: 2, .. })
        ));
    }

    #[test]
    fn oscillator_slabs_classify_by_threshold() {
        let (u, h) = oscillator_history(0.01, 4.0);
        let p = RelayParams::new(0.0, 1.0).unwrap();
        let (ph, d) = decompose(&u, &h, &p, 1e-6, 0.1).unwrap();
        // slabs: [0,0.5) minus, [0.5,1.5) plus, [1.5,2.5) minus, [2.5,3.5) plus, [3.5,4] minus
        assert_eq!(ph.components().len(), 5);
        let c = d.counts();
        assert_eq!(c.unclassified, 0);
        assert_eq!(c.gamma_v, 0);
        assert_eq!(c.gamma_beta, 12);
        assert_eq!(c.gamma_alpha, 12);
        assert_eq!(c.degenerate, 24);
        assert!(check_phase_ordering(&d).is_empty());
        for (_, f) in d.of_class(FacetClass::GammaBeta) {
            assert!((f.u - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mirrored_oscillator_violates_everywhere() {
        let (u, h) = oscillator_history(0.01, 4.0);
        let (u, h) = (u.time_mirrored(), h.time_mirrored());
        let p = RelayParams::new(0.0, 1.0).unwrap();
        let (_, d) = decompose(&u, &h, &p, 1e-6, 0.1).unwrap();
        let v = check_phase_ordering(&d);
        assert_eq!(v.len(), d.counts().gamma_alpha + d.counts().gamma_beta);
        assert!(!v.is_empty());
    }

    #[test]
    fn vertical_interface_is_gamma_v() {
        let g = line(11);
        let times: Vec<f64> = (0..5).map(|k| k as f64 * 0.1).collect();
        let h = SpaceTimeField::from_fn(g.clone(), &times, |x, _| if x[0] < 0.45 { 1.0 } else { -1.0 });
        let u = SpaceTimeField::from_fn(g, &times, |_, _| 0.5);
        let p = RelayParams::new(0.0, 1.0).unwrap();
        let (_, d) = decompose(&u, &h, &p, 1e-6, 0.1).unwrap();
        let c = d.counts();
        assert_eq!(c.gamma_v, 5);
        assert_eq!(c.total(), 5);
        assert!(gamma_v_characterization_violations(&d).is_empty());
    }

    #[test]
    fn compliant_single_facet() {
        let g = line(3);
        let u = SpaceTimeField::from_fn(g.clone(), &[0.0, 0.1], |_, t| if t == 0.0 { 1.0 } else { 0.9 });
        let h = SpaceTimeField::from_fn(g, &[0.0, 0.1], |_, t| if t == 0.0 { -1.0 } else { 1.0 });
        let p = RelayParams::new(0.0, 1.0).unwrap();
        let (_, d) = decompose(&u, &h, &p, 1e-6, 0.0).unwrap();
        assert_eq!(d.counts().gamma_beta, 3);
        assert!(check_phase_ordering(&d).is_empty());
        // u is spatially constant; eps_grad = 0 still counts exact zeros as degenerate
        assert_eq!(d.counts().degenerate, 3);
    }

    #[test]
    fn eps_grad_zero_keeps_only_exact_zeros() {
        let g = line(5);
        let times = [0.0, 0.1];
        let u = SpaceTimeField::from_fn(g.clone(), &times, |x, _| 1.0 + 1e-9 * x[0]);
        let h = SpaceTimeField::from_fn(g, &times, |_, t| if t == 0.0 { -1.0 } else { 1.0 });
        let p = RelayParams::new(0.0, 1.0).unwrap();
        let (_, d) = decompose(&u, &h, &p, 1e-6, 0.0).unwrap();
        assert_eq!(d.counts().degenerate, 0);
        assert_eq!(d.counts().nondegenerate, 5);
    }
}
