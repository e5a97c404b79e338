//! Self-checks: the randomized relay property suite, closed-form and
//! convergence checks against the presets, and per-preset structure checks.
//!
//! Every check returns data; deciding what to print or how to exit is left
//! to the caller.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsReport};
use crate::io::encode_snapshots;
use crate::relay::{
    relay_trace, InputTrace, RelayParams, RelayResponse, RelayState, RelayValue, Switch, SwitchDirection,
};
use crate::scenario::{preset, ScenarioError, ScenarioSpec};
use crate::solver::{self, RunOutcome, RunOutput};

/// Absolute tolerance on switch times and threshold values in the relay suite.
pub const RELAY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayProperty {
    DirectionLaw,
    PrefixCausality,
    RateIndependence,
    RefinementIdempotence,
}

impl RelayProperty {
    pub const ALL: [RelayProperty; 4] = [
        RelayProperty::DirectionLaw,
        RelayProperty::PrefixCausality,
        RelayProperty::RateIndependence,
        RelayProperty::RefinementIdempotence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelayProperty::DirectionLaw => "direction_law",
            RelayProperty::PrefixCausality => "prefix_causality",
            RelayProperty::RateIndependence => "rate_independence",
            RelayProperty::RefinementIdempotence => "refinement_idempotence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyViolation {
    pub property: RelayProperty,
    pub trace: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaySuiteReport {
    pub seed: u64,
    pub traces: usize,
    pub switches: usize,
    pub violations: Vec<PropertyViolation>,
}

impl RelaySuiteReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, property: RelayProperty) -> usize {
        self.violations.iter().filter(|v| v.property == property).count()
    }
}

/// A random relay, trace and admissible initial state.
#[derive(Debug, Clone)]
pub struct RandomCase {
    pub params: RelayParams,
    pub trace: InputTrace,
    pub h0: RelayState,
}

pub fn random_case(rng: &mut impl Rng) -> RandomCase {
    let alpha = rng.random_range(-1.0..1.0);
    let beta = alpha + rng.random_range(0.05..1.5);
    let params = RelayParams::new(alpha, beta).expect("alpha < beta");
    let n = rng.random_range(2..40);
    let (lo, hi) = (alpha - 1.0, beta + 1.0);
    let mut t = rng.random_range(-1.0..1.0);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        // hitting a threshold exactly is an edge case worth sampling
        let u = match rng.random_range(0..10) {
            0 => alpha,
            1 => beta,
            _ => rng.random_range(lo..hi),
        };
        samples.push((t, u));
        t += rng.random_range(0.01..1.0);
    }
    let u0 = samples[0].1;
    let value = if u0 <= alpha {
        RelayValue::Minus
    } else if u0 >= beta {
        RelayValue::Plus
    } else if rng.random_bool(0.5) {
        RelayValue::Plus
    } else {
        RelayValue::Minus
    };
    RandomCase {
        params,
        trace: InputTrace::new(samples).expect("increasing times"),
        h0: RelayState { value, last_switch_time: None },
    }
}

fn same_switches(a: &[Switch], b: &[Switch], map: impl Fn(f64) -> f64) -> Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("{} switches versus {}", a.len(), b.len()));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x.direction != y.direction {
            return Err(format!("switch {i} changes direction"));
        }
        let expected = map(x.time);
        if (expected - y.time).abs() > RELAY_TOL * (1.0 + expected.abs()) {
            return Err(format!("switch {i} at {} instead of {expected}", y.time));
        }
    }
    Ok(())
}

/// Direction law checked without reusing the relay's own crossing logic:
/// alternating directions, each switch at its threshold on the interpolant,
/// and the response agrees with the forced value wherever a sample lies
/// outside the open band.
fn direction_law(case: &RandomCase, r: &RelayResponse) -> Result<(), String> {
    let p = &case.params;
    let mut value = r.initial;
    for (i, s) in r.switches.iter().enumerate() {
        let (from, level) = match s.direction {
            SwitchDirection::Up => (RelayValue::Minus, p.beta()),
            SwitchDirection::Down => (RelayValue::Plus, p.alpha()),
        };
        if value != from {
            return Err(format!("switch {i} ({}) from {:?}", s.direction.as_str(), value));
        }
        let u = case.trace.value_at(s.time);
        if (u - level).abs() > RELAY_TOL * (1.0 + level.abs()) {
            return Err(format!("switch {i} at u = {u}, threshold {level}"));
        }
        value = s.direction.target();
    }
    for &(t, u) in case.trace.samples() {
        let forced = if u <= p.alpha() {
            Some(RelayValue::Minus)
        } else if u >= p.beta() {
            Some(RelayValue::Plus)
        } else {
            None
        };
        if let Some(f) = forced {
            if r.value_at(t) != f {
                return Err(format!("output {:?} at t = {t} where u = {u}", r.value_at(t)));
            }
        }
    }
    Ok(())
}

fn prefix_causality(case: &RandomCase, full: &RelayResponse, rng: &mut impl Rng) -> Result<(), String> {
    let s = case.trace.samples();
    let cut = rng.random_range(s[0].0..s[s.len() - 1].0);
    let mut prefix: Vec<(f64, f64)> = s.iter().copied().filter(|&(t, _)| t < cut).collect();
    prefix.push((cut, case.trace.value_at(cut)));
    let trace = InputTrace::new(prefix).map_err(|e| e.to_string())?;
    let truncated = relay_trace(&trace, case.h0, &case.params);
    // a switch within rounding of the cut may land on either side
    let keep = |sw: &&Switch| sw.time <= cut - RELAY_TOL;
    let a: Vec<Switch> = full.switches.iter().filter(keep).copied().collect();
    let b: Vec<Switch> = truncated.switches.iter().filter(keep).copied().collect();
    same_switches(&a, &b, |t| t).map_err(|e| format!("cut at {cut}: {e}"))
}

fn rate_independence(case: &RandomCase, full: &RelayResponse, rng: &mut impl Rng) -> Result<(), String> {
    let s = case.trace.samples();
    let mut new_times = Vec::with_capacity(s.len());
    let mut t = rng.random_range(-5.0..5.0);
    for _ in s {
        new_times.push(t);
        t += rng.random_range(0.001..3.0);
    }
    let warped = InputTrace::new(s.iter().zip(&new_times).map(|(&(_, u), &t)| (t, u)).collect())
        .map_err(|e| e.to_string())?;
    let r = relay_trace(&warped, case.h0, &case.params);
    let map = |t: f64| {
        let j = s.partition_point(|&(ts, _)| ts <= t).clamp(1, s.len() - 1) - 1;
        let lambda = (t - s[j].0) / (s[j + 1].0 - s[j].0);
        new_times[j] + lambda * (new_times[j + 1] - new_times[j])
    };
    same_switches(&full.switches, &r.switches, map)
}

fn refinement_idempotence(case: &RandomCase, full: &RelayResponse, rng: &mut impl Rng) -> Result<(), String> {
    let s = case.trace.samples();
    let mut refined = Vec::with_capacity(3 * s.len());
    for w in s.windows(2) {
        refined.push(w[0]);
        let k = rng.random_range(0..3);
        let mut lambdas: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..0.99)).collect();
        lambdas.sort_by(f64::total_cmp);
        lambdas.dedup();
        for l in lambdas {
            let t = w[0].0 + l * (w[1].0 - w[0].0);
            refined.push((t, case.trace.value_at(t)));
        }
    }
    refined.push(s[s.len() - 1]);
    let trace = InputTrace::new(refined).map_err(|e| e.to_string())?;
    let r = relay_trace(&trace, case.h0, &case.params);
    same_switches(&full.switches, &r.switches, |t| t)
}

/// Runs all four relay properties over `traces` random cases drawn from a
/// ChaCha stream seeded with `seed`.
pub fn relay_property_suite(seed: u64, traces: usize) -> RelaySuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = RelaySuiteReport {
        seed,
        traces,
        switches: 0,
        violations: Vec::new(),
    };
    for i in 0..traces {
        let case = random_case(&mut rng);
        let full = relay_trace(&case.trace, case.h0, &case.params);
        report.switches += full.switches.len();
        let results = [
            (RelayProperty::DirectionLaw, direction_law(&case, &full)),
            (RelayProperty::PrefixCausality, prefix_causality(&case, &full, &mut rng)),
            (RelayProperty::RateIndependence, rate_independence(&case, &full, &mut rng)),
            (RelayProperty::RefinementIdempotence, refinement_idempotence(&case, &full, &mut rng)),
        ];
        for (property, r) in results {
            if let Err(detail) = r {
                report.violations.push(PropertyViolation { property, trace: i, detail });
            }
        }
    }
    report
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLevel {
    pub h: f64,
    pub dt: f64,
    /// Max-norm error against the exact solution at the final time.
    pub error: f64,
    /// Max of the pointwise equation residual over the history.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub levels: Vec<ConvergenceLevel>,
    /// Observed orders between consecutive levels.
    pub orders: Vec<f64>,
}

impl ConvergenceStudy {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Runs `spec` once per `(count, dt)` pair with the given theta and measures
/// the final-time error against `spec.exact`. Orders are taken against the
/// spacing when `spatial` is set, against `dt` otherwise.
pub fn convergence_study(
    spec: &ScenarioSpec,
    levels: &[(usize, f64)],
    theta: f64,
    spatial: bool,
) -> Result<ConvergenceStudy, ScenarioError> {
    let exact = spec.exact.clone().ok_or_else(|| ScenarioError::Semantic {
        field: "exact".into(),
        message: "scenario has no exact solution".into(),
    })?;
    let mut rows = Vec::new();
    for &(count, dt) in levels {
        let mut s = spec.clone();
        s.grid.x.count = count;
        s.solver.dt = dt;
        s.solver.dt_min = s.solver.dt_min.min(dt);
        s.solver.theta = theta;
        let (pb, out) = s.simulate()?;
        let k = out.u.len() - 1;
        let t = out.u.times()[k];
        let error = (0..out.u.points())
            .map(|p| {
                let x = pb.grid.coord(p);
                (out.u.value(k, p) - exact.eval(x[0], x[1], t)).abs()
            })
            .fold(0.0, f64::max);
        let residual = solver::residual(&out.u, &out.h, &pb.boundary, &out.events)?.max;
        rows.push(ConvergenceLevel {
            h: pb.grid.max_spacing(),
            dt,
            error,
            residual,
        });
    }
    let orders = rows
        .windows(2)
        .map(|w| {
            let ratio = if spatial { w[0].h / w[1].h } else { w[0].dt / w[1].dt };
            (w[0].error / w[1].error).ln() / ratio.ln()
        })
        .collect();
    Ok(ConvergenceStudy { levels: rows, orders })
}

/// Spatial study: theta = 1 with a time step small enough that the time
/// error stays below the spatial one on every level.
pub fn spatial_convergence(spec: &ScenarioSpec) -> Result<ConvergenceStudy, ScenarioError> {
    convergence_study(spec, &[(9, 2e-6), (17, 2e-6), (33, 2e-6)], 1.0, true)
}

/// Temporal study: theta = 1 on a fine grid.
pub fn temporal_convergence(spec: &ScenarioSpec) -> Result<ConvergenceStudy, ScenarioError> {
    convergence_study(spec, &[(401, 0.01), (401, 0.005), (401, 0.0025)], 1.0, false)
}

/// Up-switch times at one grid point.
pub fn up_switch_times(run: &RunOutput, point: usize) -> Vec<f64> {
    run.events
        .iter()
        .filter(|e| e.point == point && e.direction == SwitchDirection::Up)
        .map(|e| e.time)
        .collect()
}

/// Largest spread `max u - min u` over any snapshot.
pub fn max_spatial_spread(run: &RunOutput) -> f64 {
    (0..run.u.len())
        .map(|k| {
            let (lo, hi) = run
                .u
                .row(k)
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Snapshot-file bytes of `spec` simulated inside rayon pools of each size.
pub fn snapshot_bytes_per_pool(spec: &ScenarioSpec, threads: &[usize]) -> Result<Vec<Vec<u8>>, String> {
    threads
        .iter()
        .map(|&n| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| e.to_string())?;
            pool.install(|| {
                let (_, out) = spec.simulate().map_err(|e| e.to_string())?;
                encode_snapshots(&out.u, &out.h).map_err(|e| e.to_string())
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Recorded only; never fails a run.
    Observed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckOutcome {
    fn gate(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            detail,
        }
    }

    fn observed(name: &str, detail: String) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Observed,
            detail,
        }
    }
}

/// Simulates and analyzes a scenario with its own diagnostics options.
pub fn simulate_and_analyze(spec: &ScenarioSpec) -> Result<(RunOutput, DiagnosticsReport), String> {
    let (pb, out) = spec.simulate().map_err(|e| e.to_string())?;
    let (_, _, report) = diagnostics::analyze(&out, &pb.params, &spec.diagnostics, pb.config.event_tol, pb.config.dt_init)
        .map_err(|e| e.to_string())?;
    Ok((out, report))
}

fn common_checks(spec: &ScenarioSpec, out: &RunOutput, r: &DiagnosticsReport, checks: &mut Vec<CheckOutcome>) {
    checks.push(CheckOutcome::gate(
        "phase_ordering",
        r.ordering_violations == 0,
        format!("{} violations", r.ordering_violations),
    ));
    checks.push(CheckOutcome::gate(
        "dt_sign",
        r.dt_sign.violations.is_empty(),
        format!(
            "{} violations on {} alpha / {} beta facets, tol {:e}",
            r.dt_sign.violations.len(),
            r.dt_sign.checked_alpha,
            r.dt_sign.checked_beta,
            r.dt_sign.tol_dt
        ),
    ));
    let h = spec.grid.build().map(|g| g.max_spacing()).unwrap_or(f64::NAN);
    if out.outcome == RunOutcome::Completed {
        if let Some(sep) = r.separation {
            checks.push(CheckOutcome::gate(
                "separation",
                sep > 2.0 * h,
                format!("delta = {sep:.4} against 2h = {:.4}", 2.0 * h),
            ));
        }
    }
}

/// Structure checks for one built-in preset at refinement level `refine`.
pub fn verify_preset(name: &str, refine: u32) -> Result<Vec<CheckOutcome>, String> {
    let spec = preset(name).map_err(|e| e.to_string())?.refined(refine);
    let mut checks = Vec::new();
    if name == "manufactured-linear" {
        let s = spatial_convergence(&spec).map_err(|e| e.to_string())?;
        let t = temporal_convergence(&spec).map_err(|e| e.to_string())?;
        checks.push(CheckOutcome::gate(
            "spatial_order",
            s.min_order() >= 1.9,
            format!("orders {:?}", s.orders),
        ));
        checks.push(CheckOutcome::gate(
            "temporal_order",
            t.min_order() >= 0.9,
            format!("orders {:?}", t.orders),
        ));
        let decays = t.levels.windows(2).all(|w| w[1].residual < 0.6 * w[0].residual);
        checks.push(CheckOutcome::gate(
            "residual_decay",
            decays,
            format!("residuals {:?}", t.levels.iter().map(|l| l.residual).collect::<Vec<_>>()),
        ));
    }
    let (out, r) = simulate_and_analyze(&spec)?;
    common_checks(&spec, &out, &r, &mut checks);
    match name {
        "oscillator" => {
            let p = spec.params().map_err(|e| e.to_string())?;
            let ups = up_switch_times(&out, 0);
            let expected = 2.0 * p.width();
            let period_err = ups
                .windows(2)
                .map(|w| ((w[1] - w[0]) - expected).abs() / expected)
                .fold(0.0, f64::max);
            checks.push(CheckOutcome::gate(
                "period",
                ups.len() >= 2 && period_err <= 1e-3,
                format!("{} up-switches, max relative period error {period_err:.2e}", ups.len()),
            ));
            let first = ups.first().copied().unwrap_or(f64::NAN);
            let first_expected = p.beta() - spec.initial.phi.eval(0.0, 0.0, 0.0);
            checks.push(CheckOutcome::gate(
                "first_up_switch",
                (first - first_expected).abs() <= 1e-3,
                format!("t = {first:.6}"),
            ));
            let spread = max_spatial_spread(&out);
            checks.push(CheckOutcome::gate(
                "spatially_constant",
                spread <= 1e-9,
                format!("max spread {spread:e}"),
            ));
            let f = r.facets;
            checks.push(CheckOutcome::gate(
                "classification",
                f.unclassified == 0 && f.gamma_v == 0 && f.nondegenerate == 0 && f.total() > 0 && !r.gamma0.empty,
                format!(
                    "alpha {} beta {} v {} unclassified {} degenerate {}",
                    f.gamma_alpha, f.gamma_beta, f.gamma_v, f.unclassified, f.degenerate
                ),
            ));
            let min_exp = r.growth.min_exponent_u();
            checks.push(CheckOutcome::gate(
                "growth_exponent",
                min_exp.is_some_and(|e| e >= 1.8),
                format!("{} fits, min exponent {min_exp:?}", r.growth.fits_u.len()),
            ));
        }
        "transversal-1d" => {
            let tv = r.transversality_violations().unwrap_or(usize::MAX);
            checks.push(CheckOutcome::gate("transversality", tv == 0, format!("{tv} violations")));
            checks.push(CheckOutcome::gate(
                "gamma0_empty",
                r.gamma0.empty,
                format!("{} degenerate threshold facets", r.gamma0.degenerate),
            ));
            let mono = r.monotone.as_deref().unwrap_or(&[]);
            checks.push(CheckOutcome::gate(
                "monotone_curves",
                r.monotone_pass() == Some(true),
                format!("{} components, {} failing", mono.len(), mono.iter().filter(|c| !c.pass).count()),
            ));
            checks.push(CheckOutcome::gate(
                "separation_present",
                r.separation.is_some(),
                format!("{:?}", r.separation),
            ));
            let (_, fine) = simulate_and_analyze(&spec.refined(1))?;
            let (a, b) = (r.dt_sign.sup_abs_dt_u, fine.dt_sign.sup_abs_dt_u);
            let stable = match (a, b) {
                (Some(a), Some(b)) => (b - a).abs() <= 0.2 * a,
                _ => false,
            };
            checks.push(CheckOutcome::gate(
                "dt_bound_stability",
                stable,
                format!("sup |du/dt| {a:?} then {b:?} after halving"),
            ));
            checks.push(CheckOutcome::gate(
                "fine_dt_sign",
                fine.dt_sign.violations.is_empty(),
                format!("{} violations after halving", fine.dt_sign.violations.len()),
            ));
        }
        "nontransversal-1d" => {
            checks.push(CheckOutcome::observed(
                "outcome",
                format!(
                    "{}; {} events, last at t = {:?}; {} transversality violations",
                    out.outcome.label(),
                    out.events.len(),
                    r.band.last_event,
                    r.transversality_violations().unwrap_or(0)
                ),
            ));
        }
        "band-2d" => {
            checks.push(CheckOutcome::observed(
                "band_confinement",
                format!(
                    "u in [{:.8}, {:.8}] for band [{}, {}]; within 1e-6: {}; {} events; {}",
                    r.band.u_min,
                    r.band.u_max,
                    r.band.alpha,
                    r.band.beta,
                    r.band.within(1e-6),
                    r.band.events,
                    out.outcome.label()
                ),
            ));
        }
        "manufactured-linear" => {
            checks.push(CheckOutcome::gate("no_events", out.events.is_empty(), format!("{} events", out.events.len())));
        }
        _ => {}
    }
    let gamma_v = r.facets.gamma_v;
    if name != "oscillator" && gamma_v > 0 {
        checks.push(CheckOutcome::observed(
            "gamma_v",
            format!("{gamma_v} facets, {} off-characterization", r.gamma_v_violations),
        ));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_is_clean_and_seeded() {
        let a = relay_property_suite(7, 200);
        assert!(a.passed(), "{:?}", &a.violations[..a.violations.len().min(5)]);
        assert!(a.switches > 100);
        let b = relay_property_suite(7, 200);
        assert_eq!(a, b);
    }

    #[test]
    fn broken_relay_is_caught() {
        // a response with a missing switch fails the direction law
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let case = loop {
            let c = random_case(&mut rng);
            if !relay_trace(&c.trace, c.h0, &c.params).switches.is_empty() {
                break c;
            }
        };
        let mut bad = relay_trace(&case.trace, case.h0, &case.params);
        bad.switches.truncate(0);
        assert!(direction_law(&case, &bad).is_err());
    }
}
