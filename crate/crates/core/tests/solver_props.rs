use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use relaypb::diagnostics::{self, max_time_slope};
use relaypb::free_boundary::{check_phase_ordering, decompose};
use relaypb::scenario::preset;
use relaypb::solver::{initialize, run};
use relaypb::{BoundaryCondition, BoundaryData, Expr, Grid, RelayMode, RelayParams, RunOutput, ScalarField, SolverConfig, SwitchDirection};

/// Short Neumann run from a random smooth profile with random thresholds.
fn random_run(alpha: f64, width: f64, a: [f64; 3]) -> (RunOutput, RelayParams, f64) {
    let g = Arc::new(Grid::line(0.0, 1.0, 31).unwrap());
    let p = RelayParams::new(alpha, alpha + width).unwrap();
    let phi = ScalarField::from_fn(g.clone(), 0.0, |x| {
        a[0] + a[1] * (std::f64::consts::PI * x[0]).cos() + a[2] * (3.0 * std::f64::consts::PI * x[0]).cos()
    });
    let sel: Vec<f64> = phi.values.iter().map(|&u| if u >= p.midpoint() { 1.0 } else { -1.0 }).collect();
    let bd = BoundaryData::uniform(&g, BoundaryCondition::neumann(Expr::constant(0.0)));
    let state = initialize(phi, &sel, &bd, p, RelayMode::NonIdeal).unwrap();
    let mut cfg = SolverConfig::new(0.3, 2e-3);
    cfg.event_tol = 1e-7;
    cfg.dt_min = 1e-7;
    cfg.max_events = Some(5000);
    let out = run(state, &bd, &cfg).unwrap();
    (out, p, cfg.event_tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_histories_respect_phase_ordering(alpha in -0.5..0.5f64, width in 0.1..1.0f64, a in prop::array::uniform3(-1.0..1.0f64)) {
        let (out, p, event_tol) = random_run(alpha, width, a);
        let slope = max_time_slope(&out.u);
        let tol_u = relaypb::free_boundary::default_tol_u(&p, event_tol, slope);
        let (_, decomp) = decompose(&out.u, &out.h, &p, tol_u, 0.0).unwrap();
        prop_assert!(check_phase_ordering(&decomp).is_empty());
    }

    #[test]
    fn committed_switches_sit_at_their_threshold(alpha in -0.5..0.5f64, width in 0.1..1.0f64, a in prop::array::uniform3(-1.0..1.0f64)) {
        let (out, p, event_tol) = random_run(alpha, width, a);
        let slack = 10.0 * event_tol * max_time_slope(&out.u).max(1.0);
        for e in &out.events {
            match e.direction {
                SwitchDirection::Down => prop_assert!(e.u <= p.alpha() + slack, "{e:?}"),
                SwitchDirection::Up => prop_assert!(e.u >= p.beta() - slack, "{e:?}"),
            }
        }
        for k in 0..out.h.len() {
            prop_assert!(out.h.row(k).iter().all(|v| v.abs() == 1.0));
        }
    }
}

fn transversal() -> &'static (RunOutput, RelayParams, f64) {
    static RUN: OnceLock<(RunOutput, RelayParams, f64)> = OnceLock::new();
    RUN.get_or_init(|| {
        let spec = preset("transversal-1d").unwrap().refined(1);
        let (pb, out) = spec.simulate().unwrap();
        let h = pb.grid.max_spacing();
        (out, pb.params, h)
    })
}

fn near_fraction(out: &RunOutput, level: f64, tol: f64) -> f64 {
    let near = out.u.data().iter().filter(|v| (*v - level).abs() <= tol).count();
    near as f64 / out.u.data().len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // The threshold sets are thin: the share of cells within tol of alpha
    // scales like tol once tol is above grid resolution.
    #[test]
    fn threshold_sets_shrink_with_tolerance(tol in 0.02..0.1f64) {
        let (out, p, _) = transversal();
        let f1 = near_fraction(out, p.alpha(), tol);
        let f2 = near_fraction(out, p.alpha(), tol / 2.0);
        prop_assert!(f1 > 0.0);
        let ratio = f2 / f1;
        prop_assert!((0.3..=0.7).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn halving_does_not_add_violations() {
    for name in ["oscillator", "transversal-1d"] {
        let spec = preset(name).unwrap();
        let mut counts = Vec::new();
        for k in 0..2 {
            let s = spec.refined(k);
            let (pb, out) = s.simulate().unwrap();
            let (_, _, r) = diagnostics::analyze(&out, &pb.params, &s.diagnostics, pb.config.event_tol, pb.config.dt_init).unwrap();
            counts.push(r.dt_sign.violations.len() + r.transversality_violations().unwrap_or(0));
        }
        assert!(counts[1] <= counts[0], "{name}: {counts:?}");
    }
}
