use super::{
    AxisSpec, BoundarySpec, GridSpec, InitialSpec, RelaySpec, ScenarioError, ScenarioSpec, Selector,
    SolverSpec,
};
use crate::diagnostics::DiagnosticsOptions;
use crate::discretization::BoundaryCondition;
use crate::expr::Expr;
use crate::relay::RelayMode;

/// Names accepted by [`preset`], with one-line descriptions.
pub const PRESETS: [(&str, &str); 5] = [
    (
        "oscillator",
        "spatially constant relay loop; u is a sawtooth between 0 and 1 with period 2",
    ),
    (
        "transversal-1d",
        "linear profile crossing both thresholds; an alpha front sweeps right with nonzero slope",
    ),
    (
        "nontransversal-1d",
        "profile touching beta with zero slope; switching spreads as a grid-scale pattern",
    ),
    (
        "band-2d",
        "square with boundary value at the band midpoint; u is expected to stay inside the band",
    ),
    (
        "manufactured-linear",
        "relay disabled (h = -1), exact solution known; used to measure convergence order",
    ),
];

fn expr(s: &str) -> Expr {
    Expr::parse(s).expect("preset expressions are valid")
}

fn line(count: usize) -> GridSpec {
    GridSpec {
        x: AxisSpec { lo: 0.0, hi: 1.0, count },
        y: None,
    }
}

fn solver(dt: f64, t_end: f64, event_tol: f64) -> SolverSpec {
    SolverSpec {
        dt,
        t_end,
        theta: 1.0,
        event_tol,
        dt_min: event_tol.min(dt),
        max_inner_iters: 64,
        max_short_steps: 64,
        snapshot_stride: 1,
        max_events: None,
    }
}

fn relay(alpha: f64, beta: f64) -> RelaySpec {
    RelaySpec {
        alpha,
        beta,
        mode: RelayMode::NonIdeal,
    }
}

pub fn preset(name: &str) -> Result<ScenarioSpec, ScenarioError> {
    let describe = |n: &str| {
        PRESETS
            .iter()
            .find(|(k, _)| *k == n)
            .map(|(_, d)| d.to_string())
            .unwrap_or_default()
    };
    let neumann0 = BoundaryCondition::neumann(Expr::constant(0.0));
    let spec = match name {
        "oscillator" => ScenarioSpec {
            name: name.into(),
            description: describe(name),
            exact: None,
            grid: line(21),
            relay: relay(0.0, 1.0),
            initial: InitialSpec {
                phi: expr("0.5"),
                h0: Selector::Minus,
            },
            boundary: BoundarySpec::uniform(neumann0, 1),
            solver: solver(1e-3, 6.0, 1e-6),
            diagnostics: DiagnosticsOptions::default(),
        },
        "transversal-1d" => ScenarioSpec {
            name: name.into(),
            description: describe(name),
            exact: None,
            grid: line(101),
            relay: relay(0.0, 1.0),
            initial: InitialSpec {
                phi: expr("2*x - 0.5"),
                h0: Selector::Sign(expr("2*step(x - 0.2501) - 1")),
            },
            boundary: BoundarySpec {
                left: BoundaryCondition::dirichlet(expr("-0.5")),
                right: neumann0,
                bottom: None,
                top: None,
            },
            solver: solver(1e-3, 0.25, 1e-7),
            diagnostics: DiagnosticsOptions::default(),
        },
        "nontransversal-1d" => ScenarioSpec {
            name: name.into(),
            description: describe(name),
            exact: None,
            grid: line(101),
            relay: relay(0.0, 1.0),
            initial: InitialSpec {
                phi: expr("1 - 0.25*(x - 0.5)^2"),
                h0: Selector::Sign(expr("2*step(-(x - 0.5)^2) - 1")),
            },
            boundary: BoundarySpec::uniform(BoundaryCondition::dirichlet(expr("0.9375")), 1),
            solver: SolverSpec {
                max_events: Some(100_000),
                ..solver(1e-3, 1.0, 1e-7)
            },
            diagnostics: DiagnosticsOptions::default(),
        },
        "band-2d" => ScenarioSpec {
            name: name.into(),
            description: describe(name),
            exact: None,
            grid: GridSpec {
                x: AxisSpec { lo: 0.0, hi: 1.0, count: 21 },
                y: Some(AxisSpec { lo: 0.0, hi: 1.0, count: 21 }),
            },
            relay: relay(0.45, 0.55),
            initial: InitialSpec {
                phi: expr("0.5 + 0.04*sin(pi*x)*sin(pi*y)"),
                h0: Selector::Minus,
            },
            boundary: BoundarySpec::uniform(BoundaryCondition::dirichlet(expr("0.5")), 2),
            solver: SolverSpec {
                max_events: Some(20_000),
                ..solver(1e-3, 1.0, 1e-8)
            },
            diagnostics: DiagnosticsOptions {
                growth_centers: 0,
                ..DiagnosticsOptions::default()
            },
        },
        "manufactured-linear" => ScenarioSpec {
            name: name.into(),
            description: describe(name),
            exact: Some(expr("exp(-pi^2*t)*sin(pi*x) + x*(1 - x)/2")),
            grid: line(41),
            relay: relay(f64::NEG_INFINITY, f64::INFINITY),
            initial: InitialSpec {
                phi: expr("sin(pi*x) + x*(1 - x)/2"),
                h0: Selector::Minus,
            },
            boundary: BoundarySpec::uniform(BoundaryCondition::dirichlet(Expr::constant(0.0)), 1),
            solver: solver(1e-3, 0.1, 1e-7),
            diagnostics: DiagnosticsOptions::default(),
        },
        other => return Err(ScenarioError::UnknownPreset(other.to_string())),
    };
    Ok(spec)
}
