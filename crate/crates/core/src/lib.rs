//! Simulation and free-boundary analysis for the heat equation
//! `Δu - ∂ₜu = h[u]` driven by a non-ideal relay `h`.
//!
//! Modules, bottom-up:
//!
//! * [`relay`]: the relay operator on scalar inputs and per-point fields;
//! * [`discretization`]: grids, fields, finite-difference operators;
//! * [`solver`]: theta-scheme integration with event-localized switching;
//! * [`free_boundary`]: phases, interface facets and their classification;
//! * [`diagnostics`]: growth fits, sign laws, transversality, curve structure;
//! * [`scenario`] and [`io`]: configuration, presets, files and plots;
//! * [`verify`]: the relay property suite and preset self-checks.

pub mod diagnostics;
pub mod discretization;
pub mod expr;
pub mod free_boundary;
pub mod io;
pub mod linalg;
pub mod relay;
pub mod scenario;
pub mod solver;
pub mod verify;

pub use discretization::{BoundaryCondition, BoundaryData, BoundaryKind, Grid, ScalarField, SpaceTimeField};
pub use expr::Expr;
pub use relay::{RelayField, RelayMode, RelayParams, RelayState, RelayValue, SwitchDirection, SwitchEvent};
pub use solver::{RunOutcome, RunOutput, SimState, SolverConfig, SolverError};
