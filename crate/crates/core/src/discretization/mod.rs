//! Grids, fields, boundary data and finite-difference operators.

mod boundary;
mod field;
mod grid;
mod ops;

pub use boundary::{BoundaryCondition, BoundaryData, BoundaryKind};
pub use field::{ScalarField, SpaceTimeField};
pub use grid::{Axis, Face, Grid, GridError, Side};
pub use ops::{
    cell_volumes, compensated_sum, gradient, gradient_magnitude, laplacian_apply,
    second_derivatives, time_derivative, LaplacianOperator, NodeKind, SecondDerivatives,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizationError {
    #[error("snapshot index {index} out of range for {len} snapshots")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("need at least two snapshots for a time derivative")]
    TooFewSnapshots,
}

/// Minimum chunk length handed to a rayon worker for per-point loops.
pub(crate) const PAR_MIN_LEN: usize = 4096;
