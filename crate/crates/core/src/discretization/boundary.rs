use serde::{Deserialize, Serialize};

use super::{Face, Grid};
use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    /// `u = value` on the face.
    Dirichlet,
    /// `du/dn = value` with `n` the outward normal.
    Neumann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub kind: BoundaryKind,
    pub value: Expr,
}

impl BoundaryCondition {
    pub fn dirichlet(value: Expr) -> Self {
        Self { kind: BoundaryKind::Dirichlet, value }
    }

    pub fn neumann(value: Expr) -> Self {
        Self { kind: BoundaryKind::Neumann, value }
    }
}

/// One condition per face, indexed as in [`Face::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    faces: Vec<BoundaryCondition>,
}

impl BoundaryData {
    pub fn new(grid: &Grid, faces: Vec<BoundaryCondition>) -> Self {
        assert_eq!(faces.len(), 2 * grid.dim(), "one condition per face");
        Self { faces }
    }

    pub fn uniform(grid: &Grid, condition: BoundaryCondition) -> Self {
        Self::new(grid, vec![condition; 2 * grid.dim()])
    }

    pub fn homogeneous_neumann(grid: &Grid) -> Self {
        Self::uniform(grid, BoundaryCondition::neumann(Expr::constant(0.0)))
    }

    pub fn condition(&self, face: Face) -> &BoundaryCondition {
        &self.faces[face.index()]
    }

    pub fn conditions(&self) -> &[BoundaryCondition] {
        &self.faces
    }

    pub fn value(&self, face: Face, x: [f64; 2], t: f64) -> f64 {
        self.faces[face.index()].value.eval(x[0], x[1], t)
    }

    /// First Dirichlet face (in face order) that point `p` lies on.
    pub fn dirichlet_face(&self, grid: &Grid, p: usize) -> Option<Face> {
        grid.faces_of(p)
            .find(|f| self.faces[f.index()].kind == BoundaryKind::Dirichlet)
    }

    pub fn has_dirichlet(&self) -> bool {
        self.faces.iter().any(|f| f.kind == BoundaryKind::Dirichlet)
    }
}
