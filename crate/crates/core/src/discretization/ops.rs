use std::sync::Arc;

use rayon::prelude::*;

use super::{
    BoundaryData, BoundaryKind, DiscretizationError, Face, Grid, ScalarField, Side,
    SpaceTimeField, PAR_MIN_LEN,
};

/// Whether a node carries the PDE or a prescribed Dirichlet value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Equation,
    Dirichlet(Face),
}

/// Discrete Laplacian with boundary handling:
///
/// * interior: 3-point (1D) / 5-point (2D) central stencil;
/// * Neumann faces: ghost-point reflection, `f_ghost = f_inner + 2 h psi2`;
/// * Dirichlet nodes: values replaced by `psi1(., t)`; the row at the node
///   itself is the one-sided second difference, exact on quadratics.
#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    grid: Arc<Grid>,
    bd: BoundaryData,
    kinds: Vec<NodeKind>,
    // CSR rows: `(point, coefficient)` sorted by point, duplicates merged
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
    /// `(point, face, coefficient)` multiplying the Neumann flux of a face.
    flux: Vec<(usize, Face, f64)>,
}

impl LaplacianOperator {
    pub fn new(grid: Arc<Grid>, bd: &BoundaryData) -> Self {
        let n = grid.len();
        let mut kinds = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(5 * n);
        let mut flux = Vec::new();
        let mut entries = Vec::with_capacity(6);
        offsets.push(0);
        for p in 0..n {
            kinds.push(match bd.dirichlet_face(&grid, p) {
                Some(face) => NodeKind::Dirichlet(face),
                None => NodeKind::Equation,
            });
            let idx = grid.multi_index(p);
            entries.clear();
            for a in 0..grid.dim() {
                let axis = grid.axis(a);
                let h = axis.spacing();
                let inv = 1.0 / (h * h);
                let s = grid.stride(a);
                let i = idx[a];
                let last = axis.count - 1;
                if i > 0 && i < last {
                    entries.extend([(p - s, inv), (p, -2.0 * inv), (p + s, inv)]);
                    continue;
                }
                let (side, inward): (Side, isize) = if i == 0 { (Side::Lo, 1) } else { (Side::Hi, -1) };
                let face = Face { axis: a, side };
                let step = |k: isize| (p as isize + k * inward * s as isize) as usize;
                match bd.condition(face).kind {
                    BoundaryKind::Neumann => {
                        entries.extend([(p, -2.0 * inv), (step(1), 2.0 * inv)]);
                        flux.push((p, face, 2.0 / h));
                    }
                    BoundaryKind::Dirichlet => {
                        entries.extend([(p, inv), (step(1), -2.0 * inv), (step(2), inv)]);
                    }
                }
            }
            entries.sort_by_key(|e| e.0);
            let start = merged.len();
            for &(q, c) in &entries {
                if merged.len() > start && merged[merged.len() - 1].0 == q {
                    let last = merged.len() - 1;
                    merged[last].1 += c;
                } else {
                    merged.push((q, c));
                }
            }
            offsets.push(merged.len());
        }
        Self {
            grid,
            bd: bd.clone(),
            kinds,
            offsets,
            entries: merged,
            flux,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.bd
    }

    pub fn kind(&self, p: usize) -> NodeKind {
        self.kinds[p]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    /// Stencil entries of row `p` (merged, sorted by point).
    pub fn entries(&self, p: usize) -> &[(usize, f64)] {
        &self.entries[self.offsets[p]..self.offsets[p + 1]]
    }

    /// Boundary value prescribed at Dirichlet node `p`.
    pub fn dirichlet_value(&self, p: usize, t: f64) -> Option<f64> {
        match self.kinds[p] {
            NodeKind::Dirichlet(face) => Some(self.bd.value(face, self.grid.coord(p), t)),
            NodeKind::Equation => None,
        }
    }

    /// Inhomogeneous part of the operator: Neumann flux contributions.
    pub fn source(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for &(p, face, c) in &self.flux {
            out[p] += c * self.bd.value(face, self.grid.coord(p), t);
        }
        out
    }

    /// Values with Dirichlet nodes overwritten by their boundary data.
    pub fn with_dirichlet(&self, values: &[f64], t: f64) -> Vec<f64> {
        let mut out = values.to_vec();
        for (p, v) in out.iter_mut().enumerate() {
            if let Some(b) = self.dirichlet_value(p, t) {
                *v = b;
            }
        }
        out
    }

    /// `sum_q A_pq f_q` without boundary data.
    pub fn apply_stencil(&self, f: &[f64]) -> Vec<f64> {
        (0..self.grid.len())
            .into_par_iter()
            .with_min_len(PAR_MIN_LEN)
            .map(|p| self.entries(p).iter().map(|&(q, c)| c * f[q]).sum())
            .collect()
    }

    pub fn apply(&self, f: &[f64], t: f64) -> Vec<f64> {
        let fixed = self.with_dirichlet(f, t);
        let mut out = self.apply_stencil(&fixed);
        for (o, s) in out.iter_mut().zip(self.source(t)) {
            *o += s;
        }
        out
    }
}

pub fn laplacian_apply(f: &ScalarField, bd: &BoundaryData, t: f64) -> ScalarField {
    let op = LaplacianOperator::new(f.grid.clone(), bd);
    ScalarField::new(f.grid.clone(), op.apply(&f.values, t), t)
}

/// First derivative along `axis`: central inside, second-order one-sided
/// at the ends.
fn derivative_along(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let ax = grid.axis(axis);
    let h = ax.spacing();
    let s = grid.stride(axis);
    let last = ax.count - 1;
    (0..grid.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|p| {
            let i = grid.multi_index(p)[axis];
            if i == 0 {
                (-3.0 * values[p] + 4.0 * values[p + s] - values[p + 2 * s]) / (2.0 * h)
            } else if i == last {
                (3.0 * values[p] - 4.0 * values[p - s] + values[p - 2 * s]) / (2.0 * h)
            } else {
                (values[p + s] - values[p - s]) / (2.0 * h)
            }
        })
        .collect()
}

fn second_along(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let ax = grid.axis(axis);
    let h = ax.spacing();
    let inv = 1.0 / (h * h);
    let s = grid.stride(axis);
    let last = ax.count - 1;
    (0..grid.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|p| {
            let i = grid.multi_index(p)[axis];
            let c = if i == 0 {
                p + s
            } else if i == last {
                p - s
            } else {
                p
            };
            (values[c - s] - 2.0 * values[c] + values[c + s]) * inv
        })
        .collect()
}

/// Gradient components, one vector per axis.
pub fn gradient(f: &ScalarField) -> Vec<Vec<f64>> {
    (0..f.grid.dim())
        .map(|a| derivative_along(&f.grid, &f.values, a))
        .collect()
}

pub fn gradient_magnitude(f: &ScalarField) -> ScalarField {
    let g = gradient(f);
    let values = (0..f.grid.len())
        .map(|p| g.iter().map(|c| c[p] * c[p]).sum::<f64>().sqrt())
        .collect();
    ScalarField::new(f.grid.clone(), values, f.time)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondDerivatives {
    /// `d2f/dx_a^2` per axis.
    pub pure: Vec<Vec<f64>>,
    /// `d2f/dxdy` in 2D.
    pub mixed: Option<Vec<f64>>,
}

impl SecondDerivatives {
    /// Frobenius norm of the Hessian at point `p`.
    pub fn norm(&self, p: usize) -> f64 {
        let pure: f64 = self.pure.iter().map(|d| d[p] * d[p]).sum();
        let mixed = self.mixed.as_ref().map_or(0.0, |m| 2.0 * m[p] * m[p]);
        (pure + mixed).sqrt()
    }
}

pub fn second_derivatives(f: &ScalarField) -> SecondDerivatives {
    let pure = (0..f.grid.dim())
        .map(|a| second_along(&f.grid, &f.values, a))
        .collect();
    let mixed = (f.grid.dim() == 2).then(|| {
        let dx = derivative_along(&f.grid, &f.values, 0);
        derivative_along(&f.grid, &dx, 1)
    });
    SecondDerivatives { pure, mixed }
}

/// `du/dt` at snapshot `k`: three-point formula on the (possibly
/// nonuniform) time levels inside, one-sided at the first and last.
pub fn time_derivative(
    field: &SpaceTimeField,
    k: usize,
) -> Result<ScalarField, DiscretizationError> {
    let n = field.len();
    if n < 2 {
        return Err(DiscretizationError::TooFewSnapshots);
    }
    if k >= n {
        return Err(DiscretizationError::IndexOutOfRange { index: k, len: n });
    }
    let t = field.times();
    let values: Vec<f64> = if k == 0 || k == n - 1 {
        let (a, b) = if k == 0 { (0, 1) } else { (n - 2, n - 1) };
        let dt = t[b] - t[a];
        field
            .row(a)
            .iter()
            .zip(field.row(b))
            .map(|(ua, ub)| (ub - ua) / dt)
            .collect()
    } else {
        let h1 = t[k] - t[k - 1];
        let h2 = t[k + 1] - t[k];
        let cm = -h2 / (h1 * (h1 + h2));
        let c0 = (h2 - h1) / (h1 * h2);
        let cp = h1 / (h2 * (h1 + h2));
        let (prev, cur, next) = (field.row(k - 1), field.row(k), field.row(k + 1));
        (0..field.points())
            .map(|p| cm * prev[p] + c0 * cur[p] + cp * next[p])
            .collect()
    };
    Ok(ScalarField::new(field.grid().clone(), values, t[k]))
}

/// Trapezoid-rule quadrature weights (cell volumes around each node).
pub fn cell_volumes(grid: &Grid) -> Vec<f64> {
    (0..grid.len())
        .map(|p| {
            let idx = grid.multi_index(p);
            (0..grid.dim())
                .map(|a| {
                    let ax = grid.axis(a);
                    let w = ax.spacing();
                    if idx[a] == 0 || idx[a] + 1 == ax.count {
                        0.5 * w
                    } else {
                        w
                    }
                })
                .product()
        })
        .collect()
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::BoundaryCondition;
    use crate::expr::Expr;
    use std::f64::consts::PI;

    fn line(n: usize) -> Arc<Grid> {
        Arc::new(Grid::line(0.0, 1.0, n).unwrap())
    }

    fn dirichlet(grid: &Grid, v: &str) -> BoundaryData {
        BoundaryData::uniform(grid, BoundaryCondition::dirichlet(Expr::parse(v).unwrap()))
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let g = line(11);
        let f = ScalarField::from_fn(g.clone(), 0.0, |x| x[0] * x[0]);
        let lap = laplacian_apply(&f, &dirichlet(&g, "x^2"), 0.0);
        for v in &lap.values {
            assert!((v - 2.0).abs() < 1e-10, "{v}");
        }
        let g2 = Arc::new(Grid::rectangle((0.0, 1.0, 7), (0.0, 2.0, 9)).unwrap());
        let f = ScalarField::from_fn(g2.clone(), 0.0, |x| x[0] * x[0] - 3.0 * x[1] * x[1] + x[0] * x[1]);
        let lap = laplacian_apply(&f, &dirichlet(&g2, "x^2 - 3*y^2 + x*y"), 0.0);
        for v in &lap.values {
            assert!((v + 4.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn constants_are_harmonic_with_neumann() {
        let g = Arc::new(Grid::rectangle((0.0, 1.0, 5), (0.0, 1.0, 6)).unwrap());
        let f = ScalarField::from_fn(g.clone(), 0.0, |_| 3.7);
        let lap = laplacian_apply(&f, &BoundaryData::homogeneous_neumann(&g), 0.0);
        assert!(lap.values.iter().all(|v| v.abs() < 1e-11), "{:?}", lap.values);
    }

    #[test]
    fn neumann_flux_enters_with_outward_normal() {
        // u = x^2 has du/dn = -0 at x = 0 and +2 at x = 1.
        let g = line(21);
        let bd = BoundaryData::new(
            &g,
            vec![
                BoundaryCondition::neumann(Expr::constant(0.0)),
                BoundaryCondition::neumann(Expr::constant(2.0)),
            ],
        );
        let f = ScalarField::from_fn(g.clone(), 0.0, |x| x[0] * x[0]);
        let lap = laplacian_apply(&f, &bd, 0.0);
        for v in &lap.values {
            assert!((v - 2.0).abs() < 1e-9, "{v}");
        }
    }

    fn sine_error(n: usize) -> f64 {
        let g = line(n);
        let f = ScalarField::from_fn(g.clone(), 0.0, |x| (PI * x[0]).sin());
        let lap = laplacian_apply(&f, &dirichlet(&g, "0"), 0.0);
        (1..n - 1)
            .map(|p| (lap.values[p] + PI * PI * (PI * g.coord(p)[0]).sin()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn laplacian_converges_second_order() {
        // Richardson-style: error ratio on successive halvings.
        let e: Vec<f64> = [11, 21, 41, 81].iter().map(|&n| sine_error(n)).collect();
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "order {order}");
            assert!(w[0] / w[1] >= 3.5);
        }
    }

    #[test]
    fn gradients_exact_on_linears() {
        let g = line(9);
        let f = ScalarField::from_fn(g.clone(), 0.0, |x| 3.0 * x[0]);
        assert!(gradient_magnitude(&f).values.iter().all(|v| (v - 3.0).abs() < 1e-12));
        let c = ScalarField::from_fn(g, 0.0, |_| 1.25);
        assert!(gradient_magnitude(&c).values.iter().all(|v| *v == 0.0));
        let g2 = Arc::new(Grid::rectangle((0.0, 1.0, 5), (0.0, 1.0, 5)).unwrap());
        let f = ScalarField::from_fn(g2, 0.0, |x| x[0] + 2.0 * x[1]);
        for v in gradient_magnitude(&f).values {
            assert!((v - 5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivatives_on_polynomials() {
        let g2 = Arc::new(Grid::rectangle((0.0, 1.0, 6), (0.0, 1.0, 7)).unwrap());
        let f = ScalarField::from_fn(g2.clone(), 0.0, |x| x[0] * x[0] + 5.0 * x[0] * x[1] - x[1] * x[1]);
        let d = second_derivatives(&f);
        for p in 0..g2.len() {
            assert!((d.pure[0][p] - 2.0).abs() < 1e-9);
            assert!((d.pure[1][p] + 2.0).abs() < 1e-9);
            assert!((d.mixed.as_ref().unwrap()[p] - 5.0).abs() < 1e-9);
        }
        let lin = ScalarField::from_fn(g2, 0.0, |x| 1.0 + x[0] - 4.0 * x[1]);
        let d = second_derivatives(&lin);
        assert!(d.pure.iter().flatten().all(|v| v.abs() < 1e-9));

        let err = |n: usize| {
            let g = line(n);
            let f = ScalarField::from_fn(g.clone(), 0.0, |x| (PI * x[0]).sin());
            let d = second_derivatives(&f);
            (1..n - 1)
                .map(|p| (d.pure[0][p] + PI * PI * (PI * g.coord(p)[0]).sin()).abs())
                .fold(0.0, f64::max)
        };
        assert!((err(21) / err(41)).log2() >= 1.9);
    }

    #[test]
    fn time_derivatives() {
        let g = line(3);
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
        let lin = SpaceTimeField::from_fn(g.clone(), &times, |_, t| t);
        for k in [0, 50, 200] {
            assert!(time_derivative(&lin, k).unwrap().values.iter().all(|v| (v - 1.0).abs() < 1e-9));
        }
        let flat = SpaceTimeField::from_fn(g.clone(), &times, |_, _| 2.0);
        assert!(time_derivative(&flat, 7).unwrap().values.iter().all(|v| *v == 0.0));
        let quad = SpaceTimeField::from_fn(g.clone(), &times, |_, t| t * t);
        let d = time_derivative(&quad, 100).unwrap();
        assert!((d.values[0] - 2.0).abs() < 1e-4);
        // nonuniform levels: exact on quadratics
        let uneven = [0.0, 0.3, 0.35, 1.0];
        let q = SpaceTimeField::from_fn(g, &uneven, |_, t| t * t);
        assert!((time_derivative(&q, 2).unwrap().values[0] - 0.7).abs() < 1e-12);
        assert!(matches!(
            time_derivative(&q, 4),
            Err(DiscretizationError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
