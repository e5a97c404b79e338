//! Direct solvers for the banded systems of the implicit time step.
//!
//! Both solvers run in a fixed operation order, so results do not depend on
//! the thread pool they are called from.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("zero or non-finite pivot at row {row}")]
    SingularPivot { row: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Thomas elimination for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
/// `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, LinalgError> {
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(LinalgError::Dimension(format!(
            "tridiagonal bands {}/{}/{} with rhs {}",
            sub.len(),
            n,
            sup.len(),
            rhs.len()
        )));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 || !denom.is_finite() {
        return Err(LinalgError::SingularPivot { row: 0 });
    }
    c[0] = sup[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - sub[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(LinalgError::SingularPivot { row: i });
        }
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// LU factorization of a square band matrix with equal lower and upper
/// bandwidth, without pivoting. Intended for diagonally dominant systems.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    // row-major band storage: entry (i, j) at i * (2 bw + 1) + (j + bw - i)
    band: Vec<f64>,
}

impl BandedLu {
    pub fn new(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            band: vec![0.0; n * (2 * bw + 1)],
        }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j);
        self.band[s] += value;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Factors in place (Doolittle; unit lower factor stored below the diagonal).
    pub fn factor(mut self) -> Result<FactoredBand, LinalgError> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pivot = self.band[self.slot(k, k)];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(LinalgError::SingularPivot { row: k });
            }
            let end = (k + bw + 1).min(n);
            for i in k + 1..end {
                let sik = self.slot(i, k);
                let l = self.band[sik] / pivot;
                self.band[sik] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..end {
                    let skj = self.slot(k, j);
                    let sij = self.slot(i, j);
                    self.band[sij] -= l * self.band[skj];
                }
            }
        }
        Ok(FactoredBand { lu: self })
    }
}

#[derive(Debug, Clone)]
pub struct FactoredBand {
    lu: BandedLu,
}

impl FactoredBand {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let (n, bw) = (self.lu.n, self.lu.bw);
        if rhs.len() != n {
            return Err(LinalgError::Dimension(format!("rhs {} for matrix {n}", rhs.len())));
        }
        let a = &self.lu;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let mut s = x[i];
            for j in start..i {
                s -= a.band[a.slot(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let end = (i + bw + 1).min(n);
            let mut s = x[i];
            for j in i + 1..end {
                s -= a.band[a.slot(i, j)] * x[j];
            }
            x[i] = s / a.band[a.slot(i, i)];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn tridiagonal_matches_dense_product() {
        let n = 7;
        let sub: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| -0.5 + 0.05 * i as f64).collect();
        let diag = vec![4.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = diag[i];
            if i > 0 {
                dense[i][i - 1] = sub[i];
            }
            if i + 1 < n {
                dense[i][i + 1] = sup[i];
            }
        }
        let rhs = dense_matvec(&dense, &x_true);
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn banded_matches_dense_product() {
        let n = 12;
        let bw = 3;
        let mut m = BandedLu::new(n, bw);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(bw)..(i + bw + 1).min(n) {
                let v = if i == j { 10.0 } else { -(((i * 7 + j * 3) % 5) as f64) * 0.3 };
                m.add(i, j, v);
                dense[i][j] = v;
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.25).collect();
        let rhs = dense_matvec(&dense, &x_true);
        let x = m.factor().unwrap().solve(&rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_pivots_are_reported() {
        assert_eq!(
            solve_tridiagonal(&[0.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], &[1.0, 1.0]),
            Err(LinalgError::SingularPivot { row: 0 })
        );
        let m = BandedLu::new(2, 1);
        assert!(m.factor().is_err());
    }
}
