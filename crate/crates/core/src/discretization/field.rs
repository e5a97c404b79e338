use std::sync::Arc;

use super::Grid;

/// Values on every grid point at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub time: f64,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, time: f64) -> Self {
        assert_eq!(grid.len(), values.len(), "field size must match grid");
        Self { grid, values, time }
    }

    pub fn from_fn(grid: Arc<Grid>, time: f64, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|p| f(grid.coord(p))).collect();
        Self { grid, values, time }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Snapshots on a shared grid at strictly increasing, possibly
/// nonuniformly spaced times. Stored flat, snapshot-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: Arc<Grid>,
    times: Vec<f64>,
    data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(grid: Arc<Grid>) -> Self {
        Self {
            grid,
            times: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn from_fn(grid: Arc<Grid>, times: &[f64], f: impl Fn([f64; 2], f64) -> f64) -> Self {
        let mut out = Self::new(grid.clone());
        for &t in times {
            let row: Vec<f64> = (0..grid.len()).map(|p| f(grid.coord(p), t)).collect();
            out.push(t, &row);
        }
        out
    }

    /// Appends a snapshot. Panics if `t` does not increase or the row size
    /// does not match the grid.
    pub fn push(&mut self, t: f64, values: &[f64]) {
        assert_eq!(values.len(), self.grid.len(), "snapshot size must match grid");
        if let Some(&last) = self.times.last() {
            assert!(t > last, "snapshot times must increase ({t} after {last})");
        }
        self.times.push(t);
        self.data.extend_from_slice(values);
    }

    /// Overwrites the most recent snapshot's values.
    pub fn replace_last(&mut self, values: &[f64]) {
        let n = self.grid.len();
        let start = self.data.len() - n;
        self.data[start..].copy_from_slice(values);
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn points(&self) -> usize {
        self.grid.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn value(&self, k: usize, p: usize) -> f64 {
        self.data[k * self.grid.len() + p]
    }

    pub fn snapshot(&self, k: usize) -> ScalarField {
        ScalarField::new(self.grid.clone(), self.row(k).to_vec(), self.times[k])
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Same grid, each snapshot mapped through `f`.
    pub fn map_rows(&self, mut f: impl FnMut(usize, &[f64]) -> Vec<f64>) -> Self {
        let mut out = Self::new(self.grid.clone());
        for k in 0..self.len() {
            let row = f(k, self.row(k));
            out.push(self.times[k], &row);
        }
        out
    }

    /// Time-reversed copy with `t -> t_first + t_last - t`.
    pub fn time_mirrored(&self) -> Self {
        let mut out = Self::new(self.grid.clone());
        if self.is_empty() {
            return out;
        }
        let span = self.times[0] + self.times[self.len() - 1];
        for k in (0..self.len()).rev() {
            out.push(span - self.times[k], self.row(k));
        }
        out
    }

    /// Index of the last snapshot with time `<= t`, if any.
    pub fn index_at_or_before(&self, t: f64) -> Option<usize> {
        self.times.partition_point(|&s| s <= t).checked_sub(1)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_access() {
        let g = Arc::new(Grid::line(0.0, 1.0, 3).unwrap());
        let mut f = SpaceTimeField::new(g.clone());
        f.push(0.0, &[1.0, 2.0, 3.0]);
        f.push(0.5, &[4.0, 5.0, 6.0]);
        assert_eq!(f.row(1), &[4.0, 5.0, 6.0]);
        assert_eq!(f.value(0, 2), 3.0);
        assert_eq!(f.index_at_or_before(0.4), Some(0));
        assert_eq!(f.index_at_or_before(-1.0), None);
        let m = f.time_mirrored();
        assert_eq!(m.times(), &[0.0, 0.5]);
        assert_eq!(m.row(0), &[4.0, 5.0, 6.0]);
    }

    #[test]
    #[should_panic]
    fn times_must_increase() {
        let g = Arc::new(Grid::line(0.0, 1.0, 3).unwrap());
        let mut f = SpaceTimeField::new(g);
        f.push(1.0, &[0.0; 3]);
        f.push(1.0, &[0.0; 3]);
    }
}
