use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be 1 or 2 (got {0})")]
    Dimension(usize),
    #[error("axis {axis}: need at least 3 points (got {count})")]
    TooFewPoints { axis: usize, count: usize },
    #[error("axis {axis}: extent [{lo}, {hi}] must be finite with lo < hi")]
    BadExtent { axis: usize, lo: f64, hi: f64 },
}

/// Uniformly spaced axis including both end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Lo,
    Hi,
}

/// A boundary face: `axis` plus which end. Faces are numbered
/// `2 * axis + (side == Hi)`, i.e. `x_lo, x_hi, y_lo, y_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    pub fn index(self) -> usize {
        2 * self.axis + usize::from(self.side == Side::Hi)
    }

    pub fn from_index(i: usize) -> Self {
        Face {
            axis: i / 2,
            side: if i % 2 == 0 { Side::Lo } else { Side::Hi },
        }
    }

    pub fn name(self) -> &'static str {
        match (self.axis, self.side) {
            (0, Side::Lo) => "left",
            (0, Side::Hi) => "right",
            (1, Side::Lo) => "bottom",
            (1, Side::Hi) => "top",
            _ => "unknown",
        }
    }
}

/// Tensor-product grid on an interval or an axis-aligned rectangle.
/// Points are stored with axis 0 fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self, GridError> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(GridError::Dimension(axes.len()));
        }
        for (axis, a) in axes.iter().enumerate() {
            if a.count < 3 {
                return Err(GridError::TooFewPoints { axis, count: a.count });
            }
            if !(a.lo.is_finite() && a.hi.is_finite() && a.lo < a.hi) {
                return Err(GridError::BadExtent { axis, lo: a.lo, hi: a.hi });
            }
        }
        Ok(Self { axes })
    }

    pub fn line(lo: f64, hi: f64, count: usize) -> Result<Self, GridError> {
        Self::new(vec![Axis { lo, hi, count }])
    }

    pub fn rectangle(x: (f64, f64, usize), y: (f64, f64, usize)) -> Result<Self, GridError> {
        Self::new(vec![
            Axis { lo: x.0, hi: x.1, count: x.2 },
            Axis { lo: y.0, hi: y.1, count: y.2 },
        ])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.axes[axis].spacing()
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).fold(0.0, f64::max)
    }

    pub fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.axes[0].count
        }
    }

    pub fn faces(&self) -> impl Iterator<Item = Face> {
        (0..2 * self.dim()).map(Face::from_index)
    }

    /// Per-axis indices of point `p`; unused axes are 0.
    pub fn multi_index(&self, p: usize) -> [usize; 2] {
        let nx = self.axes[0].count;
        if self.dim() == 1 {
            [p, 0]
        } else {
            [p % nx, p / nx]
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        idx[0] + idx[1] * self.stride(1)
    }

    /// Coordinates of point `p`; unused axes are 0.
    pub fn coord(&self, p: usize) -> [f64; 2] {
        let idx = self.multi_index(p);
        let mut c = [0.0; 2];
        for (a, axis) in self.axes.iter().enumerate() {
            c[a] = axis.coord(idx[a]);
        }
        c
    }

    /// Faces that point `p` lies on.
    pub fn faces_of(&self, p: usize) -> impl Iterator<Item = Face> + '_ {
        let idx = self.multi_index(p);
        self.faces().filter(move |f| match f.side {
            Side::Lo => idx[f.axis] == 0,
            Side::Hi => idx[f.axis] + 1 == self.axes[f.axis].count,
        })
    }

    pub fn on_boundary(&self, p: usize) -> bool {
        self.faces_of(p).next().is_some()
    }

    /// Euclidean distance from point `p` to the domain boundary.
    pub fn distance_to_boundary(&self, x: [f64; 2]) -> f64 {
        self.axes
            .iter()
            .enumerate()
            .map(|(a, ax)| (x[a] - ax.lo).min(ax.hi - x[a]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Grid with every spacing halved `k` times.
    pub fn refined(&self, k: u32) -> Self {
        let axes = self
            .axes
            .iter()
            .map(|a| Axis {
                count: (a.count - 1) * (1 << k) + 1,
                ..*a
            })
            .collect();
        Self { axes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_coords() {
        let g = Grid::line(0.0, 1.0, 11).unwrap();
        assert!((g.spacing(0) - 0.1).abs() < 1e-15);
        assert_eq!(g.coord(10)[0], 1.0);
        assert_eq!(g.len(), 11);
        let g2 = Grid::rectangle((0.0, 1.0, 3), (0.0, 2.0, 5)).unwrap();
        assert_eq!(g2.len(), 15);
        assert_eq!(g2.multi_index(7), [1, 2]);
        assert_eq!(g2.flat_index([1, 2]), 7);
        assert_eq!(g2.coord(7), [0.5, 1.0]);
    }

    #[test]
    fn validation() {
        assert!(matches!(Grid::line(0.0, 1.0, 2), Err(GridError::TooFewPoints { .. })));
        assert!(matches!(Grid::line(1.0, 1.0, 5), Err(GridError::BadExtent { .. })));
        assert!(matches!(Grid::new(vec![]), Err(GridError::Dimension(0))));
    }

    #[test]
    fn faces_and_refinement() {
        let g = Grid::rectangle((0.0, 1.0, 3), (0.0, 1.0, 3)).unwrap();
        let corner: Vec<_> = g.faces_of(0).map(Face::index).collect();
        assert_eq!(corner, vec![0, 2]);
        assert!(!g.on_boundary(4));
        let r = Grid::line(0.0, 1.0, 11).unwrap().refined(2);
        assert_eq!(r.axis(0).count, 41);
    }
}
