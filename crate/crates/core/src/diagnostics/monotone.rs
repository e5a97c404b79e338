use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::discretization::Grid;
use crate::free_boundary::{Cell, Phase, PhaseLabeling};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentVerdict {
    pub component: usize,
    pub phase: Phase,
    pub first_snapshot: usize,
    pub last_snapshot: usize,
    /// Maximal monotone pieces of the left and right boundary chains.
    pub left_pieces: usize,
    pub right_pieces: usize,
    /// Snapshots at which the component is not a single interval.
    pub split_snapshots: usize,
    pub pass: bool,
}

/// Number of maximal monotone pieces of `chain`, ignoring reversals whose
/// amplitude is at most `tol`.
pub fn monotone_pieces(chain: &[i64], tol: i64) -> usize {
    let Some(&first) = chain.first() else {
        return 0;
    };
    let mut pieces = 1;
    let mut dir = 0i8;
    let mut ext = first;
    for &v in &chain[1..] {
        match dir {
            0 => {
                if v > first + tol {
                    dir = 1;
                    ext = v;
                } else if v < first - tol {
                    dir = -1;
                    ext = v;
                }
            }
            1 => {
                if v > ext {
                    ext = v;
                } else if v < ext - tol {
                    pieces += 1;
                    dir = -1;
                    ext = v;
                }
            }
            _ => {
                if v < ext {
                    ext = v;
                } else if v > ext + tol {
                    pieces += 1;
                    dir = 1;
                    ext = v;
                }
            }
        }
    }
    pieces
}

/// Traces each component's left and right ends over the snapshots it
/// occupies and checks that each end is made of at most two monotone
/// pieces. Reversals of at most `tol` (in space units) are smoothed.
pub fn monotone_curve_check(
    phases: &PhaseLabeling,
    grid: &Grid,
    tol: f64,
) -> Result<Vec<ComponentVerdict>, DiagnosticsError> {
    if grid.dim() != 1 {
        return Err(DiagnosticsError::DimensionUnsupported { dim: grid.dim() });
    }
    let tol_cells = (tol / grid.spacing(0) + 1e-9).floor() as i64;
    let ncomp = phases.components().len();
    let mut left: Vec<Vec<i64>> = vec![Vec::new(); ncomp];
    let mut right: Vec<Vec<i64>> = vec![Vec::new(); ncomp];
    let mut last_seen = vec![usize::MAX; ncomp];
    let mut splits = vec![0usize; ncomp];
    let n = grid.len();
    for k in 0..phases.snapshots() {
        let mut i = 0;
        while i < n {
            let c = phases.component(Cell { snapshot: k, point: i });
            let mut j = i;
            while j + 1 < n && phases.component(Cell { snapshot: k, point: j + 1 }) == c {
                j += 1;
            }
            if last_seen[c] == k {
                splits[c] += 1;
                *right[c].last_mut().expect("seen at k") = j as i64;
            } else {
                last_seen[c] = k;
                left[c].push(i as i64);
                right[c].push(j as i64);
            }
            i = j + 1;
        }
    }
    Ok(phases
        .components()
        .iter()
        .map(|comp| {
            let c = comp.id;
            let lp = monotone_pieces(&left[c], tol_cells);
            let rp = monotone_pieces(&right[c], tol_cells);
            ComponentVerdict {
                component: c,
                phase: comp.phase,
                first_snapshot: comp.first_snapshot,
                last_snapshot: comp.last_snapshot,
                left_pieces: lp,
                right_pieces: rp,
                split_snapshots: splits[c],
                pass: lp <= 2 && rp <= 2 && splits[c] == 0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::SpaceTimeField;
    use crate::free_boundary::extract_phases;
    use std::sync::Arc;

    fn verdicts(front: impl Fn(usize) -> f64, snaps: usize) -> Vec<ComponentVerdict> {
        let g = Arc::new(Grid::line(0.0, 1.0, 51).unwrap());
        let times: Vec<f64> = (0..snaps).map(|k| k as f64).collect();
        let h = SpaceTimeField::from_fn(g.clone(), &times, |x, t| {
            if x[0] < front(t as usize) { 1.0 } else { -1.0 }
        });
        monotone_curve_check(&extract_phases(&h).unwrap(), &g, g.spacing(0)).unwrap()
    }

    #[test]
    fn piece_counting() {
        assert_eq!(monotone_pieces(&[], 0), 0);
        assert_eq!(monotone_pieces(&[3, 3, 3], 0), 1);
        assert_eq!(monotone_pieces(&[1, 2, 3, 2, 1], 0), 2);
        assert_eq!(monotone_pieces(&[1, 2, 3, 2, 3, 4], 1), 1);
        assert_eq!(monotone_pieces(&[1, 5, 1, 5, 1], 1), 4);
    }

    #[test]
    fn monotone_front_passes() {
        let v = verdicts(|k| 0.1 + 0.01 * k as f64, 40);
        assert!(v.iter().all(|c| c.pass), "{v:?}");
    }

    #[test]
    fn lobe_passes() {
        let v = verdicts(|k| 0.5 - (k as f64 - 20.0).abs() * 0.02, 40);
        assert!(v.iter().all(|c| c.pass), "{v:?}");
    }

    #[test]
    fn zigzag_fails() {
        // three reversals of amplitude 0.2
        let v = verdicts(
            |k| {
                let s = (k % 20) as f64 / 10.0;
                0.3 + 0.2 * if s <= 1.0 { s } else { 2.0 - s }
            },
            50,
        );
        assert!(v.iter().any(|c| !c.pass));
    }
}
