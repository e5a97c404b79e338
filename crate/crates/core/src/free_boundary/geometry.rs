use serde::{Deserialize, Serialize};

use crate::discretization::SpaceTimeField;
use crate::relay::RelayParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: [f64; 2],
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: [f64; 2], t: f64) -> Self {
        Self { x, t }
    }

    pub fn space_distance(&self, other: &SpaceTimePoint) -> f64 {
        (self.x[0] - other.x[0]).hypot(self.x[1] - other.x[1])
    }
}

/// Largest `rho` for which the backward cylinder
/// `{|x - x0| < rho} x (t0 - rho^2, t0]` contains none of `set`.
///
/// A point `(x, t)` with `t <= t0` lies in that cylinder exactly when
/// `rho > max(|x - x0|, sqrt(t0 - t))`, so the supremum is the minimum of
/// that quantity over the set. Later points never enter. Returns infinity
/// when no point qualifies.
pub fn parabolic_distance(z: SpaceTimePoint, set: &[SpaceTimePoint]) -> f64 {
    set.iter()
        .filter(|q| q.t <= z.t)
        .map(|q| z.space_distance(q).max((z.t - q.t).sqrt()))
        .fold(f64::INFINITY, f64::min)
}

/// Points of the discrete level set `{u = theta}` inside the interior
/// cylinder: cells within `tol_u` of `theta`, plus the linear-interpolation
/// crossing on every space or time edge whose endpoints straddle `theta`.
pub fn level_set_points(
    u_hist: &SpaceTimeField,
    theta: f64,
    tol_u: f64,
    eps_margin: f64,
) -> Vec<SpaceTimePoint> {
    let grid = u_hist.grid();
    let times = u_hist.times();
    let mut out = Vec::new();
    if u_hist.is_empty() || !theta.is_finite() {
        return out;
    }
    let t_min = times[0] + eps_margin * eps_margin;
    let inside: Vec<bool> = (0..grid.len())
        .map(|p| grid.distance_to_boundary(grid.coord(p)) >= eps_margin)
        .collect();
    let crossing = |a: f64, b: f64| -> Option<f64> {
        let (da, db) = (a - theta, b - theta);
        (da.abs() > tol_u && db.abs() > tol_u && (da > 0.0) != (db > 0.0))
            .then(|| da / (da - db))
    };
    for k in 0..u_hist.len() {
        if times[k] < t_min {
            continue;
        }
        for p in 0..grid.len() {
            if !inside[p] {
                continue;
            }
            let u = u_hist.value(k, p);
            let x = grid.coord(p);
            if (u - theta).abs() <= tol_u {
                out.push(SpaceTimePoint::new(x, times[k]));
            }
            if k + 1 < u_hist.len() {
                if let Some(s) = crossing(u, u_hist.value(k + 1, p)) {
                    out.push(SpaceTimePoint::new(x, times[k] + s * (times[k + 1] - times[k])));
                }
            }
            let idx = grid.multi_index(p);
            for a in 0..grid.dim() {
                if idx[a] + 1 >= grid.axis(a).count {
                    continue;
                }
                let q = p + grid.stride(a);
                if !inside[q] {
                    continue;
                }
                if let Some(s) = crossing(u, u_hist.value(k, q)) {
                    let y = grid.coord(q);
                    out.push(SpaceTimePoint::new(
                        [x[0] + s * (y[0] - x[0]), x[1] + s * (y[1] - x[1])],
                        times[k],
                    ));
                }
            }
        }
    }
    out
}

/// Smallest space-time Euclidean distance between the discrete level sets
/// of α and β inside the interior cylinder (space distance to the boundary
/// at least `eps_margin`, elapsed time at least `eps_margin^2`). Infinity if
/// either set is empty.
pub fn level_set_separation(
    u_hist: &SpaceTimeField,
    p: &RelayParams,
    tol_u: f64,
    eps_margin: f64,
) -> f64 {
    let a = level_set_points(u_hist, p.alpha(), tol_u, eps_margin);
    let mut b = level_set_points(u_hist, p.beta(), tol_u, eps_margin);
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    b.sort_by(|l, r| l.t.total_cmp(&r.t));
    let mut best = f64::INFINITY;
    for za in &a {
        let start = b.partition_point(|q| q.t < za.t);
        for zb in b[start..].iter() {
            let dt = zb.t - za.t;
            if dt >= best {
                break;
            }
            best = best.min(za.space_distance(zb).hypot(dt));
        }
        for zb in b[..start].iter().rev() {
            let dt = za.t - zb.t;
            if dt >= best {
                break;
            }
            best = best.min(za.space_distance(zb).hypot(dt));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::Grid;
    use std::sync::Arc;

    #[test]
    fn parabolic_distance_cases() {
        assert_eq!(parabolic_distance(SpaceTimePoint::new([0.0, 0.0], 1.0), &[]), f64::INFINITY);
        let d = parabolic_distance(
            SpaceTimePoint::new([0.0, 0.0], 1.0),
            &[SpaceTimePoint::new([0.0, 0.0], 0.0)],
        );
        assert!((d - 1.0).abs() < 1e-15);
        let d = parabolic_distance(
            SpaceTimePoint::new([2.0, 0.0], 1.0),
            &[SpaceTimePoint::new([0.0, 0.0], 1.0)],
        );
        assert!((d - 2.0).abs() < 1e-15);
        // later points are outside the backward cylinder
        let d = parabolic_distance(
            SpaceTimePoint::new([0.0, 0.0], 1.0),
            &[SpaceTimePoint::new([0.0, 0.0], 1.5)],
        );
        assert_eq!(d, f64::INFINITY);
    }

    #[test]
    fn midpoint_field_has_no_level_sets() {
        let g = Arc::new(Grid::line(0.0, 1.0, 21).unwrap());
        let times: Vec<f64> = (0..10).map(|k| k as f64 * 0.1).collect();
        let u = SpaceTimeField::from_fn(g, &times, |_, _| 0.5);
        let p = RelayParams::new(0.0, 1.0).unwrap();
        assert_eq!(level_set_separation(&u, &p, 1e-6, 0.1), f64::INFINITY);
    }

    #[test]
    fn planes_are_their_distance_apart() {
        let n = 41;
        let g = Arc::new(Grid::line(0.0, 1.0, n).unwrap());
        let h = g.spacing(0);
        let times: Vec<f64> = (0..30).map(|k| k as f64 * 0.01).collect();
        let u = SpaceTimeField::from_fn(g, &times, |x, _| x[0]);
        let p = RelayParams::new(0.2, 0.8).unwrap();
        let d = level_set_separation(&u, &p, 1e-9, 0.1);
        assert!((d - 0.6).abs() <= h, "{d}");
        // off-grid thresholds are located by interpolation
        let p = RelayParams::new(0.21, 0.79).unwrap();
        let d = level_set_separation(&u, &p, 1e-9, 0.1);
        assert!((d - 0.58).abs() <= h, "{d}");
    }
}
