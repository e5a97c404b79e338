use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::discretization::SpaceTimeField;
use crate::free_boundary::SpaceTimePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthQuantity {
    /// `|u - theta|`
    Deviation,
    /// `|Du|`
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub quantity: GrowthQuantity,
    pub center: SpaceTimePoint,
    pub threshold: f64,
    pub radii: Vec<f64>,
    pub sup_values: Vec<f64>,
    /// Least-squares slope of `ln sup` against `ln r`; `None` when the field
    /// vanishes on the whole window.
    pub exponent: Option<f64>,
    /// Root-mean-square deviation of the log data from the fitted line.
    pub residual: Option<f64>,
    pub zero_field: bool,
}

/// Values at or below this are treated as an identically vanishing field.
pub const ZERO_FIELD_LEVEL: f64 = 1e-10;

/// Grid floor and ceiling of the radius window around `center`: from
/// `2 max(h, sqrt(dt))` up to the smallest of `rho0`, the space distance to
/// the boundary and the time distance (as `sqrt`) to either end of the
/// history.
pub fn radius_window(field: &SpaceTimeField, center: SpaceTimePoint, rho0: f64, dt: f64) -> (f64, f64) {
    let grid = field.grid();
    let times = field.times();
    let lo = 2.0 * grid.max_spacing().max(dt.sqrt());
    let t_first = times.first().copied().unwrap_or(center.t);
    let t_last = times.last().copied().unwrap_or(center.t);
    let hi = rho0
        .min(grid.distance_to_boundary(center.x))
        .min((center.t - t_first).max(0.0).sqrt())
        .min((t_last - center.t).max(0.0).sqrt());
    (lo, hi)
}

/// Geometric radii `lo * 2^(j/4)` inside the window. Fails when fewer than
/// three fit.
pub fn admissible_radii(lo: f64, hi: f64) -> Result<Vec<f64>, DiagnosticsError> {
    let mut radii = Vec::new();
    let q = 2f64.powf(0.25);
    let mut r = lo;
    while r <= hi * (1.0 + 1e-12) && radii.len() < 64 {
        radii.push(r);
        r *= q;
    }
    if radii.len() < 3 {
        return Err(DiagnosticsError::WindowTooSmall { lo, hi, count: radii.len() });
    }
    Ok(radii)
}

/// Supremum of `values` over the closed discrete cylinder
/// `|x - x0| <= r`, `|t - t0| <= r^2`.
pub fn cylinder_sup(
    values: &SpaceTimeField,
    center: SpaceTimePoint,
    r: f64,
    map: impl Fn(f64) -> f64,
) -> f64 {
    let grid = values.grid();
    let times = values.times();
    let slack = 1e-9 * r;
    let t_lo = center.t - r * r * (1.0 + 1e-9);
    let t_hi = center.t + r * r * (1.0 + 1e-9);
    let k0 = times.partition_point(|&t| t < t_lo);
    let k1 = times.partition_point(|&t| t <= t_hi);
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&p| {
            let x = grid.coord(p);
            (x[0] - center.x[0]).hypot(x[1] - center.x[1]) <= r + slack
        })
        .collect();
    let mut sup = 0.0f64;
    for k in k0..k1 {
        let row = values.row(k);
        for &p in &inside {
            sup = sup.max(map(row[p]));
        }
    }
    sup
}

/// Slope and RMS residual of the least-squares line through `(x, y)`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (my + slope * (a - mx));
            e * e
        })
        .sum();
    (slope, (rss / n).sqrt())
}

fn check_radii(radii: &[f64]) -> Result<(), DiagnosticsError> {
    if radii.len() < 3 {
        return Err(DiagnosticsError::WindowTooSmall {
            lo: radii.first().copied().unwrap_or(f64::NAN),
            hi: radii.last().copied().unwrap_or(f64::NAN),
            count: radii.len(),
        });
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(DiagnosticsError::InvalidRadii);
    }
    Ok(())
}

fn fit(
    quantity: GrowthQuantity,
    values: &SpaceTimeField,
    center: SpaceTimePoint,
    threshold: f64,
    radii: &[f64],
    map: impl Fn(f64) -> f64 + Copy,
) -> Result<GrowthFit, DiagnosticsError> {
    check_radii(radii)?;
    let sup_values: Vec<f64> = radii.iter().map(|&r| cylinder_sup(values, center, r, map)).collect();
    let usable: Vec<(f64, f64)> = radii
        .iter()
        .zip(&sup_values)
        .filter(|(_, &s)| s > ZERO_FIELD_LEVEL)
        .map(|(&r, &s)| (r.ln(), s.ln()))
        .collect();
    let (exponent, residual, zero_field) = if usable.len() < 3 {
        (None, None, true)
    } else {
        let (lx, ly): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
        let (slope, res) = least_squares_slope(&lx, &ly);
        (Some(slope), Some(res), false)
    };
    Ok(GrowthFit {
        quantity,
        center,
        threshold,
        radii: radii.to_vec(),
        sup_values,
        exponent,
        residual,
        zero_field,
    })
}

/// Growth of `sup |u - theta|` over shrinking cylinders around `center`.
pub fn growth_exponent_u(
    u_hist: &SpaceTimeField,
    center: SpaceTimePoint,
    theta: f64,
    radii: &[f64],
) -> Result<GrowthFit, DiagnosticsError> {
    fit(GrowthQuantity::Deviation, u_hist, center, theta, radii, |v| (v - theta).abs())
}

/// Growth of `sup |Du|` over shrinking cylinders; `grad_hist` holds `|Du|`.
pub fn growth_exponent_grad(
    grad_hist: &SpaceTimeField,
    center: SpaceTimePoint,
    theta: f64,
    radii: &[f64],
) -> Result<GrowthFit, DiagnosticsError> {
    fit(GrowthQuantity::Gradient, grad_hist, center, theta, radii, f64::abs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::Grid;
    use crate::free_boundary::gradient_history;
    use std::sync::Arc;

    fn synthetic(f: impl Fn(f64, f64) -> f64) -> SpaceTimeField {
        let g = Arc::new(Grid::line(-1.0, 1.0, 1001).unwrap());
        let times: Vec<f64> = (0..=1000).map(|k| -0.25 + k as f64 * 0.0005).collect();
        SpaceTimeField::from_fn(g, &times, |x, t| f(x[0], t))
    }

    const RADII: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
    const Z0: SpaceTimePoint = SpaceTimePoint { x: [0.0, 0.0], t: 0.0 };

    #[test]
    fn quadratic_growth() {
        let u = synthetic(|x, t| x * x + t);
        let f = growth_exponent_u(&u, Z0, 0.0, &RADII).unwrap();
        assert!((f.exponent.unwrap() - 2.0).abs() < 0.01, "{f:?}");
        let g = growth_exponent_grad(&gradient_history(&u), Z0, 0.0, &RADII).unwrap();
        assert!((g.exponent.unwrap() - 1.0).abs() < 0.01, "{g:?}");
    }

    #[test]
    fn linear_and_cubic_controls() {
        let u = synthetic(|x, _| x);
        let f = growth_exponent_u(&u, Z0, 0.0, &RADII).unwrap();
        assert!((f.exponent.unwrap() - 1.0).abs() < 0.01);
        let u = synthetic(|x, _| x * x * x);
        let g = growth_exponent_grad(&gradient_history(&u), Z0, 0.0, &RADII).unwrap();
        assert!((g.exponent.unwrap() - 2.0).abs() < 0.05, "{g:?}");
    }

    #[test]
    fn constant_field_is_flagged() {
        let u = synthetic(|_, _| 0.3);
        let g = growth_exponent_grad(&gradient_history(&u), Z0, 0.0, &RADII).unwrap();
        assert!(g.zero_field);
        assert_eq!(g.exponent, None);
    }

    #[test]
    fn window_rules() {
        assert!(matches!(
            admissible_radii(0.1, 0.12),
            Err(DiagnosticsError::WindowTooSmall { .. })
        ));
        let r = admissible_radii(0.1, 0.5).unwrap();
        assert!(r.len() >= 3 && *r.last().unwrap() <= 0.5 + 1e-12);
        let u = synthetic(|x, _| x);
        assert!(growth_exponent_u(&u, Z0, 0.0, &[0.1, 0.2]).is_err());
        assert_eq!(
            growth_exponent_u(&u, Z0, 0.0, &[0.1, 0.3, 0.2]),
            Err(DiagnosticsError::InvalidRadii)
        );
    }
}
