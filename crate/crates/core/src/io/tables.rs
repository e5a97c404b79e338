//! CSV tables. Column schemas:
//!
//! * `facets.csv`: `index, orientation, class, degeneracy, x, y, t, u, grad,
//!   lower_snapshot, lower_point, upper_snapshot, upper_point, lower_phase,
//!   upper_phase`
//! * `events.csv`: `point, x, y, time, direction, u`
//! * `growth.csv`: `fit, quantity, center_x, center_y, center_t, threshold,
//!   radius, sup, exponent`
//! * `dt_sign.csv`: `facet, class, x, y, t, dt_u`
//! * `transversality.csv`: `snapshot, point, x, t, u, u_x, threshold,
//!   offending_point`
//! * `monotone.csv`: `component, phase, first_snapshot, last_snapshot,
//!   left_pieces, right_pieces, split_snapshots, pass`
//! * `summary.csv`: `key, value`

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::diagnostics::DiagnosticsReport;
use crate::discretization::Grid;
use crate::free_boundary::FreeBoundaryDecomposition;
use crate::relay::{SwitchDirection, SwitchEvent};

#[derive(Serialize)]
struct FacetRow<'a> {
    index: usize,
    orientation: &'a str,
    class: &'a str,
    degeneracy: &'a str,
    x: f64,
    y: f64,
    t: f64,
    u: f64,
    grad: f64,
    lower_snapshot: usize,
    lower_point: usize,
    upper_snapshot: usize,
    upper_point: usize,
    lower_phase: &'a str,
    upper_phase: &'a str,
}

fn to_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| IoError::Csv(e.to_string()))
}

fn write(path: &Path, bytes: Vec<u8>) -> Result<(), IoError> {
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn facets_csv(decomp: &FreeBoundaryDecomposition) -> Result<Vec<u8>, IoError> {
    use crate::free_boundary::Orientation;
    to_bytes(decomp.facets.iter().enumerate().map(|(i, f)| FacetRow {
        index: i,
        orientation: match f.orientation {
            Orientation::TimeLike => "time_like",
            Orientation::SpaceLike => "space_like",
        },
        class: f.class.as_str(),
        degeneracy: f.degeneracy.as_str(),
        x: f.x[0],
        y: f.x[1],
        t: f.t,
        u: f.u,
        grad: f.grad,
        lower_snapshot: f.lower.snapshot,
        lower_point: f.lower.point,
        upper_snapshot: f.upper.snapshot,
        upper_point: f.upper.point,
        lower_phase: f.lower_phase.as_str(),
        upper_phase: f.upper_phase.as_str(),
    }))
}

pub fn write_facets_csv(decomp: &FreeBoundaryDecomposition, path: &Path) -> Result<(), IoError> {
    write(path, facets_csv(decomp)?)
}

#[derive(Serialize, Deserialize)]
struct EventRow {
    point: usize,
    x: f64,
    y: f64,
    time: f64,
    direction: SwitchDirection,
    u: f64,
}

pub fn events_csv(events: &[SwitchEvent], grid: &Grid) -> Result<Vec<u8>, IoError> {
    to_bytes(events.iter().map(|e| {
        let x = grid.coord(e.point);
        EventRow {
            point: e.point,
            x: x[0],
            y: x[1],
            time: e.time,
            direction: e.direction,
            u: e.u,
        }
    }))
}

pub fn write_events_csv(events: &[SwitchEvent], grid: &Grid, path: &Path) -> Result<(), IoError> {
    write(path, events_csv(events, grid)?)
}

pub fn read_events_csv(path: &Path) -> Result<Vec<SwitchEvent>, IoError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<EventRow>()
        .map(|row| {
            let row = row?;
            Ok(SwitchEvent {
                point: row.point,
                time: row.time,
                direction: row.direction,
                u: row.u,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct GrowthRow<'a> {
    fit: usize,
    quantity: &'a str,
    center_x: f64,
    center_y: f64,
    center_t: f64,
    threshold: f64,
    radius: f64,
    sup: f64,
    exponent: Option<f64>,
}

#[derive(Serialize)]
struct DtRow<'a> {
    facet: usize,
    class: &'a str,
    x: f64,
    y: f64,
    t: f64,
    dt_u: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    key: String,
    value: String,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "none".into())
}

/// Flat key/value digest of a report.
pub fn summary_rows(r: &DiagnosticsReport) -> Vec<(String, String)> {
    let t = &r.tolerances;
    vec![
        ("dim".into(), r.dim.to_string()),
        ("snapshots".into(), r.snapshots.to_string()),
        ("points".into(), r.points.to_string()),
        ("tol_u".into(), t.tol_u.to_string()),
        ("eps_grad".into(), t.eps_grad.to_string()),
        ("tol_dt".into(), t.tol_dt.to_string()),
        ("r_nbhd".into(), t.r_nbhd.to_string()),
        ("monotone_tol".into(), t.monotone_tol.to_string()),
        ("eps_margin".into(), t.eps_margin.to_string()),
        ("event_tol".into(), t.event_tol.to_string()),
        ("sup_abs_u".into(), r.sup_abs_u.to_string()),
        ("components_plus".into(), r.components.plus.to_string()),
        ("components_minus".into(), r.components.minus.to_string()),
        ("facets_gamma_alpha".into(), r.facets.gamma_alpha.to_string()),
        ("facets_gamma_beta".into(), r.facets.gamma_beta.to_string()),
        ("facets_gamma_v".into(), r.facets.gamma_v.to_string()),
        ("facets_unclassified".into(), r.facets.unclassified.to_string()),
        ("facets_degenerate".into(), r.facets.degenerate.to_string()),
        ("unclassified_fraction".into(), r.unclassified_fraction.to_string()),
        ("ordering_violations".into(), r.ordering_violations.to_string()),
        ("gamma_v_violations".into(), r.gamma_v_violations.to_string()),
        ("dt_sign_violations".into(), r.dt_sign.violations.len().to_string()),
        ("sup_abs_dt_u".into(), opt(r.dt_sign.sup_abs_dt_u)),
        ("separation".into(), opt(r.separation)),
        ("transversality_violations".into(), opt(r.transversality_violations())),
        ("monotone_pass".into(), opt(r.monotone_pass())),
        ("gamma0_empty".into(), r.gamma0.empty.to_string()),
        ("min_growth_exponent_u".into(), opt(r.growth.min_exponent_u())),
        ("u_min".into(), r.band.u_min.to_string()),
        ("u_max".into(), r.band.u_max.to_string()),
        ("events".into(), r.band.events.to_string()),
        ("outcome".into(), r.band.outcome.clone()),
    ]
}

/// Writes one CSV per report section into `dir`; returns the file names.
pub fn write_report_tables(r: &DiagnosticsReport, dir: &Path) -> Result<Vec<String>, IoError> {
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), IoError> {
        write(&dir.join(name), bytes)?;
        files.push(name.to_string());
        Ok(())
    };
    put(
        "summary.csv",
        to_bytes(summary_rows(r).into_iter().map(|(key, value)| SummaryRow { key, value }))?,
    )?;
    let growth = r
        .growth
        .fits_u
        .iter()
        .chain(&r.growth.fits_grad)
        .enumerate()
        .flat_map(|(i, f)| {
            f.radii.iter().zip(&f.sup_values).map(move |(&radius, &sup)| GrowthRow {
                fit: i,
                quantity: match f.quantity {
                    crate::diagnostics::GrowthQuantity::Deviation => "deviation",
                    crate::diagnostics::GrowthQuantity::Gradient => "gradient",
                },
                center_x: f.center.x[0],
                center_y: f.center.x[1],
                center_t: f.center.t,
                threshold: f.threshold,
                radius,
                sup,
                exponent: f.exponent,
            })
        });
    put("growth.csv", to_bytes(growth)?)?;
    put(
        "dt_sign.csv",
        to_bytes(r.dt_sign.violations.iter().map(|v| DtRow {
            facet: v.facet,
            class: v.class.as_str(),
            x: v.x[0],
            y: v.x[1],
            t: v.t,
            dt_u: v.dt_u,
        }))?,
    )?;
    if let Some(tv) = &r.transversality {
        put("transversality.csv", to_bytes(tv.iter())?)?;
    }
    if let Some(m) = &r.monotone {
        put("monotone.csv", to_bytes(m.iter())?)?;
    }
    Ok(files)
}
