//! Non-ideal relay hysteresis operator.
//!
//! The relay outputs `-1` while its input stays at or below the lower
//! threshold `alpha`, `+1` at or above the upper threshold `beta`, and keeps
//! its previous output while the input is strictly inside `(alpha, beta)`.
//! Comparisons against the thresholds are exact: `u == alpha` gives `-1`,
//! `u == beta` gives `+1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelayError {
    #[error("alpha must be < beta (got alpha={alpha}, beta={beta})")]
    InvalidThresholds { alpha: f64, beta: f64 },
    #[error("initial relay value {selector} is not admissible for input {input} (alpha={alpha}, beta={beta})")]
    InvalidInitialState {
        input: f64,
        selector: f64,
        alpha: f64,
        beta: f64,
    },
    #[error("input trace must be nonempty with strictly increasing finite times")]
    InvalidTrace,
}

/// Lower and upper switching thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayParams {
    alpha: f64,
    beta: f64,
}

impl RelayParams {
    /// Infinite thresholds are allowed and disable switching on that side.
    pub fn new(alpha: f64, beta: f64) -> Result<Self, RelayError> {
        if alpha.is_nan() || beta.is_nan() || alpha >= beta {
            return Err(RelayError::InvalidThresholds { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn width(&self) -> f64 {
        self.beta - self.alpha
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.alpha + self.beta)
    }
}

/// Output of the non-ideal relay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelayValue {
    Minus,
    Plus,
}

impl RelayValue {
    pub fn sign(self) -> i8 {
        match self {
            RelayValue::Minus => -1,
            RelayValue::Plus => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.sign())
    }

    pub fn from_sign(value: f64) -> Option<Self> {
        if value == 1.0 {
            Some(RelayValue::Plus)
        } else if value == -1.0 {
            Some(RelayValue::Minus)
        } else {
            None
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            RelayValue::Minus => RelayValue::Plus,
            RelayValue::Plus => RelayValue::Minus,
        }
    }
}

/// Direction of a relay switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchDirection {
    /// `+1 -> -1`, only possible on `{u = alpha}`.
    Down,
    /// `-1 -> +1`, only possible on `{u = beta}`.
    Up,
}

impl SwitchDirection {
    pub fn target(self) -> RelayValue {
        match self {
            SwitchDirection::Down => RelayValue::Minus,
            SwitchDirection::Up => RelayValue::Plus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SwitchDirection::Down => "down",
            SwitchDirection::Up => "up",
        }
    }
}

/// Values the multivalued relay graph admits at a given input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admissible {
    MinusOnly,
    PlusOnly,
    Both,
}

impl Admissible {
    pub fn contains(self, value: RelayValue) -> bool {
        match self {
            Admissible::MinusOnly => value == RelayValue::Minus,
            Admissible::PlusOnly => value == RelayValue::Plus,
            Admissible::Both => true,
        }
    }

    pub fn values(self) -> &'static [RelayValue] {
        match self {
            Admissible::MinusOnly => &[RelayValue::Minus],
            Admissible::PlusOnly => &[RelayValue::Plus],
            Admissible::Both => &[RelayValue::Minus, RelayValue::Plus],
        }
    }
}

pub fn f_multivalued(s: f64, p: &RelayParams) -> Admissible {
    if s <= p.alpha {
        Admissible::MinusOnly
    } else if s >= p.beta {
        Admissible::PlusOnly
    } else {
        Admissible::Both
    }
}

/// State of a single relay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayState {
    pub value: RelayValue,
    pub last_switch_time: Option<f64>,
}

pub fn relay_init(
    phi_value: f64,
    selector: RelayValue,
    p: &RelayParams,
) -> Result<RelayState, RelayError> {
    if !f_multivalued(phi_value, p).contains(selector) {
        return Err(RelayError::InvalidInitialState {
            input: phi_value,
            selector: selector.as_f64(),
            alpha: p.alpha,
            beta: p.beta,
        });
    }
    Ok(RelayState {
        value: selector,
        last_switch_time: None,
    })
}

/// Output the relay would take for input `u` given its current output.
#[inline]
pub fn relay_output(current: RelayValue, u: f64, p: &RelayParams) -> RelayValue {
    if u <= p.alpha {
        RelayValue::Minus
    } else if u >= p.beta {
        RelayValue::Plus
    } else {
        current
    }
}

pub fn relay_step(prev: RelayState, u_new: f64, t_new: f64, p: &RelayParams) -> RelayState {
    let value = relay_output(prev.value, u_new, p);
    if value == prev.value {
        prev
    } else {
        RelayState {
            value,
            last_switch_time: Some(t_new),
        }
    }
}

/// Completed relay with "constant inside the band" dynamics: saturates to
/// `-1` at or below `alpha`, `+1` at or above `beta`, otherwise holds.
pub fn completed_relay_step(prev_value: f64, u_new: f64, p: &RelayParams) -> f64 {
    if u_new <= p.alpha {
        -1.0
    } else if u_new >= p.beta {
        1.0
    } else {
        prev_value.clamp(-1.0, 1.0)
    }
}

/// Time at which the linear interpolant between `(t_a, u_a)` and `(t_b, u_b)`
/// reaches `threshold`. The caller guarantees the segment brackets it.
///
/// The solver and [`relay_trace`] share this formula so that replaying a
/// committed history reproduces event times bit for bit.
#[inline]
pub fn crossing_time(t_a: f64, u_a: f64, t_b: f64, u_b: f64, threshold: f64) -> f64 {
    if u_b == u_a {
        return t_b;
    }
    let lambda = ((threshold - u_a) / (u_b - u_a)).clamp(0.0, 1.0);
    t_a + lambda * (t_b - t_a)
}

/// A scalar input sampled at strictly increasing times, interpolated
/// linearly between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTrace {
    samples: Vec<(f64, f64)>,
}

impl InputTrace {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, RelayError> {
        if samples.is_empty()
            || samples.iter().any(|(t, u)| !t.is_finite() || u.is_nan())
            || samples.windows(2).any(|w| w[1].0 <= w[0].0)
        {
            return Err(RelayError::InvalidTrace);
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn start(&self) -> f64 {
        self.samples[0].0
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    /// Piecewise-linear value; clamps outside the sampled range.
    pub fn value_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        if t <= s[0].0 {
            return s[0].1;
        }
        let last = s.len() - 1;
        if t >= s[last].0 {
            return s[last].1;
        }
        let j = s.partition_point(|(ts, _)| *ts <= t) - 1;
        let (ta, ua) = s[j];
        let (tb, ub) = s[j + 1];
        ua + (ub - ua) * (t - ta) / (tb - ta)
    }
}

/// One relay switch along a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Switch {
    pub time: f64,
    pub direction: SwitchDirection,
}

/// Right-continuous step function produced by [`relay_trace`].
#[derive(Debug, Clone, PartialEq)]
pub struct RelayResponse {
    pub start: f64,
    pub initial: RelayValue,
    pub switches: Vec<Switch>,
}

impl RelayResponse {
    pub fn value_at(&self, t: f64) -> RelayValue {
        let n = self.switches.partition_point(|s| s.time <= t);
        if n == 0 {
            self.initial
        } else {
            self.switches[n - 1].direction.target()
        }
    }

    /// `(t, value)` breakpoints, starting with the value at the trace start.
    pub fn steps(&self) -> Vec<(f64, RelayValue)> {
        std::iter::once((self.start, self.initial))
            .chain(self.switches.iter().map(|s| (s.time, s.direction.target())))
            .collect()
    }
}

/// Runs the relay along a piecewise-linear input with exact crossing times.
///
/// `h0` is the state at the first sample time; if it contradicts the input
/// there it is corrected immediately and the correction is reported as a
/// switch at the start time.
pub fn relay_trace(trace: &InputTrace, h0: RelayState, p: &RelayParams) -> RelayResponse {
    let s = trace.samples();
    let (t0, u0) = s[0];
    let mut switches = Vec::new();
    let mut value = h0.value;
    let corrected = relay_output(value, u0, p);
    if corrected != value {
        switches.push(Switch {
            time: t0,
            direction: if corrected == RelayValue::Plus {
                SwitchDirection::Up
            } else {
                SwitchDirection::Down
            },
        });
        value = corrected;
    }
    for w in s.windows(2) {
        let (ta, ua) = w[0];
        let (tb, ub) = w[1];
        // Along a linear piece the input is monotone, so at most one switch
        // can happen per piece; the loop still handles a second one generically.
        loop {
            let next = match value {
                RelayValue::Minus if ub >= p.beta && ua < p.beta => Some((
                    crossing_time(ta, ua, tb, ub, p.beta),
                    SwitchDirection::Up,
                )),
                RelayValue::Plus if ub <= p.alpha && ua > p.alpha => Some((
                    crossing_time(ta, ua, tb, ub, p.alpha),
                    SwitchDirection::Down,
                )),
                _ => None,
            };
            match next {
                Some((time, direction)) => {
                    switches.push(Switch { time, direction });
                    value = direction.target();
                }
                None => break,
            }
        }
    }
    RelayResponse {
        start: t0,
        initial: h0.value,
        switches,
    }
}

/// How the relay field evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RelayMode {
    #[default]
    NonIdeal,
    Completed,
}

/// A committed switch at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub point: usize,
    pub time: f64,
    pub direction: SwitchDirection,
    /// Input value at the commit that latched the switch.
    pub u: f64,
}

/// Relay state at every grid point plus the log of committed switches.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayField {
    params: RelayParams,
    mode: RelayMode,
    values: Vec<f64>,
    last_switch: Vec<Option<f64>>,
    events: Vec<SwitchEvent>,
}

impl RelayField {
    /// Builds a field from initial inputs and selected initial outputs.
    /// In non-ideal mode selectors must be `±1` and admissible; in completed
    /// mode any value in `[-1, 1]` is accepted inside the band.
    pub fn new(
        params: RelayParams,
        mode: RelayMode,
        phi: &[f64],
        selectors: &[f64],
    ) -> Result<Self, RelayError> {
        assert_eq!(phi.len(), selectors.len());
        let mut values = Vec::with_capacity(phi.len());
        for (&u, &sel) in phi.iter().zip(selectors) {
            let invalid = || RelayError::InvalidInitialState {
                input: u,
                selector: sel,
                alpha: params.alpha,
                beta: params.beta,
            };
            let v = match mode {
                RelayMode::NonIdeal => {
                    let value = RelayValue::from_sign(sel).ok_or_else(invalid)?;
                    relay_init(u, value, &params)?.value.as_f64()
                }
                RelayMode::Completed => {
                    if !(-1.0..=1.0).contains(&sel)
                        || (u <= params.alpha && sel != -1.0)
                        || (u >= params.beta && sel != 1.0)
                    {
                        return Err(invalid());
                    }
                    sel
                }
            };
            values.push(v);
        }
        Ok(Self {
            params,
            mode,
            last_switch: vec![None; values.len()],
            values,
            events: Vec::new(),
        })
    }

    /// Wraps raw output values without admissibility checks (test fixtures
    /// and deliberately inconsistent states).
    pub fn from_raw(params: RelayParams, mode: RelayMode, values: Vec<f64>) -> Self {
        Self {
            params,
            mode,
            last_switch: vec![None; values.len()],
            values,
            events: Vec::new(),
        }
    }

    pub fn params(&self) -> &RelayParams {
        &self.params
    }

    pub fn mode(&self) -> RelayMode {
        self.mode
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn events(&self) -> &[SwitchEvent] {
        &self.events
    }

    pub fn state(&self, point: usize) -> Option<RelayState> {
        RelayValue::from_sign(self.values[point]).map(|value| RelayState {
            value,
            last_switch_time: self.last_switch[point],
        })
    }

    fn next_value(&self, current: f64, u: f64) -> f64 {
        match self.mode {
            RelayMode::NonIdeal => {
                if u <= self.params.alpha {
                    -1.0
                } else if u >= self.params.beta {
                    1.0
                } else {
                    current
                }
            }
            RelayMode::Completed => completed_relay_step(current, u, &self.params),
        }
    }

    /// Points (in increasing index order) whose output would change under
    /// input `u`, with the direction of the change.
    pub fn pending(&self, u: &[f64]) -> Vec<(usize, SwitchDirection)> {
        debug_assert_eq!(u.len(), self.values.len());
        self.values
            .iter()
            .zip(u)
            .enumerate()
            .filter_map(|(i, (&v, &ui))| {
                let next = self.next_value(v, ui);
                if next == v {
                    None
                } else if next > v {
                    Some((i, SwitchDirection::Up))
                } else {
                    Some((i, SwitchDirection::Down))
                }
            })
            .collect()
    }

    pub fn any_pending(&self, u: &[f64]) -> bool {
        self.values
            .iter()
            .zip(u)
            .any(|(&v, &ui)| self.next_value(v, ui) != v)
    }

    /// Latches every pending switch. `previous` is the input at `t_prev`,
    /// used to place each event on the linear segment to `(t, u)`.
    pub fn latch(&mut self, previous: &[f64], t_prev: f64, u: &[f64], t: f64) -> Vec<SwitchEvent> {
        let pending = self.pending(u);
        let mut new_events = Vec::with_capacity(pending.len());
        for (i, direction) in pending {
            let threshold = match direction {
                SwitchDirection::Up => self.params.beta,
                SwitchDirection::Down => self.params.alpha,
            };
            let time = if t > t_prev {
                crossing_time(t_prev, previous[i], t, u[i], threshold)
            } else {
                t
            };
            self.values[i] = self.next_value(self.values[i], u[i]);
            self.last_switch[i] = Some(time);
            let ev = SwitchEvent {
                point: i,
                time,
                direction,
                u: u[i],
            };
            new_events.push(ev);
        }
        self.events.extend_from_slice(&new_events);
        new_events
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> RelayParams {
        RelayParams::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn thresholds_must_be_ordered() {
        assert!(RelayParams::new(1.0, 0.0).is_err());
        assert!(RelayParams::new(0.5, 0.5).is_err());
        assert!(RelayParams::new(f64::NEG_INFINITY, f64::INFINITY).is_ok());
    }

    #[test]
    fn multivalued_graph() {
        let p = unit();
        assert_eq!(f_multivalued(0.0, &p), Admissible::MinusOnly);
        assert_eq!(f_multivalued(1.0, &p), Admissible::PlusOnly);
        assert_eq!(f_multivalued(0.5, &p), Admissible::Both);
        assert_eq!(f_multivalued(0.5, &p).values().len(), 2);
    }

    #[test]
    fn init_validates_selector() {
        let p = unit();
        assert_eq!(relay_init(-2.0, RelayValue::Minus, &p).unwrap().value, RelayValue::Minus);
        let s = relay_init(0.5, RelayValue::Plus, &p).unwrap();
        assert_eq!(s.value, RelayValue::Plus);
        assert_eq!(s.last_switch_time, None);
        assert!(matches!(
            relay_init(2.0, RelayValue::Minus, &p),
            Err(RelayError::InvalidInitialState { .. })
        ));
    }

    #[test]
    fn step_semantics() {
        let p = unit();
        let minus = RelayState { value: RelayValue::Minus, last_switch_time: None };
        let plus = RelayState { value: RelayValue::Plus, last_switch_time: None };
        let up = relay_step(minus, 1.0, 3.0, &p);
        assert_eq!(up.value, RelayValue::Plus);
        assert_eq!(up.last_switch_time, Some(3.0));
        assert_eq!(relay_step(plus, 0.5, 3.0, &p), plus);
        let down = relay_step(plus, 0.0, 4.0, &p);
        assert_eq!(down.value, RelayValue::Minus);
        assert_eq!(down.last_switch_time, Some(4.0));
    }

    #[test]
    fn trace_with_two_crossings() {
        let p = unit();
        let trace = InputTrace::new(vec![(0.0, 0.5), (1.0, 1.5), (2.0, -0.5)]).unwrap();
        let h0 = relay_init(0.5, RelayValue::Minus, &p).unwrap();
        let r = relay_trace(&trace, h0, &p);
        // 0.5 + t = 1 at t = 0.5; 1.5 - 2 (t - 1) = 0 at t = 1.75.
        assert_eq!(r.switches.len(), 2);
        assert_eq!(r.switches[0].direction, SwitchDirection::Up);
        assert!((r.switches[0].time - 0.5).abs() < 1e-15);
        assert_eq!(r.switches[1].direction, SwitchDirection::Down);
        assert!((r.switches[1].time - 1.75).abs() < 1e-15);
        assert_eq!(r.value_at(0.49), RelayValue::Minus);
        assert_eq!(r.value_at(0.5), RelayValue::Plus);
        assert_eq!(r.value_at(1.75), RelayValue::Minus);
        assert_eq!(r.steps().len(), 3);
    }

    #[test]
    fn trace_inside_band_keeps_memory() {
        let p = unit();
        let plus = RelayState { value: RelayValue::Plus, last_switch_time: None };
        let flat = InputTrace::new(vec![(0.0, 0.5), (1.0, 0.5), (2.0, 0.5)]).unwrap();
        assert!(relay_trace(&flat, plus, &p).switches.is_empty());
        let wiggle: Vec<_> = (0..50)
            .map(|k| (k as f64, 0.5 + 0.49 * (k as f64).sin()))
            .collect();
        let wiggle = InputTrace::new(wiggle).unwrap();
        assert!(relay_trace(&wiggle, plus, &p).switches.is_empty());
    }

    #[test]
    fn trace_corrects_inconsistent_start() {
        let p = unit();
        let plus = RelayState { value: RelayValue::Plus, last_switch_time: None };
        let trace = InputTrace::new(vec![(0.0, -1.0), (1.0, -1.0)]).unwrap();
        let r = relay_trace(&trace, plus, &p);
        assert_eq!(r.switches, vec![Switch { time: 0.0, direction: SwitchDirection::Down }]);
    }

    #[test]
    fn traces_reject_bad_times() {
        assert!(InputTrace::new(vec![]).is_err());
        assert!(InputTrace::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
    }

    #[test]
    fn completed_relay() {
        let p = unit();
        assert_eq!(completed_relay_step(0.3, 0.5, &p), 0.3);
        assert_eq!(completed_relay_step(0.3, 1.0, &p), 1.0);
        assert_eq!(completed_relay_step(-1.0, -0.2, &p), -1.0);
    }

    #[test]
    fn field_latches_with_interpolated_times() {
        let p = unit();
        let mut field =
            RelayField::new(p, RelayMode::NonIdeal, &[0.5, 0.5, 0.9], &[-1.0, 1.0, -1.0]).unwrap();
        let prev = [0.5, 0.5, 0.9];
        let next = [1.1, 0.2, 0.95];
        assert_eq!(field.pending(&next), vec![(0, SwitchDirection::Up)]);
        let ev = field.latch(&prev, 0.0, &next, 1.0);
        assert_eq!(ev.len(), 1);
        assert!((ev[0].time - 0.5 / 0.6).abs() < 1e-15);
        assert_eq!(field.values(), &[1.0, 1.0, -1.0]);
        assert!(!field.any_pending(&next));
    }

    #[test]
    fn field_rejects_inadmissible_selectors() {
        let p = unit();
        assert!(RelayField::new(p, RelayMode::NonIdeal, &[2.0], &[-1.0]).is_err());
        assert!(RelayField::new(p, RelayMode::NonIdeal, &[0.5], &[0.3]).is_err());
        assert!(RelayField::new(p, RelayMode::Completed, &[0.5], &[0.3]).is_ok());
        assert!(RelayField::new(p, RelayMode::Completed, &[-0.5], &[0.3]).is_err());
    }
}
