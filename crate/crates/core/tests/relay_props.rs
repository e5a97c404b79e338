use proptest::prelude::*;
use relaypb::relay::{relay_trace, InputTrace, RelayResponse, Switch};
use relaypb::{RelayParams, RelayState, RelayValue, SwitchDirection};

const TOL: f64 = 1e-9;

fn case() -> impl Strategy<Value = (RelayParams, InputTrace, RelayState)> {
    (-1.0..1.0f64, 0.05..1.5f64, prop::collection::vec((0.01..1.0f64, -2.5..3.5f64), 2..30), any::<bool>()).prop_map(
        |(alpha, w, steps, up)| {
            let p = RelayParams::new(alpha, alpha + w).unwrap();
            let mut t = 0.0;
            let samples: Vec<(f64, f64)> = steps
                .into_iter()
                .map(|(dt, u)| {
                    t += dt;
                    (t, u)
                })
                .collect();
            let u0 = samples[0].1;
            let value = if u0 <= p.alpha() {
                RelayValue::Minus
            } else if u0 >= p.beta() {
                RelayValue::Plus
            } else if up {
                RelayValue::Plus
            } else {
                RelayValue::Minus
            };
            (p, InputTrace::new(samples).unwrap(), RelayState { value, last_switch_time: None })
        },
    )
}

fn assert_same(a: &[Switch], b: &[Switch]) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        prop_assert_eq!(x.direction, y.direction);
        prop_assert!((x.time - y.time).abs() <= TOL * (1.0 + x.time.abs()));
    }
    Ok(())
}

fn run(p: &RelayParams, trace: &InputTrace, h0: RelayState) -> RelayResponse {
    relay_trace(trace, h0, p)
}

proptest! {
    #[test]
    fn switches_alternate_and_sit_on_thresholds((p, trace, h0) in case()) {
        let r = run(&p, &trace, h0);
        let mut value = r.initial;
        for s in &r.switches {
            let level = match s.direction {
                SwitchDirection::Up => p.beta(),
                SwitchDirection::Down => p.alpha(),
            };
            prop_assert_ne!(value, s.direction.target());
            prop_assert!((trace.value_at(s.time) - level).abs() <= TOL);
            value = s.direction.target();
        }
        for &(t, u) in trace.samples() {
            if u <= p.alpha() {
                prop_assert_eq!(r.value_at(t), RelayValue::Minus);
            } else if u >= p.beta() {
                prop_assert_eq!(r.value_at(t), RelayValue::Plus);
            }
        }
    }

    #[test]
    fn output_depends_only_on_the_past((p, trace, h0) in case(), frac in 0.0..1.0f64) {
        let s = trace.samples();
        let cut = s[0].0 + frac * (s[s.len() - 1].0 - s[0].0);
        prop_assume!(cut > s[0].0);
        let mut prefix: Vec<_> = s.iter().copied().filter(|&(t, _)| t < cut).collect();
        prefix.push((cut, trace.value_at(cut)));
        let short = run(&p, &InputTrace::new(prefix).unwrap(), h0);
        let full = run(&p, &trace, h0);
        let before = |v: &[Switch]| v.iter().filter(|s| s.time <= cut - TOL).copied().collect::<Vec<_>>();
        assert_same(&before(&full.switches), &before(&short.switches))?;
    }

    #[test]
    fn time_changes_move_switches_with_them((p, trace, h0) in case(), scale in 0.1..10.0f64, shift in -5.0..5.0f64) {
        let s = trace.samples();
        // t -> shift + scale t + t^2, strictly increasing for t >= 0
        let g = |t: f64| shift + scale * t + t * t;
        let warped = InputTrace::new(s.iter().map(|&(t, u)| (g(t), u)).collect()).unwrap();
        let r = run(&p, &warped, h0);
        let full = run(&p, &trace, h0);
        let mapped: Vec<Switch> = full
            .switches
            .iter()
            .map(|sw| {
                let j = s.partition_point(|&(ts, _)| ts <= sw.time).clamp(1, s.len() - 1) - 1;
                let l = (sw.time - s[j].0) / (s[j + 1].0 - s[j].0);
                Switch { time: g(s[j].0) + l * (g(s[j + 1].0) - g(s[j].0)), direction: sw.direction }
            })
            .collect();
        assert_same(&mapped, &r.switches)?;
    }

    #[test]
    fn interpolated_samples_change_nothing((p, trace, h0) in case(), split in 2usize..5) {
        let s = trace.samples();
        let mut fine = Vec::new();
        for w in s.windows(2) {
            for k in 0..split {
                let t = w[0].0 + (w[1].0 - w[0].0) * k as f64 / split as f64;
                fine.push((t, if k == 0 { w[0].1 } else { trace.value_at(t) }));
            }
        }
        fine.push(s[s.len() - 1]);
        let r = run(&p, &InputTrace::new(fine).unwrap(), h0);
        assert_same(&run(&p, &trace, h0).switches, &r.switches)?;
    }
}

#[test]
fn inconsistent_start_is_corrected_at_the_first_sample() {
    let p = RelayParams::new(0.0, 1.0).unwrap();
    let trace = InputTrace::new(vec![(0.0, 2.0), (1.0, 2.0)]).unwrap();
    let r = relay_trace(&trace, RelayState { value: RelayValue::Minus, last_switch_time: None }, &p);
    assert_eq!(r.switches.len(), 1);
    assert_eq!(r.switches[0].time, 0.0);
    assert_eq!(r.value_at(0.5), RelayValue::Plus);
}
