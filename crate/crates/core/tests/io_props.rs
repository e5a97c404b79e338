use std::sync::Arc;

use proptest::prelude::*;
use relaypb::io::{decode_snapshots, encode_snapshots, read_snapshots, write_snapshots};
use relaypb::scenario::{emit_config, parse_config, preset, PRESETS};
use relaypb::{Grid, SpaceTimeField};

fn histories() -> impl Strategy<Value = (SpaceTimeField, SpaceTimeField)> {
    (3usize..12, 1usize..4, 0usize..6).prop_flat_map(|(n, m, k)| {
        let len = n * m * k;
        (
            prop::collection::vec(prop::num::f64::ANY, len),
            prop::collection::vec(any::<bool>(), len),
            prop::collection::vec(1e-6..1.0f64, k),
        )
            .prop_map(move |(u, h, gaps)| {
                let g = if m == 1 {
                    Grid::line(0.0, 1.0, n).unwrap()
                } else {
                    Grid::rectangle((0.0, 1.0, n), (0.0, 3.0, m + 2)).unwrap()
                };
                let g = Arc::new(g);
                let pts = g.len();
                let mut uf = SpaceTimeField::new(g.clone());
                let mut hf = SpaceTimeField::new(g);
                let mut t = -0.5;
                for (j, gap) in gaps.iter().enumerate() {
                    t += gap;
                    let row: Vec<f64> = (0..pts).map(|p| u[(j * pts + p) % u.len().max(1)]).collect();
                    let hr: Vec<f64> = (0..pts).map(|p| if h[(j * pts + p) % h.len().max(1)] { 1.0 } else { -1.0 }).collect();
                    uf.push(t, &row);
                    hf.push(t, &hr);
                }
                (uf, hf)
            })
    })
}

fn bits(f: &SpaceTimeField) -> Vec<u64> {
    f.data().iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #[test]
    fn snapshot_bytes_round_trip((u, h) in histories()) {
        let bytes = encode_snapshots(&u, &h).unwrap();
        let (u2, h2) = decode_snapshots(&bytes).unwrap();
        prop_assert_eq!(bits(&u), bits(&u2));
        prop_assert_eq!(u.times(), u2.times());
        prop_assert_eq!(h.data(), h2.data());
        prop_assert_eq!(u.grid(), u2.grid());
        prop_assert_eq!(encode_snapshots(&u2, &h2).unwrap(), bytes);
    }

    #[test]
    fn any_truncation_is_rejected((u, h) in histories(), cut in 0.0..1.0f64) {
        let bytes = encode_snapshots(&u, &h).unwrap();
        let n = (cut * bytes.len() as f64) as usize;
        prop_assume!(n < bytes.len());
        prop_assert!(decode_snapshots(&bytes[..n]).is_err());
    }

    #[test]
    fn emitted_configs_parse_back(idx in 0..PRESETS.len(), dt in 1e-5..1e-2f64, theta in 0.5..1.0f64, shift in -0.2..0.2f64) {
        let mut spec = preset(PRESETS[idx].0).unwrap();
        spec.solver.dt = dt;
        spec.solver.theta = theta;
        if spec.relay.alpha.is_finite() {
            spec.relay.alpha += shift.min(0.0);
        }
        let text = emit_config(&spec);
        let back = parse_config(&text).unwrap().spec;
        prop_assert_eq!(back, spec);
    }
}

#[test]
fn files_round_trip() {
    let g = Arc::new(Grid::line(0.0, 1.0, 4).unwrap());
    let u = SpaceTimeField::from_fn(g.clone(), &[0.0, 0.25], |x, t| x[0] + t);
    let h = SpaceTimeField::from_fn(g, &[0.0, 0.25], |x, _| if x[0] < 0.5 { -1.0 } else { 1.0 });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.bin");
    write_snapshots(&u, &h, &path).unwrap();
    let (u2, h2) = read_snapshots(&path).unwrap();
    assert_eq!((u, h), (u2, h2));
}
