use proptest::prelude::*;
use relbo::report::{read_curves_csv, write_curves_csv, SuiteCurve};
use relbo::trace::{parse_trace, render};
use relbo_core::harness::{Checkpoint, Phase, TraceRecord};
use relbo_core::report::{aggregate, Trajectory};

fn trajectories(m: usize) -> impl Strategy<Value = Vec<Trajectory>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, m), 1..9).prop_map(move |ps| {
        ps.into_iter()
            .enumerate()
            .map(|(i, p)| Trajectory { label: format!("r{i}"), n: (6..6 + m).collect(), p })
            .collect()
    })
}

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => any::<f64>().prop_filter("finite", |v| v.is_finite()),
        1 => Just(f64::NAN),
        1 => Just(f64::INFINITY),
        1 => Just(f64::NEG_INFINITY),
    ]
}

fn record(d: usize, n: usize) -> impl Strategy<Value = TraceRecord> {
    (
        prop::collection::vec(-1e3f64..1e3, d),
        value(),
        value(),
        prop::option::of((prop::collection::vec(-1e3f64..1e3, d), 0.0f64..1.0, 0.0f64..1.0)),
        prop::sample::select(vec!["init", "oskg", "LS", "ts"]),
    )
        .prop_map(move |(y, v, acq, cp, rule)| TraceRecord {
            repeat: 2,
            n,
            phase: if n <= 3 { Phase::Init } else { Phase::Iter },
            y,
            v,
            acq_value: acq,
            rule: rule.into(),
            checkpoint: cp.map(|(x, p_hat, p_true)| Checkpoint { x, p_hat, p_true, p_true_raw: p_true, p_true_se: f64::NAN }),
            wall_ms: 0.0,
        })
}

fn trace(d: usize) -> impl Strategy<Value = Vec<TraceRecord>> {
    (1usize..8).prop_flat_map(move |len| {
        let rows: Vec<_> = (1..=len).map(|n| record(d, n)).collect();
        (rows, any::<bool>()).prop_map(move |(mut rows, done)| {
            if done {
                rows.push(TraceRecord {
                    repeat: 2,
                    n: len,
                    phase: Phase::Done,
                    y: Vec::new(),
                    v: f64::NAN,
                    acq_value: f64::NAN,
                    rule: String::new(),
                    checkpoint: None,
                    wall_ms: 0.0,
                });
            }
            rows
        })
    })
}

proptest! {
    #[test]
    fn aggregation_ignores_repeat_order(ts in (1usize..5).prop_flat_map(trajectories), k in 0usize..8) {
        let a = aggregate("p", "a", &ts).unwrap();
        let mut shuffled = ts.clone();
        shuffled.reverse();
        let len = shuffled.len();
        shuffled.rotate_left(k % len);
        prop_assert_eq!(aggregate("p", "a", &shuffled).unwrap(), a);
    }

    #[test]
    fn quartiles_are_ordered_and_bracketed(ts in (1usize..5).prop_flat_map(trajectories)) {
        let c = aggregate("p", "a", &ts).unwrap();
        for k in 0..c.n.len() {
            let lo = ts.iter().map(|t| t.p[k]).fold(f64::INFINITY, f64::min);
            let hi = ts.iter().map(|t| t.p[k]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= c.lower[k] && c.lower[k] <= c.median[k] && c.median[k] <= c.upper[k] && c.upper[k] <= hi);
        }
    }

    #[test]
    fn traces_round_trip(rows in (1usize..4).prop_flat_map(trace)) {
        let dim = rows[0].y.len();
        let text = render(&rows, dim);
        let back = parse_trace(&text).unwrap();
        prop_assert_eq!(back.dim, dim);
        prop_assert_eq!(format!("{:?}", back.records), format!("{rows:?}"));
        prop_assert_eq!(render(&back.records, dim), text);
    }

    #[test]
    fn curves_round_trip(ts in (1usize..5).prop_flat_map(trajectories)) {
        let curves = vec![SuiteCurve { suite: "extreme".into(), curve: aggregate("gp-2d", "ts_mr", &ts).unwrap() }];
        let text = write_curves_csv(&curves);
        prop_assert_eq!(read_curves_csv(&text).unwrap(), curves);
    }
}
