use nalgebra::Vector3;
use proptest::prelude::*;

use bask::geometry::WorldPoint;
use bask::metrics::{aggregate, gt_error, Stat, TrackRecord, TrackStep};

fn step(t: usize, estimate: Option<WorldPoint>, gt: Option<WorldPoint>) -> TrackStep {
    TrackStep {
        t,
        estimate,
        estimate_px: None,
        ground_truth: gt,
        visible: gt.is_some(),
        n_eff: None,
        mean_mode_px: None,
    }
}

fn point() -> impl Strategy<Value = WorldPoint> {
    (-2.0..2.0, -2.0..2.0, -2.0..2.0).prop_map(|(x, y, z)| WorldPoint::new(x, y, z))
}

/// `keypoints x steps` pairs of (estimate, truth), each possibly missing.
fn records() -> impl Strategy<Value = Vec<Vec<(Option<WorldPoint>, Option<WorldPoint>)>>> {
    (1usize..8, 1usize..12).prop_flat_map(|(k, t)| {
        prop::collection::vec(
            prop::collection::vec((prop::option::weighted(0.8, point()), prop::option::weighted(0.8, point())), t),
            k,
        )
    })
}

fn build(
    raw: &[Vec<(Option<WorldPoint>, Option<WorldPoint>)>],
    map: impl Fn(WorldPoint) -> WorldPoint,
) -> Vec<TrackRecord> {
    raw.iter()
        .enumerate()
        .map(|(k, steps)| TrackRecord {
            keypoint: format!("kp{k}"),
            steps: steps.iter().enumerate().map(|(t, (e, g))| step(t, e.map(&map), g.map(&map))).collect(),
        })
        .collect()
}

proptest! {
    #[test]
    fn aggregate_matches_a_scalar_loop(raw in records()) {
        let recs = build(&raw, |p| p);
        let rows = aggregate(&recs, Stat::GtError).unwrap();
        prop_assert_eq!(rows.len(), raw[0].len());
        for (t, row) in rows.iter().enumerate() {
            let mut vals = Vec::new();
            for r in &raw {
                if let (Some(e), Some(g)) = r[t] {
                    vals.push(((e.x - g.x).powi(2) + (e.y - g.y).powi(2) + (e.z - g.z).powi(2)).sqrt());
                }
            }
            prop_assert_eq!(row.count, vals.len());
            prop_assert_eq!(row.excluded, raw.len() - vals.len());
            if vals.is_empty() {
                prop_assert!(row.mean.is_none() && row.std.is_none());
            } else {
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!((row.mean.unwrap() - mean).abs() < 1e-12);
                prop_assert!((row.std.unwrap() - std).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn error_is_invariant_to_a_common_translation(raw in records(), s in point()) {
        let a = build(&raw, |p| p);
        let b = build(&raw, |p| p + s.coords);
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in gt_error(ra).iter().zip(gt_error(rb)) {
                prop_assert_eq!(x.is_some(), y.is_some());
                if let (Some(x), Some(y)) = (x, y) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn error_scales_linearly(raw in records(), c in -3.0f64..3.0) {
        let a = build(&raw, |p| p);
        let b = build(&raw, |p| WorldPoint::from(p.coords * c));
        let (ra, rb) = (aggregate(&a, Stat::GtError).unwrap(), aggregate(&b, Stat::GtError).unwrap());
        for (x, y) in ra.iter().zip(&rb) {
            if let (Some(mx), Some(my)) = (x.mean, y.mean) {
                prop_assert!((my - c.abs() * mx).abs() < 1e-12);
                prop_assert!((y.std.unwrap() - c.abs() * x.std.unwrap()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn aggregate_rejects_ragged_records() {
    let a = TrackRecord { keypoint: "a".into(), steps: vec![step(0, None, None)] };
    let b = TrackRecord { keypoint: "b".into(), steps: vec![step(0, None, None), step(1, None, None)] };
    assert!(aggregate(&[a, b], Stat::GtError).is_err());
    assert!(aggregate(&[], Stat::GtError).unwrap().is_empty());
}

#[test]
fn other_statistics_are_aggregated_as_recorded() {
    let mut s = step(0, Some(WorldPoint::origin()), Some(WorldPoint::from(Vector3::x())));
    s.n_eff = Some(100.0);
    let mut r = s.clone();
    r.n_eff = Some(300.0);
    r.mean_mode_px = Some(4.0);
    let recs =
        [TrackRecord { keypoint: "a".into(), steps: vec![s] }, TrackRecord { keypoint: "b".into(), steps: vec![r] }];
    let n_eff = &aggregate(&recs, Stat::NEff).unwrap()[0];
    assert_eq!((n_eff.mean, n_eff.std, n_eff.count), (Some(200.0), Some(100.0), 2));
    let mm = &aggregate(&recs, Stat::MeanModePx).unwrap()[0];
    assert_eq!((mm.mean, mm.count, mm.excluded), (Some(4.0), 1, 1));
}
