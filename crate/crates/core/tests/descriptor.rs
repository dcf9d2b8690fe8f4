use approx::assert_relative_eq;
use proptest::prelude::*;

use bask::descriptor::{
    activation_map, contrastive_loss, distance_map, expectation_2d, mode_2d, ContrastiveBatch, DescriptorImage,
    DistanceMap, Match, NonMatch, NonMatchKind, ReferenceDescriptor,
};
use bask::geometry::PixelCoord;
use bask::grid::Grid;

fn image(w: usize, h: usize, dim: usize, data: Vec<f64>) -> DescriptorImage {
    DescriptorImage::new(w, h, dim, data).unwrap()
}

fn dm(w: usize, h: usize, data: Vec<f64>) -> DistanceMap {
    DistanceMap::new(Grid::new(w, h, data).unwrap()).unwrap()
}

fn map_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0.0..3.0, w * h)))
}

proptest! {
    #[test]
    fn distance_map_matches_scalar_loop(
        (w, h, dim, data, r) in (1usize..6, 1usize..6, 1usize..5).prop_flat_map(|(w, h, d)| {
            (Just(w), Just(h), Just(d), prop::collection::vec(-2.0..2.0, w * h * d), prop::collection::vec(-2.0..2.0, d))
        }),
        normalize in any::<bool>(),
    ) {
        let img = image(w, h, dim, data.clone());
        let got = distance_map(&img, &ReferenceDescriptor::new("r", r.clone()), normalize).unwrap();
        for v in 0..h {
            for u in 0..w {
                let mut acc = 0.0;
                for c in 0..dim {
                    let x = data[(v * w + u) * dim + c] - r[c];
                    acc += x * x;
                }
                let mut want = acc.sqrt();
                if normalize {
                    want /= (dim as f64).sqrt();
                }
                prop_assert!((got.grid().get(u, v) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn activation_is_invariant_to_constant_shifts((w, h, data) in map_strategy(), shift in -5.0f64..5.0, alpha in 0.1..30.0) {
        let base = activation_map(&dm(w, h, data.clone()), alpha).unwrap();
        let shifted: Vec<f64> = data.iter().map(|d| d + shift.abs()).collect();
        let moved = activation_map(&dm(w, h, shifted), alpha).unwrap();
        for (a, b) in base.probabilities().data().iter().zip(moved.probabilities().data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn activation_matches_direct_softmax((w, h, data) in map_strategy(), alpha in 0.1..10.0) {
        let am = activation_map(&dm(w, h, data.clone()), alpha).unwrap();
        let e: Vec<f64> = data.iter().map(|d| (-alpha * d).exp()).collect();
        let z: f64 = e.iter().sum();
        prop_assert!((am.probabilities().sum() - 1.0).abs() < 1e-12);
        for (p, x) in am.probabilities().data().iter().zip(&e) {
            prop_assert!((p - x / z).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_is_the_nearest_descriptor((w, h, data) in map_strategy(), alpha in 0.1..30.0) {
        let am = activation_map(&dm(w, h, data.clone()), alpha).unwrap();
        let best = (0..data.len()).fold(0, |b, i| if data[i] < data[b] { i } else { b });
        let want = Grid::cell_center(best % w, best / w);
        prop_assert_eq!(mode_2d(&am), want);
    }

    #[test]
    fn expectation_stays_in_unit_square((w, h, data) in map_strategy(), alpha in 0.1..30.0) {
        let e = expectation_2d(&activation_map(&dm(w, h, data), alpha).unwrap());
        prop_assert!((0.0..=1.0).contains(&e.u) && (0.0..=1.0).contains(&e.v));
    }

    #[test]
    fn loss_is_non_negative_and_gradient_is_local(
        a in prop::collection::vec(-1.0..1.0, 2 * 3 * 4),
        b in prop::collection::vec(-1.0..1.0, 2 * 3 * 4),
    ) {
        let batch = ContrastiveBatch {
            image_a: image(3, 2, 4, a),
            image_b: image(3, 2, 4, b),
            matches: vec![Match { a: (0, 0), b: (2, 1), non_matches: vec![NonMatch { pixel: (1, 1), kind: NonMatchKind::Foreground }] }],
            margin_fg: 0.5,
            margin_bg: 1.0,
        };
        let (loss, grad) = contrastive_loss(&batch).unwrap();
        prop_assert!(loss >= 0.0);
        // untouched pixels receive no gradient
        prop_assert!(grad.grad_a[4..8].iter().all(|g| *g == 0.0));
    }
}

#[test]
fn unimodal_map_has_coinciding_mean_and_mode() {
    let (w, h) = (21, 15);
    let center = PixelCoord::new(10.5, 7.5);
    let data = (0..w * h).map(|i| Grid::cell_center(i % w, i / w).distance(&center) / 5.0).collect();
    let am = activation_map(&dm(w, h, data), 4.0).unwrap();
    let mean = expectation_2d(&am).denormalized(w, h);
    assert_relative_eq!(mean.distance(&mode_2d(&am)), 0.0, epsilon = 1e-9);
    assert_eq!(mode_2d(&am), center);
}

#[test]
fn bimodal_map_separates_mean_from_mode() {
    let (w, h) = (30, 10);
    let (l, r) = (PixelCoord::new(5.5, 5.5), PixelCoord::new(24.5, 5.5));
    let data = (0..w * h)
        .map(|i| {
            let c = Grid::cell_center(i % w, i / w);
            c.distance(&l).min(c.distance(&r)) / 3.0
        })
        .collect();
    let am = activation_map(&dm(w, h, data), 4.0).unwrap();
    let mean = expectation_2d(&am).denormalized(w, h);
    assert!(mean.distance(&mode_2d(&am)) > 8.0);
}
