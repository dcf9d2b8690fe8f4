use super::*;
use crate::descriptor::DistanceMap;
use crate::geometry::{CameraModel, Intrinsics, Pose};
use approx::assert_relative_eq;

fn camera() -> CameraModel {
    CameraModel::new(Intrinsics::centered(20.0, 10, 10).unwrap(), Pose::identity())
}

fn measurement(distance: Grid, depth: Grid) -> Measurement {
    Measurement::new(camera(), DistanceMap::new(distance).unwrap(), depth).unwrap()
}

fn cfg() -> ParticleFilterConfig {
    ParticleFilterConfig::default()
}

#[test]
fn occlusion_probability_closed_form() {
    assert_eq!(occlusion_probability(0.95, 1.0, 0.05, 0.01), 0.5);
    // reading well behind the point: not occluded
    assert!(occlusion_probability(1.1, 1.0, 0.05, 0.01) < 1e-12);
    // reading 30 cm in front: occluded
    assert!(occlusion_probability(0.7, 1.0, 0.05, 0.01) > 1.0 - 1e-12);
}

#[test]
fn likelihood_behind_camera_is_tau() {
    let m = measurement(Grid::filled(10, 10, 0.0), Grid::filled(10, 10, 1.0));
    let l = measurement_likelihood(&WorldPoint::new(0.0, 0.0, -1.0), &m, &cfg());
    assert_eq!(l, cfg().tau);
    let l = measurement_likelihood(&WorldPoint::new(10.0, 0.0, 1.0), &m, &cfg());
    assert_eq!(l, cfg().tau);
}

#[test]
fn likelihood_unoccluded_equals_correspondence_term() {
    let c = ParticleFilterConfig { alpha: 4.0, ..cfg() };
    let m = measurement(Grid::filled(10, 10, 1.0), Grid::filled(10, 10, 1.0));
    let l = measurement_likelihood(&WorldPoint::new(0.0, 0.0, 1.0), &m, &c);
    let p_o = occlusion_probability(1.0, 1.0, c.epsilon, c.sigma_d);
    assert!(p_o < 1e-6);
    assert_relative_eq!(l, (-4.0f64).exp(), epsilon = 1e-6);
    assert!((l - 0.0183).abs() < 1e-4);

    let m0 = measurement(Grid::filled(10, 10, 0.0), Grid::filled(10, 10, 1.0));
    let l0 = measurement_likelihood(&WorldPoint::new(0.0, 0.0, 1.0), &m0, &c);
    assert_relative_eq!(l0, 1.0, epsilon = 1e-6);
}

#[test]
fn likelihood_far_behind_reading() {
    // reading 10 sigma behind the particle: p_o ~ 0, p_d tiny
    let c = cfg();
    let m = measurement(Grid::filled(10, 10, 0.0), Grid::filled(10, 10, 1.1));
    let l = measurement_likelihood(&WorldPoint::new(0.0, 0.0, 1.0), &m, &c);
    let p_d = (-0.5f64 * 100.0).exp();
    assert_relative_eq!(l, p_d, epsilon = 1e-15);
}

#[test]
fn invalid_depth_counts_as_occluded() {
    let m = measurement(Grid::filled(10, 10, 0.0), Grid::filled(10, 10, f64::NAN));
    assert_eq!(measurement_likelihood(&WorldPoint::new(0.0, 0.0, 1.0), &m, &cfg()), cfg().tau);
}

#[test]
fn predict_without_noise() {
    let pts = vec![WorldPoint::new(0.0, 0.0, 1.0), WorldPoint::new(1.0, 2.0, 3.0)];
    let mut ps = ParticleSet::from_positions(pts.clone(), 1).unwrap();
    let still = ParticleFilterConfig { sigma_r: 0.0, p_w: 0.0, ..cfg() };
    ps.predict(&GripperMotion::new(Vector3::new(0.1, 0.0, 0.0)), &still).unwrap();
    assert_eq!(ps.particles().iter().map(|p| p.position).collect::<Vec<_>>(), pts);

    let follow = ParticleFilterConfig { sigma_r: 0.0, p_w: 1.0, ..cfg() };
    ps.predict(&GripperMotion::new(Vector3::new(0.1, 0.0, 0.0)), &follow).unwrap();
    for (p, q) in ps.particles().iter().zip(&pts) {
        assert_eq!(p.position, q + Vector3::new(0.1, 0.0, 0.0));
        assert_eq!(p.weight, 0.5);
    }
}

#[test]
fn update_out_of_view_keeps_weights() {
    let pts: Vec<_> = (0..5).map(|i| WorldPoint::new(i as f64, 0.0, -1.0)).collect();
    let mut ps = ParticleSet::from_positions(pts, 0).unwrap();
    ps.particles[0].weight = 0.6;
    for p in &mut ps.particles[1..] {
        p.weight = 0.1;
    }
    let m = measurement(Grid::filled(10, 10, 0.0), Grid::filled(10, 10, 1.0));
    ps.update(&m, &cfg()).unwrap();
    assert_relative_eq!(ps.particles()[0].weight, 0.6, epsilon = 1e-12);
    assert_relative_eq!(ps.weight_sum(), 1.0, epsilon = 1e-12);
}

#[test]
fn update_concentrates_on_matching_particle() {
    // particle 0 projects into a cell whose distance is 0; the rest see 10
    let mut dist = Grid::filled(10, 10, 10.0);
    dist.set(5, 5, 0.0);
    let m = measurement(dist, Grid::filled(10, 10, 1.0));
    // a wide occlusion margin makes every particle unoccluded (p_o ~ 1e-88),
    // so only the correspondence ratio e^0 / e^-40 separates them
    let c = ParticleFilterConfig { alpha: 4.0, epsilon: 0.2, ..cfg() };
    let mut pts = vec![m.camera.backproject(Grid::cell_center(5, 5), 1.0).unwrap()];
    for i in 0..99 {
        let (u, v) = (i % 3, i / 3 % 3);
        pts.push(m.camera.backproject(Grid::cell_center(u, v), 1.0).unwrap());
    }
    let mut ps = ParticleSet::from_positions(pts, 0).unwrap();
    ps.update(&m, &c).unwrap();
    assert!((ps.particles()[0].weight - 1.0).abs() < 1e-10);
    assert!((ps.weight_sum() - 1.0).abs() < 1e-9);
}

#[test]
fn update_flags_degeneracy() {
    // in view, unoccluded, but the depth reading is far behind: p_d underflows
    let m = measurement(Grid::filled(10, 10, 0.0), Grid::filled(10, 10, 100.0));
    let c = ParticleFilterConfig { sigma_d: 0.001, ..cfg() };
    let mut ps = ParticleSet::from_positions(vec![WorldPoint::new(0.0, 0.0, 1.0); 4], 0).unwrap();
    ps.update(&m, &c).unwrap();
    assert!(ps.is_degenerate());
    assert!(ps.particles().iter().all(|p| p.weight == 0.25));
}

#[test]
fn n_eff_examples() {
    let mut ps = ParticleSet::from_positions(vec![WorldPoint::origin(); 100], 0).unwrap();
    assert_relative_eq!(ps.n_eff(), 100.0, epsilon = 1e-9);
    for (i, p) in ps.particles.iter_mut().enumerate() {
        p.weight = if i == 3 { 1.0 } else { 0.0 };
    }
    assert_eq!(ps.n_eff(), 1.0);
    let mut ps = ParticleSet::from_positions(vec![WorldPoint::origin(); 4], 0).unwrap();
    for (p, w) in ps.particles.iter_mut().zip([0.5, 0.5, 0.0, 0.0]) {
        p.weight = w;
    }
    assert_eq!(ps.n_eff(), 2.0);
}

#[test]
fn estimate_is_weighted_mean() {
    let ps = ParticleSet::from_positions(vec![WorldPoint::new(1.0, 2.0, 3.0)], 0).unwrap();
    assert_eq!(ps.estimate(), WorldPoint::new(1.0, 2.0, 3.0));
    let ps = ParticleSet::from_positions(vec![WorldPoint::origin(), WorldPoint::new(1.0, 0.0, 0.0)], 0).unwrap();
    assert_eq!(ps.estimate(), WorldPoint::new(0.5, 0.0, 0.0));
}

#[test]
fn init_point_mass_activation() {
    let mut dist = Grid::filled(10, 10, 5.0);
    dist.set(2, 7, 0.0);
    let m = measurement(dist, Grid::filled(10, 10, 2.0));
    let c = ParticleFilterConfig { alpha: 100.0, n_particles: 50, ..cfg() };
    let ps = ParticleSet::init_from_measurement(&m, &c, 9).unwrap();
    let target = m.camera.backproject(Grid::cell_center(2, 7), 2.0).unwrap();
    assert!(ps.particles().iter().all(|p| p.position == target));
    assert_relative_eq!(ps.weight_sum(), 1.0, epsilon = 1e-12);
}

#[test]
fn init_needs_valid_depth() {
    let m = measurement(Grid::filled(10, 10, 0.0), Grid::filled(10, 10, f64::NAN));
    assert!(matches!(ParticleSet::init_from_measurement(&m, &cfg(), 0), Err(Error::Initialization(_))));
}

#[test]
fn init_is_deterministic() {
    let m = measurement(Grid::from_fn(10, 10, |u, v| (u * v) as f64 * 0.01), Grid::filled(10, 10, 1.5));
    let a = ParticleSet::init_from_measurement(&m, &cfg(), 42).unwrap();
    let b = ParticleSet::init_from_measurement(&m, &cfg(), 42).unwrap();
    assert_eq!(a.particles(), b.particles());
}

#[test]
fn injection_edge_cases() {
    let mut dist = Grid::filled(10, 10, 5.0);
    dist.set(4, 4, 0.0);
    let m = measurement(dist, Grid::filled(10, 10, 2.0));
    let pts = vec![WorldPoint::new(0.3, 0.3, 0.3); 20];

    let mut ps = ParticleSet::from_positions(pts.clone(), 0).unwrap();
    ps.inject_random(&m, &ParticleFilterConfig { p_inject: 0.0, ..cfg() }).unwrap();
    assert!(ps.particles().iter().all(|p| p.position == pts[0]));

    let all = ParticleFilterConfig { p_inject: 1.0, alpha: 100.0, ..cfg() };
    ps.inject_random(&m, &all).unwrap();
    let target = m.camera.backproject(Grid::cell_center(4, 4), 2.0).unwrap();
    assert!(ps.particles().iter().all(|p| p.position == target));
    assert_relative_eq!(ps.weight_sum(), 1.0, epsilon = 1e-12);

    // no valid depth: skipped
    let blind = measurement(Grid::filled(10, 10, 0.0), Grid::filled(10, 10, f64::NAN));
    let mut ps = ParticleSet::from_positions(pts.clone(), 0).unwrap();
    ps.inject_random(&blind, &all).unwrap();
    assert!(ps.particles().iter().all(|p| p.position == pts[0]));
}

#[test]
fn empty_step_with_still_motion_keeps_estimate() {
    let pts = vec![WorldPoint::new(0.1, 0.2, 0.3), WorldPoint::new(-0.4, 0.0, 1.0)];
    let mut ps = ParticleSet::from_positions(pts, 0).unwrap();
    let before = ps.estimate();
    let still = ParticleFilterConfig { sigma_r: 0.0, p_w: 0.0, ..cfg() };
    let after = ps.step(&GripperMotion::default(), &[], &still).unwrap();
    assert_eq!(before, after);
}

#[test]
fn config_validation() {
    assert!(cfg().validate().is_ok());
    assert!(ParticleFilterConfig { tau: 1.0, ..cfg() }.validate().is_err());
    assert!(ParticleFilterConfig { n_particles: 0, ..cfg() }.validate().is_err());
    assert!(ParticleFilterConfig { neff_frac: 0.0, ..cfg() }.validate().is_err());
    assert!(ParticleFilterConfig { sigma_d: 0.0, ..cfg() }.validate().is_err());
    assert!(ParticleFilterConfig { p_w: 1.5, ..cfg() }.validate().is_err());
}

#[test]
fn measurement_shape_must_match_camera() {
    let d = DistanceMap::new(Grid::filled(9, 10, 0.0)).unwrap();
    assert!(Measurement::new(camera(), d, Grid::filled(10, 10, 1.0)).is_err());
}
