mod common;

use common::{chordal_config, chordal_mean, grid, spearman};
use nalgebra::DMatrix;
use ncmimo::channel::{build_covariance, draw_scatterers, CorrelationModel, SphereSampling};
use ncmimo::geometry::{ArrayGeometry, SphericalPoint};
use ncmimo::subspace::{chordal_distance, dominant_eigs, principal_angles, SubspaceBasis};
use ncmimo::rng::{complex_normal, keyed_rng, Domain};

#[test]
fn far_field_limit_collapses_the_distance() {
    let geom = ArrayGeometry::square_30ghz(16).unwrap();
    for seed in 0..5 {
        let ue = SphericalPoint::from_degrees(1e5, -10.0, 15.0).unwrap();
        let cluster = draw_scatterers(ue, 3.0, 10, seed).unwrap();
        let nf = dominant_eigs(&build_covariance(&cluster, &geom, CorrelationModel::NearField).unwrap(), 10).unwrap();
        let ff = dominant_eigs(&build_covariance(&cluster, &geom, CorrelationModel::FarField).unwrap(), 10).unwrap();
        let d = chordal_distance(&nf, &ff).unwrap();
        assert!(d < 0.05 * 10f64.sqrt(), "seed {seed}: {d}");
    }
}

#[test]
fn trajectory_distance_decays_with_range() {
    for side in [16, 32] {
        let config = chordal_config(side, 20);
        let r = grid(&config);
        let means: Vec<f64> = r.iter().map(|&d| chordal_mean(&config, d, SphereSampling::Surface)).collect();
        assert!(spearman(&r, &means) <= -0.9, "{means:?}");
        assert!(means.iter().all(|m| (0.0..=1.0).contains(m)));
    }
}

#[test]
fn volume_sampling_tells_the_same_story() {
    let config = chordal_config(16, 20);
    let r: Vec<f64> = grid(&config).into_iter().filter(|&d| d > 3.0).collect();
    let surface: Vec<f64> = r.iter().map(|&d| chordal_mean(&config, d, SphereSampling::Surface)).collect();
    let volume: Vec<f64> = r.iter().map(|&d| chordal_mean(&config, d, SphereSampling::Volume)).collect();
    assert!(spearman(&r, &volume) <= -0.9, "{volume:?}");
    for (s, v) in surface.iter().zip(&volume) {
        assert!((s - v).abs() <= 0.1, "surface {surface:?} volume {volume:?}");
    }
}

#[test]
fn chordal_distance_matches_principal_angles() {
    let mut rng = keyed_rng(3, Domain::Channel, 0, 0);
    for _ in 0..20 {
        let a = SubspaceBasis::spanning(DMatrix::from_fn(16, 3, |_, _| complex_normal(&mut rng))).unwrap();
        let b = SubspaceBasis::spanning(DMatrix::from_fn(16, 3, |_, _| complex_normal(&mut rng))).unwrap();
        let angles = principal_angles(&a, &b).unwrap();
        let via_angles = angles.iter().map(|t| t.sin().powi(2)).sum::<f64>().sqrt();
        let d = chordal_distance(&a, &b).unwrap();
        assert!((via_angles - d).abs() <= 1e-12, "{via_angles} vs {d}");
        assert!(angles.windows(2).all(|w| w[0] <= w[1]));
    }
}
