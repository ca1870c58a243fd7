//! Detectors on simulated array epochs: two of seven satellites arrive only
//! by reflection, with more than a quarter wavelength of differential phase
//! error across the array.

mod common;

use arraymp::detector::{dbscan_detect, ransac_detect, DetectorConfig};
use arraymp::obs_sim::{generate_epoch, ArrayEpoch, ArrayGeometry, Environment, InjectedMultipath, NoiseConfig, TruthPose};
use arraymp::so3::RotationMatrix;
use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIALS: usize = 500;

fn max_differential(epoch: &ArrayEpoch, k: usize) -> f64 {
    let pe = epoch.sats[k].phase_errors;
    let mut worst = 0.0f64;
    for a in 0..pe.len() {
        for b in 0..pe.len() {
            let d = (pe[a] - pe[b]).rem_euclid(std::f64::consts::TAU);
            worst = worst.max(d.min(std::f64::consts::TAU - d));
        }
    }
    worst
}

/// A trial epoch and its truth attitude, redrawn until both contaminated
/// satellites carry more than π/2 of differential phase error.
fn trial(rng: &mut ChaCha8Rng) -> (ArrayEpoch, RotationMatrix) {
    let noise = NoiseConfig { sigma_pseudorange: 0.5, sigma_phase: 1e-3 };
    loop {
        let truth = arraymp::so3::rpy_to_so3(&arraymp::so3::EulerRpy::new(
            rng.random_range(-0.1..0.1),
            rng.random_range(-0.1..0.1),
            rng.random_range(-3.1..3.1),
        ));
        let sky = common::random_sky(7, &common::site(), rng);
        let dirty: Vec<usize> = sample(rng, 7, 2).into_vec();
        let injected: Vec<InjectedMultipath> = dirty
            .iter()
            .map(|&i| {
                let d: f64 = rng.random_range(5.0..40.0);
                let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                InjectedMultipath {
                    prn: sky[i].0,
                    reflection_points: vec![Vector3::new(d * az.sin(), d * az.cos(), rng.random_range(0.0..20.0))],
                    amplitudes: vec![rng.random_range(0.2..0.8)],
                    direct_blocked: true,
                }
            })
            .collect();
        let epoch = generate_epoch(
            &TruthPose::at_origin(common::site(), truth),
            common::time(),
            &sky,
            Environment::Injected(&injected),
            &ArrayGeometry::default(),
            &noise,
            0.0,
            rng,
        )
        .unwrap();
        let labels = epoch.truth_labels();
        if epoch.len() == 7
            && labels.iter().filter(|&&l| l).count() == 2
            && (0..7).filter(|&k| labels[k]).all(|k| max_differential(&epoch, k) > std::f64::consts::FRAC_PI_2)
        {
            return (epoch, truth);
        }
    }
}

#[test]
fn ransac_flags_both_reflected_satellites() {
    let mut rng = ChaCha8Rng::seed_from_u64(509);
    let cfg = DetectorConfig::default();
    let mut hits = 0;
    for _ in 0..TRIALS {
        let (epoch, truth) = trial(&mut rng);
        let labels = epoch.truth_labels();
        let res = ransac_detect(&epoch, &ArrayGeometry::default(), &truth, &cfg, &mut rng).unwrap();
        hits += labels.iter().zip(&res.flags).all(|(l, f)| !l || *f) as usize;
    }
    assert!(hits as f64 >= 0.95 * TRIALS as f64, "{hits}/{TRIALS}");
}

#[test]
fn dbscan_matches_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(510);
    let cfg = DetectorConfig::default();
    let mut hits = 0;
    for _ in 0..TRIALS {
        let (epoch, truth) = trial(&mut rng);
        let res = dbscan_detect(&epoch, &ArrayGeometry::default(), &truth, &cfg).unwrap();
        hits += (res.flags == epoch.truth_labels()) as usize;
    }
    assert!(hits as f64 >= 0.95 * TRIALS as f64, "{hits}/{TRIALS}");
}

#[test]
fn clean_zero_noise_epoch_keeps_every_satellite() {
    let mut rng = ChaCha8Rng::seed_from_u64(511);
    for _ in 0..20 {
        let truth = common::random_rotation(&mut rng);
        let sky = common::random_sky(7, &common::site(), &mut rng);
        let epoch = common::open_sky_epoch(&sky, truth, &NoiseConfig::zero(), &mut rng);
        let g = ArrayGeometry::default();
        let r = ransac_detect(&epoch, &g, &truth, &DetectorConfig::default(), &mut rng).unwrap();
        assert!(r.flags.iter().all(|f| !f));
        assert!(r.error < 1e-6);
        let d = dbscan_detect(&epoch, &g, &truth, &DetectorConfig::default()).unwrap();
        assert!(d.flags.iter().all(|f| !f));
    }
}
