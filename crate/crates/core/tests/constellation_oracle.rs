//! Satellite positions at the time of applicability against a numerically
//! integrated two-body orbit started at perigee, so Kepler's equation is
//! never solved on the oracle side.

use arraymp::constellation::{parse_yuma, sat_position, GpsTime, GM_EARTH, OMEGA_EARTH};
use arraymp::experiment::BUNDLED_ALMANAC;
use nalgebra::{Rotation3, Vector3};

fn accel(r: &Vector3<f64>) -> Vector3<f64> {
    -GM_EARTH * r / r.norm().powi(3)
}

/// Fixed-step RK4 over `duration` seconds (negative integrates backwards).
fn rk4(mut r: Vector3<f64>, mut v: Vector3<f64>, duration: f64) -> Vector3<f64> {
    let steps = (duration.abs() / 0.5).ceil().max(1.0) as usize;
    let h = duration / steps as f64;
    for _ in 0..steps {
        let (k1r, k1v) = (v, accel(&r));
        let (k2r, k2v) = (v + k1v * (h / 2.0), accel(&(r + k1r * (h / 2.0))));
        let (k3r, k3v) = (v + k2v * (h / 2.0), accel(&(r + k2r * (h / 2.0))));
        let (k4r, k4v) = (v + k3v * h, accel(&(r + k3r * h)));
        r += (k1r + k2r * 2.0 + k3r * 2.0 + k4r) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
    }
    r
}

#[test]
fn positions_at_toa_match_integrated_orbits() {
    let records = parse_yuma(BUNDLED_ALMANAC).unwrap();
    assert_eq!(records.len(), 31);
    let mut worst = 0.0f64;
    for rec in &records {
        let a = rec.sqrt_a * rec.sqrt_a;
        let e = rec.eccentricity;
        let n = (GM_EARTH / a.powi(3)).sqrt();
        let rp = a * (1.0 - e);
        let r0 = Vector3::new(rp, 0.0, 0.0);
        let v0 = Vector3::new(0.0, (GM_EARTH * (1.0 + e) / rp).sqrt(), 0.0);
        let mut m = rec.mean_anomaly % std::f64::consts::TAU;
        if m > std::f64::consts::PI {
            m -= std::f64::consts::TAU;
        }
        let perifocal = rk4(r0, v0, m / n);

        let raan = rec.raan0 - OMEGA_EARTH * rec.toa;
        let to_ecef = Rotation3::from_axis_angle(&Vector3::z_axis(), raan)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), rec.inclination)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), rec.arg_perigee);
        let expected = to_ecef * perifocal;

        let t = GpsTime::new(rec.week, rec.toa).unwrap();
        let got = sat_position(rec, &t).unwrap();
        worst = worst.max((got - expected).norm());
    }
    assert!(worst < 1.0, "worst disagreement {worst} m");
}
