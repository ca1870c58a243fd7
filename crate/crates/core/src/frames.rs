//! WGS-84 geodetic, ECEF and local East-North-Up frames, plus line-of-sight
//! geometry for a receiver.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};

pub const WGS84_A: f64 = 6_378_137.0;
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
pub const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);
const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// Earth-centred Earth-fixed position, meters.
pub type EcefPosition = Vector3<f64>;

/// Ellipsoidal latitude/longitude in radians and height in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeodeticPosition {
    pub lat: f64,
    pub lon: f64,
    pub height: f64,
}

impl GeodeticPosition {
    pub fn new(lat: f64, lon: f64, height: f64) -> Self {
        Self { lat, lon, height }
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, height: f64) -> Self {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), height)
    }
}

pub fn geodetic_to_ecef(g: &GeodeticPosition) -> EcefPosition {
    let (slat, clat) = g.lat.sin_cos();
    let (slon, clon) = g.lon.sin_cos();
    let n = WGS84_A / (1.0 - WGS84_E2 * slat * slat).sqrt();
    Vector3::new(
        (n + g.height) * clat * clon,
        (n + g.height) * clat * slon,
        (n * (1.0 - WGS84_E2) + g.height) * slat,
    )
}

/// Fixed-point inversion, at most 10 iterations.
pub fn ecef_to_geodetic(p: &EcefPosition) -> GeodeticPosition {
    let lon = p.y.atan2(p.x);
    let rho = p.x.hypot(p.y);
    let mut lat = p.z.atan2(rho * (1.0 - WGS84_E2));
    for _ in 0..10 {
        let s = lat.sin();
        let n = WGS84_A / (1.0 - WGS84_E2 * s * s).sqrt();
        let h = rho * lat.cos() + p.z * s - WGS84_A * (1.0 - WGS84_E2 * s * s).sqrt();
        let next = p.z.atan2(rho * (1.0 - WGS84_E2 * n / (n + h)));
        let done = (next - lat).abs() < 1e-12;
        lat = next;
        if done {
            break;
        }
    }
    let s = lat.sin();
    let h = rho * lat.cos() + p.z * s - WGS84_A * (1.0 - WGS84_E2 * s * s).sqrt();
    GeodeticPosition::new(lat, lon, h)
}

/// Rotation taking ECEF difference vectors into ENU at `origin` (rows: e, n, u).
pub fn ecef_to_enu_rotation(origin: &GeodeticPosition) -> Matrix3<f64> {
    let (slat, clat) = origin.lat.sin_cos();
    let (slon, clon) = origin.lon.sin_cos();
    Matrix3::new(
        -slon, clon, 0.0,
        -slat * clon, -slat * slon, clat,
        clat * clon, clat * slon, slat,
    )
}

pub fn ecef_to_enu(p: &EcefPosition, origin: &GeodeticPosition) -> Vector3<f64> {
    ecef_to_enu_rotation(origin) * (p - geodetic_to_ecef(origin))
}

pub fn enu_to_ecef(enu: &Vector3<f64>, origin: &GeodeticPosition) -> EcefPosition {
    geodetic_to_ecef(origin) + ecef_to_enu_rotation(origin).transpose() * enu
}

/// Unit receiver→satellite vectors in ENU, one row per satellite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LosMatrix {
    rows: Vec<Vector3<f64>>,
}

impl LosMatrix {
    /// Rows are normalized on entry.
    pub fn from_rows(rows: Vec<Vector3<f64>>) -> Self {
        Self { rows: rows.into_iter().map(|r| r.normalize()).collect() }
    }

    pub fn rows(&self) -> &[Vector3<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> LosMatrix {
        LosMatrix { rows: idx.iter().map(|&i| self.rows[i]).collect() }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), 3, |i, j| self.rows[i][j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosAngles {
    pub los: LosMatrix,
    pub elevations: Vec<f64>,
    /// Clockwise from North, [0, 2π).
    pub azimuths: Vec<f64>,
}

/// LOS unit vectors, elevations and azimuths as seen from `receiver`.
pub fn los_and_angles(sats: &[EcefPosition], receiver: &GeodeticPosition) -> Result<LosAngles> {
    los_in_frame(sats, &geodetic_to_ecef(receiver), receiver)
}

/// Same as [`los_and_angles`] but with the receiver given in ECEF and the
/// ENU axes taken at `frame` (which may be a nearby fixed origin).
pub fn los_in_frame(
    sats: &[EcefPosition],
    receiver: &EcefPosition,
    frame: &GeodeticPosition,
) -> Result<LosAngles> {
    let rot = ecef_to_enu_rotation(frame);
    let mut rows = Vec::with_capacity(sats.len());
    let mut elevations = Vec::with_capacity(sats.len());
    let mut azimuths = Vec::with_capacity(sats.len());
    for (i, s) in sats.iter().enumerate() {
        let d = rot * (s - receiver);
        let n = d.norm();
        if !(n > 1e-3) {
            return Err(Error::DegenerateGeometry(format!(
                "satellite {i} coincides with receiver"
            )));
        }
        let u = d / n;
        elevations.push(u.z.clamp(-1.0, 1.0).asin());
        azimuths.push(u.x.atan2(u.y).rem_euclid(std::f64::consts::TAU));
        rows.push(u);
    }
    Ok(LosAngles { los: LosMatrix { rows }, elevations, azimuths })
}

/// Indices of satellites at or above `cutoff` radians elevation.
pub fn above_cutoff(elevations: &[f64], cutoff: f64) -> Vec<usize> {
    elevations
        .iter()
        .enumerate()
        .filter(|(_, &e)| e >= cutoff)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn ecef_reference_points() {
        let p = geodetic_to_ecef(&GeodeticPosition::default());
        assert_eq!(p, Vector3::new(WGS84_A, 0.0, 0.0));
        let pole = geodetic_to_ecef(&GeodeticPosition::new(FRAC_PI_2, 0.0, 0.0));
        assert!((pole.z - WGS84_B).abs() < 1e-3);
        assert!(pole.x.abs() < 1e-3);
    }

    #[test]
    fn enu_origin_and_vertical() {
        let origin = GeodeticPosition::from_degrees(49.01, 8.43, 115.0);
        let o = geodetic_to_ecef(&origin);
        assert_eq!(ecef_to_enu(&o, &origin), Vector3::zeros());
        let up = geodetic_to_ecef(&GeodeticPosition { height: 215.0, ..origin });
        let enu = ecef_to_enu(&up, &origin);
        assert!((enu - Vector3::new(0.0, 0.0, 100.0)).norm() < 1e-3);
    }

    #[test]
    fn overhead_and_horizon_satellites() {
        let rx = GeodeticPosition::from_degrees(30.0, -40.0, 10.0);
        let up = enu_to_ecef(&Vector3::new(0.0, 0.0, 2.0e7), &rx);
        let north = enu_to_ecef(&Vector3::new(0.0, 2.0e7, 0.0), &rx);
        let la = los_and_angles(&[up, north], &rx).unwrap();
        assert!((la.elevations[0] - FRAC_PI_2).abs() < 1e-9);
        assert!((la.los.rows()[0] - Vector3::z()).norm() < 1e-9);
        assert!(la.azimuths[1].abs() < 1e-9 || (la.azimuths[1] - std::f64::consts::TAU).abs() < 1e-9);
        assert!(la.elevations[1].abs() < 1e-9);
    }

    #[test]
    fn coincident_satellite_is_degenerate() {
        let rx = GeodeticPosition::from_degrees(1.0, 2.0, 3.0);
        let err = los_and_angles(&[geodetic_to_ecef(&rx)], &rx).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry(_)));
    }

    #[test]
    fn cutoff_is_monotone() {
        let el: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin() * 1.4).collect();
        let mut prev = above_cutoff(&el, -2.0).len();
        for k in 0..30 {
            let n = above_cutoff(&el, -2.0 + k as f64 * 0.12).len();
            assert!(n <= prev);
            prev = n;
        }
    }

    proptest! {
        #[test]
        fn geodetic_roundtrip(lat in -1.5707963f64..1.5707963, lon in -3.14159f64..3.14159, h in -100.0f64..1.0e6) {
            let g = GeodeticPosition::new(lat, lon, h);
            let p = geodetic_to_ecef(&g);
            let back = geodetic_to_ecef(&ecef_to_geodetic(&p));
            prop_assert!((back - p).norm() < 1e-6);
        }

        #[test]
        fn enu_preserves_norm(lat in -1.5f64..1.5, lon in -3.1f64..3.1, dx in -1e7f64..1e7, dy in -1e7f64..1e7, dz in -1e7f64..1e7) {
            let origin = GeodeticPosition::new(lat, lon, 0.0);
            let o = geodetic_to_ecef(&origin);
            let p = o + Vector3::new(dx, dy, dz);
            let enu = ecef_to_enu(&p, &origin);
            prop_assert!((enu.norm() - (p - o).norm()).abs() < 1e-9 * (p - o).norm().max(1.0));
        }

        #[test]
        fn los_rows_unit_norm(lat in -1.4f64..1.4, lon in -3.1f64..3.1, sx in -3e7f64..3e7, sy in -3e7f64..3e7, sz in -3e7f64..3e7) {
            let rx = GeodeticPosition::new(lat, lon, 0.0);
            let sat = Vector3::new(sx, sy, sz);
            prop_assume!((sat - geodetic_to_ecef(&rx)).norm() > 1.0);
            let la = los_and_angles(&[sat], &rx).unwrap();
            prop_assert!((la.los.rows()[0].norm() - 1.0).abs() < 1e-9);
        }
    }
}
