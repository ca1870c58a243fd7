//! Array attitude from carrier phases.
//!
//! Each body axis carries three collinear antennas (1-2-3 on x, 1-4-5 on y)
//! with unequal spacings. The difference of the two single differences gives
//! a short synthetic baseline that is unambiguous; it fixes the integers on
//! the two physical baselines, which are then averaged. The per-satellite
//! direction cosines are solved for the two body axes by least squares and the
//! result is projected onto SO(3).

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::frames::LosMatrix;
use crate::obs_sim::{ArrayEpoch, ArrayGeometry, NUM_ANTENNAS};
use crate::so3::RotationMatrix;

/// Slack allowed on `|u₀| ≤ 1` before a coarse estimate is rejected. Roughly
/// three standard deviations of the coarse cosine at 1 mm phase noise with the
/// default spacings.
pub const AMBIGUITY_MARGIN: f64 = 0.08;

/// Minimum number of satellites for an attitude fix.
pub const MIN_SATELLITES: usize = 3;

/// Carrier phases (cycles) per satellite and antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSet {
    phases: Vec<[f64; NUM_ANTENNAS]>,
    satellites: Vec<usize>,
}

impl PhaseSet {
    /// `satellites` labels each phase row; usually an index into an epoch.
    pub fn new(phases: Vec<[f64; NUM_ANTENNAS]>, satellites: Vec<usize>) -> Result<Self> {
        if phases.len() != satellites.len() {
            return Err(Error::Schema(format!(
                "{} phase rows for {} satellites",
                phases.len(),
                satellites.len()
            )));
        }
        if phases.iter().flatten().any(|p| !p.is_finite()) {
            return Err(Error::Schema("non-finite carrier phase".into()));
        }
        Ok(Self { phases, satellites })
    }

    pub fn from_epoch(epoch: &ArrayEpoch) -> Self {
        Self { phases: epoch.phases(), satellites: (0..epoch.len()).collect() }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self) -> &[[f64; NUM_ANTENNAS]] {
        &self.phases
    }

    pub fn satellites(&self) -> &[usize] {
        &self.satellites
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttitudeSolution {
    pub rotation: RotationMatrix,
    /// RMS of the wrapped single-difference misfit, cycles.
    pub residual: f64,
    /// Satellite labels (from the [`PhaseSet`]) that entered the fit.
    pub used_satellites: Vec<usize>,
}

/// Wraps a cycle count to (−0.5, 0.5].
pub fn wrap_cycles(x: f64) -> f64 {
    let y = x - x.round();
    if y <= -0.5 {
        y + 1.0
    } else {
        y
    }
}

/// Direction cosine between one body axis and a satellite's line of sight
/// from three collinear antennas `a`, `b`, `c` (phases in cycles) with
/// spacings `d_ab` and `d_bc`.
pub fn direction_cosine_per_axis(
    phi_a: f64,
    phi_b: f64,
    phi_c: f64,
    d_ab: f64,
    d_bc: f64,
    lambda: f64,
) -> Result<f64> {
    let short = d_ab - d_bc;
    if short == 0.0 || short.abs() > lambda / 2.0 {
        return Err(Error::InvalidGeometry(format!(
            "baseline difference {short} m outside (0, λ/2]"
        )));
    }
    let dab = wrap_cycles(phi_a - phi_b);
    let dbc = wrap_cycles(phi_b - phi_c);
    let coarse = lambda * wrap_cycles(dab - dbc) / short;
    if coarse.abs() > 1.0 + AMBIGUITY_MARGIN {
        return Err(Error::UnresolvableAmbiguity { sat: 0, coarse });
    }
    let n_ab = (d_ab * coarse / lambda - dab).round();
    let n_bc = (d_bc * coarse / lambda - dbc).round();
    let u = lambda * ((dab + n_ab) + (dbc + n_bc)) / (d_ab + d_bc);
    Ok(u.clamp(-1.0, 1.0))
}

/// Antenna pairs whose single differences enter the post-fit residual, with
/// the body axis (0 = x, 1 = y) and spacing of each pair.
fn residual_pairs(g: &ArrayGeometry) -> [(usize, usize, usize, f64); 4] {
    [(0, 1, 0, g.d12), (1, 2, 0, g.d23), (0, 3, 1, g.d14), (3, 4, 1, g.d45)]
}

/// An epoch prepared for repeated subset solves: direction cosines are
/// resolved once per satellite, so each subset fit is a 3×3 least-squares
/// problem plus a Procrustes step.
#[derive(Debug, Clone)]
pub struct PreparedPhases {
    geometry: ArrayGeometry,
    los: Vec<Vector3<f64>>,
    labels: Vec<usize>,
    /// `(u_x, u_y)` or `None` when the ambiguity could not be resolved.
    cosines: Vec<Option<(f64, f64)>>,
    /// Measured single differences for [`residual_pairs`], cycles.
    diffs: Vec<[f64; 4]>,
}

impl PreparedPhases {
    pub fn new(phases: &PhaseSet, geometry: &ArrayGeometry, h: &LosMatrix) -> Result<Self> {
        if h.len() != phases.len() {
            return Err(Error::Schema(format!(
                "LOS matrix has {} rows for {} satellites",
                h.len(),
                phases.len()
            )));
        }
        let g = *geometry;
        let lam = g.wavelength;
        let mut cosines = Vec::with_capacity(phases.len());
        let mut diffs = Vec::with_capacity(phases.len());
        for p in phases.phases() {
            let ux = direction_cosine_per_axis(p[0], p[1], p[2], g.d12, g.d23, lam);
            let uy = direction_cosine_per_axis(p[0], p[3], p[4], g.d14, g.d45, lam);
            cosines.push(match (ux, uy) {
                (Ok(x), Ok(y)) => Some((x, y)),
                (Err(Error::InvalidGeometry(m)), _) | (_, Err(Error::InvalidGeometry(m))) => {
                    return Err(Error::InvalidGeometry(m))
                }
                _ => None,
            });
            diffs.push(residual_pairs(&g).map(|(a, b, _, _)| p[a] - p[b]));
        }
        Ok(Self {
            geometry: g,
            los: h.rows().to_vec(),
            labels: phases.satellites().to_vec(),
            cosines,
            diffs,
        })
    }

    pub fn from_epoch(epoch: &ArrayEpoch, geometry: &ArrayGeometry) -> Result<Self> {
        Self::new(&PhaseSet::from_epoch(epoch), geometry, &epoch.los)
    }

    pub fn len(&self) -> usize {
        self.los.len()
    }

    pub fn is_empty(&self) -> bool {
        self.los.is_empty()
    }

    /// Whether the ambiguity of satellite `i` was resolved.
    pub fn resolvable(&self, i: usize) -> bool {
        self.cosines[i].is_some()
    }

    /// Direction cosines `(u_x, u_y)` of satellite `i`, if resolved.
    pub fn cosines(&self, i: usize) -> Option<(f64, f64)> {
        self.cosines[i]
    }

    /// Attitude from the satellites at positions `idx`. Unresolved satellites
    /// are skipped.
    pub fn solve(&self, idx: &[usize]) -> Result<AttitudeSolution> {
        let used: Vec<usize> = idx.iter().copied().filter(|&i| self.cosines[i].is_some()).collect();
        if used.len() < MIN_SATELLITES {
            if used.len() < idx.len() {
                return Err(Error::InsufficientSatellites { needed: MIN_SATELLITES, available: used.len() });
            }
            return Err(Error::DegenerateGeometry(format!(
                "{} satellites cannot fix three axes",
                used.len()
            )));
        }
        let mut ata = Matrix3::zeros();
        let mut atx = Vector3::zeros();
        let mut aty = Vector3::zeros();
        for &i in &used {
            let h = self.los[i];
            let (ux, uy) = self.cosines[i].expect("filtered");
            ata += h * h.transpose();
            atx += h * ux;
            aty += h * uy;
        }
        let eig = ata.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > 1e-10 * hi) {
            return Err(Error::DegenerateGeometry(format!(
                "line-of-sight matrix is rank deficient (eigenvalues {lo:.3e}..{hi:.3e})"
            )));
        }
        let inv = ata.try_inverse().ok_or_else(|| Error::DegenerateGeometry("singular normal matrix".into()))?;
        let bx = inv * atx;
        let by = inv * aty;
        let rotation = procrustes(&bx, &by)?;
        let residual = self.residual(&rotation, &used);
        Ok(AttitudeSolution {
            rotation,
            residual,
            used_satellites: used.iter().map(|&i| self.labels[i]).collect(),
        })
    }

    /// RMS wrapped single-difference misfit of `r` over satellites `idx`.
    pub fn residual(&self, r: &RotationMatrix, idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let axes = [r.column(0), r.column(1)];
        let lam = self.geometry.wavelength;
        let pairs = residual_pairs(&self.geometry);
        let mut sum = 0.0;
        for &i in idx {
            for (k, &(_, _, axis, d)) in pairs.iter().enumerate() {
                let predicted = d * self.los[i].dot(&axes[axis]) / lam;
                let e = wrap_cycles(self.diffs[i][k] - predicted);
                sum += e * e;
            }
        }
        (sum / (idx.len() * pairs.len()) as f64).sqrt()
    }
}

/// Rotation whose first two columns best fit `bx`, `by`.
pub fn procrustes(bx: &Vector3<f64>, by: &Vector3<f64>) -> Result<RotationMatrix> {
    let m = Matrix3::from_columns(&[*bx, *by, bx.cross(by)]);
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateGeometry("non-finite axis estimate".into()));
    }
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let d = (u * vt).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    Ok(RotationMatrix::from_matrix_unchecked(u * fix * vt))
}

/// Attitude of the array from all satellites in `phases`.
pub fn att_from_phase(phases: &PhaseSet, geometry: &ArrayGeometry, h: &LosMatrix) -> Result<AttitudeSolution> {
    let prepared = PreparedPhases::new(phases, geometry, h)?;
    let all: Vec<usize> = (0..prepared.len()).collect();
    prepared.solve(&all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{exp_so3, geodesic_distance};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Phases at the five antennas for a plane wave along `h` (planar model),
    /// with a per-antenna integer offset to exercise ambiguity handling.
    fn forward(r: &RotationMatrix, h: &Vector3<f64>, g: &ArrayGeometry, base: f64) -> [f64; 5] {
        std::array::from_fn(|k| {
            let off = r.rotate(&g.body_offset(k));
            base + (17 * k) as f64 - off.dot(h) / g.wavelength
        })
    }

    fn random_sky(n: usize, rng: &mut impl Rng) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                let el: f64 = rng.random_range(15f64.to_radians()..85f64.to_radians());
                let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                Vector3::new(el.cos() * az.sin(), el.cos() * az.cos(), el.sin())
            })
            .collect()
    }

    fn solve(r: &RotationMatrix, los: &[Vector3<f64>], g: &ArrayGeometry) -> Result<AttitudeSolution> {
        let phases = los.iter().enumerate().map(|(i, h)| forward(r, h, g, 1e3 * i as f64 + 0.37)).collect();
        let set = PhaseSet::new(phases, (0..los.len()).collect()).unwrap();
        att_from_phase(&set, g, &LosMatrix::from_rows(los.to_vec()))
    }

    #[test]
    fn wrap_cycles_range() {
        assert_eq!(wrap_cycles(0.5), 0.5);
        assert_eq!(wrap_cycles(-0.5), 0.5);
        assert!((wrap_cycles(3.25) - 0.25).abs() < 1e-12);
        assert!((wrap_cycles(-2.75) - 0.25).abs() < 1e-12);
    }

    fn cosine_from(u: f64, g: &ArrayGeometry) -> f64 {
        let lam = g.wavelength;
        let pa = 12.3;
        let pb = pa - g.d12 * u / lam + 5.0;
        let pc = pa - (g.d12 + g.d23) * u / lam - 3.0;
        direction_cosine_per_axis(pa, pb, pc, g.d12, g.d23, lam).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let g = ArrayGeometry::default();
        assert!(cosine_from(0.0, &g).abs() < 1e-12);
        assert!((cosine_from(0.6, &g) - 0.6).abs() < 1e-9);
        assert!((cosine_from(-0.6, &g) - -0.6).abs() < 1e-9);
        assert!((cosine_from(0.99, &g) - 0.99).abs() < 1e-9);
        assert!((cosine_from(-1.0, &g) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_with_phase_noise_near_baseline_direction() {
        let g = ArrayGeometry::default();
        let lam = g.wavelength;
        let sigma = 0.001 / lam;
        // refined cosine: u = λ(φa − φc)/(d12 + d23), so σ_u = √2·σ_φ·λ/(d12+d23)
        let bound = 3.0 * 2f64.sqrt() * sigma * lam / (g.d12 + g.d23);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = 0.95;
        let mut within = 0;
        for _ in 0..1000 {
            let n: [f64; 3] = std::array::from_fn(|_| sigma * rng.sample::<f64, _>(StandardNormal));
            let pa = 0.1 + n[0];
            let pb = 0.1 - g.d12 * u / lam + n[1];
            let pc = 0.1 - (g.d12 + g.d23) * u / lam + n[2];
            let est = direction_cosine_per_axis(pa, pb, pc, g.d12, g.d23, lam).unwrap();
            if (est - u).abs() <= bound {
                within += 1;
            }
        }
        assert!(within >= 990, "{within}");
    }

    #[test]
    fn coarse_out_of_range_is_unresolvable() {
        // a longer short-baseline lets the coarse estimate leave [-1, 1]
        let lam = 0.19;
        let (dab, dbc) = (0.30, 0.25);
        let est = direction_cosine_per_axis(0.0, 0.0, 0.47, dab, dbc, lam);
        assert!(matches!(est, Err(Error::UnresolvableAmbiguity { .. })), "{est:?}");
        let bad = direction_cosine_per_axis(0.0, 0.0, 0.0, 0.3, 0.3, lam);
        assert!(matches!(bad, Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn identity_and_yaw_recovery() {
        let g = ArrayGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let los = random_sky(7, &mut rng);
        for r in [RotationMatrix::identity(), RotationMatrix::rz(30f64.to_radians())] {
            let sol = solve(&r, &los, &g).unwrap();
            assert!(geodesic_distance(&sol.rotation, &r) < 1e-6);
            assert!(sol.residual < 1e-9);
            assert_eq!(sol.used_satellites.len(), 7);
        }
    }

    #[test]
    fn two_satellites_are_degenerate() {
        let g = ArrayGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let los = random_sky(2, &mut rng);
        let err = solve(&RotationMatrix::identity(), &los, &g).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry(_)));
    }

    #[test]
    fn coplanar_lines_of_sight_are_degenerate() {
        let g = ArrayGeometry::default();
        let los: Vec<_> = (0..5).map(|k| Vector3::new((k as f64).cos(), (k as f64).sin(), 0.0)).collect();
        let err = solve(&RotationMatrix::identity(), &los, &g).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry(_)));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(PhaseSet::new(vec![[0.0; 5]], vec![]).is_err());
        let set = PhaseSet::new(vec![[0.0; 5]; 3], vec![0, 1, 2]).unwrap();
        let h = LosMatrix::from_rows(vec![Vector3::z(); 2]);
        assert!(att_from_phase(&set, &ArrayGeometry::default(), &h).is_err());
    }

    #[test]
    fn contamination_raises_residual() {
        let g = ArrayGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let sigma = 0.001 / g.wavelength;
        let mut raised = 0;
        for _ in 0..1000 {
            let r = exp_so3(&Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-3.0..3.0)));
            let los = random_sky(7, &mut rng);
            let mut phases: Vec<[f64; 5]> = los.iter().map(|h| forward(&r, h, &g, 0.0)).collect();
            for p in phases.iter_mut().flatten() {
                *p += sigma * rng.sample::<f64, _>(StandardNormal);
            }
            let h = LosMatrix::from_rows(los.clone());
            let clean = att_from_phase(&PhaseSet::new(phases.clone(), (0..7).collect()).unwrap(), &g, &h).unwrap();
            // more than a quarter cycle on one antenna, varying across the array
            let k = rng.random_range(0..7);
            for (a, p) in phases[k].iter_mut().enumerate() {
                *p += (0.26 + 0.05 * a as f64) * if a % 2 == 0 { 1.0 } else { -1.0 };
            }
            let dirty = att_from_phase(&PhaseSet::new(phases, (0..7).collect()).unwrap(), &g, &h).unwrap();
            if dirty.residual > clean.residual {
                raised += 1;
            }
        }
        assert!(raised >= 950, "{raised}");
    }

    proptest! {
        #[test]
        fn zero_noise_recovery(seed in any::<u64>(), n in 4usize..10) {
            let g = ArrayGeometry::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let r = exp_so3(&(v * rng.random_range(0.0..3.1)));
            let los = random_sky(n, &mut rng);
            let h = LosMatrix::from_rows(los.clone());
            prop_assume!(h.to_matrix().svd(false, false).singular_values.min() > 0.2);
            let sol = solve(&r, &los, &g).unwrap();
            prop_assert!(geodesic_distance(&sol.rotation, &r) < 1e-6);
        }

        #[test]
        fn procrustes_is_orthonormal(a in prop::array::uniform3(-2.0f64..2.0), b in prop::array::uniform3(-2.0f64..2.0)) {
            let (bx, by) = (Vector3::from(a), Vector3::from(b));
            prop_assume!(bx.cross(&by).norm() > 1e-3);
            let r = procrustes(&bx, &by).unwrap();
            let m = r.matrix();
            prop_assert!((m.transpose() * m - Matrix3::identity()).norm() < 1e-9);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
        }
    }
}
