use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use super::canyon::{reflect_against_canyon, specular_excess, CanyonModel};
use super::multipath::{carrier_phase_error, excess_path_length, phase_delay, pseudorange_error, MultipathPath};
use super::{ArrayGeometry, NoiseConfig, ReceptionScenario, NUM_ANTENNAS};
use crate::constellation::GpsTime;
use crate::error::{Error, Result};
use crate::frames::{ecef_to_enu_rotation, enu_to_ecef, los_in_frame, EcefPosition, GeodeticPosition, LosMatrix};
use crate::so3::RotationMatrix;

/// True array pose: antenna 1 position in the ENU frame anchored at `frame`,
/// and the body-to-ENU attitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthPose {
    pub frame: GeodeticPosition,
    pub position: Vector3<f64>,
    pub attitude: RotationMatrix,
}

impl TruthPose {
    pub fn at_origin(frame: GeodeticPosition, attitude: RotationMatrix) -> Self {
        Self { frame, position: Vector3::zeros(), attitude }
    }
}

/// Reflections forced onto one satellite, bypassing the canyon model.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectedMultipath {
    pub prn: u32,
    /// Reflection points in local ENU relative to antenna 1.
    pub reflection_points: Vec<Vector3<f64>>,
    pub amplitudes: Vec<f64>,
    pub direct_blocked: bool,
}

/// Where multipath comes from for a generated epoch.
#[derive(Debug, Clone, Copy)]
pub enum Environment<'a> {
    Open,
    Canyon { model: &'a CanyonModel, heading: f64, along_track: f64 },
    Injected(&'a [InjectedMultipath]),
}

/// One satellite's observations at all five antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct SatObservation {
    pub prn: u32,
    pub position: EcefPosition,
    pub elevation: f64,
    pub azimuth: f64,
    /// Contaminated pseudorange per antenna, meters.
    pub pseudoranges: [f64; NUM_ANTENNAS],
    /// Contaminated carrier phase per antenna, cycles.
    pub phases: [f64; NUM_ANTENNAS],
    /// Geometric range per antenna, meters.
    pub true_ranges: [f64; NUM_ANTENNAS],
    /// Multipath-induced phase error per antenna, radians.
    pub phase_errors: [f64; NUM_ANTENNAS],
    /// Multipath-induced pseudorange error per antenna, meters.
    pub range_errors: [f64; NUM_ANTENNAS],
    pub scenario: ReceptionScenario,
    pub paths: Vec<MultipathPath>,
}

impl SatObservation {
    pub fn contaminated(&self) -> bool {
        self.scenario.is_contaminated()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayEpoch {
    pub time: GpsTime,
    /// ENU frame origin used for `los`.
    pub frame: GeodeticPosition,
    /// True antenna 1 position.
    pub receiver: EcefPosition,
    /// LOS rows in the same order as `sats`.
    pub los: LosMatrix,
    pub sats: Vec<SatObservation>,
}

impl ArrayEpoch {
    pub fn len(&self) -> usize {
        self.sats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sats.is_empty()
    }

    pub fn truth_labels(&self) -> Vec<bool> {
        self.sats.iter().map(SatObservation::contaminated).collect()
    }

    pub fn sat_positions(&self) -> Vec<EcefPosition> {
        self.sats.iter().map(|s| s.position).collect()
    }

    pub fn phases(&self) -> Vec<[f64; NUM_ANTENNAS]> {
        self.sats.iter().map(|s| s.phases).collect()
    }

    /// Keeps only satellites at the given indices (order preserved).
    pub fn subset(&self, idx: &[usize]) -> ArrayEpoch {
        ArrayEpoch {
            time: self.time,
            frame: self.frame,
            receiver: self.receiver,
            los: self.los.select(idx),
            sats: idx.iter().map(|&i| self.sats[i].clone()).collect(),
        }
    }
}

/// Per-antenna excess path and phase delay plus the shared amplitude.
struct RayAtArray {
    amplitude: f64,
    point_local: Vector3<f64>,
    excess: [f64; NUM_ANTENNAS],
}

/// Generates one epoch of array observations.
///
/// Satellites below `cutoff` (radians) or whose signal is blocked (including
/// destructive fading below the amplitude guard) are left out. Receiver clock
/// bias is zero. All antennas share each satellite's reception scenario.
#[allow(clippy::too_many_arguments)]
pub fn generate_epoch(
    truth: &TruthPose,
    time: GpsTime,
    sats: &[(u32, EcefPosition)],
    env: Environment<'_>,
    geometry: &ArrayGeometry,
    noise: &NoiseConfig,
    cutoff: f64,
    rng: &mut impl Rng,
) -> Result<ArrayEpoch> {
    let lambda = geometry.wavelength;
    let to_enu = ecef_to_enu_rotation(&truth.frame);
    let rx = enu_to_ecef(&truth.position, &truth.frame);
    let antenna_local: [Vector3<f64>; NUM_ANTENNAS] =
        std::array::from_fn(|r| truth.attitude.rotate(&geometry.body_offset(r)));
    let antenna_ecef: [EcefPosition; NUM_ANTENNAS] =
        std::array::from_fn(|r| rx + to_enu.transpose() * antenna_local[r]);

    let positions: Vec<EcefPosition> = sats.iter().map(|(_, p)| *p).collect();
    let angles = los_in_frame(&positions, &rx, &truth.frame)?;

    let mut out = Vec::new();
    let mut los_rows = Vec::new();
    for (i, &(prn, sat)) in sats.iter().enumerate() {
        if angles.elevations[i] < cutoff {
            continue;
        }
        let sat_local = to_enu * (sat - rx);
        let true_ranges: [f64; NUM_ANTENNAS] = std::array::from_fn(|r| (sat - antenna_ecef[r]).norm());

        let (blocked, rays) = trace(prn, &sat_local, &antenna_local, env, rng)?;
        let mut scenario = match (blocked, rays.is_empty()) {
            (false, true) => ReceptionScenario::Los,
            (false, false) => ReceptionScenario::Multipath,
            (true, false) => ReceptionScenario::Nlos,
            (true, true) => ReceptionScenario::Blocked,
        };

        let mut phase_errors = [0.0; NUM_ANTENNAS];
        let mut range_errors = [0.0; NUM_ANTENNAS];
        let mut phase_extra_cycles = [0.0; NUM_ANTENNAS];
        match scenario {
            ReceptionScenario::Multipath => {
                for r in 0..NUM_ANTENNAS {
                    let triples: Vec<(f64, f64, f64)> = rays
                        .iter()
                        .map(|ray| (ray.amplitude, ray.excess[r], phase_delay(ray.excess[r], lambda)))
                        .collect();
                    let pairs: Vec<(f64, f64)> = triples.iter().map(|&(a, _, p)| (a, p)).collect();
                    match (carrier_phase_error(&pairs), pseudorange_error(&triples)) {
                        (Ok(psi), Ok(dp)) => {
                            phase_errors[r] = psi;
                            range_errors[r] = dp;
                            phase_extra_cycles[r] = psi / std::f64::consts::TAU;
                        }
                        _ => {
                            scenario = ReceptionScenario::Blocked;
                            break;
                        }
                    }
                }
            }
            ReceptionScenario::Nlos => {
                // Only reflections arrive; the strongest one carries the signal.
                let main = rays
                    .iter()
                    .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
                    .expect("nlos has a ray");
                for r in 0..NUM_ANTENNAS {
                    range_errors[r] = main.excess[r];
                    phase_extra_cycles[r] = main.excess[r] / lambda;
                    phase_errors[r] = phase_delay(main.excess[r], lambda);
                }
            }
            _ => {}
        }
        if scenario == ReceptionScenario::Blocked {
            continue;
        }

        let mut pseudoranges = [0.0; NUM_ANTENNAS];
        let mut phases = [0.0; NUM_ANTENNAS];
        for r in 0..NUM_ANTENNAS {
            let n_pr: f64 = rng.sample(StandardNormal);
            let n_ph: f64 = rng.sample(StandardNormal);
            pseudoranges[r] = true_ranges[r] + range_errors[r] + noise.sigma_pseudorange * n_pr;
            phases[r] = true_ranges[r] / lambda + phase_extra_cycles[r] + noise.sigma_phase * n_ph / lambda;
        }

        let paths = rays
            .iter()
            .map(|ray| MultipathPath {
                amplitude: ray.amplitude,
                reflection_point: rx + to_enu.transpose() * ray.point_local,
                excess: ray.excess,
                phase_delay: ray.excess.map(|d| phase_delay(d, lambda)),
                arrival: ray.point_local.normalize(),
            })
            .collect();

        los_rows.push(angles.los.rows()[i]);
        out.push(SatObservation {
            prn,
            position: sat,
            elevation: angles.elevations[i],
            azimuth: angles.azimuths[i],
            pseudoranges,
            phases,
            true_ranges,
            phase_errors,
            range_errors,
            scenario,
            paths,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyEpoch);
    }
    Ok(ArrayEpoch {
        time,
        frame: truth.frame,
        receiver: rx,
        los: LosMatrix::from_rows(los_rows),
        sats: out,
    })
}

fn trace(
    prn: u32,
    sat_local: &Vector3<f64>,
    antennas: &[Vector3<f64>; NUM_ANTENNAS],
    env: Environment<'_>,
    rng: &mut impl Rng,
) -> Result<(bool, Vec<RayAtArray>)> {
    match env {
        Environment::Open => Ok((false, Vec::new())),
        Environment::Canyon { model, heading, along_track } => {
            let hit = reflect_against_canyon(sat_local, &antennas[0], model, heading, along_track, rng);
            let rays = hit
                .reflections
                .iter()
                .map(|w| RayAtArray {
                    amplitude: w.amplitude,
                    point_local: w.point,
                    excess: std::array::from_fn(|r| {
                        if r == 0 {
                            w.excess
                        } else {
                            specular_excess(w.wall, sat_local, &antennas[r], model, heading).unwrap_or(w.excess)
                        }
                    }),
                })
                .collect();
            Ok((hit.direct_blocked, rays))
        }
        Environment::Injected(list) => {
            let Some(inj) = list.iter().find(|m| m.prn == prn) else {
                return Ok((false, Vec::new()));
            };
            let mut rays = Vec::with_capacity(inj.reflection_points.len());
            for (o, &a) in inj.reflection_points.iter().zip(&inj.amplitudes) {
                let mut excess = [0.0; NUM_ANTENNAS];
                for r in 0..NUM_ANTENNAS {
                    excess[r] = excess_path_length(sat_local, &antennas[r], o)?;
                }
                rays.push(RayAtArray { amplitude: a, point_local: *o, excess });
            }
            Ok((inj.direct_blocked, rays))
        }
    }
}
