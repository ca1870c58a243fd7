//! Single point positioning from pseudoranges by Gauss-Newton.

use nalgebra::{DMatrix, DVector, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::frames::EcefPosition;

pub const MAX_ITERATIONS: usize = 20;
/// Converged once the position/clock step is shorter than this, meters.
pub const STEP_TOLERANCE: f64 = 1e-4;
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct SppSolution {
    pub position: EcefPosition,
    /// Receiver clock bias expressed in meters.
    pub clock_bias: f64,
    /// Post-fit residuals `ρ − (‖s − x‖ + b)`, one per satellite.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

impl SppSolution {
    pub fn residual_rms(&self) -> f64 {
        if self.residuals.is_empty() {
            return 0.0;
        }
        (self.residuals.iter().map(|r| r * r).sum::<f64>() / self.residuals.len() as f64).sqrt()
    }
}

fn linearize(pr: &[f64], sats: &[EcefPosition], x: &Vector4<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let p = Vector3::new(x[0], x[1], x[2]);
    let n = pr.len();
    let mut g = DMatrix::zeros(n, 4);
    let mut r = DVector::zeros(n);
    for i in 0..n {
        let d = sats[i] - p;
        let range = d.norm();
        let u = d / range;
        g[(i, 0)] = -u.x;
        g[(i, 1)] = -u.y;
        g[(i, 2)] = -u.z;
        g[(i, 3)] = 1.0;
        r[i] = pr[i] - (range + x[3]);
    }
    (g, r)
}

/// Solves position and clock bias from `pseudoranges` (meters) to satellites
/// at `sat_positions`, starting from `initial` with zero clock.
pub fn spp_solve(pseudoranges: &[f64], sat_positions: &[EcefPosition], initial: &EcefPosition) -> Result<SppSolution> {
    spp_solve_with_limit(pseudoranges, sat_positions, initial, MAX_ITERATIONS)
}

/// [`spp_solve`] with a caller-chosen iteration limit.
pub fn spp_solve_with_limit(
    pseudoranges: &[f64],
    sat_positions: &[EcefPosition],
    initial: &EcefPosition,
    max_iterations: usize,
) -> Result<SppSolution> {
    if pseudoranges.len() != sat_positions.len() {
        return Err(Error::Schema(format!(
            "{} pseudoranges for {} satellites",
            pseudoranges.len(),
            sat_positions.len()
        )));
    }
    let n = pseudoranges.len();
    if n < 4 {
        return Err(Error::InsufficientSatellites { needed: 4, available: n });
    }
    if pseudoranges.iter().any(|p| !p.is_finite()) {
        return Err(Error::Schema("non-finite pseudorange".into()));
    }
    let mut x = Vector4::new(initial.x, initial.y, initial.z, 0.0);
    for it in 1..=max_iterations {
        let (g, r) = linearize(pseudoranges, sat_positions, &x);
        let svd = g.clone().svd(true, true);
        let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(cond <= MAX_CONDITION) {
            return Err(Error::IllConditioned(cond));
        }
        let dx = svd.solve(&r, 0.0).map_err(|e| Error::DegenerateGeometry(e.to_string()))?;
        let step = Vector4::new(dx[0], dx[1], dx[2], dx[3]);
        x += step;
        if !x.iter().all(|v| v.is_finite()) {
            break;
        }
        if step.norm() < STEP_TOLERANCE {
            let (_, r) = linearize(pseudoranges, sat_positions, &x);
            return Ok(SppSolution {
                position: Vector3::new(x[0], x[1], x[2]),
                clock_bias: x[3],
                residuals: r.iter().copied().collect(),
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iterations,
        last_position: [x[0], x[1], x[2]],
        last_clock: x[3],
    })
}
