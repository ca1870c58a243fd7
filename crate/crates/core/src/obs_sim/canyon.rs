//! Straight urban canyon: two vertical façades parallel to the vehicle
//! heading, building heights drawn per 10 m façade segment from a Rayleigh
//! distribution. Reflections use the mirror-image construction.
//!
//! All vectors here live in a local East-North-Up frame whose origin is the
//! reference antenna (antenna 1); the ground is `antenna_height` below it.

use nalgebra::Vector3;
use rand::Rng;

use super::multipath::excess_path_length;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanyonPreset {
    /// No buildings at all.
    Open,
    Suburban,
    Urban,
}

impl CanyonPreset {
    /// `(street half-width, Rayleigh scale)` in meters.
    pub fn parameters(self) -> (f64, f64) {
        match self {
            CanyonPreset::Open => (15.0, 0.0),
            CanyonPreset::Suburban => (15.0, 8.0),
            CanyonPreset::Urban => (10.0, 20.0),
        }
    }
}

impl std::str::FromStr for CanyonPreset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "open" => Ok(Self::Open),
            "suburban" => Ok(Self::Suburban),
            "urban" => Ok(Self::Urban),
            other => Err(format!("unknown canyon preset '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wall {
    Left,
    Right,
}

impl Wall {
    fn opposite(self) -> Wall {
        match self {
            Wall::Left => Wall::Right,
            Wall::Right => Wall::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanyonModel {
    pub half_width_left: f64,
    pub half_width_right: f64,
    pub segment_length: f64,
    /// Building height per façade segment, indexed by along-street position
    /// (wrapping around at the end).
    pub heights_left: Vec<f64>,
    pub heights_right: Vec<f64>,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    pub antenna_height: f64,
    /// Maximum reflected paths kept per satellite.
    pub max_paths: usize,
}

/// Draws from a Rayleigh distribution by inverse transform.
fn rayleigh(scale: f64, rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random();
    scale * (-2.0 * (1.0 - u).ln()).sqrt()
}

impl CanyonModel {
    /// Canyon with constant building heights on both sides.
    pub fn uniform(half_width: f64, height: f64) -> Self {
        Self::with_heights(half_width, half_width, vec![height], vec![height])
    }

    pub fn with_heights(
        half_width_left: f64,
        half_width_right: f64,
        heights_left: Vec<f64>,
        heights_right: Vec<f64>,
    ) -> Self {
        Self {
            half_width_left,
            half_width_right,
            segment_length: 10.0,
            heights_left,
            heights_right,
            amplitude_min: 0.2,
            amplitude_max: 0.8,
            antenna_height: 1.5,
            max_paths: 2,
        }
    }

    /// Samples `segments` façade heights per side for the given street shape.
    pub fn sample(half_width: f64, rayleigh_scale: f64, segments: usize, rng: &mut impl Rng) -> Self {
        let n = segments.max(1);
        let left = (0..n).map(|_| rayleigh(rayleigh_scale, rng)).collect();
        let right = (0..n).map(|_| rayleigh(rayleigh_scale, rng)).collect();
        Self::with_heights(half_width, half_width, left, right)
    }

    pub fn from_preset(preset: CanyonPreset, segments: usize, rng: &mut impl Rng) -> Self {
        let (w, scale) = preset.parameters();
        Self::sample(w, scale, segments, rng)
    }

    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.half_width_left > 0.0
            && self.half_width_right > 0.0
            && self.segment_length > 0.0
            && self.heights_left.iter().chain(&self.heights_right).all(|&h| h >= 0.0)
            && self.amplitude_min >= 0.0
            && self.amplitude_min <= self.amplitude_max;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config("invalid canyon parameters".into()))
        }
    }

    /// Building height on `wall` at along-street coordinate `s` (meters).
    pub fn height_at(&self, wall: Wall, s: f64) -> f64 {
        let h = match wall {
            Wall::Left => &self.heights_left,
            Wall::Right => &self.heights_right,
        };
        if h.is_empty() {
            return 0.0;
        }
        let idx = (s / self.segment_length).floor() as i64;
        h[idx.rem_euclid(h.len() as i64) as usize]
    }

    /// Outward (into the building) normal and plane offset: the façade is
    /// `{p : n·p = offset}` and the street is `n·p < offset`.
    fn plane(&self, wall: Wall, heading: f64) -> (Vector3<f64>, f64) {
        let left = Vector3::new(-heading.sin(), heading.cos(), 0.0);
        match wall {
            Wall::Left => (left, self.half_width_left),
            Wall::Right => (-left, self.half_width_right),
        }
    }
}

/// A valid specular reflection for one antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct WallReflection {
    pub wall: Wall,
    /// Reflection point (local ENU).
    pub point: Vector3<f64>,
    pub excess: f64,
    /// Unit vector from the antenna toward the reflection point.
    pub arrival: Vector3<f64>,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CanyonReflection {
    pub direct_blocked: bool,
    pub reflections: Vec<WallReflection>,
}

/// Geometry of the vehicle inside the canyon.
#[derive(Debug, Clone, Copy)]
struct Street<'a> {
    canyon: &'a CanyonModel,
    heading: f64,
    along_track: f64,
}

impl Street<'_> {
    fn along(&self, p: &Vector3<f64>) -> f64 {
        self.along_track + p.x * self.heading.cos() + p.y * self.heading.sin()
    }

    /// True when the ray `from + τ·dir` (τ > 0) hits `wall` below its roof line.
    fn ray_hits_wall(&self, wall: Wall, from: &Vector3<f64>, dir: &Vector3<f64>) -> bool {
        let (n, off) = self.canyon.plane(wall, self.heading);
        let closing = dir.dot(&n);
        if closing <= 0.0 {
            return false;
        }
        let tau = (off - from.dot(&n)) / closing;
        if tau < 0.0 {
            return false;
        }
        let p = from + dir * tau;
        p.z + self.canyon.antenna_height < self.canyon.height_at(wall, self.along(&p))
    }

    /// Specular point on `wall` for the path `sat → wall → antenna`.
    fn specular_point(&self, wall: Wall, sat: &Vector3<f64>, antenna: &Vector3<f64>) -> Option<Vector3<f64>> {
        let (n, off) = self.canyon.plane(wall, self.heading);
        if sat.dot(&n) >= off || antenna.dot(&n) >= off {
            return None;
        }
        let mirror = sat - n * (2.0 * (sat.dot(&n) - off));
        let denom = (mirror - antenna).dot(&n);
        if denom <= 0.0 {
            return None;
        }
        let tau = (off - antenna.dot(&n)) / denom;
        if !(0.0..1.0).contains(&tau) {
            return None;
        }
        Some(antenna + (mirror - antenna) * tau)
    }
}

/// Traces the direct ray and single-bounce reflections off both façades for
/// one antenna. `sat` and `antenna` are local ENU vectors relative to the
/// reference antenna; `heading` is the street direction (radians,
/// counter-clockwise from East) and `along_track` the distance travelled
/// along the street, which selects the façade segments.
pub fn reflect_against_canyon(
    sat: &Vector3<f64>,
    antenna: &Vector3<f64>,
    canyon: &CanyonModel,
    heading: f64,
    along_track: f64,
    rng: &mut impl Rng,
) -> CanyonReflection {
    let street = Street { canyon, heading, along_track };
    let los = (sat - antenna).normalize();
    let direct_blocked = [Wall::Left, Wall::Right]
        .iter()
        .any(|&w| street.ray_hits_wall(w, antenna, &los));

    let mut reflections = Vec::new();
    for wall in [Wall::Left, Wall::Right] {
        if reflections.len() >= canyon.max_paths {
            break;
        }
        let Some(o) = street.specular_point(wall, sat, antenna) else { continue };
        let ground_height = o.z + canyon.antenna_height;
        if ground_height < 0.0 || ground_height > canyon.height_at(wall, street.along(&o)) {
            continue;
        }
        let incoming = (sat - o).normalize();
        if street.ray_hits_wall(wall.opposite(), &o, &incoming) {
            continue;
        }
        let Ok(excess) = excess_path_length(sat, antenna, &o) else { continue };
        let amplitude = if canyon.amplitude_max > canyon.amplitude_min {
            rng.random_range(canyon.amplitude_min..=canyon.amplitude_max)
        } else {
            canyon.amplitude_min
        };
        reflections.push(WallReflection {
            wall,
            point: o,
            excess,
            arrival: (o - antenna).normalize(),
            amplitude,
        });
    }
    CanyonReflection { direct_blocked, reflections }
}

/// Excess path via the specular point on `wall` for an arbitrary antenna.
pub(crate) fn specular_excess(
    wall: Wall,
    sat: &Vector3<f64>,
    antenna: &Vector3<f64>,
    canyon: &CanyonModel,
    heading: f64,
) -> Option<f64> {
    let street = Street { canyon, heading, along_track: 0.0 };
    let o = street.specular_point(wall, sat, antenna)?;
    excess_path_length(sat, antenna, &o).ok()
}
