//! Coordinates, angles, wave vectors, moving regions and mover profiles.
//!
//! Positions are stored in meters. The carrier wavelength is a scenario
//! parameter carried by the channel and array types, never folded into
//! coordinates.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point in a local antenna coordinate system, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub const ORIGIN: Position3D = Position3D {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// A point in the `z = 0` plane.
    pub const fn xy(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &Position3D) -> f64 {
        (*self - *other).norm()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl Add for Position3D {
    type Output = Position3D;
    fn add(self, o: Position3D) -> Position3D {
        Position3D::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Position3D {
    type Output = Position3D;
    fn sub(self, o: Position3D) -> Position3D {
        Position3D::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Position3D {
    type Output = Position3D;
    fn mul(self, s: f64) -> Position3D {
        Position3D::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Elevation and azimuth of a propagation path, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathAngles {
    /// In `[-π/2, π/2]`.
    pub elevation: f64,
    /// In `[-π, π)`.
    pub azimuth: f64,
}

impl PathAngles {
    pub fn new(elevation: f64, azimuth: f64) -> Result<Self> {
        let a = Self { elevation, azimuth };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.elevation.is_finite() && (-FRAC_PI_2..=FRAC_PI_2).contains(&self.elevation)) {
            return Err(Error::Domain(format!(
                "elevation {} outside [-π/2, π/2]",
                self.elevation
            )));
        }
        if !(self.azimuth.is_finite() && self.azimuth >= -PI && self.azimuth < PI) {
            return Err(Error::Domain(format!(
                "azimuth {} outside [-π, π)",
                self.azimuth
            )));
        }
        Ok(())
    }

    /// Inverse of [`virtual_angles`] on the upper hemisphere (`elevation ≥ 0`).
    ///
    /// Requires `vx² + vy² ≤ 1`.
    pub fn from_virtual(vx: f64, vy: f64) -> Result<Self> {
        let rho = vx.hypot(vy);
        if !(rho <= 1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "virtual angle pair ({vx}, {vy}) lies outside the unit disk"
            )));
        }
        let elevation = rho.min(1.0).acos();
        let mut azimuth = vy.atan2(vx);
        if azimuth >= PI {
            azimuth -= 2.0 * PI;
        }
        Self::new(elevation, azimuth)
    }

    /// Uniform draw over the full valid ranges.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            elevation: rng.random_range(-FRAC_PI_2..=FRAC_PI_2),
            azimuth: rng.random_range(-PI..PI),
        }
    }
}

/// Unit propagation direction `[cosθcosφ, cosθsinφ, sinθ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveVector {
    pub kx: f64,
    pub ky: f64,
    pub kz: f64,
}

impl WaveVector {
    pub fn dot(&self, p: &Position3D) -> f64 {
        self.kx * p.x + self.ky * p.y + self.kz * p.z
    }

    pub fn norm(&self) -> f64 {
        (self.kx * self.kx + self.ky * self.ky + self.kz * self.kz).sqrt()
    }
}

/// Wave vector for a path, rejecting out-of-range angles.
pub fn wave_vector(angles: PathAngles) -> Result<WaveVector> {
    angles.validate()?;
    Ok(wave_vector_unchecked(&angles))
}

pub(crate) fn wave_vector_unchecked(angles: &PathAngles) -> WaveVector {
    let (st, ct) = angles.elevation.sin_cos();
    let (sp, cp) = angles.azimuth.sin_cos();
    WaveVector {
        kx: ct * cp,
        ky: ct * sp,
        kz: st,
    }
}

/// Virtual elevation/azimuth `(cosθcosφ, cosθsinφ)`: the x and y direction cosines.
pub fn virtual_angles(angles: PathAngles) -> Result<(f64, f64)> {
    let k = wave_vector(angles)?;
    Ok((k.kx, k.ky))
}

/// Box-shaped region where antennas may be placed, with a minimum pairwise spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingRegion {
    pub lower: Position3D,
    pub upper: Position3D,
    pub min_spacing: f64,
}

impl MovingRegion {
    pub fn new(lower: Position3D, upper: Position3D, min_spacing: f64) -> Result<Self> {
        let r = Self {
            lower,
            upper,
            min_spacing,
        };
        r.validate()?;
        Ok(r)
    }

    /// Region that must hold `n_antennas` at the stated spacing.
    pub fn for_antennas(
        lower: Position3D,
        upper: Position3D,
        min_spacing: f64,
        n_antennas: usize,
    ) -> Result<Self> {
        let r = Self::new(lower, upper, min_spacing)?;
        r.ensure_capacity(n_antennas)?;
        Ok(r)
    }

    /// Square of side `side` in the `z = 0` plane, centered at the origin.
    pub fn centered_square(side: f64, min_spacing: f64) -> Result<Self> {
        let h = side / 2.0;
        Self::new(Position3D::xy(-h, -h), Position3D::xy(h, h), min_spacing)
    }

    /// Line segment `[start, end]` along the x axis.
    pub fn segment_x(start: f64, end: f64, min_spacing: f64) -> Result<Self> {
        Self::new(
            Position3D::xy(start, 0.0),
            Position3D::xy(end, 0.0),
            min_spacing,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite()) {
            return Err(Error::Config("region corners must be finite".into()));
        }
        if self.lower.x > self.upper.x || self.lower.y > self.upper.y || self.lower.z > self.upper.z
        {
            return Err(Error::Config(
                "region lower corner must not exceed upper corner".into(),
            ));
        }
        if !(self.min_spacing >= 0.0 && self.min_spacing.is_finite()) {
            return Err(Error::Config(format!(
                "min_spacing {} must be finite and non-negative",
                self.min_spacing
            )));
        }
        Ok(())
    }

    pub fn extent(&self) -> Position3D {
        self.upper - self.lower
    }

    pub fn center(&self) -> Position3D {
        (self.lower + self.upper) * 0.5
    }

    /// Length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        self.extent().norm()
    }

    pub fn contains(&self, p: &Position3D, tol: f64) -> bool {
        p.x >= self.lower.x - tol
            && p.x <= self.upper.x + tol
            && p.y >= self.lower.y - tol
            && p.y <= self.upper.y + tol
            && p.z >= self.lower.z - tol
            && p.z <= self.upper.z + tol
    }

    /// Number of points of the cubic lattice with pitch `min_spacing` that fit in the box.
    ///
    /// This is a constructive lower bound on how many antennas the region can host.
    pub fn lattice_capacity(&self) -> usize {
        if self.min_spacing == 0.0 {
            return usize::MAX;
        }
        let e = self.extent();
        [e.x, e.y, e.z].iter().fold(1usize, |acc, &len| {
            let per_axis = (len / self.min_spacing + 1e-9).floor() as usize + 1;
            acc.saturating_mul(per_axis)
        })
    }

    pub fn ensure_capacity(&self, n_antennas: usize) -> Result<()> {
        if n_antennas > self.lattice_capacity() {
            return Err(Error::Infeasible(format!(
                "region cannot hold {n_antennas} antennas at spacing {}",
                self.min_spacing
            )));
        }
        Ok(())
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Position3D {
        let mut draw = |lo: f64, hi: f64| {
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        };
        Position3D::new(
            draw(self.lower.x, self.upper.x),
            draw(self.lower.y, self.upper.y),
            draw(self.lower.z, self.upper.z),
        )
    }

    /// Checks box membership and pairwise spacing (with absolute slack `tol`).
    pub fn check_feasible(&self, positions: &[Position3D], tol: f64) -> Result<()> {
        for (i, p) in positions.iter().enumerate() {
            if !self.contains(p, tol) {
                return Err(Error::Constraint(format!(
                    "antenna {i} at {p:?} lies outside the region"
                )));
            }
        }
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                let d = positions[i].distance(&positions[j]);
                if d < self.min_spacing - tol {
                    return Err(Error::Constraint(format!(
                        "antennas {i} and {j} are {d} apart, below min spacing {}",
                        self.min_spacing
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Componentwise projection of `p` onto the region box.
pub fn clamp_to_region(p: Position3D, region: &MovingRegion) -> Position3D {
    Position3D::new(
        p.x.clamp(region.lower.x, region.upper.x),
        p.y.clamp(region.lower.y, region.upper.y),
        p.z.clamp(region.lower.z, region.upper.z),
    )
}

/// Hardware family used to move the antenna.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoverArchitecture {
    Motor,
    Mems,
    Liquid,
    ElectronicReconfigurable,
    MovableArray,
}

/// Movement-time and accuracy envelope of a mover architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoverProfile {
    pub architecture: MoverArchitecture,
    /// Fastest and slowest response time, seconds.
    pub response_time_range: (f64, f64),
    /// Positioning accuracy, meters.
    pub positioning_accuracy: f64,
    /// Distance, in meters, whose traverse takes the slowest response time.
    pub full_traverse: f64,
}

/// Default full-traverse distance: a 5λ region at λ = 1 cm.
pub const DEFAULT_TRAVERSE: f64 = 0.05;

impl MoverProfile {
    pub fn new(
        architecture: MoverArchitecture,
        response_time_range: (f64, f64),
        positioning_accuracy: f64,
        full_traverse: f64,
    ) -> Result<Self> {
        let (lo, hi) = response_time_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!(
                "invalid response-time range ({lo}, {hi})"
            )));
        }
        if !(positioning_accuracy > 0.0) {
            return Err(Error::Config(
                "positioning accuracy must be positive".into(),
            ));
        }
        if !(full_traverse > 0.0) {
            return Err(Error::Config(
                "full traverse distance must be positive".into(),
            ));
        }
        Ok(Self {
            architecture,
            response_time_range,
            positioning_accuracy,
            full_traverse,
        })
    }

    /// Stepper/servo-driven element: milliseconds to seconds, micrometer accuracy.
    pub fn motor() -> Self {
        Self::preset(MoverArchitecture::Motor, (1e-3, 1.0), 1e-6)
    }

    /// MEMS actuator: microseconds to milliseconds, micrometer to nanometer accuracy.
    pub fn mems() -> Self {
        Self::preset(MoverArchitecture::Mems, (1e-6, 1e-3), 1e-7)
    }

    /// Syringe, nanopump or electrowetting driven liquid metal.
    pub fn liquid() -> Self {
        Self::preset(MoverArchitecture::Liquid, (1e-3, 1.0), 1e-6)
    }

    /// Phase-center switching (dual-mode patch, PIN diodes, pixel antennas).
    pub fn electronic() -> Self {
        Self::preset(
            MoverArchitecture::ElectronicReconfigurable,
            (1e-9, 1e-3),
            1e-6,
        )
    }

    /// Sliding, rotatable or foldable arrays.
    pub fn movable_array() -> Self {
        Self::preset(MoverArchitecture::MovableArray, (1e-3, 1.0), 1e-6)
    }

    fn preset(architecture: MoverArchitecture, range: (f64, f64), accuracy: f64) -> Self {
        Self {
            architecture,
            response_time_range: range,
            positioning_accuracy: accuracy,
            full_traverse: DEFAULT_TRAVERSE,
        }
    }

    pub fn with_full_traverse(mut self, distance: f64) -> Self {
        self.full_traverse = distance;
        self
    }
}

/// Time to move an antenna between two points.
///
/// Linear in distance at the speed that covers `full_traverse` in the
/// slowest response time, floored at the fastest response time and capped at
/// the slowest. A zero move takes no time.
pub fn movement_time(profile: &MoverProfile, from: Position3D, to: Position3D) -> f64 {
    let d = from.distance(&to);
    if d == 0.0 {
        return 0.0;
    }
    let (lo, hi) = profile.response_time_range;
    let speed = profile.full_traverse / hi;
    (d / speed).clamp(lo, hi)
}
