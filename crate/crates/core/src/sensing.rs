//! Sensing metrics for movable-antenna arrays.
//!
//! The primary target parameter is the x direction cosine `u = cosθ cosφ`
//! (spatial frequency). Angle-domain values follow by the chain rule through
//! the azimuth `φ` at fixed elevation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{wave_vector, MovingRegion, PathAngles, Position3D};
use crate::linalg::complement_projector;
use crate::{Error, Result};

/// Positions closer than this are treated as the same antenna.
pub const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    positions: Vec<Position3D>,
    wavelength: f64,
}

impl ArrayGeometry {
    /// Validated geometry: at least one finite position, pairwise distinct.
    pub fn new(positions: Vec<Position3D>, wavelength: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config(
                "array geometry needs at least one position".into(),
            ));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::Config("wavelength must be positive".into()));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("array positions must be finite".into()));
        }
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                if positions[i].distance(&positions[j]) <= DEDUP_TOL {
                    return Err(Error::Config(format!("antennas {i} and {j} coincide")));
                }
            }
        }
        Ok(Self {
            positions,
            wavelength,
        })
    }

    /// `n` elements at pitch `spacing` along x, starting at the origin.
    pub fn uniform_line(n: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        Self::new(
            (0..n)
                .map(|i| Position3D::xy(i as f64 * spacing, 0.0))
                .collect(),
            wavelength,
        )
    }

    pub fn positions(&self) -> &[Position3D] {
        &self.positions
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// All positions multiplied by `c`.
    pub fn dilated(&self, c: f64) -> Result<Self> {
        Self::new(
            self.positions.iter().map(|p| *p * c).collect(),
            self.wavelength,
        )
    }

    fn kappa(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

/// `a_n = exp(j κ kᵀ p_n)`.
pub fn steering_vector(geom: &ArrayGeometry, angle: PathAngles) -> Result<DVector<Complex64>> {
    let k = wave_vector(angle)?;
    let kappa = geom.kappa();
    Ok(DVector::from_iterator(
        geom.len(),
        geom.positions
            .iter()
            .map(|p| Complex64::from_polar(1.0, kappa * k.dot(p))),
    ))
}

/// `∂a/∂u = j κ x_n a_n`, the derivative with respect to the x direction cosine.
pub fn sensitivity_vector(geom: &ArrayGeometry, angle: PathAngles) -> Result<DVector<Complex64>> {
    let a = steering_vector(geom, angle)?;
    let kappa = geom.kappa();
    Ok(DVector::from_iterator(
        geom.len(),
        geom.positions
            .iter()
            .zip(a.iter())
            .map(|(p, a)| a * Complex64::new(0.0, kappa * p.x)),
    ))
}

/// Weights `a(steer)/N` that steer the beam toward azimuth `steer` in the `θ = 0` plane.
pub fn matched_weights(geom: &ArrayGeometry, steer: f64) -> Result<DVector<Complex64>> {
    let a = steering_vector(geom, PathAngles::new(0.0, steer)?)?;
    Ok(a / Complex64::new(geom.len() as f64, 0.0))
}

/// Minimum number of grid points inside the −3 dB mainlobe.
pub const MIN_MAINLOBE_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamPattern {
    /// `|wᴴa(φ)|²` in dB relative to the steered azimuth.
    pub pattern_db: Vec<f64>,
    /// −3 dB width in radians of azimuth.
    pub mainlobe_width: f64,
    /// Largest level outside the first nulls, in dB (−∞ when there is none).
    pub peak_sidelobe: f64,
}

/// Beam pattern over an azimuth grid in the `θ = 0` plane, normalized at azimuth `steer`.
///
/// `angle_grid` must be strictly increasing.
pub fn beam_pattern(
    geom: &ArrayGeometry,
    weights: &DVector<Complex64>,
    angle_grid: &[f64],
    steer: f64,
) -> Result<BeamPattern> {
    if weights.len() != geom.len() {
        return Err(Error::Dimension(format!(
            "{} weights for {} antennas",
            weights.len(),
            geom.len()
        )));
    }
    if angle_grid.len() < 3 || angle_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Resolution(
            "angle grid must be strictly increasing with at least 3 points".into(),
        ));
    }
    if geom.len() < 2 {
        return Err(Error::Resolution(
            "a single antenna has a flat pattern; mainlobe width is undefined".into(),
        ));
    }
    let gain = |phi: f64| -> Result<f64> {
        let a = steering_vector(geom, PathAngles::new(0.0, phi)?)?;
        Ok(weights.dotc(&a).norm_sqr())
    };
    let reference = gain(steer)?;
    if !(reference > 0.0) {
        return Err(Error::UndefinedMetric(
            "weights place a null at the steered angle".into(),
        ));
    }
    let pattern_db: Vec<f64> = angle_grid
        .iter()
        .map(|&phi| gain(phi).map(|g| 10.0 * (g / reference).log10()))
        .collect::<Result<_>>()?;

    let center = angle_grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - steer).abs().total_cmp(&(b.1 - steer).abs()))
        .map(|(i, _)| i)
        .expect("non-empty grid");

    // −3 dB crossings, linearly interpolated in dB.
    let crossing = |dir: isize| -> Option<(usize, f64)> {
        let mut i = center as isize;
        loop {
            let next = i + dir;
            if next < 0 || next as usize >= angle_grid.len() {
                return None;
            }
            let (a, b) = (pattern_db[i as usize], pattern_db[next as usize]);
            if b < -3.0 {
                let frac = if a == b { 0.0 } else { (a + 3.0) / (a - b) };
                let (xa, xb) = (angle_grid[i as usize], angle_grid[next as usize]);
                return Some((i as usize, xa + frac * (xb - xa)));
            }
            i = next;
        }
    };
    let (Some((left_in, left)), Some((right_in, right))) = (crossing(-1), crossing(1)) else {
        return Err(Error::Resolution(
            "pattern never falls 3 dB below the steered level inside the grid".into(),
        ));
    };
    let inside = right_in - left_in + 1;
    if inside < MIN_MAINLOBE_POINTS {
        return Err(Error::Resolution(format!(
            "mainlobe spans {inside} grid points; at least {MIN_MAINLOBE_POINTS} are needed"
        )));
    }

    let null = |dir: isize| -> usize {
        let mut i = center as isize;
        while i + dir >= 0
            && ((i + dir) as usize) < angle_grid.len()
            && pattern_db[(i + dir) as usize] < pattern_db[i as usize]
        {
            i += dir;
        }
        i as usize
    };
    let (ln, rn) = (null(-1), null(1));
    let peak_sidelobe = pattern_db[..ln]
        .iter()
        .chain(&pattern_db[rn + 1..])
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(BeamPattern {
        pattern_db,
        mainlobe_width: right - left,
        peak_sidelobe,
    })
}

/// Targets observed by the array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingScenario {
    pub targets: Vec<PathAngles>,
    /// Complex amplitude of each target's echo.
    pub amplitudes: Vec<Complex64>,
    /// Linear SNR of a unit-amplitude target per antenna and snapshot.
    pub snr: f64,
    pub snapshots: usize,
}

impl SensingScenario {
    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Config("scenario needs at least one target".into()));
        }
        if self.targets.len() != self.amplitudes.len() {
            return Err(Error::Dimension(
                "one amplitude per target is required".into(),
            ));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::Config("snr must be positive".into()));
        }
        if self.snapshots == 0 {
            return Err(Error::Config("at least one snapshot is required".into()));
        }
        for t in &self.targets {
            t.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbReport {
    /// Per-target CRB of the x direction cosine (dimensionless²).
    pub spatial_frequency: Vec<f64>,
    /// Per-target CRB of the azimuth (rad²); infinite at endfire.
    pub angle: Vec<f64>,
    /// Fisher information for the direction cosines, row-major.
    pub fim: Vec<Vec<f64>>,
    /// `‖P⊥_A d_t‖²`: sensitivity energy outside every target's steering vector.
    pub projection_residual: Vec<f64>,
    /// `‖P_{A₋t} d_t‖²`: sensitivity energy inside the other targets' steering span.
    pub cross_projection: Vec<f64>,
}

fn angle_crb(spatial: f64, angle: &PathAngles) -> f64 {
    let du = angle.elevation.cos() * angle.azimuth.sin();
    if du == 0.0 {
        f64::INFINITY
    } else {
        spatial / (du * du)
    }
}

/// Single target with unit amplitude: `CRB_u = 1 / (2·snr·K·‖P⊥_a d‖²)`.
pub fn single_target_crb(
    geom: &ArrayGeometry,
    angle: PathAngles,
    snr: f64,
    snapshots: usize,
) -> Result<CrbReport> {
    multi_target_crb(
        geom,
        &SensingScenario {
            targets: vec![angle],
            amplitudes: vec![Complex64::new(1.0, 0.0)],
            snr,
            snapshots,
        },
    )
}

/// Collinearity threshold for steering vectors of distinct targets.
const COLLINEAR_TOL: f64 = 1e-10;

/// Deterministic-signal CRB for all targets jointly:
/// `CRB = (σ²/2K) · [Re{(Dᴴ P⊥_A D) ⊙ Pᵀ}]⁻¹` with `P = s sᴴ` and `σ² = 1/snr`.
pub fn multi_target_crb(geom: &ArrayGeometry, scenario: &SensingScenario) -> Result<CrbReport> {
    scenario.validate()?;
    let t = scenario.targets.len();
    let n = geom.len();
    if t > n.saturating_sub(1).max(1) {
        return Err(Error::Config(format!(
            "{t} targets need at least {} antennas",
            t + 1
        )));
    }
    let steer: Vec<DVector<Complex64>> = scenario
        .targets
        .iter()
        .map(|a| steering_vector(geom, *a))
        .collect::<Result<_>>()?;
    let sens: Vec<DVector<Complex64>> = scenario
        .targets
        .iter()
        .map(|a| sensitivity_vector(geom, *a))
        .collect::<Result<_>>()?;
    for i in 0..t {
        for j in i + 1..t {
            if steer[i].dotc(&steer[j]).norm() >= n as f64 * (1.0 - COLLINEAR_TOL) {
                return Err(Error::Unidentifiable {
                    first: i,
                    second: j,
                });
            }
        }
    }
    let a = DMatrix::from_columns(&steer);
    let d = DMatrix::from_columns(&sens);
    if crate::linalg::is_rank_deficient(&a) {
        let (mut fi, mut fj, mut worst) = (0, 1.min(t - 1), -1.0);
        for i in 0..t {
            for j in i + 1..t {
                let c = steer[i].dotc(&steer[j]).norm();
                if c > worst {
                    (fi, fj, worst) = (i, j, c);
                }
            }
        }
        return Err(Error::Unidentifiable {
            first: fi,
            second: fj,
        });
    }
    let proj = complement_projector(&a)
        .ok_or_else(|| Error::SingularFim("steering Gram matrix is singular".into()))?;
    let core = d.adjoint() * &proj * &d;
    let s = &scenario.amplitudes;
    let scale = 2.0 * scenario.snapshots as f64 * scenario.snr;
    let fim = DMatrix::from_fn(t, t, |i, j| scale * (core[(i, j)] * s[j] * s[i].conj()).re);

    let projection_residual: Vec<f64> = (0..t).map(|i| core[(i, i)].re).collect();
    let cross_projection: Vec<f64> = (0..t)
        .map(|i| {
            if t == 1 {
                return 0.0;
            }
            let others: Vec<DVector<Complex64>> = (0..t)
                .filter(|&j| j != i)
                .map(|j| steer[j].clone())
                .collect();
            let b = DMatrix::from_columns(&others);
            complement_projector(&b).map_or(0.0, |p| {
                let di = d.column(i).into_owned();
                di.norm_squared() - (&p * &di).norm_squared()
            })
        })
        .collect();

    let diag_max = (0..t).map(|i| fim[(i, i)]).fold(0.0f64, f64::max);
    if !(diag_max > 0.0) {
        return Err(Error::SingularFim(
            "no aperture along the x direction".into(),
        ));
    }
    let inv = fim
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularFim("Fisher information is singular".into()))?;
    let spatial_frequency: Vec<f64> = (0..t).map(|i| inv[(i, i)]).collect();
    if spatial_frequency
        .iter()
        .any(|v| !(v.is_finite() && *v > 0.0))
    {
        return Err(Error::SingularFim(
            "Fisher information is numerically singular".into(),
        ));
    }
    let angle = spatial_frequency
        .iter()
        .zip(&scenario.targets)
        .map(|(v, a)| angle_crb(*v, a))
        .collect();
    Ok(CrbReport {
        spatial_frequency,
        angle,
        fim: (0..t)
            .map(|i| fim.row(i).iter().copied().collect())
            .collect(),
        projection_residual,
        cross_projection,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CrbPlacementMethod {
    /// Half the antennas packed at each end of the segment.
    ClosedForm,
    /// Lattice search minimizing the CRB: exhaustive under the cap, else greedy with refinement.
    Grid { step: f64, max_combinations: u64 },
}

/// Antenna positions on a segment along x that minimize the single-target CRB.
pub fn crb_optimal_placement(
    region: &MovingRegion,
    n: usize,
    angle: PathAngles,
    snr: f64,
    snapshots: usize,
    wavelength: f64,
    method: CrbPlacementMethod,
) -> Result<ArrayGeometry> {
    region.validate()?;
    let e = region.extent();
    if e.y != 0.0 || e.z != 0.0 {
        return Err(Error::Config(
            "CRB placement needs a segment along the x axis".into(),
        ));
    }
    if n < 2 {
        return Err(Error::Config(
            "CRB placement needs at least two antennas".into(),
        ));
    }
    let (lo, hi, s) = (region.lower, region.upper, region.min_spacing);
    let length = e.x;
    if (n - 1) as f64 * s > length * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "segment of length {length} cannot hold {n} antennas at spacing {s}"
        )));
    }
    match method {
        CrbPlacementMethod::ClosedForm => {
            if s == 0.0 && n > 2 {
                return Err(Error::Config(
                    "closed-form placement needs a positive min spacing for N > 2".into(),
                ));
            }
            let left = n.div_ceil(2);
            let right = n / 2;
            let mut pos: Vec<Position3D> = (0..left)
                .map(|i| lo + Position3D::xy(i as f64 * s, 0.0))
                .collect();
            pos.extend(
                (0..right)
                    .rev()
                    .map(|i| hi - Position3D::xy(i as f64 * s, 0.0)),
            );
            ArrayGeometry::new(pos, wavelength)
        }
        CrbPlacementMethod::Grid {
            step,
            max_combinations,
        } => {
            if !(step > 0.0) {
                return Err(Error::Config("lattice step must be positive".into()));
            }
            let count = (length / step + 1e-9).floor() as usize + 1;
            let lattice: Vec<Position3D> = (0..count)
                .map(|i| lo + Position3D::xy((i as f64 * step).min(length), 0.0))
                .collect();
            let crb = |idx: &[usize]| -> f64 {
                let g = ArrayGeometry::new(idx.iter().map(|&i| lattice[i]).collect(), wavelength);
                g.and_then(|g| single_target_crb(&g, angle, snr, snapshots))
                    .map_or(f64::INFINITY, |r| r.spatial_frequency[0])
            };
            let spaced = |idx: &[usize], c: usize| {
                idx.iter()
                    .all(|&i| lattice[i].distance(&lattice[c]) >= s - 1e-9)
            };
            let best = if binomial_u128(count, n) <= max_combinations as u128 {
                exhaustive_min(count, n, &crb, &spaced)
            } else {
                greedy_min(count, n, &crb, &spaced)
            };
            let idx =
                best.ok_or_else(|| Error::Infeasible("no spacing-feasible lattice subset".into()))?;
            ArrayGeometry::new(idx.iter().map(|&i| lattice[i]).collect(), wavelength)
        }
    }
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i as u128 + 1)
    })
}

fn exhaustive_min(
    count: usize,
    n: usize,
    crb: &(dyn Fn(&[usize]) -> f64 + Sync),
    spaced: &(dyn Fn(&[usize], usize) -> bool + Sync),
) -> Option<Vec<usize>> {
    fn rec(
        count: usize,
        n: usize,
        crb: &(dyn Fn(&[usize]) -> f64 + Sync),
        spaced: &(dyn Fn(&[usize], usize) -> bool + Sync),
        stack: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if stack.len() == n {
            let v = crb(stack);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                *best = Some((v, stack.clone()));
            }
            return;
        }
        let start = stack.last().map_or(0, |i| i + 1);
        for c in start..count {
            if spaced(stack, c) {
                stack.push(c);
                rec(count, n, crb, spaced, stack, best);
                stack.pop();
            }
        }
    }
    let per_first: Vec<Option<(f64, Vec<usize>)>> = (0..count)
        .into_par_iter()
        .map(|first| {
            let mut best = None;
            let mut stack = vec![first];
            rec(count, n, crb, spaced, &mut stack, &mut best);
            best
        })
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (v, idx) in per_first.into_iter().flatten() {
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, idx));
        }
    }
    best.map(|b| b.1)
}

fn greedy_min(
    count: usize,
    n: usize,
    crb: &dyn Fn(&[usize]) -> f64,
    spaced: &dyn Fn(&[usize], usize) -> bool,
) -> Option<Vec<usize>> {
    // Seed with the two extreme lattice points, then add the point that most reduces the CRB.
    let mut idx = vec![0, count - 1];
    while idx.len() < n {
        let next = (0..count)
            .filter(|&c| !idx.contains(&c) && spaced(&idx, c))
            .map(|c| {
                let mut trial = idx.clone();
                trial.push(c);
                (crb(&trial), c)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))?;
        idx.push(next.1);
    }
    let mut value = crb(&idx);
    for _ in 0..20 {
        let mut improved = false;
        for k in 0..n {
            for c in 0..count {
                if idx.contains(&c) {
                    continue;
                }
                let mut others = idx.clone();
                others.remove(k);
                if !spaced(&others, c) {
                    continue;
                }
                let mut trial = idx.clone();
                trial[k] = c;
                let v = crb(&trial);
                if v < value {
                    value = v;
                    idx = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    idx.sort_unstable();
    Some(idx)
}

/// Union of per-snapshot positions (duplicates within [`DEDUP_TOL`] removed), treated as one snapshot.
pub fn virtual_array_synthesis(trajectory: &[ArrayGeometry]) -> Result<ArrayGeometry> {
    let first = trajectory
        .first()
        .ok_or_else(|| Error::Config("trajectory has no snapshots".into()))?;
    let lambda = first.wavelength;
    let mut out: Vec<Position3D> = Vec::new();
    for g in trajectory {
        if g.wavelength != lambda {
            return Err(Error::Config(
                "all snapshots must share one wavelength".into(),
            ));
        }
        for p in &g.positions {
            if out.iter().all(|q| q.distance(p) > DEDUP_TOL) {
                out.push(*p);
            }
        }
    }
    ArrayGeometry::new(out, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    const LAMBDA: f64 = 0.01;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn steering_examples() {
        let g = ArrayGeometry::new(
            vec![
                Position3D::xy(0.0, 0.0),
                Position3D::xy(LAMBDA, 0.0),
                Position3D::xy(3.0 * LAMBDA, 0.0),
            ],
            LAMBDA,
        )
        .unwrap();
        let a = steering_vector(&g, PathAngles::new(0.0, FRAC_PI_2).unwrap()).unwrap();
        assert!(a.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-12));
        let g = ArrayGeometry::uniform_line(2, LAMBDA / 2.0, LAMBDA).unwrap();
        let a = steering_vector(&g, PathAngles::new(0.0, 0.0).unwrap()).unwrap();
        assert!((a[0] - c(1.0, 0.0)).norm() < 1e-12 && (a[1] - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn sensitivity_two_element_closed_form() {
        // Elements at 0 and x₁: a = [1, e^{jκ u x₁}] with u = cosθcosφ, so ∂a/∂u = [0, jκx₁ e^{jκ u x₁}].
        let x1 = 0.37 * LAMBDA;
        let g =
            ArrayGeometry::new(vec![Position3D::ORIGIN, Position3D::xy(x1, 0.0)], LAMBDA).unwrap();
        let ang = PathAngles::new(0.2, 0.9).unwrap();
        let u = 0.2f64.cos() * 0.9f64.cos();
        let kappa = 2.0 * PI / LAMBDA;
        let d = sensitivity_vector(&g, ang).unwrap();
        assert_eq!(d[0], c(0.0, 0.0));
        let want = c(0.0, kappa * x1) * Complex64::from_polar(1.0, kappa * u * x1);
        assert!((d[1] - want).norm() < 1e-9 * want.norm());
    }

    #[test]
    fn ula_crb_closed_form() {
        for n in [2usize, 3, 8, 16] {
            let g = ArrayGeometry::uniform_line(n, LAMBDA / 2.0, LAMBDA).unwrap();
            let r =
                single_target_crb(&g, PathAngles::new(0.0, FRAC_PI_2).unwrap(), 3.0, 5).unwrap();
            let kd = 2.0 * PI * 0.5;
            let want = 6.0 / (3.0 * 5.0 * (n * (n * n - 1)) as f64 * kd * kd);
            assert!((r.spatial_frequency[0] - want).abs() < 1e-9 * want);
            // Broadside: du/dφ = -1.
            assert!((r.angle[0] - want).abs() < 1e-9 * want);
        }
    }

    #[test]
    fn crb_errors() {
        let g = ArrayGeometry::new(
            vec![Position3D::xy(0.0, 0.0), Position3D::xy(0.0, LAMBDA)],
            LAMBDA,
        )
        .unwrap();
        assert!(matches!(
            single_target_crb(&g, PathAngles::new(0.0, 0.3).unwrap(), 1.0, 1),
            Err(Error::SingularFim(_))
        ));
        let g = ArrayGeometry::uniform_line(4, LAMBDA / 2.0, LAMBDA).unwrap();
        let a = PathAngles::new(0.0, 0.7).unwrap();
        let sc = SensingScenario {
            targets: vec![a, a],
            amplitudes: vec![c(1.0, 0.0); 2],
            snr: 1.0,
            snapshots: 1,
        };
        assert!(matches!(
            multi_target_crb(&g, &sc),
            Err(Error::Unidentifiable {
                first: 0,
                second: 1
            })
        ));
        let endfire = single_target_crb(&g, PathAngles::new(0.0, 0.0).unwrap(), 1.0, 1).unwrap();
        assert!(endfire.angle[0].is_infinite());
    }

    #[test]
    fn beam_pattern_basics() {
        let g = ArrayGeometry::uniform_line(8, LAMBDA / 2.0, LAMBDA).unwrap();
        let w = matched_weights(&g, FRAC_PI_2).unwrap();
        let grid: Vec<f64> = (0..4000).map(|i| PI * i as f64 / 4000.0).collect();
        let bp = beam_pattern(&g, &w, &grid, FRAC_PI_2).unwrap();
        assert!(bp.pattern_db[2000].abs() < 1e-12);
        assert!(bp.pattern_db.iter().all(|v| *v <= 1e-9));
        let coarse: Vec<f64> = (0..20).map(|i| PI * i as f64 / 20.0).collect();
        assert!(matches!(
            beam_pattern(&g, &w, &coarse, FRAC_PI_2),
            Err(Error::Resolution(_))
        ));
        let one = ArrayGeometry::new(vec![Position3D::ORIGIN], LAMBDA).unwrap();
        let w1 = DVector::from_element(1, c(1.0, 0.0));
        assert!(matches!(
            beam_pattern(&one, &w1, &grid, FRAC_PI_2),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn closed_form_placement_layout() {
        let seg = MovingRegion::segment_x(0.0, 10.0 * LAMBDA, LAMBDA / 2.0).unwrap();
        let ang = PathAngles::new(0.0, 1.0).unwrap();
        let g = crb_optimal_placement(&seg, 5, ang, 1.0, 1, LAMBDA, CrbPlacementMethod::ClosedForm)
            .unwrap();
        let xs: Vec<f64> = g.positions().iter().map(|p| p.x / LAMBDA).collect();
        let want = [0.0, 0.5, 1.0, 9.5, 10.0];
        for (a, b) in xs.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        let short = MovingRegion::segment_x(0.0, LAMBDA, LAMBDA / 2.0).unwrap();
        assert!(matches!(
            crb_optimal_placement(
                &short,
                4,
                ang,
                1.0,
                1,
                LAMBDA,
                CrbPlacementMethod::ClosedForm
            ),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn virtual_array_dedups() {
        let snaps: Vec<ArrayGeometry> = [0.0, 0.5, 0.5, 1.0]
            .iter()
            .map(|x| ArrayGeometry::new(vec![Position3D::xy(x * LAMBDA, 0.0)], LAMBDA).unwrap())
            .collect();
        assert_eq!(virtual_array_synthesis(&snaps).unwrap().len(), 3);
        let other = ArrayGeometry::new(vec![Position3D::ORIGIN], 2.0 * LAMBDA).unwrap();
        assert!(virtual_array_synthesis(&[snaps[0].clone(), other]).is_err());
    }
}
