//! Antenna position optimization.
//!
//! Every optimizer consumes a [`PlacementProblem`] (or, for the CSI-free
//! zeroth-order method, a [`MeasurementOracle`]) and returns a
//! [`PlacementResult`] whose positions satisfy the region box and the
//! minimum-spacing constraint.

mod cs;
mod discrete;
mod gradient;
mod objective;
mod pso;
mod zo;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{clamp_to_region, MovingRegion, Position3D};
use crate::{Error, Result};

pub use cs::{cs_placement, CsConfig};
pub use discrete::{candidate_lattice, discrete_placement, DiscreteConfig, DiscreteMode};
pub use gradient::{grad_ascent_placement, GradientConfig};
pub use objective::{weighted_water_filling, Objective, UserLink};
pub use pso::{pso_placement, PsoConfig};
pub use zo::{zo_gradient_estimate, zo_placement, MeasurementOracle, ZoConfig};

/// Slack used when checking feasibility of returned positions.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementProblem {
    pub objective: Objective,
    pub region: MovingRegion,
    pub n_antennas: usize,
    pub wavelength: f64,
}

impl PlacementProblem {
    pub fn new(objective: Objective, region: MovingRegion, n_antennas: usize) -> Result<Self> {
        let wavelength = objective.wavelength();
        let p = Self {
            objective,
            region,
            n_antennas,
            wavelength,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.region.validate()?;
        if self.n_antennas == 0 {
            return Err(Error::Config("placement needs at least one antenna".into()));
        }
        if (self.wavelength - self.objective.wavelength()).abs() > 1e-12 * self.wavelength {
            return Err(Error::Config(
                "problem wavelength differs from the channel wavelength".into(),
            ));
        }
        self.region.ensure_capacity(self.n_antennas)
    }

    /// Same problem with every path gain multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            objective: self.objective.scaled(factor),
            ..self.clone()
        }
    }

    pub(crate) fn evaluator(&self) -> Evaluator<'_> {
        Evaluator {
            objective: &self.objective,
            links: self.objective.links(),
        }
    }
}

/// Objective bound to precomputed per-receiver path coefficients.
pub(crate) struct Evaluator<'a> {
    objective: &'a Objective,
    links: objective::LinkMatrix,
}

impl Evaluator<'_> {
    pub(crate) fn value(&self, positions: &[Position3D]) -> f64 {
        self.objective.value_with(&self.links, positions)
    }

    pub(crate) fn gradient(&self, positions: &[Position3D]) -> Vec<[f64; 3]> {
        self.objective.gradient_with(&self.links, positions)
    }

    pub(crate) fn channel_column(
        &self,
        t: &Position3D,
    ) -> nalgebra::DVector<num_complex::Complex64> {
        self.links.column(t)
    }
}

/// Objective value at feasible `positions`.
pub fn objective_value(problem: &PlacementProblem, positions: &[Position3D]) -> Result<f64> {
    problem.region.check_feasible(positions, FEASIBILITY_TOL)?;
    Ok(problem.evaluator().value(positions))
}

/// Analytic gradient `[∂/∂x, ∂/∂y, ∂/∂z]` per antenna. No feasibility check.
pub fn objective_gradient(problem: &PlacementProblem, positions: &[Position3D]) -> Vec<[f64; 3]> {
    problem.evaluator().gradient(positions)
}

/// How an optimizer run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    IterationLimit,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementResult {
    pub positions: Vec<Position3D>,
    pub objective_value: f64,
    /// Best value found so far, one entry per iteration.
    pub trace: Vec<f64>,
    /// Objective (or oracle) calls spent.
    pub evaluations: usize,
    pub status: RunStatus,
}

/// Coordinate axes along which the region has non-zero extent.
pub(crate) fn free_axes(region: &MovingRegion) -> Vec<usize> {
    let e = region.extent().to_array();
    (0..3).filter(|&a| e[a] > 0.0).collect()
}

pub(crate) fn flatten(positions: &[Position3D], axes: &[usize]) -> Vec<f64> {
    positions
        .iter()
        .flat_map(|p| {
            let a = p.to_array();
            axes.iter().map(move |&i| a[i])
        })
        .collect()
}

pub(crate) fn unflatten(x: &[f64], axes: &[usize], region: &MovingRegion) -> Vec<Position3D> {
    let base = region.lower.to_array();
    x.chunks(axes.len().max(1))
        .map(|chunk| {
            let mut a = base;
            for (&i, v) in axes.iter().zip(chunk) {
                a[i] = *v;
            }
            Position3D::from_array(a)
        })
        .collect()
}

/// Sum of squared spacing violations, in wavelengths.
pub(crate) fn spacing_violation(
    positions: &[Position3D],
    min_spacing: f64,
    wavelength: f64,
) -> f64 {
    let mut total = 0.0;
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let gap = min_spacing - positions[i].distance(&positions[j]);
            if gap > 0.0 {
                total += (gap / wavelength).powi(2);
            }
        }
    }
    total
}

fn is_spaced(p: &Position3D, others: &[Position3D], s: f64) -> bool {
    others.iter().all(|o| o.distance(p) >= s)
}

/// Clamps into the box, pushes violating pairs apart, and as a last resort
/// moves offenders to the nearest free spacing-lattice point.
pub(crate) fn repair(positions: &[Position3D], region: &MovingRegion) -> Vec<Position3D> {
    let s = region.min_spacing;
    let mut p: Vec<Position3D> = positions
        .iter()
        .map(|q| clamp_to_region(*q, region))
        .collect();
    if s == 0.0 || region.check_feasible(&p, 0.0).is_ok() {
        return p;
    }
    let axes = free_axes(region);
    for _ in 0..50 {
        let mut moved = false;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let d = p[i].distance(&p[j]);
                if d >= s {
                    continue;
                }
                moved = true;
                let dir = if d > 1e-15 {
                    (p[j] - p[i]) * (1.0 / d)
                } else {
                    let mut a = [0.0; 3];
                    a[axes[(i + j) % axes.len()]] = 1.0;
                    Position3D::from_array(a)
                };
                let push = dir * ((s - d) / 2.0 * (1.0 + 1e-9));
                p[i] = clamp_to_region(p[i] - push, region);
                p[j] = clamp_to_region(p[j] + push, region);
            }
        }
        if !moved {
            break;
        }
    }
    if region.check_feasible(&p, 0.0).is_ok() {
        return p;
    }
    let lattice = spacing_lattice(region);
    let mut fixed: Vec<Position3D> = Vec::with_capacity(p.len());
    for q in &p {
        if is_spaced(q, &fixed, s) {
            fixed.push(*q);
            continue;
        }
        match lattice
            .iter()
            .filter(|c| is_spaced(c, &fixed, s))
            .min_by(|a, b| a.distance(q).total_cmp(&b.distance(q)))
        {
            Some(c) => fixed.push(*c),
            None => return snap_all(&p, &lattice),
        }
    }
    fixed
}

/// Moves every antenna to its nearest unused lattice point, in order.
fn snap_all(p: &[Position3D], lattice: &[Position3D]) -> Vec<Position3D> {
    let mut used = vec![false; lattice.len()];
    p.iter()
        .map(|q| {
            let k = (0..lattice.len())
                .filter(|&k| !used[k])
                .min_by(|&a, &b| lattice[a].distance(q).total_cmp(&lattice[b].distance(q)))
                .expect("region capacity was checked at construction");
            used[k] = true;
            lattice[k]
        })
        .collect()
}

/// Lattice with pitch `min_spacing` anchored at the lower corner.
fn spacing_lattice(region: &MovingRegion) -> Vec<Position3D> {
    let s = region.min_spacing;
    let e = region.extent().to_array();
    let counts: Vec<usize> = (0..3)
        .map(|a| (e[a] / s + 1e-9).floor() as usize + 1)
        .collect();
    let lo = region.lower.to_array();
    let mut out = Vec::new();
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                let p = Position3D::new(
                    (lo[0] + i as f64 * s).min(region.upper.x),
                    (lo[1] + j as f64 * s).min(region.upper.y),
                    (lo[2] + k as f64 * s).min(region.upper.z),
                );
                out.push(p);
            }
        }
    }
    out
}

/// Uniform random feasible layout.
pub(crate) fn random_layout<R: Rng + ?Sized>(
    region: &MovingRegion,
    n: usize,
    rng: &mut R,
) -> Vec<Position3D> {
    let p: Vec<Position3D> = (0..n).map(|_| region.sample_uniform(rng)).collect();
    repair(&p, region)
}

/// Fixed-position baseline: the most nearly square grid with pitch
/// `max(λ/2, min_spacing)` centered in the region (a line for 1D regions).
pub fn fpa_layout(
    region: &MovingRegion,
    n_antennas: usize,
    wavelength: f64,
) -> Result<Vec<Position3D>> {
    if n_antennas == 0 {
        return Err(Error::Config("baseline needs at least one antenna".into()));
    }
    let pitch = (wavelength / 2.0).max(region.min_spacing);
    let axes = free_axes(region);
    let (cols, rows) = match axes.len() {
        0 if n_antennas == 1 => (1, 1),
        0 => {
            return Err(Error::Infeasible(
                "a point region holds only one antenna".into(),
            ))
        }
        1 => (n_antennas, 1),
        _ => {
            let cols = (n_antennas as f64).sqrt().ceil() as usize;
            (cols, n_antennas.div_ceil(cols))
        }
    };
    let center = region.center().to_array();
    let mut out = Vec::with_capacity(n_antennas);
    for idx in 0..n_antennas {
        let (r, c) = (idx / cols, idx % cols);
        let mut a = center;
        if let Some(&ax) = axes.first() {
            a[ax] += (c as f64 - (cols - 1) as f64 / 2.0) * pitch;
        }
        if let Some(&ay) = axes.get(1) {
            a[ay] += (r as f64 - (rows - 1) as f64 / 2.0) * pitch;
        }
        out.push(Position3D::from_array(a));
    }
    region.check_feasible(&out, FEASIBILITY_TOL).map_err(|_| {
        Error::Infeasible(format!(
            "a {cols}×{rows} baseline grid at pitch {pitch} does not fit in the region"
        ))
    })?;
    Ok(out)
}

/// Baseline result for reporting alongside the optimizers.
pub fn fpa_placement(problem: &PlacementProblem) -> Result<PlacementResult> {
    let positions = fpa_layout(&problem.region, problem.n_antennas, problem.wavelength)?;
    let value = problem.evaluator().value(&positions);
    Ok(PlacementResult {
        positions,
        objective_value: value,
        trace: vec![value],
        evaluations: 1,
        status: RunStatus::Converged,
    })
}

/// Running maximum, so traces never decrease.
pub(crate) fn push_best(trace: &mut Vec<f64>, value: f64) {
    let best = trace.last().map_or(value, |b| b.max(value));
    trace.push(best);
}
