use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    fpa_layout, push_best, Evaluator, PlacementProblem, PlacementResult, RunStatus, FEASIBILITY_TOL,
};
use crate::geometry::{MovingRegion, Position3D};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscreteMode {
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscreteConfig {
    /// Lattice pitch in wavelengths.
    pub grid_step: f64,
    pub mode: DiscreteMode,
    /// Largest number of antenna subsets exhaustive mode may enumerate.
    pub max_combinations: u64,
    /// Cyclic coordinate passes after the greedy build.
    pub refine_sweeps: usize,
}

impl Default for DiscreteConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.125,
            mode: DiscreteMode::Greedy,
            max_combinations: 2_000_000,
            refine_sweeps: 10,
        }
    }
}

/// Candidate lattice with pitch `step` along free axes, anchored at the lower corner.
pub fn candidate_lattice(region: &MovingRegion, step: f64) -> Result<Vec<Position3D>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!(
            "lattice step {step} must be positive"
        )));
    }
    let lo = region.lower.to_array();
    let hi = region.upper.to_array();
    let mut axis_values: Vec<Vec<f64>> = Vec::with_capacity(3);
    for a in 0..3 {
        let count = ((hi[a] - lo[a]) / step + 1e-9).floor() as usize;
        let vals = (0..=count)
            .map(|i| (lo[a] + i as f64 * step).min(hi[a]))
            .collect();
        axis_values.push(vals);
    }
    let mut out = Vec::new();
    for &z in &axis_values[2] {
        for &y in &axis_values[1] {
            for &x in &axis_values[0] {
                out.push(Position3D::new(x, y, z));
            }
        }
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Placement restricted to a lattice of candidate points.
///
/// Exhaustive mode returns the best spacing-feasible subset. Greedy mode adds
/// antennas one at a time (not-yet-placed antennas wait at the baseline
/// layout), then repeatedly moves single antennas to their best lattice point.
pub fn discrete_placement(
    problem: &PlacementProblem,
    config: &DiscreteConfig,
) -> Result<PlacementResult> {
    problem.validate()?;
    let lattice = candidate_lattice(&problem.region, config.grid_step * problem.wavelength)?;
    let n = problem.n_antennas;
    if lattice.len() < n {
        return Err(Error::Infeasible(format!(
            "lattice has {} points for {n} antennas",
            lattice.len()
        )));
    }
    match config.mode {
        DiscreteMode::Exhaustive => {
            let count = binomial(lattice.len(), n);
            if count > config.max_combinations as u128 {
                return Err(Error::Sizing(format!(
                    "{count} candidate subsets exceed the cap of {}; use greedy mode or a coarser grid",
                    config.max_combinations
                )));
            }
            exhaustive(problem, &lattice)
        }
        DiscreteMode::Greedy => greedy(problem, &lattice, config.refine_sweeps),
    }
}

type Candidate = Option<(f64, Vec<usize>)>;

fn exhaustive(problem: &PlacementProblem, lattice: &[Position3D]) -> Result<PlacementResult> {
    let n = problem.n_antennas;
    let s = problem.region.min_spacing;
    let per_first: Vec<(Candidate, usize)> = (0..lattice.len())
        .into_par_iter()
        .map(|first| {
            let eval = problem.evaluator();
            let mut best: Candidate = None;
            let mut count = 0;
            let mut stack = vec![first];
            let mut pts = vec![lattice[first]];
            search(
                &eval, lattice, n, s, &mut stack, &mut pts, &mut best, &mut count,
            );
            (best, count)
        })
        .collect();
    let evaluations = per_first.iter().map(|(_, c)| c).sum();
    let mut best: Candidate = None;
    let mut trace = Vec::new();
    for (b, _) in per_first.into_iter() {
        if let Some((v, idx)) = b {
            push_best(&mut trace, v);
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, idx));
            }
        }
    }
    let (value, idx) =
        best.ok_or_else(|| Error::Infeasible("no spacing-feasible subset on the lattice".into()))?;
    Ok(PlacementResult {
        positions: idx.iter().map(|&i| lattice[i]).collect(),
        objective_value: value,
        trace,
        evaluations,
        status: RunStatus::Converged,
    })
}

#[allow(clippy::too_many_arguments)]
fn search(
    eval: &Evaluator<'_>,
    lattice: &[Position3D],
    n: usize,
    s: f64,
    stack: &mut Vec<usize>,
    pts: &mut Vec<Position3D>,
    best: &mut Option<(f64, Vec<usize>)>,
    count: &mut usize,
) {
    if stack.len() == n {
        let v = eval.value(pts);
        *count += 1;
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            *best = Some((v, stack.clone()));
        }
        return;
    }
    let start = stack.last().map_or(0, |i| i + 1);
    for j in start..lattice.len() {
        if pts
            .iter()
            .all(|p| p.distance(&lattice[j]) >= s - FEASIBILITY_TOL)
        {
            stack.push(j);
            pts.push(lattice[j]);
            search(eval, lattice, n, s, stack, pts, best, count);
            stack.pop();
            pts.pop();
        }
    }
}

fn spaced(c: &Position3D, layout: &[Position3D], skip: usize, s: f64) -> bool {
    layout
        .iter()
        .enumerate()
        .all(|(i, p)| i == skip || p.distance(c) >= s - FEASIBILITY_TOL)
}

fn greedy(
    problem: &PlacementProblem,
    lattice: &[Position3D],
    sweeps: usize,
) -> Result<PlacementResult> {
    let eval = problem.evaluator();
    let n = problem.n_antennas;
    let s = problem.region.min_spacing;
    let baseline = fpa_layout(&problem.region, n, problem.wavelength).ok();
    let mut evaluations = 0;

    let mut placed: Vec<Position3D> = Vec::with_capacity(n);
    for k in 0..n {
        let mut best: Option<(f64, Position3D)> = None;
        for c in lattice {
            if !spaced(c, &placed, usize::MAX, s) {
                continue;
            }
            let mut layout = placed.clone();
            layout.push(*c);
            if let Some(b) = &baseline {
                layout.extend_from_slice(&b[k + 1..]);
            }
            let v = eval.value(&layout);
            evaluations += 1;
            if best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, *c));
            }
        }
        let (_, c) = best.ok_or_else(|| {
            Error::Infeasible(format!(
                "no lattice point left for antenna {k} at the required spacing"
            ))
        })?;
        placed.push(c);
    }

    let mut trace = Vec::new();
    let (mut layout, mut value) = refine(
        &eval,
        lattice,
        s,
        placed,
        sweeps,
        &mut trace,
        &mut evaluations,
    );
    let on_lattice = |p: &Position3D| lattice.iter().any(|q| q.distance(p) <= 1e-9);
    if let Some(b) = baseline.filter(|b| b.iter().all(on_lattice)) {
        let (alt, alt_value) = refine(&eval, lattice, s, b, sweeps, &mut trace, &mut evaluations);
        if alt_value > value {
            layout = alt;
            value = alt_value;
        }
    }
    Ok(PlacementResult {
        positions: layout,
        objective_value: value,
        trace,
        evaluations,
        status: RunStatus::Converged,
    })
}

fn refine(
    eval: &Evaluator<'_>,
    lattice: &[Position3D],
    s: f64,
    mut layout: Vec<Position3D>,
    sweeps: usize,
    trace: &mut Vec<f64>,
    evaluations: &mut usize,
) -> (Vec<Position3D>, f64) {
    let mut value = eval.value(&layout);
    *evaluations += 1;
    push_best(trace, value);
    for _ in 0..sweeps {
        let mut improved = false;
        for i in 0..layout.len() {
            let current = layout[i];
            let mut best = (value, current);
            for c in lattice {
                if c.distance(&current) == 0.0 || !spaced(c, &layout, i, s) {
                    continue;
                }
                layout[i] = *c;
                let v = eval.value(&layout);
                *evaluations += 1;
                if v > best.0 {
                    best = (v, *c);
                }
            }
            layout[i] = best.1;
            if best.0 > value {
                value = best.0;
                improved = true;
                push_best(trace, value);
            }
        }
        if !improved {
            break;
        }
    }
    (layout, value)
}
