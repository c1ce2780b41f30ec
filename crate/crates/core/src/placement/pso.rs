use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    flatten, fpa_layout, free_axes, push_best, random_layout, repair, spacing_violation, unflatten,
};
use super::{PlacementProblem, PlacementResult, RunStatus, FEASIBILITY_TOL};
use crate::geometry::Position3D;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    pub swarm: usize,
    pub iters: usize,
    /// Inertia at the first iteration.
    pub inertia: f64,
    /// Inertia at the last iteration; the weight moves linearly between the two.
    pub inertia_end: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
    /// Penalty weight relative to the largest objective magnitude in the initial swarm.
    pub penalty: f64,
    /// Velocity cap as a fraction of the region extent per axis.
    pub max_velocity: f64,
    /// Seed one particle with the fixed-position baseline.
    pub include_baseline: bool,
    /// Ring neighbourhood radius for the social term; 0 uses the global best.
    pub neighborhood: usize,
    /// Repair spacing violations after every move instead of only penalizing them.
    pub repair: bool,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm: 100,
            iters: 1500,
            inertia: 0.9,
            inertia_end: 0.4,
            cognitive: 1.5,
            social: 1.5,
            seed: 0,
            penalty: 100.0,
            max_velocity: 0.25,
            include_baseline: true,
            neighborhood: 2,
            repair: true,
        }
    }
}

/// Global-best particle swarm over the concatenated antenna coordinates.
///
/// Particles are clamped to the box; spacing violations enter as a quadratic
/// hinge penalty. The returned layout is the best exactly feasible one seen.
pub fn pso_placement(problem: &PlacementProblem, config: &PsoConfig) -> Result<PlacementResult> {
    problem.validate()?;
    if config.swarm < 2 {
        return Err(Error::Config(
            "swarm must contain at least two particles".into(),
        ));
    }
    let eval = problem.evaluator();
    let region = &problem.region;
    let axes = free_axes(region);
    let lambda = problem.wavelength;
    let s = region.min_spacing;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let lo = region.lower.to_array();
    let hi = region.upper.to_array();
    let dim = axes.len() * problem.n_antennas;
    let bounds: Vec<(f64, f64)> = (0..dim)
        .map(|i| {
            (
                lo[axes[i % axes.len().max(1)]],
                hi[axes[i % axes.len().max(1)]],
            )
        })
        .collect();
    let vmax: Vec<f64> = bounds
        .iter()
        .map(|(l, h)| config.max_velocity * (h - l))
        .collect();

    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(config.swarm);
    if config.include_baseline {
        if let Ok(b) = fpa_layout(region, problem.n_antennas, lambda) {
            xs.push(flatten(&b, &axes));
        }
    }
    while xs.len() < config.swarm {
        let layout = random_layout(region, problem.n_antennas, &mut rng);
        xs.push(flatten(&layout, &axes));
    }
    let mut vs: Vec<Vec<f64>> = (0..config.swarm)
        .map(|_| {
            vmax.iter()
                .map(|&v| {
                    if v > 0.0 {
                        rng.random_range(-v..=v)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let mut evaluations = 0;
    let mut best_feasible: Option<(Vec<Position3D>, f64)> = None;
    let mut trace = Vec::new();

    let raw: Vec<(Vec<Position3D>, f64)> = xs
        .iter()
        .map(|x| {
            let p = unflatten(x, &axes, region);
            let v = eval.value(&p);
            (p, v)
        })
        .collect();
    evaluations += raw.len();
    let scale = raw.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    let weight = config.penalty * if scale > 0.0 { scale } else { 1.0 };

    let consider = |p: &[Position3D], v: f64, best: &mut Option<(Vec<Position3D>, f64)>| {
        if region.check_feasible(p, FEASIBILITY_TOL).is_ok()
            && best.as_ref().is_none_or(|(_, b)| v > *b)
        {
            *best = Some((p.to_vec(), v));
        }
    };
    let mut fitness: Vec<f64> = Vec::with_capacity(config.swarm);
    for (p, v) in &raw {
        consider(p, *v, &mut best_feasible);
        fitness.push(v - weight * spacing_violation(p, s, lambda));
    }
    let mut pbest = xs.clone();
    let mut pbest_fit = fitness.clone();
    let leaders = |fit: &[f64]| -> Vec<usize> {
        let n = fit.len();
        (0..n)
            .map(|i| {
                if config.neighborhood == 0 || 2 * config.neighborhood + 1 >= n {
                    return argmax(fit);
                }
                let k = config.neighborhood;
                (0..=2 * k).map(|o| (i + n - k + o) % n).fold(i, |b, j| {
                    if fit[j] > fit[b] {
                        j
                    } else {
                        b
                    }
                })
            })
            .collect()
    };
    let mut lead = leaders(&pbest_fit);
    if let Some((_, v)) = &best_feasible {
        push_best(&mut trace, *v);
    }

    for it in 0..config.iters {
        let frac = if config.iters > 1 {
            it as f64 / (config.iters - 1) as f64
        } else {
            0.0
        };
        let w = config.inertia + (config.inertia_end - config.inertia) * frac;
        for i in 0..config.swarm {
            let g = lead[i];
            for d in 0..dim {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                let v = w * vs[i][d]
                    + config.cognitive * r1 * (pbest[i][d] - xs[i][d])
                    + config.social * r2 * (pbest[g][d] - xs[i][d]);
                vs[i][d] = v.clamp(-vmax[d], vmax[d]);
                xs[i][d] = (xs[i][d] + vs[i][d]).clamp(bounds[d].0, bounds[d].1);
            }
            if config.repair {
                xs[i] = flatten(&repair(&unflatten(&xs[i], &axes, region), region), &axes);
            }
            let p = unflatten(&xs[i], &axes, region);
            let v = eval.value(&p);
            evaluations += 1;
            consider(&p, v, &mut best_feasible);
            let fit = v - weight * spacing_violation(&p, s, lambda);
            if fit > pbest_fit[i] {
                pbest_fit[i] = fit;
                pbest[i] = xs[i].clone();
            }
        }
        lead = leaders(&pbest_fit);
        if let Some((_, v)) = &best_feasible {
            push_best(&mut trace, *v);
        }
    }

    // Initial particles are repaired, so a feasible layout always exists.
    let (positions, value) = best_feasible.expect("initial swarm is feasible");
    Ok(PlacementResult {
        positions,
        objective_value: value,
        trace,
        evaluations,
        status: RunStatus::IterationLimit,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
