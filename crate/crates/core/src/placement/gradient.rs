use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{flatten, fpa_layout, free_axes, push_best, random_layout, repair, unflatten};
use super::{PlacementProblem, PlacementResult, RunStatus};
use crate::geometry::Position3D;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientConfig {
    pub starts: usize,
    pub max_iters: usize,
    /// Relative improvement below which a start is considered converged.
    pub tol: f64,
    /// First trial step of the backtracking search, in wavelengths.
    pub initial_step: f64,
    /// Backtracking stops once the step falls below this many wavelengths.
    pub min_step: f64,
    pub seed: u64,
    /// Use the fixed-position baseline as the first start.
    pub include_baseline: bool,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            max_iters: 200,
            tol: 1e-10,
            initial_step: 0.25,
            min_step: 1e-7,
            seed: 0,
            include_baseline: true,
        }
    }
}

struct StartRun {
    positions: Vec<Position3D>,
    value: f64,
    trace: Vec<f64>,
    evaluations: usize,
    converged: bool,
}

/// Multi-start projected gradient ascent.
///
/// Each iteration moves along the gradient scaled to unit ∞-norm, halving the
/// step from `initial_step·λ` until the (clamped, spacing-repaired) candidate
/// improves the objective.
pub fn grad_ascent_placement(
    problem: &PlacementProblem,
    config: &GradientConfig,
) -> Result<PlacementResult> {
    problem.validate()?;
    let starts = config.starts.max(1);
    let baseline = if config.include_baseline {
        fpa_layout(&problem.region, problem.n_antennas, problem.wavelength).ok()
    } else {
        None
    };
    let runs: Vec<StartRun> = (0..starts)
        .into_par_iter()
        .map(|s| {
            let init = match (&baseline, s) {
                (Some(b), 0) => b.clone(),
                _ => {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream(s as u64);
                    random_layout(&problem.region, problem.n_antennas, &mut rng)
                }
            };
            ascend(problem, config, init)
        })
        .collect();

    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value > runs[best].value {
            best = i;
        }
    }
    let mut trace = Vec::new();
    for r in &runs {
        for &v in &r.trace {
            push_best(&mut trace, v);
        }
    }
    Ok(PlacementResult {
        positions: runs[best].positions.clone(),
        objective_value: runs[best].value,
        trace,
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        status: if runs[best].converged {
            RunStatus::Converged
        } else {
            RunStatus::IterationLimit
        },
    })
}

fn ascend(problem: &PlacementProblem, config: &GradientConfig, init: Vec<Position3D>) -> StartRun {
    let eval = problem.evaluator();
    let region = &problem.region;
    let axes = free_axes(region);
    let step0 = config.initial_step * problem.wavelength;
    let min_step = config.min_step * problem.wavelength;

    let mut x = init;
    let mut f = eval.value(&x);
    let mut evaluations = 1;
    let mut trace = vec![f];
    let mut converged = axes.is_empty();

    for _ in 0..config.max_iters {
        if converged {
            break;
        }
        let grad = eval.gradient(&x);
        evaluations += 1;
        let g: Vec<f64> = grad
            .iter()
            .flat_map(|g| axes.iter().map(move |&a| g[a]))
            .collect();
        let ginf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(ginf > 0.0) {
            converged = true;
            break;
        }
        let base = flatten(&x, &axes);
        let mut step = step0;
        let mut accepted = None;
        while step >= min_step {
            let moved: Vec<f64> = base
                .iter()
                .zip(&g)
                .map(|(b, gi)| b + step * gi / ginf)
                .collect();
            let cand = repair(&unflatten(&moved, &axes, region), region);
            let fc = eval.value(&cand);
            evaluations += 1;
            if fc > f {
                accepted = Some((cand, fc));
                break;
            }
            step /= 2.0;
        }
        match accepted {
            Some((cand, fc)) => {
                let gain = fc - f;
                x = cand;
                f = fc;
                trace.push(f);
                if gain <= config.tol * f.abs() {
                    converged = true;
                }
            }
            None => converged = true,
        }
    }
    StartRun {
        positions: x,
        value: f,
        trace,
        evaluations,
        converged,
    }
}
