use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::discrete::candidate_lattice;
use super::{Objective, PlacementProblem, PlacementResult, RunStatus, FEASIBILITY_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsConfig {
    /// Candidate lattice pitch in wavelengths.
    pub candidate_step: f64,
}

impl Default for CsConfig {
    fn default() -> Self {
        Self {
            candidate_step: 0.125,
        }
    }
}

/// Sparse selection of active positions from a candidate lattice.
///
/// Each candidate is described by its channel vector toward all receivers.
/// Candidates are picked one by one, maximizing the energy of their channel
/// outside the span of the channels already chosen (plain channel energy once
/// that span is full); candidates closer than `min_spacing` to a pick are
/// excluded. Only objectives with this linear-synthesis form are accepted.
pub fn cs_placement(problem: &PlacementProblem, config: &CsConfig) -> Result<PlacementResult> {
    problem.validate()?;
    if let Objective::MimoCapacity { .. } = problem.objective {
        return Err(Error::UnsupportedObjective(
            "sparse selection needs a per-position synthesis vector; MIMO capacity has none".into(),
        ));
    }
    let eval = problem.evaluator();
    let candidates =
        candidate_lattice(&problem.region, config.candidate_step * problem.wavelength)?;
    let columns: Vec<DVector<Complex64>> =
        candidates.iter().map(|c| eval.channel_column(c)).collect();
    let dim = columns.first().map_or(0, |c| c.len());
    let s = problem.region.min_spacing;

    let mut selected: Vec<usize> = Vec::with_capacity(problem.n_antennas);
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    let mut excluded = vec![false; candidates.len()];
    for k in 0..problem.n_antennas {
        let full = basis.len() >= dim;
        let mut best: Option<(usize, f64, DVector<Complex64>)> = None;
        for (j, d) in columns.iter().enumerate() {
            if excluded[j] {
                continue;
            }
            let mut r = d.clone();
            if !full {
                for q in &basis {
                    r -= q * q.dotc(d);
                }
            }
            let score = if full {
                d.norm_squared()
            } else {
                r.norm_squared()
            };
            if best.as_ref().is_none_or(|(_, b, _)| score > *b) {
                best = Some((j, score, r));
            }
        }
        let (j, _, r) = best.ok_or_else(|| {
            Error::Infeasible(format!(
                "no candidate left for antenna {k} at the required spacing"
            ))
        })?;
        selected.push(j);
        if !full {
            let rn = r.norm();
            if rn > 1e-12 * columns[j].norm().max(f64::MIN_POSITIVE) {
                basis.push(r / Complex64::new(rn, 0.0));
            }
        }
        for (i, c) in candidates.iter().enumerate() {
            if i == j || c.distance(&candidates[j]) < s - FEASIBILITY_TOL {
                excluded[i] = true;
            }
        }
    }

    let positions: Vec<_> = selected.iter().map(|&j| candidates[j]).collect();
    let value = eval.value(&positions);
    Ok(PlacementResult {
        positions,
        objective_value: value,
        trace: vec![value],
        evaluations: candidates.len() + 1,
        status: RunStatus::Converged,
    })
}
