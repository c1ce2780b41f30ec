use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    flatten, fpa_layout, free_axes, push_best, random_layout, repair, spacing_violation, unflatten,
};
use super::{PlacementProblem, PlacementResult, RunStatus};
use crate::geometry::{clamp_to_region, MovingRegion, Position3D};
use crate::{Error, Result};

type Measure<'a> = Box<dyn FnMut(&[Position3D]) -> f64 + 'a>;

/// Black-box performance measurements at requested antenna positions, with a call budget.
pub struct MeasurementOracle<'a> {
    measure: Measure<'a>,
    budget: usize,
    calls: usize,
}

impl<'a> MeasurementOracle<'a> {
    pub fn new(budget: usize, measure: impl FnMut(&[Position3D]) -> f64 + 'a) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Config(
                "oracle budget must be at least one call".into(),
            ));
        }
        Ok(Self {
            measure: Box::new(measure),
            budget,
            calls: 0,
        })
    }

    /// Oracle returning the problem's objective plus optional Gaussian noise of standard deviation `noise_std`.
    pub fn from_problem(
        problem: &'a PlacementProblem,
        budget: usize,
        noise_std: f64,
        seed: u64,
    ) -> Result<Self> {
        let noise = Normal::new(0.0, noise_std).map_err(|_| {
            Error::Config(format!("noise standard deviation {noise_std} is invalid"))
        })?;
        let eval = problem.evaluator();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(budget, move |p| {
            let v = eval.value(p);
            if noise_std > 0.0 {
                v + noise.sample(&mut rng)
            } else {
                v
            }
        })
    }

    /// One measurement, or `None` once the budget is spent.
    pub fn measure(&mut self, positions: &[Position3D]) -> Option<f64> {
        if self.calls >= self.budget {
            return None;
        }
        self.calls += 1;
        Some((self.measure)(positions))
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.calls
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoConfig {
    /// Length unit (normally the carrier wavelength) for `mu`, `step` and the spacing penalty.
    pub wavelength: f64,
    /// Finite-difference smoothing radius, in wavelengths.
    pub mu: f64,
    pub directions: usize,
    pub iters: usize,
    /// Initial step in wavelengths; decays as `1/√(t+1)`.
    pub step: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Penalty weight relative to the first measurement's magnitude.
    pub penalty: f64,
    pub seed: u64,
    /// Starting layout; the fixed-position baseline when absent.
    pub init: Option<Vec<Position3D>>,
}

impl Default for ZoConfig {
    fn default() -> Self {
        Self {
            wavelength: 0.0,
            mu: 0.01,
            directions: 4,
            iters: 400,
            step: 0.25,
            beta1: 0.9,
            beta2: 0.99,
            penalty: 100.0,
            seed: 0,
            init: None,
        }
    }
}

impl ZoConfig {
    pub fn for_wavelength(wavelength: f64) -> Self {
        Self {
            wavelength,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::Config(
                "ZO wavelength must be set and positive".into(),
            ));
        }
        if !(self.mu > 0.0 && self.step > 0.0) || self.directions == 0 || self.iters == 0 {
            return Err(Error::Config(
                "ZO needs positive mu, step, directions and iters".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config(
                "momentum parameters must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Oracle calls a full run needs.
    pub fn required_budget(&self) -> usize {
        self.iters * (self.directions + 1)
    }
}

fn estimate<R: Rng + ?Sized>(
    f: &mut impl FnMut(&[f64]) -> Option<f64>,
    x: &[f64],
    fx: f64,
    mu: f64,
    directions: usize,
    rng: &mut R,
) -> Option<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    for _ in 0..directions {
        let u: Vec<f64> = (0..x.len()).map(|_| StandardNormal.sample(rng)).collect();
        let probe: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + mu * b).collect();
        let diff = (f(&probe)? - fx) / mu;
        for (gi, ui) in g.iter_mut().zip(&u) {
            *gi += diff * ui;
        }
    }
    for gi in &mut g {
        *gi /= directions as f64;
    }
    Some(g)
}

/// Forward-difference gradient estimate averaged over `directions` Gaussian directions.
pub fn zo_gradient_estimate<R: Rng + ?Sized>(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    mu: f64,
    directions: usize,
    rng: &mut R,
) -> Vec<f64> {
    let fx = f(x);
    estimate(
        &mut |p: &[f64]| Some(f(p)),
        x,
        fx,
        mu,
        directions.max(1),
        rng,
    )
    .expect("unbounded oracle")
}

/// CSI-free placement: gradient estimates from oracle samples drive an
/// adaptive-momentum ascent (AdaMM with `v̂ = max(v̂, v)`), with spacing-repair
/// after every step. Each iteration spends `directions + 1` calls.
pub fn zo_placement(
    oracle: &mut MeasurementOracle<'_>,
    region: &MovingRegion,
    n_antennas: usize,
    config: &ZoConfig,
) -> Result<PlacementResult> {
    config.validate()?;
    region.validate()?;
    region.ensure_capacity(n_antennas)?;
    if n_antennas == 0 {
        return Err(Error::Config("placement needs at least one antenna".into()));
    }
    let lambda = config.wavelength;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let axes = free_axes(region);
    let start = match &config.init {
        Some(p) if p.len() == n_antennas => repair(p, region),
        Some(p) => {
            return Err(Error::Dimension(format!(
                "initial layout has {} antennas, expected {n_antennas}",
                p.len()
            )))
        }
        None => fpa_layout(region, n_antennas, lambda)
            .unwrap_or_else(|_| random_layout(region, n_antennas, &mut rng)),
    };
    let mut x = flatten(&start, &axes);
    let mu = config.mu * lambda;
    let s = region.min_spacing;

    let mut weight: Option<f64> = None;
    let penalty = config.penalty;
    let mut penalized = |x: &[f64], oracle: &mut MeasurementOracle<'_>| -> Option<(f64, f64)> {
        let p: Vec<Position3D> = unflatten(x, &axes, region)
            .into_iter()
            .map(|q| clamp_to_region(q, region))
            .collect();
        let raw = oracle.measure(&p)?;
        let w = *weight.get_or_insert_with(|| penalty * if raw != 0.0 { raw.abs() } else { 1.0 });
        Some((raw, raw - w * spacing_violation(&p, s, lambda)))
    };

    let mut m: Vec<f64> = vec![0.0; x.len()];
    let mut v: Vec<f64> = vec![0.0; x.len()];
    let mut v_hat: Vec<f64> = vec![0.0; x.len()];
    let mut best: Option<(Vec<Position3D>, f64)> = None;
    let mut trace = Vec::new();
    let mut status = RunStatus::IterationLimit;

    for t in 0..config.iters {
        let Some((raw, fx)) = penalized(&x, oracle) else {
            status = RunStatus::BudgetExhausted;
            break;
        };
        // x is always repaired, so every base point is feasible.
        if best.as_ref().is_none_or(|(_, b)| raw > *b) {
            best = Some((unflatten(&x, &axes, region), raw));
        }
        push_best(&mut trace, best.as_ref().map_or(raw, |b| b.1));
        let g = estimate(
            &mut |p: &[f64]| penalized(p, oracle).map(|r| r.1),
            &x,
            fx,
            mu,
            config.directions,
            &mut rng,
        );
        let Some(g) = g else {
            status = RunStatus::BudgetExhausted;
            break;
        };
        let step = config.step * lambda / ((t + 1) as f64).sqrt();
        for i in 0..x.len() {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            v_hat[i] = v_hat[i].max(v[i]);
            if v_hat[i] > 0.0 {
                x[i] += step * m[i] / v_hat[i].sqrt();
            }
        }
        x = flatten(&repair(&unflatten(&x, &axes, region), region), &axes);
    }

    let (positions, value) =
        best.ok_or_else(|| Error::Config("oracle budget allowed no measurement".into()))?;
    Ok(PlacementResult {
        positions,
        objective_value: value,
        trace,
        evaluations: oracle.calls(),
        status,
    })
}
