#![allow(dead_code)]

use ma_toolkit::field_channel::{random_pathset, PathSet, PathSetSpec, PrmStyle};
use ma_toolkit::geometry::{MovingRegion, PathAngles, Position3D};
use ma_toolkit::placement::{
    objective_gradient, objective_value, Objective, PlacementProblem, UserLink,
};
use ma_toolkit::Complex64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const LAMBDA: f64 = 0.01;

pub fn cscg(rng: &mut ChaCha8Rng) -> Complex64 {
    let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Complex64::new(a, b)
}

/// One moving Tx antenna, two Tx paths, one Rx path, receiver at the origin.
pub struct TwoPath {
    pub problem: PlacementProblem,
    pub sigma: [Complex64; 2],
    pub waves: [[f64; 2]; 2],
}

pub fn two_path_siso(seed: u64, side_lambdas: f64) -> TwoPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tx = vec![PathAngles::random(&mut rng), PathAngles::random(&mut rng)];
    let rx = vec![PathAngles::random(&mut rng)];
    let sigma = [cscg(&mut rng), cscg(&mut rng)];
    let prm = DMatrix::from_row_slice(1, 2, &sigma);
    let ps = PathSet::new(tx.clone(), rx, prm, LAMBDA).unwrap();
    let waves = [0, 1].map(|l| {
        let (e, a) = (tx[l].elevation, tx[l].azimuth);
        [e.cos() * a.cos(), e.cos() * a.sin()]
    });
    let region = MovingRegion::centered_square(side_lambdas * LAMBDA, 0.0).unwrap();
    let objective = Objective::SingleLinkGain {
        pathset: ps,
        peer: Position3D::ORIGIN,
    };
    TwoPath {
        problem: PlacementProblem::new(objective, region, 1).unwrap(),
        sigma,
        waves,
    }
}

impl TwoPath {
    /// Upper bound `(|σ₁| + |σ₂|)²`.
    pub fn ideal(&self) -> f64 {
        (self.sigma[0].norm() + self.sigma[1].norm()).powi(2)
    }

    /// Brute-force maximum of `|σ₁ e^{jκk₁ᵀt} + σ₂ e^{jκk₂ᵀt}|²` on a grid of pitch `res·λ`.
    pub fn grid_optimum(&self, res: f64) -> f64 {
        let r = &self.problem.region;
        let step = res * LAMBDA;
        let nx = ((r.upper.x - r.lower.x) / step).round() as usize + 1;
        let ny = ((r.upper.y - r.lower.y) / step).round() as usize + 1;
        let kappa = 2.0 * std::f64::consts::PI / LAMBDA;
        (0..ny)
            .into_par_iter()
            .map(|j| {
                let y = r.lower.y + j as f64 * step;
                let mut best = 0.0f64;
                for i in 0..nx {
                    let x = r.lower.x + i as f64 * step;
                    let h: Complex64 = (0..2)
                        .map(|l| {
                            self.sigma[l]
                                * Complex64::from_polar(
                                    1.0,
                                    kappa * (self.waves[l][0] * x + self.waves[l][1] * y),
                                )
                        })
                        .sum();
                    best = best.max(h.norm_sqr());
                }
                best
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Fraction of `flags` that are true.
pub fn rate(flags: &[bool]) -> f64 {
    flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64
}

pub fn spec(l: usize) -> PathSetSpec {
    PathSetSpec {
        tx_paths: l,
        rx_paths: l,
        prm_style: PrmStyle::Diagonal,
        gain_variance: 1.0 / l as f64,
        wavelength: LAMBDA,
    }
}

pub fn wsr_problem(seed: u64, k: usize, n: usize, side: f64) -> PlacementProblem {
    let users = (0..k)
        .map(|u| UserLink {
            pathset: random_pathset(&spec(4), seed * 16 + u as u64).unwrap(),
            position: Position3D::ORIGIN,
            weight: 1.0 + 0.25 * u as f64,
        })
        .collect();
    let region = MovingRegion::centered_square(side * LAMBDA, LAMBDA / 2.0).unwrap();
    PlacementProblem::new(Objective::MultiuserWsr { users, snr: 10.0 }, region, n).unwrap()
}

pub fn mimo_problem(seed: u64) -> PlacementProblem {
    let ps = random_pathset(
        &PathSetSpec {
            prm_style: PrmStyle::Full,
            ..spec(3)
        },
        seed,
    )
    .unwrap();
    let rx = vec![Position3D::ORIGIN, Position3D::xy(LAMBDA / 2.0, 0.0)];
    let region = MovingRegion::centered_square(2.0 * LAMBDA, LAMBDA / 2.0).unwrap();
    PlacementProblem::new(
        Objective::MimoCapacity {
            pathset: ps,
            rx_positions: rx,
            snr: 4.0,
        },
        region,
        2,
    )
    .unwrap()
}

pub fn random_positions(rng: &mut ChaCha8Rng, n: usize, half: f64) -> Vec<Position3D> {
    (0..n)
        .map(|_| Position3D::xy(rng.random_range(-half..half), rng.random_range(-half..half)))
        .collect()
}

/// Largest relative error of the analytic gradient against central differences.
pub fn gradient_error(problem: &PlacementProblem, positions: &[Position3D]) -> f64 {
    let g = objective_gradient(problem, positions);
    let h = 1e-7 * LAMBDA;
    let f = |p: &[Position3D]| problem.evaluator_value(p);
    let mut scale = 0.0f64;
    let mut err = 0.0f64;
    for m in 0..positions.len() {
        for c in 0..2 {
            let mut plus = positions.to_vec();
            let mut minus = positions.to_vec();
            let mut a = plus[m].to_array();
            a[c] += h;
            plus[m] = Position3D::from_array(a);
            let mut b = minus[m].to_array();
            b[c] -= h;
            minus[m] = Position3D::from_array(b);
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            err = err.max((fd - g[m][c]).abs());
            scale = scale.max(g[m][c].abs());
        }
    }
    err / scale.max(f64::MIN_POSITIVE)
}

pub trait Unchecked {
    fn evaluator_value(&self, p: &[Position3D]) -> f64;
}

impl Unchecked for PlacementProblem {
    fn evaluator_value(&self, p: &[Position3D]) -> f64 {
        let loose = PlacementProblem {
            region: MovingRegion::centered_square(1.0, 0.0).unwrap(),
            ..self.clone()
        };
        objective_value(&loose, p).unwrap()
    }
}
