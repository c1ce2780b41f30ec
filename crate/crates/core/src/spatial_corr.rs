//! Jakes spatial correlation across discrete ports and eigen-truncated sampling of
//! correlated port channels.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field_channel::cscg;
use crate::special::bessel_j0;
use crate::{Error, Result};

/// Residual variances down to this value are treated as rounding noise and clamped to zero.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// `n` ports evenly spread over a line of `w` wavelengths, with large-scale power `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortGrid {
    pub n: usize,
    pub w: f64,
    pub sigma2: f64,
}

impl PortGrid {
    pub fn new(n: usize, w: f64, sigma2: f64) -> Result<Self> {
        let g = Self { n, w, sigma2 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config("a port grid needs at least 2 ports".into()));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::Config("port span W must be positive".into()));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config("large-scale power must be positive".into()));
        }
        Ok(())
    }
}

/// Real symmetric port correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(pub DMatrix<f64>);

impl CorrelationMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// `Λ[m, n] = σ² J₀(2π (m − n) W / (N − 1))`.
pub fn jakes_correlation(grid: &PortGrid) -> CorrelationMatrix {
    let n = grid.n;
    let step = 2.0 * PI * grid.w / (n - 1) as f64;
    // Toeplitz: one Bessel evaluation per lag.
    let lags: Vec<f64> = (0..n)
        .map(|d| grid.sigma2 * bessel_j0(step * d as f64))
        .collect();
    CorrelationMatrix(DMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)]))
}

/// Dominant eigenpairs of a correlation matrix above an absolute threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTruncation {
    pub threshold: f64,
    /// Non-increasing, each above `threshold`.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal, aligned with `eigenvalues`.
    pub eigenvectors: Vec<DVector<f64>>,
    pub dim: usize,
}

impl EigenTruncation {
    /// The ε-rank: number of retained eigenpairs.
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ λ_m u_m u_mᵀ`.
    pub fn reconstruction(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (l, u) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            out += u * u.transpose() * *l;
        }
        out
    }

    /// Per-port variance left for the independent term, `σ² − Σ_m u_{n,m}² λ_m`.
    pub fn residual_variances(&self, sigma2: f64) -> Result<Vec<f64>> {
        (0..self.dim)
            .map(|n| {
                let shared: f64 = self
                    .eigenvalues
                    .iter()
                    .zip(&self.eigenvectors)
                    .map(|(l, u)| u[n] * u[n] * l)
                    .sum();
                let r = sigma2 - shared;
                if r < -RESIDUAL_TOLERANCE {
                    Err(Error::Numerical(format!(
                        "port {n} residual variance {r} is negative beyond tolerance"
                    )))
                } else {
                    Ok(r.max(0.0))
                }
            })
            .collect()
    }

    /// Covariance of the sampled port vector: truncated reconstruction plus residual diagonal.
    pub fn model_covariance(&self, sigma2: f64) -> Result<DMatrix<f64>> {
        let mut c = self.reconstruction();
        for (n, r) in self.residual_variances(sigma2)?.into_iter().enumerate() {
            c[(n, n)] += r;
        }
        Ok(c)
    }
}

/// Keeps the eigenpairs of `lambda` whose eigenvalue exceeds `epsilon`, sorted non-increasing.
///
/// An empty result is valid: sampling then degenerates to independent ports.
pub fn eigen_truncate(lambda: &CorrelationMatrix, epsilon: f64) -> Result<EigenTruncation> {
    let m = lambda.matrix();
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension("correlation matrix must be square".into()));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::Domain("correlation matrix must be symmetric".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(
            "eigenvalue threshold must be positive".into(),
        ));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > epsilon)
        .collect();
    Ok(EigenTruncation {
        threshold: epsilon,
        eigenvalues: keep.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors: keep
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect(),
        dim: n,
    })
}

/// One realization of the correlated port channels.
///
/// `h_n = sqrt(σ² − Σ_m u_{n,m}² λ_m)·v_n + Σ_m u_{n,m} sqrt(λ_m)·z_m`, where
/// every `v_n` and `z_m` is an independent unit-variance circularly-symmetric
/// Gaussian. The `z` draws come first, then `v`.
pub fn sample_port_channels(
    tr: &EigenTruncation,
    grid: &PortGrid,
    seed: u64,
) -> Result<Vec<Complex64>> {
    grid.validate()?;
    if tr.dim != grid.n {
        return Err(Error::Dimension(format!(
            "truncation has dimension {} but the grid has {} ports",
            tr.dim, grid.n
        )));
    }
    let residual = tr.residual_variances(grid.sigma2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<Complex64> = (0..tr.rank()).map(|_| cscg(&mut rng, 1.0)).collect();
    let v: Vec<Complex64> = (0..grid.n).map(|_| cscg(&mut rng, 1.0)).collect();
    Ok((0..grid.n)
        .map(|n| {
            let shared: Complex64 = tr
                .eigenvalues
                .iter()
                .zip(&tr.eigenvectors)
                .zip(&z)
                .map(|((l, u), zm)| zm * (u[n] * l.sqrt()))
                .sum();
            v[n] * residual[n].sqrt() + shared
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cyclic Jacobi eigenvalue iteration, independent of nalgebra's solver.
    pub(crate) fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
        let n = m.nrows();
        let mut a = m.clone();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    #[test]
    fn diagonal_is_sigma2_and_symmetric() {
        let g = PortGrid::new(10, 1.7, 2.5).unwrap();
        let l = jakes_correlation(&g);
        for i in 0..10 {
            assert_eq!(l.matrix()[(i, i)], 2.5);
            for j in 0..10 {
                assert_eq!(l.matrix()[(i, j)], l.matrix()[(j, i)]);
            }
        }
    }

    #[test]
    fn two_port_entry_is_j0_of_pi() {
        // J0(π) to 20 digits.
        let g = PortGrid::new(2, 0.5, 1.0).unwrap();
        let l = jakes_correlation(&g);
        assert!((l.matrix()[(0, 1)] - (-0.304_242_177_644_093_86)).abs() < 1e-10);
    }

    #[test]
    fn identity_truncation_cases() {
        let l = CorrelationMatrix(DMatrix::identity(5, 5) * 2.0);
        let t = eigen_truncate(&l, 1.0).unwrap();
        assert_eq!(t.rank(), 5);
        assert!(t.eigenvalues.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert_eq!(eigen_truncate(&l, 3.0).unwrap().rank(), 0);
    }

    #[test]
    fn jakes_eigenvalues_match_jacobi_oracle() {
        let g = PortGrid::new(16, 1.0, 1.0).unwrap();
        let l = jakes_correlation(&g);
        let t = eigen_truncate(&l, 0.01).unwrap();
        let oracle: Vec<f64> = jacobi_eigenvalues(l.matrix())
            .into_iter()
            .filter(|v| *v > 0.01)
            .collect();
        assert_eq!(t.rank(), oracle.len());
        for (a, b) in t.eigenvalues.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        for w in t.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for (i, u) in t.eigenvectors.iter().enumerate() {
            for (j, v) in t.eigenvectors.iter().enumerate() {
                let d = u.dot(v);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-9);
            }
        }
        // Trace reconstruction error bounded by N·ε.
        let err = (l.matrix().trace() - t.reconstruction().trace()).abs();
        assert!(err <= 16.0 * 0.01);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 0.5;
        assert!(matches!(
            eigen_truncate(&CorrelationMatrix(m), 0.1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn empty_truncation_samples_independent_ports() {
        let g = PortGrid::new(4, 1.0, 3.0).unwrap();
        let t = eigen_truncate(&CorrelationMatrix(DMatrix::identity(4, 4) * 3.0), 5.0).unwrap();
        let h = sample_port_channels(&t, &g, 17).unwrap();
        // Same stream as four unit CSCG draws scaled by sqrt(σ²).
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for hn in h {
            let v = cscg(&mut rng, 1.0) * 3f64.sqrt();
            assert!((hn - v).norm() < 1e-12);
        }
    }

    #[test]
    fn negative_residual_is_an_error() {
        let g = PortGrid::new(2, 1.0, 1.0).unwrap();
        let t = EigenTruncation {
            threshold: 0.1,
            eigenvalues: vec![3.0],
            eigenvectors: vec![DVector::from_vec(vec![1.0, 0.0])],
            dim: 2,
        };
        assert!(matches!(
            sample_port_channels(&t, &g, 0),
            Err(Error::Numerical(_))
        ));
        // Within tolerance clamps to zero.
        let t = EigenTruncation {
            eigenvalues: vec![1.0 + 5e-10],
            ..t
        };
        assert!(sample_port_channels(&t, &g, 0).is_ok());
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = PortGrid::new(8, 2.0, 1.0).unwrap();
        let t = eigen_truncate(&jakes_correlation(&g), 0.01).unwrap();
        assert_eq!(
            sample_port_channels(&t, &g, 5).unwrap(),
            sample_port_channels(&t, &g, 5).unwrap()
        );
    }
}
