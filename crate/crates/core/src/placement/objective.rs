use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::field_channel::PathSet;
use crate::geometry::{Position3D, WaveVector};
use crate::{Error, Result};

/// One receiver of a multiuser downlink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserLink {
    pub pathset: PathSet,
    /// Position of the user's single receive antenna.
    pub position: Position3D,
    pub weight: f64,
}

/// What a placement maximizes. The optimized antennas are always the Tx side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Objective {
    /// `Σ_n |h(t_n, peer)|²`: received power under maximum-ratio transmission.
    SingleLinkGain { pathset: PathSet, peer: Position3D },
    /// Water-filled capacity toward a fixed receive array; `snr` is total power over noise.
    MimoCapacity {
        pathset: PathSet,
        rx_positions: Vec<Position3D>,
        snr: f64,
    },
    /// Weighted sum-rate under zero-forcing with weighted water-filling across users.
    MultiuserWsr { users: Vec<UserLink>, snr: f64 },
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        let positive = |snr: f64| {
            if snr > 0.0 && snr.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "snr {snr} must be positive and finite"
                )))
            }
        };
        match self {
            Objective::SingleLinkGain { peer, .. } => {
                if !peer.is_finite() {
                    return Err(Error::Config("peer position must be finite".into()));
                }
            }
            Objective::MimoCapacity {
                rx_positions, snr, ..
            } => {
                positive(*snr)?;
                if rx_positions.is_empty() || rx_positions.iter().any(|p| !p.is_finite()) {
                    return Err(Error::Config(
                        "receive array must be non-empty and finite".into(),
                    ));
                }
            }
            Objective::MultiuserWsr { users, snr } => {
                positive(*snr)?;
                if users.is_empty() {
                    return Err(Error::Config(
                        "multiuser objective needs at least one user".into(),
                    ));
                }
                let lambda = users[0].pathset.wavelength();
                for (k, u) in users.iter().enumerate() {
                    if !(u.weight >= 0.0 && u.weight.is_finite()) {
                        return Err(Error::Config(format!(
                            "user {k} weight must be non-negative"
                        )));
                    }
                    if !u.position.is_finite() {
                        return Err(Error::Config(format!("user {k} position must be finite")));
                    }
                    if u.pathset.wavelength() != lambda {
                        return Err(Error::Config("all users must share one wavelength".into()));
                    }
                }
                if users.iter().all(|u| u.weight == 0.0) {
                    return Err(Error::Config(
                        "at least one user weight must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        match self {
            Objective::SingleLinkGain { pathset, .. } | Objective::MimoCapacity { pathset, .. } => {
                pathset.wavelength()
            }
            Objective::MultiuserWsr { users, .. } => users[0].pathset.wavelength(),
        }
    }

    /// Multiplies every path gain by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Objective::SingleLinkGain { pathset, .. } | Objective::MimoCapacity { pathset, .. } => {
                *pathset = pathset.scaled(factor);
            }
            Objective::MultiuserWsr { users, .. } => {
                for u in users {
                    u.pathset = u.pathset.scaled(factor);
                }
            }
        }
        out
    }

    pub(crate) fn links(&self) -> LinkMatrix {
        match self {
            Objective::SingleLinkGain { pathset, peer } => LinkMatrix {
                rows: vec![LinkTerms::toward(pathset, *peer)],
            },
            Objective::MimoCapacity {
                pathset,
                rx_positions,
                ..
            } => LinkMatrix {
                rows: rx_positions
                    .iter()
                    .map(|r| LinkTerms::toward(pathset, *r))
                    .collect(),
            },
            Objective::MultiuserWsr { users, .. } => LinkMatrix {
                rows: users
                    .iter()
                    .map(|u| LinkTerms::toward(&u.pathset, u.position))
                    .collect(),
            },
        }
    }

    /// Objective value at `positions` (no feasibility check).
    pub(crate) fn value_with(&self, links: &LinkMatrix, positions: &[Position3D]) -> f64 {
        let h = links.channel(positions);
        match self {
            Objective::SingleLinkGain { .. } => h.iter().map(|c| c.norm_sqr()).sum(),
            Objective::MimoCapacity { snr, .. } => mimo_capacity(&h, *snr).map_or(0.0, |c| c.value),
            Objective::MultiuserWsr { users, snr } => {
                let w: Vec<f64> = users.iter().map(|u| u.weight).collect();
                zf_wsr(&h, &w, *snr).map_or(0.0, |z| z.value)
            }
        }
    }

    /// Gradient with respect to every antenna coordinate, `[∂/∂x, ∂/∂y, ∂/∂z]` per antenna.
    pub(crate) fn gradient_with(
        &self,
        links: &LinkMatrix,
        positions: &[Position3D],
    ) -> Vec<[f64; 3]> {
        let h = links.channel(positions);
        let d = links.derivatives(positions);
        let n = positions.len();
        let mut grad = vec![[0.0; 3]; n];
        match self {
            Objective::SingleLinkGain { .. } => {
                for m in 0..n {
                    for c in 0..3 {
                        grad[m][c] = 2.0 * (h[(0, m)].conj() * d[c][(0, m)]).re;
                    }
                }
            }
            Objective::MimoCapacity { snr, .. } => {
                let Some(cap) = mimo_capacity(&h, *snr) else {
                    return grad;
                };
                // dC = (2/ln2) Re tr[M dH Q Hᴴ], M = (I + H Q Hᴴ)⁻¹.
                let g = &cap.q * h.adjoint() * &cap.m;
                for m in 0..n {
                    for c in 0..3 {
                        let s: Complex64 = (0..h.nrows()).map(|r| g[(m, r)] * d[c][(r, m)]).sum();
                        grad[m][c] = 2.0 / LN_2 * s.re;
                    }
                }
            }
            Objective::MultiuserWsr { users, snr } => {
                let w: Vec<f64> = users.iter().map(|u| u.weight).collect();
                let Some(z) = zf_wsr(&h, &w, *snr) else {
                    return grad;
                };
                let hb = h.adjoint() * &z.b;
                let k_users = h.nrows();
                let beta: Vec<f64> = (0..k_users)
                    .map(|k| {
                        let bkk = z.b[(k, k)].re;
                        w[k] * z.power[k] / (LN_2 * (1.0 + z.power[k] * z.gain[k])) * 2.0
                            / (bkk * bkk)
                    })
                    .collect();
                for c in 0..3 {
                    let bd = &z.b * &d[c];
                    for m in 0..n {
                        grad[m][c] = (0..k_users)
                            .filter(|&k| beta[k] != 0.0)
                            .map(|k| beta[k] * (bd[(k, m)] * hb[(m, k)]).re)
                            .sum();
                    }
                }
            }
        }
        grad
    }
}

/// Channel from a moving Tx antenna at `t` to one fixed receiver: `Σ_l c_l e^{jκ k_lᵀ t}`.
#[derive(Debug, Clone)]
pub(crate) struct LinkTerms {
    kappa: f64,
    coeffs: Vec<Complex64>,
    waves: Vec<WaveVector>,
}

impl LinkTerms {
    fn toward(ps: &PathSet, r: Position3D) -> Self {
        Self {
            kappa: ps.wavenumber(),
            coeffs: ps.tx_coefficients(r),
            waves: ps.tx_waves().to_vec(),
        }
    }

    fn eval(&self, t: &Position3D) -> Complex64 {
        self.coeffs
            .iter()
            .zip(&self.waves)
            .map(|(c, k)| c * Complex64::from_polar(1.0, self.kappa * k.dot(t)))
            .sum()
    }

    fn eval_grad(&self, t: &Position3D) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (c, k) in self.coeffs.iter().zip(&self.waves) {
            let e = c
                * Complex64::from_polar(1.0, self.kappa * k.dot(t))
                * Complex64::new(0.0, self.kappa);
            out[0] += e * k.kx;
            out[1] += e * k.ky;
            out[2] += e * k.kz;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LinkMatrix {
    rows: Vec<LinkTerms>,
}

impl LinkMatrix {
    /// `H[k, m]`: receiver `k`, Tx antenna `m`.
    pub(crate) fn channel(&self, positions: &[Position3D]) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows.len(), positions.len(), |k, m| {
            self.rows[k].eval(&positions[m])
        })
    }

    /// `∂H[k, m]/∂t_m` along x, y and z.
    fn derivatives(&self, positions: &[Position3D]) -> [DMatrix<Complex64>; 3] {
        let mut out = [(); 3].map(|_| DMatrix::zeros(self.rows.len(), positions.len()));
        for (k, row) in self.rows.iter().enumerate() {
            for (m, t) in positions.iter().enumerate() {
                let g = row.eval_grad(t);
                for c in 0..3 {
                    out[c][(k, m)] = g[c];
                }
            }
        }
        out
    }

    /// Per-antenna channel vectors toward all receivers for a candidate position.
    pub(crate) fn column(&self, t: &Position3D) -> DVector<Complex64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.eval(t)))
    }
}

/// Maximizes `Σ w_k ln(1 + p_k g_k)` subject to `Σ p_k = total`, `p ≥ 0`.
///
/// Closed form `p_k = (w_k ν − 1/g_k)⁺`; channels with `w_k g_k = 0` get no power.
pub fn weighted_water_filling(gains: &[f64], weights: &[f64], total: f64) -> Vec<f64> {
    let n = gains.len();
    let mut order: Vec<usize> = (0..n)
        .filter(|&k| gains[k] > 0.0 && weights[k] > 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        (weights[b] * gains[b])
            .total_cmp(&(weights[a] * gains[a]))
            .then(a.cmp(&b))
    });
    let mut p = vec![0.0; n];
    if order.is_empty() || !(total > 0.0) {
        return p;
    }
    let mut nu = 0.0;
    let mut active = 0;
    let (mut inv_sum, mut w_sum) = (0.0, 0.0);
    for (s, &k) in order.iter().enumerate() {
        inv_sum += 1.0 / gains[k];
        w_sum += weights[k];
        let cand = (total + inv_sum) / w_sum;
        if weights[k] * gains[k] * cand > 1.0 {
            nu = cand;
            active = s + 1;
        } else {
            break;
        }
    }
    for &k in &order[..active] {
        p[k] = (weights[k] * nu - 1.0 / gains[k]).max(0.0);
    }
    p
}

pub(crate) struct Capacity {
    pub value: f64,
    /// Optimal input covariance.
    pub q: DMatrix<Complex64>,
    /// `(I + H Q Hᴴ)⁻¹`.
    pub m: DMatrix<Complex64>,
}

/// Water-filled capacity with unit noise and total transmit power `snr`.
pub(crate) fn mimo_capacity(h: &DMatrix<Complex64>, snr: f64) -> Option<Capacity> {
    let (nr, nt) = h.shape();
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t?;
    let gains: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    let ones = vec![1.0; gains.len()];
    let p = weighted_water_filling(&gains, &ones, snr);
    let value = gains
        .iter()
        .zip(&p)
        .map(|(g, p)| (1.0 + p * g).log2())
        .sum();
    let mut q = DMatrix::zeros(nt, nt);
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            let v = v_t.row(i).adjoint();
            q += &v * v.adjoint() * Complex64::new(pi, 0.0);
        }
    }
    let m = (DMatrix::identity(nr, nr) + h * &q * h.adjoint()).try_inverse()?;
    Some(Capacity { value, q, m })
}

pub(crate) struct ZfWsr {
    pub value: f64,
    /// `(H Hᴴ)⁻¹`.
    pub b: DMatrix<Complex64>,
    /// Post-ZF SNR per unit power, `1/B_kk`.
    pub gain: Vec<f64>,
    pub power: Vec<f64>,
}

/// Reciprocal condition number below which the ZF Gram matrix counts as singular.
const ZF_RCOND: f64 = 1e-12;

/// ZF weighted sum-rate with unit noise and total power `snr`; `None` when ZF is infeasible.
pub(crate) fn zf_wsr(h: &DMatrix<Complex64>, weights: &[f64], snr: f64) -> Option<ZfWsr> {
    let (k, n) = h.shape();
    if n < k {
        return None;
    }
    let gram = h * h.adjoint();
    let ev = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    if !(hi > 0.0) || lo <= ZF_RCOND * hi {
        return None;
    }
    let b = gram.try_inverse()?;
    let gain: Vec<f64> = (0..k).map(|i| 1.0 / b[(i, i)].re).collect();
    if gain.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return None;
    }
    let power = weighted_water_filling(&gain, weights, snr);
    let value = (0..k)
        .map(|i| weights[i] * (1.0 + power[i] * gain[i]).log2())
        .sum();
    Some(ZfWsr {
        value,
        b,
        gain,
        power,
    })
}
