//! Field-response channel model.
//!
//! A [`PathSet`] fixes the far-field path angles at both ends and the
//! path-response matrix (PRM) `Σ` coupling Rx paths (rows) to Tx paths
//! (columns). The channel between a Tx antenna at `t` and an Rx antenna at
//! `r` is `h(t, r) = f(r)ᴴ Σ g(t)`, where `g` and `f` are the Tx and Rx
//! field-response vectors (FRVs).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{wave_vector_unchecked, MovingRegion, PathAngles, Position3D, WaveVector};
use crate::{Error, Result};

/// Multipath geometry and gains defining a channel over antenna positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathSetRecord", into = "PathSetRecord")]
pub struct PathSet {
    tx_paths: Vec<PathAngles>,
    rx_paths: Vec<PathAngles>,
    prm: DMatrix<Complex64>,
    wavelength: f64,
    tx_waves: Vec<WaveVector>,
    rx_waves: Vec<WaveVector>,
}

impl PathSet {
    /// `prm` must be `rx_paths.len() × tx_paths.len()`.
    pub fn new(
        tx_paths: Vec<PathAngles>,
        rx_paths: Vec<PathAngles>,
        prm: DMatrix<Complex64>,
        wavelength: f64,
    ) -> Result<Self> {
        if tx_paths.is_empty() || rx_paths.is_empty() {
            return Err(Error::Config(
                "a path set needs at least one Tx and one Rx path".into(),
            ));
        }
        if prm.nrows() != rx_paths.len() || prm.ncols() != tx_paths.len() {
            return Err(Error::Dimension(format!(
                "PRM is {}×{} but there are {} Rx and {} Tx paths",
                prm.nrows(),
                prm.ncols(),
                rx_paths.len(),
                tx_paths.len()
            )));
        }
        if prm.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Config("PRM entries must be finite".into()));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::Config(format!(
                "wavelength {wavelength} must be positive"
            )));
        }
        for a in tx_paths.iter().chain(&rx_paths) {
            a.validate()?;
        }
        let tx_waves = tx_paths.iter().map(wave_vector_unchecked).collect();
        let rx_waves = rx_paths.iter().map(wave_vector_unchecked).collect();
        Ok(Self {
            tx_paths,
            rx_paths,
            prm,
            wavelength,
            tx_waves,
            rx_waves,
        })
    }

    /// Line-of-sight channel: one path at each end.
    pub fn line_of_sight(
        tx: PathAngles,
        rx: PathAngles,
        gain: Complex64,
        wavelength: f64,
    ) -> Result<Self> {
        Self::new(
            vec![tx],
            vec![rx],
            DMatrix::from_element(1, 1, gain),
            wavelength,
        )
    }

    /// Geometric channel: path `l` departs along `tx[l]`, arrives along `rx[l]` with gain `gains[l]`.
    pub fn geometric(
        tx: Vec<PathAngles>,
        rx: Vec<PathAngles>,
        gains: &[Complex64],
        wavelength: f64,
    ) -> Result<Self> {
        if tx.len() != gains.len() || rx.len() != gains.len() {
            return Err(Error::Dimension(
                "geometric channel needs one gain per path pair".into(),
            ));
        }
        let prm = DMatrix::from_diagonal(&DVector::from_column_slice(gains));
        Self::new(tx, rx, prm, wavelength)
    }

    pub fn tx_paths(&self) -> &[PathAngles] {
        &self.tx_paths
    }

    pub fn rx_paths(&self) -> &[PathAngles] {
        &self.rx_paths
    }

    pub fn tx_waves(&self) -> &[WaveVector] {
        &self.tx_waves
    }

    pub fn rx_waves(&self) -> &[WaveVector] {
        &self.rx_waves
    }

    pub fn prm(&self) -> &DMatrix<Complex64> {
        &self.prm
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Copy with the PRM replaced (angles and wavelength unchanged).
    pub fn with_prm(&self, prm: DMatrix<Complex64>) -> Result<Self> {
        Self::new(
            self.tx_paths.clone(),
            self.rx_paths.clone(),
            prm,
            self.wavelength,
        )
    }

    /// Copy with every path gain multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.prm *= Complex64::new(factor, 0.0);
        out
    }

    /// Row vector `f(r)ᴴ Σ`: the effective Tx-path coefficients seen from a fixed Rx point.
    pub fn tx_coefficients(&self, r: Position3D) -> Vec<Complex64> {
        let f = rx_frv(self, r);
        (0..self.prm.ncols())
            .map(|j| {
                (0..self.prm.nrows())
                    .map(|i| f[i].conj() * self.prm[(i, j)])
                    .sum()
            })
            .collect()
    }

    /// Column vector `Σ g(t)`: the effective Rx-path coefficients seen from a fixed Tx point.
    pub fn rx_coefficients(&self, t: Position3D) -> Vec<Complex64> {
        let g = tx_frv(self, t);
        (0..self.prm.nrows())
            .map(|i| (0..self.prm.ncols()).map(|j| self.prm[(i, j)] * g[j]).sum())
            .collect()
    }
}

fn frv(waves: &[WaveVector], kappa: f64, p: Position3D) -> DVector<Complex64> {
    DVector::from_iterator(
        waves.len(),
        waves
            .iter()
            .map(|k| Complex64::from_polar(1.0, kappa * k.dot(&p))),
    )
}

/// Tx field-response vector `g(t)`, one unit-modulus phase per Tx path.
pub fn tx_frv(ps: &PathSet, t: Position3D) -> DVector<Complex64> {
    frv(&ps.tx_waves, ps.wavenumber(), t)
}

/// Rx field-response vector `f(r)`, one unit-modulus phase per Rx path.
pub fn rx_frv(ps: &PathSet, r: Position3D) -> DVector<Complex64> {
    frv(&ps.rx_waves, ps.wavenumber(), r)
}

/// Scalar channel `f(r)ᴴ Σ g(t)`.
pub fn channel_response(ps: &PathSet, t: Position3D, r: Position3D) -> Complex64 {
    let g = tx_frv(ps, t);
    let f = rx_frv(ps, r);
    let sg = &ps.prm * g;
    f.iter().zip(sg.iter()).map(|(fi, si)| fi.conj() * si).sum()
}

/// `N_r × N_t` channel matrix; entry `(n, m)` links Tx antenna `m` to Rx antenna `n`.
pub fn mimo_channel(
    ps: &PathSet,
    tx_positions: &[Position3D],
    rx_positions: &[Position3D],
) -> DMatrix<Complex64> {
    // G is L_t × N_t, F is L_r × N_r; H = Fᴴ Σ G.
    let kappa = ps.wavenumber();
    let g = DMatrix::from_fn(ps.tx_waves.len(), tx_positions.len(), |l, m| {
        Complex64::from_polar(1.0, kappa * ps.tx_waves[l].dot(&tx_positions[m]))
    });
    let f = DMatrix::from_fn(ps.rx_waves.len(), rx_positions.len(), |l, n| {
        Complex64::from_polar(1.0, kappa * ps.rx_waves[l].dot(&rx_positions[n]))
    });
    f.adjoint() * &ps.prm * g
}

/// PRM structure for randomly drawn path sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrmStyle {
    /// Every Tx path couples to every Rx path.
    Full,
    /// Path `l` at Tx couples only to path `l` at Rx.
    Diagonal,
    /// Single path at each end.
    Los,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSetSpec {
    pub tx_paths: usize,
    pub rx_paths: usize,
    pub prm_style: PrmStyle,
    /// Variance of each non-zero PRM entry.
    pub gain_variance: f64,
    pub wavelength: f64,
}

impl PathSetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tx_paths == 0 || self.rx_paths == 0 {
            return Err(Error::Config("path counts must be at least 1".into()));
        }
        match self.prm_style {
            PrmStyle::Diagonal if self.tx_paths != self.rx_paths => {
                return Err(Error::Config(
                    "diagonal PRM requires equal Tx and Rx path counts".into(),
                ))
            }
            PrmStyle::Los if self.tx_paths != 1 || self.rx_paths != 1 => {
                return Err(Error::Config(
                    "LoS PRM requires exactly one path at each end".into(),
                ))
            }
            _ => {}
        }
        if !(self.gain_variance > 0.0 && self.gain_variance.is_finite()) {
            return Err(Error::Config("gain variance must be positive".into()));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::Config("wavelength must be positive".into()));
        }
        Ok(())
    }
}

/// Circularly-symmetric complex Gaussian draw with the given total variance.
pub(crate) fn cscg<R: rand::Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let n = Normal::new(0.0, (variance / 2.0).sqrt()).expect("finite variance");
    let re = n.sample(rng);
    let im = n.sample(rng);
    Complex64::new(re, im)
}

/// Random scenario: uniform angles over their valid ranges and i.i.d.
/// circularly-symmetric Gaussian PRM entries.
///
/// The draw order is Tx angles, Rx angles, then PRM entries column by column.
pub fn random_pathset(spec: &PathSetSpec, seed: u64) -> Result<PathSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tx: Vec<_> = (0..spec.tx_paths)
        .map(|_| PathAngles::random(&mut rng))
        .collect();
    let rx: Vec<_> = (0..spec.rx_paths)
        .map(|_| PathAngles::random(&mut rng))
        .collect();
    let mut prm = DMatrix::zeros(spec.rx_paths, spec.tx_paths);
    for j in 0..spec.tx_paths {
        for i in 0..spec.rx_paths {
            if spec.prm_style == PrmStyle::Full || i == j {
                prm[(i, j)] = cscg(&mut rng, spec.gain_variance);
            }
        }
    }
    PathSet::new(tx, rx, prm, spec.wavelength)
}

/// A path set together with the regions its two ends move within.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelField {
    pub pathset: PathSet,
    pub tx_region: MovingRegion,
    pub rx_region: MovingRegion,
}

impl ChannelField {
    pub fn new(pathset: PathSet, tx_region: MovingRegion, rx_region: MovingRegion) -> Result<Self> {
        tx_region.validate()?;
        rx_region.validate()?;
        Ok(Self {
            pathset,
            tx_region,
            rx_region,
        })
    }

    pub fn response(&self, t: Position3D, r: Position3D) -> Complex64 {
        channel_response(&self.pathset, t, r)
    }
}

/// On-disk form of a [`PathSet`]; complex entries are `[re, im]` pairs, PRM row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSetRecord {
    pub wavelength: f64,
    pub tx_paths: Vec<PathAngles>,
    pub rx_paths: Vec<PathAngles>,
    pub prm: Vec<Vec<[f64; 2]>>,
}

impl From<PathSet> for PathSetRecord {
    fn from(ps: PathSet) -> Self {
        let prm = (0..ps.prm.nrows())
            .map(|i| {
                (0..ps.prm.ncols())
                    .map(|j| [ps.prm[(i, j)].re, ps.prm[(i, j)].im])
                    .collect()
            })
            .collect();
        Self {
            wavelength: ps.wavelength,
            tx_paths: ps.tx_paths,
            rx_paths: ps.rx_paths,
            prm,
        }
    }
}

impl TryFrom<PathSetRecord> for PathSet {
    type Error = Error;

    fn try_from(rec: PathSetRecord) -> Result<Self> {
        let rows = rec.prm.len();
        let cols = rec.prm.first().map_or(0, Vec::len);
        if rec.prm.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("PRM rows have unequal lengths".into()));
        }
        let prm = DMatrix::from_fn(rows, cols, |i, j| {
            Complex64::new(rec.prm[i][j][0], rec.prm[i][j][1])
        });
        PathSet::new(rec.tx_paths, rec.rx_paths, prm, rec.wavelength)
    }
}
