//! Compressed-sensing channel acquisition over 2D Tx/Rx moving regions.
//!
//! The virtual-angle domain `[-1, 1]` is quantized into `G` grid points per
//! axis. A Tx/Rx position pair then sees every (Tx grid, Rx grid) path
//! through the row `g̃(t)ᵀ ⊗ f̃(r)ᴴ`, and pilots over `M` position pairs give
//! `y = √P Ψ u + n` with `u` sparse. Two pipelines recover `u`:
//!
//! * joint: one OMP over all `G⁴` columns;
//! * successive (STRCS): OMP over Tx angles with the Rx antenna parked, OMP
//!   over Rx angles with the Tx antenna parked, then a least-squares fit of
//!   the gains of every recovered (Tx, Rx) pair on all measurements.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field_channel::{channel_response, cscg, ChannelField, PathSet};
use crate::geometry::{MovingRegion, PathAngles, Position3D};
use crate::linalg::{is_rank_deficient, lstsq};
use crate::{Error, Result};

/// Largest joint dictionary (`G⁴` columns) built without an explicit cap.
pub const DEFAULT_MAX_COLUMNS: usize = 1 << 20;

/// Residual tolerance used for noiseless campaigns.
pub const NOISELESS_EPS0: f64 = 1e-3;

/// STRCS pair gains below this fraction of the largest one are removed from the support.
pub const GAIN_PRUNE_RTOL: f64 = 1e-6;

/// Uniform virtual-angle grid `-1 + (2g − 1)/G`, `g = 1..G`, shared by both axes and both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularDictionary {
    g: usize,
    grid: Vec<f64>,
}

pub fn build_dictionary(g: usize) -> Result<AngularDictionary> {
    if g < 2 {
        return Err(Error::Config(format!(
            "grid count G = {g} must be at least 2"
        )));
    }
    let grid = (1..=g)
        .map(|i| -1.0 + (2 * i - 1) as f64 / g as f64)
        .collect();
    Ok(AngularDictionary { g, grid })
}

impl AngularDictionary {
    pub fn g(&self) -> usize {
        self.g
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Atoms per link end, `G²`.
    pub fn atoms(&self) -> usize {
        self.g * self.g
    }

    /// Joint dictionary width, `G⁴`.
    pub fn joint_columns(&self) -> usize {
        self.atoms() * self.atoms()
    }

    /// Virtual angle pair `(x direction cosine, y direction cosine)` of a per-end atom.
    ///
    /// Atom `k` pairs the y-axis grid index `k / G` with the x-axis grid index `k % G`.
    pub fn atom_angles(&self, k: usize) -> [f64; 2] {
        [self.grid[k % self.g], self.grid[k / self.g]]
    }

    /// Per-end atom closest to a virtual angle pair.
    pub fn nearest_atom(&self, vx: f64, vy: f64) -> usize {
        let nearest = |v: f64| {
            let idx = ((v + 1.0) * self.g as f64 / 2.0).floor() as isize;
            idx.clamp(0, self.g as isize - 1) as usize
        };
        nearest(vy) * self.g + nearest(vx)
    }

    /// Splits a joint column index into (Tx atom, Rx atom).
    pub fn split_column(&self, col: usize) -> (usize, usize) {
        (col / self.atoms(), col % self.atoms())
    }

    pub fn joint_column(&self, tx_atom: usize, rx_atom: usize) -> usize {
        tx_atom * self.atoms() + rx_atom
    }
}

fn axis_phases(grid: &[f64], coord: f64, kappa: f64) -> Vec<Complex64> {
    grid.iter()
        .map(|v| Complex64::from_polar(1.0, kappa * coord * v))
        .collect()
}

/// Discrete field-response vector: `[e^{jκ y ṽ}]_{y grid} ⊗ [e^{jκ x ṽ}]_{x grid}`, length `G²`.
///
/// Only the in-plane coordinates of `p` are used.
pub fn discrete_frv(
    dict: &AngularDictionary,
    p: Position3D,
    wavelength: f64,
) -> DVector<Complex64> {
    let kappa = 2.0 * PI / wavelength;
    let xs = axis_phases(&dict.grid, p.x, kappa);
    let ys = axis_phases(&dict.grid, p.y, kappa);
    DVector::from_iterator(
        dict.atoms(),
        ys.iter().flat_map(|ey| xs.iter().map(move |ex| ey * ex)),
    )
}

/// Pilots collected while the Tx and Rx antennas visit `positions` (pilot symbol 1).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementCampaign {
    /// `(t_m, r_m)` pairs.
    pub positions: Vec<(Position3D, Position3D)>,
    pub power: f64,
    pub pilots: Vec<Complex64>,
    pub noise_variance: f64,
    pub wavelength: f64,
}

impl MeasurementCampaign {
    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != self.pilots.len() {
            return Err(Error::Dimension(format!(
                "{} positions but {} pilots",
                self.positions.len(),
                self.pilots.len()
            )));
        }
        if !(self.power > 0.0) {
            return Err(Error::Config("transmit power must be positive".into()));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::Config("noise variance must be non-negative".into()));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::Config("wavelength must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Residual tolerance for OMP: [`NOISELESS_EPS0`] without noise, else twice
    /// the square root of the noise fraction of `‖y‖²`.
    pub fn default_eps0(&self) -> f64 {
        if self.noise_variance == 0.0 {
            return NOISELESS_EPS0;
        }
        let energy: f64 = self.pilots.iter().map(|c| c.norm_sqr()).sum();
        if energy == 0.0 {
            return NOISELESS_EPS0;
        }
        (2.0 * (self.len() as f64 * self.noise_variance / energy).sqrt()).min(0.99)
    }

    /// Text form: a header of `key value` lines, then one row per measurement
    /// `tx ty tz rx ry rz re,im`. Floats use shortest round-trip decimals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ma-campaign 1");
        let _ = writeln!(s, "power {}", self.power);
        let _ = writeln!(s, "noise_variance {}", self.noise_variance);
        let _ = writeln!(s, "wavelength {}", self.wavelength);
        let _ = writeln!(s, "measurements {}", self.len());
        for ((t, r), y) in self.positions.iter().zip(&self.pilots) {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {},{}",
                t.x, t.y, t.z, r.x, r.y, r.z, y.re, y.im
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let bad = |msg: &str| Error::Parse(format!("campaign file: {msg}"));
        if lines.next() != Some("ma-campaign 1") {
            return Err(bad("missing `ma-campaign 1` header"));
        }
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| bad(&format!("missing `{key}`")))?;
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| bad(&format!("malformed `{line}`")))?;
            if k != key {
                return Err(bad(&format!("expected `{key}`, found `{k}`")));
            }
            Ok(v.trim().to_string())
        };
        let num = |v: String| v.parse::<f64>().map_err(|e| bad(&format!("`{v}`: {e}")));
        let power = num(header("power")?)?;
        let noise_variance = num(header("noise_variance")?)?;
        let wavelength = num(header("wavelength")?)?;
        let m: usize = header("measurements")?
            .parse()
            .map_err(|e| bad(&format!("measurement count: {e}")))?;
        let mut positions = Vec::with_capacity(m);
        let mut pilots = Vec::with_capacity(m);
        for line in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 7 {
                return Err(bad(&format!("row `{line}` needs 7 fields")));
            }
            let f = |i: usize| {
                fields[i]
                    .parse::<f64>()
                    .map_err(|e| bad(&format!("`{}`: {e}", fields[i])))
            };
            let t = Position3D::new(f(0)?, f(1)?, f(2)?);
            let r = Position3D::new(f(3)?, f(4)?, f(5)?);
            let (re, im) = fields[6]
                .split_once(',')
                .ok_or_else(|| bad("pilot must be `re,im`"))?;
            let re = re
                .parse::<f64>()
                .map_err(|e| bad(&format!("`{re}`: {e}")))?;
            let im = im
                .parse::<f64>()
                .map_err(|e| bad(&format!("`{im}`: {e}")))?;
            positions.push((t, r));
            pilots.push(Complex64::new(re, im));
        }
        if positions.len() != m {
            return Err(bad(&format!(
                "declared {m} measurements, found {}",
                positions.len()
            )));
        }
        let c = Self {
            positions,
            power,
            pilots,
            noise_variance,
            wavelength,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// `M × G⁴` measurement matrix; row `m` is `g̃(t_m)ᵀ ⊗ f̃(r_m)ᴴ`.
pub fn measurement_matrix(
    dict: &AngularDictionary,
    campaign: &MeasurementCampaign,
) -> Result<DMatrix<Complex64>> {
    measurement_matrix_capped(dict, campaign, DEFAULT_MAX_COLUMNS)
}

pub fn measurement_matrix_capped(
    dict: &AngularDictionary,
    campaign: &MeasurementCampaign,
    max_columns: usize,
) -> Result<DMatrix<Complex64>> {
    if campaign.is_empty() {
        return Err(Error::Config(
            "campaign has no measurement positions".into(),
        ));
    }
    let cols = dict.joint_columns();
    if cols > max_columns {
        return Err(Error::Sizing(format!(
            "G = {} needs {cols} dictionary columns, above the cap of {max_columns}",
            dict.g
        )));
    }
    let a = dict.atoms();
    let mut psi = DMatrix::zeros(campaign.len(), cols);
    for (m, (t, r)) in campaign.positions.iter().enumerate() {
        let g = discrete_frv(dict, *t, campaign.wavelength);
        let f = discrete_frv(dict, *r, campaign.wavelength);
        for jt in 0..a {
            for ir in 0..a {
                psi[(m, jt * a + ir)] = g[jt] * f[ir].conj();
            }
        }
    }
    Ok(psi)
}

/// Pilots from the continuous channel: `y_m = √P h(t_m, r_m) + n_m`, `n_m ~ CSCG(0, noise_var)`.
///
/// Noise is drawn in measurement order from a ChaCha8 stream seeded with `seed`.
pub fn simulate_pilots(
    ps: &PathSet,
    positions: &[(Position3D, Position3D)],
    power: f64,
    noise_variance: f64,
    seed: u64,
) -> Result<MeasurementCampaign> {
    if !(noise_variance >= 0.0) {
        return Err(Error::Config("noise variance must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = power.sqrt();
    let pilots = positions
        .iter()
        .map(|(t, r)| channel_response(ps, *t, *r) * amp + cscg(&mut rng, noise_variance))
        .collect();
    let c = MeasurementCampaign {
        positions: positions.to_vec(),
        power,
        pilots,
        noise_variance,
        wavelength: ps.wavelength(),
    };
    c.validate()?;
    Ok(c)
}

/// Why OMP stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmpStop {
    /// `‖y − √P Ψ u‖ ≤ ε₀ ‖y‖`.
    ToleranceMet,
    /// Support reached `max_support` before the tolerance.
    SupportLimit,
    /// No remaining column could reduce the residual.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpResult {
    /// Selected columns, in selection order.
    pub support: Vec<usize>,
    /// Least-squares coefficients of `u` on the support.
    pub coefficients: Vec<Complex64>,
    /// Residual norm before the first selection and after each one.
    pub residual_norms: Vec<f64>,
    pub stop: OmpStop,
}

/// Greedy solver for `min ‖u‖₀ s.t. ‖y − √P Ψ u‖₂ ≤ ε₀‖y‖₂`.
///
/// Each step adds the column with the largest normalized correlation with the
/// residual (ties go to the lowest index), then refits all coefficients on
/// the support by least squares.
pub fn omp_recover(
    psi: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    power: f64,
    eps0: f64,
    max_support: usize,
) -> Result<OmpResult> {
    let (m, n) = psi.shape();
    if y.len() != m {
        return Err(Error::Dimension(format!(
            "Ψ has {m} rows but y has {} entries",
            y.len()
        )));
    }
    if !(0.0..1.0).contains(&eps0) {
        return Err(Error::Config(format!("ε₀ = {eps0} must lie in [0, 1)")));
    }
    if max_support > m {
        return Err(Error::Config(format!(
            "max support {max_support} exceeds {m} measurements"
        )));
    }
    if !(power > 0.0) {
        return Err(Error::Config("transmit power must be positive".into()));
    }
    let amp = power.sqrt();
    let col_norms: Vec<f64> = (0..n).map(|j| psi.column(j).norm()).collect();
    let target = eps0 * y.norm();
    let mut support: Vec<usize> = Vec::new();
    let mut in_support = vec![false; n];
    let mut coefficients: Vec<Complex64> = Vec::new();
    let mut residual = y.clone();
    let mut residual_norms = vec![residual.norm()];
    let stop = loop {
        let rn = *residual_norms.last().expect("non-empty");
        if rn <= target {
            break OmpStop::ToleranceMet;
        }
        if support.len() >= max_support {
            break OmpStop::SupportLimit;
        }
        let corr = psi.ad_mul(&residual);
        let mut best = None;
        let mut best_score = 0.0;
        for j in 0..n {
            if in_support[j] || col_norms[j] == 0.0 {
                continue;
            }
            let score = corr[j].norm_sqr() / (col_norms[j] * col_norms[j]);
            if score > best_score {
                best_score = score;
                best = Some(j);
            }
        }
        let Some(j) = best else {
            break OmpStop::Stalled;
        };
        support.push(j);
        let sub = psi.select_columns(&support) * Complex64::new(amp, 0.0);
        let Some(u) = lstsq(&sub, y) else {
            support.pop();
            break OmpStop::Stalled;
        };
        let new_residual = y - &sub * &u;
        let new_norm = new_residual.norm();
        if new_norm > rn {
            // Rounding made the refit worse; keep the previous fit.
            support.pop();
            break OmpStop::Stalled;
        }
        in_support[j] = true;
        coefficients = u.iter().copied().collect();
        residual = new_residual;
        residual_norms.push(new_norm);
    };
    Ok(OmpResult {
        support,
        coefficients,
        residual_norms,
        stop,
    })
}

/// Virtual angles `(x cosine, y cosine)` of one recovered path at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathCoordinates {
    pub tx: [f64; 2],
    pub rx: [f64; 2],
}

/// Sparse path estimate; `support` holds joint column indices `tx_atom·G² + rx_atom`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseEstimate {
    pub grid_count: usize,
    pub support: Vec<usize>,
    pub angles: Vec<PathCoordinates>,
    /// `[re, im]` per support entry.
    #[serde(with = "complex_pairs")]
    pub gains: Vec<Complex64>,
}

mod complex_pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|c| [c.re, c.im])
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect())
    }
}

impl SparseEstimate {
    pub fn empty(dict: &AngularDictionary) -> Self {
        Self::from_support(dict, Vec::new(), Vec::new())
    }

    pub fn from_support(
        dict: &AngularDictionary,
        support: Vec<usize>,
        gains: Vec<Complex64>,
    ) -> Self {
        let angles = support
            .iter()
            .map(|&c| {
                let (jt, ir) = dict.split_column(c);
                PathCoordinates {
                    tx: dict.atom_angles(jt),
                    rx: dict.atom_angles(ir),
                }
            })
            .collect();
        Self {
            grid_count: dict.g,
            support,
            angles,
            gains,
        }
    }

    pub fn validate(&self, dict: &AngularDictionary) -> Result<()> {
        if self.grid_count != dict.g {
            return Err(Error::Config(
                "estimate was produced on a different grid".into(),
            ));
        }
        if self.support.len() != self.gains.len() || self.support.len() != self.angles.len() {
            return Err(Error::Dimension(
                "support, angles and gains must align".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &c in &self.support {
            if c >= dict.joint_columns() || !seen.insert(c) {
                return Err(Error::Config(format!(
                    "support index {c} is out of range or repeated"
                )));
            }
        }
        Ok(())
    }

    /// Distinct Tx atoms in the support, ascending.
    pub fn tx_atoms(&self) -> Vec<usize> {
        let a = self.grid_count * self.grid_count;
        let mut v: Vec<usize> = self.support.iter().map(|c| c / a).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Distinct Rx atoms in the support, ascending.
    pub fn rx_atoms(&self) -> Vec<usize> {
        let a = self.grid_count * self.grid_count;
        let mut v: Vec<usize> = self.support.iter().map(|c| c % a).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Dense `G⁴` vector `u`.
    pub fn to_dense(&self) -> DVector<Complex64> {
        let a = self.grid_count * self.grid_count;
        let mut u = DVector::zeros(a * a);
        for (&c, &g) in self.support.iter().zip(&self.gains) {
            u[c] += g;
        }
        u
    }
}

/// Joint recovery result with the OMP trace.
#[derive(Debug, Clone)]
pub struct JointOutcome {
    pub estimate: SparseEstimate,
    pub omp: OmpResult,
}

/// Joint recovery of all paths from one campaign.
pub fn joint_estimate(
    dict: &AngularDictionary,
    campaign: &MeasurementCampaign,
    eps0: f64,
    max_support: Option<usize>,
) -> Result<JointOutcome> {
    campaign.validate()?;
    let psi = measurement_matrix(dict, campaign)?;
    let y = DVector::from_column_slice(&campaign.pilots);
    let omp = omp_recover(
        &psi,
        &y,
        campaign.power,
        eps0,
        max_support.unwrap_or(campaign.len()),
    )?;
    let estimate =
        SparseEstimate::from_support(dict, omp.support.clone(), omp.coefficients.clone());
    Ok(JointOutcome { estimate, omp })
}

/// Successive recovery result.
#[derive(Debug, Clone)]
pub struct StrcsOutcome {
    pub estimate: SparseEstimate,
    pub tx_omp: OmpResult,
    pub rx_omp: OmpResult,
    /// Dictionary widths of the Tx and Rx stages (`G²` each).
    pub stage_columns: [usize; 2],
    /// Rows and unknowns of the final gain fit.
    pub gain_system: (usize, usize),
}

fn same_point(a: &Position3D, b: &Position3D) -> bool {
    a.distance(b) <= 1e-12
}

/// Successive Tx/Rx compressed sensing.
///
/// * `tx_campaign`: the Rx antenna stays at one point while the Tx antenna moves.
/// * `rx_campaign`: the Tx antenna stays at one point while the Rx antenna moves.
/// * `joint_campaign`: both move; used only in the gain fit.
pub fn strcs_estimate(
    dict: &AngularDictionary,
    tx_campaign: &MeasurementCampaign,
    rx_campaign: &MeasurementCampaign,
    joint_campaign: &MeasurementCampaign,
    eps0: f64,
) -> Result<StrcsOutcome> {
    for c in [tx_campaign, rx_campaign, joint_campaign] {
        c.validate()?;
    }
    if tx_campaign.is_empty() || rx_campaign.is_empty() {
        return Err(Error::IllPosedCampaign(
            "both angle stages need at least one measurement".into(),
        ));
    }
    let (p, lambda) = (tx_campaign.power, tx_campaign.wavelength);
    for c in [rx_campaign, joint_campaign] {
        if c.power != p || c.wavelength != lambda {
            return Err(Error::Config(
                "all three campaigns must share power and wavelength".into(),
            ));
        }
    }
    let r0 = tx_campaign.positions[0].1;
    if !tx_campaign
        .positions
        .iter()
        .all(|(_, r)| same_point(r, &r0))
    {
        return Err(Error::Config(
            "the Tx stage must keep the Rx antenna fixed".into(),
        ));
    }
    let t0 = rx_campaign.positions[0].0;
    if !rx_campaign
        .positions
        .iter()
        .all(|(t, _)| same_point(t, &t0))
    {
        return Err(Error::Config(
            "the Rx stage must keep the Tx antenna fixed".into(),
        ));
    }

    let a = dict.atoms();
    let tx_psi = DMatrix::from_fn(tx_campaign.len(), a, |_, _| Complex64::new(0.0, 0.0));
    let tx_psi = fill_rows(
        tx_psi,
        tx_campaign
            .positions
            .iter()
            .map(|(t, _)| discrete_frv(dict, *t, lambda)),
    );
    let rx_psi = DMatrix::from_fn(rx_campaign.len(), a, |_, _| Complex64::new(0.0, 0.0));
    let rx_psi = fill_rows(
        rx_psi,
        rx_campaign
            .positions
            .iter()
            .map(|(_, r)| discrete_frv(dict, *r, lambda).map(|c| c.conj())),
    );

    let y1 = DVector::from_column_slice(&tx_campaign.pilots);
    let y2 = DVector::from_column_slice(&rx_campaign.pilots);
    let tx_omp = omp_recover(&tx_psi, &y1, p, eps0, tx_campaign.len().min(a))?;
    let rx_omp = omp_recover(&rx_psi, &y2, p, eps0, rx_campaign.len().min(a))?;

    let mut tx_atoms = tx_omp.support.clone();
    tx_atoms.sort_unstable();
    let mut rx_atoms = rx_omp.support.clone();
    rx_atoms.sort_unstable();
    if tx_atoms.is_empty() || rx_atoms.is_empty() {
        return Ok(StrcsOutcome {
            estimate: SparseEstimate::empty(dict),
            tx_omp,
            rx_omp,
            stage_columns: [a, a],
            gain_system: (0, 0),
        });
    }

    let pairs: Vec<(usize, usize)> = tx_atoms
        .iter()
        .flat_map(|&jt| rx_atoms.iter().map(move |&ir| (jt, ir)))
        .collect();
    let all: Vec<(&(Position3D, Position3D), &Complex64)> =
        [tx_campaign, rx_campaign, joint_campaign]
            .iter()
            .flat_map(|c| c.positions.iter().zip(&c.pilots))
            .collect();
    let amp = p.sqrt();
    let mut design = DMatrix::zeros(all.len(), pairs.len());
    for (row, ((t, r), _)) in all.iter().enumerate() {
        let g = discrete_frv(dict, *t, lambda);
        let f = discrete_frv(dict, *r, lambda);
        for (col, &(jt, ir)) in pairs.iter().enumerate() {
            design[(row, col)] = g[jt] * f[ir].conj() * amp;
        }
    }
    let y = DVector::from_iterator(all.len(), all.iter().map(|(_, y)| **y));
    if is_rank_deficient(&design) {
        return Err(Error::IllPosedCampaign(format!(
            "gain fit has {} unknowns but only rank-deficient {}-row system; add joint measurements",
            pairs.len(),
            all.len()
        )));
    }
    let gains = lstsq(&design, &y).ok_or_else(|| {
        Error::IllPosedCampaign("gain fit is rank-deficient; add joint measurements".into())
    })?;
    // Atom pairs that do not share a path come back with numerically zero gain;
    // drop them and refit on the rest.
    let peak = gains.iter().fold(0.0f64, |m, g| m.max(g.norm()));
    let keep: Vec<usize> = (0..pairs.len())
        .filter(|&i| gains[i].norm() > GAIN_PRUNE_RTOL * peak)
        .collect();
    let gains = if keep.len() < pairs.len() && !keep.is_empty() {
        let reduced = design.select_columns(&keep);
        lstsq(&reduced, &y)
            .ok_or_else(|| Error::IllPosedCampaign("pruned gain fit is rank-deficient".into()))?
    } else {
        gains
    };
    let kept: Vec<(usize, usize)> = if keep.is_empty() {
        pairs.clone()
    } else {
        keep.iter().map(|&i| pairs[i]).collect()
    };
    let support = kept
        .iter()
        .map(|&(jt, ir)| dict.joint_column(jt, ir))
        .collect();
    Ok(StrcsOutcome {
        estimate: SparseEstimate::from_support(dict, support, gains.iter().copied().collect()),
        tx_omp,
        rx_omp,
        stage_columns: [a, a],
        gain_system: (all.len(), pairs.len()),
    })
}

fn fill_rows(
    mut m: DMatrix<Complex64>,
    rows: impl Iterator<Item = DVector<Complex64>>,
) -> DMatrix<Complex64> {
    for (i, row) in rows.enumerate() {
        m.row_mut(i).copy_from(&row.transpose());
    }
    m
}

/// Channel synthesized from an estimate: `Σ_k u_k g̃_{tx(k)}(t) conj(f̃_{rx(k)}(r))`.
pub fn reconstruct_channel(
    est: &SparseEstimate,
    dict: &AngularDictionary,
    t: Position3D,
    r: Position3D,
    wavelength: f64,
) -> Complex64 {
    let kappa = 2.0 * PI / wavelength;
    est.support
        .iter()
        .zip(&est.gains)
        .map(|(&c, &u)| {
            let (jt, ir) = dict.split_column(c);
            let [tx, ty] = dict.atom_angles(jt);
            let [rx, ry] = dict.atom_angles(ir);
            let phase = kappa * (t.x * tx + t.y * ty) - kappa * (r.x * rx + r.y * ry);
            u * Complex64::from_polar(1.0, phase)
        })
        .sum()
}

/// `Σ|h − ĥ|² / Σ|h|²` over the evaluation pairs.
pub fn nmse(
    true_field: &ChannelField,
    est: &SparseEstimate,
    dict: &AngularDictionary,
    eval_positions: &[(Position3D, Position3D)],
) -> Result<f64> {
    if eval_positions.is_empty() {
        return Err(Error::Config(
            "NMSE needs at least one evaluation position".into(),
        ));
    }
    let lambda = true_field.pathset.wavelength();
    let (mut err, mut energy) = (0.0, 0.0);
    for (t, r) in eval_positions {
        let h = true_field.response(*t, *r);
        let e = reconstruct_channel(est, dict, *t, *r, lambda);
        err += (h - e).norm_sqr();
        energy += h.norm_sqr();
    }
    if energy == 0.0 {
        return Err(Error::UndefinedMetric(
            "true channel is zero on every evaluation position".into(),
        ));
    }
    Ok(err / energy)
}

/// Geometric channel whose `k` paths sit exactly on dictionary atoms.
///
/// Tx atoms are distinct, Rx atoms are distinct, each atom lies inside the
/// unit disk of valid virtual angles, and gains are unit-variance CSCG.
pub fn on_grid_pathset(
    dict: &AngularDictionary,
    k: usize,
    wavelength: f64,
    seed: u64,
) -> Result<PathSet> {
    let valid: Vec<usize> = (0..dict.atoms())
        .filter(|&i| {
            let [x, y] = dict.atom_angles(i);
            x.hypot(y) <= 1.0
        })
        .collect();
    if k == 0 || k > valid.len() {
        return Err(Error::Config(format!(
            "cannot plant {k} distinct on-grid paths"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tx_idx = sample(&mut rng, valid.len(), k);
    let rx_idx = sample(&mut rng, valid.len(), k);
    let to_angles = |i: usize| {
        let [x, y] = dict.atom_angles(valid[i]);
        PathAngles::from_virtual(x, y)
    };
    let tx: Vec<PathAngles> = tx_idx.iter().map(to_angles).collect::<Result<_>>()?;
    let rx: Vec<PathAngles> = rx_idx.iter().map(to_angles).collect::<Result<_>>()?;
    let gains: Vec<Complex64> = (0..k).map(|_| cscg(&mut rng, 1.0)).collect();
    PathSet::geometric(tx, rx, &gains, wavelength)
}

/// Dense on-grid vector `u` of a path set whose paths all sit on atoms of `dict`.
pub fn planted_estimate(dict: &AngularDictionary, ps: &PathSet) -> SparseEstimate {
    let atom = |a: &PathAngles| {
        let k = crate::geometry::wave_vector_unchecked(a);
        dict.nearest_atom(k.kx, k.ky)
    };
    let tx: Vec<usize> = ps.tx_paths().iter().map(atom).collect();
    let rx: Vec<usize> = ps.rx_paths().iter().map(atom).collect();
    let mut support = Vec::new();
    let mut gains = Vec::new();
    for (i, &ir) in rx.iter().enumerate() {
        for (j, &jt) in tx.iter().enumerate() {
            let g = ps.prm()[(i, j)];
            if g != Complex64::new(0.0, 0.0) {
                support.push(dict.joint_column(jt, ir));
                gains.push(g);
            }
        }
    }
    SparseEstimate::from_support(dict, support, gains)
}

/// `m` position pairs drawn uniformly and independently in the two regions.
pub fn random_positions(
    tx_region: &MovingRegion,
    rx_region: &MovingRegion,
    m: usize,
    seed: u64,
) -> Vec<(Position3D, Position3D)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| {
            let t = tx_region.sample_uniform(&mut rng);
            let r = rx_region.sample_uniform(&mut rng);
            (t, r)
        })
        .collect()
}

/// Position schedules for the three successive stages: Tx moves with Rx parked
/// at its region center, Rx moves with Tx parked at its region center, then
/// both move.
pub fn strcs_positions(
    tx_region: &MovingRegion,
    rx_region: &MovingRegion,
    counts: [usize; 3],
    seed: u64,
) -> [Vec<(Position3D, Position3D)>; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tc, rc) = (tx_region.center(), rx_region.center());
    let s1 = (0..counts[0])
        .map(|_| (tx_region.sample_uniform(&mut rng), rc))
        .collect();
    let s2 = (0..counts[1])
        .map(|_| (tc, rx_region.sample_uniform(&mut rng)))
        .collect();
    let s3 = (0..counts[2])
        .map(|_| {
            let t = tx_region.sample_uniform(&mut rng);
            (t, rx_region.sample_uniform(&mut rng))
        })
        .collect();
    [s1, s2, s3]
}

/// Splits a total budget of `m` measurements across the three successive stages (2:2:1).
pub fn strcs_split(m: usize) -> [usize; 3] {
    let stage = 2 * m / 5;
    [stage, stage, m - 2 * stage]
}
