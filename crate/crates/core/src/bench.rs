//! Experiment configuration, deterministic sweeps and CSV/JSON output for the CLI.
//!
//! Every random draw is seeded from `SHA-256(master, sweep_index, rep_index, tag)`,
//! so adding repetitions or sweep points never changes existing ones and all
//! methods at a sweep point see the same scenario. The WSR sweep also reuses
//! each repetition's channels across region sizes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chanest::{
    build_dictionary, joint_estimate, nmse, on_grid_pathset, planted_estimate, random_positions,
    simulate_pilots, strcs_estimate, strcs_positions, strcs_split, MeasurementCampaign,
    SparseEstimate,
};
use crate::field_channel::{channel_response, random_pathset, ChannelField, PathSetSpec, PrmStyle};
use crate::geometry::{MovingRegion, PathAngles, Position3D};
use crate::placement::{
    cs_placement, discrete_placement, fpa_layout, fpa_placement, grad_ascent_placement,
    objective_value, pso_placement, zo_placement, CsConfig, DiscreteConfig, GradientConfig,
    MeasurementOracle, Objective, PlacementProblem, PlacementResult, PsoConfig, UserLink, ZoConfig,
};
use crate::sensing::{crb_optimal_placement, single_target_crb, ArrayGeometry, CrbPlacementMethod};
use crate::{Error, Result, VERSION};

pub const SCHEMA_VERSION: u32 = 1;

/// 64-bit seed from the first eight bytes (little-endian) of
/// `SHA-256(master ‖ sweep ‖ rep ‖ tag)`.
pub fn derive_seed(master: u64, sweep: usize, rep: usize, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((sweep as u64).to_le_bytes());
    h.update((rep as u64).to_le_bytes());
    h.update(tag.as_bytes());
    let out = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&out[..8]);
    u64::from_le_bytes(b)
}

/// `%.12g`-style formatting: 12 significant digits, `.` separator, trailing zeros trimmed.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-5..12).contains(&exp) {
        format!(
            "{}e{}{:02}",
            trim(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        trim(&format!("{:.*}", (11 - exp) as usize, x))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident, $what:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl std::str::FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::Config(format!(
                        concat!("unknown ", $what, " `{}`; valid: {}"),
                        s,
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;
            fn try_from(s: String) -> Result<Self> {
                s.parse()
            }
        }

        impl From<$name> for String {
            fn from(m: $name) -> String {
                m.name().to_string()
            }
        }
    };
}

named_enum!(
    /// Placement methods available to `optimize` and `wsr-sweep`.
    PlacementMethod, "placement method", {
        Fpa => "fpa",
        Gradient => "gradient",
        Pso => "pso",
        Discrete => "discrete",
        Cs => "cs",
        Zo => "zo",
    }
);

named_enum!(EstimatorMethod, "estimator", {
    Joint => "joint",
    Strcs => "strcs",
});

named_enum!(
    /// Geometries compared by `crb-sweep`.
    CrbMethod, "CRB geometry", {
        Edge => "edge",
        UniformSpan => "uniform-span",
        CenteredFpa => "centered-fpa",
    }
);

named_enum!(ObjectiveKind, "objective", {
    SingleLinkGain => "single-link-gain",
    MimoCapacity => "mimo-capacity",
    MultiuserWsr => "multiuser-wsr",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ChannelDemo,
    Estimate,
    Optimize,
    WsrSweep,
    NmseSweep,
    CrbSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ChannelDemo => "channel-demo",
            Self::Estimate => "estimate",
            Self::Optimize => "optimize",
            Self::WsrSweep => "wsr-sweep",
            Self::NmseSweep => "nmse-sweep",
            Self::CrbSweep => "crb-sweep",
        }
    }
}

/// Per-method optimizer settings. Seeds are replaced by derived seeds and the
/// ZO wavelength by the scenario's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSettings {
    pub gradient: GradientConfig,
    pub pso: PsoConfig,
    pub discrete: DiscreteConfig,
    pub cs: CsConfig,
    pub zo: ZoConfig,
    /// Standard deviation of the additive noise on ZO measurements.
    pub zo_noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelDemoConfig {
    pub tx_paths: usize,
    pub rx_paths: usize,
    pub prm_style: PrmStyle,
    pub wavelength: f64,
    /// Side of the square Tx region, in wavelengths.
    pub region_side: f64,
    /// Sampling pitch over the region, in wavelengths.
    pub resolution: f64,
    pub rx_position: Position3D,
}

impl Default for ChannelDemoConfig {
    fn default() -> Self {
        Self {
            tx_paths: 6,
            rx_paths: 6,
            prm_style: PrmStyle::Full,
            wavelength: 0.01,
            region_side: 4.0,
            resolution: 0.05,
            rx_position: Position3D::ORIGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub method: EstimatorMethod,
    /// Dictionary points per angular axis.
    pub grid: usize,
    /// On-grid paths in the simulated channel.
    pub paths: usize,
    pub measurements: usize,
    pub noise_variance: f64,
    pub power: f64,
    pub wavelength: f64,
    /// Side of both square regions in wavelengths; `grid / 2` when absent.
    pub region_side: Option<f64>,
    pub eval_points: usize,
    /// OMP stopping ratio; derived from the noise level when absent.
    pub eps0: Option<f64>,
    /// Pilot file to estimate from instead of a simulated channel (joint only).
    pub campaign: Option<PathBuf>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            method: EstimatorMethod::Joint,
            grid: 16,
            paths: 3,
            measurements: 60,
            noise_variance: 0.0,
            power: 1.0,
            wavelength: 0.01,
            region_side: None,
            eval_points: 256,
            eps0: None,
            campaign: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub objective: ObjectiveKind,
    pub method: PlacementMethod,
    pub n_antennas: usize,
    /// Users for `multiuser-wsr`, receive antennas for `mimo-capacity`.
    pub receivers: usize,
    pub paths: usize,
    pub snr_db: f64,
    pub wavelength: f64,
    /// Side of the square Tx region, in wavelengths.
    pub region_side: f64,
    /// Minimum inter-antenna spacing, in wavelengths.
    pub min_spacing: f64,
    pub settings: MethodSettings,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveKind::MultiuserWsr,
            method: PlacementMethod::Pso,
            n_antennas: 4,
            receivers: 4,
            paths: 6,
            snr_db: 10.0,
            wavelength: 0.01,
            region_side: 2.0,
            min_spacing: 0.5,
            settings: MethodSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WsrSweepConfig {
    /// Region sides in wavelengths.
    pub sizes: Vec<f64>,
    pub methods: Vec<PlacementMethod>,
    pub n_antennas: usize,
    pub users: usize,
    /// Paths per user; the PRM is diagonal with variance `1/paths`.
    pub paths: usize,
    pub snr_db: f64,
    /// User weights; equal when absent.
    pub weights: Option<Vec<f64>>,
    pub wavelength: f64,
    /// Minimum inter-antenna spacing, in wavelengths.
    pub min_spacing: f64,
    pub settings: MethodSettings,
}

impl Default for WsrSweepConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1.0, 2.0, 3.0, 4.0],
            methods: PlacementMethod::ALL.to_vec(),
            n_antennas: 4,
            users: 4,
            paths: 6,
            snr_db: 10.0,
            weights: None,
            wavelength: 0.01,
            min_spacing: 0.5,
            settings: MethodSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmseSweepConfig {
    pub measurements: Vec<usize>,
    pub methods: Vec<EstimatorMethod>,
    pub grid: usize,
    pub paths: usize,
    pub noise_variance: f64,
    pub power: f64,
    pub wavelength: f64,
    pub region_side: Option<f64>,
    pub eval_points: usize,
}

impl Default for NmseSweepConfig {
    fn default() -> Self {
        Self {
            measurements: vec![1, 10, 20, 40, 60, 80],
            methods: EstimatorMethod::ALL.to_vec(),
            grid: 16,
            paths: 3,
            noise_variance: 0.0,
            power: 1.0,
            wavelength: 0.01,
            region_side: None,
            eval_points: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrbSweepConfig {
    /// Segment lengths in wavelengths.
    pub lengths: Vec<f64>,
    pub methods: Vec<CrbMethod>,
    pub n_antennas: usize,
    /// Minimum spacing in wavelengths.
    pub min_spacing: f64,
    pub elevation: f64,
    pub azimuth: f64,
    pub snr: f64,
    pub snapshots: usize,
    pub wavelength: f64,
}

impl Default for CrbSweepConfig {
    fn default() -> Self {
        Self {
            lengths: vec![2.0, 4.0, 8.0, 16.0],
            methods: CrbMethod::ALL.to_vec(),
            n_antennas: 4,
            min_spacing: 0.5,
            elevation: 0.0,
            azimuth: 1.0,
            snr: 1.0,
            snapshots: 1,
            wavelength: 0.01,
        }
    }
}

fn default_repetitions() -> usize {
    20
}

/// Top-level experiment file. Only the section matching `kind` may appear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_demo: Option<ChannelDemoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wsr_sweep: Option<WsrSweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmse_sweep: Option<NmseSweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crb_sweep: Option<CrbSweepConfig>,
}

impl ScenarioConfig {
    /// Default configuration for `kind`, with its section filled in.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = Self {
            version: SCHEMA_VERSION,
            kind,
            seed: 0,
            repetitions: default_repetitions(),
            output: None,
            channel_demo: None,
            estimate: None,
            optimize: None,
            wsr_sweep: None,
            nmse_sweep: None,
            crb_sweep: None,
        };
        c.fill_section();
        c
    }

    fn fill_section(&mut self) {
        match self.kind {
            ExperimentKind::ChannelDemo => {
                self.channel_demo.get_or_insert_with(Default::default);
            }
            ExperimentKind::Estimate => {
                self.estimate.get_or_insert_with(Default::default);
            }
            ExperimentKind::Optimize => {
                self.optimize.get_or_insert_with(Default::default);
            }
            ExperimentKind::WsrSweep => {
                self.wsr_sweep.get_or_insert_with(Default::default);
            }
            ExperimentKind::NmseSweep => {
                self.nmse_sweep.get_or_insert_with(Default::default);
            }
            ExperimentKind::CrbSweep => {
                self.crb_sweep.get_or_insert_with(Default::default);
            }
        }
    }

    /// Parses, fills the section for `kind` with defaults, and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut c: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.fill_section();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// SHA-256 (hex) of the canonical JSON form of this configuration.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("configuration serializes"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {}; expected {SCHEMA_VERSION}",
                self.version
            )));
        }
        let present = [
            (ExperimentKind::ChannelDemo, self.channel_demo.is_some()),
            (ExperimentKind::Estimate, self.estimate.is_some()),
            (ExperimentKind::Optimize, self.optimize.is_some()),
            (ExperimentKind::WsrSweep, self.wsr_sweep.is_some()),
            (ExperimentKind::NmseSweep, self.nmse_sweep.is_some()),
            (ExperimentKind::CrbSweep, self.crb_sweep.is_some()),
        ];
        for (k, p) in present {
            if p && k != self.kind {
                return Err(Error::Config(format!(
                    "section for `{}` does not apply to a `{}` experiment",
                    k.name(),
                    self.kind.name()
                )));
            }
        }
        let sweep = matches!(
            self.kind,
            ExperimentKind::WsrSweep | ExperimentKind::NmseSweep | ExperimentKind::CrbSweep
        );
        if sweep && self.repetitions < 2 {
            return Err(Error::Config(
                "sweeps need at least 2 repetitions for a standard error".into(),
            ));
        }
        match self.kind {
            ExperimentKind::ChannelDemo => {
                validate_channel_demo(self.channel_demo.as_ref().expect("filled"))
            }
            ExperimentKind::Estimate => validate_estimate(self.estimate.as_ref().expect("filled")),
            ExperimentKind::Optimize => {
                let o = self.optimize.as_ref().expect("filled");
                optimize_problem(o, 0).map(|_| ())?;
                validate_settings(&o.settings)
            }
            ExperimentKind::WsrSweep => validate_wsr(self.wsr_sweep.as_ref().expect("filled")),
            ExperimentKind::NmseSweep => validate_nmse(self.nmse_sweep.as_ref().expect("filled")),
            ExperimentKind::CrbSweep => validate_crb(self.crb_sweep.as_ref().expect("filled")),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn validate_channel_demo(c: &ChannelDemoConfig) -> Result<()> {
    positive("region_side", c.region_side)?;
    positive("resolution", c.resolution)?;
    if c.region_side / c.resolution > 2000.0 {
        return Err(Error::Sizing(
            "channel map would exceed 2001 points per axis".into(),
        ));
    }
    demo_spec(c).validate()
}

fn demo_spec(c: &ChannelDemoConfig) -> PathSetSpec {
    PathSetSpec {
        tx_paths: c.tx_paths,
        rx_paths: c.rx_paths,
        prm_style: c.prm_style,
        gain_variance: 1.0 / c.tx_paths.max(c.rx_paths).max(1) as f64,
        wavelength: c.wavelength,
    }
}

fn validate_estimate(c: &EstimateConfig) -> Result<()> {
    build_dictionary(c.grid)?;
    positive("power", c.power)?;
    positive("wavelength", c.wavelength)?;
    if !(c.noise_variance >= 0.0) {
        return Err(Error::Config("noise_variance must be non-negative".into()));
    }
    if c.campaign.is_some() {
        if c.method != EstimatorMethod::Joint {
            return Err(Error::Config(
                "a pilot file can only be used with the joint estimator".into(),
            ));
        }
        return Ok(());
    }
    if c.paths == 0 || c.measurements == 0 || c.eval_points == 0 {
        return Err(Error::Config(
            "paths, measurements and eval_points must be at least 1".into(),
        ));
    }
    if let Some(s) = c.region_side {
        positive("region_side", s)?;
    }
    if let Some(e) = c.eps0 {
        if !(0.0..1.0).contains(&e) {
            return Err(Error::Config("eps0 must lie in [0, 1)".into()));
        }
    }
    Ok(())
}

fn validate_settings(s: &MethodSettings) -> Result<()> {
    if !(s.zo_noise_std >= 0.0 && s.zo_noise_std.is_finite()) {
        return Err(Error::Config("zo_noise_std must be non-negative".into()));
    }
    ZoConfig {
        wavelength: 1.0,
        ..s.zo.clone()
    }
    .validate()
}

fn validate_wsr(c: &WsrSweepConfig) -> Result<()> {
    if c.methods.len() < 2 || !c.methods.contains(&PlacementMethod::Fpa) {
        return Err(Error::Config(
            "wsr-sweep needs at least two methods including `fpa`".into(),
        ));
    }
    if c.sizes.is_empty() {
        return Err(Error::Config(
            "wsr-sweep needs at least one region size".into(),
        ));
    }
    for (i, s) in c.sizes.iter().enumerate() {
        wsr_problem(c, i, *s, 0)?;
    }
    validate_settings(&c.settings)
}

fn validate_nmse(c: &NmseSweepConfig) -> Result<()> {
    if c.methods.is_empty() || c.measurements.is_empty() {
        return Err(Error::Config(
            "nmse-sweep needs methods and measurement counts".into(),
        ));
    }
    validate_estimate(&EstimateConfig {
        method: EstimatorMethod::Joint,
        grid: c.grid,
        paths: c.paths,
        measurements: c.measurements.iter().copied().min().unwrap_or(0),
        noise_variance: c.noise_variance,
        power: c.power,
        wavelength: c.wavelength,
        region_side: c.region_side,
        eval_points: c.eval_points,
        eps0: None,
        campaign: None,
    })
}

fn validate_crb(c: &CrbSweepConfig) -> Result<()> {
    if c.methods.is_empty() || c.lengths.is_empty() {
        return Err(Error::Config("crb-sweep needs methods and lengths".into()));
    }
    if c.n_antennas < 2 {
        return Err(Error::Config(
            "crb-sweep needs at least two antennas".into(),
        ));
    }
    positive("snr", c.snr)?;
    positive("wavelength", c.wavelength)?;
    if c.snapshots == 0 {
        return Err(Error::Config("snapshots must be at least 1".into()));
    }
    PathAngles::new(c.elevation, c.azimuth)?;
    for l in &c.lengths {
        positive("length", *l)?;
        if (c.n_antennas - 1) as f64 * c.min_spacing > *l {
            return Err(Error::Config(format!(
                "length {l}λ cannot hold {} antennas at spacing {}λ",
                c.n_antennas, c.min_spacing
            )));
        }
    }
    Ok(())
}

/// One aggregated point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub method: String,
    pub mean: f64,
    pub std_error: f64,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit_version: String,
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub config_digest: String,
    pub master_seed: u64,
}

impl Provenance {
    pub fn of(cfg: &ScenarioConfig) -> Self {
        Self {
            toolkit_version: VERSION.to_string(),
            schema_version: SCHEMA_VERSION,
            kind: cfg.kind,
            config_digest: cfg.digest(),
            master_seed: cfg.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub provenance: Provenance,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    fn from_samples(
        provenance: Provenance,
        sweep: &[f64],
        methods: &[&str],
        samples: &[Vec<Vec<f64>>],
    ) -> Self {
        let mut rows = Vec::new();
        for (i, &x) in sweep.iter().enumerate() {
            for (m, name) in methods.iter().enumerate() {
                let v: Vec<f64> = samples[i].iter().map(|rep| rep[m]).collect();
                let (mean, std_error) = mean_and_se(&v);
                rows.push(SweepRow {
                    sweep_value: x,
                    method: name.to_string(),
                    mean,
                    std_error,
                    repetitions: v.len(),
                });
            }
        }
        rows.sort_by(|a, b| {
            a.sweep_value
                .total_cmp(&b.sweep_value)
                .then_with(|| a.method.cmp(&b.method))
        });
        Self { provenance, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep_value,method,mean,std_error,repetitions\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                format_sig(r.sweep_value),
                r.method,
                format_sig(r.mean),
                format_sig(r.std_error),
                r.repetitions
            );
        }
        out
    }

    pub fn row(&self, sweep_value: f64, method: &str) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.method == method)
    }

    pub fn sweep_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.rows.iter().map(|r| r.sweep_value).collect();
        v.dedup();
        v
    }
}

/// Sample mean and standard error (sample standard deviation over `√n`).
pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Data and metadata of one CLI run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv: String,
    pub metadata: serde_json::Value,
}

/// Runs the experiment described by `cfg`.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let prov = Provenance::of(cfg);
    let meta = |extra: serde_json::Value| {
        let mut m = serde_json::to_value(&prov).expect("provenance serializes");
        if let (Some(obj), serde_json::Value::Object(more)) = (m.as_object_mut(), extra) {
            obj.extend(more);
        }
        m
    };
    match cfg.kind {
        ExperimentKind::ChannelDemo => {
            let csv = run_channel_demo(cfg.channel_demo.as_ref().expect("filled"), cfg.seed)?;
            Ok(RunOutput {
                csv,
                metadata: meta(serde_json::json!({})),
            })
        }
        ExperimentKind::Estimate => {
            let (csv, extra) = run_estimate(cfg.estimate.as_ref().expect("filled"), cfg.seed)?;
            Ok(RunOutput {
                csv,
                metadata: meta(extra),
            })
        }
        ExperimentKind::Optimize => {
            let o = cfg.optimize.as_ref().expect("filled");
            let (res, fpa) = run_optimize(o, cfg.seed)?;
            let extra = serde_json::json!({
                "method": o.method.name(),
                "objective_value": res.objective_value,
                "fpa_value": fpa,
                "evaluations": res.evaluations,
                "status": res.status,
                "positions": res.positions,
            });
            Ok(RunOutput {
                csv: trace_csv(&res.trace),
                metadata: meta(extra),
            })
        }
        ExperimentKind::WsrSweep => {
            let c = cfg.wsr_sweep.as_ref().expect("filled");
            let r = run_wsr_sweep(c, cfg.seed, cfg.repetitions, prov.clone())?;
            let checks = wsr_ordering(&r, &c.methods);
            Ok(RunOutput {
                csv: r.to_csv(),
                metadata: meta(serde_json::json!({ "checks": checks })),
            })
        }
        ExperimentKind::NmseSweep => {
            let r = run_nmse_sweep(
                cfg.nmse_sweep.as_ref().expect("filled"),
                cfg.seed,
                cfg.repetitions,
                prov.clone(),
            )?;
            Ok(RunOutput {
                csv: r.to_csv(),
                metadata: meta(serde_json::json!({})),
            })
        }
        ExperimentKind::CrbSweep => {
            let r = run_crb_sweep(
                cfg.crb_sweep.as_ref().expect("filled"),
                cfg.seed,
                cfg.repetitions,
                prov.clone(),
            )?;
            Ok(RunOutput {
                csv: r.to_csv(),
                metadata: meta(serde_json::json!({ "monotone_check": "passed" })),
            })
        }
    }
}

fn run_channel_demo(c: &ChannelDemoConfig, master: u64) -> Result<String> {
    let ps = random_pathset(&demo_spec(c), derive_seed(master, 0, 0, "pathset"))?;
    let lambda = c.wavelength;
    let step = c.resolution * lambda;
    let half = c.region_side * lambda / 2.0;
    let count = (c.region_side / c.resolution + 1e-9).floor() as usize + 1;
    let mut out = String::from("x,y,re,im,magnitude\n");
    for j in 0..count {
        for i in 0..count {
            let t = Position3D::xy(-half + i as f64 * step, -half + j as f64 * step);
            let h = channel_response(&ps, t, c.rx_position);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                format_sig(t.x),
                format_sig(t.y),
                format_sig(h.re),
                format_sig(h.im),
                format_sig(h.norm())
            );
        }
    }
    Ok(out)
}

fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,best_value\n");
    for (i, v) in trace.iter().enumerate() {
        let _ = writeln!(out, "{i},{}", format_sig(*v));
    }
    out
}

fn estimation_region(grid: usize, side: Option<f64>, wavelength: f64) -> Result<MovingRegion> {
    MovingRegion::centered_square(side.unwrap_or(grid as f64 / 2.0) * wavelength, 0.0)
}

/// One estimation trial on a freshly drawn on-grid channel.
struct Trial {
    estimate: SparseEstimate,
    nmse: f64,
    support_exact: bool,
}

#[allow(clippy::too_many_arguments)]
fn estimation_trial(
    method: EstimatorMethod,
    grid: usize,
    paths: usize,
    m: usize,
    noise_variance: f64,
    power: f64,
    wavelength: f64,
    region_side: Option<f64>,
    eval_points: usize,
    eps0: Option<f64>,
    seeds: [u64; 3],
) -> Result<Trial> {
    let dict = build_dictionary(grid)?;
    let region = estimation_region(grid, region_side, wavelength)?;
    let ps = on_grid_pathset(&dict, paths, wavelength, seeds[0])?;
    let field = ChannelField::new(ps.clone(), region, region)?;
    let eval = random_positions(
        &region,
        &region,
        eval_points,
        derive_seed(seeds[0], 0, 0, "eval"),
    );
    let estimate = match method {
        EstimatorMethod::Joint => {
            let pos = random_positions(&region, &region, m, seeds[1]);
            simulate_pilots(&ps, &pos, power, noise_variance, seeds[2]).and_then(|c| {
                let e = eps0.unwrap_or_else(|| c.default_eps0());
                joint_estimate(&dict, &c, e, None).map(|o| o.estimate)
            })
        }
        EstimatorMethod::Strcs => {
            let [a, b, c] = strcs_positions(&region, &region, strcs_split(m), seeds[1]);
            let run = || -> Result<SparseEstimate> {
                let ca = simulate_pilots(&ps, &a, power, noise_variance, seeds[2])?;
                let cb = simulate_pilots(
                    &ps,
                    &b,
                    power,
                    noise_variance,
                    derive_seed(seeds[2], 0, 1, "noise"),
                )?;
                let cc = simulate_pilots(
                    &ps,
                    &c,
                    power,
                    noise_variance,
                    derive_seed(seeds[2], 0, 2, "noise"),
                )?;
                let e = eps0.unwrap_or_else(|| ca.default_eps0().max(cb.default_eps0()));
                Ok(strcs_estimate(&dict, &ca, &cb, &cc, e)?.estimate)
            };
            run()
        }
    };
    // A failed estimate counts as the all-zero estimate.
    let estimate = estimate.unwrap_or_else(|_| SparseEstimate::empty(&dict));
    let value = nmse(&field, &estimate, &dict, &eval)?;
    let mut got = estimate.support.clone();
    got.sort_unstable();
    let mut want = planted_estimate(&dict, &ps).support;
    want.sort_unstable();
    Ok(Trial {
        support_exact: got == want,
        nmse: value,
        estimate,
    })
}

fn estimate_csv(est: &SparseEstimate) -> String {
    let mut out = String::from("tx_u,tx_v,rx_u,rx_v,gain_re,gain_im\n");
    for (a, g) in est.angles.iter().zip(&est.gains) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_sig(a.tx[0]),
            format_sig(a.tx[1]),
            format_sig(a.rx[0]),
            format_sig(a.rx[1]),
            format_sig(g.re),
            format_sig(g.im)
        );
    }
    out
}

fn run_estimate(c: &EstimateConfig, master: u64) -> Result<(String, serde_json::Value)> {
    if let Some(path) = &c.campaign {
        let campaign = MeasurementCampaign::read(path)?;
        let dict = build_dictionary(c.grid)?;
        let eps0 = c.eps0.unwrap_or_else(|| campaign.default_eps0());
        let out = joint_estimate(&dict, &campaign, eps0, None)?;
        let extra = serde_json::json!({
            "method": "joint",
            "measurements": campaign.len(),
            "paths_found": out.estimate.support.len(),
            "stop": format!("{:?}", out.omp.stop),
        });
        return Ok((estimate_csv(&out.estimate), extra));
    }
    let t = estimation_trial(
        c.method,
        c.grid,
        c.paths,
        c.measurements,
        c.noise_variance,
        c.power,
        c.wavelength,
        c.region_side,
        c.eval_points,
        c.eps0,
        [
            derive_seed(master, 0, 0, "pathset"),
            derive_seed(master, 0, 0, "positions"),
            derive_seed(master, 0, 0, "noise"),
        ],
    )?;
    let extra = serde_json::json!({
        "method": c.method.name(),
        "nmse": t.nmse,
        "support_exact": t.support_exact,
        "paths_found": t.estimate.support.len(),
    });
    Ok((estimate_csv(&t.estimate), extra))
}

fn user_spec(paths: usize, wavelength: f64) -> PathSetSpec {
    PathSetSpec {
        tx_paths: paths,
        rx_paths: paths,
        prm_style: PrmStyle::Diagonal,
        gain_variance: 1.0 / paths.max(1) as f64,
        wavelength,
    }
}

/// Multiuser downlink: users at the origin, each with its own diagonal path set.
#[allow(clippy::too_many_arguments)]
pub fn wsr_scenario(
    n_antennas: usize,
    users: usize,
    paths: usize,
    snr_db: f64,
    weights: Option<&[f64]>,
    wavelength: f64,
    side: f64,
    min_spacing: f64,
    seed: u64,
) -> Result<PlacementProblem> {
    if users == 0 {
        return Err(Error::Config("at least one user is required".into()));
    }
    if let Some(w) = weights {
        if w.len() != users {
            return Err(Error::Config(format!(
                "{} weights for {users} users",
                w.len()
            )));
        }
    }
    let spec = user_spec(paths, wavelength);
    let links = (0..users)
        .map(|k| {
            Ok(UserLink {
                pathset: random_pathset(&spec, derive_seed(seed, 0, k, "user"))?,
                position: Position3D::ORIGIN,
                weight: weights.map_or(1.0, |w| w[k]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let region = MovingRegion::centered_square(side * wavelength, min_spacing * wavelength)?;
    PlacementProblem::new(
        Objective::MultiuserWsr {
            users: links,
            snr: db_to_linear(snr_db),
        },
        region,
        n_antennas,
    )
}

fn wsr_problem(
    c: &WsrSweepConfig,
    _sweep: usize,
    side: f64,
    seed: u64,
) -> Result<PlacementProblem> {
    wsr_scenario(
        c.n_antennas,
        c.users,
        c.paths,
        c.snr_db,
        c.weights.as_deref(),
        c.wavelength,
        side,
        c.min_spacing,
        seed,
    )
}

fn optimize_problem(c: &OptimizeConfig, seed: u64) -> Result<PlacementProblem> {
    let lambda = c.wavelength;
    match c.objective {
        ObjectiveKind::MultiuserWsr => wsr_scenario(
            c.n_antennas,
            c.receivers,
            c.paths,
            c.snr_db,
            None,
            lambda,
            c.region_side,
            c.min_spacing,
            seed,
        ),
        ObjectiveKind::SingleLinkGain | ObjectiveKind::MimoCapacity => {
            let spec = PathSetSpec {
                tx_paths: c.paths,
                rx_paths: c.paths,
                prm_style: PrmStyle::Full,
                gain_variance: 1.0 / c.paths.max(1) as f64,
                wavelength: lambda,
            };
            let ps = random_pathset(&spec, derive_seed(seed, 0, 0, "pathset"))?;
            let region =
                MovingRegion::centered_square(c.region_side * lambda, c.min_spacing * lambda)?;
            let objective = if c.objective == ObjectiveKind::SingleLinkGain {
                Objective::SingleLinkGain {
                    pathset: ps,
                    peer: Position3D::ORIGIN,
                }
            } else {
                let rx = fpa_layout(
                    &MovingRegion::centered_square(4.0 * lambda, 0.0)?,
                    c.receivers,
                    lambda,
                )?;
                Objective::MimoCapacity {
                    pathset: ps,
                    rx_positions: rx,
                    snr: db_to_linear(c.snr_db),
                }
            };
            PlacementProblem::new(objective, region, c.n_antennas)
        }
    }
}

/// Runs one placement method; the reported value is the noiseless objective.
pub fn run_placement(
    problem: &PlacementProblem,
    method: PlacementMethod,
    settings: &MethodSettings,
    seed: u64,
) -> Result<PlacementResult> {
    let mut res = match method {
        PlacementMethod::Fpa => fpa_placement(problem)?,
        PlacementMethod::Gradient => grad_ascent_placement(
            problem,
            &GradientConfig {
                seed,
                ..settings.gradient.clone()
            },
        )?,
        PlacementMethod::Pso => pso_placement(
            problem,
            &PsoConfig {
                seed,
                ..settings.pso.clone()
            },
        )?,
        PlacementMethod::Discrete => discrete_placement(problem, &settings.discrete)?,
        PlacementMethod::Cs => cs_placement(problem, &settings.cs)?,
        PlacementMethod::Zo => {
            let zo = ZoConfig {
                wavelength: problem.wavelength,
                seed,
                ..settings.zo.clone()
            };
            let mut oracle = MeasurementOracle::from_problem(
                problem,
                zo.required_budget(),
                settings.zo_noise_std,
                derive_seed(seed, 0, 0, "oracle-noise"),
            )?;
            zo_placement(&mut oracle, &problem.region, problem.n_antennas, &zo)?
        }
    };
    res.objective_value = objective_value(problem, &res.positions)?;
    Ok(res)
}

fn run_optimize(c: &OptimizeConfig, master: u64) -> Result<(PlacementResult, f64)> {
    let problem = optimize_problem(c, derive_seed(master, 0, 0, "scenario"))?;
    let res = run_placement(
        &problem,
        c.method,
        &c.settings,
        derive_seed(master, 0, 0, c.method.name()),
    )?;
    let fpa = fpa_placement(&problem)?.objective_value;
    Ok((res, fpa))
}

fn jobs(points: usize, reps: usize) -> Vec<(usize, usize)> {
    (0..points)
        .flat_map(|i| (0..reps).map(move |r| (i, r)))
        .collect()
}

/// Regroups job results (ordered by point, then repetition) per sweep point.
fn regroup(results: Vec<Vec<f64>>, reps: usize) -> Vec<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    let mut it = results.into_iter();
    loop {
        let chunk: Vec<Vec<f64>> = it.by_ref().take(reps).collect();
        if chunk.is_empty() {
            break;
        }
        out.push(chunk);
    }
    out
}

/// Mean WSR per region size and method; all methods share each scenario draw.
pub fn run_wsr_sweep(
    c: &WsrSweepConfig,
    master: u64,
    reps: usize,
    prov: Provenance,
) -> Result<SweepResult> {
    let mut methods = c.methods.clone();
    methods.sort();
    methods.dedup();
    let results: Vec<Vec<f64>> = jobs(c.sizes.len(), reps)
        .into_par_iter()
        .map(|(i, r)| {
            // The scenario depends on the repetition only, so every size sees the same channels.
            let problem = wsr_problem(c, i, c.sizes[i], derive_seed(master, 0, r, "scenario"))?;
            methods
                .iter()
                .map(|m| {
                    Ok(run_placement(
                        &problem,
                        *m,
                        &c.settings,
                        derive_seed(master, i, r, m.name()),
                    )?
                    .objective_value)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let names: Vec<&str> = methods.iter().map(|m| m.name()).collect();
    Ok(SweepResult::from_samples(
        prov,
        &c.sizes,
        &names,
        &regroup(results, reps),
    ))
}

/// Ordering facts about a WSR sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsrOrdering {
    /// Every method's mean is at least the FPA mean at every size.
    pub all_at_least_fpa: bool,
    /// Each method's mean never drops by more than one standard error as the region grows.
    pub monotone_in_size: bool,
    /// PSO's mean is at least every other method's mean at every size (true when PSO is absent).
    pub pso_best: bool,
}

pub fn wsr_ordering(r: &SweepResult, methods: &[PlacementMethod]) -> WsrOrdering {
    let sizes = r.sweep_values();
    let names: Vec<&str> = methods.iter().map(|m| m.name()).collect();
    let mut all_at_least_fpa = true;
    let mut pso_best = true;
    for &s in &sizes {
        let fpa = r.row(s, "fpa").map(|x| x.mean).unwrap_or(f64::NEG_INFINITY);
        let pso = r.row(s, "pso").map(|x| x.mean);
        for n in &names {
            let m = r.row(s, n).expect("row present").mean;
            all_at_least_fpa &= m >= fpa;
            if let Some(p) = pso {
                pso_best &= p >= m;
            }
        }
    }
    let mut monotone_in_size = true;
    for n in &names {
        for w in sizes.windows(2) {
            let (a, b) = (r.row(w[0], n).expect("row"), r.row(w[1], n).expect("row"));
            monotone_in_size &= b.mean >= a.mean - a.std_error.max(b.std_error);
        }
    }
    WsrOrdering {
        all_at_least_fpa,
        monotone_in_size,
        pso_best,
    }
}

/// Mean field NMSE per measurement count and estimator, on paired channel draws.
pub fn run_nmse_sweep(
    c: &NmseSweepConfig,
    master: u64,
    reps: usize,
    prov: Provenance,
) -> Result<SweepResult> {
    let mut methods = c.methods.clone();
    methods.sort();
    methods.dedup();
    let results: Vec<Vec<f64>> = jobs(c.measurements.len(), reps)
        .into_par_iter()
        .map(|(i, r)| {
            let seeds = [
                derive_seed(master, i, r, "pathset"),
                derive_seed(master, i, r, "positions"),
                derive_seed(master, i, r, "noise"),
            ];
            methods
                .iter()
                .map(|m| {
                    Ok(estimation_trial(
                        *m,
                        c.grid,
                        c.paths,
                        c.measurements[i],
                        c.noise_variance,
                        c.power,
                        c.wavelength,
                        c.region_side,
                        c.eval_points,
                        None,
                        seeds,
                    )?
                    .nmse)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let names: Vec<&str> = methods.iter().map(|m| m.name()).collect();
    let sweep: Vec<f64> = c.measurements.iter().map(|&m| m as f64).collect();
    Ok(SweepResult::from_samples(
        prov,
        &sweep,
        &names,
        &regroup(results, reps),
    ))
}

/// Geometry for one CRB-sweep method on a segment of `length` wavelengths.
pub fn crb_geometry(c: &CrbSweepConfig, method: CrbMethod, length: f64) -> Result<ArrayGeometry> {
    let lambda = c.wavelength;
    let seg = MovingRegion::segment_x(0.0, length * lambda, c.min_spacing * lambda)?;
    let angle = PathAngles::new(c.elevation, c.azimuth)?;
    match method {
        CrbMethod::Edge => crb_optimal_placement(
            &seg,
            c.n_antennas,
            angle,
            c.snr,
            c.snapshots,
            lambda,
            CrbPlacementMethod::ClosedForm,
        ),
        CrbMethod::UniformSpan => {
            let pitch = length * lambda / (c.n_antennas - 1) as f64;
            ArrayGeometry::new(
                (0..c.n_antennas)
                    .map(|i| Position3D::xy(i as f64 * pitch, 0.0))
                    .collect(),
                lambda,
            )
        }
        CrbMethod::CenteredFpa => {
            ArrayGeometry::new(fpa_layout(&seg, c.n_antennas, lambda)?, lambda)
        }
    }
}

/// Spatial-frequency CRB per segment length and geometry, followed by the
/// check that the edge geometry improves with length and never loses to the
/// uniform span.
pub fn run_crb_sweep(
    c: &CrbSweepConfig,
    _master: u64,
    reps: usize,
    prov: Provenance,
) -> Result<SweepResult> {
    let mut methods = c.methods.clone();
    methods.sort();
    methods.dedup();
    let angle = PathAngles::new(c.elevation, c.azimuth)?;
    let results: Vec<Vec<f64>> = jobs(c.lengths.len(), reps)
        .into_par_iter()
        .map(|(i, _)| {
            methods
                .iter()
                .map(|m| {
                    let g = crb_geometry(c, *m, c.lengths[i])?;
                    Ok(single_target_crb(&g, angle, c.snr, c.snapshots)?.spatial_frequency[0])
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let names: Vec<&str> = methods.iter().map(|m| m.name()).collect();
    let r = SweepResult::from_samples(prov, &c.lengths, &names, &regroup(results, reps));
    check_crb_sweep(&r)?;
    Ok(r)
}

fn check_crb_sweep(r: &SweepResult) -> Result<()> {
    let xs = r.sweep_values();
    if r.rows.iter().any(|x| x.method == "edge") {
        for w in xs.windows(2) {
            let (a, b) = (
                r.row(w[0], "edge").expect("row"),
                r.row(w[1], "edge").expect("row"),
            );
            if !(b.mean < a.mean) {
                return Err(Error::Numerical(format!(
                    "edge CRB did not decrease from length {} to {}",
                    w[0], w[1]
                )));
            }
        }
        if r.rows.iter().any(|x| x.method == "uniform-span") {
            for &x in &xs {
                let (e, u) = (
                    r.row(x, "edge").expect("row"),
                    r.row(x, "uniform-span").expect("row"),
                );
                if u.mean < e.mean * (1.0 - 1e-12) {
                    return Err(Error::Numerical(format!(
                        "uniform span beat the edge geometry at length {x}"
                    )));
                }
            }
        }
    }
    Ok(())
}
