//! TOML experiment configuration. Every table and key is optional and falls
//! back to the reference scenario; unknown keys are rejected.
//!
//! ```toml
//! [experiment]
//! kind = "sweep"             # or "convergence"
//! realizations = 100
//! seed = 1
//! schemes = ["FIM-WPA", "RAA-WPA"]
//!
//! [sweep]
//! variable = "morphing_range"
//! values = [0.0, 0.1, 0.2, 0.3, 0.5]
//! ```

use std::path::Path;

use fim_core::{InitCount, Scheme};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Speed of light used to derive the wavelength from the carrier frequency.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub system: SystemSection,
    pub arrays: ArraySection,
    pub channel: ChannelSection,
    pub optimizer: OptimizerSection,
    pub sweep: SweepSection,
    pub convergence: ConvergenceSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Monte Carlo capacity statistics over a swept parameter.
    Sweep,
    /// Per-iteration capacity and deformation traces under a staged morphing range.
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub realizations: usize,
    pub seed: u64,
    pub schemes: Vec<String>,
    /// Include every per-realization capacity in the output rows.
    pub record_realizations: bool,
    /// Report the mean eigenchannel gains (dB) of each scheme's final channel.
    pub eigen_gains: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Sweep,
            realizations: 100,
            seed: 0,
            schemes: Scheme::ALL.iter().map(|s| s.name().to_string()).collect(),
            record_realizations: false,
            eigen_gains: false,
        }
    }
}

/// Link budget and placement. Angles are in degrees; positions in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub carrier_frequency_hz: f64,
    /// Informational: already folded into the noise power.
    pub bandwidth_hz: f64,
    pub reference_gain_db: f64,
    pub reference_distance_m: f64,
    pub pathloss_exponent: f64,
    pub noise_power_dbm: f64,
    pub transmit_power_dbm: f64,
    pub tx_position_m: [f64; 3],
    pub rx_position_m: [f64; 3],
    /// `[azimuth, elevation, spin]` of the transmit surface.
    pub tx_orientation_deg: [f64; 3],
    pub rx_orientation_deg: [f64; 3],
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 28e9,
            bandwidth_hz: 100e6,
            reference_gain_db: -60.0,
            reference_distance_m: 1.0,
            pathloss_exponent: 2.2,
            noise_power_dbm: -94.0,
            transmit_power_dbm: 10.0,
            tx_position_m: [0.0, 0.0, 10.0],
            rx_position_m: [0.0, 100.0, 0.0],
            tx_orientation_deg: [90.0, 135.0, 0.0],
            rx_orientation_deg: [90.0, 135.0, 0.0],
        }
    }
}

/// Element grids and morphing ranges, in wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySection {
    pub tx_elements: [usize; 2],
    pub rx_elements: [usize; 2],
    pub spacing_wavelengths: f64,
    pub tx_morphing_range_wavelengths: f64,
    pub rx_morphing_range_wavelengths: f64,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            tx_elements: [2, 2],
            rx_elements: [2, 2],
            spacing_wavelengths: 0.5,
            tx_morphing_range_wavelengths: 0.5,
            rx_morphing_range_wavelengths: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub clusters: usize,
    pub paths_per_cluster: usize,
    /// Standard deviation of path angles around each cluster mean.
    pub angular_spread_deg: f64,
    /// Variance of the gain estimation error, relative to the per-path gain variance.
    pub csi_gain_mse: f64,
    /// RMS angle estimation error.
    pub csi_angle_rmse_deg: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            clusters: 8,
            paths_per_cluster: 4,
            angular_spread_deg: 180.0 / 128.0,
            csi_gain_mse: 0.0,
            csi_angle_rmse_deg: 0.0,
        }
    }
}

/// Number of random initial shapes: `"auto"` or an explicit count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitCandidates {
    Count(usize),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoKeyword {
    Auto,
}

impl InitCandidates {
    pub fn to_core(self) -> InitCount {
        match self {
            InitCandidates::Count(n) => InitCount::Fixed(n),
            InitCandidates::Keyword(AutoKeyword::Auto) => InitCount::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub max_outer_iterations: usize,
    pub convergence_threshold_db: f64,
    pub init_candidates: InitCandidates,
    pub inner_max_steps: usize,
    pub inner_relative_tolerance: f64,
    /// First trial displacement of the most sensitive element, in wavelengths.
    pub line_search_initial_displacement: f64,
    pub line_search_shrink: f64,
    pub line_search_armijo: f64,
    pub line_search_max_halvings: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            max_outer_iterations: 50,
            convergence_threshold_db: -30.0,
            init_candidates: InitCandidates::Keyword(AutoKeyword::Auto),
            inner_max_steps: 100,
            inner_relative_tolerance: 1e-4,
            line_search_initial_displacement: 0.1,
            line_search_shrink: 0.5,
            line_search_armijo: 1e-4,
            line_search_max_halvings: 30,
        }
    }
}

/// Quantity varied across sweep points, with the unit of its values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Single point at the base configuration.
    None,
    /// Elements per surface (perfect squares, both ends).
    Antennas,
    /// Element spacing in wavelengths inside a fixed half-wavelength aperture.
    Spacing,
    /// Transmit power in dBm.
    Power,
    /// Number of clusters.
    Clusters,
    /// Morphing range of both surfaces, in wavelengths.
    MorphingRange,
    /// Paths per cluster.
    Paths,
    /// Angular spread in degrees.
    AngularSpread,
    /// Relative gain estimation error variance.
    CsiGainMse,
    /// Angle estimation RMSE in degrees.
    CsiAngleRmse,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::None => "none",
            SweepVariable::Antennas => "antennas",
            SweepVariable::Spacing => "spacing",
            SweepVariable::Power => "power",
            SweepVariable::Clusters => "clusters",
            SweepVariable::MorphingRange => "morphing_range",
            SweepVariable::Paths => "paths",
            SweepVariable::AngularSpread => "angular_spread",
            SweepVariable::CsiGainMse => "csi_gain_mse",
            SweepVariable::CsiAngleRmse => "csi_angle_rmse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            variable: SweepVariable::None,
            values: Vec::new(),
        }
    }
}

/// Staged morphing-range schedule for the convergence experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    /// Morphing range of each stage, in wavelengths; stages must not shrink.
    pub stage_ranges_wavelengths: Vec<f64>,
    pub iterations_per_stage: usize,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            stage_ranges_wavelengths: vec![0.1, 0.2, 0.5],
            iterations_per_stage: 25,
        }
    }
}

fn is_integral(v: f64) -> bool {
    v.is_finite() && v >= 0.0 && v.fract() == 0.0
}

fn square_side(v: f64) -> Option<usize> {
    if !is_integral(v) || v < 1.0 {
        return None;
    }
    let n = v as usize;
    let side = (n as f64).sqrt().round() as usize;
    (side * side == n).then_some(side)
}

/// Elements per axis for a spacing of `spacing` wavelengths in a half-wavelength aperture.
pub fn elements_per_axis_for_spacing(spacing: f64) -> usize {
    ((0.5 / spacing) + 1e-9).floor() as usize + 1
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.system.carrier_frequency_hz
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>, HarnessError> {
        self.experiment
            .schemes
            .iter()
            .map(|s| s.parse::<Scheme>().map_err(|_| field_error("experiment.schemes", format!("unknown scheme `{s}`"))))
            .collect()
    }

    /// Sweep points; a `none` sweep yields one point with value 0.
    pub fn sweep_points(&self) -> Vec<f64> {
        if self.sweep.variable == SweepVariable::None {
            vec![0.0]
        } else {
            self.sweep.values.clone()
        }
    }

    /// Checks every field and names the first offending one.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let e = &self.experiment;
        if e.realizations == 0 {
            return Err(field_error("experiment.realizations", "must be at least 1"));
        }
        let schemes = self.schemes()?;
        if schemes.is_empty() {
            return Err(field_error("experiment.schemes", "list at least one scheme"));
        }
        let mut unique = schemes.clone();
        unique.sort();
        unique.dedup();
        if unique.len() != schemes.len() {
            return Err(field_error("experiment.schemes", "schemes must not repeat"));
        }

        let s = &self.system;
        positive("system.carrier_frequency_hz", s.carrier_frequency_hz)?;
        positive("system.bandwidth_hz", s.bandwidth_hz)?;
        positive("system.reference_distance_m", s.reference_distance_m)?;
        finite("system.reference_gain_db", s.reference_gain_db)?;
        finite("system.pathloss_exponent", s.pathloss_exponent)?;
        finite("system.noise_power_dbm", s.noise_power_dbm)?;
        finite("system.transmit_power_dbm", s.transmit_power_dbm)?;
        for (name, p) in [("system.tx_position_m", s.tx_position_m), ("system.rx_position_m", s.rx_position_m)] {
            if p.iter().any(|x| !x.is_finite()) {
                return Err(field_error(name, "coordinates must be finite"));
            }
        }
        if s.tx_position_m == s.rx_position_m {
            return Err(field_error("system.rx_position_m", "must differ from the transmitter position"));
        }
        for (name, o) in [
            ("system.tx_orientation_deg", s.tx_orientation_deg),
            ("system.rx_orientation_deg", s.rx_orientation_deg),
        ] {
            let ok = (0.0..180.0).contains(&o[0]) && (0.0..180.0).contains(&o[1]) && (0.0..360.0).contains(&o[2]);
            if !ok {
                return Err(field_error(name, "need azimuth, elevation in [0, 180) and spin in [0, 360)"));
            }
        }

        let a = &self.arrays;
        for (name, c) in [("arrays.tx_elements", a.tx_elements), ("arrays.rx_elements", a.rx_elements)] {
            if c[0] == 0 || c[1] == 0 {
                return Err(field_error(name, "both counts must be at least 1"));
            }
        }
        positive("arrays.spacing_wavelengths", a.spacing_wavelengths)?;
        non_negative("arrays.tx_morphing_range_wavelengths", a.tx_morphing_range_wavelengths)?;
        non_negative("arrays.rx_morphing_range_wavelengths", a.rx_morphing_range_wavelengths)?;

        let c = &self.channel;
        if c.clusters == 0 {
            return Err(field_error("channel.clusters", "must be at least 1"));
        }
        if c.paths_per_cluster == 0 {
            return Err(field_error("channel.paths_per_cluster", "must be at least 1"));
        }
        non_negative("channel.angular_spread_deg", c.angular_spread_deg)?;
        non_negative("channel.csi_gain_mse", c.csi_gain_mse)?;
        non_negative("channel.csi_angle_rmse_deg", c.csi_angle_rmse_deg)?;

        let o = &self.optimizer;
        if o.max_outer_iterations == 0 {
            return Err(field_error("optimizer.max_outer_iterations", "must be at least 1"));
        }
        finite("optimizer.convergence_threshold_db", o.convergence_threshold_db)?;
        non_negative("optimizer.inner_relative_tolerance", o.inner_relative_tolerance)?;
        positive("optimizer.line_search_initial_displacement", o.line_search_initial_displacement)?;
        if !(o.line_search_shrink > 0.0 && o.line_search_shrink < 1.0) {
            return Err(field_error("optimizer.line_search_shrink", "must lie in (0, 1)"));
        }
        non_negative("optimizer.line_search_armijo", o.line_search_armijo)?;

        self.validate_sweep()?;

        if e.kind == ExperimentKind::Convergence {
            let cv = &self.convergence;
            if cv.stage_ranges_wavelengths.is_empty() {
                return Err(field_error("convergence.stage_ranges_wavelengths", "list at least one stage"));
            }
            if cv.stage_ranges_wavelengths.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(field_error("convergence.stage_ranges_wavelengths", "ranges must be finite and non-negative"));
            }
            if cv.stage_ranges_wavelengths.windows(2).any(|w| w[1] < w[0]) {
                return Err(field_error("convergence.stage_ranges_wavelengths", "stages must not shrink"));
            }
            if cv.iterations_per_stage == 0 {
                return Err(field_error("convergence.iterations_per_stage", "must be at least 1"));
            }
        }
        Ok(())
    }

    fn validate_sweep(&self) -> Result<(), HarnessError> {
        let sw = &self.sweep;
        if sw.variable == SweepVariable::None {
            if !sw.values.is_empty() {
                return Err(field_error("sweep.values", "a `none` sweep takes no values"));
            }
            return Ok(());
        }
        if sw.values.is_empty() {
            return Err(field_error("sweep.values", "list at least one value"));
        }
        for &v in &sw.values {
            let ok = match sw.variable {
                SweepVariable::None => true,
                SweepVariable::Antennas => square_side(v).is_some(),
                SweepVariable::Spacing => v.is_finite() && v > 0.0 && v <= 0.5,
                SweepVariable::Power => v.is_finite(),
                SweepVariable::Clusters | SweepVariable::Paths => is_integral(v) && v >= 1.0,
                SweepVariable::MorphingRange
                | SweepVariable::AngularSpread
                | SweepVariable::CsiGainMse
                | SweepVariable::CsiAngleRmse => v.is_finite() && v >= 0.0,
            };
            if !ok {
                let hint = match sw.variable {
                    SweepVariable::Antennas => "element counts must be perfect squares",
                    SweepVariable::Spacing => "spacings must lie in (0, 0.5] wavelengths",
                    SweepVariable::Clusters | SweepVariable::Paths => "counts must be positive integers",
                    _ => "values must be finite and non-negative",
                };
                return Err(field_error("sweep.values", format!("{v} rejected for `{}`: {hint}", sw.variable.name())));
            }
        }
        Ok(())
    }

    /// Copy of the configuration with the sweep variable set to `value`.
    pub fn at_sweep_point(&self, value: f64) -> Self {
        let mut c = self.clone();
        match self.sweep.variable {
            SweepVariable::None => {}
            SweepVariable::Antennas => {
                let side = square_side(value).expect("validated sweep value");
                c.arrays.tx_elements = [side, side];
                c.arrays.rx_elements = [side, side];
            }
            SweepVariable::Spacing => {
                let n = elements_per_axis_for_spacing(value);
                c.arrays.spacing_wavelengths = value;
                c.arrays.tx_elements = [n, n];
                c.arrays.rx_elements = [n, n];
            }
            SweepVariable::Power => c.system.transmit_power_dbm = value,
            SweepVariable::Clusters => c.channel.clusters = value as usize,
            SweepVariable::MorphingRange => {
                c.arrays.tx_morphing_range_wavelengths = value;
                c.arrays.rx_morphing_range_wavelengths = value;
            }
            SweepVariable::Paths => c.channel.paths_per_cluster = value as usize,
            SweepVariable::AngularSpread => c.channel.angular_spread_deg = value,
            SweepVariable::CsiGainMse => c.channel.csi_gain_mse = value,
            SweepVariable::CsiAngleRmse => c.channel.csi_angle_rmse_deg = value,
        }
        c
    }
}

fn field_error(field: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config(format!("{field}: {}", reason.into()))
}

fn positive(field: &str, v: f64) -> Result<(), HarnessError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field_error(field, format!("{v} must be positive and finite")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), HarnessError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(field_error(field, format!("{v} must be non-negative and finite")))
    }
}

fn finite(field: &str, v: f64) -> Result<(), HarnessError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(field_error(field, format!("{v} must be finite")))
    }
}
