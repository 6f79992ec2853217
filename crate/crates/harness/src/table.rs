//! Result tables and their CSV/JSON renderings.
//!
//! CSV output starts with one `#`-prefixed line holding the metadata as JSON;
//! vector-valued fields are written as `;`-separated lists in a single column.
//! Numbers use the shortest representation that round-trips, so identical
//! results always render to identical bytes.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// Reported in place of `10 log₁₀ 0`.
pub const ZERO_GAIN_DB: f64 = -999.0;

/// Provenance recorded with every table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub realizations: usize,
    pub experiment: String,
}

impl Metadata {
    pub fn for_config(cfg: &ExperimentConfig, experiment: &str) -> Self {
        Self {
            tool: "fim-mimo".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(cfg),
            seed: cfg.experiment.seed,
            realizations: cfg.experiment.realizations,
            experiment: experiment.to_string(),
        }
    }
}

/// SHA-256 of the canonical JSON form of the (fully defaulted) configuration.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("configuration serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Capacity statistics of one scheme at one sweep point (bps/Hz).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub sweep_variable: String,
    pub sweep_value: f64,
    pub scheme: String,
    pub realizations: usize,
    pub mean_capacity: f64,
    pub min_capacity: f64,
    pub max_capacity: f64,
    /// Mean eigenchannel gain per mode, descending, in dB.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen_gains_db: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacities: Option<Vec<f64>>,
}

/// One outer iteration of the staged convergence experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub realization: usize,
    pub iteration: usize,
    pub stage: usize,
    pub range_wavelengths: f64,
    pub capacity: f64,
    pub tx_deformations_wavelengths: Vec<f64>,
    pub rx_deformations_wavelengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table<R> {
    pub meta: Metadata,
    pub rows: Vec<R>,
}

pub type ResultTable = Table<ResultRow>;
pub type TraceTable = Table<TraceRow>;

/// Converts a linear power gain to dB, mapping zero to [`ZERO_GAIN_DB`].
pub fn gain_db(linear: f64) -> f64 {
    if linear > 0.0 {
        10.0 * linear.log10()
    } else {
        ZERO_GAIN_DB
    }
}

fn list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

trait CsvRow {
    const HEADER: &'static str;
    fn fields(&self) -> Vec<String>;
}

impl CsvRow for ResultRow {
    const HEADER: &'static str =
        "sweep_variable,sweep_value,scheme,realizations,mean_capacity,min_capacity,max_capacity,eigen_gains_db,capacities";

    fn fields(&self) -> Vec<String> {
        vec![
            self.sweep_variable.clone(),
            self.sweep_value.to_string(),
            self.scheme.clone(),
            self.realizations.to_string(),
            self.mean_capacity.to_string(),
            self.min_capacity.to_string(),
            self.max_capacity.to_string(),
            self.eigen_gains_db.as_deref().map(list).unwrap_or_default(),
            self.capacities.as_deref().map(list).unwrap_or_default(),
        ]
    }
}

impl CsvRow for TraceRow {
    const HEADER: &'static str =
        "realization,iteration,stage,range_wavelengths,capacity,tx_deformations_wavelengths,rx_deformations_wavelengths";

    fn fields(&self) -> Vec<String> {
        vec![
            self.realization.to_string(),
            self.iteration.to_string(),
            self.stage.to_string(),
            self.range_wavelengths.to_string(),
            self.capacity.to_string(),
            list(&self.tx_deformations_wavelengths),
            list(&self.rx_deformations_wavelengths),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl<R: Serialize> Table<R> {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tables hold only finite numbers and strings");
        s.push('\n');
        s
    }
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        render_csv(&self.meta, &self.rows)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn row(&self, sweep_value: f64, scheme: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.sweep_value == sweep_value && r.scheme == scheme)
    }
}

impl TraceTable {
    pub fn to_csv(&self) -> String {
        render_csv(&self.meta, &self.rows)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

fn render_csv<R: CsvRow>(meta: &Metadata, rows: &[R]) -> String {
    let mut out = String::new();
    out.push_str("# ");
    out.push_str(&serde_json::to_string(meta).expect("metadata serializes"));
    out.push('\n');
    out.push_str(R::HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.fields().join(","));
        out.push('\n');
    }
    out
}
