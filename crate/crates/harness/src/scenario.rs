//! Translation of an [`ExperimentConfig`] into solver inputs, and evaluation of
//! the configured schemes on one seeded channel realization.

use fim_core::bcd::run_scheme;
use fim_core::channel::{perturb_csi, sample_environment};
use fim_core::morphing::capacity_at;
use fim_core::seeds::mix;
use fim_core::{
    eigenchannel_gains, ArrayGeometry, BcdConfig, EnvironmentConfig, FimChannel, InnerLoopSettings, LineSearch,
    LinkGeometry, OrientationAngles, OrientationFrame, Scheme, ScatteringEnvironment, SurfaceShape, TransmitCovariance,
};
use nalgebra::Vector3;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;

/// Index of the independent random stream used for each purpose within a realization.
pub const ENVIRONMENT_STREAM: u64 = 0;
pub const INIT_STREAM: u64 = 1;
pub const CSI_STREAM: u64 = 2;

/// Seed of realization `r` under `base`.
pub fn realization_seed(base: u64, r: usize) -> u64 {
    mix(base, r as u64)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Solver-ready description of one sweep point.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub link: LinkGeometry<f64>,
    pub environment: EnvironmentConfig,
    pub power_budget: f64,
    pub noise_power: f64,
    /// Morphing ranges `(ζ̃, ξ̃)` in meters.
    pub bounds: (f64, f64),
    /// Absolute variance of the gain estimation error.
    pub csi_gain_mse: f64,
    /// Angle estimation RMSE in radians.
    pub csi_angle_rmse: f64,
    pub bcd: BcdConfig,
}

fn frame(deg: [f64; 3]) -> Result<OrientationFrame<f64>, HarnessError> {
    let angles = OrientationAngles::new(deg[0].to_radians(), deg[1].to_radians(), deg[2].to_radians())?;
    Ok(OrientationFrame::from_angles(&angles))
}

impl Scenario {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let lambda = cfg.wavelength();
        let s = &cfg.system;
        let a = &cfg.arrays;
        let spacing = a.spacing_wavelengths * lambda;
        let tx = ArrayGeometry::new(
            a.tx_elements[0],
            a.tx_elements[1],
            spacing,
            spacing,
            frame(s.tx_orientation_deg)?,
            Vector3::from(s.tx_position_m),
        )?;
        let rx = ArrayGeometry::new(
            a.rx_elements[0],
            a.rx_elements[1],
            spacing,
            spacing,
            frame(s.rx_orientation_deg)?,
            Vector3::from(s.rx_position_m),
        )?;
        let link = LinkGeometry::new(tx, rx, lambda)?;
        let pathloss = fim_core::channel::path_loss(
            db_to_linear(s.reference_gain_db),
            link.distance(),
            s.reference_distance_m,
            s.pathloss_exponent,
        );
        let c = &cfg.channel;
        let spread = c.angular_spread_deg.to_radians();
        let environment = EnvironmentConfig {
            num_clusters: c.clusters,
            paths_per_cluster: c.paths_per_cluster,
            azimuth_spread: spread,
            elevation_spread: spread,
            pathloss,
        };
        let per_path_variance = pathloss / (c.clusters * c.paths_per_cluster) as f64;
        let o = &cfg.optimizer;
        let bcd = BcdConfig {
            max_outer_iterations: o.max_outer_iterations,
            convergence_threshold_db: o.convergence_threshold_db,
            init: o.init_candidates.to_core(),
            inner: InnerLoopSettings {
                max_steps: o.inner_max_steps,
                relative_tolerance: o.inner_relative_tolerance,
                line_search: LineSearch {
                    initial_displacement: o.line_search_initial_displacement,
                    shrink: o.line_search_shrink,
                    armijo: o.line_search_armijo,
                    max_halvings: o.line_search_max_halvings,
                },
            },
            ..BcdConfig::default()
        };
        bcd.validate()?;
        Ok(Self {
            link,
            environment,
            power_budget: dbm_to_watts(s.transmit_power_dbm),
            noise_power: dbm_to_watts(s.noise_power_dbm),
            bounds: (a.tx_morphing_range_wavelengths * lambda, a.rx_morphing_range_wavelengths * lambda),
            csi_gain_mse: c.csi_gain_mse * per_path_variance,
            csi_angle_rmse: c.csi_angle_rmse_deg.to_radians(),
            bcd,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.link.wavelength
    }

    pub fn has_csi_error(&self) -> bool {
        self.csi_gain_mse > 0.0 || self.csi_angle_rmse > 0.0
    }

    /// True environment of realization `seed`, and the estimate the optimizer sees.
    pub fn environments(&self, seed: u64) -> Result<(ScatteringEnvironment<f64>, ScatteringEnvironment<f64>), HarnessError> {
        let truth = sample_environment::<f64>(&self.environment, mix(seed, ENVIRONMENT_STREAM))?;
        let estimate = if self.has_csi_error() {
            perturb_csi(&truth, self.csi_gain_mse, self.csi_angle_rmse, mix(seed, CSI_STREAM))?
        } else {
            truth.clone()
        };
        Ok((truth, estimate))
    }

    /// BCD settings for realization `seed`.
    pub fn bcd_config(&self, seed: u64) -> BcdConfig {
        BcdConfig {
            seed: mix(seed, INIT_STREAM),
            ..self.bcd
        }
    }
}

/// One scheme's result on one realization, evaluated on the true channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub capacity: f64,
    /// Capacity the optimizer believed it achieved (differs only under CSI error).
    pub estimated_capacity: f64,
    /// Eigenchannel gains of the final true channel, descending.
    pub eigen_gains: Vec<f64>,
    /// Capacity trace of the flexible schemes.
    pub trace: Option<Vec<f64>>,
    pub zeta: SurfaceShape<f64>,
    pub xi: SurfaceShape<f64>,
    pub covariance: TransmitCovariance<f64>,
}

/// Runs every scheme on realization `seed` of `scenario`.
///
/// Schemes optimize on the estimated environment; the reported capacity uses
/// the resulting shapes and covariance on the true channel.
pub fn run_realization(scenario: &Scenario, schemes: &[Scheme], seed: u64) -> Result<Vec<SchemeResult>, HarnessError> {
    let (truth, estimate) = scenario.environments(seed)?;
    let true_channel = FimChannel::new(&truth, &scenario.link);
    let est_channel = FimChannel::new(&estimate, &scenario.link);
    let bcd = scenario.bcd_config(seed);
    schemes
        .iter()
        .map(|&scheme| {
            let out = run_scheme(scheme, &est_channel, scenario.bounds, scenario.power_budget, scenario.noise_power, &bcd)?;
            let capacity = if scenario.has_csi_error() {
                capacity_at(&true_channel, &out.zeta, &out.xi, &out.covariance)?
            } else {
                out.capacity
            };
            let h = true_channel.matrix(&out.zeta, &out.xi)?;
            Ok(SchemeResult {
                scheme,
                capacity,
                estimated_capacity: out.capacity,
                eigen_gains: eigenchannel_gains(&h),
                trace: out.report.map(|r| r.capacity_trace),
                zeta: out.zeta,
                xi: out.xi,
                covariance: out.covariance,
            })
        })
        .collect()
}
