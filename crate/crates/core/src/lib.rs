//! Channel model, capacity evaluation and shape optimisation for MIMO links
//! between two flexible intelligent metasurfaces (FIMs).
//!
//! Every element of an FIM can be displaced along the surface normal. The
//! displacement rotates the phase each multipath component picks up at that
//! element, so the surface shapes at both ends of the link reshape the channel
//! matrix. This crate provides:
//!
//! - [`geometry`]: orientation frames, element positions and surface shapes;
//! - [`channel`]: the clustered far-field environment and the channel matrix;
//! - [`capacity`]: log-det capacity, water-filling and equal-power covariances;
//! - [`morphing`]: analytic shape gradients and projected gradient ascent;
//! - [`bcd`]: alternating covariance/shape optimization and benchmark schemes;
//! - [`gradcheck`]: finite-difference verification of the gradients.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.
//!
//! ```
//! use fim_core::{bcd, channel, geometry};
//!
//! let lambda = 0.01;
//! let frame = geometry::OrientationFrame::identity();
//! let tx = geometry::ArrayGeometry::uniform(2, 2, lambda / 2.0, frame).unwrap();
//! let rx = tx.clone().with_reference_position(nalgebra::Vector3::new(0.0, 0.0, 50.0));
//! let link = geometry::LinkGeometry::new(tx, rx, lambda).unwrap();
//! let env_cfg = channel::EnvironmentConfig {
//!     num_clusters: 2,
//!     paths_per_cluster: 2,
//!     azimuth_spread: 0.05,
//!     elevation_spread: 0.05,
//!     pathloss: 1.0,
//! };
//! let env = channel::sample_environment::<f64>(&env_cfg, 3).unwrap();
//! let ch = channel::FimChannel::new(&env, &link);
//! let report = bcd::run_bcd(&ch, (lambda / 4.0, lambda / 4.0), 1.0, 0.1, &Default::default()).unwrap();
//! assert!(report.capacity_trace.windows(2).all(|w| w[1] >= w[0]));
//! ```

pub mod bcd;
pub mod capacity;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod morphing;
pub mod scalar;
pub mod seeds;

pub use bcd::{run_bcd, run_scheme, BcdConfig, BcdReport, InitCount, PowerPolicy, Scheme, SchemeOutcome};
pub use capacity::{capacity, eigenchannel_gains, eigenmode_waterfill, equal_power_covariance, EigenmodeSolution, TransmitCovariance};
pub use channel::{assemble_channel, ChannelMatrix, EnvironmentConfig, FimChannel, PathAngles, ScatteringEnvironment};
pub use error::{Error, Result};
pub use geometry::{ArrayGeometry, LinkGeometry, OrientationAngles, OrientationFrame, SurfaceShape};
pub use morphing::{GradientWorkspace, InnerLoopSettings, LineSearch};
pub use scalar::Real;

pub type ArrayGeometry64 = ArrayGeometry<f64>;
pub type BcdReport64 = BcdReport<f64>;
pub type ChannelMatrix64 = ChannelMatrix<f64>;
pub type FimChannel64 = FimChannel<f64>;
pub type LinkGeometry64 = LinkGeometry<f64>;
pub type ScatteringEnvironment64 = ScatteringEnvironment<f64>;
pub type SurfaceShape64 = SurfaceShape<f64>;
pub type TransmitCovariance64 = TransmitCovariance<f64>;
