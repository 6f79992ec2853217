//! Clustered far-field multipath environment and the shape-dependent MIMO
//! channel `H(ζ, ξ) = [A_r ⊙ F_r(ξ)] diag(ς) [A_t ⊙ F_t(ζ)]ᴴ`.
//!
//! Paths are indexed cluster-major: path `(l, g)` lives at `l * G + g`.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, LinkGeometry, OrientationFrame, SurfaceShape};
use crate::scalar::{unit_phasor, Real};

/// Unit propagation vector for an (azimuth, elevation) pair.
pub fn propagation_direction<T: Real>(azimuth: T, elevation: T) -> Vector3<T> {
    let (sp, cp) = azimuth.sin_cos();
    let (st, ct) = elevation.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

/// Log-distance path loss `β² = β₀² (d / d₀)^(−α)` in linear units.
pub fn path_loss<T: Real>(reference_gain: T, distance: T, reference_distance: T, exponent: T) -> T {
    reference_gain * (distance / reference_distance).powf(-exponent)
}

/// Azimuth/elevation of every path on one side of the link.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAngles<T> {
    pub azimuth: Vec<T>,
    pub elevation: Vec<T>,
}

impl<T: Real> PathAngles<T> {
    pub fn len(&self) -> usize {
        self.azimuth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.azimuth.is_empty()
    }

    pub fn direction(&self, path: usize) -> Vector3<T> {
        propagation_direction(self.azimuth[path], self.elevation[path])
    }
}

/// Scattering clusters with per-path angles and complex gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringEnvironment<T> {
    num_clusters: usize,
    paths_per_cluster: usize,
    pub departure: PathAngles<T>,
    pub arrival: PathAngles<T>,
    pub gains: Vec<Complex<T>>,
    pub cluster_powers: Vec<T>,
    pub pathloss: T,
}

impl<T: Real> ScatteringEnvironment<T> {
    /// Builds an environment from explicit path data. `cluster_powers` defaults to an
    /// equal split of `pathloss` when empty.
    pub fn new(
        num_clusters: usize,
        paths_per_cluster: usize,
        departure: PathAngles<T>,
        arrival: PathAngles<T>,
        gains: Vec<Complex<T>>,
        pathloss: T,
    ) -> Result<Self> {
        if num_clusters == 0 || paths_per_cluster == 0 {
            return Err(Error::config("clusters", "need at least one cluster and one path"));
        }
        let lg = num_clusters * paths_per_cluster;
        for (ctx, n) in [
            ("departure azimuth", departure.azimuth.len()),
            ("departure elevation", departure.elevation.len()),
            ("arrival azimuth", arrival.azimuth.len()),
            ("arrival elevation", arrival.elevation.len()),
            ("path gains", gains.len()),
        ] {
            if n != lg {
                return Err(Error::dimension(ctx, lg, n));
            }
        }
        let share = pathloss / T::lit(num_clusters as f64);
        Ok(Self {
            num_clusters,
            paths_per_cluster,
            departure,
            arrival,
            gains,
            cluster_powers: vec![share; num_clusters],
            pathloss,
        })
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn paths_per_cluster(&self) -> usize {
        self.paths_per_cluster
    }

    pub fn num_paths(&self) -> usize {
        self.num_clusters * self.paths_per_cluster
    }

    /// Copy with every path gain replaced by `gains`.
    pub fn with_gains(&self, gains: Vec<Complex<T>>) -> Result<Self> {
        if gains.len() != self.num_paths() {
            return Err(Error::dimension("path gains", self.num_paths(), gains.len()));
        }
        Ok(Self { gains, ..self.clone() })
    }
}

/// Statistical description of a clustered environment (angles in radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentConfig {
    pub num_clusters: usize,
    pub paths_per_cluster: usize,
    /// Standard deviation of path azimuths around the cluster mean.
    pub azimuth_spread: f64,
    /// Standard deviation of path elevations around the cluster mean.
    pub elevation_spread: f64,
    /// Total path loss `β²` shared equally among clusters.
    pub pathloss: f64,
}

impl EnvironmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 {
            return Err(Error::config("num_clusters", "must be at least 1"));
        }
        if self.paths_per_cluster == 0 {
            return Err(Error::config("paths_per_cluster", "must be at least 1"));
        }
        if !(self.azimuth_spread >= 0.0 && self.azimuth_spread.is_finite()) {
            return Err(Error::config("azimuth_spread", format!("{} is not a finite non-negative spread", self.azimuth_spread)));
        }
        if !(self.elevation_spread >= 0.0 && self.elevation_spread.is_finite()) {
            return Err(Error::config("elevation_spread", format!("{} is not a finite non-negative spread", self.elevation_spread)));
        }
        if !(self.pathloss > 0.0 && self.pathloss.is_finite()) {
            return Err(Error::config("pathloss", format!("{} must be positive", self.pathloss)));
        }
        Ok(())
    }
}

/// Half-width of the zero-mean uniform distribution whose standard deviation is `std`.
fn uniform_half_width(std: f64) -> f64 {
    3f64.sqrt() * std
}

fn jitter<R: Rng>(rng: &mut R, std: f64) -> f64 {
    if std == 0.0 {
        return 0.0;
    }
    let w = uniform_half_width(std);
    rng.sample(Uniform::new_inclusive(-w, w))
}

/// Draws one environment realization. Identical seeds give identical environments.
///
/// Cluster means are uniform on `[0, π)` independently for departure and
/// arrival; each path is uniform around its cluster mean with the configured
/// standard deviation; gains are `CN(0, ρ_l² / G)` with `ρ_l² = β² / L`.
pub fn sample_environment<T: Real>(config: &EnvironmentConfig, seed: u64) -> Result<ScatteringEnvironment<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (l_count, g_count) = (config.num_clusters, config.paths_per_cluster);
    let lg = l_count * g_count;
    let cluster_power = config.pathloss / l_count as f64;
    let gain_std = (cluster_power / g_count as f64 / 2.0).sqrt();
    let normal = Normal::new(0.0, gain_std).expect("finite std");
    let mean_angle = Uniform::new(0.0, std::f64::consts::PI);

    let mut dep = PathAngles {
        azimuth: Vec::with_capacity(lg),
        elevation: Vec::with_capacity(lg),
    };
    let mut arr = dep.clone();
    let mut gains = Vec::with_capacity(lg);

    for _ in 0..l_count {
        let dep_az = mean_angle.sample(&mut rng);
        let dep_el = mean_angle.sample(&mut rng);
        let arr_az = mean_angle.sample(&mut rng);
        let arr_el = mean_angle.sample(&mut rng);
        for _ in 0..g_count {
            dep.azimuth.push(T::lit(dep_az + jitter(&mut rng, config.azimuth_spread)));
            dep.elevation.push(T::lit(dep_el + jitter(&mut rng, config.elevation_spread)));
            arr.azimuth.push(T::lit(arr_az + jitter(&mut rng, config.azimuth_spread)));
            arr.elevation.push(T::lit(arr_el + jitter(&mut rng, config.elevation_spread)));
            let (re, im) = (normal.sample(&mut rng), normal.sample(&mut rng));
            gains.push(Complex::new(T::lit(re), T::lit(im)));
        }
    }

    Ok(ScatteringEnvironment {
        num_clusters: l_count,
        paths_per_cluster: g_count,
        departure: dep,
        arrival: arr,
        gains,
        cluster_powers: vec![T::lit(cluster_power); l_count],
        pathloss: T::lit(config.pathloss),
    })
}

/// Imperfect channel knowledge: each gain gets additive `CN(0, gain_mse)` error
/// and each angle a zero-mean uniform error with RMS `angle_rmse`.
pub fn perturb_csi<T: Real>(
    env: &ScatteringEnvironment<T>,
    gain_mse: f64,
    angle_rmse: f64,
    seed: u64,
) -> Result<ScatteringEnvironment<T>> {
    if !(gain_mse >= 0.0 && gain_mse.is_finite()) {
        return Err(Error::config("gain_mse", format!("{gain_mse} must be finite and non-negative")));
    }
    if !(angle_rmse >= 0.0 && angle_rmse.is_finite()) {
        return Err(Error::config("angle_rmse", format!("{angle_rmse} must be finite and non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = env.clone();
    if gain_mse > 0.0 {
        let normal = Normal::new(0.0, (gain_mse / 2.0).sqrt()).expect("finite std");
        for g in out.gains.iter_mut() {
            let (re, im) = (normal.sample(&mut rng), normal.sample(&mut rng));
            *g += Complex::new(T::lit(re), T::lit(im));
        }
    }
    if angle_rmse > 0.0 {
        for side in [&mut out.departure, &mut out.arrival] {
            for a in side.azimuth.iter_mut().chain(side.elevation.iter_mut()) {
                *a += T::lit(jitter(&mut rng, angle_rmse));
            }
        }
    }
    Ok(out)
}

/// Response of the unmorphed array to a plane wave along `direction`.
pub fn steering_vector<T: Real>(geom: &ArrayGeometry<T>, wavelength: T, direction: &Vector3<T>) -> DVector<Complex<T>> {
    let kappa = T::two_pi() / wavelength;
    let frame = geom.frame();
    let ci = frame.i.dot(direction);
    let cj = frame.j.dot(direction);
    DVector::from_fn(geom.element_count(), |m, _| {
        let (x, y) = geom.offsets(m);
        unit_phasor(kappa * (x * ci + y * cj))
    })
}

/// Extra per-element phase caused by displacing elements along the normal.
pub fn morphing_response<T: Real>(
    shape: &SurfaceShape<T>,
    frame: &OrientationFrame<T>,
    wavelength: T,
    direction: &Vector3<T>,
) -> DVector<Complex<T>> {
    let phase_rate = T::two_pi() / wavelength * frame.k.dot(direction);
    shape.deformations.map(|d| unit_phasor(phase_rate * d))
}

/// Channel matrix together with the factors it was assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix<T: Real> {
    pub h: DMatrix<Complex<T>>,
    pub tx_steering: DMatrix<Complex<T>>,
    pub rx_steering: DMatrix<Complex<T>>,
    pub tx_morphing: DMatrix<Complex<T>>,
    pub rx_morphing: DMatrix<Complex<T>>,
    pub gains: DVector<Complex<T>>,
}

impl<T: Real> ChannelMatrix<T> {
    /// `A_t ⊙ F_t(ζ)`.
    pub fn tx_effective(&self) -> DMatrix<Complex<T>> {
        self.tx_steering.component_mul(&self.tx_morphing)
    }

    /// `A_r ⊙ F_r(ξ)`.
    pub fn rx_effective(&self) -> DMatrix<Complex<T>> {
        self.rx_steering.component_mul(&self.rx_morphing)
    }

    pub fn rx_elements(&self) -> usize {
        self.h.nrows()
    }

    pub fn tx_elements(&self) -> usize {
        self.h.ncols()
    }
}

/// Shape-independent part of the channel for one environment and link, reused
/// across every shape evaluated by the optimizer.
#[derive(Debug, Clone)]
pub struct FimChannel<T: Real> {
    wavenumber: T,
    tx_steering: DMatrix<Complex<T>>,
    rx_steering: DMatrix<Complex<T>>,
    /// `⟨k_t, o^t⟩` per path.
    tx_normal_projection: DVector<T>,
    /// `⟨k_r, o^r⟩` per path.
    rx_normal_projection: DVector<T>,
    gains: DVector<Complex<T>>,
}

impl<T: Real> FimChannel<T> {
    pub fn new(env: &ScatteringEnvironment<T>, link: &LinkGeometry<T>) -> Self {
        let lg = env.num_paths();
        let (m, n) = (link.tx_elements(), link.rx_elements());
        let mut tx_steering = DMatrix::zeros(m, lg);
        let mut rx_steering = DMatrix::zeros(n, lg);
        let mut tx_proj = DVector::zeros(lg);
        let mut rx_proj = DVector::zeros(lg);
        for p in 0..lg {
            let o_t = env.departure.direction(p);
            let o_r = env.arrival.direction(p);
            tx_steering.set_column(p, &steering_vector(&link.tx, link.wavelength, &o_t));
            rx_steering.set_column(p, &steering_vector(&link.rx, link.wavelength, &o_r));
            tx_proj[p] = link.tx.frame().k.dot(&o_t);
            rx_proj[p] = link.rx.frame().k.dot(&o_r);
        }
        Self {
            wavenumber: link.wavenumber(),
            tx_steering,
            rx_steering,
            tx_normal_projection: tx_proj,
            rx_normal_projection: rx_proj,
            gains: DVector::from_column_slice(&env.gains),
        }
    }

    pub fn tx_elements(&self) -> usize {
        self.tx_steering.nrows()
    }

    pub fn rx_elements(&self) -> usize {
        self.rx_steering.nrows()
    }

    pub fn num_paths(&self) -> usize {
        self.gains.len()
    }

    pub fn wavenumber(&self) -> T {
        self.wavenumber
    }

    pub fn gains(&self) -> &DVector<Complex<T>> {
        &self.gains
    }

    /// Diagonal of `K_t`: `κ ⟨k_t, o^t_p⟩` per path.
    pub fn tx_phase_rates(&self) -> DVector<T> {
        self.tx_normal_projection.map(|c| c * self.wavenumber)
    }

    /// Diagonal of `K_r`: `κ ⟨k_r, o^r_p⟩` per path.
    pub fn rx_phase_rates(&self) -> DVector<T> {
        self.rx_normal_projection.map(|c| c * self.wavenumber)
    }

    fn morphing(&self, deformations: &DVector<T>, projection: &DVector<T>) -> DMatrix<Complex<T>> {
        let k = self.wavenumber;
        DMatrix::from_fn(deformations.len(), projection.len(), |e, p| {
            unit_phasor(k * deformations[e] * projection[p])
        })
    }

    fn check(&self, zeta: &SurfaceShape<T>, xi: &SurfaceShape<T>) -> Result<()> {
        if zeta.len() != self.tx_elements() {
            return Err(Error::dimension("transmit shape", self.tx_elements(), zeta.len()));
        }
        if xi.len() != self.rx_elements() {
            return Err(Error::dimension("receive shape", self.rx_elements(), xi.len()));
        }
        Ok(())
    }

    /// `A_t ⊙ F_t(ζ)`.
    pub fn tx_effective(&self, zeta: &SurfaceShape<T>) -> DMatrix<Complex<T>> {
        self.tx_steering
            .component_mul(&self.morphing(&zeta.deformations, &self.tx_normal_projection))
    }

    /// `A_r ⊙ F_r(ξ)`.
    pub fn rx_effective(&self, xi: &SurfaceShape<T>) -> DMatrix<Complex<T>> {
        self.rx_steering
            .component_mul(&self.morphing(&xi.deformations, &self.rx_normal_projection))
    }

    /// `[A_r ⊙ F_r] diag(ς) [A_t ⊙ F_t]ᴴ` from already formed effective factors.
    pub fn product(&self, rx_eff: &DMatrix<Complex<T>>, tx_eff: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
        let mut scaled = rx_eff.clone();
        for (p, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.gains[p];
        }
        scaled * tx_eff.adjoint()
    }

    /// Channel matrix only.
    pub fn matrix(&self, zeta: &SurfaceShape<T>, xi: &SurfaceShape<T>) -> Result<DMatrix<Complex<T>>> {
        self.check(zeta, xi)?;
        Ok(self.product(&self.rx_effective(xi), &self.tx_effective(zeta)))
    }

    /// Channel matrix with all factors retained.
    pub fn assemble(&self, zeta: &SurfaceShape<T>, xi: &SurfaceShape<T>) -> Result<ChannelMatrix<T>> {
        self.check(zeta, xi)?;
        let tx_morphing = self.morphing(&zeta.deformations, &self.tx_normal_projection);
        let rx_morphing = self.morphing(&xi.deformations, &self.rx_normal_projection);
        let tx_eff = self.tx_steering.component_mul(&tx_morphing);
        let rx_eff = self.rx_steering.component_mul(&rx_morphing);
        Ok(ChannelMatrix {
            h: self.product(&rx_eff, &tx_eff),
            tx_steering: self.tx_steering.clone(),
            rx_steering: self.rx_steering.clone(),
            tx_morphing,
            rx_morphing,
            gains: self.gains.clone(),
        })
    }
}

/// Assembles `H(ζ, ξ)` in factored matrix form.
pub fn assemble_channel<T: Real>(
    env: &ScatteringEnvironment<T>,
    link: &LinkGeometry<T>,
    zeta: &SurfaceShape<T>,
    xi: &SurfaceShape<T>,
) -> Result<ChannelMatrix<T>> {
    FimChannel::new(env, link).assemble(zeta, xi)
}

/// Assembles `H(ζ, ξ)` as an explicit sum of rank-one path contributions
/// `Σ ς_p ã_r,p ã_t,pᴴ`. Slower than [`assemble_channel`]; used as a cross-check.
pub fn sum_form_channel<T: Real>(
    env: &ScatteringEnvironment<T>,
    link: &LinkGeometry<T>,
    zeta: &SurfaceShape<T>,
    xi: &SurfaceShape<T>,
) -> Result<DMatrix<Complex<T>>> {
    let (m, n) = (link.tx_elements(), link.rx_elements());
    if zeta.len() != m {
        return Err(Error::dimension("transmit shape", m, zeta.len()));
    }
    if xi.len() != n {
        return Err(Error::dimension("receive shape", n, xi.len()));
    }
    let mut h = DMatrix::zeros(n, m);
    for p in 0..env.num_paths() {
        let o_t = env.departure.direction(p);
        let o_r = env.arrival.direction(p);
        let a_t = steering_vector(&link.tx, link.wavelength, &o_t)
            .component_mul(&morphing_response(zeta, link.tx.frame(), link.wavelength, &o_t));
        let a_r = steering_vector(&link.rx, link.wavelength, &o_r)
            .component_mul(&morphing_response(xi, link.rx.frame(), link.wavelength, &o_r));
        h += (a_r * a_t.adjoint()) * env.gains[p];
    }
    Ok(h)
}
