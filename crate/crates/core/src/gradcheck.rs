//! Finite-difference verification of the analytic shape gradients.
//!
//! Random instances use general (non-diagonal) transmit covariances so that the
//! non-Hermitian transmit-side system matrix is exercised, and shapes drawn
//! anywhere in the feasible box.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::capacity::TransmitCovariance;
use crate::channel::{FimChannel, PathAngles, ScatteringEnvironment};
use crate::error::Result;
use crate::geometry::{ArrayGeometry, LinkGeometry, OrientationAngles, OrientationFrame, SurfaceShape};
use crate::morphing::{capacity_at, shape_gradients};

/// Size limits for randomly generated gradient-check instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceLimits {
    pub max_elements: usize,
    pub max_clusters: usize,
    pub max_paths_per_cluster: usize,
}

impl Default for InstanceLimits {
    fn default() -> Self {
        Self {
            max_elements: 4,
            max_clusters: 4,
            max_paths_per_cluster: 4,
        }
    }
}

/// One self-contained problem: channel, shapes and covariance.
#[derive(Debug, Clone)]
pub struct GradcheckInstance {
    pub env: ScatteringEnvironment<f64>,
    pub link: LinkGeometry<f64>,
    pub zeta: SurfaceShape<f64>,
    pub xi: SurfaceShape<f64>,
    pub cov: TransmitCovariance<f64>,
}

fn complex_normal(rng: &mut ChaCha8Rng, variance: f64) -> Complex<f64> {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(re * s, im * s)
}

fn random_array(rng: &mut ChaCha8Rng, max_elements: usize, wavelength: f64) -> Result<ArrayGeometry<f64>> {
    let (cx, cy) = loop {
        let cx = rng.gen_range(1..=max_elements);
        let cy = rng.gen_range(1..=max_elements);
        if cx * cy <= max_elements {
            break (cx, cy);
        }
    };
    let angles = OrientationAngles::new(
        rng.gen_range(0.0..std::f64::consts::PI),
        rng.gen_range(0.0..std::f64::consts::PI),
        rng.gen_range(0.0..std::f64::consts::TAU),
    )?;
    let spacing = wavelength * rng.gen_range(0.3..0.7);
    ArrayGeometry::uniform(cx, cy, spacing, OrientationFrame::from_angles(&angles))
}

fn random_shape(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Result<SurfaceShape<f64>> {
    SurfaceShape::new(DVector::from_fn(len, |_, _| rng.gen_range(-bound..=bound)), bound)
}

fn random_angles(rng: &mut ChaCha8Rng, n: usize) -> PathAngles<f64> {
    PathAngles {
        azimuth: (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::PI)).collect(),
        elevation: (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::PI)).collect(),
    }
}

/// Random Hermitian PSD covariance `A Aᴴ` rescaled to `trace = power · u`, `u ∈ (0.5, 1]`.
fn random_covariance(rng: &mut ChaCha8Rng, dim: usize, power: f64, noise: f64) -> Result<TransmitCovariance<f64>> {
    let a = DMatrix::from_fn(dim, dim, |_, _| complex_normal(rng, 1.0));
    let g = &a * a.adjoint();
    let tr: f64 = (0..dim).map(|i| g[(i, i)].re).sum();
    let scale = power * rng.gen_range(0.5..=1.0) / tr;
    let mut t = g * Complex::new(scale, 0.0);
    for i in 0..dim {
        for j in 0..i {
            t[(i, j)] = t[(j, i)].conj();
        }
        t[(i, i)].im = 0.0;
    }
    TransmitCovariance::new(t, power, noise)
}

/// Draws a random instance at 28 GHz with unit noise power and moderate SNR.
pub fn random_instance(seed: u64, limits: &InstanceLimits) -> Result<GradcheckInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wavelength = 299_792_458.0 / 28e9;
    let tx = random_array(&mut rng, limits.max_elements, wavelength)?;
    let rx = random_array(&mut rng, limits.max_elements, wavelength)?;
    let link = LinkGeometry::new(tx, rx, wavelength)?;
    let l = rng.gen_range(1..=limits.max_clusters);
    let g = rng.gen_range(1..=limits.max_paths_per_cluster);
    let paths = l * g;
    let departure = random_angles(&mut rng, paths);
    let arrival = random_angles(&mut rng, paths);
    let gains = (0..paths).map(|_| complex_normal(&mut rng, 1.0 / paths as f64)).collect();
    let env = ScatteringEnvironment::new(l, g, departure, arrival, gains, 1.0)?;
    let bound = wavelength * rng.gen_range(0.05..=0.5);
    let zeta = random_shape(&mut rng, link.tx_elements(), bound)?;
    let xi = random_shape(&mut rng, link.rx_elements(), bound)?;
    let power = 10f64.powf(rng.gen_range(-1.0..=2.0));
    let cov = random_covariance(&mut rng, link.tx_elements(), power, 1.0)?;
    Ok(GradcheckInstance { env, link, zeta, xi, cov })
}

/// Central-difference gradients `(∇_ζ C, ∇_ξ C)` with step `h` (meters).
pub fn finite_difference_gradients(
    channel: &FimChannel<f64>,
    zeta: &SurfaceShape<f64>,
    xi: &SurfaceShape<f64>,
    cov: &TransmitCovariance<f64>,
    h: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let nudge = |s: &SurfaceShape<f64>, i: usize, d: f64| {
        let mut out = s.clone();
        out.deformations[i] += d;
        out
    };
    let mut g_t = DVector::zeros(zeta.len());
    for m in 0..zeta.len() {
        let plus = capacity_at(channel, &nudge(zeta, m, h), xi, cov)?;
        let minus = capacity_at(channel, &nudge(zeta, m, -h), xi, cov)?;
        g_t[m] = (plus - minus) / (2.0 * h);
    }
    let mut g_r = DVector::zeros(xi.len());
    for n in 0..xi.len() {
        let plus = capacity_at(channel, zeta, &nudge(xi, n, h), cov)?;
        let minus = capacity_at(channel, zeta, &nudge(xi, n, -h), cov)?;
        g_r[n] = (plus - minus) / (2.0 * h);
    }
    Ok((g_t, g_r))
}

/// Largest elementwise relative error of `analytic` against `reference`.
///
/// Each component is divided by `max(|reference_i|, 1e-3 · ‖reference‖_∞, floor)`,
/// so components that are tiny compared with the rest of the gradient are judged
/// on an absolute scale instead of amplifying finite-difference rounding noise.
pub fn max_relative_error(analytic: &DVector<f64>, reference: &DVector<f64>, floor: f64) -> f64 {
    let scale = reference.amax();
    analytic
        .iter()
        .zip(reference.iter())
        .map(|(a, r)| {
            let denom = r.abs().max(1e-3 * scale).max(floor);
            (a - r).abs() / denom
        })
        .fold(0.0, f64::max)
}

/// Summary of a gradient-check sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    pub instances: usize,
    pub max_rel_err: f64,
    /// Index of the instance with the largest error.
    pub worst_instance: usize,
}

/// Checks both analytic gradients against central differences (`h = 1e-7 λ`) on
/// `instances` random problems derived from `seed`. The transmit and receive
/// gradients are compared as one stacked vector, so a side whose true gradient
/// vanishes is judged against the scale of the full shape gradient.
pub fn run_gradcheck(seed: u64, instances: usize, limits: &InstanceLimits) -> Result<GradcheckReport> {
    let mut report = GradcheckReport {
        instances,
        max_rel_err: 0.0,
        worst_instance: 0,
    };
    for k in 0..instances {
        let inst = random_instance(crate::seeds::mix(seed, k as u64), limits)?;
        let channel = FimChannel::new(&inst.env, &inst.link);
        let h = 1e-7 * inst.link.wavelength;
        let (a_t, a_r) = shape_gradients(&channel, &inst.zeta, &inst.xi, &inst.cov)?;
        let (f_t, f_r) = finite_difference_gradients(&channel, &inst.zeta, &inst.xi, &inst.cov, h)?;
        let analytic = DVector::from_iterator(a_t.len() + a_r.len(), a_t.iter().chain(a_r.iter()).copied());
        let reference = DVector::from_iterator(f_t.len() + f_r.len(), f_t.iter().chain(f_r.iter()).copied());
        // Central differences carry rounding noise of a few ulps of C/h. Components
        // below 1e-3 · κ · max(C, 1), i.e. a thousandth of the capacity per radian of
        // path phase, are compared on that absolute scale.
        let c = capacity_at(&channel, &inst.zeta, &inst.xi, &inst.cov)?;
        let floor = 1e-3 * inst.link.wavenumber() * c.max(1.0);
        let err = max_relative_error(&analytic, &reference, floor);
        if err > report.max_rel_err || err.is_nan() {
            report.max_rel_err = err;
            report.worst_instance = k;
        }
    }
    Ok(report)
}

fn log2_det_hpd(b: &DMatrix<Complex<f64>>) -> Option<f64> {
    let chol = b.clone().cholesky()?;
    let l = chol.l_dirty();
    Some((0..b.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0 / std::f64::consts::LN_2)
}

/// Verifies `d log₂ det B = tr(B⁻¹ dB) / ln 2` for random Hermitian positive
/// definite `B` and Hermitian directions `dB`, returning the largest relative
/// error between the trace formula and a central difference along `dB`.
/// The error is relative to `max(|analytic|, 1e-3 ‖B⁻¹ dB‖_F / ln 2)`.
pub fn logdet_differential_check(seed: u64, instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.gen_range(1..=6);
        let a = DMatrix::from_fn(n, n, |_, _| complex_normal(&mut rng, 1.0));
        let b = DMatrix::identity(n, n) + &a * a.adjoint();
        let e = DMatrix::from_fn(n, n, |_, _| complex_normal(&mut rng, 1.0));
        let db = (&e + e.adjoint()) * Complex::new(0.5, 0.0);
        let chol = b.clone().cholesky().expect("identity plus Gram is positive definite");
        let x = chol.solve(&db);
        let analytic = x.trace().re / std::f64::consts::LN_2;
        // A random Hermitian direction can make the trace nearly cancel; judge such
        // cases against the size of B⁻¹ dB rather than the cancelled sum.
        let scale = 1e-3 * x.norm() / std::f64::consts::LN_2;
        let t = 1e-5;
        let step = &db * Complex::new(t, 0.0);
        let numeric = match (log2_det_hpd(&(&b + &step)), log2_det_hpd(&(&b - &step))) {
            (Some(p), Some(m)) => (p - m) / (2.0 * t),
            _ => f64::NAN,
        };
        let err = (analytic - numeric).abs() / analytic.abs().max(scale);
        worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
    }
    worst
}
