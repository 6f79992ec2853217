//! Analytic capacity gradients with respect to both surface shapes, and
//! projected gradient ascent on the shapes for a fixed transmit covariance.
//!
//! Writing `H_t = A_t ⊙ F_t(ζ)`, `H_r = A_r ⊙ F_r(ξ)` and `K_t`, `K_r` for the
//! diagonal per-path phase rates `κ⟨k, o_p⟩`, each deformation only rotates the
//! phase of its own row: `∂H_r/∂ξ_n = j e_n e_nᵀ H_r K_r`. Differentiating
//! `log₂ det B` through both `H_r` and `H_rᴴ` gives
//!
//! ```text
//! ∂C/∂ξ_n = −(2/ln2) Im[(S_r B_r⁻¹)_{nn}],   S_r = H_r K_r O_t H_rᴴ,  B_r = I + H_r O_t H_rᴴ
//! ∂C/∂ζ_m = −(2/ln2) Im[(W_t B_t⁻¹ T)_{mm}], W_t = H_t K_t O_r H_tᴴ, B_t = I + T H_t O_r H_tᴴ
//! ```
//!
//! with `O_t = ς H_tᴴ T H_t ςᴴ / σ²` and `O_r = ςᴴ H_rᴴ H_r ς / σ²`. Both
//! contractions pair row `n` of `S` with column `n` of `B⁻¹`; the diagonal of an
//! elementwise product alone does not give the derivative.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::capacity::{capacity, hermitize, TransmitCovariance};
use crate::channel::{FimChannel, ScatteringEnvironment};
use crate::error::{Error, Result};
use crate::geometry::{LinkGeometry, SurfaceShape};
use crate::scalar::Real;

/// Intermediate matrices shared by the two gradients at one operating point.
#[derive(Debug, Clone)]
pub struct GradientWorkspace<T: Real> {
    /// `ς H_tᴴ T H_t ςᴴ / σ²` (paths × paths).
    pub tx_path_covariance: DMatrix<Complex<T>>,
    /// `ςᴴ H_rᴴ H_r ς / σ²` (paths × paths).
    pub rx_path_gram: DMatrix<Complex<T>>,
    /// `I_N + H_r O_t H_rᴴ`, Hermitian positive definite.
    pub rx_system: DMatrix<Complex<T>>,
    /// `I_M + T H_t O_r H_tᴴ`, generally non-Hermitian.
    pub tx_system: DMatrix<Complex<T>>,
    /// `H_r K_r O_t H_rᴴ`.
    pub rx_sensitivity: DMatrix<Complex<T>>,
    /// `H_t K_t O_r H_tᴴ`; the transmit sensitivity is `T` times this matrix.
    pub tx_weighted_gram: DMatrix<Complex<T>>,
    pub tx_phase_rates: DVector<T>,
    pub rx_phase_rates: DVector<T>,
    covariance: DMatrix<Complex<T>>,
}

fn scale_columns<T: Real>(m: &DMatrix<Complex<T>>, factors: &DVector<Complex<T>>) -> DMatrix<Complex<T>> {
    let mut out = m.clone();
    for (p, mut col) in out.column_iter_mut().enumerate() {
        col *= factors[p];
    }
    out
}

fn scale_rows_real<T: Real>(m: &DMatrix<Complex<T>>, factors: &DVector<T>) -> DMatrix<Complex<T>> {
    let mut out = m.clone();
    for (p, mut row) in out.row_iter_mut().enumerate() {
        row *= Complex::new(factors[p], T::zero());
    }
    out
}

impl<T: Real> GradientWorkspace<T> {
    pub fn new(
        channel: &FimChannel<T>,
        zeta: &SurfaceShape<T>,
        xi: &SurfaceShape<T>,
        cov: &TransmitCovariance<T>,
    ) -> Result<Self> {
        if zeta.len() != channel.tx_elements() {
            return Err(Error::dimension("transmit shape", channel.tx_elements(), zeta.len()));
        }
        if xi.len() != channel.rx_elements() {
            return Err(Error::dimension("receive shape", channel.rx_elements(), xi.len()));
        }
        if cov.dim() != channel.tx_elements() {
            return Err(Error::dimension("transmit covariance", channel.tx_elements(), cov.dim()));
        }
        let inv_noise = Complex::new(T::one() / cov.noise_power(), T::zero());
        let t = cov.matrix();
        let h_t = channel.tx_effective(zeta);
        let h_r = channel.rx_effective(xi);
        let gains = channel.gains();

        // ς applied on the path index: H_t ςᴴ scales columns by conj(ς).
        let h_t_gain = scale_columns(&h_t, &gains.map(|g| g.conj()));
        let h_r_gain = scale_columns(&h_r, gains);
        let tx_path_covariance = hermitize(&(h_t_gain.adjoint() * t * &h_t_gain * inv_noise));
        let rx_path_gram = hermitize(&(h_r_gain.adjoint() * &h_r_gain * inv_noise));

        let k_t = channel.tx_phase_rates();
        let k_r = channel.rx_phase_rates();

        let m = channel.tx_elements();
        let n = channel.rx_elements();
        let rx_system = DMatrix::identity(n, n) + hermitize(&(&h_r * &tx_path_covariance * h_r.adjoint()));
        let rx_sensitivity = &h_r * scale_rows_real(&tx_path_covariance, &k_r) * h_r.adjoint();
        let tx_gram = &h_t * &rx_path_gram * h_t.adjoint();
        let tx_system = DMatrix::identity(m, m) + t * &tx_gram;
        let tx_weighted_gram = &h_t * scale_rows_real(&rx_path_gram, &k_t) * h_t.adjoint();

        Ok(Self {
            tx_path_covariance,
            rx_path_gram,
            rx_system,
            tx_system,
            rx_sensitivity,
            tx_weighted_gram,
            tx_phase_rates: k_t,
            rx_phase_rates: k_r,
            covariance: t.clone(),
        })
    }

    /// `T H_t K_t O_r H_tᴴ`.
    pub fn tx_sensitivity(&self) -> DMatrix<Complex<T>> {
        &self.covariance * &self.tx_weighted_gram
    }

    /// `∇_ξ C`, one entry per receive element.
    pub fn rx_gradient(&self) -> Result<DVector<T>> {
        let chol = self
            .rx_system
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("receive system matrix is not positive definite".into()))?;
        // (S B⁻¹)_nn = conj((B⁻¹ Sᴴ)_nn) for Hermitian B.
        let x = chol.solve(&self.rx_sensitivity.adjoint());
        let scale = T::lit(2.0) / T::ln_2();
        Ok(DVector::from_fn(x.nrows(), |i, _| x[(i, i)].im * scale))
    }

    /// `∇_ζ C`, one entry per transmit element.
    pub fn tx_gradient(&self) -> Result<DVector<T>> {
        let lu = self.tx_system.clone().lu();
        let y = lu
            .solve(&self.covariance)
            .ok_or_else(|| Error::Numerical("transmit system matrix is singular".into()))?;
        let scale = -T::lit(2.0) / T::ln_2();
        let m = y.nrows();
        Ok(DVector::from_fn(m, |i, _| {
            let diag = (0..m).fold(Complex::new(T::zero(), T::zero()), |acc, k| {
                acc + self.tx_weighted_gram[(i, k)] * y[(k, i)]
            });
            diag.im * scale
        }))
    }
}

/// Capacity at the given shapes for a fixed covariance.
pub fn capacity_at<T: Real>(
    channel: &FimChannel<T>,
    zeta: &SurfaceShape<T>,
    xi: &SurfaceShape<T>,
    cov: &TransmitCovariance<T>,
) -> Result<T> {
    capacity(&channel.matrix(zeta, xi)?, cov)
}

/// `(∇_ζ C, ∇_ξ C)` from one shared workspace.
pub fn shape_gradients<T: Real>(
    channel: &FimChannel<T>,
    zeta: &SurfaceShape<T>,
    xi: &SurfaceShape<T>,
    cov: &TransmitCovariance<T>,
) -> Result<(DVector<T>, DVector<T>)> {
    let ws = GradientWorkspace::new(channel, zeta, xi, cov)?;
    Ok((ws.tx_gradient()?, ws.rx_gradient()?))
}

/// Gradient of capacity with respect to the receive surface shape.
pub fn grad_rx_shape<T: Real>(
    env: &ScatteringEnvironment<T>,
    link: &LinkGeometry<T>,
    zeta: &SurfaceShape<T>,
    xi: &SurfaceShape<T>,
    cov: &TransmitCovariance<T>,
) -> Result<DVector<T>> {
    GradientWorkspace::new(&FimChannel::new(env, link), zeta, xi, cov)?.rx_gradient()
}

/// Gradient of capacity with respect to the transmit surface shape.
pub fn grad_tx_shape<T: Real>(
    env: &ScatteringEnvironment<T>,
    link: &LinkGeometry<T>,
    zeta: &SurfaceShape<T>,
    xi: &SurfaceShape<T>,
    cov: &TransmitCovariance<T>,
) -> Result<DVector<T>> {
    GradientWorkspace::new(&FimChannel::new(env, link), zeta, xi, cov)?.tx_gradient()
}

/// Backtracking parameters for the projected ascent step.
///
/// The first trial step moves the most sensitive element by
/// `initial_displacement` wavelengths; each rejection multiplies the step by `shrink`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub initial_displacement: f64,
    pub shrink: f64,
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            initial_displacement: 0.1,
            shrink: 0.5,
            armijo: 1e-4,
            max_halvings: 30,
        }
    }
}

/// Result of one projected ascent step.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentStep<T: Real> {
    pub zeta: SurfaceShape<T>,
    pub xi: SurfaceShape<T>,
    pub capacity: T,
    /// Step size `ε` that was accepted (zero when the step was rejected).
    pub step: T,
    pub accepted: bool,
}

fn displaced<T: Real>(shape: &SurfaceShape<T>, grad: &DVector<T>, step: T) -> SurfaceShape<T> {
    SurfaceShape {
        deformations: &shape.deformations + grad * step,
        bound: shape.bound,
    }
    .projected()
}

/// One joint update `ζ ← Π(ζ + ε∇_ζC)`, `ξ ← Π(ξ + ε∇_ξC)` with a shared
/// backtracking step. The Armijo test is evaluated at the projected point.
/// When no trial step is accepted the inputs are returned unchanged.
pub fn ascent_step<T: Real>(
    channel: &FimChannel<T>,
    zeta: &SurfaceShape<T>,
    xi: &SurfaceShape<T>,
    cov: &TransmitCovariance<T>,
    search: &LineSearch,
) -> Result<AscentStep<T>> {
    let current = capacity_at(channel, zeta, xi, cov)?;
    let rejected = || AscentStep {
        zeta: zeta.clone(),
        xi: xi.clone(),
        capacity: current,
        step: T::zero(),
        accepted: false,
    };

    let (g_t, g_r) = shape_gradients(channel, zeta, xi, cov)?;
    let g_max = g_t.amax().max(g_r.amax());
    if !(g_max > T::zero()) || !g_max.is_finite() {
        return Ok(rejected());
    }

    let wavelength = T::two_pi() / channel.wavenumber();
    let mut step = T::lit(search.initial_displacement) * wavelength / g_max;
    let shrink = T::lit(search.shrink);
    let armijo = T::lit(search.armijo);
    for _ in 0..=search.max_halvings {
        let z = displaced(zeta, &g_t, step);
        let x = displaced(xi, &g_r, step);
        let dz = &z.deformations - &zeta.deformations;
        let dx = &x.deformations - &xi.deformations;
        let predicted = g_t.dot(&dz) + g_r.dot(&dx);
        if !(predicted > T::zero()) {
            // Projection cancelled the move entirely: the point is stationary on the box.
            return Ok(rejected());
        }
        let trial = capacity_at(channel, &z, &x, cov)?;
        if trial >= current + armijo * predicted {
            return Ok(AscentStep {
                zeta: z,
                xi: x,
                capacity: trial,
                step,
                accepted: true,
            });
        }
        step *= shrink;
    }
    Ok(rejected())
}

/// Stopping rule for the inner ascent loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerLoopSettings {
    pub max_steps: usize,
    /// Stop once a step improves capacity by less than this fraction.
    pub relative_tolerance: f64,
    pub line_search: LineSearch,
}

impl Default for InnerLoopSettings {
    fn default() -> Self {
        Self {
            max_steps: 100,
            relative_tolerance: 1e-4,
            line_search: LineSearch::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerLoopOutcome<T: Real> {
    pub zeta: SurfaceShape<T>,
    pub xi: SurfaceShape<T>,
    pub capacity: T,
    /// Ascent steps attempted, including a final rejected one.
    pub steps: usize,
}

/// Repeats [`ascent_step`] until the relative gain drops below tolerance,
/// a step is rejected, or `max_steps` is reached.
pub fn inner_morph_loop<T: Real>(
    channel: &FimChannel<T>,
    zeta: &SurfaceShape<T>,
    xi: &SurfaceShape<T>,
    cov: &TransmitCovariance<T>,
    settings: &InnerLoopSettings,
) -> Result<InnerLoopOutcome<T>> {
    let mut out = InnerLoopOutcome {
        zeta: zeta.clone(),
        xi: xi.clone(),
        capacity: capacity_at(channel, zeta, xi, cov)?,
        steps: 0,
    };
    let tol = T::lit(settings.relative_tolerance);
    while out.steps < settings.max_steps {
        let step = ascent_step(channel, &out.zeta, &out.xi, cov, &settings.line_search)?;
        out.steps += 1;
        if !step.accepted {
            break;
        }
        let gain = step.capacity - out.capacity;
        let relative = if out.capacity > T::zero() {
            gain / out.capacity
        } else if gain > T::zero() {
            T::one()
        } else {
            T::zero()
        };
        out.zeta = step.zeta;
        out.xi = step.xi;
        out.capacity = step.capacity;
        if relative < tol {
            break;
        }
    }
    Ok(out)
}
