//! MIMO capacity and the transmit-covariance subproblem (eigenmode
//! transmission with water-filling power allocation).

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cabs, Real};

/// Hermitian PSD transmit covariance with the power budget and noise power it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitCovariance<T: Real> {
    matrix: DMatrix<Complex<T>>,
    power_budget: T,
    noise_power: T,
}

impl<T: Real> TransmitCovariance<T> {
    /// Validates Hermitian symmetry, positive semidefiniteness and `tr(T) ≤ P_t`.
    pub fn new(matrix: DMatrix<Complex<T>>, power_budget: T, noise_power: T) -> Result<Self> {
        if !(power_budget > T::zero()) {
            return Err(Error::config("power_budget", format!("{power_budget} must be positive")));
        }
        if !(noise_power > T::zero()) {
            return Err(Error::config("noise_power", format!("{noise_power} must be positive")));
        }
        if !matrix.is_square() {
            return Err(Error::dimension("transmit covariance", matrix.nrows(), matrix.ncols()));
        }
        let scale = T::one().max(power_budget);
        let asym = (&matrix - matrix.adjoint())
            .iter()
            .fold(T::zero(), |acc, z| acc.max(cabs(*z)));
        if asym > T::tol(1e-10) * scale {
            return Err(Error::Contract(format!("covariance is not Hermitian (max asymmetry {asym})")));
        }
        let hermitian = hermitize(&matrix);
        let eig = SymmetricEigen::new(hermitian.clone());
        let min_eig = eig.eigenvalues.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b));
        if min_eig < -T::tol(1e-10) * scale {
            return Err(Error::Contract(format!("covariance is not PSD (min eigenvalue {min_eig})")));
        }
        let trace = trace_re(&hermitian);
        if trace > power_budget + T::tol(1e-9) * scale {
            return Err(Error::Contract(format!(
                "covariance trace {trace} exceeds power budget {power_budget}"
            )));
        }
        Ok(Self {
            matrix: hermitian,
            power_budget,
            noise_power,
        })
    }

    /// Zero covariance (no transmit power).
    pub fn zero(dim: usize, power_budget: T, noise_power: T) -> Result<Self> {
        Self::new(DMatrix::zeros(dim, dim), power_budget, noise_power)
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn power_budget(&self) -> T {
        self.power_budget
    }

    pub fn noise_power(&self) -> T {
        self.noise_power
    }

    pub fn trace(&self) -> T {
        trace_re(&self.matrix)
    }
}

/// Eigen-decomposition of `HᴴH` and the resulting per-mode power allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenmodeSolution<T: Real> {
    /// Eigenvectors of `HᴴH` as columns, ordered by descending eigenvalue.
    pub basis: DMatrix<Complex<T>>,
    /// Eigenvalues `λ_m²` of `HᴴH`, descending.
    pub eigenvalues: Vec<T>,
    pub allocations: Vec<T>,
    pub water_level: T,
    /// True when `HᴴH` has no usable mode; the covariance then falls back to equal power.
    pub rank_zero: bool,
}

fn trace_re<T: Real>(m: &DMatrix<Complex<T>>) -> T {
    (0..m.nrows()).fold(T::zero(), |acc, i| acc + m[(i, i)].re)
}

pub(crate) fn hermitize<T: Real>(m: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    (m + m.adjoint()) * Complex::new(T::lit(0.5), T::zero())
}

/// `log₂ det(I_N + H T Hᴴ / σ²)` in bps/Hz.
pub fn capacity<T: Real>(h: &DMatrix<Complex<T>>, cov: &TransmitCovariance<T>) -> Result<T> {
    if h.ncols() != cov.dim() {
        return Err(Error::dimension("capacity: covariance vs channel columns", h.ncols(), cov.dim()));
    }
    let inv_noise = Complex::new(T::one() / cov.noise_power(), T::zero());
    let gram = h * cov.matrix() * h.adjoint() * inv_noise;
    Ok(log2_det_identity_plus(&gram))
}

/// `log₂ det(I + G)` for a Hermitian PSD `G`, via Cholesky with an eigenvalue fallback.
pub(crate) fn log2_det_identity_plus<T: Real>(gram: &DMatrix<Complex<T>>) -> T {
    let n = gram.nrows();
    let b = DMatrix::<Complex<T>>::identity(n, n) + hermitize(gram);
    let logdet = match Cholesky::new(b.clone()) {
        Some(chol) => {
            let l = chol.l_dirty();
            (0..n).fold(T::zero(), |acc, i| acc + l[(i, i)].re.ln()) * T::lit(2.0)
        }
        None => SymmetricEigen::new(b)
            .eigenvalues
            .iter()
            .fold(T::zero(), |acc, &e| acc + e.max(T::default_epsilon() * T::default_epsilon()).ln()),
    };
    (logdet / T::ln_2()).max(T::zero())
}

/// Water-filling over mode gains `λ_m²`: returns `(allocations, water level)`.
///
/// The water level is bracketed in `[0, P_t + σ² max(1/λ_m²)]` and bisected on the
/// power residual; the final level is then recomputed in closed form over the
/// active set so that the allocation sums to `P_t` to rounding.
/// Gains below `1e-14 · max gain` are treated as closed modes.
/// Returns `None` when no mode is open.
pub fn water_fill<T: Real>(gains: &[T], power: T, noise_power: T) -> Option<(Vec<T>, T)> {
    let max_gain = gains.iter().fold(T::zero(), |a, &b| a.max(b));
    if !(max_gain > T::zero()) {
        return None;
    }
    let cutoff = max_gain * T::lit(1e-14);
    let floors: Vec<Option<T>> = gains
        .iter()
        .map(|&g| (g > cutoff).then(|| noise_power / g))
        .collect();
    let max_floor = floors.iter().flatten().fold(T::zero(), |a, &b| a.max(b));
    let poured = |mu: T| {
        floors
            .iter()
            .flatten()
            .fold(T::zero(), |acc, &f| acc + (mu - f).max(T::zero()))
    };

    let (mut lo, mut hi) = (T::zero(), power + max_floor);
    let tol = T::tol(1e-12);
    let mut mu = hi;
    for _ in 0..200 {
        mu = (lo + hi) * T::lit(0.5);
        let residual = poured(mu) - power;
        if residual.abs() <= tol {
            break;
        }
        if residual > T::zero() {
            hi = mu;
        } else {
            lo = mu;
        }
    }

    // Closed-form polish: with the active set fixed, μ = (P + Σ floors) / |active|.
    let mut active: Vec<bool> = floors.iter().map(|f| f.is_some_and(|f| f < mu)).collect();
    if !active.iter().any(|a| *a) {
        // Degenerate bisection outcome: open the strongest mode.
        let best = floors
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.map(|f| (i, f)))
            .fold((0, T::max_value().unwrap()), |acc, (i, f)| if f < acc.1 { (i, f) } else { acc });
        active[best.0] = true;
    }
    let mut level = mu;
    for _ in 0..=floors.len() {
        let (count, sum) = floors
            .iter()
            .zip(&active)
            .filter(|(_, a)| **a)
            .fold((0usize, T::zero()), |(c, s), (f, _)| (c + 1, s + f.unwrap()));
        level = (power + sum) / T::lit(count as f64);
        // Re-classify modes against the polished level until the active set is stable.
        let mut changed = false;
        for (f, a) in floors.iter().zip(active.iter_mut()) {
            if let Some(f) = f {
                let open = *f < level;
                if open != *a && (open || count > 1) {
                    *a = open;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let alloc = floors
        .iter()
        .zip(&active)
        .map(|(f, a)| match (f, a) {
            (Some(f), true) => (level - *f).max(T::zero()),
            _ => T::zero(),
        })
        .collect();
    Some((alloc, level))
}

/// Eigenvalues of `HᴴH` (eigenchannel gains), clamped at zero and sorted descending.
pub fn eigenchannel_gains<T: Real>(h: &DMatrix<Complex<T>>) -> Vec<T> {
    sorted_gram_eigen(h).1
}

fn sorted_gram_eigen<T: Real>(h: &DMatrix<Complex<T>>) -> (DMatrix<Complex<T>>, Vec<T>) {
    let gram = hermitize(&(h.adjoint() * h));
    let eig = SymmetricEigen::new(gram);
    let m = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut basis = DMatrix::zeros(m, m);
    let mut values = Vec::with_capacity(m);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &eig.eigenvectors.column(src));
        values.push(eig.eigenvalues[src].max(T::zero()));
    }
    (basis, values)
}

/// Capacity-optimal covariance `T = U P Uᴴ` for a fixed channel.
///
/// A channel with no usable mode yields the equal-power covariance with
/// `rank_zero` set; its capacity is zero whatever the covariance.
pub fn eigenmode_waterfill<T: Real>(
    h: &DMatrix<Complex<T>>,
    power_budget: T,
    noise_power: T,
) -> Result<(TransmitCovariance<T>, EigenmodeSolution<T>)> {
    if !(power_budget > T::zero()) {
        return Err(Error::config("power_budget", format!("{power_budget} must be positive")));
    }
    if !(noise_power > T::zero()) {
        return Err(Error::config("noise_power", format!("{noise_power} must be positive")));
    }
    let m = h.ncols();
    let (basis, eigenvalues) = sorted_gram_eigen(h);
    match water_fill(&eigenvalues, power_budget, noise_power) {
        Some((allocations, water_level)) => {
            let p = DVector::from_iterator(m, allocations.iter().map(|&x| Complex::new(x, T::zero())));
            let cov = &basis * DMatrix::from_diagonal(&p) * basis.adjoint();
            let cov = TransmitCovariance::new(hermitize(&cov), power_budget, noise_power)?;
            Ok((
                cov,
                EigenmodeSolution {
                    basis,
                    eigenvalues,
                    allocations,
                    water_level,
                    rank_zero: false,
                },
            ))
        }
        None => {
            let cov = equal_power_covariance(m, power_budget, noise_power)?;
            let share = power_budget / T::lit(m as f64);
            Ok((
                cov,
                EigenmodeSolution {
                    basis,
                    eigenvalues,
                    allocations: vec![share; m],
                    water_level: share,
                    rank_zero: true,
                },
            ))
        }
    }
}

/// `T = (P_t / M) I_M`.
pub fn equal_power_covariance<T: Real>(dim: usize, power_budget: T, noise_power: T) -> Result<TransmitCovariance<T>> {
    if dim == 0 {
        return Err(Error::config("transmit elements", "must be at least 1"));
    }
    let share = Complex::new(power_budget / T::lit(dim as f64), T::zero());
    TransmitCovariance::new(DMatrix::identity(dim, dim) * share, power_budget, noise_power)
}
