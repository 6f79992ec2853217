//! FIM orientation frames, element grids and perpendicular surface deformation.
//!
//! Elements are linearized along the first side direction first: element `m`
//! (zero based) sits at grid column `m mod counts_x` and row `m / counts_x`.

use nalgebra::{DVector, Vector3};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Orientation of a metasurface: azimuth and elevation of its normal plus the
/// spin about that normal, all in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationAngles<T> {
    pub azimuth: T,
    pub elevation: T,
    pub spin: T,
}

impl<T: Real> OrientationAngles<T> {
    /// Validates `azimuth, elevation ∈ [0, π)` and `spin ∈ [0, 2π)`.
    pub fn new(azimuth: T, elevation: T, spin: T) -> Result<Self> {
        let pi = T::pi();
        let in_range = |x: T, hi: T| x >= T::zero() && x < hi;
        if !in_range(azimuth, pi) {
            return Err(Error::config("azimuth", format!("{azimuth} outside [0, π)")));
        }
        if !in_range(elevation, pi) {
            return Err(Error::config("elevation", format!("{elevation} outside [0, π)")));
        }
        if !in_range(spin, T::two_pi()) {
            return Err(Error::config("spin", format!("{spin} outside [0, 2π)")));
        }
        Ok(Self {
            azimuth,
            elevation,
            spin,
        })
    }

    /// All angles zero: the array lies in the x-y plane facing +z.
    pub fn identity() -> Self {
        Self {
            azimuth: T::zero(),
            elevation: T::zero(),
            spin: T::zero(),
        }
    }
}

/// Right-handed orthonormal triad `{i, j, k}`: the two side directions of the
/// array and its normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationFrame<T: Real> {
    pub i: Vector3<T>,
    pub j: Vector3<T>,
    pub k: Vector3<T>,
}

impl<T: Real> OrientationFrame<T> {
    pub fn from_angles(angles: &OrientationAngles<T>) -> Self {
        let (sp, cp) = angles.azimuth.sin_cos();
        let (st, ct) = angles.elevation.sin_cos();
        let (sr, cr) = angles.spin.sin_cos();

        let k = Vector3::new(st * cp, st * sp, ct);
        let i = Vector3::new(ct * cp * cr - sp * sr, ct * sp * cr + cp * sr, -st * cr);
        let j = Vector3::new(-ct * cp * sr - sp * cr, -ct * sp * sr + cp * cr, st * sr);

        let frame = Self { i, j, k };
        debug_assert!(
            frame.orthonormality_error() <= T::tol(1e-12),
            "orientation formulas produced a non-orthonormal frame"
        );
        frame
    }

    pub fn identity() -> Self {
        Self::from_angles(&OrientationAngles::identity())
    }

    /// Largest deviation from an orthonormal right-handed triad.
    pub fn orthonormality_error(&self) -> T {
        let one = T::one();
        [
            (self.i.norm() - one).abs(),
            (self.j.norm() - one).abs(),
            (self.k.norm() - one).abs(),
            self.i.dot(&self.j).abs(),
            self.i.dot(&self.k).abs(),
            self.j.dot(&self.k).abs(),
            (self.i.cross(&self.j) - self.k).amax(),
        ]
        .into_iter()
        .fold(T::zero(), |acc, e| acc.max(e))
    }
}

/// A uniform planar array mounted on one FIM.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry<T: Real> {
    counts_x: usize,
    counts_y: usize,
    spacing_x: T,
    spacing_y: T,
    frame: OrientationFrame<T>,
    reference_position: Vector3<T>,
}

impl<T: Real> ArrayGeometry<T> {
    pub fn new(
        counts_x: usize,
        counts_y: usize,
        spacing_x: T,
        spacing_y: T,
        frame: OrientationFrame<T>,
        reference_position: Vector3<T>,
    ) -> Result<Self> {
        if counts_x == 0 || counts_y == 0 {
            return Err(Error::config(
                "element counts",
                format!("{counts_x}x{counts_y} has no elements"),
            ));
        }
        if !(spacing_x > T::zero() && spacing_y > T::zero()) {
            return Err(Error::config(
                "spacing",
                format!("spacings must be positive, got ({spacing_x}, {spacing_y})"),
            ));
        }
        Ok(Self {
            counts_x,
            counts_y,
            spacing_x,
            spacing_y,
            frame,
            reference_position,
        })
    }

    /// Square-spaced array with the given frame at the origin.
    pub fn uniform(counts_x: usize, counts_y: usize, spacing: T, frame: OrientationFrame<T>) -> Result<Self> {
        Self::new(counts_x, counts_y, spacing, spacing, frame, Vector3::zeros())
    }

    pub fn with_reference_position(mut self, position: Vector3<T>) -> Self {
        self.reference_position = position;
        self
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.counts_x, self.counts_y)
    }

    pub fn spacing(&self) -> (T, T) {
        (self.spacing_x, self.spacing_y)
    }

    pub fn element_count(&self) -> usize {
        self.counts_x * self.counts_y
    }

    pub fn frame(&self) -> &OrientationFrame<T> {
        &self.frame
    }

    pub fn reference_position(&self) -> Vector3<T> {
        self.reference_position
    }

    /// In-plane offsets `(x_m, y_m)` of element `m` (zero based) from the reference element.
    pub fn offsets(&self, m: usize) -> (T, T) {
        let col = m % self.counts_x;
        let row = m / self.counts_x;
        (
            self.spacing_x * T::lit(col as f64),
            self.spacing_y * T::lit(row as f64),
        )
    }

    /// Positions of every element after applying `shape` along the normal.
    pub fn element_positions(&self, shape: &SurfaceShape<T>) -> Result<Vec<Vector3<T>>> {
        if shape.len() != self.element_count() {
            return Err(Error::dimension(
                "element_positions",
                self.element_count(),
                shape.len(),
            ));
        }
        Ok((0..self.element_count())
            .map(|m| {
                let (x, y) = self.offsets(m);
                self.reference_position
                    + self.frame.i * x
                    + self.frame.j * y
                    + self.frame.k * shape.deformations[m]
            })
            .collect())
    }
}

/// Per-element deformation along the array normal, bounded by `±bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceShape<T: Real> {
    pub deformations: DVector<T>,
    pub bound: T,
}

impl<T: Real> SurfaceShape<T> {
    /// Wraps a deformation vector; feasibility is checked with [`SurfaceShape::is_feasible`].
    pub fn new(deformations: DVector<T>, bound: T) -> Result<Self> {
        if !(bound >= T::zero()) {
            return Err(Error::config("bound", format!("morphing range {bound} is negative")));
        }
        Ok(Self { deformations, bound })
    }

    /// All elements at rest: the rigid-array configuration.
    pub fn flat(len: usize, bound: T) -> Self {
        Self {
            deformations: DVector::zeros(len),
            bound: bound.max(T::zero()),
        }
    }

    pub fn len(&self) -> usize {
        self.deformations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deformations.is_empty()
    }

    /// True iff every deformation lies in the closed box `[-bound, bound]`.
    pub fn is_feasible(&self) -> bool {
        self.deformations
            .iter()
            .all(|d| *d >= -self.bound && *d <= self.bound)
    }

    /// Clamps every deformation into `[-bound, bound]`.
    pub fn projected(&self) -> Self {
        let b = self.bound;
        Self {
            deformations: self.deformations.map(|d| d.clamp(-b, b)),
            bound: b,
        }
    }

    /// Same deformations under a new bound, clamped when the box shrinks.
    pub fn with_bound(&self, bound: T) -> Self {
        Self {
            deformations: self.deformations.clone(),
            bound: bound.max(T::zero()),
        }
        .projected()
    }
}

/// Transmit and receive arrays plus the carrier wavelength shared by both.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGeometry<T: Real> {
    pub tx: ArrayGeometry<T>,
    pub rx: ArrayGeometry<T>,
    pub wavelength: T,
}

impl<T: Real> LinkGeometry<T> {
    pub fn new(tx: ArrayGeometry<T>, rx: ArrayGeometry<T>, wavelength: T) -> Result<Self> {
        if !(wavelength > T::zero()) {
            return Err(Error::config("wavelength", format!("{wavelength} must be positive")));
        }
        Ok(Self { tx, rx, wavelength })
    }

    /// `2π / λ`.
    pub fn wavenumber(&self) -> T {
        T::two_pi() / self.wavelength
    }

    /// Distance between the two reference elements.
    pub fn distance(&self) -> T {
        (self.rx.reference_position - self.tx.reference_position).norm()
    }

    pub fn tx_elements(&self) -> usize {
        self.tx.element_count()
    }

    pub fn rx_elements(&self) -> usize {
        self.rx.element_count()
    }
}

/// Free-function form of [`SurfaceShape::is_feasible`].
pub fn validate_shape<T: Real>(shape: &SurfaceShape<T>) -> bool {
    shape.is_feasible()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn assert_vec(a: &Vector3<f64>, b: [f64; 3]) {
        for r in 0..3 {
            assert!((a[r] - b[r]).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn identity_angles_give_cartesian_axes() {
        let f = OrientationFrame::<f64>::identity();
        assert_vec(&f.i, [1.0, 0.0, 0.0]);
        assert_vec(&f.j, [0.0, 1.0, 0.0]);
        assert_vec(&f.k, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn normal_examples() {
        let f = OrientationFrame::from_angles(&OrientationAngles::new(FRAC_PI_2, FRAC_PI_2, 0.0).unwrap());
        assert_vec(&f.k, [0.0, 1.0, 0.0]);
        let f = OrientationFrame::from_angles(&OrientationAngles::new(FRAC_PI_2, 0.75 * PI, 0.0).unwrap());
        let h = 0.5f64.sqrt();
        assert_vec(&f.k, [0.0, h, -h]);
    }

    #[test]
    fn table_of_eight_orientations() {
        // (azimuth, elevation, spin) -> (i, j, k), evaluated by hand.
        let cases: [([f64; 3], [[f64; 3]; 3]); 8] = [
            ([0.0, 0.0, 0.0], [[1., 0., 0.], [0., 1., 0.], [0., 0., 1.]]),
            ([0.0, 0.0, FRAC_PI_2], [[0., 1., 0.], [-1., 0., 0.], [0., 0., 1.]]),
            ([0.0, FRAC_PI_2, 0.0], [[0., 0., -1.], [0., 1., 0.], [1., 0., 0.]]),
            ([0.0, FRAC_PI_2, FRAC_PI_2], [[0., 1., 0.], [0., 0., 1.], [1., 0., 0.]]),
            ([FRAC_PI_2, 0.0, 0.0], [[0., 1., 0.], [-1., 0., 0.], [0., 0., 1.]]),
            ([FRAC_PI_2, 0.0, FRAC_PI_2], [[-1., 0., 0.], [0., -1., 0.], [0., 0., 1.]]),
            ([FRAC_PI_2, FRAC_PI_2, 0.0], [[0., 0., -1.], [-1., 0., 0.], [0., 1., 0.]]),
            ([FRAC_PI_2, FRAC_PI_2, FRAC_PI_2], [[-1., 0., 0.], [0., 0., 1.], [0., 1., 0.]]),
        ];
        for ([az, el, sp], [i, j, k]) in cases {
            let f = OrientationFrame::from_angles(&OrientationAngles::new(az, el, sp).unwrap());
            assert_vec(&f.i, i);
            assert_vec(&f.j, j);
            assert_vec(&f.k, k);
        }
    }

    #[test]
    fn angle_ranges_are_half_open() {
        assert!(OrientationAngles::new(PI, 0.0, 0.0).is_err());
        assert!(OrientationAngles::new(0.0, -0.1, 0.0).is_err());
        assert!(OrientationAngles::new(0.0, 0.0, 2.0 * PI).is_err());
        assert!(OrientationAngles::new(0.0, 0.0, 6.0).is_ok());
    }

    #[test]
    fn positions_follow_grid_and_normal() {
        let lambda = 0.01;
        let g = ArrayGeometry::uniform(1, 1, lambda / 2.0, OrientationFrame::identity())
            .unwrap()
            .with_reference_position(Vector3::new(0.0, 0.0, 10.0));
        let p = g.element_positions(&SurfaceShape::flat(1, 0.0)).unwrap();
        assert_eq!(p, vec![Vector3::new(0.0, 0.0, 10.0)]);

        let g = ArrayGeometry::uniform(2, 1, lambda / 2.0, OrientationFrame::identity()).unwrap();
        let p = g.element_positions(&SurfaceShape::flat(2, 0.0)).unwrap();
        assert_vec(&p[1], [lambda / 2.0, 0.0, 0.0]);

        let frame = OrientationFrame::from_angles(&OrientationAngles::new(FRAC_PI_2, 0.75 * PI, 0.0).unwrap());
        let g = ArrayGeometry::uniform(2, 2, 0.5, frame).unwrap();
        let delta = 0.003;
        let shape = SurfaceShape::new(DVector::from_vec(vec![0.0, 0.0, 0.0, delta]), 0.01).unwrap();
        let flat = g.element_positions(&SurfaceShape::flat(4, 0.01)).unwrap();
        let bent = g.element_positions(&shape).unwrap();
        // element 4 sits at (x, y) = (d, d)
        let expected_flat = frame.i * 0.5 + frame.j * 0.5;
        assert!((flat[3] - expected_flat).norm() < 1e-15);
        assert!((bent[3] - flat[3] - frame.k * delta).norm() < 1e-15);
        for m in 0..3 {
            assert_eq!(bent[m], flat[m]);
        }
    }

    #[test]
    fn positions_reject_wrong_length() {
        let g = ArrayGeometry::uniform(2, 2, 0.5, OrientationFrame::<f64>::identity()).unwrap();
        let err = g.element_positions(&SurfaceShape::flat(3, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 4, actual: 3, .. }));
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        let f = OrientationFrame::<f64>::identity();
        assert!(ArrayGeometry::uniform(0, 2, 0.5, f).is_err());
        assert!(ArrayGeometry::uniform(2, 2, 0.0, f).is_err());
    }

    #[test]
    fn feasibility_is_inclusive() {
        let b = 0.25;
        assert!(validate_shape(&SurfaceShape::flat(5, b)));
        let over = SurfaceShape::new(DVector::from_vec(vec![b + 1e-9]), b).unwrap();
        assert!(!validate_shape(&over));
        let edge = SurfaceShape::new(DVector::from_vec(vec![-b]), b).unwrap();
        assert!(validate_shape(&edge));
        assert!(over.projected().is_feasible());
        assert_eq!(over.projected().deformations[0], b);
        assert!(SurfaceShape::new(DVector::from_vec(vec![0.0]), -1.0).is_err());
    }
}
