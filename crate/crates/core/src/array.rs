//! Array geometry, steering vectors and virtual-array manifolds.
//!
//! Angles cross the API in degrees (broadside convention, `[-90°, 90°]`) and
//! are converted to radians internally. Derivatives are taken with respect to
//! θ in radians. The first element is the phase reference.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::beamspace::TransmitModel;
use crate::error::{Error, Result};
use crate::linalg::{c64, kron, ComplexVec};

/// An angle in degrees, restricted to `[-90, 90]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AngleDeg(f64);

impl AngleDeg {
    pub const ZERO: AngleDeg = AngleDeg(0.0);

    pub fn new(degrees: f64) -> Result<Self> {
        if !degrees.is_finite() || !(-90.0..=90.0).contains(&degrees) {
            return Err(Error::AngleOutOfRange(degrees));
        }
        Ok(Self(degrees))
    }

    /// Like [`AngleDeg::new`] but clamps into range; for values produced by
    /// estimators that may stray a hair past ±90°.
    pub fn clamped(degrees: f64) -> Self {
        Self(degrees.clamp(-90.0, 90.0))
    }

    pub fn from_radians(radians: f64) -> Result<Self> {
        Self::new(radians.to_degrees())
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }
}

/// Element positions along the array axis, in wavelengths, relative to the
/// reference element. Only ULAs ship; other layouts can implement this.
pub trait ElementPositions {
    fn positions_wavelengths(&self) -> Vec<f64>;
}

/// Uniform linear array of omnidirectional elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlaGeometry {
    num_elements: usize,
    spacing_wavelengths: f64,
}

impl UlaGeometry {
    pub fn new(num_elements: usize, spacing_wavelengths: f64) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::InvalidGeometry("array needs at least one element".into()));
        }
        if !(spacing_wavelengths > 0.0 && spacing_wavelengths.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "spacing must be positive, got {spacing_wavelengths}"
            )));
        }
        Ok(Self {
            num_elements,
            spacing_wavelengths,
        })
    }

    pub fn half_wavelength(num_elements: usize) -> Result<Self> {
        Self::new(num_elements, 0.5)
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing_wavelengths(&self) -> f64 {
        self.spacing_wavelengths
    }
}

impl ElementPositions for UlaGeometry {
    fn positions_wavelengths(&self) -> Vec<f64> {
        (0..self.num_elements)
            .map(|m| m as f64 * self.spacing_wavelengths)
            .collect()
    }
}

/// `a(θ)`: element `m` is `exp(−j 2π d m sin θ)`.
pub fn steering_vector<G: ElementPositions>(geom: &G, theta: AngleDeg) -> ComplexVec {
    let s = theta.radians().sin();
    let pos = geom.positions_wavelengths();
    ComplexVec::from_iterator(
        pos.len(),
        pos.iter().map(|x| Complex64::from_polar(1.0, -2.0 * PI * x * s)),
    )
}

/// `a′(θ) = da/dθ` per radian: element `m` is
/// `(−j 2π d m cos θ) · exp(−j 2π d m sin θ)`.
pub fn steering_derivative<G: ElementPositions>(geom: &G, theta: AngleDeg) -> ComplexVec {
    let rad = theta.radians();
    let (s, c) = (rad.sin(), rad.cos());
    let pos = geom.positions_wavelengths();
    ComplexVec::from_iterator(
        pos.len(),
        pos.iter().map(|x| {
            let k = -2.0 * PI * x;
            c64(0.0, k * c) * Complex64::from_polar(1.0, k * s)
        }),
    )
}

/// Virtual-array steering vector `scale · (Cᴴ a(θ)) ⊗ b(θ)` of length `K·N`.
///
/// With `C = I_M` and `scale = √(E/M)` this is the traditional MIMO manifold.
pub fn virtual_steering(
    tx: &UlaGeometry,
    rx: &UlaGeometry,
    model: &TransmitModel,
    theta: AngleDeg,
    energy_scale: f64,
) -> Result<ComplexVec> {
    let beams = model.beam_response(tx, theta)?;
    let b = steering_vector(rx, theta);
    Ok(kron(&beams, &b).scale(energy_scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamspace::BeamspaceMatrix;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn deg(v: f64) -> AngleDeg {
        AngleDeg::new(v).unwrap()
    }

    #[test]
    fn broadside_is_all_ones() {
        let g = UlaGeometry::half_wavelength(4).unwrap();
        let a = steering_vector(&g, AngleDeg::ZERO);
        for z in a.iter() {
            assert_abs_diff_eq!(z.re, 1.0);
            assert_abs_diff_eq!(z.im, 0.0);
        }
    }

    #[test]
    fn thirty_degrees_three_elements() {
        let g = UlaGeometry::new(3, 0.5).unwrap();
        let a = steering_vector(&g, deg(30.0));
        let expect = [c64(1.0, 0.0), c64(0.0, -1.0), c64(-1.0, 0.0)];
        for (z, e) in a.iter().zip(expect) {
            assert!((z - e).norm() < 1e-12);
        }
    }

    #[test]
    fn five_degree_phase_increment() {
        // Scalar-loop oracle: explicit cos/sin evaluation per element.
        let g = UlaGeometry::half_wavelength(10).unwrap();
        let a = steering_vector(&g, deg(5.0));
        let inc = -PI * 5f64.to_radians().sin();
        assert_abs_diff_eq!(inc, -0.27380, epsilon = 1e-4);
        for m in 0..10 {
            let phase = inc * m as f64;
            assert_abs_diff_eq!(a[m].norm(), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(a[m].re, phase.cos(), epsilon = 1e-12);
            assert_abs_diff_eq!(a[m].im, phase.sin(), epsilon = 1e-12);
        }
        for m in 1..10 {
            let step = (a[m] / a[m - 1]).arg();
            assert_abs_diff_eq!(step, inc, epsilon = 1e-12);
        }
    }

    #[test]
    fn out_of_range_angle_rejected() {
        assert!(matches!(AngleDeg::new(90.5), Err(Error::AngleOutOfRange(_))));
        assert!(AngleDeg::new(f64::NAN).is_err());
        assert!(UlaGeometry::new(0, 0.5).is_err());
        assert!(UlaGeometry::new(3, 0.0).is_err());
    }

    #[test]
    fn derivative_closed_forms() {
        let g = UlaGeometry::half_wavelength(7).unwrap();
        for end in [-90.0, 90.0] {
            let d = steering_derivative(&g, deg(end));
            assert!(d.norm() < 1e-12);
        }
        let two = UlaGeometry::half_wavelength(2).unwrap();
        let d = steering_derivative(&two, AngleDeg::ZERO);
        assert!((d[0] - c64(0.0, 0.0)).norm() < 1e-15);
        assert!((d[1] - c64(0.0, -PI)).norm() < 1e-12);
    }

    #[test]
    fn identity_virtual_steering_reduces_to_mimo() {
        let tx = UlaGeometry::half_wavelength(2).unwrap();
        let rx = UlaGeometry::half_wavelength(2).unwrap();
        let model = TransmitModel::Beamspace(BeamspaceMatrix::identity(2));
        let v = virtual_steering(&tx, &rx, &model, AngleDeg::ZERO, 1.0).unwrap();
        assert_eq!(v.len(), 4);
        for z in v.iter() {
            assert!((z - c64(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn mimo_manifold_has_m_plus_n_minus_one_distinct_entries() {
        let tx = UlaGeometry::half_wavelength(4).unwrap();
        let rx = UlaGeometry::half_wavelength(3).unwrap();
        let model = TransmitModel::Beamspace(BeamspaceMatrix::identity(4));
        let v = virtual_steering(&tx, &rx, &model, deg(11.0), 1.0).unwrap();
        let mut distinct: Vec<Complex64> = Vec::new();
        for z in v.iter() {
            if !distinct.iter().any(|d| (d - z).norm() < 1e-9) {
                distinct.push(*z);
            }
        }
        assert_eq!(distinct.len(), 4 + 3 - 1);
    }

    proptest! {
        #[test]
        fn steering_norm_is_element_count(m in 1usize..40, spacing in 0.05f64..2.0, th in -90.0f64..=90.0) {
            let g = UlaGeometry::new(m, spacing).unwrap();
            let a = steering_vector(&g, deg(th));
            prop_assert!((a.norm_squared() - m as f64).abs() < 1e-9);
        }

        #[test]
        fn derivative_matches_central_difference(m in 1usize..20, th in -89.0f64..89.0) {
            let g = UlaGeometry::half_wavelength(m).unwrap();
            let h = 1e-6;
            let plus = steering_vector(&g, AngleDeg::from_radians(th.to_radians() + h).unwrap());
            let minus = steering_vector(&g, AngleDeg::from_radians(th.to_radians() - h).unwrap());
            let fd = (plus - minus).unscale(2.0 * h);
            let exact = steering_derivative(&g, deg(th));
            let scale = exact.norm().max(1.0);
            prop_assert!((fd - exact).norm() / scale <= 1e-6);
        }
    }
}
