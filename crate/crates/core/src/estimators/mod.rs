//! Subspace direction-of-arrival estimators for the virtual array.

mod esprit;
mod metrics;
mod music;
mod peaks;

pub use esprit::{build_phase_lut, esprit_estimate, EspritOptions, EspritOutput, Partition, PhaseLookupTable};
pub use metrics::{associate, resolution_check, rmse, rmse_resolved, TrialEstimate};
pub use music::{grid_manifold, music_spectrum, music_spectrum_noise_form, music_spectrum_on};
pub use peaks::{find_peaks, PeakSearch};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, hermitian_eigen_desc, ComplexMat};

/// Tolerance on `‖R − Rᴴ‖_F / ‖R‖_F` accepted by [`subspace_decompose`].
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SubspaceDecomp {
    pub signal_basis: ComplexMat,
    pub noise_basis: ComplexMat,
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

impl SubspaceDecomp {
    pub fn num_sources(&self) -> usize {
        self.signal_basis.ncols()
    }

    pub fn dimension(&self) -> usize {
        self.signal_basis.nrows()
    }
}

pub fn subspace_decompose(r: &ComplexMat, l: usize) -> Result<SubspaceDecomp> {
    if !r.is_square() || l >= r.nrows() {
        return Err(Error::DimensionMismatch {
            context: "subspace_decompose",
            expected: format!("square matrix larger than L = {l}"),
            actual: format!("{}x{}", r.nrows(), r.ncols()),
        });
    }
    let defect = hermitian_defect(r);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let (eigenvalues, vectors) = hermitian_eigen_desc(r)?;
    let n = r.nrows();
    Ok(SubspaceDecomp {
        signal_basis: vectors.columns(0, l).into_owned(),
        noise_basis: vectors.columns(l, n - l).into_owned(),
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{AngleDeg, UlaGeometry};
    use crate::beamspace::TransmitModel;
    use crate::linalg::{c64, complement_projector};
    use crate::sim::{exact_covariance, Scenario};

    fn scenario(noise: f64) -> Scenario {
        let g = UlaGeometry::half_wavelength(10).unwrap();
        let model = TransmitModel::Subaperture {
            separation_wavelengths: 5.0,
        };
        let targets = [-1.0, 1.0]
            .iter()
            .map(|&d| crate::sim::Target::new(AngleDeg::new(d).unwrap(), 1.0).unwrap())
            .collect();
        Scenario::new(g, g, model, targets, 10.0, noise, 1).unwrap()
    }

    #[test]
    fn identity_split_is_orthonormal() {
        let d = subspace_decompose(&ComplexMat::identity(6, 6), 2).unwrap();
        assert!(d.eigenvalues.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let es = &d.signal_basis;
        assert!((es.adjoint() * es - ComplexMat::identity(2, 2)).norm() < 1e-8);
        assert!((d.noise_basis.adjoint() * es).norm() < 1e-8);
    }

    #[test]
    fn signal_subspace_spans_manifold() {
        let s = scenario(1e-9);
        let d = subspace_decompose(&exact_covariance(&s).unwrap(), 2).unwrap();
        // Principal-angle oracle: residual of E_s outside span(V).
        let p = complement_projector(&s.manifold().unwrap()).unwrap();
        let resid = (p * &d.signal_basis).norm();
        assert!(resid < 1e-8, "residual {resid}");
    }

    #[test]
    fn noise_eigenvalues_equal_noise_variance() {
        let s = scenario(0.7);
        let d = subspace_decompose(&exact_covariance(&s).unwrap(), 2).unwrap();
        assert!(d.eigenvalues[2..].iter().all(|&v| (v - 0.7).abs() < 1e-8));
        let en = &d.noise_basis;
        let es = &d.signal_basis;
        let n = es.nrows();
        assert!((en * en.adjoint() - (ComplexMat::identity(n, n) - es * es.adjoint())).norm() < 1e-8);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut r = ComplexMat::identity(3, 3);
        r[(0, 1)] = c64(0.5, 0.0);
        assert!(matches!(subspace_decompose(&r, 1), Err(Error::NotHermitian(_))));
        assert!(subspace_decompose(&ComplexMat::identity(3, 3), 3).is_err());
    }
}
