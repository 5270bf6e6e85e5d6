use crate::array::{steering_vector, AngleDeg, UlaGeometry};
use crate::beamspace::TransmitModel;
use crate::error::Result;
use crate::linalg::ComplexMat;

use super::SubspaceDecomp;

/// MUSIC pseudospectrum `vᴴv / vᴴ(I − E_sE_sᴴ)v` on `grid`.
///
/// The numerator uses `vᴴv = N·‖Cᴴa‖²`; the energy scale cancels.
pub fn music_spectrum(
    decomp: &SubspaceDecomp,
    model: &TransmitModel,
    tx: &UlaGeometry,
    rx: &UlaGeometry,
    grid: &[AngleDeg],
) -> Result<Vec<f64>> {
    Ok(music_spectrum_on(decomp, &grid_manifold(model, tx, rx, grid)?))
}

/// Unscaled virtual steering vectors for every grid angle, one per column.
pub fn grid_manifold(
    model: &TransmitModel,
    tx: &UlaGeometry,
    rx: &UlaGeometry,
    grid: &[AngleDeg],
) -> Result<ComplexMat> {
    let dim = model.num_beams() * rx.num_elements();
    let mut out = ComplexMat::zeros(dim, grid.len());
    for (i, &theta) in grid.iter().enumerate() {
        let beams = model.beam_response(tx, theta)?;
        out.set_column(i, &crate::linalg::kron(&beams, &steering_vector(rx, theta)));
    }
    Ok(out)
}

/// MUSIC pseudospectrum over precomputed steering vectors (columns of `vectors`).
pub fn music_spectrum_on(decomp: &SubspaceDecomp, vectors: &ComplexMat) -> Vec<f64> {
    let proj = decomp.signal_basis.adjoint() * vectors;
    (0..vectors.ncols())
        .map(|i| {
            let num = vectors.column(i).norm_squared();
            let den = num - proj.column(i).norm_squared();
            num / den.max(num * f64::EPSILON).max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Same spectrum with the denominator `‖E_nᴴ v‖²` taken from the noise basis.
pub fn music_spectrum_noise_form(
    decomp: &SubspaceDecomp,
    model: &TransmitModel,
    tx: &UlaGeometry,
    rx: &UlaGeometry,
    grid: &[AngleDeg],
) -> Result<Vec<f64>> {
    let en_h = decomp.noise_basis.adjoint();
    grid.iter()
        .map(|&theta| {
            let beams = model.beam_response(tx, theta)?;
            let v = crate::linalg::kron(&beams, &steering_vector(rx, theta));
            let den = (&en_h * &v).norm_squared();
            Ok(v.norm_squared() / den.max(f64::MIN_POSITIVE))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamspace::BeamspaceMatrix;
    use crate::estimators::subspace_decompose;
    use crate::linalg::c64;
    use crate::sim::{exact_covariance, sample_covariance, simulate_snapshots, Scenario};

    fn setup(model: TransmitModel, noise: f64) -> (Scenario, SubspaceDecomp) {
        let g = UlaGeometry::half_wavelength(10).unwrap();
        let angles = [AngleDeg::new(-1.0).unwrap(), AngleDeg::new(1.0).unwrap()];
        let mut s = Scenario::with_snr_db(g, g, model, &angles, 0.0, 10.0, 1).unwrap();
        if noise != 1.0 {
            let targets = s.targets().to_vec();
            s = Scenario::new(g, g, s.model().clone(), targets, 10.0, noise, 1).unwrap();
        }
        let d = subspace_decompose(&exact_covariance(&s).unwrap(), 2).unwrap();
        (s, d)
    }

    fn sampled(model: TransmitModel) -> (Scenario, SubspaceDecomp) {
        let g = UlaGeometry::half_wavelength(10).unwrap();
        let angles = [AngleDeg::new(-1.0).unwrap(), AngleDeg::new(1.0).unwrap()];
        let s = Scenario::with_snr_db(g, g, model, &angles, 0.0, 10.0, 300).unwrap();
        let r = sample_covariance(&simulate_snapshots(&s, 3, 0).unwrap());
        let d = subspace_decompose(&r, 2).unwrap();
        (s, d)
    }

    fn grid() -> Vec<AngleDeg> {
        (0..=500)
            .map(|i| AngleDeg::new(-5.0 + 0.02 * i as f64).unwrap())
            .collect()
    }

    #[test]
    fn exact_subspace_peaks_dominate() {
        let (s, d) = setup(TransmitModel::Beamspace(BeamspaceMatrix::identity(10)), 1e-6);
        let g = grid();
        let f = music_spectrum(&d, s.model(), s.tx(), s.rx(), &g).unwrap();
        let mut sorted = f.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        for idx in [200, 300] {
            assert!((g[idx].degrees().abs() - 1.0).abs() < 1e-9);
            assert!(f[idx] / median >= 1e6, "ratio {}", f[idx] / median);
        }
        assert!(f.iter().all(|&x| x > 0.0 && x.is_finite()));
    }

    #[test]
    fn both_forms_agree() {
        let model = TransmitModel::Subaperture {
            separation_wavelengths: 0.5,
        };
        let (s, d) = sampled(model);
        let g = grid();
        let a = music_spectrum(&d, s.model(), s.tx(), s.rx(), &g).unwrap();
        let b = music_spectrum_noise_form(&d, s.model(), s.tx(), s.rx(), &g).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-6 * y);
        }
    }

    #[test]
    fn scaling_c_keeps_argmax() {
        let c = BeamspaceMatrix::identity(10);
        let (s, d) = sampled(TransmitModel::Beamspace(c.clone()));
        let g = grid();
        let argmax = |f: &[f64]| f.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let f1 = music_spectrum(&d, s.model(), s.tx(), s.rx(), &g).unwrap();
        let scaled = TransmitModel::Beamspace(c.scaled(c64(-2.5, 1.0)));
        let f2 = music_spectrum(&d, &scaled, s.tx(), s.rx(), &g).unwrap();
        assert_eq!(argmax(&f1), argmax(&f2));
    }
}
