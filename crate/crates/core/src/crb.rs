//! Stochastic and deterministic Cramér–Rao bounds on target angles.
//!
//! Both bounds share the form `(σ_z²/2Q) · {Re[(Dᴴ P⊥ D) ⊙ Gᵀ]}⁻¹` with
//! `P⊥ = I − V(VᴴV)⁻¹Vᴴ`. The stochastic bound uses `G = S Vᴴ R⁻¹ V S`,
//! the deterministic one a source-covariance estimate `Ŝ` in place of `G`.
//! All algebra is in radians.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::array::{steering_derivative, steering_vector, AngleDeg, UlaGeometry};
use crate::beamspace::TransmitModel;
use crate::error::{Error, Result};
use crate::linalg::{complement_projector, hermitian_defect, kron, ComplexMat, ComplexVec};
use crate::sim::{exact_covariance, Scenario};

/// `dv/dθ` per radian: `scale · [(Cᴴa′) ⊗ b + (Cᴴa) ⊗ b′]`.
pub fn manifold_derivative(
    model: &TransmitModel,
    tx: &UlaGeometry,
    rx: &UlaGeometry,
    theta: AngleDeg,
    scale: f64,
) -> Result<ComplexVec> {
    let beams = model.beam_response(tx, theta)?;
    let dbeams = model.beam_response_derivative(tx, theta)?;
    let b = steering_vector(rx, theta);
    let db = steering_derivative(rx, theta);
    Ok((kron(&dbeams, &b) + kron(&beams, &db)).scale(scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrbVariant {
    Stochastic,
    Deterministic,
}

impl CrbVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            CrbVariant::Stochastic => "stochastic",
            CrbVariant::Deterministic => "deterministic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrbResult {
    /// `L × L` bound in radians².
    pub matrix: DMatrix<f64>,
    pub variant: CrbVariant,
}

impl CrbResult {
    /// Diagonal converted to degrees².
    pub fn per_target_deg2(&self) -> Vec<f64> {
        let k = (180.0 / PI).powi(2);
        self.matrix.diagonal().iter().map(|v| v * k).collect()
    }

    /// Square root of the diagonal, in degrees.
    pub fn per_target_deg(&self) -> Vec<f64> {
        self.per_target_deg2().into_iter().map(f64::sqrt).collect()
    }
}

fn derivative_matrix(s: &Scenario) -> Result<ComplexMat> {
    let cols = s
        .targets()
        .iter()
        .map(|t| manifold_derivative(s.model(), s.tx(), s.rx(), t.theta, s.energy_scale()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ComplexMat::from_columns(&cols))
}

fn bound(
    v: &ComplexMat,
    d: &ComplexMat,
    g: &ComplexMat,
    noise_var: f64,
    q: usize,
    variant: CrbVariant,
) -> Result<CrbResult> {
    let p = complement_projector(v)?;
    let h = d.adjoint() * p * d;
    let l = v.ncols();
    let fisher = DMatrix::from_fn(l, l, |i, j| (h[(i, j)] * g[(j, i)]).re);
    let fisher = (&fisher + fisher.transpose()) * 0.5;
    let chol = nalgebra::linalg::Cholesky::new(fisher).ok_or_else(|| {
        Error::SingularFisher(format!(
            "{} Fisher matrix is not positive definite (coincident targets or no signal power)",
            variant.as_str()
        ))
    })?;
    let inv = chol.inverse();
    let matrix = (&inv + inv.transpose()) * (0.5 * noise_var / (2.0 * q as f64));
    Ok(CrbResult { matrix, variant })
}

fn check_targets(s: &Scenario) -> Result<()> {
    if s.targets().is_empty() {
        return Err(Error::InvalidScenario("CRB needs at least one target".into()));
    }
    if s.noise_var().is_nan() || s.noise_var() <= 0.0 {
        return Err(Error::InvalidScenario("CRB needs positive noise variance".into()));
    }
    Ok(())
}

pub fn stochastic_crb(s: &Scenario) -> Result<CrbResult> {
    check_targets(s)?;
    let v = s.manifold()?;
    let d = derivative_matrix(s)?;
    let src = s.source_covariance();
    let r = exact_covariance(s)?;
    let r_inv_v = r
        .cholesky()
        .ok_or_else(|| Error::SingularFisher("model covariance is not positive definite".into()))?
        .solve(&v);
    let g = &src * v.adjoint() * r_inv_v * &src;
    bound(&v, &d, &g, s.noise_var(), s.num_pulses(), CrbVariant::Stochastic)
}

/// Deterministic bound with `Ŝ = s_hat`, defaulting to the true `S`.
pub fn deterministic_crb(s: &Scenario, s_hat: Option<&ComplexMat>) -> Result<CrbResult> {
    check_targets(s)?;
    let l = s.targets().len();
    let src = match s_hat {
        Some(m) => {
            if m.shape() != (l, l) {
                return Err(Error::DimensionMismatch {
                    context: "deterministic_crb",
                    expected: format!("{l}x{l} source covariance"),
                    actual: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
            if hermitian_defect(m) > 1e-10 {
                return Err(Error::NotHermitian(hermitian_defect(m)));
            }
            m.clone()
        }
        None => s.source_covariance(),
    };
    let v = s.manifold()?;
    let d = derivative_matrix(s)?;
    bound(&v, &d, &src, s.noise_var(), s.num_pulses(), CrbVariant::Deterministic)
}

/// Stochastic bound for the `C = I` virtual array written directly in terms
/// of the virtual element positions `m + n` (half-wavelength arrays).
pub fn mimo_stochastic_crb(
    m: usize,
    n: usize,
    angles: &[AngleDeg],
    sigma_alpha_sq: &[f64],
    total_energy: f64,
    noise_var: f64,
    q: usize,
) -> Result<CrbResult> {
    let scale = (total_energy / m as f64).sqrt();
    let l = angles.len();
    let dim = m * n;
    let mut v = ComplexMat::zeros(dim, l);
    let mut d = ComplexMat::zeros(dim, l);
    for (j, theta) in angles.iter().enumerate() {
        let (sn, cs) = theta.radians().sin_cos();
        for tx in 0..m {
            for rx in 0..n {
                let pos = (tx + rx) as f64;
                let e = Complex64::from_polar(scale, -PI * pos * sn);
                v[(tx * n + rx, j)] = e;
                d[(tx * n + rx, j)] = e * Complex64::new(0.0, -PI * pos * cs);
            }
        }
    }
    let src = ComplexMat::from_diagonal(&ComplexVec::from_iterator(
        l,
        sigma_alpha_sq.iter().map(|&x| Complex64::new(x, 0.0)),
    ));
    let r = &v * &src * v.adjoint() + ComplexMat::identity(dim, dim).scale(noise_var);
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::SingularFisher("model covariance is singular".into()))?;
    let g = &src * v.adjoint() * r_inv * &v * &src;
    bound(&v, &d, &g, noise_var, q, CrbVariant::Stochastic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamspace::{BeamspaceMatrix, DesignMethod};
    use crate::linalg::c64;
    use crate::sim::Target;
    use proptest::prelude::*;

    fn deg(v: f64) -> AngleDeg {
        AngleDeg::new(v).unwrap()
    }

    fn g(n: usize) -> UlaGeometry {
        UlaGeometry::half_wavelength(n).unwrap()
    }

    fn scenario(model: TransmitModel, snr_db: f64, q: usize) -> Scenario {
        Scenario::with_snr_db(g(10), g(10), model, &[deg(-1.0), deg(1.0)], snr_db, 10.0, q).unwrap()
    }

    #[test]
    fn derivative_vanishes_at_endfire() {
        let c = ComplexMat::from_fn(6, 2, |i, j| c64((i + 2 * j) as f64 * 0.1 - 0.3, 0.0));
        let model = TransmitModel::Beamspace(BeamspaceMatrix::new(c, DesignMethod::Custom).unwrap());
        for end in [-90.0, 90.0] {
            let d = manifold_derivative(&model, &g(6), &g(4), deg(end), 1.3).unwrap();
            assert!(d.norm() < 1e-12);
        }
        let one = TransmitModel::Beamspace(BeamspaceMatrix::identity(1));
        let d = manifold_derivative(&one, &g(1), &g(1), deg(17.0), 1.0).unwrap();
        assert!(d.norm() == 0.0);
    }

    #[test]
    fn doubling_pulses_halves_bound() {
        let model = TransmitModel::Beamspace(BeamspaceMatrix::identity(10));
        let a = stochastic_crb(&scenario(model.clone(), 0.0, 300)).unwrap();
        let b = stochastic_crb(&scenario(model, 0.0, 600)).unwrap();
        for (x, y) in a.matrix.iter().zip(b.matrix.iter()) {
            assert!((x / 2.0 - y).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn generic_path_matches_mimo_closed_form() {
        let model = TransmitModel::Beamspace(BeamspaceMatrix::identity(10));
        for snr in [-10.0, 0.0, 20.0] {
            let generic = stochastic_crb(&scenario(model.clone(), snr, 300)).unwrap();
            let var = 10f64.powf(snr / 10.0);
            let hand = mimo_stochastic_crb(10, 10, &[deg(-1.0), deg(1.0)], &[var, var], 10.0, 1.0, 300).unwrap();
            for (x, y) in generic.matrix.iter().zip(hand.matrix.iter()) {
                assert!((x - y).abs() <= 1e-12 * generic.matrix.amax());
            }
        }
    }

    #[test]
    fn bound_is_symmetric_positive_definite() {
        let model = TransmitModel::Subaperture {
            separation_wavelengths: 5.0,
        };
        for r in [
            stochastic_crb(&scenario(model.clone(), 0.0, 300)).unwrap(),
            deterministic_crb(&scenario(model.clone(), 0.0, 300), None).unwrap(),
        ] {
            assert!((&r.matrix - r.matrix.transpose()).amax() == 0.0);
            assert!(nalgebra::linalg::Cholesky::new(r.matrix.clone()).is_some());
            assert!(r.per_target_deg2().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn bound_decreases_with_snr() {
        let model = TransmitModel::Subaperture {
            separation_wavelengths: 0.5,
        };
        let mut prev = f64::INFINITY;
        for snr in -10..=30 {
            let r = stochastic_crb(&scenario(model.clone(), snr as f64, 300)).unwrap();
            let v = r.per_target_deg2()[0];
            assert!(v < prev, "snr {snr}");
            prev = v;
        }
    }

    #[test]
    fn coincident_targets_are_singular() {
        let s = Scenario::with_snr_db(
            g(10),
            g(10),
            TransmitModel::Beamspace(BeamspaceMatrix::identity(10)),
            &[deg(1.0), deg(1.0)],
            0.0,
            10.0,
            300,
        )
        .unwrap();
        assert!(matches!(stochastic_crb(&s), Err(Error::SingularFisher(_))));
    }

    #[test]
    fn zero_source_estimate_is_singular() {
        let s = scenario(TransmitModel::Beamspace(BeamspaceMatrix::identity(10)), 0.0, 300);
        let zero = ComplexMat::zeros(2, 2);
        assert!(matches!(
            deterministic_crb(&s, Some(&zero)),
            Err(Error::SingularFisher(_))
        ));
    }

    #[test]
    fn deterministic_scales_with_pulses() {
        let model = TransmitModel::Subaperture {
            separation_wavelengths: 0.5,
        };
        let a = deterministic_crb(&scenario(model.clone(), 5.0, 100), None).unwrap();
        let b = deterministic_crb(&scenario(model, 5.0, 400), None).unwrap();
        for (x, y) in a.matrix.iter().zip(b.matrix.iter()) {
            assert!((x / 4.0 - y).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn projector_properties_on_manifold() {
        let s = scenario(TransmitModel::Beamspace(BeamspaceMatrix::identity(10)), 0.0, 1);
        let v = s.manifold().unwrap();
        let p = complement_projector(&v).unwrap();
        assert!((&p * &v).camax() < 1e-10);
        assert!((&p * &p - &p).camax() < 1e-10);
        assert!((&p - p.adjoint()).camax() < 1e-10);
    }

    #[test]
    fn unequal_powers_are_supported() {
        let targets = vec![
            Target::new(deg(-1.0), 2.0).unwrap(),
            Target::new(deg(1.5), 0.5).unwrap(),
        ];
        let s = Scenario::new(
            g(4),
            g(3),
            TransmitModel::Beamspace(BeamspaceMatrix::identity(4)),
            targets,
            4.0,
            1.0,
            50,
        )
        .unwrap();
        let generic = stochastic_crb(&s).unwrap();
        let hand = mimo_stochastic_crb(4, 3, &[deg(-1.0), deg(1.5)], &[2.0, 0.5], 4.0, 1.0, 50).unwrap();
        let diff = (&generic.matrix - &hand.matrix).amax();
        assert!(diff <= 1e-10 * generic.matrix.amax(), "diff {diff} {}", generic.matrix);
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_difference(
            re in proptest::collection::vec(-1.0f64..1.0, 12),
            im in proptest::collection::vec(-1.0f64..1.0, 12),
            th in -80.0f64..80.0,
        ) {
            let c = ComplexMat::from_fn(6, 2, |i, j| c64(re[i * 2 + j], im[i * 2 + j]));
            let model = TransmitModel::Beamspace(BeamspaceMatrix::new(c, DesignMethod::Custom).unwrap());
            let (tx, rx) = (g(6), g(5));
            let h = 1e-6;
            let at = |r: f64| crate::array::virtual_steering(&tx, &rx, &model, AngleDeg::from_radians(r).unwrap(), 1.7).unwrap();
            let fd = (at(th.to_radians() + h) - at(th.to_radians() - h)).unscale(2.0 * h);
            let exact = manifold_derivative(&model, &tx, &rx, deg(th), 1.7).unwrap();
            prop_assert!((fd - &exact).norm() <= 1e-6 * exact.norm().max(1.0));
        }
    }
}
