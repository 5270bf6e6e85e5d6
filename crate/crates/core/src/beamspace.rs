//! The transmit beamspace matrix and the transmit models built on it.

use std::fmt;

use num_complex::Complex64;

use crate::array::{steering_derivative, steering_vector, AngleDeg, UlaGeometry};
use crate::error::{Error, Result};
use crate::linalg::{c64, orthonormality_defect, ComplexMat, ComplexVec};

/// How a beamspace matrix was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignMethod {
    Spheroidal,
    SpheroidalRotated,
    Minimax,
    TsHalf,
    TsNHalf,
    Tap,
    Identity,
    Custom,
}

impl DesignMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            DesignMethod::Spheroidal => "spheroidal",
            DesignMethod::SpheroidalRotated => "spheroidal-rotated",
            DesignMethod::Minimax => "minimax",
            DesignMethod::TsHalf => "ts-half",
            DesignMethod::TsNHalf => "ts-N-half",
            DesignMethod::Tap => "tap",
            DesignMethod::Identity => "identity",
            DesignMethod::Custom => "custom",
        }
    }
}

impl fmt::Display for DesignMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const UNIT_NORM_TOL: f64 = 1e-10;

/// An `M × K` transmit weight matrix `C`; column `k` forms the beam that
/// radiates waveform `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamspaceMatrix {
    entries: ComplexMat,
    method: DesignMethod,
}

impl BeamspaceMatrix {
    pub fn new(entries: ComplexMat, method: DesignMethod) -> Result<Self> {
        let (m, k) = entries.shape();
        if k == 0 || m == 0 {
            return Err(Error::InvalidArgument("beamspace matrix must be non-empty".into()));
        }
        if k > m {
            return Err(Error::DimensionMismatch {
                context: "BeamspaceMatrix::new",
                expected: format!("K <= M = {m}"),
                actual: format!("K = {k}"),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("beamspace matrix has non-finite entries".into()));
        }
        match method {
            DesignMethod::Spheroidal => {
                let defect = orthonormality_defect(&entries);
                if defect > UNIT_NORM_TOL {
                    return Err(Error::NotUnitary(defect));
                }
            }
            DesignMethod::Minimax | DesignMethod::SpheroidalRotated => {
                for col in entries.column_iter() {
                    let dev = (col.norm() - 1.0).abs();
                    if dev > UNIT_NORM_TOL {
                        return Err(Error::InvalidArgument(format!(
                            "{method} columns must have unit norm (deviation {dev:.3e})"
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(Self { entries, method })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            entries: ComplexMat::identity(m, m),
            method: DesignMethod::Identity,
        }
    }

    pub fn entries(&self) -> &ComplexMat {
        &self.entries
    }

    pub fn method(&self) -> DesignMethod {
        self.method
    }

    pub fn num_antennas(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_beams(&self) -> usize {
        self.entries.ncols()
    }

    pub fn column(&self, k: usize) -> ComplexVec {
        self.entries.column(k).into_owned()
    }

    /// `Cᴴ x` for an `M`-vector `x`.
    pub fn project(&self, x: &ComplexVec) -> Result<ComplexVec> {
        if x.len() != self.num_antennas() {
            return Err(Error::DimensionMismatch {
                context: "BeamspaceMatrix::project",
                expected: format!("length {}", self.num_antennas()),
                actual: format!("length {}", x.len()),
            });
        }
        Ok(self.entries.adjoint() * x)
    }

    /// Returns a copy scaled by a nonzero complex scalar, tagged `Custom`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            entries: self.entries.map(|z| z * factor),
            method: DesignMethod::Custom,
        }
    }
}

/// The `K`-beam transmit response `θ ↦ Cᴴ a(θ)` of a radar configuration.
///
/// `Subaperture` models two omnidirectional transmit subapertures whose phase
/// centres are `separation_wavelengths` apart; it reduces to a selection
/// matrix only when the separation lies on the element grid.
#[derive(Debug, Clone, PartialEq)]
pub enum TransmitModel {
    Beamspace(BeamspaceMatrix),
    Subaperture { separation_wavelengths: f64 },
}

impl TransmitModel {
    pub fn num_beams(&self) -> usize {
        match self {
            TransmitModel::Beamspace(c) => c.num_beams(),
            TransmitModel::Subaperture { .. } => 2,
        }
    }

    pub fn beamspace(&self) -> Option<&BeamspaceMatrix> {
        match self {
            TransmitModel::Beamspace(c) => Some(c),
            TransmitModel::Subaperture { .. } => None,
        }
    }

    fn check_tx(&self, tx: &UlaGeometry) -> Result<()> {
        if let TransmitModel::Beamspace(c) = self {
            if c.num_antennas() != tx.num_elements() {
                return Err(Error::DimensionMismatch {
                    context: "TransmitModel",
                    expected: format!("{} transmit elements", tx.num_elements()),
                    actual: format!("C with {} rows", c.num_antennas()),
                });
            }
        }
        Ok(())
    }

    /// `Cᴴ a(θ)`.
    pub fn beam_response(&self, tx: &UlaGeometry, theta: AngleDeg) -> Result<ComplexVec> {
        self.check_tx(tx)?;
        match self {
            TransmitModel::Beamspace(c) => c.project(&steering_vector(tx, theta)),
            TransmitModel::Subaperture { separation_wavelengths } => {
                let phase = -2.0 * std::f64::consts::PI * separation_wavelengths * theta.radians().sin();
                Ok(ComplexVec::from_vec(vec![
                    c64(1.0, 0.0),
                    Complex64::from_polar(1.0, phase),
                ]))
            }
        }
    }

    /// `Cᴴ a′(θ)`, derivative per radian.
    pub fn beam_response_derivative(&self, tx: &UlaGeometry, theta: AngleDeg) -> Result<ComplexVec> {
        self.check_tx(tx)?;
        match self {
            TransmitModel::Beamspace(c) => c.project(&steering_derivative(tx, theta)),
            TransmitModel::Subaperture { separation_wavelengths } => {
                let rad = theta.radians();
                let k = -2.0 * std::f64::consts::PI * separation_wavelengths;
                let second = Complex64::from_polar(1.0, k * rad.sin()) * c64(0.0, k * rad.cos());
                Ok(ComplexVec::from_vec(vec![c64(0.0, 0.0), second]))
            }
        }
    }
}
