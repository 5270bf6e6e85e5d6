//! ESPRIT with either the two-beam split or the overlapped MIMO split.
//!
//! For two transmit beams the eigenvalues of `Φ` equal `c₂ᴴa(θ)/c₁ᴴa(θ)`,
//! whose phase is mapped back to θ through a [`PhaseLookupTable`]. When the
//! unwrapped phase spans more than 2π an eigenvalue phase has several
//! preimages; the one whose virtual steering vector projects most strongly
//! onto the signal subspace is kept.

use std::f64::consts::PI;

use crate::array::{steering_vector, AngleDeg, UlaGeometry};
use crate::beamspace::TransmitModel;
use crate::error::{Error, Result};
use crate::linalg::{general_eigenvalues, hermitian_eigen_desc, kron, least_squares, ComplexMat};

use super::SubspaceDecomp;

const WEAK_BEAM: f64 = 1e-6;

/// Unwrapped `Ω(θ) = arg(c₂ᴴa / c₁ᴴa)` and `A(θ) = |c₂ᴴa / c₁ᴴa|` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLookupTable {
    grid_deg: Vec<f64>,
    omega: Vec<f64>,
    amplitude: Vec<f64>,
}

impl PhaseLookupTable {
    pub fn grid_deg(&self) -> &[f64] {
        &self.grid_deg
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    fn range(&self) -> (f64, f64) {
        let (a, b) = (self.omega[0], self.omega[self.omega.len() - 1]);
        (a.min(b), a.max(b))
    }

    /// Interpolated `Ω` at an angle inside the grid.
    pub fn phase_at(&self, theta_deg: f64) -> Option<f64> {
        interp(&self.grid_deg, &self.omega, theta_deg)
    }

    /// All grid-range angles whose `Ω` is congruent to `phase` modulo 2π.
    pub fn invert(&self, phase: f64) -> Vec<f64> {
        let (lo, hi) = self.range();
        let k_min = ((lo - phase) / (2.0 * PI)).ceil() as i64;
        let k_max = ((hi - phase) / (2.0 * PI)).floor() as i64;
        let increasing = self.omega[self.omega.len() - 1] > self.omega[0];
        (k_min..=k_max)
            .filter_map(|k| {
                let target = phase + 2.0 * PI * k as f64;
                if increasing {
                    interp(&self.omega, &self.grid_deg, target)
                } else {
                    let om: Vec<f64> = self.omega.iter().rev().copied().collect();
                    let gr: Vec<f64> = self.grid_deg.iter().rev().copied().collect();
                    interp(&om, &gr, target)
                }
            })
            .collect()
    }

    /// Grid end whose phase is nearest to `phase` on the circle.
    fn nearest_edge(&self, phase: f64) -> f64 {
        let dist = |om: f64| (num_complex::Complex64::from_polar(1.0, om - phase)).arg().abs();
        let last = self.omega.len() - 1;
        if dist(self.omega[0]) <= dist(self.omega[last]) {
            self.grid_deg[0]
        } else {
            self.grid_deg[last]
        }
    }
}

/// Linear interpolation on strictly increasing `xs`.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let i = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    Some(ys[i - 1] + t * (ys[i] - ys[i - 1]))
}

pub fn build_phase_lut(model: &TransmitModel, tx: &UlaGeometry, grid: &[AngleDeg]) -> Result<PhaseLookupTable> {
    if model.num_beams() != 2 {
        return Err(Error::InvalidArgument(format!(
            "phase lookup needs two beams, model has {}",
            model.num_beams()
        )));
    }
    if grid.len() < 2 {
        return Err(Error::InvalidArgument(
            "phase lookup grid needs at least two points".into(),
        ));
    }
    let mut omega = Vec::with_capacity(grid.len());
    let mut amplitude = Vec::with_capacity(grid.len());
    for &theta in grid {
        let r = model.beam_response(tx, theta)?;
        if r[0].norm() < WEAK_BEAM {
            return Err(Error::WeakBeam {
                theta_deg: theta.degrees(),
                magnitude: r[0].norm(),
            });
        }
        let ratio = r[1] / r[0];
        let raw = ratio.arg();
        let value = match omega.last() {
            None => raw,
            Some(&prev) => prev + num_complex::Complex64::from_polar(1.0, raw - prev).arg(),
        };
        omega.push(value);
        amplitude.push(ratio.norm());
    }
    let grid_deg: Vec<f64> = grid.iter().map(|t| t.degrees()).collect();
    // Anchor the branch so the sector centre lies in (−π, π].
    let centre = 0.5 * (grid_deg[0] + grid_deg[grid_deg.len() - 1]);
    let mid = grid_deg
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - centre).abs().total_cmp(&(b.1 - centre).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let shift = 2.0 * PI * ((omega[mid] - PI) / (2.0 * PI)).ceil();
    for w in omega.iter_mut() {
        *w -= shift;
    }
    let steps: Vec<f64> = omega.windows(2).map(|w| w[1] - w[0]).collect();
    let increasing = steps.iter().all(|&d| d > 0.0);
    let decreasing = steps.iter().all(|&d| d < 0.0);
    if !(increasing || decreasing) {
        let sign = steps.iter().sum::<f64>().signum();
        let worst = steps.iter().map(|&d| -d * sign).fold(0.0, f64::max);
        return Err(Error::NonMonotonePhase(worst));
    }
    Ok(PhaseLookupTable {
        grid_deg,
        omega,
        amplitude,
    })
}

/// Row split of the signal subspace.
#[derive(Debug, Clone, Copy)]
pub enum Partition<'a> {
    /// First `N` rows against last `N` rows; phases inverted through `lut`.
    TbHalves {
        lut: &'a PhaseLookupTable,
        model: &'a TransmitModel,
        tx: &'a UlaGeometry,
        rx: &'a UlaGeometry,
    },
    /// First `(M−1)N` rows against last `(M−1)N` rows of the `MN` array.
    MimoOverlap {
        rx_elements: usize,
        tx_spacing_wavelengths: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EspritOptions {
    /// Total least squares instead of least squares.
    pub tls: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EspritOutput {
    /// Ascending, degrees.
    pub angles: Vec<f64>,
    /// At least one phase fell outside the invertible range and was clamped.
    pub clamped: bool,
}

fn rotation_operator(e1: &ComplexMat, e2: &ComplexMat, tls: bool) -> Result<ComplexMat> {
    if !tls {
        return least_squares(e1, e2);
    }
    let l = e1.ncols();
    let mut stacked = ComplexMat::zeros(e1.nrows(), 2 * l);
    stacked.columns_mut(0, l).copy_from(e1);
    stacked.columns_mut(l, l).copy_from(e2);
    let (_, u) = hermitian_eigen_desc(&(stacked.adjoint() * &stacked))?;
    let u12 = u.view((0, l), (l, l));
    let u22 = u.view((l, l), (l, l));
    let inv = u22
        .into_owned()
        .try_inverse()
        .ok_or_else(|| Error::Eigen("TLS partition block is singular".into()))?;
    Ok(-(u12 * inv))
}

pub fn esprit_estimate(
    decomp: &SubspaceDecomp,
    partition: &Partition<'_>,
    opts: EspritOptions,
) -> Result<EspritOutput> {
    let es = &decomp.signal_basis;
    let dim = es.nrows();
    let (rows, shift) = match partition {
        Partition::TbHalves { rx, .. } => {
            let n = rx.num_elements();
            if dim != 2 * n {
                return Err(Error::DimensionMismatch {
                    context: "esprit_estimate",
                    expected: format!("2N = {} rows", 2 * n),
                    actual: format!("{dim}"),
                });
            }
            (n, n)
        }
        Partition::MimoOverlap { rx_elements, .. } => {
            if *rx_elements == 0 || !dim.is_multiple_of(*rx_elements) || dim <= *rx_elements {
                return Err(Error::DimensionMismatch {
                    context: "esprit_estimate",
                    expected: format!("a multiple of N = {rx_elements} with M ≥ 2"),
                    actual: format!("{dim} rows"),
                });
            }
            (dim - rx_elements, *rx_elements)
        }
    };
    let e1 = es.rows(0, rows).into_owned();
    let e2 = es.rows(shift, rows).into_owned();
    let phi = rotation_operator(&e1, &e2, opts.tls)?;
    let eigs = general_eigenvalues(&phi)?;

    let mut clamped = false;
    let mut angles = Vec::with_capacity(eigs.len());
    for z in eigs {
        let phase = z.arg();
        match partition {
            Partition::MimoOverlap {
                tx_spacing_wavelengths, ..
            } => {
                let x = -phase / (2.0 * PI * tx_spacing_wavelengths);
                if x.abs() > 1.0 {
                    clamped = true;
                }
                angles.push(x.clamp(-1.0, 1.0).asin().to_degrees());
            }
            Partition::TbHalves { lut, model, tx, rx } => {
                let candidates = lut.invert(phase);
                let theta = match candidates.len() {
                    0 => {
                        clamped = true;
                        lut.nearest_edge(phase)
                    }
                    1 => candidates[0],
                    _ => {
                        let es_h = es.adjoint();
                        let mut best = (f64::NEG_INFINITY, candidates[0]);
                        for &c in &candidates {
                            let t = AngleDeg::clamped(c);
                            let v = kron(&model.beam_response(tx, t)?, &steering_vector(*rx, t));
                            let score = (&es_h * &v).norm_squared() / v.norm_squared();
                            if score > best.0 {
                                best = (score, c);
                            }
                        }
                        best.1
                    }
                };
                angles.push(theta);
            }
        }
    }
    angles.sort_by(f64::total_cmp);
    Ok(EspritOutput { angles, clamped })
}
