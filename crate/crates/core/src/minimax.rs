//! Minimax beamspace design with out-of-sector power constraints.
//!
//! Finds `C` minimising `max_i ‖Cᴴa(θ_i) − d(θ_i)‖` over the in-sector grid
//! subject to `‖Cᴴa(θ_j)‖ ≤ γ` over the out-of-sector grid. The problem is
//! cast in epigraph form over `(Re C, Im C, t)` and handed to [`crate::socp`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::array::{steering_vector, AngleDeg, UlaGeometry};
use crate::beamspace::{BeamspaceMatrix, DesignMethod};
use crate::design::Sector;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMat, ComplexVec};
use crate::socp::{SocConstraint, SocProblem, SolverSettings};

/// Desired beam responses `d_k(θ) = G · exp(−j2π p_k sin θ)`, where `p_k` is
/// the phase centre of beam `k` in wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTargetFn {
    pub gain: f64,
    pub phase_centers: Vec<f64>,
}

impl PhaseTargetFn {
    pub fn new(gain: f64, phase_centers: Vec<f64>) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "target gain must be positive, got {gain}"
            )));
        }
        if phase_centers.is_empty() || phase_centers.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(
                "phase centres must be finite and non-empty".into(),
            ));
        }
        Ok(Self { gain, phase_centers })
    }

    /// Two beams whose phase centres are `N` receive half-wavelengths apart
    /// and symmetric about the middle of the transmit aperture, so the
    /// virtual array has `2N` contiguous elements.
    pub fn centered(tx: &UlaGeometry, rx_elements: usize, gain: f64) -> Result<Self> {
        let d = tx.spacing_wavelengths();
        let mid = (tx.num_elements() as f64 - 1.0) * d / 2.0;
        let half = rx_elements as f64 * 0.25;
        Self::new(gain, vec![mid - half, mid + half])
    }

    /// `G · [1, exp(−j2πN sin θ)]`: reference at the first element and a
    /// separation of `N` wavelengths.
    pub fn literal(rx_elements: usize, gain: f64) -> Result<Self> {
        Self::new(gain, vec![0.0, rx_elements as f64])
    }

    pub fn num_beams(&self) -> usize {
        self.phase_centers.len()
    }

    pub fn evaluate(&self, theta: AngleDeg) -> ComplexVec {
        let s = theta.radians().sin();
        ComplexVec::from_iterator(
            self.phase_centers.len(),
            self.phase_centers
                .iter()
                .map(|p| Complex64::from_polar(self.gain, -2.0 * PI * p * s)),
        )
    }

    /// Target phase of `d_2/d_1`, unwrapped (linear in `sin θ`).
    pub fn ratio_phase(&self, theta: AngleDeg) -> f64 {
        assert!(self.num_beams() >= 2, "ratio_phase needs two beams");
        -2.0 * PI * (self.phase_centers[1] - self.phase_centers[0]) * theta.radians().sin()
    }
}

#[derive(Debug, Clone)]
pub struct MinimaxSolution {
    /// Solver output before column normalisation.
    pub raw: ComplexMat,
    /// `ε*`, the worst in-sector deviation of `raw`.
    pub objective: f64,
    /// Bound on `ε − ε*` at termination.
    pub gap: f64,
    pub newton_steps: usize,
    /// `ε* − ‖rawᴴ a(θ_i) − d(θ_i)‖` per in-sector point.
    pub in_slacks: Vec<f64>,
    /// `γ − ‖rawᴴ a(θ_j)‖` per out-of-sector point.
    pub out_slacks: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MinimaxDesign {
    /// Unit-norm columns, tagged `Minimax`.
    pub matrix: BeamspaceMatrix,
    pub solution: MinimaxSolution,
    pub gamma: f64,
    /// Mean in-sector beam magnitude `|c_kᴴ a(θ)|` of the normalised design.
    pub achieved_gain: f64,
}

fn variable_count(m: usize, k: usize) -> usize {
    2 * m * k + 1
}

/// Rows `[Re, Im]` of `Cᴴa` per beam, as a linear map of `(Re C, Im C)`.
fn response_rows(a: &ComplexVec, k: usize, n: usize) -> DMatrix<f64> {
    let m = a.len();
    let mut rows = DMatrix::zeros(2 * k, n);
    for beam in 0..k {
        for (el, z) in a.iter().enumerate() {
            let re = beam * m + el;
            let im = m * k + beam * m + el;
            // conj(C) a = (Cr − jCi)(ar + j ai)
            rows[(2 * beam, re)] = z.re;
            rows[(2 * beam, im)] = z.im;
            rows[(2 * beam + 1, re)] = z.im;
            rows[(2 * beam + 1, im)] = -z.re;
        }
    }
    rows
}

/// Solves the minimax problem on explicit grids with explicit targets.
pub fn solve_minimax(
    tx: &UlaGeometry,
    in_grid: &[AngleDeg],
    targets: &[ComplexVec],
    out_grid: &[AngleDeg],
    gamma: f64,
) -> Result<MinimaxSolution> {
    if in_grid.is_empty() || in_grid.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            context: "solve_minimax",
            expected: format!("{} targets (one per in-sector angle, at least one)", in_grid.len()),
            actual: format!("{}", targets.len()),
        });
    }
    if !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be finite, got {gamma}")));
    }
    let k = targets[0].len();
    let m = tx.num_elements();
    if k == 0 || k > m || targets.iter().any(|d| d.len() != k) {
        return Err(Error::DimensionMismatch {
            context: "solve_minimax",
            expected: format!("targets of equal length in 1..={m}"),
            actual: format!("lengths {:?}", targets.iter().map(|d| d.len()).collect::<Vec<_>>()),
        });
    }
    let n = variable_count(m, k);
    let mut t_dir = DVector::zeros(n);
    t_dir[n - 1] = 1.0;

    let mut constraints = Vec::with_capacity(in_grid.len() + out_grid.len());
    for (theta, d) in in_grid.iter().zip(targets) {
        let b = DVector::from_iterator(2 * k, d.iter().flat_map(|z| [-z.re, -z.im]));
        constraints.push(SocConstraint {
            a: response_rows(&steering_vector(tx, *theta), k, n),
            b,
            g: t_dir.clone(),
            h: 0.0,
        });
    }
    for theta in out_grid {
        constraints.push(SocConstraint {
            a: response_rows(&steering_vector(tx, *theta), k, n),
            b: DVector::zeros(2 * k),
            g: DVector::zeros(n),
            h: gamma,
        });
    }
    let problem = SocProblem {
        objective: t_dir,
        constraints,
    };
    // C = 0 with a loose epigraph bound is strictly feasible whenever γ > 0.
    let mut start = DVector::zeros(n);
    start[n - 1] = targets.iter().map(|d| d.norm()).fold(0.0, f64::max) + 1.0;
    let sol = problem.solve(Some(start), &SolverSettings::default())?;

    let violation = sol.margins.iter().map(|&s| -s).fold(0.0, f64::max);
    if violation > 1e-6 {
        return Err(Error::SolverNotConverged {
            iterations: sol.newton_steps,
            gap: sol.gap,
            residual: violation,
        });
    }
    let raw = ComplexMat::from_fn(m, k, |el, beam| {
        Complex64::new(sol.x[beam * m + el], sol.x[m * k + beam * m + el])
    });
    let objective = sol.x[n - 1];
    let (in_m, out_m) = sol.margins.split_at(in_grid.len());
    Ok(MinimaxSolution {
        raw,
        objective,
        gap: sol.gap,
        newton_steps: sol.newton_steps,
        in_slacks: in_m.to_vec(),
        out_slacks: out_m.to_vec(),
    })
}

/// Designs `C` over a sector and scales each column to unit norm.
pub fn minimax_design(tx: &UlaGeometry, sector: &Sector, target: &PhaseTargetFn, gamma: f64) -> Result<MinimaxDesign> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::Infeasible(format!(
            "gamma = {gamma}: out-of-sector constraints admit no strictly feasible C"
        )));
    }
    let targets: Vec<ComplexVec> = sector.in_grid().iter().map(|&t| target.evaluate(t)).collect();
    let solution = solve_minimax(tx, sector.in_grid(), &targets, sector.out_grid(), gamma)?;
    let mut entries = solution.raw.clone();
    for mut col in entries.column_iter_mut() {
        let norm = col.norm();
        if norm < 1e-12 {
            return Err(Error::Infeasible("minimax solution has a zero column".into()));
        }
        col.unscale_mut(norm);
    }
    let matrix = BeamspaceMatrix::new(entries, DesignMethod::Minimax)?;
    let mut total = 0.0;
    for &theta in sector.in_grid() {
        total += matrix
            .project(&steering_vector(tx, theta))?
            .iter()
            .map(|z| z.norm())
            .sum::<f64>();
    }
    let achieved_gain = total / (sector.in_grid().len() * matrix.num_beams()) as f64;
    Ok(MinimaxDesign {
        matrix,
        solution,
        gamma,
        achieved_gain,
    })
}

/// Worst wrapped deviation of `arg(c₂ᴴa / c₁ᴴa)` from the target ratio phase.
pub fn phase_error(c: &BeamspaceMatrix, tx: &UlaGeometry, target: &PhaseTargetFn, grid: &[AngleDeg]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &theta in grid {
        let r = c.project(&steering_vector(tx, theta))?;
        let err = (r[1] / r[0]).arg() - target.ratio_phase(theta);
        let wrapped = Complex64::from_polar(1.0, err).arg();
        worst = worst.max(wrapped.abs());
    }
    Ok(worst)
}
