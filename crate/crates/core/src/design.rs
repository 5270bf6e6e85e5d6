//! Sector definitions, the sector correlation matrix, spheroidal and
//! fixed-baseline beamspace matrices, and beampattern evaluation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::array::{steering_vector, AngleDeg, UlaGeometry};
use crate::beamspace::{BeamspaceMatrix, DesignMethod, TransmitModel};
use crate::error::{Error, Result};
use crate::linalg::{c64, hermitian_defect, hermitian_eigen_desc, orthonormality_defect, ComplexMat};

/// Evenly spaced angles from `lo` to `hi` inclusive, with spacing no larger
/// than `step`.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<AngleDeg>> {
    if step.is_nan() || step <= 0.0 || hi.is_nan() || lo.is_nan() || hi < lo {
        return Err(Error::InvalidSector(format!("bad grid [{lo}, {hi}] step {step}")));
    }
    let n = ((hi - lo) / step - 1e-9).ceil().max(0.0) as usize;
    if n == 0 {
        return Ok(vec![AngleDeg::new(lo)?]);
    }
    (0..=n)
        .map(|i| AngleDeg::new(lo + (hi - lo) * i as f64 / n as f64))
        .collect()
}

/// The angular sector of interest `Θ` and the out-of-sector set `Θ̄`, each
/// sampled on a sorted grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    theta_min: AngleDeg,
    theta_max: AngleDeg,
    in_grid: Vec<AngleDeg>,
    out_grid: Vec<AngleDeg>,
}

impl Sector {
    pub const DEFAULT_IN_STEP: f64 = 0.1;
    pub const DEFAULT_OUT_STEP: f64 = 0.5;
    pub const DEFAULT_GUARD: f64 = 1.0;

    pub fn new(
        theta_min: AngleDeg,
        theta_max: AngleDeg,
        in_grid: Vec<AngleDeg>,
        out_grid: Vec<AngleDeg>,
    ) -> Result<Self> {
        if theta_min.degrees() >= theta_max.degrees() {
            return Err(Error::InvalidSector(format!(
                "theta_min {} must be below theta_max {}",
                theta_min.degrees(),
                theta_max.degrees()
            )));
        }
        if in_grid.is_empty() || out_grid.is_empty() {
            return Err(Error::InvalidSector("grids must be non-empty".into()));
        }
        for (name, grid) in [("in_grid", &in_grid), ("out_grid", &out_grid)] {
            if grid.windows(2).any(|w| w[0].degrees() >= w[1].degrees()) {
                return Err(Error::InvalidSector(format!("{name} must be strictly increasing")));
            }
        }
        let inside = |t: &AngleDeg| t.degrees() >= theta_min.degrees() && t.degrees() <= theta_max.degrees();
        if !in_grid.iter().all(inside) {
            return Err(Error::InvalidSector("in_grid leaves [theta_min, theta_max]".into()));
        }
        if in_grid.first().map(|t| t.degrees()) != Some(theta_min.degrees())
            || in_grid.last().map(|t| t.degrees()) != Some(theta_max.degrees())
        {
            return Err(Error::InvalidSector("in_grid must span [theta_min, theta_max]".into()));
        }
        if out_grid.iter().any(inside) {
            return Err(Error::InvalidSector("out_grid overlaps the sector".into()));
        }
        Ok(Self {
            theta_min,
            theta_max,
            in_grid,
            out_grid,
        })
    }

    /// Builds uniform grids: `in_step` across `[lo, hi]` and `out_step` across
    /// each out-of-sector interval.
    pub fn from_regions(lo: f64, hi: f64, in_step: f64, out_regions: &[(f64, f64)], out_step: f64) -> Result<Self> {
        let in_grid = uniform_grid(lo, hi, in_step)?;
        let mut out_grid = Vec::new();
        let mut regions = out_regions.to_vec();
        regions.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (a, b) in regions {
            for t in uniform_grid(a, b, out_step)? {
                if out_grid.last().is_none_or(|p: &AngleDeg| p.degrees() < t.degrees()) {
                    out_grid.push(t);
                }
            }
        }
        Self::new(AngleDeg::new(lo)?, AngleDeg::new(hi)?, in_grid, out_grid)
    }

    /// `[-90°, lo − guard] ∪ [hi + guard, 90°]`, dropping empty pieces.
    pub fn complement_regions(lo: f64, hi: f64, guard: f64) -> Vec<(f64, f64)> {
        let mut regions = Vec::new();
        if lo - guard > -90.0 {
            regions.push((-90.0, lo - guard));
        }
        if hi + guard < 90.0 {
            regions.push((hi + guard, 90.0));
        }
        regions
    }

    pub fn theta_min(&self) -> AngleDeg {
        self.theta_min
    }

    pub fn theta_max(&self) -> AngleDeg {
        self.theta_max
    }

    pub fn in_grid(&self) -> &[AngleDeg] {
        &self.in_grid
    }

    pub fn out_grid(&self) -> &[AngleDeg] {
        &self.out_grid
    }

    /// Sector width in radians.
    pub fn width_radians(&self) -> f64 {
        self.theta_max.radians() - self.theta_min.radians()
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.theta_min.degrees() && theta <= self.theta_max.degrees()
    }
}

/// Refinement controls for the composite Simpson rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRule {
    pub initial_intervals: usize,
    pub tolerance: f64,
    pub max_doublings: usize,
}

impl QuadratureRule {
    pub fn for_sector(sector: &Sector) -> Self {
        Self {
            initial_intervals: sector.in_grid.len().saturating_sub(1).max(2),
            tolerance: 1e-8,
            max_doublings: 12,
        }
    }
}

/// Outcome of the quadrature: the rule used and where it stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureReport {
    pub rule: QuadratureRule,
    pub intervals: usize,
    pub relative_change: f64,
}

/// `A = ∫_Θ a(θ) aᴴ(θ) dθ` over the sector, θ in radians.
#[derive(Debug, Clone)]
pub struct SectorCorrelation {
    matrix: ComplexMat,
    sector: Sector,
    quadrature: QuadratureReport,
}

impl SectorCorrelation {
    pub fn matrix(&self) -> &ComplexMat {
        &self.matrix
    }

    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    pub fn quadrature(&self) -> QuadratureReport {
        self.quadrature
    }
}

fn simpson_correlation(tx: &UlaGeometry, lo: f64, hi: f64, intervals: usize) -> ComplexMat {
    let m = tx.num_elements();
    let h = (hi - lo) / intervals as f64;
    let mut acc = ComplexMat::zeros(m, m);
    for i in 0..=intervals {
        let weight = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let theta = AngleDeg::clamped((lo + h * i as f64).to_degrees());
        let a = steering_vector(tx, theta);
        acc.gerc(c64(weight * h / 3.0, 0.0), &a, &a, c64(1.0, 0.0));
    }
    acc
}

/// Sector correlation with the default refinement rule.
pub fn sector_correlation(tx: &UlaGeometry, sector: &Sector) -> Result<SectorCorrelation> {
    sector_correlation_with(tx, sector, QuadratureRule::for_sector(sector))
}

/// Composite Simpson quadrature, doubling the interval count until the
/// Frobenius-relative change drops below `rule.tolerance`.
pub fn sector_correlation_with(tx: &UlaGeometry, sector: &Sector, rule: QuadratureRule) -> Result<SectorCorrelation> {
    let lo = sector.theta_min.radians();
    let hi = sector.theta_max.radians();
    let mut intervals = rule.initial_intervals.max(2);
    intervals += intervals % 2;
    let mut current = simpson_correlation(tx, lo, hi, intervals);
    let mut change = f64::INFINITY;
    for _ in 0..rule.max_doublings {
        let refined = simpson_correlation(tx, lo, hi, intervals * 2);
        change = (&refined - &current).norm() / refined.norm().max(f64::MIN_POSITIVE);
        intervals *= 2;
        current = refined;
        if change < rule.tolerance {
            return Ok(SectorCorrelation {
                matrix: crate::linalg::hermitian_part(&current),
                sector: sector.clone(),
                quadrature: QuadratureReport {
                    rule,
                    intervals,
                    relative_change: change,
                },
            });
        }
    }
    Err(Error::QuadratureNotConverged {
        intervals,
        change,
        suggested: intervals * 2,
    })
}

/// Beamspace matrix from the `K` principal eigenvectors of `A`, with the
/// eigenvalues of `A` in descending order.
#[derive(Debug, Clone)]
pub struct SpheroidalDesign {
    pub matrix: BeamspaceMatrix,
    pub eigenvalues: Vec<f64>,
}

/// Rotates `v` so that its largest-magnitude entry (first one on near-ties)
/// is real and positive.
fn fix_phase(v: &mut [Complex64]) {
    let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return;
    }
    let idx = v.iter().position(|z| z.norm() >= peak * (1.0 - 1e-9)).unwrap_or(0);
    let rot = v[idx].conj() / v[idx].norm();
    for z in v.iter_mut() {
        *z *= rot;
    }
}

pub fn spheroidal_design(corr: &SectorCorrelation, k: usize) -> Result<SpheroidalDesign> {
    let m = corr.matrix.nrows();
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!("need 1 <= K <= M = {m}, got K = {k}")));
    }
    let (values, vectors) = hermitian_eigen_desc(&corr.matrix)?;
    let mut entries = ComplexMat::zeros(m, k);
    for col in 0..k {
        let mut v: Vec<Complex64> = vectors.column(col).iter().copied().collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= norm;
        }
        fix_phase(&mut v);
        for (row, z) in v.into_iter().enumerate() {
            entries[(row, col)] = z;
        }
    }
    Ok(SpheroidalDesign {
        matrix: BeamspaceMatrix::new(entries, DesignMethod::Spheroidal)?,
        eigenvalues: values,
    })
}

/// `Q = [[√½, √½], [√½, −√½]]`, the default `K = 2` rotation.
pub fn default_rotation() -> ComplexMat {
    let s = 0.5f64.sqrt();
    ComplexMat::from_row_slice(2, 2, &[c64(s, 0.0), c64(s, 0.0), c64(s, 0.0), c64(-s, 0.0)])
}

/// `C̃ = C Q` for a unitary `K × K` matrix `Q`.
pub fn rotate_for_uniformity(c: &BeamspaceMatrix, q: &ComplexMat) -> Result<BeamspaceMatrix> {
    let k = c.num_beams();
    if q.shape() != (k, k) {
        return Err(Error::DimensionMismatch {
            context: "rotate_for_uniformity",
            expected: format!("{k}x{k}"),
            actual: format!("{}x{}", q.nrows(), q.ncols()),
        });
    }
    let defect = orthonormality_defect(q);
    if defect > 1e-10 {
        return Err(Error::NotUnitary(defect));
    }
    let method = match c.method() {
        DesignMethod::Spheroidal => DesignMethod::SpheroidalRotated,
        _ => DesignMethod::Custom,
    };
    BeamspaceMatrix::new(c.entries() * q, method)
}

/// Fixed configurations used as comparison baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// `C = I_M`: traditional MIMO radar.
    Identity,
    /// Two omni subapertures λ/2 apart (antennas 1 and 2).
    TsHalf,
    /// Two omni subapertures `N·λ/2` apart, `N` the receive element count.
    TsNHalf { rx_elements: usize },
    /// Two fully overlapped `(M−1)`-element subarrays sharing weights `w`.
    Tap,
}

fn selection(m: usize, rows: [usize; 2], method: DesignMethod) -> Result<BeamspaceMatrix> {
    let mut e = ComplexMat::zeros(m, 2);
    e[(rows[0], 0)] = c64(1.0, 0.0);
    e[(rows[1], 1)] = c64(1.0, 0.0);
    BeamspaceMatrix::new(e, method)
}

/// Baseline beamspace matrix. `ts-N-half` is only realisable as a selection
/// when the transmit grid reaches `N` spacings; see [`baseline_model`].
pub fn baseline_matrix(kind: BaselineKind, tx: &UlaGeometry, w: Option<&[Complex64]>) -> Result<BeamspaceMatrix> {
    let m = tx.num_elements();
    match kind {
        BaselineKind::Identity => Ok(BeamspaceMatrix::identity(m)),
        BaselineKind::TsHalf => {
            if m < 2 {
                return Err(Error::InvalidArgument("ts-half needs at least two antennas".into()));
            }
            selection(m, [0, 1], DesignMethod::TsHalf)
        }
        BaselineKind::TsNHalf { rx_elements } => {
            let target = rx_elements as f64 * 0.5 / tx.spacing_wavelengths();
            let offset = target.round() as usize;
            if (target - offset as f64).abs() > 1e-12 || offset + 1 > m || offset == 0 {
                return Err(Error::InvalidArgument(format!(
                    "ts-N-half separation of {rx_elements}·λ/2 is not on the {m}-element transmit grid; \
                     use the subaperture model"
                )));
            }
            selection(m, [0, offset], DesignMethod::TsNHalf)
        }
        BaselineKind::Tap => {
            let w = w.ok_or_else(|| Error::InvalidArgument("tap requires a weight vector".into()))?;
            if w.len() + 1 != m {
                return Err(Error::DimensionMismatch {
                    context: "baseline_matrix(tap)",
                    expected: format!("{} weights", m - 1),
                    actual: format!("{} weights", w.len()),
                });
            }
            let mut e = ComplexMat::zeros(m, 2);
            for (i, &wi) in w.iter().enumerate() {
                e[(i, 0)] = wi;
                e[(i + 1, 1)] = wi;
            }
            BeamspaceMatrix::new(e, DesignMethod::Tap)
        }
    }
}

/// Like [`baseline_matrix`], but falls back to the two-subaperture model
/// with separation `N·λ/2` when `ts-N-half` is off the element grid.
pub fn baseline_model(kind: BaselineKind, tx: &UlaGeometry, w: Option<&[Complex64]>) -> Result<TransmitModel> {
    match (kind, baseline_matrix(kind, tx, w)) {
        (_, Ok(c)) => Ok(TransmitModel::Beamspace(c)),
        (BaselineKind::TsNHalf { rx_elements }, Err(_)) => Ok(TransmitModel::Subaperture {
            separation_wavelengths: rx_elements as f64 * 0.5,
        }),
        (_, Err(e)) => Err(e),
    }
}

/// Weights for the `(M−1)`-element TAP subarray: the first column of the
/// rotated two-beam spheroidal design of that subarray, i.e. the normalised
/// sum of its two principal eigenvectors.
pub fn tap_weights(tx: &UlaGeometry, sector: &Sector) -> Result<Vec<Complex64>> {
    if tx.num_elements() < 3 {
        return Err(Error::InvalidArgument("tap needs at least three antennas".into()));
    }
    let sub = UlaGeometry::new(tx.num_elements() - 1, tx.spacing_wavelengths())?;
    let corr = sector_correlation(&sub, sector)?;
    let design = spheroidal_design(&corr, 2)?;
    let rotated = rotate_for_uniformity(&design.matrix, &default_rotation())?;
    Ok(rotated.column(0).iter().copied().collect())
}

/// Per-waveform powers `|c_kᴴ a(θ)|²` and their sum `H(θ)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Beampattern {
    pub grid: Vec<AngleDeg>,
    /// `per_beam[(i, k)]` is the power of beam `k` at `grid[i]`.
    pub per_beam: DMatrix<f64>,
    pub total: Vec<f64>,
}

impl Beampattern {
    pub fn beam(&self, k: usize) -> Vec<f64> {
        self.per_beam.column(k).iter().copied().collect()
    }
}

pub fn beampattern(c: &BeamspaceMatrix, tx: &UlaGeometry, grid: &[AngleDeg]) -> Result<Beampattern> {
    model_beampattern(&TransmitModel::Beamspace(c.clone()), tx, grid)
}

pub fn model_beampattern(model: &TransmitModel, tx: &UlaGeometry, grid: &[AngleDeg]) -> Result<Beampattern> {
    let k = model.num_beams();
    let mut per_beam = DMatrix::zeros(grid.len(), k);
    let mut total = Vec::with_capacity(grid.len());
    for (i, &theta) in grid.iter().enumerate() {
        let r = model.beam_response(tx, theta)?;
        let mut sum = 0.0;
        for j in 0..k {
            let p = r[j].norm_sqr();
            per_beam[(i, j)] = p;
            sum += p;
        }
        total.push(sum);
    }
    Ok(Beampattern {
        grid: grid.to_vec(),
        per_beam,
        total,
    })
}

/// Energy radiated by `c` over the sector relative to `2π‖c‖²`:
/// `Γ = cᴴ A c / (2π cᴴ c)`.
pub fn energy_ratio(corr: &SectorCorrelation, c: &[Complex64]) -> f64 {
    let v = crate::linalg::ComplexVec::from_column_slice(c);
    let num = (v.adjoint() * corr.matrix() * &v)[(0, 0)].re;
    num / (2.0 * PI * v.norm_squared())
}

/// Diagnostic for the Vandermonde energy identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyIdentity {
    /// `∫_{−π/2}^{π/2} |cᴴ a(θ)|² dθ / (2π‖c‖²)`; not 1 in general.
    pub theta_space_ratio: f64,
    /// `∫_{−1}^{1} |cᴴ a(u)|² du / (2‖c‖²)`; 1 for half-wavelength ULAs.
    pub sine_space_ratio: f64,
}

pub fn energy_identity(c: &[Complex64], tx: &UlaGeometry) -> Result<EnergyIdentity> {
    if c.len() != tx.num_elements() {
        return Err(Error::DimensionMismatch {
            context: "energy_identity",
            expected: format!("length {}", tx.num_elements()),
            actual: format!("length {}", c.len()),
        });
    }
    let norm2: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    let gain = |u: f64| -> f64 {
        let mut acc = c64(0.0, 0.0);
        for (m, cm) in c.iter().enumerate() {
            acc += cm.conj() * Complex64::from_polar(1.0, -2.0 * PI * tx.spacing_wavelengths() * m as f64 * u);
        }
        acc.norm_sqr()
    };
    let simpson = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize| -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + h * i as f64);
        }
        s * h / 3.0
    };
    let n = 8 * (tx.num_elements() + 16);
    let theta = simpson(&|t: f64| gain(t.sin()), -PI / 2.0, PI / 2.0, 64 * n);
    let sine = simpson(&gain, -1.0, 1.0, n);
    Ok(EnergyIdentity {
        theta_space_ratio: theta / (2.0 * PI * norm2),
        sine_space_ratio: sine / (2.0 * norm2),
    })
}

/// Coefficient of variation (population std / mean) of a sample.
pub fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Hermitian and PSD checks on a sector correlation matrix.
pub fn correlation_defects(corr: &SectorCorrelation) -> Result<(f64, f64)> {
    let (values, _) = hermitian_eigen_desc(corr.matrix())?;
    Ok((hermitian_defect(corr.matrix()), *values.last().unwrap_or(&0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn paper_sector() -> Sector {
        Sector::from_regions(-5.0, 5.0, 0.1, &[(-90.0, -15.0), (15.0, 90.0)], 0.5).unwrap()
    }

    fn m10() -> UlaGeometry {
        UlaGeometry::half_wavelength(10).unwrap()
    }

    #[test]
    fn sector_validation() {
        let g = uniform_grid(-5.0, 5.0, 1.0).unwrap();
        let out = uniform_grid(10.0, 20.0, 1.0).unwrap();
        assert!(Sector::new(
            AngleDeg::new(5.0).unwrap(),
            AngleDeg::new(-5.0).unwrap(),
            g.clone(),
            out.clone()
        )
        .is_err());
        let overlapping = uniform_grid(4.0, 20.0, 1.0).unwrap();
        assert!(Sector::new(
            AngleDeg::new(-5.0).unwrap(),
            AngleDeg::new(5.0).unwrap(),
            g.clone(),
            overlapping
        )
        .is_err());
        assert!(Sector::new(AngleDeg::new(-5.0).unwrap(), AngleDeg::new(5.0).unwrap(), g, out).is_ok());
        assert_eq!(
            Sector::complement_regions(-5.0, 5.0, 10.0),
            vec![(-90.0, -15.0), (15.0, 90.0)]
        );
    }

    #[test]
    fn grid_spacing_respected() {
        let g = uniform_grid(-5.0, 5.0, 0.1).unwrap();
        assert_eq!(g.len(), 101);
        assert_abs_diff_eq!(g[50].degrees(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_equals_m_times_width() {
        let corr = sector_correlation(&m10(), &paper_sector()).unwrap();
        let trace: Complex64 = corr.matrix().diagonal().iter().sum();
        assert_abs_diff_eq!(trace.re, 10.0 * 10f64.to_radians(), epsilon = 1e-10);
        assert_abs_diff_eq!(trace.re, 1.74533, epsilon = 1e-5);
    }

    #[test]
    fn symmetric_sector_gives_real_matrix() {
        let corr = sector_correlation(&m10(), &paper_sector()).unwrap();
        assert!(corr.matrix().iter().all(|z| z.im.abs() < 1e-12));
        let (herm, min_eig) = correlation_defects(&corr).unwrap();
        assert!(herm < 1e-12);
        assert!(min_eig >= -1e-10);
    }

    #[test]
    fn full_space_two_element_entry_matches_bessel_oracle() {
        // Oracle: ∫_{-π/2}^{π/2} e^{jπ sinθ} dθ by a 200 000-panel trapezoid rule.
        let n = 200_000;
        let h = PI / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let t = -PI / 2.0 + h * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * (PI * t.sin()).cos();
        }
        let oracle = acc * h;
        assert_abs_diff_eq!(oracle, -0.95580, epsilon = 1e-4);
        let sector = Sector::new(
            AngleDeg::new(-90.0).unwrap(),
            AngleDeg::new(90.0).unwrap(),
            uniform_grid(-90.0, 90.0, 1.0).unwrap(),
            vec![],
        );
        // The full space leaves no out-of-sector set; build the matrix directly.
        assert!(sector.is_err());
        let tx = UlaGeometry::half_wavelength(2).unwrap();
        let a = simpson_correlation(&tx, -PI / 2.0, PI / 2.0, 4096);
        assert_abs_diff_eq!(a[(0, 1)].re, oracle, epsilon = 1e-8);
        assert!(a[(0, 1)].im.abs() < 1e-12);
    }

    #[test]
    fn coarse_rule_reports_non_convergence() {
        let rule = QuadratureRule {
            initial_intervals: 2,
            tolerance: 1e-14,
            max_doublings: 1,
        };
        let err = sector_correlation_with(&m10(), &paper_sector(), rule).unwrap_err();
        assert!(matches!(err, Error::QuadratureNotConverged { suggested: 8, .. }));
    }

    #[test]
    fn eigenvalues_sum_to_trace() {
        let corr = sector_correlation(&m10(), &paper_sector()).unwrap();
        let d = spheroidal_design(&corr, 2).unwrap();
        let sum: f64 = d.eigenvalues.iter().sum();
        assert_abs_diff_eq!(sum, 10.0 * corr.sector().width_radians(), epsilon = 1e-10);
        assert!(d.eigenvalues.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn full_rank_design_diagonalises() {
        let corr = sector_correlation(&m10(), &paper_sector()).unwrap();
        let d = spheroidal_design(&corr, 10).unwrap();
        let c = d.matrix.entries();
        let diag = c.adjoint() * corr.matrix() * c;
        for i in 0..10 {
            for j in 0..10 {
                let expect = if i == j { d.eigenvalues[i] } else { 0.0 };
                assert!((diag[(i, j)] - c64(expect, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn single_element_design_is_one() {
        let tx = UlaGeometry::half_wavelength(1).unwrap();
        let corr = sector_correlation(&tx, &paper_sector()).unwrap();
        let d = spheroidal_design(&corr, 1).unwrap();
        assert!((d.matrix.entries()[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn spheroidal_columns_orthonormal_and_rayleigh_quotients_match() {
        let corr = sector_correlation(&m10(), &paper_sector()).unwrap();
        let d = spheroidal_design(&corr, 2).unwrap();
        assert!(orthonormality_defect(d.matrix.entries()) < 1e-10);
        for k in 0..2 {
            let col: Vec<_> = d.matrix.column(k).iter().copied().collect();
            let gamma = energy_ratio(&corr, &col) * 2.0 * PI;
            assert_abs_diff_eq!(gamma, d.eigenvalues[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn spheroidal_beats_random_vectors() {
        let corr = sector_correlation(&m10(), &paper_sector()).unwrap();
        let d = spheroidal_design(&corr, 2).unwrap();
        let g: Vec<f64> = (0..2)
            .map(|k| energy_ratio(&corr, d.matrix.column(k).as_slice()))
            .collect();
        assert!(g[0] >= g[1]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let v: Vec<Complex64> = (0..10)
                .map(|_| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            assert!(g[0] >= energy_ratio(&corr, &v));
        }
    }

    #[test]
    fn rotation_preserves_total_pattern_and_flattens_beams() {
        let tx = m10();
        let sector = paper_sector();
        let corr = sector_correlation(&tx, &sector).unwrap();
        let c = spheroidal_design(&corr, 2).unwrap().matrix;
        let q = default_rotation();
        let ct = rotate_for_uniformity(&c, &q).unwrap();
        assert_eq!(ct.method(), DesignMethod::SpheroidalRotated);
        let before = c.entries() * c.entries().adjoint();
        let after = ct.entries() * ct.entries().adjoint();
        assert!((before - after).norm() < 1e-12);

        let twice = rotate_for_uniformity(&ct, &q).unwrap();
        assert!((twice.entries() - c.entries()).norm() < 1e-12);

        let p0 = beampattern(&c, &tx, sector.in_grid()).unwrap();
        let p1 = beampattern(&ct, &tx, sector.in_grid()).unwrap();
        let cv_before = (0..2)
            .map(|k| coefficient_of_variation(&p0.beam(k)))
            .fold(0.0, f64::max);
        let cv_after = (0..2)
            .map(|k| coefficient_of_variation(&p1.beam(k)))
            .fold(0.0, f64::max);
        assert!(cv_before > 0.5, "cv before {cv_before}");
        assert!(cv_after < 0.1, "cv after {cv_after}");
    }

    #[test]
    fn rotation_rejects_non_unitary() {
        let c = BeamspaceMatrix::new(ComplexMat::identity(4, 2), DesignMethod::Custom).unwrap();
        let q = ComplexMat::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.1, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        assert!(matches!(rotate_for_uniformity(&c, &q), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn beampattern_identities() {
        let tx = m10();
        let grid = uniform_grid(-90.0, 90.0, 0.5).unwrap();
        let p = beampattern(&BeamspaceMatrix::identity(10), &tx, &grid).unwrap();
        for (i, h) in p.total.iter().enumerate() {
            assert_abs_diff_eq!(*h, 10.0, epsilon = 1e-12);
            let s: f64 = p.per_beam.row(i).iter().sum();
            assert_abs_diff_eq!(s, *h, epsilon = 1e-12);
        }
    }

    #[test]
    fn spheroidal_focuses_energy_into_sector() {
        let tx = m10();
        let sector = paper_sector();
        let corr = sector_correlation(&tx, &sector).unwrap();
        let c = spheroidal_design(&corr, 2).unwrap().matrix;
        let inside = beampattern(&c, &tx, sector.in_grid()).unwrap();
        let outside = beampattern(&c, &tx, sector.out_grid()).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&inside.total) >= 20.0 * mean(&outside.total));
    }

    #[test]
    fn baselines() {
        let tx = m10();
        let ts = baseline_matrix(BaselineKind::TsHalf, &tx, None).unwrap();
        for deg in [-40.0, 0.0, 3.0] {
            let th = AngleDeg::new(deg).unwrap();
            let r = ts.project(&steering_vector(&tx, th)).unwrap();
            assert!((r[0] - c64(1.0, 0.0)).norm() < 1e-14);
            assert!((r[1] - Complex64::from_polar(1.0, -PI * th.radians().sin())).norm() < 1e-14);
        }
        assert!(baseline_matrix(BaselineKind::Tap, &tx, None).is_err());
        assert!(baseline_matrix(BaselineKind::TsNHalf { rx_elements: 10 }, &tx, None).is_err());
        assert!(matches!(
            baseline_model(BaselineKind::TsNHalf { rx_elements: 10 }, &tx, None).unwrap(),
            TransmitModel::Subaperture { separation_wavelengths } if separation_wavelengths == 5.0
        ));
        let wide = UlaGeometry::half_wavelength(12).unwrap();
        let sel = baseline_matrix(BaselineKind::TsNHalf { rx_elements: 10 }, &wide, None).unwrap();
        assert_eq!(sel.entries()[(10, 1)], c64(1.0, 0.0));
    }

    #[test]
    fn tap_weights_reproduce_published_vector() {
        let published = [
            -0.5623, -0.5076, -0.4358, -0.3501, -0.2542, -0.1524, -0.0490, 0.0512, 0.1441,
        ];
        let w = tap_weights(&m10(), &paper_sector()).unwrap();
        assert!(w.iter().all(|z| z.im.abs() < 1e-12));
        let sign = if w[0].re * published[0] > 0.0 { 1.0 } else { -1.0 };
        for (z, p) in w.iter().zip(published) {
            assert_abs_diff_eq!(sign * z.re, p, epsilon = 5e-4);
        }
        // Both TAP waveforms share one pattern.
        let wc: Vec<Complex64> = published.iter().map(|&x| c64(x, 0.0)).collect();
        let c = baseline_matrix(BaselineKind::Tap, &m10(), Some(&wc)).unwrap();
        let p = beampattern(&c, &m10(), &uniform_grid(-90.0, 90.0, 0.25).unwrap()).unwrap();
        for i in 0..p.grid.len() {
            assert_abs_diff_eq!(p.per_beam[(i, 0)], p.per_beam[(i, 1)], epsilon = 1e-12);
        }
    }

    #[test]
    fn energy_identity_holds_in_sine_space_only() {
        let tx = m10();
        let corr = sector_correlation(&tx, &paper_sector()).unwrap();
        let c = spheroidal_design(&corr, 2).unwrap().matrix;
        for k in 0..2 {
            let e = energy_identity(c.column(k).as_slice(), &tx).unwrap();
            assert_abs_diff_eq!(e.sine_space_ratio, 1.0, epsilon = 1e-8);
            assert!((e.theta_space_ratio - 1.0).abs() > 1e-3);
        }
    }
}
