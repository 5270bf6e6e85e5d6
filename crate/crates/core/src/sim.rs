//! Swerling-II virtual-snapshot simulation and covariance estimation.
//!
//! Snapshots are generated after matched filtering: each pulse yields
//! `y(τ) = V α(τ) + z(τ)` of length `K·N`, with circular Gaussian target
//! amplitudes and white noise. Every trial draws from its own ChaCha stream
//! keyed by `(seed, stream)`, so results do not depend on execution order.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::array::{virtual_steering, AngleDeg, UlaGeometry};
use crate::beamspace::TransmitModel;
use crate::error::{Error, Result};
use crate::linalg::{c64, hermitian_part, ComplexMat, ComplexVec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub theta: AngleDeg,
    pub sigma_alpha_sq: f64,
}

impl Target {
    pub fn new(theta: AngleDeg, sigma_alpha_sq: f64) -> Result<Self> {
        if !(sigma_alpha_sq > 0.0 && sigma_alpha_sq.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "target variance must be positive, got {sigma_alpha_sq}"
            )));
        }
        Ok(Self { theta, sigma_alpha_sq })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    tx: UlaGeometry,
    rx: UlaGeometry,
    model: TransmitModel,
    targets: Vec<Target>,
    total_energy: f64,
    noise_var: f64,
    num_pulses: usize,
}

impl Scenario {
    pub fn new(
        tx: UlaGeometry,
        rx: UlaGeometry,
        model: TransmitModel,
        targets: Vec<Target>,
        total_energy: f64,
        noise_var: f64,
        num_pulses: usize,
    ) -> Result<Self> {
        if num_pulses == 0 {
            return Err(Error::InvalidScenario("need at least one pulse".into()));
        }
        if !(total_energy > 0.0 && total_energy.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "energy must be positive, got {total_energy}"
            )));
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "noise variance must be non-negative, got {noise_var}"
            )));
        }
        if let Some(c) = model.beamspace() {
            if c.num_antennas() != tx.num_elements() {
                return Err(Error::DimensionMismatch {
                    context: "Scenario::new",
                    expected: format!("C with {} rows", tx.num_elements()),
                    actual: format!("{} rows", c.num_antennas()),
                });
            }
        }
        let dim = model.num_beams() * rx.num_elements();
        if targets.len() + 1 > dim {
            return Err(Error::InvalidScenario(format!(
                "{} targets exceed the {} resolvable by a {dim}-element virtual array",
                targets.len(),
                dim - 1
            )));
        }
        Ok(Self {
            tx,
            rx,
            model,
            targets,
            total_energy,
            noise_var,
            num_pulses,
        })
    }

    /// Equal-power targets at `snr_db` relative to unit noise variance.
    #[allow(clippy::too_many_arguments)]
    pub fn with_snr_db(
        tx: UlaGeometry,
        rx: UlaGeometry,
        model: TransmitModel,
        angles: &[AngleDeg],
        snr_db: f64,
        total_energy: f64,
        num_pulses: usize,
    ) -> Result<Self> {
        let var = 10f64.powf(snr_db / 10.0);
        let targets = angles
            .iter()
            .map(|&t| Target::new(t, var))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tx, rx, model, targets, total_energy, 1.0, num_pulses)
    }

    pub fn tx(&self) -> &UlaGeometry {
        &self.tx
    }

    pub fn rx(&self) -> &UlaGeometry {
        &self.rx
    }

    pub fn model(&self) -> &TransmitModel {
        &self.model
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn num_pulses(&self) -> usize {
        self.num_pulses
    }

    pub fn num_beams(&self) -> usize {
        self.model.num_beams()
    }

    /// Virtual array length `K·N`.
    pub fn dimension(&self) -> usize {
        self.num_beams() * self.rx.num_elements()
    }

    /// `√(E/K)`.
    pub fn energy_scale(&self) -> f64 {
        (self.total_energy / self.num_beams() as f64).sqrt()
    }

    pub fn steering(&self, theta: AngleDeg) -> Result<ComplexVec> {
        virtual_steering(&self.tx, &self.rx, &self.model, theta, self.energy_scale())
    }

    /// `V = [v(θ₁) … v(θ_L)]`.
    pub fn manifold(&self) -> Result<ComplexMat> {
        let cols = self
            .targets
            .iter()
            .map(|t| self.steering(t.theta))
            .collect::<Result<Vec<_>>>()?;
        if cols.is_empty() {
            return Ok(ComplexMat::zeros(self.dimension(), 0));
        }
        Ok(ComplexMat::from_columns(&cols))
    }

    pub fn source_covariance(&self) -> ComplexMat {
        ComplexMat::from_diagonal(&ComplexVec::from_iterator(
            self.targets.len(),
            self.targets.iter().map(|t| c64(t.sigma_alpha_sq, 0.0)),
        ))
    }

    pub fn with_pulses(&self, num_pulses: usize) -> Result<Self> {
        let mut s = self.clone();
        if num_pulses == 0 {
            return Err(Error::InvalidScenario("need at least one pulse".into()));
        }
        s.num_pulses = num_pulses;
        Ok(s)
    }

    /// Short human-readable identity of the scenario.
    pub fn fingerprint(&self) -> String {
        let angles: Vec<String> = self.targets.iter().map(|t| format!("{}", t.theta.degrees())).collect();
        let kind = match &self.model {
            TransmitModel::Beamspace(c) => c.method().to_string(),
            TransmitModel::Subaperture { separation_wavelengths } => format!("subaperture({separation_wavelengths})"),
        };
        format!(
            "M={} N={} K={} model={kind} targets=[{}] E={} noise={} Q={}",
            self.tx.num_elements(),
            self.rx.num_elements(),
            self.num_beams(),
            angles.join(","),
            self.total_energy,
            self.noise_var,
            self.num_pulses
        )
    }
}

/// Debug switches for [`simulate_snapshots_with`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimOptions {
    /// Replace every random amplitude with this value.
    pub fixed_alpha: Option<Complex64>,
    pub noiseless: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    /// `K·N × Q`, one column per pulse.
    pub data: ComplexMat,
    pub fingerprint: String,
    pub seed: u64,
    pub stream: u64,
}

impl SnapshotSet {
    pub fn num_pulses(&self) -> usize {
        self.data.ncols()
    }
}

/// RNG for trial `stream` under master `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_normal<R: rand::Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c64(s * re, s * im)
}

pub fn simulate_snapshots(s: &Scenario, seed: u64, stream: u64) -> Result<SnapshotSet> {
    simulate_snapshots_with(s, seed, stream, SimOptions::default())
}

pub fn simulate_snapshots_with(s: &Scenario, seed: u64, stream: u64, opts: SimOptions) -> Result<SnapshotSet> {
    let v = s.manifold()?;
    let dim = s.dimension();
    let q = s.num_pulses();
    let mut rng = trial_rng(seed, stream);
    let mut data = ComplexMat::zeros(dim, q);
    let mut alpha = ComplexVec::zeros(s.targets().len());
    for tau in 0..q {
        for (l, t) in s.targets().iter().enumerate() {
            alpha[l] = match opts.fixed_alpha {
                Some(a) => a,
                None => complex_normal(&mut rng, t.sigma_alpha_sq),
            };
        }
        let mut col = &v * &alpha;
        if !opts.noiseless && s.noise_var() > 0.0 {
            for z in col.iter_mut() {
                *z += complex_normal(&mut rng, s.noise_var());
            }
        }
        data.set_column(tau, &col);
    }
    Ok(SnapshotSet {
        data,
        fingerprint: s.fingerprint(),
        seed,
        stream,
    })
}

/// `V S Vᴴ + σ_z² I`.
pub fn exact_covariance(s: &Scenario) -> Result<ComplexMat> {
    let v = s.manifold()?;
    let dim = s.dimension();
    let r = &v * s.source_covariance() * v.adjoint() + ComplexMat::identity(dim, dim).scale(s.noise_var());
    Ok(hermitian_part(&r))
}

/// `(1/Q) Σ y yᴴ`, symmetrised.
pub fn sample_covariance(x: &SnapshotSet) -> ComplexMat {
    sample_covariance_of(&x.data)
}

pub fn sample_covariance_of(data: &ComplexMat) -> ComplexMat {
    let q = data.ncols().max(1) as f64;
    hermitian_part(&(data * data.adjoint()).unscale(q))
}

/// Gram matrix of the unit-energy tones `φ_m(t) = e^{j2πmt/T}/√T` over one
/// pulse, by the rectangle rule on `samples` uniform points.
pub fn waveform_gram(m: usize, samples: usize) -> Result<ComplexMat> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one waveform".into()));
    }
    if samples < 4 * m {
        return Err(Error::InvalidArgument(format!(
            "{samples} samples undersample {m} tones (need at least {})",
            4 * m
        )));
    }
    let t = 1.0;
    let dt = t / samples as f64;
    let phi = ComplexMat::from_fn(m, samples, |k, i| {
        Complex64::from_polar((1.0 / t).sqrt(), 2.0 * PI * k as f64 * i as f64 * dt / t)
    });
    Ok((&phi * phi.adjoint()).scale(dt))
}

/// Writes `tau,row_index,re,im` rows.
pub fn write_snapshot_csv<W: Write>(x: &SnapshotSet, mut out: W) -> io::Result<()> {
    writeln!(out, "tau,row_index,re,im")?;
    for tau in 0..x.data.ncols() {
        for row in 0..x.data.nrows() {
            let z = x.data[(row, tau)];
            writeln!(out, "{tau},{row},{:e},{:e}", z.re, z.im)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamspace::BeamspaceMatrix;
    use crate::linalg::hermitian_eigen_desc;

    fn deg(v: f64) -> AngleDeg {
        AngleDeg::new(v).unwrap()
    }

    fn ts_scenario(angles: &[f64], snr_db: f64, q: usize) -> Scenario {
        let tx = UlaGeometry::half_wavelength(10).unwrap();
        let rx = UlaGeometry::half_wavelength(10).unwrap();
        let model = TransmitModel::Subaperture {
            separation_wavelengths: 5.0,
        };
        let a: Vec<AngleDeg> = angles.iter().map(|&x| deg(x)).collect();
        Scenario::with_snr_db(tx, rx, model, &a, snr_db, 10.0, q).unwrap()
    }

    #[test]
    fn invariants_enforced() {
        let tx = UlaGeometry::half_wavelength(4).unwrap();
        let rx = UlaGeometry::half_wavelength(2).unwrap();
        let model = TransmitModel::Subaperture {
            separation_wavelengths: 0.5,
        };
        let t = Target::new(AngleDeg::ZERO, 1.0).unwrap();
        assert!(Scenario::new(tx, rx, model.clone(), vec![t; 3], 1.0, 1.0, 1).is_ok());
        assert!(Scenario::new(tx, rx, model.clone(), vec![t; 4], 1.0, 1.0, 1).is_err());
        assert!(Scenario::new(tx, rx, model.clone(), vec![t], 0.0, 1.0, 1).is_err());
        assert!(Scenario::new(tx, rx, model, vec![t], 1.0, 1.0, 0).is_err());
        assert!(Target::new(AngleDeg::ZERO, 0.0).is_err());
    }

    #[test]
    fn noiseless_unit_amplitude_reproduces_steering() {
        let s = ts_scenario(&[2.5], 0.0, 1);
        let opts = SimOptions {
            fixed_alpha: Some(c64(1.0, 0.0)),
            noiseless: true,
        };
        let x = simulate_snapshots_with(&s, 1, 0, opts).unwrap();
        let v = s.steering(deg(2.5)).unwrap();
        assert_eq!(x.data.column(0).into_owned(), v);
    }

    #[test]
    fn deterministic_per_stream() {
        let s = ts_scenario(&[-1.0, 1.0], 0.0, 20);
        let a = simulate_snapshots(&s, 9, 3).unwrap();
        let b = simulate_snapshots(&s, 9, 3).unwrap();
        let c = simulate_snapshots(&s, 9, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn sample_mean_vanishes() {
        let s = ts_scenario(&[-1.0, 1.0], 0.0, 10_000);
        let x = simulate_snapshots(&s, 5, 0).unwrap();
        let mean = x.data.column_mean();
        let tr: f64 = exact_covariance(&s).unwrap().diagonal().iter().map(|z| z.re).sum();
        assert!(mean.norm() < 5.0 / 100.0 * tr.sqrt());
    }

    #[test]
    fn element_variance_matches_model() {
        let tx = UlaGeometry::half_wavelength(4).unwrap();
        let rx = UlaGeometry::half_wavelength(3).unwrap();
        let c = ComplexMat::from_fn(4, 2, |i, j| Complex64::from_polar(0.5, 0.7 * (i * (j + 1)) as f64));
        let model =
            TransmitModel::Beamspace(BeamspaceMatrix::new(c.clone(), crate::beamspace::DesignMethod::Custom).unwrap());
        let targets = vec![
            Target::new(deg(-7.0), 2.0).unwrap(),
            Target::new(deg(12.0), 0.5).unwrap(),
        ];
        let q = 100_000;
        let s = Scenario::new(tx, rx, model, targets.clone(), 6.0, 0.3, q).unwrap();
        let x = simulate_snapshots(&s, 11, 0).unwrap();
        for k in 0..2 {
            // Oracle: (E/K) Σ σ²_l |c_kᴴ a(θ_l)|² + σ_z², computed element by element.
            let mut expect = 0.3;
            for t in &targets {
                let a = crate::array::steering_vector(&tx, t.theta);
                let mut r = c64(0.0, 0.0);
                for m in 0..4 {
                    r += c[(m, k)].conj() * a[m];
                }
                expect += 3.0 * t.sigma_alpha_sq * r.norm_sqr();
            }
            for n in 0..3 {
                let row = k * 3 + n;
                let est = x.data.row(row).iter().map(|z| z.norm_sqr()).sum::<f64>() / q as f64;
                let se = expect / (q as f64).sqrt();
                assert!((est - expect).abs() < 5.0 * se, "row {row}: {est} vs {expect}");
            }
        }
    }

    #[test]
    fn exact_covariance_structure() {
        let empty = ts_scenario(&[], 0.0, 1);
        let r = exact_covariance(&empty).unwrap();
        assert!((r - ComplexMat::identity(20, 20)).norm() < 1e-15);
        let s = ts_scenario(&[-1.0, 1.0], 10.0, 1);
        let r = exact_covariance(&s).unwrap();
        let (vals, _) = hermitian_eigen_desc(&r).unwrap();
        assert!(vals.iter().all(|&v| v >= 1.0 - 1e-10));
    }

    #[test]
    fn sample_covariance_converges() {
        let s = ts_scenario(&[-1.0, 1.0], 0.0, 100_000);
        let r = exact_covariance(&s).unwrap();
        let rh = sample_covariance(&simulate_snapshots(&s, 2, 0).unwrap());
        assert!((&rh - &r).norm() / r.norm() < 0.02);
    }

    #[test]
    fn sample_covariance_error_decays_like_inverse_sqrt() {
        let s100 = ts_scenario(&[-1.0, 1.0], 0.0, 100);
        let s400 = s100.with_pulses(400).unwrap();
        let r = exact_covariance(&s100).unwrap();
        let (mut e100, mut e400) = (0.0, 0.0);
        for seed in 0..50 {
            e100 += (sample_covariance(&simulate_snapshots(&s100, seed, 0).unwrap()) - &r).norm();
            e400 += (sample_covariance(&simulate_snapshots(&s400, seed, 0).unwrap()) - &r).norm();
        }
        let ratio = e400 / e100;
        assert!((0.3..=0.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn single_pulse_is_rank_one() {
        let s = ts_scenario(&[0.0], 0.0, 1);
        let x = simulate_snapshots(&s, 0, 0).unwrap();
        let rh = sample_covariance(&x);
        let (vals, _) = hermitian_eigen_desc(&rh).unwrap();
        assert!(vals[0] > 0.0);
        assert!(vals[1..].iter().all(|v| v.abs() < 1e-10 * vals[0]));
        let y = x.data.column(0);
        assert!((rh - y * y.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn noise_only_covariance_is_white() {
        let q = 20_000;
        let s = ts_scenario(&[], 0.0, q);
        let rh = sample_covariance(&simulate_snapshots(&s, 8, 0).unwrap());
        for i in 0..20 {
            for j in 0..20 {
                if i != j {
                    assert!(rh[(i, j)].norm() < 5.0 / (q as f64).sqrt());
                }
            }
        }
    }

    #[test]
    fn waveform_tones_are_orthonormal() {
        let g = waveform_gram(10, 256).unwrap();
        assert!((&g - ComplexMat::identity(10, 10)).norm() < 1e-9);
        for i in 0..10 {
            assert!((g[(i, i)].re - 1.0).abs() < 1e-10);
        }
        assert!(waveform_gram(10, 39).is_err());
    }

    #[test]
    fn snapshot_dump_has_one_row_per_sample() {
        let s = ts_scenario(&[0.0], 0.0, 3);
        let x = simulate_snapshots(&s, 0, 0).unwrap();
        let mut buf = Vec::new();
        write_snapshot_csv(&x, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 20);
        assert!(text.starts_with("tau,row_index,re,im\n0,0,"));
    }
}
