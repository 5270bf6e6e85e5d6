//! Monte Carlo SNR sweep.
//!
//! Every trial draws from its own random stream, keyed by method, SNR index
//! and trial number, and writes into its own slot. Aggregation folds the slots
//! in a fixed order, so the worker count never changes the output.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use rayon::prelude::*;

use txbeam::crb::{deterministic_crb, stochastic_crb, CrbResult};
use txbeam::estimators::{
    esprit_estimate, find_peaks, music_spectrum_on, rmse, rmse_resolved, subspace_decompose, EspritOptions, Partition,
    TrialEstimate,
};
use txbeam::linalg::ComplexMat;
use txbeam::sim::{sample_covariance, simulate_snapshots, Scenario};

use crate::config::{EstimatorKind, ExperimentConfig, Method};
use crate::methods::{build_method, MethodSetup};

/// Random stream for one trial.
pub fn trial_stream(method: Method, snr_index: usize, trial: usize) -> u64 {
    (method.id() << 48) | ((snr_index as u64) << 32) | trial as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// Ascending, degrees.
    pub angles: Vec<f64>,
    /// Peak search came up short, or an ESPRIT phase was clamped.
    pub flagged: bool,
}

/// Runs the configured estimator on a covariance matrix.
pub fn estimate_from_covariance(
    setup: &MethodSetup,
    r: &ComplexMat,
    num_targets: usize,
    estimator: EstimatorKind,
    tls: bool,
) -> Result<Estimate> {
    let decomp = subspace_decompose(r, num_targets)?;
    match estimator {
        EstimatorKind::Music => {
            let manifold = setup
                .music_manifold
                .as_ref()
                .context("method was not prepared for MUSIC")?;
            let spectrum = music_spectrum_on(&decomp, manifold);
            let peaks = find_peaks(&spectrum, &setup.music_grid, num_targets);
            Ok(Estimate {
                angles: peaks.angles,
                flagged: !peaks.complete,
            })
        }
        EstimatorKind::Esprit => {
            let partition = match &setup.lut {
                None => Partition::MimoOverlap {
                    rx_elements: setup.rx.num_elements(),
                    tx_spacing_wavelengths: setup.tx.spacing_wavelengths(),
                },
                Some(lut) => Partition::TbHalves {
                    lut,
                    model: &setup.model,
                    tx: &setup.tx,
                    rx: &setup.rx,
                },
            };
            let out = esprit_estimate(&decomp, &partition, EspritOptions { tls })?;
            Ok(Estimate {
                angles: out.angles,
                flagged: out.clamped,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub method: Method,
    pub snr_db: f64,
    pub trial: usize,
    pub stream: u64,
    pub estimates: Vec<f64>,
    pub resolved: bool,
    pub flagged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

impl CellStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Failed(_) => "failed",
        }
    }
}

/// One `(method, snr)` entry of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub method: Method,
    pub snr_db: f64,
    pub rmse_all_deg: f64,
    pub rmse_resolved_deg: f64,
    pub prob_resolution: f64,
    /// `√` of the per-target bound averaged over targets, degrees.
    pub crb_sto_deg: f64,
    pub crb_det_deg: f64,
    pub runs: usize,
    pub trial_failures: usize,
    pub status: CellStatus,
}

#[derive(Debug, Clone)]
pub struct CrbRecord {
    pub method: Method,
    pub snr_db: f64,
    pub stochastic: Option<CrbResult>,
    pub deterministic: Option<CrbResult>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub setups: Vec<(Method, std::result::Result<MethodSetup, String>)>,
    pub cells: Vec<CellResult>,
    pub crbs: Vec<CrbRecord>,
    pub trials: Vec<TrialRecord>,
    pub started_unix: f64,
    pub elapsed_seconds: f64,
    pub workers: usize,
}

impl SweepResult {
    pub fn cell(&self, method: Method, snr_db: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.method == method && c.snr_db == snr_db)
    }

    /// Cells of one method in SNR order.
    pub fn curve(&self, method: Method) -> Vec<&CellResult> {
        self.cells.iter().filter(|c| c.method == method).collect()
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn mean_bound_deg(crb: &Option<CrbResult>) -> f64 {
    match crb {
        Some(c) => {
            let v = c.per_target_deg2();
            (v.iter().sum::<f64>() / v.len() as f64).sqrt()
        }
        None => f64::NAN,
    }
}

fn scenario(cfg: &ExperimentConfig, setup: &MethodSetup, snr_db: f64) -> Result<Scenario> {
    Ok(Scenario::with_snr_db(
        setup.tx,
        setup.rx,
        setup.model.clone(),
        &cfg.targets()?,
        snr_db,
        cfg.energy(),
        cfg.pulses,
    )?)
}

fn run_trial(
    cfg: &ExperimentConfig,
    setup: &MethodSetup,
    s: &Scenario,
    snr_db: f64,
    snr_index: usize,
    trial: usize,
) -> TrialRecord {
    let stream = trial_stream(setup.method, snr_index, trial);
    let outcome = simulate_snapshots(s, cfg.seed, stream)
        .map_err(anyhow::Error::from)
        .and_then(|x| {
            estimate_from_covariance(
                setup,
                &sample_covariance(&x),
                cfg.targets_deg.len(),
                cfg.estimator,
                cfg.tls,
            )
        });
    let (estimates, flagged, error) = match outcome {
        Ok(e) => (e.angles, e.flagged, None),
        Err(e) => (Vec::new(), true, Some(format!("{e:#}"))),
    };
    let resolved = TrialEstimate::new(estimates.clone(), &cfg.targets_deg, setup.method.name()).resolved;
    TrialRecord {
        method: setup.method,
        snr_db,
        trial,
        stream,
        estimates,
        resolved,
        flagged,
        error,
    }
}

/// Runs the sweep on `workers` threads (`0` picks the rayon default).
pub fn run_sweep(cfg: &ExperimentConfig, workers: usize) -> Result<SweepResult> {
    cfg.validate()?;
    let started_unix = unix_now();
    let clock = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;

    let setups: Vec<(Method, std::result::Result<MethodSetup, String>)> = pool.install(|| {
        cfg.methods
            .par_iter()
            .map(|&m| (m, build_method(cfg, m, cfg.estimator).map_err(|e| format!("{e:#}"))))
            .collect()
    });

    let mut scenarios: Vec<Vec<Option<std::result::Result<Scenario, String>>>> = Vec::new();
    for (_, setup) in &setups {
        let row = cfg
            .snr_db
            .iter()
            .map(|&snr| {
                setup
                    .as_ref()
                    .ok()
                    .map(|s| scenario(cfg, s, snr).map_err(|e| format!("{e:#}")))
            })
            .collect();
        scenarios.push(row);
    }

    let mut jobs = Vec::new();
    for (mi, (_, setup)) in setups.iter().enumerate() {
        if setup.is_err() {
            continue;
        }
        for (si, s) in scenarios[mi].iter().enumerate() {
            if matches!(s, Some(Ok(_))) {
                jobs.extend((0..cfg.runs).map(|t| (mi, si, t)));
            }
        }
    }
    let trials: Vec<TrialRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(mi, si, t)| {
                let setup = setups[mi].1.as_ref().expect("job only for built methods");
                let s = scenarios[mi][si]
                    .as_ref()
                    .and_then(|r| r.as_ref().ok())
                    .expect("job only for valid scenarios");
                run_trial(cfg, setup, s, cfg.snr_db[si], si, t)
            })
            .collect()
    });

    let mut crbs = Vec::new();
    let mut cells = Vec::new();
    let fallback = cfg.sector_centre();
    let mut cursor = 0usize;
    for (mi, (method, setup)) in setups.iter().enumerate() {
        for (si, &snr_db) in cfg.snr_db.iter().enumerate() {
            let failure = match (setup, &scenarios[mi][si]) {
                (Err(e), _) => Some(e.clone()),
                (_, Some(Err(e))) => Some(e.clone()),
                _ => None,
            };
            if let Some(reason) = failure {
                cells.push(CellResult {
                    method: *method,
                    snr_db,
                    rmse_all_deg: f64::NAN,
                    rmse_resolved_deg: f64::NAN,
                    prob_resolution: f64::NAN,
                    crb_sto_deg: f64::NAN,
                    crb_det_deg: f64::NAN,
                    runs: 0,
                    trial_failures: 0,
                    status: CellStatus::Failed(reason),
                });
                continue;
            }
            let s = scenarios[mi][si]
                .as_ref()
                .and_then(|r| r.as_ref().ok())
                .expect("checked above");
            let stochastic = stochastic_crb(s).ok();
            let deterministic = deterministic_crb(s, None).ok();
            let block = &trials[cursor..cursor + cfg.runs];
            cursor += cfg.runs;
            let estimates: Vec<TrialEstimate> = block
                .iter()
                .map(|t| TrialEstimate {
                    estimates: t.estimates.clone(),
                    resolved: t.resolved,
                    method: method.name().to_string(),
                })
                .collect();
            let resolved = block.iter().filter(|t| t.resolved).count();
            cells.push(CellResult {
                method: *method,
                snr_db,
                rmse_all_deg: rmse(&estimates, &cfg.targets_deg, fallback),
                rmse_resolved_deg: rmse_resolved(&estimates, &cfg.targets_deg, fallback).unwrap_or(f64::NAN),
                prob_resolution: resolved as f64 / cfg.runs as f64,
                crb_sto_deg: mean_bound_deg(&stochastic),
                crb_det_deg: mean_bound_deg(&deterministic),
                runs: cfg.runs,
                trial_failures: block.iter().filter(|t| t.error.is_some()).count(),
                status: CellStatus::Ok,
            });
            crbs.push(CrbRecord {
                method: *method,
                snr_db,
                stochastic,
                deterministic,
            });
        }
    }

    Ok(SweepResult {
        config: cfg.clone(),
        setups,
        cells,
        crbs,
        trials,
        started_unix,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        workers: pool.current_num_threads(),
    })
}
