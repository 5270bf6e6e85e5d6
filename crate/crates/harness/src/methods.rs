//! Builds the transmit model and estimator inputs for each compared method.

use anyhow::{Context, Result};

use txbeam::design::{
    baseline_model, default_rotation, rotate_for_uniformity, sector_correlation, spheroidal_design, tap_weights,
    uniform_grid, BaselineKind,
};
use txbeam::estimators::{build_phase_lut, grid_manifold, PhaseLookupTable};
use txbeam::linalg::ComplexMat;
use txbeam::minimax::{minimax_design, PhaseTargetFn};
use txbeam::{AngleDeg, BeamspaceMatrix, TransmitModel, UlaGeometry};

use crate::config::{EstimatorKind, ExperimentConfig, Method, PhaseTargetKind};

/// Everything a sweep needs for one method, built once.
#[derive(Debug, Clone)]
pub struct MethodSetup {
    pub method: Method,
    pub model: TransmitModel,
    pub tx: UlaGeometry,
    pub rx: UlaGeometry,
    /// Phase table over the sector; only for two-beam models.
    pub lut: Option<PhaseLookupTable>,
    /// MUSIC search grid in degrees and its unscaled steering vectors.
    pub music_grid: Vec<f64>,
    pub music_manifold: Option<ComplexMat>,
    /// Free-form design diagnostics (`key=value`).
    pub notes: Vec<String>,
}

impl MethodSetup {
    pub fn matrix(&self) -> Option<&BeamspaceMatrix> {
        self.model.beamspace()
    }
}

pub fn phase_target(cfg: &ExperimentConfig, tx: &UlaGeometry) -> Result<PhaseTargetFn> {
    Ok(match cfg.phase_target {
        PhaseTargetKind::Centered => PhaseTargetFn::centered(tx, cfg.rx_elements, cfg.target_gain)?,
        PhaseTargetKind::Literal => PhaseTargetFn::literal(cfg.rx_elements, cfg.target_gain)?,
    })
}

/// Transmit model for `method` together with design notes.
pub fn design_model(cfg: &ExperimentConfig, method: Method) -> Result<(TransmitModel, Vec<String>)> {
    let tx = cfg.tx()?;
    let sector = cfg.sector()?;
    let mut notes = Vec::new();
    let model = match method {
        Method::Mimo => baseline_model(BaselineKind::Identity, &tx, None)?,
        Method::TsHalf => baseline_model(BaselineKind::TsHalf, &tx, None)?,
        Method::TsNHalf => {
            let m = baseline_model(
                BaselineKind::TsNHalf {
                    rx_elements: cfg.rx_elements,
                },
                &tx,
                None,
            )?;
            if let TransmitModel::Subaperture { separation_wavelengths } = m {
                notes.push(format!("subaperture_separation_wavelengths={separation_wavelengths}"));
            }
            m
        }
        Method::Tap => {
            let w = tap_weights(&tx, &sector)?;
            baseline_model(BaselineKind::Tap, &tx, Some(&w))?
        }
        Method::TbSpheroidal => {
            let corr = sector_correlation(&tx, &sector)?;
            let design = spheroidal_design(&corr, 2)?;
            notes.push(format!(
                "eigenvalues={:.6e},{:.6e}",
                design.eigenvalues[0], design.eigenvalues[1]
            ));
            TransmitModel::Beamspace(rotate_for_uniformity(&design.matrix, &default_rotation())?)
        }
        Method::TbMinimax => {
            let target = phase_target(cfg, &tx)?;
            let design = minimax_design(&tx, &sector, &target, cfg.gamma)?;
            notes.push(format!("epsilon={:.6e}", design.solution.objective));
            notes.push(format!("achieved_gain={:.6e}", design.achieved_gain));
            notes.push(format!("newton_steps={}", design.solution.newton_steps));
            TransmitModel::Beamspace(design.matrix)
        }
    };
    Ok((model, notes))
}

pub fn music_grid(cfg: &ExperimentConfig) -> Result<Vec<AngleDeg>> {
    Ok(uniform_grid(
        cfg.sector_min_deg,
        cfg.sector_max_deg,
        cfg.music_step_deg,
    )?)
}

pub fn build_method(cfg: &ExperimentConfig, method: Method, estimator: EstimatorKind) -> Result<MethodSetup> {
    let (model, notes) = design_model(cfg, method).with_context(|| format!("designing {method}"))?;
    let tx = cfg.tx()?;
    let rx = cfg.rx()?;
    let mut setup = MethodSetup {
        method,
        model,
        tx,
        rx,
        lut: None,
        music_grid: Vec::new(),
        music_manifold: None,
        notes,
    };
    match estimator {
        EstimatorKind::Music => {
            let grid = music_grid(cfg)?;
            setup.music_manifold = Some(grid_manifold(&setup.model, &tx, &rx, &grid)?);
            setup.music_grid = grid.iter().map(|a| a.degrees()).collect();
        }
        EstimatorKind::Esprit => {
            if method != Method::Mimo {
                let grid = uniform_grid(cfg.sector_min_deg, cfg.sector_max_deg, cfg.lut_step_deg)?;
                let lut =
                    build_phase_lut(&setup.model, &tx, &grid).with_context(|| format!("phase table for {method}"))?;
                setup.lut = Some(lut);
            }
        }
    }
    Ok(setup)
}
