//! Experiment configuration: a flat TOML file or one of the built-in presets.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use txbeam::design::Sector;
use txbeam::{AngleDeg, UlaGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mimo")]
    Mimo,
    #[serde(rename = "ts-half")]
    TsHalf,
    #[serde(rename = "ts-Nhalf")]
    TsNHalf,
    #[serde(rename = "tap")]
    Tap,
    #[serde(rename = "tb-spheroidal")]
    TbSpheroidal,
    #[serde(rename = "tb-minimax")]
    TbMinimax,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Mimo,
        Method::TsHalf,
        Method::TsNHalf,
        Method::Tap,
        Method::TbSpheroidal,
        Method::TbMinimax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mimo => "mimo",
            Method::TsHalf => "ts-half",
            Method::TsNHalf => "ts-Nhalf",
            Method::Tap => "tap",
            Method::TbSpheroidal => "tb-spheroidal",
            Method::TbMinimax => "tb-minimax",
        }
    }

    /// Stable identifier used to key random streams.
    pub fn id(self) -> u64 {
        match self {
            Method::Mimo => 1,
            Method::TsHalf => 2,
            Method::TsNHalf => 3,
            Method::Tap => 4,
            Method::TbSpheroidal => 5,
            Method::TbMinimax => 6,
        }
    }

    pub fn is_beamspace(self) -> bool {
        matches!(self, Method::TbSpheroidal | Method::TbMinimax)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).with_context(|| {
            let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            format!("unknown method `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Music,
    Esprit,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Music => "music",
            EstimatorKind::Esprit => "esprit",
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "music" => Ok(EstimatorKind::Music),
            "esprit" => Ok(EstimatorKind::Esprit),
            _ => bail!("unknown estimator `{s}` (expected music or esprit)"),
        }
    }
}

/// Phase-centre layout of the minimax target response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseTargetKind {
    /// Centres `N` half-wavelengths apart, symmetric about the array middle.
    Centered,
    /// Reference at the first element and a separation of `N` wavelengths.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub spacing_wavelengths: f64,
    pub sector_min_deg: f64,
    pub sector_max_deg: f64,
    /// Out-of-sector intervals; empty means the complement of the sector
    /// widened by `guard_deg`.
    pub out_regions_deg: Vec<[f64; 2]>,
    pub guard_deg: f64,
    pub in_step_deg: f64,
    pub out_step_deg: f64,
    pub methods: Vec<Method>,
    pub estimator: EstimatorKind,
    pub tls: bool,
    pub targets_deg: Vec<f64>,
    /// Total transmit energy `E`; defaults to `tx_elements`.
    pub total_energy: Option<f64>,
    pub pulses: usize,
    pub snr_db: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub gamma: f64,
    pub target_gain: f64,
    pub phase_target: PhaseTargetKind,
    pub music_step_deg: f64,
    pub lut_step_deg: f64,
    pub output_dir: String,
    pub trial_log: bool,
}

fn snr_range(lo: i32, hi: i32, step: i32) -> Vec<f64> {
    (lo..=hi).step_by(step as usize).map(f64::from).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "paper-example-2".into(),
            tx_elements: 10,
            rx_elements: 10,
            spacing_wavelengths: 0.5,
            sector_min_deg: -5.0,
            sector_max_deg: 5.0,
            out_regions_deg: vec![[-90.0, -15.0], [15.0, 90.0]],
            guard_deg: Sector::DEFAULT_GUARD,
            in_step_deg: Sector::DEFAULT_IN_STEP,
            out_step_deg: Sector::DEFAULT_OUT_STEP,
            methods: vec![
                Method::Mimo,
                Method::TsHalf,
                Method::TsNHalf,
                Method::Tap,
                Method::TbSpheroidal,
            ],
            estimator: EstimatorKind::Music,
            tls: false,
            targets_deg: vec![-1.0, 1.0],
            total_energy: None,
            pulses: 300,
            snr_db: snr_range(-10, 20, 2),
            runs: 500,
            seed: 20_100_817,
            gamma: 0.38,
            target_gain: 1.0,
            phase_target: PhaseTargetKind::Centered,
            music_step_deg: 0.02,
            lut_step_deg: 0.01,
            output_dir: "out".into(),
            trial_log: false,
        }
    }
}

pub const PRESETS: [&str; 2] = ["paper-example-2", "paper-example-3"];

impl ExperimentConfig {
    /// MUSIC with the spheroidal design (`paper-example-2`) or ESPRIT with
    /// the minimax design (`paper-example-3`).
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "paper-example-2" => Some(Self::default()),
            "paper-example-3" => Some(Self {
                name: name.into(),
                methods: vec![
                    Method::Mimo,
                    Method::TsHalf,
                    Method::TsNHalf,
                    Method::Tap,
                    Method::TbMinimax,
                ],
                estimator: EstimatorKind::Esprit,
                ..Self::default()
            }),
            _ => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file, or a preset when `source` names one and no such file exists.
    pub fn load(source: &str) -> Result<Self> {
        let path = Path::new(source);
        if !path.exists() {
            if let Some(cfg) = Self::preset(source) {
                return Ok(cfg);
            }
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn energy(&self) -> f64 {
        self.total_energy.unwrap_or(self.tx_elements as f64)
    }

    pub fn tx(&self) -> Result<UlaGeometry> {
        Ok(UlaGeometry::new(self.tx_elements, self.spacing_wavelengths)?)
    }

    pub fn rx(&self) -> Result<UlaGeometry> {
        Ok(UlaGeometry::new(self.rx_elements, 0.5)?)
    }

    pub fn targets(&self) -> Result<Vec<AngleDeg>> {
        Ok(self
            .targets_deg
            .iter()
            .map(|&t| AngleDeg::new(t))
            .collect::<txbeam::Result<Vec<_>>>()?)
    }

    pub fn out_regions(&self) -> Vec<(f64, f64)> {
        if self.out_regions_deg.is_empty() {
            Sector::complement_regions(self.sector_min_deg, self.sector_max_deg, self.guard_deg)
        } else {
            self.out_regions_deg.iter().map(|r| (r[0], r[1])).collect()
        }
    }

    pub fn sector(&self) -> Result<Sector> {
        Ok(Sector::from_regions(
            self.sector_min_deg,
            self.sector_max_deg,
            self.in_step_deg,
            &self.out_regions(),
            self.out_step_deg,
        )?)
    }

    pub fn sector_centre(&self) -> f64 {
        0.5 * (self.sector_min_deg + self.sector_max_deg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.methods.is_empty(), "methods must not be empty");
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        ensure!(seen.len() == self.methods.len(), "methods contain duplicates");
        ensure!(self.runs >= 1, "runs must be at least 1");
        ensure!(self.pulses >= 1, "pulses must be at least 1");
        ensure!(!self.snr_db.is_empty(), "snr_db must not be empty");
        ensure!(
            self.snr_db.iter().all(|s| s.is_finite()),
            "snr_db values must be finite"
        );
        ensure!(
            self.snr_db.windows(2).all(|w| w[0] < w[1]),
            "snr_db must be strictly increasing"
        );
        ensure!(!self.targets_deg.is_empty(), "targets_deg must not be empty");
        ensure!(self.energy() > 0.0, "total_energy must be positive");
        ensure!(
            self.music_step_deg > 0.0 && self.music_step_deg <= 0.05,
            "music_step_deg must lie in (0, 0.05]"
        );
        ensure!(self.lut_step_deg > 0.0, "lut_step_deg must be positive");
        ensure!(self.target_gain > 0.0, "target_gain must be positive");
        if self.methods.contains(&Method::TbMinimax) {
            ensure!(self.gamma > 0.0, "gamma must be positive for tb-minimax");
        }
        self.tx()?;
        self.rx()?;
        self.targets()?;
        self.sector()?;
        Ok(())
    }
}
