//! Simulation configuration: TOML loading, defaults and validation.

use std::path::Path;

use anyhow::{bail, Context, Result};
use cfmimo_core::channel::{db_to_linear, FadingMode, FadingParams, ScenarioParams};
use cfmimo_core::detectors::{CentralDetector, LocalDetector};
use cfmimo_core::lsfd::Weighting;
use cfmimo_core::pilots::PilotNoiseModel;
use cfmimo_core::quantization::{QuantizerConfig, Resolution};
use cfmimo_core::scheduler::SchedulerConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Thermal noise density in dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

/// Which combining schemes an experiment evaluates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeSelection {
    Distributed,
    Centralized,
    #[default]
    Both,
}

impl SchemeSelection {
    pub fn distributed(self) -> bool {
        matches!(self, SchemeSelection::Distributed | SchemeSelection::Both)
    }

    pub fn centralized(self) -> bool {
        matches!(self, SchemeSelection::Centralized | SchemeSelection::Both)
    }
}

/// Values swept by the sweep experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub antennas: Vec<usize>,
    pub bits: Vec<u32>,
    pub nu: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            antennas: vec![1, 2, 4, 8],
            bits: vec![1, 2, 3, 4, 5],
            nu: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }
}

/// Everything needed to reproduce a run. Omitted fields take the simulation
/// defaults (20 MHz, 5 dB noise figure, 100 mW, 15 degree ASD, -20 dB
/// threshold, tau = 10 of tau_c = 200).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_aps: usize,
    pub num_ues: usize,
    pub antennas: usize,
    /// Side of the square area in metres.
    pub area_side: f64,
    pub tau: usize,
    pub tau_c: usize,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    /// Overrides the noise power derived from bandwidth and noise figure.
    pub sigma2_dbm: Option<f64>,
    /// Maximum UE power in W.
    pub p_max: f64,
    pub b_da: Resolution,
    pub b_ad: Resolution,
    pub asd_deg: f64,
    pub shadow_std_db: f64,
    pub eta_db: f64,
    pub nu: f64,
    /// Candidate radius for primary APs in metres; unset admits every AP.
    pub d_bar: Option<f64>,
    pub iterations: usize,
    pub fading: FadingMode,
    pub scheme: SchemeSelection,
    pub local_detector: LocalDetector,
    pub central_detector: CentralDetector,
    pub weighting: Weighting,
    pub pilot_noise: PilotNoiseModel,
    pub trials: usize,
    pub seed: u64,
    /// Independent network realizations pooled by every experiment.
    pub setups: usize,
    pub sweep: SweepConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_aps: 64,
            num_ues: 40,
            antennas: 2,
            area_side: 1000.0,
            tau: 10,
            tau_c: 200,
            bandwidth_hz: 20e6,
            noise_figure_db: 5.0,
            sigma2_dbm: None,
            p_max: 0.1,
            b_da: Resolution::Bits(4),
            b_ad: Resolution::Bits(4),
            asd_deg: 15.0,
            shadow_std_db: 4.0,
            eta_db: -20.0,
            nu: 0.8,
            d_bar: None,
            iterations: 2,
            fading: FadingMode::Rician,
            scheme: SchemeSelection::Both,
            local_detector: LocalDetector::LpMmse,
            central_detector: CentralDetector::PMmse,
            weighting: Weighting::PLsfd,
            pilot_noise: PilotNoiseModel::Aggregate,
            trials: 1000,
            seed: 0,
            setups: 1,
            sweep: SweepConfig::default(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("invalid `{field}`: must be positive and finite, got {v}");
    }
    Ok(())
}

fn at_least_one(field: &str, v: usize) -> Result<()> {
    if v == 0 {
        bail!("invalid `{field}`: must be at least 1");
    }
    Ok(())
}

impl SimConfig {
    /// Noise power in dBm, derived from bandwidth and noise figure unless set.
    pub fn sigma2_dbm(&self) -> f64 {
        self.sigma2_dbm
            .unwrap_or(THERMAL_NOISE_DBM_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db)
    }

    /// Noise power in W.
    pub fn sigma2(&self) -> f64 {
        db_to_linear(self.sigma2_dbm()) * 1e-3
    }

    pub fn validate(&self) -> Result<()> {
        at_least_one("num_aps", self.num_aps)?;
        at_least_one("num_ues", self.num_ues)?;
        at_least_one("antennas", self.antennas)?;
        at_least_one("tau", self.tau)?;
        at_least_one("iterations", self.iterations)?;
        at_least_one("trials", self.trials)?;
        at_least_one("setups", self.setups)?;
        if self.tau >= self.tau_c {
            bail!("invalid `tau`: pilot length {} must be below tau_c = {}", self.tau, self.tau_c);
        }
        positive("area_side", self.area_side)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("p_max", self.p_max)?;
        positive("asd_deg", self.asd_deg)?;
        if !(self.noise_figure_db.is_finite()) {
            bail!("invalid `noise_figure_db`: must be finite");
        }
        if let Some(s) = self.sigma2_dbm {
            if !s.is_finite() {
                bail!("invalid `sigma2_dbm`: must be finite");
            }
        }
        if !(self.shadow_std_db >= 0.0 && self.shadow_std_db.is_finite()) {
            bail!("invalid `shadow_std_db`: must be non-negative");
        }
        if !(self.eta_db <= 0.0) {
            bail!("invalid `eta_db`: threshold must be non-positive, got {}", self.eta_db);
        }
        if !(0.0..=1.0).contains(&self.nu) {
            bail!("invalid `nu`: must lie in [0, 1], got {}", self.nu);
        }
        if let Some(d) = self.d_bar {
            positive("d_bar", d)?;
        }
        self.quantizer().context("invalid `b_da`/`b_ad`")?;
        if self.sweep.antennas.contains(&0) {
            bail!("invalid `sweep.antennas`: entries must be at least 1");
        }
        if self.sweep.bits.contains(&0) {
            bail!("invalid `sweep.bits`: entries must be at least 1");
        }
        if self.sweep.nu.iter().any(|v| !(0.0..=1.0).contains(v)) {
            bail!("invalid `sweep.nu`: entries must lie in [0, 1]");
        }
        Ok(())
    }

    /// Parses TOML text and validates it.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).context("failed to parse configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn quantizer(&self) -> Result<QuantizerConfig> {
        Ok(QuantizerConfig::new(self.b_da, self.b_ad)?)
    }

    pub fn scenario_params(&self) -> ScenarioParams {
        ScenarioParams {
            num_aps: self.num_aps,
            num_ues: self.num_ues,
            antennas: self.antennas,
            area_side: self.area_side,
        }
    }

    pub fn fading_params(&self) -> FadingParams {
        FadingParams {
            asd: self.asd_deg.to_radians(),
            shadow_std_db: self.shadow_std_db,
            mode: self.fading,
        }
    }

    pub fn scheduler(&self) -> SchedulerConfig {
        SchedulerConfig {
            tau: self.tau,
            iterations: self.iterations,
            eta_db: self.eta_db,
            nu: self.nu,
            d_bar: self.d_bar,
            p_max: self.p_max,
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Reads and validates a TOML configuration file.
pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    SimConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))
}
