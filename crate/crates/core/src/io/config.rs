use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{InitialState, NoiseModel, ProtocolConfig, ProtocolMode, Recoil, Tolerances};
use crate::engineered::{self, DriveCalibration, EngineeredBasisSpec, LambDickeParams};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::spectro::{BMode, BasisTag, FitOptions, StateFamily};

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

/// Experiment description read from TOML. Frequencies in `*_hz` keys are
/// cyclic and converted to rad/s; `*_per_s` keys are rates in 1/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub truncation: usize,
    pub target: TargetConfig,
    #[serde(default)]
    pub trap: TrapConfig,
    #[serde(default)]
    pub drives: DriveConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    #[serde(default)]
    pub alpha_re: f64,
    #[serde(default)]
    pub alpha_im: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub phi_s_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapConfig {
    pub trap_frequency_hz: f64,
    pub eta: f64,
    pub carrier_rabi_hz: f64,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            trap_frequency_hz: 1.9e6,
            eta: 0.05,
            carrier_rabi_hz: 400e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    /// Red-sideband anchor of the pump; defaults to 2 kHz for pulsed and
    /// 20 kHz for continuous pumping.
    pub pump_anchor_hz: Option<f64>,
    pub pump_phase_rad: f64,
    /// Blue-sideband anchor of the engineered-basis probes.
    pub probe_anchor_hz: f64,
    pub probe_phase_rad: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            pump_anchor_hz: None,
            pump_phase_rad: 0.0,
            probe_anchor_hz: 20e3,
            probe_phase_rad: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub spin_decay_hz: f64,
    pub heating_per_s: f64,
    pub dephasing_per_s: f64,
    pub recoil_chi: Option<f64>,
    pub recoil_eta_393: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            spin_decay_hz: 100e3,
            heating_per_s: 0.0,
            dephasing_per_s: 0.0,
            recoil_chi: None,
            recoil_eta_393: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    /// `pulsed` or `continuous`.
    pub mode: String,
    pub pulse_duration_s: f64,
    pub n_cycles: usize,
    pub total_time_s: f64,
    pub n_samples: usize,
    pub initial_nbar: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            mode: "pulsed".into(),
            pulse_duration_s: 25e-6,
            n_cycles: 200,
            total_time_s: 2e-3,
            n_samples: 40,
            initial_nbar: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// `blue_sideband`, `H_plus` or `H_minus`.
    pub basis: String,
    /// Overall flop scale `Ω_R / 2π`.
    pub rabi_hz: f64,
    pub decay_per_s: f64,
    pub drift_per_s: f64,
    pub shots: u32,
    pub n_points: usize,
    pub duration_s: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            basis: "blue_sideband".into(),
            rabi_hz: 128.5e3,
            decay_per_s: 370.0,
            drift_per_s: 0.0,
            shots: 300,
            n_points: 60,
            duration_s: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub n_max: usize,
    /// `coherent`, `squeezed`, `displaced-squeezed` or empty to follow the target.
    pub family: String,
    /// `auto`, `free` or a number in 1/s.
    pub drift: String,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_max: 20,
            family: String::new(),
            drift: "auto".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub coherence_time_s: f64,
    pub dark_state_dim: usize,
    pub r_grid_start: f64,
    pub r_grid_stop: f64,
    pub r_grid_step: f64,
    pub fidelity_threshold: f64,
    pub benchmark_dim: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            coherence_time_s: 32e-3,
            dark_state_dim: 6000,
            r_grid_start: 0.5,
            r_grid_stop: 3.5,
            r_grid_step: 0.25,
            fidelity_threshold: 0.95,
            benchmark_dim: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(cfg_err(field, format!("must be positive and finite, got {v}")))
    }
}

fn nonneg(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(cfg_err(field, format!("must be finite and ≥ 0, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg = Self::parse_unchecked(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validating, so command-line overrides can be applied
    /// first.
    pub fn parse_unchecked(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .and_then(|s| text.get(s))
                .map(|s| s.trim().to_string())
                .unwrap_or_else(|| "<document>".into());
            cfg_err(&field, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn load_unchecked(path: &Path) -> Result<Self> {
        Self::parse_unchecked(&std::fs::read_to_string(path)?)
    }

    /// Checks every section, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            return Err(cfg_err("seed", "a seed is required"));
        }
        if self.truncation < 2 {
            return Err(cfg_err("truncation", "need at least 2 Fock levels"));
        }
        self.spec().map_err(|e| cfg_err("target", e.to_string()))?;
        positive("trap.trap_frequency_hz", self.trap.trap_frequency_hz)?;
        if !(0.0..1.0).contains(&self.trap.eta) {
            return Err(cfg_err("trap.eta", format!("need 0 ≤ η < 1, got {}", self.trap.eta)));
        }
        positive("trap.carrier_rabi_hz", self.trap.carrier_rabi_hz)?;
        positive("drives.pump_anchor_hz", self.pump_anchor_hz())?;
        positive("drives.probe_anchor_hz", self.drives.probe_anchor_hz)?;
        nonneg("noise.spin_decay_hz", self.noise.spin_decay_hz)?;
        nonneg("noise.heating_per_s", self.noise.heating_per_s)?;
        nonneg("noise.dephasing_per_s", self.noise.dephasing_per_s)?;
        if self.noise.recoil_chi.is_some() != self.noise.recoil_eta_393.is_some() {
            return Err(cfg_err("noise.recoil_chi", "recoil needs both recoil_chi and recoil_eta_393"));
        }
        match self.protocol.mode.as_str() {
            "pulsed" => positive("protocol.pulse_duration_s", self.protocol.pulse_duration_s)?,
            "continuous" => {
                positive("protocol.total_time_s", self.protocol.total_time_s)?;
                if self.protocol.n_samples == 0 {
                    return Err(cfg_err("protocol.n_samples", "must be ≥ 1"));
                }
                positive("noise.spin_decay_hz", self.noise.spin_decay_hz)?;
            }
            other => return Err(cfg_err("protocol.mode", format!("expected pulsed or continuous, got `{other}`"))),
        }
        nonneg("protocol.initial_nbar", self.protocol.initial_nbar)?;
        self.basis_tag()?;
        positive("probe.rabi_hz", self.probe.rabi_hz)?;
        nonneg("probe.decay_per_s", self.probe.decay_per_s)?;
        if !self.probe.drift_per_s.is_finite() {
            return Err(cfg_err("probe.drift_per_s", "must be finite"));
        }
        if self.probe.shots == 0 {
            return Err(cfg_err("probe.shots", "must be ≥ 1"));
        }
        if self.probe.n_points < 2 {
            return Err(cfg_err("probe.n_points", "need at least 2 points"));
        }
        positive("probe.duration_s", self.probe.duration_s)?;
        self.family()?;
        self.drift_mode()?;
        positive("analysis.coherence_time_s", self.analysis.coherence_time_s)?;
        positive("analysis.r_grid_step", self.analysis.r_grid_step)?;
        if self.analysis.r_grid_stop <= self.analysis.r_grid_start {
            return Err(cfg_err("analysis.r_grid_stop", "must exceed r_grid_start"));
        }
        if self.output.dir.is_empty() {
            return Err(cfg_err("output.dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }

    pub fn spec(&self) -> Result<EngineeredBasisSpec> {
        EngineeredBasisSpec::new(C64::new(self.target.alpha_re, self.target.alpha_im), self.target.r, self.target.phi_s_rad)
    }

    pub fn lamb_dicke(&self) -> LambDickeParams {
        LambDickeParams {
            eta: self.trap.eta,
            omega_00: TAU * self.trap.carrier_rabi_hz,
        }
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            gamma_spin: TAU * self.noise.spin_decay_hz,
            gamma_heat: self.noise.heating_per_s,
            gamma_dephase: self.noise.dephasing_per_s,
            recoil: self.noise.recoil_chi.zip(self.noise.recoil_eta_393).map(|(chi, eta_393)| Recoil { chi, eta_393 }),
        }
    }

    pub fn pump_anchor_hz(&self) -> f64 {
        self.drives
            .pump_anchor_hz
            .unwrap_or(if self.protocol.mode == "continuous" { 20e3 } else { 2e3 })
    }

    pub fn pump_calibration(&self) -> Result<DriveCalibration> {
        engineered::pump_calibration(&self.spec()?, TAU * self.pump_anchor_hz(), self.drives.pump_phase_rad)
    }

    pub fn probe_calibration(&self) -> Result<DriveCalibration> {
        engineered::probe_calibration(&self.spec()?, TAU * self.drives.probe_anchor_hz, self.drives.probe_phase_rad)
    }

    pub fn protocol_config(&self) -> Result<ProtocolConfig> {
        let mode = match self.protocol.mode.as_str() {
            "pulsed" => ProtocolMode::Pulsed {
                pulse_duration: self.protocol.pulse_duration_s,
                n_cycles: self.protocol.n_cycles,
            },
            _ => ProtocolMode::Continuous {
                total_time: self.protocol.total_time_s,
                n_samples: self.protocol.n_samples,
            },
        };
        Ok(ProtocolConfig {
            mode,
            calibration: self.pump_calibration()?,
            noise: self.noise_model(),
            initial: InitialState::Thermal(self.protocol.initial_nbar),
            tol: Tolerances::default(),
        })
    }

    pub fn basis_tag(&self) -> Result<BasisTag> {
        BasisTag::parse(&self.probe.basis).map_err(|e| cfg_err("probe.basis", e.to_string()))
    }

    /// Family named in `[fit]`, or the one matching the target.
    pub fn family(&self) -> Result<StateFamily> {
        if self.fit.family.is_empty() {
            let spec = self.spec().map_err(|e| cfg_err("target", e.to_string()))?;
            return Ok(match (spec.alpha.norm() > 0.0, spec.r > 0.0) {
                (true, true) => StateFamily::DisplacedSqueezed,
                (false, true) => StateFamily::Squeezed,
                _ => StateFamily::Coherent,
            });
        }
        StateFamily::parse(&self.fit.family).map_err(|e| cfg_err("fit.family", e.to_string()))
    }

    pub fn drift_mode(&self) -> Result<BMode> {
        match self.fit.drift.trim() {
            "auto" => Ok(BMode::Auto),
            "free" => Ok(BMode::Free),
            s => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(BMode::Fixed)
                .ok_or_else(|| cfg_err("fit.drift", format!("expected auto, free or a number, got `{s}`"))),
        }
    }

    pub fn fit_options(&self) -> Result<FitOptions> {
        Ok(FitOptions {
            ld: self.lamb_dicke(),
            b: self.drift_mode()?,
            ..FitOptions::default()
        })
    }

    pub fn probe_times(&self) -> Vec<f64> {
        let n = self.probe.n_points;
        (0..n).map(|k| self.probe.duration_s * k as f64 / (n - 1) as f64).collect()
    }

    /// SHA-256 over the canonical TOML rendering of the effective config,
    /// leaving out the output location.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let text = toml::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
