//! Experiment configuration files.
//!
//! A config is a single JSON object. Every block is optional and filled with
//! defaults on load; unknown keys are rejected. The resolved config (with
//! every default written out) is what the runner echoes into its manifest, so
//! loading the echo reproduces the run.

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::{Path, PathBuf};

use schemars::{schema_for, JsonSchema};
use serde::{Deserialize, Serialize};

use crate::detector::DetectorParams;
use crate::eit::LadderSystemParams;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::heterodyne::{laboratory_detector, thermal_medium, HeterodyneConfig, DEFAULT_MW_DIPOLE};
use crate::limits::LimitInputs;
use crate::stabilization::{ControlPlant, DriftModel, PidParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Spectrum,
    Pointer,
    Stabilize,
    Heterodyne,
    Calibrate,
    Limits,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Spectrum,
        Experiment::Pointer,
        Experiment::Stabilize,
        Experiment::Heterodyne,
        Experiment::Calibrate,
        Experiment::Limits,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Pointer => "pointer",
            Experiment::Stabilize => "stabilize",
            Experiment::Heterodyne => "heterodyne",
            Experiment::Calibrate => "calibrate",
            Experiment::Limits => "limits",
        }
    }

    pub fn from_name(s: &str) -> Option<Experiment> {
        Experiment::ALL.into_iter().find(|e| e.name() == s)
    }
}

/// Laser beams in front of the cell. Recorded with the run; the medium is
/// parameterized by Rabi frequencies directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsParams {
    /// W.
    pub probe_power: f64,
    /// W.
    pub coupling_power: f64,
    /// m.
    pub probe_waist: f64,
    /// m.
    pub coupling_waist: f64,
}

impl Default for OpticsParams {
    fn default() -> Self {
        OpticsParams {
            probe_power: 175e-6,
            coupling_power: 80e-3,
            probe_waist: 1.2e-3,
            coupling_waist: 2e-3,
        }
    }
}

impl OpticsParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("probe_power", self.probe_power)?;
        ensure_positive("coupling_power", self.coupling_power)?;
        ensure_positive("probe_waist", self.probe_waist)?;
        ensure_positive("coupling_waist", self.coupling_waist)
    }
}

/// Probe-detuning scan. Without explicit bounds the grid is ±20 γ₂ (plus
/// Doppler, coupling and microwave widths) with 4096 points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumBlock {
    /// Scan start, Hz of probe detuning.
    pub start_hz: Option<f64>,
    /// Scan stop, Hz.
    pub stop_hz: Option<f64>,
    pub points: usize,
    /// Microwave Rabi frequencies (rad/s) to scan in turn; empty means the
    /// medium's own `omega_mw`.
    pub omega_mw: Vec<f64>,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        SpectrumBlock {
            start_hz: None,
            stop_hz: None,
            points: crate::eit::DEFAULT_GRID_POINTS,
            omega_mw: Vec::new(),
        }
    }
}

impl SpectrumBlock {
    pub fn validate(&self) -> Result<()> {
        match (self.start_hz, self.stop_hz) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                ensure_finite("start_hz", a)?;
                ensure_finite("stop_hz", b)?;
                if b <= a {
                    return Err(Error::param("stop_hz", "must exceed start_hz"));
                }
            }
            _ => return Err(Error::param("stop_hz", "start_hz and stop_hz go together")),
        }
        if self.points < 8 {
            return Err(Error::param("points", "need at least 8"));
        }
        for v in &self.omega_mw {
            ensure_finite("omega_mw", *v)?;
            if *v < 0.0 {
                return Err(Error::param("omega_mw", "values must be >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PointerBlock {
    pub delta_phi: f64,
    pub delta_beta: f64,
    /// Post-selection angle, rad.
    pub post_angle: f64,
    /// rad/m.
    pub k: f64,
    /// m.
    pub w: f64,
    pub grid_points: usize,
    /// Also evaluate by brute-force quadrature.
    pub oracle: bool,
}

impl Default for PointerBlock {
    fn default() -> Self {
        PointerBlock {
            delta_phi: 1e-3,
            delta_beta: 0.0,
            post_angle: FRAC_PI_4,
            k: 1e-2 / 1.2e-3,
            w: 1.2e-3,
            grid_points: crate::pointer::DEFAULT_GRID_POINTS,
            oracle: true,
        }
    }
}

impl PointerBlock {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("delta_phi", self.delta_phi)?;
        ensure_finite("delta_beta", self.delta_beta)?;
        ensure_finite("post_angle", self.post_angle)?;
        if self.post_angle <= 0.0 || self.post_angle >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::param("post_angle", "must lie in (0, π/2)"));
        }
        ensure_finite("k", self.k)?;
        if self.k == 0.0 {
            return Err(Error::param("k", "must be nonzero"));
        }
        ensure_positive("w", self.w)?;
        if self.grid_points < 3 || self.grid_points % 2 == 0 {
            return Err(Error::param("grid_points", "must be odd and >= 3"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct StabilizeBlock {
    pub pid: PidParams,
    pub drift: DriftModel,
    pub plant: ControlPlant,
    /// s.
    pub duration: f64,
    /// Time the loop is closed, s.
    pub loop_on_at: f64,
}

impl Default for StabilizeBlock {
    fn default() -> Self {
        StabilizeBlock {
            pid: PidParams::default(),
            drift: DriftModel::default(),
            plant: ControlPlant::default(),
            duration: 10.0,
            loop_on_at: 5.0,
        }
    }
}

impl StabilizeBlock {
    pub fn validate(&self) -> Result<()> {
        prefix("pid", self.pid.validate())?;
        prefix("drift", self.drift.validate())?;
        prefix("plant", self.plant.validate())?;
        ensure_positive("duration", self.duration)?;
        ensure_finite("loop_on_at", self.loop_on_at)?;
        if self.loop_on_at < 0.0 || self.loop_on_at >= self.duration {
            return Err(Error::param("loop_on_at", "must lie in [0, duration)"));
        }
        Ok(())
    }
}

/// Pointer couplings to scan against the amplitude scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSweepBlock {
    /// rad/m.
    pub k: Vec<f64>,
    /// Signal field, V/m.
    pub e_signal: f64,
}

impl Default for CouplingSweepBlock {
    fn default() -> Self {
        CouplingSweepBlock {
            k: vec![300.0, 75.0, 20.0, 5.0, 1.5],
            e_signal: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct HeterodyneBlock {
    pub config: HeterodyneConfig,
    pub detector: DetectorParams,
    /// Run both readouts and compare them; otherwise only `config.readout`.
    pub compare: bool,
    /// Give the amplitude scheme the local-oscillator power of the reported
    /// amplitude-scheme measurement (2.8 dBm against 6 dBm), scaling its
    /// local Rabi frequency accordingly.
    pub lab_local_settings: bool,
    pub coupling_sweep: Option<CouplingSweepBlock>,
}

impl Default for HeterodyneBlock {
    fn default() -> Self {
        HeterodyneBlock {
            config: HeterodyneConfig::default(),
            detector: laboratory_detector(),
            compare: true,
            lab_local_settings: false,
            coupling_sweep: None,
        }
    }
}

/// Local-oscillator source power of the amplitude-scheme measurement, dBm.
pub const AMPLITUDE_LOCAL_DBM: f64 = 2.8;

impl HeterodyneBlock {
    pub fn validate(&self) -> Result<()> {
        prefix("config", self.config.validate())?;
        prefix("detector", self.detector.validate())?;
        if let Some(sweep) = &self.coupling_sweep {
            if sweep.k.is_empty() {
                return Err(Error::param("coupling_sweep.k", "needs at least one value"));
            }
            for k in &sweep.k {
                ensure_finite("coupling_sweep.k", *k)?;
                if *k == 0.0 {
                    return Err(Error::param("coupling_sweep.k", "values must be nonzero"));
                }
            }
            ensure_positive("coupling_sweep.e_signal", sweep.e_signal)?;
        }
        Ok(())
    }

    /// The amplitude-scheme counterpart of `config`.
    pub fn amplitude_config(&self) -> HeterodyneConfig {
        let mut c = HeterodyneConfig {
            readout: crate::heterodyne::Readout::Amplitude,
            ..self.config.clone()
        };
        if self.lab_local_settings {
            let db = AMPLITUDE_LOCAL_DBM - self.config.p_local_dbm;
            c.p_local_dbm = AMPLITUDE_LOCAL_DBM;
            c.omega_local *= 10f64.powf(db / 20.0);
        }
        c
    }

    pub fn dispersion_config(&self) -> HeterodyneConfig {
        HeterodyneConfig {
            readout: crate::heterodyne::Readout::Dispersion,
            ..self.config.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateBlock {
    /// Microwave input powers, W. Zero entries are reported as unresolved.
    pub powers_w: Vec<f64>,
    /// Field per √W at the atoms, V/(m·√W).
    pub horn_factor: f64,
    /// C·m.
    pub dipole_mw: f64,
}

impl Default for CalibrateBlock {
    fn default() -> Self {
        CalibrateBlock {
            powers_w: vec![1e-4, 2e-4, 4e-4, 8e-4, 1.6e-3],
            horn_factor: 40.0,
            dipole_mw: DEFAULT_MW_DIPOLE,
        }
    }
}

impl CalibrateBlock {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("horn_factor", self.horn_factor)?;
        ensure_positive("dipole_mw", self.dipole_mw)?;
        if self.powers_w.is_empty() {
            return Err(Error::param("powers_w", "needs at least one power"));
        }
        for p in &self.powers_w {
            ensure_finite("powers_w", *p)?;
            if *p < 0.0 {
                return Err(Error::param("powers_w", "powers must be >= 0"));
            }
        }
        Ok(())
    }
}

fn validate_limits(l: &LimitInputs) -> Result<()> {
    ensure_positive("t_meas", l.t_meas)?;
    if let Some(n) = l.n_atoms {
        ensure_positive("n_atoms", n)?;
    }
    ensure_positive("probe_power", l.probe_power)?;
    ensure_positive("probe_wavelength", l.probe_wavelength)?;
    ensure_positive("geometry.length", l.geometry.length)?;
    ensure_positive("geometry.beam_radius", l.geometry.beam_radius)?;
    ensure_positive("temperature", l.temperature)
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    /// Where output files go; relative paths resolve against the working
    /// directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Atomic medium. Defaults to atoms at rest for spectra and calibration
    /// and to the thermal vapor for heterodyne runs.
    #[serde(default)]
    pub medium: Option<LadderSystemParams>,
    #[serde(default)]
    pub optics: Option<OpticsParams>,
    #[serde(default)]
    pub spectrum: Option<SpectrumBlock>,
    #[serde(default)]
    pub pointer: Option<PointerBlock>,
    #[serde(default)]
    pub stabilize: Option<StabilizeBlock>,
    #[serde(default)]
    pub heterodyne: Option<HeterodyneBlock>,
    #[serde(default)]
    pub calibrate: Option<CalibrateBlock>,
    #[serde(default)]
    pub limits: Option<LimitInputs>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

// Re-labels a parameter error with the config key path it came from.
fn prefix(block: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::InvalidParameter { name, reason } => Error::InvalidParameter {
            name: format!("{block}.{name}"),
            reason,
        },
        other => other,
    })
}

fn as_validation(block: &str, r: Result<()>) -> Result<()> {
    prefix(block, r).map_err(|e| match e {
        Error::InvalidParameter { name, reason } => Error::ConfigValidation {
            key: name,
            message: reason,
        },
        Error::InvalidArgument(m) | Error::Domain(m) | Error::Precondition(m) => {
            Error::ConfigValidation {
                key: block.to_string(),
                message: m,
            }
        }
        other => other,
    })
}

impl ExperimentConfig {
    /// A config for `experiment` with every block at its defaults.
    pub fn new(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            seed: 0,
            output_dir: default_output_dir(),
            medium: None,
            optics: None,
            spectrum: None,
            pointer: None,
            stabilize: None,
            heterodyne: None,
            calibrate: None,
            limits: None,
        };
        c.resolve_defaults();
        c
    }

    /// Fills the medium, optics and the selected experiment's block.
    pub fn resolve_defaults(&mut self) {
        if self.medium.is_none() {
            self.medium = Some(match self.experiment {
                Experiment::Heterodyne => thermal_medium(),
                _ => LadderSystemParams::default(),
            });
        }
        self.optics.get_or_insert_with(OpticsParams::default);
        match self.experiment {
            Experiment::Spectrum => {
                self.spectrum.get_or_insert_with(Default::default);
            }
            Experiment::Pointer => {
                self.pointer.get_or_insert_with(Default::default);
            }
            Experiment::Stabilize => {
                self.stabilize.get_or_insert_with(Default::default);
            }
            Experiment::Heterodyne => {
                self.heterodyne.get_or_insert_with(Default::default);
            }
            Experiment::Calibrate => {
                self.calibrate.get_or_insert_with(Default::default);
            }
            Experiment::Limits => {
                self.limits.get_or_insert_with(Default::default);
            }
        }
    }

    pub fn medium(&self) -> LadderSystemParams {
        self.medium.clone().unwrap_or_default()
    }

    /// Checks every invariant; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let selected = self.experiment.name();
        let present = [
            ("spectrum", self.spectrum.is_some()),
            ("pointer", self.pointer.is_some()),
            ("stabilize", self.stabilize.is_some()),
            ("heterodyne", self.heterodyne.is_some()),
            ("calibrate", self.calibrate.is_some()),
            ("limits", self.limits.is_some()),
        ];
        for (name, is_present) in present {
            if is_present && name != selected {
                return Err(Error::ConfigValidation {
                    key: name.to_string(),
                    message: format!("block given but the selected experiment is `{selected}`"),
                });
            }
        }
        if let Some(m) = &self.medium {
            as_validation("medium", m.validate())?;
        }
        if let Some(o) = &self.optics {
            as_validation("optics", o.validate())?;
        }
        if let Some(b) = &self.spectrum {
            as_validation("spectrum", b.validate())?;
        }
        if let Some(b) = &self.pointer {
            as_validation("pointer", b.validate())?;
        }
        if let Some(b) = &self.stabilize {
            as_validation("stabilize", b.validate())?;
        }
        if let Some(b) = &self.heterodyne {
            as_validation("heterodyne", b.validate())?;
        }
        if let Some(b) = &self.calibrate {
            as_validation("calibrate", b.validate())?;
        }
        if let Some(b) = &self.limits {
            as_validation("limits", validate_limits(b))?;
        }
        Ok(())
    }
}

/// Parses a config from JSON text, applies defaults and validates it.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| Error::ConfigParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    config.resolve_defaults();
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

/// JSON schema of the block configuring `experiment`, or of the whole
/// config file for `"config"`.
pub fn schema(name: &str) -> Result<serde_json::Value> {
    let s = match name {
        "config" => schema_for!(ExperimentConfig),
        _ => match Experiment::from_name(name) {
            Some(Experiment::Spectrum) => schema_for!(SpectrumBlock),
            Some(Experiment::Pointer) => schema_for!(PointerBlock),
            Some(Experiment::Stabilize) => schema_for!(StabilizeBlock),
            Some(Experiment::Heterodyne) => schema_for!(HeterodyneBlock),
            Some(Experiment::Calibrate) => schema_for!(CalibrateBlock),
            Some(Experiment::Limits) => schema_for!(LimitInputs),
            None => {
                return Err(Error::InvalidArgument(format!(
                    "unknown experiment `{name}`; expected one of spectrum, pointer, stabilize, heterodyne, calibrate, limits, config"
                )))
            }
        },
    };
    Ok(serde_json::to_value(s)?)
}
