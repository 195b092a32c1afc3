//! Superheterodyne detection: a strong local microwave field dresses the
//! Rydberg ladder, a weak co-polarized signal field offset by `delta_f`
//! makes the dressing beat, and the beat is read optically either from the
//! probe transmission (amplitude scheme) or from the Sagnac pointer's
//! contrast ratio (dispersion scheme).
//!
//! The atoms follow the microwave adiabatically: the beat (150 kHz by
//! default) is far slower than the EIT linewidth, so every instant is mapped
//! through the steady-state susceptibility.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::constants::{BOHR_RADIUS, ELEMENTARY_CHARGE, HBAR, TWO_PI};
use crate::detector::{
    psd, sample_power_timeseries, sample_timeseries, DetectorParams, Psd, TimeSeries,
};
use crate::eit::{
    arm_response, at_splitting, default_grid, field_from_at_splitting, phase_and_absorption,
    susceptibility, susceptibility_spectrum, LadderSystemParams, PhaseAbsorptionPair,
};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::output::CsvTable;
use crate::pointer::{closed_form_readout, PostSelection, PreSelection, WeakCoupling};

/// Radial matrix element of the nD₅/₂ → (n+1)P₃/₂ microwave transition near
/// n = 44, including the angular factor, C·m.
pub const DEFAULT_MW_DIPOLE: f64 = 1000.0 * ELEMENTARY_CHARGE * BOHR_RADIUS;

/// Technical noise density of the laboratory setup, 1/√Hz. Applied both as
/// residual intensity noise of the amplitude readout and as noise of the
/// contrast-ratio electronics, so the two schemes see the same level at the
/// detector.
pub const LAB_TECHNICAL_NOISE: f64 = 1e-4;

/// Detector with the laboratory technical noise switched on.
pub fn laboratory_detector() -> DetectorParams {
    DetectorParams {
        rin: LAB_TECHNICAL_NOISE,
        icr_noise: LAB_TECHNICAL_NOISE,
        ..DetectorParams::default()
    }
}

/// The default ladder in a thermal vapor, as the receiver sees it.
pub fn thermal_medium() -> LadderSystemParams {
    LadderSystemParams {
        doppler_enabled: true,
        ..LadderSystemParams::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    /// Probe transmission on a single detector.
    Amplitude,
    /// Contrast ratio of the post-selected Sagnac output.
    Dispersion,
}

impl Readout {
    pub fn name(&self) -> &'static str {
        match self {
            Readout::Amplitude => "amplitude",
            Readout::Dispersion => "dispersion",
        }
    }
}

/// Weak-coupling pointer used by the dispersion readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PointerSetup {
    /// Transverse momentum kick, rad/m.
    pub k: f64,
    /// Pointer width, m.
    pub w: f64,
    /// Post-selection angle, rad.
    pub post_angle: f64,
}

impl Default for PointerSetup {
    fn default() -> Self {
        PointerSetup {
            k: 75.0,
            w: 1.2e-3,
            post_angle: FRAC_PI_4,
        }
    }
}

impl PointerSetup {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("pointer.k", self.k)?;
        if self.k == 0.0 {
            return Err(Error::param("pointer.k", "must be nonzero"));
        }
        ensure_positive("pointer.w", self.w)?;
        ensure_finite("pointer.post_angle", self.post_angle)?;
        if self.post_angle <= 0.0 || self.post_angle >= FRAC_PI_2 {
            return Err(Error::param("pointer.post_angle", "must lie in (0, π/2)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct HeterodyneConfig {
    /// Local oscillator frequency, Hz.
    pub f_local: f64,
    /// Local oscillator source power, dBm. Informational only.
    pub p_local_dbm: f64,
    /// Rabi frequency of the local field, rad/s.
    pub omega_local: f64,
    /// Signal frequency, Hz.
    pub f_signal: f64,
    /// Signal field amplitudes to sweep, V/m, increasing.
    pub e_signal: Vec<f64>,
    /// Beat frequency, Hz; must equal `|f_signal − f_local|`.
    pub delta_f: f64,
    /// Microwave transition dipole, C·m.
    pub dipole_mw: f64,
    /// Length of each simulated record, s.
    pub integration_time: f64,
    pub readout: Readout,
    /// Sample rate of the simulated record, Hz.
    pub sample_rate: f64,
    /// Welch segment length in samples.
    pub segment_length: usize,
    /// Probe power entering the cell, W.
    pub probe_power: f64,
    pub pointer: PointerSetup,
}

impl Default for HeterodyneConfig {
    fn default() -> Self {
        HeterodyneConfig {
            f_local: 8.566e9,
            p_local_dbm: 6.0,
            omega_local: TWO_PI * 4.0e6,
            f_signal: 8.566_15e9,
            e_signal: log_sweep(1e-4, 3e-2, 5),
            delta_f: 150e3,
            dipole_mw: DEFAULT_MW_DIPOLE,
            integration_time: 0.1,
            readout: Readout::Dispersion,
            sample_rate: 3.2768e6,
            segment_length: 32768,
            probe_power: 175e-6,
            pointer: PointerSetup::default(),
        }
    }
}

/// Log-spaced points from `lo` to `hi` inclusive, `per_decade` per decade.
pub fn log_sweep(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize;
    (0..=n)
        .map(|i| lo * 10f64.powf(decades * i as f64 / n.max(1) as f64))
        .collect()
}

impl HeterodyneConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("f_local", self.f_local)?;
        ensure_finite("p_local_dbm", self.p_local_dbm)?;
        ensure_positive("omega_local", self.omega_local)?;
        ensure_positive("f_signal", self.f_signal)?;
        ensure_positive("delta_f", self.delta_f)?;
        let offset = (self.f_signal - self.f_local).abs();
        if (offset - self.delta_f).abs() > 1e-6 * self.delta_f + 1e-3 {
            return Err(Error::param(
                "delta_f",
                format!(
                    "must equal |f_signal - f_local| = {offset} Hz, got {}",
                    self.delta_f
                ),
            ));
        }
        ensure_positive("dipole_mw", self.dipole_mw)?;
        ensure_positive("integration_time", self.integration_time)?;
        ensure_positive("probe_power", self.probe_power)?;
        ensure_positive("sample_rate", self.sample_rate)?;
        if self.sample_rate < 20.0 * self.delta_f {
            return Err(Error::param(
                "sample_rate",
                format!("must be >= 20 delta_f = {} Hz", 20.0 * self.delta_f),
            ));
        }
        let n = (self.integration_time * self.sample_rate).round() as usize;
        if self.segment_length < 16 || self.segment_length > n {
            return Err(Error::param(
                "segment_length",
                format!("must lie in [16, {n}] (samples in the record)"),
            ));
        }
        if self.e_signal.is_empty() {
            return Err(Error::param("e_signal", "needs at least one field value"));
        }
        for (i, e) in self.e_signal.iter().enumerate() {
            ensure_finite("e_signal", *e)?;
            if *e <= 0.0 {
                return Err(Error::param("e_signal", "values must be > 0"));
            }
            if i > 0 && *e <= self.e_signal[i - 1] {
                return Err(Error::param(
                    "e_signal",
                    "values must be strictly increasing",
                ));
            }
        }
        self.pointer.validate()
    }

    /// Rabi frequency of a signal field of amplitude `e`, rad/s.
    pub fn signal_rabi(&self, e: f64) -> f64 {
        self.dipole_mw * e / HBAR
    }
}

/// Co-aligned phasor approximation of the dressing Rabi frequency,
/// `Ω_l + Ω_s cos(2π δf t)`.
pub fn instantaneous_rabi(config: &HeterodyneConfig, e_signal: f64, t: f64) -> f64 {
    config.omega_local + config.signal_rabi(e_signal) * (TWO_PI * config.delta_f * t).cos()
}

/// Magnitude of the summed phasors, `|Ω_l + Ω_s e^{i 2π δf t}|`.
pub fn instantaneous_rabi_exact(config: &HeterodyneConfig, e_signal: f64, t: f64) -> f64 {
    rabi_magnitude(
        config.omega_local,
        config.signal_rabi(e_signal),
        (TWO_PI * config.delta_f * t).cos(),
    )
}

fn rabi_magnitude(omega_l: f64, omega_s: f64, cos_phase: f64) -> f64 {
    (omega_l * omega_l + omega_s * omega_s + 2.0 * omega_l * omega_s * cos_phase).sqrt()
}

/// Maps the dressing Rabi frequency at a fixed probe detuning onto the
/// readout observable.
///
/// For the dispersion scheme the static loop imbalance at the local-field
/// operating point is trimmed out (a waveplate for the phase, the
/// post-selection polarizer for the amplitude mismatch), so the pointer sits
/// at its balanced point and only the beat moves it.
#[derive(Debug, Clone)]
pub struct ReadoutModel {
    medium: LadderSystemParams,
    readout: Readout,
    pointer: PointerSetup,
    delta_p: f64,
    bias: PhaseAbsorptionPair,
    reference: PhaseAbsorptionPair,
    probe_power: f64,
}

impl ReadoutModel {
    pub fn new(
        config: &HeterodyneConfig,
        medium: &LadderSystemParams,
        delta_p: f64,
    ) -> Result<Self> {
        let dressed = medium.with_omega_mw(config.omega_local);
        let arms = arm_response(&dressed, delta_p)?;
        Ok(ReadoutModel {
            medium: medium.clone(),
            readout: config.readout,
            pointer: config.pointer,
            delta_p,
            bias: arms.differential(),
            reference: arms.reference,
            probe_power: config.probe_power,
        })
    }

    fn signal_arm(&self, omega_mw: f64) -> Result<PhaseAbsorptionPair> {
        let p = self.medium.with_omega_mw(omega_mw);
        Ok(phase_and_absorption(susceptibility(&p, self.delta_p)?, &p))
    }

    fn pre_selection(&self, signal: PhaseAbsorptionPair) -> PreSelection {
        let dphi = signal.delta_phi - self.reference.delta_phi - self.bias.delta_phi;
        let dbeta = signal.delta_beta - self.reference.delta_beta - self.bias.delta_beta;
        PreSelection::new(dphi, dbeta / 2.0)
    }

    /// Transmission (amplitude) or contrast ratio (dispersion) at `omega_mw`.
    pub fn observable(&self, omega_mw: f64) -> Result<f64> {
        let signal = self.signal_arm(omega_mw)?;
        match self.readout {
            Readout::Amplitude => Ok(signal.power_transmission()),
            Readout::Dispersion => {
                let r = closed_form_readout(
                    &self.pre_selection(signal),
                    &PostSelection {
                        angle: self.pointer.post_angle,
                    },
                    &WeakCoupling { k: self.pointer.k },
                    self.pointer.w,
                )?;
                Ok(r.eta)
            }
        }
    }

    /// Optical power reaching the detector at the operating point, W.
    pub fn detected_power(&self, omega_mw: f64) -> Result<f64> {
        let signal = self.signal_arm(omega_mw)?;
        match self.readout {
            Readout::Amplitude => Ok(self.probe_power * signal.power_transmission()),
            Readout::Dispersion => {
                let mean_t =
                    0.5 * (signal.power_transmission() + self.reference.power_transmission());
                let r = closed_form_readout(
                    &self.pre_selection(signal),
                    &PostSelection {
                        angle: self.pointer.post_angle,
                    },
                    &WeakCoupling { k: self.pointer.k },
                    self.pointer.w,
                )?;
                Ok(self.probe_power * mean_t * r.p_post)
            }
        }
    }

    /// `d(observable)/dΩ_mw` by central difference.
    pub fn slope(&self, omega_mw: f64) -> Result<f64> {
        let h = 1e-4 * omega_mw.abs().max(TWO_PI * 1e3);
        Ok((self.observable(omega_mw + h)? - self.observable(omega_mw - h)?) / (2.0 * h))
    }
}

/// Probe detuning with the steepest small-signal response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OperatingPoint {
    /// rad/s.
    pub delta_p: f64,
    /// Observable change per rad/s of Rabi frequency.
    pub slope: f64,
    /// Optical power on the detector, W.
    pub detected_power: f64,
}

const SWEEP_POINTS: usize = 801;

/// Locates the probe detuning of maximum `|d observable / dΩ_mw|` with a
/// preparatory sweep followed by a golden-section refinement.
pub fn find_operating_point(
    config: &HeterodyneConfig,
    medium: &LadderSystemParams,
) -> Result<OperatingPoint> {
    config.validate()?;
    medium.validate()?;
    let half = medium.omega_c.abs() + config.omega_local + 2.0 * medium.gamma_2;
    let step = 2.0 * half / (SWEEP_POINTS - 1) as f64;
    let slope_at = |dp: f64| -> Result<f64> {
        ReadoutModel::new(config, medium, dp)?
            .slope(config.omega_local)
            .map(f64::abs)
    };
    let slopes: Vec<f64> = (0..SWEEP_POINTS)
        .into_par_iter()
        .map(|i| slope_at(-half + step * i as f64))
        .collect::<Result<_>>()?;
    let best = slopes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let centre = -half + step * best as f64;
    let dp = golden_max(&slope_at, centre - step, centre + step, 1e-6 * step)?;
    let model = ReadoutModel::new(config, medium, dp)?;
    Ok(OperatingPoint {
        delta_p: dp,
        slope: model.slope(config.omega_local)?,
        detected_power: model.detected_power(config.omega_local)?,
    })
}

fn golden_max(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

// Chebyshev nodes used to expand the response over one beat period.
const HARMONIC_NODES: usize = 16;

/// Response over one beat cycle as a cosine series in the beat phase:
/// observable(t) = Σₙ aₙ cos(n 2π δf t). Because |Ω(t)| depends on t only
/// through cos(2π δf t), this is the Chebyshev expansion of the response in
/// that cosine.
///
/// Below [`SMALL_SIGNAL_FRACTION`] of the local Rabi frequency the expansion
/// is taken at that fraction and the n-th harmonic scaled by (Ω_s/Ω_ref)ⁿ,
/// its leading small-signal order, so quadrature error in the medium
/// response never masquerades as beat signal.
fn beat_harmonics(model: &ReadoutModel, omega_l: f64, omega_s: f64) -> Result<Vec<f64>> {
    let reference = SMALL_SIGNAL_FRACTION * omega_l;
    if omega_s < reference {
        let mut a = beat_harmonics_direct(model, omega_l, reference)?;
        let r = omega_s / reference;
        let mut scale = 1.0;
        for coef in a.iter_mut().skip(1) {
            scale *= r;
            *coef *= scale;
        }
        return Ok(a);
    }
    beat_harmonics_direct(model, omega_l, omega_s)
}

/// Signal-to-local ratio below which the beat is treated as small-signal.
pub const SMALL_SIGNAL_FRACTION: f64 = 1e-4;

fn beat_harmonics_direct(model: &ReadoutModel, omega_l: f64, omega_s: f64) -> Result<Vec<f64>> {
    let n = HARMONIC_NODES;
    let centre = model.observable(omega_l)?;
    let values: Vec<f64> = (0..n)
        .map(|j| {
            let u = (PI * (j as f64 + 0.5) / n as f64).cos();
            model
                .observable(rabi_magnitude(omega_l, omega_s, u))
                .map(|v| v - centre)
        })
        .collect::<Result<_>>()?;
    let mut a: Vec<f64> = (0..n)
        .map(|m| {
            2.0 / n as f64
                * values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (PI * m as f64 * (j as f64 + 0.5) / n as f64).cos())
                    .sum::<f64>()
        })
        .collect();
    a[0] = 0.5 * a[0] + centre;
    Ok(a)
}

fn cosine_series(a: &[f64], x: f64) -> f64 {
    // cos(n x) by the Chebyshev recurrence.
    let c1 = x.cos();
    let (mut prev, mut cur) = (1.0, c1);
    let mut acc = a[0] + a.get(1).copied().unwrap_or(0.0) * c1;
    for coef in a.iter().skip(2) {
        let next = 2.0 * c1 * cur - prev;
        acc += coef * next;
        prev = cur;
        cur = next;
    }
    acc
}

/// A readout chain with its operating point fixed, ready to simulate records.
#[derive(Debug, Clone)]
pub struct BeatSimulator {
    config: HeterodyneConfig,
    det: DetectorParams,
    model: ReadoutModel,
    pub operating_point: OperatingPoint,
}

impl BeatSimulator {
    pub fn new(
        config: &HeterodyneConfig,
        medium: &LadderSystemParams,
        det: &DetectorParams,
    ) -> Result<Self> {
        det.validate()?;
        let op = find_operating_point(config, medium)?;
        Ok(BeatSimulator {
            config: config.clone(),
            det: det.clone(),
            model: ReadoutModel::new(config, medium, op.delta_p)?,
            operating_point: op,
        })
    }

    /// Noisy record of the readout observable for one signal amplitude.
    pub fn run(&self, e_signal: f64, seed: u64) -> Result<TimeSeries> {
        ensure_finite("e_signal", e_signal)?;
        if e_signal < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "e_signal must be >= 0, got {e_signal}"
            )));
        }
        let cfg = &self.config;
        let omega_s = cfg.signal_rabi(e_signal);
        if omega_s > 0.1 * cfg.omega_local {
            warn!(
                "signal Rabi frequency {omega_s:.3e} rad/s is not << local {:.3e} rad/s",
                cfg.omega_local
            );
        }
        let a = beat_harmonics(&self.model, cfg.omega_local, omega_s)?;
        let w = TWO_PI * cfg.delta_f;
        let p_det = self.operating_point.detected_power;
        match cfg.readout {
            Readout::Dispersion => {
                let signal = move |t: f64| {
                    let eta = cosine_series(&a, w * t);
                    (0.5 * p_det * (1.0 + eta), 0.5 * p_det * (1.0 - eta))
                };
                sample_timeseries(
                    &signal,
                    &self.det,
                    cfg.sample_rate,
                    cfg.integration_time,
                    seed,
                )
            }
            Readout::Amplitude => {
                let p_in = cfg.probe_power;
                let signal = move |t: f64| p_in * cosine_series(&a, w * t);
                sample_power_timeseries(
                    &signal,
                    p_in,
                    &self.det,
                    cfg.sample_rate,
                    cfg.integration_time,
                    seed,
                )
            }
        }
    }
}

/// Simulates one record of the readout observable at signal amplitude
/// `e_signal` (V/m), with the probe parked at the operating point.
pub fn run_beat_experiment(
    config: &HeterodyneConfig,
    medium: &LadderSystemParams,
    det: &DetectorParams,
    e_signal: f64,
    seed: u64,
) -> Result<TimeSeries> {
    BeatSimulator::new(config, medium, det)?.run(e_signal, seed)
}

/// Beat line read off a Welch spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatEstimate {
    pub psd: Psd,
    /// Largest bin above DC.
    pub peak_bin: usize,
    /// Frequency of that bin, Hz.
    pub peak_freq: f64,
    /// Power in the beat line above the floor, observable units².
    pub beat_power: f64,
    /// Mean noise density near the beat, observable units² / Hz.
    pub floor_density: f64,
    /// Width of the bins summed into the line, Hz.
    pub line_bandwidth: f64,
}

impl BeatEstimate {
    /// Beat power over the noise in a 1 Hz bandwidth.
    pub fn snr(&self) -> f64 {
        if self.floor_density > 0.0 {
            self.beat_power / self.floor_density
        } else {
            f64::INFINITY
        }
    }

    /// Whether the line stands [`DETECTION_MARGIN`] above the noise that
    /// falls inside its own bins, i.e. is visible above the noise base.
    pub fn above_floor(&self) -> bool {
        self.beat_power > DETECTION_MARGIN * self.floor_density * self.line_bandwidth
    }
}

/// Power ratio by which a resolved line must exceed the in-line noise.
pub const DETECTION_MARGIN: f64 = 10.0;

// Bins either side of the beat bin that hold the Hann main lobe.
const LINE_HALF_WIDTH: usize = 2;
// Bins either side excluded from the floor estimate.
const FLOOR_GUARD: usize = 5;
// Half-width of the floor window, Hz.
const FLOOR_WINDOW_HZ: f64 = 20e3;

pub fn analyze_beat(ts: &TimeSeries, delta_f: f64, segment_length: usize) -> Result<BeatEstimate> {
    let spec = psd(ts, segment_length, segment_length / 2)?;
    let df = spec.bin_width();
    let centre = (delta_f / df).round() as usize;
    let nbins = spec.density.len();
    let half_window = (FLOOR_WINDOW_HZ / df).round() as usize;
    if centre < half_window + 1 || centre + half_window >= nbins {
        return Err(Error::InvalidArgument(format!(
            "beat at {delta_f} Hz is too close to DC or Nyquist for the floor window"
        )));
    }
    let mut floor_sum = 0.0;
    let mut floor_n = 0usize;
    for i in centre - half_window..=centre + half_window {
        if i.abs_diff(centre) > FLOOR_GUARD {
            floor_sum += spec.density[i];
            floor_n += 1;
        }
    }
    let floor = floor_sum / floor_n as f64;
    let line: f64 = spec.density[centre - LINE_HALF_WIDTH..=centre + LINE_HALF_WIDTH]
        .iter()
        .map(|d| d - floor)
        .sum::<f64>()
        * df;
    let peak_bin = spec.peak_bin();
    Ok(BeatEstimate {
        peak_freq: spec.freq[peak_bin],
        peak_bin,
        beat_power: line,
        floor_density: floor,
        line_bandwidth: (2 * LINE_HALF_WIDTH + 1) as f64 * df,
        psd: spec,
    })
}

fn db(x: f64) -> Option<f64> {
    (x > 0.0 && x.is_finite()).then(|| 10.0 * x.log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SweepPoint {
    /// Signal field, V/cm.
    pub e_vpercm: f64,
    /// Beat power above the floor, dB (arbitrary reference); null when the
    /// line is not above the floor.
    pub beat_db: Option<f64>,
    /// Beat power over the noise in 1 Hz, dB.
    pub snr_db: Option<f64>,
    /// The line is resolved above the noise base.
    pub above_floor: bool,
}

/// Straight line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::InvalidArgument(
            "linear fit needs two or more (x, y) pairs".into(),
        ));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "linear fit needs distinct x values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
    })
}

/// Minimum R² accepted for the linear region.
pub const MIN_LINEAR_R2: f64 = 0.99;
/// Points below this SNR are not used to locate the linear region.
pub const MIN_FIT_SNR_DB: f64 = 3.0;

/// Field at which the linear (dB–dB) part of the SNR curve crosses 0 dB.
///
/// `points` are `(E, snr_db)` with E in any unit; the crossing is returned in
/// the same unit. The fit abscissa is `10 log10 E`, so a power-law beat
/// (power ∝ E²) has slope 2. Points at or below [`MIN_FIT_SNR_DB`] are
/// ignored. The linear region is the lowest decade of the remaining points
/// (at least three of them), where the response is furthest from
/// saturation; it must fit a line to [`MIN_LINEAR_R2`].
pub fn min_detectable_field(points: &[(f64, f64)]) -> Result<(f64, LinearFit)> {
    let mut usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(e, s)| *e > 0.0 && e.is_finite() && s.is_finite() && *s > MIN_FIT_SNR_DB)
        .collect();
    usable.sort_by(|a, b| a.0.total_cmp(&b.0));
    if usable.len() < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 points above the noise floor, have {}",
            usable.len()
        )));
    }
    let decade_end = usable[0].0 * 10.0 * (1.0 + 1e-9);
    let n = usable.iter().filter(|p| p.0 <= decade_end).count().max(3);
    let x: Vec<f64> = usable[..n].iter().map(|p| 10.0 * p.0.log10()).collect();
    let y: Vec<f64> = usable[..n].iter().map(|p| p.1).collect();
    let fit = linear_fit(&x, &y)?;
    if !(fit.r2 >= MIN_LINEAR_R2 && fit.slope > 0.0) {
        return Err(Error::FitFailure { r_squared: fit.r2 });
    }
    let x0 = -fit.intercept / fit.slope;
    Ok((10f64.powf(x0 / 10.0), fit))
}

/// Outcome of a field sweep for one readout scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SensitivityResult {
    pub scheme: Readout,
    pub operating_point: OperatingPoint,
    pub points: Vec<SweepPoint>,
    /// Minimum detectable field, V/cm; null when no linear region was found.
    pub e_min_vpercm: Option<f64>,
    pub fit: Option<LinearFit>,
    /// Mean noise floor in a 1 Hz bandwidth, dB.
    pub noise_floor_db: Option<f64>,
}

impl SensitivityResult {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut t = CsvTable::new(&["e_vpercm", "beat_db", "snr_db", "above_floor"]);
        for p in &self.points {
            t.push(&[
                p.e_vpercm,
                p.beat_db.unwrap_or(f64::NAN),
                p.snr_db.unwrap_or(f64::NAN),
                if p.above_floor { 1.0 } else { 0.0 },
            ]);
        }
        t.write(path)
    }

    /// `(E in V/m, snr_db)` for every point resolved above the noise base.
    pub fn snr_points(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.above_floor)
            .filter_map(|p| p.snr_db.map(|s| (p.e_vpercm * 100.0, s)))
            .collect()
    }
}

/// Seed of the `i`-th sweep point.
pub fn point_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs every field in `config.e_signal` and extracts beat power and SNR.
/// Points run in parallel; each has its own seed, so the result does not
/// depend on the thread count.
pub fn sensitivity_sweep(
    config: &HeterodyneConfig,
    medium: &LadderSystemParams,
    det: &DetectorParams,
    seed: u64,
) -> Result<SensitivityResult> {
    let sim = BeatSimulator::new(config, medium, det)?;
    let estimates: Vec<BeatEstimate> = config
        .e_signal
        .par_iter()
        .enumerate()
        .map(|(i, &e)| {
            let ts = sim.run(e, point_seed(seed, i))?;
            analyze_beat(&ts, config.delta_f, config.segment_length)
        })
        .collect::<Result<_>>()?;
    let floor = estimates.iter().map(|b| b.floor_density).sum::<f64>() / estimates.len() as f64;
    let points: Vec<SweepPoint> = config
        .e_signal
        .iter()
        .zip(&estimates)
        .map(|(e, b)| SweepPoint {
            e_vpercm: e / 100.0,
            beat_db: db(b.beat_power),
            snr_db: db(b.snr()),
            above_floor: b.above_floor(),
        })
        .collect();
    let mut result = SensitivityResult {
        scheme: config.readout,
        operating_point: sim.operating_point,
        points,
        e_min_vpercm: None,
        fit: None,
        noise_floor_db: db(floor),
    };
    match min_detectable_field(&result.snr_points()) {
        Ok((e_min, fit)) => {
            result.e_min_vpercm = Some(e_min / 100.0);
            result.fit = Some(fit);
        }
        Err(e) => warn!(
            "{} scheme: no minimum detectable field: {e}",
            config.readout.name()
        ),
    }
    Ok(result)
}

/// Differences between the two schemes run under identical conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SchemeComparison {
    /// Mean SNR advantage of the first scheme at matched fields where both
    /// lines are resolved, dB.
    pub delta_sensitivity_db: Option<f64>,
    /// `e_min(second) / e_min(first)`.
    pub e_min_ratio: Option<f64>,
    /// The same ratio as a field-amplitude level, `20 log10`.
    pub delta_min_field_db: Option<f64>,
    /// The same ratio as `10 log10`.
    pub delta_min_field_db_ratio: Option<f64>,
}

pub fn compare_results(first: &SensitivityResult, second: &SensitivityResult) -> SchemeComparison {
    let diffs: Vec<f64> = first
        .points
        .iter()
        .zip(&second.points)
        .filter_map(|(a, b)| match (a.snr_db, b.snr_db) {
            (Some(x), Some(y)) if a.above_floor && b.above_floor && a.e_vpercm == b.e_vpercm => {
                Some(x - y)
            }
            _ => None,
        })
        .collect();
    let delta = (!diffs.is_empty()).then(|| diffs.iter().sum::<f64>() / diffs.len() as f64);
    let ratio = match (first.e_min_vpercm, second.e_min_vpercm) {
        (Some(a), Some(b)) if a > 0.0 => Some(b / a),
        _ => None,
    };
    SchemeComparison {
        delta_sensitivity_db: delta,
        e_min_ratio: ratio,
        delta_min_field_db: ratio.map(|r| 20.0 * r.log10()),
        delta_min_field_db_ratio: ratio.map(|r| 10.0 * r.log10()),
    }
}

/// Both sweeps plus their comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ComparisonReport {
    pub first: SensitivityResult,
    pub second: SensitivityResult,
    pub comparison: SchemeComparison,
}

/// Runs `first` and `second` through the same medium, detector and seeds
/// and compares them. The records must have the same length and field list.
pub fn scheme_comparison(
    first: &HeterodyneConfig,
    second: &HeterodyneConfig,
    medium: &LadderSystemParams,
    det: &DetectorParams,
    seed: u64,
) -> Result<ComparisonReport> {
    if first.integration_time != second.integration_time
        || first.sample_rate != second.sample_rate
        || first.e_signal != second.e_signal
    {
        return Err(Error::Precondition(
            "compared schemes must share integration time, sample rate and field list".into(),
        ));
    }
    let a = sensitivity_sweep(first, medium, det, seed)?;
    let b = sensitivity_sweep(second, medium, det, seed)?;
    let comparison = compare_results(&a, &b);
    Ok(ComparisonReport {
        first: a,
        second: b,
        comparison,
    })
}

/// The dispersion scheme at one pointer coupling against a fixed amplitude
/// baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CouplingSweepPoint {
    pub k: f64,
    /// Post-selected power on the detector, W.
    pub detected_power: f64,
    pub snr_db: Option<f64>,
    /// SNR over the amplitude scheme at the same field, dB.
    pub advantage_db: Option<f64>,
}

/// Dispersion-scheme SNR at field `e` (V/m) for each pointer coupling in
/// `ks`, relative to the amplitude scheme under the same noise and seed.
pub fn coupling_sweep(
    config: &HeterodyneConfig,
    medium: &LadderSystemParams,
    det: &DetectorParams,
    ks: &[f64],
    e: f64,
    seed: u64,
) -> Result<Vec<CouplingSweepPoint>> {
    let amp_cfg = HeterodyneConfig {
        readout: Readout::Amplitude,
        ..config.clone()
    };
    let amp = BeatSimulator::new(&amp_cfg, medium, det)?;
    let amp_snr = analyze_beat(&amp.run(e, seed)?, config.delta_f, config.segment_length)?.snr();
    ks.par_iter()
        .map(|&k| {
            let cfg = HeterodyneConfig {
                readout: Readout::Dispersion,
                pointer: PointerSetup {
                    k,
                    ..config.pointer
                },
                ..config.clone()
            };
            let sim = BeatSimulator::new(&cfg, medium, det)?;
            let snr = analyze_beat(&sim.run(e, seed)?, cfg.delta_f, cfg.segment_length)?.snr();
            Ok(CouplingSweepPoint {
                k,
                detected_power: sim.operating_point.detected_power,
                snr_db: db(snr),
                advantage_db: match (db(snr), db(amp_snr)) {
                    (Some(a), Some(b)) => Some(a - b),
                    _ => None,
                },
            })
        })
        .collect()
}

/// One power of the AT calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CalibrationPoint {
    /// Microwave input power, W.
    pub power_w: f64,
    pub sqrt_power: f64,
    /// Field applied to the atoms, V/m.
    pub e_applied: f64,
    /// Measured splitting, Hz; null when unresolved.
    pub f_at_hz: Option<f64>,
    /// Field recovered from the splitting, V/m.
    pub e_recovered: Option<f64>,
    pub unresolved: bool,
}

/// Fit of recovered field against √P through the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CalibrationFit {
    /// V/(m·√W).
    pub slope: f64,
    pub r_squared: f64,
    pub points: Vec<CalibrationPoint>,
}

impl CalibrationFit {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut t = CsvTable::new(&[
            "power_w",
            "sqrt_power",
            "e_applied",
            "f_at_hz",
            "e_recovered",
            "unresolved",
        ]);
        for p in &self.points {
            t.push(&[
                p.power_w,
                p.sqrt_power,
                p.e_applied,
                p.f_at_hz.unwrap_or(f64::NAN),
                p.e_recovered.unwrap_or(f64::NAN),
                if p.unresolved { 1.0 } else { 0.0 },
            ]);
        }
        t.write(path)
    }
}

/// Microwave power → field (`E = horn_factor √P`) → simulated spectrum →
/// AT splitting → field, then a least-squares line through the origin of
/// recovered field against √P. Powers whose splitting is unresolved are
/// kept in the output, flagged, and left out of the fit.
pub fn calibration_curve(
    powers: &[f64],
    horn_factor: f64,
    dipole_mw: f64,
    medium: &LadderSystemParams,
) -> Result<CalibrationFit> {
    ensure_positive("horn_factor", horn_factor)?;
    ensure_positive("dipole_mw", dipole_mw)?;
    medium.validate()?;
    for p in powers {
        ensure_finite("powers", *p)?;
        if *p < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "powers must be >= 0, got {p}"
            )));
        }
    }
    let positive: Vec<f64> = powers.iter().copied().filter(|p| *p > 0.0).collect();
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = positive.iter().copied().fold(0.0, f64::max);
    if positive.is_empty() || hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(
            "calibration powers must span at least one decade".into(),
        ));
    }
    let scale = medium.at_scale_factor();
    let points: Vec<CalibrationPoint> = powers
        .par_iter()
        .map(|&p| {
            let sqrt_p = p.sqrt();
            let e = horn_factor * sqrt_p;
            let dressed = medium.with_omega_mw(dipole_mw * e / HBAR);
            let grid = default_grid(&dressed)?;
            let spectrum = susceptibility_spectrum(&dressed, &grid)?;
            let (f_at, e_rec) = match at_splitting(&spectrum) {
                Ok(f) => {
                    let f = f * scale;
                    (Some(f), Some(field_from_at_splitting(f, dipole_mw)?))
                }
                Err(Error::UnresolvedSplitting { .. }) => (None, None),
                Err(err) => return Err(err),
            };
            Ok(CalibrationPoint {
                power_w: p,
                sqrt_power: sqrt_p,
                e_applied: e,
                f_at_hz: f_at,
                e_recovered: e_rec,
                unresolved: f_at.is_none(),
            })
        })
        .collect::<Result<_>>()?;
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.e_recovered.map(|e| (p.sqrt_power, e)))
        .collect();
    if used.len() < 2 {
        return Err(Error::FitFailure {
            r_squared: f64::NAN,
        });
    }
    let sxy: f64 = used.iter().map(|(x, y)| x * y).sum();
    let sxx: f64 = used.iter().map(|(x, _)| x * x).sum();
    let slope = sxy / sxx;
    let my = used.iter().map(|p| p.1).sum::<f64>() / used.len() as f64;
    let ss_tot: f64 = used.iter().map(|(_, y)| (y - my) * (y - my)).sum();
    let ss_res: f64 = used.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(CalibrationFit {
        slope,
        r_squared,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rabi_approximation_error_bound() {
        let cfg = HeterodyneConfig::default();
        assert_eq!(instantaneous_rabi(&cfg, 0.0, 1.234e-6), cfg.omega_local);
        for e in [1e-3, 1e-2, 3e-2] {
            let r = cfg.signal_rabi(e) / cfg.omega_local;
            for i in 0..200 {
                let t = i as f64 / (200.0 * cfg.delta_f);
                let exact = instantaneous_rabi_exact(&cfg, e, t);
                let approx = instantaneous_rabi(&cfg, e, t);
                assert!(((approx - exact) / exact).abs() <= 0.5 * r * r * (1.0 + r * r) + 1e-15);
            }
        }
    }

    #[test]
    fn cosine_series_matches_direct_evaluation() {
        let cfg = HeterodyneConfig::default();
        let medium = thermal_medium();
        let model = ReadoutModel::new(&cfg, &medium, TWO_PI * 1.0e6).unwrap();
        let omega_s = cfg.signal_rabi(1e-2);
        let a = beat_harmonics(&model, cfg.omega_local, omega_s).unwrap();
        for i in 0..7 {
            let x = 0.37 * i as f64;
            let direct = model
                .observable(rabi_magnitude(cfg.omega_local, omega_s, x.cos()))
                .unwrap();
            let err = (cosine_series(&a, x) - direct).abs();
            assert!(
                err < 1e-10 * direct.abs().max(1e-6),
                "{x} {err:e} {direct:e}"
            );
        }
    }

    #[test]
    fn dispersion_pointer_balanced_at_operating_point() {
        let cfg = HeterodyneConfig::default();
        let medium = LadderSystemParams::default();
        let model = ReadoutModel::new(&cfg, &medium, TWO_PI * 0.7e6).unwrap();
        assert_eq!(model.observable(cfg.omega_local).unwrap(), 0.0);
    }

    #[test]
    fn synthetic_crossing_recovered() {
        // snr = 2 (x - x0) with x0 at 3.7e-5 V/m.
        let e0: f64 = 3.7e-5;
        let pts: Vec<(f64, f64)> = log_sweep(1e-4, 1e-1, 4)
            .into_iter()
            .map(|e| (e, 2.0 * 10.0 * (e / e0).log10()))
            .collect();
        let (e_min, fit) = min_detectable_field(&pts).unwrap();
        assert!((e_min / e0 - 1.0).abs() < 1e-6);
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.r2 > 1.0 - 1e-12);
        // 6 dB more noise moves the crossing by a factor of two in field.
        let shifted: Vec<(f64, f64)> = pts
            .iter()
            .map(|(e, s)| (*e, s - 20.0 * 2f64.log10()))
            .collect();
        let (e2, _) = min_detectable_field(&shifted).unwrap();
        assert!((e2 / e_min - 2.0).abs() < 1e-9);
    }

    #[test]
    fn crossing_needs_three_points_and_a_line() {
        assert!(matches!(
            min_detectable_field(&[(1.0, 10.0), (2.0, 16.0)]),
            Err(Error::Precondition(_))
        ));
        let scattered = [(1.0, 10.0), (2.0, 40.0), (3.0, 5.0), (4.0, 30.0)];
        assert!(matches!(
            min_detectable_field(&scattered),
            Err(Error::FitFailure { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let ok = HeterodyneConfig::default();
        ok.validate().unwrap();
        let bad = HeterodyneConfig {
            delta_f: 100e3,
            ..ok.clone()
        };
        assert!(
            matches!(bad.validate(), Err(Error::InvalidParameter { ref name, .. }) if name == "delta_f")
        );
        let unsorted = HeterodyneConfig {
            e_signal: vec![1e-3, 1e-4],
            ..ok.clone()
        };
        assert!(unsorted.validate().is_err());
        let slow = HeterodyneConfig {
            sample_rate: 1e6,
            ..ok
        };
        assert!(
            matches!(slow.validate(), Err(Error::InvalidParameter { ref name, .. }) if name == "sample_rate")
        );
    }
}
