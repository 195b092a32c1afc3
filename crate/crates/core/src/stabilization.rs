//! Feedback stabilization of the interferometer: a control beam in the
//! which-path configuration is held at zero contrast ratio by a PID loop
//! driving the mirror, which enters the pointer as an offset of the
//! momentum kick.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize, Serializer};

use crate::constants::TWO_PI;
use crate::detector::{std_dev, TimeSeries};
use crate::error::{ensure_finite, ensure_nonnegative, ensure_positive, Error, Result};
use crate::output::CsvTable;
use crate::pointer::{
    closed_form_readout, quadrature_oracle, BeamPointer, PostSelection, PreSelection, WeakCoupling,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PidParams {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub setpoint: f64,
    /// Actuator range for the k offset, rad/m.
    pub output_min: f64,
    pub output_max: f64,
    /// Loop rate, Hz.
    pub sample_rate: f64,
}

impl Default for PidParams {
    fn default() -> Self {
        PidParams {
            kp: 0.0,
            ki: 6e5,
            kd: 0.0,
            setpoint: 0.0,
            output_min: -100.0,
            output_max: 100.0,
            sample_rate: 10e3,
        }
    }
}

impl PidParams {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [
            ("kp", self.kp),
            ("ki", self.ki),
            ("kd", self.kd),
            ("setpoint", self.setpoint),
        ] {
            ensure_finite(n, v)?;
        }
        ensure_positive("sample_rate", self.sample_rate)?;
        ensure_finite("output_min", self.output_min)?;
        ensure_finite("output_max", self.output_max)?;
        if !(self.output_min < self.output_max) {
            return Err(Error::param("output_max", "must exceed output_min"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    pub frequency: f64,
    pub amplitude: f64,
}

/// Disturbance acting on the effective k offset, all amplitudes in rad/m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct DriftModel {
    /// RMS of the 1/f component.
    pub one_over_f_amplitude: f64,
    /// Upper corner of the 1/f band, Hz.
    pub one_over_f_corner: f64,
    /// Number of octaves below the corner that the 1/f band spans.
    pub octaves: usize,
    /// RMS of the white component per loop sample.
    pub white_amplitude: f64,
    /// Fan and building lines (amplitude is the sinusoid peak).
    pub sinusoids: Vec<Sinusoid>,
}

impl Default for DriftModel {
    fn default() -> Self {
        DriftModel {
            one_over_f_amplitude: 1.72,
            one_over_f_corner: 100.0,
            octaves: 12,
            white_amplitude: 0.05,
            sinusoids: vec![
                Sinusoid {
                    frequency: 50.0,
                    amplitude: 0.3,
                },
                Sinusoid {
                    frequency: 120.0,
                    amplitude: 0.1,
                },
            ],
        }
    }
}

impl DriftModel {
    pub fn none() -> Self {
        DriftModel {
            one_over_f_amplitude: 0.0,
            white_amplitude: 0.0,
            sinusoids: Vec::new(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_nonnegative("one_over_f_amplitude", self.one_over_f_amplitude)?;
        ensure_positive("one_over_f_corner", self.one_over_f_corner)?;
        ensure_nonnegative("white_amplitude", self.white_amplitude)?;
        for s in &self.sinusoids {
            ensure_nonnegative("sinusoids.frequency", s.frequency)?;
            ensure_nonnegative("sinusoids.amplitude", s.amplitude)?;
        }
        Ok(())
    }

    /// Disturbance samples at rate `fs`. The 1/f part is a sum of
    /// octave-spaced band components of equal variance, each white noise
    /// through two cascaded one-pole low-passes; every component is run in
    /// for five time constants so the record starts stationary.
    pub fn generate(&self, fs: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = vec![0.0; n];
        let m = self.octaves.max(1);
        let per_octave = self.one_over_f_amplitude / (m as f64).sqrt();
        if per_octave > 0.0 {
            for j in 0..m {
                let fc = self.one_over_f_corner / 2f64.powi(j as i32);
                let beta = 1.0 - (-TWO_PI * fc / fs).exp();
                let q = (1.0 - beta) * (1.0 - beta);
                // Output variance of the cascade per unit input variance.
                let gain = beta.powi(4) * (1.0 + q) / (1.0 - q).powi(3);
                let drive = per_octave / gain.sqrt();
                let lead = (5.0 * fs / (TWO_PI * fc)).ceil() as usize;
                let (mut y1, mut y2) = (0.0, 0.0);
                for i in 0..lead + n {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    y1 += beta * (drive * x - y1);
                    y2 += beta * (y1 - y2);
                    if i >= lead {
                        out[i - lead] += y2;
                    }
                }
            }
        }
        for s in &self.sinusoids {
            let phase = TWO_PI * rng.random::<f64>();
            for (i, v) in out.iter_mut().enumerate() {
                *v += s.amplitude * (TWO_PI * s.frequency * i as f64 / fs + phase).sin();
            }
        }
        if self.white_amplitude > 0.0 {
            for v in out.iter_mut() {
                let x: f64 = StandardNormal.sample(&mut rng);
                *v += self.white_amplitude * x;
            }
        }
        out
    }
}

/// The which-path control pointer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ControlPlant {
    /// Pre-selection phase of the control beam, rad.
    pub phi_f: f64,
    /// Control beam RMS width, m.
    pub w: f64,
    /// Kick of the measurement pointer, used to express residual contrast
    /// noise as a phase, rad/m.
    pub k_measure: f64,
}

impl Default for ControlPlant {
    fn default() -> Self {
        ControlPlant {
            phi_f: FRAC_PI_2,
            w: 1.2e-3,
            k_measure: 10.0,
        }
    }
}

impl ControlPlant {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("phi_f", self.phi_f)?;
        if self.phi_f.sin().abs() < 1e-12 {
            return Err(Error::OrthogonalPostselection {
                overlap: self.phi_f.sin().abs(),
            });
        }
        ensure_positive("w", self.w)?;
        ensure_positive("k_measure", self.k_measure)
    }

    /// Small-signal slope dη/dk at zero offset, `√(8/π) w cot(Φ_F/2)`.
    pub fn slope(&self) -> f64 {
        (8.0 / std::f64::consts::PI).sqrt() * self.w / (self.phi_f / 2.0).tan()
    }

    fn eta(&self, k: f64) -> Result<f64> {
        closed_form_readout(
            &PreSelection::new(self.phi_f, 0.0),
            &PostSelection::default(),
            &WeakCoupling { k },
            self.w,
        )
        .map(|r| r.eta)
    }
}

/// Contrast ratio of the control pointer at actuator offset `k_offset`,
/// from quadrature of the post-selected profile.
pub fn plant_response(k_offset: f64, phi_f: f64, beam: &BeamPointer) -> Result<f64> {
    quadrature_oracle(
        &PreSelection::new(phi_f, 0.0),
        &PostSelection::default(),
        &WeakCoupling { k: k_offset },
        beam,
    )
    .map(|r| r.eta)
}

/// Recorded loop signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTrace {
    pub eta_con: TimeSeries,
    pub pid_output: Vec<f64>,
    pub loop_on_at: f64,
}

impl LoopTrace {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut t = CsvTable::new(&["t_s", "eta_con", "pid_output"]);
        for (i, (e, u)) in self
            .eta_con
            .samples
            .iter()
            .zip(&self.pid_output)
            .enumerate()
        {
            t.push(&[self.eta_con.time(i), *e, *u]);
        }
        t.write(path)
    }
}

/// Consecutive saturated samples treated as a runaway loop.
pub const SATURATION_LIMIT: usize = 100;

/// Runs the discrete loop. The disturbance adds to the actuator offset; the
/// controller is off (output 0) before `loop_on_at`. Integral action is
/// clamped to the actuator range and the derivative acts on the measurement.
pub fn simulate_closed_loop(
    pid: &PidParams,
    drift: &DriftModel,
    plant: &ControlPlant,
    duration: f64,
    loop_on_at: f64,
    seed: u64,
) -> Result<LoopTrace> {
    pid.validate()?;
    drift.validate()?;
    plant.validate()?;
    ensure_positive("duration", duration)?;
    ensure_nonnegative("loop_on_at", loop_on_at)?;
    if loop_on_at >= duration {
        return Err(Error::InvalidArgument(format!(
            "loop_on_at {loop_on_at} must be < duration {duration}"
        )));
    }
    let fs = pid.sample_rate;
    let dt = 1.0 / fs;
    let n = (duration * fs).round() as usize;
    if n as f64 > 1e8 {
        return Err(Error::InvalidArgument(
            "loop simulation longer than 1e8 samples".into(),
        ));
    }
    let on_index = (loop_on_at * fs).round() as usize;
    let disturbance = drift.generate(fs, n, seed);

    let mut eta = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let mut u = 0.0;
    let mut integ = 0.0;
    let mut prev_meas: Option<f64> = None;
    let mut saturated = 0usize;
    for (i, d) in disturbance.iter().enumerate() {
        let y = plant.eta(d + u)?;
        eta.push(y);
        if i >= on_index {
            let e = pid.setpoint - y;
            let wanted = integ + pid.ki * e * dt;
            integ = wanted.clamp(pid.output_min, pid.output_max);
            let deriv = match prev_meas {
                Some(p) => (y - p) / dt,
                None => 0.0,
            };
            let raw = pid.kp * e + integ - pid.kd * deriv;
            u = raw.clamp(pid.output_min, pid.output_max);
            if raw != u || wanted != integ {
                saturated += 1;
                if saturated >= SATURATION_LIMIT {
                    return Err(Error::Instability {
                        kp: pid.kp,
                        ki: pid.ki,
                        kd: pid.kd,
                    });
                }
            } else {
                saturated = 0;
            }
            prev_meas = Some(y);
        }
        out.push(u);
    }
    Ok(LoopTrace {
        eta_con: TimeSeries::new(fs, 0.0, eta)?,
        pid_output: out,
        loop_on_at,
    })
}

fn serialize_ratio<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(r) => s.serialize_f64(*r),
        None => s.serialize_str("undefined"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuppressionReport {
    pub std_open: f64,
    pub std_closed: f64,
    /// `std_open / std_closed`, undefined when the closed segment is flat.
    #[serde(serialize_with = "serialize_ratio")]
    pub ratio: Option<f64>,
}

/// Minimum samples in each segment.
pub const MIN_SEGMENT: usize = 1000;

pub fn suppression_report(ts: &TimeSeries, loop_on_at: f64) -> Result<SuppressionReport> {
    ensure_finite("loop_on_at", loop_on_at)?;
    let split = ((loop_on_at - ts.t0) * ts.fs).round().max(0.0) as usize;
    let split = split.min(ts.samples.len());
    let (open, closed) = ts.samples.split_at(split);
    if open.len() < MIN_SEGMENT || closed.len() < MIN_SEGMENT {
        return Err(Error::InvalidArgument(format!(
            "segments need >= {MIN_SEGMENT} samples each (open {}, closed {})",
            open.len(),
            closed.len()
        )));
    }
    let std_open = std_dev(open);
    let std_closed = std_dev(closed);
    let ratio = if std_closed > 0.0 {
        Some(std_open / std_closed)
    } else {
        None
    };
    Ok(SuppressionReport {
        std_open,
        std_closed,
        ratio,
    })
}

/// Full result of a stabilization run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizationReport {
    #[serde(flatten)]
    pub suppression: SuppressionReport,
    pub gains: PidParams,
    /// Closed-loop residual expressed as measurement phase noise, degrees.
    pub phase_deviation_deg: f64,
}

/// Converts a contrast-ratio deviation to the measurement phase that would
/// produce it in the weak regime, `Δφ = η k w √(π/2)`.
pub fn eta_to_phase(eta: f64, k: f64, w: f64) -> f64 {
    eta * k * w * (std::f64::consts::PI / 2.0).sqrt()
}

pub fn stabilization_report(
    trace: &LoopTrace,
    pid: &PidParams,
    plant: &ControlPlant,
) -> Result<StabilizationReport> {
    let suppression = suppression_report(&trace.eta_con, trace.loop_on_at)?;
    let phase = eta_to_phase(suppression.std_closed, plant.k_measure, plant.w).to_degrees();
    Ok(StabilizationReport {
        suppression,
        gains: pid.clone(),
        phase_deviation_deg: phase,
    })
}
