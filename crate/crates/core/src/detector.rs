//! Dual-channel detection of the split pointer: power partition, the
//! contrast-ratio division, additive noise and spectral estimation.

use std::path::Path;
use std::sync::Arc;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::constants::{ELEMENTARY_CHARGE, PLANCK, SPEED_OF_LIGHT, TWO_PI};
use crate::error::{ensure_finite, ensure_nonnegative, ensure_positive, Error, Result};
use crate::output::CsvTable;

/// Narrowband interference: `tones` sinusoids with random phases spread
/// evenly across `[f_low, f_high]`, each of `amplitude` W, added
/// independently to each channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct NarrowbandNoise {
    pub f_low: f64,
    pub f_high: f64,
    pub amplitude: f64,
    pub tones: usize,
}

impl Default for NarrowbandNoise {
    fn default() -> Self {
        NarrowbandNoise {
            f_low: 30e3,
            f_high: 50e3,
            amplitude: 0.0,
            tones: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// Transimpedance voltage gain.
    pub gain: f64,
    /// Noise-equivalent power, W/√Hz.
    pub nep: f64,
    /// Dark current, A.
    pub dark_current: f64,
    /// Single-pole cutoff, Hz.
    pub bandwidth: f64,
    /// Dead zone between the two photodiode elements, m.
    pub gap: f64,
    /// A/W.
    pub responsivity: f64,
    /// Optical wavelength for the photon energy, m.
    pub wavelength: f64,
    /// Include photon shot noise.
    pub shot_noise: bool,
    /// Relative intensity noise of the light reaching both channels, 1/√Hz.
    /// Common to both channels, so it cancels in the contrast ratio.
    pub rin: f64,
    /// White noise added by the ratio circuit itself, in η units per √Hz.
    pub icr_noise: f64,
    pub narrowband: Option<NarrowbandNoise>,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            gain: 1e5,
            nep: 7.2e-15,
            dark_current: 0.5e-9,
            bandwidth: 25e6,
            gap: 30e-6,
            responsivity: 0.6,
            wavelength: 852.35e-9,
            shot_noise: true,
            rin: 0.0,
            icr_noise: 0.0,
            narrowband: None,
        }
    }
}

impl DetectorParams {
    /// A detector that adds no noise at all.
    pub fn noiseless() -> Self {
        DetectorParams {
            nep: 0.0,
            dark_current: 0.0,
            shot_noise: false,
            rin: 0.0,
            icr_noise: 0.0,
            narrowband: None,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("gain", self.gain)?;
        ensure_nonnegative("nep", self.nep)?;
        ensure_nonnegative("dark_current", self.dark_current)?;
        ensure_positive("bandwidth", self.bandwidth)?;
        ensure_nonnegative("gap", self.gap)?;
        ensure_positive("responsivity", self.responsivity)?;
        ensure_positive("wavelength", self.wavelength)?;
        ensure_nonnegative("rin", self.rin)?;
        ensure_nonnegative("icr_noise", self.icr_noise)?;
        if let Some(nb) = &self.narrowband {
            ensure_nonnegative("narrowband.f_low", nb.f_low)?;
            ensure_nonnegative("narrowband.amplitude", nb.amplitude)?;
            if !(nb.f_high >= nb.f_low) {
                return Err(Error::param("narrowband.f_high", "must be >= f_low"));
            }
        }
        Ok(())
    }

    pub fn photon_energy(&self) -> f64 {
        PLANCK * SPEED_OF_LIGHT / self.wavelength
    }

    /// One-sided power-equivalent noise density of one channel at optical
    /// power `p`, W²/Hz: NEP, photon shot noise and dark-current shot noise.
    pub fn power_noise_density(&self, p: f64) -> f64 {
        let shot = if self.shot_noise {
            2.0 * self.photon_energy() * p.max(0.0)
        } else {
            0.0
        };
        let dark =
            2.0 * ELEMENTARY_CHARGE * self.dark_current / (self.responsivity * self.responsivity);
        self.nep * self.nep + shot + dark
    }

    /// Output voltage for optical power `p`.
    pub fn voltage(&self, p: f64) -> f64 {
        p * self.responsivity * self.gain
    }
}

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub fs: f64,
    pub t0: f64,
    pub samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(fs: f64, t0: f64, samples: Vec<f64>) -> Result<Self> {
        ensure_positive("fs", fs)?;
        ensure_finite("t0", t0)?;
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "time series contains non-finite samples".into(),
            ));
        }
        Ok(TimeSeries { fs, t0, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.fs
    }

    pub fn mean(&self) -> f64 {
        mean(&self.samples)
    }

    pub fn std(&self) -> f64 {
        std_dev(&self.samples)
    }

    pub fn write_csv(&self, path: &Path, value_column: &str) -> Result<()> {
        let mut t = CsvTable::new(&["t_s", value_column]);
        for (i, v) in self.samples.iter().enumerate() {
            t.push(&[self.time(i), *v]);
        }
        t.write(path)
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub(crate) fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() - 1) as f64).sqrt()
}

// Exact integral over [lo, hi] of the piecewise-quadratic interpolant that
// passes through consecutive node triples (composite Simpson on whole pairs;
// a trailing odd cell is linear).
fn integrate_profile(grid: &[f64], y: &[f64], lo: f64, hi: f64) -> f64 {
    let n = grid.len();
    let mut total = 0.0;
    let mut i = 0;
    while i + 1 < n {
        let three = i + 2 < n;
        let right = if three { grid[i + 2] } else { grid[i + 1] };
        let a = lo.max(grid[i]);
        let b = hi.min(right);
        if b > a {
            if three {
                let (x0, x1, x2) = (grid[i], grid[i + 1], grid[i + 2]);
                let (y0, y1, y2) = (y[i], y[i + 1], y[i + 2]);
                // q(t) = y1 + p t + q t², t = x − x1
                let d01 = (y1 - y0) / (x1 - x0);
                let d12 = (y2 - y1) / (x2 - x1);
                let q = (d12 - d01) / (x2 - x0);
                let p = d01 + q * (x1 - x0);
                let (u, v) = (a - x1, b - x1);
                total +=
                    y1 * (v - u) + p * (v * v - u * u) / 2.0 + q * (v * v * v - u * u * u) / 3.0;
            } else {
                let (x0, x1) = (grid[i], grid[i + 1]);
                let slope = (y[i + 1] - y[i]) / (x1 - x0);
                let ya = y[i] + slope * (a - x0);
                let yb = y[i] + slope * (b - x0);
                total += 0.5 * (ya + yb) * (b - a);
            }
        }
        i += 2;
    }
    total
}

/// Powers on the two detector halves, `(P_left, P_right)`, and the power
/// lost in the central gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPowers {
    pub left: f64,
    pub right: f64,
    pub gap: f64,
}

/// Integrates an intensity profile (W/m) over `x < −gap/2` and `x > gap/2`.
pub fn split_powers(grid: &[f64], intensity: &[f64], det: &DetectorParams) -> Result<SplitPowers> {
    if grid.len() != intensity.len() || grid.len() < 3 {
        return Err(Error::InvalidArgument(
            "profile and grid must have equal length >= 3".into(),
        ));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "profile grid must be strictly increasing".into(),
        ));
    }
    ensure_nonnegative("gap", det.gap)?;
    let (first, last) = (grid[0], grid[grid.len() - 1]);
    let half = det.gap / 2.0;
    let left = integrate_profile(grid, intensity, first, -half);
    let right = integrate_profile(grid, intensity, half, last);
    let gap = integrate_profile(grid, intensity, -half, half);
    if !(left + right > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "detected power must be > 0 (left {left:e}, right {right:e})"
        )));
    }
    Ok(SplitPowers { left, right, gap })
}

/// `(P_left − P_right) / (P_left + P_right)`.
pub fn icr_from_powers(p_left: f64, p_right: f64) -> Result<f64> {
    ensure_finite("p_left", p_left)?;
    ensure_finite("p_right", p_right)?;
    let sum = p_left + p_right;
    if sum <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "total power must be > 0, got {sum:e}"
        )));
    }
    Ok(((p_left - p_right) / sum).clamp(-1.0, 1.0))
}

/// Longest series [`sample_timeseries`] will produce.
pub const MAX_SAMPLES: f64 = 1e8;

fn sample_count(fs: f64, duration: f64) -> Result<usize> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::InvalidArgument(format!("fs must be > 0, got {fs}")));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration must be > 0, got {duration}"
        )));
    }
    let n = (duration * fs).round();
    if n > MAX_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "duration*fs = {n:e} exceeds {MAX_SAMPLES:e} samples"
        )));
    }
    Ok((n as usize).max(1))
}

struct Tones {
    freqs: Vec<f64>,
    phases: [Vec<f64>; 2],
    amplitude: f64,
}

impl Tones {
    fn new(nb: &NarrowbandNoise, rng: &mut ChaCha8Rng) -> Self {
        let m = nb.tones.max(1);
        let freqs: Vec<f64> = (0..m)
            .map(|i| {
                if m == 1 {
                    0.5 * (nb.f_low + nb.f_high)
                } else {
                    nb.f_low + (nb.f_high - nb.f_low) * i as f64 / (m - 1) as f64
                }
            })
            .collect();
        let mut draw = || -> Vec<f64> {
            (0..m)
                .map(|_| TWO_PI * rand::Rng::random::<f64>(rng))
                .collect()
        };
        let phases = [draw(), draw()];
        Tones {
            freqs,
            phases,
            amplitude: nb.amplitude,
        }
    }

    fn value(&self, channel: usize, t: f64) -> f64 {
        self.freqs
            .iter()
            .zip(&self.phases[channel])
            .map(|(f, ph)| (TWO_PI * f * t + ph).sin())
            .sum::<f64>()
            * self.amplitude
    }
}

/// Channel noise source shared by the one- and two-channel samplers.
struct ChannelNoise {
    rng: ChaCha8Rng,
    tones: Option<Tones>,
    half_fs: f64,
    alpha: f64,
}

impl ChannelNoise {
    fn new(det: &DetectorParams, fs: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tones = det
            .narrowband
            .as_ref()
            .filter(|nb| nb.amplitude > 0.0)
            .map(|nb| Tones::new(nb, &mut rng));
        ChannelNoise {
            rng,
            tones,
            half_fs: fs / 2.0,
            // Discrete single-pole low-pass at the detector bandwidth.
            alpha: 1.0 - (-TWO_PI * det.bandwidth / fs).exp(),
        }
    }

    fn gauss(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Noisy optical power of one channel.
    fn power(&mut self, det: &DetectorParams, channel: usize, p: f64, t: f64) -> f64 {
        let sigma = (det.power_noise_density(p) * self.half_fs).sqrt();
        let mut v = p + sigma * self.gauss();
        if let Some(tones) = &self.tones {
            v += tones.value(channel, t);
        }
        v
    }
}

fn warn_bandwidth(det: &DetectorParams, fs: f64) {
    if fs > 2.0 * det.bandwidth {
        warn!(
            "sample rate {fs:e} Hz exceeds twice the detector bandwidth {:e} Hz",
            det.bandwidth
        );
    }
}

/// Samples the contrast ratio of a two-channel signal through the detector.
///
/// Each sample draws, in order: left-channel noise, right-channel noise,
/// common intensity noise, ratio-circuit noise. Noise is added in optical
/// power units before the division; each channel then passes a single-pole
/// low-pass at the detector bandwidth.
pub fn sample_timeseries(
    signal: &dyn Fn(f64) -> (f64, f64),
    det: &DetectorParams,
    fs: f64,
    duration: f64,
    seed: u64,
) -> Result<TimeSeries> {
    det.validate()?;
    let n = sample_count(fs, duration)?;
    warn_bandwidth(det, fs);
    let mut noise = ChannelNoise::new(det, fs, seed);
    let rin_sigma = det.rin * noise.half_fs.sqrt();
    let icr_sigma = det.icr_noise * noise.half_fs.sqrt();
    let mut state: Option<(f64, f64)> = None;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let (pl, pr) = signal(t);
        let mut l = noise.power(det, 0, pl, t);
        let mut r = noise.power(det, 1, pr, t);
        let common = 1.0 + rin_sigma * noise.gauss();
        l *= common;
        r *= common;
        let (fl, fr) = match state {
            None => (l, r),
            Some((sl, sr)) => (sl + noise.alpha * (l - sl), sr + noise.alpha * (r - sr)),
        };
        state = Some((fl, fr));
        let sum = fl + fr;
        let mut eta = if sum.abs() > 0.0 {
            (fl - fr) / sum
        } else {
            0.0
        };
        if icr_sigma > 0.0 {
            eta += icr_sigma * noise.gauss();
        } else {
            // Keep the random stream aligned whether or not this term is on.
            let _ = noise.gauss();
        }
        out.push(eta);
    }
    TimeSeries::new(fs, 0.0, out)
}

/// Samples one channel, reporting optical power normalized by `reference`
/// (so a transmission signal comes back as transmission).
pub fn sample_power_timeseries(
    signal: &dyn Fn(f64) -> f64,
    reference: f64,
    det: &DetectorParams,
    fs: f64,
    duration: f64,
    seed: u64,
) -> Result<TimeSeries> {
    det.validate()?;
    ensure_positive("reference", reference)?;
    let n = sample_count(fs, duration)?;
    warn_bandwidth(det, fs);
    let mut noise = ChannelNoise::new(det, fs, seed);
    let rin_sigma = det.rin * noise.half_fs.sqrt();
    let mut state: Option<f64> = None;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let p = signal(t);
        let mut v = noise.power(det, 0, p, t);
        v *= 1.0 + rin_sigma * noise.gauss();
        let f = match state {
            None => v,
            Some(s) => s + noise.alpha * (v - s),
        };
        state = Some(f);
        out.push(f / reference);
    }
    TimeSeries::new(fs, 0.0, out)
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub freq: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn bin_width(&self) -> f64 {
        if self.freq.len() > 1 {
            self.freq[1] - self.freq[0]
        } else {
            0.0
        }
    }

    /// Integral of the density over all bins.
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    pub fn peak_bin(&self) -> usize {
        self.density
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut t = CsvTable::new(&["freq_hz", "psd"]);
        for (f, p) in self.freq.iter().zip(&self.density) {
            t.push(&[*f, *p]);
        }
        t.write(path)
    }
}

/// Welch estimate: Hann-windowed, mean-removed segments of
/// `segment_length` samples overlapping by `overlap` samples, averaged.
pub fn psd(ts: &TimeSeries, segment_length: usize, overlap: usize) -> Result<Psd> {
    let n = ts.samples.len();
    if segment_length < 2 || segment_length > n {
        return Err(Error::InvalidArgument(format!(
            "segment_length must be in [2, {n}], got {segment_length}"
        )));
    }
    if overlap >= segment_length {
        return Err(Error::InvalidArgument(format!(
            "overlap {overlap} must be < segment_length {segment_length}"
        )));
    }
    let m = segment_length;
    let window: Vec<f64> = (0..m)
        .map(|i| 0.5 - 0.5 * (TWO_PI * i as f64 / m as f64).cos())
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(m);
    let bins = m / 2 + 1;
    let mut acc = vec![0.0; bins];
    let step = m - overlap;
    let mut segments = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); m];
    let mut start = 0;
    while start + m <= n {
        let seg = &ts.samples[start..start + m];
        let mu = mean(seg);
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((x - mu) * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let scale = 1.0 / (ts.fs * wss * segments as f64);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (m % 2 == 0 && k == m / 2) {
                1.0
            } else {
                2.0
            };
            a * scale * one_sided
        })
        .collect();
    let freq = (0..bins).map(|k| k as f64 * ts.fs / m as f64).collect();
    Ok(Psd { freq, density })
}
