//! Spectra over probe detuning and the observables extracted from them.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{phase_and_absorption, susceptibility, LadderSystemParams, SusceptibilityPoint};
use crate::constants::{PLANCK, TWO_PI};
use crate::error::{ensure_finite, Error, Result};
use crate::output::CsvTable;

/// `n` evenly spaced points on `[start, stop]`.
pub fn uniform_grid(start: f64, stop: f64, n: usize) -> Result<Vec<f64>> {
    ensure_finite("grid start", start)?;
    ensure_finite("grid stop", stop)?;
    if n < 2 || stop <= start {
        return Err(Error::InvalidArgument(format!(
            "grid needs n >= 2 and stop > start (n={n}, start={start}, stop={stop})"
        )));
    }
    let step = (stop - start) / (n - 1) as f64;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

/// Points in [`default_grid`].
pub const DEFAULT_GRID_POINTS: usize = 4096;

/// Probe-detuning grid wide enough for the absorption to have died out at
/// the edges: ±20 γ₂, widened by five Doppler widths when the thermal
/// average is on.
pub fn default_grid(params: &LadderSystemParams) -> Result<Vec<f64>> {
    let mut half = 20.0 * params.gamma_2;
    if params.doppler_enabled && params.temperature > 0.0 {
        half += 5.0 * params.probe_wavenumber() * params.thermal_speed();
    }
    half += params.omega_c.abs() + params.omega_mw.abs();
    uniform_grid(-half, half, DEFAULT_GRID_POINTS)
}

/// χ at every grid detuning. Points are evaluated in parallel; the result is
/// ordered like the grid and independent of the thread count.
pub fn susceptibility_spectrum(
    params: &LadderSystemParams,
    grid: &[f64],
) -> Result<Vec<SusceptibilityPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty detuning grid".into()));
    }
    for (i, &x) in grid.iter().enumerate() {
        ensure_finite("grid", x)?;
        if i > 0 && x <= grid[i - 1] {
            return Err(Error::InvalidArgument(format!(
                "detuning grid must be strictly increasing (index {i})"
            )));
        }
    }
    params.validate()?;
    grid.par_iter()
        .map(|&delta_p| {
            susceptibility(params, delta_p).map(|chi| SusceptibilityPoint { delta_p, chi })
        })
        .collect()
}

// Measures how far a grid departs from uniform spacing, relative to the step.
fn check_uniform(spectrum: &[SusceptibilityPoint]) -> Result<f64> {
    let n = spectrum.len();
    let h = (spectrum[n - 1].delta_p - spectrum[0].delta_p) / (n - 1) as f64;
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::Precondition("grid must be increasing".into()));
    }
    for (i, p) in spectrum.iter().enumerate() {
        let expect = spectrum[0].delta_p + h * i as f64;
        if (p.delta_p - expect).abs() > 1e-6 * h {
            return Err(Error::Precondition(format!(
                "grid is not uniform at index {i}"
            )));
        }
    }
    Ok(h)
}

/// Largest edge-to-peak ratio of |Im χ| tolerated by [`kk_residual`].
pub const KK_EDGE_RATIO: f64 = 0.01;

/// Max-norm residual between Re χ and the discrete Hilbert transform of
/// Im χ over the central half of a uniform grid, relative to max |Re χ|.
///
/// The transform is the odd-offset (Maclaurin) quadrature of
/// `Re χ(y) = (1/π) P∫ Im χ(x) / (x − y) dx`, which has no singular term.
/// Absorption must have decayed at the grid edges; dispersion decays too
/// slowly (as 1/Δ) to be held to the same edge criterion.
pub fn kk_residual(spectrum: &[SusceptibilityPoint]) -> Result<f64> {
    let n = spectrum.len();
    if n < 8 {
        return Err(Error::InvalidArgument(format!(
            "spectrum has {n} points, need at least 8"
        )));
    }
    check_uniform(spectrum)?;
    let im: Vec<f64> = spectrum.iter().map(|p| p.chi.im).collect();
    let re: Vec<f64> = spectrum.iter().map(|p| p.chi.re).collect();
    let peak = im.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let re_peak = re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 && re_peak == 0.0 {
        return Ok(0.0);
    }
    let edge = im[0].abs().max(im[n - 1].abs());
    let ratio = if peak > 0.0 {
        edge / peak
    } else {
        f64::INFINITY
    };
    if ratio >= KK_EDGE_RATIO {
        return Err(Error::Precondition(format!(
            "grid too narrow for Kramers-Kronig check: edge/peak |Im chi| = {ratio:.3e} (need < {KK_EDGE_RATIO})"
        )));
    }

    let lo = n / 4;
    let hi = n - n / 4;
    let residual = (lo..hi)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            let mut j = (i % 2) ^ 1;
            while j < n {
                acc += im[j] / (j as f64 - i as f64);
                j += 2;
            }
            let hilbert = acc * 2.0 / std::f64::consts::PI;
            (re[i] - hilbert).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(residual / re_peak.max(f64::MIN_POSITIVE))
}

/// Relative prominence below which a local maximum is treated as ripple.
const PEAK_PROMINENCE: f64 = 1e-3;

/// Detunings of the transparency peaks, i.e. interior local maxima of −Im χ,
/// refined by 3-point parabolic interpolation and ordered by detuning.
pub fn transparency_peaks(spectrum: &[SusceptibilityPoint]) -> Vec<f64> {
    let y: Vec<f64> = spectrum.iter().map(|p| -p.chi.im).collect();
    let n = y.len();
    if n < 3 {
        return Vec::new();
    }
    let (ymin, ymax) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let range = ymax - ymin;
    if !(range > 0.0) {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if y[i] > y[i - 1] {
            // Step over a flat top so it counts once.
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                // On a flat top, prefer the sample nearest line center.
                let centre = (i..=j)
                    .min_by(|&a, &b| {
                        spectrum[a]
                            .delta_p
                            .abs()
                            .total_cmp(&spectrum[b].delta_p.abs())
                    })
                    .unwrap_or(i);
                if prominence(&y, i, j) >= PEAK_PROMINENCE * range {
                    peaks.push(refine(spectrum, &y, centre));
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

// Topographic prominence of the plateau y[i..=j].
fn prominence(y: &[f64], i: usize, j: usize) -> f64 {
    let top = y[i];
    let mut left_min = top;
    let mut k = i;
    while k > 0 {
        k -= 1;
        if y[k] > top {
            break;
        }
        left_min = left_min.min(y[k]);
    }
    let mut right_min = top;
    let mut k = j;
    while k + 1 < y.len() {
        k += 1;
        if y[k] > top {
            break;
        }
        right_min = right_min.min(y[k]);
    }
    top - left_min.max(right_min)
}

fn refine(spectrum: &[SusceptibilityPoint], y: &[f64], i: usize) -> f64 {
    let (x0, x1, x2) = (
        spectrum[i - 1].delta_p,
        spectrum[i].delta_p,
        spectrum[i + 1].delta_p,
    );
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    // Vertex of the parabola through three (possibly unevenly spaced) points.
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if curv >= 0.0 || !curv.is_finite() {
        return x1;
    }
    let vertex = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
    vertex.clamp(x0, x2)
}

/// Separation of the two transparency peaks, in Hz of probe detuning.
/// Any other number of peaks is an unresolved-splitting error.
pub fn at_splitting(spectrum: &[SusceptibilityPoint]) -> Result<f64> {
    let peaks = transparency_peaks(spectrum);
    match peaks.len() {
        2 => Ok((peaks[1] - peaks[0]).abs() / TWO_PI),
        n => Err(Error::UnresolvedSplitting { peaks: n }),
    }
}

/// `E = h f_AT / μ`, in V/m.
pub fn field_from_at_splitting(f_at: f64, dipole_mw: f64) -> Result<f64> {
    ensure_finite("f_at", f_at)?;
    ensure_finite("dipole_mw", dipole_mw)?;
    if dipole_mw <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "dipole_mw must be > 0, got {dipole_mw}"
        )));
    }
    if f_at < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "f_at must be >= 0, got {f_at}"
        )));
    }
    Ok(PLANCK * f_at / dipole_mw)
}

/// One emitted spectrum row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub delta_p_hz: f64,
    pub re_chi: f64,
    pub im_chi: f64,
    pub delta_phi_rad: f64,
    pub delta_beta: f64,
}

impl SpectrumRow {
    pub fn new(point: &SusceptibilityPoint, params: &LadderSystemParams) -> Self {
        let pa = phase_and_absorption(point.chi, params);
        SpectrumRow {
            delta_p_hz: point.delta_p / TWO_PI,
            re_chi: point.chi.re,
            im_chi: point.chi.im,
            delta_phi_rad: pa.delta_phi,
            delta_beta: pa.delta_beta,
        }
    }
}

pub fn write_spectrum_csv(
    path: &Path,
    spectrum: &[SusceptibilityPoint],
    params: &LadderSystemParams,
) -> Result<()> {
    let mut table = CsvTable::new(&[
        "delta_p_hz",
        "re_chi",
        "im_chi",
        "delta_phi_rad",
        "delta_beta",
    ]);
    for p in spectrum {
        let r = SpectrumRow::new(p, params);
        table.push(&[
            r.delta_p_hz,
            r.re_chi,
            r.im_chi,
            r.delta_phi_rad,
            r.delta_beta,
        ]);
    }
    table.write(path)
}

// Exposed for tests that build spectra from closed-form χ.
#[doc(hidden)]
pub fn spectrum_from_fn(grid: &[f64], f: impl Fn(f64) -> Complex64) -> Vec<SusceptibilityPoint> {
    grid.iter()
        .map(|&delta_p| SusceptibilityPoint {
            delta_p,
            chi: f(delta_p),
        })
        .collect()
}
