//! Runs a loaded experiment config and writes its output files.
//!
//! Each run writes its data files plus `manifest.json`, which echoes the
//! resolved config. Data files depend only on the config and seed; the
//! manifest also records the wall time.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::constants::TWO_PI;
use crate::eit::{
    at_splitting, default_grid, field_from_at_splitting, kk_residual, susceptibility_spectrum,
    transparency_peaks, uniform_grid, SpectrumRow,
};
use crate::error::{Error, Result};
use crate::heterodyne::{
    calibration_curve, coupling_sweep, scheme_comparison, sensitivity_sweep, CouplingSweepPoint,
};
use crate::output::{write_json, CsvTable};
use crate::pointer::{
    centroid_approx, closed_form_readout, delta_beta_dependence, icr_approx, quadrature_oracle,
    weak_value, BeamPointer, PostSelection, PreSelection, WeakCoupling,
};
use crate::stabilization::{simulate_closed_loop, stabilization_report};

/// Environment variable that overrides the config's output directory.
pub const OUTPUT_DIR_ENV: &str = "RYDWEAK_OUTPUT_DIR";

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Applies command-line overrides. The CLI resolves the output directory
/// flag against the environment variable before calling this.
pub fn apply_overrides(config: &mut ExperimentConfig, overrides: &Overrides) {
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(dir) = &overrides.output_dir {
        config.output_dir = dir.clone();
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub program: &'static str,
    pub version: &'static str,
    pub experiment: Experiment,
    pub seed: u64,
    pub wall_time_s: f64,
    /// Output files relative to the output directory.
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Runs `config`, writing into `config.output_dir`. Returns the manifest.
pub fn run(config: &ExperimentConfig) -> Result<Manifest> {
    config.validate()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let start = Instant::now();
    info!(
        "running {} into {}",
        config.experiment.name(),
        dir.display()
    );
    let files = match config.experiment {
        Experiment::Spectrum => run_spectrum(config, &dir)?,
        Experiment::Pointer => run_pointer(config, &dir)?,
        Experiment::Stabilize => run_stabilize(config, &dir)?,
        Experiment::Heterodyne => run_heterodyne(config, &dir)?,
        Experiment::Calibrate => run_calibrate(config, &dir)?,
        Experiment::Limits => run_limits(config, &dir)?,
    };
    let mut manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: config.experiment,
        seed: config.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        files,
        config: config.clone(),
    };
    manifest.files.push(MANIFEST_FILE.to_string());
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn missing(block: &str) -> Error {
    Error::ConfigValidation {
        key: block.to_string(),
        message: "block missing after defaults were resolved".into(),
    }
}

#[derive(Debug, Serialize)]
struct SpectrumSummary {
    omega_mw: f64,
    transparency_peaks_hz: Vec<f64>,
    at_splitting_hz: Option<f64>,
    e_from_splitting_vpm: Option<f64>,
    kk_residual: Option<f64>,
    note: Option<String>,
}

fn run_spectrum(config: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let block = config
        .spectrum
        .as_ref()
        .ok_or_else(|| missing("spectrum"))?;
    let medium = config.medium();
    let omegas = if block.omega_mw.is_empty() {
        vec![medium.omega_mw]
    } else {
        block.omega_mw.clone()
    };
    let dipole = crate::heterodyne::DEFAULT_MW_DIPOLE;
    let mut table = CsvTable::new(&[
        "omega_mw",
        "delta_p_hz",
        "re_chi",
        "im_chi",
        "delta_phi_rad",
        "delta_beta",
    ]);
    let mut summaries = Vec::new();
    for &omega in &omegas {
        let params = medium.with_omega_mw(omega);
        let grid = match (block.start_hz, block.stop_hz) {
            (Some(a), Some(b)) => uniform_grid(TWO_PI * a, TWO_PI * b, block.points)?,
            _ => {
                let g = default_grid(&params)?;
                uniform_grid(g[0], g[g.len() - 1], block.points)?
            }
        };
        let spectrum = susceptibility_spectrum(&params, &grid)?;
        for p in &spectrum {
            let r = SpectrumRow::new(p, &params);
            table.push(&[
                omega,
                r.delta_p_hz,
                r.re_chi,
                r.im_chi,
                r.delta_phi_rad,
                r.delta_beta,
            ]);
        }
        let peaks = transparency_peaks(&spectrum)
            .into_iter()
            .map(|x| x / TWO_PI)
            .collect();
        let mut notes = Vec::new();
        let split = match at_splitting(&spectrum) {
            Ok(f) => Some(f),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        };
        let field = match split {
            Some(f) => Some(field_from_at_splitting(
                f * params.at_scale_factor(),
                dipole,
            )?),
            None => None,
        };
        let kk = match kk_residual(&spectrum) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        };
        summaries.push(SpectrumSummary {
            omega_mw: omega,
            transparency_peaks_hz: peaks,
            at_splitting_hz: split,
            e_from_splitting_vpm: field,
            kk_residual: kk,
            note: if notes.is_empty() {
                None
            } else {
                Some(notes.join("; "))
            },
        });
    }
    table.write(&dir.join("spectrum.csv"))?;
    write_json(&dir.join("spectrum_summary.json"), &summaries)?;
    Ok(vec!["spectrum.csv".into(), "spectrum_summary.json".into()])
}

#[derive(Debug, Serialize)]
struct PointerSummary {
    weak_value_re: f64,
    weak_value_im: f64,
    closed_form: crate::pointer::ReadoutRecord,
    quadrature: Option<crate::pointer::ReadoutRecord>,
    centroid_approx_m: f64,
    icr_approx: f64,
    delta_beta_dependence: Option<crate::pointer::DeltaBetaDependence>,
}

fn run_pointer(config: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let b = config.pointer.as_ref().ok_or_else(|| missing("pointer"))?;
    let pre = PreSelection::new(b.delta_phi, b.delta_beta);
    let post = PostSelection {
        angle: b.post_angle,
    };
    let coupling = WeakCoupling { k: b.k };
    let beam = BeamPointer::with_span(b.w, 8.0, b.grid_points)?;
    let wv = weak_value(&pre, &post)?;
    let cf = closed_form_readout(&pre, &post, &coupling, b.w)?;
    let closed = crate::pointer::ReadoutRecord {
        delta_phi: b.delta_phi,
        delta_beta: b.delta_beta,
        k: b.k,
        w: b.w,
        centroid_m: cf.centroid,
        eta: cf.eta,
        p_post: cf.p_post,
    };
    let mut files = Vec::new();
    let quadrature = if b.oracle {
        let r = quadrature_oracle(&pre, &post, &coupling, &beam)?;
        let mut t = CsvTable::new(&["x_m", "intensity"]);
        for (x, i) in beam.grid.iter().zip(&r.profile) {
            t.push(&[*x, *i]);
        }
        t.write(&dir.join("pointer_profile.csv"))?;
        files.push("pointer_profile.csv".to_string());
        Some(crate::pointer::ReadoutRecord::new(&pre, &coupling, b.w, &r))
    } else {
        None
    };
    let dependence = if b.delta_beta != 0.0 && b.post_angle == std::f64::consts::FRAC_PI_4 {
        Some(delta_beta_dependence(
            b.delta_phi,
            b.delta_beta,
            &coupling,
            &beam,
        )?)
    } else {
        None
    };
    let summary = PointerSummary {
        weak_value_re: wv.re,
        weak_value_im: wv.im,
        closed_form: closed,
        quadrature,
        centroid_approx_m: centroid_approx(b.delta_phi, &coupling)?,
        icr_approx: icr_approx(b.delta_phi, &coupling, &beam)?,
        delta_beta_dependence: dependence,
    };
    write_json(&dir.join("pointer.json"), &summary)?;
    files.push("pointer.json".into());
    Ok(files)
}

fn run_stabilize(config: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let b = config
        .stabilize
        .as_ref()
        .ok_or_else(|| missing("stabilize"))?;
    let trace = simulate_closed_loop(
        &b.pid,
        &b.drift,
        &b.plant,
        b.duration,
        b.loop_on_at,
        config.seed,
    )?;
    trace.write_csv(&dir.join("loop_trace.csv"))?;
    let report = stabilization_report(&trace, &b.pid, &b.plant)?;
    write_json(&dir.join("stabilization.json"), &report)?;
    Ok(vec!["loop_trace.csv".into(), "stabilization.json".into()])
}

fn run_heterodyne(config: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let b = config
        .heterodyne
        .as_ref()
        .ok_or_else(|| missing("heterodyne"))?;
    let medium = config.medium();
    let mut files = Vec::new();
    if b.compare {
        let report = scheme_comparison(
            &b.dispersion_config(),
            &b.amplitude_config(),
            &medium,
            &b.detector,
            config.seed,
        )?;
        for r in [&report.first, &report.second] {
            let name = format!("sensitivity_{}.csv", r.scheme.name());
            r.write_csv(&dir.join(&name))?;
            files.push(name);
        }
        write_json(&dir.join("heterodyne.json"), &report)?;
    } else {
        let r = sensitivity_sweep(&b.config, &medium, &b.detector, config.seed)?;
        let name = format!("sensitivity_{}.csv", r.scheme.name());
        r.write_csv(&dir.join(&name))?;
        files.push(name);
        write_json(&dir.join("heterodyne.json"), &r)?;
    }
    files.push("heterodyne.json".into());
    if let Some(sweep) = &b.coupling_sweep {
        let cfg = b.dispersion_config();
        let points = coupling_sweep(
            &cfg,
            &medium,
            &b.detector,
            &sweep.k,
            sweep.e_signal,
            config.seed,
        )?;
        write_coupling_csv(&dir.join("coupling_sweep.csv"), &points)?;
        files.push("coupling_sweep.csv".into());
    }
    Ok(files)
}

fn write_coupling_csv(path: &Path, points: &[CouplingSweepPoint]) -> Result<()> {
    let mut t = CsvTable::new(&["k", "detected_power_w", "snr_db", "advantage_db"]);
    for p in points {
        t.push(&[
            p.k,
            p.detected_power,
            p.snr_db.unwrap_or(f64::NAN),
            p.advantage_db.unwrap_or(f64::NAN),
        ]);
    }
    t.write(path)
}

fn run_calibrate(config: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let b = config
        .calibrate
        .as_ref()
        .ok_or_else(|| missing("calibrate"))?;
    let fit = calibration_curve(&b.powers_w, b.horn_factor, b.dipole_mw, &config.medium())?;
    fit.write_csv(&dir.join("calibration.csv"))?;
    write_json(&dir.join("calibration.json"), &fit)?;
    Ok(vec!["calibration.csv".into(), "calibration.json".into()])
}

fn run_limits(config: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let b = config.limits.as_ref().ok_or_else(|| missing("limits"))?;
    let report = crate::limits::report(b)?;
    write_json(&dir.join("limits.json"), &report)?;
    Ok(vec!["limits.json".into()])
}

/// Machine-readable error body printed on stderr by the CLI.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub code: i32,
    pub message: String,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        ErrorReport {
            error: e.category(),
            code: e.code(),
            message: e.to_string(),
        }
    }
}
