//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rydweak::config::{Experiment, ExperimentConfig};
use rydweak::constants::{HBAR, PLANCK, SPEED_OF_LIGHT, TWO_PI};
use rydweak::detector::{split_powers, DetectorParams};
use rydweak::eit::{
    arm_response, at_splitting, default_grid, field_from_at_splitting, kk_residual,
    susceptibility_spectrum, uniform_grid, LadderSystemParams,
};
use rydweak::heterodyne::{
    analyze_beat, calibration_curve, laboratory_detector, log_sweep, min_detectable_field,
    run_beat_experiment, scheme_comparison, thermal_medium, HeterodyneConfig, Readout,
    DEFAULT_MW_DIPOLE,
};
use rydweak::limits::{atomic_shot_noise, photon_rate, photon_shot_noise};
use rydweak::pointer::{
    centroid_approx, centroid_exact, delta_beta_dependence, icr_approx, icr_exact,
    quadrature_oracle, weak_value, BeamPointer, PostSelection, PreSelection, WeakCoupling,
};
use rydweak::runner::run;
use rydweak::stabilization::{
    simulate_closed_loop, stabilization_report, ControlPlant, DriftModel, PidParams,
};
use rydweak::Error;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

const C1_TOL: f64 = 1e-9;
const C1_SECONDS: f64 = 10.0;

fn closed_form_fidelity() -> Outcome {
    let start = Instant::now();
    let post = PostSelection::default();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for dphi in [1e-4, 1e-3, 1e-2, 0.1, 0.3] {
        for k in [1.0, 3.0, 10.0, 30.0, 100.0] {
            for w in [0.5e-3, 1e-3, 1.2e-3, 2e-3, 3e-3] {
                let pre = PreSelection::new(dphi, 0.0);
                let coupling = WeakCoupling { k };
                let beam = match BeamPointer::new(w) {
                    Ok(b) => b,
                    Err(e) => return outcome(false, e.to_string()),
                };
                let oracle = match quadrature_oracle(&pre, &post, &coupling, &beam) {
                    Ok(r) => r,
                    Err(e) => return outcome(false, e.to_string()),
                };
                let c = centroid_exact(&pre, &post, &coupling, &beam).unwrap();
                let i = icr_exact(&pre, &post, &coupling, &beam).unwrap();
                worst = worst.max(rel(c, oracle.centroid)).max(rel(i, oracle.eta));
                count += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= C1_TOL && secs < C1_SECONDS && count == 125,
        format!("{count} points, max rel err {worst:.2e} (tol {C1_TOL:e}), {secs:.2} s (limit {C1_SECONDS} s)"),
    )
}

const C2_TOL: f64 = 0.01;

fn approximation_errors(dphi: f64, kw: f64) -> (f64, f64) {
    let w = 1.2e-3;
    let coupling = WeakCoupling { k: kw / w };
    let beam = BeamPointer::new(w).unwrap();
    let pre = PreSelection::new(dphi, 0.0);
    let post = PostSelection::default();
    let c = centroid_exact(&pre, &post, &coupling, &beam).unwrap();
    let i = icr_exact(&pre, &post, &coupling, &beam).unwrap();
    let ca = centroid_approx(dphi, &coupling).unwrap();
    let ia = icr_approx(dphi, &coupling, &beam).unwrap();
    (rel(ca, c), rel(ia, i))
}

fn approximation_regime() -> Outcome {
    let (ec, ei) = approximation_errors(1e-3, 1e-2);
    let phi_steps: Vec<(f64, f64)> = [1e-3, 1e-2, 1e-1]
        .iter()
        .map(|&p| approximation_errors(p, 1e-2))
        .collect();
    let kw_steps: Vec<(f64, f64)> = [1e-2, 1e-1, 1.0]
        .iter()
        .map(|&k| approximation_errors(1e-3, k))
        .collect();
    let increasing = |v: &[(f64, f64)]| v.windows(2).all(|p| p[1].0 > p[0].0 && p[1].1 > p[0].1);
    let pass = ec < C2_TOL && ei < C2_TOL && increasing(&phi_steps) && increasing(&kw_steps);
    outcome(
        pass,
        format!(
            "centroid err {ec:.2e}, eta err {ei:.2e} (tol {C2_TOL}); x10 dphi errs {:.1e}/{:.1e}/{:.1e}; x10 kw errs {:.1e}/{:.1e}/{:.1e}",
            phi_steps[0].0, phi_steps[1].0, phi_steps[2].0, kw_steps[0].0, kw_steps[1].0, kw_steps[2].0
        ),
    )
}

const C3_TOL: f64 = 0.01;

fn amplification_law() -> Outcome {
    let w = 1.2e-3;
    let beam = BeamPointer::new(w).unwrap();
    let pre = PreSelection::new(1e-3, 0.0);
    let post = PostSelection::default();
    let products: Vec<f64> = log_sweep(7e-3 / w, 7e-2 / w, 4)
        .into_iter()
        .map(|k| k * centroid_exact(&pre, &post, &WeakCoupling { k }, &beam).unwrap())
        .collect();
    let mean = products.iter().sum::<f64>() / products.len() as f64;
    let spread = products.iter().map(|p| rel(*p, mean)).fold(0.0, f64::max);
    outcome(
        spread < C3_TOL,
        format!("k spans one decade, centroid*k = {mean:.6e}, max deviation {spread:.2e} (tol {C3_TOL})"),
    )
}

const C4_TOL: f64 = 4.0 * f64::EPSILON;

fn weak_value_check() -> Outcome {
    let post = PostSelection { angle: FRAC_PI_4 };
    let v = weak_value(&PreSelection::new(FRAC_PI_2, 0.0), &post);
    // π/4 and π/2 are not representable, so "exactly" means to a few ulps.
    let exact = matches!(v, Ok(z) if (z - Complex64::new(0.0, -1.0)).norm() <= C4_TOL);
    let diverges = matches!(
        weak_value(&PreSelection::new(0.0, 0.0), &post),
        Err(Error::OrthogonalPostselection { .. })
    );
    outcome(
        exact && diverges,
        format!("A_w(pi/2, 0, pi/4) = {:?} (tol {C4_TOL:.1e}); dphi = dbeta = 0 -> orthogonal error: {diverges}", v.map(|z| (z.re, z.im))),
    )
}

const C5_TOL: f64 = 2e-2;
const C5_SECONDS: f64 = 5.0;

fn kk_consistency() -> Outcome {
    let start = Instant::now();
    let mut residuals = Vec::new();
    for omega_mw in [0.0, TWO_PI * 10e6] {
        let p = LadderSystemParams::default().with_omega_mw(omega_mw);
        let spectrum = default_grid(&p).and_then(|g| susceptibility_spectrum(&p, &g));
        match spectrum.and_then(|s| kk_residual(&s)) {
            Ok(r) => residuals.push(r),
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        residuals.iter().all(|r| *r < C5_TOL) && secs < C5_SECONDS,
        format!(
            "EIT {:.2e}, EIT-AT {:.2e} (tol {C5_TOL:e}), {secs:.2} s (limit {C5_SECONDS} s)",
            residuals[0], residuals[1]
        ),
    )
}

const C6_TOL: f64 = 0.05;
const C6_R2: f64 = 0.999;

fn at_calibration() -> Outcome {
    let medium = LadderSystemParams::default();
    let mut errs = Vec::new();
    for f in [5e6, 10e6, 20e6] {
        let omega = TWO_PI * f;
        let e = omega * HBAR / DEFAULT_MW_DIPOLE;
        let p = medium.with_omega_mw(omega);
        let recovered = default_grid(&p)
            .and_then(|g| susceptibility_spectrum(&p, &g))
            .and_then(|s| at_splitting(&s))
            .and_then(|f_at| {
                field_from_at_splitting(f_at * p.at_scale_factor(), DEFAULT_MW_DIPOLE)
            });
        match recovered {
            Ok(r) => errs.push(rel(r, e)),
            Err(err) => return outcome(false, format!("{f} Hz: {err}")),
        }
    }
    let horn = 40.0;
    let powers = [1e-4, 2e-4, 4e-4, 8e-4, 1.6e-3];
    let fit = match calibration_curve(&powers, horn, DEFAULT_MW_DIPOLE, &medium) {
        Ok(f) => f,
        Err(e) => return outcome(false, e.to_string()),
    };
    let slope_err = rel(fit.slope, horn);
    let pass = errs.iter().all(|e| *e < C6_TOL) && fit.r_squared > C6_R2 && slope_err < C6_TOL;
    outcome(
        pass,
        format!(
            "field errors {:.2e}/{:.2e}/{:.2e} at 5/10/20 MHz (tol {C6_TOL}); calibration R2 {:.6}, slope err {slope_err:.2e}",
            errs[0], errs[1], errs[2], fit.r_squared
        ),
    )
}

fn splitting_progression() -> Outcome {
    let medium = LadderSystemParams::default();
    let grid = uniform_grid(-TWO_PI * 2e6, TWO_PI * 2e6, 4096).unwrap();
    let mut seps = Vec::new();
    let mut labels = Vec::new();
    for dbm in [-3.0f64, -1.0, 1.0, 3.0, 5.0] {
        let omega = TWO_PI * 50e3 * 10f64.powf(dbm / 20.0);
        let s = susceptibility_spectrum(&medium.with_omega_mw(omega), &grid).unwrap();
        match at_splitting(&s) {
            Ok(f) => {
                seps.push(f);
                labels.push(format!("{:.0} kHz", f / 1e3));
            }
            Err(Error::UnresolvedSplitting { peaks }) => {
                seps.push(0.0);
                labels.push(format!("unresolved({peaks})"));
            }
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    let monotone = seps.windows(2).all(|w| w[1] >= w[0]);
    let transition = seps[0] == 0.0 && seps[4] > 0.0;
    outcome(
        monotone && transition,
        format!("-3..5 dBm: {}", labels.join(", ")),
    )
}

const C8_BALANCE: f64 = 1e-12;

fn asymmetry_flip() -> Outcome {
    let w = 1.2e-3;
    let beam = BeamPointer::new(w).unwrap();
    let det = DetectorParams::noiseless();
    let coupling = WeakCoupling { k: 1e-2 / w };
    let mut signs = Vec::new();
    let mut at_zero = f64::NAN;
    for i in -12..=12 {
        let mut m = thermal_medium();
        m.delta_c = TWO_PI * 0.5e6 * i as f64;
        let d = arm_response(&m, 0.0).unwrap().differential();
        let pre = PreSelection::new(d.delta_phi, d.delta_beta / 2.0);
        let r = quadrature_oracle(&pre, &PostSelection::default(), &coupling, &beam).unwrap();
        let sp = split_powers(&beam.grid, &r.profile, &det).unwrap();
        let a = (sp.left - sp.right) / (sp.left + sp.right);
        if i == 0 {
            at_zero = a;
        } else {
            signs.push(a.signum());
        }
    }
    let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
    outcome(
        flips == 1 && at_zero.abs() < C8_BALANCE && signs[0] != signs[signs.len() - 1],
        format!(
            "coupling detuning -6..6 MHz: {flips} sign flip(s), asymmetry at 0 = {at_zero:.1e}"
        ),
    )
}

const C9_RATIO_MIN: f64 = 5.0;
const C9_STD_MAX: f64 = 6e-4;
const C9_SECONDS: f64 = 30.0;

fn stabilization() -> Outcome {
    let start = Instant::now();
    let pid = PidParams::default();
    let plant = ControlPlant::default();
    let report = simulate_closed_loop(&pid, &DriftModel::default(), &plant, 10.0, 5.0, 1)
        .and_then(|t| stabilization_report(&t, &pid, &plant));
    let secs = start.elapsed().as_secs_f64();
    match report {
        Ok(r) => {
            let ratio = r.suppression.ratio.unwrap_or(0.0);
            let reference = 2.9e-3 / 5.05e-4;
            outcome(
                ratio >= C9_RATIO_MIN
                    && r.suppression.std_closed <= C9_STD_MAX
                    && rel(ratio, reference) <= 0.2
                    && secs < C9_SECONDS,
                format!(
                    "std {:.2e} -> {:.2e}, ratio {ratio:.2} (reference {reference:.2} +-20%), {secs:.2} s",
                    r.suppression.std_open, r.suppression.std_closed
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

const C10_SLOPE_TOL: f64 = 0.05;

fn heterodyne() -> Outcome {
    let cfg = HeterodyneConfig::default();
    let medium = thermal_medium();
    let peak = run_beat_experiment(&cfg, &medium, &DetectorParams::noiseless(), 1e-2, 3)
        .and_then(|ts| analyze_beat(&ts, cfg.delta_f, cfg.segment_length));
    let (peak_ok, peak_msg) = match peak {
        Ok(b) => {
            let df = b.psd.bin_width();
            (
                (b.peak_freq - cfg.delta_f).abs() <= df,
                format!("peak {:.1} Hz (bin {df:.1} Hz)", b.peak_freq),
            )
        }
        Err(e) => (false, e.to_string()),
    };
    let e0: f64 = 3.7e-5;
    let synthetic: Vec<(f64, f64)> = log_sweep(1e-4, 1e-1, 4)
        .into_iter()
        .map(|e| (e, 20.0 * (e / e0).log10()))
        .collect();
    let crossing = min_detectable_field(&synthetic)
        .map(|(e, _)| rel(e, e0))
        .unwrap_or(f64::INFINITY);
    let amp = HeterodyneConfig {
        readout: Readout::Amplitude,
        ..cfg.clone()
    };
    let report = match scheme_comparison(&cfg, &amp, &medium, &laboratory_detector(), 2024) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let slopes: Vec<f64> = [&report.first, &report.second]
        .iter()
        .map(|r| r.fit.map(|f| f.slope).unwrap_or(f64::NAN))
        .collect();
    let slopes_ok = slopes.iter().all(|s| (s - 2.0).abs() <= C10_SLOPE_TOL);
    let ratio = report.comparison.e_min_ratio.unwrap_or(f64::NAN);
    let pass = peak_ok && slopes_ok && crossing < 1e-6 && (2.0..=5.0).contains(&ratio);
    outcome(
        pass,
        format!(
            "{peak_msg}; slopes {:.3}/{:.3} (2 +- {C10_SLOPE_TOL}); synthetic crossing err {crossing:.1e}; e_min {:.3e}/{:.3e} V/cm, ratio {ratio:.2} in [2, 5]",
            slopes[0],
            slopes[1],
            report.first.e_min_vpercm.unwrap_or(f64::NAN),
            report.second.e_min_vpercm.unwrap_or(f64::NAN)
        ),
    )
}

fn shot_noise() -> Outcome {
    let dnu = atomic_shot_noise(1.0, 1e12).unwrap();
    let dphi = photon_shot_noise(1e15).unwrap();
    let rate = photon_rate(175e-6, 852.35e-9).unwrap();
    let analytic = 175e-6 * 852.35e-9 / (PLANCK * SPEED_OF_LIGHT);
    let pass = dnu == 1e-6
        && (dphi - 3.162e-8).abs() < 1e-11
        && rel(rate, analytic) < 1e-12
        && (1e14..1e16).contains(&rate);
    outcome(
        pass,
        format!("dnu {dnu:e} Hz, dphi {dphi:.4e} rad, photon rate {rate:.4e} /s"),
    )
}

fn run_all(root: &Path) -> Result<Vec<(String, Vec<u8>)>, Error> {
    let mut out = Vec::new();
    for e in Experiment::ALL {
        let mut c = ExperimentConfig::new(e);
        c.seed = 11;
        c.output_dir = root.join(e.name());
        let m = run(&c)?;
        for f in m.files.iter().filter(|f| f.as_str() != "manifest.json") {
            out.push((format!("{}/{f}", e.name()), fs::read(c.output_dir.join(f))?));
        }
        let mut manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(c.output_dir.join("manifest.json"))?)?;
        manifest["wall_time_s"] = serde_json::Value::Null;
        manifest["config"]["output_dir"] = serde_json::Value::Null;
        out.push((
            format!("{}/manifest.json", e.name()),
            serde_json::to_vec(&manifest)?,
        ));
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let Ok(tmp) = tempfile::tempdir() else {
        return outcome(false, "no temp dir".into());
    };
    let a = run_all(&tmp.path().join("a"));
    let b = run_all(&tmp.path().join("b"));
    match (a, b) {
        (Ok(a), Ok(b)) => {
            let same = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x == y);
            outcome(
                same,
                format!(
                    "{} files from 6 experiments compared byte for byte",
                    a.len()
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e.to_string()),
    }
}

fn delta_beta_quantified() -> Outcome {
    let w = 1.2e-3;
    let beam = BeamPointer::new(w).unwrap();
    match delta_beta_dependence(1e-3, 0.05, &WeakCoupling { k: 1e-2 / w }, &beam) {
        Ok(d) => outcome(
            d.relative_deviation.is_finite()
                && d.relative_deviation <= d.bound / (1.0 + d.bound) * (1.0 + 1e-9)
                && d.order == 2,
            format!(
                "centroid {:.4e} -> {:.4e} m, relative deviation {:.3e} <= bound {:.3e}, order dbeta^{}",
                d.centroid_at_zero, d.centroid_at_beta, d.relative_deviation, d.bound / (1.0 + d.bound), d.order
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("closed-form fidelity", closed_form_fidelity),
        ("approximation regime", approximation_regime),
        ("amplification law", amplification_law),
        ("weak value", weak_value_check),
        ("Kramers-Kronig consistency", kk_consistency),
        ("AT calibration loop", at_calibration),
        ("splitting vs microwave power", splitting_progression),
        ("asymmetry vs coupling detuning", asymmetry_flip),
        ("stabilization", stabilization),
        ("heterodyne sensitivity", heterodyne),
        ("shot-noise formulas", shot_noise),
        ("determinism", determinism),
        ("dbeta dependence", delta_beta_quantified),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
