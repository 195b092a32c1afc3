//! Steady-state response of the Cs four-level ladder
//! 6S₁/₂ → 6P₃/₂ → nD₅/₂ → (n+1)P₃/₂ to a weak probe.
//!
//! The probe coherence is the weak-probe nested-resolvent solution; the
//! complex susceptibility follows from the usual density/dipole prefactor
//! and is mapped onto the phase and log-amplitude picked up by the arm of
//! the interferometer that carries the coupling beam.

mod spectrum;

pub use spectrum::{
    at_splitting, default_grid, field_from_at_splitting, kk_residual, spectrum_from_fn,
    susceptibility_spectrum, transparency_peaks, uniform_grid, write_spectrum_csv, SpectrumRow,
    DEFAULT_GRID_POINTS,
};

use log::warn;
use num_complex::Complex64;
use schemars::JsonSchema;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, CS133_MASS, CS_D2_GAMMA, HBAR, TWO_PI, VACUUM_PERMITTIVITY};
use crate::error::{ensure_finite, ensure_nonnegative, ensure_positive, Error, Result};
use crate::quadrature::{integrate_with_breaks, Tolerance};

/// Parameters of the four-level ladder. All rates and detunings are in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct LadderSystemParams {
    /// Probe Rabi frequency.
    pub omega_p: f64,
    /// Coupling Rabi frequency.
    pub omega_c: f64,
    /// Microwave Rabi frequency on the Rydberg–Rydberg transition.
    pub omega_mw: f64,
    /// Probe detuning used by pipelines that lock the probe (the spectrum
    /// operations take the detuning explicitly).
    pub delta_p: f64,
    pub delta_c: f64,
    pub delta_mw: f64,
    /// Intermediate-state population decay rate.
    pub gamma_2: f64,
    /// Total Rydberg coherence decay rates (transit and laser linewidth lumped in).
    pub gamma_3: f64,
    pub gamma_4: f64,
    /// Atomic number density, m⁻³.
    pub density: f64,
    /// Effective probe transition dipole, C·m.
    pub dipole_probe: f64,
    /// Medium length, m.
    pub cell_length: f64,
    /// Probe wavelength, m.
    pub lambda_p: f64,
    /// Coupling wavelength, m (only enters the thermal average).
    pub lambda_c: f64,
    /// Vapor temperature, K.
    pub temperature: f64,
    pub doppler_enabled: bool,
}

pub const DEFAULT_TEMPERATURE: f64 = 299.15;

impl Default for LadderSystemParams {
    fn default() -> Self {
        LadderSystemParams {
            omega_p: TWO_PI * 1.0e6,
            omega_c: TWO_PI * 5.0e6,
            omega_mw: 0.0,
            delta_p: 0.0,
            delta_c: 0.0,
            delta_mw: 0.0,
            gamma_2: CS_D2_GAMMA,
            gamma_3: TWO_PI * 100e3,
            gamma_4: TWO_PI * 100e3,
            density: crate::limits::cs_number_density(DEFAULT_TEMPERATURE),
            dipole_probe: DEFAULT_PROBE_DIPOLE,
            cell_length: 0.10,
            lambda_p: 852.35e-9,
            lambda_c: 509.93e-9,
            temperature: DEFAULT_TEMPERATURE,
            doppler_enabled: false,
        }
    }
}

/// Effective probe dipole. Smaller than the bare D2 reduced matrix element
/// to account for hyperfine branching and ground-state F=4 population.
pub const DEFAULT_PROBE_DIPOLE: f64 = 6.0e-30;

// The weak-probe warning is printed once per process.
static WEAK_PROBE_WARNED: AtomicBool = AtomicBool::new(false);

impl LadderSystemParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_p", self.omega_p),
            ("omega_c", self.omega_c),
            ("omega_mw", self.omega_mw),
            ("delta_p", self.delta_p),
            ("delta_c", self.delta_c),
            ("delta_mw", self.delta_mw),
            ("dipole_probe", self.dipole_probe),
        ] {
            ensure_finite(name, v)?;
        }
        ensure_positive("gamma_2", self.gamma_2)?;
        ensure_nonnegative("gamma_3", self.gamma_3)?;
        ensure_nonnegative("gamma_4", self.gamma_4)?;
        ensure_nonnegative("density", self.density)?;
        ensure_positive("cell_length", self.cell_length)?;
        ensure_positive("lambda_p", self.lambda_p)?;
        ensure_positive("lambda_c", self.lambda_c)?;
        ensure_nonnegative("temperature", self.temperature)?;
        if self.omega_p.abs() > 0.1 * self.gamma_2
            && !WEAK_PROBE_WARNED.swap(true, Ordering::Relaxed)
        {
            warn!(
                "omega_p = {:.3e} rad/s is not << gamma_2 = {:.3e} rad/s; weak-probe solution is approximate",
                self.omega_p, self.gamma_2
            );
        }
        Ok(())
    }

    /// `N d² / (ε₀ ħ)` in rad/s; multiplies `i / D` to give χ.
    pub fn chi_prefactor(&self) -> f64 {
        self.density * self.dipole_probe * self.dipole_probe / (VACUUM_PERMITTIVITY * HBAR)
    }

    /// Most probable 1-D thermal speed `sqrt(2 k_B T / m)`.
    pub fn thermal_speed(&self) -> f64 {
        (2.0 * BOLTZMANN * self.temperature / CS133_MASS).sqrt()
    }

    pub fn probe_wavenumber(&self) -> f64 {
        TWO_PI / self.lambda_p
    }

    pub fn coupling_wavenumber(&self) -> f64 {
        TWO_PI / self.lambda_c
    }

    /// Factor converting a probe-scan peak separation into the microwave
    /// Rabi frequency. In a thermal vapor with counter-propagating beams the
    /// splitting seen on the probe axis shrinks by λc/λp.
    pub fn at_scale_factor(&self) -> f64 {
        if self.doppler_enabled && self.temperature > 0.0 {
            self.lambda_p / self.lambda_c
        } else {
            1.0
        }
    }

    /// The same medium with the coupling and microwave fields switched off,
    /// i.e. what the reference arm of the loop sees.
    pub fn without_dressing(&self) -> Self {
        LadderSystemParams {
            omega_c: 0.0,
            omega_mw: 0.0,
            ..self.clone()
        }
    }

    pub fn with_omega_mw(&self, omega_mw: f64) -> Self {
        LadderSystemParams {
            omega_mw,
            ..self.clone()
        }
    }
}

/// Probe detuning (rad/s) and the medium susceptibility there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityPoint {
    pub delta_p: f64,
    pub chi: Complex64,
}

/// Differential phase and log-amplitude of one pass through the medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PhaseAbsorptionPair {
    pub delta_phi: f64,
    pub delta_beta: f64,
}

impl PhaseAbsorptionPair {
    /// Field transmission `e^{Δβ}` squared.
    pub fn power_transmission(&self) -> f64 {
        (2.0 * self.delta_beta).exp()
    }
}

// D(Δp) of the nested resolvent, for explicit probe and coupling detunings.
fn resolvent(p: &LadderSystemParams, delta_p: f64, delta_c: f64) -> Complex64 {
    let g21 = p.gamma_2 / 2.0;
    let g31 = p.gamma_3;
    let g41 = p.gamma_4;
    let two_photon = delta_p + delta_c;
    let three_photon = two_photon + p.delta_mw;

    let half_mw = p.omega_mw / 2.0;
    let half_c = p.omega_c / 2.0;

    let inner = Complex64::new(g41, -three_photon);
    let mut d3 = Complex64::new(g31, -two_photon);
    if half_mw != 0.0 {
        d3 += half_mw * half_mw / inner;
    }
    let mut d2 = Complex64::new(g21, -delta_p);
    if half_c != 0.0 {
        d2 += half_c * half_c / d3;
    }
    d2
}

/// Weak-probe steady-state probe coherence ρ₂₁ for a single velocity class.
pub fn steady_state_coherence(params: &LadderSystemParams, delta_p: f64) -> Result<Complex64> {
    params.validate()?;
    ensure_finite("delta_p", delta_p)?;
    let d = resolvent(params, delta_p, params.delta_c);
    Ok(Complex64::new(0.0, params.omega_p / 2.0) / d)
}

fn chi_single(p: &LadderSystemParams, delta_p: f64, delta_c: f64) -> Complex64 {
    let d = resolvent(p, delta_p, delta_c);
    Complex64::new(0.0, p.chi_prefactor()) / d
}

/// Susceptibility of atoms at rest (no velocity average).
pub fn susceptibility_at_rest(params: &LadderSystemParams, delta_p: f64) -> Result<Complex64> {
    params.validate()?;
    ensure_finite("delta_p", delta_p)?;
    Ok(chi_single(params, delta_p, params.delta_c))
}

/// Susceptibility at `delta_p`, thermally averaged when the medium has
/// `doppler_enabled` set.
pub fn susceptibility(params: &LadderSystemParams, delta_p: f64) -> Result<Complex64> {
    if params.doppler_enabled {
        doppler_average(params, delta_p)
    } else {
        susceptibility_at_rest(params, delta_p)
    }
}

// Relative error above which the velocity average is rejected.
const DOPPLER_ACCURACY: f64 = 1e-6;
// Velocity cutoff in units of the thermal speed (weight e^{-64}).
const DOPPLER_CUTOFF: f64 = 8.0;

/// Maxwell–Boltzmann average of χ over the velocity component along the
/// probe. The probe sees `Δp − k_p v`, the counter-propagating coupling
/// `Δc + k_c v`.
///
/// The average is an adaptive Gauss–Kronrod integral whose initial
/// partition is seeded at every velocity where a one-, two- or three-photon
/// resonance (bare or dressed) falls, so features much narrower than the
/// thermal width are never stepped over.
pub fn doppler_average(params: &LadderSystemParams, delta_p: f64) -> Result<Complex64> {
    params.validate()?;
    ensure_finite("delta_p", delta_p)?;
    if !params.doppler_enabled {
        return Err(Error::Precondition(
            "doppler_average requires doppler_enabled".into(),
        ));
    }
    if params.temperature <= 0.0 {
        return Err(Error::param(
            "temperature",
            "must be > 0 for a thermal average",
        ));
    }
    let u = params.thermal_speed();
    let kp = params.probe_wavenumber();
    let kc = params.coupling_wavenumber();
    let dk = kp - kc;
    let norm = 1.0 / std::f64::consts::PI.sqrt();

    let integrand = |s: f64| {
        let v = u * s;
        chi_single(params, delta_p - kp * v, params.delta_c + kc * v) * ((-s * s).exp() * norm)
    };

    let breaks = velocity_breaks(params, delta_p, u, kp, dk);
    let tol = Tolerance {
        abs: 0.0,
        rel: 1e-10,
        max_intervals: 6000,
    };
    match integrate_with_breaks(integrand, &breaks, tol) {
        Ok(r) => Ok(r.value),
        Err(Error::Accuracy { estimate, .. }) if estimate <= DOPPLER_ACCURACY => {
            // Tight target missed but still inside the accepted accuracy; redo
            // at the accepted level to get a value.
            let loose = Tolerance {
                rel: DOPPLER_ACCURACY,
                ..tol
            };
            integrate_with_breaks(integrand, &breaks, loose).map(|r| r.value)
        }
        Err(Error::Accuracy { estimate, .. }) => Err(Error::Accuracy {
            what: "Doppler velocity average".into(),
            estimate,
        }),
        Err(e) => Err(e),
    }
}

// Break points, in units of the thermal speed, around every velocity that
// puts some resonance on line.
fn velocity_breaks(p: &LadderSystemParams, delta_p: f64, u: f64, kp: f64, dk: f64) -> Vec<f64> {
    let lim = DOPPLER_CUTOFF;
    let mut pts = vec![-lim, lim];
    let dressing = [
        0.0,
        p.omega_c / 2.0,
        -p.omega_c / 2.0,
        p.omega_mw / 2.0,
        -p.omega_mw / 2.0,
    ];
    let mut centers: Vec<(f64, f64)> = Vec::new();
    let probe_width = p.gamma_2 / 2.0 / (kp * u);
    let ryd_gamma = p.gamma_3.max(p.gamma_4).max(1e-3 * p.gamma_2);
    for shift in dressing {
        // one-photon
        centers.push(((delta_p - shift) / (kp * u), probe_width));
        if dk != 0.0 {
            let two = delta_p + p.delta_c - shift;
            let three = two + p.delta_mw;
            let width = ryd_gamma / (dk.abs() * u);
            centers.push((two / (dk * u), width));
            centers.push((three / (dk * u), width));
        }
    }
    for (c, w) in centers {
        if !c.is_finite() || !w.is_finite() {
            continue;
        }
        for m in [-16.0, -4.0, -1.0, 0.0, 1.0, 4.0, 16.0] {
            let x = c + m * w;
            if x > -lim && x < lim {
                pts.push(x);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Thin-medium mapping of χ onto the phase and field log-amplitude of one
/// pass: `Δφ = (π L / λ) Re χ`, `Δβ = −(π L / λ) Im χ`.
pub fn phase_and_absorption(chi: Complex64, params: &LadderSystemParams) -> PhaseAbsorptionPair {
    if chi.norm() > 1e-2 {
        warn!(
            "|chi| = {:.3e} is not << 1; thin dilute-medium mapping is approximate",
            chi.norm()
        );
    }
    let scale = std::f64::consts::PI * params.cell_length / params.lambda_p;
    PhaseAbsorptionPair {
        delta_phi: scale * chi.re,
        delta_beta: -scale * chi.im,
    }
}

/// Response of both arms of the loop at one probe detuning. The signal arm
/// co-propagates with the coupling beam; the reference arm crosses the same
/// vapor undressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmResponse {
    pub signal: PhaseAbsorptionPair,
    pub reference: PhaseAbsorptionPair,
}

impl ArmResponse {
    /// Phase and log-amplitude of the signal arm relative to the reference arm.
    pub fn differential(&self) -> PhaseAbsorptionPair {
        PhaseAbsorptionPair {
            delta_phi: self.signal.delta_phi - self.reference.delta_phi,
            delta_beta: self.signal.delta_beta - self.reference.delta_beta,
        }
    }

    /// Mean power transmission of the two arms.
    pub fn mean_transmission(&self) -> f64 {
        0.5 * (self.signal.power_transmission() + self.reference.power_transmission())
    }
}

pub fn arm_response(params: &LadderSystemParams, delta_p: f64) -> Result<ArmResponse> {
    let signal = phase_and_absorption(susceptibility(params, delta_p)?, params);
    let reference_params = params.without_dressing();
    let reference = phase_and_absorption(susceptibility(&reference_params, delta_p)?, params);
    Ok(ArmResponse { signal, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn quiet() -> LadderSystemParams {
        LadderSystemParams {
            doppler_enabled: false,
            ..Default::default()
        }
    }

    #[test]
    fn bare_two_level_peak() {
        let p = LadderSystemParams {
            omega_c: 0.0,
            omega_mw: 0.0,
            ..quiet()
        };
        let rho = steady_state_coherence(&p, 0.0).unwrap();
        let want = p.omega_p / (2.0 * p.gamma_2 / 2.0);
        assert!(rho.re.abs() < 1e-15);
        assert!((rho.im - want).abs() / want < 1e-14);
    }

    #[test]
    fn coupling_suppresses_line_center() {
        let bare = LadderSystemParams {
            omega_c: 0.0,
            ..quiet()
        };
        let eit = quiet();
        let a = steady_state_coherence(&bare, 0.0).unwrap().norm();
        let b = steady_state_coherence(&eit, 0.0).unwrap().norm();
        assert!(b < 0.5 * a, "EIT dip missing: {b} vs {a}");
    }

    #[test]
    fn non_finite_parameter_rejected() {
        let p = LadderSystemParams {
            omega_c: f64::NAN,
            ..quiet()
        };
        let err = steady_state_coherence(&p, 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { ref name, .. } if name == "omega_c"));
        let p = LadderSystemParams {
            cell_length: -1.0,
            ..quiet()
        };
        assert!(
            matches!(p.validate(), Err(Error::InvalidParameter { ref name, .. }) if name == "cell_length")
        );
    }

    #[test]
    fn mapping_of_trivial_susceptibilities() {
        let p = quiet();
        let zero = phase_and_absorption(Complex64::new(0.0, 0.0), &p);
        assert_eq!(zero.delta_phi, 0.0);
        assert_eq!(zero.delta_beta, 0.0);
        let imag = phase_and_absorption(Complex64::new(0.0, 1e-6), &p);
        assert_eq!(imag.delta_phi, 0.0);
        assert!(imag.delta_beta < 0.0);
    }

    #[test]
    fn doppler_cold_limit_matches_rest_frame() {
        for t in [1e-12, 1e-9] {
            let p = LadderSystemParams {
                doppler_enabled: true,
                temperature: t,
                omega_mw: TWO_PI * 8e6,
                ..Default::default()
            };
            for dp in [-TWO_PI * 3e6, 0.0, TWO_PI * 1.3e6] {
                let avg = doppler_average(&p, dp).unwrap();
                let rest = susceptibility_at_rest(&p, dp).unwrap();
                let rel = (avg - rest).norm() / rest.norm();
                let tol = if t < 1e-10 { 1e-9 } else { 1e-6 };
                assert!(rel < tol, "T={t} dp={dp}: rel {rel:e}");
            }
        }
    }

    #[test]
    fn doppler_average_matches_brute_force() {
        // Independent check: uniform-partition adaptive integral over a much
        // finer forced partition.
        let p = LadderSystemParams {
            doppler_enabled: true,
            ..Default::default()
        };
        let dp = TWO_PI * 0.7e6;
        let avg = doppler_average(&p, dp).unwrap();
        let u = p.thermal_speed();
        let (kp, kc) = (p.probe_wavenumber(), p.coupling_wavenumber());
        let f = |s: f64| {
            let v = u * s;
            chi_single(&p, dp - kp * v, p.delta_c + kc * v)
                * ((-s * s).exp() / std::f64::consts::PI.sqrt())
        };
        let mut sum = Complex64::new(0.0, 0.0);
        let n = 4000;
        for i in 0..n {
            let a = -8.0 + 16.0 * i as f64 / n as f64;
            let b = -8.0 + 16.0 * (i + 1) as f64 / n as f64;
            sum += integrate(f, a, b, Tolerance::default()).unwrap().value;
        }
        let rel = (avg - sum).norm() / sum.norm();
        assert!(rel < 1e-8, "rel {rel:e}");
    }

    #[test]
    fn doppler_requires_flag_and_temperature() {
        assert!(matches!(
            doppler_average(&quiet(), 0.0),
            Err(Error::Precondition(_))
        ));
        let p = LadderSystemParams {
            doppler_enabled: true,
            temperature: 0.0,
            ..Default::default()
        };
        assert!(doppler_average(&p, 0.0).is_err());
    }

    #[test]
    fn reference_arm_is_undressed() {
        let p = LadderSystemParams {
            omega_mw: TWO_PI * 3e6,
            ..quiet()
        };
        let r = arm_response(&p, 0.0).unwrap();
        // EIT makes the signal arm more transparent than the reference arm.
        assert!(r.signal.delta_beta > r.reference.delta_beta);
        assert!(r.differential().delta_beta > 0.0);
    }
}
