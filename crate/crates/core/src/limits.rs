//! Fundamental noise floors: atomic and photon shot noise, and the atom and
//! photon numbers that set them.
//!
//! The Cs vapor pressure follows the Nesmeyanov correlation as tabulated in
//! D. A. Steck, "Cesium D Line Data": solid phase below the 28.5 °C melting
//! point, liquid phase above.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, PLANCK, SPEED_OF_LIGHT};
use crate::error::{ensure_finite, Error, Result};

const TORR: f64 = 101_325.0 / 760.0;
const CS_MELTING_POINT: f64 = 301.59;

pub const VAPOR_T_MIN: f64 = 250.0;
pub const VAPOR_T_MAX: f64 = 400.0;

/// Saturated Cs vapor pressure in Pa.
pub fn cs_vapor_pressure(temperature: f64) -> f64 {
    let log10_torr = if temperature < CS_MELTING_POINT {
        2.881 + 4.711 - 3999.0 / temperature
    } else {
        2.881 + 4.165 - 3830.0 / temperature
    };
    10f64.powf(log10_torr) * TORR
}

/// Ideal-gas number density of saturated Cs vapor, m⁻³.
pub fn cs_number_density(temperature: f64) -> f64 {
    cs_vapor_pressure(temperature) / (BOLTZMANN * temperature)
}

fn positive_arg(name: &str, v: f64) -> Result<()> {
    ensure_finite(name, v).map_err(|_| Error::InvalidArgument(format!("{name} must be finite")))?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be > 0, got {v}"
        )))
    }
}

/// Atomic projection-noise limit `δν = 1 / (T √N_at)`, in Hz.
pub fn atomic_shot_noise(t_meas: f64, n_atoms: f64) -> Result<f64> {
    positive_arg("t_meas", t_meas)?;
    positive_arg("n_atoms", n_atoms)?;
    Ok(1.0 / (t_meas * n_atoms.sqrt()))
}

/// Photon shot-noise phase limit `δφ = 1 / √N_pho`, in rad.
pub fn photon_shot_noise(n_photons: f64) -> Result<f64> {
    positive_arg("n_photons", n_photons)?;
    Ok(1.0 / n_photons.sqrt())
}

/// Photons per second in a beam of `power` W at `wavelength` m.
pub fn photon_rate(power: f64, wavelength: f64) -> Result<f64> {
    positive_arg("probe_power", power)?;
    positive_arg("wavelength", wavelength)?;
    Ok(power * wavelength / (PLANCK * SPEED_OF_LIGHT))
}

/// Interaction volume: a cylindrical beam of the given radius through the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CellGeometry {
    pub length: f64,
    pub beam_radius: f64,
}

impl CellGeometry {
    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * self.beam_radius * self.beam_radius * self.length
    }
}

impl Default for CellGeometry {
    fn default() -> Self {
        CellGeometry {
            length: 0.10,
            beam_radius: 1.2e-3,
        }
    }
}

/// Number of atoms inside the beam volume at saturated vapor density.
pub fn atom_number_estimate(geometry: &CellGeometry, temperature: f64) -> Result<f64> {
    positive_arg("length", geometry.length)?;
    positive_arg("beam_radius", geometry.beam_radius)?;
    if !(VAPOR_T_MIN..=VAPOR_T_MAX).contains(&temperature) {
        return Err(Error::Domain(format!(
            "temperature {temperature} K outside the vapor-pressure correlation range [{VAPOR_T_MIN}, {VAPOR_T_MAX}] K"
        )));
    }
    Ok(cs_number_density(temperature) * geometry.volume())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct LimitInputs {
    /// Integration time, s.
    pub t_meas: f64,
    /// Atom count; estimated from the vapor density when absent.
    pub n_atoms: Option<f64>,
    /// Probe power, W.
    pub probe_power: f64,
    pub probe_wavelength: f64,
    pub geometry: CellGeometry,
    pub temperature: f64,
}

impl Default for LimitInputs {
    fn default() -> Self {
        LimitInputs {
            t_meas: 1.0,
            n_atoms: None,
            probe_power: 175e-6,
            probe_wavelength: 852.35e-9,
            geometry: CellGeometry::default(),
            temperature: 299.15,
        }
    }
}

/// All limit quantities for one configuration. Photon numbers are counted
/// over `t_meas`, so both floors refer to the same integration time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LimitReport {
    pub t_meas_s: f64,
    pub vapor_pressure_pa: f64,
    pub number_density_m3: f64,
    pub n_atoms: f64,
    pub n_atoms_estimated: bool,
    pub photon_rate_per_s: f64,
    pub n_photons_in_t_meas: f64,
    pub atomic_shot_noise_hz: f64,
    pub photon_shot_noise_rad: f64,
    /// Atomic limit expressed as a fractional (dimensionless) uncertainty
    /// `1/√N_at`, comparable with the photon phase limit.
    pub atomic_shot_noise_fractional: f64,
    pub photon_below_atomic: bool,
}

pub fn report(inputs: &LimitInputs) -> Result<LimitReport> {
    let (n_atoms, estimated) = match inputs.n_atoms {
        Some(n) => (n, false),
        None => (
            atom_number_estimate(&inputs.geometry, inputs.temperature)?,
            true,
        ),
    };
    let rate = photon_rate(inputs.probe_power, inputs.probe_wavelength)?;
    let n_photons = rate * inputs.t_meas;
    let dnu = atomic_shot_noise(inputs.t_meas, n_atoms)?;
    let dphi = photon_shot_noise(n_photons)?;
    let frac = 1.0 / n_atoms.sqrt();
    Ok(LimitReport {
        t_meas_s: inputs.t_meas,
        vapor_pressure_pa: cs_vapor_pressure(inputs.temperature),
        number_density_m3: cs_number_density(inputs.temperature),
        n_atoms,
        n_atoms_estimated: estimated,
        photon_rate_per_s: rate,
        n_photons_in_t_meas: n_photons,
        atomic_shot_noise_hz: dnu,
        photon_shot_noise_rad: dphi,
        atomic_shot_noise_fractional: frac,
        photon_below_atomic: dphi < frac,
    })
}
