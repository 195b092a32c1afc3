//! Physical constants (SI, CODATA 2018 exact values where defined).

use std::f64::consts::PI;

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / (2.0 * PI);
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Mass of a ¹³³Cs atom.
pub const CS133_MASS: f64 = 132.905_451_961 * ATOMIC_MASS_UNIT;

/// Natural decay rate of Cs 6P₃/₂ (2π × 5.234 MHz).
pub const CS_D2_GAMMA: f64 = 2.0 * PI * 5.234e6;

pub const TWO_PI: f64 = 2.0 * PI;
