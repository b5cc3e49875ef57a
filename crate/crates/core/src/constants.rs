//! Physical constants of the carrier and the dielectric waveguides.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Carrier frequency `f_c` in Hz.
    pub carrier_frequency: f64,
    /// Free-space wavelength `λ_c = c / f_c` in m.
    pub wavelength: f64,
    /// Free-space wave number `κ_c = 2π / λ_c` in rad/m.
    pub wave_number: f64,
    /// Effective refractive index `n_e` of the waveguides.
    pub effective_refractive_index: f64,
    /// Guided wave number `κ_g = n_e κ_c` in rad/m.
    pub guided_wave_number: f64,
}

impl PhysicalConstants {
    pub fn new(carrier_frequency: f64, effective_refractive_index: f64) -> Result<Self> {
        if !(carrier_frequency.is_finite() && carrier_frequency > 0.0) {
            return Err(Error::Config(format!(
                "carrier frequency must be positive, got {carrier_frequency}"
            )));
        }
        if !(effective_refractive_index.is_finite() && effective_refractive_index > 0.0) {
            return Err(Error::Config(format!(
                "effective refractive index must be positive, got {effective_refractive_index}"
            )));
        }
        let wavelength = SPEED_OF_LIGHT / carrier_frequency;
        let wave_number = 2.0 * PI / wavelength;
        Ok(Self {
            carrier_frequency,
            wavelength,
            wave_number,
            effective_refractive_index,
            guided_wave_number: effective_refractive_index * wave_number,
        })
    }

    /// Minimum spacing between adjacent antennas on one waveguide, `λ_c / 2`.
    pub fn half_wavelength(&self) -> f64 {
        0.5 * self.wavelength
    }
}
