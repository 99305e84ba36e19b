//! Received-power model: free-space loss plus per-interaction losses.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    CBand,
    MmWave,
}

impl Band {
    pub fn label(self) -> &'static str {
        match self {
            Band::CBand => "cband",
            Band::MmWave => "mmwave",
        }
    }
}

/// Carrier configuration. OFDM numerology is carried as metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    pub name: Band,
    pub center_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub rx_sensitivity_dbm: f64,
}

pub const DEFAULT_RX_SENSITIVITY_DBM: f64 = -120.0;

impl BandConfig {
    pub const fn c_band() -> Self {
        Self {
            name: Band::CBand,
            center_frequency_hz: 3.775e9,
            bandwidth_hz: 100e6,
            subcarrier_spacing_hz: 30e3,
            rx_sensitivity_dbm: DEFAULT_RX_SENSITIVITY_DBM,
        }
    }

    pub const fn mm_wave() -> Self {
        Self {
            name: Band::MmWave,
            center_frequency_hz: 26.85e9,
            bandwidth_hz: 400e6,
            subcarrier_spacing_hz: 120e3,
            rx_sensitivity_dbm: DEFAULT_RX_SENSITIVITY_DBM,
        }
    }

    pub fn for_band(band: Band) -> Self {
        match band {
            Band::CBand => Self::c_band(),
            Band::MmWave => Self::mm_wave(),
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency_hz
    }
}

/// Free-space path loss `20 log10(4 pi d f / c)` in dB.
pub fn fspl_db(distance_m: f64, freq_hz: f64) -> f64 {
    20.0 * libm::log10(4.0 * core::f64::consts::PI * distance_m * freq_hz / SPEED_OF_LIGHT)
}

/// Fresnel reflection coefficient for perpendicular (TE) polarisation, going
/// from air into a medium of complex relative permittivity `eps`.
pub fn fresnel_perpendicular(eps: Complex64, cos_incidence: f64) -> Complex64 {
    let cos_i = cos_incidence.clamp(0.0, 1.0);
    let sin2 = 1.0 - cos_i * cos_i;
    let root = (eps - sin2).sqrt();
    (cos_i - root) / (cos_i + root)
}

/// Reflection loss in dB (non-negative).
pub fn reflection_loss_db(eps: Complex64, cos_incidence: f64) -> f64 {
    let gamma = fresnel_perpendicular(eps, cos_incidence).norm();
    -20.0 * libm::log10(gamma.max(1e-300))
}

/// Loss through a slab: power transmission at entry and again at exit.
pub fn penetration_loss_db(eps: Complex64, cos_incidence: f64) -> f64 {
    let gamma = fresnel_perpendicular(eps, cos_incidence).norm();
    let t = (1.0 - gamma * gamma).max(1e-30);
    -20.0 * libm::log10(t)
}

/// Lower validity limit of the knife-edge approximation.
pub const KNIFE_EDGE_V_MIN: f64 = -0.78;

/// Single knife-edge diffraction loss for Fresnel-Kirchhoff parameter `v`.
pub fn knife_edge_loss_db(v: f64) -> f64 {
    if v > KNIFE_EDGE_V_MIN {
        let w = v - 0.1;
        6.9 + 20.0 * libm::log10(libm::sqrt(w * w + 1.0) + w)
    } else {
        0.0
    }
}

/// Fresnel-Kirchhoff parameter from the excess length of the bent path.
/// `obstructing` selects the shadow (positive) branch.
pub fn fresnel_kirchhoff_v(excess_m: f64, wavelength_m: f64, obstructing: bool) -> f64 {
    let v = 2.0 * libm::sqrt(excess_m.max(0.0) / wavelength_m);
    if obstructing {
        v
    } else {
        -v
    }
}
