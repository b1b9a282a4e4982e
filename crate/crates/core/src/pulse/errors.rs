//! Closed-form per-pulse error mechanisms on spectator ions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::two_level::crosstalk_probability;
use crate::error::{Error, Result};

/// Light-shift rate `Omega^2 / (2 Delta)` in Hz, signed by the detuning.
pub fn light_shift_rate(rabi: f64, detuning: f64) -> Result<f64> {
    if detuning == 0.0 {
        return Err(Error::Domain(
            "light shift undefined at zero detuning".into(),
        ));
    }
    Ok(rabi * rabi / (2.0 * detuning))
}

/// Phase (rad) a spectator superposition picks up from the light shift
/// during one pulse.
pub fn light_shift_phase(rabi: f64, detuning: f64, duration: f64) -> Result<f64> {
    Ok(2.0 * PI * light_shift_rate(rabi, detuning)? * duration)
}

/// `1 - (1 + cos dphi) / 2`, the infidelity of a superposition after a
/// relative phase error `dphi`.
pub fn dephasing_error(phase_shift: f64) -> f64 {
    let s = (0.5 * phase_shift).sin();
    s * s
}

/// Phase (rad) accumulated over `duration` under a static coupling `j` (Hz).
pub fn j_coupling_phase(j: f64, duration: f64) -> f64 {
    2.0 * PI * j * duration
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    /// Pairwise static couplings, Hz. Symmetric with zero diagonal.
    pub j_matrix: Vec<Vec<f64>>,
    pub enabled: bool,
}

impl CouplingConfig {
    pub fn disabled(n: usize) -> Self {
        Self {
            j_matrix: vec![vec![0.0; n]; n],
            enabled: false,
        }
    }

    /// Equal coupling `j` between nearest neighbours only.
    pub fn nearest_neighbor(n: usize, j: f64) -> Self {
        let mut m = vec![vec![0.0; n]; n];
        for k in 1..n {
            m[k][k - 1] = j;
            m[k - 1][k] = j;
        }
        Self {
            j_matrix: m,
            enabled: true,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.j_matrix.len() != n || self.j_matrix.iter().any(|r| r.len() != n) {
            return Err(Error::Configuration(format!("J matrix must be {n}x{n}")));
        }
        for a in 0..n {
            if self.j_matrix[a][a] != 0.0 {
                return Err(Error::invalid("J matrix diagonal must be zero"));
            }
            for b in 0..a {
                if self.j_matrix[a][b] != self.j_matrix[b][a] {
                    return Err(Error::invalid("J matrix must be symmetric"));
                }
            }
        }
        Ok(())
    }

    /// Net coupling felt by `ion` from all others held in `|0>`, Hz.
    /// Zero when disabled.
    pub fn effective_coupling(&self, ion: usize) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        self.j_matrix
            .get(ion)
            .map(|row| row.iter().sum())
            .unwrap_or(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidebandConfig {
    /// Motional mode frequency, Hz.
    pub mode_frequency: f64,
    pub mean_phonon_number: f64,
    /// Effective Lamb-Dicke factor; 0 disables the channel.
    pub effective_lamb_dicke: f64,
}

impl Default for SidebandConfig {
    fn default() -> Self {
        Self {
            mode_frequency: 124e3,
            mean_phonon_number: 150.0,
            effective_lamb_dicke: 0.0,
        }
    }
}

impl SidebandConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_phonon_number >= 0.0 && self.effective_lamb_dicke >= 0.0) {
            return Err(Error::invalid(
                "mean phonon number and Lamb-Dicke factor must be non-negative",
            ));
        }
        if !(self.mode_frequency > 0.0) {
            return Err(Error::invalid("mode frequency must be positive"));
        }
        Ok(())
    }

    /// Thermal occupation probability of Fock state `n`.
    pub fn thermal_weight(&self, n: u32) -> f64 {
        let nbar = self.mean_phonon_number;
        if nbar == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        let q = nbar / (nbar + 1.0);
        (1.0 - q) * q.powi(n as i32)
    }
}

const SIDEBAND_MAX_TERMS: u32 = 10_000;

/// Thermally averaged off-resonant excitation through the red and blue
/// motional sidebands.
///
/// `transition_detuning` is the spectator transition frequency minus the
/// carrier (Hz). The red sideband sits `mode_frequency` below the
/// transition with Rabi frequency `eta Omega sqrt(n)`, the blue one above
/// with `eta Omega sqrt(n+1)`.
pub fn sideband_crosstalk(
    config: &SidebandConfig,
    rabi: f64,
    transition_detuning: f64,
    duration: f64,
) -> f64 {
    let eta = config.effective_lamb_dicke;
    if eta == 0.0 || rabi == 0.0 {
        return 0.0;
    }
    let red_detuning = transition_detuning - config.mode_frequency;
    let blue_detuning = transition_detuning + config.mode_frequency;
    let mut total = 0.0;
    let mut mass = 0.0;
    for n in 0..SIDEBAND_MAX_TERMS {
        let w = config.thermal_weight(n);
        mass += w;
        let nf = n as f64;
        let red = crosstalk_probability(eta * rabi * nf.sqrt(), red_detuning, duration);
        let blue = crosstalk_probability(eta * rabi * (nf + 1.0).sqrt(), blue_detuning, duration);
        total += w * (red + blue);
        if 1.0 - mass < 1e-16 {
            break;
        }
    }
    total
}
