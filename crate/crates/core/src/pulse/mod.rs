//! Coherent dynamics of each ion's four hyperfine levels under rectangular
//! microwave pulses.
//!
//! Basis order per ion is `(|0>, |0'>, |1>, |-1>)`. One carrier tone
//! drives `|0>` to each F=1 level through its own channel with the
//! rotating-wave approximation applied per channel. In the frame rotating
//! at the carrier the Hamiltonian (rad/s) is time independent:
//!
//! ```text
//! H[c][c] = -2 pi (nu_carrier - nu_c)
//! H[c][0] = pi Omega_c e^{i phi},  H[0][c] = conj
//! ```
//!
//! Restricted to `{|0>, |c>}` this equals [`two_level_unitary`] with
//! `detuning = nu_carrier - nu_c`, up to a global phase.
//!
//! Sequences are tracked in each ion's own interaction frame, where free
//! evolution is the identity; see [`PulsePropagator::apply_in_ion_frame`].

mod errors;
mod expm;
mod two_level;

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{IonTransitions, TransitionSet};
use crate::error::{Error, Result};

pub use errors::{
    dephasing_error, j_coupling_phase, light_shift_phase, light_shift_rate, sideband_crosstalk,
    CouplingConfig, SidebandConfig,
};
pub use expm::unitary_propagator;
pub use two_level::{
    crosstalk_envelope, crosstalk_probability, generalized_rabi, two_level_unitary,
};

/// Number of hyperfine levels tracked per ion.
pub const LEVELS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// `|0> <-> |0'>`
    Pi,
    /// `|0> <-> |1>`, the register qubit
    SigmaPlus,
    /// `|0> <-> |-1>`
    SigmaMinus,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Pi, Channel::SigmaPlus, Channel::SigmaMinus];

    /// Index of the excited level in the per-ion basis.
    pub fn level(self) -> usize {
        match self {
            Channel::Pi => 1,
            Channel::SigmaPlus => 2,
            Channel::SigmaMinus => 3,
        }
    }

    fn slot(self) -> usize {
        self.level() - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Hz.
    pub carrier_frequency: f64,
    /// Radians in `[0, 2 pi)`.
    pub phase: f64,
    /// Seconds.
    pub duration: f64,
}

impl Pulse {
    pub fn new(carrier_frequency: f64, phase: f64, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid("pulse duration must be positive"));
        }
        Ok(Self {
            carrier_frequency,
            phase: phase.rem_euclid(TAU),
            duration,
        })
    }
}

/// Relative drive strength of the three channels for a given microwave
/// polarization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarizationWeights {
    pub pi: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
}

impl Default for PolarizationWeights {
    fn default() -> Self {
        Self {
            pi: 1.0,
            sigma_plus: 1.0,
            sigma_minus: 1.0,
        }
    }
}

impl PolarizationWeights {
    fn as_array(&self) -> [f64; 3] {
        [self.pi, self.sigma_plus, self.sigma_minus]
    }
}

/// Resonant Rabi frequency (Hz) of every channel of every ion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiMap {
    /// `ions[k][slot]` with slots ordered `(pi, sigma+, sigma-)`.
    pub ions: Vec<[f64; 3]>,
}

impl RabiMap {
    /// Each ion's sigma+ Rabi frequency from `per_ion`, other channels by
    /// `weights` relative to sigma+.
    pub fn from_per_ion(per_ion: &[f64], weights: PolarizationWeights) -> Result<Self> {
        let w = weights.as_array();
        if w.iter()
            .chain(per_ion)
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(Error::invalid(
                "Rabi frequencies and weights must be non-negative",
            ));
        }
        let scale = if weights.sigma_plus > 0.0 {
            1.0 / weights.sigma_plus
        } else {
            0.0
        };
        let ions = per_ion
            .iter()
            .map(|&r| [r * w[0] * scale, r, r * w[2] * scale])
            .collect();
        Ok(Self { ions })
    }

    pub fn uniform(ion_count: usize, rabi: f64, weights: PolarizationWeights) -> Result<Self> {
        Self::from_per_ion(&vec![rabi; ion_count], weights)
    }

    pub fn len(&self) -> usize {
        self.ions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ions.is_empty()
    }

    pub fn get(&self, ion: usize, channel: Channel) -> f64 {
        self.ions[ion][channel.slot()]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            ions: self.ions.iter().map(|r| r.map(|v| v * factor)).collect(),
        }
    }

    /// Rescales the whole map so that `ion` has `target` on `channel`.
    pub fn normalized_to(&self, ion: usize, channel: Channel, target: f64) -> Result<Self> {
        let current = self.get(ion, channel);
        if current <= 0.0 {
            return Err(Error::Configuration(format!(
                "ion {ion} has no coupling on {channel:?}"
            )));
        }
        Ok(self.scaled(target / current))
    }
}

/// Amplitudes over `(|0>, |0'>, |1>, |-1>)` in the ion's own frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IonState(pub Vector4<Complex64>);

impl IonState {
    pub fn ground() -> Self {
        Self(Vector4::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ))
    }

    pub fn basis(level: usize) -> Self {
        let mut v = Vector4::zeros();
        v[level] = Complex64::new(1.0, 0.0);
        Self(v)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn population(&self, level: usize) -> f64 {
        self.0[level].norm_sqr()
    }

    /// Probability of scattering fluorescence: every F=1 level is bright.
    pub fn bright_probability(&self) -> f64 {
        (1..LEVELS).map(|k| self.population(k)).sum::<f64>() / self.norm_sqr()
    }

    /// Applies a diagonal phase `e^{-i phi}` to every F=1 level.
    pub fn rotate_upper(&mut self, phi: f64) {
        let p = Complex64::from_polar(1.0, -phi);
        for k in 1..LEVELS {
            self.0[k] *= p;
        }
    }

    /// Ideal rotation by `theta` about an equatorial axis at `phase` on the
    /// `|0> <-> |c>` transition of `channel`.
    pub fn rotate(&mut self, channel: Channel, theta: f64, phase: f64) {
        let c = channel.level();
        let (s, co) = (0.5 * theta).sin_cos();
        let a0 = self.0[0];
        let ac = self.0[c];
        let i = Complex64::i();
        // exp(-i theta/2 (cos phi X + sin phi Y)) in the basis (|0>, |c>)
        let lower = -i * s * Complex64::from_polar(1.0, phase);
        let upper = -i * s * Complex64::from_polar(1.0, -phase);
        self.0[0] = a0 * co + upper * ac;
        self.0[c] = lower * a0 + ac * co;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegisterState {
    pub ions: Vec<IonState>,
}

impl RegisterState {
    pub fn ground(ion_count: usize) -> Self {
        Self {
            ions: vec![IonState::ground(); ion_count],
        }
    }

    pub fn len(&self) -> usize {
        self.ions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ions.is_empty()
    }

    pub fn max_norm_error(&self) -> f64 {
        self.ions
            .iter()
            .map(|s| (s.norm_sqr() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `e^{-i 2 pi nu t}` with the cycle count reduced before the sine so that
/// large `nu t` products keep their fractional precision.
fn cycle_phase(nu: f64, t: f64) -> Complex64 {
    let cycles = nu * t;
    let frac = cycles - cycles.floor();
    Complex64::from_polar(1.0, -TAU * frac)
}

/// Propagator of one rectangular pulse for one ion, cached at phase 0.
#[derive(Clone, Debug)]
pub struct PulsePropagator {
    unitary: Matrix4<Complex64>,
    /// `nu_carrier - nu_c` per level, Hz; zero for `|0>`.
    detunings: [f64; LEVELS],
    duration: f64,
}

impl PulsePropagator {
    /// `rabi` is ordered `(pi, sigma+, sigma-)` in Hz.
    pub fn new(ion: &IonTransitions, rabi: &[f64; 3], carrier: f64, duration: f64) -> Self {
        let mut detunings = [0.0; LEVELS];
        let mut h = Matrix4::<Complex64>::zeros();
        for ch in Channel::ALL {
            let c = ch.level();
            let det = carrier - ion.frequency(ch);
            detunings[c] = det;
            h[(c, c)] = Complex64::new(-TAU * det, 0.0);
            let drive = Complex64::new(PI * rabi[ch.slot()], 0.0);
            h[(c, 0)] = drive;
            h[(0, c)] = drive;
        }
        Self {
            unitary: unitary_propagator(&h, duration),
            detunings,
            duration,
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn detuning(&self, channel: Channel) -> f64 {
        self.detunings[channel.level()]
    }

    /// Carrier-frame propagator at pulse phase `phase`.
    pub fn carrier_frame(&self, phase: f64) -> Matrix4<Complex64> {
        let d = Vector4::from_fn(|k, _| {
            if k == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, phase)
            }
        });
        Matrix4::from_fn(|r, c| d[r] * self.unitary[(r, c)] * d[c].conj())
    }

    /// Evolves `state` through a pulse with carrier-frame phase `phase`
    /// that starts at time `start` (s), in the carrier frame whose origin
    /// coincides with the ion frame at `start`.
    pub fn apply_carrier_frame(&self, state: &mut IonState, phase: f64) {
        state.0 = self.carrier_frame(phase) * state.0;
    }

    /// Evolves an ion-frame state through a pulse starting at `start`.
    ///
    /// The ion frame and the carrier frame differ by `e^{-i 2 pi delta_c t}`
    /// on each excited level, so the propagator is
    /// `P(start + tau) U(phase) P(start)^dagger`.
    pub fn apply_in_ion_frame(&self, state: &mut IonState, phase: f64, start: f64) {
        let drive = Complex64::from_polar(1.0, phase);
        let mut right = [Complex64::new(1.0, 0.0); LEVELS];
        let mut left = [Complex64::new(1.0, 0.0); LEVELS];
        for k in 1..LEVELS {
            right[k] = cycle_phase(self.detunings[k], start).conj() * drive.conj();
            left[k] = cycle_phase(self.detunings[k], start + self.duration) * drive;
        }
        let v = Vector4::from_fn(|k, _| right[k] * state.0[k]);
        let w = self.unitary * v;
        state.0 = Vector4::from_fn(|k, _| left[k] * w[k]);
    }
}

/// Builds the per-ion propagators of one pulse.
pub fn pulse_propagators(
    transitions: &TransitionSet,
    rabi: &RabiMap,
    carrier: f64,
    duration: f64,
) -> Result<Vec<PulsePropagator>> {
    if transitions.len() != rabi.len() {
        return Err(Error::Configuration(format!(
            "{} transitions but {} Rabi entries",
            transitions.len(),
            rabi.len()
        )));
    }
    Ok(transitions
        .ions
        .iter()
        .zip(&rabi.ions)
        .map(|(t, r)| PulsePropagator::new(t, r, carrier, duration))
        .collect())
}

/// Evolves every ion of `state` by `exp(-i H tau)` in the carrier frame.
pub fn apply_pulse(
    state: &RegisterState,
    pulse: &Pulse,
    transitions: &TransitionSet,
    rabi: &RabiMap,
) -> Result<RegisterState> {
    if state.len() != transitions.len() {
        return Err(Error::Configuration(format!(
            "state has {} ions but transition set has {}",
            state.len(),
            transitions.len()
        )));
    }
    let props = pulse_propagators(transitions, rabi, pulse.carrier_frequency, pulse.duration)?;
    let ions = state
        .ions
        .iter()
        .zip(&props)
        .map(|(s, p)| {
            let mut out = *s;
            p.apply_carrier_frame(&mut out, pulse.phase);
            out
        })
        .collect();
    Ok(RegisterState { ions })
}
