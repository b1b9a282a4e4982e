//! Cross-checks of the decay law: closed form, random walk on the Bloch
//! sphere, and the full pulse dynamics averaged over random sequences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diffusion::{random_walk_oracle, WalkEstimate};
use super::fidelity::predict_fidelity;
use crate::benchmark::rng::derive_seed;
use crate::benchmark::{
    initial_state, random_phases, InputState, Protocol, Register, SequenceRunner, SequenceSpec,
};
use crate::chain::{TransitionSet, YB171_HYPERFINE_HZ};
use crate::error::{Error, Result};
use crate::pulse::{crosstalk_probability, PolarizationWeights, RabiMap};

/// Mean of a per-sequence quantity with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Difference to `other` in units of the combined standard error.
    pub fn pull(&self, other: &Estimate) -> f64 {
        let s = self.stderr.hypot(other.stderr);
        let d = (self.mean - other.mean).abs();
        if s == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / s
        }
    }

    fn from_samples(samples: &[f64]) -> Self {
        let m = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / m;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / m).sqrt(),
        }
    }
}

impl From<WalkEstimate> for Estimate {
    fn from(w: WalkEstimate) -> Self {
        Self {
            mean: w.fidelity,
            stderr: w.stderr,
        }
    }
}

/// Two-ion register in which a pulse of the returned duration on ion 0
/// excites ion 1 with probability exactly `c`.
///
/// The spectator sits where its generalized Rabi frequency is
/// `rabi / sqrt(c)`, and the duration is the half-integer number of its
/// revolutions closest to `tau_hint`.
pub fn oracle_register(c: f64, rabi: f64, tau_hint: f64) -> Result<(Register, f64)> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::invalid("cross-talk must lie in (0, 1)"));
    }
    if !(rabi > 0.0 && tau_hint > 0.0) {
        return Err(Error::invalid(
            "Rabi frequency and duration must be positive",
        ));
    }
    let omega_r = rabi / c.sqrt();
    let detuning = rabi * (1.0 / c - 1.0).sqrt();
    let m = (tau_hint * omega_r - 0.5).round().max(0.0);
    let tau = (m + 0.5) / omega_r;
    let base = YB171_HYPERFINE_HZ + 20e6;
    let t = TransitionSet::from_sigma_plus(YB171_HYPERFINE_HZ, &[base, base + detuning]);
    let w = PolarizationWeights {
        pi: 0.0,
        sigma_plus: 1.0,
        sigma_minus: 0.0,
    };
    let reg = Register::new(t, RabiMap::uniform(2, rabi, w)?)?;
    debug_assert!((crosstalk_probability(rabi, detuning, tau) - c).abs() < 1e-9);
    Ok((reg, tau))
}

/// Fidelity of every ion after `n` random pulses on `addressed`, averaged
/// over `sequences` random phase sequences. Uses the exact populations of
/// each final state, so the only noise is from sequence sampling.
pub fn sequence_average_fidelity(
    register: &Register,
    addressed: usize,
    n: usize,
    tau: f64,
    input_state: InputState,
    sequences: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if sequences == 0 {
        return Err(Error::invalid("at least one sequence is required"));
    }
    let spec_for = |s: usize| {
        SequenceSpec::addressing(
            &register.transitions,
            addressed,
            n,
            tau,
            derive_seed(seed, &[addressed as u64, n as u64, s as u64]),
            input_state,
        )
    };
    let runner = SequenceRunner::new(register, &spec_for(0)?)?;
    let per_seq = (0..sequences)
        .into_par_iter()
        .map(|s| {
            let spec = spec_for(s)?;
            let protocol = Protocol::for_spec(&spec, register.probe)?;
            let state = runner.run(
                &protocol,
                &random_phases(&spec),
                &initial_state(register.len()),
            )?;
            Ok(state
                .ions
                .iter()
                .map(|ion| match input_state {
                    InputState::Eigenstate => 1.0 - ion.bright_probability(),
                    InputState::Superposition => ion.bright_probability(),
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..register.len())
        .map(|ion| {
            let xs: Vec<f64> = per_seq.iter().map(|v| v[ion]).collect();
            Estimate::from_samples(&xs)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub c: f64,
    pub n: usize,
    pub analytic: f64,
    pub walk: Estimate,
    pub unitary: Estimate,
}

impl OracleComparison {
    /// Largest pairwise disagreement in standard errors.
    pub fn max_pull(&self) -> f64 {
        let exact = Estimate {
            mean: self.analytic,
            stderr: 0.0,
        };
        self.walk
            .pull(&exact)
            .max(self.unitary.pull(&exact))
            .max(self.walk.pull(&self.unitary))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    /// Hz.
    pub rabi: f64,
    /// Seconds; the actual duration is adjusted so the per-pulse
    /// cross-talk is exact.
    pub tau_hint: f64,
    pub walkers: usize,
    pub sequences: usize,
    pub seed: u64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            rabi: 20e3,
            tau_hint: 25e-6,
            walkers: 10_000,
            sequences: 2000,
            seed: 2015,
        }
    }
}

/// Compares the three estimates of the spectator fidelity for each
/// sequence length.
pub fn three_way(
    c: f64,
    n_values: &[usize],
    settings: &OracleSettings,
) -> Result<Vec<OracleComparison>> {
    let (register, tau) = oracle_register(c, settings.rabi, settings.tau_hint)?;
    n_values
        .iter()
        .map(|&n| {
            let walk = random_walk_oracle(
                c,
                n,
                settings.walkers,
                derive_seed(settings.seed, &[n as u64]),
            )?;
            let unitary = sequence_average_fidelity(
                &register,
                0,
                n,
                tau,
                InputState::Eigenstate,
                settings.sequences,
                settings.seed,
            )?[1];
            Ok(OracleComparison {
                c,
                n,
                analytic: predict_fidelity(c, n as f64),
                walk: walk.into(),
                unitary,
            })
        })
        .collect()
}
