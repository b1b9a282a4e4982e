use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::RegisterState;

/// Probabilities of reading out the correct bit, per ion.
///
/// Preparation and detection errors are lumped into one classical flip
/// channel. `dark` is the probability that an ion left in `|0>` reads
/// dark, `bright` that an ion in an F=1 level reads bright.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutFidelity {
    pub dark: f64,
    pub bright: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub ions: Vec<ReadoutFidelity>,
}

impl ReadoutModel {
    pub fn symmetric(ion_count: usize, p_prep: f64) -> Result<Self> {
        let m = Self {
            ions: vec![
                ReadoutFidelity {
                    dark: p_prep,
                    bright: p_prep,
                };
                ion_count
            ],
        };
        m.validate()?;
        Ok(m)
    }

    pub fn perfect(ion_count: usize) -> Self {
        Self::symmetric(ion_count, 1.0).expect("1.0 is a valid readout fidelity")
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| p > 0.5 && p <= 1.0;
        if self.ions.iter().all(|r| ok(r.dark) && ok(r.bright)) {
            Ok(())
        } else {
            Err(Error::invalid("readout fidelities must lie in (0.5, 1]"))
        }
    }

    /// Probability of a bright click given the true bright probability.
    pub fn observed_bright(&self, ion: usize, p_bright: f64) -> f64 {
        let r = self.ions[ion];
        p_bright * r.bright + (1.0 - p_bright) * (1.0 - r.dark)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    /// One outcome per ion; `true` is bright.
    pub bright: Vec<bool>,
    pub seed: u64,
    pub pulse_count: usize,
}

/// Projective fluorescence readout of every ion followed by the classical
/// readout channel. Consumes two uniform draws per ion.
pub fn measure<R: Rng + ?Sized>(
    state: &RegisterState,
    readout: &ReadoutModel,
    rng: &mut R,
) -> Result<Vec<bool>> {
    if readout.ions.len() != state.len() {
        return Err(Error::Configuration(format!(
            "readout model has {} ions, state {}",
            readout.ions.len(),
            state.len()
        )));
    }
    Ok(state
        .ions
        .iter()
        .zip(&readout.ions)
        .map(|(ion, r)| {
            let projected_bright = rng.random::<f64>() < ion.bright_probability();
            let u: f64 = rng.random();
            if projected_bright {
                u < r.bright
            } else {
                u >= r.dark
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::IonState;
    use rand::SeedableRng;

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn perfect_readout_is_deterministic() {
        let state = RegisterState {
            ions: vec![IonState::ground(), IonState::basis(2)],
        };
        let m = ReadoutModel::perfect(2);
        let mut r = rng();
        for _ in 0..1000 {
            assert_eq!(measure(&state, &m, &mut r).unwrap(), vec![false, true]);
        }
    }

    #[test]
    fn ground_state_bright_rate_matches_readout_error() {
        let state = RegisterState::ground(1);
        let m = ReadoutModel::symmetric(1, 0.975).unwrap();
        let mut r = rng();
        let trials = 100_000;
        let bright = (0..trials)
            .filter(|_| measure(&state, &m, &mut r).unwrap()[0])
            .count();
        let p = 0.025;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let freq = bright as f64 / trials as f64;
        assert!((freq - p).abs() < 3.0 * sigma, "{freq}");
    }

    #[test]
    fn invalid_fidelity_rejected() {
        assert!(ReadoutModel::symmetric(2, 0.5).is_err());
        assert!(ReadoutModel::symmetric(2, 1.01).is_err());
    }
}
