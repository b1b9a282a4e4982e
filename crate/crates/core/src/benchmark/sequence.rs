use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::{stream, Purpose};
use crate::chain::TransitionSet;
use crate::error::{Error, Result};
use crate::pulse::{
    pulse_propagators, Channel, CouplingConfig, IonState, PulsePropagator, RabiMap, RegisterState,
};

/// The four pulse phases of the randomized protocol.
pub const PHASE_SET: [f64; 4] = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputState {
    /// Every ion starts in `|0>`.
    Eigenstate,
    /// Every ion is put on the equator of its probe transition by an ideal
    /// pi/2 pulse and read out through a Ramsey sequence with spin echo.
    Superposition,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub addressed_ion: usize,
    pub pulse_count: usize,
    /// Seconds; gaps between pulses have the same length.
    pub pulse_duration: f64,
    /// Hz.
    pub carrier: f64,
    pub seed: u64,
    pub input_state: InputState,
}

impl SequenceSpec {
    /// Sequence whose carrier sits on the qubit line of `addressed_ion`.
    pub fn addressing(
        transitions: &TransitionSet,
        addressed_ion: usize,
        pulse_count: usize,
        pulse_duration: f64,
        seed: u64,
        input_state: InputState,
    ) -> Result<Self> {
        let ion = transitions
            .ions
            .get(addressed_ion)
            .ok_or_else(|| Error::invalid(format!("addressed ion {addressed_ion} out of range")))?;
        let spec = Self {
            addressed_ion,
            pulse_count,
            pulse_duration,
            carrier: ion.sigma_plus,
            seed,
            input_state,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pulse_duration > 0.0 && self.pulse_duration.is_finite()) {
            return Err(Error::invalid("pulse duration must be positive"));
        }
        Ok(())
    }
}

/// Phases of the `pulse_count` pulses, uniform over [`PHASE_SET`] and fixed
/// by `spec.seed`.
pub fn random_phases(spec: &SequenceSpec) -> Vec<f64> {
    let mut rng = stream(spec.seed, Purpose::Phases, &[]);
    (0..spec.pulse_count)
        .map(|_| PHASE_SET[rng.random_range(0..4)])
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    /// Ideal instantaneous rotation applied to every ion.
    Rotation {
        channel: Channel,
        theta: f64,
        phase: f64,
    },
    /// Pulses `first..first + count` of the random sequence.
    Pulses { first: usize, count: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    pub steps: Vec<Step>,
    pub pulse_count: usize,
}

impl Protocol {
    /// The bare random sequence, for eigenstate input.
    pub fn plain(pulse_count: usize) -> Self {
        Self {
            steps: vec![Step::Pulses {
                first: 0,
                count: pulse_count,
            }],
            pulse_count,
        }
    }

    /// Plain sequence or Ramsey wrap, depending on `spec.input_state`.
    pub fn for_spec(spec: &SequenceSpec, probe: Channel) -> Result<Self> {
        match spec.input_state {
            InputState::Eigenstate => Ok(Self::plain(spec.pulse_count)),
            InputState::Superposition => ramsey_wrap(spec, probe),
        }
    }
}

/// Ramsey wrapper with spin echo on the `probe` transition:
/// pi/2 (x), first ceil(N/2) pulses, pi (y), remaining floor(N/2) pulses,
/// pi/2 (x). An unperturbed ion ends fully bright.
pub fn ramsey_wrap(spec: &SequenceSpec, probe: Channel) -> Result<Protocol> {
    if spec.input_state != InputState::Superposition {
        return Err(Error::invalid("Ramsey wrapper needs superposition input"));
    }
    let n = spec.pulse_count;
    let before = n.div_ceil(2);
    let half_pi = Step::Rotation {
        channel: probe,
        theta: FRAC_PI_2,
        phase: 0.0,
    };
    Ok(Protocol {
        steps: vec![
            half_pi,
            Step::Pulses {
                first: 0,
                count: before,
            },
            Step::Rotation {
                channel: probe,
                theta: PI,
                phase: FRAC_PI_2,
            },
            Step::Pulses {
                first: before,
                count: n - before,
            },
            half_pi,
        ],
        pulse_count: n,
    })
}

/// Drive and coupling configuration of a register, independent of which
/// ion is addressed.
#[derive(Clone, Debug, PartialEq)]
pub struct Register {
    pub transitions: TransitionSet,
    /// Reference Rabi map.
    pub rabi: RabiMap,
    /// When set, the drive is rescaled for each addressed ion so that its
    /// qubit Rabi frequency equals this value (Hz).
    pub addressed_rabi: Option<f64>,
    pub coupling: CouplingConfig,
    /// Transition used by the Ramsey pulses of the superposition protocol.
    pub probe: Channel,
}

impl Register {
    pub fn new(transitions: TransitionSet, rabi: RabiMap) -> Result<Self> {
        let n = transitions.len();
        let reg = Self {
            transitions,
            rabi,
            addressed_rabi: None,
            coupling: CouplingConfig::disabled(n),
            probe: Channel::Pi,
        };
        reg.validate()?;
        Ok(reg)
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.transitions.is_empty() {
            return Err(Error::Configuration("register has no ions".into()));
        }
        if self.transitions.len() != self.rabi.len() {
            return Err(Error::Configuration(format!(
                "{} transitions but {} Rabi entries",
                self.transitions.len(),
                self.rabi.len()
            )));
        }
        self.coupling.validate(self.len())
    }

    /// Rabi map in effect while `ion` is addressed.
    pub fn drive_for(&self, ion: usize) -> Result<RabiMap> {
        match self.addressed_rabi {
            Some(target) => self.rabi.normalized_to(ion, Channel::SigmaPlus, target),
            None => Ok(self.rabi.clone()),
        }
    }

    /// Duration of a resonant pi pulse on `ion`'s qubit line.
    pub fn pi_time(&self, ion: usize) -> Result<f64> {
        let r = self.drive_for(ion)?.get(ion, Channel::SigmaPlus);
        if r <= 0.0 {
            return Err(Error::Configuration(format!("ion {ion} is not driven")));
        }
        Ok(0.5 / r)
    }
}

/// Precomputed per-ion propagators for one (carrier, duration) setting.
#[derive(Clone, Debug)]
pub struct SequenceRunner {
    props: Vec<PulsePropagator>,
    /// Static coupling per ion, Hz.
    couplings: Vec<f64>,
    duration: f64,
}

impl SequenceRunner {
    pub fn new(register: &Register, spec: &SequenceSpec) -> Result<Self> {
        spec.validate()?;
        register.validate()?;
        if spec.addressed_ion >= register.len() {
            return Err(Error::invalid(format!(
                "addressed ion {} out of range",
                spec.addressed_ion
            )));
        }
        let rabi = register.drive_for(spec.addressed_ion)?;
        warn_if_unaddressed(&register.transitions, &rabi, spec.carrier);
        let props = pulse_propagators(
            &register.transitions,
            &rabi,
            spec.carrier,
            spec.pulse_duration,
        )?;
        let couplings = (0..register.len())
            .map(|k| register.coupling.effective_coupling(k))
            .collect();
        Ok(Self {
            props,
            couplings,
            duration: spec.pulse_duration,
        })
    }

    pub fn ion_count(&self) -> usize {
        self.props.len()
    }

    /// Start time of pulse `index` at 50% duty cycle.
    pub fn start_time(&self, index: usize) -> f64 {
        2.0 * index as f64 * self.duration
    }

    /// Runs `protocol` with the given pulse phases from `initial`.
    pub fn run(
        &self,
        protocol: &Protocol,
        phases: &[f64],
        initial: &RegisterState,
    ) -> Result<RegisterState> {
        if phases.len() != protocol.pulse_count {
            return Err(Error::invalid(format!(
                "{} phases for {} pulses",
                phases.len(),
                protocol.pulse_count
            )));
        }
        if initial.len() != self.ion_count() {
            return Err(Error::Configuration(format!(
                "state has {} ions, register {}",
                initial.len(),
                self.ion_count()
            )));
        }
        let mut state = initial.clone();
        for step in &protocol.steps {
            match *step {
                Step::Rotation {
                    channel,
                    theta,
                    phase,
                } => {
                    for ion in state.ions.iter_mut() {
                        ion.rotate(channel, theta, phase);
                    }
                }
                Step::Pulses { first, count } => {
                    for (k, (ion, prop)) in state.ions.iter_mut().zip(&self.props).enumerate() {
                        self.evolve_ion(
                            ion,
                            prop,
                            self.couplings[k],
                            &phases[first..first + count],
                            first,
                        );
                    }
                }
            }
        }
        Ok(state)
    }

    fn evolve_ion(
        &self,
        ion: &mut IonState,
        prop: &PulsePropagator,
        j: f64,
        phases: &[f64],
        first: usize,
    ) {
        let j_phase = crate::pulse::j_coupling_phase(j, 2.0 * self.duration);
        for (offset, &phi) in phases.iter().enumerate() {
            prop.apply_in_ion_frame(ion, phi, self.start_time(first + offset));
            if j_phase != 0.0 {
                ion.rotate_upper(j_phase);
            }
        }
    }
}

fn warn_if_unaddressed(transitions: &TransitionSet, rabi: &RabiMap, carrier: f64) {
    let max_rabi = rabi
        .ions
        .iter()
        .flat_map(|r| r.iter().copied())
        .fold(0.0, f64::max);
    let nearest = transitions
        .ions
        .iter()
        .flat_map(|t| Channel::ALL.map(|c| (t.frequency(c) - carrier).abs()))
        .fold(f64::INFINITY, f64::min);
    if nearest > max_rabi * 1e3 {
        log::warn!(
            "carrier {carrier:.6e} Hz is {nearest:.3e} Hz from every transition; spectator-only sequence"
        );
    }
}

/// Initial register state for the protocol.
pub fn initial_state(ion_count: usize) -> RegisterState {
    RegisterState::ground(ion_count)
}

/// Composed register state after the random sequence of `spec`, including
/// the Ramsey wrapper when the input is a superposition.
pub fn run_sequence(register: &Register, spec: &SequenceSpec) -> Result<RegisterState> {
    let runner = SequenceRunner::new(register, spec)?;
    let protocol = Protocol::for_spec(spec, register.probe)?;
    let phases = random_phases(spec);
    runner.run(&protocol, &phases, &initial_state(register.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::PolarizationWeights;
    use approx::assert_relative_eq;

    const HF: f64 = 12.642_812e9;

    fn register(offsets: &[f64], rabi: f64) -> Register {
        let sp: Vec<f64> = offsets.iter().map(|o| HF + o).collect();
        let t = TransitionSet::from_sigma_plus(HF, &sp);
        let r = RabiMap::uniform(sp.len(), rabi, PolarizationWeights::default()).unwrap();
        Register::new(t, r).unwrap()
    }

    fn spec(reg: &Register, n: usize, input: InputState) -> SequenceSpec {
        SequenceSpec::addressing(&reg.transitions, 0, n, 25e-6, 11, input).unwrap()
    }

    #[test]
    fn phases_deterministic_and_empty() {
        let reg = register(&[12e6], 20e3);
        let s = spec(&reg, 0, InputState::Eigenstate);
        assert!(random_phases(&s).is_empty());
        let s = spec(&reg, 50, InputState::Eigenstate);
        assert_eq!(random_phases(&s), random_phases(&s));
        let other = SequenceSpec { seed: 12, ..s };
        assert_ne!(random_phases(&s), random_phases(&other));
    }

    #[test]
    fn phase_frequencies_are_uniform() {
        let reg = register(&[12e6], 20e3);
        let s = spec(&reg, 1_000_000, InputState::Eigenstate);
        let mut counts = [0usize; 4];
        for p in random_phases(&s) {
            let k = PHASE_SET.iter().position(|&q| q == p).unwrap();
            counts[k] += 1;
        }
        let n = 1e6;
        let sigma = (n * 0.25 * 0.75f64).sqrt();
        for c in counts {
            assert!((c as f64 - 0.25 * n).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn empty_sequence_leaves_state() {
        let reg = register(&[12e6, 14e6], 20e3);
        let out = run_sequence(&reg, &spec(&reg, 0, InputState::Eigenstate)).unwrap();
        assert_eq!(out, RegisterState::ground(2));
    }

    #[test]
    fn pi_then_inverse_returns_home() {
        let reg = register(&[12e6], 20e3);
        let s = spec(&reg, 2, InputState::Eigenstate);
        let runner = SequenceRunner::new(&reg, &s).unwrap();
        let out = runner
            .run(&Protocol::plain(2), &[0.0, PI], &initial_state(1))
            .unwrap();
        assert!(out.ions[0].population(0) > 1.0 - 1e-4);
    }

    #[test]
    fn ramsey_closure_without_pulses() {
        let reg = register(&[12e6], 20e3);
        let out = run_sequence(&reg, &spec(&reg, 0, InputState::Superposition)).unwrap();
        assert_relative_eq!(out.ions[0].bright_probability(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ramsey_split_puts_extra_pulse_first() {
        let reg = register(&[12e6], 20e3);
        let p = ramsey_wrap(&spec(&reg, 7, InputState::Superposition), Channel::Pi).unwrap();
        assert_eq!(p.steps[1], Step::Pulses { first: 0, count: 4 });
        assert_eq!(p.steps[3], Step::Pulses { first: 4, count: 3 });
        assert!(ramsey_wrap(&spec(&reg, 7, InputState::Eigenstate), Channel::Pi).is_err());
    }

    #[test]
    fn echo_cancels_static_phase() {
        // Spectator with no drive but a static coupling: pure z phase.
        let mut reg = register(&[5e6, 7e6], 20e3);
        reg.rabi.ions[1] = [0.0; 3];
        let mut fidelities = Vec::new();
        for j in [0.0, 33.0, 250.0, 4000.0] {
            reg.coupling = CouplingConfig::nearest_neighbor(2, j);
            let out = run_sequence(&reg, &spec(&reg, 40, InputState::Superposition)).unwrap();
            fidelities.push(out.ions[1].bright_probability());
        }
        for f in &fidelities {
            assert!((f - fidelities[0]).abs() < 1e-10, "{fidelities:?}");
        }
        assert_relative_eq!(fidelities[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_phases_rejected() {
        let reg = register(&[12e6], 20e3);
        let s = spec(&reg, 3, InputState::Eigenstate);
        let runner = SequenceRunner::new(&reg, &s).unwrap();
        assert!(runner
            .run(&Protocol::plain(3), &[0.0], &initial_state(1))
            .is_err());
    }
}
