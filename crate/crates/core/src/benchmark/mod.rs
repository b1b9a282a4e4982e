//! Randomized-phase benchmarking of spectator qubits.
//!
//! A trial prepares the register, applies `N` pulses resonant with the
//! addressed ion (phases uniform over `{0, pi/2, pi, 3pi/2}`, 50% duty
//! cycle), optionally wraps them in a Ramsey sequence with spin echo, and
//! reads every ion out once. Trials are independent and are run in
//! parallel; each draws from its own seeded stream.

mod measure;
pub mod rng;
mod sequence;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::TransitionSet;
use crate::error::{Error, Result};
use crate::pulse::{pulse_propagators, IonState, RabiMap};

pub use measure::{measure, ReadoutFidelity, ReadoutModel, TrialResult};
pub use sequence::{
    initial_state, ramsey_wrap, random_phases, run_sequence, InputState, Protocol, Register,
    SequenceRunner, SequenceSpec, Step, PHASE_SET,
};

use rng::{derive_seed, stream, Purpose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlan {
    pub addressed_ion: usize,
    pub n_values: Vec<usize>,
    pub trials: usize,
    /// Seconds.
    pub pulse_duration: f64,
    pub seed: u64,
    pub input_state: InputState,
    pub readout: ReadoutModel,
    /// Carrier minus the addressed ion's qubit frequency, Hz. Non-zero
    /// turns the addressed ion into a spectator of a detuned drive.
    #[serde(default)]
    pub carrier_offset: f64,
}

impl BenchmarkPlan {
    pub fn validate(&self, ion_count: usize) -> Result<()> {
        if self.addressed_ion >= ion_count {
            return Err(Error::invalid(format!(
                "addressed ion {} out of range for {ion_count} ions",
                self.addressed_ion
            )));
        }
        if self.trials == 0 {
            return Err(Error::invalid("at least one trial per point is required"));
        }
        if self.n_values.is_empty() {
            return Err(Error::invalid("no sequence lengths given"));
        }
        if self.readout.ions.len() != ion_count {
            return Err(Error::Configuration("readout model size mismatch".into()));
        }
        self.readout.validate()
    }

    /// Seed of the random sequence of one trial.
    pub fn sequence_seed(&self, pulse_count: usize, trial: usize) -> u64 {
        derive_seed(
            self.seed,
            &[self.addressed_ion as u64, pulse_count as u64, trial as u64],
        )
    }

    fn spec(&self, register: &Register, pulse_count: usize, trial: usize) -> Result<SequenceSpec> {
        let mut spec = SequenceSpec::addressing(
            &register.transitions,
            self.addressed_ion,
            pulse_count,
            self.pulse_duration,
            self.sequence_seed(pulse_count, trial),
            self.input_state,
        )?;
        spec.carrier += self.carrier_offset;
        Ok(spec)
    }
}

/// Bright counts of one ion at one sequence length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub pulse_count: usize,
    pub ion: usize,
    pub trials: usize,
    pub bright: usize,
}

/// Prepared benchmark: propagators are computed once and shared by every
/// trial.
pub struct Benchmark<'a> {
    register: &'a Register,
    plan: &'a BenchmarkPlan,
    runner: SequenceRunner,
}

impl<'a> Benchmark<'a> {
    pub fn new(register: &'a Register, plan: &'a BenchmarkPlan) -> Result<Self> {
        plan.validate(register.len())?;
        let spec = plan.spec(register, 0, 0)?;
        let runner = SequenceRunner::new(register, &spec)?;
        Ok(Self {
            register,
            plan,
            runner,
        })
    }

    pub fn trial(&self, pulse_count: usize, trial: usize) -> Result<TrialResult> {
        let spec = self.plan.spec(self.register, pulse_count, trial)?;
        let protocol = Protocol::for_spec(&spec, self.register.probe)?;
        let phases = random_phases(&spec);
        let state = self
            .runner
            .run(&protocol, &phases, &initial_state(self.register.len()))?;
        let mut rng = stream(
            self.plan.seed,
            Purpose::Readout,
            &[
                self.plan.addressed_ion as u64,
                pulse_count as u64,
                trial as u64,
            ],
        );
        let bright = measure(&state, &self.plan.readout, &mut rng)?;
        Ok(TrialResult {
            bright,
            seed: spec.seed,
            pulse_count,
        })
    }

    /// Aggregated counts for one sequence length.
    pub fn counts_at(&self, pulse_count: usize) -> Result<Vec<CountRow>> {
        let n_ions = self.register.len();
        let totals = (0..self.plan.trials)
            .into_par_iter()
            .map(|t| {
                self.trial(pulse_count, t)
                    .map(|r| r.bright.iter().map(|&b| b as usize).collect::<Vec<_>>())
            })
            .try_reduce(
                || vec![0usize; n_ions],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    Ok(a)
                },
            )?;
        Ok(totals
            .into_iter()
            .enumerate()
            .map(|(ion, bright)| CountRow {
                pulse_count,
                ion,
                trials: self.plan.trials,
                bright,
            })
            .collect())
    }

    pub fn counts(&self) -> Result<Vec<CountRow>> {
        let mut rows = Vec::new();
        for &n in &self.plan.n_values {
            rows.extend(self.counts_at(n)?);
        }
        Ok(rows)
    }
}

/// Runs the whole plan and returns counts ordered by `(N, ion)`.
pub fn run_benchmark(register: &Register, plan: &BenchmarkPlan) -> Result<Vec<CountRow>> {
    Benchmark::new(register, plan)?.counts()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Hz for a spectrum, seconds for a Rabi scan.
    pub x: f64,
    /// Bright probability per ion, before readout errors.
    pub bright: Vec<f64>,
}

/// Double-resonance spectrum: one pulse of fixed length from `|0...0>` at
/// each grid frequency.
pub fn spectrum_scan(
    transitions: &TransitionSet,
    rabi: &RabiMap,
    pulse_duration: f64,
    frequency_grid: &[f64],
) -> Result<Vec<ScanPoint>> {
    if frequency_grid.is_empty() {
        return Err(Error::invalid("frequency grid is empty"));
    }
    if !(pulse_duration > 0.0) {
        return Err(Error::invalid("pulse duration must be positive"));
    }
    frequency_grid
        .par_iter()
        .map(|&f| {
            let props = pulse_propagators(transitions, rabi, f, pulse_duration)?;
            let bright = props
                .iter()
                .map(|p| {
                    let mut s = IonState::ground();
                    p.apply_carrier_frame(&mut s, 0.0);
                    s.bright_probability()
                })
                .collect();
            Ok(ScanPoint { x: f, bright })
        })
        .collect()
}

/// Excitation of every ion versus pulse length with the carrier on
/// `carrier` (Hz).
pub fn rabi_scan(
    transitions: &TransitionSet,
    rabi: &RabiMap,
    carrier: f64,
    durations: &[f64],
) -> Result<Vec<ScanPoint>> {
    if durations.is_empty() {
        return Err(Error::invalid("duration grid is empty"));
    }
    durations
        .par_iter()
        .map(|&tau| {
            let bright = if tau == 0.0 {
                vec![0.0; transitions.len()]
            } else {
                pulse_propagators(transitions, rabi, carrier, tau)?
                    .iter()
                    .map(|p| {
                        let mut s = IonState::ground();
                        p.apply_carrier_frame(&mut s, 0.0);
                        s.bright_probability()
                    })
                    .collect()
            };
            Ok(ScanPoint { x: tau, bright })
        })
        .collect()
}

/// Indices of strict local maxima of `trace` above `threshold`.
pub fn local_maxima(trace: &[f64], threshold: f64) -> Vec<usize> {
    (1..trace.len().saturating_sub(1))
        .filter(|&k| trace[k] > threshold && trace[k] > trace[k - 1] && trace[k] >= trace[k + 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{
        equilibrium_positions, transition_map, FieldConfig, PhysicalConstants, TrapConfig,
    };
    use crate::pulse::PolarizationWeights;

    const HF: f64 = 12.642_812e9;

    fn byte() -> (TransitionSet, f64) {
        let c = PhysicalConstants::default();
        let chain = equilibrium_positions(&TrapConfig::ytterbium(8, 124e3), &c).unwrap();
        let field = FieldConfig {
            gradient: 18.8,
            bias: 0.39e-3,
            zero_position: chain.positions[0],
        };
        (transition_map(&chain, &field, &c), c.hyperfine_splitting)
    }

    #[test]
    fn single_ion_peak_height() {
        let t = TransitionSet::from_sigma_plus(HF, &[HF + 5.5e6]);
        let r = RabiMap::uniform(1, 54.1e3, PolarizationWeights::default()).unwrap();
        let scan = spectrum_scan(&t, &r, 10e-6, &[HF + 5.5e6]).unwrap();
        let want = (std::f64::consts::PI * 54.1e3 * 10e-6).sin().powi(2);
        assert!((scan[0].bright[0] - want).abs() < 1e-3);
        assert!((want - 0.98).abs() < 0.01);
    }

    #[test]
    fn far_detuned_scan_is_dark() {
        let (t, _) = byte();
        let r = RabiMap::uniform(8, 20e3, PolarizationWeights::default()).unwrap();
        let f = t.ions[0].sigma_plus - 2.5e6;
        let scan = spectrum_scan(&t, &r, 10e-6, &[f]).unwrap();
        assert!(scan[0].bright.iter().all(|&b| b < 1e-3));
    }

    #[test]
    fn empty_grid_rejected() {
        let (t, _) = byte();
        let r = RabiMap::uniform(8, 20e3, PolarizationWeights::default()).unwrap();
        assert!(spectrum_scan(&t, &r, 10e-6, &[]).is_err());
    }

    #[test]
    fn byte_spectrum_resolves_eight_peaks() {
        let (t, _) = byte();
        let r = RabiMap::uniform(8, 50e3, PolarizationWeights::default()).unwrap();
        let lo = t.ions[0].sigma_plus - 1e6;
        let hi = t.ions[7].sigma_plus + 1e6;
        let step = 5e3;
        let grid: Vec<f64> = (0..=((hi - lo) / step) as usize)
            .map(|k| lo + k as f64 * step)
            .collect();
        let scan = spectrum_scan(&t, &r, 10e-6, &grid).unwrap();
        let total: Vec<f64> = scan.iter().map(|p| p.bright.iter().sum()).collect();
        let peaks = local_maxima(&total, 0.5);
        assert_eq!(peaks.len(), 8, "{peaks:?}");
        for (k, &idx) in peaks.iter().enumerate() {
            assert!((grid[idx] - t.ions[k].sigma_plus).abs() <= step);
        }
    }

    #[test]
    fn parallel_counts_are_reproducible() {
        let (t, _) = byte();
        let rabi = RabiMap::uniform(8, 20e3, PolarizationWeights::default()).unwrap();
        let reg = Register::new(t, rabi).unwrap();
        let plan = BenchmarkPlan {
            addressed_ion: 4,
            n_values: vec![0, 20],
            trials: 64,
            pulse_duration: 25e-6,
            seed: 99,
            input_state: InputState::Eigenstate,
            readout: ReadoutModel::symmetric(8, 0.975).unwrap(),
            carrier_offset: 0.0,
        };
        let a = run_benchmark(&reg, &plan).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| run_benchmark(&reg, &plan).unwrap());
        assert_eq!(a, b);
        // Sequential, reversed order of trials.
        let bench = Benchmark::new(&reg, &plan).unwrap();
        let mut counts = vec![0usize; 8];
        for trial in (0..plan.trials).rev() {
            for (c, bit) in counts
                .iter_mut()
                .zip(bench.trial(20, trial).unwrap().bright)
            {
                *c += bit as usize;
            }
        }
        let from_rows: Vec<usize> = a
            .iter()
            .filter(|r| r.pulse_count == 20)
            .map(|r| r.bright)
            .collect();
        assert_eq!(counts, from_rows);
    }

    #[test]
    fn addressed_ion_out_of_range() {
        let (t, _) = byte();
        let rabi = RabiMap::uniform(8, 20e3, PolarizationWeights::default()).unwrap();
        let reg = Register::new(t, rabi).unwrap();
        let plan = BenchmarkPlan {
            addressed_ion: 8,
            n_values: vec![0],
            trials: 1,
            pulse_duration: 25e-6,
            seed: 0,
            input_state: InputState::Eigenstate,
            carrier_offset: 0.0,
            readout: ReadoutModel::perfect(8),
        };
        assert!(run_benchmark(&reg, &plan).is_err());
    }
}
