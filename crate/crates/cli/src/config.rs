//! Run configuration, read from TOML. Key names carry their units; ion
//! numbers in the file and in every output start at 1.

use serde::{Deserialize, Serialize};

use qbyte::benchmark::{BenchmarkPlan, InputState, ReadoutModel, Register};
use qbyte::chain::{
    equilibrium_positions, transition_map, FieldConfig, IonChain, PhysicalConstants, TransitionSet,
    TrapConfig,
};
use qbyte::pulse::{Channel, CouplingConfig, PolarizationWeights, RabiMap, SidebandConfig};

use crate::error::CliError;

fn default_species() -> String {
    "171Yb+".into()
}
fn one() -> f64 {
    1.0
}
fn default_n_values() -> Vec<usize> {
    (0..=5).map(|k| k * 250).collect()
}
fn default_trials() -> usize {
    1600
}
fn default_seed() -> u64 {
    1
}
fn default_addressed() -> Vec<usize> {
    vec![1]
}
fn default_sweep_pulses() -> usize {
    2000
}
fn default_phonons() -> f64 {
    150.0
}
fn default_spectrum_points() -> usize {
    2001
}
fn default_rabi_max() -> f64 {
    100e-6
}
fn default_rabi_points() -> usize {
    401
}
fn default_multiplier() -> i64 {
    1
}
fn default_rabi_target() -> f64 {
    57.9e3
}
fn default_rabi_min() -> f64 {
    1e3
}
fn default_rabi_max_hz() -> f64 {
    500e3
}
fn default_grid_points() -> usize {
    801
}
fn default_grid_span() -> f64 {
    0.03
}
fn default_oracle_c() -> Vec<f64> {
    vec![1e-5, 1e-4, 1e-3]
}
fn default_oracle_n() -> Vec<usize> {
    vec![250, 500, 1250]
}
fn default_walkers() -> usize {
    10_000
}
fn default_sequences() -> usize {
    2000
}
fn default_oracle_rabi() -> f64 {
    20e3
}
fn default_oracle_tau() -> f64 {
    25e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub trap: TrapSection,
    pub field: FieldSection,
    pub pulses: PulseSection,
    #[serde(default)]
    pub benchmark: BenchmarkSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub scaling: ScalingSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub ion_count: usize,
    pub secular_frequency_hz: f64,
    #[serde(default = "default_species")]
    pub ion_species: String,
}

/// The bias is given by exactly one of `bias_t`, `first_ion_offset_hz` or
/// `bias_multiplier`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub gradient_t_per_m: f64,
    /// Field at `zero_position_m`.
    pub bias_t: Option<f64>,
    #[serde(default)]
    pub zero_position_m: f64,
    /// Qubit frequency of ion 1 minus the `|0> <-> |0'>` frequency.
    pub first_ion_offset_hz: Option<f64>,
    /// Puts ion 1 this many mean next-neighbour splittings from the
    /// `|0> <-> |0'>` line.
    pub bias_multiplier: Option<i64>,
    /// Measured qubit frequencies; replace the computed map when given.
    pub sigma_plus_hz: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    /// Qubit-line Rabi frequency of every ion.
    pub rabi_hz: Option<f64>,
    pub rabi_hz_per_ion: Option<Vec<f64>>,
    /// Rescales the drive so the addressed ion sees this Rabi frequency.
    pub addressed_rabi_hz: Option<f64>,
    #[serde(default = "one")]
    pub weight_pi: f64,
    #[serde(default = "one")]
    pub weight_sigma_plus: f64,
    #[serde(default = "one")]
    pub weight_sigma_minus: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub probe: ProbeChannel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeChannel {
    #[default]
    Pi,
    SigmaPlus,
    SigmaMinus,
}

impl From<ProbeChannel> for Channel {
    fn from(p: ProbeChannel) -> Self {
        match p {
            ProbeChannel::Pi => Channel::Pi,
            ProbeChannel::SigmaPlus => Channel::SigmaPlus,
            ProbeChannel::SigmaMinus => Channel::SigmaMinus,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_input")]
    pub input_state: InputState,
    #[serde(default = "default_addressed")]
    pub addressed_ions: Vec<usize>,
    /// Pulse durations for a fixed-length sweep; empty disables it.
    #[serde(default)]
    pub duration_sweep_s: Vec<f64>,
    #[serde(default = "default_sweep_pulses")]
    pub sweep_pulses: usize,
    /// Shifts the drive away from the addressed ion's resonance. With a
    /// non-zero offset the addressed ion is benchmarked like a spectator.
    #[serde(default)]
    pub carrier_offset_hz: f64,
}

fn default_input() -> InputState {
    InputState::Eigenstate
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self {
            n_values: default_n_values(),
            trials: default_trials(),
            seed: default_seed(),
            input_state: default_input(),
            addressed_ions: default_addressed(),
            duration_sweep_s: Vec::new(),
            sweep_pulses: default_sweep_pulses(),
            carrier_offset_hz: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default)]
    pub j_enabled: bool,
    #[serde(default)]
    pub j_nearest_neighbor_hz: f64,
    #[serde(default)]
    pub sideband_eta: f64,
    #[serde(default = "default_phonons")]
    pub sideband_mean_phonon: f64,
    /// Motional mode frequency; defaults to the secular frequency.
    pub sideband_mode_hz: Option<f64>,
    #[serde(default = "one")]
    pub readout_p: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            j_enabled: false,
            j_nearest_neighbor_hz: 0.0,
            sideband_eta: 0.0,
            sideband_mean_phonon: default_phonons(),
            sideband_mode_hz: None,
            readout_p: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// Defaults to 2 MHz beyond the outermost qubit lines.
    pub spectrum_start_hz: Option<f64>,
    pub spectrum_stop_hz: Option<f64>,
    #[serde(default = "default_spectrum_points")]
    pub spectrum_points: usize,
    /// Defaults to `pulses.duration_s`.
    pub spectrum_duration_s: Option<f64>,
    /// Addressed ion of the Rabi scan; defaults to the first benchmarked ion.
    pub rabi_ion: Option<usize>,
    /// Qubit-line Rabi frequency of the scanned ion; the map is rescaled.
    pub rabi_hz: Option<f64>,
    #[serde(default = "default_rabi_max")]
    pub rabi_max_duration_s: f64,
    #[serde(default = "default_rabi_points")]
    pub rabi_points: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            spectrum_start_hz: None,
            spectrum_stop_hz: None,
            spectrum_points: default_spectrum_points(),
            spectrum_duration_s: None,
            rabi_ion: None,
            rabi_hz: None,
            rabi_max_duration_s: default_rabi_max(),
            rabi_points: default_rabi_points(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    /// Fixed harmonic; searched within the Rabi bounds when absent.
    pub harmonic_k: Option<u32>,
    /// Comb spacing; defaults to the mean next-neighbour splitting.
    pub detuning_hz: Option<f64>,
    #[serde(default = "default_rabi_target")]
    pub rabi_target_hz: f64,
    #[serde(default = "default_rabi_min")]
    pub rabi_min_hz: f64,
    #[serde(default = "default_rabi_max_hz")]
    pub rabi_max_hz: f64,
    #[serde(default = "default_multiplier")]
    pub bias_multiplier: i64,
    #[serde(default = "default_grid_points")]
    pub tau_grid_points: usize,
    /// Relative half-width of the duration grid around the closed form.
    #[serde(default = "default_grid_span")]
    pub tau_grid_span: f64,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            harmonic_k: None,
            detuning_hz: None,
            rabi_target_hz: default_rabi_target(),
            rabi_min_hz: default_rabi_min(),
            rabi_max_hz: default_rabi_max_hz(),
            bias_multiplier: default_multiplier(),
            tau_grid_points: default_grid_points(),
            tau_grid_span: default_grid_span(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_oracle_c")]
    pub crosstalk: Vec<f64>,
    #[serde(default = "default_oracle_n")]
    pub n_values: Vec<usize>,
    #[serde(default = "default_walkers")]
    pub walkers: usize,
    #[serde(default = "default_sequences")]
    pub sequences: usize,
    #[serde(default = "default_oracle_rabi")]
    pub rabi_hz: f64,
    #[serde(default = "default_oracle_tau")]
    pub duration_s: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            crosstalk: default_oracle_c(),
            n_values: default_oracle_n(),
            walkers: default_walkers(),
            sequences: default_sequences(),
            rabi_hz: default_oracle_rabi(),
            duration_s: default_oracle_tau(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    /// Spectator detuning; defaults to the smallest next-neighbour splitting.
    pub detuning_hz: Option<f64>,
    /// Defaults to `model.j_nearest_neighbor_hz`.
    pub j_hz: Option<f64>,
    #[serde(default = "one")]
    pub rabi_ratio: f64,
    #[serde(default = "one")]
    pub gradient_ratio: f64,
    #[serde(default = "one")]
    pub secular_ratio: f64,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            detuning_hz: None,
            j_hz: None,
            rabi_ratio: 1.0,
            gradient_ratio: 1.0,
            secular_ratio: 1.0,
        }
    }
}

fn bad(key: &str, msg: &str) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, "must be a positive number"))
    }
}

fn ion_number(key: &str, ion: usize, n: usize) -> Result<usize, CliError> {
    if (1..=n).contains(&ion) {
        Ok(ion - 1)
    } else {
        Err(bad(key, &format!("ion {ion} outside 1..={n}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.trap.ion_count;
        if n == 0 {
            return Err(bad("trap.ion_count", "must be at least 1"));
        }
        positive("trap.secular_frequency_hz", self.trap.secular_frequency_hz)?;
        if self.trap.ion_species != "171Yb+" {
            return Err(bad("trap.ion_species", "only \"171Yb+\" is supported"));
        }
        let f = &self.field;
        if !f.gradient_t_per_m.is_finite() {
            return Err(bad("field.gradient_t_per_m", "must be finite"));
        }
        let given = [
            f.bias_t.is_some(),
            f.first_ion_offset_hz.is_some(),
            f.bias_multiplier.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if given > 1 {
            return Err(bad(
                "field",
                "give at most one of bias_t, first_ion_offset_hz, bias_multiplier",
            ));
        }
        if f.bias_multiplier == Some(0) {
            return Err(bad("field.bias_multiplier", "must be non-zero"));
        }
        if let Some(sp) = &f.sigma_plus_hz {
            if sp.len() != n {
                return Err(bad("field.sigma_plus_hz", &format!("needs {n} entries")));
            }
            if sp.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(bad("field.sigma_plus_hz", "entries must be positive"));
            }
        }
        let p = &self.pulses;
        match (p.rabi_hz, &p.rabi_hz_per_ion) {
            (Some(_), Some(_)) => {
                return Err(bad(
                    "pulses",
                    "give either rabi_hz or rabi_hz_per_ion, not both",
                ))
            }
            (None, None) => return Err(bad("pulses", "rabi_hz or rabi_hz_per_ion is required")),
            (Some(r), None) => {
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(bad("pulses.rabi_hz", "must be non-negative"));
                }
            }
            (None, Some(v)) => {
                if v.len() != n {
                    return Err(bad("pulses.rabi_hz_per_ion", &format!("needs {n} entries")));
                }
                if v.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                    return Err(bad(
                        "pulses.rabi_hz_per_ion",
                        "entries must be non-negative",
                    ));
                }
            }
        }
        if let Some(r) = p.addressed_rabi_hz {
            positive("pulses.addressed_rabi_hz", r)?;
        }
        for (k, w) in [
            ("pulses.weight_pi", p.weight_pi),
            ("pulses.weight_sigma_plus", p.weight_sigma_plus),
            ("pulses.weight_sigma_minus", p.weight_sigma_minus),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(bad(k, "must be non-negative"));
            }
        }
        if p.weight_sigma_plus == 0.0 {
            return Err(bad(
                "pulses.weight_sigma_plus",
                "the qubit line must be driven",
            ));
        }
        positive("pulses.duration_s", p.duration_s)?;

        let b = &self.benchmark;
        if b.trials == 0 {
            return Err(bad("benchmark.trials", "must be at least 1"));
        }
        if b.n_values.is_empty() {
            return Err(bad("benchmark.n_values", "must not be empty"));
        }
        let mut sorted = b.n_values.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != b.n_values.len() {
            return Err(bad("benchmark.n_values", "duplicate sequence length"));
        }
        if b.addressed_ions.is_empty() {
            return Err(bad("benchmark.addressed_ions", "must not be empty"));
        }
        for &a in &b.addressed_ions {
            ion_number("benchmark.addressed_ions", a, n)?;
        }
        for &t in &b.duration_sweep_s {
            positive("benchmark.duration_sweep_s", t)?;
        }

        let m = &self.model;
        if !(m.readout_p > 0.5 && m.readout_p <= 1.0) {
            return Err(bad("model.readout_p", "must lie in (0.5, 1]"));
        }
        if !(m.sideband_eta >= 0.0 && m.sideband_mean_phonon >= 0.0) {
            return Err(bad("model", "sideband parameters must be non-negative"));
        }
        if let Some(f) = m.sideband_mode_hz {
            positive("model.sideband_mode_hz", f)?;
        }
        if !m.j_nearest_neighbor_hz.is_finite() {
            return Err(bad("model.j_nearest_neighbor_hz", "must be finite"));
        }

        let s = &self.scan;
        if s.spectrum_points < 2 || s.rabi_points < 2 {
            return Err(bad("scan", "need at least two scan points"));
        }
        if let Some(t) = s.spectrum_duration_s {
            positive("scan.spectrum_duration_s", t)?;
        }
        if let Some(r) = s.rabi_hz {
            positive("scan.rabi_hz", r)?;
        }
        if let Some(i) = s.rabi_ion {
            ion_number("scan.rabi_ion", i, n)?;
        }
        positive("scan.rabi_max_duration_s", s.rabi_max_duration_s)?;

        let o = &self.optimize;
        if o.harmonic_k == Some(0) {
            return Err(bad("optimize.harmonic_k", "must be at least 1"));
        }
        if let Some(d) = o.detuning_hz {
            positive("optimize.detuning_hz", d)?;
        }
        positive("optimize.rabi_min_hz", o.rabi_min_hz)?;
        positive("optimize.rabi_max_hz", o.rabi_max_hz)?;
        positive("optimize.rabi_target_hz", o.rabi_target_hz)?;
        if o.rabi_min_hz > o.rabi_max_hz {
            return Err(bad("optimize", "rabi_min_hz exceeds rabi_max_hz"));
        }
        if o.bias_multiplier == 0 {
            return Err(bad("optimize.bias_multiplier", "must be non-zero"));
        }
        if o.tau_grid_points < 3 {
            return Err(bad(
                "optimize.tau_grid_points",
                "need at least three points",
            ));
        }
        if !(o.tau_grid_span > 0.0 && o.tau_grid_span < 1.0) {
            return Err(bad("optimize.tau_grid_span", "must lie in (0, 1)"));
        }

        let q = &self.oracle;
        if q.crosstalk.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
            return Err(bad("oracle.crosstalk", "entries must lie in (0, 1)"));
        }
        if q.walkers == 0 || q.sequences == 0 {
            return Err(bad("oracle", "walkers and sequences must be at least 1"));
        }
        positive("oracle.rabi_hz", q.rabi_hz)?;
        positive("oracle.duration_s", q.duration_s)?;

        let c = &self.scaling;
        if let Some(d) = c.detuning_hz {
            positive("scaling.detuning_hz", d)?;
        }
        for (k, v) in [
            ("scaling.rabi_ratio", c.rabi_ratio),
            ("scaling.gradient_ratio", c.gradient_ratio),
            ("scaling.secular_ratio", c.secular_ratio),
        ] {
            positive(k, v)?;
        }
        Ok(())
    }

    pub fn trap(&self) -> TrapConfig {
        TrapConfig::ytterbium(self.trap.ion_count, self.trap.secular_frequency_hz)
    }

    pub fn weights(&self) -> PolarizationWeights {
        PolarizationWeights {
            pi: self.pulses.weight_pi,
            sigma_plus: self.pulses.weight_sigma_plus,
            sigma_minus: self.pulses.weight_sigma_minus,
        }
    }

    /// Zero-based addressed ions.
    pub fn addressed(&self) -> Vec<usize> {
        self.benchmark
            .addressed_ions
            .iter()
            .map(|a| a - 1)
            .collect()
    }

    pub fn build(&self) -> Result<Setup, CliError> {
        let constants = PhysicalConstants::default();
        let trap = self.trap();
        let chain = equilibrium_positions(&trap, &constants)?;
        let f = &self.field;
        let mut field = FieldConfig {
            gradient: f.gradient_t_per_m,
            bias: f.bias_t.unwrap_or(0.0),
            zero_position: f.zero_position_m,
        };
        if let Some(offset) = f.first_ion_offset_hz {
            field.bias = offset / constants.zeeman_coefficient
                - field.gradient * (chain.positions[0] - field.zero_position);
        }
        if let Some(m) = f.bias_multiplier {
            field.bias = qbyte::optimizer::optimal_bias(&chain, &field, &constants, m)?.bias;
        }
        field.validate()?;
        let transitions = match &f.sigma_plus_hz {
            Some(sp) => TransitionSet::from_sigma_plus(constants.hyperfine_splitting, sp),
            None => transition_map(&chain, &field, &constants),
        };
        let n = self.trap.ion_count;
        let rabi = match (&self.pulses.rabi_hz_per_ion, self.pulses.rabi_hz) {
            (Some(v), _) => RabiMap::from_per_ion(v, self.weights())?,
            (None, Some(r)) => RabiMap::uniform(n, r, self.weights())?,
            (None, None) => unreachable!("validated"),
        };
        let mut register = Register::new(transitions, rabi)?;
        register.addressed_rabi = self.pulses.addressed_rabi_hz;
        register.probe = self.pulses.probe.into();
        register.coupling = if self.model.j_enabled {
            CouplingConfig::nearest_neighbor(n, self.model.j_nearest_neighbor_hz)
        } else {
            CouplingConfig::disabled(n)
        };
        register.validate()?;
        Ok(Setup {
            constants,
            chain,
            field,
            register,
        })
    }

    pub fn sideband(&self) -> SidebandConfig {
        SidebandConfig {
            mode_frequency: self
                .model
                .sideband_mode_hz
                .unwrap_or(self.trap.secular_frequency_hz),
            mean_phonon_number: self.model.sideband_mean_phonon,
            effective_lamb_dicke: self.model.sideband_eta,
        }
    }

    /// Benchmark plan for one zero-based addressed ion.
    pub fn plan(&self, addressed: usize) -> Result<BenchmarkPlan, CliError> {
        let b = &self.benchmark;
        let mut n_values = b.n_values.clone();
        n_values.sort_unstable();
        Ok(BenchmarkPlan {
            addressed_ion: addressed,
            n_values,
            trials: b.trials,
            pulse_duration: self.pulses.duration_s,
            seed: b.seed,
            input_state: b.input_state,
            readout: ReadoutModel::symmetric(self.trap.ion_count, self.model.readout_p)?,
            carrier_offset: b.carrier_offset_hz,
        })
    }
}

/// Objects derived from a configuration.
#[derive(Clone, Debug)]
pub struct Setup {
    pub constants: PhysicalConstants,
    pub chain: IonChain,
    pub field: FieldConfig,
    pub register: Register,
}
