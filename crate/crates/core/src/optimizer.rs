//! Pulse parameters that make every spectator rotation an integer number
//! of full revolutions, and the parameter scaling of the error budget.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::Register;
use crate::chain::{FieldConfig, IonChain, PhysicalConstants};
use crate::error::{Error, Result};
use crate::pulse::{
    crosstalk_probability, dephasing_error, generalized_rabi, j_coupling_phase, light_shift_phase,
    sideband_crosstalk, Channel, SidebandConfig,
};

/// Duration and Rabi frequency of a pi pulse on the addressed ion during
/// which a spectator detuned by `delta` (Hz) completes exactly `k` full
/// revolutions: `sqrt(delta^2 + omega^2) tau = k`, `omega tau = 1/2`.
pub fn optimal_duration(delta: f64, k: u32) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::invalid("harmonic index must be at least 1"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid("detuning must be positive"));
    }
    let k = k as f64;
    let tau = (4.0 * k * k - 1.0).sqrt() / (2.0 * delta);
    Ok((tau, 0.5 / tau))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicChoice {
    pub k: u32,
    /// Seconds.
    pub tau: f64,
    /// Hz.
    pub omega: f64,
}

/// Harmonic whose Rabi frequency is closest to `omega_target` among those
/// inside `[omega_min, omega_max]`.
pub fn choose_harmonic(
    delta: f64,
    omega_target: f64,
    omega_min: f64,
    omega_max: f64,
) -> Result<HarmonicChoice> {
    if !(omega_min > 0.0 && omega_max >= omega_min) {
        return Err(Error::invalid("Rabi bounds must be positive and ordered"));
    }
    // omega = delta / sqrt(4k^2 - 1) decreases with k.
    let k_of = |omega: f64| (((delta / omega).powi(2) + 1.0) / 4.0).sqrt();
    let k_lo = k_of(omega_max).ceil().max(1.0) as u32;
    let k_hi = k_of(omega_min).floor() as u32;
    let mut best: Option<HarmonicChoice> = None;
    for k in k_lo..=k_hi {
        let (tau, omega) = optimal_duration(delta, k)?;
        if omega < omega_min || omega > omega_max {
            continue;
        }
        let better =
            best.is_none_or(|b| (omega - omega_target).abs() < (b.omega - omega_target).abs());
        if better {
            best = Some(HarmonicChoice { k, tau, omega });
        }
        if omega < omega_target {
            break;
        }
    }
    best.ok_or_else(|| Error::invalid("no harmonic places the Rabi frequency inside the bounds"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    /// Field at `zero_position`, T.
    pub bias: f64,
    pub multiplier: i64,
    /// Mean next-neighbour qubit splitting, Hz.
    pub detuning: f64,
    /// Next-neighbour splittings minus `detuning`, Hz.
    pub residuals: Vec<f64>,
}

/// Bias field that puts the first ion's qubit line `m` comb spacings from
/// the field-independent `|0> <-> |0'>` line.
///
/// The comb spacing is the mean next-neighbour splitting; when the chain
/// is not uniformly spaced the residuals report the compromise.
pub fn optimal_bias(
    chain: &IonChain,
    field: &FieldConfig,
    constants: &PhysicalConstants,
    multiplier: i64,
) -> Result<BiasReport> {
    if multiplier == 0 {
        return Err(Error::invalid(
            "multiplier 0 puts the pi resonance on the first qubit line",
        ));
    }
    if chain.len() < 2 {
        return Err(Error::invalid("a comb needs at least two ions"));
    }
    let z = constants.zeeman_coefficient;
    let splittings: Vec<f64> = chain
        .spacings()
        .iter()
        .map(|s| z * field.gradient * s)
        .collect();
    let detuning = splittings.iter().sum::<f64>() / splittings.len() as f64;
    if detuning == 0.0 {
        return Err(Error::invalid("zero gradient gives no addressing comb"));
    }
    let target = multiplier as f64 * detuning.abs() / z;
    let bias = target - field.gradient * (chain.positions[0] - field.zero_position);
    Ok(BiasReport {
        bias,
        multiplier,
        detuning,
        residuals: splittings.iter().map(|s| s - detuning).collect(),
    })
}

/// `m * delta / zeeman`, the bias for a given comb spacing when the field
/// origin sits at the first ion.
pub fn bias_for_detuning(delta: f64, zeeman_coefficient: f64, multiplier: i64) -> Result<f64> {
    if multiplier == 0 {
        return Err(Error::invalid(
            "multiplier 0 puts the pi resonance on the first qubit line",
        ));
    }
    Ok(multiplier as f64 * delta / zeeman_coefficient)
}

/// Total single-pulse cross-talk with every ion addressed in turn, using
/// the two-level closed form on each off-resonant channel.
pub fn total_crosstalk(register: &Register, tau: f64) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..register.len() {
        total += spectator_crosstalk(register, i, tau)?.iter().sum::<f64>();
    }
    Ok(total)
}

/// Closed-form per-pulse cross-talk on every ion while `addressed` is
/// driven: all channels of the spectators plus the off-resonant channels
/// of the addressed ion itself.
pub fn spectator_crosstalk(register: &Register, addressed: usize, tau: f64) -> Result<Vec<f64>> {
    let rabi = register.drive_for(addressed)?;
    let carrier = register.transitions.ions[addressed].sigma_plus;
    Ok(register
        .transitions
        .ions
        .iter()
        .enumerate()
        .map(|(j, t)| {
            Channel::ALL
                .iter()
                .filter(|&&c| !(j == addressed && c == Channel::SigmaPlus))
                .map(|&c| crosstalk_probability(rabi.get(j, c), carrier - t.frequency(c), tau))
                .sum()
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveScan {
    /// Seconds.
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub grid_argmin: f64,
    pub grid_min: f64,
    pub refined_argmin: f64,
    pub refined_min: f64,
}

impl ObjectiveScan {
    /// Durations of strict interior local minima on the grid.
    pub fn local_minima(&self) -> Vec<f64> {
        (1..self.values.len().saturating_sub(1))
            .filter(|&k| {
                self.values[k] < self.values[k - 1] && self.values[k] <= self.values[k + 1]
            })
            .map(|k| self.taus[k])
            .collect()
    }
}

/// Evaluates [`total_crosstalk`] on `tau_grid` and refines the grid
/// minimum by golden-section search between its neighbours.
pub fn crosstalk_objective(register: &Register, tau_grid: &[f64]) -> Result<ObjectiveScan> {
    if tau_grid.is_empty() {
        return Err(Error::invalid("duration grid is empty"));
    }
    if tau_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("durations must be positive"));
    }
    let values = tau_grid
        .par_iter()
        .map(|&t| total_crosstalk(register, t))
        .collect::<Result<Vec<_>>>()?;
    let (k, &grid_min) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");
    let lo = tau_grid[k.saturating_sub(1)];
    let hi = tau_grid[(k + 1).min(tau_grid.len() - 1)];
    let (mut refined_argmin, mut refined_min) = (tau_grid[k], grid_min);
    if hi > lo {
        let t = golden_section(
            |t| total_crosstalk(register, t).unwrap_or(f64::INFINITY),
            lo,
            hi,
        );
        let v = total_crosstalk(register, t)?;
        if v <= refined_min {
            refined_argmin = t;
            refined_min = v;
        }
    }
    Ok(ObjectiveScan {
        taus: tau_grid.to_vec(),
        values,
        grid_argmin: tau_grid[k],
        grid_min,
        refined_argmin,
        refined_min,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > 1e-15 + 1e-12 * b.abs() {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Distance of `omega_r * tau` from the nearest whole number of
/// revolutions for one off-resonant channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Commensurability {
    pub addressed: usize,
    pub ion: usize,
    pub channel: Channel,
    /// Carrier minus transition, Hz.
    pub detuning: f64,
    pub revolutions: f64,
    pub residual: f64,
}

pub fn commensurability(register: &Register, tau: f64) -> Result<Vec<Commensurability>> {
    let mut out = Vec::new();
    for i in 0..register.len() {
        let rabi = register.drive_for(i)?;
        let carrier = register.transitions.ions[i].sigma_plus;
        for (j, t) in register.transitions.ions.iter().enumerate() {
            for c in Channel::ALL {
                if (j == i && c == Channel::SigmaPlus) || rabi.get(j, c) == 0.0 {
                    continue;
                }
                let detuning = carrier - t.frequency(c);
                let revolutions = generalized_rabi(rabi.get(j, c), detuning) * tau;
                out.push(Commensurability {
                    addressed: i,
                    ion: j,
                    channel: c,
                    detuning,
                    revolutions,
                    residual: revolutions - revolutions.round(),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub k: u32,
    /// Seconds.
    pub tau: f64,
    /// Hz.
    pub omega: f64,
    /// T.
    pub bias: f64,
    pub objective: f64,
    pub objective_argmin: f64,
    pub commensurability: Vec<Commensurability>,
}

/// Exponents of `(Omega, b, nu)` in the parameter dependence of an error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingLaw {
    pub rabi: f64,
    pub gradient: f64,
    pub secular: f64,
}

impl ScalingLaw {
    pub const CROSSTALK: Self = Self {
        rabi: 2.0,
        gradient: -2.0,
        secular: 4.0 / 3.0,
    };
    pub const LIGHT_SHIFT: Self = Self::CROSSTALK;
    pub const J_COUPLING: Self = Self {
        rabi: -2.0,
        gradient: 4.0,
        secular: -4.0,
    };
}

/// Ratios of new to old parameter values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleFactors {
    pub rabi: f64,
    pub gradient: f64,
    pub secular: f64,
}

impl ScaleFactors {
    pub const ONE: Self = Self {
        rabi: 1.0,
        gradient: 1.0,
        secular: 1.0,
    };
}

pub fn scale_error(base: f64, law: ScalingLaw, factors: ScaleFactors) -> Result<f64> {
    let ScaleFactors {
        rabi,
        gradient,
        secular,
    } = factors;
    if !(rabi > 0.0 && gradient > 0.0 && secular > 0.0) {
        return Err(Error::invalid("scale ratios must be positive"));
    }
    Ok(base * rabi.powf(law.rabi) * gradient.powf(law.gradient) * secular.powf(law.secular))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub source: String,
    pub value: f64,
    pub law: Option<ScalingLaw>,
}

/// Per-pulse error budget for a spectator `detuning` Hz away, driven at
/// `rabi` Hz for `duration` s, with static coupling `j` Hz.
pub fn error_budget(
    rabi: f64,
    detuning: f64,
    duration: f64,
    j: f64,
    sideband: &SidebandConfig,
) -> Result<Vec<BudgetRow>> {
    sideband.validate()?;
    Ok(vec![
        BudgetRow {
            source: "non_resonant_excitation".into(),
            value: crosstalk_probability(rabi, detuning, duration),
            law: Some(ScalingLaw::CROSSTALK),
        },
        BudgetRow {
            source: "light_shift".into(),
            value: dephasing_error(light_shift_phase(rabi, detuning, duration)?),
            law: Some(ScalingLaw::LIGHT_SHIFT),
        },
        BudgetRow {
            source: "j_coupling".into(),
            value: dephasing_error(j_coupling_phase(j, duration)),
            law: Some(ScalingLaw::J_COUPLING),
        },
        BudgetRow {
            source: "sideband".into(),
            value: sideband_crosstalk(sideband, rabi, detuning, duration),
            law: None,
        },
    ])
}
