//! Ion-chain geometry and the per-ion hyperfine frequency map.
//!
//! Equilibrium positions come from the dimensionless harmonic + Coulomb
//! problem: with `l = (e^2 / (4 pi eps0 M w^2))^(1/3)` and `z = u l`, every
//! ion satisfies
//!
//! ```text
//! u_m - sum_{n<m} 1/(u_m - u_n)^2 + sum_{n>m} 1/(u_m - u_n)^2 = 0
//! ```
//!
//! The frequency map applies a linear field `B(z) = bias + b (z - z0)` to
//! the first-order Zeeman shifts of the two magnetic transitions. The
//! `|0> <-> |0'>` transition is taken as field independent.
//!
//! All frequencies here are ordinary frequencies in Hz.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atomic mass of 171Yb+ in kg.
pub const YB171_MASS_KG: f64 = 2.838_464_405_819_170_3e-25;
/// `e^2 / (4 pi eps0)` in N m^2.
pub const COULOMB_E2: f64 = 2.307_077_552e-28;
/// Ground-state hyperfine splitting of 171Yb+ in Hz.
pub const YB171_HYPERFINE_HZ: f64 = 12.642_812_118e9;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// First-order Zeeman coefficient `g_F mu_B / h` of the magnetic
    /// transitions, Hz/T.
    pub zeeman_coefficient: f64,
    /// `e^2 / (4 pi eps0)`, N m^2.
    pub coulomb_constant_times_e2: f64,
    /// Zero-field `|0> <-> |0'>` frequency, Hz.
    pub hyperfine_splitting: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            zeeman_coefficient: 1.3996e10,
            coulomb_constant_times_e2: COULOMB_E2,
            hyperfine_splitting: YB171_HYPERFINE_HZ,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.zeeman_coefficient)
            && ok(self.coulomb_constant_times_e2)
            && ok(self.hyperfine_splitting)
        {
            Ok(())
        } else {
            Err(Error::invalid(
                "physical constants must be finite and positive",
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Axial centre-of-mass frequency, Hz (not angular).
    pub secular_frequency: f64,
    pub ion_mass: f64,
    pub ion_count: usize,
}

impl TrapConfig {
    pub fn ytterbium(ion_count: usize, secular_frequency: f64) -> Self {
        Self {
            secular_frequency,
            ion_mass: YB171_MASS_KG,
            ion_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.secular_frequency.is_finite() && self.secular_frequency > 0.0) {
            return Err(Error::invalid("secular frequency must be positive"));
        }
        if !(self.ion_mass.is_finite() && self.ion_mass > 0.0) {
            return Err(Error::invalid("ion mass must be positive"));
        }
        if self.ion_count == 0 {
            return Err(Error::invalid("ion count must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Axial field gradient, T/m.
    pub gradient: f64,
    /// Field at `zero_position`, T.
    pub bias: f64,
    /// Axial coordinate (m) where the field equals `bias`.
    pub zero_position: f64,
}

impl FieldConfig {
    pub fn field_at(&self, z: f64) -> f64 {
        self.bias + self.gradient * (z - self.zero_position)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gradient.is_finite() && self.gradient >= 0.0) {
            return Err(Error::invalid("gradient must be finite and non-negative"));
        }
        if !self.bias.is_finite() || !self.zero_position.is_finite() {
            return Err(Error::invalid("bias and zero position must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IonChain {
    /// Ascending axial positions, m.
    pub positions: Vec<f64>,
    /// Characteristic length `l` of the harmonic Coulomb problem, m.
    pub length_scale: f64,
}

impl IonChain {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Positions in units of `length_scale`.
    pub fn dimensionless(&self) -> Vec<f64> {
        self.positions
            .iter()
            .map(|z| z / self.length_scale)
            .collect()
    }
}

/// Characteristic length `l` in metres.
pub fn length_scale(trap: &TrapConfig, constants: &PhysicalConstants) -> f64 {
    let omega = 2.0 * PI * trap.secular_frequency;
    (constants.coulomb_constant_times_e2 / (trap.ion_mass * omega * omega)).cbrt()
}

/// Dimensionless net force on every ion; zero at equilibrium.
pub fn dimensionless_forces(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|m| {
            let mut f = u[m];
            for k in 0..n {
                if k == m {
                    continue;
                }
                let d = u[m] - u[k];
                f -= d.signum() / (d * d);
            }
            f
        })
        .collect()
}

fn force_jacobian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut jac = DMatrix::zeros(n, n);
    for m in 0..n {
        let mut diag = 1.0;
        for k in 0..n {
            if k == m {
                continue;
            }
            let d = (u[m] - u[k]).abs();
            let c = 2.0 / (d * d * d);
            diag += c;
            jac[(m, k)] = -c;
        }
        jac[(m, m)] = diag;
    }
    jac
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Damped Newton solve of the dimensionless equilibrium, seeded by
/// uniform spacing.
pub fn solve_dimensionless(ion_count: usize) -> Result<Vec<f64>> {
    if ion_count == 0 {
        return Err(Error::invalid("ion count must be at least 1"));
    }
    if ion_count == 1 {
        return Ok(vec![0.0]);
    }
    // Uniform seed with the large-N minimum-spacing estimate 2.018 N^-0.559.
    let spacing = 2.018 * (ion_count as f64).powf(-0.559);
    let centre = (ion_count as f64 - 1.0) / 2.0;
    let mut u: Vec<f64> = (0..ion_count)
        .map(|m| (m as f64 - centre) * spacing)
        .collect();

    let mut residual = max_abs(&dimensionless_forces(&u));
    for iter in 0..NEWTON_MAX_ITER {
        if residual < NEWTON_TOL {
            return Ok(u);
        }
        let f = DVector::from_vec(dimensionless_forces(&u));
        let step = force_jacobian(&u)
            .lu()
            .solve(&(-f))
            .ok_or_else(|| Error::SolverFailure {
                message: "singular Jacobian".into(),
                iterations: iter,
                residual,
            })?;

        let mut scale = 1.0;
        loop {
            let trial: Vec<f64> = u
                .iter()
                .zip(step.iter())
                .map(|(a, s)| a + scale * s)
                .collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered {
                let r = max_abs(&dimensionless_forces(&trial));
                if r < residual || scale < 1e-6 {
                    u = trial;
                    residual = r;
                    break;
                }
            }
            scale *= 0.5;
            if scale < 1e-12 {
                return Err(Error::SolverFailure {
                    message: "line search stalled".into(),
                    iterations: iter,
                    residual,
                });
            }
        }
    }
    if residual < NEWTON_TOL {
        Ok(u)
    } else {
        Err(Error::SolverFailure {
            message: "Newton iteration did not converge".into(),
            iterations: NEWTON_MAX_ITER,
            residual,
        })
    }
}

/// Equilibrium positions of the chain in metres.
pub fn equilibrium_positions(trap: &TrapConfig, constants: &PhysicalConstants) -> Result<IonChain> {
    trap.validate()?;
    constants.validate()?;
    let l = length_scale(trap, constants);
    let u = solve_dimensionless(trap.ion_count)?;
    Ok(IonChain {
        positions: u.into_iter().map(|x| x * l).collect(),
        length_scale: l,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IonTransitions {
    /// `|0> <-> |0'>`, Hz.
    pub pi: f64,
    /// `|0> <-> |1>` (the qubit), Hz.
    pub sigma_plus: f64,
    /// `|0> <-> |-1>`, Hz.
    pub sigma_minus: f64,
}

impl IonTransitions {
    /// Frequency of a channel, Hz.
    pub fn frequency(&self, channel: crate::pulse::Channel) -> f64 {
        use crate::pulse::Channel;
        match channel {
            Channel::Pi => self.pi,
            Channel::SigmaPlus => self.sigma_plus,
            Channel::SigmaMinus => self.sigma_minus,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionSet {
    pub ions: Vec<IonTransitions>,
}

impl TransitionSet {
    /// Builds a set from measured qubit (sigma+) frequencies, placing the
    /// sigma- line symmetrically about the field-independent line.
    pub fn from_sigma_plus(hyperfine_splitting: f64, sigma_plus: &[f64]) -> Self {
        let ions = sigma_plus
            .iter()
            .map(|&sp| IonTransitions {
                pi: hyperfine_splitting,
                sigma_plus: sp,
                sigma_minus: 2.0 * hyperfine_splitting - sp,
            })
            .collect();
        Self { ions }
    }

    pub fn len(&self) -> usize {
        self.ions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ions.is_empty()
    }

    pub fn sigma_plus(&self) -> Vec<f64> {
        self.ions.iter().map(|t| t.sigma_plus).collect()
    }

    /// `nu_j - nu_i` for the qubit transitions, Hz.
    pub fn qubit_detuning(&self, from: usize, to: usize) -> f64 {
        self.ions[to].sigma_plus - self.ions[from].sigma_plus
    }

    pub fn next_neighbor_differences(&self) -> Vec<f64> {
        self.ions
            .windows(2)
            .map(|w| w[1].sigma_plus - w[0].sigma_plus)
            .collect()
    }
}

pub fn transition_map(
    chain: &IonChain,
    field: &FieldConfig,
    constants: &PhysicalConstants,
) -> TransitionSet {
    let ions = chain
        .positions
        .iter()
        .map(|&z| {
            let shift = constants.zeeman_coefficient * field.field_at(z);
            IonTransitions {
                pi: constants.hyperfine_splitting,
                sigma_plus: constants.hyperfine_splitting + shift,
                sigma_minus: constants.hyperfine_splitting - shift,
            }
        })
        .collect();
    TransitionSet { ions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn byte_trap(n: usize) -> TrapConfig {
        TrapConfig::ytterbium(n, 124e3)
    }

    #[test]
    fn single_ion_sits_at_origin() {
        let chain = equilibrium_positions(&byte_trap(1), &PhysicalConstants::default()).unwrap();
        assert_eq!(chain.positions, vec![0.0]);
    }

    #[test]
    fn two_ions_match_analytic_solution() {
        let c = PhysicalConstants::default();
        let chain = equilibrium_positions(&byte_trap(2), &c).unwrap();
        let l = chain.length_scale;
        assert_relative_eq!(l, 11.02e-6, max_relative = 2e-3);
        let sep = chain.positions[1] - chain.positions[0];
        assert_relative_eq!(sep, 2f64.cbrt() * l, max_relative = 1e-12);
        assert_relative_eq!(sep, 13.89e-6, max_relative = 2e-3);
    }

    #[test]
    fn eight_ion_centre_spacing() {
        let chain = equilibrium_positions(&byte_trap(8), &PhysicalConstants::default()).unwrap();
        let s = chain.spacings();
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((6.9e-6..=7.1e-6).contains(&min), "min spacing {min}");
        assert_relative_eq!(min / chain.length_scale, 0.636, epsilon = 0.01);
        // Cross-check against plain gradient descent on the potential.
        let mut u: Vec<f64> = (0..8).map(|m| (m as f64 - 3.5) * 0.7).collect();
        for _ in 0..200_000 {
            let f = dimensionless_forces(&u);
            for (x, g) in u.iter_mut().zip(f) {
                *x -= 0.01 * g;
            }
        }
        for (a, b) in u.iter().zip(chain.dimensionless()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn residual_force_and_symmetry() {
        for n in 1..=12 {
            let u = solve_dimensionless(n).unwrap();
            assert!(max_abs(&dimensionless_forces(&u)) < 1e-9);
            assert!(u.windows(2).all(|w| w[1] > w[0]));
            for k in 0..n {
                assert!((u[k] + u[n - 1 - k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_ions_rejected() {
        assert!(equilibrium_positions(&byte_trap(0), &PhysicalConstants::default()).is_err());
    }

    #[test]
    fn bias_shift_of_single_ion() {
        let c = PhysicalConstants::default();
        let chain = equilibrium_positions(&byte_trap(1), &c).unwrap();
        let field = FieldConfig {
            gradient: 18.8,
            bias: 0.857e-3,
            zero_position: 0.0,
        };
        let t = transition_map(&chain, &field, &c);
        let ion = t.ions[0];
        assert_relative_eq!(ion.sigma_plus - ion.pi, 11.994_572e6, max_relative = 1e-9);
        assert_relative_eq!(ion.sigma_minus - ion.pi, -11.994_572e6, max_relative = 1e-9);
        // A carrier 2 MHz above the pi line sees sigma+ at -10 MHz and sigma- at +14 MHz.
        let carrier = ion.pi + 2e6;
        assert!(((ion.sigma_plus - carrier) / 1e6 - 10.0).abs() < 0.01);
        assert!(((carrier - ion.sigma_minus) / 1e6 - 14.0).abs() < 0.01);
    }

    #[test]
    fn zero_gradient_is_degenerate() {
        let c = PhysicalConstants::default();
        let chain = equilibrium_positions(&byte_trap(5), &c).unwrap();
        let field = FieldConfig {
            gradient: 0.0,
            bias: 0.4e-3,
            zero_position: 0.0,
        };
        let t = transition_map(&chain, &field, &c);
        assert!(t.ions.iter().all(|i| i.sigma_plus == t.ions[0].sigma_plus));
    }

    #[test]
    fn sigma_lines_symmetric_and_increasing() {
        let c = PhysicalConstants::default();
        let chain = equilibrium_positions(&byte_trap(8), &c).unwrap();
        let field = FieldConfig {
            gradient: 18.8,
            bias: 0.39e-3,
            zero_position: chain.positions[0],
        };
        let t = transition_map(&chain, &field, &c);
        for ion in &t.ions {
            let up = ion.sigma_plus - ion.pi;
            let down = ion.sigma_minus - ion.pi;
            assert!((up + down).abs() < 1e-3);
        }
        let diffs = t.next_neighbor_differences();
        for (d, s) in diffs.iter().zip(chain.spacings()) {
            assert!(*d > 0.0);
            assert_relative_eq!(*d, c.zeeman_coefficient * 18.8 * s, max_relative = 1e-9);
        }
    }
}
