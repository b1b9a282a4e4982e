use serde::{Deserialize, Serialize};

use super::fidelity::fidelity_from_counts;
use super::fit::fit_decay;
use crate::benchmark::{run_benchmark, BenchmarkPlan, Register};
use crate::error::{Error, Result};
use crate::pulse::{pulse_propagators, IonState};

/// One off-diagonal entry `C[addressed][spectator]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub addressed: usize,
    pub spectator: usize,
    pub c: f64,
    pub c_sigma: f64,
    /// Upper bound when the fit sits at `c = 0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_upper: Option<f64>,
    /// Fit failure of this entry; `c` and `c_sigma` are NaN when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkMatrix {
    pub size: usize,
    /// Row-major off-diagonal entries.
    pub entries: Vec<MatrixEntry>,
}

impl CrosstalkMatrix {
    pub fn get(&self, addressed: usize, spectator: usize) -> Option<&MatrixEntry> {
        self.entries
            .iter()
            .find(|e| e.addressed == addressed && e.spectator == spectator)
    }

    pub fn row(&self, addressed: usize) -> impl Iterator<Item = &MatrixEntry> {
        self.entries
            .iter()
            .filter(move |e| e.addressed == addressed)
    }

    /// Mean `c` over successful entries selected by `keep`.
    pub fn mean_where(&self, keep: impl Fn(&MatrixEntry) -> bool) -> Option<f64> {
        let vals: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| e.error.is_none() && keep(e))
            .map(|e| e.c)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// Dense layout, `None` on the diagonal and for failed entries.
    pub fn dense(&self) -> Vec<Vec<Option<f64>>> {
        let mut m = vec![vec![None; self.size]; self.size];
        for e in &self.entries {
            if e.error.is_none() {
                m[e.addressed][e.spectator] = Some(e.c);
            }
        }
        m
    }
}

pub fn is_next_neighbor(e: &MatrixEntry) -> bool {
    e.addressed.abs_diff(e.spectator) == 1
}

/// Benchmarks `plan.addressed_ion` and fits every spectator curve.
pub fn crosstalk_row(register: &Register, plan: &BenchmarkPlan) -> Result<Vec<MatrixEntry>> {
    let rows = run_benchmark(register, plan)?;
    let i = plan.addressed_ion;
    (0..register.len())
        .filter(|&j| j != i)
        .map(|j| {
            let curve = fidelity_from_counts(&rows, j, i, plan.input_state)?;
            Ok(match fit_decay(&curve) {
                Ok(fit) => MatrixEntry {
                    addressed: i,
                    spectator: j,
                    c: fit.crosstalk,
                    c_sigma: fit.crosstalk_sigma,
                    c_upper: fit.crosstalk_upper,
                    error: None,
                },
                Err(e) if e.is_numerical() => {
                    log::warn!("fit of C[{i}][{j}] failed: {e}");
                    MatrixEntry {
                        addressed: i,
                        spectator: j,
                        c: f64::NAN,
                        c_sigma: f64::NAN,
                        c_upper: None,
                        error: Some(e.to_string()),
                    }
                }
                Err(e) => return Err(e),
            })
        })
        .collect()
}

/// Full matrix: one benchmark run per addressed ion with otherwise
/// identical plans.
pub fn crosstalk_matrix(register: &Register, plan: &BenchmarkPlan) -> Result<CrosstalkMatrix> {
    let n = register.len();
    if n < 2 {
        return Err(Error::invalid(
            "a cross-talk matrix needs at least two ions",
        ));
    }
    let mut entries = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        let p = BenchmarkPlan {
            addressed_ion: i,
            ..plan.clone()
        };
        entries.extend(crosstalk_row(register, &p)?);
    }
    Ok(CrosstalkMatrix { size: n, entries })
}

/// Bright probability of every ion after a single pulse of length
/// `duration` resonant with `addressed`, starting from `|0...0>`.
pub fn single_pulse_excitation(
    register: &Register,
    addressed: usize,
    duration: f64,
) -> Result<Vec<f64>> {
    let carrier = register
        .transitions
        .ions
        .get(addressed)
        .ok_or_else(|| Error::invalid(format!("addressed ion {addressed} out of range")))?
        .sigma_plus;
    let rabi = register.drive_for(addressed)?;
    Ok(
        pulse_propagators(&register.transitions, &rabi, carrier, duration)?
            .iter()
            .map(|p| {
                let mut s = IonState::ground();
                p.apply_carrier_frame(&mut s, 0.0);
                s.bright_probability()
            })
            .collect(),
    )
}

/// Matrix of single-pulse spectator excitations from the full four-level
/// dynamics, without sampling noise.
pub fn exact_crosstalk_matrix(register: &Register, duration: f64) -> Result<CrosstalkMatrix> {
    let n = register.len();
    let mut entries = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 0..n {
        let ex = single_pulse_excitation(register, i, duration)?;
        for (j, &c) in ex.iter().enumerate().filter(|&(j, _)| j != i) {
            entries.push(MatrixEntry {
                addressed: i,
                spectator: j,
                c,
                c_sigma: 0.0,
                c_upper: None,
                error: None,
            });
        }
    }
    Ok(CrosstalkMatrix { size: n, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{InputState, ReadoutModel};
    use crate::chain::TransitionSet;
    use crate::pulse::{crosstalk_probability, PolarizationWeights, RabiMap};

    const HF: f64 = 12.642_812e9;

    fn register(offsets: &[f64], rabi: f64) -> Register {
        let sp: Vec<f64> = offsets.iter().map(|o| HF + o).collect();
        let t = TransitionSet::from_sigma_plus(HF, &sp);
        let w = PolarizationWeights {
            pi: 0.0,
            sigma_plus: 1.0,
            sigma_minus: 0.0,
        };
        Register::new(t, RabiMap::uniform(sp.len(), rabi, w).unwrap()).unwrap()
    }

    #[test]
    fn two_level_limit_matches_closed_form() {
        let reg = register(&[12e6, 13.852e6], 20e3);
        let ex = single_pulse_excitation(&reg, 1, 25e-6).unwrap();
        let c = crosstalk_probability(20e3, 1.852e6, 25e-6);
        assert!(
            (ex[0] - c).abs() < 1e-12 * c.max(1.0) + 1e-15,
            "{} {c}",
            ex[0]
        );
    }

    #[test]
    fn two_ion_matrix_is_symmetric() {
        let reg = register(&[12e6, 13.2e6], 40e3);
        let plan = BenchmarkPlan {
            addressed_ion: 0,
            n_values: vec![0, 100, 200, 300],
            trials: 400,
            pulse_duration: 12.5e-6,
            seed: 77,
            input_state: InputState::Eigenstate,
            readout: ReadoutModel::perfect(2),
            carrier_offset: 0.0,
        };
        let m = crosstalk_matrix(&reg, &plan).unwrap();
        let (a, b) = (m.get(0, 1).unwrap(), m.get(1, 0).unwrap());
        let joint = (a.c_sigma.powi(2) + b.c_sigma.powi(2)).sqrt();
        assert!((a.c - b.c).abs() < 2.0 * joint, "{a:?} {b:?}");
        assert!(m.entries.iter().all(|e| e.c >= 0.0));
        assert!(m.get(0, 0).is_none());
    }
}
