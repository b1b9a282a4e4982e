use serde::{Deserialize, Serialize};

use crate::benchmark::{CountRow, InputState};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub pulse_count: usize,
    pub fidelity: f64,
    /// Binomial standard error `sqrt(F (1 - F) / trials)`; zero at the
    /// boundaries.
    pub stderr: f64,
    pub trials: usize,
    /// Uncertainty used as fit weight: the binomial error, or the Wilson
    /// score half-width when the binomial error vanishes.
    pub fit_sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityCurve {
    pub ion_index: usize,
    pub addressed_index: usize,
    pub input_state: InputState,
    /// Strictly increasing in `pulse_count`.
    pub points: Vec<FidelityPoint>,
}

impl FidelityCurve {
    pub fn pulse_counts(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.pulse_count).collect()
    }

    /// Keeps only the points whose pulse count satisfies `keep`.
    pub fn filtered(&self, keep: impl Fn(usize) -> bool) -> Self {
        Self {
            points: self
                .points
                .iter()
                .copied()
                .filter(|p| keep(p.pulse_count))
                .collect(),
            ..self.clone()
        }
    }
}

/// Wilson score interval half-width at one standard deviation.
pub fn wilson_half_width(successes: usize, trials: usize) -> f64 {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2: f64 = 1.0;
    (z2.sqrt() / (1.0 + z2 / n)) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

/// Fidelity of one ion from its bright counts.
///
/// With `|0>` prepared the fidelity is the dark fraction; after the Ramsey
/// wrapper an unperturbed ion ends bright, so it is the bright fraction.
pub fn fidelity_point(row: &CountRow, input_state: InputState) -> Result<FidelityPoint> {
    if row.trials == 0 {
        return Err(Error::invalid(format!(
            "no trials at N = {}",
            row.pulse_count
        )));
    }
    if row.bright > row.trials {
        return Err(Error::invalid("more bright counts than trials"));
    }
    let n = row.trials as f64;
    let bright = row.bright as f64 / n;
    let (fidelity, successes) = match input_state {
        InputState::Eigenstate => (1.0 - bright, row.trials - row.bright),
        InputState::Superposition => (bright, row.bright),
    };
    let stderr = (fidelity * (1.0 - fidelity) / n).sqrt();
    let fit_sigma = if stderr > 0.0 {
        stderr
    } else {
        wilson_half_width(successes, row.trials)
    };
    Ok(FidelityPoint {
        pulse_count: row.pulse_count,
        fidelity,
        stderr,
        trials: row.trials,
        fit_sigma,
    })
}

/// Builds the curve of `ion` from benchmark rows (other ions are ignored).
pub fn fidelity_from_counts(
    rows: &[CountRow],
    ion: usize,
    addressed: usize,
    input_state: InputState,
) -> Result<FidelityCurve> {
    let mut points = rows
        .iter()
        .filter(|r| r.ion == ion)
        .map(|r| fidelity_point(r, input_state))
        .collect::<Result<Vec<_>>>()?;
    if points.is_empty() {
        return Err(Error::invalid(format!("no counts for ion {ion}")));
    }
    points.sort_by_key(|p| p.pulse_count);
    if points
        .windows(2)
        .any(|w| w[0].pulse_count == w[1].pulse_count)
    {
        return Err(Error::invalid("duplicate sequence length in counts"));
    }
    Ok(FidelityCurve {
        ion_index: ion,
        addressed_index: addressed,
        input_state,
        points,
    })
}

/// Mean fidelity after `n` randomized pulses with per-pulse cross-talk `c`:
/// `(1 + exp(-2 c n)) / 2`.
pub fn predict_fidelity(c: f64, n: f64) -> f64 {
    0.5 * (1.0 + (-2.0 * c * n).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn row(n: usize, bright: usize) -> CountRow {
        CountRow {
            pulse_count: n,
            ion: 0,
            trials: 1600,
            bright,
        }
    }

    #[test]
    fn boundary_counts_use_wilson_weight() {
        let p = fidelity_point(&row(0, 0), InputState::Eigenstate).unwrap();
        assert_eq!(p.fidelity, 1.0);
        assert_eq!(p.stderr, 0.0);
        assert!(p.fit_sigma > 0.0 && p.fit_sigma < 1e-3);
    }

    #[test]
    fn eigenstate_and_superposition_fidelity() {
        let p = fidelity_point(&row(0, 40), InputState::Eigenstate).unwrap();
        assert_relative_eq!(p.fidelity, 0.975, epsilon = 1e-15);
        assert_relative_eq!(
            p.stderr,
            (0.975f64 * 0.025 / 1600.0).sqrt(),
            epsilon = 1e-15
        );
        let p = fidelity_point(&row(0, 800), InputState::Superposition).unwrap();
        assert_eq!(p.fidelity, 0.5);
    }

    #[test]
    fn zero_trials_rejected() {
        let r = CountRow {
            pulse_count: 3,
            ion: 0,
            trials: 0,
            bright: 0,
        };
        assert!(fidelity_point(&r, InputState::Eigenstate).is_err());
    }

    #[test]
    fn curve_is_sorted_and_unique() {
        let rows = vec![row(500, 100), row(0, 40), row(250, 70)];
        let c = fidelity_from_counts(&rows, 0, 4, InputState::Eigenstate).unwrap();
        assert_eq!(c.pulse_counts(), vec![0, 250, 500]);
        let dup = vec![row(0, 40), row(0, 41)];
        assert!(fidelity_from_counts(&dup, 0, 4, InputState::Eigenstate).is_err());
    }

    #[test]
    fn prediction_values() {
        assert_eq!(predict_fidelity(0.3, 0.0), 1.0);
        assert_relative_eq!(predict_fidelity(1e-3, 1e6), 0.5, epsilon = 1e-15);
        assert_relative_eq!(predict_fidelity(7.6e-5, 1250.0), 0.9135, epsilon = 1e-4);
    }

    proptest! {
        #[test]
        fn prediction_monotone_and_bounded(c in 0.0f64..1e-2, n in 0.0f64..1e4, dn in 1.0f64..100.0, dc in 1e-6f64..1e-3) {
            let f = predict_fidelity(c, n);
            prop_assert!((0.5..=1.0).contains(&f));
            prop_assert!(predict_fidelity(c, n + dn) <= f);
            prop_assert!(predict_fidelity(c + dc, n) <= f);
        }
    }
}
