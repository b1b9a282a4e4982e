//! Weighted least-squares fit of the benchmark decay
//! `f(p0, C; N) = (1 + (2 p0 - 1) exp(-2 C N)) / 2`.
//!
//! For fixed `C` the model is linear in `p0`, so a one-dimensional profile
//! scan over `log C` brackets the optimum (including the `C = 0`
//! boundary). A damped Gauss-Newton iteration on `(p0, log C)` with the
//! analytic Jacobian then polishes it, and the covariance is the inverse
//! of `J^T W J` in `(p0, C)`.

use serde::{Deserialize, Serialize};

use super::fidelity::FidelityCurve;
use crate::error::{Error, Result};

/// Profile `chi2` rise defining the one-sided 95% upper bound on `C`.
pub const UPPER_BOUND_DELTA_CHI2: f64 = 2.71;

const GN_MAX_ITER: usize = 200;
const PROFILE_GRID: usize = 240;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub p0: f64,
    pub p0_sigma: f64,
    /// Per-pulse cross-talk `C`.
    pub crosstalk: f64,
    pub crosstalk_sigma: f64,
    /// Covariance of `(p0, C)`.
    pub covariance: [[f64; 2]; 2],
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    /// True when the best fit sits at `C = 0`.
    pub at_boundary: bool,
    /// One-sided 95% upper bound on `C`, set when `at_boundary`.
    pub crosstalk_upper: Option<f64>,
}

impl FitResult {
    /// Mean fidelity predicted by the fitted parameters.
    pub fn predict(&self, n: f64) -> f64 {
        decay_model(self.p0, self.crosstalk, n)
    }
}

pub fn decay_model(p0: f64, c: f64, n: f64) -> f64 {
    0.5 * (1.0 + (2.0 * p0 - 1.0) * (-2.0 * c * n).exp())
}

struct Data {
    n: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Data {
    fn from_curve(curve: &FidelityCurve) -> Result<Self> {
        let mut distinct = curve.pulse_counts();
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(Error::invalid(
                "decay fit needs at least three distinct sequence lengths",
            ));
        }
        if distinct.iter().all(|&n| n == 0) {
            return Err(Error::invalid("decay fit needs a non-zero sequence length"));
        }
        let mut w = Vec::with_capacity(curve.points.len());
        for p in &curve.points {
            if !(p.fit_sigma > 0.0 && p.fit_sigma.is_finite()) {
                return Err(Error::invalid(format!(
                    "non-positive uncertainty at N = {}",
                    p.pulse_count
                )));
            }
            w.push(1.0 / (p.fit_sigma * p.fit_sigma));
        }
        Ok(Self {
            n: curve.points.iter().map(|p| p.pulse_count as f64).collect(),
            y: curve.points.iter().map(|p| p.fidelity).collect(),
            w,
        })
    }

    fn chi2(&self, p0: f64, c: f64) -> f64 {
        self.n
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((&n, &y), &w)| {
                let r = y - decay_model(p0, c, n);
                w * r * r
            })
            .sum()
    }

    /// Best `p0` (capped at 1) and the resulting `chi2` at fixed `c`.
    fn profile(&self, c: f64) -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&n, &y), &w) in self.n.iter().zip(&self.y).zip(&self.w) {
            let g = (-2.0 * c * n).exp();
            num += w * g * (y - 0.5);
            den += w * g * g;
        }
        let p0 = (0.5 + num / den).min(1.0);
        (p0, self.chi2(p0, c))
    }

    fn n_max(&self) -> f64 {
        self.n.iter().cloned().fold(0.0, f64::max)
    }
}

/// Smallest `c > 0` with `profile_chi2(c) >= target`, searched in log space
/// above `from`.
fn profile_crossing(data: &Data, from: f64, target: f64) -> f64 {
    let mut lo = from.max(1e-14 / data.n_max());
    let mut hi = lo;
    for _ in 0..200 {
        hi *= 2.0;
        if data.profile(hi).1 >= target {
            break;
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if data.profile(mid).1 >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo - 1.0 < 1e-10 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 {
            break;
        }
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

fn covariance(data: &Data, p0: f64, c: f64) -> Option<[[f64; 2]; 2]> {
    let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
    for (&n, &w) in data.n.iter().zip(&data.w) {
        let g = (-2.0 * c * n).exp();
        let jp = g;
        let jc = -(2.0 * p0 - 1.0) * n * g;
        a += w * jp * jp;
        b += w * jp * jc;
        d += w * jc * jc;
    }
    let det = a * d - b * b;
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    Some([[d / det, -b / det], [-b / det, a / det]])
}

/// Damped Gauss-Newton on `(p0, s = ln C)`.
fn gauss_newton(data: &Data, p0: f64, c: f64) -> Result<(f64, f64, usize)> {
    let mut p = p0;
    let mut s = c.ln();
    let mut chi = data.chi2(p, s.exp());
    let mut lambda = 1e-3;
    for iter in 0..GN_MAX_ITER {
        let cval = s.exp();
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((&n, &y), &w) in data.n.iter().zip(&data.y).zip(&data.w) {
            let e = (-2.0 * cval * n).exp();
            let r = y - decay_model(p, cval, n);
            let jp = e;
            let js = -(2.0 * p - 1.0) * n * cval * e;
            a11 += w * jp * jp;
            a12 += w * jp * js;
            a22 += w * js * js;
            g1 += w * jp * r;
            g2 += w * js * r;
        }
        let mut improved = false;
        for _ in 0..40 {
            let d11 = a11 * (1.0 + lambda);
            let d22 = a22 * (1.0 + lambda);
            let det = d11 * d22 - a12 * a12;
            if !(det > 0.0) {
                lambda *= 10.0;
                continue;
            }
            let dp = (d22 * g1 - a12 * g2) / det;
            let ds = (d11 * g2 - a12 * g1) / det;
            let (np, ns) = ((p + dp).min(1.0), s + ds);
            let nchi = data.chi2(np, ns.exp());
            if nchi.is_finite() && nchi <= chi {
                let converged =
                    (chi - nchi) <= 1e-14 * chi.max(1e-300) && dp.abs() < 1e-13 && ds.abs() < 1e-10;
                p = np;
                s = ns;
                chi = nchi;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if converged {
                    return Ok((p, s.exp(), iter + 1));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left: at the minimum to working precision.
            return Ok((p, s.exp(), iter + 1));
        }
    }
    if chi.is_finite() {
        Ok((p, s.exp(), GN_MAX_ITER))
    } else {
        Err(Error::FitFailure {
            message: "chi-square diverged".into(),
            iterations: GN_MAX_ITER,
            chi2: chi,
        })
    }
}

pub fn fit_decay(curve: &FidelityCurve) -> Result<FitResult> {
    let data = Data::from_curve(curve)?;
    let dof = data.n.len() - 2;
    let n_max = data.n_max();

    // Profile scan over log C.
    let lo = (1e-9 / n_max).ln();
    let hi = (25.0 / n_max).ln();
    let grid: Vec<f64> = (0..PROFILE_GRID)
        .map(|k| lo + (hi - lo) * k as f64 / (PROFILE_GRID - 1) as f64)
        .collect();
    let chis: Vec<f64> = grid.iter().map(|&s| data.profile(s.exp()).1).collect();
    let (best, _) =
        chis.iter().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc },
        );
    let (p0_zero, chi_zero) = data.profile(0.0);

    let interior = best > 0 && best < PROFILE_GRID - 1;
    let (mut p0, mut c, mut iterations) = (p0_zero, 0.0, 0);
    let mut at_boundary = true;
    if interior {
        let s = golden_section(|s| data.profile(s.exp()).1, grid[best - 1], grid[best + 1]);
        let (pp, _) = data.profile(s.exp());
        let (gp, gc, it) = gauss_newton(&data, pp, s.exp())?;
        if data.chi2(gp, gc) < chi_zero {
            p0 = gp;
            c = gc;
            iterations = it;
            at_boundary = false;
        }
    } else if best == PROFILE_GRID - 1 {
        return Err(Error::FitFailure {
            message: "decay faster than the sampled sequence lengths resolve".into(),
            iterations: PROFILE_GRID,
            chi2: chis[best],
        });
    }

    let chi2 = data.chi2(p0, c);
    let reduced_chi2 = if dof > 0 { chi2 / dof as f64 } else { f64::NAN };

    if at_boundary {
        let sigma_c = profile_crossing(&data, 0.0, chi_zero + 1.0);
        let upper = profile_crossing(&data, 0.0, chi_zero + UPPER_BOUND_DELTA_CHI2);
        let p_var = 1.0 / data.w.iter().sum::<f64>();
        return Ok(FitResult {
            p0,
            p0_sigma: p_var.sqrt(),
            crosstalk: 0.0,
            crosstalk_sigma: sigma_c,
            covariance: [[p_var, 0.0], [0.0, sigma_c * sigma_c]],
            chi2,
            reduced_chi2,
            dof,
            iterations,
            at_boundary: true,
            crosstalk_upper: Some(upper),
        });
    }

    let cov = covariance(&data, p0, c).ok_or_else(|| Error::FitFailure {
        message: "singular normal matrix".into(),
        iterations,
        chi2,
    })?;
    Ok(FitResult {
        p0,
        p0_sigma: cov[0][0].sqrt(),
        crosstalk: c,
        crosstalk_sigma: cov[1][1].sqrt(),
        covariance: cov,
        chi2,
        reduced_chi2,
        dof,
        iterations,
        at_boundary: false,
        crosstalk_upper: None,
    })
}

/// `p0` estimate from the shortest sequence alone, for curves too short to
/// fit. Returns `(p0, sigma)`.
pub fn initial_fidelity(curve: &FidelityCurve) -> Result<(f64, f64)> {
    curve
        .points
        .first()
        .map(|p| (p.fidelity, p.fit_sigma))
        .ok_or_else(|| Error::invalid("empty fidelity curve"))
}
