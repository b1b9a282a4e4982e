//! Diffusion of a spectator Bloch vector under randomized pulses.
//!
//! The polar angle `x` of the state performs a random walk started at
//! `x0 = pi`. Its density obeys `phi_t = phi_xx` in the dimensionless time
//! `dt = 2 C N`, and the fidelity of the walker is `(1 - cos x) / 2`.

use std::f64::consts::PI;

use nalgebra::{Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::rng::{stream, Purpose};
use crate::error::{Error, Result};

const SERIES_TOL: f64 = 1e-12;
const SERIES_CAP: usize = 10_000;
const GAUSS_IMAGES: i32 = 10;
/// Below this `dt` the wrapped-Gaussian form is used.
const SERIES_MIN_DT: f64 = 1.0;
const MIN_DT: f64 = 1e-8;

/// Density of the polar angle at `angle` (radians) after dimensionless
/// diffusion time `dt`. `dt = 0` is treated as a very narrow peak at `pi`.
pub fn diffusion_density(angle: f64, dt: f64) -> f64 {
    let dt = dt.max(MIN_DT);
    if dt < SERIES_MIN_DT {
        wrapped_gaussian(angle, dt)
    } else {
        cosine_series(angle, dt)
    }
}

fn wrapped_gaussian(angle: f64, dt: f64) -> f64 {
    let x = (angle - PI).rem_euclid(2.0 * PI);
    let norm = 1.0 / (4.0 * PI * dt).sqrt();
    (-GAUSS_IMAGES..=GAUSS_IMAGES)
        .map(|k| {
            let d = x - 2.0 * PI * k as f64;
            (-d * d / (4.0 * dt)).exp()
        })
        .sum::<f64>()
        * norm
}

fn cosine_series(angle: f64, dt: f64) -> f64 {
    let mut sum = 1.0 / (2.0 * PI);
    for m in 1..=SERIES_CAP {
        let mf = m as f64;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let term = (-mf * mf * dt).exp() * sign * (mf * angle).cos() / PI;
        sum += term;
        if (-mf * mf * dt).exp() / PI < SERIES_TOL * sum.abs() {
            break;
        }
    }
    sum
}

/// Trapezoidal quadrature of `f(x) * density(x, dt)` over one period.
/// The integrand is periodic, so the rule converges spectrally.
pub fn density_expectation(dt: f64, points: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = 2.0 * PI / points as f64;
    (0..points)
        .map(|k| {
            let x = k as f64 * h;
            f(x) * diffusion_density(x, dt)
        })
        .sum::<f64>()
        * h
}

/// Mean fidelity implied by the density at `dt`.
pub fn density_fidelity(dt: f64) -> f64 {
    let points = quadrature_points(dt);
    density_expectation(dt, points, |x| 0.5 * (1.0 - x.cos()))
}

fn quadrature_points(dt: f64) -> usize {
    // Resolve the Gaussian width sqrt(2 dt) with ample margin.
    let width = (2.0 * dt.max(MIN_DT)).sqrt();
    ((2.0 * PI / width) * 40.0).clamp(512.0, 4.0e6) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkEstimate {
    pub fidelity: f64,
    pub stderr: f64,
    pub walkers: usize,
}

/// Monte Carlo random walk: each of `walkers` Bloch vectors starts at the
/// pole and takes `n` rotations by `2 sqrt(c)` about uniformly random
/// axes in the equatorial plane.
pub fn random_walk_oracle(
    c_per_step: f64,
    n: usize,
    walkers: usize,
    seed: u64,
) -> Result<WalkEstimate> {
    if !(0.0..1.0).contains(&c_per_step) {
        return Err(Error::invalid("per-step cross-talk must lie in [0, 1)"));
    }
    if walkers == 0 {
        return Err(Error::invalid("at least one walker is required"));
    }
    if c_per_step == 0.0 || n == 0 {
        return Ok(WalkEstimate {
            fidelity: 1.0,
            stderr: 0.0,
            walkers,
        });
    }
    let step = 2.0 * c_per_step.sqrt();
    let (sum, sum_sq) = (0..walkers)
        .into_par_iter()
        .map(|w| {
            let mut rng = stream(seed, Purpose::Walk, &[w as u64]);
            let mut v = Vector3::z();
            for _ in 0..n {
                let a = rng.random::<f64>() * 2.0 * PI;
                let axis = Unit::new_unchecked(Vector3::new(a.cos(), a.sin(), 0.0));
                v = UnitQuaternion::from_axis_angle(&axis, step) * v;
            }
            let f = 0.5 * (1.0 + v.z);
            (f, f * f)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = walkers as f64;
    let mean = sum / m;
    let var = if walkers > 1 {
        ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(WalkEstimate {
        fidelity: mean,
        stderr: (var / m).sqrt(),
        walkers,
    })
}

/// Fidelity lost in one step of the walk.
pub fn step_fidelity_loss(c_per_step: f64) -> f64 {
    c_per_step.sqrt().sin().powi(2)
}
