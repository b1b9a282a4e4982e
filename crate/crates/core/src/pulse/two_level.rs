//! Closed-form SU(2) dynamics of a single drive on a two-level system.
//!
//! Frequencies are in Hz; the rotation angle of a pulse of duration `tau`
//! is `theta = 2 pi Omega_R tau`.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;

/// `sqrt(rabi^2 + detuning^2)`, Hz.
pub fn generalized_rabi(rabi: f64, detuning: f64) -> f64 {
    rabi.hypot(detuning)
}

/// `R_n(theta) = exp(-i theta/2 n.sigma)` in the basis `(|0>, |1>)`.
///
/// The axis has in-plane magnitude `rabi / Omega_R` at azimuth `phase` and
/// z component `detuning / Omega_R`. A zero generalized Rabi frequency
/// yields the identity.
pub fn two_level_unitary(
    rabi: f64,
    detuning: f64,
    phase: f64,
    duration: f64,
) -> Matrix2<Complex64> {
    let omega_r = generalized_rabi(rabi, detuning);
    if omega_r == 0.0 {
        return Matrix2::identity();
    }
    let half = PI * omega_r * duration;
    let (s, c) = half.sin_cos();
    let n_perp = rabi / omega_r;
    let n_z = detuning / omega_r;
    let (sp, cp) = phase.sin_cos();
    let (nx, ny) = (n_perp * cp, n_perp * sp);
    let i = Complex64::i();
    // cos(h) I - i sin(h) (nx X + ny Y + nz Z)
    Matrix2::new(
        Complex64::new(c, 0.0) - i * s * n_z,
        -i * s * Complex64::new(nx, -ny),
        -i * s * Complex64::new(nx, ny),
        Complex64::new(c, 0.0) + i * s * n_z,
    )
}

/// Excitation probability `|<1|U|0>|^2 = (Omega/Omega_R)^2 sin^2(pi Omega_R tau)`.
pub fn crosstalk_probability(rabi: f64, detuning: f64, duration: f64) -> f64 {
    let omega_r = generalized_rabi(rabi, detuning);
    if omega_r == 0.0 {
        return 0.0;
    }
    let ratio = rabi / omega_r;
    let s = (PI * omega_r * duration).sin();
    ratio * ratio * s * s
}

/// Envelope `(Omega/Omega_R)^2` of [`crosstalk_probability`]; the value a
/// pulse of unlucky duration reaches.
pub fn crosstalk_envelope(rabi: f64, detuning: f64) -> f64 {
    let omega_r = generalized_rabi(rabi, detuning);
    if omega_r == 0.0 {
        0.0
    } else {
        (rabi / omega_r).powi(2)
    }
}
