use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;

/// `exp(-i H t)` for a Hermitian 4x4 `H` (rad/s) via its eigendecomposition.
///
/// Only the lower triangle of `h` is read.
pub fn unitary_propagator(h: &Matrix4<Complex64>, t: f64) -> Matrix4<Complex64> {
    let eig = SymmetricEigen::new(*h);
    let v = eig.eigenvectors;
    let phases = Matrix4::from_diagonal(&eig.eigenvalues.map(|lambda| {
        let (s, c) = (lambda * t).sin_cos();
        Complex64::new(c, -s)
    }));
    v * phases * v.adjoint()
}
