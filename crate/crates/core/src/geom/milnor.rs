//! Closed-form principal Ricci curvatures of diagonal metrics in a Milnor frame.
//!
//! Independent of the Koszul path in [`super::curvature`]; used as its oracle.

use crate::linalg::Vec3;
use crate::scalar::{lit, Real};

/// Principal Ricci curvatures for `g = diag(d)` and constants `lambda`.
///
/// Rescales the frame to be orthonormal, `λ'_i = λ_i √(d_i / (d_j d_k))`,
/// then `r_i = 2 μ_j μ_k` with `μ_i = (λ'_j + λ'_k − λ'_i)/2`.
pub fn milnor_ricci<T: Real>(lambda: Vec3<T>, d: Vec3<T>) -> Vec3<T> {
    let l: Vec3<T> = std::array::from_fn(|i| {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        lambda[i] * (d[i] / (d[j] * d[k])).sqrt()
    });
    let half = lit::<T>(0.5);
    let mu: Vec3<T> = std::array::from_fn(|i| {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        (l[j] + l[k] - l[i]) * half
    });
    std::array::from_fn(|i| {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        lit::<T>(2.0) * mu[j] * mu[k]
    })
}
