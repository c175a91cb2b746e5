//! Deterministic quadrature rules: Gauss–Legendre, product rules on spheres,
//! composite Simpson.

use crate::error::{LabError, Result};
use crate::scalar::{from_usize, lit, Real};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = from_usize::<T>(n);
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (T::PI() * (from_usize::<T>(i) + lit(0.75)) / (nf + lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= T::epsilon() * lit(4.0) {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        dp = if d != T::zero() { d } else { dp };
        let w = lit::<T>(2.0) / ((T::one() - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::zero();
    }
    (nodes, weights)
}

fn legendre_and_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    if n == 0 {
        return (p0, T::zero());
    }
    for k in 2..=n {
        let kf = from_usize::<T>(k);
        let p2 = ((lit::<T>(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = from_usize::<T>(n);
    let d = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on<T: Real>(n: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(n);
    let half = (b - a) * lit(0.5);
    let mid = (b + a) * lit(0.5);
    (x.iter().map(|&xi| mid + half * xi).collect(), w.iter().map(|&wi| wi * half).collect())
}

/// Directions on the unit sphere `S^{n-1}` with weights summing to its area.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule<T> {
    pub dim: usize,
    pub directions: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> SphereRule<T> {
    /// Product rule: Gauss–Legendre in `cos θ` times uniform azimuth (dimension 3),
    /// uniform angles on the circle (dimension 2), `±1` on the line (dimension 1).
    pub fn product(dim: usize, n_polar: usize, n_azimuth: usize) -> Result<Self> {
        match dim {
            1 => Ok(Self { dim, directions: vec![vec![T::one()], vec![-T::one()]], weights: vec![T::one(); 2] }),
            2 => {
                if n_azimuth == 0 {
                    return Err(LabError::Validation("circle rule needs at least one node".into()));
                }
                let w = T::TAU() / from_usize(n_azimuth);
                let directions = (0..n_azimuth)
                    .map(|k| {
                        let phi = w * (from_usize::<T>(k) + lit(0.5));
                        vec![phi.cos(), phi.sin()]
                    })
                    .collect();
                Ok(Self { dim, directions, weights: vec![w; n_azimuth] })
            }
            3 => {
                if n_polar == 0 || n_azimuth == 0 {
                    return Err(LabError::Validation("sphere rule needs polar and azimuthal nodes".into()));
                }
                let (z, wz) = gauss_legendre::<T>(n_polar);
                let dphi = T::TAU() / from_usize(n_azimuth);
                let mut directions = Vec::with_capacity(n_polar * n_azimuth);
                let mut weights = Vec::with_capacity(n_polar * n_azimuth);
                for (zi, wi) in z.iter().zip(&wz) {
                    let rho = (T::one() - *zi * *zi).max(T::zero()).sqrt();
                    for k in 0..n_azimuth {
                        let phi = dphi * (from_usize::<T>(k) + lit(0.5));
                        directions.push(vec![rho * phi.cos(), rho * phi.sin(), *zi]);
                        weights.push(*wi * dphi);
                    }
                }
                Ok(Self { dim, directions, weights })
            }
            _ => Err(LabError::Unsupported(format!("sphere quadrature in dimension {dim}"))),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Composite Simpson rule on equally spaced samples (odd count); falls back to
/// the trapezoid rule for an even number of samples.
pub fn simpson<T: Real>(samples: &[T], h: T) -> T {
    let n = samples.len();
    if n < 2 {
        return T::zero();
    }
    if n.is_multiple_of(2) {
        let inner: T = samples[1..n - 1].iter().copied().sum();
        return h * ((samples[0] + samples[n - 1]) * lit(0.5) + inner);
    }
    let mut s = samples[0] + samples[n - 1];
    for (i, &v) in samples.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { lit::<T>(4.0) * v } else { lit::<T>(2.0) * v };
    }
    s * h / lit(3.0)
}
