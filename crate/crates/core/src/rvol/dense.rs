//! Small square matrices (row-major) for group representations.

use crate::scalar::{from_usize, lit, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct SqMat<T> {
    pub n: usize,
    pub a: Vec<T>,
}

impl<T: Real> SqMat<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = T::one();
        }
        m
    }

    pub fn from_slice(n: usize, a: &[T]) -> Self {
        Self { n, a: a.to_vec() }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.a[i * self.n + j] = v;
    }

    pub fn mul(&self, b: &Self) -> Self {
        let n = self.n;
        let mut c = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..n {
                    c.a[i * n + j] += aik * b.a[k * n + j];
                }
            }
        }
        c
    }

    pub fn add(&self, b: &Self) -> Self {
        Self { n: self.n, a: self.a.iter().zip(&b.a).map(|(x, y)| *x + *y).collect() }
    }

    pub fn sub(&self, b: &Self) -> Self {
        Self { n: self.n, a: self.a.iter().zip(&b.a).map(|(x, y)| *x - *y).collect() }
    }

    pub fn scale(&self, s: T) -> Self {
        Self { n: self.n, a: self.a.iter().map(|x| *x * s).collect() }
    }

    pub fn frobenius(&self) -> T {
        self.a.iter().map(|x| *x * *x).sum::<T>().sqrt()
    }

    pub fn dot(&self, b: &Self) -> T {
        self.a.iter().zip(&b.a).map(|(x, y)| *x * *y).sum()
    }

    /// Gauss–Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        let mut m = self.a.clone();
        let mut inv = Self::identity(n).a;
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| {
                m[i * n + col].abs().partial_cmp(&m[j * n + col].abs()).unwrap_or(std::cmp::Ordering::Equal)
            })?;
            if m[piv * n + col] == T::zero() || !m[piv * n + col].is_finite() {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    m.swap(piv * n + j, col * n + j);
                    inv.swap(piv * n + j, col * n + j);
                }
            }
            let d = T::one() / m[col * n + col];
            for j in 0..n {
                m[col * n + j] *= d;
                inv[col * n + j] *= d;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = m[i * n + col];
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    let (dm, di) = (f * m[col * n + j], f * inv[col * n + j]);
                    m[i * n + j] -= dm;
                    inv[i * n + j] -= di;
                }
            }
        }
        Some(Self { n, a: inv })
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> T {
        let n = self.n;
        let mut m = self.a.clone();
        let mut det = T::one();
        for col in 0..n {
            let Some(piv) = (col..n).max_by(|&i, &j| {
                m[i * n + col].abs().partial_cmp(&m[j * n + col].abs()).unwrap_or(std::cmp::Ordering::Equal)
            }) else {
                return T::zero();
            };
            if m[piv * n + col] == T::zero() {
                return T::zero();
            }
            if piv != col {
                for j in 0..n {
                    m.swap(piv * n + j, col * n + j);
                }
                det = -det;
            }
            let p = m[col * n + col];
            det *= p;
            for i in col + 1..n {
                let f = m[i * n + col] / p;
                for j in col..n {
                    let d = f * m[col * n + j];
                    m[i * n + j] -= d;
                }
            }
        }
        det
    }

    /// Matrix exponential by scaling and squaring of a Taylor polynomial.
    pub fn expm(&self) -> Self {
        let norm = self.frobenius();
        let mut s = 0u32;
        let mut scaled = norm;
        while scaled > lit(0.25) {
            scaled *= lit(0.5);
            s += 1;
        }
        let a = self.scale(lit::<T>(2.0).powi(-(s as i32)));
        let mut term = Self::identity(self.n);
        let mut sum = Self::identity(self.n);
        for k in 1..=18 {
            term = term.mul(&a).scale(T::one() / from_usize::<T>(k));
            sum = sum.add(&term);
            if term.frobenius() <= T::epsilon() * sum.frobenius() {
                break;
            }
        }
        for _ in 0..s {
            sum = sum.mul(&sum);
        }
        sum
    }

    /// Logarithm of a matrix near the identity (`‖M − I‖ < 1/2`) by its series.
    pub fn log_near_identity(&self) -> Self {
        let x = self.sub(&Self::identity(self.n));
        let mut term = x.clone();
        let mut sum = x.clone();
        for k in 2..=60 {
            term = term.mul(&x);
            let c = T::one() / from_usize::<T>(k);
            let t = term.scale(if k % 2 == 0 { -c } else { c });
            sum = sum.add(&t);
            if t.frobenius() <= T::epsilon() * sum.frobenius().max(T::min_positive_value()) {
                break;
            }
        }
        sum
    }
}

/// Solves the symmetric positive-definite system `A x = b` (row-major `A`).
pub fn solve_spd<T: Real>(n: usize, a: &[T], b: &[T]) -> Option<Vec<T>> {
    let l = cholesky(n, a)?;
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Lower Cholesky factor of an SPD matrix (row-major).
pub fn cholesky<T: Real>(n: usize, a: &[T]) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}
