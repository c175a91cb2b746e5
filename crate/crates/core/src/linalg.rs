//! Fixed-size 3×3 helpers used by the curvature and flow code.

use crate::scalar::{lit, Real};

pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];

pub fn zeros<T: Real>() -> Mat3<T> {
    [[T::zero(); 3]; 3]
}

pub fn identity<T: Real>() -> Mat3<T> {
    diag([T::one(); 3])
}

pub fn diag<T: Real>(d: Vec3<T>) -> Mat3<T> {
    let mut m = zeros();
    for i in 0..3 {
        m[i][i] = d[i];
    }
    m
}

pub fn transpose<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

pub fn mat_mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j])
    })
}

pub fn mat_vec<T: Real>(a: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    std::array::from_fn(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

pub fn dot<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `vᵀ G w`.
pub fn quad_form<T: Real>(g: &Mat3<T>, v: &Vec3<T>, w: &Vec3<T>) -> T {
    dot(v, &mat_vec(g, w))
}

pub fn det3<T: Real>(a: &Mat3<T>) -> T {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Determinant of the matrix whose columns are `c0, c1, c2`.
pub fn det_columns<T: Real>(c0: &Vec3<T>, c1: &Vec3<T>, c2: &Vec3<T>) -> T {
    det3(&[[c0[0], c1[0], c2[0]], [c0[1], c1[1], c2[1]], [c0[2], c1[2], c2[2]]])
}

pub fn inverse<T: Real>(a: &Mat3<T>) -> Option<Mat3<T>> {
    let det = det3(a);
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    Some(std::array::from_fn(|i| std::array::from_fn(|j| adj[i][j] / det)))
}

/// Lower-triangular Cholesky factor `L` with `a = L Lᵀ`; `None` if a pivot is not positive.
pub fn cholesky<T: Real>(a: &Mat3<T>) -> Option<Mat3<T>> {
    let mut l = zeros::<T>();
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix with non-zero diagonal.
pub fn lower_inverse<T: Real>(l: &Mat3<T>) -> Mat3<T> {
    let mut inv = zeros::<T>();
    for i in 0..3 {
        inv[i][i] = T::one() / l[i][i];
        for j in 0..i {
            let mut s = T::zero();
            for k in j..i {
                s += l[i][k] * inv[k][j];
            }
            inv[i][j] = -s / l[i][i];
        }
    }
    inv
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second component.
pub fn sym_eigen<T: Real>(a: &Mat3<T>) -> (Vec3<T>, Mat3<T>) {
    let mut m = *a;
    let mut v = identity::<T>();
    let scale = frobenius(a);
    for _sweep in 0..64 {
        let off = (m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2]).sqrt();
        if off <= T::epsilon() * lit(1e-2) * scale || off == T::zero() {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if m[p][q] == T::zero() {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (lit::<T>(2.0) * m[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            for k in 0..3 {
                let mkp = m[k][p];
                let mkq = m[k][q];
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let mpk = m[p][k];
                let mqk = m[q][k];
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
            for k in 0..3 {
                let vkp = v[k][p];
                let vkq = v[k][q];
                v[k][p] = c * vkp - s * vkq;
                v[k][q] = s * vkp + c * vkq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = order.map(|i| m[i][i]);
    let vecs = std::array::from_fn(|r| std::array::from_fn(|c| v[r][order[c]]));
    (vals, vecs)
}

pub fn frobenius<T: Real>(a: &Mat3<T>) -> T {
    a.iter().flatten().map(|&x| x * x).sum::<T>().sqrt()
}

pub fn scale<T: Real>(a: &Mat3<T>, s: T) -> Mat3<T> {
    a.map(|row| row.map(|x| x * s))
}

pub fn is_diagonal<T: Real>(a: &Mat3<T>) -> bool {
    (0..3).all(|i| (0..3).all(|j| i == j || a[i][j] == T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_eigen_reconstructs_matrix() {
        let a: Mat3<f64> = [[4.0, 1.0, -2.0], [1.0, 3.0, 0.5], [-2.0, 0.5, 6.0]];
        let (vals, vecs) = sym_eigen(&a);
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        let d = diag(vals);
        let back = mat_mul(&mat_mul(&vecs, &d), &transpose(&vecs));
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[i][j] - a[i][j]).abs() < 1e-13);
            }
        }
        let trace: f64 = vals.iter().sum();
        assert!((trace - 13.0).abs() < 1e-13);
    }

    #[test]
    fn cholesky_and_inverse() {
        let a: Mat3<f64> = [[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 0.8]];
        let l = cholesky(&a).unwrap();
        let back = mat_mul(&l, &transpose(&l));
        let li = lower_inverse(&l);
        let id = mat_mul(&li, &l);
        let inv = inverse(&a).unwrap();
        let id2 = mat_mul(&inv, &a);
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[i][j] - a[i][j]).abs() < 1e-14);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i][j] - e).abs() < 1e-14);
                assert!((id2[i][j] - e).abs() < 1e-13);
            }
        }
        assert!(cholesky(&[[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_none());
    }
}
