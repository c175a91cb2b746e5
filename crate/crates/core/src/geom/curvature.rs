//! Curvature of left-invariant metrics via the Koszul formula.
//!
//! The frame is orthonormalized with a Cholesky factor `g = L Lᵀ`, so for a
//! diagonal metric the orthonormal frame stays aligned with the Milnor axes
//! and `ricci_eigs[i]` is the principal Ricci curvature of axis `i`.

use serde::{Deserialize, Serialize};

use super::{FrameMetric, HomogeneousModel};
use crate::error::{LabError, Result};
use crate::linalg::{self, Mat3, Vec3};
use crate::scalar::{lit, Real};

/// Curvature quantities of one left-invariant metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport<T> {
    /// Eigenvalues of the Ricci operator (axis order for diagonal metrics, ascending otherwise).
    pub ricci_eigs: Vec3<T>,
    pub scalar: T,
    /// Frobenius norm of the (0,4) curvature tensor in an orthonormal frame.
    pub rm_norm: T,
    pub rc_norm: T,
    /// `|Rc − (R/3) g|²`.
    pub traceless_norm_sq: T,
}

impl<T: Real> CurvatureReport<T> {
    pub fn flat() -> Self {
        Self {
            ricci_eigs: [T::zero(); 3],
            scalar: T::zero(),
            rm_norm: T::zero(),
            rc_norm: T::zero(),
            traceless_norm_sq: T::zero(),
        }
    }

    pub fn from_ricci_eigs(ricci_eigs: Vec3<T>, rm_norm: T) -> Self {
        let scalar = ricci_eigs[0] + ricci_eigs[1] + ricci_eigs[2];
        let third = scalar / lit(3.0);
        let rc_norm = ricci_eigs.iter().map(|&r| r * r).sum::<T>().sqrt();
        let traceless_norm_sq = ricci_eigs.iter().map(|&r| (r - third) * (r - third)).sum();
        Self { ricci_eigs, scalar, rm_norm, rc_norm, traceless_norm_sq }
    }

    pub fn min_ricci(&self) -> T {
        self.ricci_eigs[0].min(self.ricci_eigs[1]).min(self.ricci_eigs[2])
    }

    pub fn max_abs_ricci(&self) -> T {
        self.ricci_eigs.iter().fold(T::zero(), |m, r| m.max(r.abs()))
    }

    /// Report of the metric `Q·g`: every curvature quantity scales by `1/Q`.
    pub fn rescaled(&self, q: T) -> Self {
        let inv = T::one() / q;
        Self {
            ricci_eigs: self.ricci_eigs.map(|r| r * inv),
            scalar: self.scalar * inv,
            rm_norm: self.rm_norm * inv,
            rc_norm: self.rc_norm * inv,
            traceless_norm_sq: self.traceless_norm_sq * inv * inv,
        }
    }
}

/// Full curvature data, including the Ricci tensor in the Milnor frame.
#[derive(Debug, Clone, Copy)]
pub struct Curvature<T> {
    pub report: CurvatureReport<T>,
    /// Covariant Ricci tensor `Rc(e_i, e_j)` in the Milnor frame.
    pub ricci_frame: Mat3<T>,
}

/// Curvature of `(model, g)`.
pub fn compute_curvature<T: Real>(model: &HomogeneousModel<T>, g: &FrameMetric<T>) -> CurvatureReport<T> {
    curvature_of_entries(model, g.entries(), g.is_diagonal())
        .expect("validated frame metric admits a Cholesky factor")
        .report
}

/// Koszul computation on raw metric entries; `None` if `g` has no Cholesky factor.
pub fn curvature_of_entries<T: Real>(
    model: &HomogeneousModel<T>,
    g: &Mat3<T>,
    diagonal: bool,
) -> Option<Curvature<T>> {
    let l = linalg::cholesky(g)?;
    let l_inv = linalg::lower_inverse(&l);
    // f_a = Σ_i p[i][a] e_i with p = L^{-T}; e_k = Σ_c l[k][c] f_c.
    let p = linalg::transpose(&l_inv);
    let c = model.structure_constants();

    // C[a][b][d]: [f_a, f_b] = Σ_d C[a][b][d] f_d.
    let mut cf = [[[T::zero(); 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let w = p[i][a] * p[j][b];
                    if w == T::zero() {
                        continue;
                    }
                    for k in 0..3 {
                        if c[i][j][k] == T::zero() {
                            continue;
                        }
                        for d in 0..3 {
                            cf[a][b][d] += w * c[i][j][k] * l[k][d];
                        }
                    }
                }
            }
        }
    }

    // Γ[a][b][d] = <∇_{f_a} f_b, f_d>
    let half = lit::<T>(0.5);
    let gamma: [[[T; 3]; 3]; 3] = std::array::from_fn(|a| {
        std::array::from_fn(|b| std::array::from_fn(|d| half * (cf[a][b][d] - cf[b][d][a] + cf[d][a][b])))
    });

    // rm[a][b][c][e] = <R(f_a, f_b) f_c, f_e>,
    // R(X,Y)Z = ∇_X ∇_Y Z − ∇_Y ∇_X Z − ∇_[X,Y] Z.
    let mut rm = [[[[T::zero(); 3]; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for cc in 0..3 {
                for e in 0..3 {
                    let mut s = T::zero();
                    for d in 0..3 {
                        s += gamma[b][cc][d] * gamma[a][d][e] - gamma[a][cc][d] * gamma[b][d][e]
                            - cf[a][b][d] * gamma[d][cc][e];
                    }
                    rm[a][b][cc][e] = s;
                }
            }
        }
    }

    let mut ric = linalg::zeros::<T>();
    for b in 0..3 {
        for cc in 0..3 {
            ric[b][cc] = (0..3).map(|a| rm[a][b][cc][a]).sum();
        }
    }
    // Symmetrize away round-off.
    for b in 0..3 {
        for cc in b + 1..3 {
            let avg = (ric[b][cc] + ric[cc][b]) * half;
            ric[b][cc] = avg;
            ric[cc][b] = avg;
        }
    }
    let rm_norm = rm.iter().flatten().flatten().flatten().map(|&x| x * x).sum::<T>().sqrt();

    let ricci_eigs = if diagonal {
        [ric[0][0], ric[1][1], ric[2][2]]
    } else {
        linalg::sym_eigen(&ric).0
    };
    // Back to the Milnor frame: Rc_e = L Ric_f Lᵀ.
    let ricci_frame = linalg::mat_mul(&linalg::mat_mul(&l, &ric), &linalg::transpose(&l));
    Some(Curvature { report: CurvatureReport::from_ricci_eigs(ricci_eigs, rm_norm), ricci_frame })
}

/// `min_i r_i − εR`; non-negative iff `Rc ≥ εRg` holds.
pub fn pinching_margin<T: Real>(report: &CurvatureReport<T>, epsilon: T) -> T {
    report.min_ricci() - epsilon * report.scalar
}

/// Largest `ε` with `Rc ≥ εRg`, when the Ricci curvature is positive.
pub fn max_epsilon<T: Real>(report: &CurvatureReport<T>) -> Option<T> {
    let min = report.min_ricci();
    if report.scalar > T::zero() && min > T::zero() {
        Some(min / report.scalar)
    } else {
        None
    }
}

/// `R^{σ−2} |Rc − (R/3) g|²`.
pub fn f_sigma<T: Real>(report: &CurvatureReport<T>, sigma: T) -> Result<T> {
    if !(report.scalar > T::zero()) {
        return Err(LabError::Domain(format!(
            "f_sigma needs positive scalar curvature (R = {})",
            report.scalar
        )));
    }
    Ok(report.scalar.powf(sigma - lit(2.0)) * report.traceless_norm_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::milnor::milnor_ricci;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn flat_report_is_zero() {
        let r = compute_curvature(&HomogeneousModel::<f64>::abelian(), &FrameMetric::identity());
        assert_eq!(r, CurvatureReport::flat());
        assert_eq!(pinching_margin(&r, 0.2), 0.0);
        assert!(f_sigma(&r, 0.1).is_err());
        assert!(max_epsilon(&r).is_none());
    }

    #[test]
    fn round_sphere() {
        let r = compute_curvature(&HomogeneousModel::su2(), &FrameMetric::identity());
        for x in r.ricci_eigs {
            assert!(close(x, 2.0, 1e-14));
        }
        assert!(close(r.scalar, 6.0, 1e-14));
        assert!(close(r.rm_norm, 2.0 * 3f64.sqrt(), 1e-14));
        assert!(pinching_margin(&r, 1.0 / 3.0).abs() < 1e-14);
        assert!(close(max_epsilon(&r).unwrap(), 1.0 / 3.0, 1e-14));
        assert!(f_sigma(&r, 0.3).unwrap().abs() < 1e-28);
    }

    #[test]
    fn nil_identity() {
        let r = compute_curvature(&HomogeneousModel::nil(), &FrameMetric::identity());
        let expected = [0.5, -0.5, -0.5];
        for i in 0..3 {
            assert!(close(r.ricci_eigs[i], expected[i], 1e-15));
        }
        assert!(close(r.scalar, -0.5, 1e-15));
        assert!(close(pinching_margin(&r, 0.1), -0.45, 1e-15));
        assert!(max_epsilon(&r).is_none());
    }

    #[test]
    fn squashed_sphere_matches_closed_form() {
        let d = [1.2, 1.0, 0.9];
        let g = FrameMetric::diagonal(d).unwrap();
        let r = compute_curvature(&HomogeneousModel::su2(), &g);
        let oracle = milnor_ricci([2.0, 2.0, 2.0], d);
        for i in 0..3 {
            assert!(close(r.ricci_eigs[i], oracle[i], 1e-13));
        }
        let eps = max_epsilon(&r).unwrap();
        let oracle_eps = oracle.iter().cloned().fold(f64::MAX, f64::min) / oracle.iter().sum::<f64>();
        assert!(eps > 0.0 && eps < 1.0 / 3.0);
        assert!(close(eps, oracle_eps, 1e-13));

        let sigma = 0.05;
        let rs: f64 = oracle.iter().sum();
        let e2: f64 = oracle.iter().map(|x| (x - rs / 3.0).powi(2)).sum();
        let f = f_sigma(&r, sigma).unwrap();
        assert!(f > 0.0);
        assert!(close(f, rs.powf(sigma - 2.0) * e2, 1e-12));
    }

    #[test]
    fn nondiagonal_metric_is_similarity_invariant() {
        // Rotating a round metric within the SU(2) frame is an isometry (bi-invariance).
        let g = FrameMetric::new([[1.3, 0.2, -0.1], [0.2, 0.9, 0.05], [-0.1, 0.05, 1.1]]).unwrap();
        let r = compute_curvature(&HomogeneousModel::su2(), &g);
        assert!(close(r.scalar, r.ricci_eigs.iter().sum(), 1e-15));
        assert!(r.ricci_eigs[0] <= r.ricci_eigs[1] && r.ricci_eigs[1] <= r.ricci_eigs[2]);
        let c = curvature_of_entries(&HomogeneousModel::su2(), g.entries(), false).unwrap();
        // trace of g^{-1} Rc equals R
        let gi = linalg::inverse(g.entries()).unwrap();
        let tr: f64 = (0..3).map(|i| (0..3).map(|j| gi[i][j] * c.ricci_frame[j][i]).sum::<f64>()).sum();
        assert!(close(tr, r.scalar, 1e-13));
    }

    #[test]
    fn works_in_single_precision() {
        let g = FrameMetric::<f32>::diagonal([1.2, 1.0, 0.9]).unwrap();
        let r = compute_curvature(&HomogeneousModel::su2(), &g);
        let oracle = milnor_ricci([2.0, 2.0, 2.0], [1.2, 1.0, 0.9]);
        for i in 0..3 {
            assert!((r.ricci_eigs[i] as f64 - oracle[i]).abs() < 1e-5);
        }
    }
}
