use serde::{Deserialize, Serialize};

use super::dense::{solve_spd, SqMat};
use crate::error::{LabError, Result};
use crate::flow::FlowTrajectory;
use crate::geom::{compute_curvature, curvature_of_entries, HomogeneousModel};
use crate::scalar::{lit, Real};

/// Ambient Ricci flow `g(η)`, `η ∈ [0, horizon)`, on which L₊ is measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", tag = "kind", rename_all = "snake_case")]
pub enum FlowBackground<T> {
    /// Euclidean `ℝⁿ`, `n ∈ {1, 2, 3}`, constant in time.
    StaticFlat { dim: usize },
    /// `g(η) = (A₀ − 4η)·ĝ` on the unit three-sphere.
    ShrinkingRoundS3 { a0: T },
    /// A stored homogeneous run; `η` is measured from its first time.
    HomogeneousNumeric { trajectory: Box<FlowTrajectory<T>> },
}

impl<T: Real> FlowBackground<T> {
    pub fn flat(dim: usize) -> Self {
        Self::StaticFlat { dim }
    }

    pub fn round(a0: T) -> Self {
        Self::ShrinkingRoundS3 { a0 }
    }

    pub fn numeric(trajectory: FlowTrajectory<T>) -> Self {
        Self::HomogeneousNumeric { trajectory: Box::new(trajectory) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::StaticFlat { dim } if !(1..=3).contains(dim) => {
                Err(LabError::Unsupported(format!("flat background of dimension {dim} (supported: 1, 2, 3)")))
            }
            Self::ShrinkingRoundS3 { a0 } if !(*a0 > T::zero()) || !a0.is_finite() => {
                Err(LabError::Validation(format!("round background needs A₀ > 0, got {a0}")))
            }
            Self::HomogeneousNumeric { trajectory } if trajectory.len() < 2 => {
                Err(LabError::Validation("numeric background needs at least two stored states".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::StaticFlat { dim } => *dim,
            _ => 3,
        }
    }

    /// Supremum of admissible `η` (exclusive for the round sphere).
    pub fn horizon(&self) -> T {
        match self {
            Self::StaticFlat { .. } => T::infinity(),
            Self::ShrinkingRoundS3 { a0 } => *a0 / lit(4.0),
            Self::HomogeneousNumeric { trajectory } => trajectory.t_last() - trajectory.t_first(),
        }
    }

    pub fn check_time(&self, eta: T) -> Result<()> {
        let h = self.horizon();
        let ok = match self {
            Self::ShrinkingRoundS3 { .. } => eta >= T::zero() && eta < h,
            _ => eta >= T::zero() && eta <= h,
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::OutOfWindow(format!("η = {eta} outside the background window [0, {h})")))
        }
    }

    pub(crate) fn algebra(&self) -> Algebra<T> {
        match self {
            Self::StaticFlat { dim } => Algebra::Abelian(*dim),
            Self::ShrinkingRoundS3 { .. } => Algebra::Model(HomogeneousModel::su2()),
            Self::HomogeneousNumeric { trajectory } => Algebra::Model(trajectory.model),
        }
    }

    /// Metric `G(η)` in the frame, row-major `n×n`.
    pub fn inertia(&self, eta: T) -> Result<Vec<T>> {
        self.check_time(eta)?;
        Ok(match self {
            Self::StaticFlat { dim } => SqMat::identity(*dim).a,
            Self::ShrinkingRoundS3 { a0 } => SqMat::identity(3).scale(*a0 - lit::<T>(4.0) * eta).a,
            Self::HomogeneousNumeric { trajectory } => {
                let g = trajectory.metric_at(trajectory.t_first() + eta)?;
                g.entries().iter().flatten().copied().collect()
            }
        })
    }

    pub fn scalar(&self, eta: T) -> Result<T> {
        self.check_time(eta)?;
        Ok(match self {
            Self::StaticFlat { .. } => T::zero(),
            Self::ShrinkingRoundS3 { a0 } => lit::<T>(6.0) / (*a0 - lit::<T>(4.0) * eta),
            Self::HomogeneousNumeric { trajectory } => {
                let g = trajectory.metric_at(trajectory.t_first() + eta)?;
                compute_curvature(&trajectory.model, &g).scalar
            }
        })
    }

    /// Inertia and scalar curvature together (one interpolation for numeric runs).
    pub(crate) fn state(&self, eta: T) -> Option<(Vec<T>, T)> {
        match self {
            Self::HomogeneousNumeric { trajectory } => {
                self.check_time(eta).ok()?;
                let g = trajectory.metric_at(trajectory.t_first() + eta).ok()?;
                let r = compute_curvature(&trajectory.model, &g).scalar;
                Some((g.entries().iter().flatten().copied().collect(), r))
            }
            _ => Some((self.inertia(eta).ok()?, self.scalar(eta).ok()?)),
        }
    }

    /// Ricci tensor as a bilinear form in the frame, row-major.
    pub fn ricci(&self, eta: T) -> Result<Vec<T>> {
        self.check_time(eta)?;
        Ok(match self {
            Self::StaticFlat { dim } => vec![T::zero(); dim * dim],
            Self::ShrinkingRoundS3 { .. } => SqMat::identity(3).scale(lit(2.0)).a,
            Self::HomogeneousNumeric { trajectory } => {
                let g = trajectory.metric_at(trajectory.t_first() + eta)?;
                let c = curvature_of_entries(&trajectory.model, g.entries(), g.is_diagonal())
                    .ok_or_else(|| LabError::Domain("degenerate background metric".into()))?;
                c.ricci_frame.iter().flatten().copied().collect()
            }
        })
    }

    /// Spatial gradient of R; zero on every supported background.
    pub fn scalar_gradient(&self, eta: T) -> Result<Vec<T>> {
        self.check_time(eta)?;
        Ok(vec![T::zero(); self.dim()])
    }
}

/// Lie algebra of the background's group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Algebra<T> {
    Abelian(usize),
    Model(HomogeneousModel<T>),
}

impl<T: Real> Algebra<T> {
    /// `(ad*_ξ m)_j = m([ξ, e_j])`.
    pub fn coadjoint(&self, xi: &[T], m: &[T], out: &mut [T]) {
        match self {
            Self::Abelian(_) => out.iter_mut().for_each(|v| *v = T::zero()),
            Self::Model(model) => {
                let r = model.coadjoint(&[xi[0], xi[1], xi[2]], &[m[0], m[1], m[2]]);
                out[..3].copy_from_slice(&r);
            }
        }
    }

    #[cfg(test)]
    pub fn bracket(&self, x: &[T], y: &[T], out: &mut [T]) {
        match self {
            Self::Abelian(_) => out.iter_mut().for_each(|v| *v = T::zero()),
            Self::Model(model) => {
                let r = model.bracket(&[x[0], x[1], x[2]], &[y[0], y[1], y[2]]);
                out[..3].copy_from_slice(&r);
            }
        }
    }
}

/// Faithful matrix representation of the algebra, used to track positions
/// through `dγ/du = γ·ρ(ξ)`.
#[derive(Debug, Clone)]
pub(crate) struct Representation<T> {
    pub size: usize,
    gens: Vec<SqMat<T>>,
    gram: Vec<T>,
}

impl<T: Real> Representation<T> {
    pub fn new(algebra: &Algebra<T>) -> Self {
        let gens = match algebra {
            Algebra::Abelian(n) => translations(*n),
            Algebra::Model(model) => {
                let nonzero: Vec<usize> = (0..3).filter(|&k| model.lambda[k] != T::zero()).collect();
                match nonzero.len() {
                    0 => translations(3),
                    1 => {
                        let c = nonzero[0];
                        let (a, b) = ((c + 1) % 3, (c + 2) % 3);
                        let mut g = vec![SqMat::zeros(4); 3];
                        g[a].set(0, 1, T::one());
                        g[b].set(1, 2, T::one());
                        g[c].set(0, 2, T::one() / model.lambda[c]);
                        g
                    }
                    _ => (0..3)
                        .map(|k| {
                            let mut e = [T::zero(); 3];
                            e[k] = T::one();
                            let mut m = SqMat::zeros(4);
                            for j in 0..3 {
                                let mut f = [T::zero(); 3];
                                f[j] = T::one();
                                let col = model.bracket(&e, &f);
                                for i in 0..3 {
                                    m.set(i, j, col[i]);
                                }
                            }
                            m
                        })
                        .collect(),
                }
            }
        };
        let k = gens.len();
        let mut gram = vec![T::zero(); k * k];
        for i in 0..k {
            for j in 0..k {
                gram[i * k + j] = gens[i].dot(&gens[j]);
            }
        }
        Self { size: gens[0].n, gens, gram }
    }

    pub fn of(&self, xi: &[T]) -> SqMat<T> {
        let mut m = SqMat::zeros(self.size);
        for (g, x) in self.gens.iter().zip(xi) {
            if *x != T::zero() {
                for (a, b) in m.a.iter_mut().zip(&g.a) {
                    *a += *x * *b;
                }
            }
        }
        m
    }

    pub fn of_into(&self, xi: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        for (g, x) in self.gens.iter().zip(xi) {
            if *x != T::zero() {
                for (a, b) in out.iter_mut().zip(&g.a) {
                    *a += *x * *b;
                }
            }
        }
    }

    /// Least-squares coordinates of `m` in the span of the generators.
    pub fn project(&self, m: &SqMat<T>) -> Vec<T> {
        let rhs: Vec<T> = self.gens.iter().map(|g| g.dot(m)).collect();
        solve_spd(self.gens.len(), &self.gram, &rhs).expect("generators are independent")
    }
}

fn translations<T: Real>(n: usize) -> Vec<SqMat<T>> {
    (0..n)
        .map(|k| {
            let mut m = SqMat::zeros(n + 1);
            m.set(k, n, T::one());
            m
        })
        .collect()
}
