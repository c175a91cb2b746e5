use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::Vec3;
use crate::scalar::{lit, Real};

/// Named unimodular 3-geometries with fixed Milnor constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "SU2")]
    Su2,
    Nil,
    Sol,
    Abelian,
    Custom,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Su2 => "SU2",
            ModelKind::Nil => "Nil",
            ModelKind::Sol => "Sol",
            ModelKind::Abelian => "Abelian",
            ModelKind::Custom => "custom",
        }
    }
}

/// A three-dimensional unimodular Lie algebra in a Milnor frame:
/// `[e_i, e_j] = λ_k e_k` for `(i, j, k)` a cyclic permutation of `(1, 2, 3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousModel<T> {
    pub kind: ModelKind,
    pub lambda: Vec3<T>,
}

impl<T: Real> HomogeneousModel<T> {
    /// SU(2) normalized so that the identity metric is the unit round 3-sphere.
    pub fn su2() -> Self {
        Self::named(ModelKind::Su2)
    }

    pub fn nil() -> Self {
        Self::named(ModelKind::Nil)
    }

    pub fn sol() -> Self {
        Self::named(ModelKind::Sol)
    }

    pub fn abelian() -> Self {
        Self::named(ModelKind::Abelian)
    }

    pub fn named(kind: ModelKind) -> Self {
        let lambda = match kind {
            ModelKind::Su2 => [2.0, 2.0, 2.0],
            ModelKind::Nil => [1.0, 0.0, 0.0],
            ModelKind::Sol => [1.0, -1.0, 0.0],
            ModelKind::Abelian | ModelKind::Custom => [0.0, 0.0, 0.0],
        };
        Self { kind, lambda: lambda.map(lit) }
    }

    pub fn custom(lambda: Vec3<T>) -> Result<Self> {
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(LabError::Validation("custom structure constants must be finite".into()));
        }
        Ok(Self { kind: ModelKind::Custom, lambda })
    }

    /// Structure constants `c[i][j][k]` with `[e_i, e_j] = Σ_k c[i][j][k] e_k` (0-based).
    pub fn structure_constants(&self) -> [[[T; 3]; 3]; 3] {
        let mut c = [[[T::zero(); 3]; 3]; 3];
        for k in 0..3 {
            let i = (k + 1) % 3;
            let j = (k + 2) % 3;
            c[i][j][k] = self.lambda[k];
            c[j][i][k] = -self.lambda[k];
        }
        c
    }

    /// Bracket of two Lie-algebra vectors given in frame coordinates.
    pub fn bracket(&self, x: &Vec3<T>, y: &Vec3<T>) -> Vec3<T> {
        let l = &self.lambda;
        [
            l[0] * (x[1] * y[2] - x[2] * y[1]),
            l[1] * (x[2] * y[0] - x[0] * y[2]),
            l[2] * (x[0] * y[1] - x[1] * y[0]),
        ]
    }

    /// Coadjoint action `(ad*_ξ m)_j = m([ξ, e_j])`.
    pub fn coadjoint(&self, xi: &Vec3<T>, m: &Vec3<T>) -> Vec3<T> {
        std::array::from_fn(|j| {
            let mut e = [T::zero(); 3];
            e[j] = T::one();
            let b = self.bracket(xi, &e);
            m[0] * b[0] + m[1] * b[1] + m[2] * b[2]
        })
    }

    /// Same model with the frame axes permuted: new axis `a` is old axis `perm[a]`.
    ///
    /// Odd permutations reverse orientation, which flips the sign of every
    /// structure constant in the cyclic convention.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let odd = permutation_is_odd(perm);
        let lambda = std::array::from_fn(|a| if odd { -self.lambda[perm[a]] } else { self.lambda[perm[a]] });
        Self { kind: self.kind, lambda }
    }
}

pub(crate) fn permutation_is_odd(perm: [usize; 3]) -> bool {
    let mut inversions = 0;
    for i in 0..3 {
        for j in i + 1..3 {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 1
}
