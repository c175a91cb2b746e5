use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{self, Mat3, Vec3};
use crate::scalar::{lit, to_f64, Real};

/// Smallest metric eigenvalue must exceed this fraction of the largest.
pub const DEGENERACY_RATIO: f64 = 1e-13;

/// Left-invariant inner product on the Lie algebra, expressed in the Milnor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat3<T>", into = "Mat3<T>")]
#[serde(bound = "T: Real")]
pub struct FrameMetric<T> {
    entries: Mat3<T>,
    diagonal: bool,
}

impl<T: Real> FrameMetric<T> {
    /// Validates symmetry and positive-definiteness.
    pub fn new(entries: Mat3<T>) -> Result<Self> {
        if entries.iter().flatten().any(|x| !x.is_finite()) {
            return Err(LabError::Validation("metric entries must be finite".into()));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let tol = lit::<T>(1e-12) * (entries[i][i].abs() + entries[j][j].abs());
                if (entries[i][j] - entries[j][i]).abs() > tol {
                    return Err(LabError::Validation(format!("metric not symmetric at ({i},{j})")));
                }
            }
        }
        let mut sym = entries;
        for i in 0..3 {
            for j in i + 1..3 {
                let avg = (entries[i][j] + entries[j][i]) * lit(0.5);
                sym[i][j] = avg;
                sym[j][i] = avg;
            }
        }
        let (eigs, _) = linalg::sym_eigen(&sym);
        if !(eigs[0] > lit::<T>(DEGENERACY_RATIO) * eigs[2]) || !(eigs[2] > T::zero()) {
            return Err(LabError::Degenerate { min_eig: to_f64(eigs[0]), max_eig: to_f64(eigs[2]) });
        }
        Ok(Self { entries: sym, diagonal: linalg::is_diagonal(&sym) })
    }

    pub fn diagonal(d: Vec3<T>) -> Result<Self> {
        Self::new(linalg::diag(d))
    }

    pub fn identity() -> Self {
        Self { entries: linalg::identity(), diagonal: true }
    }

    pub fn entries(&self) -> &Mat3<T> {
        &self.entries
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn diag_entries(&self) -> Vec3<T> {
        [self.entries[0][0], self.entries[1][1], self.entries[2][2]]
    }

    /// `Q·g`; `Q` must be positive.
    pub fn scaled(&self, q: T) -> Result<Self> {
        if !(q > T::zero()) || !q.is_finite() {
            return Err(LabError::Validation("metric scale factor must be positive".into()));
        }
        Ok(Self { entries: linalg::scale(&self.entries, q), diagonal: self.diagonal })
    }

    /// Frame axes permuted: new axis `a` is old axis `perm[a]`.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let entries = std::array::from_fn(|a| std::array::from_fn(|b| self.entries[perm[a]][perm[b]]));
        Self { entries, diagonal: self.diagonal }
    }

    pub fn det(&self) -> T {
        linalg::det3(&self.entries)
    }
}

impl<T: Real> TryFrom<Mat3<T>> for FrameMetric<T> {
    type Error = LabError;
    fn try_from(m: Mat3<T>) -> Result<Self> {
        Self::new(m)
    }
}

impl<T: Real> From<FrameMetric<T>> for Mat3<T> {
    fn from(g: FrameMetric<T>) -> Self {
        g.entries
    }
}
