use serde::{Deserialize, Serialize};

use super::background::FlowBackground;
use super::path::{flat_point, l_plus, BvpOptions};
use crate::error::{LabError, Result};
use crate::scalar::{lit, Real};

/// L₊(·, s) sampled on the cube `{c + h·k : k ∈ {−m..m}ⁿ}` around the base point `c = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LPlusField<T> {
    pub s: T,
    pub spacing: T,
    pub half_width: usize,
    pub dim: usize,
    /// Row-major over the grid, last axis fastest.
    pub values: Vec<T>,
}

impl<T: Real> LPlusField<T> {
    fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Integer offsets `k` of the flat index `i`.
    pub fn offsets(&self, mut i: usize) -> Vec<isize> {
        let side = self.side();
        let mut k = vec![0isize; self.dim];
        for a in (0..self.dim).rev() {
            k[a] = (i % side) as isize - self.half_width as isize;
            i /= side;
        }
        k
    }

    pub fn point(&self, i: usize) -> Vec<T> {
        self.offsets(i).iter().map(|k| self.spacing * lit::<T>(*k as f64)).collect()
    }

    fn index(&self, k: &[isize]) -> usize {
        let side = self.side() as isize;
        k.iter().fold(0isize, |acc, ki| acc * side + ki + self.half_width as isize) as usize
    }

    fn at(&self, k: &[isize]) -> T {
        self.values[self.index(k)]
    }

    /// Central-difference Hessian at offset `k` with stencil `step·h`.
    fn hessian(&self, k: &[isize], step: isize) -> Vec<T> {
        let n = self.dim;
        let h = self.spacing * lit::<T>(step as f64);
        let mut out = vec![T::zero(); n * n];
        let shifted = |d: &[(usize, isize)]| {
            let mut q = k.to_vec();
            for (a, s) in d {
                q[*a] += s * step;
            }
            self.at(&q)
        };
        let c = self.at(k);
        for a in 0..n {
            out[a * n + a] = (shifted(&[(a, 1)]) - lit::<T>(2.0) * c + shifted(&[(a, -1)])) / (h * h);
            for b in 0..a {
                let v = (shifted(&[(a, 1), (b, 1)]) - shifted(&[(a, 1), (b, -1)]) - shifted(&[(a, -1), (b, 1)])
                    + shifted(&[(a, -1), (b, -1)]))
                    / (lit::<T>(4.0) * h * h);
                out[a * n + b] = v;
                out[b * n + a] = v;
            }
        }
        out
    }
}

/// Samples `L₊(x, s) = 2√s·l₊(x, s)` by solving the boundary value problem at every grid point.
pub fn lplus_field<T: Real>(
    bg: &FlowBackground<T>,
    s: T,
    spacing: T,
    half_width: usize,
    opts: &BvpOptions,
) -> Result<LPlusField<T>> {
    let FlowBackground::StaticFlat { dim } = bg else {
        return Err(LabError::Unsupported("L₊ fields are sampled on flat backgrounds only".into()));
    };
    bg.validate()?;
    if !(spacing > T::zero()) || half_width == 0 {
        return Err(LabError::Validation("grid needs positive spacing and half width ≥ 1".into()));
    }
    let mut field = LPlusField { s, spacing, half_width, dim: *dim, values: Vec::new() };
    let total = (2 * half_width + 1).pow(*dim as u32);
    let mut values = Vec::with_capacity(total);
    for i in 0..total {
        let x = field.point(i);
        values.push(l_plus(&flat_point(&x), s, bg, opts)?.length);
    }
    field.values = values;
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpanderResidual<T> {
    /// Largest entry of `Rc − Hess L₊/(2√s) + g/(2s)` over the interior points.
    pub residual: T,
    /// Largest change of that tensor when the stencil is doubled.
    pub richardson_disagreement: T,
    pub points: usize,
}

/// Residual of the expanding-soliton equation `Rc − Hess L₊/(2√s) + g/(2s) = 0`
/// for a sampled field on a flat background.
pub fn expander_residual<T: Real>(bg: &FlowBackground<T>, field: &LPlusField<T>, tolerance: T) -> Result<ExpanderResidual<T>> {
    let FlowBackground::StaticFlat { dim } = bg else {
        return Err(LabError::Unsupported("expander residual is implemented for flat backgrounds".into()));
    };
    if *dim != field.dim || field.len() != field.side().pow(field.dim as u32) {
        return Err(LabError::Validation("field does not match the background dimension".into()));
    }
    if field.half_width < 2 {
        return Err(LabError::Validation("need half width ≥ 2 for the stencil comparison".into()));
    }
    let n = field.dim;
    let inv = T::one() / (lit::<T>(2.0) * field.s.sqrt());
    let tensor = |hess: &[T]| -> Vec<T> {
        let mut r = vec![T::zero(); n * n];
        for a in 0..n {
            for b in 0..n {
                r[a * n + b] = -hess[a * n + b] * inv;
            }
            r[a * n + a] += T::one() / (lit::<T>(2.0) * field.s);
        }
        r
    };
    let max_abs = |v: &[T]| v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let m = field.half_width as isize;
    let mut residual = T::zero();
    let mut disagreement = T::zero();
    let mut points = 0;
    for i in 0..field.len() {
        let k = field.offsets(i);
        if k.iter().any(|x| x.abs() > m - 1) {
            continue;
        }
        points += 1;
        let fine = tensor(&field.hessian(&k, 1));
        residual = residual.max(max_abs(&fine));
        if k.iter().all(|x| x.abs() <= m - 2) {
            let coarse = tensor(&field.hessian(&k, 2));
            let diff: Vec<T> = fine.iter().zip(&coarse).map(|(a, b)| *a - *b).collect();
            disagreement = disagreement.max(max_abs(&diff));
        }
    }
    if disagreement > tolerance {
        return Err(LabError::Validation(format!(
            "grid too coarse: stencil comparison differs by {disagreement} (tolerance {tolerance}) on {points} points"
        )));
    }
    Ok(ExpanderResidual { residual, richardson_disagreement: disagreement, points })
}
