use serde::{Deserialize, Serialize};

use super::background::FlowBackground;
use super::dense::SqMat;
use super::path::{ShootOptions, Shooter};
use crate::error::{LabError, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianOptions {
    /// Initial finite-difference step in `V`.
    pub step: f64,
    /// Relative agreement required between steps `h` and `h/2`.
    pub rel_tol: f64,
    pub max_halvings: usize,
}

impl Default for JacobianOptions {
    fn default() -> Self {
        Self { step: 1e-3, rel_tol: 1e-6, max_halvings: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianEstimate<T> {
    pub value: T,
    pub step: T,
    /// `|𝕁(h/2) − 𝕁(h)|/3`.
    pub richardson_error: T,
    /// L₊ of the central geodesic.
    pub length: T,
}

impl<T: Real> Shooter<'_, T> {
    /// `det dL₊exp_τ` at `V` (orthonormal coordinates `w`), as a density on
    /// `(T_pM, g(0)) → (M, g(τ))`. Returns the value and the central length.
    pub(crate) fn jacobian_at(&self, w: &[T], tau: T, h: T, sqrt_det: T) -> Result<(T, T)> {
        let (base_inv, length) = self.base(w, tau)?;
        Ok((self.jacobian_with(w, tau, h, &base_inv, sqrt_det)?, length))
    }

    fn base(&self, w: &[T], tau: T) -> Result<(SqMat<T>, T)> {
        let (base, length) = self.endpoint(&self.frame_vector(w), tau)?;
        let inv = base.inverse().ok_or_else(|| LabError::Domain("singular endpoint".into()))?;
        Ok((inv, length))
    }

    fn jacobian_with(&self, w: &[T], tau: T, h: T, base_inv: &SqMat<T>, sqrt_det: T) -> Result<T> {
        let n = self.dim;
        let mut z = SqMat::zeros(n);
        for k in 0..n {
            let mut wp = w.to_vec();
            let mut wm = w.to_vec();
            wp[k] += h;
            wm[k] -= h;
            let (p, _) = self.endpoint(&self.frame_vector(&wp), tau)?;
            let (m, _) = self.endpoint(&self.frame_vector(&wm), tau)?;
            let col = self.body_difference(base_inv, &p, &m, h);
            for i in 0..n {
                z.set(i, k, col[i]);
            }
        }
        Ok(z.det() * sqrt_det)
    }

    pub(crate) fn sqrt_det_at(&self, tau: T) -> Result<T> {
        let g = self.bg.inertia(tau)?;
        Ok(SqMat::from_slice(self.dim, &g).det().sqrt())
    }

    pub(crate) fn jacobian_richardson(&self, w: &[T], tau: T, opts: &JacobianOptions) -> Result<JacobianEstimate<T>> {
        let sqrt_det = self.sqrt_det_at(tau)?;
        let scale = w.iter().map(|x| *x * *x).sum::<T>().sqrt().max(T::one());
        let mut h = lit::<T>(opts.step) * scale;
        let (base_inv, length) = self.base(w, tau)?;
        let mut coarse = self.jacobian_with(w, tau, h, &base_inv, sqrt_det)?;
        let mut best = None;
        for _ in 0..=opts.max_halvings {
            let fine = self.jacobian_with(w, tau, h * lit(0.5), &base_inv, sqrt_det)?;
            let err = (fine - coarse).abs() / lit(3.0);
            let est = JacobianEstimate { value: fine, step: h * lit(0.5), richardson_error: err, length };
            if err <= lit::<T>(opts.rel_tol) * fine.abs() {
                best = Some(est);
                break;
            }
            if best.as_ref().is_none_or(|b: &JacobianEstimate<T>| err < b.richardson_error) {
                best = Some(est);
            }
            coarse = fine;
            h *= lit(0.5);
        }
        let est = best.expect("at least one refinement");
        if !(est.value > T::zero()) {
            return Err(LabError::Domain(format!(
                "𝕁₊ = {} ≤ 0: V lies beyond the first conjugate point",
                est.value
            )));
        }
        Ok(est)
    }
}

/// `𝕁₊(τ, V)` for `V` given in `g(0)`-orthonormal coordinates, with the
/// finite-difference step refined until two successive steps agree.
pub fn jacobian_jplus<T: Real>(
    v: &[T],
    tau: T,
    bg: &FlowBackground<T>,
    shoot: &ShootOptions,
    opts: &JacobianOptions,
) -> Result<JacobianEstimate<T>> {
    let mut shooter = Shooter::new(bg, *shoot)?;
    if v.len() != shooter.dim {
        return Err(LabError::Validation(format!("V must have {} components", shooter.dim)));
    }
    shooter.prepare(tau)?;
    shooter.jacobian_richardson(v, tau, opts)
}
