//! Direct minimization of a discretized L₊ action over paths with fixed
//! endpoints, independent of the shooting equations.

use serde::{Deserialize, Serialize};

use super::background::{FlowBackground, Representation};
use super::dense::SqMat;
use super::path::LPlusPath;
use crate::error::{LabError, Result};
use crate::quadrature::simpson;
use crate::scalar::{from_usize, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    /// L-BFGS history length.
    pub memory: usize,
    pub fd_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { max_iterations: 3000, gradient_tol: 1e-9, memory: 12, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizedLength<T> {
    pub length: T,
    pub initial_length: T,
    pub iterations: usize,
    pub gradient_norm: T,
    pub converged: bool,
}

/// Discrete action of node sequences `γ_k = ref_k·exp(ρ(w_k))` at `u_k = k·Δu`.
struct Action<'a, T> {
    rep: &'a Representation<T>,
    reference: &'a [SqMat<T>],
    /// `G` at segment midpoints, row-major.
    inertia: Vec<Vec<T>>,
    du: T,
    dim: usize,
    potential: T,
}

impl<T: Real> Action<'_, T> {
    fn node(&self, k: usize, w: &[T]) -> SqMat<T> {
        let segments = self.reference.len() - 1;
        if k == 0 || k == segments {
            return self.reference[k].clone();
        }
        let n = self.dim;
        self.reference[k].mul(&self.rep_of(&w[(k - 1) * n..k * n]).expm())
    }

    fn rep_of(&self, x: &[T]) -> SqMat<T> {
        self.rep.of(x)
    }

    fn segment(&self, k: usize, a: &SqMat<T>, b: &SqMat<T>) -> T {
        let n = self.dim;
        let step = a.inverse().expect("group element").mul(b).log_near_identity();
        let xi: Vec<T> = self.rep.project(&step).iter().map(|x| *x / self.du).collect();
        let g = &self.inertia[k];
        let mut e = T::zero();
        for i in 0..n {
            for j in 0..n {
                e += xi[i] * g[i * n + j] * xi[j];
            }
        }
        lit::<T>(0.5) * e * self.du
    }

    fn value(&self, w: &[T]) -> T {
        let nodes: Vec<SqMat<T>> = (0..self.reference.len()).map(|k| self.node(k, w)).collect();
        let kinetic: T = nodes.windows(2).enumerate().map(|(k, p)| self.segment(k, &p[0], &p[1])).sum();
        kinetic + self.potential
    }

    /// Central differences, touching only the two segments adjacent to each node.
    fn gradient(&self, w: &[T], h: T) -> Vec<T> {
        let n = self.dim;
        let interior = self.reference.len() - 2;
        let nodes: Vec<SqMat<T>> = (0..self.reference.len()).map(|k| self.node(k, w)).collect();
        let mut grad = vec![T::zero(); w.len()];
        for k in 1..=interior {
            for a in 0..n {
                let idx = (k - 1) * n + a;
                let mut local = w[(k - 1) * n..k * n].to_vec();
                let mut cost = |d: T| {
                    local[a] = w[idx] + d;
                    let g = self.reference[k].mul(&self.rep_of(&local).expm());
                    self.segment(k - 1, &nodes[k - 1], &g) + self.segment(k, &g, &nodes[k + 1])
                };
                grad[idx] = (cost(h) - cost(-h)) / (lit::<T>(2.0) * h);
            }
        }
        grad
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Minimizes the discrete L₊ action over interior nodes, starting from the
/// nodes of `initial` (which fix the endpoints and the time grid). The
/// `perturbation` (one `n`-vector per interior node) is applied first, as
/// `γ_k ↦ γ_k·exp(ρ(w_k))`.
pub fn minimize_lplus_length<T: Real>(
    bg: &FlowBackground<T>,
    initial: &LPlusPath<T>,
    perturbation: &[T],
    opts: &MinimizeOptions,
) -> Result<MinimizedLength<T>> {
    bg.validate()?;
    let segments = initial.u.len().saturating_sub(1);
    let n = bg.dim();
    if segments < 2 {
        return Err(LabError::Validation("path needs at least two segments".into()));
    }
    if perturbation.len() != (segments - 1) * n {
        return Err(LabError::Validation(format!("perturbation needs {} entries", (segments - 1) * n)));
    }
    bg.check_time(initial.t)?;
    let rep = Representation::new(&bg.algebra());
    if rep.size != initial.rep_size {
        return Err(LabError::Validation("path was shot on a different background".into()));
    }
    let du = initial.u[1] - initial.u[0];
    let reference: Vec<SqMat<T>> = initial.positions.iter().map(|p| SqMat::from_slice(rep.size, p)).collect();
    let mut inertia = Vec::with_capacity(segments);
    for k in 0..segments {
        let u = (initial.u[k] + initial.u[k + 1]) * lit(0.5);
        inertia.push(bg.inertia(u * u)?);
    }
    // the potential term ∫ 2u²R du does not depend on the path
    let fine = 4 * segments;
    let hf = initial.t.sqrt() / from_usize(fine);
    let mut pot = Vec::with_capacity(fine + 1);
    for k in 0..=fine {
        let u = hf * from_usize(k);
        pot.push(lit::<T>(2.0) * u * u * bg.scalar(u * u)?);
    }
    let action = Action { rep: &rep, reference: &reference, inertia, du, dim: n, potential: simpson(&pot, hf) };

    let h = lit::<T>(opts.fd_step);
    let tol = lit::<T>(opts.gradient_tol);
    let mut x = perturbation.to_vec();
    let mut f = action.value(&x);
    let initial_length = f;
    let mut g = action.gradient(&x, h);
    let mut history: Vec<(Vec<T>, Vec<T>, T)> = Vec::new();
    let mut it = 0;
    let mut gnorm = dot(&g, &g).sqrt();
    while gnorm > tol && it < opts.max_iterations {
        it += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = *rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * *yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let scale = T::one() / gnorm.max(T::one());
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = *rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (*a - b) * *si);
        }
        let dir: Vec<T> = q.iter().map(|v| -*v).collect();
        let mut slope = dot(&g, &dir);
        let dir = if slope >= T::zero() {
            history.clear();
            slope = -dot(&g, &g);
            g.iter().map(|v| -*v).collect()
        } else {
            dir
        };
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<T> = x.iter().zip(&dir).map(|(a, d)| *a + step * *d).collect();
            let ft = action.value(&trial);
            if ft <= f + lit::<T>(1e-4) * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= lit(0.5);
        }
        let Some((xn, fnew)) = accepted else {
            break;
        };
        let gn = action.gradient(&xn, h);
        let s: Vec<T> = xn.iter().zip(&x).map(|(a, b)| *a - *b).collect();
        let y: Vec<T> = gn.iter().zip(&g).map(|(a, b)| *a - *b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y) {
            history.push((s, y, T::one() / sy));
            if history.len() > opts.memory {
                history.remove(0);
            }
        }
        let decrease = f - fnew;
        x = xn;
        f = fnew;
        g = gn;
        gnorm = dot(&g, &g).sqrt();
        if decrease <= T::epsilon() * f.abs() * lit(4.0) {
            break;
        }
    }
    Ok(MinimizedLength { length: f, initial_length, iterations: it, gradient_norm: gnorm, converged: gnorm <= tol })
}

/// `amplitude·sin(πk/N)·direction` at every interior node, flattened.
pub fn sinusoidal_perturbation<T: Real>(segments: usize, direction: &[T], amplitude: T) -> Vec<T> {
    let mut out = Vec::with_capacity((segments.saturating_sub(1)) * direction.len());
    for k in 1..segments {
        let s = (T::PI() * from_usize(k) / from_usize(segments)).sin() * amplitude;
        out.extend(direction.iter().map(|d| *d * s));
    }
    out
}
