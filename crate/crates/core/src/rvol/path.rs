use serde::{Deserialize, Serialize};

use super::background::{Algebra, FlowBackground, Representation};
use super::dense::{cholesky, solve_spd, SqMat};
use crate::error::{LabError, Result};
use crate::ode::{integrate_fixed, integrate_fixed_end};
use crate::quadrature::simpson;
use crate::scalar::{from_usize, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootOptions {
    /// Fixed Dormand–Prince steps in `u = √η` over `[0, √t]`.
    pub steps: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { steps: 128 }
    }
}

/// An L₊-geodesic from the base point, sampled on a uniform `u = √η` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LPlusPath<T> {
    pub t: T,
    /// Initial vector `V = lim √η γ′(η)` in frame components.
    pub v: Vec<T>,
    pub u: Vec<T>,
    /// Positions as flattened representation matrices of size `rep_size`.
    pub positions: Vec<Vec<T>>,
    pub rep_size: usize,
    /// `dγ/du` in the body frame (`= 2√η γ′(η)`).
    pub body_velocity: Vec<Vec<T>>,
    /// L₊ integrated alongside the geodesic.
    pub length: T,
}

impl<T: Real> LPlusPath<T> {
    pub fn eta(&self, i: usize) -> T {
        self.u[i] * self.u[i]
    }

    /// `γ′(η)` in the body frame; at `η = 0` returns the limit `√η γ′ = V` instead.
    pub fn velocity_eta(&self, i: usize) -> Vec<T> {
        if self.u[i] == T::zero() {
            return self.v.clone();
        }
        let s = T::one() / (lit::<T>(2.0) * self.u[i]);
        self.body_velocity[i].iter().map(|x| *x * s).collect()
    }

    pub fn endpoint(&self) -> SqMat<T> {
        SqMat::from_slice(self.rep_size, self.positions.last().expect("path has samples"))
    }

    /// The constant path at the base point over `(0, t]`.
    pub fn constant(dim: usize, rep_size: usize, t: T, steps: usize) -> Self {
        let h = t.sqrt() / from_usize(steps);
        Self {
            t,
            v: vec![T::zero(); dim],
            u: (0..=steps).map(|k| h * from_usize(k)).collect(),
            positions: vec![SqMat::identity(rep_size).a; steps + 1],
            rep_size,
            body_velocity: vec![vec![T::zero(); dim]; steps + 1],
            length: T::nan(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthEstimate<T> {
    pub value: T,
    pub error: T,
}

/// `∫₀ᵗ √η (R + |γ′|²) dη = ∫₀^{√t} (½|γ_u|² + 2u²R) du` by Simpson's rule on
/// the stored `u` grid. The error is the difference to the half grid, a
/// conservative bound once the integrand is resolved.
pub fn lplus_length<T: Real>(path: &LPlusPath<T>, bg: &FlowBackground<T>) -> Result<LengthEstimate<T>> {
    bg.validate()?;
    let n = path.u.len();
    if n < 3 {
        return Err(LabError::Validation("path needs at least three samples".into()));
    }
    let h = path.u[1] - path.u[0];
    let uniform = path.u.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= lit::<T>(1e-9) * h);
    if path.u[0] != T::zero() || !uniform {
        return Err(LabError::Validation("path must be sampled on a uniform u grid from 0".into()));
    }
    let dim = bg.dim();
    let mut f = Vec::with_capacity(n);
    for i in 0..n {
        let eta = path.eta(i);
        let g = bg.inertia(eta)?;
        let r = bg.scalar(eta)?;
        let xi = &path.body_velocity[i];
        let mut kin = T::zero();
        for a in 0..dim {
            for b in 0..dim {
                kin += xi[a] * g[a * dim + b] * xi[b];
            }
        }
        f.push(lit::<T>(0.5) * kin + lit::<T>(2.0) * eta * r);
    }
    let fine = simpson(&f, h);
    let coarse_samples: Vec<T> = f.iter().step_by(2).copied().collect();
    let error = if (n - 1).is_multiple_of(4) {
        (fine - simpson(&coarse_samples, h * lit(2.0))).abs()
    } else {
        T::zero()
    };
    Ok(LengthEstimate { value: fine, error })
}

/// Shared machinery for shooting from the base point of one background.
pub struct Shooter<'a, T> {
    pub bg: &'a FlowBackground<T>,
    pub(crate) algebra: Algebra<T>,
    pub(crate) rep: Representation<T>,
    pub dim: usize,
    /// Columns form a `g(0)`-orthonormal frame basis (row-major `n×n`).
    pub basis: Vec<T>,
    pub opts: ShootOptions,
    cache: Option<BackgroundCache<T>>,
}

/// `G(u²)` and `R(u²)` tabulated at the stage abscissae of a fixed-step run.
struct BackgroundCache<T> {
    u: Vec<T>,
    g: Vec<Vec<T>>,
    r: Vec<T>,
}

const DP5_NODES: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

impl<'a, T: Real> Shooter<'a, T> {
    pub fn new(bg: &'a FlowBackground<T>, opts: ShootOptions) -> Result<Self> {
        bg.validate()?;
        if opts.steps < 2 {
            return Err(LabError::Validation("shooting needs at least two steps".into()));
        }
        let dim = bg.dim();
        let algebra = bg.algebra();
        let rep = Representation::new(&algebra);
        let g0 = bg.inertia(T::zero())?;
        let l = cholesky(dim, &g0).ok_or_else(|| LabError::Domain("g(0) not positive-definite".into()))?;
        let linv = SqMat::from_slice(dim, &l).inverse().expect("Cholesky factor is invertible");
        let mut basis = vec![T::zero(); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                basis[i * dim + j] = linv.get(j, i);
            }
        }
        Ok(Self { bg, algebra, rep, dim, basis, opts, cache: None })
    }

    /// Tabulates a numeric background for repeated shooting to time `t`.
    pub fn prepare(&mut self, t: T) -> Result<()> {
        if !matches!(self.bg, FlowBackground::HomogeneousNumeric { .. }) {
            return Ok(());
        }
        let h = t.sqrt() / from_usize(self.opts.steps);
        let mut u: Vec<T> = Vec::new();
        for k in 0..self.opts.steps {
            for c in DP5_NODES {
                u.push(h * from_usize(k) + h * lit(c));
            }
        }
        u.push(t.sqrt());
        u.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        u.dedup();
        let mut g = Vec::with_capacity(u.len());
        let mut r = Vec::with_capacity(u.len());
        for &x in &u {
            let (gi, ri) = self
                .bg
                .state((x * x).min(self.bg.horizon()))
                .ok_or_else(|| LabError::OutOfWindow("background sample outside window".into()))?;
            g.push(gi);
            r.push(ri);
        }
        self.cache = Some(BackgroundCache { u, g, r });
        Ok(())
    }

    fn sample(&self, u: T) -> Option<(Vec<T>, T)> {
        if let Some(c) = &self.cache {
            let i = c.u.partition_point(|x| *x < u);
            for j in [i.saturating_sub(1), i] {
                if j < c.u.len() && (c.u[j] - u).abs() <= lit::<T>(1e-12) * (T::one() + u) {
                    return Some((c.g[j].clone(), c.r[j]));
                }
            }
        }
        self.bg.state(u * u)
    }

    pub fn rep_size(&self) -> usize {
        self.rep.size
    }

    /// Frame components of the vector with `g(0)`-orthonormal coordinates `w`.
    pub fn frame_vector(&self, w: &[T]) -> Vec<T> {
        let n = self.dim;
        (0..n).map(|i| (0..n).map(|j| self.basis[i * n + j] * w[j]).sum()).collect()
    }

    pub fn norm0(&self, v_frame: &[T]) -> Result<T> {
        let g0 = self.bg.inertia(T::zero())?;
        let n = self.dim;
        let mut s = T::zero();
        for a in 0..n {
            for b in 0..n {
                s += v_frame[a] * g0[a * n + b] * v_frame[b];
            }
        }
        Ok(s.sqrt())
    }

    fn check_t(&self, t: T) -> Result<()> {
        if !(t > T::zero()) {
            return Err(LabError::Validation(format!("t must be positive, got {t}")));
        }
        self.bg.check_time(t)
    }

    /// `G(u²)` into `g` (row-major `n×n`) and `R(u²)` as the return value.
    fn sample_into(&self, u: T, g: &mut [T; 9]) -> Option<T> {
        let n = self.dim;
        match self.bg {
            FlowBackground::StaticFlat { .. } => {
                g.iter_mut().for_each(|x| *x = T::zero());
                for i in 0..n {
                    g[i * n + i] = T::one();
                }
                Some(T::zero())
            }
            FlowBackground::ShrinkingRoundS3 { a0 } => {
                let a = *a0 - lit::<T>(4.0) * u * u;
                if !(a > T::zero()) {
                    return None;
                }
                *g = [a, T::zero(), T::zero(), T::zero(), a, T::zero(), T::zero(), T::zero(), a];
                Some(lit::<T>(6.0) / a)
            }
            FlowBackground::HomogeneousNumeric { .. } => {
                let (gv, r) = self.sample(u)?;
                g[..n * n].copy_from_slice(&gv);
                Some(r)
            }
        }
    }

    fn initial_state(&self, v_frame: &[T], t: T) -> Result<Vec<T>> {
        self.check_t(t)?;
        if v_frame.len() != self.dim {
            return Err(LabError::Validation(format!("V must have {} components", self.dim)));
        }
        let n = self.dim;
        let s = self.rep.size;
        let mut g0 = [T::zero(); 9];
        self.sample_into(T::zero(), &mut g0).ok_or_else(|| LabError::OutOfWindow("η = 0".into()))?;
        let mut y0 = vec![T::zero(); n + s * s + 1];
        for a in 0..n {
            y0[a] = (0..n).map(|b| lit::<T>(2.0) * g0[a * n + b] * v_frame[b]).sum();
        }
        for i in 0..s {
            y0[n + i * s + i] = T::one();
        }
        Ok(y0)
    }

    /// `m′ = ad*_ξ m`, `γ′ = γ ρ(ξ)`, `L′ = ½⟨ξ, m⟩ + 2u²R` with `ξ = G⁻¹m`.
    fn rhs(&self, u: T, y: &[T], dy: &mut [T]) -> bool {
        let n = self.dim;
        let s = self.rep.size;
        let mut g = [T::zero(); 9];
        let Some(r) = self.sample_into(u, &mut g) else {
            return false;
        };
        let m = &y[..n];
        let mut xi = [T::zero(); 3];
        if !solve_small(n, &g, m, &mut xi) {
            return false;
        }
        self.algebra.coadjoint(&xi, m, &mut dy[..n]);
        let mut rho = [T::zero(); 16];
        self.rep.of_into(&xi[..n], &mut rho[..s * s]);
        let gamma = &y[n..n + s * s];
        for i in 0..s {
            for j in 0..s {
                let mut acc = T::zero();
                for k in 0..s {
                    acc += gamma[i * s + k] * rho[k * s + j];
                }
                dy[n + i * s + j] = acc;
            }
        }
        let kin: T = (0..n).map(|a| xi[a] * m[a]).sum();
        dy[n + s * s] = lit::<T>(0.5) * kin + lit::<T>(2.0) * u * u * r;
        y.iter().all(|v| v.is_finite())
    }

    /// Full state history `[m, γ, L]` at the `steps + 1` grid points.
    fn integrate(&self, v_frame: &[T], t: T) -> Result<Vec<Vec<T>>> {
        let y0 = self.initial_state(v_frame, t)?;
        integrate_fixed(&mut |u, y: &[T], dy: &mut [T]| self.rhs(u, y, dy), T::zero(), t.sqrt(), &y0, self.opts.steps)
            .map_err(|e| LabError::Integration(format!("L₊-geodesic: {e}")))
    }

    /// Endpoint (representation matrix) and L₊ of the geodesic with initial vector `v_frame`.
    pub fn endpoint(&self, v_frame: &[T], t: T) -> Result<(SqMat<T>, T)> {
        let y0 = self.initial_state(v_frame, t)?;
        let last = integrate_fixed_end(
            &mut |u, y: &[T], dy: &mut [T]| self.rhs(u, y, dy),
            T::zero(),
            t.sqrt(),
            &y0,
            self.opts.steps,
        )
        .map_err(|e| LabError::Integration(format!("L₊-geodesic: {e}")))?;
        let n = self.dim;
        let s = self.rep.size;
        Ok((SqMat::from_slice(s, &last[n..n + s * s]), last[n + s * s]))
    }

    pub fn shoot(&self, v_frame: &[T], t: T) -> Result<LPlusPath<T>> {
        let hist = self.integrate(v_frame, t)?;
        let n = self.dim;
        let s = self.rep.size;
        let h = t.sqrt() / from_usize(self.opts.steps);
        let mut body_velocity = Vec::with_capacity(hist.len());
        for (k, y) in hist.iter().enumerate() {
            let (g, _) = self
                .sample(h * from_usize(k))
                .ok_or_else(|| LabError::OutOfWindow("path left the background window".into()))?;
            body_velocity.push(solve_spd(n, &g, &y[..n]).ok_or_else(|| LabError::Domain("degenerate metric".into()))?);
        }
        Ok(LPlusPath {
            t,
            v: v_frame.to_vec(),
            u: (0..hist.len()).map(|k| h * from_usize(k)).collect(),
            positions: hist.iter().map(|y| y[n..n + s * s].to_vec()).collect(),
            rep_size: s,
            body_velocity,
            length: hist.last().expect("non-empty")[n + s * s],
        })
    }

    /// Body-frame tangent at `base` of the difference `(plus − minus)/(2h)`.
    pub(crate) fn body_difference(&self, base_inv: &SqMat<T>, plus: &SqMat<T>, minus: &SqMat<T>, h: T) -> Vec<T> {
        let d = base_inv.mul(&plus.sub(minus)).scale(T::one() / (lit::<T>(2.0) * h));
        self.rep.project(&d)
    }

    /// Rough initial vector for reaching `target` at time `t`, ignoring curvature of the group.
    fn initial_guess(&self, target: &SqMat<T>, t: T) -> Result<Vec<T>> {
        let n = self.dim;
        let w = self.rep.project(&target.sub(&SqMat::identity(self.rep.size)));
        let k = 16usize;
        let h = t.sqrt() / from_usize(k);
        let mut acc = vec![vec![T::zero(); n * n]; k + 1];
        for (i, a) in acc.iter_mut().enumerate() {
            let (g, _) = self.sample(h * from_usize(i)).ok_or_else(|| LabError::OutOfWindow("η".into()))?;
            let inv = SqMat::from_slice(n, &g).inverse().ok_or_else(|| LabError::Domain("degenerate metric".into()))?;
            *a = inv.a;
        }
        let integral: Vec<T> = (0..n * n)
            .map(|e| simpson(&acc.iter().map(|a| a[e]).collect::<Vec<T>>(), h))
            .collect();
        let m0 = SqMat::from_slice(n, &integral)
            .inverse()
            .ok_or_else(|| LabError::Domain("singular inertia integral".into()))?;
        let m: Vec<T> = (0..n).map(|i| (0..n).map(|j| m0.get(i, j) * w[j]).sum()).collect();
        let (g0, _) = self.sample(T::zero()).ok_or_else(|| LabError::OutOfWindow("η = 0".into()))?;
        let v = solve_spd(n, &g0, &m).ok_or_else(|| LabError::Domain("g(0) not positive-definite".into()))?;
        Ok(v.iter().map(|x| *x * lit(0.5)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvpOptions {
    pub shoot: ShootOptions,
    /// Largest admissible `|V|_{g(0)}`.
    pub cutoff: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self { shoot: ShootOptions::default(), cutoff: 3.2, tolerance: 1e-11, max_iterations: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LPlusSolution<T> {
    pub v: Vec<T>,
    pub length: T,
    pub l_plus: T,
    pub residual: T,
    pub iterations: usize,
}

/// Reduced forward length `l₊ = L₊/(2√t)` to the point `target` (a
/// representation matrix) by shooting with a Levenberg–Marquardt search on `V`.
pub fn l_plus<T: Real>(target: &SqMat<T>, t: T, bg: &FlowBackground<T>, opts: &BvpOptions) -> Result<LPlusSolution<T>> {
    let mut shooter = Shooter::new(bg, opts.shoot)?;
    shooter.check_t(t)?;
    if target.n != shooter.rep_size() {
        return Err(LabError::Validation(format!(
            "target must be a {0}×{0} representation matrix",
            shooter.rep_size()
        )));
    }
    shooter.prepare(t)?;
    let n = shooter.dim;
    let scale = target.frobenius().max(T::one());
    let tol = lit::<T>(opts.tolerance) * scale;
    let cutoff = lit::<T>(opts.cutoff);
    let residual = |v: &[T]| -> Result<(Vec<T>, T)> {
        let (end, len) = shooter.endpoint(v, t)?;
        Ok((end.sub(target).a, len))
    };
    let norm = |r: &[T]| r.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let mut v = shooter.initial_guess(target, t)?;
    let (mut r, mut len) = residual(&v)?;
    let mut mu = lit::<T>(1e-3);
    let mut it = 0;
    while norm(&r) > tol && it < opts.max_iterations {
        it += 1;
        let vn = norm(&v).max(T::one());
        let h = lit::<T>(1e-6) * vn;
        let mut jac = vec![vec![T::zero(); r.len()]; n];
        for (k, col) in jac.iter_mut().enumerate() {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[k] += h;
            vm[k] -= h;
            let (rp, _) = residual(&vp)?;
            let (rm, _) = residual(&vm)?;
            for (c, (a, b)) in col.iter_mut().zip(rp.iter().zip(&rm)) {
                *c = (*a - *b) / (lit::<T>(2.0) * h);
            }
        }
        let mut jtj = vec![T::zero(); n * n];
        let mut jtr = vec![T::zero(); n];
        for a in 0..n {
            for b in 0..n {
                jtj[a * n + b] = jac[a].iter().zip(&jac[b]).map(|(x, y)| *x * *y).sum();
            }
            jtr[a] = jac[a].iter().zip(&r).map(|(x, y)| *x * *y).sum();
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut damped = jtj.clone();
            for a in 0..n {
                damped[a * n + a] += mu * jtj[a * n + a].max(T::epsilon());
            }
            let Some(step) = solve_spd(n, &damped, &jtr) else {
                mu *= lit(4.0);
                continue;
            };
            let trial: Vec<T> = v.iter().zip(&step).map(|(a, b)| *a - *b).collect();
            if let Ok((rt, lt)) = residual(&trial) {
                if norm(&rt) < norm(&r) {
                    v = trial;
                    r = rt;
                    len = lt;
                    mu = (mu / lit(3.0)).max(lit(1e-12));
                    improved = true;
                    break;
                }
            }
            mu *= lit(4.0);
        }
        if shooter.norm0(&v)? > cutoff {
            return Err(LabError::Shooting(format!("no initial vector within |V| ≤ {cutoff} reaches the target")));
        }
        if !improved {
            break;
        }
    }
    let res = norm(&r);
    if res > tol.max(lit::<T>(1e-8) * scale) {
        return Err(LabError::Shooting(format!("boundary value residual {res} after {it} iterations")));
    }
    if shooter.norm0(&v)? > cutoff {
        return Err(LabError::Shooting(format!("solution lies outside |V| ≤ {cutoff}")));
    }
    Ok(LPlusSolution { v, length: len, l_plus: len / (lit::<T>(2.0) * t.sqrt()), residual: res, iterations: it })
}

/// Representation matrix of the point `x` in flat `ℝⁿ` (base point at the origin).
pub fn flat_point<T: Real>(x: &[T]) -> SqMat<T> {
    let n = x.len();
    let mut m = SqMat::identity(n + 1);
    for (i, xi) in x.iter().enumerate() {
        m.set(i, n, *xi);
    }
    m
}

/// Free-standing form of [`Shooter::shoot`].
pub fn shoot_lplus_geodesic<T: Real>(
    v_frame: &[T],
    t: T,
    bg: &FlowBackground<T>,
    opts: &ShootOptions,
) -> Result<LPlusPath<T>> {
    let shooter = Shooter::new(bg, *opts)?;
    if v_frame.len() != shooter.dim {
        return Err(LabError::Validation(format!("V must have {} components", shooter.dim)));
    }
    shooter.shoot(v_frame, t)
}

/// Solves `G x = b` for SPD `G` of size `n ≤ 3` without allocating.
fn solve_small<T: Real>(n: usize, g: &[T; 9], b: &[T], x: &mut [T; 3]) -> bool {
    let mut l = [T::zero(); 9];
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = [T::zero(); 3];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    true
}
