//! Geodesic balls of left-invariant metrics from radial Jacobi fields.
//!
//! Geodesics are integrated in the left-trivialized (body) frame: with
//! `m = Gξ`, the geodesic equation is `m' = ad*_ξ m`. A Jacobi field is a
//! left-trivialized variation `ζ` together with the varied velocity `δξ`:
//!
//! ```text
//! ζ'  = δξ − [ξ, ζ]
//! δm' = ad*_{δξ} m + ad*_ξ δm,   δm = G δξ
//! ```
//!
//! The polar volume density along a unit-speed ray is
//! `det[ξ, ζ₁, ζ₂] · √det G` for Jacobi fields with `ζ(0) = 0` and `δξ(0)`
//! spanning the orthogonal complement of the initial direction. Rays are cut
//! at their first conjugate point (density ≤ 0), so past the injectivity
//! radius the result is an upper bound for the true ball volume.
//!
//! Each ray is integrated in the scaled parameter `σ = s / r_max` with
//! `ζ̃ = ζ / r_max`, so every state component is O(1) and small balls keep
//! full relative accuracy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_curvature, FrameMetric, HomogeneousModel};
use crate::error::{LabError, Result};
use crate::linalg::{self, Mat3, Vec3};
use crate::ode::{DenseSegment, Dopri5, StepControl};
use crate::quadrature::SphereRule;
use crate::scalar::{from_usize, lit, to_f64, Real};

/// Quadrature settings for ball volumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallOptions {
    pub n_polar: usize,
    pub n_azimuth: usize,
    pub rtol: f64,
    /// Largest acceptable difference between the rule and its half-resolution companion.
    pub tolerance: f64,
}

impl Default for BallOptions {
    fn default() -> Self {
        Self { n_polar: 12, n_azimuth: 24, rtol: 1e-11, tolerance: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallVolumeCurve<T> {
    pub radii: Vec<T>,
    pub volumes: Vec<T>,
    /// Smallest first-conjugate distance among the sampled rays, if any is reached.
    pub conjugate_radius: Option<T>,
    /// Difference against the half-resolution direction rule at the largest radius.
    pub quadrature_error: T,
}

impl<T: Real> BallVolumeCurve<T> {
    pub fn ratios(&self) -> Vec<T> {
        self.radii.iter().zip(&self.volumes).map(|(&r, &v)| v / (r * r * r)).collect()
    }
}

struct RayResult<T> {
    cumulative: Vec<T>,
    conjugate: Option<T>,
}

struct RayFrame<T> {
    model: HomogeneousModel<T>,
    g: Mat3<T>,
    g_inv: Mat3<T>,
    sqrt_det: T,
    /// Columns form a g-orthonormal basis.
    basis: Mat3<T>,
}

impl<T: Real> RayFrame<T> {
    fn new(model: &HomogeneousModel<T>, g: &FrameMetric<T>) -> Self {
        let l = linalg::cholesky(g.entries()).expect("validated metric");
        let basis = linalg::transpose(&linalg::lower_inverse(&l));
        Self {
            model: *model,
            g: *g.entries(),
            g_inv: linalg::inverse(g.entries()).expect("validated metric"),
            sqrt_det: g.det().sqrt(),
            basis,
        }
    }

    /// Velocity of the geodesic equation: `ξ' = G⁻¹ ad*_ξ (Gξ)`.
    fn accel(&self, xi: &Vec3<T>) -> Vec3<T> {
        let m = linalg::mat_vec(&self.g, xi);
        linalg::mat_vec(&self.g_inv, &self.model.coadjoint(xi, &m))
    }

    /// Linearized velocity equation.
    fn accel_variation(&self, xi: &Vec3<T>, dxi: &Vec3<T>) -> Vec3<T> {
        let m = linalg::mat_vec(&self.g, xi);
        let dm = linalg::mat_vec(&self.g, dxi);
        let a = self.model.coadjoint(dxi, &m);
        let b = self.model.coadjoint(xi, &dm);
        linalg::mat_vec(&self.g_inv, &[a[0] + b[0], a[1] + b[1], a[2] + b[2]])
    }

    /// Integrates one ray in direction `omega` (Euclidean unit vector in the
    /// orthonormal basis) up to `r_max`, sampling the cumulative volume density.
    fn ray(&self, omega: &Vec3<T>, radii: &[T], r_max: T, rtol: T) -> Result<RayResult<T>> {
        let (u1, u2) = orthonormal_complement(omega);
        let theta = linalg::mat_vec(&self.basis, omega);
        let w1 = linalg::mat_vec(&self.basis, &u1);
        let w2 = linalg::mat_vec(&self.basis, &u2);
        // state: ξ(3) ζ̃1(3) δξ1(3) ζ̃2(3) δξ2(3) q̃(1)
        let mut y0 = vec![T::zero(); 16];
        y0[0..3].copy_from_slice(&theta);
        y0[6..9].copy_from_slice(&w1);
        y0[12..15].copy_from_slice(&w2);
        let scale = r_max;
        let sqrt_det = self.sqrt_det;
        let mut rhs = |_s: T, y: &[T], dy: &mut [T]| {
            let xi = [y[0], y[1], y[2]];
            let a = self.accel(&xi);
            for i in 0..3 {
                dy[i] = scale * a[i];
            }
            for (z, d) in [(3usize, 6usize), (9, 12)] {
                let zeta = [y[z], y[z + 1], y[z + 2]];
                let dxi = [y[d], y[d + 1], y[d + 2]];
                let br = self.model.bracket(&xi, &zeta);
                let av = self.accel_variation(&xi, &dxi);
                for i in 0..3 {
                    // ζ = scale·ζ̃, s = scale·σ
                    dy[z + i] = dxi[i] - scale * br[i];
                    dy[d + i] = scale * av[i];
                }
            }
            let det = linalg::det_columns(&xi, &[y[3], y[4], y[5]], &[y[9], y[10], y[11]]);
            dy[15] = det * sqrt_det;
            y.iter().all(|v| v.is_finite())
        };
        let density = |y: &[T]| linalg::det_columns(&[y[0], y[1], y[2]], &[y[3], y[4], y[5]], &[y[9], y[10], y[11]]);

        let control = StepControl::new(rtol, rtol * lit(1e-2));
        let mut solver = Dopri5::new(control, T::zero(), &y0, &mut rhs)
            .map_err(|e| LabError::Integration(e.to_string()))?;
        solver.set_suggested_step(lit(1e-3));
        let targets: Vec<T> = radii.iter().map(|&r| r / scale).collect();
        let mut cumulative = vec![T::zero(); radii.len()];
        let mut next = 0usize;
        let mut conjugate = None;
        let mut peak = T::zero();
        let mut prev_seg: Option<DenseSegment<T>> = None;
        let mut buf = vec![T::zero(); 16];
        let one = T::one();
        let max_steps = 200_000;
        let mut steps = 0;
        while solver.t() < one {
            steps += 1;
            if steps > max_steps {
                return Err(LabError::Integration("ray integration exceeded step budget".into()));
            }
            let cap = one - solver.t();
            solver.step_adaptive(&mut rhs, cap).map_err(|e| LabError::Integration(e.to_string()))?;
            let seg = solver.last_segment().expect("accepted step").clone();
            let stop_at = first_conjugate(&seg, prev_seg.as_ref(), &density, &mut peak, &mut buf);
            if let Some(sc) = stop_at {
                conjugate = Some(sc * scale);
            }
            let seg_end = stop_at.unwrap_or(seg.t1());
            while next < targets.len() && targets[next] <= seg_end {
                eval_segments(&seg, prev_seg.as_ref(), targets[next], &mut buf);
                cumulative[next] = buf[15];
                next += 1;
            }
            if let Some(sc) = stop_at {
                eval_segments(&seg, prev_seg.as_ref(), sc, &mut buf);
                for c in cumulative.iter_mut().skip(next) {
                    *c = buf[15];
                }
                next = targets.len();
                break;
            }
            prev_seg = Some(seg);
        }
        while next < targets.len() {
            cumulative[next] = solver.y()[15];
            next += 1;
        }
        let s3 = scale * scale * scale;
        Ok(RayResult { cumulative: cumulative.into_iter().map(|c| c * s3).collect(), conjugate })
    }
}

fn eval_segments<T: Real>(seg: &DenseSegment<T>, prev: Option<&DenseSegment<T>>, t: T, out: &mut [T]) {
    match prev {
        Some(p) if t < seg.t0 => p.eval(t, out),
        _ => seg.eval(t.max(seg.t0), out),
    }
}

/// Relative depth below which a local minimum of the density counts as a
/// (multiple) conjugate point; the round sphere has a double zero there.
const TOUCH_RATIO: f64 = 1e-6;

/// Locates the first conjugate point inside one accepted step: either a sign
/// change of the density or a local minimum that touches zero. The previous
/// step is consulted so that a minimum sitting on the step boundary is seen.
fn first_conjugate<T: Real, F: Fn(&[T]) -> T>(
    seg: &DenseSegment<T>,
    prev: Option<&DenseSegment<T>>,
    density: &F,
    peak: &mut T,
    buf: &mut [T],
) -> Option<T> {
    const SAMPLES: usize = 16;
    let eval = |t: T, buf: &mut [T]| -> T {
        match prev {
            Some(p) if t < seg.t0 => p.eval(t, buf),
            _ => seg.eval(t, buf),
        }
        density(buf)
    };
    let mut ts = Vec::with_capacity(SAMPLES + 2);
    if let Some(p) = prev {
        ts.push(p.t0 + p.h * from_usize::<T>(SAMPLES - 1) / from_usize::<T>(SAMPLES));
    }
    let first_own = ts.len();
    for k in 0..=SAMPLES {
        ts.push(seg.t0 + seg.h * from_usize::<T>(k) / from_usize::<T>(SAMPLES));
    }
    let ds: Vec<T> = ts.iter().map(|&t| eval(t, buf)).collect();
    for k in first_own + 1..ts.len() {
        if !(ds[k] > T::zero()) && ds[k - 1] > T::zero() {
            let (mut lo, mut hi) = (ts[k - 1], ts[k]);
            for _ in 0..80 {
                let mid = (lo + hi) * lit(0.5);
                if eval(mid, buf) > T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(lo);
        }
    }
    for k in first_own.max(1)..ts.len() - 1 {
        if ds[k] <= ds[k - 1] && ds[k] <= ds[k + 1] && ds[k] <= lit::<T>(TOUCH_RATIO) * peak.max(ds[k - 1]) {
            // golden-section refinement of the touching minimum
            let (mut a, mut b) = (ts[k - 1], ts[k + 1]);
            let phi = lit::<T>(0.618_033_988_749_894_9);
            for _ in 0..100 {
                let x1 = b - phi * (b - a);
                let x2 = a + phi * (b - a);
                if eval(x1, buf) <= eval(x2, buf) {
                    b = x2;
                } else {
                    a = x1;
                }
            }
            return Some((a + b) * lit(0.5));
        }
        *peak = peak.max(ds[k]);
    }
    None
}

fn orthonormal_complement<T: Real>(w: &Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    let a = if w[0].abs() < lit(0.9) { [T::one(), T::zero(), T::zero()] } else { [T::zero(), T::one(), T::zero()] };
    let d = linalg::dot(w, &a);
    let mut u1 = [a[0] - d * w[0], a[1] - d * w[1], a[2] - d * w[2]];
    let n = linalg::dot(&u1, &u1).sqrt();
    u1 = u1.map(|x| x / n);
    let u2 = [w[1] * u1[2] - w[2] * u1[1], w[2] * u1[0] - w[0] * u1[2], w[0] * u1[1] - w[1] * u1[0]];
    (u1, u2)
}

fn sphere_sum<T: Real>(
    frame: &RayFrame<T>,
    rule: &SphereRule<T>,
    radii: &[T],
    r_max: T,
    rtol: T,
) -> Result<(Vec<T>, Option<T>)> {
    let rays: Vec<Result<RayResult<T>>> = rule
        .directions
        .par_iter()
        .map(|d| frame.ray(&[d[0], d[1], d[2]], radii, r_max, rtol))
        .collect();
    let mut volumes = vec![T::zero(); radii.len()];
    let mut conj: Option<T> = None;
    for (ray, &w) in rays.into_iter().zip(&rule.weights) {
        let ray = ray?;
        for (v, c) in volumes.iter_mut().zip(&ray.cumulative) {
            *v += w * *c;
        }
        if let Some(c) = ray.conjugate {
            conj = Some(conj.map_or(c, |m: T| m.min(c)));
        }
    }
    Ok((volumes, conj))
}

/// Ball volumes at explicit radii (increasing, positive).
pub fn ball_volume_at<T: Real>(
    model: &HomogeneousModel<T>,
    g: &FrameMetric<T>,
    radii: &[T],
    opts: &BallOptions,
) -> Result<BallVolumeCurve<T>> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > T::zero()) || !r.is_finite()) {
        return Err(LabError::Validation("ball radii must be positive and finite".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Validation("ball radii must be strictly increasing".into()));
    }
    let r_max = *radii.last().expect("non-empty");
    let frame = RayFrame::new(model, g);
    let rtol = lit::<T>(opts.rtol);
    let fine = SphereRule::product(3, opts.n_polar, opts.n_azimuth)?;
    let coarse = SphereRule::product(3, (opts.n_polar / 2).max(1), (opts.n_azimuth / 2).max(1))?;
    let (volumes, conj) = sphere_sum(&frame, &fine, radii, r_max, rtol)?;
    let (coarse_vol, _) = sphere_sum(&frame, &coarse, &radii[radii.len() - 1..], r_max, rtol)?;
    let quadrature_error = (volumes[volumes.len() - 1] - coarse_vol[0]).abs();
    let scale = volumes[volumes.len() - 1].abs().max(T::min_positive_value());
    if to_f64(quadrature_error / scale) > opts.tolerance {
        return Err(LabError::Quadrature { achieved: to_f64(quadrature_error / scale), requested: opts.tolerance });
    }
    Ok(BallVolumeCurve { radii: radii.to_vec(), volumes, conjugate_radius: conj, quadrature_error })
}

/// Volume curve on the uniform grid `r_max·j/grid`, `j = 1..=grid`.
pub fn ball_volume<T: Real>(
    model: &HomogeneousModel<T>,
    g: &FrameMetric<T>,
    r_max: T,
    grid: usize,
    opts: &BallOptions,
) -> Result<BallVolumeCurve<T>> {
    if !(r_max > T::zero()) {
        return Err(LabError::Validation("r_max must be positive".into()));
    }
    if grid == 0 {
        return Err(LabError::Validation("radial grid needs at least one point".into()));
    }
    let radii: Vec<T> = (1..=grid).map(|j| r_max * from_usize(j) / from_usize(grid)).collect();
    ball_volume_at(model, g, &radii, opts)
}

fn euclidean_ratio<T: Real>() -> T {
    lit::<T>(4.0) * T::PI() / lit(3.0)
}

/// Smallest radius in `(0, r_cap]` at which `Vol(B(r)) / r³` drops to `eps0`.
pub fn collapse_radius<T: Real>(
    model: &HomogeneousModel<T>,
    g: &FrameMetric<T>,
    eps0: T,
    r_cap: T,
    opts: &BallOptions,
) -> Result<Option<T>> {
    if !(eps0 > T::zero()) || eps0 >= euclidean_ratio() {
        return Err(LabError::Validation(format!(
            "collapse threshold {eps0} must lie in (0, 4π/3); at or above 4π/3 the radius degenerates to 0"
        )));
    }
    if !(r_cap > T::zero()) {
        return Err(LabError::Validation("r_cap must be positive".into()));
    }
    let ratio_at = |r: T| -> Result<T> {
        let c = ball_volume_at(model, g, &[r], opts)?;
        Ok(c.volumes[0] / (r * r * r))
    };
    let scan = ball_volume(model, g, r_cap, 64, opts)?;
    let ratios = scan.ratios();
    let Some(j) = ratios.iter().position(|&q| q <= eps0) else {
        return Ok(None);
    };
    let mut hi = scan.radii[j];
    let mut lo = if j > 0 { scan.radii[j - 1] } else { T::zero() };
    if lo == T::zero() {
        // walk down until the ratio is back above the threshold
        let mut r = hi;
        let mut found = false;
        for _ in 0..200 {
            r *= lit(0.5);
            if ratio_at(r)? > eps0 {
                found = true;
                break;
            }
            hi = r;
        }
        if !found {
            return Err(LabError::Inconclusive("collapse ratio never rose above threshold near 0".into()));
        }
        lo = r;
    }
    for _ in 0..60 {
        let mid = (lo + hi) * lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if ratio_at(mid)? <= eps0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Cheeger–Gromov–Taylor style hypotheses at scale `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CgtCheck {
    pub curvature_ok: bool,
    pub volume_ok: bool,
}

/// `curvature_ok ⇔ |Rm| ≤ r⁻²`, `volume_ok ⇔ Vol(B(r)) ≥ ε r³`.
pub fn cgt_hypothesis_check<T: Real>(
    model: &HomogeneousModel<T>,
    g: &FrameMetric<T>,
    r: T,
    epsilon: T,
    opts: &BallOptions,
) -> Result<CgtCheck> {
    if !(r > T::zero()) {
        return Err(LabError::Validation("scale r must be positive".into()));
    }
    let report = compute_curvature(model, g);
    let curvature_ok = report.rm_norm <= T::one() / (r * r);
    let vol = ball_volume_at(model, g, &[r], opts)?.volumes[0];
    Ok(CgtCheck { curvature_ok, volume_ok: vol >= epsilon * r * r * r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn s3_volume(r: f64) -> f64 {
        2.0 * PI * r - PI * (2.0 * r).sin()
    }

    #[test]
    fn euclidean_ball() {
        let c = ball_volume(&HomogeneousModel::<f64>::abelian(), &FrameMetric::identity(), 1.0, 4, &BallOptions::default())
            .unwrap();
        assert!((c.volumes[3] - 4.0 * PI / 3.0).abs() < 1e-6);
        assert!(c.conjugate_radius.is_none());
        for (r, v) in c.radii.iter().zip(&c.volumes) {
            assert!((v - 4.0 * PI / 3.0 * r.powi(3)).abs() < 1e-9);
        }
    }

    #[test]
    fn round_sphere_volume_and_conjugate_radius() {
        let opts = BallOptions { n_polar: 4, n_azimuth: 8, ..Default::default() };
        let c = ball_volume(&HomogeneousModel::<f64>::su2(), &FrameMetric::identity(), 3.5, 35, &opts).unwrap();
        let conj = c.conjugate_radius.unwrap();
        assert!((conj - PI).abs() < 0.1, "{conj}");
        assert!((conj - PI).abs() < 1e-8, "{conj}");
        for (r, v) in c.radii.iter().zip(&c.volumes) {
            let expect = if *r < PI { s3_volume(*r) } else { 2.0 * PI * PI };
            assert!((v - expect).abs() < 1e-6, "r={r} v={v} expect={expect}");
        }
    }

    #[test]
    fn collapse_threshold_validation() {
        let m = HomogeneousModel::<f64>::abelian();
        let g = FrameMetric::identity();
        let o = BallOptions::default();
        assert!(collapse_radius(&m, &g, 5.0, 1.0, &o).is_err());
        assert!(collapse_radius(&m, &g, 0.0, 1.0, &o).is_err());
        assert_eq!(collapse_radius(&m, &g, 0.1, 100.0, &o).unwrap(), None);
    }

    #[test]
    fn cgt_on_round_sphere() {
        let m = HomogeneousModel::<f64>::su2();
        let g = FrameMetric::identity();
        let o = BallOptions { n_polar: 4, n_azimuth: 8, ..Default::default() };
        let a = cgt_hypothesis_check(&m, &g, 1.0, 1.0, &o).unwrap();
        assert!(!a.curvature_ok);
        let b = cgt_hypothesis_check(&m, &g, 0.5, 1.0, &o).unwrap();
        assert!(b.curvature_ok);
        assert_eq!(b.volume_ok, s3_volume(0.5) >= 0.125);
        let flat = cgt_hypothesis_check(&HomogeneousModel::abelian(), &g, 3.0, 1.0, &o).unwrap();
        assert_eq!(flat, CgtCheck { curvature_ok: true, volume_ok: true });
    }
}
