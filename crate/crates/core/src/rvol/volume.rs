use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::background::FlowBackground;
use super::jacobian::JacobianOptions;
use super::path::{ShootOptions, Shooter};
use crate::error::{LabError, Result};
use crate::quadrature::{gauss_legendre_on, SphereRule};
use crate::scalar::{from_usize, lit, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeOptions {
    pub n_polar: usize,
    pub n_azimuth: usize,
    pub n_radial: usize,
    /// Radial cutoff in `|V|_{g(0)}`.
    pub cutoff: f64,
    /// Radii sampled per ray when locating the first zero of 𝕁₊.
    pub n_scan: usize,
    pub shoot: ShootOptions,
    pub jacobian: JacobianOptions,
    /// Largest acceptable relative error estimate.
    pub tolerance: f64,
}

impl Default for VolumeOptions {
    fn default() -> Self {
        Self {
            n_polar: 6,
            n_azimuth: 12,
            n_radial: 20,
            cutoff: 3.2,
            n_scan: 16,
            shoot: ShootOptions { steps: 64 },
            jacobian: JacobianOptions::default(),
            tolerance: 1e-2,
        }
    }
}

impl VolumeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_radial < 4 || self.n_polar < 2 || self.n_azimuth < 2 || self.n_scan < 4 {
            return Err(LabError::Validation("quadrature needs n_radial ≥ 4, n_polar, n_azimuth ≥ 2, n_scan ≥ 4".into()));
        }
        if !(self.cutoff > 0.0) || !(self.tolerance > 0.0) {
            return Err(LabError::Validation("cutoff and tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RaySummary<T> {
    pub direction: Vec<T>,
    /// Upper end of the radial integral.
    pub radius: T,
    pub truncated: bool,
    /// `∫ f(rθ) r^{n−1} dr` with the fine radial rule.
    pub integral: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ReducedVolumeEstimate<T> {
    pub tau: T,
    pub value: T,
    /// Sum of the four contributions below.
    pub quadrature_error: T,
    pub radial_error: T,
    pub angular_error: T,
    /// Finite-difference uncertainty of 𝕁₊ propagated through the rule.
    pub jacobian_error: T,
    pub tail_bound: T,
    pub domain_cutoff: T,
    pub rays: usize,
    pub truncated_rays: usize,
    pub fan: Vec<RaySummary<T>>,
}

/// `τ^{−n/2} e^{l₊} e^{−2|V|²} 𝕁₊` at `V = w`.
/// The second value is its uncertainty from the finite-difference Jacobian.
fn integrand<T: Real>(sh: &Shooter<'_, T>, w: &[T], tau: T, jopts: &JacobianOptions) -> Result<(T, T)> {
    let est = sh.jacobian_richardson(w, tau, jopts)?;
    let n = from_usize::<T>(sh.dim);
    let v2: T = w.iter().map(|x| *x * *x).sum();
    let l = est.length / (lit::<T>(2.0) * tau.sqrt());
    let weight = tau.powf(-n / lit(2.0)) * (l - lit::<T>(2.0) * v2).exp();
    Ok((weight * est.value, weight * est.richardson_error))
}

fn scaled<T: Real>(dir: &[T], r: T) -> Vec<T> {
    dir.iter().map(|x| *x * r).collect()
}

/// Single-step 𝕁₊, adequate for locating zeros.
fn quick_j<T: Real>(sh: &Shooter<'_, T>, w: &[T], tau: T, h: T, sqrt_det: T) -> Result<T> {
    sh.jacobian_at(w, tau, h, sqrt_det).map(|(j, _)| j)
}

/// First radius along `dir` where 𝕁₊ vanishes, searched up to `cutoff`.
fn ray_boundary<T: Real>(sh: &Shooter<'_, T>, dir: &[T], tau: T, opts: &VolumeOptions) -> Result<Option<T>> {
    let cutoff = lit::<T>(opts.cutoff);
    let sqrt_det = sh.sqrt_det_at(tau)?;
    let h = lit::<T>(opts.jacobian.step);
    let j = |r: T| quick_j(sh, &scaled(dir, r), tau, h * r.max(T::one()), sqrt_det);
    let radii: Vec<T> = (0..=opts.n_scan).map(|k| cutoff * from_usize(k) / from_usize(opts.n_scan)).collect();
    let mut vals = Vec::with_capacity(radii.len());
    let mut running_max = T::zero();
    for (k, &r) in radii.iter().enumerate() {
        let v = j(r)?;
        if !(v > T::zero()) {
            if k == 0 {
                return Err(LabError::Domain(format!("𝕁₊ = {v} at V = 0")));
            }
            let (mut lo, mut hi) = (radii[k - 1], r);
            for _ in 0..50 {
                let mid = (lo + hi) * lit(0.5);
                if j(mid)? > T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= lit::<T>(1e-8) * hi {
                    break;
                }
            }
            return Ok(Some(lo));
        }
        vals.push(v);
        running_max = running_max.max(v);
        // a zero of even order shows up as a dip that never crosses zero
        if k >= 2 && vals[k - 1] < vals[k - 2] && vals[k - 1] < v && vals[k - 1] < lit::<T>(0.1) * running_max {
            let (mut a, mut b) = (radii[k - 2], r);
            let g = lit::<T>(0.5) * (lit::<T>(5.0).sqrt() - T::one());
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (j(c)?, j(d)?);
            for _ in 0..80 {
                if b - a <= lit::<T>(1e-7) * b {
                    break;
                }
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = j(c)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = j(d)?;
                }
            }
            let (rmin, fmin) = if fc < fd { (c, fc) } else { (d, fd) };
            if fmin <= lit::<T>(1e-4) * running_max {
                return Ok(Some(rmin));
            }
        }
    }
    Ok(None)
}

struct RayResult<T> {
    radius: T,
    truncated: bool,
    fine: T,
    coarse: T,
    jacobian_error: T,
    at_cutoff: T,
}

/// Fine and coarse radial rules along one ray; the coarse rule (error
/// estimate only) uses the single-step Jacobian.
fn integrate_ray<T: Real>(
    sh: &Shooter<'_, T>,
    dir: &[T],
    tau: T,
    opts: &VolumeOptions,
    with_coarse: bool,
) -> Result<RayResult<T>> {
    let cutoff = lit::<T>(opts.cutoff);
    let boundary = ray_boundary(sh, dir, tau, opts)?;
    let radius = boundary.unwrap_or(cutoff);
    let p = sh.dim as i32 - 1;
    let (rf, wf) = gauss_legendre_on(opts.n_radial, T::zero(), radius);
    let mut fine = T::zero();
    let mut jacobian_error = T::zero();
    for (ri, wi) in rf.iter().zip(&wf) {
        let (f, df) = integrand(sh, &scaled(dir, *ri), tau, &opts.jacobian)?;
        fine += *wi * ri.powi(p) * f;
        jacobian_error += *wi * ri.powi(p) * df;
    }
    let mut coarse = fine;
    if with_coarse {
        let sqrt_det = sh.sqrt_det_at(tau)?;
        let h = lit::<T>(opts.jacobian.step);
        let n = from_usize::<T>(sh.dim);
        let (rc, wc) = gauss_legendre_on(opts.n_radial / 2, T::zero(), radius);
        coarse = T::zero();
        for (ri, wi) in rc.iter().zip(&wc) {
            let w = scaled(dir, *ri);
            let (j, len) = sh.jacobian_at(&w, tau, h * ri.max(T::one()), sqrt_det)?;
            let weight = tau.powf(-n / lit(2.0)) * (len / (lit::<T>(2.0) * tau.sqrt()) - lit::<T>(2.0) * *ri * *ri).exp();
            coarse += *wi * ri.powi(p) * weight * j;
        }
    }
    let at_cutoff = if boundary.is_none() { integrand(sh, &scaled(dir, cutoff), tau, &opts.jacobian)?.0 } else { T::zero() };
    Ok(RayResult { radius, truncated: boundary.is_some(), fine, coarse, jacobian_error, at_cutoff })
}

/// `∫_{|x|>c} 2ⁿ e^{−|x|²} dx / area(S^{n−1})`, the flat integrand's tail per unit solid angle.
fn gaussian_tail<T: Real>(n: usize, c: T) -> T {
    let (r, w) = gauss_legendre_on(48, c, c + lit(8.0));
    let two_n = lit::<T>(2.0).powi(n as i32);
    r.iter().zip(&w).map(|(ri, wi)| *wi * two_n * ri.powi(n as i32 - 1) * (-*ri * *ri).exp()).sum()
}

/// Weighted forward reduced volume `𝕍₊(τ) = ∫_Ω τ^{−n/2} e^{l₊} e^{−2|V|²} 𝕁₊ dV`
/// over `V ∈ T_pM` with `|V|_{g(0)} ≤ cutoff`.
pub fn forward_reduced_volume<T: Real>(
    tau: T,
    bg: &FlowBackground<T>,
    opts: &VolumeOptions,
) -> Result<ReducedVolumeEstimate<T>> {
    opts.validate()?;
    if !(tau > T::zero()) {
        return Err(LabError::Validation(format!("τ must be positive, got {tau}")));
    }
    bg.check_time(tau)?;
    let mut sh = Shooter::new(bg, opts.shoot)?;
    sh.prepare(tau)?;
    let n = sh.dim;
    let fine_rule = SphereRule::<T>::product(n, opts.n_polar, opts.n_azimuth)?;
    let coarse_rule = SphereRule::<T>::product(n, opts.n_polar / 2, opts.n_azimuth / 2)?;
    let dirs: Vec<(&Vec<T>, bool)> = fine_rule
        .directions
        .iter()
        .map(|d| (d, true))
        .chain(coarse_rule.directions.iter().map(|d| (d, false)))
        .collect();
    let results: Vec<Result<RayResult<T>>> =
        dirs.par_iter().map(|(d, coarse)| integrate_ray(&sh, d, tau, opts, *coarse)).collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let (fine_rays, coarse_rays) = results.split_at(fine_rule.len());

    let cutoff = lit::<T>(opts.cutoff);
    let two_n_gauss = lit::<T>(2.0).powi(n as i32) * (-cutoff * cutoff).exp();
    let tail_per_ray = gaussian_tail::<T>(n, cutoff);
    let mut value = T::zero();
    let mut radial_error = T::zero();
    let mut jacobian_error = T::zero();
    let mut tail_bound = T::zero();
    for (w, r) in fine_rule.weights.iter().zip(fine_rays) {
        value += *w * r.fine;
        radial_error += *w * (r.fine - r.coarse).abs();
        jacobian_error += *w * r.jacobian_error;
        if !r.truncated {
            tail_bound += *w * tail_per_ray * (r.at_cutoff / two_n_gauss).max(T::one());
        }
    }
    let coarse_value: T = coarse_rule.weights.iter().zip(coarse_rays).map(|(w, r)| *w * r.fine).sum();
    let angular_error = (value - coarse_value).abs();
    let quadrature_error = radial_error + angular_error + jacobian_error + tail_bound;
    let truncated_rays = fine_rays.iter().filter(|r| r.truncated).count();
    let domain_cutoff = fine_rays.iter().map(|r| r.radius).fold(T::infinity(), |a, b| a.min(b));
    let rel = quadrature_error / value.abs();
    if !(rel <= lit::<T>(opts.tolerance)) {
        return Err(LabError::Integration(format!(
            "reduced volume at τ = {tau}: relative error estimate {} exceeds {} (value {value})",
            to_f64(rel),
            opts.tolerance
        )));
    }
    let fan = fine_rule
        .directions
        .iter()
        .zip(fine_rays)
        .map(|(d, r)| RaySummary { direction: d.clone(), radius: r.radius, truncated: r.truncated, integral: r.fine })
        .collect();
    Ok(ReducedVolumeEstimate {
        tau,
        value,
        quadrature_error,
        radial_error,
        angular_error,
        jacobian_error,
        tail_bound,
        domain_cutoff,
        rays: fine_rule.len(),
        truncated_rays,
        fan,
    })
}

pub const VOLUME_CSV_HEADER: &str = "tau,value,error,truncated_rays";

pub fn write_volume_csv<T: Real, W: Write>(rows: &[ReducedVolumeEstimate<T>], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{VOLUME_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{:e},{:e},{:e},{}", r.tau, r.value, r.quadrature_error, r.truncated_rays)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseOptions {
    pub shoot: ShootOptions,
    pub jacobian: JacobianOptions,
    /// Allowed relative increase of `q` between consecutive times.
    pub monotone_tol: f64,
    /// Allowed relative deviation of `q` from `2ⁿ e^{|V|²}` at the smallest τ.
    pub limit_tol: f64,
}

impl Default for PointwiseOptions {
    fn default() -> Self {
        Self { shoot: ShootOptions::default(), jacobian: JacobianOptions::default(), monotone_tol: 1e-6, limit_tol: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PointwiseReport<T> {
    /// Increasing.
    pub taus: Vec<T>,
    /// `τ^{−n/2} e^{l₊} 𝕁₊` along the fixed ray.
    pub q: Vec<T>,
    /// Largest `(q(τ_{i+1}) − q(τ_i))/q(τ_i)`; non-positive for a monotone sequence.
    pub max_relative_increase: T,
    pub monotone: bool,
    pub limit_target: T,
    pub limit_relative_error: T,
    pub limit_ok: bool,
}

/// Tracks `q(τ) = τ^{−n/2} e^{l₊(τ,V)} 𝕁₊(τ,V)` for a fixed `V` (orthonormal
/// coordinates): non-increasing in τ, tending to `2ⁿ e^{|V|²}` as `τ → 0`.
pub fn check_pointwise_monotone_and_limit<T: Real>(
    v: &[T],
    bg: &FlowBackground<T>,
    taus: &[T],
    opts: &PointwiseOptions,
) -> Result<PointwiseReport<T>> {
    if taus.len() < 2 {
        return Err(LabError::Validation("need at least two times".into()));
    }
    let mut taus = taus.to_vec();
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    if taus.windows(2).any(|w| w[1] <= w[0]) || !(taus[0] > T::zero()) {
        return Err(LabError::Validation("times must be positive and distinct".into()));
    }
    let sh0 = Shooter::new(bg, opts.shoot)?;
    if v.len() != sh0.dim {
        return Err(LabError::Validation(format!("V must have {} components", sh0.dim)));
    }
    let n = sh0.dim;
    let mut q = Vec::with_capacity(taus.len());
    for &tau in &taus {
        bg.check_time(tau)?;
        let mut sh = Shooter::new(bg, opts.shoot)?;
        sh.prepare(tau)?;
        let est = sh.jacobian_richardson(v, tau, &opts.jacobian)?;
        let l = est.length / (lit::<T>(2.0) * tau.sqrt());
        q.push(tau.powf(-from_usize::<T>(n) / lit(2.0)) * l.exp() * est.value);
    }
    let max_relative_increase = q
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .fold(T::neg_infinity(), |a, b| a.max(b));
    let v2: T = v.iter().map(|x| *x * *x).sum();
    let limit_target = lit::<T>(2.0).powi(n as i32) * v2.exp();
    let limit_relative_error = (q[0] - limit_target).abs() / limit_target;
    Ok(PointwiseReport {
        taus,
        q,
        max_relative_increase,
        monotone: max_relative_increase <= lit(opts.monotone_tol),
        limit_target,
        limit_relative_error,
        limit_ok: limit_relative_error <= lit(opts.limit_tol),
    })
}
