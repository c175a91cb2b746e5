use serde::{Deserialize, Serialize};

use super::trajectory::FlowTrajectory;
use crate::error::{LabError, Result};
use crate::geom::{curvature_of_entries, f_sigma, pinching_margin, CurvatureReport};
use crate::linalg::Mat3;
use crate::scalar::{from_usize, lit, Real};

const MARGIN_SLACK: f64 = 1e-12;
const FD_STEP: f64 = 1e-5;

/// Report at `g + h·dg`, or `None` if that leaves the positive cone.
fn report_along<T: Real>(traj: &FlowTrajectory<T>, i: usize, h: T) -> Option<CurvatureReport<T>> {
    let g = traj.metrics[i].entries();
    let d = &traj.derivatives[i];
    let m: Mat3<T> = std::array::from_fn(|a| std::array::from_fn(|b| g[a][b] + h * d[a][b]));
    curvature_of_entries(&traj.model, &m, traj.metrics[i].is_diagonal()).map(|c| c.report)
}

/// Central difference of `q(report)` along the stored `dg/dt` at state `i`.
fn time_derivative<T: Real>(
    traj: &FlowTrajectory<T>,
    i: usize,
    q: impl Fn(&CurvatureReport<T>) -> T,
) -> Result<T> {
    let g = traj.metrics[i].entries();
    let d = &traj.derivatives[i];
    let gn = crate::linalg::frobenius(g);
    let dn = crate::linalg::frobenius(d);
    if dn == T::zero() {
        return Ok(T::zero());
    }
    let h = lit::<T>(FD_STEP) * gn / dn;
    let plus = report_along(traj, i, h);
    let minus = report_along(traj, i, -h);
    match (plus, minus) {
        (Some(p), Some(m)) => Ok((q(&p) - q(&m)) / (lit::<T>(2.0) * h)),
        _ => Err(LabError::Domain(format!("state {i} too close to degeneracy to differentiate"))),
    }
}

/// Max of `|dR/dt − 2|Rc|²| / max(1, |Rc|²)` over stored states.
pub fn check_scalar_evolution<T: Real>(traj: &FlowTrajectory<T>) -> Result<T> {
    if traj.len() < 3 {
        return Err(LabError::Precondition(format!("need at least 3 stored times, got {}", traj.len())));
    }
    let mut worst = T::zero();
    for i in 0..traj.len() {
        let rdot = time_derivative(traj, i, |r| r.scalar)?;
        let rc2 = traj.reports[i].rc_norm * traj.reports[i].rc_norm;
        let res = (rdot - lit::<T>(2.0) * rc2).abs() / rc2.max(T::one());
        worst = worst.max(res);
    }
    Ok(worst)
}

fn require_pinched<T: Real>(traj: &FlowTrajectory<T>, epsilon: T) -> Result<()> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(LabError::Validation(format!("ε must lie in (0, 1), got {epsilon}")));
    }
    let r0 = &traj.reports[0];
    let slack = lit::<T>(MARGIN_SLACK) * r0.scalar.abs().max(r0.max_abs_ricci());
    if !(r0.scalar > T::zero()) || pinching_margin(r0, epsilon) < -slack {
        return Err(LabError::Precondition(format!(
            "initial state violates Rc ≥ εRg for ε = {epsilon} (margin {}, R = {})",
            pinching_margin(r0, epsilon),
            r0.scalar
        )));
    }
    Ok(())
}

fn require_positive_scalar<T: Real>(traj: &FlowTrajectory<T>) -> Result<()> {
    if let Some(i) = traj.reports.iter().position(|r| !(r.scalar > T::zero())) {
        return Err(LabError::Domain(format!("R = {} ≤ 0 at t = {}", traj.reports[i].scalar, traj.times[i])));
    }
    Ok(())
}

/// Min over stored states of `pinching_margin / R`.
pub fn check_pinching_preserved<T: Real>(traj: &FlowTrajectory<T>, epsilon: T) -> Result<T> {
    require_pinched(traj, epsilon)?;
    require_positive_scalar(traj)?;
    Ok(traj
        .reports
        .iter()
        .map(|r| pinching_margin(r, epsilon) / r.scalar)
        .fold(T::infinity(), |a, b| a.min(b)))
}

/// Max over stored `t > ω` of `f_σ(t) / (3/(2(t−ω)))^σ` with `σ = ε²`.
pub fn check_decay_estimate<T: Real>(traj: &FlowTrajectory<T>, epsilon: T, omega: T) -> Result<T> {
    require_pinched(traj, epsilon)?;
    require_positive_scalar(traj)?;
    if omega > traj.t_first() {
        return Err(LabError::Precondition(format!(
            "ω = {omega} is after the trajectory start {}",
            traj.t_first()
        )));
    }
    let sigma = epsilon * epsilon;
    let mut worst = T::zero();
    for (t, r) in traj.times.iter().zip(&traj.reports) {
        if *t <= omega {
            continue;
        }
        let f = f_sigma(r, sigma)?;
        let ratio = f * (lit::<T>(2.0) * (*t - omega) / lit(3.0)).powf(sigma);
        worst = worst.max(ratio);
    }
    Ok(worst)
}

/// Max over stored states of `(f′ + (2/3)σ f^{1+1/σ}) / max(1, f^{1+1/σ})`.
pub fn check_f_ode_inequality<T: Real>(traj: &FlowTrajectory<T>, epsilon: T) -> Result<T> {
    require_pinched(traj, epsilon)?;
    require_positive_scalar(traj)?;
    let sigma = epsilon * epsilon;
    let mut worst = -T::infinity();
    for i in 0..traj.len() {
        let f = f_sigma(&traj.reports[i], sigma)?;
        let fdot = time_derivative(traj, i, |r| r.scalar.powf(sigma - lit(2.0)) * r.traceless_norm_sq)?;
        let p = f.powf(T::one() + T::one() / sigma);
        let v = fdot + lit::<T>(2.0 / 3.0) * sigma * p;
        worst = worst.max(v / p.max(T::one()));
    }
    Ok(worst)
}

/// Solution of `y′ = −(2/3)σ y^{1+1/σ}`, `y(t₀) = y₀`, evaluated in logs.
pub fn comparison_solution<T: Real>(sigma: T, t0: T, y0: T, t: T) -> T {
    if y0 == T::zero() {
        return T::zero();
    }
    let inv = (-y0.ln() / sigma).exp();
    (-sigma * (inv + lit::<T>(2.0 / 3.0) * (t - t0)).ln()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonChain<T> {
    /// max `(f − y)/max(y, tiny)`; ≤ 0 means `f ≤ y` held pointwise.
    pub max_f_excess: T,
    /// max `y / (3/(2(t−ω)))^σ`; ≤ 1 means `y` stayed under the bound.
    pub max_y_over_bound: T,
}

/// Compares `f_σ` with the exact comparison solution started from `f_σ(t₀)`
/// and that solution with the decay bound.
pub fn check_comparison_chain<T: Real>(traj: &FlowTrajectory<T>, epsilon: T, omega: T) -> Result<ComparisonChain<T>> {
    require_pinched(traj, epsilon)?;
    require_positive_scalar(traj)?;
    let sigma = epsilon * epsilon;
    let t0 = traj.t_first();
    if omega > t0 {
        return Err(LabError::Precondition(format!("ω = {omega} is after the trajectory start {t0}")));
    }
    let f0 = f_sigma(&traj.reports[0], sigma)?;
    let mut out = ComparisonChain { max_f_excess: -T::infinity(), max_y_over_bound: T::zero() };
    for (t, r) in traj.times.iter().zip(&traj.reports) {
        let f = f_sigma(r, sigma)?;
        let y = comparison_solution(sigma, t0, f0, *t);
        let excess = if y > T::zero() { (f - y) / y } else { f };
        out.max_f_excess = out.max_f_excess.max(excess);
        if *t > omega {
            let ratio = y * (lit::<T>(2.0) * (*t - omega) / lit(3.0)).powf(sigma);
            out.max_y_over_bound = out.max_y_over_bound.max(ratio);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinchingImprovementFit<T> {
    pub c_hat: T,
    pub delta_hat: T,
    pub fit_window: (T, T),
    /// Max absolute deviation of `log(|E|/R)` from the fitted line.
    pub residual: T,
    pub samples: usize,
    /// The window was shortened to the final stretch of increasing `R`.
    pub window_shrunk: bool,
    /// `|E| ≡ 0` along the run (Einstein ray); the fit is not attempted.
    pub exact_zero: bool,
}

const MIN_FIT_SAMPLES: usize = 8;
const FIT_R_FACTOR: f64 = 10.0;
const FIT_RATIO_FLOOR: f64 = 1e-8;
const ZERO_RATIO: f64 = 1e-13;

/// Fits `|E|/R = C·R^{−δ}` over the late, high-curvature part of a run.
pub fn fit_pinching_improvement<T: Real>(traj: &FlowTrajectory<T>) -> Result<PinchingImprovementFit<T>> {
    let r: Vec<T> = traj.scalar_curvatures();
    let e: Vec<T> = traj
        .reports
        .iter()
        .map(|rep| if rep.scalar > T::zero() { rep.traceless_norm_sq.sqrt() / rep.scalar } else { T::nan() })
        .collect();
    fit_pinching_samples(&traj.times, &r, &e)
}

/// Sample-level version of [`fit_pinching_improvement`]: `ratio[i] = |E|/R`.
pub fn fit_pinching_samples<T: Real>(times: &[T], scalar: &[T], ratio: &[T]) -> Result<PinchingImprovementFit<T>> {
    let n = times.len();
    if n != scalar.len() || n != ratio.len() || n == 0 {
        return Err(LabError::Validation("sample arrays must be non-empty and of equal length".into()));
    }
    if scalar.iter().any(|r| !(*r > T::zero())) {
        return Err(LabError::Domain("pinching improvement needs R > 0 throughout".into()));
    }
    if ratio.iter().all(|q| *q <= lit(ZERO_RATIO)) {
        return Ok(PinchingImprovementFit {
            c_hat: T::zero(),
            delta_hat: T::zero(),
            fit_window: (times[0], times[n - 1]),
            residual: T::zero(),
            samples: n,
            window_shrunk: false,
            exact_zero: true,
        });
    }
    let mut start = 0;
    for i in 1..n {
        if scalar[i] <= scalar[i - 1] {
            start = i;
        }
    }
    let window_shrunk = start > 0;
    let r_floor = scalar[start] * lit(FIT_R_FACTOR);
    let idx: Vec<usize> =
        (start..n).filter(|&i| scalar[i] >= r_floor && ratio[i] >= lit(FIT_RATIO_FLOOR)).collect();
    if idx.len() < MIN_FIT_SAMPLES {
        return Err(LabError::Inconclusive(format!(
            "{} samples in the fit window, need {MIN_FIT_SAMPLES}",
            idx.len()
        )));
    }
    let m = from_usize::<T>(idx.len());
    let x: Vec<T> = idx.iter().map(|&i| scalar[i].ln()).collect();
    let y: Vec<T> = idx.iter().map(|&i| ratio[i].ln()).collect();
    let xm = x.iter().copied().sum::<T>() / m;
    let ym = y.iter().copied().sum::<T>() / m;
    let sxy: T = x.iter().zip(&y).map(|(a, b)| (*a - xm) * (*b - ym)).sum();
    let sxx: T = x.iter().map(|a| (*a - xm) * (*a - xm)).sum();
    if sxx == T::zero() {
        return Err(LabError::Inconclusive("R constant over the fit window".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residual = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (*b - intercept - slope * *a).abs())
        .fold(T::zero(), |p, q| p.max(q));
    Ok(PinchingImprovementFit {
        c_hat: intercept.exp(),
        delta_hat: -slope,
        fit_window: (times[idx[0]], times[*idx.last().expect("non-empty")]),
        residual,
        samples: idx.len(),
        window_shrunk,
        exact_zero: false,
    })
}

/// Re-integration check of parabolic covariance: flows `Q·g(t₁)` and compares
/// with `Q·g(t₁ + s/Q)` at the given rescaled times `s`. Returns the max
/// relative metric error.
pub fn check_rescaling_covariance<T: Real>(traj: &FlowTrajectory<T>, t1: T, q: T, samples: &[T]) -> Result<T> {
    if !(q > T::zero()) {
        return Err(LabError::Validation("scale factor must be positive".into()));
    }
    let s_end = samples.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if !traj.contains_time(t1 + s_end / q) {
        return Err(LabError::OutOfWindow("rescaled samples leave the stored window".into()));
    }
    let g1 = traj.metric_at(t1)?.scaled(q)?;
    let mut controls = traj.controls;
    controls.t_start = T::zero();
    controls.t_end = super::Horizon::Time(s_end);
    controls.dense_output_stride = T::zero();
    controls.blowup_threshold = T::infinity();
    let other = super::integrate_flow(&traj.model, &g1, &controls)?;
    let mut worst = T::zero();
    for &s in samples {
        let a = other.metric_at(s)?;
        let b = traj.metric_at(t1 + s / q)?.scaled(q)?;
        let diff: Mat3<T> =
            std::array::from_fn(|i| std::array::from_fn(|j| a.entries()[i][j] - b.entries()[i][j]));
        worst = worst.max(crate::linalg::frobenius(&diff) / crate::linalg::frobenius(b.entries()));
    }
    Ok(worst)
}

/// `f_σ` at every stored state (`NaN` where `R ≤ 0`).
pub fn f_sigma_series<T: Real>(traj: &FlowTrajectory<T>, sigma: T) -> Vec<T> {
    traj.reports.iter().map(|r| f_sigma(r, sigma).unwrap_or(T::nan())).collect()
}
