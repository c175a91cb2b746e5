use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::flow::FlowTrajectory;
use crate::geom::{ball_volume_at, BallOptions};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NoncollapseReport<T> {
    pub t0: T,
    pub r: T,
    pub kappa: T,
    /// `|Rm| ≤ r⁻²` on the whole parabolic window `[t₀ − r², t₀]`.
    pub curvature_bound_ok: bool,
    pub max_rm_in_window: T,
    /// `Vol_{g(t₀)} B(r)`.
    pub volume: T,
    pub kappa_achieved: T,
    pub pass: bool,
}

impl<T: Real> NoncollapseReport<T> {
    /// Human-readable reason for a failure, `None` on a pass.
    pub fn diagnosis(&self) -> Option<&'static str> {
        match (self.curvature_bound_ok, self.kappa_achieved >= self.kappa) {
            (true, true) => None,
            (false, _) => Some("curvature hypothesis fails on the parabolic window"),
            (true, false) => Some("volume ratio below κ: collapsed at this scale"),
        }
    }
}

/// κ-noncollapse test at the single scale `r`; the ball is measured in `g(t₀)`.
pub fn kappa_noncollapse_check<T: Real>(
    traj: &FlowTrajectory<T>,
    t0: T,
    r: T,
    kappa: T,
    opts: &BallOptions,
) -> Result<NoncollapseReport<T>> {
    if !(r > T::zero()) || !r.is_finite() {
        return Err(LabError::Validation(format!("scale r must be positive, got {r}")));
    }
    if !(kappa > T::zero()) {
        return Err(LabError::Validation(format!("κ must be positive, got {kappa}")));
    }
    let start = t0 - r * r;
    if !traj.contains_time(t0) || !traj.contains_time(start) {
        return Err(LabError::OutOfWindow(format!(
            "parabolic window [{start}, {t0}] not covered by stored [{}, {}]",
            traj.t_first(),
            traj.t_last()
        )));
    }
    let mut max_rm = traj.report_at(t0)?.rm_norm.max(traj.report_at(start)?.rm_norm);
    for (t, rep) in traj.times.iter().zip(&traj.reports) {
        if *t >= start && *t <= t0 {
            max_rm = max_rm.max(rep.rm_norm);
        }
    }
    let curvature_bound_ok = max_rm <= T::one() / (r * r);
    let g = traj.metric_at(t0)?;
    let volume = ball_volume_at(&traj.model, &g, &[r], opts)?.volumes[0];
    let kappa_achieved = volume / (r * r * r);
    Ok(NoncollapseReport {
        t0,
        r,
        kappa,
        curvature_bound_ok,
        max_rm_in_window: max_rm,
        volume,
        kappa_achieved,
        pass: curvature_bound_ok && kappa_achieved >= kappa,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct VolumeRatioSequence<T> {
    pub times: Vec<T>,
    /// `Vol_{g(tₙ)} B(√tₙ) / tₙ^{3/2}`.
    pub ratios: Vec<T>,
    pub infimum: T,
}

/// Unit-ball volume ratios of the rescaled metrics `g(tₙ)/tₙ`.
pub fn volume_ratio_sequence<T: Real>(
    traj: &FlowTrajectory<T>,
    times: &[T],
    opts: &BallOptions,
) -> Result<VolumeRatioSequence<T>> {
    if times.is_empty() {
        return Err(LabError::Validation("need at least one time".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Validation("times must be strictly increasing".into()));
    }
    let mut ratios = Vec::with_capacity(times.len());
    for &t in times {
        if !(t > T::zero()) {
            return Err(LabError::Validation(format!("times must be positive, got {t}")));
        }
        if !traj.contains_time(t) {
            let beyond = match traj.t_est {
                Some(te) => format!(" (flow ends at T ≈ {te})"),
                None => String::new(),
            };
            return Err(LabError::OutOfWindow(format!("t = {t} beyond the stored horizon{beyond}")));
        }
        let g = traj.metric_at(t)?.scaled(T::one() / t)?;
        ratios.push(ball_volume_at(&traj.model, &g, &[T::one()], opts)?.volumes[0]);
    }
    let infimum = ratios.iter().copied().fold(T::infinity(), |a, b| a.min(b));
    Ok(VolumeRatioSequence { times: times.to_vec(), ratios, infimum })
}
