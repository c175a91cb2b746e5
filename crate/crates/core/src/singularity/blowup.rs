use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::flow::{FlowTrajectory, Horizon};
use crate::geom::compute_curvature;
use crate::scalar::Real;

/// Parabolic rescaling `s ↦ Q·g(t_k + s/Q)` of the stored states; nothing is
/// re-integrated. Reports are recomputed from the rescaled metrics.
pub fn rescale_trajectory<T: Real>(traj: &FlowTrajectory<T>, t_k: T, q: T) -> Result<FlowTrajectory<T>> {
    if !traj.contains_time(t_k) {
        return Err(LabError::OutOfWindow(format!(
            "base time {t_k} outside stored window [{}, {}]",
            traj.t_first(),
            traj.t_last()
        )));
    }
    if !(q > T::zero()) || !q.is_finite() {
        return Err(LabError::Validation(format!("scale factor must be positive and finite, got {q}")));
    }
    let metrics = traj.metrics.iter().map(|g| g.scaled(q)).collect::<Result<Vec<_>>>()?;
    let reports = metrics.iter().map(|g| compute_curvature(&traj.model, g)).collect();
    let mut controls = traj.controls;
    controls.t_start = (controls.t_start - t_k) * q;
    if let Horizon::Time(t) = controls.t_end {
        controls.t_end = Horizon::Time((t - t_k) * q);
    }
    controls.dense_output_stride *= q;
    controls.blowup_threshold /= q;
    Ok(FlowTrajectory {
        model: traj.model,
        times: traj.times.iter().map(|t| (*t - t_k) * q).collect(),
        metrics,
        reports,
        derivatives: traj.derivatives.clone(),
        termination: traj.termination.clone(),
        t_est: traj.t_est.map(|t| (t - t_k) * q),
        controls,
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
    })
}

/// Curvature quantity used to pick base times and scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupQuantity {
    ScalarCurvature,
    /// Used when `R ≤ 0` somewhere but `|Rm| > 0` throughout.
    RmNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BlowupSequence<T> {
    pub gammas: Vec<T>,
    pub base_times: Vec<T>,
    pub base_indices: Vec<usize>,
    pub scales: Vec<T>,
    pub quantity: BlowupQuantity,
    /// `Q_k·g(t_k + s/Q_k)` for `s ∈ (−t_k Q_k, 0]`, one per base time.
    pub rescaled: Vec<FlowTrajectory<T>>,
}

/// Picks increasing times `t_k` with `q(t_k) ≥ γ_k · sup_{t ≤ t_k} q` and
/// scales `Q_k = q(t_k)`, where `q = R` when `R > 0` along the run.
///
/// The model is homogeneous, so only times are selected. Selection runs from
/// the last `γ` backwards, each time taking the latest qualifying stored time
/// before the one chosen for the next `γ`.
pub fn select_blowup_times<T: Real>(traj: &FlowTrajectory<T>, gammas: &[T]) -> Result<BlowupSequence<T>> {
    if gammas.is_empty() {
        return Err(LabError::Validation("need at least one γ".into()));
    }
    if gammas.iter().any(|g| !(*g > T::zero() && *g < T::one())) {
        return Err(LabError::Validation("every γ must lie in (0, 1)".into()));
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Validation("γ sequence must be strictly increasing".into()));
    }
    let (quantity, q): (BlowupQuantity, Vec<T>) = if traj.reports.iter().all(|r| r.scalar > T::zero()) {
        (BlowupQuantity::ScalarCurvature, traj.scalar_curvatures())
    } else if traj.reports.iter().all(|r| r.rm_norm > T::zero()) {
        (BlowupQuantity::RmNorm, traj.rm_norms())
    } else {
        return Err(LabError::Domain("curvature vanishes along the run; no blow-up scale exists".into()));
    };
    let mut running = Vec::with_capacity(q.len());
    let mut sup = T::zero();
    for v in &q {
        sup = sup.max(*v);
        running.push(sup);
    }
    let mut chosen = vec![0usize; gammas.len()];
    let mut upper = q.len();
    for k in (0..gammas.len()).rev() {
        let Some(i) = (0..upper).rev().find(|&i| q[i] >= gammas[k] * running[i]) else {
            return Err(LabError::OutOfWindow(format!(
                "stored horizon too short to realize γ_{} = {}",
                k + 1,
                gammas[k]
            )));
        };
        chosen[k] = i;
        upper = i;
    }
    let mut rescaled = Vec::with_capacity(chosen.len());
    for &i in &chosen {
        let mut r = rescale_trajectory(traj, traj.times[i], q[i])?;
        r.times.truncate(i + 1);
        r.metrics.truncate(i + 1);
        r.reports.truncate(i + 1);
        r.derivatives.truncate(i + 1);
        r.controls.t_end = Horizon::Time(T::zero());
        rescaled.push(r);
    }
    Ok(BlowupSequence {
        gammas: gammas.to_vec(),
        base_times: chosen.iter().map(|&i| traj.times[i]).collect(),
        base_indices: chosen.clone(),
        scales: chosen.iter().map(|&i| q[i]).collect(),
        quantity,
        rescaled,
    })
}
