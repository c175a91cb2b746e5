use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::flow::FlowTrajectory;
use crate::scalar::{from_usize, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularityKind {
    TypeI,
    TypeIIa,
    TypeIIb,
    TypeIII,
    NoSingularityInWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// `|slope|` of `log s` against `log` time below which `s` counts as bounded.
    pub slope_threshold: f64,
    /// Decades of curvature (finite time) or time (immortal) required.
    pub min_decades: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { slope_threshold: 0.05, min_decades: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SingularityVerdict<T> {
    pub kind: SingularityKind,
    /// `sup (T−t)|Rm|` for finite `T`, `sup (t−t₀)|Rm|` otherwise.
    pub statistic: T,
    /// Max deviation of `log s` from the fitted line in the final decade.
    pub confidence: T,
    pub slope: T,
    /// Time range the fit used.
    pub fit_window: (T, T),
    /// Stored range the verdict is relative to.
    pub window: (T, T),
    pub t_est: Option<T>,
}

struct LineFit<T> {
    slope: T,
    residual: T,
}

fn fit_line<T: Real>(x: &[T], y: &[T]) -> Option<LineFit<T>> {
    if x.len() < 3 {
        return None;
    }
    let n = from_usize::<T>(x.len());
    let xm = x.iter().copied().sum::<T>() / n;
    let ym = y.iter().copied().sum::<T>() / n;
    let sxy: T = x.iter().zip(y).map(|(a, b)| (*a - xm) * (*b - ym)).sum();
    let sxx: T = x.iter().map(|a| (*a - xm) * (*a - xm)).sum();
    if sxx == T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let residual = x
        .iter()
        .zip(y)
        .map(|(a, b)| (*b - ym - slope * (*a - xm)).abs())
        .fold(T::zero(), |p, q| p.max(q));
    Some(LineFit { slope, residual })
}

/// Classifies the singularity behaviour of a run.
///
/// With a finite `T_est` the statistic is `s = (T−t)|Rm|`, fitted against
/// `log(T−t)` over the last decade of curvature growth: a slope below
/// `−threshold` means `s` grows as `t → T` (Type IIa), otherwise Type I.
/// Without one, `s = (t−t₀)|Rm|` with `t₀` the first stored time is fitted
/// against `log(t−t₀)` over the last decade of elapsed time: slope above
/// `threshold` means Type IIb, otherwise Type III.
pub fn classify_singularity<T: Real>(traj: &FlowTrajectory<T>, opts: &ClassifyOptions) -> Result<SingularityVerdict<T>> {
    let rm = traj.rm_norms();
    let window = (traj.t_first(), traj.t_last());
    if rm.iter().all(|v| *v == T::zero()) {
        return Ok(SingularityVerdict {
            kind: SingularityKind::NoSingularityInWindow,
            statistic: T::zero(),
            confidence: T::zero(),
            slope: T::zero(),
            fit_window: window,
            window,
            t_est: traj.t_est,
        });
    }
    let decades = lit::<T>(10.0).powf(lit(opts.min_decades));
    let threshold = lit::<T>(opts.slope_threshold);
    match traj.t_est {
        Some(t_end) => {
            let positive: Vec<T> = rm.iter().copied().filter(|v| *v > T::zero()).collect();
            let lo = positive.iter().copied().fold(T::infinity(), |a, b| a.min(b));
            let hi = positive.iter().copied().fold(T::zero(), |a, b| a.max(b));
            if hi < lo * decades {
                return Err(LabError::Inconclusive(format!(
                    "curvature spans {:.2} decades, need {}",
                    (hi / lo).log10(),
                    opts.min_decades
                )));
            }
            let last = *rm.last().expect("non-empty");
            let idx: Vec<usize> = (0..traj.len())
                .filter(|&i| rm[i] >= last / lit(10.0) && t_end - traj.times[i] > T::zero())
                .collect();
            let x: Vec<T> = idx.iter().map(|&i| (t_end - traj.times[i]).ln()).collect();
            let y: Vec<T> = idx.iter().map(|&i| ((t_end - traj.times[i]) * rm[i]).ln()).collect();
            let fit = fit_line(&x, &y)
                .ok_or_else(|| LabError::Inconclusive("too few samples in the last decade of growth".into()))?;
            let statistic = (0..traj.len())
                .filter(|&i| traj.times[i] < t_end)
                .map(|i| (t_end - traj.times[i]) * rm[i])
                .fold(T::zero(), |a, b| a.max(b));
            let kind = if fit.slope < -threshold { SingularityKind::TypeIIa } else { SingularityKind::TypeI };
            Ok(SingularityVerdict {
                kind,
                statistic,
                confidence: fit.residual,
                slope: fit.slope,
                fit_window: (traj.times[idx[0]], traj.times[*idx.last().expect("fit has samples")]),
                window,
                t_est: Some(t_end),
            })
        }
        None => {
            let t0 = traj.t_first();
            let el: Vec<T> = traj.times.iter().map(|t| *t - t0).collect();
            let idx_pos: Vec<usize> = (0..traj.len()).filter(|&i| el[i] > T::zero()).collect();
            let Some(&first) = idx_pos.first() else {
                return Err(LabError::Inconclusive("no positive times in the stored window".into()));
            };
            let e_hi = el[traj.len() - 1];
            if e_hi < el[first] * decades {
                return Err(LabError::Inconclusive(format!(
                    "time spans {:.2} decades, need {}",
                    (e_hi / el[first]).log10(),
                    opts.min_decades
                )));
            }
            let idx: Vec<usize> = idx_pos.iter().copied().filter(|&i| el[i] >= e_hi / lit(10.0)).collect();
            let x: Vec<T> = idx.iter().map(|&i| el[i].ln()).collect();
            let y: Vec<T> = idx.iter().map(|&i| (el[i] * rm[i]).max(T::min_positive_value()).ln()).collect();
            let fit = fit_line(&x, &y)
                .ok_or_else(|| LabError::Inconclusive("too few samples in the final decade".into()))?;
            let statistic = idx_pos.iter().map(|&i| el[i] * rm[i]).fold(T::zero(), |a, b| a.max(b));
            let kind = if fit.slope > threshold { SingularityKind::TypeIIb } else { SingularityKind::TypeIII };
            let t_hi = traj.t_last();
            Ok(SingularityVerdict {
                kind,
                statistic,
                confidence: fit.residual,
                slope: fit.slope,
                fit_window: (traj.times[idx[0]], t_hi),
                window,
                t_est: None,
            })
        }
    }
}
