use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geom::{compute_curvature, CurvatureReport, FrameMetric, HomogeneousModel};
use crate::linalg::Mat3;
use crate::scalar::{lit, Real};

/// Where the run stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon<T> {
    Time(T),
    UntilSingularity,
}

/// Step control and stopping rules for [`super::integrate_flow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowControls<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub t_start: T,
    pub t_end: Horizon<T>,
    pub max_steps: usize,
    /// Extra dense-output samples every `stride` time units (0 disables them).
    pub dense_output_stride: T,
    /// `|Rm|` at or above which the run counts as a numerical blow-up.
    pub blowup_threshold: T,
    /// Cap on `h · max|rᵢ|`, the relative metric change allowed in one step.
    pub max_relative_change: T,
}

impl<T: Real> Default for FlowControls<T> {
    fn default() -> Self {
        Self {
            rel_tol: lit(1e-11),
            abs_tol: lit(1e-13),
            t_start: T::zero(),
            t_end: Horizon::UntilSingularity,
            max_steps: 200_000,
            dense_output_stride: T::zero(),
            blowup_threshold: lit(1e8),
            max_relative_change: lit(0.1),
        }
    }
}

impl<T: Real> FlowControls<T> {
    pub fn until(t_end: T) -> Self {
        Self { t_end: Horizon::Time(t_end), ..Self::default() }
    }

    pub fn with_tolerances(mut self, rel_tol: T, abs_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn starting_at(mut self, t_start: T) -> Self {
        self.t_start = t_start;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let max_tol = lit::<T>(1e-2);
        for (name, tol) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(tol > T::zero() && tol <= max_tol) {
                return Err(LabError::Validation(format!("{name} must lie in (0, 1e-2], got {tol}")));
            }
        }
        if !(self.blowup_threshold > T::zero()) {
            return Err(LabError::Validation("blowup_threshold must be positive".into()));
        }
        if !(self.dense_output_stride >= T::zero()) {
            return Err(LabError::Validation("dense_output_stride must be non-negative".into()));
        }
        if !(self.max_relative_change > T::zero()) {
            return Err(LabError::Validation("max_relative_change must be positive".into()));
        }
        if !self.t_start.is_finite() {
            return Err(LabError::Validation("t_start must be finite".into()));
        }
        if let Horizon::Time(t) = self.t_end {
            if !(t > self.t_start) || !t.is_finite() {
                return Err(LabError::Validation("t_end must be finite and after t_start".into()));
            }
        }
        if self.max_steps == 0 {
            return Err(LabError::Validation("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Termination {
    ReachedTEnd,
    CurvatureBlowup,
    StepFailure(String),
}

/// One Ricci flow run: stored states with their curvature and time derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FlowTrajectory<T> {
    pub model: HomogeneousModel<T>,
    pub times: Vec<T>,
    pub metrics: Vec<FrameMetric<T>>,
    pub reports: Vec<CurvatureReport<T>>,
    /// `dg/dt` at each stored time (dense-output derivative).
    pub derivatives: Vec<Mat3<T>>,
    pub termination: Termination,
    /// Estimated maximal time; `None` when no finite-time blow-up was observed.
    pub t_est: Option<T>,
    pub controls: FlowControls<T>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<T: Real> FlowTrajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_first(&self) -> T {
        self.times[0]
    }

    pub fn t_last(&self) -> T {
        *self.times.last().expect("trajectory has at least one state")
    }

    pub fn contains_time(&self, t: T) -> bool {
        t >= self.t_first() && t <= self.t_last()
    }

    /// Index of the stored interval `[times[i], times[i+1]]` containing `t`.
    fn interval(&self, t: T) -> Result<usize> {
        if !self.contains_time(t) {
            return Err(LabError::OutOfWindow(format!(
                "time {t} outside stored window [{}, {}]",
                self.t_first(),
                self.t_last()
            )));
        }
        let i = self.times.partition_point(|&s| s <= t);
        Ok(i.saturating_sub(1).min(self.times.len().saturating_sub(2)))
    }

    /// Metric at an arbitrary time in the window by cubic Hermite interpolation
    /// of stored states and derivatives.
    pub fn metric_at(&self, t: T) -> Result<FrameMetric<T>> {
        if self.times.len() == 1 {
            if t == self.times[0] {
                return Ok(self.metrics[0]);
            }
            return Err(LabError::OutOfWindow("single-state trajectory".into()));
        }
        let i = self.interval(t)?;
        if t == self.times[i] {
            return Ok(self.metrics[i]);
        }
        if t == self.times[i + 1] {
            return Ok(self.metrics[i + 1]);
        }
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let h00 = two * s * s * s - three * s * s + T::one();
        let h10 = s * s * s - two * s * s + s;
        let h01 = -two * s * s * s + three * s * s;
        let h11 = s * s * s - s * s;
        let g0 = self.metrics[i].entries();
        let g1 = self.metrics[i + 1].entries();
        let d0 = &self.derivatives[i];
        let d1 = &self.derivatives[i + 1];
        let m: Mat3<T> = std::array::from_fn(|a| {
            std::array::from_fn(|b| h00 * g0[a][b] + h10 * h * d0[a][b] + h01 * g1[a][b] + h11 * h * d1[a][b])
        });
        if self.metrics[i].is_diagonal() && self.metrics[i + 1].is_diagonal() {
            FrameMetric::diagonal([m[0][0], m[1][1], m[2][2]])
        } else {
            FrameMetric::new(m)
        }
    }

    pub fn report_at(&self, t: T) -> Result<CurvatureReport<T>> {
        Ok(compute_curvature(&self.model, &self.metric_at(t)?))
    }

    pub fn scalar_curvatures(&self) -> Vec<T> {
        self.reports.iter().map(|r| r.scalar).collect()
    }

    pub fn rm_norms(&self) -> Vec<T> {
        self.reports.iter().map(|r| r.rm_norm).collect()
    }
}
