use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::trajectory::{FlowControls, FlowTrajectory, Termination};
use crate::geom::{f_sigma, pinching_margin, ModelKind};
use crate::linalg::Mat3;
use crate::scalar::Real;

pub const TRAJECTORY_CSV_HEADER: &str = "t,g11,g22,g33,r1,r2,r3,R,rm_norm,f_sigma,margin";

/// Writes one CSV row per stored state. `f_sigma` is `NaN` where `R ≤ 0`.
pub fn write_trajectory_csv<T: Real, W: Write>(
    traj: &FlowTrajectory<T>,
    sigma: T,
    epsilon: T,
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
    for ((t, g), r) in traj.times.iter().zip(&traj.metrics).zip(&traj.reports) {
        let d = g.diag_entries();
        let f = f_sigma(r, sigma).unwrap_or(T::nan());
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            t,
            d[0],
            d[1],
            d[2],
            r.ricci_eigs[0],
            r.ricci_eigs[1],
            r.ricci_eigs[2],
            r.scalar,
            r.rm_norm,
            f,
            pinching_margin(r, epsilon)
        )?;
    }
    Ok(())
}

/// Descriptor written next to a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrajectoryManifest<T> {
    pub model: ModelKind,
    pub lambda: [T; 3],
    pub g0: Mat3<T>,
    pub controls: FlowControls<T>,
    pub sigma: T,
    pub epsilon: T,
    pub termination: Termination,
    pub t_est: Option<T>,
    pub samples: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub code_version: String,
}

impl<T: Real> TrajectoryManifest<T> {
    pub fn new(traj: &FlowTrajectory<T>, sigma: T, epsilon: T) -> Self {
        Self {
            model: traj.model.kind,
            lambda: traj.model.lambda,
            g0: *traj.metrics[0].entries(),
            controls: traj.controls,
            sigma,
            epsilon,
            termination: traj.termination.clone(),
            t_est: traj.t_est,
            samples: traj.len(),
            accepted_steps: traj.accepted_steps,
            rejected_steps: traj.rejected_steps,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}
