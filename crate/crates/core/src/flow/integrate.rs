use super::trajectory::{FlowControls, FlowTrajectory, Horizon, Termination};
use crate::error::{LabError, Result};
use crate::geom::{compute_curvature, curvature_of_entries, FrameMetric, HomogeneousModel};
use crate::linalg::Mat3;
use crate::ode::{Dopri5, StepControl};
use crate::scalar::{from_usize, lit, Real};

// state layout: g11 g22 g33 g12 g13 g23
fn pack<T: Real>(g: &Mat3<T>) -> [T; 6] {
    [g[0][0], g[1][1], g[2][2], g[0][1], g[0][2], g[1][2]]
}

fn unpack<T: Real>(y: &[T]) -> Mat3<T> {
    [[y[0], y[3], y[4]], [y[3], y[1], y[5]], [y[4], y[5], y[2]]]
}

/// Solves `dg/dt = −2 Rc(g)` from `g0` with the Dormand–Prince pair.
///
/// Every accepted step is stored; `dense_output_stride > 0` adds interpolated
/// samples on a regular grid. Steps are capped so that `h · max|rᵢ| ≤
/// max_relative_change`, which keeps the last stored state of a finite-time
/// singularity inside the domain of positive-definite metrics.
pub fn integrate_flow<T: Real>(
    model: &HomogeneousModel<T>,
    g0: &FrameMetric<T>,
    controls: &FlowControls<T>,
) -> Result<FlowTrajectory<T>> {
    controls.validate()?;
    let diagonal = g0.is_diagonal();
    let mut rhs = |_t: T, y: &[T], dy: &mut [T]| -> bool {
        if y.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let g = unpack(y);
        let Some(c) = curvature_of_entries(model, &g, diagonal) else {
            return false;
        };
        let m2 = lit::<T>(-2.0);
        dy[0] = m2 * c.ricci_frame[0][0];
        dy[1] = m2 * c.ricci_frame[1][1];
        dy[2] = m2 * c.ricci_frame[2][2];
        if diagonal {
            // Milnor frames keep diagonal metrics diagonal.
            dy[3] = T::zero();
            dy[4] = T::zero();
            dy[5] = T::zero();
        } else {
            dy[3] = m2 * c.ricci_frame[0][1];
            dy[4] = m2 * c.ricci_frame[0][2];
            dy[5] = m2 * c.ricci_frame[1][2];
        }
        true
    };

    let mut step = StepControl::new(controls.rel_tol, controls.abs_tol);
    step.h_min = T::zero();
    let y0 = pack(g0.entries());
    let mut solver = Dopri5::new(step, controls.t_start, &y0, &mut rhs)
        .map_err(|e| LabError::Integration(e.to_string()))?;

    let mut traj = FlowTrajectory {
        model: *model,
        times: Vec::new(),
        metrics: Vec::new(),
        reports: Vec::new(),
        derivatives: Vec::new(),
        termination: Termination::ReachedTEnd,
        t_est: None,
        controls: *controls,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    push_state(&mut traj, controls.t_start, *g0, unpack(solver.dydt()));

    let t_end = match controls.t_end {
        Horizon::Time(t) => t,
        Horizon::UntilSingularity => T::infinity(),
    };
    let stride = controls.dense_output_stride;
    let mut next_dense = 1usize;
    let mut buf = vec![T::zero(); 6];
    let mut dbuf = vec![T::zero(); 6];

    let termination = loop {
        let last = *traj.reports.last().expect("initial state stored");
        if last.rm_norm >= controls.blowup_threshold {
            break Termination::CurvatureBlowup;
        }
        if solver.t() >= t_end {
            break Termination::ReachedTEnd;
        }
        let (acc, _, _) = solver.stats();
        if acc >= controls.max_steps {
            break Termination::StepFailure(format!("max_steps ({}) exceeded", controls.max_steps));
        }
        let mut cap = t_end - solver.t();
        let speed = last.max_abs_ricci();
        if speed > T::zero() {
            cap = cap.min(controls.max_relative_change / speed);
        }
        if let Err(e) = solver.step_adaptive(&mut rhs, cap) {
            break Termination::StepFailure(format!("lost positive-definiteness or step underflow: {e}"));
        }
        let seg = solver.last_segment().expect("accepted step").clone();
        if stride > T::zero() {
            loop {
                let td = controls.t_start + stride * from_usize::<T>(next_dense);
                if td >= seg.t1() {
                    break;
                }
                if td > seg.t0 {
                    seg.eval(td, &mut buf);
                    seg.derivative(td, &mut dbuf);
                    match state_metric(&buf, diagonal) {
                        Some(g) => push_state(&mut traj, td, g, unpack(&dbuf)),
                        None => break,
                    }
                }
                next_dense += 1;
            }
        }
        let Some(g) = state_metric(solver.y(), diagonal) else {
            break Termination::StepFailure("accepted state is not positive-definite".into());
        };
        push_state(&mut traj, solver.t(), g, unpack(solver.dydt()));
    };

    let (acc, rej, _) = solver.stats();
    traj.accepted_steps = acc;
    traj.rejected_steps = rej;
    if termination == Termination::CurvatureBlowup {
        traj.t_est = Some(extrapolate_blowup_time(&traj));
    }
    traj.termination = termination;
    Ok(traj)
}

fn state_metric<T: Real>(y: &[T], diagonal: bool) -> Option<FrameMetric<T>> {
    if diagonal {
        FrameMetric::diagonal([y[0], y[1], y[2]]).ok()
    } else {
        FrameMetric::new(unpack(y)).ok()
    }
}

fn push_state<T: Real>(traj: &mut FlowTrajectory<T>, t: T, g: FrameMetric<T>, dg: Mat3<T>) {
    traj.reports.push(compute_curvature(&traj.model, &g));
    traj.times.push(t);
    traj.metrics.push(g);
    traj.derivatives.push(dg);
}

/// Fits `1/|Rm|` linearly in `t` over the last decade of curvature growth and
/// returns its zero, never earlier than the last stored time.
pub fn extrapolate_blowup_time<T: Real>(traj: &FlowTrajectory<T>) -> T {
    let rm = traj.rm_norms();
    let last = *rm.last().expect("non-empty");
    let mut idx: Vec<usize> = (0..rm.len()).filter(|&i| rm[i] >= last / lit(10.0) && rm[i] > T::zero()).collect();
    if idx.len() < 2 {
        idx = (rm.len().saturating_sub(2)..rm.len()).collect();
    }
    let n = from_usize::<T>(idx.len());
    let t_mean = idx.iter().map(|&i| traj.times[i]).sum::<T>() / n;
    let y_mean = idx.iter().map(|&i| T::one() / rm[i]).sum::<T>() / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for &i in &idx {
        let dt = traj.times[i] - t_mean;
        sxy += dt * (T::one() / rm[i] - y_mean);
        sxx += dt * dt;
    }
    let t_last = traj.t_last();
    if sxx == T::zero() || !(sxy < T::zero()) {
        return t_last;
    }
    let slope = sxy / sxx;
    (t_mean - y_mean / slope).max(t_last)
}
