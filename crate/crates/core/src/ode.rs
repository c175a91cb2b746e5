//! Dormand–Prince 5(4) stepper with embedded error control and a fourth-order
//! continuous extension (Hairer–Nørsett–Wanner coefficients).
//!
//! The right-hand side returns `false` when the state is outside its domain
//! (e.g. a metric lost positive-definiteness); the adaptive driver treats that
//! as a rejected step and retries with a smaller step.

use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq)]
pub enum OdeError {
    /// Right-hand side rejected the initial state.
    InvalidInitialState,
    /// Step size fell below the minimum without an acceptable step.
    StepTooSmall { t: f64, h: f64 },
}

impl std::fmt::Display for OdeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OdeError::InvalidInitialState => write!(f, "right-hand side undefined at the initial state"),
            OdeError::StepTooSmall { t, h } => write!(f, "step size {h:e} below minimum at t = {t}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl<T> {
    pub rtol: T,
    pub atol: T,
    pub h_min: T,
    pub h_max: T,
    pub safety: T,
    pub fac_min: T,
    pub fac_max: T,
}

impl<T: Real> StepControl<T> {
    pub fn new(rtol: T, atol: T) -> Self {
        Self {
            rtol,
            atol,
            h_min: T::zero(),
            h_max: T::infinity(),
            safety: lit(0.9),
            fac_min: lit(0.2),
            fac_max: lit(5.0),
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Continuous extension over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment<T> {
    pub t0: T,
    pub h: T,
    r: [Vec<T>; 5],
}

impl<T: Real> DenseSegment<T> {
    pub fn t1(&self) -> T {
        self.t0 + self.h
    }

    pub fn eval(&self, t: T, out: &mut [T]) {
        let th = (t - self.t0) / self.h;
        let th1 = T::one() - th;
        for i in 0..out.len() {
            out[i] = self.r[0][i]
                + th * (self.r[1][i] + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])));
        }
    }

    /// Time derivative of the continuous extension.
    pub fn derivative(&self, t: T, out: &mut [T]) {
        let th = (t - self.t0) / self.h;
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let c3 = T::one() - two * th;
        let c4 = th * (two - three * th);
        let c5 = two * th * (T::one() - th) * (T::one() - two * th);
        for i in 0..out.len() {
            out[i] = (self.r[1][i] + c3 * self.r[2][i] + c4 * self.r[3][i] + c5 * self.r[4][i]) / self.h;
        }
    }
}

/// Dormand–Prince integrator state.
#[derive(Debug, Clone)]
pub struct Dopri5<T> {
    pub control: StepControl<T>,
    t: T,
    y: Vec<T>,
    k: [Vec<T>; 7],
    y_trial: Vec<T>,
    y_stage: Vec<T>,
    h_next: T,
    last: Option<DenseSegment<T>>,
    accepted: usize,
    rejected: usize,
    evals: usize,
}

impl<T: Real> Dopri5<T> {
    pub fn new<F>(control: StepControl<T>, t0: T, y0: &[T], rhs: &mut F) -> Result<Self, OdeError>
    where
        F: FnMut(T, &[T], &mut [T]) -> bool,
    {
        let n = y0.len();
        let mut k: [Vec<T>; 7] = std::array::from_fn(|_| vec![T::zero(); n]);
        if !rhs(t0, y0, &mut k[0]) {
            return Err(OdeError::InvalidInitialState);
        }
        let mut s = Self {
            control,
            t: t0,
            y: y0.to_vec(),
            k,
            y_trial: vec![T::zero(); n],
            y_stage: vec![T::zero(); n],
            h_next: T::zero(),
            last: None,
            accepted: 0,
            rejected: 0,
            evals: 1,
        };
        s.h_next = s.initial_step();
        Ok(s)
    }

    fn initial_step(&self) -> T {
        let c = &self.control;
        let mut d0 = T::zero();
        let mut d1 = T::zero();
        for i in 0..self.y.len() {
            let sc = c.atol + c.rtol * self.y[i].abs();
            d0 += (self.y[i] / sc).powi(2);
            d1 += (self.k[0][i] / sc).powi(2);
        }
        let h = if d0 < lit(1e-10) || d1 < lit(1e-10) {
            lit(1e-6)
        } else {
            lit::<T>(0.01) * (d0 / d1).sqrt()
        };
        h.min(c.h_max)
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    /// Derivative at the current state (first stage of the next step).
    pub fn dydt(&self) -> &[T] {
        &self.k[0]
    }

    pub fn suggested_step(&self) -> T {
        self.h_next
    }

    pub fn set_suggested_step(&mut self, h: T) {
        self.h_next = h;
    }

    pub fn last_segment(&self) -> Option<&DenseSegment<T>> {
        self.last.as_ref()
    }

    pub fn stats(&self) -> (usize, usize, usize) {
        (self.accepted, self.rejected, self.evals)
    }

    /// Runs the seven stages with step `h`; returns the scaled error norm, or
    /// `None` if the right-hand side rejected a stage.
    fn trial<F>(&mut self, rhs: &mut F, h: T) -> Option<T>
    where
        F: FnMut(T, &[T], &mut [T]) -> bool,
    {
        let n = self.y.len();
        for s in 1..7 {
            for i in 0..n {
                let mut acc = T::zero();
                for j in 0..s {
                    if A[s][j] != 0.0 {
                        acc += lit::<T>(A[s][j]) * self.k[j][i];
                    }
                }
                self.y_stage[i] = self.y[i] + h * acc;
            }
            self.evals += 1;
            if !rhs(self.t + lit::<T>(C[s]) * h, &self.y_stage, &mut self.k[s]) {
                return None;
            }
            if s == 6 {
                self.y_trial.copy_from_slice(&self.y_stage);
            }
        }
        let c = &self.control;
        let mut err = T::zero();
        for i in 0..n {
            let mut e = T::zero();
            for j in 0..7 {
                if E[j] != 0.0 {
                    e += lit::<T>(E[j]) * self.k[j][i];
                }
            }
            let sc = c.atol + c.rtol * self.y[i].abs().max(self.y_trial[i].abs());
            err += (h * e / sc).powi(2);
        }
        Some((err / crate::scalar::from_usize(n.max(1))).sqrt())
    }

    fn accept(&mut self, h: T) {
        let n = self.y.len();
        let mut r: [Vec<T>; 5] = std::array::from_fn(|_| vec![T::zero(); n]);
        for i in 0..n {
            let ydiff = self.y_trial[i] - self.y[i];
            let bspl = h * self.k[0][i] - ydiff;
            r[0][i] = self.y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * self.k[6][i] - bspl;
            let mut acc = T::zero();
            for j in 0..7 {
                if D[j] != 0.0 {
                    acc += lit::<T>(D[j]) * self.k[j][i];
                }
            }
            r[4][i] = h * acc;
        }
        self.last = Some(DenseSegment { t0: self.t, h, r });
        self.t += h;
        self.y.copy_from_slice(&self.y_trial);
        // FSAL: last stage is the derivative at the new point.
        let (first, rest) = self.k.split_at_mut(1);
        first[0].copy_from_slice(&rest[5]);
        self.accepted += 1;
    }

    /// Makes the step exactly representable: `(t + h) − t == h`.
    fn representable(&self, h: T) -> T {
        (self.t + h) - self.t
    }

    /// One step of fixed size `h`, without error control.
    pub fn step_fixed<F>(&mut self, rhs: &mut F, h: T) -> Result<(), OdeError>
    where
        F: FnMut(T, &[T], &mut [T]) -> bool,
    {
        let h = self.representable(h);
        match self.trial(rhs, h) {
            Some(_) => {
                self.accept(h);
                Ok(())
            }
            None => Err(OdeError::StepTooSmall { t: crate::scalar::to_f64(self.t), h: crate::scalar::to_f64(h) }),
        }
    }

    /// One accepted adaptive step of size at most `h_cap`; returns the step taken.
    pub fn step_adaptive<F>(&mut self, rhs: &mut F, h_cap: T) -> Result<T, OdeError>
    where
        F: FnMut(T, &[T], &mut [T]) -> bool,
    {
        let c = self.control;
        let proposed = self.h_next;
        let mut h = proposed.min(h_cap).min(c.h_max);
        let capped = h < proposed;
        let mut rejections = 0usize;
        loop {
            h = self.representable(h);
            if !(h > c.h_min) || h == T::zero() {
                return Err(OdeError::StepTooSmall { t: crate::scalar::to_f64(self.t), h: crate::scalar::to_f64(h) });
            }
            match self.trial(rhs, h) {
                Some(err) if err <= T::one() => {
                    let fac = if err == T::zero() {
                        c.fac_max
                    } else {
                        (c.safety * err.powf(lit(-0.2))).min(c.fac_max).max(c.fac_min)
                    };
                    self.accept(h);
                    // a cap that shortened the step says nothing about the next one
                    self.h_next = if capped && rejections == 0 { proposed.max(h * fac) } else { h * fac };
                    self.h_next = self.h_next.min(c.h_max);
                    return Ok(h);
                }
                Some(err) => {
                    self.rejected += 1;
                    rejections += 1;
                    let fac = (c.safety * err.powf(lit(-0.2))).max(c.fac_min).min(T::one());
                    h *= fac;
                    self.h_next = h;
                }
                None => {
                    self.rejected += 1;
                    rejections += 1;
                    h *= lit(0.25);
                    self.h_next = h;
                }
            }
        }
    }
}

/// Integrates with a fixed number of equal steps and returns the states at every node.
pub fn integrate_fixed<T, F>(rhs: &mut F, t0: T, t1: T, y0: &[T], steps: usize) -> Result<Vec<Vec<T>>, OdeError>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> bool,
{
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y0.to_vec());
    fixed_steps(rhs, t0, t1, y0, steps, |y| out.push(y.to_vec()))?;
    Ok(out)
}

/// Final state of [`integrate_fixed`] without storing the intermediate ones.
pub fn integrate_fixed_end<T, F>(rhs: &mut F, t0: T, t1: T, y0: &[T], steps: usize) -> Result<Vec<T>, OdeError>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> bool,
{
    let mut last = y0.to_vec();
    fixed_steps(rhs, t0, t1, y0, steps, |y| last.copy_from_slice(y))?;
    Ok(last)
}

fn fixed_steps<T, F, G>(rhs: &mut F, t0: T, t1: T, y0: &[T], steps: usize, mut visit: G) -> Result<(), OdeError>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> bool,
    G: FnMut(&[T]),
{
    let mut solver = Dopri5::new(StepControl::new(lit(1e-12), lit(1e-12)), t0, y0, rhs)?;
    let h = (t1 - t0) / crate::scalar::from_usize(steps);
    for s in 0..steps {
        let target = t0 + h * crate::scalar::from_usize(s + 1);
        solver.step_fixed(rhs, target - solver.t())?;
        visit(solver.y());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_adaptive() {
        let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[0];
            dy[1] = y[0] - 0.5 * y[1];
            true
        };
        let mut s = Dopri5::new(StepControl::new(1e-10, 1e-12), 0.0, &[1.0, 0.0], &mut rhs).unwrap();
        while s.t() < 5.0 {
            let cap = 5.0 - s.t();
            s.step_adaptive(&mut rhs, cap).unwrap();
        }
        assert_eq!(s.t(), 5.0);
        let y0 = (-5.0f64).exp();
        let y1 = 2.0 * ((-2.5f64).exp() - (-5.0f64).exp());
        assert!((s.y()[0] - y0).abs() < 1e-9);
        assert!((s.y()[1] - y1).abs() < 1e-9);
    }

    #[test]
    fn dense_output_and_derivative() {
        let mut rhs = |t: f64, _y: &[f64], dy: &mut [f64]| {
            dy[0] = t.cos();
            true
        };
        let mut s = Dopri5::new(StepControl::new(1e-12, 1e-14), 0.0, &[0.0], &mut rhs).unwrap();
        let mut worst = 0.0f64;
        let mut worst_d = 0.0f64;
        while s.t() < 3.0 {
            s.step_adaptive(&mut rhs, 3.0 - s.t()).unwrap();
            let seg = s.last_segment().unwrap().clone();
            for q in 1..4 {
                let t = seg.t0 + seg.h * q as f64 / 4.0;
                let mut v = [0.0];
                seg.eval(t, &mut v);
                worst = worst.max((v[0] - t.sin()).abs());
                seg.derivative(t, &mut v);
                worst_d = worst_d.max((v[0] - t.cos()).abs());
            }
        }
        assert!(worst < 1e-9, "{worst}");
        assert!(worst_d < 1e-7, "{worst_d}");
    }

    #[test]
    fn invalid_states_shrink_the_step() {
        // y' = -1 from y = 1; states with y <= 0 are invalid, so the driver must approach 0 from above.
        let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -1.0;
            y[0] > 0.0
        };
        let mut s = Dopri5::new(StepControl::new(1e-8, 1e-12), 0.0, &[1.0], &mut rhs).unwrap();
        s.set_suggested_step(0.6);
        for _ in 0..20 {
            if s.step_adaptive(&mut rhs, f64::INFINITY).is_err() {
                break;
            }
            assert!(s.y()[0] > 0.0);
        }
    }

    #[test]
    fn fixed_steps_are_fifth_order() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
            true
        };
        let err = |n| {
            let out = integrate_fixed(&mut rhs.clone(), 0.0, 2.0, &[0.0, 1.0], n).unwrap();
            (out[n][0] - 2f64.sin()).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 25.0, "ratio {ratio}");
    }
}
