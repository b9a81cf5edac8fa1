//! Adaptive integrators for autonomous ODEs `ẏ = f(y)`.
//!
//! [`dopri5`] is the Dormand–Prince 5(4) pair with its fourth-order
//! continuous extension; [`rosenbrock4`] is a linearly implicit 4(3)
//! Rosenbrock method for stiff problems such as finite-element models.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::RMat;
use crate::{Result, SsmError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 5_000_000,
        }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Tolerances {
            rtol,
            atol,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.rtol > 0.0) || !(self.atol >= 0.0) {
            return Err(SsmError::invalid(
                "tolerances",
                "rtol must be positive and atol non-negative",
            ));
        }
        Ok(())
    }
}

fn err_norm(err: &[f64], y0: &[f64], y1: &[f64], tol: &Tolerances) -> f64 {
    let mut s = 0.0;
    for i in 0..err.len() {
        let sc = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / sc;
        s += r * r;
    }
    (s / err.len().max(1) as f64).sqrt()
}

fn initial_step<F: Fn(&[f64]) -> Vec<f64>>(
    f: &F,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    tol: &Tolerances,
    order: i32,
) -> f64 {
    let scale = |v: &[f64]| -> f64 {
        let s: f64 = v
            .iter()
            .zip(y0)
            .map(|(x, y)| {
                let sc = tol.atol + tol.rtol * y.abs();
                (x / sc) * (x / sc)
            })
            .sum();
        (s / v.len().max(1) as f64).sqrt()
    };
    let d0 = scale(y0);
    let d1 = scale(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span.abs());
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + h0 * d).collect();
    let f1 = f(&y1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scale(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / (order as f64 + 1.0))
    };
    (100.0 * h0).min(h1).min(span.abs())
}

/// One accepted Dormand–Prince step with its continuous extension.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    rc: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn y0(&self) -> &[f64] {
        &self.rc[0]
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        (0..self.rc[0].len())
            .map(|i| {
                self.rc[0][i]
                    + th * (self.rc[1][i] + th1 * (self.rc[2][i] + th * (self.rc[3][i] + th1 * self.rc[4][i])))
            })
            .collect()
    }

    pub fn eval_component(&self, t: f64, i: usize) -> f64 {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        self.rc[0][i] + th * (self.rc[1][i] + th1 * (self.rc[2][i] + th * (self.rc[3][i] + th1 * self.rc[4][i])))
    }
}

/// Piecewise continuous solution assembled from accepted steps.
#[derive(Clone, Debug, Default)]
pub struct DenseSolution {
    pub steps: Vec<DenseStep>,
    pub t_end: f64,
}

impl DenseSolution {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let k = self
            .steps
            .partition_point(|s| s.t1() < t)
            .min(self.steps.len().saturating_sub(1));
        self.steps[k].eval(t)
    }
}

/// What to do after an accepted step.
pub enum StepAction {
    Continue,
    /// Stop at this time, which lies inside the step just taken.
    StopAt(f64),
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for &(c, k) in terms {
        if c == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(k) {
            *o += h * c * x;
        }
    }
    out
}

/// Integrates `ẏ = f(y)` from `t0` towards `t_max` with Dormand–Prince 5(4).
///
/// Steps land exactly on every time in `stops` (ascending, inside the
/// interval). After each accepted step `on_step` may end the integration.
pub fn dopri5<F, C>(
    f: F,
    t0: f64,
    y0: &[f64],
    t_max: f64,
    stops: &[f64],
    tol: &Tolerances,
    mut on_step: C,
) -> Result<DenseSolution>
where
    F: Fn(&[f64]) -> Vec<f64>,
    C: FnMut(&DenseStep) -> Result<StepAction>,
{
    tol.check()?;
    let mut sol = DenseSolution {
        steps: Vec::new(),
        t_end: t0,
    };
    if t_max <= t0 {
        return Ok(sol);
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = f(&y);
    let mut h = initial_step(&f, &y, &k1, t_max - t0, tol, 5);
    let mut next_stop = stops.iter().position(|&s| s > t0).unwrap_or(stops.len());
    let mut rejected = false;
    let mut count = 0usize;
    while t < t_max {
        count += 1;
        if count > tol.max_steps {
            return Err(SsmError::TooManySteps(tol.max_steps));
        }
        let target = if next_stop < stops.len() {
            stops[next_stop].min(t_max)
        } else {
            t_max
        };
        let mut hit = false;
        if t + h >= target || target - (t + h) < 1e-12 * target.abs().max(1.0) {
            h = target - t;
            hit = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) && !hit {
            return Err(SsmError::StepFailure { t, h });
        }
        let k2 = f(&axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(&axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(&axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(&axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(&axpy(
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ));
        let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(&y1);
        let err: Vec<f64> = (0..y.len())
            .map(|i| h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]))
            .collect();
        let e = err_norm(&err, &y, &y1, tol);
        if !e.is_finite() {
            h *= 0.1;
            rejected = true;
            continue;
        }
        if e <= 1.0 {
            let n = y.len();
            let mut rc = [y.clone(), vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for i in 0..n {
                let dy = y1[i] - y[i];
                let bspl = h * k1[i] - dy;
                rc[1][i] = dy;
                rc[2][i] = bspl;
                rc[3][i] = dy - h * k7[i] - bspl;
                rc[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let step = DenseStep { t0: t, h, rc };
            let t_new = if hit { target } else { t + h };
            let action = on_step(&step)?;
            sol.steps.push(step);
            t = t_new;
            y = y1;
            k1 = k7;
            if hit && next_stop < stops.len() && target == stops[next_stop] {
                next_stop += 1;
            }
            if let StepAction::StopAt(ts) = action {
                sol.t_end = ts;
                return Ok(sol);
            }
            let mut fac = 0.9 * e.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if rejected {
                fac = fac.min(1.0);
            }
            if !hit {
                h *= fac;
            } else {
                h = h.max(h * fac);
            }
            rejected = false;
        } else {
            h *= (0.9 * e.powf(-0.2)).max(0.2);
            rejected = true;
        }
    }
    sol.t_end = t;
    Ok(sol)
}

/// States at the requested times (ascending, `times[0]` is the start).
pub fn dopri5_grid<F>(f: F, y0: &[f64], times: &[f64], tol: &Tolerances) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let Some(&t0) = times.first() else {
        return Ok(Vec::new());
    };
    let t_max = *times.last().unwrap_or(&t0);
    let mut out = vec![y0.to_vec()];
    let mut idx = 1;
    dopri5(f, t0, y0, t_max, &times[1..], tol, |step| {
        let t1 = step.t1();
        while idx < times.len() && times[idx] <= t1 + 1e-12 * t1.abs().max(1.0) {
            out.push(step.eval(times[idx].min(t1)));
            idx += 1;
        }
        Ok(StepAction::Continue)
    })?;
    while out.len() < times.len() {
        let last = out.last().cloned().unwrap_or_default();
        out.push(last);
    }
    Ok(out)
}

// Shampine's Rosenbrock 4(3) parameter set.
const GAM: f64 = 1.0 / 2.0;
const RA21: f64 = 2.0;
const RA31: f64 = 48.0 / 25.0;
const RA32: f64 = 6.0 / 25.0;
const RC21: f64 = -8.0;
const RC31: f64 = 372.0 / 25.0;
const RC32: f64 = 12.0 / 5.0;
const RC41: f64 = -112.0 / 125.0;
const RC42: f64 = -54.0 / 125.0;
const RC43: f64 = -2.0 / 5.0;
const RB1: f64 = 19.0 / 9.0;
const RB2: f64 = 1.0 / 2.0;
const RB3: f64 = 25.0 / 108.0;
const RB4: f64 = 125.0 / 108.0;
const RE1: f64 = 17.0 / 54.0;
const RE2: f64 = 7.0 / 36.0;
const RE3: f64 = 0.0;
const RE4: f64 = 125.0 / 108.0;

/// One Rosenbrock step; returns the new state and the error estimate.
pub fn rosenbrock_step<F>(f: &F, jac: &RMat, y: &[f64], fy: &[f64], h: f64) -> Option<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = y.len();
    let mut a = -jac.clone();
    for i in 0..n {
        a[(i, i)] += 1.0 / (GAM * h);
    }
    let lu = a.lu();
    let solve = |rhs: Vec<f64>| -> Option<Vec<f64>> {
        let b = nalgebra::DVector::from_vec(rhs);
        lu.solve(&b).map(|x| x.data.into())
    };
    let g1 = solve(fy.to_vec())?;
    let y2: Vec<f64> = (0..n).map(|i| y[i] + RA21 * g1[i]).collect();
    let f2 = f(&y2);
    let g2 = solve((0..n).map(|i| f2[i] + RC21 * g1[i] / h).collect())?;
    let y3: Vec<f64> = (0..n).map(|i| y[i] + RA31 * g1[i] + RA32 * g2[i]).collect();
    let f3 = f(&y3);
    let g3 = solve((0..n).map(|i| f3[i] + (RC31 * g1[i] + RC32 * g2[i]) / h).collect())?;
    let g4 = solve(
        (0..n)
            .map(|i| f3[i] + (RC41 * g1[i] + RC42 * g2[i] + RC43 * g3[i]) / h)
            .collect(),
    )?;
    let y1: Vec<f64> = (0..n)
        .map(|i| y[i] + RB1 * g1[i] + RB2 * g2[i] + RB3 * g3[i] + RB4 * g4[i])
        .collect();
    let err: Vec<f64> = (0..n)
        .map(|i| RE1 * g1[i] + RE2 * g2[i] + RE3 * g3[i] + RE4 * g4[i])
        .collect();
    Some((y1, err))
}

/// States at the requested times with the adaptive Rosenbrock method.
pub fn rosenbrock4<F, J>(f: F, jac: J, y0: &[f64], times: &[f64], tol: &Tolerances) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> RMat,
{
    tol.check()?;
    let Some(&t0) = times.first() else {
        return Ok(Vec::new());
    };
    let t_max = *times.last().unwrap_or(&t0);
    let mut out = vec![y0.to_vec()];
    if times.len() == 1 {
        return Ok(out);
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut fy = f(&y);
    let mut h = initial_step(&f, &y, &fy, t_max - t0, tol, 4);
    let mut idx = 1;
    let mut count = 0usize;
    let mut jac_y = jac(&y);
    let mut rejected = false;
    while idx < times.len() {
        count += 1;
        if count > tol.max_steps {
            return Err(SsmError::TooManySteps(tol.max_steps));
        }
        let target = times[idx];
        let mut hit = false;
        let h_free = h;
        if t + h >= target || target - (t + h) < 1e-12 * target.abs().max(1.0) {
            h = target - t;
            hit = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) && !hit {
            return Err(SsmError::StepFailure { t, h });
        }
        let Some((y1, err)) = rosenbrock_step(&f, &jac_y, &y, &fy, h) else {
            h *= 0.25;
            rejected = true;
            continue;
        };
        let e = err_norm(&err, &y, &y1, tol);
        if !e.is_finite() || e > 1.0 {
            let fac = if e.is_finite() {
                (0.9 * e.powf(-1.0 / 3.0)).max(0.2)
            } else {
                0.2
            };
            h *= fac;
            rejected = true;
            continue;
        }
        t = if hit { target } else { t + h };
        y = y1;
        fy = f(&y);
        jac_y = jac(&y);
        if hit {
            out.push(y.clone());
            idx += 1;
        }
        let mut fac = (0.9 * e.max(1e-10).powf(-0.25)).clamp(0.2, 5.0);
        if rejected {
            fac = fac.min(1.0);
        }
        h = if hit { h_free.max(h * fac) } else { h * fac };
        rejected = false;
    }
    let _ = t;
    Ok(out)
}
