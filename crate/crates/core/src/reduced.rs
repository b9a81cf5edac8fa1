//! Polar form of the reduced dynamics on an underdamped master pair,
//! instantaneous amplitude and backbone curves.
//!
//! With `z = ρe^{iθ}` only monomials `z^a z̄^b` with `a = b + 1` survive
//! averaging, giving `ρ̇ = Re λ ρ + Σ Re γ ρ^{a+b}` and
//! `θ̇ = Im λ + Σ Im γ ρ^{a+b−1}`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::ode::{dopri5, DenseSolution, StepAction, Tolerances};
use crate::ssm::SsmExpansion;
use crate::{Result, SsmError};

/// Default number of trapezoid samples in θ.
pub const DEFAULT_N_THETA: usize = 128;
/// Relative size of the imaginary part of a lifted state that is tolerated
/// before it is discarded.
pub const IMAG_TOL: f64 = 1e-8;
const CONJ_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct PolarDynamics {
    pub lambda: Complex64,
    /// `γ_{a,b}` from the first master row, keyed by `(a, b)`.
    pub gammas: BTreeMap<(usize, usize), Complex64>,
    /// Power of `ρ` → coefficient in `ρ̇`.
    pub rho_dot_coeffs: BTreeMap<usize, f64>,
    /// Power of `ρ` → coefficient in `ω = θ̇`.
    pub omega_coeffs: BTreeMap<usize, f64>,
    pub warnings: Vec<String>,
}

fn horner(coeffs: &BTreeMap<usize, f64>, rho: f64) -> f64 {
    coeffs.iter().map(|(&p, &c)| c * rho.powi(p as i32)).sum()
}

impl PolarDynamics {
    pub fn rho_dot(&self, rho: f64) -> f64 {
        horner(&self.rho_dot_coeffs, rho)
    }

    pub fn omega(&self, rho: f64) -> f64 {
        horner(&self.omega_coeffs, rho)
    }
}

/// Extracts `ρ̇(ρ)` and `ω(ρ)` from the reduced dynamics of `ssm`.
pub fn to_polar(ssm: &SsmExpansion) -> Result<PolarDynamics> {
    if !ssm.modal.underdamped() {
        return Err(SsmError::RealMasterPairUnsupported);
    }
    let lambda = ssm.modal.lambdas[0];
    let rows = ssm.r_rows();
    let mut gammas = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut scale = lambda.norm();
    let mut mismatch = 0.0f64;
    let mut worst = (0, 0);
    for deg in 2..=ssm.order {
        for b in 0..=deg {
            let a = deg - b;
            let g = *rows[0].get(a, b);
            let partner = *rows[1].get(b, a);
            scale = scale.max(g.norm());
            let m = (partner - g.conj()).norm();
            if m > mismatch {
                mismatch = m;
                worst = (a, b);
            }
            if g.norm() == 0.0 {
                continue;
            }
            if a == b + 1 {
                gammas.insert((a, b), g);
            } else {
                warnings.push(format!(
                    "reduced dynamics has a term at key ({a},{b}) that is not of the form (b+1,b); excluded from polar form"
                ));
            }
        }
    }
    if mismatch > CONJ_TOL * scale {
        return Err(SsmError::ConjugateSymmetry {
            a: worst.0,
            b: worst.1,
            mismatch: mismatch / scale,
        });
    }
    let mut rho_dot_coeffs = BTreeMap::new();
    let mut omega_coeffs = BTreeMap::new();
    rho_dot_coeffs.insert(1, lambda.re);
    omega_coeffs.insert(0, lambda.im);
    for (&(a, b), g) in &gammas {
        *rho_dot_coeffs.entry(a + b).or_insert(0.0) += g.re;
        *omega_coeffs.entry(a + b - 1).or_insert(0.0) += g.im;
    }
    Ok(PolarDynamics {
        lambda,
        gammas,
        rho_dot_coeffs,
        omega_coeffs,
        warnings,
    })
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(SsmError::invalid("rho", "must be finite and non-negative"));
    }
    Ok(())
}

fn check_n_theta(n_theta: usize) -> Result<()> {
    if n_theta == 0 {
        return Err(SsmError::invalid("n_theta", "need at least one sample"));
    }
    Ok(())
}

/// Real physical state at `(ρ, θ)`; fails if the lifted point is not real.
pub fn lifted_state(ssm: &SsmExpansion, rho: f64, theta: f64) -> Result<Vec<f64>> {
    let x = ssm.physical_polar(rho, theta);
    let re_max = x.iter().fold(0.0f64, |m, c| m.max(c.re.abs()));
    let im_max = x.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if im_max > IMAG_TOL * re_max.max(f64::MIN_POSITIVE) && im_max > 0.0 {
        return Err(SsmError::NonNegligibleImaginaryPart {
            relative: if re_max > 0.0 { im_max / re_max } else { f64::INFINITY },
        });
    }
    Ok(x.into_iter().map(|c| c.re).collect())
}

/// `A(ρ)`: θ-average of the Euclidean norm of the position coordinates.
pub fn amplitude(ssm: &SsmExpansion, rho: f64, n_theta: usize) -> Result<f64> {
    check_rho(rho)?;
    check_n_theta(n_theta)?;
    if !ssm.modal.underdamped() {
        return Err(SsmError::RealMasterPairUnsupported);
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let n = ssm.modal.n;
    let mut sum = 0.0;
    for k in 0..n_theta {
        let theta = 2.0 * PI * k as f64 / n_theta as f64;
        let x = lifted_state(ssm, rho, theta)?;
        sum += x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    Ok(sum / n_theta as f64)
}

/// Largest `|y_j|` over θ for every degree of freedom at radius `ρ`.
pub fn max_displacement(ssm: &SsmExpansion, rho: f64, n_theta: usize) -> Result<Vec<f64>> {
    check_rho(rho)?;
    check_n_theta(n_theta)?;
    if !ssm.modal.underdamped() {
        return Err(SsmError::RealMasterPairUnsupported);
    }
    let n = ssm.modal.n;
    let mut out = vec![0.0f64; n];
    for k in 0..n_theta {
        let theta = 2.0 * PI * k as f64 / n_theta as f64;
        let x = lifted_state(ssm, rho, theta)?;
        for (o, v) in out.iter_mut().zip(&x[..n]) {
            *o = o.max(v.abs());
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackbonePoint {
    pub rho: f64,
    pub omega: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackboneCurve {
    pub samples: Vec<BackbonePoint>,
    pub rho_max: f64,
}

/// Samples `(ω(ρ), A(ρ))` on a non-decreasing grid of radii.
pub fn backbone(ssm: &SsmExpansion, rho_grid: &[f64], n_theta: usize) -> Result<BackboneCurve> {
    if rho_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(SsmError::invalid("rho_grid", "must be monotone increasing"));
    }
    let pd = to_polar(ssm)?;
    let mut samples = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        samples.push(BackbonePoint {
            rho,
            omega: pd.omega(rho),
            amplitude: amplitude(ssm, rho, n_theta)?,
        });
    }
    Ok(BackboneCurve {
        rho_max: rho_grid.last().copied().unwrap_or(0.0),
        samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReducedStop {
    /// Integrate over `[0, t_end]`.
    Time(f64),
    /// Stop when `ρ` falls to this radius.
    Radius(f64),
}

/// Solution of the polar reduced dynamics; the state is `(ρ, θ)`.
#[derive(Clone, Debug)]
pub struct ReducedTrajectory {
    pub solution: DenseSolution,
    pub t_end: f64,
    pub rho0: f64,
    pub theta0: f64,
}

impl ReducedTrajectory {
    pub fn eval(&self, t: f64) -> (f64, f64) {
        if self.solution.steps.is_empty() {
            return (self.rho0, self.theta0);
        }
        let y = self.solution.eval(t.min(self.t_end));
        (y[0], y[1])
    }
}

/// Integrates `(ρ̇, θ̇)` from `(ρ₀, θ₀)`.
///
/// With [`ReducedStop::Radius`] the crossing time is refined by bisection
/// on the dense output. Leaving the disc of radius `10ρ₀` is a blow-up.
pub fn integrate_reduced(
    pd: &PolarDynamics,
    rho0: f64,
    theta0: f64,
    stop: ReducedStop,
    tol: &Tolerances,
) -> Result<ReducedTrajectory> {
    if !(rho0 > 0.0) || !rho0.is_finite() {
        return Err(SsmError::invalid("rho0", "must be positive"));
    }
    let f = |y: &[f64]| vec![pd.rho_dot(y[0]), pd.omega(y[0])];
    let limit = 10.0 * rho0;
    let (t_max, rho_eps) = match stop {
        ReducedStop::Time(t) => {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(SsmError::invalid("t_end", "must be finite and non-negative"));
            }
            (t, None)
        }
        ReducedStop::Radius(eps) => {
            if !(eps > 0.0 && eps < rho0) {
                return Err(SsmError::invalid("rho_eps", "must satisfy 0 < rho_eps < rho0"));
            }
            let decay = pd.lambda.re.abs();
            let t_lin = (rho0 / eps).ln() / decay;
            let t_max = 10.0 * t_lin;
            if !t_max.is_finite() {
                return Err(SsmError::EventNotReached { rho_eps: eps, t_max });
            }
            (t_max, Some(eps))
        }
    };
    let mut hit: Option<f64> = None;
    let solution = dopri5(f, 0.0, &[rho0, theta0], t_max, &[], tol, |step| {
        let t1 = step.t1();
        let rho1 = step.eval_component(t1, 0);
        if !rho1.is_finite() || rho1 > limit {
            return Err(SsmError::BlowUp { t: t1, rho: rho1 });
        }
        if let Some(eps) = rho_eps {
            if rho1 <= eps {
                let (mut lo, mut hi) = (step.t0, t1);
                for _ in 0..200 {
                    if hi - lo <= 1e-12 {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if step.eval_component(mid, 0) > eps {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hit = Some(hi);
                return Ok(StepAction::StopAt(hi));
            }
        }
        Ok(StepAction::Continue)
    })?;
    if let Some(eps) = rho_eps {
        if hit.is_none() {
            return Err(SsmError::EventNotReached { rho_eps: eps, t_max });
        }
    }
    Ok(ReducedTrajectory {
        t_end: solution.t_end,
        solution,
        rho0,
        theta0,
    })
}
