//! Checks of a computed SSM against the full system.
//!
//! * [`invariance_error`] launches trajectory pairs on a circle `ρ = ρ₀` of
//!   the manifold, integrates the full and the reduced system until the
//!   reduced radius reaches `ρ_ε`, and averages the worst distance.
//! * [`invariance_residual`] evaluates `Λ W(z) + G(W(z)) − DW(z) R(z)`
//!   pointwise. [`extended_residual`] does the same after re-solving the
//!   coefficients in extended precision, which exposes the truncation order
//!   below the double-precision rounding floor.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::bipoly::BiPoly;
use crate::model::FirstOrderSystem;
use crate::ode::{dopri5_grid, rosenbrock4, Tolerances};
use crate::poly::PolyMap;
use crate::reduced::{integrate_reduced, lifted_state, to_polar, PolarDynamics, ReducedStop};
use crate::scalar::{ExtComplex, Scalar};
use crate::spectral::ModalSystem;
use crate::ssm::{solve_coefficients, SsmExpansion};
use crate::{Result, SsmError};

/// Threshold on `ρ(A) · t_end` above which [`Method::Auto`] switches to the
/// implicit integrator. The explicit method needs roughly `ρ(A) · t_end / 3`
/// steps for stability alone; below this bound accuracy dominates and the
/// explicit method is cheaper.
pub const STIFFNESS_THRESHOLD: f64 = 1e7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    #[default]
    Auto,
    /// Dormand–Prince 5(4).
    Explicit,
    /// Rosenbrock 4(3).
    Implicit,
}

/// Space in which trajectory distances are measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Coordinates {
    /// Physical phase space `x = (y, ẏ)`.
    #[default]
    Physical,
    /// Modal coordinates `q = T⁻¹ x`.
    Modal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceOptions {
    pub rho0: f64,
    pub rho_eps: f64,
    pub n_traj: usize,
    /// Randomly shifts each launch angle within its slot when set.
    pub jitter_seed: Option<u64>,
    pub coordinates: Coordinates,
    /// Lower bound on the number of comparison times per trajectory.
    pub min_grid: usize,
    /// Comparison times per period of the master frequency.
    pub points_per_period: f64,
    pub tol: Tolerances,
    /// Multiplies `tol.atol` by the size of each launch state (and `ρ₀` for
    /// the reduced flow), which makes the tolerances independent of units.
    pub scale_atol: bool,
    pub method: Method,
}

impl Default for InvarianceOptions {
    fn default() -> Self {
        InvarianceOptions {
            rho0: 0.35,
            rho_eps: 0.01,
            n_traj: 50,
            jitter_seed: None,
            coordinates: Coordinates::Physical,
            min_grid: 500,
            points_per_period: 40.0,
            tol: Tolerances::new(1e-10, 1e-12),
            scale_atol: true,
            method: Method::Auto,
        }
    }
}

impl InvarianceOptions {
    fn check(&self) -> Result<()> {
        if !(self.rho_eps > 0.0 && self.rho_eps < self.rho0) || !self.rho0.is_finite() {
            return Err(SsmError::invalid("rho_eps", "must satisfy 0 < rho_eps < rho0"));
        }
        if self.n_traj == 0 {
            return Err(SsmError::invalid("n_traj", "need at least one trajectory"));
        }
        if self.min_grid < 2 {
            return Err(SsmError::invalid("min_grid", "need at least two comparison times"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceResult {
    pub order: usize,
    pub rho0: f64,
    pub rho_eps: f64,
    pub n_traj: usize,
    pub delta_inv: f64,
    /// `dist(i)` for each launch angle, in launch order.
    pub per_trajectory: Vec<f64>,
    pub angles: Vec<f64>,
    /// Largest norm of a launch point.
    pub normalization: f64,
}

/// Outcome of one trajectory pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryDistance {
    pub theta0: f64,
    pub dist: f64,
    pub start_norm: f64,
    pub t_end: f64,
}

/// `θ₀ = 2πk/N`, optionally shifted by a seeded uniform offset in
/// `[−π/N, π/N)`.
pub fn launch_angles(n: usize, jitter_seed: Option<u64>) -> Vec<f64> {
    let step = 2.0 * PI / n.max(1) as f64;
    let mut rng = jitter_seed.map(SmallRng::seed_from_u64);
    (0..n)
        .map(|k| {
            let base = step * k as f64;
            match rng.as_mut() {
                Some(r) => base + step * (r.gen::<f64>() - 0.5),
                None => base,
            }
        })
        .collect()
}

fn spectral_radius(a: &crate::linalg::RMat) -> f64 {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Full-system states at `times`, starting from `x0` at `times[0]`.
pub fn integrate_full(
    fos: &FirstOrderSystem,
    x0: &[f64],
    times: &[f64],
    tol: &Tolerances,
    method: Method,
) -> Result<Vec<Vec<f64>>> {
    if x0.len() != fos.dim {
        return Err(SsmError::DimensionMismatch {
            context: "initial state",
            expected: fos.dim,
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SsmError::invalid("x0", "must be finite"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SsmError::invalid("times", "must be strictly increasing"));
    }
    let span = match (times.first(), times.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let implicit = match method {
        Method::Explicit => false,
        Method::Implicit => true,
        Method::Auto => spectral_radius(&fos.a) * span > STIFFNESS_THRESHOLD,
    };
    if implicit {
        rosenbrock4(|x| fos.rhs(x), |x| fos.jacobian(x), x0, times, tol)
    } else {
        dopri5_grid(|x| fos.rhs(x), x0, times, tol)
    }
}

fn modal_coords(ms: &ModalSystem, x: &[f64]) -> Vec<Complex64> {
    let dim = x.len();
    (0..dim)
        .map(|i| (0..dim).map(|j| ms.t_inv[(i, j)] * x[j]).sum())
        .collect()
}

/// Distance between the full and the reduced trajectory launched at `θ₀`.
pub fn trajectory_distance(
    fos: &FirstOrderSystem,
    ssm: &SsmExpansion,
    pd: &PolarDynamics,
    theta0: f64,
    opts: &InvarianceOptions,
) -> Result<TrajectoryDistance> {
    opts.check()?;
    let x0 = lifted_state(ssm, opts.rho0, theta0)?;
    let x0_norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scaled = |size: f64| {
        let mut tol = opts.tol;
        if opts.scale_atol && size > 0.0 {
            tol.atol *= size;
        }
        tol
    };
    let red = integrate_reduced(
        pd,
        opts.rho0,
        theta0,
        ReducedStop::Radius(opts.rho_eps),
        &scaled(opts.rho0),
    )?;
    let t_end = red.t_end;
    let periods = t_end * pd.lambda.im.abs() / (2.0 * PI);
    let n_grid = opts.min_grid.max((periods * opts.points_per_period).ceil() as usize);
    let times: Vec<f64> = (0..=n_grid).map(|k| t_end * k as f64 / n_grid as f64).collect();
    let full = integrate_full(fos, &x0, &times, &scaled(x0_norm), opts.method)?;
    let mut dist = 0.0f64;
    for (t, x) in times.iter().zip(&full) {
        let (rho, theta) = red.eval(*t);
        let d = match opts.coordinates {
            Coordinates::Physical => {
                let xr = lifted_state(ssm, rho, theta)?;
                x.iter().zip(&xr).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            }
            Coordinates::Modal => {
                let z = Complex64::from_polar(rho, theta);
                let q = ssm.eval_w((z, z.conj()));
                let qf = modal_coords(&ssm.modal, x);
                q.iter().zip(&qf).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
            }
        };
        dist = dist.max(d);
    }
    let start_norm = match opts.coordinates {
        Coordinates::Physical => x0_norm,
        Coordinates::Modal => {
            let z = Complex64::from_polar(opts.rho0, theta0);
            ssm.eval_w((z, z.conj()))
                .iter()
                .map(|c| c.norm_sqr())
                .sum::<f64>()
                .sqrt()
        }
    };
    Ok(TrajectoryDistance {
        theta0,
        dist,
        start_norm,
        t_end,
    })
}

/// Combines per-trajectory results into `δ_inv = mean(dist) / max ‖x₀‖`.
pub fn aggregate(order: usize, opts: &InvarianceOptions, runs: &[TrajectoryDistance]) -> InvarianceResult {
    let n = runs.len();
    let mean = runs.iter().map(|r| r.dist).sum::<f64>() / n.max(1) as f64;
    let normalization = runs.iter().fold(0.0f64, |m, r| m.max(r.start_norm));
    InvarianceResult {
        order,
        rho0: opts.rho0,
        rho_eps: opts.rho_eps,
        n_traj: n,
        delta_inv: if normalization > 0.0 { mean / normalization } else { 0.0 },
        per_trajectory: runs.iter().map(|r| r.dist).collect(),
        angles: runs.iter().map(|r| r.theta0).collect(),
        normalization,
    }
}

/// Invariance error of `ssm` over `opts.n_traj` launch angles, computed
/// sequentially. Callers with threads can map [`trajectory_distance`] over
/// [`launch_angles`] themselves and [`aggregate`] the results.
pub fn invariance_error(
    fos: &FirstOrderSystem,
    ssm: &SsmExpansion,
    opts: &InvarianceOptions,
) -> Result<InvarianceResult> {
    opts.check()?;
    let pd = to_polar(ssm)?;
    let runs = launch_angles(opts.n_traj, opts.jitter_seed)
        .into_iter()
        .map(|th| trajectory_distance(fos, ssm, &pd, th, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(ssm.order, opts, &runs))
}

fn eval_g<S: Scalar>(g: &PolyMap, order_cap: usize, w: &[S]) -> Vec<S> {
    let mut out = vec![S::zero(); g.out_dim];
    for (key, coeffs) in g.iter() {
        if key.degree() > order_cap {
            continue;
        }
        let vars = key.vars();
        let mut m = w[vars[0]].clone();
        for &v in &vars[1..] {
            m = m.mul(&w[v]);
        }
        for (row, c) in coeffs.iter().enumerate() {
            if c.norm() != 0.0 {
                out[row].add_mul(&S::from_c64(*c), &m);
            }
        }
    }
    out
}

fn residual_at<S: Scalar>(
    lambdas: &[S],
    g: &PolyMap,
    w: &[BiPoly<S>],
    r: &[BiPoly<S>; 2],
    z: (Complex64, Complex64),
) -> Vec<S> {
    let z1 = S::from_c64(z.0);
    let z2 = S::from_c64(z.1);
    let r1 = r[0].eval(&z1, &z2, 1, r[0].max_deg);
    let r2 = r[1].eval(&z1, &z2, 1, r[1].max_deg);
    let mut vals = Vec::with_capacity(w.len());
    let mut res = Vec::with_capacity(w.len());
    for (l, p) in w.iter().enumerate() {
        let (v, d1, d2) = p.eval_grad(&z1, &z2);
        let mut e = lambdas[l].mul(&v);
        e = e.sub(&d1.mul(&r1));
        e = e.sub(&d2.mul(&r2));
        vals.push(v);
        res.push(e);
    }
    // G is applied to the full polynomial W(z), not a truncation of G∘W.
    let gw = eval_g(g, usize::MAX, &vals);
    res.into_iter().zip(gw).map(|(e, x)| e.add(&x)).collect()
}

/// `‖Λ W(z) + G(W(z)) − DW(z) R(z)‖₂` at each sample, in double precision.
pub fn invariance_residual(ssm: &SsmExpansion, z_samples: &[(Complex64, Complex64)]) -> Vec<f64> {
    let lambdas = &ssm.modal.lambdas;
    z_samples
        .iter()
        .map(|&z| {
            let r = residual_at(lambdas, &ssm.modal.g, ssm.w_rows(), ssm.r_rows(), z);
            r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
        })
        .collect()
}

/// Re-solves the expansion of `ms` to order `n_w` in extended precision and
/// returns the residual norm at each sample.
pub fn extended_residual(
    ms: &ModalSystem,
    n_w: usize,
    delta: f64,
    z_samples: &[(Complex64, Complex64)],
) -> Result<Vec<f64>> {
    let (w, r, _, _) = solve_coefficients::<ExtComplex>(ms, n_w, delta)?;
    let lambdas: Vec<ExtComplex> = ms.lambdas.iter().map(|&l| ExtComplex::from_c64(l)).collect();
    Ok(z_samples
        .iter()
        .map(|&z| {
            let res = residual_at(&lambdas, &ms.g, &w, &r, z);
            let mut acc = ExtComplex::zero();
            for x in &res {
                acc = acc.add(&x.mul(&x.conj()));
            }
            acc.to_c64().re.max(0.0).sqrt()
        })
        .collect())
}

/// Sample points `(r e^{iθ}, r e^{−iθ})` on `n_radii` log-spaced radii in
/// `[r_min, r_max]` and `n_angles` angles; returned with their radius.
pub fn residual_samples(
    r_min: f64,
    r_max: f64,
    n_radii: usize,
    n_angles: usize,
) -> Vec<(f64, Vec<(Complex64, Complex64)>)> {
    let n_radii = n_radii.max(2);
    let (l0, l1) = (r_min.ln(), r_max.ln());
    (0..n_radii)
        .map(|k| {
            let r = (l0 + (l1 - l0) * k as f64 / (n_radii - 1) as f64).exp();
            let zs = (0..n_angles.max(1))
                .map(|j| {
                    let th = 0.3 + 2.0 * PI * j as f64 / n_angles.max(1) as f64;
                    let z = Complex64::from_polar(r, th);
                    (z, z.conj())
                })
                .collect();
            (r, zs)
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Residual decay order of the order-`n_w` expansion of `ms` over radii in
/// `[r_min, r_max]`, measured in extended precision. `None` when the
/// residual vanishes identically.
pub fn residual_slope(ms: &ModalSystem, n_w: usize, delta: f64, r_min: f64, r_max: f64) -> Result<Option<f64>> {
    let samples = residual_samples(r_min, r_max, 9, 4);
    let flat: Vec<(Complex64, Complex64)> = samples.iter().flat_map(|(_, z)| z.iter().copied()).collect();
    let res = extended_residual(ms, n_w, delta, &flat)?;
    let per = samples[0].1.len();
    let radii: Vec<f64> = samples.iter().map(|(r, _)| *r).collect();
    let maxes: Vec<f64> = res
        .chunks(per)
        .map(|c| c.iter().fold(0.0f64, |m, v| m.max(*v)))
        .collect();
    if maxes.iter().all(|v| *v == 0.0) {
        return Ok(None);
    }
    Ok(Some(loglog_slope(&radii, &maxes)))
}
