//! Finite-element model of a clamped–free, geometrically nonlinear,
//! viscoelastic Timoshenko beam.
//!
//! Kinematics `u_x = u₀(x) + zφ(x)`, `u_z = w(x)` with strains
//!
//! ```text
//! ε⁰ = u₀' + ½w'²   ε¹ = φ'   γ⁰ = φ + w' + φu₀'   γ¹ = φφ'
//! ```
//!
//! and Kelvin–Voigt stresses `σ = Eε + ηε̇`, `τ = Gγ + μγ̇`. Each element
//! has nodes at both ends and in the middle: `u₀` is cubic Hermite (value
//! and slope at the end nodes), `w` quadratic on the three nodes and `φ`
//! linear. Clamping removes `u₀, w, φ` at `x = 0`, leaving `5m + 1`
//! degrees of freedom for `m` elements.
//!
//! Units are whatever the parameters are given in; with lengths in mm,
//! moduli in MPa and density in kg/mm³ (the customary table values) the
//! time unit is not the second, which is the scaling the published
//! eigenvalues of this model use.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::RMat;
use crate::model::{build_first_order, ForceTerm, MechanicalSystem};
use crate::spectral::{decompose, ModeSelector};
use crate::{Result, SsmError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamParams {
    pub length: f64,
    pub height: f64,
    pub width: f64,
    pub density: f64,
    pub young: f64,
    pub shear: f64,
    /// Axial material damping `η`.
    pub eta: f64,
    /// Shear material damping `μ`.
    pub mu: f64,
    /// External damping `λ` (force per unit length and velocity).
    pub lambda_ext: f64,
    pub elements: usize,
    /// Integrate the membrane and shear terms with three Gauss points
    /// instead of four. Four points integrate every element polynomial
    /// exactly; three under-integrate the `φu₀'` coupling.
    pub reduced_integration: bool,
}

impl BeamParams {
    /// Steel-like 1 m × 100 mm × 100 mm cantilever in mm / MPa / kg.
    pub fn reference(elements: usize) -> Self {
        BeamParams {
            length: 1000.0,
            height: 100.0,
            width: 100.0,
            density: 7850e-9,
            young: 90e3,
            shear: 34.6e3,
            eta: 33.6,
            mu: 20.9,
            lambda_ext: 0.0,
            elements,
            reduced_integration: false,
        }
    }

    fn check(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("height", self.height),
            ("width", self.width),
            ("density", self.density),
            ("young", self.young),
            ("shear", self.shear),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SsmError::invalid(name, "must be positive and finite"));
            }
        }
        for (name, v) in [("eta", self.eta), ("mu", self.mu), ("lambda_ext", self.lambda_ext)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SsmError::invalid(name, "must be non-negative and finite"));
            }
        }
        if self.elements == 0 {
            return Err(SsmError::invalid("elements", "need at least one element"));
        }
        Ok(())
    }
}

/// Nodal quantity a global degree of freedom stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Field {
    /// `u₀` at end node `k`.
    Axial,
    /// `u₀'` at end node `k`.
    AxialSlope,
    /// `w` at half-node `k` (even `k` are element ends).
    Transverse,
    /// `φ` at end node `k`.
    Rotation,
}

#[derive(Clone, Debug)]
pub struct BeamAssembly {
    pub params: BeamParams,
    pub sys: MechanicalSystem,
    /// `(field, node)` of every global degree of freedom.
    pub dofs: Vec<(Field, usize)>,
    pub i0: f64,
    pub i2: f64,
    pub m0: f64,
    pub m2: f64,
}

impl BeamAssembly {
    pub fn dof(&self, field: Field, node: usize) -> Option<usize> {
        self.dofs.iter().position(|&d| d == (field, node))
    }

    /// Transverse displacement of the free end.
    pub fn tip_deflection_dof(&self) -> usize {
        self.dof(Field::Transverse, 2 * self.params.elements)
            .expect("free end is never clamped")
    }
}

/// Sparse polynomial in the 18 element variables `(q, q̇)`; keys are
/// sorted variable lists.
type EPoly = BTreeMap<Vec<u8>, f64>;

const NQ: usize = 9;

fn linear(coeffs: &[(usize, f64)], rate: bool) -> EPoly {
    let mut p = EPoly::new();
    for &(v, c) in coeffs {
        if c != 0.0 {
            let var = if rate { v + NQ } else { v } as u8;
            *p.entry(vec![var]).or_insert(0.0) += c;
        }
    }
    p
}

fn add(a: &EPoly, b: &EPoly, s: f64) -> EPoly {
    let mut out = a.clone();
    for (k, v) in b {
        *out.entry(k.clone()).or_insert(0.0) += s * v;
    }
    out
}

fn mul(a: &EPoly, b: &EPoly) -> EPoly {
    let mut out = EPoly::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let mut k = ka.clone();
            k.extend_from_slice(kb);
            k.sort_unstable();
            *out.entry(k).or_insert(0.0) += va * vb;
        }
    }
    out
}

fn diff(a: &EPoly, var: u8) -> EPoly {
    let mut out = EPoly::new();
    for (k, v) in a {
        let e = k.iter().filter(|&&x| x == var).count();
        if e == 0 {
            continue;
        }
        let mut kk = k.clone();
        let pos = kk.iter().position(|&x| x == var).expect("variable present");
        kk.remove(pos);
        *out.entry(kk).or_insert(0.0) += v * e as f64;
    }
    out
}

/// `d/dt` along `q̇`.
fn rate(a: &EPoly) -> EPoly {
    let mut out = EPoly::new();
    for j in 0..NQ as u8 {
        let d = diff(a, j);
        if d.is_empty() {
            continue;
        }
        let qd = linear(&[(j as usize, 1.0)], true);
        out = add(&out, &mul(&d, &qd), 1.0);
    }
    out
}

fn gauss(points: usize) -> &'static [(f64, f64)] {
    // Gauss–Legendre nodes on [0, 1] with weights summing to one.
    const G3: [(f64, f64); 3] = [
        (0.112_701_665_379_258_31, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.887_298_334_620_741_7, 5.0 / 18.0),
    ];
    const G4: [(f64, f64); 4] = [
        (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
        (0.330_009_478_207_571_87, 0.326_072_577_431_273_07),
        (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
        (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
    ];
    if points == 3 {
        &G3
    } else {
        &G4
    }
}

/// Shape-function values and x-derivatives at `ξ ∈ [0, 1]`.
struct Shapes {
    u: [f64; 4],
    du: [f64; 4],
    w: [f64; 3],
    dw: [f64; 3],
    p: [f64; 2],
    dp: [f64; 2],
}

fn shapes(xi: f64, le: f64) -> Shapes {
    let (x2, x3) = (xi * xi, xi * xi * xi);
    Shapes {
        u: [
            1.0 - 3.0 * x2 + 2.0 * x3,
            le * (xi - 2.0 * x2 + x3),
            3.0 * x2 - 2.0 * x3,
            le * (x3 - x2),
        ],
        du: [
            (-6.0 * xi + 6.0 * x2) / le,
            1.0 - 4.0 * xi + 3.0 * x2,
            (6.0 * xi - 6.0 * x2) / le,
            3.0 * x2 - 2.0 * xi,
        ],
        w: [2.0 * x2 - 3.0 * xi + 1.0, 4.0 * xi * (1.0 - xi), xi * (2.0 * xi - 1.0)],
        dw: [(4.0 * xi - 3.0) / le, (4.0 - 8.0 * xi) / le, (4.0 * xi - 1.0) / le],
        p: [1.0 - xi, xi],
        dp: [-1.0 / le, 1.0 / le],
    }
}

// Local order: [u_a, u'_a, u_b, u'_b, w_a, w_m, w_b, φ_a, φ_b].
fn idx(range: core::ops::Range<usize>, vals: &[f64]) -> Vec<(usize, f64)> {
    range.zip(vals.iter().copied()).collect()
}

/// Element internal force polynomials `∂(virtual work)/∂q_j`, one per
/// local degree of freedom, and the element mass matrix.
fn element(p: &BeamParams, le: f64, i0: f64, i2: f64) -> (Vec<EPoly>, [[f64; NQ]; NQ]) {
    let mut force = vec![EPoly::new(); NQ];

    let mut add_resultant = |strain: &EPoly, stiff: f64, damp: f64, scale: f64| {
        let resultant = add(&EPoly::new(), strain, stiff);
        let resultant = add(&resultant, &rate(strain), damp);
        for (j, f) in force.iter_mut().enumerate() {
            let d = diff(strain, j as u8);
            if d.is_empty() {
                continue;
            }
            *f = add(f, &mul(&resultant, &d), scale);
        }
    };

    let membrane_points = if p.reduced_integration { 3 } else { 4 };
    for &(xi, wt) in gauss(membrane_points) {
        let s = shapes(xi, le);
        let du = linear(&idx(0..4, &s.du), false);
        let dw = linear(&idx(4..7, &s.dw), false);
        let phi = linear(&idx(7..9, &s.p), false);
        let eps0 = add(&du, &mul(&dw, &dw), 0.5);
        let gam0 = add(&add(&phi, &dw, 1.0), &mul(&phi, &du), 1.0);
        add_resultant(&eps0, i0 * p.young, i0 * p.eta, wt * le);
        add_resultant(&gam0, i0 * p.shear, i0 * p.mu, wt * le);
    }
    // Bending and inertia terms.
    let mut mass = [[0.0; NQ]; NQ];
    let (m0, m2) = (p.density * i0, p.density * i2);
    for &(xi, wt) in gauss(4) {
        let s = shapes(xi, le);
        let phi = linear(&idx(7..9, &s.p), false);
        let dphi = linear(&idx(7..9, &s.dp), false);
        let eps1 = dphi.clone();
        let gam1 = mul(&phi, &dphi);
        add_resultant(&eps1, i2 * p.young, i2 * p.eta, wt * le);
        add_resultant(&gam1, i2 * p.shear, i2 * p.mu, wt * le);

        let mut n = [[0.0; NQ]; 3];
        n[0][..4].copy_from_slice(&s.u);
        n[1][4..7].copy_from_slice(&s.w);
        n[2][7..9].copy_from_slice(&s.p);
        let dens = [m0, m0, m2];
        for (row, d) in n.iter().zip(dens) {
            for a in 0..NQ {
                for b in 0..NQ {
                    mass[a][b] += wt * le * d * row[a] * row[b];
                }
            }
        }
    }
    (force, mass)
}

/// Builds `M ÿ + C ẏ + K y + f(y, ẏ) = 0` for the clamped–free beam.
pub fn assemble_beam(p: BeamParams) -> Result<BeamAssembly> {
    p.check()?;
    let m = p.elements;
    let le = p.length / m as f64;
    let i0 = p.width * p.height;
    let i2 = p.width * p.height * p.height * p.height / 12.0;
    let (m0, m2) = (p.density * i0, p.density * i2);

    let mut dofs = Vec::with_capacity(5 * m + 1);
    for k in 0..=m {
        if k > 0 {
            dofs.push((Field::Axial, k));
        }
        dofs.push((Field::AxialSlope, k));
    }
    for k in 1..=2 * m {
        dofs.push((Field::Transverse, k));
    }
    for k in 1..=m {
        dofs.push((Field::Rotation, k));
    }
    let n = dofs.len();
    let lookup = |f: Field, k: usize| dofs.iter().position(|&d| d == (f, k));

    let (force, me) = element(&p, le, i0, i2);
    let mut mass = RMat::zeros(n, n);
    let mut lin = RMat::zeros(n, 2 * n);
    let mut nonlinear: BTreeMap<(usize, Vec<usize>), f64> = BTreeMap::new();

    for e in 0..m {
        let map: [Option<usize>; NQ] = [
            lookup(Field::Axial, e),
            lookup(Field::AxialSlope, e),
            lookup(Field::Axial, e + 1),
            lookup(Field::AxialSlope, e + 1),
            lookup(Field::Transverse, 2 * e),
            lookup(Field::Transverse, 2 * e + 1),
            lookup(Field::Transverse, 2 * e + 2),
            lookup(Field::Rotation, e),
            lookup(Field::Rotation, e + 1),
        ];
        for a in 0..NQ {
            let Some(ga) = map[a] else { continue };
            for b in 0..NQ {
                if let Some(gb) = map[b] {
                    mass[(ga, gb)] += me[a][b];
                }
            }
            'terms: for (key, &c) in &force[a] {
                let mut vars = Vec::with_capacity(key.len());
                for &v in key {
                    let v = v as usize;
                    let (local, offset) = if v < NQ { (v, 0) } else { (v - NQ, n) };
                    match map[local] {
                        Some(g) => vars.push(g + offset),
                        None => continue 'terms,
                    }
                }
                if vars.len() == 1 {
                    lin[(ga, vars[0])] += c;
                } else {
                    vars.sort_unstable();
                    *nonlinear.entry((ga, vars)).or_insert(0.0) += c;
                }
            }
        }
    }

    if p.lambda_ext > 0.0 {
        // λ(u̇δu + ẇδw + (I₂/I₀)φ̇δφ) is λ/m₀ times the inertia form.
        let factor = p.lambda_ext / m0;
        for i in 0..n {
            for j in 0..n {
                lin[(i, n + j)] += factor * mass[(i, j)];
            }
        }
    }

    let stiffness = lin.columns(0, n).into_owned();
    let damping = lin.columns(n, n).into_owned();
    let stiffness = (&stiffness + stiffness.transpose()) * 0.5;
    let damping = (&damping + damping.transpose()) * 0.5;
    let mass = (&mass + mass.transpose()) * 0.5;

    let scale = nonlinear.values().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut forces = Vec::new();
    for ((dof, vars), c) in nonlinear {
        if c == 0.0 || c.abs() <= 1e-14 * scale {
            continue;
        }
        let mut exps = vec![0u8; 2 * n];
        for v in vars {
            exps[v] += 1;
        }
        forces.push(ForceTerm::new(dof, c, exps));
    }
    let sys = MechanicalSystem::new(mass, damping, stiffness, forces)?;
    Ok(BeamAssembly {
        params: p,
        sys,
        dofs,
        i0,
        i2,
        m0,
        m2,
    })
}

/// Decay rate of the second-slowest eigenspace over that of the slowest.
pub fn spectral_ratio_report(asm: &BeamAssembly) -> Result<f64> {
    let fos = build_first_order(&asm.sys)?;
    let ms = decompose(&fos, ModeSelector::Slowest)?;
    let s = &ms.spectrum;
    let slow = s[0].re;
    let tol = 1e-8 * s[0].norm();
    let next = s
        .iter()
        .find(|l| (l.re - slow).abs() > tol || (l.im.abs() - s[0].im.abs()).abs() > tol)
        .ok_or(SsmError::InvalidMode(alloc::string::String::from(
            "spectrum has a single eigenspace",
        )))?;
    Ok(next.re / slow)
}
