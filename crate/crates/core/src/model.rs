//! Second-order mechanical models and their first-order form.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::linalg::{self, RMat};
use crate::poly::{MonomialKey, PolyMap};
use crate::{Result, SsmError};

/// Relative Frobenius tolerance for the symmetry of `M`, `C`, `K`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// One polynomial term `coefficient · Π x_k^{e_k}` of the force on `dof`,
/// where `x = (y, ẏ)` has `2n` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ForceTerm {
    /// Zero-based degree of freedom the term acts on.
    pub dof: usize,
    pub coefficient: f64,
    pub exponents: MonomialKey,
}

impl ForceTerm {
    pub fn new(dof: usize, coefficient: f64, exponents: impl Into<Vec<u8>>) -> Self {
        ForceTerm {
            dof,
            coefficient,
            exponents: MonomialKey::new(exponents),
        }
    }
}

/// `M ÿ + C ẏ + K y + f(y, ẏ) = 0` with polynomial `f`.
#[derive(Clone, Debug)]
pub struct MechanicalSystem {
    pub n: usize,
    pub mass: RMat,
    pub damping: RMat,
    pub stiffness: RMat,
    pub forces: Vec<ForceTerm>,
}

impl MechanicalSystem {
    /// Validates shapes, symmetry, positive definiteness of `M` and the
    /// force terms.
    pub fn new(mass: RMat, damping: RMat, stiffness: RMat, forces: Vec<ForceTerm>) -> Result<Self> {
        let n = mass.nrows();
        if n == 0 {
            return Err(SsmError::invalid("n", "need at least one degree of freedom"));
        }
        for (name, m) in [("M", &mass), ("C", &damping), ("K", &stiffness)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(SsmError::DimensionMismatch {
                    context: name,
                    expected: n,
                    found: if m.nrows() != n { m.nrows() } else { m.ncols() },
                });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(SsmError::invalid(name, "non-finite entry"));
            }
            let dev = linalg::symmetry_deviation(m);
            if dev > SYMMETRY_TOL {
                return Err(SsmError::Asymmetric {
                    matrix: name,
                    deviation: dev,
                });
            }
        }
        let (min, max) = linalg::symmetric_eigen_range(&mass);
        if !(min > 1e-12 * max) {
            return Err(SsmError::SingularMass { min, max });
        }
        for (k, t) in forces.iter().enumerate() {
            if t.dof >= n {
                return Err(SsmError::invalid(
                    "nonlinear_terms",
                    format!("term {k}: dof {} out of range", t.dof),
                ));
            }
            if t.exponents.dim() != 2 * n {
                return Err(SsmError::DimensionMismatch {
                    context: "force term exponents",
                    expected: 2 * n,
                    found: t.exponents.dim(),
                });
            }
            if t.exponents.degree() < 2 {
                return Err(SsmError::invalid(
                    "nonlinear_terms",
                    format!("term {k}: degree must be at least 2"),
                ));
            }
            if !t.coefficient.is_finite() {
                return Err(SsmError::invalid(
                    "nonlinear_terms",
                    format!("term {k}: non-finite coefficient"),
                ));
            }
        }
        Ok(MechanicalSystem {
            n,
            mass,
            damping,
            stiffness,
            forces,
        })
    }

    pub fn max_force_degree(&self) -> usize {
        self.forces.iter().map(|t| t.exponents.degree()).max().unwrap_or(0)
    }

    /// `f(y, ẏ)`.
    pub fn force(&self, y: &[f64], yd: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.n);
        x.extend_from_slice(y);
        x.extend_from_slice(yd);
        let mut out = vec![0.0; self.n];
        for t in &self.forces {
            out[t.dof] += t.coefficient * t.exponents.eval(&x);
        }
        out
    }

    /// `M ÿ + C ẏ + K y + f(y, ẏ)`.
    pub fn residual(&self, y: &[f64], yd: &[f64], ydd: &[f64]) -> Vec<f64> {
        let f = self.force(y, yd);
        (0..self.n)
            .map(|i| {
                let mut s = f[i];
                for j in 0..self.n {
                    s += self.mass[(i, j)] * ydd[j] + self.damping[(i, j)] * yd[j] + self.stiffness[(i, j)] * y[j];
                }
                s
            })
            .collect()
    }
}

/// Force terms grouped by monomial for fast evaluation. Monomial `k` is the
/// product of `x[vars[j]]` over `starts[k]..starts[k+1]` (repeated indices
/// encode powers); it contributes `coef[t]·monomial` to `dof[t]` for every `t`
/// in `targets[k]..targets[k+1]`.
#[derive(Clone, Debug, Default)]
struct CompiledForce {
    starts: Vec<usize>,
    vars: Vec<usize>,
    targets: Vec<usize>,
    dof: Vec<usize>,
    coef: Vec<f64>,
}

impl CompiledForce {
    fn new(forces: &[ForceTerm]) -> Self {
        let mut groups: alloc::collections::BTreeMap<Vec<usize>, Vec<(usize, f64)>> = Default::default();
        for t in forces {
            let mut vars = Vec::new();
            for (v, &e) in t.exponents.exponents().iter().enumerate() {
                vars.extend(core::iter::repeat_n(v, e as usize));
            }
            groups.entry(vars).or_default().push((t.dof, t.coefficient));
        }
        let mut c = CompiledForce {
            starts: vec![0],
            targets: vec![0],
            ..Default::default()
        };
        for (vars, tg) in groups {
            c.vars.extend(vars);
            c.starts.push(c.vars.len());
            for (d, k) in tg {
                c.dof.push(d);
                c.coef.push(k);
            }
            c.targets.push(c.dof.len());
        }
        c
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        for k in 0..self.starts.len() - 1 {
            let mut m = 1.0;
            for &v in &self.vars[self.starts[k]..self.starts[k + 1]] {
                m *= x[v];
            }
            for t in self.targets[k]..self.targets[k + 1] {
                out[self.dof[t]] += self.coef[t] * m;
            }
        }
    }

    fn is_empty(&self) -> bool {
        self.dof.is_empty()
    }

    /// Adds `∂f/∂x` into the row-major `n × 2n` buffer `df`.
    fn jacobian(&self, x: &[f64], dim: usize, df: &mut [f64]) {
        for k in 0..self.starts.len() - 1 {
            let vars = &self.vars[self.starts[k]..self.starts[k + 1]];
            for (j, &v) in vars.iter().enumerate() {
                let mut p = 1.0;
                for (i, &w) in vars.iter().enumerate() {
                    if i != j {
                        p *= x[w];
                    }
                }
                for t in self.targets[k]..self.targets[k + 1] {
                    df[self.dof[t] * dim + v] += self.coef[t] * p;
                }
            }
        }
    }
}

/// `ẋ = A x + F(x)` with `x = (y, ẏ)`.
#[derive(Clone, Debug)]
pub struct FirstOrderSystem {
    pub dim: usize,
    pub a: RMat,
    /// Full nonlinearity `F`, zero in the first `n` rows.
    pub f: PolyMap,
    /// The force polynomial `f(x)` itself (`n` rows), so that `F = [0; −M⁻¹ f]`.
    pub force: PolyMap,
    pub mass_inv: RMat,
    compiled: CompiledForce,
    a_rows: Vec<f64>,
    mass_inv_rows: Vec<f64>,
}

impl FirstOrderSystem {
    pub fn n(&self) -> usize {
        self.dim / 2
    }

    /// Right-hand side `A x + F(x)`.
    pub fn rhs(&self, x: &[f64]) -> Vec<f64> {
        let (n, dim) = (self.n(), self.dim);
        let mut out = vec![0.0; dim];
        out[..n].copy_from_slice(&x[n..]);
        for i in 0..n {
            let row = &self.a_rows[(n + i) * dim..(n + i + 1) * dim];
            out[n + i] = dot(row, x);
        }
        if !self.compiled.is_empty() {
            let mut f = vec![0.0; n];
            self.compiled.eval(x, &mut f);
            for i in 0..n {
                out[n + i] -= dot(&self.mass_inv_rows[i * n..(i + 1) * n], &f);
            }
        }
        out
    }

    /// Jacobian of the right-hand side.
    pub fn jacobian(&self, x: &[f64]) -> RMat {
        let (n, dim) = (self.n(), self.dim);
        let mut jac = self.a.clone();
        if self.compiled.is_empty() {
            return jac;
        }
        let mut df = vec![0.0; n * dim];
        self.compiled.jacobian(x, dim, &mut df);
        for i in 0..n {
            let mrow = &self.mass_inv_rows[i * n..(i + 1) * n];
            for j in 0..dim {
                let s: f64 = mrow.iter().enumerate().map(|(k, m)| m * df[k * dim + j]).sum();
                jac[(n + i, j)] -= s;
            }
        }
        jac
    }

    /// Jacobian of `F` alone (no linear part).
    pub fn nonlinear_jacobian(&self, x: &[f64]) -> RMat {
        self.jacobian(x) - &self.a
    }
}

/// Dot product with eight independent partial sums, which lets the compiler
/// vectorize it.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = acc.iter().sum::<f64>();
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

fn row_major(m: &RMat) -> Vec<f64> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
        .collect()
}

/// Converts the second-order model to first-order form.
pub fn build_first_order(sys: &MechanicalSystem) -> Result<FirstOrderSystem> {
    let n = sys.n;
    let mass_inv = linalg::inverse_real(&sys.mass).ok_or(SsmError::SingularMass { min: 0.0, max: 0.0 })?;
    let mut a = RMat::zeros(2 * n, 2 * n);
    let mk = &mass_inv * &sys.stiffness;
    let mc = &mass_inv * &sys.damping;
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        for j in 0..n {
            a[(n + i, j)] = -mk[(i, j)];
            a[(n + i, n + j)] = -mc[(i, j)];
        }
    }
    let mut force = PolyMap::new(2 * n, n);
    let mut f = PolyMap::new(2 * n, 2 * n);
    for t in &sys.forces {
        force.add(&t.exponents, t.dof, Complex64::new(t.coefficient, 0.0));
        for i in 0..n {
            let c = -mass_inv[(i, t.dof)] * t.coefficient;
            if c != 0.0 {
                f.add(&t.exponents, n + i, Complex64::new(c, 0.0));
            }
        }
    }
    for b in f.blocks.values_mut() {
        b.prune();
    }
    for b in force.blocks.values_mut() {
        b.prune();
    }
    f.blocks.retain(|_, b| !b.terms.is_empty());
    force.blocks.retain(|_, b| !b.terms.is_empty());
    Ok(FirstOrderSystem {
        dim: 2 * n,
        f,
        force,
        compiled: CompiledForce::new(&sys.forces),
        a_rows: row_major(&a),
        mass_inv_rows: row_major(&mass_inv),
        a,
        mass_inv,
    })
}

/// Which of the two Shaw–Pierre configurations to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShawPierreVariant {
    /// Equal springs; near-inner resonances only.
    Inner,
    /// Stiff coupling spring `k₂`; near 1:3 outer resonance at `k₂ ≈ 4`.
    Outer,
}

/// Parameters of the two-mass chain with a cubic spring on the first mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShawPierre {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub c: f64,
    pub kappa: f64,
    pub m: f64,
}

impl ShawPierre {
    pub fn inner(k: f64, c: f64, kappa: f64) -> Self {
        ShawPierre {
            k1: k,
            k2: k,
            k3: k,
            c,
            kappa,
            m: 1.0,
        }
    }

    pub fn outer(k2: f64, c: f64, kappa: f64) -> Self {
        ShawPierre {
            k1: 1.0,
            k2,
            k3: 1.0,
            c,
            kappa,
            m: 1.0,
        }
    }
}

impl Default for ShawPierre {
    fn default() -> Self {
        ShawPierre::inner(1.0, 0.03, 0.5)
    }
}

/// Builds the Shaw–Pierre two-degree-of-freedom system.
///
/// For [`ShawPierreVariant::Inner`] the three springs are forced equal to
/// `k1`.
pub fn make_shaw_pierre(variant: ShawPierreVariant, p: ShawPierre) -> Result<MechanicalSystem> {
    let (k1, k2, k3) = match variant {
        ShawPierreVariant::Inner => (p.k1, p.k1, p.k1),
        ShawPierreVariant::Outer => (p.k1, p.k2, p.k3),
    };
    for (name, v) in [("k1", k1), ("k2", k2), ("k3", k3), ("c", p.c), ("m", p.m)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(SsmError::invalid(name, "must be positive and finite"));
        }
    }
    if !(p.kappa >= 0.0) || !p.kappa.is_finite() {
        return Err(SsmError::invalid("kappa", "must be non-negative and finite"));
    }
    let mass = RMat::identity(2, 2) * p.m;
    let damping = RMat::from_row_slice(2, 2, &[2.0 * p.c, -p.c, -p.c, 2.0 * p.c]);
    let stiffness = RMat::from_row_slice(2, 2, &[k1 + k2, -k2, -k2, k2 + k3]);
    let forces = if p.kappa == 0.0 {
        Vec::new()
    } else {
        vec![ForceTerm::new(0, p.kappa, [3u8, 0, 0, 0])]
    };
    MechanicalSystem::new(mass, damping, stiffness, forces)
}
