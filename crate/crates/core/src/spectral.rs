//! Modal decomposition of the linear part, spectral quotients and the
//! resonance scan.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::linalg::{self, CMat, CVec};
use crate::model::FirstOrderSystem;
use crate::poly::{compose_linear, PolyMap};
use crate::{Result, SsmError};

/// Eigenvalues closer than this (relative) to the real axis count as real.
const REAL_TOL: f64 = 1e-8;
/// Position entries within this relative distance of the largest count as ties.
const TIE_TOL: f64 = 1e-8;
/// Eigenvector-matrix condition number above which the linear part is
/// treated as defective.
pub const DEFECTIVE_COND: f64 = 1e10;

/// Which two-dimensional modal subspace to build the SSM over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ModeSelector {
    /// The pair with the largest real part.
    #[default]
    Slowest,
    /// One-based position of an eigenvalue in the spectrum sorted by
    /// decreasing real part; its conjugate (or real neighbour) completes
    /// the pair.
    Index(usize),
}

/// Diagonalized first-order system with the master pair in front.
#[derive(Clone, Debug)]
pub struct ModalSystem {
    pub n: usize,
    /// All `2n` eigenvalues, master pair first, the rest by decreasing real part.
    pub lambdas: Vec<Complex64>,
    /// Columns are the eigenvectors in the order of `lambdas`.
    pub t: CMat,
    pub t_inv: CMat,
    /// `T⁻¹ F(T q)`.
    pub g: PolyMap,
    /// The full spectrum sorted by decreasing real part.
    pub spectrum: Vec<Complex64>,
    /// One-based positions of the master pair in `spectrum`.
    pub master_positions: (usize, usize),
    /// Largest singular value of `A`.
    pub a_norm: f64,
    /// Condition number of `T` after scaling its columns to unit length.
    pub condition: f64,
}

impl ModalSystem {
    pub fn lambda_e(&self) -> (Complex64, Complex64) {
        (self.lambdas[0], self.lambdas[1])
    }

    pub fn lambda_c(&self) -> &[Complex64] {
        &self.lambdas[2..]
    }

    /// True when the master pair is a complex conjugate pair.
    pub fn underdamped(&self) -> bool {
        let (a, b) = self.lambda_e();
        a.im > 0.0 && b == a.conj()
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Position (one-based, in `spectrum`) of the eigenvalue in `lambdas[k]`.
    pub fn spectrum_position(&self, k: usize) -> usize {
        let (p1, p2) = self.master_positions;
        match k {
            0 => p1,
            1 => p2,
            _ => {
                let mut rest = (1..=self.spectrum.len()).filter(|&p| p != p1 && p != p2);
                rest.nth(k - 2).unwrap_or(0)
            }
        }
    }
}

impl ModalSystem {
    /// One-based mode number of `lambdas[k]`: eigenvalues in `spectrum` order
    /// with a conjugate pair counted once.
    pub fn mode_number(&self, k: usize) -> usize {
        let pos = self.spectrum_position(k);
        self.spectrum[..pos].iter().filter(|l| l.im >= 0.0).count().max(1)
    }
}

fn sort_key(l: &Complex64) -> (f64, f64, f64) {
    (-l.re, l.im.abs(), -l.im)
}

/// Diagonalizes `A` and transforms the nonlinearity to modal coordinates.
pub fn decompose(fos: &FirstOrderSystem, master: ModeSelector) -> Result<ModalSystem> {
    let dim = fos.dim;
    let n = dim / 2;
    let a = &fos.a;
    let a_norm = linalg::norm2(a);
    let (vals, vecs) = linalg::eigen(a)?;

    // Pair conjugates exactly; make real modes real.
    let mut pairs: Vec<(Complex64, CVec)> = Vec::with_capacity(dim);
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for (k, &l) in vals.iter().enumerate() {
        let tol = REAL_TOL * l.norm().max(f64::MIN_POSITIVE);
        let v = vecs.column(k).into_owned();
        if l.im > tol {
            upper.push((l, v));
        } else if l.im < -tol {
            lower.push((l, v));
        } else {
            let p = v.icamax();
            let phase = v[p].conj() / v[p].norm();
            let v = (v * phase).map(|x| Complex64::new(x.re, 0.0));
            pairs.push((Complex64::new(l.re, 0.0), v));
        }
    }
    if upper.len() != lower.len() {
        return Err(SsmError::EigenFailure);
    }
    let mut taken = vec![false; lower.len()];
    for (l, v) in upper {
        let best = lower
            .iter()
            .enumerate()
            .filter(|(j, _)| !taken[*j])
            .min_by(|(_, x), (_, y)| {
                let dx = (x.0 - l.conj()).norm();
                let dy = (y.0 - l.conj()).norm();
                dx.partial_cmp(&dy).unwrap_or(core::cmp::Ordering::Equal)
            })
            .map(|(j, _)| j)
            .ok_or(SsmError::EigenFailure)?;
        taken[best] = true;
        let vn = normalize_position(&v, n);
        pairs.push((l, vn.clone()));
        pairs.push((l.conj(), vn.map(|x| x.conj())));
    }
    for p in pairs.iter_mut() {
        if p.0.im == 0.0 {
            p.1 = normalize_position(&p.1, n);
        }
    }
    pairs.sort_by(|x, y| {
        sort_key(&x.0)
            .partial_cmp(&sort_key(&y.0))
            .unwrap_or(core::cmp::Ordering::Equal)
    });

    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let spectral_radius = pairs.iter().fold(0.0f64, |m, p| m.max(p.0.norm()));
    for p in &pairs {
        if p.0.re >= -1e-12 * spectral_radius.max(f64::MIN_POSITIVE) {
            return Err(SsmError::UnstableSpectrum { eigenvalue: p.0 });
        }
    }
    let spectrum: Vec<Complex64> = pairs.iter().map(|p| p.0).collect();

    let (m1, m2) = select_master(&spectrum, master)?;
    let mut order = vec![m1, m2];
    order.extend((0..dim).filter(|&k| k != m1 && k != m2));

    let ac = linalg::complexify(a);
    let mut t = CMat::zeros(dim, dim);
    let mut lambdas = Vec::with_capacity(dim);
    for (col, &k) in order.iter().enumerate() {
        let (l, v) = &pairs[k];
        let res = (&ac * v - v * *l).norm() / v.norm();
        if res > 1e-10 * a_norm.max(scale) {
            return Err(SsmError::EigenFailure);
        }
        t.set_column(col, v);
        lambdas.push(*l);
    }

    let mut unit = t.clone();
    for mut c in unit.column_iter_mut() {
        let nc = c.norm();
        c /= Complex64::new(nc, 0.0);
    }
    let condition = linalg::condition_number(&unit);
    if !(condition <= DEFECTIVE_COND) {
        return Err(SsmError::DefectiveMatrix { condition });
    }
    let t_inv = linalg::inverse(&t)?;

    // G(q) = T⁻¹ [0; −M⁻¹ f(T q)]
    let mut left = CMat::zeros(dim, n);
    for i in 0..dim {
        for j in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..n {
                s -= t_inv[(i, n + k)] * fos.mass_inv[(k, j)];
            }
            left[(i, j)] = s;
        }
    }
    let g = compose_linear(&fos.force, &t, &left)?;

    Ok(ModalSystem {
        n,
        lambdas,
        t,
        t_inv,
        g,
        spectrum,
        master_positions: (m1 + 1, m2 + 1),
        a_norm,
        condition,
    })
}

/// Scales `v` so that its largest position entry is exactly one.
fn normalize_position(v: &CVec, n: usize) -> CVec {
    let max = (0..n).fold(0.0f64, |m, k| m.max(v[k].norm()));
    let p = (0..n).find(|&k| v[k].norm() >= max * (1.0 - TIE_TOL)).unwrap_or(0);
    let pivot = v[p];
    let mut out = v / pivot;
    out[p] = Complex64::new(1.0, 0.0);
    out
}

fn select_master(spectrum: &[Complex64], sel: ModeSelector) -> Result<(usize, usize)> {
    let len = spectrum.len();
    let k = match sel {
        ModeSelector::Slowest => 0,
        ModeSelector::Index(i) => {
            if i == 0 || i > len {
                return Err(SsmError::InvalidMode(format!("eigenvalue index {i} outside 1..={len}")));
            }
            i - 1
        }
    };
    let l = spectrum[k];
    if l.im > 0.0 {
        return Ok((k, k + 1));
    }
    if l.im < 0.0 {
        return Ok((k - 1, k));
    }
    if k + 1 < len && spectrum[k + 1].im == 0.0 {
        Ok((k, k + 1))
    } else if k > 0 && spectrum[k - 1].im == 0.0 {
        Ok((k - 1, k))
    } else {
        Err(SsmError::InvalidMode(format!(
            "real eigenvalue at position {} has no real neighbour to pair with",
            k + 1
        )))
    }
}

/// Integer spectral quotients of the master subspace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpectralQuotients {
    pub sigma_out: i64,
    pub sigma_in: i64,
}

/// Integer part of a ratio, snapping values within rounding of an integer.
fn int_part(x: f64) -> i64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as i64
    } else {
        x.floor() as i64
    }
}

pub fn spectral_quotients(ms: &ModalSystem) -> SpectralQuotients {
    let (l1, l2) = ms.lambda_e();
    let max_e = l1.re.max(l2.re);
    let min_e = l1.re.min(l2.re);
    let min_c = ms.lambda_c().iter().map(|l| l.re).fold(f64::INFINITY, f64::min);
    let sigma_out = if min_c.is_finite() { int_part(min_c / max_e) } else { 0 };
    SpectralQuotients {
        sigma_out,
        sigma_in: int_part(min_e / max_e),
    }
}

/// Whether the resonant eigenvalue lies inside or outside the master pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResonanceKind {
    Inner,
    Outer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceEntry {
    pub a: usize,
    pub b: usize,
    /// Zero-based row of the resonant eigenvalue in `ModalSystem::lambdas`.
    pub row: usize,
    pub lambda: Complex64,
    pub kind: ResonanceKind,
    /// Closeness measure in `[0, 1]`; zero for exact resonance.
    pub measure: f64,
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceReport {
    pub entries: Vec<ResonanceEntry>,
    pub delta: f64,
    pub max_order: usize,
    pub warnings: Vec<String>,
}

impl ResonanceReport {
    pub fn inner(&self) -> impl Iterator<Item = &ResonanceEntry> {
        self.entries.iter().filter(|e| e.kind == ResonanceKind::Inner)
    }

    pub fn outer(&self) -> impl Iterator<Item = &ResonanceEntry> {
        self.entries.iter().filter(|e| e.kind == ResonanceKind::Outer)
    }

    pub fn is_flagged(&self, row: usize, a: usize, b: usize) -> bool {
        self.entries.iter().any(|e| e.row == row && e.a == a && e.b == b)
    }
}

/// Cosine-type closeness of `aλ₁ + bλ₂` to `λ_l`.
pub fn resonance_measure(l1: Complex64, l2: Complex64, ll: Complex64, a: usize, b: usize) -> f64 {
    let (af, bf) = (a as f64, b as f64);
    let num = (l1 * af + l2 * bf - ll).norm();
    let cn = (af * af + bf * bf + 1.0).sqrt();
    let vn = (l1.norm_sqr() + l2.norm_sqr() + ll.norm_sqr()).sqrt();
    if vn == 0.0 {
        return 0.0;
    }
    num / (cn * vn)
}

/// Lists all `(a, b, λ_l)` with `2 ≤ a+b ≤ max_order` whose closeness
/// measure falls below `delta`.
pub fn resonance_scan(ms: &ModalSystem, delta: f64, max_order: usize) -> ResonanceReport {
    let (l1, l2) = ms.lambda_e();
    let mut warnings = Vec::new();
    if delta >= 0.1 {
        warnings.push(format!(
            "delta = {delta} is not well below the maximal closeness of 1; many weak resonances will be flagged"
        ));
    }
    let mut entries = Vec::new();
    for order in 2..=max_order {
        for b in 0..=order {
            let a = order - b;
            for (row, &ll) in ms.lambdas.iter().enumerate() {
                let measure = resonance_measure(l1, l2, ll, a, b);
                if measure < delta {
                    entries.push(ResonanceEntry {
                        a,
                        b,
                        row,
                        lambda: ll,
                        kind: if row < 2 {
                            ResonanceKind::Inner
                        } else {
                            ResonanceKind::Outer
                        },
                        measure,
                        order,
                    });
                }
            }
        }
    }
    ResonanceReport {
        entries,
        delta,
        max_order,
        warnings,
    }
}
