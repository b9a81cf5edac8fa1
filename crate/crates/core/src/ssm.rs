//! Order-by-order solution of the invariance equation
//! `Λ W(z) + G(W(z)) = DW(z) R(z)` for a two-dimensional SSM.
//!
//! `W` and `R` are kept as dense bivariate coefficient arrays. At order `i`
//! the known lower orders produce a source term `B_i`; because `Λ` is
//! diagonal and `DW_i R_1` acts diagonally on monomials, each coefficient is
//! obtained by one division by `λ_l − (aλ₁ + bλ₂)`. Near-inner-resonant
//! slots are moved into `R` instead (mixed parameterization).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::bipoly::{tri, BiPoly};
use crate::poly::{MonomialKey, PolyMap};
use crate::scalar::Scalar;
use crate::spectral::{resonance_scan, spectral_quotients, ModalSystem, ResonanceReport};
use crate::{Result, SsmError};

/// Largest supported expansion order.
pub const MAX_ORDER: usize = 25;
/// Relative size of `λ_l − (aλ₁ + bλ₂)` below which a resonance is exact.
pub const EXACT_RESONANCE: f64 = 1e-10;
/// Source entries smaller than this fraction of the largest one at the same
/// order are treated as zero when deciding on outer-resonance breakdown.
const NEGLIGIBLE_SOURCE: f64 = 1e-12;

/// A `(row, monomial)` slot whose source term was moved into `R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ResonantSlot {
    pub order: usize,
    /// Zero-based master row (0 or 1).
    pub row: usize,
    pub a: usize,
    pub b: usize,
}

struct Node<S> {
    parent: Option<usize>,
    var: usize,
    depth: usize,
    prod: BiPoly<S>,
}

struct GTerm<S> {
    node: usize,
    coeffs: Vec<(usize, S)>,
}

/// Solved `W` rows, `R` rows, resonant slots and the resonance report.
pub(crate) type Parts<S> = (Vec<BiPoly<S>>, [BiPoly<S>; 2], Vec<ResonantSlot>, ResonanceReport);

/// Incremental solver; orders must be assembled and solved in sequence.
pub struct Solver<'a, S: Scalar> {
    ms: &'a ModalSystem,
    n_w: usize,
    report: ResonanceReport,
    lambdas: Vec<S>,
    w: Vec<BiPoly<S>>,
    r: [BiPoly<S>; 2],
    solved: usize,
    nodes: Vec<Node<S>>,
    terms: Vec<GTerm<S>>,
    resonant: Vec<ResonantSlot>,
}

impl<'a, S: Scalar> Solver<'a, S> {
    /// Sets up order one: `W₁` embeds `z` into the master coordinates and
    /// `R₁ = Λ_E`.
    pub fn new(ms: &'a ModalSystem, n_w: usize, delta: f64) -> Result<Self> {
        if n_w == 0 {
            return Err(SsmError::invalid("order", "must be at least 1"));
        }
        if n_w > MAX_ORDER {
            return Err(SsmError::OrderTooLarge {
                order: n_w,
                cap: MAX_ORDER,
            });
        }
        if !(delta >= 0.0) {
            return Err(SsmError::invalid("delta", "must be non-negative"));
        }
        let dim = ms.dim();
        let lambdas: Vec<S> = ms.lambdas.iter().map(|&l| S::from_c64(l)).collect();
        let mut w = vec![BiPoly::zeros(n_w); dim];
        let one = S::from_c64(Complex64::new(1.0, 0.0));
        w[0].set(1, 0, one.clone());
        w[1].set(0, 1, one);
        let mut r = [BiPoly::zeros(n_w), BiPoly::zeros(n_w)];
        r[0].set(1, 0, lambdas[0].clone());
        r[1].set(0, 1, lambdas[1].clone());

        // Share partial products between monomials of G with common prefixes.
        let mut nodes: Vec<Node<S>> = Vec::new();
        let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut terms = Vec::new();
        for (key, coeffs) in ms.g.iter() {
            if key.degree() > n_w {
                continue;
            }
            let mut parent: Option<usize> = None;
            for (depth, v) in key.vars().into_iter().enumerate() {
                let slot = (parent.map_or(usize::MAX, |p| p), v);
                let id = match index.get(&slot) {
                    Some(&id) => id,
                    None => {
                        let id = nodes.len();
                        nodes.push(Node {
                            parent,
                            var: v,
                            depth: depth + 1,
                            prod: BiPoly::zeros(if depth == 0 { 0 } else { n_w }),
                        });
                        index.insert(slot, id);
                        id
                    }
                };
                parent = Some(id);
            }
            let coeffs: Vec<(usize, S)> = coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| c.norm() != 0.0)
                .map(|(row, &c)| (row, S::from_c64(c)))
                .collect();
            if let Some(node) = parent {
                terms.push(GTerm { node, coeffs });
            }
        }

        Ok(Solver {
            ms,
            n_w,
            report: resonance_scan(ms, delta, n_w),
            lambdas,
            w,
            r,
            solved: 1,
            nodes,
            terms,
            resonant: Vec::new(),
        })
    }

    pub fn report(&self) -> &ResonanceReport {
        &self.report
    }

    pub fn solved_order(&self) -> usize {
        self.solved
    }

    pub fn w_coefficient(&self, row: usize, a: usize, b: usize) -> &S {
        self.w[row].get(a, b)
    }

    pub fn r_coefficient(&self, row: usize, a: usize, b: usize) -> &S {
        self.r[row].get(a, b)
    }

    /// Source term of order `i`: one vector per row over the keys
    /// `(i, 0), (i−1, 1), …, (0, i)`.
    ///
    /// `B_i = Σ_{m=2}^{i−1} [DW_m R_{i+1−m}]_i − [G(W_{<i})]_i`.
    pub fn assemble_b(&mut self, i: usize) -> Result<Vec<Vec<S>>> {
        if i < 2 || i > self.n_w || self.solved + 1 != i {
            return Err(SsmError::MissingLowerOrder { order: i });
        }
        let dim = self.ms.dim();
        let mut b = vec![vec![S::zero(); i + 1]; dim];

        // Degree-i slices of the cached products W_{v1}·…·W_{vk}.
        for id in 0..self.nodes.len() {
            let depth = self.nodes[id].depth;
            if depth < 2 || depth > i {
                continue;
            }
            let parent = self.nodes[id].parent.expect("product node has a parent");
            let var = self.nodes[id].var;
            let (before, after) = self.nodes.split_at_mut(id);
            let node = &mut after[0];
            let parent_poly = if before[parent].depth == 1 {
                &self.w[before[parent].var]
            } else {
                &before[parent].prod
            };
            node.prod.set_product_slice(parent_poly, &self.w[var], i, depth - 1, 1);
        }
        for term in &self.terms {
            let node = &self.nodes[term.node];
            if node.depth > i {
                continue;
            }
            let slice = if node.depth == 1 {
                self.w[node.var].slice(i)
            } else {
                node.prod.slice(i)
            };
            for (row, c) in &term.coeffs {
                let out = &mut b[*row];
                for (o, p) in out.iter_mut().zip(slice) {
                    if !p.is_zero() {
                        *o = o.sub(&c.mul(p));
                    }
                }
            }
        }

        // Σ_m DW_m · R_{i+1−m}, skipping the diagonal m = i and m = 1 parts.
        for k in 0..2 {
            for s in 2..i {
                let m = i + 1 - s;
                for rb in 0..=s {
                    let ra = s - rb;
                    let rc = self.r[k].get(ra, rb);
                    if rc.is_zero() {
                        continue;
                    }
                    for (row, out) in b.iter_mut().enumerate() {
                        let wm = self.w[row].slice(m);
                        for (wb, wc) in wm.iter().enumerate() {
                            if wc.is_zero() {
                                continue;
                            }
                            let wa = m - wb;
                            let (e, ob) = if k == 0 {
                                (wa, wb)
                            } else if wb > 0 {
                                (wb, wb - 1)
                            } else {
                                continue;
                            };
                            if e == 0 {
                                continue;
                            }
                            // ∂/∂z_k z₁^wa z₂^wb · z₁^ra z₂^rb lands on key with b = ob + rb
                            out[ob + rb].add_mul(&wc.scale(e as f64), rc);
                        }
                    }
                }
            }
        }
        Ok(b)
    }

    /// Solves order `i` from its source term.
    pub fn solve_order(&mut self, i: usize, b: &[Vec<S>]) -> Result<()> {
        if self.solved + 1 != i {
            return Err(SsmError::MissingLowerOrder { order: i });
        }
        let dim = self.ms.dim();
        if b.len() != dim {
            return Err(SsmError::DimensionMismatch {
                context: "source term rows",
                expected: dim,
                found: b.len(),
            });
        }
        let (l1, l2) = (self.ms.lambdas[0], self.ms.lambdas[1]);
        let bmax = b.iter().flat_map(|row| row.iter()).fold(0.0f64, |m, x| m.max(x.norm()));
        for (row, brow) in b.iter().enumerate() {
            let ll = self.ms.lambdas[row];
            for (kb, src) in brow.iter().enumerate() {
                let ka = i - kb;
                let d64 = ll - (l1 * ka as f64 + l2 * kb as f64);
                let exact = d64.norm() < EXACT_RESONANCE * ll.norm();
                if row < 2 {
                    if exact || self.report.is_flagged(row, ka, kb) {
                        self.r[row].set(ka, kb, src.neg());
                        self.w[row].set(ka, kb, S::zero());
                        self.resonant.push(ResonantSlot {
                            order: i,
                            row,
                            a: ka,
                            b: kb,
                        });
                        continue;
                    }
                } else if exact {
                    let size = src.norm();
                    if size > NEGLIGIBLE_SOURCE * bmax && size > 0.0 {
                        return Err(SsmError::OuterResonanceBreakdown {
                            order: i,
                            a: ka,
                            b: kb,
                            index: self.ms.spectrum_position(row),
                            mode: self.ms.mode_number(row),
                            lambda: ll,
                            denominator: d64.norm(),
                        });
                    }
                    self.w[row].set(ka, kb, S::zero());
                    continue;
                }
                let d = self.lambdas[row]
                    .sub(&self.lambdas[0].scale(ka as f64))
                    .sub(&self.lambdas[1].scale(kb as f64));
                self.w[row].set(ka, kb, src.div(&d));
            }
        }
        self.solved = i;
        Ok(())
    }

    pub(crate) fn into_parts(self) -> Parts<S> {
        (self.w, self.r, self.resonant, self.report)
    }
}

/// Runs the solver through order `n_w` in scalar type `S`.
pub(crate) fn solve_coefficients<S: Scalar>(ms: &ModalSystem, n_w: usize, delta: f64) -> Result<Parts<S>> {
    let mut solver = Solver::<S>::new(ms, n_w, delta)?;
    for i in 2..=n_w {
        let b = solver.assemble_b(i)?;
        solver.solve_order(i, &b)?;
    }
    Ok(solver.into_parts())
}

/// Computed SSM parameterization `W` and reduced dynamics `R`.
#[derive(Clone, Debug)]
pub struct SsmExpansion {
    pub order: usize,
    pub delta: f64,
    /// `z ∈ C² → C^{2n}` in modal coordinates.
    pub w: PolyMap,
    /// `z ∈ C² → C²`.
    pub r: PolyMap,
    pub resonant_keys: Vec<ResonantSlot>,
    pub report: ResonanceReport,
    pub modal: ModalSystem,
    pub warnings: Vec<String>,
    w_rows: Vec<BiPoly<Complex64>>,
    r_rows: [BiPoly<Complex64>; 2],
    /// `T·W`, the parameterization in physical phase-space coordinates.
    phys: Vec<BiPoly<Complex64>>,
}

fn to_polymap(rows: &[BiPoly<Complex64>], max_deg: usize) -> PolyMap {
    let mut p = PolyMap::new(2, rows.len());
    for (row, poly) in rows.iter().enumerate() {
        for deg in 1..=max_deg {
            for b in 0..=deg {
                let c = *poly.get(deg - b, b);
                if c.norm() != 0.0 {
                    p.add(&MonomialKey::pair(deg - b, b), row, c);
                }
            }
        }
    }
    p
}

impl SsmExpansion {
    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        ms: &ModalSystem,
        order: usize,
        delta: f64,
        w_rows: Vec<BiPoly<Complex64>>,
        r_rows: [BiPoly<Complex64>; 2],
        resonant_keys: Vec<ResonantSlot>,
        report: ResonanceReport,
        warnings: Vec<String>,
    ) -> Self {
        let dim = ms.dim();
        let mut phys = vec![BiPoly::<Complex64>::zeros(order); dim];
        for (i, p) in phys.iter_mut().enumerate() {
            for (k, wk) in w_rows.iter().enumerate() {
                let t = ms.t[(i, k)];
                if t.norm() == 0.0 {
                    continue;
                }
                for (o, x) in p.c.iter_mut().zip(&wk.c) {
                    *o += t * x;
                }
            }
        }
        SsmExpansion {
            order,
            delta,
            w: to_polymap(&w_rows, order),
            r: to_polymap(&r_rows, order),
            resonant_keys,
            report,
            modal: ms.clone(),
            warnings,
            w_rows,
            r_rows,
            phys,
        }
    }

    pub fn dim(&self) -> usize {
        self.modal.dim()
    }

    /// `W(z)` in modal coordinates.
    pub fn eval_w(&self, z: (Complex64, Complex64)) -> Vec<Complex64> {
        self.w_rows.iter().map(|p| p.eval(&z.0, &z.1, 1, self.order)).collect()
    }

    /// `R(z)`.
    pub fn eval_r(&self, z: (Complex64, Complex64)) -> (Complex64, Complex64) {
        (
            self.r_rows[0].eval(&z.0, &z.1, 1, self.order),
            self.r_rows[1].eval(&z.0, &z.1, 1, self.order),
        )
    }

    /// `T·W(z)`: the complex physical phase-space point.
    pub fn physical(&self, z: (Complex64, Complex64)) -> Vec<Complex64> {
        self.phys.iter().map(|p| p.eval(&z.0, &z.1, 1, self.order)).collect()
    }

    /// Physical state on the manifold at polar coordinates `(ρ, θ)` of an
    /// underdamped master pair.
    pub fn physical_polar(&self, rho: f64, theta: f64) -> Vec<Complex64> {
        let z = Complex64::from_polar(rho, theta);
        self.physical((z, z.conj()))
    }

    /// The same expansion cut at a lower order.
    pub fn truncated(&self, order: usize) -> SsmExpansion {
        let order = order.clamp(1, self.order);
        let cut = |p: &BiPoly<Complex64>| {
            let mut q = BiPoly::zeros(order);
            q.c.copy_from_slice(&p.c[..tri(order + 1)]);
            q
        };
        let w_rows: Vec<_> = self.w_rows.iter().map(cut).collect();
        let r_rows = [cut(&self.r_rows[0]), cut(&self.r_rows[1])];
        let resonant = self
            .resonant_keys
            .iter()
            .filter(|s| s.order <= order)
            .copied()
            .collect();
        let mut report = self.report.clone();
        report.entries.retain(|e| e.order <= order);
        report.max_order = order;
        SsmExpansion::from_parts(
            &self.modal,
            order,
            self.delta,
            w_rows,
            r_rows,
            resonant,
            report,
            self.warnings.clone(),
        )
    }

    pub(crate) fn w_rows(&self) -> &[BiPoly<Complex64>] {
        &self.w_rows
    }

    pub(crate) fn r_rows(&self) -> &[BiPoly<Complex64>; 2] {
        &self.r_rows
    }

    /// Largest mismatch between row `l` at key `(a, b)` and the conjugate
    /// of its partner row at `(b, a)`, relative to the largest coefficient.
    /// Only meaningful for an underdamped master pair.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let dim = self.dim();
        let lambdas = &self.modal.lambdas;
        let partner: Vec<Option<usize>> = (0..dim)
            .map(|l| {
                (0..dim).find(|&k| {
                    let tol = 1e-12 * lambdas[l].norm();
                    (lambdas[k] - lambdas[l].conj()).norm() <= tol && (lambdas[l].im == 0.0) == (k == l)
                })
            })
            .collect();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for (l, p) in partner.iter().enumerate() {
            let Some(p) = *p else { continue };
            for deg in 1..=self.order {
                for b in 0..=deg {
                    let a = deg - b;
                    let x = *self.w_rows[l].get(a, b);
                    let y = *self.w_rows[p].get(b, a);
                    scale = scale.max(x.norm());
                    worst = worst.max((x - y.conj()).norm());
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

/// Computes the SSM of the master pair of `ms` up to order `n_w`.
///
/// Resonances with closeness below `delta` are moved into the reduced
/// dynamics; exact outer resonances abort with
/// [`SsmError::OuterResonanceBreakdown`].
pub fn compute_ssm(ms: &ModalSystem, n_w: usize, delta: f64) -> Result<SsmExpansion> {
    let mut warnings = Vec::new();
    let q = spectral_quotients(ms);
    if (n_w as i64) < q.sigma_out + 1 {
        warnings.push(format!(
            "order {n_w} is below sigma_out + 1 = {}; the expansion may not approximate the unique smoothest SSM",
            q.sigma_out + 1
        ));
    }
    let (w, r, resonant, report) = solve_coefficients::<Complex64>(ms, n_w, delta)?;
    warnings.extend(report.warnings.iter().cloned());
    Ok(SsmExpansion::from_parts(
        ms, n_w, delta, w, r, resonant, report, warnings,
    ))
}

/// Number of compositions of `i` into `m` positive parts, `binomial(i−1, m−1)`.
pub fn compositions(m: usize, i: usize) -> f64 {
    if m == 0 || m > i {
        return 0.0;
    }
    let (n, k) = (i - 1, m - 1);
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 1..=k {
        acc = acc * (n - k + j) as f64 / j as f64;
    }
    acc.round()
}

/// Dense storage for the `W·R` and `G·W` Kronecker sums at one order.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryEstimate {
    pub n: usize,
    pub order: usize,
    /// `(order j, bytes)` for every `j` in `3..=order`.
    pub bytes_per_order: Vec<(usize, f64)>,
    /// Bytes at the requested order.
    pub total_bytes: f64,
}

/// Bytes needed by dense Kronecker coefficient matrices at order `i` when
/// `G` has nonzero blocks only at the orders in `present`.
pub fn memory_bytes(n: usize, i: usize, present: &[usize]) -> f64 {
    let two_n = 2.0 * n as f64;
    let mut total = 0.0;
    for m in 2..i {
        let mf = m as i32;
        let mut term = two_n * 2f64.powi(mf) + 2f64.powi(mf + i as i32) * m as f64;
        if present.contains(&m) {
            term += two_n.powi(mf + 1) + two_n.powi(mf) * 2f64.powi(i as i32) * compositions(m, i);
        }
        total += term;
    }
    8.0 * total
}

pub fn memory_estimate(n: usize, i: usize, present: &[usize]) -> Result<MemoryEstimate> {
    if i < 3 {
        return Err(SsmError::invalid("order", "memory estimate needs order >= 3"));
    }
    if n == 0 {
        return Err(SsmError::invalid("n", "need at least one degree of freedom"));
    }
    let bytes_per_order: Vec<(usize, f64)> = (3..=i).map(|j| (j, memory_bytes(n, j, present))).collect();
    Ok(MemoryEstimate {
        n,
        order: i,
        total_bytes: memory_bytes(n, i, present),
        bytes_per_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_first_order, make_shaw_pierre, ShawPierre, ShawPierreVariant};
    use crate::spectral::{decompose, ModeSelector};

    fn sp(variant: ShawPierreVariant, p: ShawPierre, sel: ModeSelector) -> ModalSystem {
        let sys = make_shaw_pierre(variant, p).unwrap();
        decompose(&build_first_order(&sys).unwrap(), sel).unwrap()
    }

    #[test]
    fn compositions_and_memory() {
        assert_eq!(compositions(3, 5), 6.0);
        let tb = 1e12;
        let m16 = memory_bytes(2, 16, &[3]) / tb;
        let m17 = memory_bytes(2, 17, &[3]) / tb;
        assert!((m16 - 0.4846).abs() < 5e-5, "{m16}");
        assert!((m17 - 2.0696).abs() < 5e-5, "{m17}");
        assert!(memory_estimate(2, 2, &[3]).is_err());
    }

    #[test]
    fn order_two_source_vanishes_for_cubic_model() {
        let ms = sp(ShawPierreVariant::Inner, ShawPierre::default(), ModeSelector::Slowest);
        let mut s = Solver::<Complex64>::new(&ms, 5, 0.05).unwrap();
        let b = s.assemble_b(2).unwrap();
        assert!(b.iter().flatten().all(|x| *x == Complex64::new(0.0, 0.0)));
        assert!(matches!(s.assemble_b(3), Err(SsmError::MissingLowerOrder { order: 3 })));
    }

    #[test]
    fn cubic_resonance_lands_in_r() {
        let ms = sp(ShawPierreVariant::Inner, ShawPierre::default(), ModeSelector::Slowest);
        let ssm = compute_ssm(&ms, 3, 0.05).unwrap();
        let slots: Vec<_> = ssm
            .resonant_keys
            .iter()
            .filter(|s| s.order == 3)
            .map(|s| (s.row, s.a, s.b))
            .collect();
        assert_eq!(slots, vec![(0, 2, 1), (1, 1, 2)]);
        let g = ssm.r.get(&MonomialKey::pair(2, 1), 0);
        assert!(g.re.abs() < 1e-12 && (g.im - 0.37504).abs() < 5e-5, "{g}");
        assert_eq!(ssm.w.get(&MonomialKey::pair(2, 1), 0), Complex64::new(0.0, 0.0));
        let nonzero_r: usize = ssm
            .r
            .blocks
            .iter()
            .filter(|(o, _)| **o > 1)
            .map(|(_, b)| b.terms.len())
            .sum();
        assert_eq!(nonzero_r, 2);
    }

    #[test]
    fn exact_outer_resonance_breaks_down() {
        let ms = sp(
            ShawPierreVariant::Outer,
            ShawPierre::outer(4.0, 0.4, 0.5),
            ModeSelector::Slowest,
        );
        match compute_ssm(&ms, 5, 0.05) {
            Err(SsmError::OuterResonanceBreakdown {
                order,
                a,
                b,
                index,
                mode,
                lambda,
                ..
            }) => {
                assert_eq!(order, 3);
                assert_eq!((a, b), (3, 0));
                assert_eq!(index, 3);
                assert_eq!(mode, 2);
                assert!((lambda - Complex64::new(-0.6, 2.9394)).norm() < 1e-3, "{lambda}");
            }
            other => panic!("expected breakdown, got {other:?}"),
        }
        let ms = sp(
            ShawPierreVariant::Outer,
            ShawPierre::outer(4.005, 0.4, 0.5),
            ModeSelector::Slowest,
        );
        assert!(compute_ssm(&ms, 15, 0.05).is_ok());
    }

    #[test]
    fn solved_entries_satisfy_diagonal_equations() {
        let ms = sp(ShawPierreVariant::Inner, ShawPierre::default(), ModeSelector::Slowest);
        let mut s = Solver::<Complex64>::new(&ms, 7, 0.05).unwrap();
        for i in 2..=7 {
            let b = s.assemble_b(i).unwrap();
            s.solve_order(i, &b).unwrap();
            let (l1, l2) = ms.lambda_e();
            for (row, brow) in b.iter().enumerate() {
                for (kb, src) in brow.iter().enumerate() {
                    let ka = i - kb;
                    let d = ms.lambdas[row] - (l1 * ka as f64 + l2 * kb as f64);
                    let w = *s.w_coefficient(row, ka, kb);
                    let r = if row < 2 {
                        *s.r_coefficient(row, ka, kb)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    let lhs = d * w;
                    let rhs = r + src;
                    assert!((lhs - rhs).norm() <= 1e-10 * (rhs.norm() + lhs.norm()).max(1e-300));
                }
            }
        }
    }
}
