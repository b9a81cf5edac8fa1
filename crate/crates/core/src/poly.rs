//! Multivariate polynomial maps with one coefficient vector per distinct
//! monomial.
//!
//! A homogeneous block of order `i` in `d` variables would be a dense
//! `e × d^i` Kronecker matrix; here each multiset of variable indices is
//! stored once, with the coefficient equal to the sum of all dense entries
//! belonging to that monomial. Composition with linear maps, evaluation and
//! Kronecker products work directly on this collapsed form.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_complex::Complex64;
use num_traits::Zero;

use crate::linalg::CMat;
use crate::{Result, SsmError};

/// Coefficients with a smaller modulus are dropped.
pub const PRUNE: f64 = 1e-300;

/// Exponent tuple of a monomial.
///
/// Keys order by degree first and then by descending lexicographic order of
/// the exponents, so `x₁²` precedes `x₁x₂` precedes `x₂²`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MonomialKey {
    exps: Vec<u8>,
    degree: usize,
}

impl MonomialKey {
    pub fn new(exps: impl Into<Vec<u8>>) -> Self {
        let exps = exps.into();
        let degree = exps.iter().map(|&e| e as usize).sum();
        MonomialKey { exps, degree }
    }

    /// Key `z₁^a z₂^b` over two variables.
    pub fn pair(a: usize, b: usize) -> Self {
        assert!(a < 256 && b < 256, "exponent out of range");
        MonomialKey::new([a as u8, b as u8])
    }

    /// Key of the product of the listed variables (repeats allowed).
    pub fn from_vars(dim: usize, vars: &[usize]) -> Self {
        let mut exps = vec![0u8; dim];
        for &v in vars {
            exps[v] += 1;
        }
        MonomialKey::new(exps)
    }

    pub fn exponents(&self) -> &[u8] {
        &self.exps
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    /// Variable indices with multiplicity, ascending.
    pub fn vars(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree);
        for (k, &e) in self.exps.iter().enumerate() {
            for _ in 0..e {
                out.push(k);
            }
        }
        out
    }

    pub fn mul(&self, other: &MonomialKey) -> MonomialKey {
        debug_assert_eq!(self.dim(), other.dim());
        MonomialKey::new(
            self.exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect::<Vec<u8>>(),
        )
    }

    /// Number of ordered index tuples that collapse onto this monomial.
    pub fn multinomial(&self) -> f64 {
        let mut out = 1.0;
        let mut n = 0usize;
        for &e in &self.exps {
            for k in 1..=e as usize {
                n += 1;
                out *= n as f64 / k as f64;
            }
        }
        out
    }

    pub fn eval<T>(&self, v: &[T]) -> T
    where
        T: Copy + core::ops::Mul<Output = T> + num_traits::One,
    {
        let mut acc = T::one();
        for (k, &e) in self.exps.iter().enumerate() {
            for _ in 0..e {
                acc = acc * v[k];
            }
        }
        acc
    }
}

impl Ord for MonomialKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree.cmp(&other.degree).then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for MonomialKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MonomialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, e) in self.exps.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for MonomialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.exps.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Number of monomials of degree `i` in `d` variables, `binomial(i+d−1, i)`.
pub fn multiset_count(d: usize, i: usize) -> Result<usize> {
    if d == 0 {
        return Err(SsmError::invalid("d", "need at least one variable"));
    }
    // binomial(i + d - 1, min(i, d - 1)) by the multiplicative formula;
    // every partial product is itself a binomial coefficient, so the
    // division is exact.
    let n = i.checked_add(d - 1).ok_or(SsmError::Overflow("counting multisets"))?;
    let k = i.min(d - 1);
    let mut acc: usize = 1;
    for j in 1..=k {
        let num = acc
            .checked_mul(n - k + j)
            .ok_or(SsmError::Overflow("counting multisets"))?;
        acc = num / j;
    }
    Ok(acc)
}

/// All monomials of degree `i` in `d` variables, in key order.
pub fn keys_of_degree(d: usize, i: usize) -> Vec<MonomialKey> {
    let mut out = Vec::new();
    let mut exps = vec![0u8; d];
    fill_keys(&mut exps, 0, i, &mut out);
    out
}

fn fill_keys(exps: &mut [u8], pos: usize, left: usize, out: &mut Vec<MonomialKey>) {
    let d = exps.len();
    if pos + 1 == d {
        exps[pos] = left as u8;
        out.push(MonomialKey::new(exps.to_vec()));
        exps[pos] = 0;
        return;
    }
    for e in (0..=left).rev() {
        exps[pos] = e as u8;
        fill_keys(exps, pos + 1, left - e, out);
    }
    exps[pos] = 0;
}

/// `aλ₁ + bλ₂` for every key `(a, b)` of degree `i`, in key order.
pub fn lambda_tilde_diag(lambda: (Complex64, Complex64), i: usize) -> Vec<(MonomialKey, Complex64)> {
    (0..=i)
        .map(|b| {
            let a = i - b;
            (MonomialKey::pair(a, b), lambda.0 * a as f64 + lambda.1 * b as f64)
        })
        .collect()
}

/// A homogeneous polynomial map `C^d → C^e` of fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub in_dim: usize,
    pub out_dim: usize,
    pub order: usize,
    pub terms: BTreeMap<MonomialKey, Vec<Complex64>>,
}

impl Block {
    pub fn new(in_dim: usize, out_dim: usize, order: usize) -> Self {
        Block {
            in_dim,
            out_dim,
            order,
            terms: BTreeMap::new(),
        }
    }

    /// Adds `value` to output row `row` at `key`.
    pub fn add(&mut self, key: &MonomialKey, row: usize, value: Complex64) {
        debug_assert_eq!(key.degree(), self.order);
        debug_assert_eq!(key.dim(), self.in_dim);
        if value.norm() < PRUNE {
            return;
        }
        let entry = self
            .terms
            .entry(key.clone())
            .or_insert_with(|| vec![Complex64::zero(); self.out_dim]);
        entry[row] += value;
    }

    pub fn get(&self, key: &MonomialKey, row: usize) -> Complex64 {
        self.terms.get(key).map_or(Complex64::zero(), |c| c[row])
    }

    /// Drops coefficient vectors that are entirely below [`PRUNE`].
    pub fn prune(&mut self) {
        self.terms.retain(|_, c| c.iter().any(|x| x.norm() >= PRUNE));
    }

    pub fn eval(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::zero(); self.out_dim];
        for (key, c) in &self.terms {
            let m = key.eval(v);
            for (o, ci) in out.iter_mut().zip(c) {
                *o += ci * m;
            }
        }
        out
    }

    /// Directional derivative `D(block)(v)·dv`.
    pub fn eval_derivative(&self, v: &[Complex64], dv: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::zero(); self.out_dim];
        for (key, c) in &self.terms {
            let mut dm = Complex64::zero();
            for (k, &e) in key.exponents().iter().enumerate() {
                if e == 0 || dv[k].is_zero() {
                    continue;
                }
                let mut part = dv[k] * e as f64;
                for (j, &ej) in key.exponents().iter().enumerate() {
                    let p = if j == k { ej - 1 } else { ej };
                    for _ in 0..p {
                        part *= v[j];
                    }
                }
                dm += part;
            }
            for (o, ci) in out.iter_mut().zip(c) {
                *o += ci * dm;
            }
        }
        out
    }
}

/// Polynomial map stored as homogeneous blocks keyed by order.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMap {
    pub in_dim: usize,
    pub out_dim: usize,
    pub blocks: BTreeMap<usize, Block>,
}

impl PolyMap {
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        PolyMap {
            in_dim,
            out_dim,
            blocks: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, key: &MonomialKey, row: usize, value: Complex64) {
        assert_eq!(key.dim(), self.in_dim, "monomial dimension");
        assert!(row < self.out_dim, "row out of range");
        let (i, d, e) = (key.degree(), self.in_dim, self.out_dim);
        self.blocks
            .entry(i)
            .or_insert_with(|| Block::new(d, e, i))
            .add(key, row, value);
    }

    pub fn insert_block(&mut self, block: Block) {
        assert_eq!(block.in_dim, self.in_dim);
        assert_eq!(block.out_dim, self.out_dim);
        if !block.terms.is_empty() {
            self.blocks.insert(block.order, block);
        }
    }

    pub fn block(&self, order: usize) -> Option<&Block> {
        self.blocks.get(&order)
    }

    pub fn get(&self, key: &MonomialKey, row: usize) -> Complex64 {
        self.blocks
            .get(&key.degree())
            .map_or(Complex64::zero(), |b| b.get(key, row))
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.values().all(|b| b.terms.is_empty())
    }

    pub fn max_order(&self) -> usize {
        self.blocks.keys().next_back().copied().unwrap_or(0)
    }

    pub fn min_order(&self) -> usize {
        self.blocks.keys().next().copied().unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.blocks.values().map(|b| b.terms.len()).sum()
    }

    /// Iterates `(key, coefficients)` over all blocks in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&MonomialKey, &Vec<Complex64>)> {
        self.blocks.values().flat_map(|b| b.terms.iter())
    }

    pub fn eval(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.in_dim, "evaluation point dimension");
        let mut out = vec![Complex64::zero(); self.out_dim];
        for b in self.blocks.values() {
            for (o, x) in out.iter_mut().zip(b.eval(v)) {
                *o += x;
            }
        }
        out
    }

    pub fn eval_derivative(&self, v: &[Complex64], dv: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::zero(); self.out_dim];
        for b in self.blocks.values() {
            for (o, x) in out.iter_mut().zip(b.eval_derivative(v, dv)) {
                *o += x;
            }
        }
        out
    }

    /// Jacobian matrix at `v`.
    pub fn jacobian(&self, v: &[Complex64]) -> CMat {
        let mut jac = CMat::zeros(self.out_dim, self.in_dim);
        let mut dv = vec![Complex64::zero(); self.in_dim];
        for j in 0..self.in_dim {
            dv[j] = Complex64::new(1.0, 0.0);
            let col = self.eval_derivative(v, &dv);
            for (i, c) in col.into_iter().enumerate() {
                jac[(i, j)] = c;
            }
            dv[j] = Complex64::zero();
        }
        jac
    }

    /// Largest coefficient modulus in the given order block.
    pub fn block_max_abs(&self, order: usize) -> f64 {
        self.blocks.get(&order).map_or(0.0, |b| {
            b.terms
                .values()
                .flat_map(|c| c.iter())
                .fold(0.0, |m, x| m.max(x.norm()))
        })
    }
}

/// Kronecker product of homogeneous blocks in collapsed form.
///
/// The result maps `z` to `f₁(z) ⊗ f₂(z) ⊗ … ⊗ f_m(z)`; its output rows
/// follow the Kronecker ordering (the last factor varies fastest) and its
/// order is the sum of the factor orders.
pub fn kron_compose(factors: &[&Block], total_order: usize) -> Result<Block> {
    let Some(first) = factors.first() else {
        return Err(SsmError::invalid("factors", "need at least one factor"));
    };
    let d = first.in_dim;
    let mut order = 0;
    let mut out_dim = 1usize;
    for f in factors {
        if f.in_dim != d {
            return Err(SsmError::DimensionMismatch {
                context: "kron_compose input dimension",
                expected: d,
                found: f.in_dim,
            });
        }
        order += f.order;
        out_dim = out_dim
            .checked_mul(f.out_dim)
            .ok_or(SsmError::Overflow("sizing a Kronecker product"))?;
    }
    if order != total_order {
        return Err(SsmError::DimensionMismatch {
            context: "kron_compose total order",
            expected: total_order,
            found: order,
        });
    }

    // Fold factors left to right; `acc` maps a monomial to its dense
    // coefficient vector over the partial Kronecker row space.
    let mut acc: BTreeMap<MonomialKey, Vec<Complex64>> = BTreeMap::new();
    acc.insert(MonomialKey::new(vec![0u8; d]), vec![Complex64::new(1.0, 0.0)]);
    let mut rows = 1usize;
    for f in factors {
        let mut next: BTreeMap<MonomialKey, Vec<Complex64>> = BTreeMap::new();
        let e = f.out_dim;
        for (ka, ca) in &acc {
            for (kb, cb) in &f.terms {
                let key = ka.mul(kb);
                let slot = next.entry(key).or_insert_with(|| vec![Complex64::zero(); rows * e]);
                for (r, a) in ca.iter().enumerate() {
                    if a.is_zero() {
                        continue;
                    }
                    for (s, b) in cb.iter().enumerate() {
                        slot[r * e + s] += a * b;
                    }
                }
            }
        }
        acc = next;
        rows *= e;
    }
    let mut block = Block::new(d, out_dim, total_order);
    block.terms = acc;
    block.prune();
    Ok(block)
}

/// Dense tables for products of linear forms over multiset indices.
struct MultisetTables {
    /// `succ[j][m * d + v]`: index of monomial `m·x_v` among degree-`j+1` keys.
    succ: Vec<Vec<u32>>,
    keys: Vec<Vec<MonomialKey>>,
}

impl MultisetTables {
    fn new(d: usize, max_degree: usize) -> Result<Self> {
        let mut keys = vec![vec![MonomialKey::new(vec![0u8; d])]];
        for j in 1..=max_degree {
            multiset_count(d, j)?;
            keys.push(keys_of_degree(d, j));
        }
        let mut succ = Vec::with_capacity(max_degree);
        for j in 0..max_degree {
            let index: BTreeMap<&MonomialKey, u32> =
                keys[j + 1].iter().enumerate().map(|(i, k)| (k, i as u32)).collect();
            let mut table = vec![0u32; keys[j].len() * d];
            for (m, key) in keys[j].iter().enumerate() {
                for v in 0..d {
                    let mut exps = key.exponents().to_vec();
                    exps[v] += 1;
                    table[m * d + v] = index[&MonomialKey::new(exps)];
                }
            }
            succ.push(table);
        }
        Ok(MultisetTables { succ, keys })
    }

    /// Multiplies a dense degree-`j` polynomial by the linear form `l`.
    fn times_linear(&self, p: &[Complex64], j: usize, l: &[(usize, Complex64)]) -> Vec<Complex64> {
        let d = self.keys[0][0].dim();
        let mut out = vec![Complex64::zero(); self.keys[j + 1].len()];
        let table = &self.succ[j];
        for (m, pm) in p.iter().enumerate() {
            if pm.is_zero() {
                continue;
            }
            for &(v, lv) in l {
                out[table[m * d + v] as usize] += pm * lv;
            }
        }
        out
    }
}

/// `left · p(t·q)`, collapsed onto monomials in `q`.
pub fn compose_linear(p: &PolyMap, t: &CMat, left: &CMat) -> Result<PolyMap> {
    if t.nrows() != p.in_dim {
        return Err(SsmError::DimensionMismatch {
            context: "compose_linear inner matrix rows",
            expected: p.in_dim,
            found: t.nrows(),
        });
    }
    if left.ncols() != p.out_dim {
        return Err(SsmError::DimensionMismatch {
            context: "compose_linear outer matrix columns",
            expected: p.out_dim,
            found: left.ncols(),
        });
    }
    let d = t.ncols();
    let mut out = PolyMap::new(d, left.nrows());
    let max_degree = p.max_order();
    if p.is_empty() {
        return Ok(out);
    }
    let tables = MultisetTables::new(d, max_degree)?;
    // Row k of t as a sparse linear form in q.
    let forms: Vec<Vec<(usize, Complex64)>> = (0..t.nrows())
        .map(|k| {
            (0..d)
                .filter_map(|j| {
                    let c = t[(k, j)];
                    (!c.is_zero()).then_some((j, c))
                })
                .collect()
        })
        .collect();

    for (&order, block) in &p.blocks {
        // Accumulate p's own output rows first, then apply `left` once.
        let mut acc = vec![vec![Complex64::zero(); tables.keys[order].len()]; p.out_dim];
        let mut used = vec![false; p.out_dim];
        // Consecutive keys share prefixes; cache the partial products.
        let mut cache: Vec<(usize, Vec<Complex64>)> = Vec::new();
        for (key, coeffs) in &block.terms {
            let vars = key.vars();
            let mut common = 0;
            while common < cache.len() && common < vars.len() && cache[common].0 == vars[common] {
                common += 1;
            }
            cache.truncate(common);
            for (j, &v) in vars.iter().enumerate().skip(common) {
                let next = if j == 0 {
                    let mut first = vec![Complex64::zero(); d];
                    for &(q, c) in &forms[v] {
                        first[q] = c;
                    }
                    first
                } else {
                    tables.times_linear(&cache[j - 1].1, j, &forms[v])
                };
                cache.push((v, next));
            }
            let prod = &cache[vars.len() - 1].1;
            for (row, c) in coeffs.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                used[row] = true;
                for (a, pm) in acc[row].iter_mut().zip(prod) {
                    *a += c * pm;
                }
            }
        }
        let mut result = Block::new(d, left.nrows(), order);
        for (m, key) in tables.keys[order].iter().enumerate() {
            let mut coeffs = vec![Complex64::zero(); left.nrows()];
            let mut any = false;
            for (r, c) in coeffs.iter_mut().enumerate() {
                let mut s = Complex64::zero();
                for (k, a) in acc.iter().enumerate() {
                    if used[k] {
                        s += left[(r, k)] * a[m];
                    }
                }
                if s.norm() >= PRUNE {
                    *c = s;
                    any = true;
                }
            }
            if any {
                result.terms.insert(key.clone(), coeffs);
            }
        }
        out.insert_block(result);
    }
    Ok(out)
}

/// `G(q) = T⁻¹ F(T q)` given `T` and its inverse.
pub fn transform_linear(f: &PolyMap, t: &CMat, t_inv: &CMat) -> Result<PolyMap> {
    compose_linear(f, t, t_inv)
}

/// Dense Kronecker-matrix forms of collapsed blocks, for cross-checks.
pub mod dense {
    use super::*;

    /// Expands a block into its symmetric dense `e × d^i` matrix.
    pub fn expand(block: &Block) -> CMat {
        let d = block.in_dim;
        let i = block.order;
        let cols = d.pow(i as u32);
        let mut out = CMat::zeros(block.out_dim, cols);
        let mut tuple = vec![0usize; i];
        for col in 0..cols {
            let mut rem = col;
            for slot in (0..i).rev() {
                tuple[slot] = rem % d;
                rem /= d;
            }
            let key = MonomialKey::from_vars(d, &tuple);
            if let Some(c) = block.terms.get(&key) {
                let w = key.multinomial();
                for (r, x) in c.iter().enumerate() {
                    out[(r, col)] = x / w;
                }
            }
        }
        out
    }

    /// `v^{⊗i}` as a column vector.
    pub fn kron_power(v: &[Complex64], i: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(1.0, 0.0)];
        for _ in 0..i {
            let mut next = Vec::with_capacity(out.len() * v.len());
            for a in &out {
                for b in v {
                    next.push(a * b);
                }
            }
            out = next;
        }
        out
    }
}
