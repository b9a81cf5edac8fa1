//! Truncated polynomials in two variables `(z₁, z₂)`, stored densely by
//! degree. The coefficient of `z₁^a z₂^b` sits at `tri(a+b) + b`.

use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;

#[inline]
pub(crate) fn tri(deg: usize) -> usize {
    deg * (deg + 1) / 2
}

#[inline]
pub(crate) fn idx(a: usize, b: usize) -> usize {
    tri(a + b) + b
}

#[derive(Clone, Debug)]
pub(crate) struct BiPoly<S> {
    pub max_deg: usize,
    pub c: Vec<S>,
}

impl<S: Scalar> BiPoly<S> {
    pub fn zeros(max_deg: usize) -> Self {
        BiPoly {
            max_deg,
            c: vec![S::zero(); tri(max_deg + 1)],
        }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> &S {
        &self.c[idx(a, b)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, v: S) {
        self.c[idx(a, b)] = v;
    }

    pub fn slice(&self, deg: usize) -> &[S] {
        &self.c[tri(deg)..tri(deg + 1)]
    }

    /// Writes the degree-`deg` part of `p·q` into `self`, using only the
    /// degrees of `p` in `p_lo..` and of `q` in `q_lo..`.
    pub fn set_product_slice(&mut self, p: &BiPoly<S>, q: &BiPoly<S>, deg: usize, p_lo: usize, q_lo: usize) {
        let out = &mut self.c[tri(deg)..tri(deg + 1)];
        for o in out.iter_mut() {
            *o = S::zero();
        }
        if deg < p_lo + q_lo {
            return;
        }
        for s in p_lo..=(deg - q_lo).min(p.max_deg) {
            let t = deg - s;
            if t > q.max_deg {
                continue;
            }
            let ps = p.slice(s);
            let qs = q.slice(t);
            for (bp, x) in ps.iter().enumerate() {
                if x.is_zero() {
                    continue;
                }
                for (bq, y) in qs.iter().enumerate() {
                    if y.is_zero() {
                        continue;
                    }
                    out[bp + bq].add_mul(x, y);
                }
            }
        }
    }

    /// Evaluates the degree range `lo..=hi` at `(z₁, z₂)` by Horner-free
    /// power tables.
    pub fn eval(&self, z1: &S, z2: &S, lo: usize, hi: usize) -> S {
        let hi = hi.min(self.max_deg);
        let mut p1 = vec![S::from_c64(num_complex::Complex64::new(1.0, 0.0))];
        let mut p2 = p1.clone();
        for k in 1..=hi {
            p1.push(p1[k - 1].mul(z1));
            p2.push(p2[k - 1].mul(z2));
        }
        let mut acc = S::zero();
        for deg in lo..=hi {
            for b in 0..=deg {
                let c = &self.c[tri(deg) + b];
                if c.is_zero() {
                    continue;
                }
                acc.add_mul(c, &p1[deg - b].mul(&p2[b]));
            }
        }
        acc
    }

    /// Value and both partial derivatives over degrees `1..=max_deg`.
    pub fn eval_grad(&self, z1: &S, z2: &S) -> (S, S, S) {
        let hi = self.max_deg;
        let one = S::from_c64(num_complex::Complex64::new(1.0, 0.0));
        let mut p1 = vec![one.clone()];
        let mut p2 = vec![one];
        for k in 1..=hi {
            p1.push(p1[k - 1].mul(z1));
            p2.push(p2[k - 1].mul(z2));
        }
        let (mut v, mut d1, mut d2) = (S::zero(), S::zero(), S::zero());
        for deg in 1..=hi {
            for b in 0..=deg {
                let c = &self.c[tri(deg) + b];
                if c.is_zero() {
                    continue;
                }
                let a = deg - b;
                v.add_mul(c, &p1[a].mul(&p2[b]));
                if a > 0 {
                    d1.add_mul(&c.scale(a as f64), &p1[a - 1].mul(&p2[b]));
                }
                if b > 0 {
                    d2.add_mul(&c.scale(b as f64), &p1[a].mul(&p2[b - 1]));
                }
            }
        }
        (v, d1, d2)
    }
}
