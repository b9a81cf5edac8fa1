//! Strategies and checks for the Kronecker identities and the collapsed
//! block representation, shared by the property tests and the acceptance
//! report.

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use ssmkit_core::linalg::CMat;
use ssmkit_core::poly::dense::{expand, kron_power};
use ssmkit_core::poly::{keys_of_degree, kron_compose, Block};
use ssmkit_core::Complex64;

pub const CASES: u32 = 200;

pub fn c64() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

pub fn cmat(rows: usize, cols: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec(c64(), rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

pub fn square() -> impl Strategy<Value = CMat> {
    (2usize..=3).prop_flat_map(|n| cmat(n, n))
}

pub fn cvec(d: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(c64(), d)
}

/// A random homogeneous block with roughly half of its monomials present.
pub fn block(d: usize, e: usize, order: usize) -> impl Strategy<Value = Block> {
    let keys = keys_of_degree(d, order);
    let n = keys.len();
    (
        prop::collection::vec(any::<bool>(), n),
        prop::collection::vec(c64(), n * e),
    )
        .prop_map(move |(mask, vals)| {
            let mut b = Block::new(d, e, order);
            for (k, key) in keys.iter().enumerate() {
                if mask[k] || k == 0 {
                    for r in 0..e {
                        b.add(key, r, vals[k * e + r]);
                    }
                }
            }
            b
        })
}

pub fn square_triple() -> impl Strategy<Value = (CMat, CMat, CMat)> {
    (2usize..=3).prop_flat_map(|n| (cmat(n, n), cmat(n, n), cmat(n, n)))
}

pub fn mixed_quad() -> impl Strategy<Value = (CMat, CMat, CMat, CMat)> {
    (2usize..=3, 2usize..=3).prop_flat_map(|(n, m)| (cmat(n, n), cmat(m, m), cmat(n, n), cmat(m, m)))
}

pub fn block_and_point() -> impl Strategy<Value = (Block, Vec<Complex64>)> {
    (1usize..=3, 1usize..=3, 1usize..=4).prop_flat_map(|(d, e, i)| (block(d, e, i), cvec(d)))
}

pub fn three_factors() -> impl Strategy<Value = (Block, Block, Block, Vec<Complex64>)> {
    (1usize..=2, 1usize..=2, 1usize..=2)
        .prop_flat_map(|(r1, r2, r3)| (block(2, 2, r1), block(2, 3, r2), block(2, 2, r3), cvec(2)))
}

pub fn two_factors_on_a_trajectory() -> impl Strategy<Value = (Block, Block, Vec<Complex64>, Vec<Complex64>)> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(r1, r2)| (block(2, 2, r1), block(2, 2, r2), cvec(2), cvec(2)))
}

fn close(a: &CMat, b: &CMat, rel: f64) -> bool {
    let scale = a.norm().max(b.norm()).max(1.0);
    (a - b).norm() <= rel * scale
}

fn close_vec(a: &[Complex64], b: &[Complex64], rel: f64) -> bool {
    let na = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    diff <= rel * na.max(nb).max(1e-300)
}

fn kron_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

pub fn associativity(a: &CMat, b: &CMat, c: &CMat) -> Result<(), TestCaseError> {
    let left = a.kronecker(b).kronecker(c);
    let right = a.kronecker(&b.kronecker(c));
    prop_assert!(close(&left, &right, 1e-13));
    Ok(())
}

pub fn distributivity(a: &CMat, b: &CMat, c: &CMat) -> Result<(), TestCaseError> {
    prop_assert!(close(&(a + b).kronecker(c), &(a.kronecker(c) + b.kronecker(c)), 1e-13));
    prop_assert!(close(&a.kronecker(&(b + c)), &(a.kronecker(b) + a.kronecker(c)), 1e-13));
    Ok(())
}

pub fn mixed_product(a: &CMat, b: &CMat, c: &CMat, d: &CMat) -> Result<(), TestCaseError> {
    let left = a.kronecker(b) * c.kronecker(d);
    let right = (a * c).kronecker(&(b * d));
    prop_assert!(close(&left, &right, 1e-13));
    Ok(())
}

pub fn power(v: &[Complex64], i: usize) -> Result<(), TestCaseError> {
    let mut direct = v.to_vec();
    for _ in 1..i {
        direct = kron_vec(&direct, v);
    }
    prop_assert!(close_vec(&kron_power(v, i), &direct, 1e-14));
    Ok(())
}

pub fn dense_equals_compressed(b: &Block, q: &[Complex64]) -> Result<(), TestCaseError> {
    let dense = expand(b);
    let qi = nalgebra::DVector::from_vec(kron_power(q, b.order));
    let via_dense: Vec<Complex64> = (dense * qi).iter().copied().collect();
    prop_assert!(close_vec(&via_dense, &b.eval(q), 1e-12));
    Ok(())
}

pub fn composition(f1: &Block, f2: &Block, f3: &Block, z: &[Complex64]) -> Result<(), TestCaseError> {
    let two = kron_compose(&[f1, f2], f1.order + f2.order).unwrap();
    prop_assert!(close_vec(&two.eval(z), &kron_vec(&f1.eval(z), &f2.eval(z)), 1e-12));
    let three = kron_compose(&[f1, f2, f3], f1.order + f2.order + f3.order).unwrap();
    let direct = kron_vec(&kron_vec(&f1.eval(z), &f2.eval(z)), &f3.eval(z));
    prop_assert!(close_vec(&three.eval(z), &direct, 1e-12));
    Ok(())
}

/// Product rule for `d/dt (f₁(z) ⊗ f₂(z))` along `z(t) = (z₀₁ e^{μ₁t}, z₀₂ e^{μ₂t})`.
pub fn product_rule(f1: &Block, f2: &Block, z0: &[Complex64], mu: &[Complex64]) -> Result<(), TestCaseError> {
    let traj = |t: f64| -> Vec<Complex64> { z0.iter().zip(mu).map(|(z, m)| z * (m * t).exp()).collect() };
    let composed = kron_compose(&[f1, f2], f1.order + f2.order).unwrap();
    let t = 0.3;
    let z = traj(t);
    let zdot: Vec<Complex64> = z.iter().zip(mu).map(|(z, m)| z * m).collect();
    let h = 1e-6;
    let fd: Vec<Complex64> = composed
        .eval(&traj(t + h))
        .iter()
        .zip(composed.eval(&traj(t - h)))
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    let rule: Vec<Complex64> = kron_vec(&f1.eval_derivative(&z, &zdot), &f2.eval(&z))
        .iter()
        .zip(kron_vec(&f1.eval(&z), &f2.eval_derivative(&z, &zdot)))
        .map(|(a, b)| a + b)
        .collect();
    let scale = rule.iter().map(|x| x.norm()).fold(1.0, f64::max);
    for (a, b) in fd.iter().zip(&rule) {
        prop_assert!((a - b).norm() <= 1e-6 * scale, "{a} vs {b}");
    }
    prop_assert!(close_vec(&composed.eval_derivative(&z, &zdot), &rule, 1e-12));
    Ok(())
}
