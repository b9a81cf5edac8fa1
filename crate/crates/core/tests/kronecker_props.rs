//! Randomized checks of the Kronecker identities and of the collapsed
//! block representation against its dense Kronecker-matrix form.

#[path = "support/kron.rs"]
mod kron;

use kron::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn kronecker_product_is_associative(a in square(), b in square(), c in square()) {
        associativity(&a, &b, &c)?;
    }

    #[test]
    fn kronecker_product_distributes((a, b, c) in square_triple()) {
        distributivity(&a, &b, &c)?;
    }

    #[test]
    fn mixed_product_property((a, b, c, d) in mixed_quad()) {
        mixed_product(&a, &b, &c, &d)?;
    }

    #[test]
    fn kron_power_matches_repeated_products(v in cvec(3), i in 1usize..=4) {
        power(&v, i)?;
    }

    #[test]
    fn compressed_block_equals_dense_kronecker_form((b, q) in block_and_point()) {
        dense_equals_compressed(&b, &q)?;
    }

    #[test]
    fn composition_matches_product_of_factors((f1, f2, f3, z) in three_factors()) {
        composition(&f1, &f2, &f3, &z)?;
    }

    #[test]
    fn product_rule_along_trajectories((f1, f2, z0, mu) in two_factors_on_a_trajectory()) {
        product_rule(&f1, &f2, &z0, &mu)?;
    }
}
