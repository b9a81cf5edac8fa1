//! Without the cubic spring the SSM is the flat modal subspace.

use ssmkit_core::model::ShawPierreVariant;
use ssmkit_core::{
    build_first_order, compute_ssm, decompose, invariance_error, make_shaw_pierre, to_polar, InvarianceOptions,
    ModeSelector, ShawPierre,
};

#[test]
fn linear_chain_has_flat_manifold_and_constant_frequency() {
    let sys = make_shaw_pierre(ShawPierreVariant::Inner, ShawPierre::inner(1.0, 0.03, 0.0)).unwrap();
    let fos = build_first_order(&sys).unwrap();
    for sel in [ModeSelector::Slowest, ModeSelector::Index(3)] {
        let ms = decompose(&fos, sel).unwrap();
        let ssm = compute_ssm(&ms, 15, 0.05).unwrap();
        for order in 2..=15 {
            let max = ssm.w.block_max_abs(order);
            assert!(max < 1e-12, "order {order}: {max}");
        }
        let pd = to_polar(&ssm).unwrap();
        let l1 = ms.lambda_e().0;
        for k in 0..=100 {
            let rho = 0.005 * k as f64;
            assert!((pd.omega(rho) - l1.im).abs() < 1e-12);
        }
        let opts = InvarianceOptions {
            n_traj: 8,
            ..InvarianceOptions::default()
        };
        let res = invariance_error(&fos, &ssm, &opts).unwrap();
        assert!(res.delta_inv < 1e-8, "{}", res.delta_inv);
    }
}
