//! Published reduced dynamics of the three-element cantilever and the
//! amplitude scale that maps our eigenvector normalization onto them.

use ssmkit_core::PolarDynamics;

/// `(power of ρ, value)` in `ρ̇`.
pub const RHO_DOT: [(usize, f64); 5] = [
    (1, -0.022856),
    (3, -0.00017033),
    (5, -4.9542e-6),
    (7, 8.5365e-8),
    (9, -3.0348e-9),
];
/// `(power of ρ, value)` in `ω`.
pub const OMEGA: [(usize, f64); 5] = [
    (0, 11.027),
    (2, 0.099097),
    (4, -0.000020843),
    (6, -2.8625e-6),
    (8, 1.729e-7),
];

/// `(exponent of the amplitude scale, ours, published)` for every published
/// coefficient. With `ρ = s·ρ_pub`, the `ρ̇` coefficient of `ρᵏ` picks up
/// `s^{k−1}` and the `ω` coefficient of `ρʲ` picks up `sʲ`.
pub fn coefficient_pairs(pd: &PolarDynamics) -> Vec<(i32, f64, f64)> {
    let mut out = Vec::new();
    for (p, want) in RHO_DOT {
        out.push((p as i32 - 1, pd.rho_dot_coeffs.get(&p).copied().unwrap_or(0.0), want));
    }
    for (p, want) in OMEGA {
        out.push((p as i32, pd.omega_coeffs.get(&p).copied().unwrap_or(0.0), want));
    }
    out
}

/// Least-squares scale `s` in `ours · s^e ≈ published` over log magnitudes.
pub fn fitted_scale(pairs: &[(i32, f64, f64)]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &(e, ours, want) in pairs {
        if e > 0 {
            num += e as f64 * (want.abs().ln() - ours.abs().ln());
            den += (e * e) as f64;
        }
    }
    (num / den).exp()
}

/// Largest relative deviation of a scaled coefficient from its published value.
pub fn worst_relative_error(pairs: &[(i32, f64, f64)], s: f64) -> (f64, i32) {
    pairs
        .iter()
        .map(|&(e, ours, want)| (((ours * s.powi(e)) - want).abs() / want.abs(), e))
        .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a })
}
