//! Acceptance report: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p ssmkit-core --test acceptance`.

#[path = "support/beam.rs"]
mod beam_ref;
#[path = "support/kron.rs"]
mod kron;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestRunner};
use ssmkit_core::beam::{assemble_beam, spectral_ratio_report, BeamAssembly, BeamParams};
use ssmkit_core::model::{FirstOrderSystem, ShawPierreVariant};
use ssmkit_core::ode::Tolerances;
use ssmkit_core::poly::multiset_count;
use ssmkit_core::reduced::max_displacement;
use ssmkit_core::ssm::memory_estimate;
use ssmkit_core::validation::residual_slope;
use ssmkit_core::{
    build_first_order, compute_ssm, decompose, invariance_error, make_shaw_pierre, resonance_scan, spectral_quotients,
    to_polar, InvarianceOptions, ModalSystem, ModeSelector, ShawPierre, SsmError,
};

/// Printed coefficients carry five significant digits.
const COEFF_REL: f64 = 1e-3;
const COEFF_RUNTIME: Duration = Duration::from_secs(60);
/// Tabulated closeness measures carry five decimals.
const MEASURE_ABS: f64 = 1e-4;
const SP_INV_RATIO: f64 = 0.1;
const BEAM_INV_RATIO: f64 = 1e-2;
const INVARIANCE_RUNTIME: Duration = Duration::from_secs(600);
const BEAM_EIG_REL: f64 = 0.02;
const BEAM_COEFF_REL: f64 = 0.05;
const BEAM_RATIO: (f64, f64) = (40.0, 60.0);
const SLOPE_MARGIN: f64 = 0.5;
const SLOPE_RADII: (f64, f64) = (1e-3, 1e-1);
const TRIVIAL_W: f64 = 1e-12;
const TRIVIAL_INV: f64 = 1e-8;
const TRIVIAL_OMEGA: f64 = 1e-12;
/// Four significant figures of 0.4846 TB and 2.0696 TB.
const MEMORY_ABS_TB: f64 = 5e-5;
const DELTA: f64 = 0.05;
/// Launch angles for the beam; a smooth periodic mean converges fast in N.
const BEAM_TRAJECTORIES: usize = 16;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sp_modal(variant: ShawPierreVariant, p: ShawPierre, sel: ModeSelector) -> (FirstOrderSystem, ModalSystem) {
    let fos = build_first_order(&make_shaw_pierre(variant, p).unwrap()).unwrap();
    let ms = decompose(&fos, sel).unwrap();
    (fos, ms)
}

fn sp_inner(sel: ModeSelector) -> (FirstOrderSystem, ModalSystem) {
    sp_modal(ShawPierreVariant::Inner, ShawPierre::default(), sel)
}

fn sp_outer(k2: f64) -> (FirstOrderSystem, ModalSystem) {
    sp_modal(
        ShawPierreVariant::Outer,
        ShawPierre::outer(k2, 0.4, 0.5),
        ModeSelector::Slowest,
    )
}

struct Beam {
    asm: BeamAssembly,
    fos: FirstOrderSystem,
    ms: ModalSystem,
}

fn beam() -> Beam {
    let asm = assemble_beam(BeamParams::reference(3)).unwrap();
    let fos = build_first_order(&asm.sys).unwrap();
    let ms = decompose(&fos, ModeSelector::Slowest).unwrap();
    Beam { asm, fos, ms }
}

/// Largest relative deviation over the published coefficients.
fn coefficient_error(got: &BTreeMap<usize, f64>, want: &[(usize, f64)]) -> f64 {
    want.iter()
        .map(|&(p, w)| (got.get(&p).copied().unwrap_or(0.0) - w).abs() / w.abs())
        .fold(0.0, f64::max)
}

fn polar_match(sel: ModeSelector, rho_dot: &[(usize, f64)], omega: &[(usize, f64)]) -> Outcome {
    let start = Instant::now();
    let (_, ms) = sp_inner(sel);
    let pd = to_polar(&compute_ssm(&ms, 15, DELTA).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let err = coefficient_error(&pd.rho_dot_coeffs, rho_dot).max(coefficient_error(&pd.omega_coeffs, omega));
    check(
        err <= COEFF_REL && elapsed < COEFF_RUNTIME,
        format!(
            "max relative error {err:.2e} (limit {COEFF_REL:e}), {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_1() -> Outcome {
    polar_match(
        ModeSelector::Slowest,
        &[
            (1, -0.015),
            (5, -0.00079121),
            (7, -0.0012708),
            (9, 0.0090446),
            (11, -0.03569),
            (13, 0.12918),
            (15, -0.45878),
        ],
        &[
            (0, 0.99989),
            (2, 0.37504),
            (4, -0.60592),
            (6, 1.1713),
            (8, -2.5137),
            (10, 5.7885),
            (12, -14.01),
            (14, 35.159),
        ],
    )
}

fn criterion_2() -> Outcome {
    polar_match(
        ModeSelector::Index(3),
        &[
            (1, -0.045),
            (5, 0.016267),
            (7, 0.02614),
            (9, 0.015714),
            (11, -0.012768),
            (13, -0.03437),
            (15, -0.0308),
        ],
        &[
            (0, 1.7315),
            (2, 0.21658),
            (4, 0.19904),
            (6, 0.14858),
            (8, 0.072849),
            (10, 0.017657),
            (12, 0.004087),
            (14, -0.011824),
        ],
    )
}

/// Largest deviation from the `(k+1, k)` inner table; `None` if an entry is missing.
fn inner_table_error(ms: &ModalSystem, want: &[f64]) -> Option<f64> {
    let report = resonance_scan(ms, DELTA, 15);
    let mut worst = 0.0f64;
    for (k, &w) in want.iter().enumerate() {
        let (a, b) = (k + 2, k + 1);
        for (row, ea, eb) in [(0, a, b), (1, b, a)] {
            let e = report.inner().find(|e| e.row == row && e.a == ea && e.b == eb)?;
            worst = worst.max((e.measure - w).abs());
        }
    }
    (report.inner().count() == 2 * want.len()).then_some(worst)
}

fn criterion_3() -> Outcome {
    let (_, e1) = sp_inner(ModeSelector::Slowest);
    let (_, e2) = sp_inner(ModeSelector::Index(3));
    let t1 = inner_table_error(&e1, &[0.00707, 0.00926, 0.01019, 0.01069, 0.01100, 0.01121, 0.01136]);
    let t2 = inner_table_error(&e2, &[0.01225, 0.01604, 0.01765, 0.01852, 0.01905, 0.01941, 0.01967]);
    let (_, outer) = sp_outer(4.005);
    let report = resonance_scan(&outer, DELTA, 15);
    let third: Vec<_> = report.outer().filter(|e| e.order == 3).collect();
    let t3 = (third.len() == 2
        && third
            .iter()
            .all(|e| matches!((e.a, e.b), (3, 0) | (0, 3)) && outer.mode_number(e.row) == 2))
    .then(|| third.iter().map(|e| (e.measure - 0.000162).abs()).fold(0.0, f64::max));
    let q1 = spectral_quotients(&e1);
    let q2 = spectral_quotients(&e2);
    let ok_tables = [t1, t2, t3].iter().all(|t| t.is_some_and(|x| x <= MEASURE_ABS));
    let ok_q = q1.sigma_out == 3 && q1.sigma_in == 1 && q2.sigma_out == 0;
    let show = |t: Option<f64>| t.map_or("missing".to_string(), |x| format!("{x:.1e}"));
    check(
        ok_tables && ok_q,
        format!(
            "table errors {} / {} / {} (limit {MEASURE_ABS:e}); sigma_out(E1)={} sigma_in(E1)={} sigma_out(E2)={}",
            show(t1),
            show(t2),
            show(t3),
            q1.sigma_out,
            q1.sigma_in,
            q2.sigma_out
        ),
    )
}

fn criterion_4() -> Outcome {
    let (_, exact) = sp_outer(4.0);
    let named = match compute_ssm(&exact, 15, DELTA) {
        Err(SsmError::OuterResonanceBreakdown { order, a, b, mode, .. }) => (order, a, b, mode) == (3, 3, 0, 2),
        _ => false,
    };
    let (_, detuned) = sp_outer(4.005);
    let completed = compute_ssm(&detuned, 15, DELTA).map(|s| s.order).ok();
    let slope = residual_slope(&detuned, 15, DELTA, SLOPE_RADII.0, SLOPE_RADII.1)
        .ok()
        .flatten();
    check(
        named && completed == Some(15) && slope.is_some_and(|s| s >= 15.0 + SLOPE_MARGIN),
        format!(
            "k2=4.0 names (3,0) with lambda_2: {named}; k2=4.005 reached order {completed:?}, residual slope {slope:.2?}"
        ),
    )
}

fn delta_inv(fos: &FirstOrderSystem, ms: &ModalSystem, order: usize, opts: &InvarianceOptions) -> Result<f64, String> {
    let ssm = compute_ssm(ms, order, DELTA).map_err(|e| e.to_string())?;
    invariance_error(fos, &ssm, opts)
        .map(|r| r.delta_inv)
        .map_err(|e| e.to_string())
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    let sp_opts = InvarianceOptions {
        rho0: 0.35,
        rho_eps: 0.01,
        n_traj: 50,
        ..InvarianceOptions::default()
    };
    for (name, sel) in [("slow", ModeSelector::Slowest), ("fast", ModeSelector::Index(3))] {
        let (fos, ms) = sp_inner(sel);
        let lo = delta_inv(&fos, &ms, 3, &sp_opts)?;
        let hi = delta_inv(&fos, &ms, 15, &sp_opts)?;
        ok &= hi <= SP_INV_RATIO * lo;
        lines.push(format!("{name} {lo:.3e} -> {hi:.3e}"));
    }
    let b = beam();
    let ssm10 = compute_ssm(&b.ms, 10, DELTA).map_err(|e| e.to_string())?;
    let s = beam_ref::fitted_scale(&beam_ref::coefficient_pairs(
        &to_polar(&ssm10).map_err(|e| e.to_string())?,
    ));
    let beam_opts = InvarianceOptions {
        rho0: 1.5 * s,
        rho_eps: 0.2 * s,
        n_traj: BEAM_TRAJECTORIES,
        tol: Tolerances::new(1e-8, 1e-10),
        ..InvarianceOptions::default()
    };
    let lo = delta_inv(&b.fos, &b.ms, 4, &beam_opts)?;
    let hi = invariance_error(&b.fos, &ssm10, &beam_opts)
        .map_err(|e| e.to_string())?
        .delta_inv;
    ok &= hi <= BEAM_INV_RATIO * lo;
    lines.push(format!("beam (N={BEAM_TRAJECTORIES}) {lo:.3e} -> {hi:.3e}"));
    let elapsed = start.elapsed();
    ok &= elapsed < INVARIANCE_RUNTIME;
    check(ok, format!("{}; {:.0} s", lines.join(", "), elapsed.as_secs_f64()))
}

fn criterion_6() -> Outcome {
    let b = beam();
    let dim = b.ms.dim();
    let l = b.ms.lambdas[0];
    let eig_err = ((l.re + 0.02286).abs() / 0.02286).max((l.im - 11.03).abs() / 11.03);
    let ssm = compute_ssm(&b.ms, 10, DELTA).map_err(|e| e.to_string())?;
    let pairs = beam_ref::coefficient_pairs(&to_polar(&ssm).map_err(|e| e.to_string())?);
    let s = beam_ref::fitted_scale(&pairs);
    let (coeff_err, _) = beam_ref::worst_relative_error(&pairs, s);
    let tip = max_displacement(&ssm, 1.5 * s, 256).map_err(|e| e.to_string())?[b.asm.tip_deflection_dof()];
    let ratio = spectral_ratio_report(&b.asm).map_err(|e| e.to_string())?;
    check(
        dim == 32
            && eig_err <= BEAM_EIG_REL
            && coeff_err <= BEAM_COEFF_REL
            && (BEAM_RATIO.0..=BEAM_RATIO.1).contains(&ratio),
        format!(
            "dim {dim}, lambda {l:.5} (rel err {eig_err:.1e}), coefficients within {:.2}% at amplitude scale {s:.3} \
             (tip {tip:.1} mm at rho=1.5), spectral ratio {ratio:.1}",
            100.0 * coeff_err
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut fixtures: Vec<(&str, ModalSystem, &[usize])> = vec![
        ("inner slow", sp_inner(ModeSelector::Slowest).1, &[3, 5, 10, 15]),
        ("inner fast", sp_inner(ModeSelector::Index(3)).1, &[3, 5, 10, 15]),
        ("outer", sp_outer(4.005).1, &[3, 5, 10, 15]),
    ];
    fixtures.push(("beam", beam().ms, &[4, 10]));
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, ms, orders) in &fixtures {
        let mut slopes = Vec::new();
        for &n_w in *orders {
            let slope = residual_slope(ms, n_w, DELTA, SLOPE_RADII.0, SLOPE_RADII.1)
                .ok()
                .flatten();
            ok &= slope.is_some_and(|s| s >= n_w as f64 + SLOPE_MARGIN);
            slopes.push(slope.map_or("none".to_string(), |s| format!("{s:.2}")));
        }
        parts.push(format!("{name} [{}]", slopes.join(" ")));
    }
    check(ok, parts.join(", "))
}

fn criterion_8() -> Outcome {
    let (fos, ms) = sp_modal(
        ShawPierreVariant::Inner,
        ShawPierre::inner(1.0, 0.03, 0.0),
        ModeSelector::Slowest,
    );
    let ssm = compute_ssm(&ms, 15, DELTA).map_err(|e| e.to_string())?;
    let w_max = (2..=15).map(|o| ssm.w.block_max_abs(o)).fold(0.0, f64::max);
    let pd = to_polar(&ssm).map_err(|e| e.to_string())?;
    let omega_err = (0..=100)
        .map(|k| (pd.omega(0.005 * k as f64) - ms.lambdas[0].im).abs())
        .fold(0.0, f64::max);
    let inv = invariance_error(&fos, &ssm, &InvarianceOptions::default())
        .map_err(|e| e.to_string())?
        .delta_inv;
    check(
        w_max < TRIVIAL_W && inv < TRIVIAL_INV && omega_err < TRIVIAL_OMEGA,
        format!("max |W_i| (i >= 2) {w_max:.1e}, delta_inv {inv:.1e}, |omega - Im lambda_1| {omega_err:.1e}"),
    )
}

fn criterion_9() -> Outcome {
    let s42 = multiset_count(4, 2).map_err(|e| e.to_string())?;
    let tb = |i| {
        memory_estimate(2, i, &[3])
            .map(|m| m.total_bytes / 1e12)
            .map_err(|e| e.to_string())
    };
    let (m16, m17) = (tb(16)?, tb(17)?);
    check(
        s42 == 10 && (m16 - 0.4846).abs() < MEMORY_ABS_TB && (m17 - 2.0696).abs() < MEMORY_ABS_TB,
        format!("S(4,2) = {s42}, M(2,16) = {m16:.4} TB, M(2,17) = {m17:.4} TB"),
    )
}

fn short<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| format!("{e:?}").chars().take(200).collect())
}

fn criterion_10() -> Outcome {
    use kron::*;
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut failures = Vec::new();
    let mut run = |name: &str, result: Result<(), String>| {
        if let Err(e) = result {
            failures.push(format!("{name}: {e}"));
        }
    };
    let runner = || TestRunner::new(config.clone());
    run(
        "associativity",
        short(runner().run(&(square(), square(), square()), |(a, b, c)| associativity(&a, &b, &c))),
    );
    run(
        "distributivity",
        short(runner().run(&square_triple(), |(a, b, c)| distributivity(&a, &b, &c))),
    );
    run(
        "mixed product",
        short(runner().run(&mixed_quad(), |(a, b, c, d)| mixed_product(&a, &b, &c, &d))),
    );
    run(
        "power",
        short(runner().run(&(cvec(3), 1usize..=4), |(v, i)| power(&v, i))),
    );
    run(
        "dense/compressed",
        short(runner().run(&block_and_point(), |(b, q)| dense_equals_compressed(&b, &q))),
    );
    run(
        "composition",
        short(runner().run(&three_factors(), |(a, b, c, z)| composition(&a, &b, &c, &z))),
    );
    run(
        "product rule",
        short(runner().run(&two_factors_on_a_trajectory(), |(a, b, z, mu)| {
            product_rule(&a, &b, &z, &mu)
        })),
    );
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("7 properties x {CASES} cases")
        } else {
            failures.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("Shaw-Pierre slow mode order-15 reduced dynamics", criterion_1),
        ("Shaw-Pierre fast mode order-15 reduced dynamics", criterion_2),
        ("resonance tables and spectral quotients", criterion_3),
        ("outer-resonance breakdown and detuned completion", criterion_4),
        ("invariance error decreases with order", criterion_5),
        ("beam fixture", criterion_6),
        ("invariance residual decay order", criterion_7),
        ("linear limit", criterion_8),
        ("combinatorics and memory estimate", criterion_9),
        ("Kronecker property suite", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {:>2}: {name} [{:.1} s] {detail}",
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
