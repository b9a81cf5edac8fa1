//! End-to-end runs of the `ssmkit` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn new() -> Self {
        Run {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Writes `config` with `outputs` pointing into the temp dir.
    fn config(&self, name: &str, config: &str) -> PathBuf {
        let mut v: Value = serde_json::from_str(config).unwrap();
        v["outputs"] = Value::String(self.path("out").to_string_lossy().into_owned());
        let p = self.path(name);
        fs::write(&p, v.to_string()).unwrap();
        p
    }

    fn ssmkit(&self, args: &[&str], config: &Path) -> Output {
        let mut all: Vec<&str> = args.to_vec();
        all.extend(["--config", config.to_str().unwrap()]);
        Command::new(env!("CARGO_BIN_EXE_ssmkit"))
            .args(&all)
            .env_remove("SSMKIT_THREADS")
            .output()
            .unwrap()
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.path("out").join(name)).unwrap()
    }
}

fn ok(out: &Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Data rows of a CSV written by the tool, skipping provenance and header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn compute_writes_reduced_dynamics() {
    let run = Run::new();
    let cfg = run.config("c.json", r#"{"model": {"builtin": "shaw_pierre_inner"}, "order": 15}"#);
    ok(&run.ssmkit(&["compute"], &cfg));
    let doc: Value = serde_json::from_str(&run.read("ssm.json")).unwrap();
    assert_eq!(doc["provenance"]["config"]["order"], 15);
    assert_eq!(doc["spectral_quotients"]["sigma_out"], 3);
    let rho5 = doc["polar"]["rho_dot"]["5"].as_f64().unwrap();
    assert!((rho5 + 0.00079121).abs() <= 1e-3 * 0.00079121, "{rho5}");
    // The same coefficient straight from R: Re γ at (3, 2) in the first row.
    let g = &doc["R"]["5"]["3,2"][0];
    assert!((g[0].as_f64().unwrap() - rho5).abs() < 1e-15);
    // Keys are "a,b" strings, highest power of z₁ first.
    let keys: Vec<&String> = doc["W"]["3"].as_object().unwrap().keys().collect();
    assert_eq!(keys, ["3,0", "2,1", "1,2", "0,3"]);
}

#[test]
fn order_one_is_the_linear_embedding() {
    let run = Run::new();
    let cfg = run.config("c.json", r#"{"model": {"builtin": "shaw_pierre_inner"}, "order": 1}"#);
    ok(&run.ssmkit(&["compute"], &cfg));
    let doc: Value = serde_json::from_str(&run.read("ssm.json")).unwrap();
    let w = doc["W"].as_object().unwrap();
    assert_eq!(w.keys().collect::<Vec<_>>(), vec!["1"]);
    let e1 = &w["1"]["1,0"];
    for (row, want) in [(0, 1.0), (1, 0.0), (2, 0.0), (3, 0.0)] {
        assert_eq!(e1[row][0].as_f64().unwrap(), want);
        assert_eq!(e1[row][1].as_f64().unwrap(), 0.0);
    }
    let r = doc["R"].as_object().unwrap();
    assert_eq!(r.keys().collect::<Vec<_>>(), vec!["1"]);
    let l1 = &doc["lambdas"][0];
    assert_eq!(r["1"]["1,0"][0], *l1);
    assert_eq!(r["1"]["1,0"][1], serde_json::json!([0.0, 0.0]));
}

#[test]
fn exact_outer_resonance_exits_with_diagnostic() {
    let run = Run::new();
    let cfg = run.config(
        "c.json",
        r#"{"model": {"builtin": "shaw_pierre_outer", "params": {"k2": 4.0}}, "order": 15}"#,
    );
    let out = run.ssmkit(&["compute"], &cfg);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("3·λ_j1 + 0·λ_j2") && err.contains("mode 2"), "{err}");
    assert!(!run.path("out").join("ssm.json").exists());
}

#[test]
fn exit_codes_by_failure_class() {
    let run = Run::new();
    let bad = run.config("bad.json", r#"{"model": {"builtin": "shaw_pierre_inner"}, "order": 0}"#);
    assert_eq!(run.ssmkit(&["compute"], &bad).status.code(), Some(2));
    assert_eq!(
        run.ssmkit(&["compute"], &run.path("missing.json")).status.code(),
        Some(2)
    );
    let undamped = run.config(
        "u.json",
        r#"{"model": {"matrices": {"mass": [[1,0],[0,1]], "damping": [[0,0],[0,0]], "stiffness": [[2,-1],[-1,2]]}}}"#,
    );
    assert_eq!(run.ssmkit(&["compute"], &undamped).status.code(), Some(3));
    let far = run.config(
        "f.json",
        r#"{"model": {"builtin": "shaw_pierre_inner"}, "order": 3, "rho0": 20, "n_traj": 1,
            "integration": {"max_steps": 2000}}"#,
    );
    assert_eq!(run.ssmkit(&["invariance"], &far).status.code(), Some(5));
}

#[test]
fn beam_backbone_starts_at_the_linear_frequency_and_is_reproducible() {
    let run = Run::new();
    let cfg = run.config(
        "b.json",
        r#"{"model": {"builtin": "timoshenko_beam"}, "order": 10, "rho_scale": 54.0735,
            "backbone": {"rho_max": 1.3, "rho_step": 0.01}}"#,
    );
    ok(&run.ssmkit(&["backbone"], &cfg));
    let first = run.read("backbone.csv");
    let r = rows(&first);
    assert_eq!(r.len(), 131);
    assert_eq!(num(&r[0][0]), 0.0);
    assert!((num(&r[0][1]) - 11.027).abs() < 0.02 * 11.027);
    assert_eq!(num(&r[0][2]), 0.0);
    assert!((num(&r[130][0]) - 1.3).abs() < 1e-12);
    ok(&run.ssmkit(&["backbone"], &cfg));
    assert_eq!(run.read("backbone.csv"), first);
    assert!(!first.contains('\r'));

    let single = run.config(
        "s.json",
        r#"{"model": {"builtin": "shaw_pierre_inner"}, "backbone": {"rho_max": 0.0}}"#,
    );
    ok(&run.ssmkit(&["backbone"], &single));
    assert_eq!(rows(&run.read("backbone.csv")).len(), 1);
}

#[test]
fn invariance_outputs_and_thread_independence() {
    let run = Run::new();
    let cfg = run.config(
        "i.json",
        r#"{"model": {"builtin": "shaw_pierre_inner"}, "orders": [3, 5], "n_traj": 6}"#,
    );
    ok(&run.ssmkit(&["invariance", "--threads", "1"], &cfg));
    let (summary, dist) = (run.read("invariance.csv"), run.read("invariance_dist.csv"));
    let s = rows(&summary);
    assert_eq!(s.len(), 2);
    assert!(num(&s[1][1]) < num(&s[0][1]));
    assert_eq!(rows(&dist).len(), 12);
    ok(&run.ssmkit(&["invariance", "--threads", "3"], &cfg));
    assert_eq!(run.read("invariance.csv"), summary);
    assert_eq!(run.read("invariance_dist.csv"), dist);
}

#[test]
fn single_trajectory_mean_is_its_distance() {
    let run = Run::new();
    let cfg = run.config(
        "i.json",
        r#"{"model": {"builtin": "shaw_pierre_inner"}, "order": 3, "n_traj": 1}"#,
    );
    ok(&run.ssmkit(&["invariance"], &cfg));
    let summary = rows(&run.read("invariance.csv"));
    let dist = rows(&run.read("invariance_dist.csv"));
    assert_eq!(dist.len(), 1);
    let d = num(&dist[0][3]);
    assert!(d > 0.0);
    assert_eq!(num(&summary[0][2]), d);
    assert_eq!(num(&summary[0][1]), d / num(&summary[0][3]));
}

#[test]
fn jittered_launch_angles_barely_move_the_mean() {
    let run = Run::new();
    let plain = run.config(
        "p.json",
        r#"{"model": {"builtin": "shaw_pierre_inner"}, "order": 3, "n_traj": 50}"#,
    );
    ok(&run.ssmkit(&["invariance"], &plain));
    let a = num(&rows(&run.read("invariance.csv"))[0][1]);
    let jitter = run.config(
        "j.json",
        r#"{"model": {"builtin": "shaw_pierre_inner"}, "order": 3, "n_traj": 50, "theta_seed": 7}"#,
    );
    ok(&run.ssmkit(&["invariance"], &jitter));
    let b = num(&rows(&run.read("invariance.csv"))[0][1]);
    assert!(a != b);
    assert!((a - b).abs() < 0.1 * a, "{a} vs {b}");
}

#[test]
fn resonance_table_and_plot_data() {
    let run = Run::new();
    let cfg = run.config(
        "r.json",
        r#"{"model": {"builtin": "shaw_pierre_outer"}, "order": 5, "orders": [3, 5], "n_traj": 4}"#,
    );
    let out = run.ssmkit(&["resonances"], &cfg);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("sigma_out = 3"));
    let table = rows(&run.read("resonances.csv"));
    let third = table.iter().find(|r| r[1] == "3" && r[2] == "0").unwrap();
    assert_eq!((third[4].as_str(), third[7].as_str()), ("2", "outer"));
    assert!((num(&third[8]) - 0.000162).abs() < 1e-4);

    ok(&run.ssmkit(&["plot-data"], &cfg));
    for name in [
        "plot_invariance.csv",
        "plot_invariance_dist.csv",
        "plot_backbone.csv",
        "plot_polar.csv",
        "plot_max_displacement.csv",
    ] {
        let text = run.read(name);
        assert!(text.starts_with("# ssmkit "), "{name}");
        assert!(!rows(&text).is_empty(), "{name}");
    }
}

/// Compositions of `i` into `m` positive parts by direct enumeration.
fn enumerate_compositions(m: usize, i: usize) -> u64 {
    if m == 0 {
        return u64::from(i == 0);
    }
    (1..=i).map(|first| enumerate_compositions(m - 1, i - first)).sum()
}

#[test]
fn memory_table_matches_enumeration() {
    let out = Command::new(env!("CARGO_BIN_EXE_ssmkit"))
        .args(["memory", "--n", "2", "--order", "17", "--cubic-only"])
        .output()
        .unwrap();
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let table: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
        .map(|l| l.split(',').map(num).collect())
        .collect();
    assert_eq!(table.len(), 15);
    assert_eq!(table[0][0], 3.0);
    assert!(table.iter().all(|r| r[1] > 0.0));
    assert!((table[13][2] - 0.4846).abs() < 5e-5);
    assert!((table[14][2] - 2.0696).abs() < 5e-5);
    // Order 10 recomputed from enumerated compositions.
    let (n, i) = (2.0f64, 10usize);
    let mut direct = 0.0;
    for m in 2..i {
        let mf = m as i32;
        direct += 2.0 * n * 2f64.powi(mf) + 2f64.powi(mf + i as i32) * m as f64;
        if m == 3 {
            direct +=
                (2.0 * n).powi(mf + 1) + (2.0 * n).powi(mf) * 2f64.powi(i as i32) * enumerate_compositions(m, i) as f64;
        }
    }
    let row10 = table.iter().find(|r| r[0] == 10.0).unwrap();
    assert_eq!(row10[1], 8.0 * direct);
}
