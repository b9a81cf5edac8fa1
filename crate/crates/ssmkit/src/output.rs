//! Result artifacts: `ssm.json` and provenance-stamped CSV files.
//!
//! Nothing here depends on the wall clock or the thread count, so the same
//! config always produces byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use num_complex::Complex64;
use serde_json::{json, Map, Value};
use ssmkit_core::spectral::{ResonanceKind, SpectralQuotients};
use ssmkit_core::{PolarDynamics, PolyMap, ResonanceReport, SsmExpansion};

use crate::config::JobConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tool, version, command and the fully resolved config.
pub fn provenance(command: &str, cfg: &JobConfig) -> Value {
    json!({
        "tool": "ssmkit",
        "version": VERSION,
        "command": command,
        "config": cfg,
    })
}

fn complex(c: Complex64) -> Value {
    json!([c.re, c.im])
}

/// `{order → {"a,b" → [[re, im] per output row]}}`.
pub fn polymap_json(p: &PolyMap) -> Value {
    let mut orders = Map::new();
    for (order, block) in &p.blocks {
        let mut keys = Map::new();
        for (key, coeffs) in &block.terms {
            let name = key
                .exponents()
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(",");
            keys.insert(name, Value::Array(coeffs.iter().map(|c| complex(*c)).collect()));
        }
        orders.insert(order.to_string(), Value::Object(keys));
    }
    Value::Object(orders)
}

fn kind_name(k: ResonanceKind) -> &'static str {
    match k {
        ResonanceKind::Inner => "inner",
        ResonanceKind::Outer => "outer",
    }
}

pub fn resonances_json(ssm_modal: &ssmkit_core::ModalSystem, report: &ResonanceReport) -> Value {
    let entries: Vec<Value> = report
        .entries
        .iter()
        .map(|e| {
            json!({
                "order": e.order,
                "a": e.a,
                "b": e.b,
                "row": e.row,
                "mode": ssm_modal.mode_number(e.row),
                "lambda": complex(e.lambda),
                "kind": kind_name(e.kind),
                "measure": e.measure,
            })
        })
        .collect();
    json!({
        "delta": report.delta,
        "max_order": report.max_order,
        "entries": entries,
        "warnings": report.warnings,
    })
}

fn coeffs_json(c: &std::collections::BTreeMap<usize, f64>) -> Value {
    Value::Object(c.iter().map(|(p, v)| (p.to_string(), json!(v))).collect())
}

pub fn polar_json(pd: &PolarDynamics) -> Value {
    json!({
        "lambda": complex(pd.lambda),
        "rho_dot": coeffs_json(&pd.rho_dot_coeffs),
        "omega": coeffs_json(&pd.omega_coeffs),
    })
}

/// The complete `ssm.json` document.
pub fn ssm_document(
    cfg: &JobConfig,
    ssm: &SsmExpansion,
    quotients: SpectralQuotients,
    polar: Option<&PolarDynamics>,
) -> Value {
    let ms = &ssm.modal;
    let t_rows: Vec<Value> = (0..ms.dim())
        .map(|i| Value::Array((0..ms.dim()).map(|j| complex(ms.t[(i, j)])).collect()))
        .collect();
    let resonant: Vec<Value> = ssm
        .resonant_keys
        .iter()
        .map(|s| json!({"order": s.order, "row": s.row, "a": s.a, "b": s.b}))
        .collect();
    let mut warnings = ssm.warnings.clone();
    if polar.is_none() {
        warnings.push("no polar reduced dynamics: master pair is not underdamped".into());
    }
    json!({
        "provenance": provenance("compute", cfg),
        "model": cfg.model.label(),
        "n": ms.n,
        "dim": ms.dim(),
        "order": ssm.order,
        "delta": ssm.delta,
        "master_positions": [ms.master_positions.0, ms.master_positions.1],
        "lambdas": ms.lambdas.iter().map(|l| complex(*l)).collect::<Vec<_>>(),
        "spectrum": ms.spectrum.iter().map(|l| complex(*l)).collect::<Vec<_>>(),
        "condition": ms.condition,
        "spectral_quotients": {"sigma_out": quotients.sigma_out, "sigma_in": quotients.sigma_in},
        "resonances": resonances_json(ms, &ssm.report),
        "resonant_keys": resonant,
        "T": t_rows,
        "W": polymap_json(&ssm.w),
        "R": polymap_json(&ssm.r),
        "polar": polar.map(polar_json),
        "warnings": warnings,
    })
}

pub fn write_json(path: &Path, doc: &Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    write_file(path, &text)
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// A CSV cell.
#[derive(Clone, Debug)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

/// CSV table with `#` provenance lines, a header row, LF line endings and
/// reals written with 17 significant digits.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(command: &str, cfg: &JobConfig, header: &[&str]) -> Self {
        let mut text = String::new();
        let prov = provenance(command, cfg);
        writeln!(text, "# ssmkit {VERSION} {command}").unwrap();
        writeln!(text, "# {}", serde_json::to_string(&prov).unwrap()).unwrap();
        writeln!(text, "{}", header.join(",")).unwrap();
        Csv {
            text,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len(), self.columns);
        let parts: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Cell::Int(v) => v.to_string(),
                Cell::Real(v) => format!("{v:.16e}"),
                Cell::Text(s) => s.clone(),
            })
            .collect();
        self.text.push_str(&parts.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        write_file(path, &self.text)
    }
}
