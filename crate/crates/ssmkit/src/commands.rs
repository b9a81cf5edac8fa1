//! Pipeline commands behind the CLI.

use std::path::{Path, PathBuf};

use anyhow::Context;
use ssmkit_core::model::FirstOrderSystem;
use ssmkit_core::reduced::max_displacement;
use ssmkit_core::ssm::memory_estimate;
use ssmkit_core::{
    backbone, build_first_order, compute_ssm, decompose, spectral_quotients, to_polar, InvarianceResult, ModalSystem,
    SsmExpansion,
};

use crate::config::JobConfig;
use crate::output::{write_json, Cell, Csv};
use crate::parallel;

/// A resolved job: config, output directory and worker count.
pub struct Job {
    pub cfg: JobConfig,
    pub threads: usize,
}

/// The linearized, diagonalized model.
pub struct Prepared {
    pub fos: FirstOrderSystem,
    pub modal: ModalSystem,
}

impl Job {
    pub fn out_dir(&self) -> &Path {
        &self.cfg.outputs
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir().join(name)
    }

    pub fn prepare(&self) -> anyhow::Result<Prepared> {
        let sys = self.cfg.model.build()?;
        let fos = build_first_order(&sys)?;
        let modal = decompose(&fos, self.cfg.master_mode.selector())?;
        Ok(Prepared { fos, modal })
    }

    fn expansion(&self, p: &Prepared, order: usize) -> anyhow::Result<SsmExpansion> {
        Ok(compute_ssm(&p.modal, order, self.cfg.delta)?)
    }

    /// Writes `ssm.json`.
    pub fn compute(&self) -> anyhow::Result<PathBuf> {
        let p = self.prepare()?;
        let ssm = self.expansion(&p, self.cfg.order)?;
        let polar = to_polar(&ssm).ok();
        let doc = crate::output::ssm_document(&self.cfg, &ssm, spectral_quotients(&p.modal), polar.as_ref());
        let path = self.out("ssm.json");
        write_json(&path, &doc)?;
        Ok(path)
    }

    /// Writes `backbone.csv` with columns `rho, omega, amplitude`. Radii are
    /// in config units, i.e. before `rho_scale`.
    pub fn backbone(&self) -> anyhow::Result<PathBuf> {
        let p = self.prepare()?;
        let ssm = self.expansion(&p, self.cfg.order)?;
        let csv = self.backbone_csv("backbone", &[(self.cfg.order, &ssm)], false)?;
        let path = self.out("backbone.csv");
        csv.write(&path)?;
        Ok(path)
    }

    fn backbone_csv(&self, command: &str, ssms: &[(usize, &SsmExpansion)], with_order: bool) -> anyhow::Result<Csv> {
        let header: &[&str] = if with_order {
            &["order", "rho", "omega", "amplitude"]
        } else {
            &["rho", "omega", "amplitude"]
        };
        let mut csv = Csv::new(command, &self.cfg, header);
        let grid = self.cfg.backbone_grid();
        let scaled: Vec<f64> = grid.iter().map(|r| r * self.cfg.rho_scale).collect();
        for (order, ssm) in ssms {
            let curve = backbone(ssm, &scaled, self.cfg.n_theta)?;
            for (rho, s) in grid.iter().zip(&curve.samples) {
                let mut cells: Vec<Cell> = Vec::with_capacity(4);
                if with_order {
                    cells.push((*order).into());
                }
                cells.extend([(*rho).into(), s.omega.into(), s.amplitude.into()]);
                csv.row(&cells);
            }
        }
        Ok(csv)
    }

    fn sweep(&self, p: &Prepared) -> anyhow::Result<Vec<(SsmExpansion, InvarianceResult)>> {
        let orders = self.cfg.order_list();
        let top = self.expansion(p, *orders.iter().max().expect("non-empty order list"))?;
        let opts = self.cfg.invariance_options();
        let mut out = Vec::with_capacity(orders.len());
        for &order in &orders {
            let ssm = top.truncated(order);
            let res = parallel::invariance_error(&p.fos, &ssm, &opts, self.threads)
                .with_context(|| format!("invariance error at order {order}"))?;
            out.push((ssm, res));
        }
        Ok(out)
    }

    fn invariance_csvs(&self, command: &str, results: &[&InvarianceResult]) -> (Csv, Csv) {
        let mut summary = Csv::new(
            command,
            &self.cfg,
            &["order", "delta_inv", "mean_dist", "normalization"],
        );
        let mut dists = Csv::new(command, &self.cfg, &["order", "trajectory", "theta0", "dist"]);
        for r in results {
            let mean = r.per_trajectory.iter().sum::<f64>() / r.per_trajectory.len() as f64;
            summary.row(&[r.order.into(), r.delta_inv.into(), mean.into(), r.normalization.into()]);
            for (k, (th, d)) in r.angles.iter().zip(&r.per_trajectory).enumerate() {
                dists.row(&[r.order.into(), k.into(), (*th).into(), (*d).into()]);
            }
        }
        (summary, dists)
    }

    /// Writes `invariance.csv` (`order, delta_inv, mean_dist, normalization`)
    /// and the per-trajectory sidecar `invariance_dist.csv`.
    pub fn invariance(&self) -> anyhow::Result<Vec<InvarianceResult>> {
        let p = self.prepare()?;
        let sweep = self.sweep(&p)?;
        let results: Vec<&InvarianceResult> = sweep.iter().map(|(_, r)| r).collect();
        let (summary, dists) = self.invariance_csvs("invariance", &results);
        summary.write(&self.out("invariance.csv"))?;
        dists.write(&self.out("invariance_dist.csv"))?;
        Ok(sweep.into_iter().map(|(_, r)| r).collect())
    }

    /// Writes `resonances.csv` and returns a printable summary.
    pub fn resonances(&self) -> anyhow::Result<String> {
        let p = self.prepare()?;
        let report = ssmkit_core::resonance_scan(&p.modal, self.cfg.delta, self.cfg.order);
        let q = spectral_quotients(&p.modal);
        let mut csv = Csv::new(
            "resonances",
            &self.cfg,
            &[
                "order",
                "a",
                "b",
                "row",
                "mode",
                "lambda_re",
                "lambda_im",
                "kind",
                "measure",
            ],
        );
        let mut text = format!(
            "sigma_out = {}, sigma_in = {}, delta = {}, orders 2..={}\n",
            q.sigma_out, q.sigma_in, self.cfg.delta, self.cfg.order
        );
        for w in &report.warnings {
            text.push_str(&format!("warning: {w}\n"));
        }
        for e in &report.entries {
            let kind = match e.kind {
                ssmkit_core::spectral::ResonanceKind::Inner => "inner",
                ssmkit_core::spectral::ResonanceKind::Outer => "outer",
            };
            let mode = p.modal.mode_number(e.row);
            csv.row(&[
                e.order.into(),
                e.a.into(),
                e.b.into(),
                e.row.into(),
                mode.into(),
                e.lambda.re.into(),
                e.lambda.im.into(),
                kind.into(),
                e.measure.into(),
            ]);
            text.push_str(&format!(
                "{kind} ({},{}) -> {} (mode {mode}): I = {:.6}\n",
                e.a, e.b, e.lambda, e.measure
            ));
        }
        csv.write(&self.out("resonances.csv"))?;
        Ok(text)
    }

    /// Writes the figure data files: invariance error against order,
    /// per-trajectory distances, backbone curves per order, polar
    /// coefficients per order and the largest displacement per DOF.
    pub fn plot_data(&self) -> anyhow::Result<Vec<PathBuf>> {
        let p = self.prepare()?;
        let sweep = self.sweep(&p)?;
        let mut written = Vec::new();
        let results: Vec<&InvarianceResult> = sweep.iter().map(|(_, r)| r).collect();
        let (summary, dists) = self.invariance_csvs("plot-data", &results);
        for (name, csv) in [("plot_invariance.csv", summary), ("plot_invariance_dist.csv", dists)] {
            csv.write(&self.out(name))?;
            written.push(self.out(name));
        }
        let ssms: Vec<(usize, &SsmExpansion)> = sweep.iter().map(|(s, _)| (s.order, s)).collect();
        let bb = self.backbone_csv("plot-data", &ssms, true)?;
        bb.write(&self.out("plot_backbone.csv"))?;
        written.push(self.out("plot_backbone.csv"));

        let mut polar = Csv::new("plot-data", &self.cfg, &["order", "quantity", "power", "coefficient"]);
        let mut disp = Csv::new("plot-data", &self.cfg, &["order", "dof", "max_displacement"]);
        let rho0 = self.cfg.rho0 * self.cfg.rho_scale;
        for (order, ssm) in &ssms {
            let pd = to_polar(ssm)?;
            for (name, coeffs) in [("rho_dot", &pd.rho_dot_coeffs), ("omega", &pd.omega_coeffs)] {
                for (power, c) in coeffs {
                    polar.row(&[(*order).into(), name.into(), (*power).into(), (*c).into()]);
                }
            }
            for (dof, d) in max_displacement(ssm, rho0, self.cfg.n_theta)?.into_iter().enumerate() {
                disp.row(&[(*order).into(), dof.into(), d.into()]);
            }
        }
        for (name, csv) in [("plot_polar.csv", polar), ("plot_max_displacement.csv", disp)] {
            csv.write(&self.out(name))?;
            written.push(self.out(name));
        }
        Ok(written)
    }
}

/// Memory table for dense Kronecker storage: one line per order with bytes
/// and terabytes (10¹² bytes). `present` lists the orders at which the
/// nonlinearity has terms.
pub fn memory_table(n: usize, order: usize, present: &[usize]) -> anyhow::Result<String> {
    let est = memory_estimate(n, order, present)?;
    let mut text = format!("# n = {n}, nonlinear orders {present:?}\norder,bytes,terabytes\n");
    for (i, bytes) in est.bytes_per_order {
        text.push_str(&format!("{i},{bytes:.16e},{:.16e}\n", bytes / 1e12));
    }
    Ok(text)
}
