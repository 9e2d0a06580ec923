//! Error norms across a mesh sweep at fixed Courant ratio, with fitted
//! log-log slopes.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::kolmogorov::admissible_dt;
use super::stats::{fit_loglog, LineFit};
use super::{Assertion, StudyReport, Table};
use crate::config::{fixed_time_grid, StudyConfig};
use crate::error::{Error, Result};
use crate::field::FieldMoments;
use crate::kernel::build_forward;
use crate::solver::{cell_errors, project_initial, run, ErrorOptions, InitialDatum};

pub const NORMS: [&str; 4] = ["l1", "l2", "l4", "linf"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub l1: f64,
    pub l2: f64,
    pub l4: f64,
    pub linf: f64,
}

impl ConvergenceRow {
    pub fn norm(&self, name: &str) -> f64 {
        match name {
            "l1" => self.l1,
            "l2" => self.l2,
            "l4" => self.l4,
            "linf" => self.linf,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub fits: BTreeMap<String, LineFit>,
    pub final_time: f64,
}

/// Runs the sweep and fits `log error` against `log h` for each norm.
pub fn convergence_table(cfg: &StudyConfig) -> Result<ConvergenceTable> {
    cfg.check()?;
    if cfg.sweep.len() < 4 {
        return Err(Error::invalid("a convergence sweep needs at least 4 points"));
    }
    let t = cfg.final_time;
    let rows: Vec<Result<ConvergenceRow>> = cfg
        .sweep
        .par_iter()
        .map(|&n| {
            let mesh = cfg.family.build(n)?;
            let moments = FieldMoments::compute(&mesh, &cfg.field);
            let (dt, steps) = fixed_time_grid(t, cfg.lambda, admissible_dt(&mesh, &moments));
            let p = build_forward(&mesh, &moments, dt)?;
            let datum = InitialDatum::for_mesh(cfg.datum.clone(), &mesh);
            let u = run(&p, &project_initial(&datum, &mesh), steps);
            let opts2 = ErrorOptions { p: 2.0, ..cfg.error.clone() };
            let opts4 = ErrorOptions { p: 4.0, ..cfg.error.clone() };
            let e2 = cell_errors(&u, &datum, &cfg.field, &mesh, t, &opts2);
            let e4 = cell_errors(&u, &datum, &cfg.field, &mesh, t, &opts4);
            Ok(ConvergenceRow {
                n,
                h: mesh.h_max,
                dt,
                steps,
                l1: e2.l1_total(),
                l2: e2.lp.iter().sum::<f64>().sqrt(),
                l4: e4.lp.iter().sum::<f64>().powf(0.25),
                linf: e2.linf(),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let fits = NORMS
        .iter()
        .map(|name| {
            let ys: Vec<f64> = rows.iter().map(|r| r.norm(name)).collect();
            (name.to_string(), fit_loglog(&hs, &ys))
        })
        .collect();
    Ok(ConvergenceTable { rows, fits, final_time: t })
}

pub fn convergence_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let table = convergence_table(cfg)?;
    let mut report = StudyReport::new("convergence", cfg);
    let mut t = Table::new("errors", &["n", "h", "dt", "steps", "l1", "l2", "l4", "linf"]);
    for r in &table.rows {
        t.push(vec![r.n as f64, r.h, r.dt, r.steps as f64, r.l1, r.l2, r.l4, r.linf]);
        report.assertions.push(Assertion::at_most(
            format!("time grid n={}", r.n),
            (r.steps as f64 * r.dt - table.final_time).abs(),
            r.dt,
            "N dt = T within one step",
        ));
    }
    report.tables.push(t);
    let mut f = Table::new("fits", &["norm_index", "slope", "ci_low", "ci_high", "residual"]);
    for (i, name) in NORMS.iter().enumerate() {
        let fit = table.fits[*name];
        f.push(vec![i as f64, fit.slope, fit.ci_low, fit.ci_high, fit.residual]);
        if let Some([lo, hi]) = cfg.windows.get(*name) {
            report.assertions.push(Assertion::flag(
                format!("{name} slope interval meets [{lo}, {hi}]"),
                fit.interval_intersects(*lo, *hi),
                format!("slope {:.4}, 95% interval [{:.4}, {:.4}]", fit.slope, fit.ci_low, fit.ci_high),
            ));
        }
    }
    report.tables.push(f);
    report.metric("fits", &table.fits);
    report.metric("norm_order", NORMS);
    Ok(report)
}
