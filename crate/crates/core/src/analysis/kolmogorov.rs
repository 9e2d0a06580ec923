//! `u_K^N = E_K[u^0_{K_N}]`, exactly by enumeration and statistically by Monte Carlo.

use serde::Serialize;

use super::{Assertion, StudyReport, Table};
use crate::chain::{enumerate_expectation, mc_expectation};
use crate::config::StudyConfig;
use crate::error::Result;
use crate::field::FieldMoments;
use crate::kernel::{build_forward, cfl_dt_max, TransitionKernel};
use crate::mesh::Mesh;
use crate::rng::{derive_seed, uniform};
use crate::solver::{project_initial, run, InitialDatum};

/// Meshes up to this size are also checked by exhaustive enumeration.
pub const EXACT_MAX_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactRow {
    pub cell: usize,
    pub scheme: f64,
    pub enumeration: f64,
    pub paths: u64,
}

impl ExactRow {
    pub fn diff(&self) -> f64 {
        (self.scheme - self.enumeration).abs()
    }
}

/// Scheme against enumeration on every cell.
pub fn exact_comparison(p: &TransitionKernel, u0: &[f64], n: usize) -> Result<Vec<ExactRow>> {
    let u = run(p, &crate::solver::CellField::new(u0.to_vec()), n);
    (0..p.len())
        .map(|k| {
            let (e, paths) = enumerate_expectation(p, u0, k, n)?;
            Ok(ExactRow { cell: k, scheme: u.values[k], enumeration: e, paths })
        })
        .collect()
}

/// Step for a study on `mesh`; meshes where nothing moves get `lambda h`.
pub(crate) fn admissible_dt(mesh: &Mesh, moments: &FieldMoments) -> f64 {
    let dt = cfl_dt_max(mesh, moments);
    if dt.is_finite() {
        dt
    } else {
        mesh.h_max
    }
}

/// `count` distinct cells out of `n`, drawn deterministically from `seed`.
pub(crate) fn pick_cells(n: usize, count: usize, seed: u64) -> Vec<usize> {
    if count >= n {
        return (0..n).collect();
    }
    let mut out = Vec::with_capacity(count);
    let mut counter = 0u64;
    while out.len() < count {
        let k = ((uniform(seed, counter) * n as f64) as usize).min(n - 1);
        counter += 1;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

/// `|mc - scheme| <= max(sigma stderr, exact)`: the statistical tolerance
/// never drops below round-off, which matters when the sampled values
/// coincide up to a few ulps and the standard error collapses.
pub(crate) fn within_stderr(name: String, diff: f64, stderr: f64, sigma: f64, exact: f64) -> Assertion {
    if sigma * stderr > exact {
        Assertion::at_most(name, diff, sigma * stderr, format!("{sigma} standard errors"))
    } else {
        Assertion::at_most(name, diff, exact, "standard error below round-off: exact match required")
    }
}

pub fn verify_kolmogorov(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.check()?;
    let mesh = cfg.mesh.build()?;
    let moments = FieldMoments::compute(&mesh, &cfg.field);
    let (dt, n) = cfg.time_grid(admissible_dt(&mesh, &moments));
    let p = build_forward(&mesh, &moments, dt)?;
    let u0 = project_initial(&InitialDatum::for_mesh(cfg.datum.clone(), &mesh), &mesh);
    let u = run(&p, &u0, n);
    let tol = &cfg.tolerances;
    let mut report = StudyReport::new("kolmogorov", cfg);
    report.metric("dt", dt);
    report.metric("steps", n);
    report.metric("cells", mesh.len());

    if mesh.len() <= EXACT_MAX_CELLS {
        match exact_comparison(&p, &u0.values, n) {
            Ok(rows) => {
                let mut t = Table::new("exact", &["cell", "scheme", "enumeration", "abs_diff", "paths"]);
                for r in &rows {
                    report.assertions.push(Assertion::at_most(
                        format!("exact cell {}", r.cell),
                        r.diff(),
                        tol.exact,
                        "scheme equals path enumeration",
                    ));
                    t.push(vec![r.cell as f64, r.scheme, r.enumeration, r.diff(), r.paths as f64]);
                }
                report.metric("max_exact_diff", rows.iter().map(ExactRow::diff).fold(0.0, f64::max));
                report.tables.push(t);
            }
            Err(e) => report.metric("exact_skipped", e.to_string()),
        }
    }

    let cells = pick_cells(mesh.len(), cfg.cell_count, derive_seed(cfg.seed, u64::MAX));
    let mut t = Table::new("monte_carlo", &["cell", "scheme", "mc_mean", "stderr", "abs_diff"]);
    for &k in &cells {
        let est = mc_expectation(&p, &u0.values, k, n, cfg.samples, derive_seed(cfg.seed, k as u64));
        let diff = (est.mean - u.values[k]).abs();
        report
            .assertions
            .push(within_stderr(format!("monte carlo cell {k}"), diff, est.stderr, tol.mean_sigma, tol.exact));
        t.push(vec![k as f64, u.values[k], est.mean, est.stderr, diff]);
    }
    report.metric("sampled_cells", &cells);
    report.metric("samples", cfg.samples);
    report.tables.push(t);
    Ok(report)
}
