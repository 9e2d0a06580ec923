//! Time reversal: the backward reading of a stationary chain, and the
//! path-probability comparison in the compressible case.

use serde::Serialize;

use super::kolmogorov::{admissible_dt, within_stderr};
use super::stats::binomial_stderr;
use super::{Assertion, StudyReport, Table};
use crate::chain::{empirical_transition, enumerate_paths, gap_row_mean, mean_stderr, path_probability, sample_batch, ChainPath, LebesgueSampler};
use crate::config::StudyConfig;
use crate::error::{Error, Result};
use crate::field::{FieldMoments, VelocityField};
use crate::geometry::Point;
use crate::kernel::{build_co, build_forward, build_reversed, invariance_residual, EnteringBarycenters, KernelKind};
use crate::mesh::{validate, Mesh};

/// Largest invariance residual for which a field counts as divergence-free here.
pub const INVARIANCE_LIMIT: f64 = 1e-10;

/// `Xi_N` of the backward reading of `path`: over each reversed jump out of
/// `K`, `e_K` minus the barycenter of the face it leaves through.
pub fn reversed_gap(path: &ChainPath, mesh: &Mesh, eb: &EnteringBarycenters) -> Point {
    let rev = path.reversed(mesh, KernelKind::Reversed);
    rev.faces.iter().enumerate().fold(Point::zeros(), |acc, (i, f)| match f {
        Some(f) => acc + (eb.get(rev.cells[i]) - mesh.faces[*f].barycenter),
        None => acc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionRow {
    pub from: usize,
    pub to: usize,
    pub visits: u64,
    pub empirical: f64,
    pub expected: f64,
    pub stderr: f64,
}

pub fn reversal_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.check()?;
    let tol = &cfg.tolerances;
    let mesh = cfg.mesh.build()?;
    let moments = FieldMoments::compute(&mesh, &cfg.field);
    let (dt, n) = cfg.time_grid(admissible_dt(&mesh, &moments));
    let p = build_forward(&mesh, &moments, dt)?;
    let inv = invariance_residual(&p, &mesh).iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if inv > INVARIANCE_LIMIT {
        return Err(Error::invalid(format!(
            "reversal study needs a divergence-free field: invariance residual {inv:.3e} exceeds {INVARIANCE_LIMIT:e}"
        )));
    }
    let q = build_co(&mesh, &moments, dt)?;
    let gamma = build_reversed(&mesh, &moments, dt, cfg.eta)?;
    let eb = EnteringBarycenters::compute(&mesh, &cfg.field, &moments);
    let sampler = LebesgueSampler::new(&mesh)?;
    let paths = sample_batch(&p, n, cfg.samples, cfg.seed, |s| sampler.sample(s));

    let mut report = StudyReport::new("reversal", cfg);
    report.metric("dt", dt);
    report.metric("steps", n);
    report.metric("invariance_residual", inv);

    let counts = empirical_transition(&paths, true);
    let mut rows = Vec::new();
    for k in 0..mesh.len() {
        let visits = counts.total(k);
        let mut targets: Vec<usize> = std::iter::once(k).chain(q.row(k).iter().map(|e| e.target)).collect();
        targets.extend(counts.counts.range((k, 0)..=(k, usize::MAX)).map(|(&(_, l), _)| l));
        targets.sort_unstable();
        targets.dedup();
        for l in targets {
            let expected = q.weight(k, l);
            let empirical = counts.frequency(k, l);
            let stderr = if visits > 0 { binomial_stderr(expected, visits) } else { 0.0 };
            rows.push(TransitionRow { from: k, to: l, visits, empirical, expected, stderr });
        }
    }
    let mut t = Table::new("transitions", &["from", "to", "visits", "empirical", "expected", "stderr"]);
    for r in &rows {
        if r.visits == 0 {
            continue;
        }
        report.assertions.push(within_stderr(
            format!("reversed transition {} -> {}", r.from, r.to),
            (r.empirical - r.expected).abs(),
            r.stderr,
            tol.binomial_sigma,
            tol.exact,
        ));
        t.push(vec![r.from as f64, r.to as f64, r.visits as f64, r.empirical, r.expected, r.stderr]);
    }
    report.tables.push(t);
    report.metric("unvisited_cells", rows.iter().filter(|r| r.visits == 0 && r.from == r.to).count());

    // the one-step mean of the gap vanishes row by row under gamma
    let gap_rows = (0..mesh.len()).map(|k| gap_row_mean(&gamma, &mesh, &eb, k).norm()).fold(0.0, f64::max);
    report.assertions.push(Assertion::at_most(
        "reversed gap row means",
        gap_rows,
        tol.exact,
        "max_K |sum_f gamma_f (e_K - x_f)|",
    ));

    let gaps: Vec<Point> = paths.iter().map(|pa| reversed_gap(pa, &mesh, &eb)).collect();
    let mut gt = Table::new("gap", &["coordinate", "mean", "stderr"]);
    for d in 0..mesh.dimension {
        let (mean, se) = mean_stderr(&gaps.iter().map(|g| g[d]).collect::<Vec<_>>());
        report.assertions.push(within_stderr(format!("backward gap mean coordinate {d}"), mean.abs(), se, tol.mean_sigma, tol.exact));
        gt.push(vec![d as f64, mean, se]);
    }
    report.tables.push(gt);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRatioReport {
    pub steps: usize,
    pub dt: f64,
    pub paths: usize,
    pub delta_norm: f64,
    /// Largest relative gap between `P/Q` and `prod (1 + delta dt) |K_N|/|K_0|`.
    pub identity_residual: f64,
    /// Smallest `C` for which the two-sided bound holds on every path.
    pub empirical_c: f64,
    /// `beta^2`, the constant tested.
    pub c_bound: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl PathRatioReport {
    pub fn holds(&self, exact: f64) -> bool {
        self.identity_residual <= exact && self.empirical_c <= self.c_bound
    }
}

/// Compares `P_K[path]` with `Q_L[reversed path]` on every path of length
/// `steps` from every cell, where `Q` is the chain with kernel `gamma`.
pub fn path_ratio_check(mesh: &Mesh, field: &VelocityField, dt: f64, eta: f64, steps: usize) -> Result<PathRatioReport> {
    let geom = validate(mesh)?;
    let moments = FieldMoments::compute(mesh, field);
    let p = build_forward(mesh, &moments, dt)?;
    let gamma = build_reversed(mesh, &moments, dt, eta)?;
    let delta_norm = moments.max_abs_divergence();
    let up = (1.0 + delta_norm * dt).powi(steps as i32);
    let down = (1.0 - delta_norm * dt).powi(steps as i32);
    let mut out = PathRatioReport {
        steps,
        dt,
        paths: 0,
        delta_norm,
        identity_residual: 0.0,
        empirical_c: 1.0,
        c_bound: geom.beta * geom.beta,
        min_ratio: f64::INFINITY,
        max_ratio: 0.0,
    };
    for k0 in 0..mesh.len() {
        for wp in enumerate_paths(&p, k0, steps)? {
            let rev = ChainPath { cells: wp.cells.clone(), faces: wp.faces.clone(), seed: 0, kind: KernelKind::Forward }
                .reversed(mesh, KernelKind::Reversed);
            let qp = path_probability(&gamma, &rev.cells, &rev.faces);
            if qp <= 0.0 {
                return Err(Error::invalid(format!("path from cell {k0} has no reversed counterpart")));
            }
            let ratio = wp.probability / qp;
            let closed = wp.cells[1..].iter().map(|&k| 1.0 + moments.divergence[k] * dt).product::<f64>()
                * mesh.cells[*wp.cells.last().expect("nonempty")].volume
                / mesh.cells[k0].volume;
            out.identity_residual = out.identity_residual.max((ratio - closed).abs() / closed);
            out.empirical_c = out.empirical_c.max(ratio / up).max(down / ratio);
            out.min_ratio = out.min_ratio.min(ratio);
            out.max_ratio = out.max_ratio.max(ratio);
            out.paths += 1;
        }
    }
    Ok(out)
}
