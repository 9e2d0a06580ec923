//! Tail bounds for the martingale part, scaled by `h^-1` so that jumps are at most one.

use rayon::prelude::*;
use serde::Serialize;

use super::kolmogorov::admissible_dt;
use super::stats::binomial_stderr;
use super::{Assertion, StudyReport, Table};
use crate::chain::{decompose, sample_path, trace_points, Decomposition, LebesgueSampler};
use crate::config::StudyConfig;
use crate::error::Result;
use crate::field::FieldMoments;
use crate::kernel::{build_forward, EnteringBarycenters, TransitionKernel};
use crate::mesh::Mesh;
use crate::rng::derive_seed;

/// `2d [exp(-u^2 / (4 n v)) + exp(-u / 4)]`.
pub fn freedman_bound(u: f64, n: usize, v: f64, d: usize) -> f64 {
    let nv = n as f64 * v;
    2.0 * d as f64 * ((-u * u / (4.0 * nv)).exp() + (-u / 4.0).exp())
}

/// `exp(-u^2 / (2 (u + n v)))`, for `P(sup_k Y_k >= u)` with unit jumps.
pub fn freedman_one_sided(u: f64, nv: f64) -> f64 {
    (-u * u / (2.0 * (u + nv))).exp()
}

/// Per-coordinate extremes of `h^-1 M_k` over one path.
#[derive(Debug, Clone, PartialEq)]
pub struct Extremes {
    pub sup_abs: Vec<f64>,
    pub sup: Vec<f64>,
}

pub fn extremes(dec: &Decomposition, h: f64, dimension: usize) -> Extremes {
    let mut sup_abs = vec![0.0f64; dimension];
    let mut sup = vec![0.0f64; dimension];
    for m in &dec.m {
        for d in 0..dimension {
            let y = m[d] / h;
            sup_abs[d] = sup_abs[d].max(y.abs());
            sup[d] = sup[d].max(y);
        }
    }
    Extremes { sup_abs, sup }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub coordinate: usize,
    pub u: f64,
    /// `P(sup |Y_k| >= u)` against the two-sided bound.
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `P(sup Y_k >= u)` against the one-sided bound.
    pub empirical_upper: f64,
    pub stderr_upper: f64,
    pub bound_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub steps: usize,
    pub v: f64,
    pub samples: usize,
    pub rows: Vec<TailRow>,
}

impl TailReport {
    pub fn passed(&self, sigma: f64) -> bool {
        self.rows.iter().all(|r| {
            r.empirical <= r.bound + sigma * r.stderr && r.empirical_upper <= r.bound_upper + sigma * r.stderr_upper
        })
    }
}

pub fn tail_report(ext: &[Extremes], steps: usize, v: f64, thresholds: &[f64]) -> TailReport {
    let m = ext.len();
    let dim = ext.first().map_or(0, |e| e.sup.len());
    let mut rows = Vec::new();
    for d in 0..dim {
        for &u in thresholds {
            let hits = ext.iter().filter(|e| e.sup_abs[d] >= u).count() as f64 / m as f64;
            let up = ext.iter().filter(|e| e.sup[d] >= u).count() as f64 / m as f64;
            rows.push(TailRow {
                coordinate: d,
                u,
                empirical: hits,
                stderr: binomial_stderr(hits, m as u64),
                bound: freedman_bound(u, steps, v, dim),
                empirical_upper: up,
                stderr_upper: binomial_stderr(up, m as u64),
                bound_upper: freedman_one_sided(u, steps as f64 * v),
            });
        }
    }
    TailReport { steps, v, samples: m, rows }
}

/// Empirical tails of `sup_k |h^-1 M_k|` over a decomposed batch.
pub fn concentration_check(batch: &[Decomposition], h: f64, v: f64, dim: usize, thresholds: &[f64]) -> TailReport {
    let ext: Vec<Extremes> = batch.iter().map(|d| extremes(d, h, dim)).collect();
    let steps = batch.first().map_or(0, |d| d.dm.len());
    tail_report(&ext, steps, v, thresholds)
}

/// Largest one-step conditional variance of `h^-1 X` per coordinate, and the
/// largest possible jump of `h^-1 M`.
pub fn step_variance_bound(p: &TransitionKernel, mesh: &Mesh, eb: &EnteringBarycenters) -> (Vec<f64>, f64) {
    let h = mesh.h_max;
    let mut var = vec![0.0f64; mesh.dimension];
    let mut jump: f64 = 0.0;
    for k in 0..mesh.len() {
        let e = eb.get(k);
        let mut pts = vec![(e, p.self_weight(k))];
        pts.extend(p.row(k).iter().map(|en| (mesh.faces[en.face].barycenter, en.weight)));
        let mean = pts.iter().fold(crate::geometry::Point::zeros(), |a, (x, w)| a + x * *w);
        for d in 0..mesh.dimension {
            let v: f64 = pts.iter().map(|(x, w)| w * ((x[d] - mean[d]) / h).powi(2)).sum();
            var[d] = var[d].max(v);
        }
        for (x, w) in &pts {
            if *w > 0.0 {
                jump = jump.max((x - mean).amax() / h);
            }
        }
    }
    (var, jump)
}

pub fn concentration_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.check()?;
    let tol = &cfg.tolerances;
    let mesh = cfg.mesh.build()?;
    let moments = FieldMoments::compute(&mesh, &cfg.field);
    let (dt, n) = cfg.time_grid(admissible_dt(&mesh, &moments));
    let p = build_forward(&mesh, &moments, dt)?;
    let eb = EnteringBarycenters::compute(&mesh, &cfg.field, &moments);
    let (vars, jump) = step_variance_bound(&p, &mesh, &eb);
    let v = vars.iter().copied().fold(0.0, f64::max);
    let sampler = if mesh.is_periodic() { Some(LebesgueSampler::new(&mesh)?) } else { None };
    let h = mesh.h_max;
    let dim = mesh.dimension;
    let ext: Vec<Extremes> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(cfg.seed, i);
            let k0 = sampler.as_ref().map_or(0, |s| s.sample(seed));
            let tr = trace_points(&sample_path(&p, k0, n, seed), &mesh, &eb);
            extremes(&decompose(&tr, &mesh, &cfg.field, &p), h, dim)
        })
        .collect();
    let tails = tail_report(&ext, n, v, &cfg.thresholds);

    let mut report = StudyReport::new("concentration", cfg);
    report.metric("dt", dt);
    report.metric("steps", n);
    report.metric("v", v);
    report.metric("max_scaled_jump", jump);
    report.assertions.push(Assertion::at_most("scaled martingale jumps", jump, 1.0 + tol.exact, "max |h^-1 dM| <= 1"));
    let sigma = tol.binomial_sigma;
    let mut t = Table::new(
        "tails",
        &["coordinate", "u", "empirical", "stderr", "bound", "empirical_upper", "stderr_upper", "bound_upper"],
    );
    for r in &tails.rows {
        report.assertions.push(Assertion::at_most(
            format!("two-sided tail u={} coordinate {}", r.u, r.coordinate),
            r.empirical,
            r.bound + sigma * r.stderr,
            format!("2d[exp(-u^2/(4nv)) + exp(-u/4)] = {:.6} plus {sigma} stderr", r.bound),
        ));
        report.assertions.push(Assertion::at_most(
            format!("one-sided tail u={} coordinate {}", r.u, r.coordinate),
            r.empirical_upper,
            r.bound_upper + sigma * r.stderr_upper,
            format!("exp(-u^2/(2(u+nv))) = {:.6} plus {sigma} stderr", r.bound_upper),
        ));
        t.push(vec![
            r.coordinate as f64,
            r.u,
            r.empirical,
            r.stderr,
            r.bound,
            r.empirical_upper,
            r.stderr_upper,
            r.bound_upper,
        ]);
    }
    report.metric("tails", &tails);
    report.tables.push(t);
    Ok(report)
}
