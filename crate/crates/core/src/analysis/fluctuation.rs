//! Size of the martingale part of the random characteristic.

use rayon::prelude::*;
use serde::Serialize;

use super::kolmogorov::admissible_dt;
use super::stats::variance_with_stderr;
use super::{growth_factor, Assertion, StudyReport, Table};
use crate::chain::{decompose, mean_stderr, sample_path, trace_points, LebesgueSampler};
use crate::config::StudyConfig;
use crate::error::Result;
use crate::field::{FieldMoments, VelocityField};
use crate::geometry::Point;
use crate::kernel::{build_forward, EnteringBarycenters, TransitionKernel};
use crate::mesh::{validate, Mesh};
use crate::rng::derive_seed;

/// Sample variance of the first coordinate of `X_1 - X_0` over `m` chains
/// started from `start(seed)`, with its standard error.
pub fn one_step_variance(
    p: &TransitionKernel,
    mesh: &Mesh,
    eb: &EnteringBarycenters,
    m: usize,
    master: u64,
    start: impl Fn(u64) -> usize + Sync,
) -> (f64, f64) {
    let d: Vec<f64> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master, i);
            let tr = trace_points(&sample_path(p, start(seed), 1, seed), mesh, eb);
            tr.points[1].x - tr.points[0].x
        })
        .collect();
    variance_with_stderr(&d)
}

/// `a dt (h - a dt)`, the one-step variance in the constant uniform case.
pub fn constant_step_variance(a: f64, h: f64, dt: f64) -> f64 {
    a.abs() * dt * (h - a.abs() * dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctuationRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub alpha: f64,
    /// `E|M_N|^2 / (N h dt)` and its standard error.
    pub ratio: f64,
    pub ratio_stderr: f64,
    /// `E|X_N - X_0 + dt sum a(X_i)|^2 / h`.
    pub q2_over_h: f64,
    pub q2_stderr: f64,
    /// Trace of `Var(M_N)` against the sum of per-step traces.
    pub var_total: f64,
    pub var_sum: f64,
    /// `max_k E|dM_k|^2 / (h dt)`.
    pub max_step_ratio: f64,
}

struct ChainStats {
    m_final: Point,
    q: f64,
    dm: Vec<Point>,
}

fn sweep_point(cfg: &StudyConfig, n: usize, index: u64) -> Result<(FluctuationRow, Mesh, TransitionKernel, EnteringBarycenters)> {
    let mesh = cfg.family.build(n)?;
    let report = validate(&mesh)?;
    let moments = FieldMoments::compute(&mesh, &cfg.field);
    let (dt, steps) = cfg.time_grid(admissible_dt(&mesh, &moments));
    let p = build_forward(&mesh, &moments, dt)?;
    let eb = EnteringBarycenters::compute(&mesh, &cfg.field, &moments);
    let sampler = LebesgueSampler::new(&mesh)?;
    let master = derive_seed(cfg.seed, index);
    let field: &VelocityField = &cfg.field;
    let stats: Vec<ChainStats> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master, i);
            let tr = trace_points(&sample_path(&p, sampler.sample(seed), steps, seed), &mesh, &eb);
            let d = decompose(&tr, &mesh, field, &p);
            let sr = d.s[steps] + d.r[steps];
            ChainStats { m_final: d.m[steps], q: sr.norm_squared(), dm: d.dm }
        })
        .collect();
    let h = mesh.h_max;
    let scale = steps as f64 * h * dt;
    let m2: Vec<f64> = stats.iter().map(|s| s.m_final.norm_squared()).collect();
    let (mean_m2, se_m2) = mean_stderr(&m2);
    let qs: Vec<f64> = stats.iter().map(|s| s.q).collect();
    let (mean_q, se_q) = mean_stderr(&qs);
    let trace_var = |pts: &mut dyn Iterator<Item = Point>| {
        let v: Vec<Point> = pts.collect();
        let mut t = 0.0;
        for d in 0..mesh.dimension {
            let (var, _) = variance_with_stderr(&v.iter().map(|p| p[d]).collect::<Vec<_>>());
            t += var;
        }
        t
    };
    let var_total = trace_var(&mut stats.iter().map(|s| s.m_final));
    let mut var_sum = 0.0;
    let mut max_step: f64 = 0.0;
    for k in 0..steps {
        var_sum += trace_var(&mut stats.iter().map(|s| s.dm[k]));
        let e2 = stats.iter().map(|s| s.dm[k].norm_squared()).sum::<f64>() / stats.len() as f64;
        max_step = max_step.max(e2);
    }
    let row = FluctuationRow {
        n,
        h,
        dt,
        steps,
        alpha: report.alpha,
        ratio: if scale > 0.0 { mean_m2 / scale } else { 0.0 },
        ratio_stderr: if scale > 0.0 { se_m2 / scale } else { 0.0 },
        q2_over_h: mean_q / h,
        q2_stderr: se_q / h,
        var_total,
        var_sum,
        max_step_ratio: max_step / (h * dt),
    };
    Ok((row, mesh, p, eb))
}

pub fn fluctuation_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.check()?;
    let tol = &cfg.tolerances;
    let bound_speed = cfg.field.sup_norm();
    let mut report = StudyReport::new("fluctuation", cfg);
    let mut t = Table::new(
        "sweep",
        &[
            "n", "h", "dt", "steps", "alpha", "ratio", "ratio_stderr", "q2_over_h", "q2_stderr", "var_total",
            "var_sum", "max_step_ratio",
        ],
    );
    let mut rows = Vec::new();
    for (i, &n) in cfg.sweep.iter().enumerate() {
        let (r, mesh, p, eb) = sweep_point(cfg, n, i as u64)?;
        let bound = r.alpha * bound_speed;
        report.assertions.push(Assertion::at_most(
            format!("E|M_N|^2/(N h dt) n={n}"),
            r.ratio,
            bound + tol.binomial_sigma * r.ratio_stderr,
            format!("alpha ||a|| = {bound:.4} plus {} standard errors", tol.binomial_sigma),
        ));
        report.assertions.push(Assertion::at_most(
            format!("per-step variance bound n={n}"),
            r.max_step_ratio,
            bound,
            "max_k E|dM_k|^2 <= alpha ||a|| h dt",
        ));
        if r.var_sum > 0.0 {
            report.assertions.push(Assertion::at_most(
                format!("variance additivity n={n}"),
                (r.var_total - r.var_sum).abs() / r.var_sum,
                0.1,
                "relative gap between Var(M_N) and the sum of step variances",
            ));
        }
        if let (VelocityField::Constant { v }, 1) = (&cfg.field, mesh.dimension) {
            let exact = constant_step_variance(v[0], r.h, r.dt);
            let sampler = LebesgueSampler::new(&mesh)?;
            let (var, se) =
                one_step_variance(&p, &mesh, &eb, cfg.samples, derive_seed(cfg.seed, 1000 + i as u64), |s| sampler.sample(s));
            let detail = format!("sample {var:.6e} vs a dt (h - a dt) = {exact:.6e}");
            report.assertions.push(if se > 0.0 {
                Assertion::at_most(format!("one-step variance n={n}"), (var - exact).abs(), tol.binomial_sigma * se, detail)
            } else {
                Assertion::at_most(format!("one-step variance n={n}"), (var - exact).abs(), tol.exact, detail)
            });
        }
        t.push(vec![
            r.n as f64,
            r.h,
            r.dt,
            r.steps as f64,
            r.alpha,
            r.ratio,
            r.ratio_stderr,
            r.q2_over_h,
            r.q2_stderr,
            r.var_total,
            r.var_sum,
            r.max_step_ratio,
        ]);
        rows.push(r);
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let q2: Vec<f64> = rows.iter().map(|r| r.q2_over_h).collect();
    report.assertions.push(Assertion::at_most(
        "E|M_N|^2/(N h dt) bounded across the sweep",
        growth_factor(&ratios),
        tol.growth,
        "max / coarsest",
    ));
    report.assertions.push(Assertion::at_most(
        "Q_2/h bounded across the sweep",
        growth_factor(&q2),
        tol.growth,
        "max / coarsest",
    ));
    report.metric("rows", &rows);
    report.tables.push(t);
    Ok(report)
}
