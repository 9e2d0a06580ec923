//! Localized L^p error around a moving center, and the Monte Carlo size of
//! the characteristic defect it is controlled by.

use rayon::prelude::*;
use serde::Serialize;

use super::kolmogorov::admissible_dt;
use super::{growth_factor, Assertion, StudyReport, Table};
use crate::chain::{decompose, mean_stderr, sample_path, trace_points, LebesgueSampler};
use crate::config::StudyConfig;
use crate::error::{Error, Result};
use crate::field::FieldMoments;
use crate::kernel::{build_forward, EnteringBarycenters};
use crate::rng::derive_seed;
use crate::solver::{cell_errors, local_lp, project_initial, run, ErrorOptions, InitialDatum};

/// Most centers at which the localized norm is evaluated.
pub const MAX_CENTERS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalLpRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub centers: usize,
    pub max_local: f64,
    /// `max_local / h^{1/2}`.
    pub normalized: f64,
    /// `E_mu |X_N - X_0 + dt sum a(X_n)|^p / h^{p/2}` and its standard error.
    pub qp: f64,
    pub qp_stderr: f64,
    pub delta_dt: f64,
}

pub fn local_lp_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.check()?;
    let p = cfg.p;
    let opts = ErrorOptions { p, ..cfg.error.clone() };
    let mut rows = Vec::new();
    for (i, &n) in cfg.sweep.iter().enumerate() {
        let mesh = cfg.family.build(n)?;
        let datum = InitialDatum::for_mesh(cfg.datum.clone(), &mesh);
        if datum.lipschitz().is_none() {
            return Err(Error::invalid("the localized L^p study needs a Lipschitz datum"));
        }
        let moments = FieldMoments::compute(&mesh, &cfg.field);
        let (dt, steps) = cfg.time_grid(admissible_dt(&mesh, &moments));
        let t = dt * steps as f64;
        let kernel = build_forward(&mesh, &moments, dt)?;
        let eb = EnteringBarycenters::compute(&mesh, &cfg.field, &moments);
        let u = run(&kernel, &project_initial(&datum, &mesh), steps);
        let errs = cell_errors(&u, &datum, &cfg.field, &mesh, t, &opts);
        let stride = mesh.len().div_ceil(MAX_CENTERS);
        let centers: Vec<usize> = (0..mesh.len()).step_by(stride).collect();
        let max_local = centers
            .par_iter()
            .map(|&k| local_lp(&mesh, &eb, &errs.lp, p, &eb.get(k)).0)
            .reduce(|| 0.0, f64::max);
        let h = mesh.h_max;

        let sampler = LebesgueSampler::new(&mesh)?;
        let master = derive_seed(cfg.seed, i as u64);
        let defects: Vec<f64> = (0..cfg.samples as u64)
            .into_par_iter()
            .map(|j| {
                let seed = derive_seed(master, j);
                let tr = trace_points(&sample_path(&kernel, sampler.sample(seed), steps, seed), &mesh, &eb);
                let d = decompose(&tr, &mesh, &cfg.field, &kernel);
                (d.s[steps] + d.r[steps]).norm().powf(p)
            })
            .collect();
        let (q, se) = mean_stderr(&defects);
        let scale = h.powf(p / 2.0);
        rows.push(LocalLpRow {
            n,
            h,
            dt,
            steps,
            centers: centers.len(),
            max_local,
            normalized: max_local / h.sqrt(),
            qp: q / scale,
            qp_stderr: se / scale,
            delta_dt: moments.max_abs_divergence() * dt,
        });
    }

    let mut report = StudyReport::new("local-lp", cfg);
    let mut t = Table::new(
        "sweep",
        &["n", "h", "dt", "steps", "centers", "max_local", "normalized", "qp", "qp_stderr", "delta_dt"],
    );
    for r in &rows {
        report.assertions.push(Assertion::below(
            format!("step condition n={}", r.n),
            r.delta_dt,
            1.0 - cfg.eta,
            "max |delta| dt < 1 - eta",
        ));
        t.push(vec![
            r.n as f64,
            r.h,
            r.dt,
            r.steps as f64,
            r.centers as f64,
            r.max_local,
            r.normalized,
            r.qp,
            r.qp_stderr,
            r.delta_dt,
        ]);
    }
    let normalized: Vec<f64> = rows.iter().map(|r| r.normalized).collect();
    report.assertions.push(Assertion::at_most(
        "localized error / h^{1/2} bounded across the sweep",
        growth_factor(&normalized),
        cfg.tolerances.growth,
        "max / coarsest",
    ));
    report.metric("theta", rows.iter().map(|r| r.dt / r.h).fold(0.0, f64::max));
    report.metric("rows", &rows);
    report.tables.push(t);
    Ok(report)
}
