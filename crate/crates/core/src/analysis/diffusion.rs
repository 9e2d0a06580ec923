//! The scheme against the modified advection-diffusion equation in the
//! constant-coefficient 1-D case.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::{spread_factor, Assertion, StudyReport, Table};
use crate::config::{fixed_time_grid, MeshFamily, StudyConfig};
use crate::error::{Error, Result};
use crate::field::{FieldMoments, VelocityField};
use crate::kernel::{build_forward, cfl_dt_max, EnteringBarycenters};
use crate::mesh::Mesh;
use crate::solver::{modified_diffusion, modified_solution, project_initial, run_history, DatumKind, InitialDatum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub diffusion: f64,
    /// `sup_{n, K} |u_K^n - v(n dt, x_{K,K+})|`.
    pub sup_diff: f64,
    pub ratio: f64,
    /// Amplitude of the datum's Fourier mode in `u^N`, when the datum is a sine.
    pub amplitude: f64,
    pub predicted_amplitude: f64,
}

/// `2 |K|-weighted |sum u_K exp(-2 pi i f x_K)| / L`.
pub fn fourier_amplitude(mesh: &Mesh, values: &[f64], freq: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (c, u) in mesh.cells.iter().zip(values) {
        let (s, co) = (2.0 * PI * freq * c.barycenter.x).sin_cos();
        re += c.volume * u * co;
        im -= c.volume * u * s;
    }
    2.0 * (re * re + im * im).sqrt() / mesh.total_volume()
}

fn constant_speed(field: &VelocityField) -> Result<f64> {
    match field {
        VelocityField::Constant { v } if v.len() == 1 => Ok(v[0]),
        _ => Err(Error::invalid("the diffusion study needs a constant 1-D velocity")),
    }
}

pub fn diffusion_rows(cfg: &StudyConfig) -> Result<Vec<DiffusionRow>> {
    cfg.check()?;
    let a = constant_speed(&cfg.field)?;
    if !matches!(cfg.family, MeshFamily::Uniform1d { .. }) {
        return Err(Error::invalid("the diffusion study needs a uniform 1-D mesh family"));
    }
    let t = cfg.final_time;
    let rows: Vec<Result<DiffusionRow>> = cfg
        .sweep
        .par_iter()
        .map(|&n| {
            let mesh = cfg.family.build(n)?;
            let h = mesh.h_max;
            let moments = FieldMoments::compute(&mesh, &cfg.field);
            let (dt, steps) = fixed_time_grid(t, cfg.lambda, cfl_dt_max(&mesh, &moments));
            let p = build_forward(&mesh, &moments, dt)?;
            let eb = EnteringBarycenters::compute(&mesh, &cfg.field, &moments);
            let datum = InitialDatum::for_mesh(cfg.datum.clone(), &mesh);
            let history = run_history(&p, &project_initial(&datum, &mesh), steps);
            let mut sup: f64 = 0.0;
            for (i, u) in history.iter().enumerate() {
                let time = i as f64 * dt;
                for k in 0..mesh.len() {
                    let v = modified_solution(&datum, &cfg.field, h, dt, time, eb.get(k).x)?;
                    sup = sup.max((u.values[k] - v).abs());
                }
            }
            let d = modified_diffusion(a, h, dt);
            let (amplitude, predicted) = match cfg.datum {
                DatumKind::Sine { freq, amp } => (
                    fourier_amplitude(&mesh, &history[steps].values, freq),
                    amp.abs() * (-d * (2.0 * PI * freq).powi(2) * t).exp(),
                ),
                _ => (f64::NAN, f64::NAN),
            };
            Ok(DiffusionRow {
                n,
                h,
                dt,
                steps,
                diffusion: d,
                sup_diff: sup,
                ratio: sup / h,
                amplitude,
                predicted_amplitude: predicted,
            })
        })
        .collect();
    rows.into_iter().collect()
}

pub fn diffusion_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let rows = diffusion_rows(cfg)?;
    let mut report = StudyReport::new("diffusion", cfg);
    let mut t = Table::new(
        "sweep",
        &["n", "h", "dt", "steps", "diffusion", "sup_diff", "ratio", "amplitude", "predicted_amplitude"],
    );
    for r in &rows {
        t.push(vec![
            r.n as f64,
            r.h,
            r.dt,
            r.steps as f64,
            r.diffusion,
            r.sup_diff,
            r.ratio,
            r.amplitude,
            r.predicted_amplitude,
        ]);
        if r.amplitude.is_finite() {
            report.assertions.push(Assertion::at_most(
                format!("amplitude n={}", r.n),
                (r.amplitude - r.predicted_amplitude).abs(),
                cfg.tolerances.amplitude,
                format!("measured {:.6}, modified equation {:.6}", r.amplitude, r.predicted_amplitude),
            ));
        }
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let spread = spread_factor(&ratios);
    report.assertions.push(Assertion::below(
        "sup difference / h is flat across the sweep",
        spread,
        cfg.tolerances.spread,
        "max ratio / min ratio",
    ));
    report.metric("ratios", &ratios);
    report.metric("spread", spread);
    report.metric("bound_constant", ratios.iter().copied().fold(0.0, f64::max));
    report.tables.push(t);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_amplitude_of_projection() {
        let mesh = crate::mesh::build_uniform_1d(64, 1.0, true).unwrap();
        let d = InitialDatum::for_mesh(DatumKind::Sine { freq: 1.0, amp: 0.7 }, &mesh);
        let u = project_initial(&d, &mesh);
        // cell averaging damps the mode by sinc(pi h)
        let h = 1.0 / 64.0;
        let damp = (PI * h).sin() / (PI * h);
        assert!((fourier_amplitude(&mesh, &u.values, 1.0) - 0.7 * damp).abs() < 1e-12);
    }

    #[test]
    fn cfl_one_is_pure_transport() {
        let cfg = StudyConfig { lambda: 1.0, sweep: vec![20, 40], final_time: 0.5, ..StudyConfig::default() };
        let rows = diffusion_rows(&cfg).unwrap();
        for r in rows {
            assert!(r.diffusion.abs() < 1e-15, "{}", r.diffusion);
            // point value against cell average: |u'| h / 2 at most
            assert!(r.ratio <= PI + 1e-9, "{}", r.ratio);
        }
    }

    #[test]
    fn rejects_variable_speed() {
        let cfg = StudyConfig {
            field: VelocityField::Sine1d { base: 1.0, amp: 0.2, freq: 1.0 },
            ..StudyConfig::default()
        };
        assert!(diffusion_rows(&cfg).is_err());
    }
}
