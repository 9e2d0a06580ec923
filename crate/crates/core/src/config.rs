//! JSON experiment configuration. Every optional field has an explicit
//! default so that emitted reports spell out the full setup.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VelocityField;
use crate::mesh::{build_nonuniform_1d, build_triangulated_torus_2d, build_uniform_1d, load_mesh, Mesh};
use crate::solver::{DatumKind, ErrorOptions};

fn default_true() -> bool {
    true
}

fn default_length() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    #[serde(rename = "uniform_1d")]
    Uniform1d {
        cells: usize,
        #[serde(default = "default_length")]
        length: f64,
        #[serde(default = "default_true")]
        periodic: bool,
    },
    #[serde(rename = "nonuniform_1d")]
    Nonuniform1d {
        widths: Vec<f64>,
        #[serde(default = "default_true")]
        periodic: bool,
    },
    Torus { n: usize },
    File { path: PathBuf },
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        match self {
            MeshSpec::Uniform1d { cells, length, periodic } => build_uniform_1d(*cells, *length, *periodic),
            MeshSpec::Nonuniform1d { widths, periodic } => build_nonuniform_1d(widths, *periodic),
            MeshSpec::Torus { n } => build_triangulated_torus_2d(*n),
            MeshSpec::File { path } => load_mesh(path),
        }
    }
}

/// Mesh family indexed by a resolution parameter, for sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshFamily {
    /// Periodic uniform interval mesh with `n` cells.
    #[serde(rename = "uniform_1d")]
    Uniform1d {
        #[serde(default = "default_length")]
        length: f64,
    },
    /// Triangulated unit torus with `n x n` squares.
    Torus,
}

impl MeshFamily {
    pub fn build(&self, n: usize) -> Result<Mesh> {
        match self {
            MeshFamily::Uniform1d { length } => build_uniform_1d(n, *length, true),
            MeshFamily::Torus => build_triangulated_torus_2d(n),
        }
    }

    /// Mesh size of member `n`.
    pub fn h(&self, n: usize) -> f64 {
        match self {
            MeshFamily::Uniform1d { length } => length / n as f64,
            MeshFamily::Torus => std::f64::consts::SQRT_2 / n as f64,
        }
    }
}

/// Pass/fail thresholds shared by the studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute tolerance for exact identities.
    pub exact: f64,
    /// Relative tolerance for mass conservation.
    pub mass: f64,
    /// Standard-error multiple for Monte Carlo means.
    pub mean_sigma: f64,
    /// Standard-error multiple for variances and binomial frequencies.
    pub binomial_sigma: f64,
    /// A swept quantity is bounded when `max / first <= growth`.
    pub growth: f64,
    /// A swept quantity is flat when `max / min < spread`.
    pub spread: f64,
    /// Absolute tolerance on the diffusion-limit amplitude.
    pub amplitude: f64,
    /// Largest discrete-reversal residual accepted before refusing.
    pub invariance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact: 1e-12,
            mass: 1e-10,
            mean_sigma: 4.0,
            binomial_sigma: 3.0,
            growth: 2.0,
            spread: 2.0,
            amplitude: 0.05,
            invariance: 1e-10,
        }
    }
}

fn default_field() -> VelocityField {
    VelocityField::constant(&[1.0])
}

fn default_datum() -> DatumKind {
    DatumKind::Sine { freq: 1.0, amp: 1.0 }
}

fn default_mesh() -> MeshSpec {
    MeshSpec::Uniform1d { cells: 4, length: 1.0, periodic: true }
}

/// Shared configuration of every study; fields a study does not use are
/// carried along unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Mesh for single-mesh studies.
    pub mesh: MeshSpec,
    /// Mesh family for sweeps.
    pub family: MeshFamily,
    /// Resolution parameters of the sweep, coarse to fine.
    pub sweep: Vec<usize>,
    pub field: VelocityField,
    pub datum: DatumKind,
    /// Courant ratio: `dt = T / ceil(T / (lambda dt_max))`, or `lambda dt_max`
    /// when the step count is fixed.
    pub lambda: f64,
    pub final_time: f64,
    /// Fixed step count; overrides `final_time` where a study uses `N` directly.
    pub steps: Option<usize>,
    pub samples: usize,
    pub seed: u64,
    /// Number of starting cells for statistical checks.
    pub cell_count: usize,
    pub eta: f64,
    pub p: f64,
    pub thresholds: Vec<f64>,
    /// Trial counts for the Berry-Esseen check.
    pub trials: Vec<u64>,
    pub jump_prob: f64,
    /// Slope windows per norm name (`l1`, `l2`, `l4`, `linf`).
    pub windows: std::collections::BTreeMap<String, [f64; 2]>,
    pub tolerances: Tolerances,
    pub error: ErrorOptions,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            mesh: default_mesh(),
            family: MeshFamily::Uniform1d { length: 1.0 },
            sweep: vec![16, 32, 64, 128],
            field: default_field(),
            datum: default_datum(),
            lambda: 0.5,
            final_time: 1.0,
            steps: None,
            samples: 10_000,
            seed: 20261014,
            cell_count: 10,
            eta: 0.1,
            p: 2.0,
            thresholds: vec![1.0, 2.0, 4.0, 8.0],
            trials: vec![100, 400],
            jump_prob: 0.5,
            windows: Default::default(),
            tolerances: Tolerances::default(),
            error: ErrorOptions::default(),
        }
    }
}

impl StudyConfig {
    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let cfg: StudyConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: context.to_string(),
            message: format!("line {} column {}: {e}", e.line(), e.column()),
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::invalid(format!("lambda must lie in (0, 1], got {}", self.lambda)));
        }
        if !(self.final_time > 0.0) {
            return Err(Error::invalid(format!("final_time must be positive, got {}", self.final_time)));
        }
        if self.sweep.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sweep must be strictly increasing in resolution (decreasing in h)"));
        }
        if self.samples < 2 {
            return Err(Error::invalid("samples must be at least 2"));
        }
        Ok(())
    }

    /// `(dt, N)` for a study on `mesh` given the admissible step.
    pub fn time_grid(&self, dt_max: f64) -> (f64, usize) {
        match self.steps {
            Some(n) => (self.lambda * dt_max, n),
            None => fixed_time_grid(self.final_time, self.lambda, dt_max),
        }
    }
}

/// `dt = T / ceil(T / (lambda dt_max))`, so that `N dt = T` exactly in exact arithmetic.
pub fn fixed_time_grid(t: f64, lambda: f64, dt_max: f64) -> (f64, usize) {
    let n = (t / (lambda * dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (t / n as f64, n)
}

/// Configuration of a plain scheme run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub field: VelocityField,
    pub datum: DatumKind,
    /// Explicit step; takes precedence over `cfl`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Courant ratio used when `dt` is absent.
    #[serde(default)]
    pub cfl: Option<f64>,
    pub steps: usize,
    /// Step indices at which the field is written (the final step always is).
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default)]
    pub error: ErrorOptions,
}

impl RunConfig {
    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            context: context.to_string(),
            message: format!("line {} column {}: {e}", e.line(), e.column()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = StudyConfig::from_json(r#"{"lambda": 0.25}"#, "cfg").unwrap();
        assert_eq!(c.lambda, 0.25);
        assert_eq!(c.seed, 20261014);
        assert_eq!(c.tolerances.exact, 1e-12);
        let round: StudyConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(round, c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(StudyConfig::from_json(r#"{"lambda": 1.5}"#, "cfg").is_err());
        assert!(StudyConfig::from_json(r#"{"sweep": [32, 16]}"#, "cfg").is_err());
        let e = StudyConfig::from_json(r#"{"lamda": 0.5}"#, "cfg").unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn time_grid_hits_final_time() {
        for (t, lambda, dtmax) in [(1.0, 0.5, 0.01), (0.5, 0.5, 1.0 / 64.0), (0.37, 0.9, 0.013)] {
            let (dt, n) = fixed_time_grid(t, lambda, dtmax);
            assert!(dt <= lambda * dtmax * (1.0 + 1e-12));
            assert!((n as f64 * dt - t).abs() <= 1e-12 * t);
        }
        assert_eq!(fixed_time_grid(1.0, 0.5, 0.01).1, 200);
    }

    #[test]
    fn mesh_kinds_build() {
        let m: MeshSpec = serde_json::from_str(r#"{"kind":"uniform_1d","cells":4}"#).unwrap();
        assert_eq!(m.build().unwrap().len(), 4);
        let t: MeshSpec = serde_json::from_str(r#"{"kind":"torus","n":2}"#).unwrap();
        assert_eq!(t.build().unwrap().len(), 8);
        let r: RunConfig = serde_json::from_str(
            r#"{"mesh":{"kind":"nonuniform_1d","widths":[0.5,0.5]},"field":{"kind":"constant","v":[1.0]},
                "datum":{"kind":"step","threshold":0.5},"cfl":1.0,"steps":2}"#,
        )
        .unwrap();
        assert_eq!(r.steps, 2);
    }
}
