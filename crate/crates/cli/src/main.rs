use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use charflow_core::analysis::{
    berry_esseen_study, concentration_study, convergence_study, diffusion_study, fluctuation_study,
    local_lp_study, reversal_study, verify_kolmogorov, StudyReport,
};
use charflow_core::config::{RunConfig, StudyConfig};
use charflow_core::field::FieldMoments;
use charflow_core::kernel::{build_co, build_forward, build_reversed, cfl_dt_max};
use charflow_core::mesh::{
    build_nonuniform_1d, build_triangulated_torus_2d, build_uniform_1d, load_mesh, mesh_hash, save_mesh, validate, Mesh,
};
use charflow_core::solver::{error_norms, project_initial, step, InitialDatum};

const EXIT_USAGE: u8 = 2;
const EXIT_MESH: u8 = 3;
const EXIT_CFL: u8 = 4;
const EXIT_ASSERTION: u8 = 5;

#[derive(Parser)]
#[command(name = "charflow", version, about = "Upwind transport schemes and their Markov chains")]
struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or check meshes.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Assemble a transition kernel and write it as CSV.
    Kernel(KernelArgs),
    /// Run the scheme from a run config.
    Run(RunArgs),
    /// Run verification studies.
    Study(StudyArgs),
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Interval mesh, uniform or from explicit widths.
    #[command(name = "gen-1d")]
    Gen1d {
        #[arg(long, required_unless_present = "widths")]
        cells: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        #[arg(long, value_delimiter = ',', conflicts_with = "cells")]
        widths: Option<Vec<f64>>,
        #[arg(long)]
        periodic: bool,
        #[arg(long, default_value = "mesh.json")]
        out: PathBuf,
    },
    /// Triangulated unit torus with `2 n^2` cells.
    GenTorus {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "mesh.json")]
        out: PathBuf,
    },
    /// Load a mesh file and check its geometry.
    Validate { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Forward,
    Co,
    Reversed,
}

#[derive(Args)]
struct KernelArgs {
    /// Run config supplying mesh, field and step.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "forward")]
    kind: KindArg,
    /// Margin in the reversal condition `max |delta| dt < 1 - eta`.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value = "kernel.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum StudyName {
    Kolmogorov,
    Convergence,
    Diffusion,
    Fluctuation,
    Reversal,
    Concentration,
    LocalLp,
    BerryEsseen,
}

impl fmt::Display for StudyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

#[derive(Args)]
struct StudyArgs {
    #[arg(required = true, value_enum)]
    studies: Vec<StudyName>,
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config's seed.
    #[arg(long, env = "CHARFLOW_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Inputs and outputs of one `study` invocation, written next to the reports.
#[derive(Serialize)]
struct ExperimentManifest {
    config: PathBuf,
    out: PathBuf,
    seed: u64,
    studies: Vec<StudyName>,
    passed: Vec<bool>,
}

/// An error carrying its process exit code.
#[derive(Debug)]
struct Exit {
    code: u8,
    message: String,
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

fn exit(code: u8, message: impl Into<String>) -> anyhow::Error {
    Exit { code, message: message.into() }.into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Exit>() {
            return e.code;
        }
        if let Some(e) = cause.downcast_ref::<charflow_core::Error>() {
            return match e {
                charflow_core::Error::InvalidMesh(_) => EXIT_MESH,
                charflow_core::Error::Cfl { .. } | charflow_core::Error::ReversalCondition { .. } => EXIT_CFL,
                _ => EXIT_USAGE,
            };
        }
    }
    EXIT_USAGE
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| exit(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn save_with_report(mesh: &Mesh, out: &Path) -> Result<()> {
    let report = validate(mesh)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_mesh(mesh, out)?;
    let report_path = out.with_extension("report.json");
    write(&report_path, &json(&report))?;
    println!(
        "wrote {} ({} cells, h = {}, hash {}) and {}",
        out.display(),
        mesh.len(),
        report.h_max,
        mesh_hash(mesh),
        report_path.display()
    );
    Ok(())
}

fn cmd_mesh(cmd: MeshCommand) -> Result<()> {
    match cmd {
        MeshCommand::Gen1d { cells, length, widths, periodic, out } => {
            let mesh = match (widths, cells) {
                (Some(w), _) => build_nonuniform_1d(&w, periodic),
                (None, Some(n)) => build_uniform_1d(n, length, periodic),
                (None, None) => unreachable!("clap requires one of --cells/--widths"),
            }
            .map_err(|e| exit(EXIT_USAGE, e.to_string()))?;
            save_with_report(&mesh, &out)
        }
        MeshCommand::GenTorus { n, out } => {
            let mesh = build_triangulated_torus_2d(n).map_err(|e| exit(EXIT_USAGE, e.to_string()))?;
            save_with_report(&mesh, &out)
        }
        MeshCommand::Validate { path } => {
            if !path.exists() {
                return Err(exit(EXIT_USAGE, format!("no such file: {}", path.display())));
            }
            let mesh = load_mesh(&path).map_err(|e| exit(EXIT_MESH, format!("{}: {e}", path.display())))?;
            let report = validate(&mesh).map_err(|e| exit(EXIT_MESH, format!("{}: {e}", path.display())))?;
            println!("{}", json(&report));
            Ok(())
        }
    }
}

/// Mesh, moments and step of a run config. The explicit `dt` wins over `cfl`;
/// with neither, the step is half the admissible one.
fn resolve_run(cfg: &RunConfig) -> Result<(Mesh, FieldMoments, f64)> {
    let mesh = cfg.mesh.build()?;
    validate(&mesh)?;
    let moments = FieldMoments::compute(&mesh, &cfg.field);
    let dt_max = cfl_dt_max(&mesh, &moments);
    let dt = match (cfg.dt, cfg.cfl) {
        (Some(dt), _) => dt,
        (None, cfl) if dt_max.is_finite() => cfl.unwrap_or(0.5) * dt_max,
        (None, cfl) => cfl.unwrap_or(0.5) * mesh.h_max,
    };
    Ok((mesh, moments, dt))
}

fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = read(path)?;
    RunConfig::from_json(&text, &path.display().to_string()).map_err(|e| exit(EXIT_USAGE, e.to_string()))
}

fn cmd_kernel(args: KernelArgs) -> Result<()> {
    let cfg = load_run_config(&args.config)?;
    let (mesh, moments, dt) = resolve_run(&cfg)?;
    let kernel = match args.kind {
        KindArg::Forward => build_forward(&mesh, &moments, dt)?,
        KindArg::Co => build_co(&mesh, &moments, dt)?,
        KindArg::Reversed => build_reversed(&mesh, &moments, dt, args.eta)?,
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    kernel.write_dump(&mesh, &args.out)?;
    println!("wrote {} ({} kernel, dt = {dt}, hash {})", args.out.display(), kernel.kind.as_str(), kernel.hash());
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config: &'a RunConfig,
    dt: f64,
    steps: usize,
    final_time: f64,
    mesh_hash: String,
    checkpoints: Vec<usize>,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = load_run_config(&args.config)?;
    let (mesh, moments, dt) = resolve_run(&cfg)?;
    let p = build_forward(&mesh, &moments, dt)?;
    let datum = InitialDatum::for_mesh(cfg.datum.clone(), &mesh);
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let mut checkpoints: Vec<usize> = cfg.checkpoints.iter().copied().filter(|&c| c <= cfg.steps).collect();
    checkpoints.push(cfg.steps);
    checkpoints.sort_unstable();
    checkpoints.dedup();

    let mut u = project_initial(&datum, &mesh);
    let mut next = checkpoints.iter().peekable();
    for n in 0..=cfg.steps {
        if n > 0 {
            u = step(&p, &u);
        }
        if next.peek() == Some(&&n) {
            next.next();
            u.write_dump(&mesh, args.out.join(format!("field_{n:06}.csv")))?;
        }
    }
    let t = dt * cfg.steps as f64;
    let report = error_norms(&u, &datum, &cfg.field, &mesh, t, &cfg.error);
    write(&args.out.join("error_report.json"), &json(&report))?;
    let summary = RunSummary {
        config: &cfg,
        dt,
        steps: cfg.steps,
        final_time: t,
        mesh_hash: mesh_hash(&mesh),
        checkpoints: checkpoints.clone(),
    };
    write(&args.out.join("run.json"), &json(&summary))?;
    println!(
        "{} steps of dt = {dt} to t = {t}: L1 = {:.6e}, Linf = {:.6e}; wrote {}",
        cfg.steps,
        report.l1,
        report.linf,
        args.out.display()
    );
    Ok(())
}

fn run_study(name: StudyName, cfg: &StudyConfig) -> charflow_core::Result<StudyReport> {
    match name {
        StudyName::Kolmogorov => verify_kolmogorov(cfg),
        StudyName::Convergence => convergence_study(cfg),
        StudyName::Diffusion => diffusion_study(cfg),
        StudyName::Fluctuation => fluctuation_study(cfg),
        StudyName::Reversal => reversal_study(cfg),
        StudyName::Concentration => concentration_study(cfg),
        StudyName::LocalLp => local_lp_study(cfg),
        StudyName::BerryEsseen => berry_esseen_study(cfg),
    }
}

fn cmd_study(args: StudyArgs) -> Result<()> {
    let text = read(&args.config)?;
    let mut cfg =
        StudyConfig::from_json(&text, &args.config.display().to_string()).map_err(|e| exit(EXIT_USAGE, e.to_string()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let mut manifest = ExperimentManifest {
        config: args.config.clone(),
        out: args.out.clone(),
        seed: cfg.seed,
        studies: args.studies.clone(),
        passed: Vec::new(),
    };
    let mut failed = Vec::new();
    for &name in &args.studies {
        let report = run_study(name, &cfg).with_context(|| format!("study {name}"))?;
        report.write(&args.out).with_context(|| format!("writing {name} report"))?;
        let total = report.assertions.len();
        let failures = report.failures();
        println!("{name}: {}/{total} assertions passed", total - failures.len());
        for a in &failures {
            println!("  FAIL {}: measured {:.6e}, bound {:.6e} ({})", a.name, a.measured, a.bound, a.detail);
        }
        manifest.passed.push(failures.is_empty());
        if !failures.is_empty() {
            failed.push(name.to_string());
        }
    }
    write(&args.out.join("manifest.json"), &json(&manifest))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(exit(EXIT_ASSERTION, format!("assertions failed in: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::Mesh(c) => cmd_mesh(c),
        Command::Kernel(a) => cmd_kernel(a),
        Command::Run(a) => cmd_run(a),
        Command::Study(a) => cmd_study(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
