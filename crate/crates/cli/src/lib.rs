//! `homotopy` command line: run a benchmark and export the front, or
//! recompute metrics of a stored front.

pub mod front_csv;
pub mod report;
pub mod svg;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use homotopy_moo::driver::{march_biobjective, run_homotopy, ws_scan, DriverError, Front, RunMode, RunOptions, SampleStatus};
use homotopy_moo::mesh::{lattice_size, AnsatzMesh, MeshError};
use homotopy_moo::metrics::{equispacing_residual, HvConvention};
use homotopy_moo::nlp::{FdScheme, SolverOptions};
use homotopy_moo::problem::{builtin_problem, ProblemError};
use thiserror::Error;

pub use front_csv::{read_front_csv, write_front_csv, FrontCsvError, FrontRow, StoredFront};
pub use report::{measure, Measured, MetricsReport, RunReport};

#[derive(Debug, Parser)]
#[command(name = "homotopy", version, about = "Evenly sampled Pareto fronts by homotopy continuation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the front of a built-in problem and write front.csv, report.json and front.svg.
    Run(RunArgs),
    /// Recompute evenness, hypervolume and residual of a stored front.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// motta1, motta2, dtlz2 or biobj-convex.
    #[arg(long)]
    pub problem: String,
    /// Lattice subdivision m.
    #[arg(long, conflicts_with = "points")]
    pub resolution: Option<usize>,
    /// Sample count (serial-march steps, ws-scan weights, or a lattice size).
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, default_value = "jacobi")]
    pub mode: RunMode,
    /// Marching step in objective space.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub move_tol: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Hypervolume reference point, comma separated.
    #[arg(long = "ref", value_delimiter = ',', allow_negative_numbers = true)]
    pub reference: Option<Vec<f64>>,
    #[arg(long, default_value = "reference")]
    pub hv_convention: HvConvention,
    /// Write the ansatz mesh to this file.
    #[arg(long)]
    pub dump_mesh: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-6)]
    pub feas_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub opt_tol: f64,
    #[arg(long, default_value = "forward")]
    pub fd_scheme: FdScheme,
    #[arg(long, default_value_t = 1e-6)]
    pub fd_step: f64,
    #[arg(long, default_value_t = 200)]
    pub max_solver_iters: usize,
}

impl SolverArgs {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            feas_tol: self.feas_tol,
            opt_tol: self.opt_tol,
            max_iters: self.max_solver_iters,
            fd_step: self.fd_step,
            fd_scheme: self.fd_scheme,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub front: PathBuf,
    #[arg(long = "ref", value_delimiter = ',', allow_negative_numbers = true)]
    pub reference: Option<Vec<f64>>,
    #[arg(long, default_value = "reference")]
    pub hv_convention: HvConvention,
    /// Mesh dump written by `run --dump-mesh`; enables the residual.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] clap::Error),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    FrontCsv { path: PathBuf, source: FrontCsvError },
    #[error("{path}: {source}")]
    Mesh { path: PathBuf, source: MeshError },
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn usage(kind: ErrorKind, message: impl std::fmt::Display) -> CliError {
    let mut cmd = Cli::command();
    let run = cmd.find_subcommand_mut("run").expect("run subcommand").clone();
    CliError::Usage(run.bin_name("homotopy run").error(kind, message))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Turns the flags into driver options, rejecting combinations that do not
/// apply to the chosen mode.
pub fn run_options(args: &RunArgs, k: usize) -> Result<RunOptions, CliError> {
    let conflict = |msg: String| Err(usage(ErrorKind::ArgumentConflict, msg));
    let mode = args.mode;
    if args.gamma.is_some() && mode != RunMode::SerialMarch {
        return conflict(format!("--gamma only applies to serial-march, not {}", mode.label()));
    }
    if args.dump_mesh.is_some() && !mode.is_homotopy() {
        return conflict(format!("--dump-mesh needs a homotopy mode, not {}", mode.label()));
    }
    let mut options = RunOptions {
        mode,
        max_sweeps: args.max_sweeps,
        move_tol: args.move_tol,
        gamma: args.gamma,
        ..RunOptions::default()
    };
    match mode {
        RunMode::Jacobi | RunMode::GaussSeidel => {
            if let Some(m) = args.resolution {
                options.resolution = m;
            } else if let Some(p) = args.points {
                options.resolution = (1..=p).find(|&m| lattice_size(k, m) == p).ok_or_else(|| {
                    usage(
                        ErrorKind::InvalidValue,
                        format!("--points {p} is not a simplex lattice size for {k} objectives"),
                    )
                })?;
            }
        }
        RunMode::SerialMarch => {
            if args.gamma.is_none() {
                return Err(usage(ErrorKind::MissingRequiredArgument, "serial-march requires --gamma <GAMMA>"));
            }
            if args.resolution.is_some() {
                return conflict("--resolution does not apply to serial-march; use --points".into());
            }
            options.points = args.points;
        }
        RunMode::WsScan => {
            options.points = Some(
                args.points
                    .unwrap_or_else(|| lattice_size(k, args.resolution.unwrap_or(options.resolution))),
            );
        }
    }
    options.validate().map_err(|e| usage(ErrorKind::InvalidValue, e))?;
    args.solver
        .options()
        .validate()
        .map_err(|e| usage(ErrorKind::InvalidValue, e))?;
    Ok(options)
}

/// Runs the driver for `args` without touching the filesystem.
pub fn compute_front(args: &RunArgs) -> Result<Front, CliError> {
    let problem = builtin_problem(&args.problem).map_err(|e| usage(ErrorKind::InvalidValue, e))?;
    let options = run_options(args, problem.k())?;
    let solver = args.solver.options();
    let front = match options.mode {
        RunMode::Jacobi | RunMode::GaussSeidel => run_homotopy(&problem, &options, &solver)?,
        RunMode::SerialMarch => march_biobjective(&problem, &options, &solver)?,
        RunMode::WsScan => ws_scan(&problem, &options, &solver)?,
    };
    Ok(front)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    body(&mut w).and_then(|()| w.flush()).map_err(io_err(path))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

/// `homotopy run`: compute the front and write the artifacts into `--out`.
/// On a driver failure an error report is still written.
pub fn cmd_run(args: &RunArgs) -> Result<RunReport, CliError> {
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let started = Instant::now();
    let front = match compute_front(args) {
        Ok(front) => front,
        Err(err) => {
            if !matches!(err, CliError::Usage(_)) {
                let failure = serde_json::json!({
                    "problem": args.problem,
                    "mode": args.mode.label(),
                    "error": err.to_string(),
                });
                write_json(&args.out.join("report.json"), &failure)?;
            }
            return Err(err);
        }
    };
    let wall_time = started.elapsed().as_secs_f64();

    let converged: Vec<Vec<f64>> = front
        .samples
        .iter()
        .filter(|s| s.status.is_converged())
        .map(|s| s.f.clone())
        .collect();
    let measured = measure(&converged, args.reference.as_deref(), args.hv_convention);
    let report = RunReport::new(&front, measured, wall_time);

    let csv_path = args.out.join("front.csv");
    let file = File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_front_csv(&front, BufWriter::new(file)).map_err(|source| CliError::FrontCsv {
        path: csv_path.clone(),
        source,
    })?;
    write_json(&args.out.join("report.json"), &report)?;
    let title = format!("{} ({}, {} points)", front.problem, front.mode.label(), front.len());
    let svg = svg::render(&front.normalized(), &front.converged_mask(), &title);
    write_file(&args.out.join("front.svg"), |w| w.write_all(svg.as_bytes()))?;
    if let (Some(path), Some(mesh)) = (&args.dump_mesh, &front.mesh) {
        write_file(path, |w| w.write_all(mesh.dump().as_bytes()))?;
    }
    Ok(report)
}

/// Largest residual of a stored front over a dumped mesh.
fn stored_residual(front: &StoredFront, mesh: &AnsatzMesh) -> Result<f64, CliError> {
    if mesh.len() != front.rows.len() {
        return Err(CliError::Mismatch(format!(
            "mesh has {} nodes but the front has {} rows",
            mesh.len(),
            front.rows.len()
        )));
    }
    let mut positions = vec![Vec::new(); mesh.len()];
    let mut counted = vec![false; mesh.len()];
    for row in &front.rows {
        let slot = positions
            .get_mut(row.id)
            .ok_or_else(|| CliError::Mismatch(format!("row id {} is outside the mesh", row.id)))?;
        *slot = row.fnorm.clone();
        counted[row.id] = row.status == SampleStatus::Converged;
    }
    if positions.iter().any(Vec::is_empty) {
        return Err(CliError::Mismatch("front ids do not cover every mesh node".into()));
    }
    Ok(equispacing_residual(&positions, mesh, &counted))
}

/// `homotopy metrics`: metrics of a stored front, on the raw objectives of
/// its converged samples.
pub fn cmd_metrics(args: &MetricsArgs) -> Result<MetricsReport, CliError> {
    let file = File::open(&args.front).map_err(io_err(&args.front))?;
    let front = read_front_csv(file).map_err(|source| CliError::FrontCsv {
        path: args.front.clone(),
        source,
    })?;
    let converged = front.converged_objectives();
    let measured = measure(&converged, args.reference.as_deref(), args.hv_convention);
    let residual_max = match &args.mesh {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            let mesh = AnsatzMesh::parse_dump(&text).map_err(|source| CliError::Mesh {
                path: path.clone(),
                source,
            })?;
            Some(stored_residual(&front, &mesh)?)
        }
        None => None,
    };
    Ok(MetricsReport {
        points: front.rows.len(),
        converged: converged.len(),
        evenness: measured.evenness,
        hypervolume: measured.hypervolume,
        hv_convention: measured.hv_convention,
        hv_reference: measured.hv_reference,
        residual_max,
        notes: measured.notes,
    })
}

/// Parses `args` (program name first), dispatches, and returns the exit
/// code: 0 on success, 1 on a runtime failure, 2 on a usage error.
pub fn run_from_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args).map(|r| r.summary()),
        Command::Metrics(args) => cmd_metrics(args)
            .map(|r| serde_json::to_string_pretty(&r).expect("metrics report serializes") + "\n"),
    };
    match result {
        Ok(text) => {
            let _ = write!(stdout, "{text}");
            0
        }
        Err(CliError::Usage(e)) => {
            let _ = write!(stderr, "{}", e.render());
            2
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
