//! `arrowsos`: build, decompose, export and solve frame relaxations.
//!
//! Exit codes: 0 on success, 1 when the solver fails (the row is still
//! printed, flagged with `+`), 2 on configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arrowsos::frames::{self, builtin, FrameModel, FrameReport, RunMode};
use arrowsos::sdpcore::{export_sdpa, Backend, ExternalSolver, IpmOptions, Status};
use arrowsos::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "arrowsos", version, about = "Moment-SOS bounds for frame optimisation with arrow decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one relaxation and print its report.
    Solve(SolveArgs),
    /// Solve a grid of problems, orders and modes; print CSV rows.
    Sweep(SweepArgs),
    /// Print the arrow decomposition diagnostics of a problem as JSON.
    Decompose(ProblemArg),
    /// Write the relaxation as an SDPA sparse file.
    Export(ExportArgs),
}

#[derive(Args)]
struct ProblemArg {
    /// Built-in name (`beam:N`, `frame24`, `three-element`) or a frame JSON file.
    #[arg(long)]
    problem: String,
}

#[derive(Args, Clone)]
struct ModeArgs {
    /// Relaxation order.
    #[arg(long, default_value_t = 1)]
    r: u32,
    /// Use the arrow-decomposed hierarchy.
    #[arg(long)]
    ad: bool,
    /// Use the Newton-polytope (NMT) basis.
    #[arg(long)]
    nmt: bool,
    /// Eliminate interface variables and project rank-deficient blocks.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    project: bool,
}

impl ModeArgs {
    fn mode(&self) -> RunMode {
        RunMode { r: self.r, ad: self.ad, nmt: self.nmt, project: self.project }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    /// Built-in interior-point method.
    Ipm,
    /// SDPA-compatible executable named by `ARROWSOS_SDP_SOLVER`.
    External,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArg,
    #[command(flatten)]
    mode: ModeArgs,
    #[arg(long, value_enum, default_value_t = SolverKind::Ipm)]
    solver: SolverKind,
    /// Also write the program as an SDPA file.
    #[arg(long)]
    export_sdpa: Option<PathBuf>,
    /// Directory receiving `report.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated problems.
    #[arg(long, value_delimiter = ',', required = true)]
    problem: Vec<String>,
    /// Comma-separated orders.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    r: Vec<u32>,
    /// Comma-separated modes out of `msos`, `ad`, `nmt`, `nmt+ad`, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    modes: Vec<String>,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    project: bool,
    #[arg(long, value_enum, default_value_t = SolverKind::Ipm)]
    solver: SolverKind,
    /// CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    problem: ProblemArg,
    #[command(flatten)]
    mode: ModeArgs,
    /// Target `.dat-s` file.
    #[arg(long)]
    out: PathBuf,
}

/// Error split by exit code.
enum Failure {
    Config(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalFailure(_) | Error::BackendUnavailable(_) => Failure::Solver(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load_problem(source: &str) -> Result<FrameModel, Failure> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return Ok(FrameModel::from_json(&text)?);
    }
    Ok(builtin::by_name(source)?)
}

fn backend(kind: SolverKind) -> Result<Backend, Failure> {
    Ok(match kind {
        SolverKind::Ipm => Backend::InteriorPoint(IpmOptions::default()),
        SolverKind::External => Backend::External(ExternalSolver::from_env()?),
    })
}

fn check_mode(mode: &RunMode) -> Result<(), Failure> {
    if mode.r == 0 {
        return Err(Failure::Config("relaxation order r must be at least 1".into()));
    }
    Ok(())
}

fn solved(report: &FrameReport) -> bool {
    matches!(report.status, Status::Optimal | Status::NearOptimal)
}

fn cmd_solve(args: &SolveArgs) -> Result<bool, Failure> {
    let mode = args.mode.mode();
    check_mode(&mode)?;
    let model = load_problem(&args.problem.problem)?;
    let backend = backend(args.solver)?;
    if let Some(path) = &args.export_sdpa {
        write_sdpa(&model, &mode, path)?;
    }
    let report = frames::run(&model, &mode, &backend)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Config(e.to_string()))?;
    match args.format {
        Format::Json => {
            println!("{json}");
            eprintln!("{}", report.table_row());
        }
        Format::Table => println!("{}", report.table_row()),
        Format::Csv => {
            println!("{}", FrameReport::CSV_HEADER);
            println!("{}", report.csv_row());
        }
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), format!("{json}\n"))?;
    }
    Ok(solved(&report))
}

fn parse_mode(name: &str, r: u32, project: bool) -> Result<Vec<RunMode>, Failure> {
    let mut m = RunMode::new(r, false, false);
    m.project = project;
    let out = match name.trim().to_ascii_lowercase().as_str() {
        "all" => RunMode::all(r)
            .into_iter()
            .map(|mut m| {
                m.project = project;
                m
            })
            .collect(),
        "msos" => vec![m],
        "ad" => vec![RunMode { ad: true, ..m }],
        "nmt" => vec![RunMode { nmt: true, ..m }],
        "nmt+ad" | "ad+nmt" => vec![RunMode { ad: true, nmt: true, ..m }],
        other => return Err(Failure::Config(format!("unknown mode '{other}'"))),
    };
    Ok(out)
}

fn cmd_sweep(args: &SweepArgs) -> Result<bool, Failure> {
    let backend = backend(args.solver)?;
    let mut jobs = Vec::new();
    for p in &args.problem {
        let model = load_problem(p)?;
        for &r in &args.r {
            for name in &args.modes {
                for mode in parse_mode(name, r, args.project)? {
                    check_mode(&mode)?;
                    jobs.push((model.clone(), mode));
                }
            }
        }
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    let mut results: Vec<Option<Result<FrameReport, String>>> = vec![None; jobs.len()];
    std::thread::scope(|scope| {
        let chunks = results.chunks_mut(jobs.len().div_ceil(workers).max(1));
        for (c, slot) in chunks.enumerate() {
            let start = c * jobs.len().div_ceil(workers).max(1);
            let jobs = &jobs;
            let backend = &backend;
            scope.spawn(move || {
                for (i, out) in slot.iter_mut().enumerate() {
                    let (model, mode) = &jobs[start + i];
                    *out = Some(frames::run(model, mode, backend).map_err(|e| e.to_string()));
                }
            });
        }
    });
    let mut csv = format!("{}\n", FrameReport::CSV_HEADER);
    let mut ok = true;
    for ((model, mode), res) in jobs.iter().zip(results) {
        match res.expect("every job ran") {
            Ok(rep) => {
                ok &= solved(&rep);
                csv.push_str(&rep.csv_row());
                csv.push('\n');
            }
            Err(e) => {
                ok = false;
                eprintln!("{} {} r={}: {e}", model.name, mode.label(), mode.r);
            }
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(ok)
}

fn cmd_decompose(args: &ProblemArg) -> Result<bool, Failure> {
    let model = load_problem(&args.problem)?;
    let report = frames::decomposition_report(&model)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Config(e.to_string()))?;
    println!("{json}");
    Ok(true)
}

fn write_sdpa(model: &FrameModel, mode: &RunMode, path: &Path) -> Result<(), Failure> {
    let sp = frames::build_pop(model)?;
    let rel = frames::build_relaxation(&sp, mode)?;
    let program = rel.to_program();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, export_sdpa(&program))?;
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> Result<bool, Failure> {
    let mode = args.mode.mode();
    check_mode(&mode)?;
    let model = load_problem(&args.problem.problem)?;
    write_sdpa(&model, &mode, &args.out)?;
    println!("{}", args.out.display());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

