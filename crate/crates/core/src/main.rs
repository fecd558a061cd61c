use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sfwg::exact::builtin_solution;
use sfwg::mesh::write_mesh;
use sfwg::study::{run_level, run_study, study_mesh, MeshFamily, OutputFormat, StudyConfig};
use sfwg::system::build_dof_map;
use sfwg::Error;

#[derive(Parser)]
#[command(name = "sfwg", version, about = "Stabilizer-free weak Galerkin solver for the clamped biharmonic problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write the error table.
    Study(StudyArgs),
    /// Solve once and print errors as key=value lines.
    Solve(SolveArgs),
    /// Generate a mesh and dump it in the mesh text format.
    Mesh(MeshArgs),
}

#[derive(Args)]
struct Common {
    /// Built-in exact solution (1 or 2).
    #[arg(long, default_value_t = 1)]
    example: u32,
    /// tri, poly, or file:PATH[,PATH...]
    #[arg(long, default_value = "tri")]
    mesh: String,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Degree of the weak Laplacian range; defaults to k+2 on tri, k+4 otherwise.
    #[arg(long)]
    j: Option<usize>,
    /// Solver tolerance on the backward error.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Assembly threads.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated refinement levels.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    levels: Vec<usize>,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Subdivision parameter (ignored for a mesh file).
    #[arg(long, default_value_t = 8)]
    n: usize,
}

#[derive(Args)]
struct MeshArgs {
    /// tri or poly
    #[arg(long, default_value = "tri")]
    family: String,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SingularMatrix(_) | Error::SolverBreakdown { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn config_from(common: &Common, levels: Vec<usize>, format: OutputFormat, out: Option<PathBuf>) -> Result<StudyConfig, Error> {
    let mut config = StudyConfig::new(common.example, common.mesh.parse()?, common.k, levels);
    config.j = common.j;
    config.tol = common.tol;
    config.format = format;
    config.out = out;
    config.workers = common.workers;
    Ok(config)
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn study(args: StudyArgs) -> Result<u8, Error> {
    let config = config_from(&args.common, args.levels, args.format.parse()?, args.out)?;
    let report = run_study(&config)?;
    emit(&report.render(), config.out.as_ref())?;
    Ok(match &report.failure {
        Some(f) => {
            eprintln!("error: level n={} failed: {}", f.n, f.message);
            EXIT_SOLVER
        }
        None => 0,
    })
}

fn solve(args: SolveArgs) -> Result<u8, Error> {
    let levels = vec![args.n];
    let config = config_from(&args.common, levels, OutputFormat::Csv, None)?;
    config.validate()?;
    let n = match config.mesh {
        MeshFamily::Files(ref paths) if paths.len() == 1 => 1,
        MeshFamily::Files(_) => return Err(Error::InvalidConfig("solve takes a single mesh file".into())),
        _ => args.n,
    };
    let mesh = study_mesh(&config.mesh, n)?;
    let exact = builtin_solution(config.example)?;
    let (k, j) = (config.k, config.effective_j());
    let dofs = build_dof_map(&mesh, k, None);
    let (triple, h2, l2) = run_level(&mesh, exact.as_ref(), k, j, &config.solver_options())?;
    let mut out = String::new();
    for (key, value) in [
        ("example", config.example.to_string()),
        ("mesh", config.mesh.to_string()),
        ("n", n.to_string()),
        ("k", k.to_string()),
        ("j", j.to_string()),
        ("cells", mesh.num_cells().to_string()),
        ("free_dofs", dofs.num_free.to_string()),
        ("h", format!("{:e}", mesh.h)),
        ("err_triple", format!("{triple:e}")),
        ("err_2h", format!("{h2:e}")),
        ("err_l2", format!("{l2:e}")),
    ] {
        out.push_str(&format!("{key}={value}\n"));
    }
    emit(&out, None)?;
    Ok(0)
}

fn mesh(args: MeshArgs) -> Result<u8, Error> {
    let family: MeshFamily = args.family.parse()?;
    if matches!(family, MeshFamily::Files(_)) {
        return Err(Error::InvalidConfig("mesh generates tri or poly meshes only".into()));
    }
    if args.n == 0 {
        return Err(Error::InvalidConfig("n must be positive".into()));
    }
    let mesh = study_mesh(&family, args.n)?;
    let mut buf = Vec::new();
    write_mesh(&mesh, &mut buf)?;
    emit(&String::from_utf8_lossy(&buf), args.out.as_ref())?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Study(a) => study(a),
        Command::Solve(a) => solve(a),
        Command::Mesh(a) => mesh(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
