//! Convergence studies: solve on a sequence of meshes, measure the three
//! errors against a closed-form solution and tabulate observed rates.
//!
//! Output carries a provenance header of `key=value` comment lines from
//! which [`parse_provenance`] rebuilds the configuration. Worker count and
//! output path are left out of the header so the bytes do not depend on
//! them.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exact::{builtin_solution, ExactSolution};
use crate::mesh::{build_polygonal, build_triangular, load_mesh, Mesh};
use crate::norms::{convergence_rates, error_2h, error_l2, error_quadrature_degree, error_triple};
use crate::polyspace::MAX_DEGREE;
use crate::system::{solve_biharmonic, SolutionBoundary, SolverOptions};
use crate::weakop::cell_quadrature_degree;

pub const CSV_HEADER: &str = "n,h,err_triple,rate_triple,err_2h,rate_2h,err_l2,rate_l2";

#[derive(Clone, Debug, PartialEq)]
pub enum MeshFamily {
    Triangular,
    Polygonal,
    /// One mesh file per level, coarse to fine.
    Files(Vec<PathBuf>),
}

impl MeshFamily {
    /// `j = k+2` on triangles, `k+4` otherwise.
    pub fn default_j(&self, k: usize) -> usize {
        match self {
            MeshFamily::Triangular => k + 2,
            _ => k + 4,
        }
    }
}

impl std::fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshFamily::Triangular => f.write_str("tri"),
            MeshFamily::Polygonal => f.write_str("poly"),
            MeshFamily::Files(paths) => {
                let list: Vec<_> = paths.iter().map(|p| p.display().to_string()).collect();
                write!(f, "file:{}", list.join(","))
            }
        }
    }
}

impl FromStr for MeshFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "tri" | "triangular" => Ok(MeshFamily::Triangular),
            "poly" | "polygonal" => Ok(MeshFamily::Polygonal),
            other => match other.strip_prefix("file:") {
                Some(list) if !list.is_empty() => {
                    Ok(MeshFamily::Files(list.split(',').map(|p| PathBuf::from(p.trim())).collect()))
                }
                _ => Err(Error::InvalidConfig(format!(
                    "unknown mesh family '{other}', expected tri, poly or file:PATH,..."
                ))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl std::fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Markdown => "markdown",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            other => Err(Error::InvalidConfig(format!("unknown format '{other}', expected csv or markdown"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub example: u32,
    pub mesh: MeshFamily,
    pub k: usize,
    /// `None` picks [`MeshFamily::default_j`].
    pub j: Option<usize>,
    /// Subdivision parameter per level. Ignored for mesh files, where the
    /// level number is the file's 1-based position.
    pub levels: Vec<usize>,
    pub tol: f64,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl StudyConfig {
    pub fn new(example: u32, mesh: MeshFamily, k: usize, levels: Vec<usize>) -> Self {
        StudyConfig {
            example,
            mesh,
            k,
            j: None,
            levels,
            tol: SolverOptions::default().tol,
            format: OutputFormat::Csv,
            out: None,
            workers: None,
        }
    }

    pub fn effective_j(&self) -> usize {
        self.j.unwrap_or_else(|| self.mesh.default_j(self.k))
    }

    /// The `n` column: levels, or file positions.
    pub fn effective_levels(&self) -> Vec<usize> {
        match &self.mesh {
            MeshFamily::Files(paths) => (1..=paths.len()).collect(),
            _ => self.levels.clone(),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            workers: self.workers,
            ..SolverOptions::default()
        }
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.example != 1 && self.example != 2 {
            return bad(format!("example must be 1 or 2, got {}", self.example));
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        let j = self.effective_j();
        if j <= self.k {
            return bad(format!("j must exceed k, got j={j} with k={}", self.k));
        }
        let needed = cell_quadrature_degree(j).max(error_quadrature_degree(self.k));
        if needed > MAX_DEGREE {
            return bad(format!("k={} j={j} needs quadrature of degree {needed}, maximum is {MAX_DEGREE}", self.k));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tolerance must lie in (0, 1), got {}", self.tol));
        }
        if self.workers == Some(0) {
            return bad("worker count must be positive".into());
        }
        match &self.mesh {
            MeshFamily::Files(paths) => {
                if paths.iter().any(|p| p.as_os_str().is_empty()) {
                    return bad("empty mesh file path".into());
                }
            }
            family => {
                if self.levels.is_empty() {
                    return bad("no refinement levels".into());
                }
                if self.levels.windows(2).any(|w| w[0] >= w[1]) {
                    return bad(format!("levels must be strictly increasing, got {:?}", self.levels));
                }
                let min = if *family == MeshFamily::Polygonal { 2 } else { 1 };
                if self.levels[0] < min {
                    return bad(format!("{family} meshes need n >= {min}, got {}", self.levels[0]));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub n: usize,
    pub h: f64,
    pub err_triple: f64,
    pub err_2h: f64,
    pub err_l2: f64,
}

/// Level at which a study stopped, and why.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelFailure {
    pub n: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub rows: Vec<ReportRow>,
    pub failure: Option<LevelFailure>,
}

/// Observed rates of one error column against `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rates {
    pub triple: Vec<Option<f64>>,
    pub h2: Vec<Option<f64>>,
    pub l2: Vec<Option<f64>>,
}

impl ConvergenceReport {
    pub fn rates(&self) -> Rates {
        let hs: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        let col = |f: fn(&ReportRow) -> f64| {
            let e: Vec<f64> = self.rows.iter().map(f).collect();
            convergence_rates(&e, &hs).expect("columns have equal length")
        };
        Rates {
            triple: col(|r| r.err_triple),
            h2: col(|r| r.err_2h),
            l2: col(|r| r.err_l2),
        }
    }

    /// Last computed rates `(triple, 2h, L²)`.
    pub fn final_rates(&self) -> Option<(f64, f64, f64)> {
        let r = self.rates();
        Some((*r.triple.last()?.as_ref()?, *r.h2.last()?.as_ref()?, *r.l2.last()?.as_ref()?))
    }

    pub fn render(&self) -> String {
        match self.config.format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Markdown => self.to_markdown(),
        }
    }

    /// Errors and `h` in shortest round-trip exponent form, rates in shortest
    /// round-trip decimal form, first-row rates empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for line in provenance_lines(&self.config) {
            let _ = writeln!(s, "# {line}");
        }
        if let Some(f) = &self.failure {
            let _ = writeln!(s, "# failed at n={}: {}", f.n, f.message);
        }
        s.push_str(CSV_HEADER);
        s.push('\n');
        let rates = self.rates();
        let fmt_rate = |r: Option<f64>| r.map(|v| format!("{v}")).unwrap_or_default();
        for (i, row) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{},{:e},{},{:e},{}",
                row.n,
                row.h,
                row.err_triple,
                fmt_rate(rates.triple[i]),
                row.err_2h,
                fmt_rate(rates.h2[i]),
                row.err_l2,
                fmt_rate(rates.l2[i]),
            );
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        for line in provenance_lines(&self.config) {
            let _ = writeln!(s, "<!-- {line} -->");
        }
        if let Some(f) = &self.failure {
            let _ = writeln!(s, "<!-- failed at n={}: {} -->", f.n, f.message);
        }
        s.push_str("\n| n | h | ‖u−u_h‖ (triple) | rate | ‖u−u_h‖_{2,h} | rate | ‖u−u_0‖ | rate |\n");
        s.push_str("|---:|---:|---:|---:|---:|---:|---:|---:|\n");
        let rates = self.rates();
        let fmt_rate = |r: Option<f64>| r.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        for (i, row) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "| {} | {:.4e} | {:.4e} | {} | {:.4e} | {} | {:.4e} | {} |",
                row.n,
                row.h,
                row.err_triple,
                fmt_rate(rates.triple[i]),
                row.err_2h,
                fmt_rate(rates.h2[i]),
                row.err_l2,
                fmt_rate(rates.l2[i]),
            );
        }
        s
    }
}

pub fn version_string() -> String {
    format!("sfwg v{}", env!("CARGO_PKG_VERSION"))
}

fn provenance_lines(c: &StudyConfig) -> Vec<String> {
    let levels: Vec<String> = c.levels.iter().map(|n| n.to_string()).collect();
    vec![
        version_string(),
        format!("example={}", c.example),
        format!("mesh={}", c.mesh),
        format!("k={}", c.k),
        format!("j={}", c.effective_j()),
        format!("levels={}", levels.join(",")),
        format!("tol={:e}", c.tol),
        format!("format={}", c.format),
    ]
}

/// Rebuilds the configuration from a report's header. `j` comes back
/// explicit; `out` and `workers` are not recorded.
pub fn parse_provenance(text: &str) -> Result<StudyConfig> {
    let mut fields = std::collections::BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        let body = if let Some(rest) = line.strip_prefix('#') {
            rest
        } else if let Some(rest) = line.strip_prefix("<!--").and_then(|r| r.strip_suffix("-->")) {
            rest
        } else {
            continue;
        };
        if let Some((key, value)) = body.trim().split_once('=') {
            if !key.contains(' ') {
                fields.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
    }
    let get = |key: &str| {
        fields
            .get(key)
            .ok_or_else(|| Error::InvalidConfig(format!("provenance header lacks '{key}'")))
    };
    let num = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|e| Error::InvalidConfig(format!("bad '{key}' in provenance header: {e}")))
    };
    let levels = get("levels")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidConfig(format!("bad 'levels' in provenance header: {e}")))?;
    Ok(StudyConfig {
        example: num("example")? as u32,
        mesh: get("mesh")?.parse()?,
        k: num("k")?,
        j: Some(num("j")?),
        levels,
        tol: get("tol")?
            .parse()
            .map_err(|e| Error::InvalidConfig(format!("bad 'tol' in provenance header: {e}")))?,
        format: get("format")?.parse()?,
        out: None,
        workers: None,
    })
}

fn load_mesh_file(path: &PathBuf) -> Result<Mesh> {
    let file = File::open(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot open mesh file {}: {e}", path.display())))?;
    load_mesh(BufReader::new(file))
}

/// Mesh for one level of the study.
pub fn study_mesh(family: &MeshFamily, n: usize) -> Result<Mesh> {
    match family {
        MeshFamily::Triangular => Ok(build_triangular(n)),
        MeshFamily::Polygonal => build_polygonal(n),
        MeshFamily::Files(paths) => {
            let path = paths
                .get(n.wrapping_sub(1))
                .ok_or_else(|| Error::InvalidConfig(format!("no mesh file for level {n}")))?;
            load_mesh_file(path)
        }
    }
}

/// One level: solve and measure.
pub fn run_level(mesh: &Mesh, exact: &dyn ExactSolution, k: usize, j: usize, options: &SolverOptions) -> Result<(f64, f64, f64)> {
    let f = |p: &nalgebra::Point2<f64>| exact.source(p);
    let uh = solve_biharmonic(mesh, k, j, &f, Some(&SolutionBoundary(exact)), options)?;
    Ok((
        error_triple(exact, &uh, mesh, j)?,
        error_2h(exact, &uh, mesh)?,
        error_l2(exact, &uh, mesh)?,
    ))
}

/// Validates, then runs levels coarse to fine. Configuration problems,
/// including unreadable mesh files, are errors; a failure while solving
/// ends the report early and is recorded in it.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    run_study_with(config, &config.solver_options())
}

/// [`run_study`] with explicit solver settings; `tol` and `workers` from
/// `options` win over the config's.
pub fn run_study_with(config: &StudyConfig, options: &SolverOptions) -> Result<ConvergenceReport> {
    config.validate()?;
    let exact = builtin_solution(config.example)?;
    let levels = config.effective_levels();
    let meshes: Option<Vec<Mesh>> = match &config.mesh {
        MeshFamily::Files(paths) => Some(paths.iter().map(load_mesh_file).collect::<Result<_>>()?),
        _ => None,
    };
    let (k, j) = (config.k, config.effective_j());
    let mut report = ConvergenceReport {
        config: config.clone(),
        rows: Vec::new(),
        failure: None,
    };
    for (i, &n) in levels.iter().enumerate() {
        let outcome = match &meshes {
            Some(m) => Ok(m[i].clone()),
            None => study_mesh(&config.mesh, n),
        }
        .and_then(|mesh| run_level(&mesh, exact.as_ref(), k, j, options).map(|e| (mesh.h, e)));
        match outcome {
            Ok((h, (err_triple, err_2h, err_l2))) => {
                log::info!("n={n} h={h:.4e} triple={err_triple:.4e} 2h={err_2h:.4e} l2={err_l2:.4e}");
                report.rows.push(ReportRow {
                    n,
                    h,
                    err_triple,
                    err_2h,
                    err_l2,
                });
            }
            Err(e) => {
                log::warn!("level n={n} failed: {e}");
                report.failure = Some(LevelFailure { n, message: e.to_string() });
                break;
            }
        }
    }
    Ok(report)
}
