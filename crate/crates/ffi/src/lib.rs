//! C interface to `sfwg`.
//!
//! Handles are opaque pointers created by `sfwg_*_new`-style calls and
//! released with the matching `_free`. Every fallible call returns an
//! [`SfwgStatus`]; on failure the message is available from
//! [`sfwg_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::Point2;
use sfwg::exact::builtin_solution;
use sfwg::mesh::{build_polygonal, build_triangular, load_mesh, Mesh};
use sfwg::norms::{error_2h, error_l2, error_triple};
use sfwg::polyspace::CellGeometry;
use sfwg::study::{run_study, MeshFamily, StudyConfig};
use sfwg::system::{build_dof_map, solve_biharmonic, SolutionBoundary, SolverOptions};
use sfwg::weakop::WeakFunction;
use sfwg::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SfwgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Topology = 4,
    Solver = 5,
    Io = 6,
    /// The point lies outside every cell.
    NotFound = 7,
    Panic = 8,
}

/// A mesh of the unit square.
pub struct SfwgMesh {
    mesh: Mesh,
}

/// A discrete solution together with its mesh, degrees and, for built-in
/// problems, its errors.
pub struct SfwgSolution {
    mesh: Mesh,
    uh: WeakFunction,
    k: usize,
    j: usize,
    free_dofs: usize,
    errors: [f64; 3],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let mut message = message.into();
    message.retain(|c| c != '\0');
    let c = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SfwgStatus {
    match e {
        Error::Parse { .. } => SfwgStatus::Parse,
        Error::Topology { .. } | Error::Generation { .. } => SfwgStatus::Topology,
        Error::SingularMatrix(_) | Error::SolverBreakdown { .. } => SfwgStatus::Solver,
        Error::Io(_) => SfwgStatus::Io,
        _ => SfwgStatus::InvalidArgument,
    }
}

struct Failure(SfwgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(SfwgStatus::InvalidArgument, message.into())
}

fn null(what: &str) -> Failure {
    Failure(SfwgStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SfwgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfwgStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {message}"));
            SfwgStatus::Panic
        }
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

fn default_j(mesh: &Mesh, k: usize) -> usize {
    if mesh.cells.iter().all(|c| c.vertices.len() == 3) {
        k + 2
    } else {
        k + 4
    }
}

/// Message of the last failing call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sfwg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sfwg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Uniform triangular mesh with `n` subdivisions per side.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn sfwg_mesh_triangular(n: usize, out: *mut *mut SfwgMesh) -> SfwgStatus {
    guard(|| {
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        let h = Box::into_raw(Box::new(SfwgMesh { mesh: build_triangular(n) }));
        write_out(out, h).inspect_err(|_| drop(Box::from_raw(h)))
    })
}

/// Hexagon-dominant mesh with `n` hexagon columns, `n >= 2`.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn sfwg_mesh_polygonal(n: usize, out: *mut *mut SfwgMesh) -> SfwgStatus {
    guard(|| {
        if n < 2 {
            return Err(invalid("n must be at least 2"));
        }
        let mesh = build_polygonal(n)?;
        let h = Box::into_raw(Box::new(SfwgMesh { mesh }));
        write_out(out, h).inspect_err(|_| drop(Box::from_raw(h)))
    })
}

/// Reads a mesh file in the `polymesh 1` text format.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sfwg_mesh_load(path: *const c_char, out: *mut *mut SfwgMesh) -> SfwgStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let file = File::open(path).map_err(|e| Failure(SfwgStatus::Io, format!("{path}: {e}")))?;
        let mesh = load_mesh(BufReader::new(file))?;
        let h = Box::into_raw(Box::new(SfwgMesh { mesh }));
        write_out(out, h).inspect_err(|_| drop(Box::from_raw(h)))
    })
}

/// # Safety
/// `mesh` must come from a `sfwg_mesh_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sfwg_mesh_free(mesh: *mut SfwgMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Vertex, cell and edge counts and the mesh size `h`. Any output pointer
/// may be null.
///
/// # Safety
/// `mesh` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfwg_mesh_info(
    mesh: *const SfwgMesh,
    num_vertices: *mut usize,
    num_cells: *mut usize,
    num_edges: *mut usize,
    h: *mut f64,
) -> SfwgStatus {
    guard(|| {
        let m = &mesh.as_ref().ok_or_else(|| null("mesh"))?.mesh;
        for (out, v) in [(num_vertices, m.num_vertices()), (num_cells, m.num_cells()), (num_edges, m.num_edges())] {
            if !out.is_null() {
                out.write(v);
            }
        }
        if !h.is_null() {
            h.write(m.h);
        }
        Ok(())
    })
}

/// Solves built-in problem `example` (1 or 2) on `mesh` with degree `k`.
/// `j = 0` selects k+2 on all-triangle meshes and k+4 otherwise; `tol <= 0`
/// selects the default. Errors against the exact solution are computed
/// once and kept on the handle. The mesh handle stays owned by the caller.
///
/// # Safety
/// `mesh` must be a live handle; `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sfwg_solve_example(
    mesh: *const SfwgMesh,
    example: u32,
    k: usize,
    j: usize,
    tol: f64,
    out: *mut *mut SfwgSolution,
) -> SfwgStatus {
    guard(|| {
        let mesh = &mesh.as_ref().ok_or_else(|| null("mesh"))?.mesh;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        if k < 2 {
            return Err(invalid(format!("k must be at least 2, got {k}")));
        }
        let j = if j == 0 { default_j(mesh, k) } else { j };
        if j <= k {
            return Err(invalid(format!("j must exceed k, got j={j} with k={k}")));
        }
        let exact = builtin_solution(example)?;
        let mut options = SolverOptions::default();
        if tol > 0.0 {
            options.tol = tol;
        }
        let f = |p: &Point2<f64>| exact.source(p);
        let boundary = SolutionBoundary(exact.as_ref());
        let uh = solve_biharmonic(mesh, k, j, &f, Some(&boundary), &options)?;
        let errors = [
            error_triple(exact.as_ref(), &uh, mesh, j)?,
            error_2h(exact.as_ref(), &uh, mesh)?,
            error_l2(exact.as_ref(), &uh, mesh)?,
        ];
        let free_dofs = build_dof_map(mesh, k, None).num_free;
        let solution = SfwgSolution {
            mesh: mesh.clone(),
            uh,
            k,
            j,
            free_dofs,
            errors,
        };
        out.write(Box::into_raw(Box::new(solution)));
        Ok(())
    })
}

/// # Safety
/// `solution` must come from [`sfwg_solve_example`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sfwg_solution_free(solution: *mut SfwgSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Triple-bar, broken `H²` and `L²` errors, in that order.
///
/// # Safety
/// `solution` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfwg_solution_errors(
    solution: *const SfwgSolution,
    err_triple: *mut f64,
    err_2h: *mut f64,
    err_l2: *mut f64,
) -> SfwgStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        write_out(err_triple, s.errors[0])?;
        write_out(err_2h, s.errors[1])?;
        write_out(err_l2, s.errors[2])
    })
}

/// Degrees `k`, `j` and the number of free unknowns.
///
/// # Safety
/// `solution` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfwg_solution_info(
    solution: *const SfwgSolution,
    k: *mut usize,
    j: *mut usize,
    free_dofs: *mut usize,
) -> SfwgStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        write_out(k, s.k)?;
        write_out(j, s.j)?;
        write_out(free_dofs, s.free_dofs)
    })
}

fn contains(mesh: &Mesh, cell: usize, p: &Point2<f64>) -> bool {
    let pts = mesh.cell_points(cell);
    let tol = 1e-12 * mesh.cells[cell].diameter;
    (0..pts.len()).all(|i| {
        let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
        let e = b - a;
        let cross = e.x * (p.y - a.y) - e.y * (p.x - a.x);
        cross >= -tol * e.norm()
    })
}

/// Value of the interior component `u_0` at `(x, y)`.
///
/// # Safety
/// `solution` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfwg_solution_eval(
    solution: *const SfwgSolution,
    x: f64,
    y: f64,
    value: *mut f64,
) -> SfwgStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let p = Point2::new(x, y);
        let cell = (0..s.mesh.num_cells())
            .find(|&c| contains(&s.mesh, c, &p))
            .ok_or_else(|| Failure(SfwgStatus::NotFound, format!("({x}, {y}) is outside the mesh")))?;
        let basis = CellGeometry::of_cell(&s.mesh, cell).basis(s.k);
        write_out(value, basis.evaluate(s.uh.v0(cell), &p))
    })
}

/// Runs a convergence study and returns the CSV report (with provenance
/// header) as a string to be released with [`sfwg_string_free`].
/// `mesh_family` is `"tri"` or `"poly"`; `j = 0` picks the default.
///
/// # Safety
/// `mesh_family` must be NUL-terminated, `levels` must point to
/// `num_levels` values, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfwg_study_csv(
    example: u32,
    mesh_family: *const c_char,
    k: usize,
    j: usize,
    levels: *const usize,
    num_levels: usize,
    out: *mut *mut c_char,
) -> SfwgStatus {
    guard(|| {
        let family: MeshFamily = str_arg(mesh_family, "mesh_family")?.parse()?;
        if levels.is_null() {
            return Err(null("levels"));
        }
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let levels = std::slice::from_raw_parts(levels, num_levels).to_vec();
        let mut config = StudyConfig::new(example, family, k, levels);
        config.j = (j != 0).then_some(j);
        let report = run_study(&config)?;
        let csv = CString::new(report.to_csv()).map_err(|_| invalid("report contains NUL"))?;
        out.write(csv.into_raw());
        match report.failure {
            Some(f) => Err(Failure(SfwgStatus::Solver, format!("level n={} failed: {}", f.n, f.message))),
            None => Ok(()),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sfwg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
