//! Global numbering, assembly of `(Δw u, Δw v) = (f, v0)` over the free
//! degrees of freedom, and the sparse SPD solve.

use nalgebra::{DMatrix, DVector, Point2, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ExactSolution;
use crate::mesh::Mesh;
use crate::polyspace::{dim_p, CellGeometry};
use crate::weakop::{cell_quadrature_degree, element_weak_laplacian, project_traces, WeakFunction};

/// Essential data on `∂Ω`: the value `g_D` and the derivative `g_N` along
/// the fixed edge normal `n_e`.
pub trait BoundaryData: Sync {
    fn dirichlet(&self, p: &Point2<f64>) -> f64;
    fn neumann(&self, p: &Point2<f64>, n_e: &Vector2<f64>) -> f64;
}

/// Traces of an exact solution as boundary data.
#[derive(Clone, Copy)]
pub struct SolutionBoundary<'a>(pub &'a dyn ExactSolution);

impl BoundaryData for SolutionBoundary<'_> {
    fn dirichlet(&self, p: &Point2<f64>) -> f64 {
        self.0.value(p)
    }

    fn neumann(&self, p: &Point2<f64>, n_e: &Vector2<f64>) -> f64 {
        self.0.gradient(p).dot(n_e)
    }
}

/// Boundary data from a pair of closures.
pub struct FnBoundary<G, N> {
    pub value: G,
    pub normal_derivative: N,
}

impl<G, N> BoundaryData for FnBoundary<G, N>
where
    G: Fn(&Point2<f64>) -> f64 + Sync,
    N: Fn(&Point2<f64>, &Vector2<f64>) -> f64 + Sync,
{
    fn dirichlet(&self, p: &Point2<f64>) -> f64 {
        (self.value)(p)
    }

    fn neumann(&self, p: &Point2<f64>, n_e: &Vector2<f64>) -> f64 {
        (self.normal_derivative)(p, n_e)
    }
}

/// Global numbering. Free unknowns come first: all `v0` (cell-major), then
/// `vb` on interior edges, then `vn` on interior edges. Boundary-edge `vb`,
/// `vn` follow and are constrained.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub k: usize,
    pub num_free: usize,
    pub num_total: usize,
    cell_dim: usize,
    trace_start: Vec<usize>,
    flux_start: Vec<usize>,
    /// Values of the constrained unknowns, indexed from `num_free`.
    constrained: Vec<f64>,
}

impl DofMap {
    pub fn num_constrained(&self) -> usize {
        self.num_total - self.num_free
    }

    pub fn is_free(&self, g: usize) -> bool {
        g < self.num_free
    }

    pub fn constrained_value(&self, g: usize) -> f64 {
        self.constrained[g - self.num_free]
    }

    pub fn cell_dof(&self, cell: usize, i: usize) -> usize {
        cell * self.cell_dim + i
    }

    pub fn trace_dof(&self, edge: usize, i: usize) -> usize {
        self.trace_start[edge] + i
    }

    pub fn flux_dof(&self, edge: usize, i: usize) -> usize {
        self.flux_start[edge] + i
    }

    /// Global indices in the local column order of the element operator.
    pub fn cell_dofs(&self, mesh: &Mesh, cell: usize) -> Vec<usize> {
        let edges = &mesh.cells[cell].edges;
        let mut out = Vec::with_capacity(self.cell_dim + 2 * self.k * edges.len());
        out.extend((0..self.cell_dim).map(|i| self.cell_dof(cell, i)));
        for ce in edges {
            out.extend((0..self.k).map(|i| self.trace_dof(ce.edge, i)));
            out.extend((0..self.k).map(|i| self.flux_dof(ce.edge, i)));
        }
        out
    }

    /// Weak function with free values from `x` and constrained values from
    /// the boundary data.
    pub fn to_weak_function(&self, mesh: &Mesh, x: &[f64]) -> Result<WeakFunction> {
        if x.len() != self.num_free {
            return Err(Error::DimensionMismatch {
                expected: self.num_free,
                found: x.len(),
            });
        }
        let value = |g: usize| if g < self.num_free { x[g] } else { self.constrained_value(g) };
        let mut wf = WeakFunction::zeros(mesh, self.k);
        for c in 0..mesh.num_cells() {
            for (i, v) in wf.v0_mut(c).iter_mut().enumerate() {
                *v = value(self.cell_dof(c, i));
            }
        }
        for e in 0..mesh.num_edges() {
            for i in 0..self.k {
                wf.vb_mut(e)[i] = value(self.trace_dof(e, i));
                wf.vn_mut(e)[i] = value(self.flux_dof(e, i));
            }
        }
        Ok(wf)
    }

    /// Free coefficients of `wf`; its constrained values are ignored.
    pub fn free_values(&self, mesh: &Mesh, wf: &WeakFunction) -> Vec<f64> {
        let mut x = vec![0.0; self.num_free];
        for c in 0..mesh.num_cells() {
            for (i, v) in wf.v0(c).iter().enumerate() {
                x[self.cell_dof(c, i)] = *v;
            }
        }
        for e in (0..mesh.num_edges()).filter(|&e| !mesh.edges[e].is_boundary()) {
            for i in 0..self.k {
                x[self.trace_dof(e, i)] = wf.vb(e)[i];
                x[self.flux_dof(e, i)] = wf.vn(e)[i];
            }
        }
        x
    }
}

/// Numbers the unknowns of `V_h` for degree `k`; boundary-edge unknowns take
/// `Q_b g_D` and `Q_b g_N`, or zero without data.
pub fn build_dof_map(mesh: &Mesh, k: usize, boundary: Option<&dyn BoundaryData>) -> DofMap {
    assert!(k >= 2, "weak spaces need k >= 2");
    let cell_dim = dim_p(k);
    let interior: Vec<usize> = (0..mesh.num_edges()).filter(|&e| !mesh.edges[e].is_boundary()).collect();
    let boundary_edges: Vec<usize> = (0..mesh.num_edges()).filter(|&e| mesh.edges[e].is_boundary()).collect();

    let mut trace_start = vec![0; mesh.num_edges()];
    let mut flux_start = vec![0; mesh.num_edges()];
    let trace_base = mesh.num_cells() * cell_dim;
    let flux_base = trace_base + interior.len() * k;
    for (i, &e) in interior.iter().enumerate() {
        trace_start[e] = trace_base + i * k;
        flux_start[e] = flux_base + i * k;
    }
    let num_free = flux_base + interior.len() * k;
    let mut constrained = vec![0.0; 2 * k * boundary_edges.len()];
    for (i, &e) in boundary_edges.iter().enumerate() {
        trace_start[e] = num_free + 2 * k * i;
        flux_start[e] = num_free + 2 * k * i + k;
        if let Some(data) = boundary {
            let n_e = mesh.edges[e].normal;
            let (vb, vn) = project_traces(mesh, e, k, |p| data.dirichlet(p), |p| data.neumann(p, &n_e));
            constrained[2 * k * i..2 * k * i + k].copy_from_slice(vb.as_slice());
            constrained[2 * k * i + k..2 * k * (i + 1)].copy_from_slice(vn.as_slice());
        }
    }
    DofMap {
        k,
        num_free,
        num_total: num_free + constrained.len(),
        cell_dim,
        trace_start,
        flux_start,
        constrained,
    }
}

/// Square sparse matrix in compressed-row form with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Duplicates are summed in input order, so the result depends only on
    /// the order of `triplets`.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len() / 4);
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len() / 4);
        let mut last = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "entry ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(i) => self.values[range.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// Largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n).map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|`.
    pub fn max_asymmetry(&self) -> f64 {
        (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .fold(0.0, |m, (r, c, v)| m.max((v - self.get(c, r)).abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }
}

/// Reduced system over the free unknowns.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
}

/// Options for assembly and solve.
#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Required normwise backward error, see [`backward_error`].
    pub tol: f64,
    /// Assembly threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Largest system factored directly; larger ones use Jacobi-preconditioned CG.
    pub direct_limit: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            workers: None,
            direct_limit: 2_000_000,
            max_iterations: 20_000,
        }
    }
}

/// Runs `f` on a pool of `workers` threads, or the global pool.
pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidConfig("worker count must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

struct LocalContribution {
    dofs: Vec<usize>,
    stiffness: DMatrix<f64>,
    load: DVector<f64>,
}

/// Assembles `A` from the local products `L_Tᵀ M_j L_T` and `b` from
/// `(f, φ_i)_T`, moving constrained columns to the right-hand side.
pub fn assemble(
    mesh: &Mesh,
    k: usize,
    j: usize,
    f: &(dyn Fn(&Point2<f64>) -> f64 + Sync),
    dofs: &DofMap,
    workers: Option<usize>,
) -> Result<LinearSystem> {
    if dofs.k != k {
        return Err(Error::InvalidConfig(format!("dof map built for k={}, assembling k={k}", dofs.k)));
    }
    let local = |cell: usize| -> Result<LocalContribution> {
        let op = element_weak_laplacian(mesh, cell, k, j)?;
        let geom = CellGeometry::of_cell(mesh, cell);
        let load = project_load(f, &geom, k, j)?;
        Ok(LocalContribution {
            dofs: dofs.cell_dofs(mesh, cell),
            stiffness: op.stiffness(),
            load,
        })
    };
    let contributions: Vec<LocalContribution> =
        with_workers(workers, || (0..mesh.num_cells()).into_par_iter().map(local).collect::<Result<Vec<_>>>())??;

    let n = dofs.num_free;
    let mut rhs = vec![0.0; n];
    let capacity = contributions.iter().map(|c| c.dofs.len().pow(2)).sum();
    let mut triplets = Vec::with_capacity(capacity);
    for c in &contributions {
        for (a, &ga) in c.dofs.iter().enumerate() {
            if !dofs.is_free(ga) {
                continue;
            }
            if a < c.load.len() {
                rhs[ga] += c.load[a];
            }
            for (b, &gb) in c.dofs.iter().enumerate() {
                if dofs.is_free(gb) {
                    triplets.push((ga, gb, c.stiffness[(a, b)]));
                } else {
                    rhs[ga] -= c.stiffness[(a, b)] * dofs.constrained_value(gb);
                }
            }
        }
    }
    Ok(LinearSystem {
        matrix: SparseMatrix::from_triplets(n, triplets),
        rhs,
    })
}

/// `(f, φ_i)_T` for the `P_k` basis.
fn project_load(
    f: &(dyn Fn(&Point2<f64>) -> f64 + Sync),
    geom: &CellGeometry,
    k: usize,
    j: usize,
) -> Result<DVector<f64>> {
    let basis = geom.basis(k);
    let rule = geom.rule(cell_quadrature_degree(j))?;
    let mut load = DVector::zeros(basis.dim());
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let fw = w * f(p);
        for (i, v) in basis.values(p).iter().enumerate() {
            load[i] += fw * v;
        }
    }
    Ok(load)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

/// Normwise backward error `‖b - Ax‖∞ / (‖A‖∞ ‖x‖∞ + ‖b‖∞)`.
///
/// The plain relative residual `‖b - Ax‖ / ‖b‖` of a backward-stable solve is
/// about `ε cond(A)` for smooth data, and `cond(A)` grows like `h^-4`, so it
/// cannot serve as a fixed tolerance across refinement levels.
pub fn backward_error(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r = inf_norm(&residual(a, x, b));
    let denom = a.inf_norm() * inf_norm(x) + inf_norm(b);
    if denom == 0.0 {
        0.0
    } else {
        r / denom
    }
}

/// Solves `A x = b` to normwise backward error `options.tol`.
pub fn solve(system: &LinearSystem, options: &SolverOptions) -> Result<Vec<f64>> {
    let n = system.matrix.n;
    if system.rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: system.rhs.len(),
        });
    }
    if system.rhs.iter().all(|&b| b == 0.0) {
        return Ok(vec![0.0; n]);
    }
    if n <= options.direct_limit {
        solve_direct(system, options.tol)
    } else {
        solve_cg(system, options.tol, options.max_iterations)
    }
}

const REFINEMENT_STEPS: usize = 3;

fn solve_direct(system: &LinearSystem, tol: f64) -> Result<Vec<f64>> {
    use faer::linalg::solvers::Solve;
    use faer::sparse::{SparseColMat, SymbolicSparseColMat};

    faer::set_global_parallelism(faer::Par::Seq);
    let a = &system.matrix;
    // Symmetric, so the row-compressed arrays are also the column-compressed ones.
    let symbolic = SymbolicSparseColMat::new_checked(a.n, a.n, a.row_ptr.clone(), None, a.col_idx.clone());
    let csc = SparseColMat::new(symbolic, a.values.clone());
    let llt = csc
        .sp_cholesky(faer::Side::Lower)
        .map_err(|e| Error::SingularMatrix(format!("sparse Cholesky failed: {e:?}")))?;

    let solve_col = |rhs: &[f64]| {
        let mut col = faer::Mat::from_fn(a.n, 1, |i, _| rhs[i]);
        llt.solve_in_place(col.as_mut());
        (0..a.n).map(|i| col[(i, 0)]).collect::<Vec<f64>>()
    };
    let mut x = solve_col(&system.rhs);
    let mut err = backward_error(a, &x, &system.rhs);
    let mut steps = 0;
    while err > tol && steps < REFINEMENT_STEPS {
        let dx = solve_col(&residual(a, &x, &system.rhs));
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(xi, d)| xi + d).collect();
        let next = backward_error(a, &candidate, &system.rhs);
        steps += 1;
        log::debug!("refinement step {steps}: backward error {next:e}");
        if !(next < err) {
            break;
        }
        x = candidate;
        err = next;
    }
    if !(err <= tol) {
        return Err(Error::SolverBreakdown {
            iterations: steps,
            residual: err,
        });
    }
    Ok(x)
}

fn solve_cg(system: &LinearSystem, tol: f64, max_iterations: usize) -> Result<Vec<f64>> {
    let a = &system.matrix;
    let b = &system.rhs;
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if *d > 0.0 { 1.0 / d } else { f64::NAN })
        .collect();
    if inv_diag.iter().any(|d| d.is_nan()) {
        return Err(Error::SingularMatrix("non-positive diagonal entry".into()));
    }
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    let (a_norm, b_norm) = (a.inf_norm(), inf_norm(b));
    let mut x = vec![0.0; a.n];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iterations {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverBreakdown {
                iterations: it,
                residual: backward_error(a, &x, b),
            });
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        if inf_norm(&r) <= tol * (a_norm * inf_norm(&x) + b_norm) {
            // Confirm against the true residual, not the recurrence.
            r = residual(a, &x, b);
            if inf_norm(&r) <= tol * (a_norm * inf_norm(&x) + b_norm) {
                return Ok(x);
            }
        }
        z = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::SolverBreakdown {
        iterations: max_iterations,
        residual: backward_error(a, &x, b),
    })
}

/// Assembles and solves the scheme; constrained unknowns of the result
/// carry the projected boundary data (zero without data).
pub fn solve_biharmonic(
    mesh: &Mesh,
    k: usize,
    j: usize,
    f: &(dyn Fn(&Point2<f64>) -> f64 + Sync),
    boundary: Option<&dyn BoundaryData>,
    options: &SolverOptions,
) -> Result<WeakFunction> {
    let dofs = build_dof_map(mesh, k, boundary);
    let system = assemble(mesh, k, j, f, &dofs, options.workers)?;
    let x = solve(&system, options)?;
    dofs.to_weak_function(mesh, &x)
}
