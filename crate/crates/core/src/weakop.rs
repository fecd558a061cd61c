//! Weak functions and the element-local discrete weak Laplacian.
//!
//! For a weak function `v = {v0, vb, vn n_e}` the weak Laplacian on a cell
//! `T` is the `P_j(T)` polynomial with, for every `psi` in `P_j(T)`,
//!
//! ```text
//! (Δw v, psi)_T = (Δ v0, psi)_T + <Qb(v0 - vb), ∇psi·n>_∂T - <(∇v0 - vn n_e)·n, psi>_∂T
//! ```
//!
//! Since `vb` already lies in `P_{k-1}(e)`, `Qb(v0 - vb) = Qb v0 - vb`, and
//! `(vn n_e)·n = σ vn` with `σ = n_e·n`. Each column of [`ElementWeakLaplacian`]
//! holds the right-hand side for one local degree of freedom solved against
//! the `P_j` mass matrix. The range is expressed in an orthonormalized basis
//! of `P_j(T)` ([`OrthoCellBasis`]): with plain scaled monomials the mass
//! solve amplifies the cancellation between cell and edge terms by its
//! condition number, which costs several digits for `j >= 6`.

use nalgebra::{DMatrix, DVector, Point2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::polyspace::{
    dim_p, project_cell_with, project_edge_with, quad_edge, CellGeometry, EdgeBasis, OrthoCellBasis, SpdFactor,
};

/// Quadrature degree used on cells for weak-Laplacian and error integrals.
pub fn cell_quadrature_degree(j: usize) -> usize {
    2 * j + 2
}

/// Quadrature degree used on edges for weak-Laplacian integrals.
pub fn edge_quadrature_degree(k: usize, j: usize) -> usize {
    k + j
}

/// Coefficients of a weak function: `v0` per cell in the scaled monomial
/// basis of `P_k(T)`, and `vb`, `vn` per edge in the orthonormal basis of
/// `P_{k-1}(e)`. `vn` is measured along the edge's fixed normal `n_e`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakFunction {
    pub k: usize,
    pub interior: Vec<f64>,
    pub trace: Vec<f64>,
    pub flux: Vec<f64>,
}

impl WeakFunction {
    pub fn zeros(mesh: &Mesh, k: usize) -> Self {
        assert!(k >= 2, "weak functions need k >= 2");
        WeakFunction {
            k,
            interior: vec![0.0; mesh.num_cells() * dim_p(k)],
            trace: vec![0.0; mesh.num_edges() * k],
            flux: vec![0.0; mesh.num_edges() * k],
        }
    }

    pub fn cell_dim(&self) -> usize {
        dim_p(self.k)
    }

    pub fn edge_dim(&self) -> usize {
        self.k
    }

    pub fn v0(&self, cell: usize) -> &[f64] {
        let d = self.cell_dim();
        &self.interior[cell * d..(cell + 1) * d]
    }

    pub fn v0_mut(&mut self, cell: usize) -> &mut [f64] {
        let d = self.cell_dim();
        &mut self.interior[cell * d..(cell + 1) * d]
    }

    pub fn vb(&self, edge: usize) -> &[f64] {
        &self.trace[edge * self.k..(edge + 1) * self.k]
    }

    pub fn vb_mut(&mut self, edge: usize) -> &mut [f64] {
        let k = self.k;
        &mut self.trace[edge * k..(edge + 1) * k]
    }

    pub fn vn(&self, edge: usize) -> &[f64] {
        &self.flux[edge * self.k..(edge + 1) * self.k]
    }

    pub fn vn_mut(&mut self, edge: usize) -> &mut [f64] {
        let k = self.k;
        &mut self.flux[edge * k..(edge + 1) * k]
    }

    /// Local degrees of freedom of `cell` in [`ElementWeakLaplacian`] column
    /// order: `v0`, then `vb` and `vn` for each local edge in turn.
    pub fn local_dofs(&self, mesh: &Mesh, cell: usize) -> DVector<f64> {
        let c = &mesh.cells[cell];
        let mut out = Vec::with_capacity(self.cell_dim() + 2 * self.k * c.edges.len());
        out.extend_from_slice(self.v0(cell));
        for ce in &c.edges {
            out.extend_from_slice(self.vb(ce.edge));
            out.extend_from_slice(self.vn(ce.edge));
        }
        DVector::from_vec(out)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| alpha * x).collect();
        WeakFunction {
            k: self.k,
            interior: s(&self.interior),
            trace: s(&self.trace),
            flux: s(&self.flux),
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &WeakFunction) -> Self {
        let s = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + alpha * y).collect();
        WeakFunction {
            k: self.k,
            interior: s(&self.interior, &other.interior),
            trace: s(&self.trace, &other.trace),
            flux: s(&self.flux, &other.flux),
        }
    }
}

/// Matrix mapping local weak degrees of freedom of one cell to the `P_j(T)`
/// coefficients of the weak Laplacian.
#[derive(Clone, Debug)]
pub struct ElementWeakLaplacian {
    pub cell: usize,
    pub k: usize,
    pub j: usize,
    /// `dim P_j` rows, `dim P_k + 2k * (number of edges)` columns.
    pub matrix: DMatrix<f64>,
    /// Mass matrix of the `P_j(T)` basis, the identity up to rounding.
    pub mass: DMatrix<f64>,
    /// Load `M_j * matrix`, kept for the symmetric stiffness product.
    rhs: DMatrix<f64>,
    pub basis: OrthoCellBasis,
}

impl ElementWeakLaplacian {
    pub fn num_local_dofs(&self) -> usize {
        self.matrix.ncols()
    }

    /// `(Δw φ_a, Δw φ_b)_T` for all local basis pairs, i.e. `Lᵀ M_j L`.
    pub fn stiffness(&self) -> DMatrix<f64> {
        let s = self.matrix.transpose() * &self.rhs;
        (&s + s.transpose()) * 0.5
    }

    pub fn apply(&self, local: &DVector<f64>) -> Result<DVector<f64>> {
        apply_weak_laplacian(self, local)
    }
}

pub fn apply_weak_laplacian(op: &ElementWeakLaplacian, local: &DVector<f64>) -> Result<DVector<f64>> {
    if local.len() != op.matrix.ncols() {
        return Err(Error::DimensionMismatch {
            expected: op.matrix.ncols(),
            found: local.len(),
        });
    }
    Ok(&op.matrix * local)
}

/// Builds the weak Laplacian of `cell` for `(P_k(T), P_{k-1}(e), P_{k-1}(e))`
/// weak functions with range `P_j(T)`.
pub fn element_weak_laplacian(mesh: &Mesh, cell: usize, k: usize, j: usize) -> Result<ElementWeakLaplacian> {
    if k < 2 || j <= k {
        return Err(Error::InvalidConfig(format!("need k >= 2 and j > k, got k={k}, j={j}")));
    }
    let geom = CellGeometry::of_cell(mesh, cell);
    let bk = geom.basis(k);
    let rule = geom.rule(cell_quadrature_degree(j))?;
    let bj = OrthoCellBasis::new(geom.basis(j), &rule)?;
    let nj = bj.dim();
    let mut mass = DMatrix::zeros(nj, nj);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let psi = DVector::from_vec(bj.values(p));
        mass.ger(*w, &psi, &psi, 1.0);
    }

    let nk = bk.dim();
    let edges = &mesh.cells[cell].edges;
    let ncols = nk + 2 * k * edges.len();
    let mut rhs = DMatrix::zeros(nj, ncols);

    // (Δφ, ψ)_T
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let lap = bk.laplacians(p);
        let psi = bj.values(p);
        for (i, l) in lap.iter().enumerate() {
            if *l == 0.0 {
                continue;
            }
            let wl = w * l;
            for (m, ps) in psi.iter().enumerate() {
                rhs[(m, i)] += wl * ps;
            }
        }
    }

    for (local, ce) in edges.iter().enumerate() {
        let [a, b] = mesh.edge_points(ce.edge);
        let sigma = f64::from(ce.sign);
        let n: Vector2<f64> = mesh.edges[ce.edge].normal * sigma;
        let eb = EdgeBasis::new(k - 1, a, b);
        let erule = quad_edge(a, b, edge_quadrature_degree(k, j));

        // B[χ, φ] = <χ, φ>_e, G[χ, ψ] = <χ, ∇ψ·n>_e, H[χ, ψ] = <χ, ψ>_e
        let mut bmat = DMatrix::zeros(k, nk);
        let mut gmat = DMatrix::zeros(k, nj);
        let mut hmat = DMatrix::zeros(k, nj);

        for ((p, s), w) in erule.points.iter().zip(&erule.params).zip(&erule.weights) {
            let chi = eb.values_at_param(*s);
            let phi = bk.values(p);
            let dphi_n: Vec<f64> = bk.gradients(p).iter().map(|g| g.dot(&n)).collect();

            let psi = bj.values(p);
            let dpsi_n: Vec<f64> = bj.gradients(p).iter().map(|g| g.dot(&n)).collect();
            for (c, x) in chi.iter().enumerate() {
                let wx = w * x;
                for (i, v) in phi.iter().enumerate() {
                    bmat[(c, i)] += wx * v;
                }
                for m in 0..nj {
                    gmat[(c, m)] += wx * dpsi_n[m];
                    hmat[(c, m)] += wx * psi[m];
                }
            }
            // -<∇φ·n, ψ>_e
            for (i, d) in dphi_n.iter().enumerate() {
                let wd = w * d;
                for (m, ps) in psi.iter().enumerate() {
                    rhs[(m, i)] -= wd * ps;
                }
            }
        }

        // +<Qb φ, ∇ψ·n>_e = Σ_χ <φ, χ><χ, ∇ψ·n>
        let qb = gmat.transpose() * &bmat;
        let mut v0_cols = rhs.columns_mut(0, nk);
        v0_cols += &qb;

        let col = nk + 2 * k * local;

        rhs.columns_mut(col, k).copy_from(&(-gmat.transpose()));
        rhs.columns_mut(col + k, k).copy_from(&(hmat.transpose() * sigma));
    }

    let factor = SpdFactor::new(&mass).map_err(|e| match e {
        Error::SingularMatrix(msg) => Error::SingularMatrix(format!("P_{j} mass matrix of cell {cell}: {msg}")),
        other => other,
    })?;
    let matrix = factor.solve(&rhs);
    Ok(ElementWeakLaplacian {
        cell,
        k,
        j,
        matrix,
        mass,
        rhs,

        basis: bj,
    })
}

/// Interpolates a smooth field into the weak space:
/// `v0 = Q0 u`, `vb = Qb(u|_e)`, `vn = Qb(∇u·n_e)`.
pub fn interpolate_qh(
    u: impl Fn(&Point2<f64>) -> f64 + Sync,
    grad: impl Fn(&Point2<f64>) -> Vector2<f64> + Sync,
    mesh: &Mesh,
    k: usize,
) -> Result<WeakFunction> {
    let mut wf = WeakFunction::zeros(mesh, k);
    for c in 0..mesh.num_cells() {
        let geom = CellGeometry::of_cell(mesh, c);
        let coeffs = project_cell_with(&u, &geom.basis(k), &geom.rule(2 * k + 4)?)?;
        wf.v0_mut(c).copy_from_slice(coeffs.as_slice());
    }
    for e in 0..mesh.num_edges() {
        let (vb, vn) = project_traces(mesh, e, k, &u, |p| grad(p).dot(&mesh.edges[e].normal));
        wf.vb_mut(e).copy_from_slice(vb.as_slice());
        wf.vn_mut(e).copy_from_slice(vn.as_slice());
    }
    Ok(wf)
}

/// `Qb` of a value trace and a normal-derivative trace on one edge.
pub(crate) fn project_traces(
    mesh: &Mesh,
    edge: usize,
    k: usize,
    value: impl Fn(&Point2<f64>) -> f64,
    normal_derivative: impl Fn(&Point2<f64>) -> f64,
) -> (DVector<f64>, DVector<f64>) {
    let [a, b] = mesh.edge_points(edge);
    let eb = EdgeBasis::new(k - 1, a, b);
    let rule = quad_edge(a, b, 2 * k + 4);
    (
        project_edge_with(value, &eb, &rule),
        project_edge_with(normal_derivative, &eb, &rule),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_polygonal, build_triangular};
    use crate::polyspace::project_cell;

    fn weak_laplacian_l2_error(mesh: &Mesh, wf: &WeakFunction, j: usize, lap: impl Fn(&Point2<f64>) -> f64) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..mesh.num_cells() {
            let op = element_weak_laplacian(mesh, c, wf.k, j).unwrap();
            let coeffs = op.apply(&wf.local_dofs(mesh, c)).unwrap();
            let rule = CellGeometry::of_cell(mesh, c).rule(2 * j + 2).unwrap();
            let err = rule
                .integrate(|p| (op.basis.evaluate(coeffs.as_slice(), p) - lap(p)).powi(2))
                .sqrt();
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn zero_in_zero_out() {
        let mesh = build_triangular(2);
        let op = element_weak_laplacian(&mesh, 3, 2, 4).unwrap();
        let out = op.apply(&DVector::zeros(op.num_local_dofs())).unwrap();
        assert_eq!(out.amax(), 0.0);
        assert_eq!(op.num_local_dofs(), 6 + 3 * 4);
        assert_eq!(op.matrix.nrows(), 15);
    }

    #[test]
    fn unit_vector_gives_column() {
        let mesh = build_triangular(2);
        let op = element_weak_laplacian(&mesh, 1, 2, 4).unwrap();
        let mut e = DVector::zeros(op.num_local_dofs());
        e[7] = 1.0;
        assert_eq!(op.apply(&e).unwrap(), op.matrix.column(7).into_owned());
        assert!(matches!(
            op.apply(&DVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn x_squared_has_weak_laplacian_two() {
        for mesh in [build_triangular(3), build_polygonal(3).unwrap()] {
            let wf = interpolate_qh(|p| p.x * p.x, |p| Vector2::new(2.0 * p.x, 0.0), &mesh, 2).unwrap();
            let err = weak_laplacian_l2_error(&mesh, &wf, 6, |_| 2.0);
            assert!(err < 1e-11, "{err:e}");
        }
    }

    #[test]
    fn constant_interpolates_trivially() {
        let mesh = build_polygonal(2).unwrap();
        let wf = interpolate_qh(|_| 1.0, |_| Vector2::zeros(), &mesh, 3).unwrap();
        for c in 0..mesh.num_cells() {
            let v0 = wf.v0(c);
            assert!((v0[0] - 1.0).abs() < 1e-13 && v0[1..].iter().all(|x| x.abs() < 1e-12));
        }
        for e in 0..mesh.num_edges() {
            let l = mesh.edges[e].length;
            // Constant 1 in the orthonormal basis is sqrt(L) chi_0.
            assert!((wf.vb(e)[0] - l.sqrt()).abs() < 1e-13);
            assert!(wf.vn(e).iter().all(|x| x.abs() < 1e-15));
        }
    }

    #[test]
    fn single_trace_column_matches_direct_quadrature() {
        // v0 = 0, vb = 1 on one edge: the weak Laplacian solves
        // M_j c = -<1, ∇ψ·n>_e, assembled here independently.
        let mesh = build_triangular(2);
        let (cell, local, k, j) = (2, 1, 2, 4);
        let op = element_weak_laplacian(&mesh, cell, k, j).unwrap();
        let ce = mesh.cells[cell].edges[local];
        let [a, b] = mesh.edge_points(ce.edge);
        let len = (b - a).norm();

        let mut dofs = DVector::zeros(op.num_local_dofs());
        // Constant 1 is sqrt(L) times the first orthonormal edge function.
        dofs[dim_p(k) + 2 * k * local] = len.sqrt();
        let got = op.apply(&dofs).unwrap();

        let geom = CellGeometry::of_cell(&mesh, cell);
        let bj = geom.basis(j);
        let n = mesh.outward_normal(cell, local);
        let (gx, gw) = crate::polyspace::gauss_legendre(8);
        let mut r = DVector::zeros(bj.dim());
        for (t, w) in gx.iter().zip(&gw) {
            let p = a + (b - a) * (0.5 * (t + 1.0));
            for (m, g) in bj.gradients(&p).iter().enumerate() {
                r[m] -= 0.5 * len * w * g.dot(&n);
            }
        }
        let tri = crate::polyspace::reference_triangle_rule(2 * j).unwrap();
        let v = &geom.vertices;
        let jac = ((v[1] - v[0]).perp(&(v[2] - v[0]))).abs();
        let mut mass = DMatrix::zeros(bj.dim(), bj.dim());
        for (q, w) in tri.points.iter().zip(&tri.weights) {
            let p = v[0] + (v[1] - v[0]) * q.x + (v[2] - v[0]) * q.y;
            let vals = bj.values(&p);
            for i in 0..bj.dim() {
                for m in 0..bj.dim() {
                    mass[(i, m)] += w * jac * vals[i] * vals[m];
                }
            }
        }
        let expected = mass.lu().solve(&r).unwrap();
        let rule = geom.rule(2 * j).unwrap();
        let diff = rule.integrate(|p| (op.basis.evaluate(got.as_slice(), p) - bj.evaluate(expected.as_slice(), p)).powi(2));
        let size = rule.integrate(|p| bj.evaluate(expected.as_slice(), p).powi(2));
        assert!(diff.sqrt() < 1e-9 * size.sqrt(), "{diff} vs {size}");
    }

    #[test]
    fn flipping_edge_normal_with_flux_is_invariant() {
        let mesh = build_polygonal(3).unwrap();
        let (k, j) = (3, 7);
        let wf = interpolate_qh(
            |p| (p.x * 2.0).sin() * p.y.exp(),
            |p| Vector2::new(2.0 * (p.x * 2.0).cos() * p.y.exp(), (p.x * 2.0).sin() * p.y.exp()),
            &mesh,
            k,
        )
        .unwrap();
        let e = (0..mesh.num_edges()).find(|&e| !mesh.edges[e].is_boundary()).unwrap();
        let (c1, c2) = (mesh.edges[e].cells.0, mesh.edges[e].cells.1.unwrap());

        let mut flipped = mesh.clone();
        flipped.edges[e].normal = -flipped.edges[e].normal;
        for c in [c1, c2] {
            for ce in flipped.cells[c].edges.iter_mut().filter(|ce| ce.edge == e) {
                ce.sign = -ce.sign;
            }
        }
        let mut wf2 = wf.clone();
        wf2.vn_mut(e).iter_mut().for_each(|x| *x = -*x);

        for c in [c1, c2] {
            let a = element_weak_laplacian(&mesh, c, k, j).unwrap().apply(&wf.local_dofs(&mesh, c)).unwrap();
            let b = element_weak_laplacian(&flipped, c, k, j)
                .unwrap()
                .apply(&wf2.local_dofs(&flipped, c))
                .unwrap();
            assert!((a - &b).amax() <= 1e-12 * b.amax());
        }
    }

    #[test]
    fn q0_projection_error_rate() {
        let u = |p: &Point2<f64>| (std::f64::consts::PI * p.x).sin() * (std::f64::consts::PI * p.y).sin();
        let err = |n: usize| {
            let mesh = build_triangular(n);
            let mut total = 0.0;
            for c in 0..mesh.num_cells() {
                let geom = CellGeometry::of_cell(&mesh, c);
                let coeffs = project_cell(u, &geom, 2).unwrap();
                let b = geom.basis(2);
                total += geom
                    .rule(10)
                    .unwrap()
                    .integrate(|p| (u(p) - b.evaluate(coeffs.as_slice(), p)).powi(2));
            }
            total.sqrt()
        };
        let rate = (err(4) / err(8)).log2();
        assert!((rate - 3.0).abs() < 0.2, "rate {rate}");
    }

    #[test]
    fn stiffness_is_symmetric_psd() {
        let mesh = build_polygonal(2).unwrap();
        let op = element_weak_laplacian(&mesh, 4, 2, 6).unwrap();
        let s = op.stiffness();
        assert!((&s - s.transpose()).amax() < 1e-12 * s.amax());
        let eig = s.symmetric_eigenvalues();
        assert!(eig.min() > -1e-10 * eig.max());
    }

    #[test]
    fn rejects_bad_degrees() {
        let mesh = build_triangular(1);
        assert!(element_weak_laplacian(&mesh, 0, 2, 2).is_err());
        assert!(element_weak_laplacian(&mesh, 0, 1, 3).is_err());
    }
}
