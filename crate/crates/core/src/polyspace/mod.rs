//! Polynomial spaces on cells and edges, quadrature and L² projections.

mod basis;
mod quadrature;

use nalgebra::{DMatrix, DVector, Point2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub use basis::{dim_p, CellBasis, EdgeBasis};
pub use quadrature::{
    gauss_legendre, quad_cell, quad_edge, reference_triangle_rule, EdgeRule, QuadratureRule, MAX_DEGREE,
};

/// Geometry of one convex cell as seen by the polynomial spaces.
#[derive(Clone, Debug)]
pub struct CellGeometry {
    pub vertices: Vec<Point2<f64>>,
    pub centroid: Point2<f64>,
    pub diameter: f64,
    pub area: f64,
}

impl CellGeometry {
    pub fn new(vertices: Vec<Point2<f64>>) -> Self {
        let (area, centroid) = crate::mesh::area_centroid(&vertices);
        let diameter = crate::mesh::diameter(&vertices);
        CellGeometry {
            vertices,
            centroid,
            diameter,
            area,
        }
    }

    pub fn of_cell(mesh: &Mesh, cell: usize) -> Self {
        let c = &mesh.cells[cell];
        CellGeometry {
            vertices: mesh.cell_points(cell),
            centroid: c.centroid,
            diameter: c.diameter,
            area: c.area,
        }
    }

    /// Scaled monomial basis of `P_m` on this cell.
    pub fn basis(&self, m: usize) -> CellBasis {
        CellBasis::new(m, self.centroid, self.diameter)
    }

    pub fn rule(&self, degree: usize) -> Result<QuadratureRule> {
        quad_cell(&self.vertices, degree)
    }
}

/// Cholesky factor of a symmetric positive definite matrix with symmetric
/// diagonal equilibration.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    scale: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.ncols(),
            });
        }
        let mut scale = DVector::zeros(n);
        for i in 0..n {
            let d = m[(i, i)];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SingularMatrix(format!("diagonal entry {i} is {d:e}")));
            }
            scale[i] = 1.0 / d.sqrt();
        }
        let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * scale[i] * scale[j]);
        let chol = scaled
            .cholesky()
            .ok_or_else(|| Error::SingularMatrix("Cholesky factorization failed".into()))?;
        Ok(SpdFactor { scale, chol })
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut b = rhs.clone();
        for (i, mut row) in b.row_iter_mut().enumerate() {
            row *= self.scale[i];
        }
        let mut x = self.chol.solve(&b);
        for (i, mut row) in x.row_iter_mut().enumerate() {
            row *= self.scale[i];
        }
        x
    }

    pub fn solve_vector(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let x = self.solve(&DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()));
        DVector::from_column_slice(x.as_slice())
    }
}

/// Orthonormal basis of `P_m(T)`, `ψ̃ = R^{-T} φ`, where `φ` are the scaled
/// monomials and `R` the triangular factor of a QR factorization of their
/// quadrature-weighted Vandermonde matrix. Unlike a Cholesky factor of the
/// mass matrix this does not square the monomial condition number.
#[derive(Clone, Debug)]
pub struct OrthoCellBasis {
    pub monomials: CellBasis,
    /// Upper-triangular QR factor.
    r: DMatrix<f64>,
}

impl OrthoCellBasis {
    /// `rule` must be exact to degree `2 m` on the cell.
    pub fn new(monomials: CellBasis, rule: &QuadratureRule) -> Result<Self> {
        let n = monomials.dim();
        if rule.len() < n || rule.degree < 2 * monomials.degree {
            return Err(Error::SingularMatrix(format!(
                "quadrature of degree {} with {} points cannot orthonormalize P_{}",
                rule.degree,
                rule.len(),
                monomials.degree
            )));
        }
        let mut a = DMatrix::zeros(rule.len(), n);
        for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let sw = w.sqrt();
            for (i, v) in monomials.values(p).into_iter().enumerate() {
                a[(q, i)] = sw * v;
            }
        }
        let r = a.qr().r();
        if (0..n).any(|i| r[(i, i)] == 0.0 || !r[(i, i)].is_finite()) {
            return Err(Error::SingularMatrix("rank-deficient Vandermonde matrix".into()));
        }
        Ok(OrthoCellBasis { monomials, r })
    }

    pub fn degree(&self) -> usize {
        self.monomials.degree
    }

    pub fn dim(&self) -> usize {
        self.monomials.dim()
    }

    fn transform(&self, v: DVector<f64>) -> DVector<f64> {
        self.r
            .tr_solve_upper_triangular(&v)
            .expect("QR factor has a nonzero diagonal")
    }

    pub fn values(&self, p: &Point2<f64>) -> Vec<f64> {
        self.transform(DVector::from_vec(self.monomials.values(p))).data.into()
    }

    pub fn gradients(&self, p: &Point2<f64>) -> Vec<Vector2<f64>> {
        let g = self.monomials.gradients(p);
        let gx = self.transform(DVector::from_iterator(g.len(), g.iter().map(|v| v.x)));
        let gy = self.transform(DVector::from_iterator(g.len(), g.iter().map(|v| v.y)));
        gx.iter().zip(gy.iter()).map(|(x, y)| Vector2::new(*x, *y)).collect()
    }

    pub fn evaluate(&self, coeffs: &[f64], p: &Point2<f64>) -> f64 {
        self.values(p).iter().zip(coeffs).map(|(v, c)| v * c).sum()
    }

    /// Coefficients of the same polynomial in the scaled monomials.
    pub fn to_monomial(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        self.r
            .solve_upper_triangular(coeffs)
            .expect("QR factor has a nonzero diagonal")
    }
}

/// 2-norm condition number of `D^{-1/2} M D^{-1/2}`, `D = diag(M)`.
pub fn equilibrated_condition(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let d: Vec<f64> = (0..n).map(|i| 1.0 / m[(i, i)].sqrt()).collect();
    let eig = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * d[i] * d[j]).symmetric_eigenvalues();
    eig.max() / eig.min()
}

/// `(phi_i, phi_j)_T` with the given rule.
pub fn mass_matrix(basis: &CellBasis, rule: &QuadratureRule) -> DMatrix<f64> {
    let n = basis.dim();
    let mut m = DMatrix::zeros(n, n);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let v = basis.values(p);
        for j in 0..n {
            let wv = w * v[j];
            for i in j..n {
                m[(i, j)] += wv * v[i];
            }
        }
    }
    m.fill_upper_triangle_with_lower_triangle();
    m
}

/// Mass matrix of `CellBasis(m)` on a cell, integrated exactly.
pub fn mass_matrix_cell(cell: &CellGeometry, m: usize) -> Result<DMatrix<f64>> {
    Ok(mass_matrix(&cell.basis(m), &cell.rule(2 * m)?))
}

/// Mass matrix of the orthonormal edge basis; the identity up to rounding.
pub fn mass_matrix_edge(a: Point2<f64>, b: Point2<f64>, m: usize) -> DMatrix<f64> {
    let basis = EdgeBasis::new(m, a, b);
    let rule = quad_edge(a, b, 2 * m);
    let n = basis.dim();
    let mut mm = DMatrix::zeros(n, n);
    for (s, w) in rule.params.iter().zip(&rule.weights) {
        let v = basis.values_at_param(*s);
        for i in 0..n {
            for j in 0..n {
                mm[(i, j)] += w * v[i] * v[j];
            }
        }
    }
    mm
}

/// L² projection onto `basis` using `rule` for both the mass matrix and the
/// load.
pub fn project_cell_with(
    f: impl Fn(&Point2<f64>) -> f64,
    basis: &CellBasis,
    rule: &QuadratureRule,
) -> Result<DVector<f64>> {
    let mass = mass_matrix(basis, rule);
    let mut rhs = DVector::zeros(basis.dim());
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let fw = w * f(p);
        for (r, v) in rhs.iter_mut().zip(basis.values(p)) {
            *r += fw * v;
        }
    }
    Ok(SpdFactor::new(&mass)?.solve_vector(&rhs))
}

/// L² projection of `f` onto `P_m(T)` in the cell's scaled monomial basis.
pub fn project_cell(f: impl Fn(&Point2<f64>) -> f64, cell: &CellGeometry, m: usize) -> Result<DVector<f64>> {
    project_cell_with(f, &cell.basis(m), &cell.rule(2 * m + 2)?)
}

/// L² projection onto the orthonormal edge basis: plain inner products.
pub fn project_edge_with(g: impl Fn(&Point2<f64>) -> f64, basis: &EdgeBasis, rule: &EdgeRule) -> DVector<f64> {
    let mut c = DVector::zeros(basis.dim());
    for ((p, s), w) in rule.points.iter().zip(&rule.params).zip(&rule.weights) {
        let gw = w * g(p);
        for (ci, v) in c.iter_mut().zip(basis.values_at_param(*s)) {
            *ci += gw * v;
        }
    }
    c
}

/// L² projection of `g` onto `P_m(e)` for the segment `a -> b`.
pub fn project_edge(g: impl Fn(&Point2<f64>) -> f64, a: Point2<f64>, b: Point2<f64>, m: usize) -> DVector<f64> {
    project_edge_with(g, &EdgeBasis::new(m, a, b), &quad_edge(a, b, 2 * m + 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_triangular;

    fn triangle() -> CellGeometry {
        CellGeometry::new(vec![
            Point2::new(0.1, 0.2),
            Point2::new(0.6, 0.25),
            Point2::new(0.3, 0.7),
        ])
    }

    fn hexagon() -> CellGeometry {
        CellGeometry::new(
            (0..6)
                .map(|i| {
                    let t = std::f64::consts::PI / 3.0 * i as f64;
                    Point2::new(0.5 + 0.2 * t.cos(), 0.4 + 0.2 * t.sin())
                })
                .collect(),
        )
    }

    fn l2_diff(cell: &CellGeometry, m: usize, c: &DVector<f64>, f: impl Fn(&Point2<f64>) -> f64) -> f64 {
        let b = cell.basis(m);
        let rule = cell.rule(2 * m + 6).unwrap();
        rule.integrate(|p| (b.evaluate(c.as_slice(), p) - f(p)).powi(2)).sqrt()
    }

    #[test]
    fn ortho_basis_is_orthonormal() {
        let cell = hexagon();
        let rule = cell.rule(16).unwrap();
        let ob = OrthoCellBasis::new(cell.basis(7), &rule).unwrap();
        let mut m = DMatrix::zeros(ob.dim(), ob.dim());
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let v = DVector::from_vec(ob.values(p));
            m.ger(*w, &v, &v, 1.0);
        }
        assert!((m - DMatrix::identity(ob.dim(), ob.dim())).amax() < 1e-12);
        // Round trip through the monomial coefficients.
        let c = DVector::from_fn(ob.dim(), |i, _| (i as f64 * 0.37).sin());
        let mono = ob.to_monomial(&c);
        let p = Point2::new(0.55, 0.33);
        let direct = ob.evaluate(c.as_slice(), &p);
        assert!((direct - cell.basis(7).evaluate(mono.as_slice(), &p)).abs() < 1e-10 * c.norm());
        assert!(OrthoCellBasis::new(cell.basis(7), &cell.rule(4).unwrap()).is_err());
    }

    #[test]
    fn p0_mass_is_area() {
        let t = triangle();
        let m = mass_matrix_cell(&t, 0).unwrap();
        assert!((m[(0, 0)] - t.area).abs() < 1e-15);
    }

    #[test]
    fn polynomials_reproduced() {
        let f = |p: &Point2<f64>| 1.0 - 2.0 * p.x + p.x * p.y * p.y + 3.0 * p.y.powi(3);
        for cell in [triangle(), hexagon()] {
            let c = project_cell(f, &cell, 3).unwrap();
            assert!(l2_diff(&cell, 3, &c, f) < 1e-12);
        }
    }

    #[test]
    fn p0_projection_is_mean() {
        let t = triangle();
        let c = project_cell(|p| p.x, &t, 0).unwrap();
        assert!((c[0] - t.centroid.x).abs() < 1e-14);
    }

    #[test]
    fn projection_residual_orthogonal() {
        let f = |p: &Point2<f64>| (3.0 * p.x).sin() * (2.0 * p.y).exp();
        for cell in [triangle(), hexagon()] {
            let m = 3;
            let b = cell.basis(m);
            let rule = cell.rule(2 * m + 2).unwrap();
            let c = project_cell_with(f, &b, &rule).unwrap();
            for i in 0..b.dim() {
                let r = rule.integrate(|p| (f(p) - b.evaluate(c.as_slice(), p)) * b.values(p)[i]);
                assert!(r.abs() < 1e-12, "basis {i}: {r:e}");
            }
            // Idempotence.
            let again = project_cell_with(|p| b.evaluate(c.as_slice(), p), &b, &rule).unwrap();
            assert!((again - &c).amax() < 1e-12);
        }
    }

    #[test]
    fn edge_projection() {
        let (a, b) = (Point2::new(0.0, 0.5), Point2::new(0.75, 0.5));
        let e = EdgeBasis::new(0, a, b);
        let c = project_edge(|p| e.param(p), a, b, 0);
        assert!((e.evaluate(c.as_slice(), &Point2::new(0.2, 0.5)) - 0.375).abs() < 1e-15);

        let g = |p: &Point2<f64>| 1.0 + p.x - 2.0 * p.x * p.x;
        let c = project_edge(g, a, b, 2);
        let eb = EdgeBasis::new(2, a, b);
        for s in [0.0, 0.3, 0.75] {
            let p = Point2::new(s, 0.5);
            assert!((eb.evaluate(c.as_slice(), &p) - g(&p)).abs() < 1e-14);
        }
    }

    #[test]
    fn edge_mass_identity() {
        let m = mass_matrix_edge(Point2::new(0.1, 0.1), Point2::new(0.4, 0.9), 6);
        assert!((m - DMatrix::identity(7, 7)).amax() < 1e-12);
    }

    #[test]
    fn degree_four_mass_conditioning() {
        // Raw h_T-scaled monomials give ~1e8; the equilibrated matrix is the
        // one SpdFactor factors.
        let mesh = build_triangular(4);
        let mut worst: f64 = 0.0;
        for c in 0..mesh.num_cells() {
            let m = mass_matrix_cell(&CellGeometry::of_cell(&mesh, c), 4).unwrap();
            worst = worst.max(equilibrated_condition(&m));
        }
        assert!(worst < 1e5, "condition number {worst:e}");
    }

    #[test]
    fn conditioning_stable_under_refinement() {
        let cond = |n: usize| {
            let mesh = build_triangular(n);
            let m = mass_matrix_cell(&CellGeometry::of_cell(&mesh, 0), 4).unwrap();
            equilibrated_condition(&m)
        };
        let (c4, c8) = (cond(4), cond(8));
        assert!((c8 / c4 - 1.0).abs() < 0.1, "{c4:e} vs {c8:e}");
    }
}
