//! Error measures and discrete norms.
//!
//! For `v = u - u_h` with smooth `u` the trace parts of `u` cancel in the
//! edge terms of `‖·‖_{2,h}`: `Q_b(v0 - vb) = u_hb - Q_b u_h0` and
//! `(∇v0 - vn n_e)·n = σ u_hn - ∇u_h0·n`, so only `Δu` and `u` itself are
//! evaluated analytically.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ExactSolution;
use crate::mesh::Mesh;
use crate::polyspace::{quad_edge, CellBasis, CellGeometry, EdgeBasis};
use crate::weakop::{cell_quadrature_degree, element_weak_laplacian, WeakFunction};

/// Cell quadrature degree for integrands involving the exact solution.
pub fn error_quadrature_degree(k: usize) -> usize {
    2 * k + 6
}

/// Sums per-cell values in cell order, whatever the evaluation order.
fn sum_cells(mesh: &Mesh, f: impl Fn(usize) -> Result<f64> + Sync + Send) -> Result<f64> {
    let parts = (0..mesh.num_cells()).into_par_iter().map(f).collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

fn check(mesh: &Mesh, v: &WeakFunction) -> Result<()> {
    let expected = mesh.num_cells() * v.cell_dim();
    if v.interior.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: v.interior.len(),
        });
    }
    let expected = mesh.num_edges() * v.edge_dim();
    if v.trace.len() != expected || v.flux.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: v.trace.len().min(v.flux.len()),
        });
    }
    Ok(())
}

/// `|||u - u_h||| = (Σ_T ‖Π_j Δu - Δw u_h‖²_T)^{1/2}`.
pub fn error_triple(exact: &dyn ExactSolution, uh: &WeakFunction, mesh: &Mesh, j: usize) -> Result<f64> {
    check(mesh, uh)?;
    let sq = sum_cells(mesh, |c| {
        let op = element_weak_laplacian(mesh, c, uh.k, j)?;
        let wl = op.apply(&uh.local_dofs(mesh, c))?;
        let rule = CellGeometry::of_cell(mesh, c).rule(cell_quadrature_degree(j))?;
        let mut load = DVector::zeros(op.basis.dim());
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let lw = w * exact.laplacian(p);
            for (m, psi) in op.basis.values(p).iter().enumerate() {
                load[m] += lw * psi;
            }
        }
        // The basis is orthonormal up to rounding; solve with its mass anyway.
        let proj = op
            .mass
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularMatrix(format!("P_{j} mass matrix of cell {c}")))?
            .solve(&load);
        let d = proj - wl;
        Ok(d.dot(&(&op.mass * &d)))
    })?;
    Ok(sq.sqrt())
}

/// `|||v||| = (Σ_T ‖Δw v‖²_T)^{1/2}`.
pub fn triple_norm(v: &WeakFunction, mesh: &Mesh, j: usize) -> Result<f64> {
    check(mesh, v)?;
    let sq = sum_cells(mesh, |c| {
        let op = element_weak_laplacian(mesh, c, v.k, j)?;
        let wl = op.apply(&v.local_dofs(mesh, c))?;
        Ok(wl.dot(&(&op.mass * &wl)))
    })?;
    Ok(sq.sqrt())
}

/// Edge part of `‖·‖²_{2,h}` on one cell:
/// `h_T^-3 ‖vb - Q_b v0‖² + h_T^-1 ‖σ vn - ∇v0·n‖²` summed over its edges.
fn edge_terms(mesh: &Mesh, v: &WeakFunction, cell: usize, basis: &CellBasis, h: f64) -> f64 {
    let k = v.k;
    let v0 = v.v0(cell);
    let mut value_sq = 0.0;
    let mut flux_sq = 0.0;
    for (local, ce) in mesh.cells[cell].edges.iter().enumerate() {
        let [a, b] = mesh.edge_points(ce.edge);
        let eb = EdgeBasis::new(k - 1, a, b);
        let rule = quad_edge(a, b, 2 * k);
        let n = mesh.outward_normal(cell, local);
        let sigma = f64::from(ce.sign);
        // Q_b v0 in the orthonormal edge basis.
        let mut q = vec![0.0; k];
        for ((p, s), w) in rule.points.iter().zip(&rule.params).zip(&rule.weights) {
            let val = basis.evaluate(v0, p);
            for (qi, chi) in q.iter_mut().zip(eb.values_at_param(*s)) {
                *qi += w * val * chi;
            }
        }
        value_sq += v.vb(ce.edge).iter().zip(&q).map(|(b, q)| (b - q).powi(2)).sum::<f64>();
        let vn = v.vn(ce.edge);
        for ((p, s), w) in rule.points.iter().zip(&rule.params).zip(&rule.weights) {
            let chi = eb.values_at_param(*s);
            let flux: f64 = vn.iter().zip(&chi).map(|(c, x)| c * x).sum();
            let jump = sigma * flux - basis.evaluate_gradient(v0, p).dot(&n);
            flux_sq += w * jump * jump;
        }
    }
    value_sq / h.powi(3) + flux_sq / h
}

/// `‖v‖_{2,h}` for `v` in `V_h`.
pub fn norm_2h(v: &WeakFunction, mesh: &Mesh) -> Result<f64> {
    check(mesh, v)?;
    let sq = sum_cells(mesh, |c| {
        let geom = CellGeometry::of_cell(mesh, c);
        let basis = geom.basis(v.k);
        let rule = geom.rule(2 * v.k)?;
        let lap = rule.integrate(|p| basis.evaluate_laplacian(v.v0(c), p).powi(2));
        Ok(lap + edge_terms(mesh, v, c, &basis, geom.diameter))
    })?;
    Ok(sq.sqrt())
}

/// `‖u - u_h‖_{2,h}`.
pub fn error_2h(exact: &dyn ExactSolution, uh: &WeakFunction, mesh: &Mesh) -> Result<f64> {
    check(mesh, uh)?;
    let sq = sum_cells(mesh, |c| {
        let geom = CellGeometry::of_cell(mesh, c);
        let basis = geom.basis(uh.k);
        let rule = geom.rule(error_quadrature_degree(uh.k))?;
        let lap = rule.integrate(|p| (exact.laplacian(p) - basis.evaluate_laplacian(uh.v0(c), p)).powi(2));
        Ok(lap + edge_terms(mesh, uh, c, &basis, geom.diameter))
    })?;
    Ok(sq.sqrt())
}

/// `‖u - u_h0‖_{L²}`.
pub fn error_l2(exact: &dyn ExactSolution, uh: &WeakFunction, mesh: &Mesh) -> Result<f64> {
    check(mesh, uh)?;
    let sq = sum_cells(mesh, |c| {
        let geom = CellGeometry::of_cell(mesh, c);
        let basis = geom.basis(uh.k);
        let rule = geom.rule(error_quadrature_degree(uh.k))?;
        Ok(rule.integrate(|p| (exact.value(p) - basis.evaluate(uh.v0(c), p)).powi(2)))
    })?;
    Ok(sq.sqrt())
}

/// `log(e_{i-1}/e_i) / log(h_{i-1}/h_i)`; the first entry, and any entry
/// touching a non-positive or non-finite value, is `None`.
pub fn convergence_rates(errors: &[f64], hs: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != hs.len() {
        return Err(Error::DimensionMismatch {
            expected: hs.len(),
            found: errors.len(),
        });
    }
    let ok = |x: f64| x > 0.0 && x.is_finite();
    let mut rates = vec![None];
    for i in 1..errors.len() {
        let (e0, e1, h0, h1) = (errors[i - 1], errors[i], hs[i - 1], hs[i]);
        rates.push((ok(e0) && ok(e1) && ok(h0) && ok(h1) && h0 != h1).then(|| (e0 / e1).ln() / (h0 / h1).ln()));
    }
    rates.truncate(errors.len());
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Example2;
    use crate::mesh::{build_polygonal, build_triangular};
    use crate::weakop::interpolate_qh;
    use nalgebra::{Point2, Vector2};

    /// `u = 1 + x - 2y + 3x² - xy + 0.5y²`, so `Δu = 7`.
    struct Quadratic;

    impl ExactSolution for Quadratic {
        fn value(&self, p: &Point2<f64>) -> f64 {
            1.0 + p.x - 2.0 * p.y + 3.0 * p.x * p.x - p.x * p.y + 0.5 * p.y * p.y
        }
        fn gradient(&self, p: &Point2<f64>) -> Vector2<f64> {
            Vector2::new(1.0 + 6.0 * p.x - p.y, -2.0 - p.x + p.y)
        }
        fn laplacian(&self, _: &Point2<f64>) -> f64 {
            7.0
        }
        fn source(&self, _: &Point2<f64>) -> f64 {
            0.0
        }
    }

    fn qh(sol: &dyn ExactSolution, mesh: &Mesh, k: usize) -> WeakFunction {
        interpolate_qh(|p| sol.value(p), |p| sol.gradient(p), mesh, k).unwrap()
    }

    #[test]
    fn errors_vanish_on_interpolated_polynomials() {
        for (mesh, j) in [(build_triangular(3), 4), (build_polygonal(3).unwrap(), 6)] {
            let uh = qh(&Quadratic, &mesh, 2);
            assert!(error_triple(&Quadratic, &uh, &mesh, j).unwrap() < 1e-9 * 7.0);
            assert!(error_2h(&Quadratic, &uh, &mesh).unwrap() < 1e-9);
            assert!(error_l2(&Quadratic, &uh, &mesh).unwrap() < 1e-12);
        }
    }

    #[test]
    fn zero_solution_gives_projected_laplacian() {
        let mesh = build_triangular(4);
        let zero = WeakFunction::zeros(&mesh, 2);
        let e = error_triple(&Example2, &zero, &mesh, 4).unwrap();
        // Independent: ‖Δu‖ over the square is 2π² · 1/2.
        let full = 2.0 * std::f64::consts::PI.powi(2) * 0.5;
        assert!(e <= full * (1.0 + 1e-12), "Bessel: {e} > {full}");
        assert!(e > 0.99 * full);
        let l2 = error_l2(&Example2, &zero, &mesh).unwrap();
        assert!((l2 - 0.5).abs() < 1e-10);
    }

    #[test]
    fn l2_error_is_homogeneous() {
        struct Scaled(f64);
        impl ExactSolution for Scaled {
            fn value(&self, p: &Point2<f64>) -> f64 {
                self.0 * Example2.value(p)
            }
            fn gradient(&self, p: &Point2<f64>) -> Vector2<f64> {
                self.0 * Example2.gradient(p)
            }
            fn laplacian(&self, p: &Point2<f64>) -> f64 {
                self.0 * Example2.laplacian(p)
            }
            fn source(&self, p: &Point2<f64>) -> f64 {
                self.0 * Example2.source(p)
            }
        }
        let mesh = build_polygonal(2).unwrap();
        let uh = qh(&Quadratic, &mesh, 2);
        let e1 = error_l2(&Scaled(1.0), &uh, &mesh).unwrap();
        let e2 = error_l2(&Scaled(2.0), &uh.scaled(2.0), &mesh).unwrap();
        assert!((e2 - 2.0 * e1).abs() < 1e-13 * e1);
        let t1 = error_2h(&Scaled(1.0), &uh, &mesh).unwrap();
        let t2 = error_2h(&Scaled(2.0), &uh.scaled(2.0), &mesh).unwrap();
        assert!((t2 - 2.0 * t1).abs() < 1e-12 * t1);
    }

    #[test]
    fn discrete_norms_of_interpolant() {
        // For v = Q_h u with u quadratic, Δw v = Δu = 7 and every jump vanishes.
        let mesh = build_triangular(2);
        let v = qh(&Quadratic, &mesh, 2);
        assert!((triple_norm(&v, &mesh, 4).unwrap() - 7.0).abs() < 1e-9);
        assert!((norm_2h(&v, &mesh).unwrap() - 7.0).abs() < 1e-9);
    }

    #[test]
    fn mismatched_function_is_rejected() {
        let mesh = build_triangular(2);
        let v = WeakFunction::zeros(&build_triangular(1), 2);
        assert!(matches!(triple_norm(&v, &mesh, 4), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rates() {
        let r = convergence_rates(&[4.0, 1.0], &[0.5, 0.25]).unwrap();
        assert_eq!(r, vec![None, Some(2.0)]);
        let r = convergence_rates(&[9.5700e-3, 4.7707e-3], &[1.0 / 8.0, 1.0 / 16.0]).unwrap();
        assert!((r[1].unwrap() - 1.00).abs() < 0.01);
        let r = convergence_rates(&[3.0, 3.0, 0.0, 1.0], &[1.0, 0.5, 0.25, 0.125]).unwrap();
        assert_eq!(r, vec![None, Some(0.0), None, None]);
        assert!(convergence_rates(&[1.0], &[1.0, 2.0]).is_err());
        assert_eq!(convergence_rates(&[], &[]).unwrap(), Vec::<Option<f64>>::new());
    }
}
