use nalgebra::{Point2, Vector2};

use super::quadrature::legendre_with_derivative;

/// Dimension of `P_m` in two variables.
pub fn dim_p(m: usize) -> usize {
    (m + 1) * (m + 2) / 2
}

/// Scaled monomials `((x - x_T) / h_T)^a ((y - y_T) / h_T)^b`, `a + b <= m`,
/// in graded lexicographic order (`1, X, Y, X^2, XY, Y^2, ...`).
#[derive(Clone, Debug)]
pub struct CellBasis {
    pub degree: usize,
    pub center: Point2<f64>,
    pub scale: f64,
    exponents: Vec<(usize, usize)>,
}

impl CellBasis {
    pub fn new(degree: usize, center: Point2<f64>, scale: f64) -> Self {
        let exponents = (0..=degree)
            .flat_map(|d| (0..=d).map(move |i| (d - i, i)))
            .collect();
        CellBasis {
            degree,
            center,
            scale,
            exponents,
        }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exponents
    }

    fn powers(&self, p: &Point2<f64>) -> (Vec<f64>, Vec<f64>) {
        let x = (p.x - self.center.x) / self.scale;
        let y = (p.y - self.center.y) / self.scale;
        let mut px = vec![1.0; self.degree + 1];
        let mut py = vec![1.0; self.degree + 1];
        for i in 1..=self.degree {
            px[i] = px[i - 1] * x;
            py[i] = py[i - 1] * y;
        }
        (px, py)
    }

    pub fn values(&self, p: &Point2<f64>) -> Vec<f64> {
        let (px, py) = self.powers(p);
        self.exponents.iter().map(|&(a, b)| px[a] * py[b]).collect()
    }

    pub fn gradients(&self, p: &Point2<f64>) -> Vec<Vector2<f64>> {
        let (px, py) = self.powers(p);
        let inv = 1.0 / self.scale;
        self.exponents
            .iter()
            .map(|&(a, b)| {
                let dx = if a > 0 { a as f64 * px[a - 1] * py[b] } else { 0.0 };
                let dy = if b > 0 { b as f64 * px[a] * py[b - 1] } else { 0.0 };
                Vector2::new(dx * inv, dy * inv)
            })
            .collect()
    }

    pub fn laplacians(&self, p: &Point2<f64>) -> Vec<f64> {
        let (px, py) = self.powers(p);
        let inv2 = 1.0 / (self.scale * self.scale);
        self.exponents
            .iter()
            .map(|&(a, b)| {
                let xx = if a > 1 { (a * (a - 1)) as f64 * px[a - 2] * py[b] } else { 0.0 };
                let yy = if b > 1 { (b * (b - 1)) as f64 * px[a] * py[b - 2] } else { 0.0 };
                (xx + yy) * inv2
            })
            .collect()
    }

    /// Evaluates the expansion `sum_i c_i phi_i` at `p`.
    pub fn evaluate(&self, coeffs: &[f64], p: &Point2<f64>) -> f64 {
        self.values(p).iter().zip(coeffs).map(|(v, c)| v * c).sum()
    }

    pub fn evaluate_gradient(&self, coeffs: &[f64], p: &Point2<f64>) -> Vector2<f64> {
        self.gradients(p)
            .iter()
            .zip(coeffs)
            .fold(Vector2::zeros(), |acc, (g, c)| acc + g * *c)
    }

    pub fn evaluate_laplacian(&self, coeffs: &[f64], p: &Point2<f64>) -> f64 {
        self.laplacians(p).iter().zip(coeffs).map(|(v, c)| v * c).sum()
    }
}

/// Legendre polynomials in arclength, orthonormal in `L^2(e)`.
#[derive(Clone, Debug)]
pub struct EdgeBasis {
    pub degree: usize,
    pub origin: Point2<f64>,
    pub tangent: Vector2<f64>,
    pub length: f64,
}

impl EdgeBasis {
    /// Basis on the segment `a -> b`; arclength is measured from `a`.
    pub fn new(degree: usize, a: Point2<f64>, b: Point2<f64>) -> Self {
        let d = b - a;
        let length = d.norm();
        EdgeBasis {
            degree,
            origin: a,
            tangent: d / length,
            length,
        }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn param(&self, p: &Point2<f64>) -> f64 {
        (p - self.origin).dot(&self.tangent)
    }

    pub fn values_at_param(&self, s: f64) -> Vec<f64> {
        let t = 2.0 * s / self.length - 1.0;
        (0..=self.degree)
            .map(|m| ((2 * m + 1) as f64 / self.length).sqrt() * legendre_with_derivative(m, t).0)
            .collect()
    }

    pub fn values(&self, p: &Point2<f64>) -> Vec<f64> {
        self.values_at_param(self.param(p))
    }

    pub fn evaluate(&self, coeffs: &[f64], p: &Point2<f64>) -> f64 {
        self.values(p).iter().zip(coeffs).map(|(v, c)| v * c).sum()
    }
}
