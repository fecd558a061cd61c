use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};

/// Highest polynomial degree the cell and edge rules are built for.
pub const MAX_DEGREE: usize = 48;

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Point2<f64>>,
    pub weights: Vec<f64>,
    /// Exactness degree.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Point2<f64>) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// Gauss rule on a segment; `params` holds the arclength of each point from
/// the first endpoint.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<Point2<f64>>,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Point2<f64>) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// `n`-point Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
pub(crate) fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Barycentric orbits of a fully symmetric triangle rule.
enum Orbit {
    Centroid(f64),
    /// `(a, a, 1 - 2a)` and permutations.
    Three(f64, f64),
}

/// Symmetric rules of degree 1..=5 on the reference triangle, weights summing
/// to one.
fn symmetric_orbits(degree: usize) -> Vec<Orbit> {
    match degree {
        0 | 1 => vec![Orbit::Centroid(1.0)],
        2 => vec![Orbit::Three(1.0 / 6.0, 1.0 / 3.0)],
        3 | 4 => vec![
            Orbit::Three(0.445_948_490_915_965, 0.223_381_589_678_011),
            Orbit::Three(0.091_576_213_509_771, 0.109_951_743_655_322),
        ],
        5 => vec![
            Orbit::Centroid(0.225),
            Orbit::Three(0.470_142_064_105_115, 0.132_394_152_788_506),
            Orbit::Three(0.101_286_507_323_456, 0.125_939_180_544_827),
        ],
        _ => unreachable!(),
    }
}

/// Rule on the reference triangle `(0,0), (1,0), (0,1)`, weights summing to
/// its area 1/2.
pub fn reference_triangle_rule(degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree {
            requested: degree,
            max: MAX_DEGREE,
        });
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    if degree <= 5 {
        for orbit in symmetric_orbits(degree) {
            match orbit {
                Orbit::Centroid(w) => {
                    points.push(Point2::new(1.0 / 3.0, 1.0 / 3.0));
                    weights.push(0.5 * w);
                }
                Orbit::Three(a, w) => {
                    let b = 1.0 - 2.0 * a;
                    for (x, y) in [(a, a), (b, a), (a, b)] {
                        points.push(Point2::new(x, y));
                        weights.push(0.5 * w);
                    }
                }
            }
        }
    } else {
        // Collapsed tensor Gauss rule: (u, v) in [0,1]^2 maps to
        // (u, (1 - u) v) with Jacobian (1 - u), which raises the u-degree by one.
        let nu = (degree + 2).div_ceil(2);
        let nv = (degree + 1).div_ceil(2);
        let (xu, wu) = gauss_legendre(nu);
        let (xv, wv) = gauss_legendre(nv);
        for (a, wa) in xu.iter().zip(&wu) {
            let u = 0.5 * (a + 1.0);
            for (b, wb) in xv.iter().zip(&wv) {
                let v = 0.5 * (b + 1.0);
                points.push(Point2::new(u, (1.0 - u) * v));
                weights.push(0.25 * wa * wb * (1.0 - u));
            }
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        degree,
    })
}

fn map_triangle(reference: &QuadratureRule, a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> (Vec<Point2<f64>>, Vec<f64>) {
    let (e1, e2) = (b - a, c - a);
    let jac = (e1.x * e2.y - e1.y * e2.x).abs();
    let points = reference
        .points
        .iter()
        .map(|p| a + e1 * p.x + e2 * p.y)
        .collect();
    let weights = reference.weights.iter().map(|w| w * jac).collect();
    (points, weights)
}

/// Rule exact to `degree` on a convex polygon. Triangles use the mapped
/// reference rule; other polygons a fan of triangles from the centroid.
pub fn quad_cell(vertices: &[Point2<f64>], degree: usize) -> Result<QuadratureRule> {
    let reference = reference_triangle_rule(degree)?;
    let (points, weights) = if vertices.len() == 3 {
        map_triangle(&reference, vertices[0], vertices[1], vertices[2])
    } else {
        let (_, centroid) = crate::mesh::area_centroid(vertices);
        let m = vertices.len();
        let mut points = Vec::with_capacity(m * reference.len());
        let mut weights = Vec::with_capacity(m * reference.len());
        for i in 0..m {
            let (p, w) = map_triangle(&reference, centroid, vertices[i], vertices[(i + 1) % m]);
            points.extend(p);
            weights.extend(w);
        }
        (points, weights)
    };
    Ok(QuadratureRule {
        points,
        weights,
        degree,
    })
}

/// Gauss rule with `ceil((degree + 1) / 2)` points on the segment `a -> b`.
pub fn quad_edge(a: Point2<f64>, b: Point2<f64>, degree: usize) -> EdgeRule {
    let n = (degree + 1).div_ceil(2).max(1);
    let (x, w) = gauss_legendre(n);
    let d: Vector2<f64> = b - a;
    let len = d.norm();
    let params: Vec<f64> = x.iter().map(|t| 0.5 * (t + 1.0) * len).collect();
    EdgeRule {
        points: x.iter().map(|t| a + d * (0.5 * (t + 1.0))).collect(),
        params,
        weights: w.iter().map(|w| 0.5 * w * len).collect(),
        degree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
    fn reference_monomial(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn gauss_legendre_small() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(3);
        assert_eq!(x[1], 0.0);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_rules_exact() {
        for d in 0..=20 {
            let rule = reference_triangle_rule(d).unwrap();
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let q = rule.integrate(|p| p.x.powi(a as i32) * p.y.powi(b as i32));
                    let exact = reference_monomial(a, b);
                    assert!(
                        ((q - exact) / exact).abs() < 1e-12,
                        "degree {d}, x^{a} y^{b}: {q} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn x2y3_closed_form() {
        // 2! 3! / 7! = 1/420
        let rule = reference_triangle_rule(5).unwrap();
        let q = rule.integrate(|p| p.x * p.x * p.y.powi(3));
        assert!((q - 1.0 / 420.0).abs() < 1e-16);
    }

    #[test]
    fn degree_above_table_is_error() {
        match quad_cell(&[Point2::origin(), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)], 99) {
            Err(Error::UnsupportedDegree { requested: 99, max }) => assert_eq!(max, MAX_DEGREE),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn edge_rule_monomials() {
        let rule = quad_edge(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), 8);
        assert_eq!(rule.len(), 5);
        for d in 0..=8 {
            let q: f64 = rule.params.iter().zip(&rule.weights).map(|(s, w)| w * s.powi(d)).sum();
            assert!((q - 1.0 / (d as f64 + 1.0)).abs() < 1e-13);
        }
        let slanted = quad_edge(Point2::new(0.2, 0.1), Point2::new(1.0, 0.7), 0);
        assert!((slanted.integrate(|_| 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hexagon_area() {
        let pts: Vec<_> = (0..6)
            .map(|i| {
                let t = std::f64::consts::PI / 3.0 * i as f64;
                Point2::new(t.cos(), t.sin())
            })
            .collect();
        let (area, _) = crate::mesh::area_centroid(&pts);
        let rule = quad_cell(&pts, 0).unwrap();
        assert!((rule.integrate(|_| 1.0) - area).abs() < 1e-14);
    }
}
