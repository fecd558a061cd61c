//! Closed-form solutions of `Δ²u = f` used as test problems.

use std::f64::consts::PI;

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};

/// A smooth solution with its derivatives in closed form.
pub trait ExactSolution: Send + Sync {
    fn value(&self, p: &Point2<f64>) -> f64;
    fn gradient(&self, p: &Point2<f64>) -> Vector2<f64>;
    fn laplacian(&self, p: &Point2<f64>) -> f64;
    /// `f = Δ²u`.
    fn source(&self, p: &Point2<f64>) -> f64;
}

/// `u = x²(1-x)² y²(1-y)²`, clamped on the unit square.
#[derive(Clone, Copy, Debug, Default)]
pub struct Example1;

/// `u = sin(πx) sin(πy)`; vanishes on the boundary but its normal
/// derivative does not.
#[derive(Clone, Copy, Debug, Default)]
pub struct Example2;

// g(t) = t²(1-t)² and derivatives.
fn g(t: f64) -> f64 {
    (t * (1.0 - t)).powi(2)
}

fn g1(t: f64) -> f64 {
    2.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
}

fn g2(t: f64) -> f64 {
    2.0 - 12.0 * t + 12.0 * t * t
}

const G4: f64 = 24.0;

impl ExactSolution for Example1 {
    fn value(&self, p: &Point2<f64>) -> f64 {
        g(p.x) * g(p.y)
    }

    fn gradient(&self, p: &Point2<f64>) -> Vector2<f64> {
        Vector2::new(g1(p.x) * g(p.y), g(p.x) * g1(p.y))
    }

    fn laplacian(&self, p: &Point2<f64>) -> f64 {
        g2(p.x) * g(p.y) + g(p.x) * g2(p.y)
    }

    fn source(&self, p: &Point2<f64>) -> f64 {
        G4 * g(p.y) + 2.0 * g2(p.x) * g2(p.y) + G4 * g(p.x)
    }
}

impl ExactSolution for Example2 {
    fn value(&self, p: &Point2<f64>) -> f64 {
        (PI * p.x).sin() * (PI * p.y).sin()
    }

    fn gradient(&self, p: &Point2<f64>) -> Vector2<f64> {
        let (sx, cx) = (PI * p.x).sin_cos();
        let (sy, cy) = (PI * p.y).sin_cos();
        Vector2::new(PI * cx * sy, PI * sx * cy)
    }

    fn laplacian(&self, p: &Point2<f64>) -> f64 {
        -2.0 * PI * PI * self.value(p)
    }

    fn source(&self, p: &Point2<f64>) -> f64 {
        4.0 * PI.powi(4) * self.value(p)
    }
}

/// Built-in test problem `1` or `2`.
pub fn builtin_solution(id: u32) -> Result<Box<dyn ExactSolution>> {
    match id {
        1 => Ok(Box::new(Example1)),
        2 => Ok(Box::new(Example2)),
        other => Err(Error::UnknownSolution(other)),
    }
}
