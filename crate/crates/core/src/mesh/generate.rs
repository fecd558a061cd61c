use std::collections::HashMap;

use nalgebra::Point2;

use super::Mesh;
use crate::error::{Error, Result};

/// Uniform `n x n` grid of squares, each split by its lower-left to
/// upper-right diagonal.
pub fn build_triangular(n: usize) -> Mesh {
    assert!(n >= 1, "build_triangular needs n >= 1");
    let np = n + 1;
    let nf = n as f64;
    let vertices = (0..np)
        .flat_map(|j| (0..np).map(move |i| Point2::new(i as f64 / nf, j as f64 / nf)))
        .collect();
    let mut cycles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * np + i;
            let v10 = v00 + 1;
            let v01 = v00 + np;
            let v11 = v01 + 1;
            cycles.push(vec![v00, v10, v11]);
            cycles.push(vec![v00, v11, v01]);
        }
    }
    let mut mesh = Mesh::from_cells(vertices, cycles).expect("structured triangulation is valid");
    // Every cell's diameter is the square diagonal; pin it to the exact value
    // so that h halves exactly under refinement.
    let h = std::f64::consts::SQRT_2 / nf;
    for cell in &mut mesh.cells {
        cell.diameter = h;
    }
    mesh.h = h;
    mesh
}

/// Hexagon-dominant mesh: a hexagonal tiling with `n` hexagon widths across
/// the square, clipped to `(0,1)^2`.
///
/// Hexagons are flat-topped; column `c` has its centres on `x = c / n` and
/// the columns alternate by half a hexagon height. The hexagon height is
/// rounded so that `y = 0` and `y = 1` run either through centres or along
/// shared horizontal sides, so clipping never produces slivers. All
/// coordinates live on the lattice `(i / 3n, j / p)` and clipping is done in
/// exact integer arithmetic.
pub fn build_polygonal(n: usize) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::Generation {
            cell: 0,
            message: format!("polygonal mesh needs n >= 2, got {n}"),
        });
    }
    let p = ((3f64.sqrt() * n as f64).round() as i64).max(2);
    let xmax = 3 * n as i64;
    let ymax = p;

    let hexagon = [(2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)];
    let mut lattice_index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut lattice_points: Vec<(i64, i64)> = Vec::new();
    let mut cycles = Vec::new();

    for c in 0..=n as i64 {
        let cx = 3 * c;
        let mut cy = c % 2;
        while cy <= ymax {
            let poly: Vec<(i64, i64)> = hexagon.iter().map(|&(dx, dy)| (cx + dx, cy + dy)).collect();
            let clipped = clip_to_box(poly, xmax, ymax);
            let cell = cycles.len();
            if clipped.len() < 3 || twice_area(&clipped) == 0 {
                return Err(Error::Generation {
                    cell,
                    message: format!("hexagon centred at lattice ({cx}, {cy}) clipped to a degenerate cell"),
                });
            }
            let cycle = clipped
                .into_iter()
                .map(|q| {
                    *lattice_index.entry(q).or_insert_with(|| {
                        lattice_points.push(q);
                        lattice_points.len() - 1
                    })
                })
                .collect();
            cycles.push(cycle);
            cy += 2;
        }
    }

    let (sx, sy) = (xmax as f64, ymax as f64);
    let vertices = lattice_points
        .iter()
        .map(|&(x, y)| Point2::new(x as f64 / sx, y as f64 / sy))
        .collect();
    let mesh = Mesh::from_cells(vertices, cycles)?;
    let min_area = 1e-12 / (n as f64).powi(2);
    if let Some((cell, c)) = mesh.cells.iter().enumerate().find(|(_, c)| c.area < min_area) {
        return Err(Error::Generation {
            cell,
            message: format!("clipped cell has area {:e}", c.area),
        });
    }
    Ok(mesh)
}

fn twice_area(poly: &[(i64, i64)]) -> i64 {
    let m = poly.len();
    (0..m)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % m]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum()
}

#[derive(Clone, Copy)]
enum Side {
    Left(i64),
    Right(i64),
    Bottom(i64),
    Top(i64),
}

impl Side {
    fn inside(self, (x, y): (i64, i64)) -> bool {
        match self {
            Side::Left(v) => x >= v,
            Side::Right(v) => x <= v,
            Side::Bottom(v) => y >= v,
            Side::Top(v) => y <= v,
        }
    }

    fn intersect(self, a: (i64, i64), b: (i64, i64)) -> (i64, i64) {
        let lerp = |a0: i64, a1: i64, b0: i64, b1: i64, at: i64| {
            // Point on the segment where the first coordinate equals `at`.
            let num = (at - a0) * (b1 - a1);
            let den = b0 - a0;
            debug_assert_eq!(num % den, 0, "clip point off lattice");
            a1 + num / den
        };
        match self {
            Side::Left(v) | Side::Right(v) => (v, lerp(a.0, a.1, b.0, b.1, v)),
            Side::Bottom(v) | Side::Top(v) => (lerp(a.1, a.0, b.1, b.0, v), v),
        }
    }
}

/// Sutherland-Hodgman clipping against `[0, xmax] x [0, ymax]`.
fn clip_to_box(mut poly: Vec<(i64, i64)>, xmax: i64, ymax: i64) -> Vec<(i64, i64)> {
    for side in [Side::Left(0), Side::Right(xmax), Side::Bottom(0), Side::Top(ymax)] {
        if poly.is_empty() {
            break;
        }
        let mut out = Vec::with_capacity(poly.len() + 2);
        let m = poly.len();
        for i in 0..m {
            let s = poly[(i + m - 1) % m];
            let e = poly[i];
            match (side.inside(s), side.inside(e)) {
                (true, true) => out.push(e),
                (false, true) => {
                    out.push(side.intersect(s, e));
                    out.push(e);
                }
                (true, false) => out.push(side.intersect(s, e)),
                (false, false) => {}
            }
        }
        out.dedup();
        while out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        poly = out;
    }
    poly
}
