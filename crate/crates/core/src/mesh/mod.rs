//! Polygonal meshes of the unit square.
//!
//! A [`Mesh`] stores vertices and counter-clockwise cells; everything else
//! (edges, fixed edge normals, incidence signs, areas, centroids, diameters)
//! is derived in [`Mesh::from_cells`]. Each edge carries one global unit
//! normal `n_e`: the tangent runs from the lower to the higher global vertex
//! index and `n_e` is that tangent rotated by +90°. A cell sees the edge with
//! sign `σ = n_e · n_T`, where `n_T` is its outward normal.

mod generate;
mod io;
mod validate;

use std::collections::HashMap;

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};

pub use generate::{build_polygonal, build_triangular};
pub use io::{load_mesh, write_mesh};
pub use validate::{validate, validate_with_area, Violation};

/// An edge of the mesh with its fixed orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Endpoints, lower global index first.
    pub vertices: [usize; 2],
    /// Unit tangent from `vertices[0]` to `vertices[1]`.
    pub tangent: Vector2<f64>,
    /// Fixed unit normal `n_e` (tangent rotated by +90°).
    pub normal: Vector2<f64>,
    pub length: f64,
    /// Incident cells; the second is `None` on the boundary.
    pub cells: (usize, Option<usize>),
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

/// Local view of an edge from one of its cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellEdge {
    pub edge: usize,
    /// `n_e · n_T` on this edge, ±1.
    pub sign: i8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Counter-clockwise vertex cycle.
    pub vertices: Vec<usize>,
    /// `edges[i]` joins `vertices[i]` and `vertices[i + 1]`.
    pub edges: Vec<CellEdge>,
    pub area: f64,
    pub centroid: Point2<f64>,
    pub diameter: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point2<f64>>,
    pub cells: Vec<Cell>,
    pub edges: Vec<Edge>,
    /// Mesh size, the largest cell diameter.
    pub h: f64,
}

impl Mesh {
    /// Builds a mesh from vertex coordinates and CCW vertex cycles, deriving
    /// all edge and cell data. Structural defects are errors; non-convex
    /// cells are accepted with a warning.
    pub fn from_cells(vertices: Vec<Point2<f64>>, cycles: Vec<Vec<usize>>) -> Result<Mesh> {
        if cycles.is_empty() {
            return Err(Error::Topology {
                entity: "mesh",
                index: 0,
                message: "no cells".into(),
            });
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cells = Vec::with_capacity(cycles.len());

        for (ci, cycle) in cycles.into_iter().enumerate() {
            check_cycle(ci, &cycle, vertices.len())?;
            let pts: Vec<Point2<f64>> = cycle.iter().map(|&v| vertices[v]).collect();
            if !is_simple(&pts) {
                return Err(Error::Topology {
                    entity: "cell",
                    index: ci,
                    message: "polygon is not simple".into(),
                });
            }
            let (area, centroid) = area_centroid(&pts);
            if area <= 0.0 {
                return Err(Error::Topology {
                    entity: "cell",
                    index: ci,
                    message: format!("non-positive signed area {area:e}, cells must be counter-clockwise"),
                });
            }
            if !is_convex(&pts) {
                log::warn!("cell {ci} is not convex");
            }

            let m = cycle.len();
            let mut cell_edges = Vec::with_capacity(m);
            for i in 0..m {
                let (a, b) = (cycle[i], cycle[(i + 1) % m]);
                let key = (a.min(b), a.max(b));
                let edge = match edge_lookup.get(&key) {
                    Some(&e) => {
                        let entry = &mut edges[e];
                        if entry.cells.1.is_some() {
                            return Err(Error::Topology {
                                entity: "edge",
                                index: e,
                                message: format!(
                                    "edge ({}, {}) is shared by more than two cells",
                                    key.0, key.1
                                ),
                            });
                        }
                        if entry.cells.0 == ci {
                            return Err(Error::Topology {
                                entity: "cell",
                                index: ci,
                                message: format!("edge ({}, {}) appears twice", key.0, key.1),
                            });
                        }
                        entry.cells.1 = Some(ci);
                        e
                    }
                    None => {
                        let e = edges.len();
                        edges.push(make_edge(&vertices, key, ci)?);
                        edge_lookup.insert(key, e);
                        e
                    }
                };
                // Traversing a -> b with a < b runs along the edge tangent, so
                // the outward normal (tangent rotated by -90°) is -n_e.
                let sign = if a < b { -1 } else { 1 };
                cell_edges.push(CellEdge { edge, sign });
            }

            cells.push(Cell {
                diameter: diameter(&pts),
                vertices: cycle,
                edges: cell_edges,
                area,
                centroid,
            });
        }

        let h = cells.iter().map(|c| c.diameter).fold(0.0, f64::max);
        Ok(Mesh {
            vertices,
            cells,
            edges,
            h,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_boundary()).count()
    }

    /// Coordinates of a cell's vertices in CCW order.
    pub fn cell_points(&self, cell: usize) -> Vec<Point2<f64>> {
        self.cells[cell]
            .vertices
            .iter()
            .map(|&v| self.vertices[v])
            .collect()
    }

    pub fn edge_points(&self, edge: usize) -> [Point2<f64>; 2] {
        let [a, b] = self.edges[edge].vertices;
        [self.vertices[a], self.vertices[b]]
    }

    /// Outward unit normal of `cell` on its local edge `local`.
    pub fn outward_normal(&self, cell: usize, local: usize) -> Vector2<f64> {
        let ce = self.cells[cell].edges[local];
        self.edges[ce.edge].normal * f64::from(ce.sign)
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }
}

fn check_cycle(ci: usize, cycle: &[usize], nv: usize) -> Result<()> {
    let err = |message: String| Error::Topology {
        entity: "cell",
        index: ci,
        message,
    };
    if cycle.len() < 3 {
        return Err(err(format!("cell has {} vertices, need at least 3", cycle.len())));
    }
    for (i, &v) in cycle.iter().enumerate() {
        if v >= nv {
            return Err(err(format!("vertex index {v} out of range ({nv} vertices)")));
        }
        if cycle[..i].contains(&v) {
            return Err(err(format!("vertex {v} repeated, cycle is not closed simply")));
        }
    }
    Ok(())
}

fn make_edge(vertices: &[Point2<f64>], key: (usize, usize), cell: usize) -> Result<Edge> {
    let d = vertices[key.1] - vertices[key.0];
    let length = d.norm();
    if length == 0.0 {
        return Err(Error::Topology {
            entity: "cell",
            index: cell,
            message: format!("zero-length edge ({}, {})", key.0, key.1),
        });
    }
    let tangent = d / length;
    Ok(Edge {
        vertices: [key.0, key.1],
        tangent,
        normal: Vector2::new(-tangent.y, tangent.x),
        length,
        cells: (cell, None),
    })
}

/// Signed area (positive for CCW) and centroid by the shoelace formula.
pub(crate) fn area_centroid(pts: &[Point2<f64>]) -> (f64, Point2<f64>) {
    let m = pts.len();
    // Shift by the first vertex to limit cancellation.
    let o = pts[0];
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..m {
        let p = pts[i] - o;
        let q = pts[(i + 1) % m] - o;
        let cross = p.x * q.y - q.x * p.y;
        a2 += cross;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    let area = 0.5 * a2;
    if a2 == 0.0 {
        return (0.0, o);
    }
    (area, Point2::new(o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)))
}

pub(crate) fn diameter(pts: &[Point2<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            d = d.max((p - q).norm());
        }
    }
    d
}

fn cross(o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex in the CCW sense: no right turns (collinear vertices allowed).
pub(crate) fn is_convex(pts: &[Point2<f64>]) -> bool {
    let m = pts.len();
    let scale = diameter(pts).powi(2);
    (0..m).all(|i| cross(&pts[i], &pts[(i + 1) % m], &pts[(i + 2) % m]) >= -1e-14 * scale)
}

fn segments_intersect(p1: &Point2<f64>, p2: &Point2<f64>, q1: &Point2<f64>, q2: &Point2<f64>) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>, d: f64| {
        d == 0.0
            && c.x >= a.x.min(b.x)
            && c.x <= a.x.max(b.x)
            && c.y >= a.y.min(b.y)
            && c.y <= a.y.max(b.y)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// No two non-adjacent sides touch.
pub(crate) fn is_simple(pts: &[Point2<f64>]) -> bool {
    let m = pts.len();
    for i in 0..m {
        for j in i + 1..m {
            let adjacent = j == i + 1 || (i == 0 && j == m - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(&pts[i], &pts[(i + 1) % m], &pts[j], &pts[(j + 1) % m]) {
                return false;
            }
        }
    }
    true
}
