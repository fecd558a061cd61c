use std::fmt;

use nalgebra::Vector2;

use super::{area_centroid, is_convex, is_simple, Mesh};

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    EdgeIncidence { edge: usize, cells: usize },
    InteriorSignSum { edge: usize, sum: i32 },
    SignMagnitude { cell: usize, edge: usize, sign: i8 },
    SignGeometry { cell: usize, edge: usize },
    NormalNotUnit { edge: usize },
    NonPositiveArea { cell: usize, area: f64 },
    AreaSum { total: f64, expected: f64 },
    NotSimple { cell: usize },
    NotConvex { cell: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EdgeIncidence { edge, cells } => {
                write!(f, "edge {edge} is incident to {cells} cells")
            }
            Violation::InteriorSignSum { edge, sum } => {
                write!(f, "interior edge {edge}: incidence signs sum to {sum}")
            }
            Violation::SignMagnitude { cell, edge, sign } => {
                write!(f, "cell {cell}, edge {edge}: sign {sign} is not +-1")
            }
            Violation::SignGeometry { cell, edge } => {
                write!(f, "cell {cell}, edge {edge}: sign times n_e is not the outward normal")
            }
            Violation::NormalNotUnit { edge } => write!(f, "edge {edge}: normal is not unit"),
            Violation::NonPositiveArea { cell, area } => {
                write!(f, "cell {cell}: non-positive area {area:e}")
            }
            Violation::AreaSum { total, expected } => {
                write!(f, "cell areas sum to {total}, expected {expected}")
            }
            Violation::NotSimple { cell } => write!(f, "cell {cell} is not a simple polygon"),
            Violation::NotConvex { cell } => write!(f, "cell {cell} is not convex"),
        }
    }
}

/// Checks every mesh invariant against the unit square. An empty report
/// means the mesh is valid.
pub fn validate(mesh: &Mesh) -> Vec<Violation> {
    validate_with_area(mesh, Some(1.0))
}

/// As [`validate`], with the expected total area given explicitly (`None`
/// skips the area-sum check).
pub fn validate_with_area(mesh: &Mesh, expected_area: Option<f64>) -> Vec<Violation> {
    let mut report = Vec::new();

    let mut incident: Vec<Vec<(usize, i8)>> = vec![Vec::new(); mesh.edges.len()];
    for (c, cell) in mesh.cells.iter().enumerate() {
        let pts = mesh.cell_points(c);
        let m = pts.len();
        for (i, ce) in cell.edges.iter().enumerate() {
            incident[ce.edge].push((c, ce.sign));
            if ce.sign.abs() != 1 {
                report.push(Violation::SignMagnitude {
                    cell: c,
                    edge: ce.edge,
                    sign: ce.sign,
                });
                continue;
            }
            let d = pts[(i + 1) % m] - pts[i];
            let outward = Vector2::new(d.y, -d.x) / d.norm();
            let n = mesh.edges[ce.edge].normal * f64::from(ce.sign);
            if (n - outward).norm() > 1e-12 {
                report.push(Violation::SignGeometry { cell: c, edge: ce.edge });
            }
        }

        let (area, _) = area_centroid(&pts);
        if area <= 0.0 || cell.area <= 0.0 {
            report.push(Violation::NonPositiveArea { cell: c, area });
        }
        if !is_simple(&pts) {
            report.push(Violation::NotSimple { cell: c });
        } else if !is_convex(&pts) {
            report.push(Violation::NotConvex { cell: c });
        }
    }

    for (e, inc) in incident.iter().enumerate() {
        if (mesh.edges[e].normal.norm() - 1.0).abs() > 1e-12 {
            report.push(Violation::NormalNotUnit { edge: e });
        }
        match inc.len() {
            1 => {}
            2 => {
                let sum = i32::from(inc[0].1) + i32::from(inc[1].1);
                if sum != 0 {
                    report.push(Violation::InteriorSignSum { edge: e, sum });
                }
            }
            n => report.push(Violation::EdgeIncidence { edge: e, cells: n }),
        }
    }

    if let Some(expected) = expected_area {
        let total = mesh.total_area();
        if (total - expected).abs() > 1e-12 {
            report.push(Violation::AreaSum { total, expected });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_polygonal, build_triangular, load_mesh};

    #[test]
    fn generated_meshes_are_valid() {
        assert!(validate(&build_triangular(4)).is_empty());
        assert!(validate(&build_polygonal(4).unwrap()).is_empty());
    }

    #[test]
    fn flipped_sign_is_named() {
        let mut m = build_triangular(4);
        let target = m.cells[5].edges[1];
        m.cells[5].edges[1].sign = -target.sign;
        let report = validate(&m);
        assert!(report.contains(&Violation::SignGeometry {
            cell: 5,
            edge: target.edge
        }));
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::InteriorSignSum { edge, .. } if *edge == target.edge)));
    }

    #[test]
    fn half_domain_area_flagged() {
        let text = "polymesh 1\nvertices 3\n0 0\n1 0\n1 1\ncells 1\n0 1 2\n";
        let m = load_mesh(text.as_bytes()).unwrap();
        let report = validate(&m);
        assert_eq!(report.len(), 1);
        assert!(matches!(report[0], Violation::AreaSum { total, .. } if (total - 0.5).abs() < 1e-15));
        assert!(validate_with_area(&m, Some(0.5)).is_empty());
    }

    #[test]
    fn non_convex_cell_reported() {
        let text = "polymesh 1\nvertices 5\n0 0\n1 0\n1 1\n0.5 0.2\n0 1\ncells 1\n0 1 2 3 4\n";
        let m = load_mesh(text.as_bytes()).unwrap();
        assert!(validate_with_area(&m, None).contains(&Violation::NotConvex { cell: 0 }));
    }
}
