use std::collections::BTreeMap;
use std::fmt;

use super::{min_angle, radius, signed_area, GeometrySpec, Mesh, Subdomain, ON_CIRCLE_TOL};

/// One failed mesh check.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Element vertex index out of range.
    BadIndex { element: usize },
    /// Non-positive signed area (clockwise or degenerate).
    Orientation { element: usize, area: f64 },
    /// Element areas do not sum to |Omega|.
    Coverage { total: f64, expected: f64 },
    /// Edge shared by more than two elements.
    OverSharedEdge {
        edge: [usize; 2],
        elements: Vec<usize>,
    },
    /// Edge owned by one element but not on the outer boundary (hanging node or hole).
    NonConformingEdge { edge: [usize; 2], element: usize },
    /// Element vertices not contained in the closure of the tagged subdomain.
    Straddles { element: usize, tag: Subdomain },
    /// Interface edge endpoint off the circle.
    InterfaceOffCircle {
        edge: [usize; 2],
        vertex: usize,
        radius: f64,
    },
    /// Minimum angle below the quality threshold.
    Quality { element: usize, angle_deg: f64 },
    /// Boundary flag disagrees with vertex position.
    BoundaryFlag { vertex: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadIndex { element } => {
                write!(f, "element {element}: vertex index out of range")
            }
            Violation::Orientation { element, area } => {
                write!(f, "element {element}: signed area {area:e} is not positive")
            }
            Violation::Coverage { total, expected } => {
                write!(f, "element areas sum to {total}, domain area is {expected}")
            }
            Violation::OverSharedEdge { edge, elements } => {
                write!(
                    f,
                    "edge {}-{} shared by elements {elements:?}",
                    edge[0], edge[1]
                )
            }
            Violation::NonConformingEdge { edge, element } => write!(
                f,
                "edge {}-{} of element {element} has no neighbor and is not on the boundary",
                edge[0], edge[1]
            ),
            Violation::Straddles { element, tag } => write!(
                f,
                "element {element}: vertices not in the closure of subdomain {}",
                tag.tag()
            ),
            Violation::InterfaceOffCircle {
                edge,
                vertex,
                radius,
            } => write!(
                f,
                "interface edge {}-{}: vertex {vertex} at radius {radius}",
                edge[0], edge[1]
            ),
            Violation::Quality { element, angle_deg } => {
                write!(f, "element {element}: minimum angle {angle_deg:.3} deg")
            }
            Violation::BoundaryFlag { vertex } => {
                write!(f, "vertex {vertex}: boundary flag disagrees with position")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks coverage, conformity, subdomain containment, orientation and quality.
/// Violations are collected, never raised.
pub fn validate_mesh(mesh: &Mesh, spec: &GeometrySpec, min_angle_deg: f64) -> ValidationReport {
    let mut out = Vec::new();
    let nv = mesh.num_vertices();
    let r0 = spec.interface_radius();
    let tol = ON_CIRCLE_TOL * r0;

    let mut total_area = 0.0;
    let mut owners: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
    for (e, el) in mesh.elements().iter().enumerate() {
        if el.vertices.iter().any(|&v| v >= nv) {
            out.push(Violation::BadIndex { element: e });
            continue;
        }
        let tri = mesh.triangle(e);
        let area = signed_area(&tri);
        total_area += area.abs();
        if area <= 0.0 {
            out.push(Violation::Orientation { element: e, area });
        }
        let contained = tri.iter().all(|&p| {
            let r = radius(p);
            match el.tag {
                Subdomain::Inner => r <= r0 + tol,
                Subdomain::Outer => r >= r0 - tol,
            }
        });
        if !contained {
            out.push(Violation::Straddles {
                element: e,
                tag: el.tag,
            });
        }
        let angle = min_angle(&tri).to_degrees();
        if !(angle >= min_angle_deg) {
            out.push(Violation::Quality {
                element: e,
                angle_deg: angle,
            });
        }
        let t = el.vertices;
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            owners.entry([a.min(b), a.max(b)]).or_default().push(e);
        }
    }

    let expected = spec.domain_area();
    if ((total_area - expected) / expected).abs() > 1e-10 {
        out.push(Violation::Coverage {
            total: total_area,
            expected,
        });
    }

    let a = spec.half_width();
    let on_same_side = |p: [f64; 2], q: [f64; 2]| {
        let t = 1e-12 * a;
        ((p[0] - q[0]).abs() <= t && (p[0].abs() - a).abs() <= t)
            || ((p[1] - q[1]).abs() <= t && (p[1].abs() - a).abs() <= t)
    };
    for (edge, els) in &owners {
        match els.len() {
            1 => {
                let (p, q) = (mesh.vertices()[edge[0]], mesh.vertices()[edge[1]]);
                if !on_same_side(p, q) {
                    out.push(Violation::NonConformingEdge {
                        edge: *edge,
                        element: els[0],
                    });
                }
            }
            2 => {}
            _ => out.push(Violation::OverSharedEdge {
                edge: *edge,
                elements: els.clone(),
            }),
        }
    }

    for &edge in mesh.interface_edges() {
        for v in edge {
            if v >= nv {
                continue;
            }
            let r = radius(mesh.vertices()[v]);
            if (r - r0).abs() > tol {
                out.push(Violation::InterfaceOffCircle {
                    edge,
                    vertex: v,
                    radius: r,
                });
            }
        }
    }

    for (v, (&p, &flag)) in mesh
        .vertices()
        .iter()
        .zip(mesh.boundary_flags())
        .enumerate()
    {
        if flag != spec.on_outer_boundary(p) {
            out.push(Violation::BoundaryFlag { vertex: v });
        }
    }

    ValidationReport { violations: out }
}
