//! Interface-fitted triangulations of `(-a, a)^2` with a circular inclusion
//! of radius `r0` centered at the origin.
//!
//! Every element lies in the closure of exactly one subdomain: `Inner` is the
//! disk, `Outer` the rest of the square. Vertices on the polygonal interface
//! are stored exactly on the circle.

mod generate;
mod io;
mod validate;

pub use generate::{generate_mesh, generate_mesh_with, MeshOptions};
pub use io::{format_mesh, parse_mesh, read_mesh, write_mesh, MeshIoError};
pub use validate::{validate_mesh, ValidationReport, Violation};

use crate::Point;
use thiserror::Error;

/// Relative tolerance for "lies on the circle".
pub const ON_CIRCLE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("interface radius {radius} must satisfy 0 < r0 < a = {half_width}")]
    InvalidGeometry { half_width: f64, radius: f64 },
    #[error("subdivision count must be positive")]
    TooCoarse { n: usize },
    #[error("element {element} has minimum angle {angle_deg:.3} deg, below the {threshold_deg} deg threshold")]
    Quality {
        element: usize,
        angle_deg: f64,
        threshold_deg: f64,
    },
    #[error("snapping did not terminate after {passes} passes ({reason}); increase n")]
    SnapFailed { passes: usize, reason: String },
    #[error("element {element} cannot be fitted to the interface ({reason}); increase n")]
    Unfittable { element: usize, reason: String },
    #[error("mesh does not resolve the interface (no interface edges)")]
    NoInterface,
}

/// Outer square half-width and inclusion radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySpec {
    half_width: f64,
    interface_radius: f64,
}

impl GeometrySpec {
    pub fn new(half_width: f64, interface_radius: f64) -> Result<Self, MeshError> {
        let ok = half_width.is_finite()
            && interface_radius.is_finite()
            && interface_radius > 0.0
            && interface_radius < half_width;
        if !ok {
            return Err(MeshError::InvalidGeometry {
                half_width,
                radius: interface_radius,
            });
        }
        Ok(Self {
            half_width,
            interface_radius,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn interface_radius(&self) -> f64 {
        self.interface_radius
    }

    /// |Omega| = 4 a^2.
    pub fn domain_area(&self) -> f64 {
        4.0 * self.half_width * self.half_width
    }

    /// Subdomain of the true (curved) partition. Points on the circle count as inner.
    pub fn subdomain_of(&self, p: Point) -> Subdomain {
        if radius(p) <= self.interface_radius {
            Subdomain::Inner
        } else {
            Subdomain::Outer
        }
    }

    /// Signed distance to the interface, positive outside.
    pub fn level(&self, p: Point) -> f64 {
        radius(p) - self.interface_radius
    }

    pub fn on_outer_boundary(&self, p: Point) -> bool {
        let tol = 1e-12 * self.half_width;
        let a = self.half_width;
        (p[0].abs() - a).abs() <= tol && p[1].abs() <= a + tol
            || (p[1].abs() - a).abs() <= tol && p[0].abs() <= a + tol
    }
}

#[inline]
pub(crate) fn radius(p: Point) -> f64 {
    p[0].hypot(p[1])
}

/// Subdomain tag: 1 inside the circle, 2 outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subdomain {
    Inner,
    Outer,
}

impl Subdomain {
    pub fn tag(self) -> u8 {
        match self {
            Subdomain::Inner => 1,
            Subdomain::Outer => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Subdomain::Inner),
            2 => Some(Subdomain::Outer),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Subdomain::Inner => 0,
            Subdomain::Outer => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub vertices: [usize; 3],
    pub tag: Subdomain,
}

/// Triangulation with subdomain tags, boundary flags and the interface edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<Element>,
    boundary: Vec<bool>,
    interface_edges: Vec<[usize; 2]>,
    mesh_size: f64,
}

impl Mesh {
    /// Assembles a mesh from raw parts without checking any invariant.
    /// Use [`validate_mesh`] to inspect the result.
    pub fn from_parts(
        vertices: Vec<Point>,
        elements: Vec<Element>,
        boundary: Vec<bool>,
        interface_edges: Vec<[usize; 2]>,
    ) -> Self {
        let mut mesh = Self {
            vertices,
            elements,
            boundary,
            interface_edges,
            mesh_size: 0.0,
        };
        mesh.mesh_size = mesh.longest_edge();
        mesh
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interface_edges(&self) -> &[[usize; 2]] {
        &self.interface_edges
    }

    /// Longest edge length.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn triangle(&self, e: usize) -> [Point; 3] {
        let [a, b, c] = self.elements[e].vertices;
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn count_by_tag(&self, tag: Subdomain) -> usize {
        self.elements.iter().filter(|e| e.tag == tag).count()
    }

    /// Total area of the elements carrying `tag` (the polygonal subdomain).
    pub fn subdomain_area(&self, tag: Subdomain) -> f64 {
        (0..self.elements.len())
            .filter(|&e| self.elements[e].tag == tag)
            .map(|e| signed_area(&self.triangle(e)).abs())
            .sum()
    }

    /// Total length of the polygonal interface.
    pub fn interface_length(&self) -> f64 {
        self.interface_edges
            .iter()
            .map(|&[a, b]| distance(self.vertices[a], self.vertices[b]))
            .sum()
    }

    /// Smallest interior angle over all elements, in degrees, and its element.
    pub fn min_angle(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for e in 0..self.elements.len() {
            let a = min_angle(&self.triangle(e)).to_degrees();
            if a < best.0 {
                best = (a, e);
            }
        }
        best
    }

    fn longest_edge(&self) -> f64 {
        let mut h: f64 = 0.0;
        for el in &self.elements {
            let [a, b, c] = el.vertices;
            for (p, q) in [(a, b), (b, c), (c, a)] {
                if p < self.vertices.len() && q < self.vertices.len() {
                    h = h.max(distance(self.vertices[p], self.vertices[q]));
                }
            }
        }
        h
    }
}

/// Sagitta of a chord of length `chord` on a circle of radius `r0`.
pub fn sagitta(chord: f64, r0: f64) -> f64 {
    let half = (0.5 * chord).min(r0);
    r0 - (r0 * r0 - half * half).max(0.0).sqrt()
}

/// Maximal distance between the circle and the polygonal interface, taken
/// as the largest sagitta over the interface edges.
pub fn interface_resolution(mesh: &Mesh, spec: &GeometrySpec) -> Result<f64, MeshError> {
    if mesh.interface_edges.is_empty() {
        return Err(MeshError::NoInterface);
    }
    let r0 = spec.interface_radius();
    Ok(mesh
        .interface_edges
        .iter()
        .map(|&[a, b]| sagitta(distance(mesh.vertices[a], mesh.vertices[b]), r0))
        .fold(0.0, f64::max))
}

pub(crate) fn distance(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Signed area, positive for counterclockwise vertex order.
pub fn signed_area(t: &[Point; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]))
}

/// Smallest interior angle in radians.
pub fn min_angle(t: &[Point; 3]) -> f64 {
    let mut m = f64::INFINITY;
    for k in 0..3 {
        let p = t[k];
        let u = [t[(k + 1) % 3][0] - p[0], t[(k + 1) % 3][1] - p[1]];
        let w = [t[(k + 2) % 3][0] - p[0], t[(k + 2) % 3][1] - p[1]];
        let cross = u[0] * w[1] - u[1] * w[0];
        let dot = u[0] * w[0] + u[1] * w[1];
        m = m.min(cross.abs().atan2(dot));
    }
    m
}

pub fn centroid(t: &[Point; 3]) -> Point {
    [
        (t[0][0] + t[1][0] + t[2][0]) / 3.0,
        (t[0][1] + t[1][1] + t[2][1]) / 3.0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_rejects_radius_outside_square() {
        assert!(matches!(
            GeometrySpec::new(1.0, 1.5),
            Err(MeshError::InvalidGeometry { .. })
        ));
        assert!(GeometrySpec::new(1.0, 1.0).is_err());
        assert!(GeometrySpec::new(1.0, 0.0).is_err());
        assert!(GeometrySpec::new(1.0, 0.5).is_ok());
    }

    #[test]
    fn sagitta_matches_dense_arc_sampling() {
        let r0: f64 = 0.5;
        for &chord in &[0.05f64, 0.1, 0.3, 0.7] {
            // arc endpoints symmetric about the x axis
            let half_angle = (0.5 * chord / r0).asin();
            let a = [r0 * half_angle.cos(), -r0 * half_angle.sin()];
            let mut dmax: f64 = 0.0;
            for k in 0..=20_000 {
                let th = -half_angle + 2.0 * half_angle * k as f64 / 20_000.0;
                let p = [r0 * th.cos(), r0 * th.sin()];
                // distance from p to the chord line x = a[0]
                dmax = dmax.max(p[0] - a[0]);
            }
            assert!((sagitta(chord, r0) - dmax).abs() < 1e-12, "chord {chord}");
        }
        assert_eq!(sagitta(0.0, r0), 0.0);
    }

    #[test]
    fn angles_and_area_of_right_triangle() {
        let t = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert_eq!(signed_area(&t), 0.5);
        assert!((min_angle(&t).to_degrees() - 45.0).abs() < 1e-12);
        let flipped = [t[0], t[2], t[1]];
        assert_eq!(signed_area(&flipped), -0.5);
    }
}
