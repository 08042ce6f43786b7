//! Legacy ASCII VTK snapshots and CSV probe series.

use std::fmt::Write as _;

use crate::mesh::{signed_area, Mesh};
use crate::Point;

pub const PROBE_HEADER: &str = "# capfem-probes 1";

/// Unstructured grid of triangles with the nodal field `potential`.
pub fn snapshot(mesh: &Mesh, values: &[f64], title: &str) -> String {
    assert_eq!(values.len(), mesh.num_vertices(), "one value per vertex");
    let mut s = String::from("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", p[0], p[1]);
    }
    let ne = mesh.num_elements();
    let _ = writeln!(s, "CELLS {} {}", ne, 4 * ne);
    for el in mesh.elements() {
        let [a, b, c] = el.vertices;
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "CELL_DATA {ne}");
    s.push_str("SCALARS subdomain int 1\nLOOKUP_TABLE default\n");
    for el in mesh.elements() {
        let _ = writeln!(s, "{}", el.tag.tag());
    }
    let _ = writeln!(s, "POINT_DATA {}", mesh.num_vertices());
    s.push_str("SCALARS potential double 1\nLOOKUP_TABLE default\n");
    for v in values {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

/// Element containing `p` and its barycentric coordinates.
pub fn locate(mesh: &Mesh, p: Point) -> Option<(usize, [f64; 3])> {
    let tol = 1e-12;
    for e in 0..mesh.num_elements() {
        let t = mesh.triangle(e);
        let area = signed_area(&t);
        let l0 = signed_area(&[p, t[1], t[2]]) / area;
        let l1 = signed_area(&[t[0], p, t[2]]) / area;
        let l2 = 1.0 - l0 - l1;
        if l0 >= -tol && l1 >= -tol && l2 >= -tol {
            return Some((e, [l0, l1, l2]));
        }
    }
    None
}

/// Linear interpolation of a nodal field at fixed points.
#[derive(Debug, Clone)]
pub struct Probes {
    points: Vec<Point>,
    weights: Vec<([usize; 3], [f64; 3])>,
}

impl Probes {
    /// Fails with the index of the first point outside the mesh.
    pub fn new(mesh: &Mesh, points: &[Point]) -> Result<Self, usize> {
        let mut weights = Vec::with_capacity(points.len());
        for (i, &p) in points.iter().enumerate() {
            let (e, lam) = locate(mesh, p).ok_or(i)?;
            weights.push((mesh.elements()[e].vertices, lam));
        }
        Ok(Self {
            points: points.to_vec(),
            weights,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn sample(&self, values: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|(v, l)| l[0] * values[v[0]] + l[1] * values[v[1]] + l[2] * values[v[2]])
            .collect()
    }

    /// Version line, the point list as a comment and the column header.
    pub fn csv_header(&self) -> String {
        let mut s = format!("{PROBE_HEADER}\n# points:");
        for p in &self.points {
            let _ = write!(s, " ({}, {})", p[0], p[1]);
        }
        s.push_str("\nt");
        for i in 1..=self.points.len() {
            let _ = write!(s, ",probe{i}");
        }
        s.push('\n');
        s
    }

    pub fn csv_row(&self, t: f64, values: &[f64]) -> String {
        let mut s = format!("{t:.16e}");
        for v in self.sample(values) {
            let _ = write!(s, ",{v:.16e}");
        }
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, GeometrySpec};

    #[test]
    fn snapshot_layout() {
        let spec = GeometrySpec::new(1.0, 0.5).unwrap();
        let mesh = generate_mesh(&spec, 4).unwrap();
        let vals = vec![0.0; mesh.num_vertices()];
        let s = snapshot(&mesh, &vals, "t = 0");
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[4], format!("POINTS {} double", mesh.num_vertices()));
        assert!(s.contains("CELLS 32 128"));
        assert_eq!(lines.iter().filter(|l| **l == "5").count(), 32);
        assert!(s.contains("SCALARS potential double 1"));
    }

    #[test]
    fn probes_interpolate_linear_fields_exactly() {
        let spec = GeometrySpec::new(1.0, 0.5).unwrap();
        let mesh = generate_mesh(&spec, 8).unwrap();
        let vals: Vec<f64> = mesh
            .vertices()
            .iter()
            .map(|p| 2.0 * p[0] - p[1] + 0.5)
            .collect();
        let pts = [[0.13, -0.71], [0.0, 0.0], [0.99, 0.99]];
        let pr = Probes::new(&mesh, &pts).unwrap();
        for (p, v) in pts.iter().zip(pr.sample(&vals)) {
            assert!((v - (2.0 * p[0] - p[1] + 0.5)).abs() < 1e-12);
        }
        assert_eq!(
            Probes::new(&mesh, &[[0.0, 0.0], [2.0, 0.0]]).unwrap_err(),
            1
        );
        assert!(pr.csv_header().starts_with(PROBE_HEADER));
        assert!(pr.csv_header().ends_with("t,probe1,probe2,probe3\n"));
    }
}
