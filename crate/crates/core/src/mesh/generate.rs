use std::collections::BTreeMap;

use super::{
    centroid, min_angle, radius, signed_area, Element, GeometrySpec, Mesh, MeshError, Subdomain,
};
use crate::Point;

/// Knobs for [`generate_mesh_with`].
#[derive(Debug, Clone)]
pub struct MeshOptions {
    /// Minimum admissible interior angle in degrees.
    pub min_angle_deg: f64,
    /// Run the quality repair (edge flips and constrained smoothing) after snapping.
    pub repair: bool,
    /// Upper bound on snapping passes over the edge list.
    pub max_snap_passes: usize,
    /// Upper bound on repair sweeps.
    pub max_repair_sweeps: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            min_angle_deg: 15.0,
            repair: true,
            max_snap_passes: 64,
            max_repair_sweeps: 64,
        }
    }
}

/// Relative band around the circle treated as "on the circle" while snapping.
const SIDE_TOL: f64 = 1e-13;

const EQUALIZE_SWEEPS: usize = 100;

pub fn generate_mesh(spec: &GeometrySpec, n: usize) -> Result<Mesh, MeshError> {
    generate_mesh_with(spec, n, &MeshOptions::default())
}

/// Uniform right-triangle grid of the square, snapped onto the circle.
///
/// Every edge whose endpoints lie strictly on opposite sides of the circle
/// has its endpoint nearer to the circle projected radially onto it; passes
/// repeat until no crossing edge remains. With `repair` enabled, slivers left
/// by snapping are removed by quality-improving edge flips and smoothing moves
/// that never let an edge cross the circle again.
pub fn generate_mesh_with(
    spec: &GeometrySpec,
    n: usize,
    opts: &MeshOptions,
) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::TooCoarse { n });
    }
    let a = spec.half_width();
    let r0 = spec.interface_radius();

    let stride = n + 1;
    let coord = |i: usize| {
        if i == n {
            a
        } else {
            -a + 2.0 * a * i as f64 / n as f64
        }
    };
    let mut verts: Vec<Point> = Vec::with_capacity(stride * stride);
    let mut boundary = Vec::with_capacity(stride * stride);
    for j in 0..=n {
        for i in 0..=n {
            verts.push([coord(i), coord(j)]);
            boundary.push(i == 0 || i == n || j == 0 || j == n);
        }
    }
    let mut tris: Vec<[usize; 3]> = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * stride + i;
            let v10 = v00 + 1;
            let v01 = v00 + stride;
            let v11 = v01 + 1;
            tris.push([v00, v10, v11]);
            tris.push([v00, v11, v01]);
        }
    }

    snap(&mut verts, &boundary, &tris, r0, opts.max_snap_passes)?;

    if opts.repair {
        let mut work = Repair {
            verts: &mut verts,
            tris: &mut tris,
            boundary: &boundary,
            r0,
            pin_circle: false,
        };
        let sweeps = |work: &mut Repair| {
            for _ in 0..opts.max_repair_sweeps {
                let flipped = work.flip_pass();
                let moved = work.smooth_pass();
                if !flipped && !moved {
                    break;
                }
            }
        };
        sweeps(&mut work);
        let floor = (opts.min_angle_deg + 5.0).to_radians();
        work.pin_circle = true;
        for _ in 0..EQUALIZE_SWEEPS {
            let largest = work.equalize_pass(floor, 64);
            work.flip_pass();
            work.smooth_pass();
            if largest < 1e-4 * 2.0 * a / (n as f64 * r0) {
                break;
            }
        }
        sweeps(&mut work);
    }

    // final exact placement of on-circle vertices
    for (p, &b) in verts.iter_mut().zip(&boundary) {
        if !b && side(*p, r0) == 0 {
            *p = project(*p, r0);
        }
    }

    let mut elements = Vec::with_capacity(tris.len());
    for t in &tris {
        let tri = [verts[t[0]], verts[t[1]], verts[t[2]]];
        let tag = if radius(centroid(&tri)) < r0 {
            Subdomain::Inner
        } else {
            Subdomain::Outer
        };
        elements.push(Element { vertices: *t, tag });
    }
    let interface_edges = interface_edges(&elements);
    let mesh = Mesh::from_parts(verts, elements, boundary, interface_edges);

    let threshold = opts.min_angle_deg.to_radians();
    for e in 0..mesh.num_elements() {
        let tri = mesh.triangle(e);
        let angle = min_angle(&tri);
        if signed_area(&tri) <= 0.0 || angle < threshold {
            return Err(MeshError::Quality {
                element: e,
                angle_deg: angle.to_degrees(),
                threshold_deg: opts.min_angle_deg,
            });
        }
    }
    if mesh.interface_edges().is_empty() {
        return Err(MeshError::NoInterface);
    }
    Ok(mesh)
}

/// -1 strictly inside, 0 on the circle, +1 strictly outside.
fn side(p: Point, r0: f64) -> i8 {
    let d = radius(p) - r0;
    if d.abs() <= SIDE_TOL * r0 {
        0
    } else if d > 0.0 {
        1
    } else {
        -1
    }
}

fn project(p: Point, r0: f64) -> Point {
    let r = radius(p);
    [p[0] / r * r0, p[1] / r * r0]
}

/// False when the segment passes through the open disk without one of its
/// endpoints lying strictly inside it.
fn clears_disk(p: Point, q: Point, r0: f64) -> bool {
    let (sp, sq) = (side(p, r0), side(q, r0));
    if sp < 0 || sq < 0 || (sp == 0 && sq == 0) {
        return true;
    }
    let d = [q[0] - p[0], q[1] - p[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = (-(p[0] * d[0] + p[1] * d[1]) / len2).clamp(0.0, 1.0);
    radius([p[0] + t * d[0], p[1] + t * d[1]]) >= r0 * (1.0 - SIDE_TOL)
}

fn sorted_edges(tris: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut edges: Vec<[usize; 2]> = tris
        .iter()
        .flat_map(|t| (0..3).map(move |k| edge_key(t[k], t[(k + 1) % 3])))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn snap(
    verts: &mut [Point],
    boundary: &[bool],
    tris: &[[usize; 3]],
    r0: f64,
    max_passes: usize,
) -> Result<(), MeshError> {
    let edges = sorted_edges(tris);
    for _ in 0..max_passes {
        let mut moved = false;
        for &[p, q] in &edges {
            if side(verts[p], r0) * side(verts[q], r0) >= 0 && clears_disk(verts[p], verts[q], r0) {
                continue;
            }
            // the on-circle endpoint of a dipping edge stays put
            let dp = (radius(verts[p]) - r0).abs();
            let dq = (radius(verts[q]) - r0).abs();
            let fixed_p = boundary[p] || side(verts[p], r0) == 0;
            let fixed_q = boundary[q] || side(verts[q], r0) == 0;
            let target = match (fixed_p, fixed_q) {
                (false, false) => {
                    if dp <= dq {
                        p
                    } else {
                        q
                    }
                }
                (true, false) => q,
                (false, true) => p,
                (true, true) => {
                    return Err(MeshError::Unfittable {
                        element: owner(tris, &[p, q]),
                        reason: format!("edge {p}-{q} crosses the circle between fixed vertices"),
                    })
                }
            };
            if radius(verts[target]) < 1e-8 * r0 {
                return Err(MeshError::Unfittable {
                    element: owner(tris, &[target]),
                    reason: format!("vertex {target} at the center cannot be projected"),
                });
            }
            verts[target] = project(verts[target], r0);
            moved = true;
        }
        if !moved {
            return Ok(());
        }
    }
    Err(MeshError::SnapFailed {
        passes: max_passes,
        reason: "edges still cross the interface".into(),
    })
}

fn owner(tris: &[[usize; 3]], verts: &[usize]) -> usize {
    tris.iter()
        .position(|t| verts.iter().all(|v| t.contains(v)))
        .expect("vertex set belongs to a triangle")
}

fn interface_edges(elements: &[Element]) -> Vec<[usize; 2]> {
    let mut owners: BTreeMap<[usize; 2], Vec<Subdomain>> = BTreeMap::new();
    for el in elements {
        let t = el.vertices;
        for k in 0..3 {
            owners
                .entry(edge_key(t[k], t[(k + 1) % 3]))
                .or_default()
                .push(el.tag);
        }
    }
    owners
        .into_iter()
        .filter(|(_, tags)| tags.len() == 2 && tags[0] != tags[1])
        .map(|(e, _)| e)
        .collect()
}

struct Repair<'a> {
    verts: &'a mut Vec<Point>,
    tris: &'a mut Vec<[usize; 3]>,
    boundary: &'a [bool],
    r0: f64,
    pin_circle: bool,
}

impl Repair<'_> {
    fn tri(&self, t: [usize; 3]) -> [Point; 3] {
        [self.verts[t[0]], self.verts[t[1]], self.verts[t[2]]]
    }

    fn positive(&self, t: [usize; 3]) -> bool {
        let tri = self.tri(t);
        let scale = super::distance(tri[0], tri[1]).powi(2);
        signed_area(&tri) > 1e-12 * scale
    }

    fn clear_around(&self, v: usize, nbrs: &[usize]) -> bool {
        nbrs.iter()
            .all(|&u| clears_disk(self.verts[v], self.verts[u], self.r0))
    }

    /// Slides each interface vertex along the circle toward the angular
    /// midpoint of its two neighbors on the discrete interface, evening out
    /// the chord lengths. Returns the largest accepted angular move.
    /// Topology is frozen for the given number of sweeps.
    fn equalize_pass(&mut self, min_angle: f64, sweeps: usize) -> f64 {
        let nv = self.verts.len();
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (ti, t) in self.tris.iter().enumerate() {
            for &v in t {
                incident[v].push(ti);
            }
        }
        let elements: Vec<Element> = self
            .tris
            .iter()
            .map(|&t| {
                let tag = if radius(centroid(&self.tri(t))) < self.r0 {
                    Subdomain::Inner
                } else {
                    Subdomain::Outer
                };
                Element { vertices: t, tag }
            })
            .collect();
        let mut chain: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for [a, b] in interface_edges(&elements) {
            chain[a].push(b);
            chain[b].push(a);
        }
        use std::f64::consts::{PI, TAU};
        let angle = |p: Point| p[1].atan2(p[0]);
        let wrap = |d: f64| (d + PI).rem_euclid(TAU) - PI;
        let ring: Vec<usize> = (0..nv)
            .filter(|&v| {
                !self.boundary[v] && chain[v].len() == 2 && side(self.verts[v], self.r0) == 0
            })
            .collect();
        if ring.len() < 3 || ring.len() != chain.iter().filter(|c| !c.is_empty()).count() {
            return 0.0;
        }
        let mut largest: f64 = 0.0;
        for v in (0..sweeps).flat_map(|_| ring.iter().copied()) {
            let theta = angle(self.verts[v]);
            let da = wrap(angle(self.verts[chain[v][0]]) - theta);
            let db = wrap(angle(self.verts[chain[v][1]]) - theta);
            let shift = 0.5 * (da + db);
            let mut nbrs: Vec<usize> = incident[v]
                .iter()
                .flat_map(|&ti| self.tris[ti])
                .filter(|&u| u != v)
                .collect();
            nbrs.sort_unstable();
            nbrs.dedup();
            let quality = |verts: &Vec<Point>| {
                incident[v]
                    .iter()
                    .map(|&ti| {
                        let t = self.tris[ti];
                        super::min_angle(&[verts[t[0]], verts[t[1]], verts[t[2]]])
                    })
                    .fold(f64::INFINITY, f64::min)
            };
            let floor = quality(self.verts).min(min_angle);
            let old = self.verts[v];
            for frac in [1.0, 0.5, 0.25] {
                let t = theta + frac * shift;
                self.verts[v] = [self.r0 * t.cos(), self.r0 * t.sin()];
                let ok = incident[v].iter().all(|&ti| self.positive(self.tris[ti]))
                    && self.clear_around(v, &nbrs)
                    && nbrs
                        .iter()
                        .all(|&u| side(self.verts[u], self.r0) * side(old, self.r0) >= 0)
                    && quality(self.verts) >= floor;
                if ok {
                    largest = largest.max((frac * shift).abs());
                    break;
                }
                self.verts[v] = old;
            }
        }
        largest
    }

    /// Flips an interior edge when the min angle of its two triangles strictly
    /// improves and the new diagonal does not join the two sides of the circle.
    fn flip_pass(&mut self) -> bool {
        let mut owners: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
        for (ti, t) in self.tris.iter().enumerate() {
            for k in 0..3 {
                owners
                    .entry(edge_key(t[k], t[(k + 1) % 3]))
                    .or_default()
                    .push(ti);
            }
        }
        let mut touched = vec![false; self.tris.len()];
        let mut changed = false;
        for (edge, ts) in &owners {
            if ts.len() != 2 || touched[ts[0]] || touched[ts[1]] {
                continue;
            }
            let (t1, t2) = (self.tris[ts[0]], self.tris[ts[1]]);
            // rotate t1 so that it reads (p, q, o1) and t2 reads (q, p, o2)
            let k1 = (0..3)
                .find(|&k| edge_key(t1[k], t1[(k + 1) % 3]) == *edge)
                .unwrap();
            let (p, q, o1) = (t1[k1], t1[(k1 + 1) % 3], t1[(k1 + 2) % 3]);
            let o2 = *t2.iter().find(|&&v| v != p && v != q).unwrap();
            if owners.contains_key(&edge_key(o1, o2)) {
                continue;
            }
            if self.pin_circle
                && side(self.verts[p], self.r0) == 0
                && side(self.verts[q], self.r0) == 0
            {
                continue;
            }
            if side(self.verts[o1], self.r0) * side(self.verts[o2], self.r0) < 0
                || !clears_disk(self.verts[o1], self.verts[o2], self.r0)
            {
                continue;
            }
            let n1 = [p, o2, o1];
            let n2 = [o2, q, o1];
            if !self.positive(n1) || !self.positive(n2) {
                continue;
            }
            let before = min_angle(&self.tri(t1)).min(min_angle(&self.tri(t2)));
            let after = min_angle(&self.tri(n1)).min(min_angle(&self.tri(n2)));
            if after > before + 1e-9 {
                self.tris[ts[0]] = n1;
                self.tris[ts[1]] = n2;
                touched[ts[0]] = true;
                touched[ts[1]] = true;
                changed = true;
            }
        }
        changed
    }

    /// Moves each free vertex to the centroid of its neighbors (projected
    /// back onto the circle for interface vertices) when that strictly raises
    /// the smallest angle among its incident triangles.
    fn smooth_pass(&mut self) -> bool {
        let nv = self.verts.len();
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (ti, t) in self.tris.iter().enumerate() {
            for &v in t {
                incident[v].push(ti);
            }
        }
        let mut changed = false;
        for v in 0..nv {
            if self.boundary[v]
                || incident[v].is_empty()
                || (self.pin_circle && side(self.verts[v], self.r0) == 0)
            {
                continue;
            }
            let mut nbrs: Vec<usize> = incident[v]
                .iter()
                .flat_map(|&ti| self.tris[ti])
                .filter(|&u| u != v)
                .collect();
            nbrs.sort_unstable();
            nbrs.dedup();
            let mut c = [0.0, 0.0];
            for &u in &nbrs {
                c[0] += self.verts[u][0];
                c[1] += self.verts[u][1];
            }
            c = [c[0] / nbrs.len() as f64, c[1] / nbrs.len() as f64];
            let s0 = side(self.verts[v], self.r0);
            if s0 == 0 {
                if radius(c) < 1e-8 * self.r0 {
                    continue;
                }
                c = project(c, self.r0);
            }
            if side(c, self.r0) != s0 {
                continue;
            }
            if nbrs
                .iter()
                .any(|&u| side(self.verts[u], self.r0) * side(c, self.r0) < 0)
            {
                continue;
            }
            let local_min = |verts: &Vec<Point>, tris: &Vec<[usize; 3]>| {
                incident[v]
                    .iter()
                    .map(|&ti| {
                        let t = tris[ti];
                        min_angle(&[verts[t[0]], verts[t[1]], verts[t[2]]])
                    })
                    .fold(f64::INFINITY, f64::min)
            };
            let before = local_min(self.verts, self.tris);
            let old = self.verts[v];
            self.verts[v] = c;
            let valid = incident[v].iter().all(|&ti| self.positive(self.tris[ti]))
                && self.clear_around(v, &nbrs);
            if valid && local_min(self.verts, self.tris) > before + 1e-9 {
                changed = true;
            } else {
                self.verts[v] = old;
            }
        }
        changed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{validate_mesh, ON_CIRCLE_TOL};

    fn spec() -> GeometrySpec {
        GeometrySpec::new(1.0, 0.5).unwrap()
    }

    #[test]
    fn coarse_mesh_is_valid() {
        let mesh = generate_mesh(&spec(), 4).unwrap();
        let report = validate_mesh(&mesh, &spec(), 15.0);
        assert!(report.is_valid(), "{report:?}");
        assert_eq!(mesh.num_elements(), 32);
    }

    #[test]
    fn three_subdivisions_name_the_unfittable_element() {
        match generate_mesh(&spec(), 3) {
            Err(MeshError::Unfittable { element, .. }) => assert!(element < 18),
            other => panic!("expected unfittable element, got {other:?}"),
        }
        assert_eq!(
            generate_mesh(&spec(), 0).unwrap_err(),
            MeshError::TooCoarse { n: 0 }
        );
    }

    #[test]
    fn snapping_without_repair_leaves_slivers_and_names_element() {
        let opts = MeshOptions {
            repair: false,
            ..MeshOptions::default()
        };
        match generate_mesh_with(&spec(), 16, &opts) {
            Err(MeshError::Quality {
                element, angle_deg, ..
            }) => {
                assert!(element < 2 * 16 * 16);
                assert!(angle_deg < 15.0);
            }
            other => panic!("expected quality failure, got {other:?}"),
        }
    }

    #[test]
    fn center_vertex_cannot_be_snapped() {
        // with r0 small the origin is the nearer endpoint of a crossing edge
        let small = GeometrySpec::new(1.0, 0.2).unwrap();
        assert!(matches!(
            generate_mesh(&small, 4),
            Err(MeshError::Unfittable { .. })
        ));
    }

    #[test]
    fn interface_vertices_sit_on_circle() {
        let mesh = generate_mesh(&spec(), 16).unwrap();
        for &[a, b] in mesh.interface_edges() {
            for v in [a, b] {
                let r = radius(mesh.vertices()[v]);
                assert!((r - 0.5).abs() <= ON_CIRCLE_TOL * 0.5);
            }
        }
    }

    #[test]
    fn boundary_vertices_stay_on_square() {
        let mesh = generate_mesh(&spec(), 8).unwrap();
        for (p, &b) in mesh.vertices().iter().zip(mesh.boundary_flags()) {
            if b {
                assert!(p[0].abs() == 1.0 || p[1].abs() == 1.0);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_mesh(&spec(), 16).unwrap();
        let b = generate_mesh(&spec(), 16).unwrap();
        assert_eq!(a, b);
    }
}
