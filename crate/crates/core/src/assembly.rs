//! P1 Lagrange assembly of the conductivity and permittivity forms, load
//! vectors, interface flux functionals and discrete error norms.
//!
//! Stiffness matrices are assembled per subdomain over the full vertex set
//! with one shared sparsity pattern, so every form is an exact entrywise
//! combination `c1 K1 + c2 K2` of the two subdomain Laplacians.

use thiserror::Error;

use crate::mesh::{signed_area, Mesh, Subdomain};
use crate::quadrature::{SegmentRule, TriangleRule};
use crate::sparse::CsrMatrix;
use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("element {element}: non-positive area {area:e}")]
    DegenerateElement { element: usize, area: f64 },
    #[error("degenerate triangle (area {0:e})")]
    DegenerateTriangle(f64),
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("mesh has no interface edges")]
    NoInterface,
}

/// Piecewise-constant conductivity and permittivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientField {
    sigma: [f64; 2],
    eps: [f64; 2],
}

impl CoefficientField {
    /// `sigma_i >= 0`, `eps_i > 0`.
    pub fn new(sigma1: f64, sigma2: f64, eps1: f64, eps2: f64) -> Result<Self, AssemblyError> {
        for (name, v) in [("sigma1", sigma1), ("sigma2", sigma2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(AssemblyError::InvalidCoefficients(format!(
                    "{name} = {v} must be finite and nonnegative"
                )));
            }
        }
        for (name, v) in [("eps1", eps1), ("eps2", eps2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(AssemblyError::InvalidCoefficients(format!(
                    "{name} = {v} must be finite and positive"
                )));
            }
        }
        Ok(Self {
            sigma: [sigma1, sigma2],
            eps: [eps1, eps2],
        })
    }

    pub fn sigma(&self, s: Subdomain) -> f64 {
        self.sigma[s.index()]
    }

    pub fn eps(&self, s: Subdomain) -> f64 {
        self.eps[s.index()]
    }

    pub fn sigmas(&self) -> [f64; 2] {
        self.sigma
    }

    pub fn epss(&self) -> [f64; 2] {
        self.eps
    }

    /// Per-subdomain weights of the chosen form.
    pub fn weights(&self, form: Form) -> [f64; 2] {
        match form {
            Form::Conductivity => self.sigma,
            Form::Permittivity => self.eps,
        }
    }

    /// Coercivity constant `m = min eps_i`.
    pub fn eps_min(&self) -> f64 {
        self.eps[0].min(self.eps[1])
    }

    /// Bound on the generalized eigenvalues of (A_sigma, A_eps).
    pub fn max_relaxation_rate(&self) -> f64 {
        (self.sigma[0] / self.eps[0]).max(self.sigma[1] / self.eps[1])
    }
}

/// Which bilinear form to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    /// `sum_i int_{Omega_i,h} sigma_i grad u . grad v`
    Conductivity,
    /// `sum_i int_{Omega_i,h} eps_i grad u . grad v`
    Permittivity,
}

/// Vertex to free-dof numbering; boundary vertices carry no dof.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    free_of_vertex: Vec<Option<usize>>,
    boundary_of_vertex: Vec<Option<usize>>,
    vertex_of_free: Vec<usize>,
    boundary_vertices: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        Self::from_flags(mesh.boundary_flags())
    }

    /// All vertices free.
    pub fn unconstrained(num_vertices: usize) -> Self {
        Self::from_flags(&vec![false; num_vertices])
    }

    pub fn from_flags(flags: &[bool]) -> Self {
        let mut free_of_vertex = vec![None; flags.len()];
        let mut boundary_of_vertex = vec![None; flags.len()];
        let mut vertex_of_free = Vec::new();
        let mut boundary_vertices = Vec::new();
        for (v, &b) in flags.iter().enumerate() {
            if b {
                boundary_of_vertex[v] = Some(boundary_vertices.len());
                boundary_vertices.push(v);
            } else {
                free_of_vertex[v] = Some(vertex_of_free.len());
                vertex_of_free.push(v);
            }
        }
        Self {
            free_of_vertex,
            boundary_of_vertex,
            vertex_of_free,
            boundary_vertices,
        }
    }

    pub fn num_free(&self) -> usize {
        self.vertex_of_free.len()
    }

    pub fn num_boundary(&self) -> usize {
        self.boundary_vertices.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.free_of_vertex.len()
    }

    pub fn free_index(&self, vertex: usize) -> Option<usize> {
        self.free_of_vertex[vertex]
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.vertex_of_free
    }

    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }

    pub fn free_map(&self) -> &[Option<usize>] {
        &self.free_of_vertex
    }

    pub fn boundary_map(&self) -> &[Option<usize>] {
        &self.boundary_of_vertex
    }

    /// Full nodal vector from free values and boundary values (ordered as
    /// [`DofMap::boundary_vertices`]).
    pub fn expand(&self, free: &[f64], boundary: &[f64]) -> Vec<f64> {
        assert_eq!(free.len(), self.num_free());
        assert_eq!(boundary.len(), self.num_boundary());
        let mut full = vec![0.0; self.num_vertices()];
        for (k, &v) in self.vertex_of_free.iter().enumerate() {
            full[v] = free[k];
        }
        for (k, &v) in self.boundary_vertices.iter().enumerate() {
            full[v] = boundary[k];
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.vertex_of_free.iter().map(|&v| full[v]).collect()
    }
}

/// Area and the constant gradients of the three barycentric basis functions.
pub fn element_gradients(tri: &[Point; 3]) -> Result<(f64, [[f64; 2]; 3]), AssemblyError> {
    let area = signed_area(tri);
    let scale = (0..3)
        .map(|k| crate::mesh::distance(tri[k], tri[(k + 1) % 3]))
        .fold(0.0, f64::max);
    if !(area > 1e-14 * scale * scale) {
        return Err(AssemblyError::DegenerateTriangle(area));
    }
    let inv = 1.0 / (2.0 * area);
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        let b = tri[(k + 1) % 3];
        let c = tri[(k + 2) % 3];
        g[k] = [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv];
    }
    Ok((area, g))
}

/// `coeff * area * grad(phi_i) . grad(phi_j)` for a counterclockwise triangle.
pub fn element_stiffness(tri: &[Point; 3], coeff: f64) -> Result<[[f64; 3]; 3], AssemblyError> {
    let (area, g) = element_gradients(tri)?;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            // commutative in (i, j) so the result is bitwise symmetric
            k[i][j] = coeff * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    Ok(k)
}

/// Coefficient-free Laplacians of the two polygonal subdomains over all
/// vertices, sharing the sparsity pattern of the whole mesh.
#[derive(Debug, Clone)]
pub struct SubdomainLaplacians {
    pub inner: CsrMatrix,
    pub outer: CsrMatrix,
}

impl SubdomainLaplacians {
    pub fn assemble(mesh: &Mesh) -> Result<Self, AssemblyError> {
        let nv = mesh.num_vertices();
        let mut inner = Vec::with_capacity(9 * mesh.num_elements());
        let mut outer = Vec::with_capacity(9 * mesh.num_elements());
        for (e, el) in mesh.elements().iter().enumerate() {
            let tri = mesh.triangle(e);
            let k = element_stiffness(&tri, 1.0).map_err(|err| match err {
                AssemblyError::DegenerateTriangle(area) => {
                    AssemblyError::DegenerateElement { element: e, area }
                }
                other => other,
            })?;
            for a in 0..3 {
                for b in 0..3 {
                    let (i, j) = (el.vertices[a], el.vertices[b]);
                    let (own, other) = match el.tag {
                        Subdomain::Inner => (&mut inner, &mut outer),
                        Subdomain::Outer => (&mut outer, &mut inner),
                    };
                    own.push((i, j, k[a][b]));
                    other.push((i, j, 0.0));
                }
            }
        }
        Ok(Self {
            inner: CsrMatrix::from_triplets(nv, nv, &inner),
            outer: CsrMatrix::from_triplets(nv, nv, &outer),
        })
    }

    /// `w[0] K_inner + w[1] K_outer`.
    pub fn weighted(&self, w: [f64; 2]) -> CsrMatrix {
        CsrMatrix::combine(&[(w[0], &self.inner), (w[1], &self.outer)])
    }
}

/// Mesh-level operators shared by projection and time stepping.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub dofs: DofMap,
    pub laplacians: SubdomainLaplacians,
    pub coeff: CoefficientField,
}

impl Discretization {
    pub fn new(mesh: &Mesh, coeff: CoefficientField) -> Result<Self, AssemblyError> {
        Ok(Self {
            dofs: DofMap::new(mesh),
            laplacians: SubdomainLaplacians::assemble(mesh)?,
            coeff,
        })
    }

    /// Full (all-vertex) matrix of a form.
    pub fn full(&self, form: Form) -> CsrMatrix {
        self.laplacians.weighted(self.coeff.weights(form))
    }

    /// Free-free block of a form.
    pub fn free_block(&self, form: Form) -> CsrMatrix {
        self.free_block_of(&self.full(form))
    }

    /// Free-boundary coupling block of a form.
    pub fn coupling_block(&self, form: Form) -> CsrMatrix {
        self.coupling_block_of(&self.full(form))
    }

    pub fn free_block_of(&self, m: &CsrMatrix) -> CsrMatrix {
        let d = &self.dofs;
        m.submatrix(d.free_map(), d.num_free(), d.free_map(), d.num_free())
    }

    pub fn coupling_block_of(&self, m: &CsrMatrix) -> CsrMatrix {
        let d = &self.dofs;
        m.submatrix(
            d.free_map(),
            d.num_free(),
            d.boundary_map(),
            d.num_boundary(),
        )
    }

    /// Values of `g` at the boundary vertices.
    pub fn boundary_values(&self, mesh: &Mesh, g: impl Fn(Point) -> f64) -> Vec<f64> {
        self.dofs
            .boundary_vertices()
            .iter()
            .map(|&v| g(mesh.vertices()[v]))
            .collect()
    }
}

/// Matrix of a form restricted to the free dofs.
pub fn assemble_stiffness(
    mesh: &Mesh,
    coeff: &CoefficientField,
    form: Form,
    dofs: &DofMap,
) -> Result<CsrMatrix, AssemblyError> {
    let full = SubdomainLaplacians::assemble(mesh)?.weighted(coeff.weights(form));
    Ok(full.submatrix(
        dofs.free_map(),
        dofs.num_free(),
        dofs.free_map(),
        dofs.num_free(),
    ))
}

/// `int_Omega g phi_i` for every free dof, elementwise by `rule`.
pub fn assemble_load(
    mesh: &Mesh,
    g: impl Fn(Point) -> f64,
    rule: &TriangleRule,
    dofs: &DofMap,
) -> Vec<f64> {
    let mut b = vec![0.0; dofs.num_free()];
    for (e, el) in mesh.elements().iter().enumerate() {
        let tri = mesh.triangle(e);
        let mut local = [0.0; 3];
        for (p, lam, w) in rule.on(&tri) {
            let gv = g(p);
            for k in 0..3 {
                local[k] += w * gv * lam[k];
            }
        }
        for k in 0..3 {
            if let Some(i) = dofs.free_index(el.vertices[k]) {
                b[i] += local[k];
            }
        }
    }
    b
}

/// `sum over interface edges of int_e gstar phi_i ds` for every free dof.
pub fn assemble_interface_flux(
    mesh: &Mesh,
    gstar: impl Fn(Point) -> f64,
    rule: &SegmentRule,
    dofs: &DofMap,
) -> Result<Vec<f64>, AssemblyError> {
    if mesh.interface_edges().is_empty() {
        return Err(AssemblyError::NoInterface);
    }
    let mut b = vec![0.0; dofs.num_free()];
    for &[va, vb] in mesh.interface_edges() {
        let (pa, pb) = (mesh.vertices()[va], mesh.vertices()[vb]);
        let mut la = 0.0;
        let mut lb = 0.0;
        for (p, s, w) in rule.on(pa, pb) {
            let gv = gstar(p);
            la += w * gv * (1.0 - s);
            lb += w * gv * s;
        }
        if let Some(i) = dofs.free_index(va) {
            b[i] += la;
        }
        if let Some(i) = dofs.free_index(vb) {
            b[i] += lb;
        }
    }
    Ok(b)
}

/// Reduced system for prescribed boundary values.
///
/// Returns the free-free block of `full` and `rhs - A_fb g` where `g` holds
/// the boundary values (zero when `boundary` is `None`).
pub fn apply_dirichlet(
    full: &CsrMatrix,
    rhs: &[f64],
    dofs: &DofMap,
    boundary_values: Option<&[f64]>,
) -> (CsrMatrix, Vec<f64>) {
    let a_ff = full.submatrix(
        dofs.free_map(),
        dofs.num_free(),
        dofs.free_map(),
        dofs.num_free(),
    );
    let mut b = rhs.to_vec();
    if let Some(g) = boundary_values {
        let a_fb = full.submatrix(
            dofs.free_map(),
            dofs.num_free(),
            dofs.boundary_map(),
            dofs.num_boundary(),
        );
        for (bi, lift) in b.iter_mut().zip(a_fb.mul_vec(g)) {
            *bi -= lift;
        }
    }
    (a_ff, b)
}

/// L2 and H1-seminorm errors of a P1 field given by nodal values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
}

/// Elementwise quadrature of `|u_h - u|^2` and `|grad u_h - grad u|^2`.
pub fn error_norms(
    mesh: &Mesh,
    nodal: &[f64],
    exact: impl Fn(Point) -> f64,
    grad_exact: impl Fn(Point) -> [f64; 2],
    rule: &TriangleRule,
) -> ErrorNorms {
    let (l2, h1) = squared_error_norms(mesh, nodal, exact, grad_exact, rule);
    ErrorNorms {
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
    }
}

pub(crate) fn squared_error_norms(
    mesh: &Mesh,
    nodal: &[f64],
    exact: impl Fn(Point) -> f64,
    grad_exact: impl Fn(Point) -> [f64; 2],
    rule: &TriangleRule,
) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (e, el) in mesh.elements().iter().enumerate() {
        let tri = mesh.triangle(e);
        let Ok((_, g)) = element_gradients(&tri) else {
            continue;
        };
        let u = el.vertices.map(|v| nodal[v]);
        let gh = [
            u[0] * g[0][0] + u[1] * g[1][0] + u[2] * g[2][0],
            u[0] * g[0][1] + u[1] * g[1][1] + u[2] * g[2][1],
        ];
        for (p, lam, w) in rule.on(&tri) {
            let uh = u[0] * lam[0] + u[1] * lam[1] + u[2] * lam[2];
            let d = uh - exact(p);
            let ge = grad_exact(p);
            l2 += w * d * d;
            h1 += w * ((gh[0] - ge[0]).powi(2) + (gh[1] - ge[1]).powi(2));
        }
    }
    (l2, h1)
}

/// Nodal values of `f` at every vertex.
pub fn nodal_values(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
    mesh.vertices().iter().map(|&p| f(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, Element, GeometrySpec};

    fn unit_square() -> Mesh {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let el = |v| Element {
            vertices: v,
            tag: Subdomain::Outer,
        };
        Mesh::from_parts(
            verts,
            vec![el([0, 1, 2]), el([0, 2, 3])],
            vec![true; 4],
            vec![],
        )
    }

    #[test]
    fn reference_triangle_stiffness() {
        let k = element_stiffness(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 1.0).unwrap();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        assert_eq!(k, expected);
    }

    #[test]
    fn stiffness_is_linear_in_coefficient() {
        let tri = [[0.1, 0.2], [0.9, 0.3], [0.4, 1.1]];
        let k1 = element_stiffness(&tri, 1.0).unwrap();
        let k2 = element_stiffness(&tri, 2.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k2[i][j], 2.0 * k1[i][j]);
            }
        }
    }

    #[test]
    fn collinear_triangle_is_rejected() {
        let tri = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        assert!(element_stiffness(&tri, 1.0).is_err());
    }

    #[test]
    fn two_triangle_square_matches_hand_scatter() {
        let mesh = unit_square();
        let dofs = DofMap::unconstrained(4);
        let coeff = CoefficientField::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let a = assemble_stiffness(&mesh, &coeff, Form::Permittivity, &dofs).unwrap();
        let mut expected = [[0.0; 4]; 4];
        for e in 0..2 {
            let k = element_stiffness(&mesh.triangle(e), 1.0).unwrap();
            let v = mesh.elements()[e].vertices;
            for p in 0..3 {
                for q in 0..3 {
                    expected[v[p]][v[q]] += k[p][q];
                }
            }
        }
        for i in 0..4 {
            let row: f64 = (0..4).map(|j| a.get(i, j)).sum();
            assert!(row.abs() < 1e-15);
            for j in 0..4 {
                assert_eq!(a.get(i, j), expected[i][j]);
            }
        }
    }

    #[test]
    fn unit_load_is_a_third_of_adjacent_area() {
        let mesh = unit_square();
        let dofs = DofMap::unconstrained(4);
        let b = assemble_load(&mesh, |_| 1.0, &TriangleRule::degree4(), &dofs);
        // vertices 0 and 2 touch both triangles, 1 and 3 one each
        let exp = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0];
        for (x, e) in b.iter().zip(exp) {
            assert!((x - e).abs() < 1e-15);
        }
        let zero = assemble_load(&mesh, |_| 0.0, &TriangleRule::degree4(), &dofs);
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interface_flux_of_one_sums_to_interface_length() {
        let spec = GeometrySpec::new(1.0, 0.5).unwrap();
        let mesh = generate_mesh(&spec, 16).unwrap();
        let dofs = DofMap::new(&mesh);
        let b = assemble_interface_flux(&mesh, |_| 1.0, &SegmentRule::gauss3(), &dofs).unwrap();
        let total: f64 = b.iter().sum();
        assert!((total - mesh.interface_length()).abs() < 1e-13);
        let z = assemble_interface_flux(&mesh, |_| 0.0, &SegmentRule::gauss3(), &dofs).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interface_flux_needs_interface() {
        let mesh = unit_square();
        let dofs = DofMap::unconstrained(4);
        assert_eq!(
            assemble_interface_flux(&mesh, |_| 1.0, &SegmentRule::gauss3(), &dofs),
            Err(AssemblyError::NoInterface)
        );
    }

    #[test]
    fn error_norm_of_constant_on_unit_square() {
        let mesh = unit_square();
        let e = error_norms(
            &mesh,
            &[0.0; 4],
            |_| 1.0,
            |_| [0.0, 0.0],
            &TriangleRule::degree4(),
        );
        assert!((e.l2 - 1.0).abs() < 1e-15);
        assert_eq!(e.h1_semi, 0.0);
    }

    #[test]
    fn error_norm_vanishes_on_p1_functions() {
        let spec = GeometrySpec::new(1.0, 0.5).unwrap();
        let mesh = generate_mesh(&spec, 8).unwrap();
        let f = |p: Point| 0.3 + 2.0 * p[0] - 1.5 * p[1];
        let nodal = nodal_values(&mesh, f);
        let e = error_norms(&mesh, &nodal, f, |_| [2.0, -1.5], &TriangleRule::degree4());
        assert!(e.l2 < 1e-14 && e.h1_semi < 1e-13, "{e:?}");
    }

    #[test]
    fn coefficient_validation() {
        assert!(CoefficientField::new(0.0, 0.0, 1.0, 1.0).is_ok());
        assert!(CoefficientField::new(-1.0, 0.0, 1.0, 1.0).is_err());
        assert!(CoefficientField::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(CoefficientField::new(1.0, 1.0, 1.0, f64::NAN).is_err());
    }
}
