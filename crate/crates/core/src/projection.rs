//! The elliptic projection `Q_h` used to initialize time stepping.
//!
//! For an initial datum with known strong form, `Q_h u0` solves
//!
//! ```text
//! a_2h(Q_h u0, v) = (fstar, v) + <gstar, v>_Gamma_h    for all free v
//! ```
//!
//! with `fstar = -eps_i lap u0` on each subdomain and `gstar` the
//! permittivity-weighted normal flux jump, evaluated on the chords of the
//! polygonal interface.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::assembly::{
    assemble_interface_flux, assemble_load, element_gradients, AssemblyError, CoefficientField,
    Discretization, DofMap, Form,
};
use crate::mesh::{signed_area, GeometrySpec, Mesh};
use crate::quadrature::{SegmentRule, TriangleRule};
use crate::solver::{cg_solve, SolverConfig, SolverError};
use crate::{GradientFn, Point, SpatialFn};

/// Subdivision depth for triangles cut by the true interface.
const CUT_DEPTH: u32 = 4;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// How the initial vector was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialMethod {
    Projection,
    Interpolation,
    Given,
}

impl fmt::Display for InitialMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Projection => "projection",
            Self::Interpolation => "interpolation",
            Self::Given => "given",
        })
    }
}

/// Free-dof initial vector with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub values: Vec<f64>,
    pub method: InitialMethod,
}

impl InitialState {
    pub fn given(values: Vec<f64>) -> Self {
        Self {
            values,
            method: InitialMethod::Given,
        }
    }

    pub fn zero(dofs: &DofMap) -> Self {
        Self::given(vec![0.0; dofs.num_free()])
    }
}

/// Smooth extension of `u0` from one subdomain.
#[derive(Clone)]
pub struct Branch {
    pub value: SpatialFn,
    pub gradient: GradientFn,
    pub laplacian: SpatialFn,
}

/// Initial datum with its strong-form data.
#[derive(Clone)]
pub struct InitialDatum {
    pub u0: SpatialFn,
    pub grad_u0: GradientFn,
    pub fstar: SpatialFn,
    pub gstar: SpatialFn,
    /// Values on the outer boundary; `None` means `u0 = 0` there.
    pub boundary: Option<SpatialFn>,
}

impl fmt::Debug for InitialDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialDatum")
            .field("boundary", &self.boundary.is_some())
            .finish_non_exhaustive()
    }
}

impl InitialDatum {
    pub fn zero() -> Self {
        Self {
            u0: Arc::new(|_| 0.0),
            grad_u0: Arc::new(|_| [0.0; 2]),
            fstar: Arc::new(|_| 0.0),
            gstar: Arc::new(|_| 0.0),
            boundary: None,
        }
    }

    /// Builds `fstar` and `gstar` from per-subdomain branches `[inner, outer]`.
    ///
    /// Subdomain membership of a point follows the true circle. `gstar` is
    /// `(eps1 grad u1 - eps2 grad u2) . x/|x|`.
    pub fn from_branches(spec: GeometrySpec, eps: [f64; 2], branches: [Branch; 2]) -> Self {
        let [b1, b2] = branches;
        let pick = move |p: Point| spec.subdomain_of(p).index();
        let (v1, v2) = (b1.value.clone(), b2.value.clone());
        let u0: SpatialFn = Arc::new(move |p| if pick(p) == 0 { v1(p) } else { v2(p) });
        let (g1, g2) = (b1.gradient.clone(), b2.gradient.clone());
        let grad_u0: GradientFn = Arc::new(move |p| if pick(p) == 0 { g1(p) } else { g2(p) });
        let (l1, l2) = (b1.laplacian.clone(), b2.laplacian.clone());
        let fstar: SpatialFn = Arc::new(move |p| {
            if pick(p) == 0 {
                -eps[0] * l1(p)
            } else {
                -eps[1] * l2(p)
            }
        });
        let (g1, g2) = (b1.gradient, b2.gradient);
        let gstar: SpatialFn = Arc::new(move |p| {
            let r = p[0].hypot(p[1]);
            if r == 0.0 {
                return 0.0;
            }
            let (d1, d2) = (g1(p), g2(p));
            let jump = [
                eps[0] * d1[0] - eps[1] * d2[0],
                eps[0] * d1[1] - eps[1] * d2[1],
            ];
            (jump[0] * p[0] + jump[1] * p[1]) / r
        });
        Self {
            u0,
            grad_u0,
            fstar,
            gstar,
            boundary: None,
        }
    }

    pub fn with_boundary(mut self, g: SpatialFn) -> Self {
        self.boundary = Some(g);
        self
    }

    /// `alpha self + beta other` with all strong-form data combined.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        let lin = |f: &SpatialFn, g: &SpatialFn| -> SpatialFn {
            let (f, g) = (f.clone(), g.clone());
            Arc::new(move |p| alpha * f(p) + beta * g(p))
        };
        let (ga, gb) = (self.grad_u0.clone(), other.grad_u0.clone());
        let boundary = match (&self.boundary, &other.boundary) {
            (None, None) => None,
            (a, b) => {
                let zero: SpatialFn = Arc::new(|_| 0.0);
                Some(lin(
                    a.as_ref().unwrap_or(&zero),
                    b.as_ref().unwrap_or(&zero),
                ))
            }
        };
        Self {
            u0: lin(&self.u0, &other.u0),
            grad_u0: Arc::new(move |p| {
                let (a, b) = (ga(p), gb(p));
                [alpha * a[0] + beta * b[0], alpha * a[1] + beta * b[1]]
            }),
            fstar: lin(&self.fstar, &other.fstar),
            gstar: lin(&self.gstar, &other.gstar),
            boundary,
        }
    }
}

fn boundary_vector(mesh: &Mesh, disc: &Discretization, datum: &InitialDatum) -> Vec<f64> {
    match &datum.boundary {
        Some(g) => disc.boundary_values(mesh, |p| g(p)),
        None => vec![0.0; disc.dofs.num_boundary()],
    }
}

/// Load `(fstar, v) + <gstar, v>` on the free dofs, lifted by the boundary values.
fn projection_rhs(
    mesh: &Mesh,
    disc: &Discretization,
    datum: &InitialDatum,
) -> Result<Vec<f64>, AssemblyError> {
    let mut b = assemble_load(
        mesh,
        |p| (datum.fstar)(p),
        &TriangleRule::degree4(),
        &disc.dofs,
    );
    if !mesh.interface_edges().is_empty() {
        let flux = assemble_interface_flux(
            mesh,
            |p| (datum.gstar)(p),
            &SegmentRule::gauss3(),
            &disc.dofs,
        )?;
        for (bi, fi) in b.iter_mut().zip(flux) {
            *bi += fi;
        }
    }
    if datum.boundary.is_some() {
        let g = boundary_vector(mesh, disc, datum);
        let lift = disc.coupling_block(Form::Permittivity).mul_vec(&g);
        for (bi, li) in b.iter_mut().zip(lift) {
            *bi -= li;
        }
    }
    Ok(b)
}

/// `Q_h u0` on the free dofs.
pub fn qh_project(
    mesh: &Mesh,
    disc: &Discretization,
    datum: &InitialDatum,
    cfg: &SolverConfig,
) -> Result<InitialState, ProjectionError> {
    let b = projection_rhs(mesh, disc, datum)?;
    let a = disc.free_block(Form::Permittivity);
    let out = cg_solve(&a, &b, cfg, None)?;
    Ok(InitialState {
        values: out.x,
        method: InitialMethod::Projection,
    })
}

/// Vertex values of `u0` at the free dofs.
pub fn nodal_interpolate(mesh: &Mesh, dofs: &DofMap, u0: impl Fn(Point) -> f64) -> InitialState {
    InitialState {
        values: dofs
            .free_vertices()
            .iter()
            .map(|&v| u0(mesh.vertices()[v]))
            .collect(),
        method: InitialMethod::Interpolation,
    }
}

fn cut_by_circle(tri: &[Point; 3], r0: f64) -> bool {
    let rmax = tri.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    if rmax < r0 {
        return false;
    }
    // distance from the origin to the closed triangle
    let o = [0.0, 0.0];
    let s = [0, 1, 2].map(|k| signed_area(&[tri[k], tri[(k + 1) % 3], o]));
    if s.iter().all(|&x| x >= 0.0) || s.iter().all(|&x| x <= 0.0) {
        return true;
    }
    let mut dmin = f64::INFINITY;
    for k in 0..3 {
        let (a, b) = (tri[k], tri[(k + 1) % 3]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let t = (-(a[0] * d[0] + a[1] * d[1]) / (d[0] * d[0] + d[1] * d[1])).clamp(0.0, 1.0);
        dmin = dmin.min((a[0] + t * d[0]).hypot(a[1] + t * d[1]));
    }
    dmin <= r0
}

fn subdivide(tri: &[Point; 3], depth: u32, out: &mut Vec<[Point; 3]>) {
    if depth == 0 {
        out.push(*tri);
        return;
    }
    let mid = |a: Point, b: Point| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let [a, b, c] = *tri;
    let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
    for t in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
        subdivide(&t, depth - 1, out);
    }
}

/// `max_i |a_2(u0, phi_i) - a_2h(q, phi_i)|` over the free basis functions.
///
/// `a_2(u0, .)` is integrated over the true subdomains with the degree-6 rule,
/// subdividing elements cut by the circle.
pub fn galerkin_orthogonality_residual(
    mesh: &Mesh,
    disc: &Discretization,
    spec: &GeometrySpec,
    datum: &InitialDatum,
    q: &[f64],
) -> f64 {
    let coeff: &CoefficientField = &disc.coeff;
    let rule = TriangleRule::degree6();
    let r0 = spec.interface_radius();
    let g = boundary_vector(mesh, disc, datum);
    let full = disc.dofs.expand(q, &g);
    let ah = disc.full(Form::Permittivity).mul_vec(&full);

    let mut exact = vec![0.0; disc.dofs.num_free()];
    let mut pieces = Vec::new();
    for (e, el) in mesh.elements().iter().enumerate() {
        let tri = mesh.triangle(e);
        let Ok((_, grads)) = element_gradients(&tri) else {
            continue;
        };
        pieces.clear();
        subdivide(
            &tri,
            if cut_by_circle(&tri, r0) {
                CUT_DEPTH
            } else {
                0
            },
            &mut pieces,
        );
        let mut flux = [0.0; 2];
        for piece in &pieces {
            for (p, _, w) in rule.on(piece) {
                let eps = coeff.eps(spec.subdomain_of(p));
                let du = (datum.grad_u0)(p);
                flux[0] += w * eps * du[0];
                flux[1] += w * eps * du[1];
            }
        }
        for k in 0..3 {
            if let Some(i) = disc.dofs.free_index(el.vertices[k]) {
                exact[i] += flux[0] * grads[k][0] + flux[1] * grads[k][1];
            }
        }
    }
    disc.dofs
        .free_vertices()
        .iter()
        .zip(&exact)
        .map(|(&v, ex)| (ex - ah[v]).abs())
        .fold(0.0, f64::max)
}

/// `a_2(u0, u0)` over the true subdomains.
pub fn continuous_energy(
    mesh: &Mesh,
    spec: &GeometrySpec,
    coeff: &CoefficientField,
    datum: &InitialDatum,
) -> f64 {
    let rule = TriangleRule::degree6();
    let mut pieces = Vec::new();
    let mut total = 0.0;
    for e in 0..mesh.num_elements() {
        let tri = mesh.triangle(e);
        pieces.clear();
        let depth = if cut_by_circle(&tri, spec.interface_radius()) {
            CUT_DEPTH
        } else {
            0
        };
        subdivide(&tri, depth, &mut pieces);
        for piece in &pieces {
            total += rule.integrate(piece, |p| {
                let d = (datum.grad_u0)(p);
                coeff.eps(spec.subdomain_of(p)) * (d[0] * d[0] + d[1] * d[1])
            });
        }
    }
    total
}
