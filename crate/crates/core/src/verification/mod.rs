//! Manufactured solutions, their consistency samplers, space-time error
//! norms and convergence-rate studies.
//!
//! Both built-in cases are separable, `u(t, x) = alpha(t) phi_i(x)` on
//! subdomain `i`, so the forcing is
//! `f = -(sigma_i alpha + eps_i alpha') lap phi_i`.

mod study;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::assembly::CoefficientField;
use crate::mesh::{GeometrySpec, Subdomain};
use crate::projection::{Branch, InitialDatum};
use crate::timestepping::{BoundaryData, Forcing};
use crate::{Point, SpatialFn, TimeFn};

pub use study::{
    convergence_study, fit_slope, grid_for, levels_for, nominal_h, spacetime_errors, spacetime_gap,
    ConvergenceReport, Level, LevelResult, RateMode, SlopeCheck, StudyError, StudyOptions,
    DEGENERATE_FLOOR, TAU_PER_H, TAU_PER_H2,
};

/// Sampler tolerance for the interface conditions.
pub const JUMP_TOLERANCE: f64 = 1e-10;
/// Sampler tolerance for the strong form, relative to `max(1, |f|)`.
pub const STRONG_FORM_TOLERANCE: f64 = 1e-8;

/// Times at which the samplers evaluate the case.
const SAMPLE_TIMES: [f64; 4] = [0.0, 0.25, 0.6, 1.0];

/// Exact solution `alpha(t) phi_i(x)` with its data.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub spec: GeometrySpec,
    pub coeff: CoefficientField,
    pub alpha: TimeFn,
    pub alpha_rate: TimeFn,
    /// Spatial profiles `[inner, outer]`.
    pub profiles: [Branch; 2],
    /// Whether `u` is prescribed nonzero on the outer boundary.
    pub lifted: bool,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("spec", &self.spec)
            .field("coeff", &self.coeff)
            .field("lifted", &self.lifted)
            .finish_non_exhaustive()
    }
}

/// Outcome of one sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerReport {
    pub samples: usize,
    pub max_violation: f64,
    pub tolerance: f64,
}

impl SamplerReport {
    pub fn passed(&self) -> bool {
        self.max_violation < self.tolerance
    }
}

impl ManufacturedCase {
    fn branch(&self, s: Subdomain) -> &Branch {
        &self.profiles[s.index()]
    }

    /// Extended cases leave the homogeneous Dirichlet setting.
    pub fn is_extended(&self) -> bool {
        self.lifted
    }

    pub fn exact(&self, t: f64, p: Point) -> f64 {
        (self.alpha)(t) * (self.branch(self.spec.subdomain_of(p)).value)(p)
    }

    pub fn gradient(&self, t: f64, p: Point) -> [f64; 2] {
        let a = (self.alpha)(t);
        let g = (self.branch(self.spec.subdomain_of(p)).gradient)(p);
        [a * g[0], a * g[1]]
    }

    pub fn rate(&self, t: f64, p: Point) -> f64 {
        (self.alpha_rate)(t) * (self.branch(self.spec.subdomain_of(p)).value)(p)
    }

    /// `f(t, x)` split into its two separable terms.
    pub fn forcing(&self) -> Forcing {
        let spec = self.spec;
        let coeff = self.coeff;
        let lap = [
            self.profiles[0].laplacian.clone(),
            self.profiles[1].laplacian.clone(),
        ];
        let term = |w: [f64; 2]| -> SpatialFn {
            let lap = lap.clone();
            Arc::new(move |p| {
                let i = spec.subdomain_of(p).index();
                -w[i] * (lap[i])(p)
            })
        };
        Forcing::Separable(vec![
            (self.alpha.clone(), term(coeff.sigmas())),
            (self.alpha_rate.clone(), term(coeff.epss())),
        ])
    }

    pub fn boundary(&self) -> Option<BoundaryData> {
        if !self.lifted {
            return None;
        }
        let outer = self.profiles[1].value.clone();
        let (a, da) = (self.alpha.clone(), self.alpha_rate.clone());
        let o2 = outer.clone();
        Some(BoundaryData {
            value: Arc::new(move |t, p| a(t) * outer(p)),
            rate: Arc::new(move |t, p| da(t) * o2(p)),
        })
    }

    /// `u(0, .)` with `fstar`, `gstar` for the projection.
    pub fn initial_datum(&self) -> InitialDatum {
        let a0 = (self.alpha)(0.0);
        let scale = |b: &Branch| {
            let (v, g, l) = (b.value.clone(), b.gradient.clone(), b.laplacian.clone());
            Branch {
                value: Arc::new(move |p| a0 * v(p)),
                gradient: Arc::new(move |p| {
                    let d = g(p);
                    [a0 * d[0], a0 * d[1]]
                }),
                laplacian: Arc::new(move |p| a0 * l(p)),
            }
        };
        let datum = InitialDatum::from_branches(
            self.spec,
            self.coeff.epss(),
            [scale(&self.profiles[0]), scale(&self.profiles[1])],
        );
        if self.lifted {
            let outer = self.profiles[1].value.clone();
            datum.with_boundary(Arc::new(move |p| a0 * outer(p)))
        } else {
            datum
        }
    }

    /// `[u]` and `[sigma du/dnu + eps du'/dnu]` at 100 points of the circle
    /// for several times, from the one-sided branches.
    pub fn check_jump_conditions(&self) -> SamplerReport {
        let r0 = self.spec.interface_radius();
        let (b1, b2) = (&self.profiles[0], &self.profiles[1]);
        let [s1, s2] = self.coeff.sigmas();
        let [e1, e2] = self.coeff.epss();
        let mut worst: f64 = 0.0;
        let mut samples = 0;
        for &t in &SAMPLE_TIMES {
            let (a, da) = ((self.alpha)(t), (self.alpha_rate)(t));
            for k in 0..100 {
                let th = 2.0 * PI * (k as f64 + 0.5) / 100.0;
                let nu = [th.cos(), th.sin()];
                let p = [r0 * nu[0], r0 * nu[1]];
                let jump_u = a * ((b1.value)(p) - (b2.value)(p));
                let (g1, g2) = ((b1.gradient)(p), (b2.gradient)(p));
                let dn1 = g1[0] * nu[0] + g1[1] * nu[1];
                let dn2 = g2[0] * nu[0] + g2[1] * nu[1];
                let jump_flux = (s1 * a + e1 * da) * dn1 - (s2 * a + e2 * da) * dn2;
                worst = worst.max(jump_u.abs()).max(jump_flux.abs());
                samples += 1;
            }
        }
        SamplerReport {
            samples,
            max_violation: worst,
            tolerance: JUMP_TOLERANCE,
        }
    }

    /// `-div(sigma grad u + eps grad u') - f` at 100 interior points per
    /// subdomain for several times.
    ///
    /// The divergence is a fourth-order central difference of the analytic
    /// gradients, and each gradient is itself compared with a difference
    /// quotient of the values, so the check is independent of the stored
    /// Laplacians that generate `f`.
    pub fn check_strong_form(&self) -> SamplerReport {
        let forcing = self.forcing();
        let mut worst: f64 = 0.0;
        let mut samples = 0;
        for s in [Subdomain::Inner, Subdomain::Outer] {
            let b = self.branch(s);
            let (sig, eps) = (self.coeff.sigma(s), self.coeff.eps(s));
            for p in interior_samples(&self.spec, s, 100) {
                let div = fd_divergence(&b.gradient, p);
                let grad_gap = fd_gradient_gap(&b.value, &b.gradient, p);
                for &t in &SAMPLE_TIMES {
                    let (a, da) = ((self.alpha)(t), (self.alpha_rate)(t));
                    let lhs = -(sig * a + eps * da) * div;
                    let f = forcing.evaluate(t, p);
                    let v = (lhs - f).abs() / f.abs().max(1.0);
                    worst = worst.max(v).max(grad_gap);
                }
                samples += 1;
            }
        }
        SamplerReport {
            samples,
            max_violation: worst,
            tolerance: STRONG_FORM_TOLERANCE,
        }
    }

    /// Both samplers pass.
    pub fn gates_pass(&self) -> bool {
        self.check_jump_conditions().passed() && self.check_strong_form().passed()
    }
}

const FD_STEP: f64 = 1e-3;

// fourth-order central difference of a scalar function along `d`
fn fd4(f: impl Fn(Point) -> f64, p: Point, d: [f64; 2]) -> f64 {
    let h = FD_STEP;
    let at = |s: f64| f([p[0] + s * d[0], p[1] + s * d[1]]);
    (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h)
}

fn fd_divergence(grad: &crate::GradientFn, p: Point) -> f64 {
    fd4(|q| grad(q)[0], p, [1.0, 0.0]) + fd4(|q| grad(q)[1], p, [0.0, 1.0])
}

fn fd_gradient_gap(value: &SpatialFn, grad: &crate::GradientFn, p: Point) -> f64 {
    let g = grad(p);
    let gx = fd4(|q| value(q), p, [1.0, 0.0]);
    let gy = fd4(|q| value(q), p, [0.0, 1.0]);
    let scale = g[0].abs().max(g[1].abs()).max(1.0);
    (gx - g[0]).abs().max((gy - g[1]).abs()) / scale
}

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Deterministic quasi-random points of one subdomain, kept clear of the
/// circle and the outer boundary by a margin wider than the difference stencil.
pub fn interior_samples(spec: &GeometrySpec, s: Subdomain, count: usize) -> Vec<Point> {
    let a = spec.half_width();
    let r0 = spec.interface_radius();
    let margin = 0.01;
    let mut out = Vec::with_capacity(count);
    let mut i = 1;
    while out.len() < count {
        let p = [
            a * (2.0 * halton(i, 2) - 1.0),
            a * (2.0 * halton(i, 3) - 1.0),
        ];
        i += 1;
        let r = p[0].hypot(p[1]);
        let clear = (r - r0).abs() > margin && p[0].abs() < a - margin && p[1].abs() < a - margin;
        if clear && spec.subdomain_of(p) == s {
            out.push(p);
        }
    }
    out
}

fn polynomial_profile_a(r0: f64) -> Branch {
    let r0s = r0 * r0;
    // psi = P(r) S(x, y), P = (r^2 - r0^2)^2, S = (1 - x^2)^2 (1 - y^2)^2
    let q = |x: f64| (1.0 - x * x).powi(2);
    let dq = |x: f64| -4.0 * x * (1.0 - x * x);
    let d2q = |x: f64| 12.0 * x * x - 4.0;
    Branch {
        value: Arc::new(move |p| {
            let w = p[0] * p[0] + p[1] * p[1] - r0s;
            w * w * q(p[0]) * q(p[1])
        }),
        gradient: Arc::new(move |p| {
            let (x, y) = (p[0], p[1]);
            let w = x * x + y * y - r0s;
            let s = q(x) * q(y);
            [
                4.0 * w * x * s + w * w * dq(x) * q(y),
                4.0 * w * y * s + w * w * q(x) * dq(y),
            ]
        }),
        laplacian: Arc::new(move |p| {
            let (x, y) = (p[0], p[1]);
            let r2 = x * x + y * y;
            let w = r2 - r0s;
            let s = q(x) * q(y);
            let lap_p = 8.0 * r2 + 8.0 * w;
            let grad_dot = 4.0 * w * (x * dq(x) * q(y) + y * q(x) * dq(y));
            let lap_s = d2q(x) * q(y) + q(x) * d2q(y);
            lap_p * s + 2.0 * grad_dot + w * w * lap_s
        }),
    }
}

/// Smooth solution whose gradient vanishes on the circle.
///
/// `u = (1 + t e^{-t}) (r^2 - r0^2)^2 (1 - x^2)^2 (1 - y^2)^2` on `(-1, 1)^2`
/// with `r0 = 0.5`, `sigma = (1, 10)`, `eps = (1, 0.1)`.
pub fn case_a() -> ManufacturedCase {
    case_a_with(CoefficientField::new(1.0, 10.0, 1.0, 0.1).expect("valid coefficients"))
}

/// [`case_a`] with other coefficients; the jump conditions hold for any.
pub fn case_a_with(coeff: CoefficientField) -> ManufacturedCase {
    let spec = GeometrySpec::new(1.0, 0.5).expect("valid geometry");
    let profile = polynomial_profile_a(spec.interface_radius());
    ManufacturedCase {
        name: "A",
        spec,
        coeff,
        alpha: Arc::new(|t| 1.0 + t * (-t).exp()),
        alpha_rate: Arc::new(|t| (-t).exp() * (1.0 - t)),
        profiles: [profile.clone(), profile],
        lifted: false,
    }
}

/// Genuine gradient jump with equal relaxation rates `sigma_i / eps_i = kappa`.
///
/// `u = (e^{-kappa t} + 1) phi_i(r)` with `phi_1 = a1 r^2`,
/// `phi_2 = a2 r^2 + b2`, `a2 = a1 eps1 / eps2`, `b2 = r0^2 (a1 - a2)`, and
/// nonzero Dirichlet data on the outer boundary.
pub fn case_b() -> ManufacturedCase {
    let kappa = 2.0;
    let eps = [1.0, 4.0];
    let spec = GeometrySpec::new(1.0, 0.5).expect("valid geometry");
    let coeff = CoefficientField::new(kappa * eps[0], kappa * eps[1], eps[0], eps[1])
        .expect("valid coefficients");
    let r0 = spec.interface_radius();
    let a1 = 1.0;
    let a2 = a1 * eps[0] / eps[1];
    let b2 = r0 * r0 * (a1 - a2);
    let radial = |a: f64, b: f64| Branch {
        value: Arc::new(move |p| a * (p[0] * p[0] + p[1] * p[1]) + b),
        gradient: Arc::new(move |p| [2.0 * a * p[0], 2.0 * a * p[1]]),
        laplacian: Arc::new(move |_| 4.0 * a),
    };
    ManufacturedCase {
        name: "B",
        spec,
        coeff,
        alpha: Arc::new(move |t| (-kappa * t).exp() + 1.0),
        alpha_rate: Arc::new(move |t| -kappa * (-kappa * t).exp()),
        profiles: [radial(a1, 0.0), radial(a2, b2)],
        lifted: true,
    }
}

/// Looks a case up by name (`A` or `B`, case-insensitive).
pub fn case_by_name(name: &str) -> Option<ManufacturedCase> {
    match name.to_ascii_uppercase().as_str() {
        "A" => Some(case_a()),
        "B" => Some(case_b()),
        _ => None,
    }
}
