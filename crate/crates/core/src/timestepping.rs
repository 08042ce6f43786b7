//! Backward-Euler time stepping, an order-4 semi-discrete reference and the
//! per-step discrete energy identity.
//!
//! All vectors live on the free dofs of a [`Discretization`]. Prescribed
//! boundary values enter through the lifting
//!
//! ```text
//! b_n = F_n - A_sigma,fb g^n - A_eps,fb (g^n - g^{n-1}) / tau
//! ```
//!
//! which reduces to the bare load `F_n` for homogeneous data.

use std::fmt;

use thiserror::Error;

use crate::assembly::{assemble_load, AssemblyError, Discretization, Form};
use crate::mesh::Mesh;
use crate::projection::{InitialMethod, InitialState};
use crate::pulses::PulseShape;
use crate::quadrature::TriangleRule;
use crate::solver::{cg_solve, BandedCholesky, CgOutcome, SolverConfig, SolverError};
use crate::sparse::{dot, CsrMatrix};
use crate::{SpaceTimeFn, SpatialFn, TimeFn};

/// Largest `dt * max(sigma/eps)` accepted by the reference integrator.
/// The real stability interval of the classical 4-stage method ends near 2.785.
pub const RK4_STABILITY_LIMIT: f64 = 2.5;

#[derive(Debug, Error)]
pub enum TimeStepError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("reference step {dt:e} is unstable for relaxation rate {rate:e}")]
    Unstable { dt: f64, rate: f64 },
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: SolverError,
        partial: Box<Trajectory>,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// Uniform grid `t^n = n T / N`, `n = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(final_time: f64, steps: usize) -> Result<Self, TimeStepError> {
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(TimeStepError::InvalidGrid(format!(
                "final time {final_time} must be positive"
            )));
        }
        if steps == 0 {
            return Err(TimeStepError::InvalidGrid(
                "at least one step is required".into(),
            ));
        }
        Ok(Self { final_time, steps })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn node(&self, n: usize) -> f64 {
        if n == self.steps {
            self.final_time
        } else {
            n as f64 * self.final_time / self.steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.node(n)).collect()
    }
}

/// Right-hand side `f(t, x)`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// `sum_k p_k(t) g_k(x)`; spatial loads are assembled once.
    Separable(Vec<(TimeFn, SpatialFn)>),
    General(SpaceTimeFn),
}

impl Forcing {
    pub fn pulse(pulse: PulseShape, profile: SpatialFn) -> Self {
        let p: TimeFn = std::sync::Arc::new(move |t| pulse.value(t));
        Self::Separable(vec![(p, profile)])
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    pub fn evaluate(&self, t: f64, x: crate::Point) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Separable(terms) => terms.iter().map(|(p, g)| p(t) * g(x)).sum(),
            Self::General(f) => f(t, x),
        }
    }
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Forcing::Zero"),
            Self::Separable(t) => write!(f, "Forcing::Separable({} terms)", t.len()),
            Self::General(_) => write!(f, "Forcing::General"),
        }
    }
}

/// Dirichlet data `g(t, x)` on the outer boundary with its time derivative.
#[derive(Clone)]
pub struct BoundaryData {
    pub value: SpaceTimeFn,
    pub rate: SpaceTimeFn,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryData")
    }
}

/// The spatial problem shared by all runs on one mesh.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub mesh: &'a Mesh,
    pub disc: &'a Discretization,
    pub forcing: &'a Forcing,
    pub boundary: Option<&'a BoundaryData>,
}

/// Free-dof loads `(f(t), phi_i)` with cached spatial parts.
struct LoadAssembler<'a> {
    problem: Problem<'a>,
    rule: TriangleRule,
    cached: Vec<Vec<f64>>,
}

impl<'a> LoadAssembler<'a> {
    fn new(problem: Problem<'a>) -> Self {
        let rule = TriangleRule::degree4();
        let cached = match problem.forcing {
            Forcing::Separable(terms) => terms
                .iter()
                .map(|(_, g)| assemble_load(problem.mesh, |x| g(x), &rule, &problem.disc.dofs))
                .collect(),
            _ => Vec::new(),
        };
        Self {
            problem,
            rule,
            cached,
        }
    }

    fn at(&self, t: f64) -> Vec<f64> {
        let n = self.problem.disc.dofs.num_free();
        match self.problem.forcing {
            Forcing::Zero => vec![0.0; n],
            Forcing::Separable(terms) => {
                let mut b = vec![0.0; n];
                for ((p, _), load) in terms.iter().zip(&self.cached) {
                    let c = p(t);
                    for (bi, li) in b.iter_mut().zip(load) {
                        *bi += c * li;
                    }
                }
                b
            }
            Forcing::General(f) => assemble_load(
                self.problem.mesh,
                |x| f(t, x),
                &self.rule,
                &self.problem.disc.dofs,
            ),
        }
    }
}

fn boundary_at(problem: &Problem<'_>, t: f64, rate: bool) -> Vec<f64> {
    match problem.boundary {
        None => vec![0.0; problem.disc.dofs.num_boundary()],
        Some(bd) => {
            let f = if rate { &bd.rate } else { &bd.value };
            problem.disc.boundary_values(problem.mesh, |x| f(t, x))
        }
    }
}

/// Per-step linear solver record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub iterations: usize,
    pub residual: f64,
}

/// States `u^0, ..., u^N` on the free dofs.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<Vec<f64>>,
    /// Boundary values at every node (empty vectors inside for meshes
    /// without boundary dofs).
    pub boundary: Vec<Vec<f64>>,
    /// Effective load `b_n` of step `n` at index `n - 1`.
    pub loads: Vec<Vec<f64>>,
    pub stats: Vec<StepStats>,
    pub initial: InitialMethod,
}

impl Trajectory {
    /// Full nodal vector at node `n`.
    pub fn full_state(&self, disc: &Discretization, n: usize) -> Vec<f64> {
        disc.dofs.expand(&self.states[n], &self.boundary[n])
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds at least u^0")
    }
}

/// One step `(A_sigma + A_eps / tau) u^n = f_n + (A_eps / tau) u_prev`.
pub fn backward_euler_step(
    a_sigma: &CsrMatrix,
    a_eps: &CsrMatrix,
    grid: &TimeGrid,
    u_prev: &[f64],
    f_n: &[f64],
    cfg: &SolverConfig,
) -> Result<CgOutcome, SolverError> {
    BackwardEuler::new(a_sigma, a_eps, grid)?.step(u_prev, f_n, cfg)
}

/// Step operator with its system matrix built once.
#[derive(Debug, Clone)]
pub struct BackwardEuler {
    system: CsrMatrix,
    mass: CsrMatrix,
}

impl BackwardEuler {
    pub fn new(
        a_sigma: &CsrMatrix,
        a_eps: &CsrMatrix,
        grid: &TimeGrid,
    ) -> Result<Self, SolverError> {
        if a_sigma.nrows() != a_eps.nrows() || a_sigma.ncols() != a_eps.ncols() {
            return Err(SolverError::Dimension(
                "A_sigma and A_eps differ in shape".into(),
            ));
        }
        let inv_tau = 1.0 / grid.tau();
        Ok(Self {
            system: CsrMatrix::combine(&[(1.0, a_sigma), (inv_tau, a_eps)]),
            mass: a_eps.scaled(inv_tau),
        })
    }

    pub fn system(&self) -> &CsrMatrix {
        &self.system
    }

    pub fn rhs(&self, u_prev: &[f64], f_n: &[f64]) -> Vec<f64> {
        let mut b = self.mass.mul_vec(u_prev);
        for (bi, fi) in b.iter_mut().zip(f_n) {
            *bi += fi;
        }
        b
    }

    pub fn step(
        &self,
        u_prev: &[f64],
        f_n: &[f64],
        cfg: &SolverConfig,
    ) -> Result<CgOutcome, SolverError> {
        if u_prev.len() != self.system.nrows() || f_n.len() != self.system.nrows() {
            return Err(SolverError::Dimension(format!(
                "system of size {}, state {}, load {}",
                self.system.nrows(),
                u_prev.len(),
                f_n.len()
            )));
        }
        let b = self.rhs(u_prev, f_n);
        cg_solve(&self.system, &b, cfg, Some(u_prev))
    }
}

fn check_initial(disc: &Discretization, initial: &InitialState) -> Result<(), TimeStepError> {
    if initial.values.len() != disc.dofs.num_free() {
        return Err(TimeStepError::Dimension(format!(
            "initial state has {} entries for {} free dofs",
            initial.values.len(),
            disc.dofs.num_free()
        )));
    }
    Ok(())
}

/// The fully discrete scheme started from `initial`.
pub fn run_fully_discrete(
    problem: Problem<'_>,
    initial: &InitialState,
    grid: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<Trajectory, TimeStepError> {
    let disc = problem.disc;
    check_initial(disc, initial)?;
    let a_sigma = disc.free_block(Form::Conductivity);
    let a_eps = disc.free_block(Form::Permittivity);
    let c_sigma = disc.coupling_block(Form::Conductivity);
    let c_eps = disc.coupling_block(Form::Permittivity);
    let stepper = BackwardEuler::new(&a_sigma, &a_eps, grid)?;
    let loads = LoadAssembler::new(problem);
    let tau = grid.tau();

    let mut traj = Trajectory {
        grid: *grid,
        states: vec![initial.values.clone()],
        boundary: vec![boundary_at(&problem, 0.0, false)],
        loads: Vec::with_capacity(grid.steps()),
        stats: Vec::with_capacity(grid.steps()),
        initial: initial.method,
    };
    for n in 1..=grid.steps() {
        let t = grid.node(n);
        let mut b = loads.at(t);
        let g = boundary_at(&problem, t, false);
        if problem.boundary.is_some() {
            let g_prev = &traj.boundary[n - 1];
            let dg: Vec<f64> = g.iter().zip(g_prev).map(|(a, b)| (a - b) / tau).collect();
            let ls = c_sigma.mul_vec(&g);
            let le = c_eps.mul_vec(&dg);
            for ((bi, x), y) in b.iter_mut().zip(ls).zip(le) {
                *bi -= x + y;
            }
        }
        match stepper.step(&traj.states[n - 1], &b, cfg) {
            Ok(out) => {
                traj.stats.push(StepStats {
                    iterations: out.iterations,
                    residual: out.residual,
                });
                traj.states.push(out.x);
                traj.boundary.push(g);
                traj.loads.push(b);
            }
            Err(source) => {
                return Err(TimeStepError::Step {
                    step: n,
                    source,
                    partial: Box::new(traj),
                })
            }
        }
    }
    Ok(traj)
}

/// Relative residual of
///
/// ```text
/// a1(u^n,u^n) - a1(u^{n-1},u^{n-1}) + tau^2 a1(du,du) + 2 tau a2(du,du) = 2 tau (b_n, du)
/// ```
///
/// per step, with `du = (u^n - u^{n-1}) / tau`. Each residual is scaled by
/// the sum of absolute values of the five terms; an all-zero step scores 0.
pub fn energy_identity_residual(
    a_sigma: &CsrMatrix,
    a_eps: &CsrMatrix,
    traj: &Trajectory,
) -> Vec<f64> {
    let tau = traj.grid.tau();
    (1..traj.states.len())
        .map(|n| {
            let (u, up) = (&traj.states[n], &traj.states[n - 1]);
            let du: Vec<f64> = u.iter().zip(up).map(|(a, b)| (a - b) / tau).collect();
            let terms = [
                a_sigma.quadratic_form(u),
                -a_sigma.quadratic_form(up),
                tau * tau * a_sigma.quadratic_form(&du),
                2.0 * tau * a_eps.quadratic_form(&du),
                -2.0 * tau * dot(&traj.loads[n - 1], &du),
            ];
            let scale: f64 = terms.iter().map(|t| t.abs()).sum();
            if scale == 0.0 {
                0.0
            } else {
                terms.iter().sum::<f64>().abs() / scale
            }
        })
        .collect()
}

/// Classical 4-stage Runge-Kutta integration of
/// `A_eps u' = F(t) - A_sigma u` (with boundary lifting), sampled on `grid`.
///
/// `substeps` counts steps over `[0, T]` and must be a multiple of the grid's
/// step count. Stage solves reuse one banded Cholesky factor of `A_eps`.
pub fn run_semidiscrete_reference(
    problem: Problem<'_>,
    initial: &InitialState,
    grid: &TimeGrid,
    substeps: usize,
) -> Result<Trajectory, TimeStepError> {
    let disc = problem.disc;
    check_initial(disc, initial)?;
    if substeps == 0 || !substeps.is_multiple_of(grid.steps()) {
        return Err(TimeStepError::InvalidGrid(format!(
            "{substeps} substeps do not refine {} output steps",
            grid.steps()
        )));
    }
    let dt = grid.final_time() / substeps as f64;
    let rate = disc.coeff.max_relaxation_rate();
    if dt * rate > RK4_STABILITY_LIMIT {
        return Err(TimeStepError::Unstable { dt, rate });
    }
    let a_sigma = disc.free_block(Form::Conductivity);
    let a_eps = disc.free_block(Form::Permittivity);
    let c_sigma = disc.coupling_block(Form::Conductivity);
    let c_eps = disc.coupling_block(Form::Permittivity);
    let chol = BandedCholesky::factor(&a_eps)?;
    let loads = LoadAssembler::new(problem);
    let lifted = problem.boundary.is_some();

    let rhs = |t: f64| -> Vec<f64> {
        let mut b = loads.at(t);
        if lifted {
            let ls = c_sigma.mul_vec(&boundary_at(&problem, t, false));
            let le = c_eps.mul_vec(&boundary_at(&problem, t, true));
            for ((bi, x), y) in b.iter_mut().zip(ls).zip(le) {
                *bi -= x + y;
            }
        }
        b
    };
    let deriv = |t: f64, u: &[f64]| -> Vec<f64> {
        let mut r = rhs(t);
        for (ri, au) in r.iter_mut().zip(a_sigma.mul_vec(u)) {
            *ri -= au;
        }
        chol.solve(&r)
    };
    let axpy = |u: &[f64], c: f64, k: &[f64]| -> Vec<f64> {
        u.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };

    let per_output = substeps / grid.steps();
    let mut traj = Trajectory {
        grid: *grid,
        states: vec![initial.values.clone()],
        boundary: vec![boundary_at(&problem, 0.0, false)],
        loads: Vec::new(),
        stats: Vec::new(),
        initial: initial.method,
    };
    let mut u = initial.values.clone();
    let mut k = 0usize;
    for n in 1..=grid.steps() {
        for _ in 0..per_output {
            let t = grid.final_time() * k as f64 / substeps as f64;
            let k1 = deriv(t, &u);
            let k2 = deriv(t + 0.5 * dt, &axpy(&u, 0.5 * dt, &k1));
            let k3 = deriv(t + 0.5 * dt, &axpy(&u, 0.5 * dt, &k2));
            let k4 = deriv(t + dt, &axpy(&u, dt, &k3));
            for i in 0..u.len() {
                u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            k += 1;
        }
        traj.states.push(u.clone());
        traj.boundary
            .push(boundary_at(&problem, grid.node(n), false));
        traj.loads.push(rhs(grid.node(n)));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::CoefficientField;
    use crate::mesh::{generate_mesh, GeometrySpec};
    use crate::solver::dense_solve;
    use std::sync::Arc;

    fn setup(n: usize, coeff: CoefficientField) -> (Mesh, Discretization) {
        let spec = GeometrySpec::new(1.0, 0.5).unwrap();
        let mesh = generate_mesh(&spec, n).unwrap();
        let disc = Discretization::new(&mesh, coeff).unwrap();
        (mesh, disc)
    }

    fn bump(disc: &Discretization, mesh: &Mesh) -> InitialState {
        let full: Vec<f64> = mesh
            .vertices()
            .iter()
            .map(|p| (1.0 - p[0] * p[0]) * (1.0 - p[1] * p[1]))
            .collect();
        InitialState::given(disc.dofs.restrict(&full))
    }

    #[test]
    fn grid_nodes_are_uniform_and_end_at_t() {
        let g = TimeGrid::new(0.7, 7).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(7), 0.7);
        assert!((g.tau() - 0.1).abs() < 1e-15);
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(-1.0, 3).is_err());
    }

    #[test]
    fn zero_conductivity_keeps_state() {
        let coeff = CoefficientField::new(0.0, 0.0, 1.0, 2.0).unwrap();
        let (mesh, disc) = setup(8, coeff);
        let u0 = bump(&disc, &mesh);
        let problem = Problem {
            mesh: &mesh,
            disc: &disc,
            forcing: &Forcing::Zero,
            boundary: None,
        };
        let g = TimeGrid::new(1.0, 5).unwrap();
        let traj = run_fully_discrete(problem, &u0, &g, &SolverConfig::default()).unwrap();
        for s in &traj.states {
            let d = s
                .iter()
                .zip(&u0.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(d < 1e-10);
        }
    }

    #[test]
    fn step_matches_dense_solve() {
        let coeff = CoefficientField::new(1.0, 10.0, 1.0, 0.1).unwrap();
        let (mesh, disc) = setup(4, coeff);
        let a_s = disc.free_block(Form::Conductivity);
        let a_e = disc.free_block(Form::Permittivity);
        let g = TimeGrid::new(1.0, 16).unwrap();
        let u0 = bump(&disc, &mesh).values;
        let f: Vec<f64> = (0..u0.len()).map(|i| 0.1 * i as f64).collect();
        let out = backward_euler_step(&a_s, &a_e, &g, &u0, &f, &SolverConfig::default()).unwrap();
        let be = BackwardEuler::new(&a_s, &a_e, &g).unwrap();
        let x = dense_solve(&be.system().to_dense(), &be.rhs(&u0, &f)).unwrap();
        for (a, b) in out.x.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn free_decay_dissipates_energy_and_satisfies_identity() {
        let coeff = CoefficientField::new(1.0, 10.0, 1.0, 0.1).unwrap();
        let (mesh, disc) = setup(8, coeff);
        let u0 = bump(&disc, &mesh);
        let problem = Problem {
            mesh: &mesh,
            disc: &disc,
            forcing: &Forcing::Zero,
            boundary: None,
        };
        let g = TimeGrid::new(0.5, 10).unwrap();
        let traj = run_fully_discrete(problem, &u0, &g, &SolverConfig::default()).unwrap();
        let a_s = disc.free_block(Form::Conductivity);
        let a_e = disc.free_block(Form::Permittivity);
        let e: Vec<f64> = traj.states.iter().map(|u| a_s.quadratic_form(u)).collect();
        assert!(e.windows(2).all(|w| w[1] <= w[0]));
        let r = energy_identity_residual(&a_s, &a_e, &traj);
        assert!(r.iter().all(|&x| x < 1e-9), "{r:?}");
    }

    #[test]
    fn perturbed_state_spikes_identity_residual() {
        let coeff = CoefficientField::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let (mesh, disc) = setup(8, coeff);
        let forcing = Forcing::Separable(vec![(Arc::new(|_| 1.0), Arc::new(|_| 1.0))]);
        let problem = Problem {
            mesh: &mesh,
            disc: &disc,
            forcing: &forcing,
            boundary: None,
        };
        let g = TimeGrid::new(1.0, 8).unwrap();
        let u0 = InitialState::given(vec![0.0; disc.dofs.num_free()]);
        let mut traj = run_fully_discrete(problem, &u0, &g, &SolverConfig::default()).unwrap();
        for x in traj.states[4].iter_mut() {
            *x += 1e-3;
        }
        let a_s = disc.free_block(Form::Conductivity);
        let a_e = disc.free_block(Form::Permittivity);
        let r = energy_identity_residual(&a_s, &a_e, &traj);
        assert!(r[3] > 1e-6 && r[4] > 1e-6);
        assert!(r[0] < 1e-9 && r[7] < 1e-9);
    }

    #[test]
    fn reference_integrates_cubic_pulse_exactly_without_conductivity() {
        let coeff = CoefficientField::new(0.0, 0.0, 1.0, 3.0).unwrap();
        let (mesh, disc) = setup(8, coeff);
        let p: TimeFn = Arc::new(|t| 1.0 + t - 2.0 * t * t + 4.0 * t * t * t);
        let forcing = Forcing::Separable(vec![(p, Arc::new(|x: crate::Point| 1.0 + x[0]))]);
        let problem = Problem {
            mesh: &mesh,
            disc: &disc,
            forcing: &forcing,
            boundary: None,
        };
        let g = TimeGrid::new(1.0, 2).unwrap();
        let u0 = InitialState::given(vec![0.0; disc.dofs.num_free()]);
        let traj = run_semidiscrete_reference(problem, &u0, &g, 4).unwrap();
        let a_e = disc.free_block(Form::Permittivity);
        let lhs = a_e.mul_vec(traj.final_state());
        let integral = 1.0 + 0.5 - 2.0 / 3.0 + 1.0;
        let gload = assemble_load(&mesh, |x| 1.0 + x[0], &TriangleRule::degree4(), &disc.dofs);
        for (a, b) in lhs.iter().zip(&gload) {
            assert!((a - integral * b).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_rejects_unstable_substeps() {
        let coeff = CoefficientField::new(1.0, 10.0, 1.0, 0.1).unwrap();
        let (mesh, disc) = setup(4, coeff);
        let problem = Problem {
            mesh: &mesh,
            disc: &disc,
            forcing: &Forcing::Zero,
            boundary: None,
        };
        let g = TimeGrid::new(1.0, 4).unwrap();
        let u0 = InitialState::given(vec![0.0; disc.dofs.num_free()]);
        assert!(matches!(
            run_semidiscrete_reference(problem, &u0, &g, 4),
            Err(TimeStepError::Unstable { .. })
        ));
        assert!(matches!(
            run_semidiscrete_reference(problem, &u0, &g, 6),
            Err(TimeStepError::InvalidGrid(_))
        ));
    }

    #[test]
    fn step_failure_reports_index_and_partial_trajectory() {
        let coeff = CoefficientField::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let (mesh, disc) = setup(8, coeff);
        let forcing = Forcing::General(Arc::new(|t, _| if t > 0.5 { f64::NAN } else { 1.0 }));
        let problem = Problem {
            mesh: &mesh,
            disc: &disc,
            forcing: &forcing,
            boundary: None,
        };
        let g = TimeGrid::new(1.0, 4).unwrap();
        let u0 = InitialState::given(vec![0.0; disc.dofs.num_free()]);
        match run_fully_discrete(problem, &u0, &g, &SolverConfig::default()) {
            Err(TimeStepError::Step { step, partial, .. }) => {
                assert_eq!(step, 3);
                assert_eq!(partial.states.len(), 3);
            }
            other => panic!("expected a step failure, got {other:?}"),
        }
    }
}
