use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use super::ManufacturedCase;
use crate::assembly::{error_norms, squared_error_norms, Discretization, Form};
use crate::mesh::{generate_mesh, Mesh, MeshError};
use crate::projection::qh_project;
use crate::quadrature::TriangleRule;
use crate::solver::SolverConfig;
use crate::timestepping::{
    energy_identity_residual, run_fully_discrete, run_semidiscrete_reference, Problem, TimeGrid,
    TimeStepError, Trajectory,
};

/// Errors below this are indistinguishable from quadrature and solver noise.
pub const DEGENERATE_FLOOR: f64 = 1e-12;

/// `tau = c h` in h1 mode.
pub const TAU_PER_H: f64 = 0.25;
/// `tau = c h^2` in l2 mode.
pub const TAU_PER_H2: f64 = 0.5;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("a rate fit needs at least 3 levels, got {0}")]
    TooFewLevels(usize),
    #[error("invalid levels: {0}")]
    InvalidLevels(String),
    #[error("case {case}: {sampler} sampler failed (violation {violation:e})")]
    GateFailed {
        case: &'static str,
        sampler: &'static str,
        violation: f64,
    },
    #[error("reference solution failed: {0}")]
    Reference(#[from] TimeStepError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Which theorem-level rate a study certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMode {
    /// `tau = h / 4`, energy-norm error of order 1.
    H1,
    /// `tau = h^2 / 2`, L2 error of order 2.
    L2,
    /// Fixed mesh, varying `N`, against the semi-discrete reference.
    Time,
}

impl RateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::H1 => "h1",
            Self::L2 => "l2",
            Self::Time => "time",
        }
    }

    /// Certified quantity and its acceptance band.
    pub fn band(self) -> (&'static str, f64, f64) {
        match self {
            Self::H1 => ("L2(I;V)", 0.85, 1.15),
            Self::L2 => ("L2(I;H)", 1.8, 2.2),
            Self::Time => ("L2(I;V)", 0.9, 1.1),
        }
    }

    pub fn coupling(self) -> String {
        match self {
            Self::H1 => format!("tau = {TAU_PER_H} h"),
            Self::L2 => format!("tau = {TAU_PER_H2} h^2"),
            Self::Time => "fixed mesh, reference = order-4 semi-discrete".to_string(),
        }
    }
}

impl fmt::Display for RateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "h1" | "h1-rate" => Ok(Self::H1),
            "l2" | "l2-rate" => Ok(Self::L2),
            "time" | "time-rate" => Ok(Self::Time),
            other => Err(format!("unknown mode `{other}` (expected h1, l2 or time)")),
        }
    }
}

/// One refinement level: mesh parameter and step count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Level {
    pub n: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct StudyOptions {
    pub final_time: f64,
    pub solver: SolverConfig,
    pub parallel: bool,
    /// Reference substeps per step of the finest compared grid.
    pub reference_factor: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            final_time: 1.0,
            solver: SolverConfig::default(),
            parallel: false,
            reference_factor: 20,
        }
    }
}

/// Nominal mesh size `2a / n`.
pub fn nominal_h(case: &ManufacturedCase, n: usize) -> f64 {
    2.0 * case.spec.half_width() / n as f64
}

/// Step count realizing the mode's coupling on an `n` mesh.
pub fn grid_for(mode: RateMode, h: f64, final_time: f64) -> Option<usize> {
    let tau = match mode {
        RateMode::H1 => TAU_PER_H * h,
        RateMode::L2 => TAU_PER_H2 * h * h,
        RateMode::Time => return None,
    };
    Some(((final_time / tau) - 1e-9).ceil().max(1.0) as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub n: usize,
    pub steps: usize,
    pub h: f64,
    pub tau: f64,
    pub l2h: f64,
    pub l2v: f64,
    /// Largest relative energy-identity residual over the run.
    pub energy_residual: f64,
    pub failure: Option<String>,
}

impl LevelResult {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeCheck {
    pub quantity: &'static str,
    pub slope: f64,
    pub lo: f64,
    pub hi: f64,
    pub certified: bool,
}

impl SlopeCheck {
    pub fn in_band(&self) -> bool {
        self.slope >= self.lo && self.slope <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub case: &'static str,
    pub mode: RateMode,
    pub extended: bool,
    pub degenerate: bool,
    pub monotone: bool,
    pub levels: Vec<LevelResult>,
    pub checks: Vec<SlopeCheck>,
    /// Successive error ratios of the certified quantity.
    pub ratios: Vec<f64>,
    /// Ratio band `[3.2, 4.8]`, enforced in l2 mode only.
    pub ratio_ok: Option<bool>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

impl ConvergenceReport {
    /// Fits slopes over the successful levels, coarsest first.
    pub fn assemble(case: &ManufacturedCase, mode: RateMode, mut levels: Vec<LevelResult>) -> Self {
        levels.sort_by(|a, b| b.h.total_cmp(&a.h).then(b.tau.total_cmp(&a.tau)));
        let good: Vec<&LevelResult> = levels.iter().filter(|l| l.ok()).collect();
        let x: Vec<f64> = good
            .iter()
            .map(|l| if mode == RateMode::Time { l.tau } else { l.h })
            .collect();
        let eh: Vec<f64> = good.iter().map(|l| l.l2h).collect();
        let ev: Vec<f64> = good.iter().map(|l| l.l2v).collect();
        let (quantity, lo, hi) = mode.band();
        let certified = if quantity == "L2(I;H)" { &eh } else { &ev };
        let degenerate = certified.iter().any(|&e| !(e > DEGENERATE_FLOOR));
        let monotone = certified.windows(2).all(|w| w[1] < w[0]);
        let ratios: Vec<f64> = certified.windows(2).map(|w| w[0] / w[1]).collect();
        let ratio_ok =
            (mode == RateMode::L2).then(|| ratios.iter().all(|r| (3.2..=4.8).contains(r)));
        let mut checks = Vec::new();
        if good.len() >= 2 && !degenerate {
            for (name, e) in [("L2(I;H)", &eh), ("L2(I;V)", &ev)] {
                let cert = name == quantity;
                let (l, h) = if cert {
                    (lo, hi)
                } else {
                    (f64::NEG_INFINITY, f64::INFINITY)
                };
                checks.push(SlopeCheck {
                    quantity: name,
                    slope: fit_slope(&x, e),
                    lo: l,
                    hi: h,
                    certified: cert,
                });
            }
        }
        Self {
            case: case.name,
            mode,
            extended: case.is_extended(),
            degenerate,
            monotone,
            levels,
            checks,
            ratios,
            ratio_ok,
        }
    }

    pub fn successful_levels(&self) -> usize {
        self.levels.iter().filter(|l| l.ok()).count()
    }

    pub fn certified_slope(&self) -> Option<f64> {
        self.checks.iter().find(|c| c.certified).map(|c| c.slope)
    }

    pub fn max_energy_residual(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| l.energy_residual)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.successful_levels() >= 3
            && self.successful_levels() == self.levels.len()
            && !self.degenerate
            && self.monotone
            && self.ratio_ok != Some(false)
            && self
                .checks
                .iter()
                .filter(|c| c.certified)
                .all(SlopeCheck::in_band)
            && self.checks.iter().any(|c| c.certified)
    }

    /// Human-readable table followed by the fitted slopes.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "case {}{} | mode {} | {}",
            self.case,
            if self.extended { " (extended)" } else { "" },
            self.mode,
            self.mode.coupling()
        );
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>11} {:>11} {:>13} {:>13} {:>10}",
            "n", "N", "h", "tau", "L2(I;H)", "L2(I;V)", "energy"
        );
        for l in &self.levels {
            if let Some(f) = &l.failure {
                let _ = writeln!(s, "{:>5} {:>6} failed: {f}", l.n, l.steps);
            } else {
                let _ = writeln!(
                    s,
                    "{:>5} {:>6} {:>11.4e} {:>11.4e} {:>13.6e} {:>13.6e} {:>10.2e}",
                    l.n, l.steps, l.h, l.tau, l.l2h, l.l2v, l.energy_residual
                );
            }
        }
        for c in &self.checks {
            if c.certified {
                let _ = writeln!(
                    s,
                    "slope {} = {:.4} in [{}, {}]: {}",
                    c.quantity,
                    c.slope,
                    c.lo,
                    c.hi,
                    if c.in_band() { "pass" } else { "FAIL" }
                );
            } else {
                let _ = writeln!(s, "slope {} = {:.4} (not certified)", c.quantity, c.slope);
            }
        }
        if self.degenerate {
            let _ = writeln!(s, "degenerate: errors at the floor, no rate certified");
        }
        let _ = writeln!(s, "result: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }

    /// Machine-readable report in TOML syntax.
    pub fn to_structured(&self) -> String {
        let mut s = String::from("# capfem-convergence 1\n");
        let _ = writeln!(s, "case = \"{}\"", self.case);
        let _ = writeln!(s, "mode = \"{}\"", self.mode);
        let _ = writeln!(s, "coupling = \"{}\"", self.mode.coupling());
        let _ = writeln!(s, "extended = {}", self.extended);
        let _ = writeln!(s, "degenerate = {}", self.degenerate);
        let _ = writeln!(s, "monotone = {}", self.monotone);
        if let Some(ok) = self.ratio_ok {
            let _ = writeln!(s, "ratio_ok = {ok}");
        }
        let _ = writeln!(s, "ratios = [{}]", join(&self.ratios));
        let _ = writeln!(s, "max_energy_residual = {:e}", self.max_energy_residual());
        let _ = writeln!(s, "passed = {}", self.passed());
        for l in &self.levels {
            let _ = writeln!(s, "\n[[level]]");
            let _ = writeln!(
                s,
                "n = {}\nsteps = {}\nh = {:e}\ntau = {:e}",
                l.n, l.steps, l.h, l.tau
            );
            match &l.failure {
                Some(f) => {
                    let _ = writeln!(s, "failure = {:?}", f);
                }
                None => {
                    let _ = writeln!(
                        s,
                        "l2h = {:e}\nl2v = {:e}\nenergy_residual = {:e}",
                        l.l2h, l.l2v, l.energy_residual
                    );
                }
            }
        }
        for c in &self.checks {
            let _ = writeln!(s, "\n[[slope]]");
            let _ = writeln!(
                s,
                "quantity = \"{}\"\nslope = {}\ncertified = {}",
                c.quantity, c.slope, c.certified
            );
            if c.certified {
                let _ = writeln!(s, "band = [{}, {}]\npassed = {}", c.lo, c.hi, c.in_band());
            }
        }
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// `(E_L2H, E_L2V)` with `E^2 = sum_{n>=1} tau ||u(t^n) - u^n||^2`.
///
/// The V norm is the H1 seminorm; spatial norms use the degree-4 rule.
pub fn spacetime_errors(
    case: &ManufacturedCase,
    traj: &Trajectory,
    mesh: &Mesh,
    disc: &Discretization,
) -> (f64, f64) {
    let rule = TriangleRule::degree4();
    let tau = traj.grid.tau();
    let (mut eh, mut ev) = (0.0, 0.0);
    for n in 1..traj.states.len() {
        let t = traj.grid.node(n);
        let full = traj.full_state(disc, n);
        let (l2, h1) = squared_error_norms(
            mesh,
            &full,
            |p| case.exact(t, p),
            |p| case.gradient(t, p),
            &rule,
        );
        eh += tau * l2;
        ev += tau * h1;
    }
    (eh.sqrt(), ev.sqrt())
}

/// Same norms of `u_ref(t^n) - u^n` for a reference sampled on a grid whose
/// step count is a multiple of the trajectory's.
pub fn spacetime_gap(
    traj: &Trajectory,
    reference: &Trajectory,
    mesh: &Mesh,
    disc: &Discretization,
) -> (f64, f64) {
    let stride = reference.grid.steps() / traj.grid.steps();
    let rule = TriangleRule::degree4();
    let tau = traj.grid.tau();
    let (mut eh, mut ev) = (0.0, 0.0);
    for n in 1..traj.states.len() {
        let a = traj.full_state(disc, n);
        let b = reference.full_state(disc, n * stride);
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let e = error_norms(mesh, &d, |_| 0.0, |_| [0.0; 2], &rule);
        eh += tau * e.l2 * e.l2;
        ev += tau * e.h1_semi * e.h1_semi;
    }
    (eh.sqrt(), ev.sqrt())
}

struct Prepared {
    mesh: Mesh,
    disc: Discretization,
}

fn prepare(case: &ManufacturedCase, n: usize) -> Result<Prepared, String> {
    let mesh = generate_mesh(&case.spec, n).map_err(|e| e.to_string())?;
    let disc = Discretization::new(&mesh, case.coeff).map_err(|e| e.to_string())?;
    Ok(Prepared { mesh, disc })
}

fn run_level(
    case: &ManufacturedCase,
    level: Level,
    opts: &StudyOptions,
    prepared: Option<&Prepared>,
    reference: Option<&Trajectory>,
) -> LevelResult {
    let h = nominal_h(case, level.n);
    let mut result = LevelResult {
        n: level.n,
        steps: level.steps,
        h,
        tau: opts.final_time / level.steps as f64,
        l2h: f64::NAN,
        l2v: f64::NAN,
        energy_residual: f64::NAN,
        failure: None,
    };
    let owned;
    let p = match prepared {
        Some(p) => p,
        None => match prepare(case, level.n) {
            Ok(p) => {
                owned = p;
                &owned
            }
            Err(e) => {
                result.failure = Some(e);
                return result;
            }
        },
    };
    let outcome = (|| -> Result<(f64, f64, f64), String> {
        let grid = TimeGrid::new(opts.final_time, level.steps).map_err(|e| e.to_string())?;
        let forcing = case.forcing();
        let boundary = case.boundary();
        let problem = Problem {
            mesh: &p.mesh,
            disc: &p.disc,
            forcing: &forcing,
            boundary: boundary.as_ref(),
        };
        let u0 = qh_project(&p.mesh, &p.disc, &case.initial_datum(), &opts.solver)
            .map_err(|e| e.to_string())?;
        let traj =
            run_fully_discrete(problem, &u0, &grid, &opts.solver).map_err(|e| e.to_string())?;
        let a_s = p.disc.free_block(Form::Conductivity);
        let a_e = p.disc.free_block(Form::Permittivity);
        let res = energy_identity_residual(&a_s, &a_e, &traj)
            .into_iter()
            .fold(0.0, f64::max);
        let (eh, ev) = match reference {
            Some(r) => spacetime_gap(&traj, r, &p.mesh, &p.disc),
            None => spacetime_errors(case, &traj, &p.mesh, &p.disc),
        };
        Ok((eh, ev, res))
    })();
    match outcome {
        Ok((eh, ev, res)) => {
            result.l2h = eh;
            result.l2v = ev;
            result.energy_residual = res;
        }
        Err(e) => result.failure = Some(e),
    }
    result
}

/// Runs every level and fits the rates of `mode`.
///
/// Both samplers of the case must pass first. In time mode all levels must
/// share one mesh and their step counts must divide the largest one; the
/// reference then uses `reference_factor` times that many substeps.
pub fn convergence_study(
    case: &ManufacturedCase,
    levels: &[Level],
    mode: RateMode,
    opts: &StudyOptions,
) -> Result<ConvergenceReport, StudyError> {
    if levels.len() < 3 {
        return Err(StudyError::TooFewLevels(levels.len()));
    }
    let jump = case.check_jump_conditions();
    if !jump.passed() {
        return Err(StudyError::GateFailed {
            case: case.name,
            sampler: "jump-condition",
            violation: jump.max_violation,
        });
    }
    let strong = case.check_strong_form();
    if !strong.passed() {
        return Err(StudyError::GateFailed {
            case: case.name,
            sampler: "strong-form",
            violation: strong.max_violation,
        });
    }

    let results = if mode == RateMode::Time {
        let n = levels[0].n;
        if levels.iter().any(|l| l.n != n) {
            return Err(StudyError::InvalidLevels(
                "time mode needs one mesh for all levels".into(),
            ));
        }
        let finest = levels.iter().map(|l| l.steps).max().unwrap_or(1);
        if levels.iter().any(|l| l.steps == 0 || finest % l.steps != 0) {
            return Err(StudyError::InvalidLevels(format!(
                "step counts must divide the finest count {finest}"
            )));
        }
        let prepared = prepare(case, n).map_err(StudyError::InvalidLevels)?;
        let grid = TimeGrid::new(opts.final_time, finest)?;
        let forcing = case.forcing();
        let boundary = case.boundary();
        let problem = Problem {
            mesh: &prepared.mesh,
            disc: &prepared.disc,
            forcing: &forcing,
            boundary: boundary.as_ref(),
        };
        let u0 = qh_project(
            &prepared.mesh,
            &prepared.disc,
            &case.initial_datum(),
            &opts.solver,
        )
        .map_err(|e| StudyError::InvalidLevels(e.to_string()))?;
        let reference =
            run_semidiscrete_reference(problem, &u0, &grid, opts.reference_factor * finest)?;
        run_all(levels, opts.parallel, |l| {
            run_level(case, l, opts, Some(&prepared), Some(&reference))
        })
    } else {
        run_all(levels, opts.parallel, |l| {
            run_level(case, l, opts, None, None)
        })
    };
    Ok(ConvergenceReport::assemble(case, mode, results))
}

fn run_all(
    levels: &[Level],
    parallel: bool,
    f: impl Fn(Level) -> LevelResult + Sync,
) -> Vec<LevelResult> {
    if !parallel {
        return levels.iter().map(|&l| f(l)).collect();
    }
    std::thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = levels.iter().map(|&l| s.spawn(move || f(l))).collect();
        handles
            .into_iter()
            .zip(levels)
            .map(|(h, l)| {
                h.join().unwrap_or_else(|_| LevelResult {
                    n: l.n,
                    steps: l.steps,
                    h: f64::NAN,
                    tau: f64::NAN,
                    l2h: f64::NAN,
                    l2v: f64::NAN,
                    energy_residual: f64::NAN,
                    failure: Some("level panicked".into()),
                })
            })
            .collect()
    })
}

/// Levels for h1 and l2 modes from a list of mesh parameters.
pub fn levels_for(
    case: &ManufacturedCase,
    mode: RateMode,
    ns: &[usize],
    final_time: f64,
) -> Vec<Level> {
    ns.iter()
        .map(|&n| Level {
            n,
            steps: grid_for(mode, nominal_h(case, n), final_time).unwrap_or(1),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::case_a;

    #[test]
    fn slope_of_a_power_law_is_exact() {
        let x = [0.5, 0.25, 0.125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.7)).collect();
        assert!((fit_slope(&x, &y) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn couplings_give_the_planned_step_counts() {
        let c = case_a();
        let l2: Vec<usize> = levels_for(&c, RateMode::L2, &[8, 16, 32], 1.0)
            .iter()
            .map(|l| l.steps)
            .collect();
        let h1: Vec<usize> = levels_for(&c, RateMode::H1, &[8, 16, 32], 1.0)
            .iter()
            .map(|l| l.steps)
            .collect();
        assert_eq!(l2, vec![32, 128, 512]);
        assert_eq!(h1, vec![16, 32, 64]);
    }

    #[test]
    fn zero_errors_are_flagged_degenerate() {
        let c = case_a();
        let levels = [8, 16, 32]
            .iter()
            .map(|&n| LevelResult {
                n,
                steps: 4,
                h: 2.0 / n as f64,
                tau: 0.25,
                l2h: 0.0,
                l2v: 0.0,
                energy_residual: 0.0,
                failure: None,
            })
            .collect();
        let r = ConvergenceReport::assemble(&c, RateMode::H1, levels);
        assert!(r.degenerate);
        assert!(!r.passed());
        assert!(r.to_structured().contains("degenerate = true"));
    }

    #[test]
    fn too_few_levels_is_refused() {
        let c = case_a();
        let l = [Level { n: 8, steps: 4 }, Level { n: 16, steps: 8 }];
        assert!(matches!(
            convergence_study(&c, &l, RateMode::H1, &StudyOptions::default()),
            Err(StudyError::TooFewLevels(2))
        ));
    }
}
