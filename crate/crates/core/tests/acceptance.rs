//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use capfem::assembly::{error_norms, Discretization, Form};
use capfem::mesh::{generate_mesh, interface_resolution, validate_mesh, GeometrySpec};
use capfem::projection::qh_project;
use capfem::quadrature::TriangleRule;
use capfem::solver::{dense_solve, SolverConfig};
use capfem::sparse::norm2;
use capfem::timestepping::{
    energy_identity_residual, run_fully_discrete, BackwardEuler, Forcing, Problem, TimeGrid,
};
use capfem::verification::{
    case_a, case_a_with, case_b, convergence_study, fit_slope, levels_for, nominal_h, Level,
    RateMode, StudyOptions,
};
use capfem::CoefficientField;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// Energy residual maxima collected from every trajectory below.
#[derive(Default)]
struct EnergyLog(Vec<(String, f64)>);

fn rate_criterion(mode: RateMode, levels: Vec<Level>, log: &mut EnergyLog) -> Outcome {
    let case = case_a();
    match convergence_study(&case, &levels, mode, &StudyOptions::default()) {
        Ok(r) => {
            for l in &r.levels {
                log.0
                    .push((format!("{mode} n={} N={}", l.n, l.steps), l.energy_residual));
            }
            let check = r.checks.iter().find(|c| c.certified);
            let errs: Vec<String> = r
                .levels
                .iter()
                .map(|l| format!("{:.3e}", if mode == RateMode::L2 { l.l2h } else { l.l2v }))
                .collect();
            match check {
                Some(c) => outcome(
                    c.in_band() && r.monotone && !r.degenerate,
                    format!(
                        "{} slope {:.4} in [{}, {}], errors [{}]",
                        c.quantity,
                        c.slope,
                        c.lo,
                        c.hi,
                        errs.join(", ")
                    ),
                ),
                None => outcome(false, "no slope fitted".into()),
            }
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn projection_rates(levels: &[usize]) -> Outcome {
    let case = case_a();
    let datum = case.initial_datum();
    let rule = TriangleRule::degree6();
    let (mut h, mut l2, mut h1) = (Vec::new(), Vec::new(), Vec::new());
    for &n in levels {
        let mesh = generate_mesh(&case.spec, n).unwrap();
        let disc = Discretization::new(&mesh, case.coeff).unwrap();
        let q = qh_project(&mesh, &disc, &datum, &SolverConfig::default()).unwrap();
        let full = disc
            .dofs
            .expand(&q.values, &vec![0.0; disc.dofs.num_boundary()]);
        let e = error_norms(
            &mesh,
            &full,
            |p| (datum.u0)(p),
            |p| (datum.grad_u0)(p),
            &rule,
        );
        h.push(nominal_h(&case, n));
        l2.push(e.l2);
        h1.push(e.h1_semi);
    }
    let (sl, sh) = (fit_slope(&h, &l2), fit_slope(&h, &h1));
    outcome(
        (1.85..=2.15).contains(&sl) && (0.9..=1.1).contains(&sh),
        format!("L2 slope {sl:.4} in [1.85, 2.15], H1 slope {sh:.4} in [0.9, 1.1]"),
    )
}

fn interface_resolution_rate() -> Outcome {
    let spec = GeometrySpec::new(1.0, 0.5).unwrap();
    let (mut h, mut lam) = (Vec::new(), Vec::new());
    for n in [8, 16, 32, 64] {
        let mesh = generate_mesh(&spec, n).unwrap();
        h.push(2.0 / n as f64);
        lam.push(interface_resolution(&mesh, &spec).unwrap());
    }
    let s = fit_slope(&h, &lam);
    let ratios: Vec<f64> = lam.iter().zip(&h).map(|(l, h)| l / (h * h)).collect();
    let spread = ratios.iter().cloned().fold(0.0, f64::max)
        / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        (1.85..=2.15).contains(&s),
        format!("slope {s:.4} in [1.85, 2.15], lambda/h^2 spread {spread:.3}"),
    )
}

fn degenerate_conductivity(log: &mut EnergyLog) -> Outcome {
    let case = case_a_with(CoefficientField::new(0.0, 0.0, 1.0, 0.1).unwrap());
    let mesh = generate_mesh(&case.spec, 16).unwrap();
    let disc = Discretization::new(&mesh, case.coeff).unwrap();
    let cfg = SolverConfig::default();
    let u0 = qh_project(&mesh, &disc, &case.initial_datum(), &cfg).unwrap();
    let forcing = Forcing::Zero;
    let problem = Problem {
        mesh: &mesh,
        disc: &disc,
        forcing: &forcing,
        boundary: None,
    };
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let traj = run_fully_discrete(problem, &u0, &grid, &cfg).unwrap();
    let base = norm2(&u0.values);
    let drift = traj
        .states
        .iter()
        .map(|s| {
            let d: Vec<f64> = s.iter().zip(&u0.values).map(|(a, b)| a - b).collect();
            norm2(&d) / base
        })
        .fold(0.0, f64::max);
    let res = energy_identity_residual(
        &disc.free_block(Form::Conductivity),
        &disc.free_block(Form::Permittivity),
        &traj,
    );
    log.0
        .push(("sigma = 0".into(), res.into_iter().fold(0.0, f64::max)));
    outcome(
        drift < 1e-8,
        format!("max ||u^n - u^0|| / ||u^0|| = {drift:.3e} < 1e-8"),
    )
}

fn dense_oracle(log: &mut EnergyLog) -> Outcome {
    let mut worst: f64 = 0.0;
    for case in [case_a(), case_b()] {
        let mesh = generate_mesh(&case.spec, 4).unwrap();
        let disc = Discretization::new(&mesh, case.coeff).unwrap();
        let cfg = SolverConfig::default();
        let u0 = qh_project(&mesh, &disc, &case.initial_datum(), &cfg).unwrap();
        let forcing = case.forcing();
        let boundary = case.boundary();
        let problem = Problem {
            mesh: &mesh,
            disc: &disc,
            forcing: &forcing,
            boundary: boundary.as_ref(),
        };
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let traj = run_fully_discrete(problem, &u0, &grid, &cfg).unwrap();
        let a_s = disc.free_block(Form::Conductivity);
        let a_e = disc.free_block(Form::Permittivity);
        let be = BackwardEuler::new(&a_s, &a_e, &grid).unwrap();
        let dense = be.system().to_dense();
        for n in 1..=grid.steps() {
            let x = dense_solve(&dense, &be.rhs(&traj.states[n - 1], &traj.loads[n - 1])).unwrap();
            for (a, b) in traj.states[n].iter().zip(&x) {
                worst = worst.max((a - b).abs());
            }
        }
        let res = energy_identity_residual(&a_s, &a_e, &traj);
        log.0.push((
            format!("oracle case {}", case.name),
            res.into_iter().fold(0.0, f64::max),
        ));
    }
    outcome(
        worst < 1e-10,
        format!("max step deviation from dense solve {worst:.3e} < 1e-10 (16 steps, n = 4)"),
    )
}

fn gates() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in [case_a(), case_b()] {
        let j = c.check_jump_conditions();
        let s = c.check_strong_form();
        ok &= j.passed() && s.passed();
        parts.push(format!(
            "case {}: jump {:.2e} < 1e-10, strong form {:.2e} < 1e-8",
            c.name, j.max_violation, s.max_violation
        ));
    }
    outcome(ok, parts.join("; "))
}

fn mesh_validity() -> Outcome {
    let spec = GeometrySpec::new(1.0, 0.5).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [8, 16, 32, 64] {
        let mesh = generate_mesh(&spec, n).unwrap();
        let rep = validate_mesh(&mesh, &spec, 15.0);
        ok &= rep.is_valid();
        parts.push(format!(
            "n={n}: {} violations, min angle {:.1}",
            rep.violations.len(),
            mesh.min_angle().0
        ));
    }
    outcome(ok, parts.join("; "))
}

fn main() -> ExitCode {
    let mut log = EnergyLog::default();
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut run =
        |name: &'static str, f: &mut dyn FnMut(&mut EnergyLog) -> Outcome, log: &mut EnergyLog| {
            let t = Instant::now();
            let o = f(log);
            let secs = t.elapsed().as_secs_f64();
            println!(
                "[{}] {name}: {} ({secs:.1} s)",
                if o.passed { "PASS" } else { "FAIL" },
                o.detail
            );
            results.push((name, o, secs));
        };

    // the samplers gate every rate run
    run("9 manufactured-case gates", &mut |_| gates(), &mut log);
    run("10 mesh validity", &mut |_| mesh_validity(), &mut log);
    run(
        "1 L2 space rate",
        &mut |log| {
            rate_criterion(
                RateMode::L2,
                levels_for(&case_a(), RateMode::L2, &[8, 16, 32], 1.0),
                log,
            )
        },
        &mut log,
    );
    run(
        "2 H1 space rate",
        &mut |log| {
            rate_criterion(
                RateMode::H1,
                levels_for(&case_a(), RateMode::H1, &[8, 16, 32], 1.0),
                log,
            )
        },
        &mut log,
    );
    run(
        "3 temporal rate",
        &mut |log| {
            let levels = [8, 16, 32, 64]
                .iter()
                .map(|&steps| Level { n: 32, steps })
                .collect();
            rate_criterion(RateMode::Time, levels, log)
        },
        &mut log,
    );
    run(
        "4 projection rates",
        &mut |_| projection_rates(&[8, 16, 32, 64]),
        &mut log,
    );
    run(
        "5 interface resolution",
        &mut |_| interface_resolution_rate(),
        &mut log,
    );
    run(
        "7 degenerate conductivity",
        &mut degenerate_conductivity,
        &mut log,
    );
    run("8 dense oracle equivalence", &mut dense_oracle, &mut log);

    let worst = log.0.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    let energy = outcome(
        !log.0.is_empty() && log.0.iter().all(|(_, r)| *r < 1e-8),
        format!(
            "max relative residual {worst:.3e} < 1e-8 over {} trajectories",
            log.0.len()
        ),
    );
    println!(
        "[{}] 6 energy identity: {}",
        if energy.passed { "PASS" } else { "FAIL" },
        energy.detail
    );
    results.push(("6 energy identity", energy, 0.0));

    // not a criterion: the same fit on finer levels
    let t = Instant::now();
    let fine = projection_rates(&[32, 64, 128]);
    println!(
        "[INFO] projection rates, n = 32..128: {} ({:.1} s)",
        fine.detail,
        t.elapsed().as_secs_f64()
    );

    for mode in [RateMode::H1, RateMode::L2] {
        let t = Instant::now();
        let fine = rate_criterion(
            mode,
            levels_for(&case_a(), mode, &[16, 32, 64], 1.0),
            &mut EnergyLog::default(),
        );
        println!(
            "[INFO] {mode} space rate, n = 16..64: {} ({:.1} s)",
            fine.detail,
            t.elapsed().as_secs_f64()
        );
    }

    let failed = results.iter().filter(|(_, o, _)| !o.passed).count();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
