use std::path::{Path, PathBuf};

use serde::Serialize;

use capfem::assembly::Form;
use capfem::mesh::{generate_mesh, read_mesh, validate_mesh, MeshOptions};
use capfem::projection::{nodal_interpolate, qh_project, InitialState};
use capfem::timestepping::{
    energy_identity_residual, run_fully_discrete, Forcing, Problem, TimeStepError, Trajectory,
};
use capfem::verification::{case_a, case_b};
use capfem::vtk::{snapshot, Probes};
use capfem::{Discretization, Mesh};

use crate::config::{self, InitialChoice, MeshSource, Resolved};
use crate::output::{rooted, write};
use crate::{CmdResult, Failure};

pub const MANIFEST_HEADER: &str = "# capfem-manifest 1";

#[derive(Serialize)]
struct Manifest {
    capfem_version: &'static str,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    failed_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<String>,
    vertices: usize,
    elements: usize,
    free_dofs: usize,
    initial_method: String,
    steps_completed: usize,
    energy_residual_max: f64,
    snapshots: Vec<String>,
    warnings: Vec<String>,
    config: toml::Value,
    step: Vec<StepRecord>,
}

#[derive(Serialize)]
struct StepRecord {
    n: usize,
    t: f64,
    iterations: usize,
    residual: f64,
}

fn config_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(2, format!("config {}: {e}", path.display()))
}

pub fn run(config_path: &Path) -> CmdResult {
    let text = std::fs::read_to_string(config_path).map_err(|e| config_error(config_path, e))?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let (raw, cfg) = config::load(&text, base).map_err(|e| config_error(config_path, e))?;

    let mesh = build_mesh(&cfg).map_err(|e| config_error(config_path, e))?;
    let disc = Discretization::new(&mesh, cfg.coeff).map_err(|e| config_error(config_path, e))?;
    let probes = Probes::new(&mesh, &cfg.probes).map_err(|i| {
        config_error(
            config_path,
            format!(
                "output.probes: point {} ({:?}) lies outside the mesh",
                i + 1,
                cfg.probes[i]
            ),
        )
    })?;

    let mut warnings = Vec::new();
    let forcing = match &cfg.pulse {
        Some(p) => {
            if !p.shape.is_h1_in_time() {
                warnings.push(format!(
                    "the {} pulse is not in H1 in time; the error estimates assume an H1-in-time forcing",
                    p.shape.kind()
                ));
            }
            Forcing::pulse(p.shape, p.profile.clone())
        }
        None => Forcing::Zero,
    };

    let (initial, boundary) = initial_state(&cfg, &mesh, &disc, &mut warnings)?;
    let problem = Problem {
        mesh: &mesh,
        disc: &disc,
        forcing: &forcing,
        boundary: boundary.as_ref(),
    };
    let (traj, failure) = match run_fully_discrete(problem, &initial, &cfg.grid, &cfg.solver) {
        Ok(t) => (t, None),
        Err(TimeStepError::Step {
            step,
            source,
            partial,
        }) => (*partial, Some((step, source.to_string()))),
        Err(e) => return Err(Failure::new(3, format!("solver failed: {e}"))),
    };

    let dir = rooted(&cfg.directory);
    let io = |p: &PathBuf, e: std::io::Error| Failure::new(1, format!("{}: {e}", p.display()));
    let mut names = Vec::new();
    let mut csv = probes.csv_header();
    for n in 0..traj.states.len() {
        let full = traj.full_state(&disc, n);
        let t = traj.grid.node(n);
        if !probes.points().is_empty() {
            csv.push_str(&probes.csv_row(t, &full));
        }
        if n % cfg.stride == 0 || n == cfg.grid.steps() {
            let name = format!("snapshot_{n:05}.vtk");
            let path = dir.join(&name);
            write(
                &path,
                &snapshot(&mesh, &full, &format!("capfem potential step {n} t = {t}")),
            )
            .map_err(|e| io(&path, e))?;
            names.push(name);
        }
    }
    if !probes.points().is_empty() {
        let path = dir.join("probes.csv");
        write(&path, &csv).map_err(|e| io(&path, e))?;
    }

    let energy = energy_max(&disc, &traj);
    let manifest = Manifest {
        capfem_version: env!("CARGO_PKG_VERSION"),
        status: if failure.is_some() {
            "failed"
        } else {
            "completed"
        },
        failed_step: failure.as_ref().map(|f| f.0),
        failure: failure.as_ref().map(|f| f.1.clone()),
        vertices: mesh.num_vertices(),
        elements: mesh.num_elements(),
        free_dofs: disc.dofs.num_free(),
        initial_method: traj.initial.to_string(),
        steps_completed: traj.stats.len(),
        energy_residual_max: energy,
        snapshots: names,
        warnings,
        config: raw,
        step: traj
            .stats
            .iter()
            .enumerate()
            .map(|(i, s)| StepRecord {
                n: i + 1,
                t: traj.grid.node(i + 1),
                iterations: s.iterations,
                residual: s.residual,
            })
            .collect(),
    };
    let body = toml::to_string(&manifest).expect("manifest serializes");
    let path = dir.join("manifest.toml");
    write(&path, &format!("{MANIFEST_HEADER}\n{body}")).map_err(|e| io(&path, e))?;

    println!(
        "{} steps, energy residual max {energy:.3e}, output in {}",
        traj.stats.len(),
        dir.display()
    );
    match failure {
        Some((step, msg)) => Err(Failure::new(
            3,
            format!("solver failed at step {step}: {msg}"),
        )),
        None => Ok(()),
    }
}

fn build_mesh(cfg: &Resolved) -> Result<Mesh, String> {
    let mesh = match &cfg.mesh {
        MeshSource::Generate(n) => {
            generate_mesh(&cfg.spec, *n).map_err(|e| format!("mesh.n: {e}"))?
        }
        MeshSource::File(path) => {
            read_mesh(path).map_err(|e| format!("mesh.file: {}: {e}", path.display()))?
        }
    };
    let report = validate_mesh(&mesh, &cfg.spec, MeshOptions::default().min_angle_deg);
    if let Some(v) = report.violations.first() {
        return Err(format!(
            "mesh: {} validation violations against the configured geometry, first: {v}",
            report.violations.len()
        ));
    }
    Ok(mesh)
}

fn initial_state(
    cfg: &Resolved,
    mesh: &Mesh,
    disc: &Discretization,
    warnings: &mut Vec<String>,
) -> Result<(InitialState, Option<capfem::timestepping::BoundaryData>), Failure> {
    let project = |datum| {
        qh_project(mesh, disc, &datum, &cfg.solver)
            .map_err(|e| Failure::new(3, format!("initial projection failed: {e}")))
    };
    Ok(match &cfg.initial {
        InitialChoice::Zero => (InitialState::zero(&disc.dofs), None),
        InitialChoice::Case(name) => {
            let mut case = if *name == "A" { case_a() } else { case_b() };
            case.coeff = cfg.coeff;
            (project(case.initial_datum())?, case.boundary())
        }
        InitialChoice::Interpolate { expression, field } => {
            let off = disc
                .dofs
                .boundary_vertices()
                .iter()
                .map(|&v| field(mesh.vertices()[v]).abs())
                .fold(0.0, f64::max);
            if off > 1e-12 {
                warnings.push(format!(
                    "initial expression `{expression}` reaches {off:.3e} on the boundary; boundary values are held at 0"
                ));
            }
            let state = nodal_interpolate(mesh, &disc.dofs, |p| field(p));
            if state.values.iter().any(|v| !v.is_finite()) {
                return Err(Failure::new(
                    2,
                    format!("initial.datum: `{expression}` is not finite on the mesh"),
                ));
            }
            (state, None)
        }
    })
}

fn energy_max(disc: &Discretization, traj: &Trajectory) -> f64 {
    if traj.stats.is_empty() {
        return 0.0;
    }
    let a_s = disc.free_block(Form::Conductivity);
    let a_e = disc.free_block(Form::Permittivity);
    energy_identity_residual(&a_s, &a_e, traj)
        .into_iter()
        .fold(0.0, f64::max)
}
