use std::path::PathBuf;

use clap::Args;

use capfem::mesh::{
    generate_mesh_with, interface_resolution, read_mesh, validate_mesh, write_mesh, GeometrySpec,
    Mesh, MeshError, MeshIoError, MeshOptions,
};
use capfem::Subdomain;

use crate::output::rooted;
use crate::{CmdResult, Failure};

#[derive(Args)]
pub struct MeshArgs {
    /// Subdivisions per side of the square.
    #[arg(long, required_unless_present = "validate")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub half_width: f64,
    /// Minimum admissible angle in degrees.
    #[arg(long, default_value_t = 15.0)]
    pub min_angle: f64,
    /// Skip the post-snapping quality repair.
    #[arg(long)]
    pub no_repair: bool,
    #[arg(long, conflicts_with = "validate")]
    pub out: Option<PathBuf>,
    /// Validate an existing mesh file instead of generating one.
    #[arg(long, conflicts_with = "n")]
    pub validate: Option<PathBuf>,
}

pub fn run(args: &MeshArgs) -> CmdResult {
    let spec = GeometrySpec::new(args.half_width, args.radius)
        .map_err(|e| Failure::new(2, e.to_string()))?;
    if let Some(path) = &args.validate {
        let mesh = read_mesh(path).map_err(|e| match e {
            MeshIoError::Io(e) => Failure::new(1, format!("{}: {e}", path.display())),
            other => Failure::new(2, format!("{}: {other}", path.display())),
        })?;
        print!("{}", summary(&mesh, &spec));
        let report = validate_mesh(&mesh, &spec, args.min_angle);
        if report.is_valid() {
            println!("violations: none");
            return Ok(());
        }
        println!("violations: {}", report.violations.len());
        for v in &report.violations {
            println!("  {v}");
        }
        return Err(Failure::new(
            2,
            format!("{} failed validation", path.display()),
        ));
    }

    let n = args.n.expect("clap requires n without --validate");
    let opts = MeshOptions {
        min_angle_deg: args.min_angle,
        repair: !args.no_repair,
        ..MeshOptions::default()
    };
    let mesh = generate_mesh_with(&spec, n, &opts).map_err(|e| Failure::new(2, e.to_string()))?;
    let report = validate_mesh(&mesh, &spec, args.min_angle);
    print!("{}", summary(&mesh, &spec));
    if !report.is_valid() {
        for v in &report.violations {
            println!("  {v}");
        }
        return Err(Failure::new(2, "generated mesh failed validation"));
    }
    if let Some(out) = &args.out {
        let path = rooted(out);
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)
                .map_err(|e| Failure::new(1, format!("{}: {e}", parent.display())))?;
        }
        write_mesh(&mesh, &path)
            .map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn summary(mesh: &Mesh, spec: &GeometrySpec) -> String {
    let (angle, element) = mesh.min_angle();
    let lambda = match interface_resolution(mesh, spec) {
        Ok(l) => format!("{l:.6e}"),
        Err(MeshError::NoInterface) => "n/a (no interface edges)".into(),
        Err(e) => e.to_string(),
    };
    format!(
        "vertices: {}\nelements: {} (inner {}, outer {})\nh: {:.6e}\nlambda: {lambda}\nmin angle: {angle:.3} deg (element {element})\n",
        mesh.num_vertices(),
        mesh.num_elements(),
        mesh.count_by_tag(Subdomain::Inner),
        mesh.count_by_tag(Subdomain::Outer),
        mesh.mesh_size(),
    )
}
