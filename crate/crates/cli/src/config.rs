//! Run configuration files.
//!
//! TOML with a fixed schema; unknown keys are errors.
//!
//! ```toml
//! [geometry]
//! half_width = 1.0
//! interface_radius = 0.5
//!
//! [mesh]
//! n = 16                  # or file = "inclusion.cfm"
//!
//! [coefficients]
//! sigma1 = 1.0
//! sigma2 = 10.0
//! eps1 = 1.0
//! eps2 = 0.1
//!
//! [time]
//! final_time = 1.0
//! steps = 32
//!
//! [pulse]
//! kind = "trapezoidal"
//! amplitude = 1.0
//! onset = 0.1
//! duration = 0.4
//! rise = 0.05
//! profile = { kind = "gaussian-spot", center = [0.0, 0.0], width = 0.2 }
//!
//! [initial]
//! datum = "zero"          # case-A, case-B or "interpolate:<expression in x, y>"
//!
//! [solver]
//! tolerance = 1e-12
//! max_iterations = 5000
//! preconditioner = "jacobi"
//!
//! [output]
//! directory = "run"
//! stride = 4
//! probes = [[0.0, 0.0], [0.75, 0.0]]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use evalexpr::{ContextWithMutableVariables, HashMapContext, Node, Value};
use serde::Deserialize;

use capfem::pulses::PulseShape;
use capfem::solver::Preconditioner;
use capfem::{CoefficientField, GeometrySpec, Point, SolverConfig, SpatialFn, TimeGrid};

/// Error with the dotted key it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: Geometry,
    pub mesh: MeshSection,
    pub coefficients: Coefficients,
    pub time: TimeSection,
    pub pulse: Option<PulseSection>,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub half_width: f64,
    pub interface_radius: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            half_width: 1.0,
            interface_radius: 0.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub n: Option<usize>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub sigma1: f64,
    pub sigma2: f64,
    pub eps1: f64,
    pub eps2: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub final_time: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub kind: String,
    pub amplitude: Option<f64>,
    pub onset: Option<f64>,
    pub duration: Option<f64>,
    pub rise: Option<f64>,
    pub center: Option<f64>,
    pub width: Option<f64>,
    pub decay: Option<f64>,
    #[serde(default)]
    pub profile: ProfileSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub kind: String,
    pub center: Option<[f64; 2]>,
    pub width: Option<f64>,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self {
            kind: "uniform".into(),
            center: None,
            width: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub datum: String,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            datum: "zero".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub max_iterations: Option<usize>,
    #[serde(default = "default_preconditioner")]
    pub preconditioner: String,
}

fn default_tolerance() -> f64 {
    1e-12
}

fn default_preconditioner() -> String {
    "jacobi".into()
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
            max_iterations: None,
            preconditioner: default_preconditioner(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub probes: Vec<[f64; 2]>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("capfem-run")
}

fn default_stride() -> usize {
    1
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            stride: default_stride(),
            probes: Vec::new(),
        }
    }
}

pub enum MeshSource {
    Generate(usize),
    File(PathBuf),
}

pub enum InitialChoice {
    Zero,
    Case(&'static str),
    Interpolate {
        expression: String,
        field: SpatialFn,
    },
}

pub struct Pulse {
    pub shape: PulseShape,
    pub profile: SpatialFn,
}

/// A configuration with every value checked.
pub struct Resolved {
    pub spec: GeometrySpec,
    pub mesh: MeshSource,
    pub coeff: CoefficientField,
    pub grid: TimeGrid,
    pub pulse: Option<Pulse>,
    pub initial: InitialChoice,
    pub solver: SolverConfig,
    pub directory: PathBuf,
    pub stride: usize,
    pub probes: Vec<Point>,
}

/// Parses and checks a configuration; `base` anchors a relative mesh file.
pub fn load(text: &str, base: &Path) -> Result<(toml::Value, Resolved), ConfigError> {
    let raw: toml::Value = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    let cfg: RunConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    Ok((raw, cfg.resolve(base)?))
}

impl RunConfig {
    pub fn resolve(&self, base: &Path) -> Result<Resolved, ConfigError> {
        let g = &self.geometry;
        let spec = GeometrySpec::new(g.half_width, g.interface_radius)
            .map_err(|e| ConfigError::at("geometry", e))?;

        let mesh = match (&self.mesh.n, &self.mesh.file) {
            (Some(n), None) => MeshSource::Generate(*n),
            (None, Some(f)) => MeshSource::File(base.join(f)),
            _ => return Err(ConfigError::at("mesh", "set exactly one of `n` and `file`")),
        };

        let c = &self.coefficients;
        let coeff = CoefficientField::new(c.sigma1, c.sigma2, c.eps1, c.eps2)
            .map_err(|e| ConfigError::at("coefficients", e))?;

        let grid = TimeGrid::new(self.time.final_time, self.time.steps)
            .map_err(|e| ConfigError::at("time", e))?;

        let pulse = match &self.pulse {
            Some(p) => Some(p.resolve(&spec)?),
            None => None,
        };

        let initial = resolve_initial(&self.initial.datum, &spec)?;

        let s = &self.solver;
        let pre = match s.preconditioner.as_str() {
            "jacobi" => Preconditioner::Diagonal,
            "none" => Preconditioner::None,
            other => {
                return Err(ConfigError::at(
                    "solver.preconditioner",
                    format!("unknown preconditioner `{other}` (expected jacobi or none)"),
                ))
            }
        };
        let solver = SolverConfig::new(s.tolerance, s.max_iterations, pre)
            .map_err(|e| ConfigError::at("solver", e))?;

        if self.output.stride == 0 {
            return Err(ConfigError::at("output.stride", "must be at least 1"));
        }
        Ok(Resolved {
            spec,
            mesh,
            coeff,
            grid,
            pulse,
            initial,
            solver,
            directory: self.output.directory.clone(),
            stride: self.output.stride,
            probes: self.output.probes.clone(),
        })
    }
}

impl PulseSection {
    fn resolve(&self, spec: &GeometrySpec) -> Result<Pulse, ConfigError> {
        let used: &[&str] = match self.kind.as_str() {
            "rectangular" => &["amplitude", "onset", "duration"],
            "trapezoidal" => &["amplitude", "onset", "duration", "rise"],
            "gaussian" => &["amplitude", "center", "width"],
            "biphasic-exponential" => &["amplitude", "onset", "duration", "decay"],
            other => {
                return Err(ConfigError::at(
                    "pulse.kind",
                    format!("unknown pulse kind `{other}`; see `capfem pulse list`"),
                ))
            }
        };
        let fields = [
            ("amplitude", self.amplitude),
            ("onset", self.onset),
            ("duration", self.duration),
            ("rise", self.rise),
            ("center", self.center),
            ("width", self.width),
            ("decay", self.decay),
        ];
        for (name, value) in fields {
            if value.is_some() && !used.contains(&name) {
                return Err(ConfigError::at(
                    format!("pulse.{name}"),
                    format!("not a parameter of the {} pulse", self.kind),
                ));
            }
        }
        let get = |name: &str| -> Result<f64, ConfigError> {
            fields
                .iter()
                .find(|(n, _)| *n == name)
                .and_then(|(_, v)| *v)
                .ok_or_else(|| {
                    ConfigError::at(
                        format!("pulse.{name}"),
                        format!("required by the {} pulse", self.kind),
                    )
                })
        };
        let shape = match self.kind.as_str() {
            "rectangular" => PulseShape::Rectangular {
                amplitude: get("amplitude")?,
                onset: get("onset")?,
                duration: get("duration")?,
            },
            "trapezoidal" => PulseShape::Trapezoidal {
                amplitude: get("amplitude")?,
                onset: get("onset")?,
                duration: get("duration")?,
                rise: get("rise")?,
            },
            "gaussian" => PulseShape::Gaussian {
                amplitude: get("amplitude")?,
                center: get("center")?,
                width: get("width")?,
            },
            _ => PulseShape::BiphasicExponential {
                amplitude: get("amplitude")?,
                onset: get("onset")?,
                duration: get("duration")?,
                decay: get("decay")?,
            },
        };
        shape.validate().map_err(|e| ConfigError::at("pulse", e))?;
        let profile = self.profile.resolve(spec)?;
        Ok(Pulse { shape, profile })
    }
}

impl ProfileSection {
    fn resolve(&self, spec: &GeometrySpec) -> Result<SpatialFn, ConfigError> {
        match self.kind.as_str() {
            "uniform" => {
                if self.center.is_some() || self.width.is_some() {
                    return Err(ConfigError::at(
                        "pulse.profile",
                        "the uniform profile takes no center or width",
                    ));
                }
                Ok(Arc::new(|_| 1.0))
            }
            "gaussian-spot" => {
                let c = self.center.ok_or_else(|| {
                    ConfigError::at("pulse.profile.center", "required by gaussian-spot")
                })?;
                let w = self.width.ok_or_else(|| {
                    ConfigError::at("pulse.profile.width", "required by gaussian-spot")
                })?;
                if !(w > 0.0 && w.is_finite()) {
                    return Err(ConfigError::at(
                        "pulse.profile.width",
                        format!("{w} must be > 0"),
                    ));
                }
                let a = spec.half_width();
                if !(c[0].abs() <= a && c[1].abs() <= a) {
                    return Err(ConfigError::at(
                        "pulse.profile.center",
                        format!("({}, {}) lies outside the domain", c[0], c[1]),
                    ));
                }
                Ok(Arc::new(move |p: Point| {
                    let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                    (-d2 / (2.0 * w * w)).exp()
                }))
            }
            other => Err(ConfigError::at(
                "pulse.profile.kind",
                format!("unknown profile `{other}` (expected uniform or gaussian-spot)"),
            )),
        }
    }
}

fn resolve_initial(datum: &str, spec: &GeometrySpec) -> Result<InitialChoice, ConfigError> {
    let case = |name: &'static str| {
        if spec.half_width() != 1.0 || spec.interface_radius() != 0.5 {
            return Err(ConfigError::at(
                "initial.datum",
                format!("case-{name} is defined for half_width = 1 and interface_radius = 0.5"),
            ));
        }
        Ok(InitialChoice::Case(name))
    };
    match datum {
        "zero" => Ok(InitialChoice::Zero),
        "case-A" => case("A"),
        "case-B" => case("B"),
        _ => match datum.strip_prefix("interpolate:") {
            Some(expr) => {
                let field = compile(expr).map_err(|m| ConfigError::at("initial.datum", m))?;
                Ok(InitialChoice::Interpolate {
                    expression: expr.trim().to_string(),
                    field,
                })
            }
            None => Err(ConfigError::at(
                "initial.datum",
                format!(
                    "unknown datum `{datum}` (expected zero, case-A, case-B or interpolate:<expr>)"
                ),
            )),
        },
    }
}

/// Compiles an expression in `x` and `y` into a field.
pub fn compile(expr: &str) -> Result<SpatialFn, String> {
    let node: Node = evalexpr::build_operator_tree(expr).map_err(|e| format!("`{expr}`: {e}"))?;
    let eval = move |p: Point| -> Result<f64, String> {
        let mut ctx = HashMapContext::new();
        ctx.set_value("x".into(), Value::Float(p[0]))
            .and_then(|_| ctx.set_value("y".into(), Value::Float(p[1])))
            .map_err(|e| e.to_string())?;
        node.eval_number_with_context(&ctx)
            .map_err(|e| e.to_string())
    };
    let probe = eval([0.25, -0.5]).map_err(|e| format!("`{expr}`: {e}"))?;
    if !probe.is_finite() {
        return Err(format!("`{expr}` is not finite at (0.25, -0.5)"));
    }
    Ok(Arc::new(move |p| eval(p).unwrap_or(f64::NAN)))
}

/// Reports a deserialization error with the dotted key it refers to.
fn parse_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let message = e.message().trim().to_string();
    let Some(span) = e.span() else {
        return ConfigError::at("", message);
    };
    let start = span.start.min(text.len());
    let line_start = text[..start].rfind('\n').map_or(0, |i| i + 1);
    let line_end = text[start..].find('\n').map_or(text.len(), |i| start + i);
    let line = text[line_start..line_end].trim();

    let header = |upto: usize| -> String {
        text[..upto]
            .lines()
            .rev()
            .map(str::trim)
            .find(|l| l.starts_with('['))
            .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
            .unwrap_or_default()
    };
    let join = |a: String, b: &str| {
        if a.is_empty() {
            b.to_string()
        } else {
            format!("{a}.{b}")
        }
    };
    let quoted = |m: &str, prefix: &str| {
        m.strip_prefix(prefix)
            .and_then(|rest| rest.split('`').next())
            .map(str::to_string)
    };

    let table = if line.starts_with('[') {
        header(line_end)
    } else {
        header(line_start)
    };
    let path = if let Some(f) = quoted(&message, "unknown field `") {
        if line.starts_with('[') {
            // an unknown section
            let t = header(line_end);
            if t.ends_with(&f) {
                t
            } else {
                join(t, &f)
            }
        } else {
            join(table, &f)
        }
    } else if let Some(f) = quoted(&message, "missing field `") {
        join(table, &f)
    } else if let Some((key, _)) = line.split_once('=') {
        if line.starts_with('[') {
            table
        } else {
            join(table, key.trim())
        }
    } else {
        table
    };
    ConfigError::at(
        path,
        format!(
            "{message} (line {})",
            text[..line_start].lines().count() + 1
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[mesh]
n = 8

[coefficients]
sigma1 = 1.0
sigma2 = 10.0
eps1 = 1.0
eps2 = 0.1

[time]
final_time = 1.0
steps = 4
"#;

    fn ok(s: &str) -> Resolved {
        match load(s, Path::new(".")) {
            Ok((_, r)) => r,
            Err(e) => panic!("rejected: {e}"),
        }
    }

    fn err(s: &str) -> ConfigError {
        match load(s, Path::new(".")) {
            Ok(_) => panic!("configuration accepted"),
            Err(e) => e,
        }
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let r = ok(BASE);
        assert_eq!(r.stride, 1);
        assert!(r.pulse.is_none());
        assert!(matches!(r.initial, InitialChoice::Zero));
        assert_eq!(r.solver.tolerance(), 1e-12);
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let e = err(&format!("{BASE}stepz = 3\n"));
        assert_eq!(e.path, "time.stepz");
        let e = err(&format!("{BASE}\n[outptu]\nstride = 2\n"));
        assert_eq!(e.path, "outptu");
    }

    #[test]
    fn missing_and_mistyped_keys_name_their_path() {
        let e = err(&BASE.replace("steps = 4", ""));
        assert_eq!(e.path, "time.steps");
        let e = err(&BASE.replace("eps2 = 0.1", "eps2 = \"small\""));
        assert_eq!(e.path, "coefficients.eps2");
    }

    #[test]
    fn semantic_errors_name_their_path() {
        let e = err(&BASE.replace("eps1 = 1.0", "eps1 = 0.0"));
        assert_eq!(e.path, "coefficients");
        let e = err(&format!("{BASE}\n[output]\nstride = 0\n"));
        assert_eq!(e.path, "output.stride");
        let e = err(&format!(
            "{BASE}\n[pulse]\nkind = \"gaussian\"\namplitude = 1.0\ncenter = 0.5\n"
        ));
        assert_eq!(e.path, "pulse.width");
        let e = err(&format!(
            "{BASE}\n[pulse]\nkind = \"rectangular\"\namplitude = 1.0\nonset = 0.1\nduration = 0.2\nrise = 0.1\n"
        ));
        assert_eq!(e.path, "pulse.rise");
        let e = err(&format!(
            "{BASE}\n[initial]\ndatum = \"interpolate:x +* y\"\n"
        ));
        assert_eq!(e.path, "initial.datum");
    }

    #[test]
    fn expressions_evaluate_in_x_and_y() {
        let f = compile("x * x - 2 * y + 1").unwrap();
        assert_eq!(f([3.0, 0.5]), 9.0);
        let g = compile("math::sin(x)").unwrap();
        assert!((g([0.5, 0.0]) - 0.5f64.sin()).abs() < 1e-15);
        assert!(compile("z + 1").is_err());
    }

    #[test]
    fn gaussian_spot_peaks_at_its_center() {
        let p = ProfileSection {
            kind: "gaussian-spot".into(),
            center: Some([0.25, 0.0]),
            width: Some(0.1),
        };
        let spec = GeometrySpec::new(1.0, 0.5).unwrap();
        let f = p.resolve(&spec).unwrap();
        assert_eq!(f([0.25, 0.0]), 1.0);
        assert!((f([0.35, 0.0]) - (-0.5f64).exp()).abs() < 1e-15);
    }
}
