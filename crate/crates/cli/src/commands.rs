use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use wop_core::geodesic::uniform_times;
use wop_core::io::{frames_to_json, read_measure, write_measure};
use wop_core::tangent::{
    extend_functional, extended_entropy, flow_particles, heat_flow_grid, FlowPath, Functional,
    GridDensity, HalfSquaredNorm, MomentEnergy, PotentialEnergy, TotalMass,
};
use wop_core::unbalanced::compare_geodesic_masses;
use wop_core::{
    dual_certificate, wop_barycenter, wop_distance, wop_distance_defbis, wop_p_distance,
    BarycenterOptions, BarycenterProblem, DiscreteMeasure, Geodesic, ReferencePoint,
};

use crate::{Cli, Command, FlowKind, RunConfig};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;

/// Invalid flag values or combinations.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    use wop_core::Error as E;
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::NotConverged { .. } | E::UnequalMass { .. } | E::InconsistentPath { .. } => {
                    EXIT_SOLVER
                }
                E::InvalidParameter { .. } | E::Unsupported(_) => EXIT_CONFIG,
                _ => EXIT_INPUT,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_INPUT;
        }
    }
    EXIT_SOLVER
}

fn validate(c: &RunConfig) -> Result<()> {
    if !(c.p >= 1.0) || !c.p.is_finite() {
        return Err(config_error(format!("--p must be a finite value >= 1, got {}", c.p)));
    }
    if !(c.eps >= 0.0) || !c.eps.is_finite() {
        return Err(config_error(format!("--eps must be >= 0, got {}", c.eps)));
    }
    if c.steps == 0 {
        return Err(config_error("--steps must be at least 1"));
    }
    if let Some(dt) = c.dt {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(config_error(format!("--dt must be > 0, got {dt}")));
        }
    }
    if let Some(x0) = &c.x0 {
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(config_error("--x0 must be finite"));
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let c = &cli.config;
    validate(c)?;
    match &cli.command {
        Command::Dist { mu, nu } => dist(c, mu, nu),
        Command::Geodesic { mu0, mu1 } => geodesic(c, mu0, mu1),
        Command::Barycenter { spec } => barycenter(c, spec),
        Command::Flow {
            functional,
            input,
            mass,
            cells,
            frames,
        } => match functional {
            FlowKind::Boltzmann => flow_grid(c, *mass, *cells, frames.as_deref()),
            kind => {
                let input = input
                    .as_deref()
                    .ok_or_else(|| config_error("particle flows need --input"))?;
                flow_measure(c, *kind, input, frames.as_deref())
            }
        },
        Command::Compare { mu, nu, atoms } => compare(c, mu.as_deref(), nu.as_deref(), *atoms),
        Command::Certify { mu, nu } => certify(c, mu, nu),
    }
}

fn load(path: &Path) -> Result<DiscreteMeasure> {
    read_measure(path).with_context(|| format!("reading {}", path.display()))
}

fn reference_point(c: &RunConfig, dim: usize) -> Result<ReferencePoint> {
    match &c.x0 {
        None => Ok(ReferencePoint::origin(dim)),
        Some(v) if v.len() == dim => Ok(ReferencePoint::new(v.clone())?),
        Some(v) => Err(config_error(format!(
            "--x0 has {} coordinates but the measures live in dimension {dim}",
            v.len()
        ))),
    }
}

/// Loads measures and the reference point in a common dimension. Null
/// measures take the dimension of the others, or of `--x0`.
fn load_all(c: &RunConfig, paths: &[&Path]) -> Result<(Vec<DiscreteMeasure>, ReferencePoint)> {
    let measures = paths.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
    let dim = measures
        .iter()
        .filter(|m| !m.is_empty())
        .map(DiscreteMeasure::dim)
        .next()
        .or_else(|| c.x0.as_ref().map(Vec::len))
        .unwrap_or(1);
    let x0 = reference_point(c, dim)?;
    let measures = measures
        .into_iter()
        .map(|m| m.with_dim(dim))
        .collect::<wop_core::Result<Vec<_>>>()?;
    Ok((measures, x0))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn print_json(v: &Value) -> Result<()> {
    emit(None, &serde_json::to_string_pretty(v)?)
}

fn dist(c: &RunConfig, mu: &Path, nu: &Path) -> Result<()> {
    let (m, x0) = load_all(c, &[mu, nu])?;
    let (mu, nu) = (&m[0], &m[1]);
    let summary = if c.p == 2.0 {
        let w = wop_distance(mu, nu, &x0)?;
        let defbis = wop_distance_defbis(mu, nu, &x0)?;
        let dual = if mu.is_null() || nu.is_null() {
            None
        } else {
            Some(dual_certificate(mu, nu, &x0)?.value)
        };
        json!({
            "wop": w.distance,
            "mass_term": w.mass_term,
            "transport_term": w.transport_term,
            "wop_defbis": defbis.distance,
            "dual_value": dual,
            "p": c.p,
        })
    } else {
        let d = wop_p_distance(mu, nu, &x0, c.p)?;
        let mass_term = (mu.mass() - nu.mass()).abs().powf(c.p);
        json!({
            "wop": d,
            "mass_term": mass_term,
            "transport_term": (d.powf(c.p) - mass_term).max(0.0),
            "wop_defbis": Value::Null,
            "dual_value": Value::Null,
            "p": c.p,
        })
    };
    if let Some(out) = &c.out {
        emit(Some(out), &serde_json::to_string_pretty(&summary)?)?;
    }
    print_json(&summary)
}

fn geodesic(c: &RunConfig, mu0: &Path, mu1: &Path) -> Result<()> {
    let (m, x0) = load_all(c, &[mu0, mu1])?;
    let g = Geodesic::new(&m[0], &m[1], &x0)?;
    let samples = g.samples(&uniform_times(c.steps))?;
    let frames = frames_to_json(&samples)?;
    match &c.out {
        Some(out) => {
            emit(Some(out), &frames)?;
            print_json(&json!({
                "frames": samples.len(),
                "wop": wop_distance(&m[0], &m[1], &x0)?.distance,
                "mass_start": m[0].mass(),
                "mass_end": m[1].mass(),
                "null_path": g.is_null_path(),
                "out": out.display().to_string(),
            }))
        }
        None => emit(None, &frames),
    }
}

#[derive(Debug, Deserialize)]
struct BarycenterEntry {
    lambda: f64,
    measure_file: PathBuf,
}

fn barycenter(c: &RunConfig, spec: &Path) -> Result<()> {
    let text = fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let entries: Vec<BarycenterEntry> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
    if entries.is_empty() {
        bail!(wop_core::Error::Parse("barycenter spec lists no measures".into()));
    }
    let base = spec.parent().unwrap_or(Path::new("."));
    let paths: Vec<PathBuf> = entries.iter().map(|e| base.join(&e.measure_file)).collect();
    let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    let (measures, x0) = load_all(c, &refs)?;
    let problem = BarycenterProblem::new(
        entries.iter().map(|e| e.lambda).zip(measures).collect(),
        x0,
    )?;
    let bar = wop_barycenter(&problem, BarycenterOptions::default())?;
    if !bar.converged {
        return Err(anyhow!(wop_core::Error::NotConverged {
            solver: "barycenter fixed point",
            iterations: bar.iterations,
            residual: f64::NAN,
        }));
    }
    match &c.out {
        Some(out) => {
            write_measure(out, &bar.measure)?;
            print_json(&json!({
                "mass": bar.measure.mass(),
                "atoms": bar.measure.len(),
                "iterations": bar.iterations,
                "converged": bar.converged,
                "all_null": bar.all_null,
                "out": out.display().to_string(),
            }))
        }
        None => emit(None, &wop_core::io::measure_to_json(&bar.measure)?),
    }
}

#[derive(Serialize)]
struct GridFrame<'a> {
    t: f64,
    mass: f64,
    x_start: f64,
    dx: f64,
    values: &'a [f64],
}

/// Frame indices spread over `0..n`, at most 101 of them.
fn frame_subset(n: usize) -> Vec<usize> {
    let stride = n.div_ceil(100).max(1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    idx
}

fn flow_grid(c: &RunConfig, mass: f64, cells: usize, frames: Option<&Path>) -> Result<()> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(config_error(format!("--mass must be > 0, got {mass}")));
    }
    if cells < 2 {
        return Err(config_error("--cells must be at least 2"));
    }
    let shape = GridDensity::from_fn(-8.0, 8.0, cells, |x| (-0.5 * x * x).exp())?;
    let scale = mass / shape.mass();
    let rho0 = GridDensity::new(
        shape.x_start,
        shape.dx,
        shape.values.iter().map(|v| v * scale).collect(),
    )?;
    let dt = c.dt.unwrap_or(0.4 * rho0.dx * rho0.dx * mass * mass);
    let path = heat_flow_grid(&rho0, dt, c.steps, 1)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "t", "mass", "F_value"])?;
    for (k, (t, frame)) in path.times.iter().zip(&path.frames).enumerate() {
        let value = extended_entropy(frame)?;
        w.write_record([k.to_string(), t.to_string(), frame.mass().to_string(), value.to_string()])?;
    }
    let table = String::from_utf8(w.into_inner()?)?;
    emit(c.out.as_deref(), &table)?;

    if let Some(path_out) = frames {
        let picked: Vec<GridFrame> = frame_subset(path.frames.len())
            .into_iter()
            .map(|k| GridFrame {
                t: path.times[k],
                mass: path.frames[k].mass(),
                x_start: path.frames[k].x_start,
                dx: path.frames[k].dx,
                values: &path.frames[k].values,
            })
            .collect();
        emit(Some(path_out), &serde_json::to_string_pretty(&picked)?)?;
    }
    if c.out.is_some() {
        let last = path.last();
        print_json(&json!({
            "functional": "boltzmann",
            "steps": c.steps,
            "dt": dt,
            "initial_mass": rho0.mass(),
            "final_mass": last.mass(),
            "final_value": extended_entropy(last)?,
            "max_mass_drift": path.masses.iter().map(|m| (m - rho0.mass()).abs()).fold(0.0, f64::max),
        }))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MeasureFrame {
    t: f64,
    mass: f64,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

fn flow_measure(c: &RunConfig, kind: FlowKind, input: &Path, frames: Option<&Path>) -> Result<()> {
    let (m, x0) = load_all(c, &[input])?;
    let mu0 = &m[0];
    let dt = c.dt.unwrap_or(1e-3);
    let run = |f: &dyn Functional| -> wop_core::Result<FlowPath> { flow_particles(f, mu0, &x0, dt, c.steps) };
    let path = match kind {
        FlowKind::HalfNorm => run(&HalfSquaredNorm { x0: x0.clone() })?,
        FlowKind::Moment => run(&MomentEnergy { x0: x0.clone() })?,
        FlowKind::Potential => run(&extend_functional(
            PotentialEnergy::quadratic(x0.coords().to_vec()),
            x0.clone(),
        ))?,
        FlowKind::Mass => run(&TotalMass)?,
        FlowKind::Boltzmann => unreachable!("grid flows are handled separately"),
    };
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    emit(c.out.as_deref(), &String::from_utf8(buf)?)?;
    if let Some(path_out) = frames {
        let picked: Vec<MeasureFrame> = frame_subset(path.measures.len())
            .into_iter()
            .map(|k| MeasureFrame {
                t: path.times[k],
                mass: path.masses[k],
                points: path.measures[k].points().map(<[f64]>::to_vec).collect(),
                weights: path.measures[k].weights().to_vec(),
            })
            .collect();
        emit(Some(path_out), &serde_json::to_string_pretty(&picked)?)?;
    }
    if c.out.is_some() {
        print_json(&json!({
            "functional": format!("{kind:?}"),
            "steps": path.times.len() - 1,
            "dt": dt,
            "initial_mass": mu0.mass(),
            "final_mass": path.masses.last(),
            "final_value": path.values.last(),
            "halted_at": path.halted_at,
        }))?;
    }
    Ok(())
}

/// `mass · N(mean, sd²)` sampled with `n` equal atoms.
fn gaussian(rng: &mut ChaCha8Rng, mean: f64, sd: f64, mass: f64, n: usize) -> Result<DiscreteMeasure> {
    let normal = Normal::new(mean, sd)?;
    let points: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
    Ok(DiscreteMeasure::from_flat(1, points, vec![mass / n as f64; n])?)
}

fn compare(c: &RunConfig, mu: Option<&Path>, nu: Option<&Path>, atoms: usize) -> Result<()> {
    let (mu, nu) = match (mu, nu) {
        (Some(a), Some(b)) => {
            let (m, _) = load_all(c, &[a, b])?;
            (m[0].clone(), m[1].clone())
        }
        (None, None) => {
            if atoms == 0 {
                return Err(config_error("--atoms must be at least 1"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            (
                gaussian(&mut rng, -0.4, 0.15, 1.0, atoms)?,
                gaussian(&mut rng, 0.4, 0.25, 3.0, atoms)?,
            )
        }
        _ => return Err(config_error("compare needs two measure files or none")),
    };
    let profile = compare_geodesic_masses(&mu, &nu, c.steps, c.eps)?;
    let mut buf = Vec::new();
    profile.write_csv(&mut buf)?;
    emit(c.out.as_deref(), &String::from_utf8(buf)?)?;
    let mut meta = profile.metadata();
    meta["seed"] = json!(c.seed);
    meta["rows"] = json!(profile.rows.len());
    if let Some(out) = &c.out {
        let meta_path = out.with_extension("meta.json");
        emit(Some(&meta_path), &serde_json::to_string_pretty(&meta)?)?;
        print_json(&meta)?;
    }
    if !profile.converged {
        bail!(wop_core::Error::NotConverged {
            solver: "unbalanced Sinkhorn",
            iterations: profile.iterations,
            residual: profile.residual,
        });
    }
    Ok(())
}

fn certify(c: &RunConfig, mu: &Path, nu: &Path) -> Result<()> {
    let (m, x0) = load_all(c, &[mu, nu])?;
    let (mu, nu) = (&m[0], &m[1]);
    let cert = dual_certificate(mu, nu, &x0)?;
    let summary = json!({
        "phi": cert.phi,
        "psi": cert.psi,
        "value": cert.value,
        "wop_squared": wop_distance(mu, nu, &x0)?.squared(),
        "max_violation": cert.max_violation(mu, nu, &x0),
        "x0": x0.coords(),
    });
    if let Some(out) = &c.out {
        emit(Some(out), &serde_json::to_string_pretty(&summary)?)?;
    }
    print_json(&summary)
}
