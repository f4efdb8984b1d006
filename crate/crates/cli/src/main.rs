//! `geoflow`: command-line front end for the ellipsoid geodesic-flow
//! toolkit. Every subcommand emits a data file plus a `<output>.config.json`
//! sidecar with the fully resolved configuration, and identical
//! configuration + seed produces byte-identical output.
//!
//! Exit codes: 0 success, 2 validation error (bad flags, config, or
//! ellipsoid spec), 3 numerical failure.

mod config;

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use config::{fmt_f, parse_floats, resolve, resolve_path, FileConfig, Resolved};
use geoflow_core::bifurcation::{generic_diagram_with_samples, symmetric_diagram_with_samples};
use geoflow_core::{
    action_frame, casimirs, integrate, monodromy_about, random_leaf_point, revolution_action,
    revolution_action_quadrature, run_all, symmetric_integrals, uhlenbeck_integrals,
    EllipsoidSpec, GeoError, PhasePoint, RevolutionParams, SymmetryTag,
};

const EXIT_VALIDATION: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "geoflow",
    version,
    about = "Geodesic flow on 3-ellipsoids: trajectories, bifurcation diagrams, actions, monodromy"
)]
struct Cli {
    /// Flat key=value config file; explicit flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate a constrained geodesic and emit the trajectory with drift
    /// diagnostics.
    Simulate(SimulateArgs),
    /// Emit the bifurcation diagram of the energy-momentum map.
    Bifurcation(BifurcationArgs),
    /// Sweep the action map over a (j, g) grid (equal-middle-axes specs).
    Actions(ActionsArgs),
    /// Compute the monodromy of a loop in the (j, g) plane.
    Monodromy(MonodromyArgs),
    /// Closed-form vs quadrature actions of a revolution ellipsoid.
    Revolution(RevolutionArgs),
    /// Run the acceptance suite; exits nonzero if any criterion fails.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Squared semi-axes, comma-separated: a0,a1,a2,a3.
    #[arg(long)]
    alphas: Option<String>,
    /// Energy level for --random initial data.
    #[arg(long)]
    h: Option<f64>,
    /// Draw the initial point uniformly on the energy-h leaf.
    #[arg(long)]
    random: bool,
    /// Initial position, comma-separated (with --y0; alternative to --random).
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Initial momentum, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Keep every k-th sample in the file (1 = all).
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args)]
struct BifurcationArgs {
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    /// Polyline samples per critical curve.
    #[arg(long)]
    samples: Option<usize>,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ActionsArgs {
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    /// Grid spec jmin:jmax:n,gmin:gmax:m.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MonodromyArgs {
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    /// Loop spec rj,rg,n: ellipse radii in (j, g) and the number of steps.
    #[arg(long = "loop")]
    loop_spec: Option<String>,
    /// Loop center jc,gc (defaults to the focus-focus value 0,0).
    #[arg(long, allow_hyphen_values = true)]
    center: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RevolutionArgs {
    /// Squared semi-axis of the distinct (symmetry) axis.
    #[arg(long)]
    alpha0: Option<f64>,
    /// Squared semi-axis of the doubled equatorial pair.
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    /// Branch case: direct (rho = alpha0/alpha1), reciprocal (axis
    /// alpha1^2/alpha0, the other boundary reduction), or both.
    #[arg(long)]
    case: Option<String>,
    /// Number of jhat grid points (including the endpoints +-1).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Optional JSON report path.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err)
        }
    };
    std::process::exit(code);
}

/// Maps an error chain to the exit code: precondition/validation failures
/// exit 2, numerical failures 3.
fn classify(err: &anyhow::Error) -> i32 {
    if let Some(geo) = err.downcast_ref::<GeoError>() {
        return match geo {
            GeoError::InvalidSpec(_)
            | GeoError::DegenerateAxes { .. }
            | GeoError::WrongSymmetry { .. }
            | GeoError::NotOnSubflow { .. }
            | GeoError::ZeroMomentum
            | GeoError::DomainError(_) => EXIT_VALIDATION,
            _ => EXIT_NUMERICAL,
        };
    }
    EXIT_VALIDATION
}

fn dispatch(cli: Cli) -> Result<i32> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(args, &file),
        Cmd::Bifurcation(args) => cmd_bifurcation(args, &file),
        Cmd::Actions(args) => cmd_actions(args, &file),
        Cmd::Monodromy(args) => cmd_monodromy(args, &file),
        Cmd::Revolution(args) => cmd_revolution(args, &file),
        Cmd::Selftest(args) => cmd_selftest(args),
    }
}

fn resolve_spec(
    flag: Option<String>,
    file: &FileConfig,
    resolved: &mut Resolved,
    default: Option<&str>,
) -> Result<EllipsoidSpec> {
    let raw = match flag {
        Some(s) => s,
        None => file
            .get("alphas")
            .or(default)
            .ok_or_else(|| anyhow!("missing required setting alphas (flag --alphas)"))?
            .to_string(),
    };
    let alphas = parse_floats::<4>(&raw, "alphas")?;
    let spec = EllipsoidSpec::new(alphas)?;
    resolved.record("alphas", alphas.to_vec());
    resolved.record("symmetry_tag", format!("{:?}", spec.symmetry_tag()));
    Ok(spec)
}

fn write_file(path: &PathBuf, body: &str) -> Result<()> {
    std::fs::write(path, body)
        .map_err(|e| anyhow!("cannot write {}: {e}", path.display()))
}

fn cmd_simulate(args: SimulateArgs, file: &FileConfig) -> Result<i32> {
    let mut resolved = Resolved::default();
    let spec = resolve_spec(args.alphas, file, &mut resolved, None)?;
    let h = resolve(args.h, file, "h", Some(0.5))?;
    let seed = resolve(args.seed, file, "seed", Some(0u64))?;
    let t_end = resolve(args.t_end, file, "t_end", Some(100.0))?;
    let dt = resolve(args.dt, file, "dt", Some(1e-3))?;
    let stride = resolve(args.stride, file, "stride", Some(1usize))?.max(1);
    let output = resolve_path(args.output, file, "output", "trajectory.csv");
    let random = args.random || file.get("random") == Some("true");

    let p0 = if random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_leaf_point(&spec, &mut rng, h)
    } else {
        let x_raw = match args.x0 {
            Some(s) => s,
            None => file
                .get("x0")
                .ok_or_else(|| anyhow!("need --random or both --x0 and --y0"))?
                .to_string(),
        };
        let y_raw = match args.y0 {
            Some(s) => s,
            None => file
                .get("y0")
                .ok_or_else(|| anyhow!("need --random or both --x0 and --y0"))?
                .to_string(),
        };
        PhasePoint::on_leaf(
            &spec,
            parse_floats::<4>(&x_raw, "x0")?,
            parse_floats::<4>(&y_raw, "y0")?,
        )?
    };
    resolved.record("h", h);
    resolved.record("seed", seed);
    resolved.record("t_end", t_end);
    resolved.record("dt", dt);
    resolved.record("stride", stride as u64);
    resolved.record("random", random);
    resolved.record("x0", p0.x.to_vec());
    resolved.record("y0", p0.y.to_vec());
    resolved.record("output", output.display().to_string());

    let traj = integrate(&spec, &p0, t_end, dt)?;

    // Reference values of the conserved quantities; which set exists depends
    // on the symmetry class.
    enum Conserved {
        Uhlenbeck([f64; 4]),
        Symmetric((f64, f64, f64)),
        Energy(f64),
    }
    let reference = match spec.symmetry_tag() {
        SymmetryTag::Generic => Conserved::Uhlenbeck(uhlenbeck_integrals(&spec, &p0)?),
        SymmetryTag::EqualMiddle => Conserved::Symmetric(symmetric_integrals(&spec, &p0)?),
        _ => Conserved::Energy(p0.energy()),
    };
    let scale = p0.energy().abs().max(1e-300);
    let drift_of = |p: &PhasePoint| -> Result<f64> {
        Ok(match &reference {
            Conserved::Uhlenbeck(f0) => {
                let f = uhlenbeck_integrals(&spec, p)?;
                (0..4).map(|i| (f[i] - f0[i]).abs()).fold(0.0f64, f64::max) / scale
            }
            Conserved::Symmetric((h0, j0, g0)) => {
                let (hh, jj, gg) = symmetric_integrals(&spec, p)?;
                ((hh - h0).abs().max((jj - j0).abs()).max((gg - g0).abs())) / scale
            }
            Conserved::Energy(h0) => (p.energy() - h0).abs() / scale,
        })
    };

    let mut body = String::from("t,x0,x1,x2,x3,y0,y1,y2,y3,c1,c2,max_rel_drift\n");
    let mut max_drift = 0.0f64;
    for (idx, (t, p)) in traj.samples.iter().enumerate() {
        let d = drift_of(p)?;
        max_drift = max_drift.max(d);
        if idx % stride != 0 && idx != traj.samples.len() - 1 {
            continue;
        }
        let (c1, c2) = casimirs(&spec, &p.x, &p.y);
        let mut fields = vec![fmt_f(*t)];
        fields.extend(p.x.iter().map(|v| fmt_f(*v)));
        fields.extend(p.y.iter().map(|v| fmt_f(*v)));
        fields.push(fmt_f(c1));
        fields.push(fmt_f(c2));
        fields.push(fmt_f(d));
        body.push_str(&fields.join(","));
        body.push('\n');
    }
    write_file(&output, &body)?;
    resolved.write_sidecar(&output)?;

    let (_, last) = traj.samples.last().expect("at least the initial sample");
    let closure: f64 = (0..4)
        .map(|i| (last.x[i] - p0.x[i]).powi(2) + (last.y[i] - p0.y[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    println!("samples: {}", traj.samples.len());
    println!("max relative drift: {}", fmt_f(max_drift));
    println!("closure distance |z(t_end) - z(0)|: {}", fmt_f(closure));
    Ok(0)
}

fn cmd_bifurcation(args: BifurcationArgs, file: &FileConfig) -> Result<i32> {
    let mut resolved = Resolved::default();
    let spec = resolve_spec(args.alphas, file, &mut resolved, None)?;
    let h = resolve(args.h, file, "h", Some(0.5))?;
    let samples = resolve(args.samples, file, "samples", Some(512usize))?;
    let format = resolve(args.format, file, "format", Some("csv".to_string()))?;
    let output = resolve_path(args.output, file, "output", &format!("bifurcation.{format}"));
    resolved.record("h", h);
    resolved.record("samples", samples as u64);
    resolved.record("format", format.clone());
    resolved.record("output", output.display().to_string());

    let diagram = match spec.symmetry_tag() {
        SymmetryTag::EqualMiddle => symmetric_diagram_with_samples(&spec, h, samples)?,
        _ => generic_diagram_with_samples(&spec, h, samples)?,
    };

    match format.as_str() {
        "json" => {
            let body = serde_json::to_string_pretty(&diagram)?;
            write_file(&output, &(body + "\n"))?;
        }
        "csv" => {
            let mut body = String::from("record,label,u,v,corank,point_type\n");
            for curve in &diagram.curves {
                for &(u, v) in &curve.samples {
                    body.push_str(&format!(
                        "curve,{},{},{},,\n",
                        curve.label,
                        fmt_f(u),
                        fmt_f(v)
                    ));
                }
            }
            for point in &diagram.points {
                let (u, v) = point.location.coords();
                body.push_str(&format!(
                    "point,{:?},{},{},{},{:?}\n",
                    point.point_type,
                    fmt_f(u),
                    fmt_f(v),
                    point.corank,
                    point.point_type
                ));
            }
            write_file(&output, &body)?;
        }
        other => return Err(anyhow!("unknown format {other:?} (use csv or json)")),
    }
    resolved.write_sidecar(&output)?;
    println!(
        "curves: {}, critical points: {}",
        diagram.curves.len(),
        diagram.points.len()
    );
    Ok(0)
}

/// Parses `min:max:n`.
fn parse_range(raw: &str, what: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(anyhow!("{what} must be min:max:n, got {raw:?}"));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|e| anyhow!("{what} min: {e}"))?;
    let hi: f64 = parts[1].trim().parse().map_err(|e| anyhow!("{what} max: {e}"))?;
    let n: usize = parts[2].trim().parse().map_err(|e| anyhow!("{what} count: {e}"))?;
    if !(hi > lo) || n < 2 {
        return Err(anyhow!("{what} needs max > min and n >= 2"));
    }
    Ok((lo, hi, n))
}

fn cmd_actions(args: ActionsArgs, file: &FileConfig) -> Result<i32> {
    let mut resolved = Resolved::default();
    let spec = resolve_spec(args.alphas, file, &mut resolved, Some("1,2,2,4"))?;
    let h = resolve(args.h, file, "h", Some(0.5))?;
    let grid = resolve(
        args.grid,
        file,
        "grid",
        Some("-1.3:1.3:27,-0.95:1.95:30".to_string()),
    )?;
    let output = resolve_path(args.output, file, "output", "actions.csv");
    let (j_part, g_part) = grid
        .split_once(',')
        .ok_or_else(|| anyhow!("grid must be jmin:jmax:n,gmin:gmax:m"))?;
    let (jlo, jhi, nj) = parse_range(j_part, "j range")?;
    let (glo, ghi, ng) = parse_range(g_part, "g range")?;
    resolved.record("h", h);
    resolved.record("grid", grid.clone());
    resolved.record("output", output.display().to_string());

    let cells: Vec<(f64, f64)> = (0..nj)
        .flat_map(|a| {
            let j = jlo + (jhi - jlo) * a as f64 / (nj - 1) as f64;
            (0..ng).map(move |b| {
                let g = glo + (ghi - glo) * b as f64 / (ng - 1) as f64;
                (j, g)
            })
        })
        .collect();

    // Sweep in parallel; rows keep the deterministic grid order.
    let rows: Vec<Result<String>> = cells
        .par_iter()
        .map(|&(j, g)| match action_frame(&spec, h, g, j) {
            Ok(frame) => Ok(format!(
                "{},{},ok,{},{},{},{},{}\n",
                fmt_f(j),
                fmt_f(g),
                fmt_f(frame.i[0]),
                fmt_f(frame.i[1]),
                fmt_f(frame.i[2]),
                fmt_f(frame.di_djgh[1][0]),
                fmt_f(frame.di_djgh[2][0])
            )),
            Err(GeoError::OutsideImage { .. }) => {
                Ok(format!("{},{},outside_image,,,,,\n", fmt_f(j), fmt_f(g)))
            }
            Err(GeoError::PoleCollision { .. }) => {
                Ok(format!("{},{},focus_focus,,,,,\n", fmt_f(j), fmt_f(g)))
            }
            Err(other) => Err(other.into()),
        })
        .collect();

    let mut body = String::from("j,g,status,i1,i2,i3,di2_dj,di3_dj\n");
    let mut ok_cells = 0usize;
    for row in rows {
        let row = row?;
        if row.contains(",ok,") {
            ok_cells += 1;
        }
        body.push_str(&row);
    }
    write_file(&output, &body)?;
    resolved.write_sidecar(&output)?;
    println!("grid cells: {}, inside image: {ok_cells}", cells.len());
    Ok(0)
}

fn cmd_monodromy(args: MonodromyArgs, file: &FileConfig) -> Result<i32> {
    let mut resolved = Resolved::default();
    let spec = resolve_spec(args.alphas, file, &mut resolved, Some("1,2,2,4"))?;
    let h = resolve(args.h, file, "h", Some(0.5))?;
    let loop_spec = resolve(args.loop_spec, file, "loop", Some("0.5,0.5,64".to_string()))?;
    let center_spec = resolve(args.center, file, "center", Some("0,0".to_string()))?;
    let output = resolve_path(args.output, file, "output", "monodromy.json");
    let [rj, rg, n] = parse_floats::<3>(&loop_spec, "loop")?;
    let n_steps = n as usize;
    if n_steps < 32 || (n - n_steps as f64).abs() > 0.0 {
        return Err(anyhow!("loop step count must be an integer >= 32, got {n}"));
    }
    let [jc, gc] = parse_floats::<2>(&center_spec, "center")?;
    resolved.record("h", h);
    resolved.record("loop", loop_spec.clone());
    resolved.record("center", center_spec.clone());
    resolved.record("output", output.display().to_string());

    let result = monodromy_about(&spec, h, (jc, gc), (rj, rg), n_steps)?;
    let body = serde_json::to_string_pretty(&result)?;
    write_file(&output, &(body + "\n"))?;
    resolved.write_sidecar(&output)?;
    println!("M = {:?}", result.m.entries);
    println!("N = {:?}", result.n.entries);
    println!("T = {:?}", result.t.entries);
    Ok(0)
}

fn cmd_revolution(args: RevolutionArgs, file: &FileConfig) -> Result<i32> {
    let mut resolved = Resolved::default();
    let alpha0 = resolve(args.alpha0, file, "alpha0", Some(1.0))?;
    let alpha1 = resolve(args.alpha1, file, "alpha1", Some(2.0))?;
    let h = resolve(args.h, file, "h", Some(1.0))?;
    let case = resolve(args.case, file, "case", Some("both".to_string()))?;
    let n = resolve(args.n, file, "n", Some(41usize))?;
    let output = resolve_path(args.output, file, "output", "revolution.csv");
    if n < 2 {
        return Err(anyhow!("need at least 2 grid points"));
    }
    resolved.record("alpha0", alpha0);
    resolved.record("alpha1", alpha1);
    resolved.record("h", h);
    resolved.record("case", case.clone());
    resolved.record("n", n as u64);
    resolved.record("output", output.display().to_string());

    // The two branch cases of the closed form: the given axis ratio and its
    // reciprocal (axis alpha1^2/alpha0), which is the other boundary
    // reduction of the symmetric 3-ellipsoid.
    let direct = RevolutionParams::new(alpha0, alpha1)?;
    let reciprocal = RevolutionParams::new(alpha1 * alpha1 / alpha0, alpha1)?;
    let cases: Vec<(&str, RevolutionParams)> = match case.as_str() {
        "direct" => vec![("direct", direct)],
        "reciprocal" => vec![("reciprocal", reciprocal)],
        "both" => vec![("direct", direct), ("reciprocal", reciprocal)],
        other => return Err(anyhow!("unknown case {other:?} (direct, reciprocal, both)")),
    };

    let mut body = String::from("case_id,rho,jhat,j,i_closed,i_quadrature\n");
    let mut worst = 0.0f64;
    for (case_id, params) in &cases {
        let jmax = (2.0 * h * params.equator_alpha).sqrt();
        let rho = params.axis_alpha / params.equator_alpha;
        for k in 0..n {
            let jhat = -1.0 + 2.0 * k as f64 / (n - 1) as f64;
            let j = jhat * jmax;
            let closed = revolution_action(params, h, j)?;
            let quad = revolution_action_quadrature(params, h, j)?;
            worst = worst.max((closed - quad).abs());
            body.push_str(&format!(
                "{case_id},{},{},{},{},{}\n",
                fmt_f(rho),
                fmt_f(jhat),
                fmt_f(j),
                fmt_f(closed),
                fmt_f(quad)
            ));
        }
    }
    write_file(&output, &body)?;
    resolved.write_sidecar(&output)?;
    println!("max |closed - quadrature|: {}", fmt_f(worst));
    Ok(0)
}

fn cmd_selftest(args: SelftestArgs) -> Result<i32> {
    let reports = run_all();
    let mut all_ok = true;
    for r in &reports {
        let tag = if r.passed { "[PASS]" } else { "[FAIL]" };
        println!(
            "{tag} criterion {}: {} ({:.2}s) — {}",
            r.id, r.name, r.runtime_secs, r.details
        );
        all_ok &= r.passed;
    }
    if let Some(output) = args.output {
        let body = serde_json::to_string_pretty(&reports)?;
        write_file(&output, &(body + "\n"))?;
    }
    Ok(if all_ok { 0 } else { 1 })
}
