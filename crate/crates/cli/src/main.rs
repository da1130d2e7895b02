//! Command-line driver for the contact metric toolkit.
//!
//! One binary, four subcommands:
//!
//!   * `verify` — run the identity-check suite on a registry model or a
//!     JSON manifest and report per-check residuals,
//!   * `bounds` — evaluate the curvature-based radius bounds, either for a
//!     registry model or from raw scalar inputs,
//!   * `probe`  — numerically probe one comparison estimate (twisting,
//!     taming, jacobi, hessian, levi) on geodesic disks,
//!   * `tube`   — check a tube around a closed Reeb orbit for closure and
//!     twisting margins.
//!
//! Every source of randomness is derived from the single `--seed` flag, so
//! a repeated invocation reproduces its report byte for byte.  Exit codes:
//! 0 when all selected checks/probes pass, 1 when a check or probe fails,
//! 2 on invalid input (unknown model, bad manifest, out-of-chart point...).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use contact_core::{
    compute_constants, get_model, hessian_distance_probe, jacobi_bound_probe, levi_probe,
    manifest_from_str, model_bound_inputs, radius_bounds, reeb_tube_probe, run_identity_suite,
    taming_probe, twisting_probe, BoundInputs, CheckResult, ContactModel, Grid, ModelSpec,
    ProbeReport, Report, ResultItem, CHECK_IDS,
};

/// Numerical toolkit for contact metric structures: identity checks,
/// curvature radius bounds, and geodesic-disk probes.
#[derive(Parser)]
#[command(name = "contact-radius", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the identity-check suite on a model or manifest
    Verify(VerifyArgs),
    /// Evaluate the curvature radius bounds
    Bounds(BoundsArgs),
    /// Probe one comparison estimate on geodesic disks
    Probe(ProbeArgs),
    /// Check a tube around a closed Reeb orbit
    Tube(TubeArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Registry model name (heisenberg3, heisenberg5, round-s3)
    #[arg(long)]
    model: Option<String>,
    /// Path to a JSON model manifest
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Number of sample points per check
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// Relative residual tolerance
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Seed for every random draw in the suite
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the JSON report instead of the table
    #[arg(long)]
    json: bool,
    /// Run only this check id (repeatable)
    #[arg(long = "check")]
    check: Vec<String>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Registry model name; alternatively give the scalar flags below
    #[arg(long)]
    model: Option<String>,
    /// Manifold dimension 2n+1 (odd, at least 3)
    #[arg(long)]
    dim: Option<usize>,
    /// Injectivity radius
    #[arg(long)]
    inj: Option<f64>,
    /// Lower sectional curvature bound
    #[arg(long = "sec-min")]
    sec_min: Option<f64>,
    /// Upper sectional curvature bound
    #[arg(long = "sec-max")]
    sec_max: Option<f64>,
    /// Bound on |sec|
    #[arg(long = "sec-abs")]
    sec_abs: Option<f64>,
    /// Rotation speed of the contact structure
    #[arg(long = "theta-prime")]
    theta_prime: Option<f64>,
    /// Lower bound on the Ricci curvature in the Reeb direction
    #[arg(long = "ric-min")]
    ric_min: Option<f64>,
    /// Print the JSON report instead of the table
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ProbeArgs {
    /// Which estimate to probe
    #[arg(value_enum)]
    probe: ProbeKind,
    /// Registry model name
    #[arg(long)]
    model: String,
    /// Base point as comma-separated coordinates (default: chart center)
    #[arg(long)]
    point: Option<String>,
    /// Disk radius (required by every probe except levi)
    #[arg(long)]
    radius: Option<f64>,
    /// Directions x radii sample grid, e.g. 32x16
    #[arg(long)]
    grid: Option<String>,
    /// Write per-sample margins to this CSV file
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Seed for every random draw in the probe
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the JSON report instead of the summary
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TubeArgs {
    /// Registry model name
    #[arg(long)]
    model: String,
    /// Index into the model's closed-orbit seeds
    #[arg(long, default_value_t = 0)]
    orbit: usize,
    /// Tube radius
    #[arg(long)]
    radius: f64,
    /// Seed for every random draw in the probe
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the JSON report instead of the summary
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProbeKind {
    Twisting,
    Taming,
    Jacobi,
    Hessian,
    Levi,
}

impl ProbeKind {
    fn name(self) -> &'static str {
        match self {
            ProbeKind::Twisting => "twisting",
            ProbeKind::Taming => "taming",
            ProbeKind::Jacobi => "jacobi",
            ProbeKind::Hessian => "hessian",
            ProbeKind::Levi => "levi",
        }
    }
}

fn main() -> ExitCode {
    // Die quietly when the reader of a pipe goes away (`... | head`)
    // instead of panicking on the failed stdout write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let outcome = match &cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Tube(a) => cmd_tube(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Honors CONTACT_RADIUS_THREADS: unset or 0 keeps rayon's automatic pool
/// sizing, a positive integer pins the global pool to that many threads.
fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("CONTACT_RADIUS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow!("CONTACT_RADIUS_THREADS must be a non-negative integer, got `{raw}`"))?;
    if n > 0 {
        // Fails only if a global pool already exists; that pool then wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// A resolved model: borrowed from the static registry, or owned when it
/// came from a manifest file.
enum ModelSource {
    Registry(&'static ModelSpec),
    Manifest(ContactModel),
}

impl ModelSource {
    fn model(&self) -> &ContactModel {
        match self {
            ModelSource::Registry(spec) => &spec.model,
            ModelSource::Manifest(m) => m,
        }
    }
}

/// Resolves `--model`/`--manifest` into a model plus its report label: the
/// registry name, or the SHA-256 digest of the manifest text.
fn resolve_model(model: &Option<String>, manifest: &Option<PathBuf>) -> Result<(ModelSource, String)> {
    match (model, manifest) {
        (Some(_), Some(_)) => bail!("pass exactly one of --model or --manifest, not both"),
        (None, None) => bail!("one of --model or --manifest is required"),
        (Some(name), None) => {
            let spec = get_model(name)?;
            Ok((ModelSource::Registry(spec), name.clone()))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading manifest {}", path.display()))?;
            let model = manifest_from_str(&text)?;
            let label = format!("{:x}", Sha256::digest(text.as_bytes()));
            Ok((ModelSource::Manifest(model), label))
        }
    }
}

fn push_flag(echo: &mut String, flag: &str, value: impl std::fmt::Display) {
    let _ = write!(echo, " --{flag} {value}");
}

fn point_echo(p: &[f64]) -> String {
    p.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn parse_point(text: &str, dim: usize) -> Result<Vec<f64>> {
    let vals = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("point component `{t}` is not a number"))
        })
        .collect::<Result<Vec<f64>>>()?;
    if vals.len() != dim {
        bail!("point has {} components; the model chart has dimension {dim}", vals.len());
    }
    Ok(vals)
}

fn chart_center(model: &ContactModel) -> Vec<f64> {
    match &model.chart.bounds {
        Some(b) => b.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect(),
        None => vec![0.0; model.dim()],
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    let started = Instant::now();
    let (source, label) = resolve_model(&args.model, &args.manifest)?;
    for id in &args.check {
        if !CHECK_IDS.contains(&id.as_str()) {
            bail!("unknown check id `{id}` (known: {})", CHECK_IDS.join(", "));
        }
    }
    let results = run_identity_suite(source.model(), args.points, args.seed, args.tol)?;
    let selected: Vec<CheckResult> = if args.check.is_empty() {
        results
    } else {
        results
            .into_iter()
            .filter(|r| args.check.iter().any(|c| c == &r.check_id))
            .collect()
    };
    let all_pass = selected.iter().all(|r| r.pass);

    // Canonical command echo: defaults materialized, checks in suite order.
    let mut echo = String::from("verify");
    match (&args.model, &args.manifest) {
        (Some(name), _) => push_flag(&mut echo, "model", name),
        (_, Some(path)) => push_flag(&mut echo, "manifest", path.display()),
        _ => unreachable!("resolve_model enforces one source"),
    }
    push_flag(&mut echo, "points", args.points);
    push_flag(&mut echo, "tol", args.tol);
    push_flag(&mut echo, "seed", args.seed);
    for id in CHECK_IDS {
        if args.check.iter().any(|c| c == id) {
            push_flag(&mut echo, "check", id);
        }
    }

    let mut report = Report::new(echo, args.seed, label);
    report.results = selected.iter().cloned().map(ResultItem::Check).collect();

    if args.json {
        println!("{}", report.to_json());
    } else {
        println!(
            "model {}: {} check(s) at {} points, seed {}, tolerance {:e}",
            report.model,
            selected.len(),
            args.points,
            args.seed,
            args.tol
        );
        println!();
        println!(
            "{:<18} {:>12} {:>12} {:>8}  result",
            "check", "residual", "margin", "samples"
        );
        for r in &selected {
            let margin = r.margin.map_or_else(|| "-".to_string(), |m| format!("{m:.3e}"));
            println!(
                "{:<18} {:>12.3e} {:>12} {:>8}  {}",
                r.check_id,
                r.residual,
                margin,
                r.samples,
                if r.pass { "pass" } else { "FAIL" }
            );
        }
        println!();
        let n_pass = selected.iter().filter(|r| r.pass).count();
        println!(
            "{n_pass}/{} checks passed ({} ms)",
            selected.len(),
            started.elapsed().as_millis()
        );
    }
    Ok(all_pass)
}

fn cmd_bounds(args: &BoundsArgs) -> Result<bool> {
    let started = Instant::now();
    let scalar_given = args.dim.is_some()
        || args.inj.is_some()
        || args.sec_min.is_some()
        || args.sec_max.is_some()
        || args.sec_abs.is_some()
        || args.theta_prime.is_some()
        || args.ric_min.is_some();

    let (inputs, label, echo) = if let Some(name) = &args.model {
        if scalar_given {
            bail!("--model conflicts with the scalar input flags");
        }
        let spec = get_model(name)?;
        let inputs = model_bound_inputs(spec)?;
        let mut echo = String::from("bounds");
        push_flag(&mut echo, "model", name);
        (inputs, name.clone(), echo)
    } else {
        let need = |v: Option<f64>, flag: &str| {
            v.ok_or_else(|| anyhow!("scalar input requires --{flag} (or use --model)"))
        };
        let dim = args
            .dim
            .ok_or_else(|| anyhow!("scalar input requires --dim (or use --model)"))?;
        if dim < 3 || dim % 2 == 0 {
            bail!("dimension must be an odd integer >= 3, got {dim}");
        }
        let inj = need(args.inj, "inj")?;
        let sec_min = need(args.sec_min, "sec-min")?;
        let sec_max = need(args.sec_max, "sec-max")?;
        let sec_abs = need(args.sec_abs, "sec-abs")?;
        let theta_prime = need(args.theta_prime, "theta-prime")?;
        let ric_min = need(args.ric_min, "ric-min")?;
        let inputs = BoundInputs {
            n: (dim - 1) / 2,
            inj,
            kappa: sec_min,
            k_upper: sec_max,
            sec_abs,
            theta_prime,
            ric_min,
        };
        let mut echo = String::from("bounds");
        push_flag(&mut echo, "dim", dim);
        push_flag(&mut echo, "inj", inj);
        push_flag(&mut echo, "sec-min", sec_min);
        push_flag(&mut echo, "sec-max", sec_max);
        push_flag(&mut echo, "sec-abs", sec_abs);
        push_flag(&mut echo, "theta-prime", theta_prime);
        push_flag(&mut echo, "ric-min", ric_min);
        (inputs, "scalar".to_string(), echo)
    };

    let breport = radius_bounds(&inputs)?;
    let mut report = Report::new(echo, 0, label);
    report.results.push(ResultItem::Bounds(breport.clone()));

    if args.json {
        println!("{}", report.to_json());
    } else {
        println!(
            "radius bounds for {} (n = {}, dim = {}):",
            report.model,
            inputs.n,
            2 * inputs.n + 1
        );
        println!();
        let rows: Vec<(&str, f64)> = vec![
            ("r_max", breport.r_max),
            ("A", breport.a),
            ("B", breport.b),
            ("Hbar1", breport.hbar1),
            ("Hbar2", breport.hbar2),
            ("Hbar", breport.hbar),
            ("r_perp", breport.r_perp),
            ("r_tau", breport.r_tau),
            ("Q(r_tau)", breport.q_at_r_tau),
            ("darboux_refined", breport.darboux_refined),
            ("darboux_rough", breport.darboux_rough),
        ];
        for (name, value) in rows {
            println!("  {name:<18} {value:.12e}");
        }
        if let Some(b3) = breport.bound_3d {
            println!("  {:<18} {b3:.12e}", "bound_3d");
        }
        println!("  {:<18} {:.12e}", "tightness_bound", breport.tightness_bound);
        println!("  {:<18} {:.12e}", "tube_embed_radius", breport.tube_embed_radius);
        println!("  {:<18} {:.12e}", "c_n", breport.c_n);
        println!("  {:<18} {:.12e}", "d_n", breport.d_n);
        println!();
        println!("({} ms)", started.elapsed().as_millis());
    }
    Ok(true)
}

fn cmd_probe(args: &ProbeArgs) -> Result<bool> {
    let started = Instant::now();
    let spec = get_model(&args.model)?;
    let model = &spec.model;
    let inputs = model_bound_inputs(spec)?;
    let grid = match &args.grid {
        Some(text) => Grid::parse(text)?,
        None => Grid::default(),
    };
    let point = match &args.point {
        Some(text) => parse_point(text, model.dim())?,
        None => chart_center(model),
    };
    if !model.chart.contains(&point) {
        bail!("point {} lies outside the model chart", point_echo(&point));
    }
    let kind = args.probe;
    let needs_radius = kind != ProbeKind::Levi;
    let radius = if needs_radius {
        args.radius
            .ok_or_else(|| anyhow!("--radius is required for the {} probe", kind.name()))?
    } else {
        0.0
    };

    let consts = compute_constants(&inputs)?;
    let pr = match kind {
        ProbeKind::Twisting => {
            twisting_probe(model, &point, radius, grid, consts.a, consts.b, args.seed)?
        }
        ProbeKind::Jacobi => {
            jacobi_bound_probe(model, &point, radius, grid, inputs.kappa, inputs.sec_abs, args.seed)?
        }
        ProbeKind::Taming => {
            taming_probe(model, &point, radius, grid, consts.hbar, inputs.theta_prime, args.seed)?
        }
        ProbeKind::Hessian => {
            hessian_distance_probe(model, &point, radius, grid, inputs.k_upper, args.seed)?
        }
        ProbeKind::Levi => levi_probe(model, grid.n_dirs * grid.n_radii, args.seed)?,
    };

    if let Some(path) = &args.csv {
        write_csv(path, &pr)?;
    }

    let mut echo = format!("probe {}", kind.name());
    push_flag(&mut echo, "model", &args.model);
    if needs_radius {
        push_flag(&mut echo, "point", point_echo(&point));
        push_flag(&mut echo, "radius", radius);
    }
    push_flag(&mut echo, "grid", format!("{}x{}", grid.n_dirs, grid.n_radii));
    if let Some(path) = &args.csv {
        push_flag(&mut echo, "csv", path.display());
    }
    push_flag(&mut echo, "seed", args.seed);

    let pass = pr.pass;
    let mut report = Report::new(echo, args.seed, args.model.clone());
    report.results.push(ResultItem::Probe(pr.clone()));

    if args.json {
        println!("{}", report.to_json());
    } else {
        human_probe(&pr, started);
    }
    Ok(pass)
}

fn cmd_tube(args: &TubeArgs) -> Result<bool> {
    let started = Instant::now();
    let spec = get_model(&args.model)?;
    let model = &spec.model;
    let orbit = model.orbits.get(args.orbit).ok_or_else(|| {
        anyhow!(
            "model {} has {} orbit seed(s); index {} is out of range",
            args.model,
            model.orbits.len(),
            args.orbit
        )
    })?;
    let inputs = model_bound_inputs(spec)?;
    let consts = compute_constants(&inputs)?;
    let breport = radius_bounds(&inputs)?;
    let pr = reeb_tube_probe(
        model,
        orbit,
        args.radius,
        Grid::default(),
        consts.a,
        consts.b,
        breport.tube_embed_radius,
        args.seed,
    )?;

    let mut echo = String::from("tube");
    push_flag(&mut echo, "model", &args.model);
    push_flag(&mut echo, "orbit", args.orbit);
    push_flag(&mut echo, "radius", args.radius);
    push_flag(&mut echo, "seed", args.seed);

    let pass = pr.pass;
    let mut report = Report::new(echo, args.seed, args.model.clone());
    report.results.push(ResultItem::Probe(pr.clone()));

    if args.json {
        println!("{}", report.to_json());
    } else {
        human_probe(&pr, started);
    }
    Ok(pass)
}

fn write_csv(path: &Path, pr: &ProbeReport) -> Result<()> {
    let mut out = String::from("dir_index,s,margin\n");
    for row in &pr.rows {
        let _ = writeln!(out, "{},{},{}", row.dir_index, row.s, row.margin);
    }
    std::fs::write(path, out).with_context(|| format!("writing csv {}", path.display()))
}

fn human_probe(pr: &ProbeReport, started: Instant) {
    println!("probe {}: {} samples, radius {}", pr.probe_id, pr.samples, pr.radius);
    println!(
        "  margin_min  {:+.6e}  (worst at direction {}, s = {:.6})",
        pr.margin_min, pr.worst.direction, pr.worst.s
    );
    if let Some(ratio) = pr.ratio_min {
        println!("  ratio_min   {ratio:.6e}");
    }
    if let Some(defect) = pr.closure_defect {
        println!("  closure     {defect:.6e}");
    }
    println!(
        "  {} ({} ms)",
        if pr.pass { "pass" } else { "FAIL" },
        started.elapsed().as_millis()
    );
}
