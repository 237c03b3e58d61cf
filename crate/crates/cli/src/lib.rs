//! `qi`: reproducible runs of the quasi-interpolation experiments.
//!
//! Exit codes: 0 success, 1 tolerance or bound failure, 2 usage or
//! configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use qispline::analysis::{
    check_theorem, convergence_study, lebesgue_sup, write_convergence_csv, BoundOptions, ErrorReport, SampleRule,
    StudyConfig, Theorem,
};
use qispline::basis::BasisFamily;
use qispline::bernstein::Deriv;
use qispline::config::MeshSpec;
use qispline::functions::{Smoothness, TestFunction};
use qispline::mesh::Point;
use qispline::operators::{Operator, OperatorKind};
use qispline::QiError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qi", version, about = "C1 quadratic spline quasi-interpolants on criss-cross meshes")]
struct Cli {
    /// Machine-readable JSON on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the B-spline family and report its diagnostics as JSON.
    BasisCheck {
        /// Mesh spec: inline JSON or a path to a JSON file.
        #[arg(long)]
        mesh: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Evaluate D^alpha Qf at points read from a CSV with columns x,y.
    Eval {
        #[arg(long)]
        mesh: String,
        #[arg(long)]
        operator: OperatorKind,
        #[arg(long)]
        function: String,
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value = "0,0")]
        deriv: Deriv,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sampled sup of the Lebesgue function.
    Norms {
        #[arg(long)]
        mesh: String,
        #[arg(long)]
        operator: OperatorKind,
        /// Samples per direction.
        #[arg(long, default_value_t = 50)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check theorem error bounds from a JSON config.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refinement study from a JSON config, written as CSV.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<QiError> for Failure {
    fn from(e: QiError) -> Self {
        let code = match e {
            QiError::Construction { .. }
            | QiError::Normalization(_)
            | QiError::NonFinite { .. }
            | QiError::InvalidMatrix(_) => EXIT_FAILURE,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    let result = configure_threads().and_then(|pool| match pool {
        Some(pool) => {
            let mut buf = Vec::new();
            let r = pool.install(|| dispatch(&cli, &mut buf));
            let _ = stdout.write_all(&buf);
            r
        }
        None => dispatch(&cli, stdout),
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "qi: {}", f.message);
            f.code
        }
    }
}

/// A local pool capped by `QI_THREADS`, when set.
fn configure_threads() -> CliResult<Option<rayon::ThreadPool>> {
    let Ok(v) = std::env::var("QI_THREADS") else {
        return Ok(None);
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("QI_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| usage(format!("cannot start {n} threads: {e}")))
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult<i32> {
    match &cli.command {
        Command::BasisCheck { mesh, tol } => basis_check(mesh, *tol, out),
        Command::Eval { mesh, operator, function, points, deriv, out: path } => {
            eval(mesh, *operator, function, points, *deriv, path, cli.json, out)
        }
        Command::Norms { mesh, operator, grid, out: path } => norms(mesh, *operator, *grid, path.as_deref(), cli.json, out),
        Command::Bounds { config, out: path } => bounds(config, path, cli.json, out),
        Command::Converge { config, out: path } => converge(config, path, cli.json, out),
    }
}

fn print(out: &mut dyn Write, text: &str) -> CliResult<()> {
    writeln!(out, "{text}").map_err(|e| Failure { code: EXIT_FAILURE, message: format!("cannot write output: {e}") })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

/// Write via a temporary file in the target directory, then rename.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
    let fail = |e: std::io::Error| usage(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w).map_err(fail)?;
        w.flush().map_err(fail)?;
    }
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn basis_check(mesh: &str, tol: f64, out: &mut dyn Write) -> CliResult<i32> {
    let mesh = MeshSpec::from_arg(mesh)?.build()?;
    let diag = BasisFamily::build(&mesh)?.diagnostics();
    let violations = diag.violations(tol);
    #[derive(Serialize)]
    struct Report<'a> {
        tolerance: f64,
        diagnostics: &'a qispline::basis::BasisDiagnostics,
        violations: &'a [&'static str],
    }
    print(out, &to_json(&Report { tolerance: tol, diagnostics: &diag, violations: &violations }))?;
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_FAILURE })
}

fn read_points(path: &Path) -> CliResult<Vec<Point>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| usage(format!("{}: {e}", path.display())))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| usage(format!("{}: missing column '{name}'", path.display())))
    };
    let (cx, cy) = (col("x")?, col("y")?);
    let mut pts = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let num = |c: usize| -> CliResult<f64> {
            rec.get(c)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| usage(format!("{}: record {}: expected numbers in x,y", path.display(), line + 1)))
        };
        pts.push(Point::new(num(cx)?, num(cy)?));
    }
    Ok(pts)
}

#[allow(clippy::too_many_arguments)]
fn eval(
    mesh: &str,
    kind: OperatorKind,
    function: &str,
    points: &Path,
    alpha: Deriv,
    path: &Path,
    json: bool,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let f: TestFunction = function.parse()?;
    let pts = read_points(points)?;
    let mesh = MeshSpec::from_arg(mesh)?.build()?;
    let op = Operator::build(kind, &mesh)?;
    let sf = op.apply(|p| f.value(p))?;
    let values = pts
        .iter()
        .map(|&p| sf.evaluate_flagged(p, alpha))
        .collect::<qispline::Result<Vec<_>>>()?;
    write_atomic(path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "y", "value", "on_edge"])?;
        for (p, v) in pts.iter().zip(&values) {
            wr.write_record([
                format!("{:.16e}", p.x),
                format!("{:.16e}", p.y),
                format!("{:.16e}", v.value),
                u8::from(v.on_edge).to_string(),
            ])?;
        }
        wr.flush()
    })?;
    let flagged = values.iter().filter(|v| v.on_edge).count();
    if json {
        #[derive(Serialize)]
        struct Summary<'a> {
            operator: OperatorKind,
            function: &'a str,
            deriv: Deriv,
            points: usize,
            flagged_on_edge: usize,
            out: String,
        }
        print(
            out,
            &to_json(&Summary {
                operator: kind,
                function,
                deriv: alpha,
                points: pts.len(),
                flagged_on_edge: flagged,
                out: path.display().to_string(),
            }),
        )?;
    } else {
        print(out, &format!("wrote {} values of D^{alpha} {kind}[{f}] to {}", pts.len(), path.display()))?;
        if flagged > 0 {
            print(out, &format!("{flagged} second-derivative values taken on triangle edges (one-sided)"))?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct NormReport {
    operator: OperatorKind,
    m: usize,
    n: usize,
    grid: usize,
    lebesgue_sup: f64,
    at: Point,
    bound: f64,
    passed: bool,
}

fn norms(mesh: &str, kind: OperatorKind, grid: usize, path: Option<&Path>, json: bool, out: &mut dyn Write) -> CliResult<i32> {
    let mesh = MeshSpec::from_arg(mesh)?.build()?;
    let op = Operator::build(kind, &mesh)?;
    let (sup, at) = lebesgue_sup(&op, grid)?;
    let bound = kind.norm_bound();
    let report = NormReport {
        operator: kind,
        m: mesh.m(),
        n: mesh.n(),
        grid,
        lebesgue_sup: sup,
        at,
        bound,
        passed: sup <= bound + 1e-9,
    };
    if let Some(p) = path {
        write_atomic(p, |w| writeln!(w, "{}", to_json(&report)))?;
    }
    if json {
        print(out, &to_json(&report))?;
    } else {
        print(
            out,
            &format!(
                "{kind} on {}x{} mesh, {grid}x{grid} samples: sup Lebesgue = {sup:.6} at {at} (bound {bound}) {}",
                report.m,
                report.n,
                if report.passed { "ok" } else { "EXCEEDED" }
            ),
        )?;
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_FAILURE })
}

/// `qi bounds` configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub mesh: MeshSpec,
    pub operator: OperatorKind,
    pub function: String,
    /// Theorem names; defaults to every theorem the function's smoothness allows.
    #[serde(default)]
    pub theorems: Option<Vec<String>>,
    #[serde(default)]
    pub sample_order: Option<usize>,
    /// Grid for the informational sampled modulus; 0 disables it.
    #[serde(default)]
    pub modulus_grid: Option<usize>,
}

fn bounds(config: &Path, path: &Path, json: bool, out: &mut dyn Write) -> CliResult<i32> {
    let cfg: BoundsConfig =
        serde_json::from_str(&read_text(config)?).map_err(|e| usage(format!("invalid bounds config: {e}")))?;
    let f: TestFunction = cfg.function.parse()?;
    let theorems: Vec<Theorem> = match &cfg.theorems {
        Some(names) => names.iter().map(|s| s.parse()).collect::<qispline::Result<_>>()?,
        None => match f.smoothness() {
            Some(Smoothness::Smooth) => Theorem::ALL.to_vec(),
            Some(Smoothness::Lipschitz) => vec![Theorem::T1],
            None => return Err(usage(format!("{f} declares no smoothness metadata; no theorem applies"))),
        },
    };
    let opts = BoundOptions {
        rule: SampleRule::new(cfg.sample_order.unwrap_or(SampleRule::default().order))?,
        modulus_grid: match cfg.modulus_grid {
            Some(0) => None,
            Some(g) => Some(g),
            None => BoundOptions::default().modulus_grid,
        },
    };
    let mesh = cfg.mesh.build()?;
    let op = Operator::new(cfg.operator, Arc::new(BasisFamily::build(&mesh)?));
    let mut reports: Vec<ErrorReport> = Vec::new();
    for t in theorems {
        reports.extend(check_theorem(t, &op, &f, opts)?);
    }
    let passed = reports.iter().all(|r| r.passed == Some(true));
    #[derive(Serialize)]
    struct Output<'a> {
        config: &'a BoundsConfig,
        passed: bool,
        reports: &'a [ErrorReport],
    }
    let doc = to_json(&Output { config: &cfg, passed, reports: &reports });
    write_atomic(path, |w| writeln!(w, "{doc}"))?;
    if json {
        print(out, &doc)?;
    } else {
        for r in &reports {
            let th = r.theorem.map(|t| t.0.to_string()).unwrap_or_default();
            print(
                out,
                &format!(
                    "theorem {th:<3} {} alpha={} error={:.3e} bound={:.3e} {}",
                    r.operator,
                    r.alpha,
                    r.error,
                    r.bound.unwrap_or(f64::NAN),
                    if r.passed == Some(true) { "ok" } else { "FAILED" }
                ),
            )?;
        }
    }
    Ok(if passed { EXIT_OK } else { EXIT_FAILURE })
}

fn converge(config: &Path, path: &Path, json: bool, out: &mut dyn Write) -> CliResult<i32> {
    let cfg = StudyConfig::from_json(&read_text(config)?)?;
    let rows = convergence_study(&cfg)?;
    write_atomic(path, |w| write_convergence_csv(w, &cfg, &rows))?;
    if json {
        print(out, &to_json(&rows))?;
    } else {
        print(out, &format!("# {}", cfg.header()))?;
        print(out, "level      m      n          h     err00     err10     err20  ord00  ord10  ord20")?;
        for r in &rows {
            let o = r.orders.unwrap_or([f64::NAN; 6]);
            print(
                out,
                &format!(
                    "{:>5} {:>6} {:>6} {:>10.3e} {:>9.2e} {:>9.2e} {:>9.2e} {:>6.2} {:>6.2} {:>6.2}",
                    r.level, r.m, r.n, r.h, r.errors[0], r.errors[1], r.errors[3], o[0], o[1], o[3]
                ),
            )?;
        }
    }
    Ok(EXIT_OK)
}
