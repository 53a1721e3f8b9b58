//! The `oscbasis` command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid parameters or
//! input, 3 I/O failure. Every command that writes files also writes
//! `<out>.manifest.json` next to its primary output.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::approx::{evaluate_expansion, project, reduce_frequency, residual_norm, Expansion, OscTarget};
use crate::basis::{build_basis, OscBasis};
use crate::calculus::{derivative_matrix_legtrig, to_orthogonal_basis};
use crate::error::{Error, Result};
use crate::frequency::Frequency;
use crate::io::{fmt17, sha256_hex, write_file, SCHEMA_VERSION};
use crate::oracle::{
    cond_estimate, hilbert_limit, legtrig_gram, max_abs_diff, monomial_gram, CompositeRule,
    OracleConfig,
};
use crate::pairing::gram_matrix;
use crate::tables::{build_tables, verify_tables, InnerProductTables};

/// Largest N accepted by `hilbert-demo`.
pub const HILBERT_DEMO_MAX_N: usize = 12;

/// Points used by the finite-difference check in `diff`.
pub const DIFF_CHECK_POINTS: usize = 21;

#[derive(Debug, Parser)]
#[command(name = "oscbasis", version, about = "Orthonormal Legendre-trig bases for oscillatory functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the inner-product tables M1..M6.
    Tables(TablesArgs),
    /// Build the orthonormal basis {p_k, q_k}.
    Basis(BasisArgs),
    /// Check a tables or basis file against quadrature.
    Verify(VerifyArgs),
    /// Project an oscillatory target onto a basis.
    Project(ProjectArgs),
    /// Differentiate an expansion.
    Diff(DiffArgs),
    /// Compare the monomial Gram matrix with its limit and with the Legendre-trig Gram.
    HilbertDemo(HilbertArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OracleArgs {
    /// Quadrature panels per period of cos(ωx).
    #[arg(long, default_value_t = 4)]
    pub panels_per_period: usize,
    /// Gauss-Legendre points in each panel.
    #[arg(long, default_value_t = 24)]
    pub points_per_panel: usize,
    /// Minimum number of panels.
    #[arg(long, default_value_t = 8)]
    pub min_panels: usize,
}

impl OracleArgs {
    fn config(&self) -> Result<OracleConfig> {
        let cfg = OracleConfig {
            panels_per_period: self.panels_per_period,
            points_per_panel: self.points_per_panel,
            min_panels: self.min_panels,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TablesArgs {
    /// A positive real, `2pi*k`, or `2pi*k+e` / `2pi*k-e`.
    #[arg(long)]
    pub omega: String,
    /// Largest Legendre degree.
    #[arg(long)]
    pub n: usize,
    /// Output file (json) or directory (csv).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BasisArgs {
    /// A positive real, `2pi*k`, or `2pi*k+e` / `2pi*k-e`.
    #[arg(long)]
    pub omega: String,
    /// Largest degree k of p_k and q_k.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Re-orthogonalize every new row against all earlier ones.
    #[arg(long)]
    pub reorthogonalize: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Tables or basis JSON file.
    #[arg(long)]
    pub input: PathBuf,
    /// Largest accepted absolute deviation.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Report file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProjectArgs {
    /// Basis JSON file.
    #[arg(long)]
    pub basis: PathBuf,
    /// Envelope of the sine part: one, zero, x, x^2, exp, cos1, runge.
    #[arg(long)]
    pub f: String,
    /// Envelope of the cosine part.
    #[arg(long)]
    pub g: String,
    /// Target frequency; reduced to the basis frequency when needed.
    #[arg(long)]
    pub omega: String,
    /// Expansion file. The report goes to `<out>.report.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiffArgs {
    #[arg(long)]
    pub basis: PathBuf,
    #[arg(long)]
    pub expansion: PathBuf,
    /// Derivative expansion file. The report goes to `<out>.report.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HilbertArgs {
    /// Largest monomial and Legendre degree (at most 12).
    #[arg(long)]
    pub n: usize,
    /// Comma-separated frequencies.
    #[arg(long, value_delimiter = ',', required = true)]
    pub omega: Vec<String>,
    /// CSV output file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

/// Parse a frequency: a plain real, `2pi*k`, or `2pi*k±e`.
pub fn parse_omega(spec: &str) -> Result<Frequency> {
    let s: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::InvalidParameter(format!("cannot parse omega '{spec}'"));
    if let Some(rest) = s.strip_prefix("2pi*") {
        let split = rest.find(['+', '-']);
        let (k, eps) = match split {
            Some(i) => (&rest[..i], Some(&rest[i..])),
            None => (rest, None),
        };
        let k: u64 = k.parse().map_err(|_| bad())?;
        return match eps {
            None => Frequency::two_pi_multiple(k),
            Some(e) => Frequency::from_parts(k, e.parse().map_err(|_| bad())?),
        };
    }
    Frequency::new(s.parse().map_err(|_| bad())?)
}

/// Built-in envelope functions.
pub fn envelope(name: &str) -> Result<fn(f64) -> f64> {
    Ok(match name {
        "one" => |_| 1.0,
        "zero" => |_| 0.0,
        "x" => |x| x,
        "x^2" => |x| x * x,
        "exp" => f64::exp,
        "cos1" => f64::cos,
        "runge" => |x| 1.0 / (1.0 + 25.0 * x * x),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown envelope '{name}' (expected one, zero, x, x^2, exp, cos1, runge)"
            )))
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: Value,
    pub schema_version: u32,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub duration_seconds: f64,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}

pub fn report_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".report.json");
    s.into()
}

fn hash_file(path: &Path) -> Result<FileHash> {
    Ok(FileHash {
        path: path.display().to_string(),
        sha256: sha256_hex(&std::fs::read(path)?),
    })
}

struct Run {
    command: &'static str,
    params: Value,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn new(command: &'static str, params: &impl Serialize) -> Result<Self> {
        Ok(Run {
            command,
            params: serde_json::to_value(params)?,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn read(&mut self, path: &Path) -> Result<String> {
        let text = std::fs::read_to_string(path)?;
        self.inputs.push(path.to_path_buf());
        Ok(text)
    }

    fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        write_file(path, contents)?;
        println!("wrote {}", path.display());
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    fn finish(self, primary: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            params: self.params,
            schema_version: SCHEMA_VERSION,
            inputs: self.inputs.iter().map(|p| hash_file(p)).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(|p| hash_file(p)).collect::<Result<_>>()?,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_file(&manifest_path(primary), &text)
    }
}

fn json_text(v: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    match dispatch(&cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Ok(false) means the command ran but a check failed.
pub fn dispatch(command: &Command) -> Result<bool> {
    match command {
        Command::Tables(a) => cmd_tables(a).map(|_| true),
        Command::Basis(a) => cmd_basis(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Project(a) => cmd_project(a).map(|_| true),
        Command::Diff(a) => cmd_diff(a).map(|_| true),
        Command::HilbertDemo(a) => cmd_hilbert_demo(a).map(|_| true),
    }
}

pub fn cmd_tables(args: &TablesArgs) -> Result<()> {
    let mut run = Run::new("tables", args)?;
    let freq = parse_omega(&args.omega)?;
    let tables = build_tables(freq, args.n)?;
    match args.format {
        Format::Json => run.write(&args.out, &tables.to_json()?)?,
        Format::Csv => {
            for path in tables.write_csv_dir(&args.out)? {
                println!("wrote {}", path.display());
                run.outputs.push(path);
            }
        }
    }
    run.finish(&args.out)
}

pub fn cmd_basis(args: &BasisArgs) -> Result<()> {
    let mut run = Run::new("basis", args)?;
    let freq = parse_omega(&args.omega)?;
    let tables = build_tables(freq, args.n + 1)?;
    let basis = build_basis(freq, args.n, &tables, args.reorthogonalize)?;
    let g = gram_matrix(&basis.rep, &tables)?;
    let dev = max_abs_diff(&g, &nalgebra::DMatrix::identity(g.nrows(), g.ncols()));
    println!("self-check max |G - I| = {dev:.3e}");
    let text = match args.format {
        Format::Json => basis.to_json()?,
        Format::Csv => basis.to_csv(),
    };
    run.write(&args.out, &text)?;
    run.finish(&args.out)
}

enum Loaded {
    Tables(InnerProductTables),
    Basis(OscBasis),
}

fn load_tables_or_basis(text: &str) -> Result<Loaded> {
    let v: Value = serde_json::from_str(text)?;
    if v.get("m1").is_some() {
        Ok(Loaded::Tables(InnerProductTables::from_json(text)?))
    } else if v.get("rows").is_some() {
        Ok(Loaded::Basis(OscBasis::from_json(text)?))
    } else {
        Err(Error::Parse("input is neither a tables nor a basis file".into()))
    }
}

/// Oracle Gram of the basis rows against the identity.
pub fn basis_gram_report(basis: &OscBasis, tol: f64, cfg: &OracleConfig) -> Result<Value> {
    let rule = CompositeRule::for_frequency(&basis.freq, cfg)?;
    let mut leg = Vec::new();
    let g = rule.gram(basis.dim(), |x, out| basis.evaluate_all(x, &mut leg, out))?;
    let mut max_dev = 0.0f64;
    let mut worst = (0, 0);
    let mut flagged = Vec::new();
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            let d = (g[(i, j)] - target).abs();
            let d = if d.is_nan() { f64::INFINITY } else { d };
            if d > max_dev {
                max_dev = d;
                worst = (i, j);
            }
            if d > tol {
                flagged.push(json!({ "i": i, "j": j, "value": g[(i, j)], "deviation": d }));
            }
        }
    }
    Ok(json!({
        "kind": "basis",
        "omega": basis.freq.omega(),
        "n_max": basis.n_max,
        "tolerance": tol,
        "max_abs_deviation": max_dev,
        "worst_entry": [worst.0, worst.1],
        "passed": flagged.is_empty(),
        "flagged": flagged,
    }))
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    if args.tol.is_nan() || args.tol < 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance must be >= 0, got {}", args.tol)));
    }
    let cfg = args.oracle.config()?;
    let mut run = Run::new("verify", args)?;
    let text = run.read(&args.input)?;
    let report = match load_tables_or_basis(&text)? {
        Loaded::Tables(t) => {
            let r = verify_tables(&t, args.tol, &cfg)?;
            for (name, m) in &r.matrices {
                for e in &m.flagged {
                    println!(
                        "flagged {name}[{}][{}] = {} (oracle {}, deviation {:.3e})",
                        e.j, e.k, e.value, e.oracle, e.deviation
                    );
                }
            }
            let mut v = serde_json::to_value(&r)?;
            v["kind"] = json!("tables");
            v["max_abs_deviation"] = json!(r.max_deviation());
            v["passed"] = json!(r.passed());
            v
        }
        Loaded::Basis(b) => {
            let v = basis_gram_report(&b, args.tol, &cfg)?;
            for e in v["flagged"].as_array().into_iter().flatten().take(20) {
                println!(
                    "flagged G[{}][{}] = {} (deviation {:.3e})",
                    e["i"], e["j"], e["value"], e["deviation"].as_f64().unwrap_or(f64::NAN)
                );
            }
            v
        }
    };
    let passed = report["passed"].as_bool().unwrap_or(false);
    let max_dev = report["max_abs_deviation"].as_f64().unwrap_or(f64::INFINITY);
    println!(
        "{}: max deviation {max_dev:.3e}, tolerance {:.3e}",
        if passed { "PASS" } else { "FAIL" },
        args.tol
    );
    run.write(&args.out, &json_text(&report)?)?;
    run.finish(&args.out)?;
    Ok(passed)
}

pub fn cmd_project(args: &ProjectArgs) -> Result<()> {
    let cfg = args.oracle.config()?;
    let mut run = Run::new("project", args)?;
    let f = envelope(&args.f)?;
    let g = envelope(&args.g)?;
    let freq = parse_omega(&args.omega)?;
    let basis = OscBasis::from_json(&run.read(&args.basis)?)?;
    let target = OscTarget::new(f, g, freq.omega())?;

    let w = basis.freq.omega();
    let (target, reduction) = if (freq.omega() - w).abs() <= 1e-12 * w {
        (target, Value::Null)
    } else {
        let (decomp, reduced) = reduce_frequency(&target)?;
        log::info!("reduced omega = {} to 2pi*{}", freq.omega(), decomp.k());
        println!(
            "reduced omega = {} to 2pi*{} (epsilon = {})",
            freq.omega(),
            decomp.k(),
            decomp.epsilon()
        );
        (reduced, json!({ "k": decomp.k(), "epsilon": decomp.epsilon() }))
    };

    let exp = project(&target, &basis, &cfg)?;
    let residual = residual_norm(&target, &exp, &basis, &cfg)?;
    println!("residual norm = {residual:.3e}");
    let decay: Vec<Value> = exp
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| json!({ "index": i, "abs": c.abs() }))
        .collect();
    let report = json!({
        "omega_raw": freq.omega(),
        "basis_omega": w,
        "n_max": basis.n_max,
        "reduction": reduction,
        "residual_norm": residual,
        "coefficient_decay": decay,
    });
    run.write(&args.out, &exp.to_json()?)?;
    run.write(&report_path(&args.out), &json_text(&report)?)?;
    run.finish(&args.out)
}

/// Richardson-refined central difference.
fn richardson(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
    let d2 = (f(x + h / 2.0) - f(x - h / 2.0)) / h;
    (4.0 * d2 - d1) / 3.0
}

pub fn cmd_diff(args: &DiffArgs) -> Result<()> {
    let mut run = Run::new("diff", args)?;
    let basis = OscBasis::from_json(&run.read(&args.basis)?)?;
    let exp = Expansion::from_json(&run.read(&args.expansion)?)?;
    exp.check_basis(&basis)?;
    let op = to_orthogonal_basis(&derivative_matrix_legtrig(basis.freq, basis.n_max), &basis)?;
    let similarity = op.similarity_residual(&basis)?;
    let deriv = Expansion {
        coeffs: op.apply_orth(&exp.coeffs)?,
        ..exp.clone()
    };

    let h = 1e-4 / basis.freq.omega().max(1.0);
    let mut points = Vec::with_capacity(DIFF_CHECK_POINTS);
    let mut max_dev = 0.0f64;
    let mut max_abs = 0.0f64;
    for i in 0..DIFF_CHECK_POINTS {
        // cell midpoints, which avoid the zeros of sin(2πk x) at round x
        let x = -1.0 + (2 * i + 1) as f64 / DIFF_CHECK_POINTS as f64;
        let exact = evaluate_expansion(&deriv, &basis, x)?;
        let fd = richardson(|t| evaluate_expansion(&exp, &basis, t).unwrap_or(f64::NAN), x, h);
        max_dev = max_dev.max((exact - fd).abs());
        max_abs = max_abs.max(exact.abs());
        points.push(json!({ "x": x, "derivative": exact, "finite_difference": fd }));
    }
    let relative = if max_abs > 0.0 { max_dev / max_abs } else { max_dev };
    println!("finite-difference check: max deviation {max_dev:.3e} (relative {relative:.3e})");
    let report = json!({
        "similarity_residual": similarity,
        "fd_step": h,
        "max_abs_deviation": max_dev,
        "max_abs_derivative": max_abs,
        "relative_deviation": relative,
        "points": points,
    });
    run.write(&args.out, &deriv.to_json()?)?;
    run.write(&report_path(&args.out), &json_text(&report)?)?;
    run.finish(&args.out)
}

/// One `hilbert-demo` row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HilbertRow {
    pub omega: f64,
    pub max_dev_from_limit: f64,
    pub cond_monomial_gram: f64,
    pub cond_legtrig_gram: f64,
}

pub fn hilbert_row(freq: &Frequency, n: usize, cfg: &OracleConfig) -> Result<HilbertRow> {
    let h = monomial_gram(freq, n, cfg)?;
    Ok(HilbertRow {
        omega: freq.omega(),
        max_dev_from_limit: max_abs_diff(&h, &hilbert_limit(n)),
        cond_monomial_gram: cond_estimate(&h)?,
        cond_legtrig_gram: cond_estimate(&legtrig_gram(freq, n, cfg)?)?,
    })
}

pub fn cmd_hilbert_demo(args: &HilbertArgs) -> Result<()> {
    if args.n > HILBERT_DEMO_MAX_N {
        return Err(Error::InvalidParameter(format!(
            "hilbert-demo needs N <= {HILBERT_DEMO_MAX_N}, got {}",
            args.n
        )));
    }
    let cfg = args.oracle.config()?;
    let mut run = Run::new("hilbert-demo", args)?;
    let mut csv = String::from("omega,max_dev_from_limit,cond_monomial_gram,cond_legtrig_gram\n");
    for spec in &args.omega {
        let r = hilbert_row(&parse_omega(spec)?, args.n, &cfg)?;
        let fields = [r.omega, r.max_dev_from_limit, r.cond_monomial_gram, r.cond_legtrig_gram];
        let line: Vec<String> = fields.iter().map(|v| fmt17(*v)).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    run.write(&args.out, &csv)?;
    run.finish(&args.out)
}
