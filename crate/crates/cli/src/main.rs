//! Command-line front end: build, verify, analyze, search, and integrate
//! special central configurations on the unit sphere.
//!
//! Exit codes: 0 for success / a true verdict, 1 for a false verdict,
//! 2 for usage, input, or domain errors. Machine-readable output (JSON, or
//! CSV where requested) goes to stdout; tables and diagnostics go to
//! stderr. A configuration argument of "-" reads from stdin.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use sphere_scc::dziobek::{criterion_check, recover_masses, DEFAULT_CRITERION_TOL};
use sphere_scc::dynamics::{integrate_with, PhaseState};
use sphere_scc::families::{build, mass_ratio_curve, FamilySpec, SimplexFamilyKind};
use sphere_scc::geometry::in_closed_hemisphere;
use sphere_scc::potential::{scc_residual, DEFAULT_SCC_TOL};
use sphere_scc::solver::{search, SearchSettings};
use sphere_scc::{Configuration, MassVector};

#[derive(Parser)]
#[command(
    name = "sphere-scc",
    version,
    about = "Special central configurations of the curved N-body problem on the sphere"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check stationarity: all gradient vectors vanish within a tolerance.
    Verify {
        /// Configuration document (path, or "-" for stdin)
        input: String,
        /// Gradient-norm tolerance for the verdict
        #[arg(long)]
        tol: Option<f64>,
        /// Masses: comma-separated list or @file.json (overrides the document)
        #[arg(long)]
        masses: Option<String>,
    },
    /// Run the codimension-one ratio criterion and residual systems.
    Criterion {
        /// Configuration document (path, or "-" for stdin)
        input: String,
        /// Relative-spread tolerance for the verdict
        #[arg(long)]
        tol: Option<f64>,
        /// Masses: comma-separated list or @file.json (overrides the document)
        #[arg(long)]
        masses: Option<String>,
    },
    /// Recover the unique normalized masses a codimension-one shape admits.
    Masses {
        /// Configuration document (path, or "-" for stdin)
        input: String,
    },
    /// Emit a built-in stationary family instance as a JSON document.
    Family {
        #[command(subcommand)]
        family: FamilyCommand,
    },
    /// Sample a simplex-with-apex mass-ratio curve.
    Sweep {
        /// Which curve to sample
        kind: CurveKind,
        /// Number of interior samples
        #[arg(long)]
        samples: usize,
        /// Emit "c,f(c)" CSV rows instead of JSON
        #[arg(long)]
        csv: bool,
    },
    /// Multistart search for stationary configurations of given masses.
    Search {
        /// Sphere dimension n (bodies live on S^n)
        #[arg(long)]
        n: usize,
        /// Masses: comma-separated list or @file.json
        #[arg(long)]
        masses: String,
        /// Number of random starts
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Random seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Convergence bound on the max gradient norm
        #[arg(long)]
        tol: Option<f64>,
        /// Fingerprint distance below which solutions merge
        #[arg(long)]
        merge_tol: Option<f64>,
    },
    /// Integrate the equations of motion and report drift metrics.
    Simulate {
        /// Configuration document (path, or "-" for stdin)
        input: String,
        /// Time step
        #[arg(long)]
        dt: f64,
        /// Final time
        #[arg(long)]
        t_final: f64,
        /// Initial velocities: @file.json with one row per body (default: rest)
        #[arg(long)]
        velocities: Option<String>,
        /// Masses: comma-separated list or @file.json (overrides the document)
        #[arg(long)]
        masses: Option<String>,
        /// Write a per-step CSV trace (t, positions flattened) to this path
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Test containment in a closed hemisphere; exit 0 when contained.
    Hemisphere {
        /// Configuration document (path, or "-" for stdin)
        input: String,
    },
}

#[derive(Subcommand)]
enum FamilyCommand {
    /// Regular (2k+1)-gon on a great circle, equal masses
    OddPolygon {
        #[arg(long)]
        k: usize,
    },
    /// Odd polygons on two complementary great circles of S^3
    Circles {
        #[arg(long)]
        k1: usize,
        #[arg(long)]
        k2: usize,
    },
    /// Triangle on a great circle at angles (0, alpha, alpha+beta)
    Triangle {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
    },
    /// Tetrahedron with an apex facing an equilateral base, parameter c
    Tetra {
        #[arg(long)]
        c: f64,
    },
    /// Pentatope with an apex facing a regular tetrahedral base, parameter c
    Pentatope {
        #[arg(long)]
        c: f64,
    },
    /// Regular simplex with equal masses (3, 4, or 5 bodies)
    Simplex {
        #[arg(long)]
        n_bodies: usize,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum CurveKind {
    Tetra,
    Pentatope,
}

impl From<CurveKind> for SimplexFamilyKind {
    fn from(kind: CurveKind) -> Self {
        match kind {
            CurveKind::Tetra => SimplexFamilyKind::Tetra,
            CurveKind::Pentatope => SimplexFamilyKind::Pentatope,
        }
    }
}

/// The JSON document exchanged between subcommands: a configuration plus
/// optional masses.
#[derive(Serialize, Deserialize)]
struct Document {
    configuration: Configuration,
    #[serde(skip_serializing_if = "Option::is_none")]
    masses: Option<MassVector>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(sphere_scc::Error),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Json(e) => write!(f, "{e}"),
        }
    }
}

impl From<sphere_scc::Error> for CliError {
    fn from(e: sphere_scc::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}

type CliResult = Result<i32, CliError>;

fn main() {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    std::process::exit(code);
}

fn read_source(input: &str) -> Result<String, CliError> {
    if input == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        Ok(buf)
    } else {
        fs::read_to_string(input)
            .map_err(|e| CliError::Usage(format!("cannot read {input}: {e}")))
    }
}

/// Parse a document: either {"configuration": ..., "masses": ...} or a bare
/// configuration object. Syntax errors carry line/column positions.
fn read_document(input: &str) -> Result<Document, CliError> {
    let text = read_source(input)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("configuration").is_some() {
        Ok(serde_json::from_value(value)?)
    } else {
        Ok(Document {
            configuration: serde_json::from_value(value)?,
            masses: None,
        })
    }
}

/// Masses from a comma-separated list or an @file.json array.
fn parse_masses(spec: &str) -> Result<MassVector, CliError> {
    let values: Vec<f64> = if let Some(path) = spec.strip_prefix('@') {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
        serde_json::from_str(&text)?
    } else {
        spec.split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("not a number in --masses: {tok:?}")))
            })
            .collect::<Result<_, _>>()?
    };
    Ok(MassVector::new(values)?)
}

fn resolve_masses(doc: &Document, flag: Option<&str>) -> Result<MassVector, CliError> {
    match (flag, &doc.masses) {
        (Some(spec), _) => parse_masses(spec),
        (None, Some(m)) => Ok(m.clone()),
        (None, None) => Err(CliError::Usage(
            "no masses: provide --masses or a document with a \"masses\" field".into(),
        )),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer(&mut stdout, value)?;
    stdout.write_all(b"\n")?;
    Ok(())
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Verify { input, tol, masses } => {
            let doc = read_document(&input)?;
            let m = resolve_masses(&doc, masses.as_deref())?;
            let report = scc_residual(&doc.configuration, &m, tol.unwrap_or(DEFAULT_SCC_TOL))?;
            print_json(&report)?;
            Ok(if report.verdict { 0 } else { 1 })
        }
        Command::Criterion { input, tol, masses } => {
            let doc = read_document(&input)?;
            let m = resolve_masses(&doc, masses.as_deref())?;
            let report =
                criterion_check(&doc.configuration, &m, tol.unwrap_or(DEFAULT_CRITERION_TOL))?;
            print_json(&report)?;
            let two_col = |title: &str, values: &[f64]| {
                eprintln!("{title}");
                for (i, v) in values.iter().enumerate() {
                    eprintln!("  {i:>3}  {v:>24.16e}");
                }
            };
            eprintln!("ratio spread: {:.3e} (k = {:.6e})", report.criterion_residual, report.k);
            two_col("pairwise ratio estimates", &report.k_estimates);
            two_col("shape-equation residuals", &report.s_residuals);
            two_col("mass-equation residuals", &report.m_residuals);
            eprintln!("verdict: {}", report.verdict);
            Ok(if report.verdict { 0 } else { 1 })
        }
        Command::Masses { input } => {
            let doc = read_document(&input)?;
            let (m, residual) = recover_masses(&doc.configuration)?;
            #[derive(Serialize)]
            struct Recovered {
                masses: MassVector,
                residual: f64,
            }
            print_json(&Recovered { masses: m, residual })?;
            Ok(0)
        }
        Command::Family { family } => {
            let spec = match family {
                FamilyCommand::OddPolygon { k } => FamilySpec::OddPolygon { k },
                FamilyCommand::Circles { k1, k2 } => FamilySpec::ComplementaryCircles { k1, k2 },
                FamilyCommand::Triangle { alpha, beta } => {
                    FamilySpec::AcuteTriangle { alpha, beta }
                }
                FamilyCommand::Tetra { c } => FamilySpec::TetraFamily { c },
                FamilyCommand::Pentatope { c } => FamilySpec::PentatopeFamily { c },
                FamilyCommand::Simplex { n_bodies } => FamilySpec::RegularSimplex { n_bodies },
            };
            let (configuration, masses) = build(spec)?;
            print_json(&Document {
                configuration,
                masses: Some(masses),
            })?;
            Ok(0)
        }
        Command::Sweep { kind, samples, csv } => {
            let curve = mass_ratio_curve(kind.into(), samples)?;
            if csv {
                let mut stdout = std::io::stdout().lock();
                for (c, f) in &curve {
                    writeln!(stdout, "{c},{f}")?;
                }
            } else {
                print_json(&curve)?;
            }
            Ok(0)
        }
        Command::Search {
            n,
            masses,
            trials,
            seed,
            tol,
            merge_tol,
        } => {
            let m = parse_masses(&masses)?;
            let mut settings = SearchSettings::new(n);
            settings.trials = trials;
            settings.seed = seed;
            if let Some(t) = tol {
                settings.tol = t;
            }
            if let Some(t) = merge_tol {
                settings.merge_tol = t;
            }
            let classes = search(&m, &settings)?;
            print_json(&classes)?;
            eprintln!("class  count  residual");
            for (i, class) in classes.iter().enumerate() {
                eprintln!("{i:>5}  {:>5}  {:.3e}", class.count, class.residual);
            }
            eprintln!("{} classes from {} trials", classes.len(), trials);
            Ok(0)
        }
        Command::Simulate {
            input,
            dt,
            t_final,
            velocities,
            masses,
            trace,
        } => {
            let doc = read_document(&input)?;
            let m = resolve_masses(&doc, masses.as_deref())?;
            let state = match velocities {
                Some(spec) => {
                    let path = spec.strip_prefix('@').unwrap_or(&spec);
                    let text = fs::read_to_string(path)
                        .map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
                    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)?;
                    let rows = rows.into_iter().map(DVector::from_vec).collect();
                    PhaseState::new(doc.configuration, rows)?
                }
                None => PhaseState::rest(doc.configuration),
            };
            let mut sink: Option<BufWriter<fs::File>> = match &trace {
                Some(path) => Some(BufWriter::new(fs::File::create(path)?)),
                None => None,
            };
            let mut trace_error = None;
            let (_, report) = integrate_with(&state, &m, dt, t_final, |t, q, _| {
                if let Some(out) = sink.as_mut() {
                    let mut row = t.to_string();
                    for point in q {
                        for x in point.iter() {
                            row.push(',');
                            row.push_str(&x.to_string());
                        }
                    }
                    row.push('\n');
                    if let Err(e) = out.write_all(row.as_bytes()) {
                        trace_error.get_or_insert(e);
                    }
                }
            })?;
            if let Some(mut out) = sink {
                out.flush()?;
            }
            if let Some(e) = trace_error {
                return Err(e.into());
            }
            print_json(&report)?;
            Ok(0)
        }
        Command::Hemisphere { input } => {
            let doc = read_document(&input)?;
            let witness = in_closed_hemisphere(&doc.configuration);
            #[derive(Serialize)]
            struct Containment {
                contained: bool,
                witness: Option<Vec<f64>>,
            }
            let contained = witness.is_some();
            print_json(&Containment {
                contained,
                witness: witness.map(|u| u.iter().copied().collect()),
            })?;
            Ok(if contained { 0 } else { 1 })
        }
    }
}
