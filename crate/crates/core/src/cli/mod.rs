//! The `npcmaj` command line.
//!
//! Exit codes: 0 holds or feasible, 1 violated or infeasible, 2 invalid
//! input, 3 a barycenter solve did not converge.

mod instance;
mod report;

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::barycenter::{self, DiscreteMeasure, SolverOptions};
use crate::error::Error;
use crate::exec::Execution;
use crate::geometry::{Point, Space};
use crate::inequalities::{self, CheckReport, FuzzOptions, Suite};
use crate::stochastic::{self, RowStochasticMatrix, VerifyOptions};
use crate::wasserstein;

pub use instance::{InputError, InstanceFile};
pub use report::{fuzz_csv, sha256_hex, RunReport, CSV_COLUMNS, VERSION};

#[derive(Debug, Parser)]
#[command(name = "npcmaj", version, about = "Majorization of discrete measures on nonpositively curved spaces")]
pub struct Cli {
    /// Space label: euclidean:N, halfplane, spd:N, wasserstein1d:K, product(a,b,...).
    #[arg(long, global = true, value_parser = parse_space)]
    pub space: Option<Space>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Relative tolerance; overrides the instance value.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Exempt rows with zero weight from the barycenter condition.
    #[arg(long, global = true)]
    pub ignore_zero_weight_rows: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Barycenter of the measure given by `atoms` and `weights`.
    Barycenter { instance: PathBuf },
    /// Check a majorization certificate `A`.
    Verify { instance: PathBuf },
    /// Build x atoms majorized by `y_atoms` through `A`.
    Synthesize { instance: PathBuf },
    /// Decide Euclidean majorization by linear programming.
    Decide { instance: PathBuf },
    /// Seeded randomized check of every inequality.
    Fuzz {
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        /// Restrict to these suites (repeatable).
        #[arg(long = "suite")]
        suites: Vec<Suite>,
        /// Also run negated functionals, which should fail.
        #[arg(long)]
        negative_controls: bool,
        /// Run trials on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Decompose a doubly stochastic `A` into permutation matrices.
    Birkhoff { instance: PathBuf },
    /// Rebuild x from permutations of y for an equal-weight majorization.
    Rado { instance: PathBuf },
    /// W₂ distances and barycenters of measures on the line, or the
    /// transport LP between two point clouds.
    Wasserstein { instance: PathBuf },
}

fn parse_space(s: &str) -> Result<Space, String> {
    Space::parse_label(s).map_err(|e| e.to_string())
}

/// Command outcome, mapped to the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
    NotConverged,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Holds
        } else {
            Verdict::Violated
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Verdict::Holds => 0,
            Verdict::Violated => 1,
            Verdict::NotConverged => 3,
        }
    }
}

/// Why a command produced no report.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    NotConverged(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged => Failure::NotConverged(e.to_string()),
            e => Failure::Input(e.to_string()),
        }
    }
}

/// Finished command: the report, its rendering and the verdict.
pub struct Output {
    pub report: RunReport,
    pub text: String,
    pub verdict: Verdict,
}

pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(&cli) {
        Ok(out) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &out.text).map_err(|e| format!("{}: {e}", path.display())),
                None => std::io::stdout().write_all(out.text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(out.verdict.code())
        }
        Err(f) => {
            let (Failure::Input(msg) | Failure::NotConverged(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}

fn read_instance(path: &PathBuf) -> Result<(String, Vec<u8>), Failure> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Failure::Input(format!("<stdin>: {e}")))?;
        return Ok(("<stdin>".into(), buf));
    }
    let bytes = std::fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok((path.display().to_string(), bytes))
}

/// Flags that can change the results, in a fixed textual form.
fn canonical_flags(cli: &Cli) -> String {
    let mut s = format!(
        "space={};seed={};tol={:?};ignore_zero_weight_rows={}",
        cli.space.as_ref().map(Space::label).unwrap_or_default(),
        cli.seed,
        cli.tol,
        cli.ignore_zero_weight_rows
    );
    if let Command::Fuzz {
        trials,
        suites,
        negative_controls,
        ..
    } = &cli.command
    {
        let names: Vec<&str> = suites.iter().map(|x| x.name()).collect();
        s.push_str(&format!(";trials={trials};suites={};negative_controls={negative_controls}", names.join(",")));
    }
    s
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types always serialize")
}

/// Runs the parsed command without touching stdout or the exit status.
pub fn execute(cli: &Cli) -> Result<Output, Failure> {
    let start = Instant::now();
    let flags = canonical_flags(cli);
    let (name, bytes) = match &cli.command {
        Command::Fuzz { .. } => (String::new(), Vec::new()),
        Command::Barycenter { instance }
        | Command::Verify { instance }
        | Command::Synthesize { instance }
        | Command::Decide { instance }
        | Command::Birkhoff { instance }
        | Command::Rado { instance }
        | Command::Wasserstein { instance } => read_instance(instance)?,
    };
    if cli.format == Format::Csv && !matches!(cli.command, Command::Fuzz { .. }) {
        return Err(Failure::Input("--format csv is only available for fuzz".into()));
    }
    let command = command_name(&cli.command);
    let inputs_digest = sha256_hex(&[command.as_bytes(), &bytes, flags.as_bytes()]);

    let (results, verdict, csv) = match &cli.command {
        Command::Fuzz {
            trials,
            suites,
            negative_controls,
            sequential,
        } => cmd_fuzz(cli, *trials, suites, *negative_controls, *sequential)?,
        _ => {
            let text = std::str::from_utf8(&bytes).map_err(|e| Failure::Input(format!("{name}: {e}")))?;
            let inst = InstanceFile::parse(&name, text)?;
            let (v, verdict) = match &cli.command {
                Command::Barycenter { .. } => cmd_barycenter(cli, &inst)?,
                Command::Verify { .. } => cmd_verify(cli, &inst)?,
                Command::Synthesize { .. } => cmd_synthesize(cli, &inst)?,
                Command::Decide { .. } => cmd_decide(cli, &inst)?,
                Command::Birkhoff { .. } => cmd_birkhoff(&inst)?,
                Command::Rado { .. } => cmd_rado(cli, &inst)?,
                Command::Wasserstein { .. } => cmd_wasserstein(cli, &inst)?,
                Command::Fuzz { .. } => unreachable!("handled above"),
            };
            (v, verdict, None)
        }
    };
    let wall = start.elapsed().as_secs_f64() * 1e3;
    let report = RunReport::new(command, inputs_digest, cli.seed, results, wall);
    let text = match (cli.format, csv) {
        (Format::Csv, Some(csv)) => csv,
        _ => {
            let mut t = serde_json::to_string_pretty(&report).expect("report always serializes");
            t.push('\n');
            t
        }
    };
    Ok(Output { report, text, verdict })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Barycenter { .. } => "barycenter",
        Command::Verify { .. } => "verify",
        Command::Synthesize { .. } => "synthesize",
        Command::Decide { .. } => "decide",
        Command::Fuzz { .. } => "fuzz",
        Command::Birkhoff { .. } => "birkhoff",
        Command::Rado { .. } => "rado",
        Command::Wasserstein { .. } => "wasserstein",
    }
}

fn tol_or(cli: &Cli, inst: &InstanceFile, default: f64) -> Result<f64, Failure> {
    let tol = cli.tol.or(inst.tol).unwrap_or(default);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Failure::Input(format!("tol must be positive and finite, got {tol}")));
    }
    Ok(tol)
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn weights_or_uniform(field: &str, w: &Option<Vec<f64>>, n: usize) -> Result<Vec<f64>, Failure> {
    match w {
        Some(w) if w.len() != n => Err(Failure::Input(format!("'{field}' has {} entries for {n} atoms", w.len()))),
        Some(w) => Ok(w.clone()),
        None if n == 0 => Err(Failure::Input(format!("no atoms for '{field}'"))),
        None => Ok(uniform(n)),
    }
}

fn matrix(inst: &InstanceFile) -> Result<RowStochasticMatrix, Failure> {
    let a = InstanceFile::require("A", &inst.a)?;
    RowStochasticMatrix::new(a.clone()).map_err(|e| Failure::Input(format!("A: {e}")))
}

fn cmd_barycenter(cli: &Cli, inst: &InstanceFile) -> Result<(Value, Verdict), Failure> {
    let space = inst.resolve_space(cli.space.as_ref())?;
    let atoms = InstanceFile::points(&space, "atoms", &inst.atoms)?;
    let weights = weights_or_uniform("weights", &inst.weights, atoms.len())?;
    let measure = DiscreteMeasure::new(&space, atoms, weights)?;
    let opts = SolverOptions {
        tol: tol_or(cli, inst, barycenter::DEFAULT_TOL)?,
        max_iter: inst.max_iter.unwrap_or(barycenter::DEFAULT_MAX_ITER),
        force_iterative: false,
    };
    let r = barycenter::barycenter_with(&space, &measure, opts)?;
    let verdict = if r.converged { Verdict::Holds } else { Verdict::NotConverged };
    let v = json!({
        "space": space,
        "point": r.point,
        "objective": r.objective,
        "grad_norm": r.grad_norm,
        "iterations": r.iterations,
        "converged": r.converged,
        "scale": r.scale,
    });
    Ok((v, verdict))
}

fn cmd_verify(cli: &Cli, inst: &InstanceFile) -> Result<(Value, Verdict), Failure> {
    let space = inst.resolve_space(cli.space.as_ref())?;
    let x = InstanceFile::points(&space, "x_atoms", &inst.x_atoms)?;
    let y = InstanceFile::points(&space, "y_atoms", &inst.y_atoms)?;
    let lambda = weights_or_uniform("lambda", &inst.lambda, x.len())?;
    let mu = weights_or_uniform("mu", &inst.mu, y.len())?;
    let a = matrix(inst)?;
    let opts = VerifyOptions {
        tol: tol_or(cli, inst, stochastic::MAJORIZATION_REL_TOL)?,
        ignore_zero_weight_rows: cli.ignore_zero_weight_rows,
    };
    let cert = stochastic::verify_majorization_with(&space, &x, &lambda, &y, &mu, &a, opts)?;
    let mut holds = cert.valid;
    let functional = match &inst.functional {
        None => Value::Null,
        Some(id) => {
            let anchors = match &inst.anchors {
                Some(_) => InstanceFile::points(&space, "anchors", &inst.anchors)?,
                None => Vec::new(),
            };
            let registry = inequalities::builtin_registry(&space, &anchors);
            let f = registry
                .iter()
                .find(|f| f.id() == id)
                .ok_or_else(|| Failure::Input(format!("functional: unknown id '{id}'")))?;
            if cert.valid {
                let c = inequalities::check_convex_majorization(&space, &cert, f, opts.tol)?;
                holds &= c.ok;
                json!({"id": id, "slack": c.slack, "scale": c.scale, "ok": c.ok})
            } else {
                json!({"id": id, "skipped": "certificate did not verify"})
            }
        }
    };
    Ok((json!({"certificate": cert, "functional": functional}), Verdict::from_bool(holds)))
}

fn cmd_synthesize(cli: &Cli, inst: &InstanceFile) -> Result<(Value, Verdict), Failure> {
    let space = inst.resolve_space(cli.space.as_ref())?;
    let y = InstanceFile::points(&space, "y_atoms", &inst.y_atoms)?;
    let a = matrix(inst)?;
    let lambda = weights_or_uniform("lambda", &inst.lambda, a.rows())?;
    let tol = tol_or(cli, inst, stochastic::MAJORIZATION_REL_TOL)?;
    match stochastic::synthesize_majorized(&space, &y, &lambda, &a, tol) {
        Ok(s) => Ok((to_value(&s), Verdict::Holds)),
        Err(Error::InvalidCertificate(msg)) => Ok((json!({ "error": msg }), Verdict::Violated)),
        Err(e) => Err(e.into()),
    }
}

fn cmd_decide(cli: &Cli, inst: &InstanceFile) -> Result<(Value, Verdict), Failure> {
    let space = inst.resolve_space(cli.space.as_ref())?;
    if !space.is_euclidean() {
        return Err(Failure::Input(format!(
            "decide needs a Euclidean space, got {}; use verify or synthesize",
            space.label()
        )));
    }
    let x = InstanceFile::points(&space, "x_atoms", &inst.x_atoms)?;
    let y = InstanceFile::points(&space, "y_atoms", &inst.y_atoms)?;
    let lambda = weights_or_uniform("lambda", &inst.lambda, x.len())?;
    let mu = weights_or_uniform("mu", &inst.mu, y.len())?;
    let tol = tol_or(cli, inst, stochastic::MAJORIZATION_REL_TOL)?;
    let d = stochastic::decide_majorization_euclidean(&x, &lambda, &y, &mu, tol)?;
    Ok((to_value(&d), Verdict::from_bool(d.is_feasible())))
}

fn cmd_birkhoff(inst: &InstanceFile) -> Result<(Value, Verdict), Failure> {
    let a = InstanceFile::require("A", &inst.a)?;
    let dec = stochastic::birkhoff_decompose(a)?;
    let v = json!({
        "terms": dec.terms,
        "total_weight": dec.total_weight(),
        "reconstruction_error": dec.reconstruction_error(a),
        "three_by_three_weights": stochastic::three_by_three_weights(&dec),
    });
    Ok((v, Verdict::Holds))
}

fn cmd_rado(cli: &Cli, inst: &InstanceFile) -> Result<(Value, Verdict), Failure> {
    let space = inst.resolve_space(cli.space.as_ref())?;
    let x = InstanceFile::points(&space, "x_atoms", &inst.x_atoms)?;
    let y = InstanceFile::points(&space, "y_atoms", &inst.y_atoms)?;
    let a = match &inst.a {
        Some(_) => Some(matrix(inst)?),
        None => None,
    };
    let tol = tol_or(cli, inst, inequalities::RADO_TOL)?;
    match stochastic::rado_probe(&space, &x, &y, a.as_ref(), tol) {
        Ok(r) => {
            let ok = r.necessity_holds && r.hull_member != Some(false);
            Ok((to_value(&r), Verdict::from_bool(ok)))
        }
        Err(Error::NoCertificate) if space.is_euclidean() => {
            Ok((json!({"error": "x is not majorized by y"}), Verdict::Violated))
        }
        Err(Error::NoCertificate) => Err(Failure::Input(
            "rado in a curved space needs the certificate matrix 'A'".into(),
        )),
        Err(e) => Err(e.into()),
    }
}

fn cmd_wasserstein(cli: &Cli, inst: &InstanceFile) -> Result<(Value, Verdict), Failure> {
    let mut out = serde_json::Map::new();
    if inst.atoms.is_none() && inst.clouds.is_none() {
        return Err(Failure::Input("wasserstein needs 'atoms' (measures on the line) or 'clouds'".into()));
    }
    if inst.atoms.is_some() {
        let space = match inst.resolve_space(cli.space.as_ref()) {
            Ok(s) => s,
            Err(_) => Space::wasserstein_1d(1)?,
        };
        if !matches!(space, Space::Wasserstein1D { .. }) {
            return Err(Failure::Input(format!("atoms must be measures on the line, space is {}", space.label())));
        }
        let measures: Vec<wasserstein::DiscreteMeasure1D> = InstanceFile::points(&space, "atoms", &inst.atoms)?
            .into_iter()
            .map(|p| match p {
                Point::Measure(m) => m,
                _ => unreachable!("decoded in a Wasserstein space"),
            })
            .collect();
        let n = measures.len();
        let distances: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| wasserstein::w2_quantile(&measures[i], &measures[j])).collect())
            .collect();
        out.insert("distances".into(), json!(distances));
        if inst.weights.is_some() {
            let w = weights_or_uniform("weights", &inst.weights, n)?;
            let bar = wasserstein::w2_barycenter_1d(&measures, &w)?;
            out.insert("objective".into(), json!(wasserstein::w2_objective(&measures, &w, &bar)));
            out.insert("barycenter".into(), json!(bar));
        }
    }
    if let Some(clouds) = &inst.clouds {
        let [mu, nu] = clouds.as_slice() else {
            return Err(Failure::Input(format!("clouds: expected 2 point clouds, got {}", clouds.len())));
        };
        let mu = wasserstein::PointCloud::new(mu.points.clone(), mu.weights.clone())
            .map_err(|e| Failure::Input(format!("clouds[0]: {e}")))?;
        let nu = wasserstein::PointCloud::new(nu.points.clone(), nu.weights.clone())
            .map_err(|e| Failure::Input(format!("clouds[1]: {e}")))?;
        let (d, coupling) = wasserstein::w2_lp(&mu, &nu)?;
        out.insert("lp_distance".into(), json!(d));
        out.insert("coupling".into(), to_value(&coupling));
    }
    Ok((Value::Object(out), Verdict::Holds))
}

type FuzzResult = (Value, Verdict, Option<String>);

fn cmd_fuzz(cli: &Cli, trials: u64, suites: &[Suite], negative_controls: bool, sequential: bool) -> Result<FuzzResult, Failure> {
    let space = cli
        .space
        .clone()
        .ok_or_else(|| Failure::Input("fuzz needs --space".into()))?;
    let tol = cli.tol.unwrap_or(inequalities::DEFAULT_TOL);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Failure::Input(format!("tol must be positive and finite, got {tol}")));
    }
    let mut opts = if suites.is_empty() {
        FuzzOptions::default()
    } else {
        FuzzOptions::only(suites)
    };
    opts.negative_controls = negative_controls;
    opts.execution = if sequential { Execution::Sequential } else { Execution::Parallel };
    let reports = inequalities::fuzz_suite(&space, cli.seed, trials, tol, &opts)?;
    let is_control = |r: &CheckReport| r.functional.starts_with("neg:");
    let violations: u64 = reports.iter().filter(|r| !is_control(r)).map(|r| r.violations).sum();
    let controls_caught = reports.iter().filter(|r| is_control(r) && r.violations > 0).count();
    let suite_names: Vec<&str> = opts.suites.iter().map(|s| s.name()).collect();
    let header = format!(
        "space={} seed={} trials={trials} tol={tol:e} suites={} negative_controls={negative_controls}",
        space.label(),
        cli.seed,
        suite_names.join(";")
    );
    let csv = fuzz_csv(&reports, &header);
    let v = json!({
        "space": space.label(),
        "trials": trials,
        "tol": tol,
        "suites": suite_names,
        "violations": violations,
        "negative_controls_caught": if negative_controls { Some(controls_caught) } else { None },
        "reports": reports,
    });
    Ok((v, Verdict::from_bool(violations == 0), Some(csv)))
}
