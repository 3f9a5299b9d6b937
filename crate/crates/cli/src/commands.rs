//! Subcommands. Each returns a JSON summary for standard output; commands
//! that write files also append a run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use torus_polymer::covariance::{CovarianceModel, DEFAULT_ALIAS_TOL};
use torus_polymer::expansion::{gamma4, limit_d1, limit_d2_log_slope, limit_d3_integral};
use torus_polymer::green::{parseval_report, q2_first_order, solve_green};
use torus_polymer::grid::{GridField, Torus, TorusSpec};
use torus_polymer::mc::{bridge_inverse_square_mc, run_simulation, series_coefficients_mc};
use torus_polymer::whitenoise::{
    free_energy_white_noise_with, inverse_square_moment, MethodChoice, MomentConfig,
    SeriesCoefficients, PUBLISHED_A4,
};

use crate::config::{self, Estimator};
use crate::error::{exit, CliError, Result};
use crate::manifest::{append_manifest, digest_file, now, prepare_output, RunManifest};
use crate::report::Status;
use crate::suite::{run_suite, Suite};

#[derive(Debug, Parser)]
#[command(
    name = "torus-polymer",
    version,
    about = "Directed-polymer free energy on a torus"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// gamma2 and gamma4 with their truncation certificate.
    Coeffs(CoeffsArgs),
    /// Large-torus behaviour of gamma4.
    Limit(LimitArgs),
    /// Green function on a grid.
    Green(GreenArgs),
    /// Closed-form white-noise free energy.
    Whitenoise(WhiteNoiseArgs),
    /// Stochastic heat equation simulation.
    Simulate(SimulateArgs),
    /// Brownian-bridge Monte Carlo of E Y^-2.
    BridgeMc(BridgeArgs),
    /// Runs the validation suite.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Bspline,
    FlatSpectrum,
}

/// A covariance model, either from a file or from flags.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Covariance JSON, e.g. {"family":"bspline","d":1,"k":2,"w":1.0}.
    #[arg(long, conflicts_with_all = ["family", "k", "w"])]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub w: Option<f64>,
}

impl ModelArgs {
    /// Falls back to the cubic B-spline of unit width in `default_dim`.
    fn resolve(&self, default_dim: Option<usize>) -> Result<CovarianceModel> {
        if let Some(path) = &self.config {
            let model = config::load_model(path)?;
            if let Some(d) = self.d.filter(|&d| d != model.dimension()) {
                return Err(CliError::Usage(format!(
                    "--d {d} disagrees with the {}-dimensional model in {}",
                    model.dimension(),
                    path.display()
                )));
            }
            return Ok(model);
        }
        let d = self
            .d
            .or(default_dim)
            .ok_or_else(|| CliError::Usage("pass --config or --d".into()))?;
        let model = match self.family.unwrap_or(FamilyArg::Bspline) {
            FamilyArg::Bspline => {
                CovarianceModel::bspline(d, self.k.unwrap_or(2), self.w.unwrap_or(1.0))
            }
            FamilyArg::FlatSpectrum => CovarianceModel::flat_spectrum(d),
        };
        model.map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Args)]
pub struct CoeffsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "L")]
    pub size: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[arg(long)]
    pub dim: usize,
    /// Comma-separated torus sizes.
    #[arg(long = "L", value_delimiter = ',', required = true)]
    pub sizes: Vec<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Tolerance on each gamma4; defaults to 1e-12, 1e-7, 1e-8 for d = 1, 2, 3.
    #[arg(long)]
    pub tol: Option<f64>,
    /// CSV with columns L, gamma4, scaled_value.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GreenArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "L")]
    pub size: f64,
    #[arg(long = "N")]
    pub grid_points: usize,
    /// CSV with the grid coordinates and G.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALIAS_TOL)]
    pub alias_tol: f64,
    /// Report the spectral, grid and two-route gamma4 comparisons.
    #[arg(long)]
    pub check_parseval: bool,
    /// Tolerance of the spectral overlap sum.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Auto,
    Quad,
    Series,
    Bigfloat,
}

impl From<MethodArg> for MethodChoice {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => MethodChoice::Auto,
            MethodArg::Quad => MethodChoice::Quadrature,
            MethodArg::Series => MethodChoice::Series,
            MethodArg::Bigfloat => MethodChoice::ExtendedPrecision,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SeriesArg {
    /// Coefficients fitted from extended-precision evaluations.
    Fitted,
    /// The published default for a4.
    Published,
}

#[derive(Debug, Args)]
pub struct WhiteNoiseArgs {
    #[arg(long, required_unless_present = "fit_a4")]
    pub beta: Option<f64>,
    #[arg(long = "L", required_unless_present = "fit_a4")]
    pub size: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: MethodArg,
    /// Series coefficients used below the series threshold.
    #[arg(long, value_enum, default_value = "fitted")]
    pub series: SeriesArg,
    /// Report the a4 fit; with --seed, also the Wick Monte Carlo oracle.
    #[arg(long, conflicts_with_all = ["beta", "size"])]
    pub fit_a4: bool,
    #[arg(long, requires = "fit_a4")]
    pub seed: Option<u64>,
    #[arg(long = "M", default_value_t = 512, requires = "seed")]
    pub grid_points: usize,
    #[arg(long, default_value_t = 1_000_000, requires = "seed")]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Trace CSV; the q2 table and the summary are written beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BridgeArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long = "M", default_value_t = 512)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, required = true)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value = "fast")]
    pub suite: Suite,
    #[arg(long, required = true)]
    pub seed: u64,
    /// Writes the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a command prints and how the process exits.
pub struct Outcome {
    pub summary: Value,
    pub code: i32,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self {
            summary,
            code: exit::OK,
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable value")
}

/// Records a manifest for the files a command wrote.
struct Recorder<'a> {
    command: &'static str,
    argv: &'a [String],
    started: String,
}

impl Recorder<'_> {
    fn finish(self, config: Value, seed: Option<u64>, outputs: &[PathBuf]) -> Result<()> {
        if outputs.is_empty() {
            return Ok(());
        }
        let digests = outputs
            .iter()
            .map(|p| digest_file(p))
            .collect::<Result<Vec<_>>>()?;
        append_manifest(&RunManifest {
            command: self.command.to_string(),
            argv: self.argv.to_vec(),
            config_fingerprint: config::fingerprint(&config),
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started: self.started,
            finished: now(),
            outputs: digests,
        })?;
        Ok(())
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `x1,...,xd,<label>` rows over the grid nodes.
fn grid_csv(field: &GridField, columns: &[(&str, &GridField)]) -> String {
    let spec = field.spec();
    let mut text = String::new();
    let coords: Vec<String> = (1..=spec.dimension()).map(|i| format!("x{i}")).collect();
    let labels: Vec<&str> = columns.iter().map(|c| c.0).collect();
    writeln!(text, "{},{}", coords.join(","), labels.join(",")).unwrap();
    for j in 0..spec.len() {
        for x in spec.node(j) {
            write!(text, "{x},").unwrap();
        }
        let values: Vec<String> = columns
            .iter()
            .map(|c| c.1.values()[j].to_string())
            .collect();
        writeln!(text, "{}", values.join(",")).unwrap();
    }
    text
}

/// Path beside `base` with its extension replaced by `suffix`.
fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    base.with_file_name(format!("{stem}{suffix}"))
}

fn torus(dim: usize, size: f64) -> Result<Torus> {
    Torus::new(dim, size).map_err(|e| CliError::Usage(e.to_string()))
}

fn coeffs(args: &CoeffsArgs) -> Result<Outcome> {
    let model = args.model.resolve(None)?;
    let r = gamma4(&model, &torus(model.dimension(), args.size)?, args.tol)?;
    Ok(Outcome::ok(json!({
        "gamma2": r.gamma2,
        "gamma4": r.gamma4,
        "N_max": r.truncation_radius,
        "tail_bound": r.tail_bound,
    })))
}

fn limit(args: &LimitArgs, rec: Recorder) -> Result<Outcome> {
    let model = args.model.resolve(Some(args.dim))?;
    if model.dimension() != args.dim {
        return Err(CliError::Usage(format!(
            "--dim {} but the model is {}-dimensional",
            args.dim,
            model.dimension()
        )));
    }
    let out = args.out.as_deref().map(prepare_output).transpose()?;
    let r = match args.dim {
        1 => limit_d1(&model, &args.sizes, args.tol.unwrap_or(1e-12))?,
        2 => limit_d2_log_slope(&model, &args.sizes, args.tol.unwrap_or(1e-7))?,
        3 => limit_d3_integral(&model, &args.sizes, args.tol.unwrap_or(1e-8))?,
        d => return Err(CliError::Usage(format!("--dim must be 1, 2 or 3, got {d}"))),
    };
    let diag = &r.diagnostics;
    let mut outputs = Vec::new();
    if let Some(path) = &out {
        let mut text = String::from("L,gamma4,scaled_value\n");
        for i in 0..diag.sizes.len() {
            writeln!(
                text,
                "{},{},{}",
                diag.sizes[i], diag.gamma4[i], diag.scaled[i]
            )
            .unwrap();
        }
        write_file(path, &text)?;
        outputs.push(path.clone());
    }
    let summary = json!({
        "dimension": r.dimension,
        "limit_kind": r.limit_kind,
        "value": r.value,
        "rate": diag.rate,
        "slope_stderr": diag.slope_stderr,
        "rows": (0..diag.sizes.len())
            .map(|i| json!({"L": diag.sizes[i], "gamma4": diag.gamma4[i], "scaled_value": diag.scaled[i]}))
            .collect::<Vec<_>>(),
        "warnings": diag.warnings,
        "out": out,
    });
    let cfg = json!({"model": model, "dim": args.dim, "L": args.sizes, "tol": args.tol});
    rec.finish(cfg, None, &outputs)?;
    Ok(Outcome::ok(summary))
}

fn green(args: &GreenArgs, rec: Recorder) -> Result<Outcome> {
    let model = args.model.resolve(None)?;
    let spec = TorusSpec::new(model.dimension(), args.size, args.grid_points)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let out = args.out.as_deref().map(prepare_output).transpose()?;
    let g = solve_green(&model, &spec, args.alias_tol)?;
    let mut outputs = Vec::new();
    if let Some(path) = &out {
        write_file(path, &grid_csv(g.grid(), &[("G", g.grid())]))?;
        outputs.push(path.clone());
    }
    let mut summary = json!({
        "L": args.size,
        "N": args.grid_points,
        "G_origin": g.grid().at_origin(),
        "G_max_abs": g.grid().max_abs(),
        "out": out,
    });
    if args.check_parseval {
        summary["parseval"] = to_value(&parseval_report(&model, &spec, args.tol, args.alias_tol)?);
    }
    let cfg = json!({"model": model, "torus": spec, "alias_tol": args.alias_tol});
    rec.finish(cfg, None, &outputs)?;
    Ok(Outcome::ok(summary))
}

fn whitenoise(args: &WhiteNoiseArgs) -> Result<Outcome> {
    if args.fit_a4 {
        let fitted = SeriesCoefficients::fitted()?;
        let mut summary = json!({
            "fitted": fitted,
            "published_a4": PUBLISHED_A4,
            "published_minus_fitted_sigma": (PUBLISHED_A4 - fitted.a4) / fitted.a4_uncertainty,
        });
        if let Some(seed) = args.seed {
            let mc = series_coefficients_mc(args.grid_points, args.samples, seed)?;
            let combined = fitted.a4_uncertainty.hypot(mc.a4_uncertainty);
            summary["wick_mc"] = to_value(&mc);
            summary["fit_minus_mc_sigma"] = json!((fitted.a4 - mc.a4.mean) / combined);
            summary["published_minus_mc_sigma"] =
                json!((PUBLISHED_A4 - mc.a4.mean) / mc.a4_uncertainty);
        }
        return Ok(Outcome::ok(summary));
    }
    let (beta, size) = (
        args.beta.expect("required by clap"),
        args.size.expect("required by clap"),
    );
    let config = MomentConfig {
        series: match args.series {
            SeriesArg::Fitted => None,
            SeriesArg::Published => Some(SeriesCoefficients::published()),
        },
        ..MomentConfig::default()
    };
    let r = free_energy_white_noise_with(beta, size, args.method.into(), &config)?;
    Ok(Outcome::ok(to_value(&r)))
}

fn simulate(args: &SimulateArgs, rec: Recorder) -> Result<Outcome> {
    let resolved = config::load_config(&args.config, args.seed)?;
    let c = &resolved.config;
    let run_path = prepare_output(&args.out)?;
    let wants = |e: Estimator| resolved.estimators.contains(&e);
    let q2_path = if wants(Estimator::Q2) {
        Some(prepare_output(&sibling(&args.out, ".q2.csv"))?)
    } else {
        None
    };
    let summary_path = prepare_output(&sibling(&args.out, ".summary.json"))?;

    let report = run_simulation(c)?;

    let mut text = String::from("time,replica,logZ,overlap\n");
    for row in &report.trace {
        writeln!(
            text,
            "{},{},{},{}",
            row.time, row.replica, row.log_z, row.overlap
        )
        .unwrap();
    }
    write_file(&run_path, &text)?;
    let mut outputs = vec![run_path.clone()];
    if let Some(path) = &q2_path {
        let q2 = &report.correlation.q2;
        let first = q2_first_order(&c.model, &c.torus, c.beta, c.alias_tol)?;
        write_file(
            path,
            &grid_csv(q2, &[("q2", q2), ("q2_first_order", &first)]),
        )?;
        outputs.push(path.clone());
    }

    let pick = |e: Estimator, v: f64| if wants(e) { json!(v) } else { Value::Null };
    let summary = json!({
        "gamma_log_slope": pick(Estimator::LogSlope, report.log_slope.value),
        "stderr_log_slope": pick(Estimator::LogSlope, report.log_slope.stderr),
        "gamma_overlap": pick(Estimator::Overlap, report.overlap.value),
        "stderr_overlap": pick(Estimator::Overlap, report.overlap.stderr),
        "q2_file": q2_path,
        "trace_file": run_path,
        "batches": report.log_slope.batches,
        "plan": report.plan,
        "hierarchy": report.hierarchy,
        "config_fingerprint": resolved.fingerprint,
    });
    let pretty = serde_json::to_string_pretty(&summary).expect("serializable summary");
    write_file(&summary_path, &(pretty + "\n"))?;
    outputs.push(summary_path);
    rec.finish(to_value(&resolved.to_file()), Some(c.seed), &outputs)?;
    Ok(Outcome::ok(summary))
}

fn bridge_mc(args: &BridgeArgs) -> Result<Outcome> {
    let mc = bridge_inverse_square_mc(args.lambda, args.grid_points, args.samples, args.seed)?;
    let mut summary = to_value(&mc);
    if args.lambda > 0.0 {
        let reference = inverse_square_moment(args.lambda)?;
        summary["reference"] = to_value(&reference);
        summary["z_score"] =
            json!((mc.mean - reference.value) / mc.stderr.hypot(reference.error_estimate));
    }
    Ok(Outcome::ok(summary))
}

fn validate(args: &ValidateArgs, rec: Recorder) -> Result<Outcome> {
    let out = args.out.as_deref().map(prepare_output).transpose()?;
    let report = run_suite(args.suite, args.seed, &mut |c| {
        eprintln!(
            "[{:>2}] {:<13} {} ({:.1}s)",
            c.id,
            format!("{:?}", c.status).to_uppercase(),
            c.name,
            c.elapsed_seconds
        );
    });
    let summary = to_value(&report);
    if let Some(path) = &out {
        let pretty = serde_json::to_string_pretty(&summary).expect("serializable report");
        write_file(path, &(pretty + "\n"))?;
        rec.finish(
            json!({"suite": args.suite, "seed": args.seed}),
            Some(args.seed),
            std::slice::from_ref(path),
        )?;
    }
    let code = if report.status == Status::Fail {
        exit::VALIDATION_FAILED
    } else {
        exit::OK
    };
    Ok(Outcome { summary, code })
}

/// Executes a parsed command line; `argv` is recorded in manifests.
pub fn execute(cli: &Cli, argv: &[String]) -> Result<Outcome> {
    let rec = |command| Recorder {
        command,
        argv,
        started: now(),
    };
    match &cli.command {
        Command::Coeffs(a) => coeffs(a),
        Command::Limit(a) => limit(a, rec("limit")),
        Command::Green(a) => green(a, rec("green")),
        Command::Whitenoise(a) => whitenoise(a),
        Command::Simulate(a) => simulate(a, rec("simulate")),
        Command::BridgeMc(a) => bridge_mc(a),
        Command::Validate(a) => validate(a, rec("validate")),
    }
}
