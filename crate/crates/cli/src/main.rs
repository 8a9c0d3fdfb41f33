use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fgof::io::{ingest_curves, read_response, write_direction_values, write_json};
use fgof::simulate::{power_study, Scenario, ScenarioKind, DEFAULT_BANDWIDTHS, DEFAULT_KL_TERMS};
use fgof::{
    fpca, BasisKind, Calibration, Curve64, ErrorKind, Kernel, ModelKind, PreparedTest,
    TestConfig64, VarianceChoice,
};

#[derive(Parser)]
#[command(
    name = "fgof",
    version,
    about = "Goodness-of-fit tests for functional regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a fitted model (or observed errors) on a dataset.
    Gof(GofArgs),
    /// Monte Carlo level/power study on a simulated scenario.
    Sim(SimArgs),
    /// Eigenvalues of the curves and, with a response, the fitted model summary.
    FpcaReport(FpcaArgs),
}

/// Test settings; every flag overrides the value from `--config`.
#[derive(Args, Default)]
struct TestArgs {
    /// TOML file with test settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    basis: Option<BasisKind>,
    /// Bandwidth, or comma separated bandwidths.
    #[arg(long, value_delimiter = ',')]
    h: Option<Vec<f64>>,
    #[arg(long = "alpha-n")]
    alpha_n: Option<f64>,
    #[arg(long)]
    kernel: Option<Kernel>,
    #[arg(long)]
    variance: Option<VarianceChoice>,
    #[arg(long = "h-v")]
    h_v: Option<f64>,
    #[arg(long)]
    calibration: Option<Calibration>,
    /// Bootstrap replicates.
    #[arg(long = "B")]
    replicates: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of directions on the sphere grid.
    #[arg(long = "grid-size")]
    grid_size: Option<usize>,
    #[arg(long = "refinement-fanout")]
    refinement_fanout: Option<usize>,
    #[arg(long = "freeze-direction")]
    freeze_direction: bool,
    #[arg(long = "freeze-model")]
    freeze_model: bool,
    /// Print the effective configuration as TOML and exit.
    #[arg(long = "print-config")]
    print_config: bool,
}

#[derive(Args)]
struct GofArgs {
    #[arg(long)]
    curves: PathBuf,
    /// Response file (observed errors when `--model none`).
    #[arg(long)]
    response: PathBuf,
    /// 1-based column of the response file.
    #[arg(long = "response-column", default_value_t = 1)]
    response_column: usize,
    /// Abscissae of the curve columns, e.g. wavelengths.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[command(flatten)]
    test: TestArgs,
    /// JSON result file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV file for per-direction values of the search.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    scenario: ScenarioKind,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Deviation `c` or `d`; 0 is the null.
    #[arg(long, default_value_t = 0.0)]
    deviation: f64,
    #[arg(long = "mc-reps", default_value_t = 200)]
    mc_reps: usize,
    #[arg(long = "kl-terms", default_value_t = DEFAULT_KL_TERMS)]
    kl_terms: usize,
    #[arg(long = "curve-points", default_value_t = 101)]
    curve_points: usize,
    #[command(flatten)]
    test: TestArgs,
    /// CSV power table; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FpcaArgs {
    #[arg(long)]
    curves: PathBuf,
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    response: Option<PathBuf>,
    #[arg(long = "response-column", default_value_t = 1)]
    response_column: usize,
    #[arg(long, default_value = "linear")]
    model: ModelKind,
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Eigenvalues to report.
    #[arg(long, default_value_t = 10)]
    components: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<fgof::Error> for Failure {
    fn from(e: fgof::Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Degenerate => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_failure(message: String) -> Failure {
    Failure { code: 2, message }
}

fn data_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = Result<T, Failure>;

impl TestArgs {
    fn resolve(&self) -> CliResult<TestConfig64> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| data_failure(path, e))?;
                toml::from_str::<TestConfig64>(&text)
                    .map_err(|e| config_failure(format!("{}: {e}", path.display())))?
            }
            None => TestConfig64::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        set!(
            model,
            p,
            m,
            basis,
            alpha_n,
            kernel,
            variance,
            calibration,
            replicates,
            level,
            seed
        );
        if let Some(h) = &self.h {
            c.bandwidths = h.clone();
        }
        if self.h_v.is_some() {
            c.h_v = self.h_v;
        }
        if self.grid_size.is_some() {
            c.grid_size = self.grid_size;
        }
        if self.refinement_fanout.is_some() {
            c.refinement_fanout = self.refinement_fanout;
        }
        c.freeze_direction |= self.freeze_direction;
        c.freeze_model |= self.freeze_model;
        c.validate()?;
        Ok(c)
    }
}

fn print_config(c: &TestConfig64) -> CliResult<()> {
    let text = toml::to_string(c).map_err(|e| config_failure(e.to_string()))?;
    print!("{text}");
    Ok(())
}

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| data_failure(p, e))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<V: Serialize>(path: Option<&Path>, value: &V) -> CliResult<()> {
    let out = open_out(path)?;
    write_json(out, value)?;
    Ok(())
}

fn load(curves: &Path, grid: Option<&Path>) -> CliResult<Vec<Curve64>> {
    Ok(ingest_curves(curves, grid)?)
}

fn response_column(column: usize) -> CliResult<usize> {
    column
        .checked_sub(1)
        .ok_or_else(|| config_failure("--response-column is 1-based".into()))
}

fn gof(args: &GofArgs) -> CliResult<()> {
    let config = args.test.resolve()?;
    if args.test.print_config {
        return print_config(&config);
    }
    let curves = load(&args.curves, args.grid.as_deref())?;
    let y = read_response(&args.response, response_column(args.response_column)?)?;
    let prep = PreparedTest::new(&config, &curves, &y)?;
    let result = prep.run(args.diagnostics.is_some())?;
    if let Some(path) = &args.diagnostics {
        let mut out = open_out(Some(path))?;
        for (k, row) in result.per_bandwidth.iter().enumerate() {
            if let Some(values) = &row.per_direction_values {
                write_direction_values(&mut out, row.h, values, k == 0)?;
            }
        }
        out.flush().map_err(|e| data_failure(path, e))?;
    }
    for row in &result.per_bandwidth {
        eprintln!(
            "h = {:.3}  T_n = {:.4}  p = {:.1}%  {}",
            row.h,
            row.statistic,
            row.p_value_percent,
            if row.reject { "reject" } else { "accept" }
        );
    }
    emit_json(args.out.as_deref(), &result)
}

fn sim(args: &SimArgs) -> CliResult<()> {
    let mut config = args.test.resolve()?;
    if args.test.h.is_none() {
        config.bandwidths = DEFAULT_BANDWIDTHS.to_vec();
    }
    config.model = args.scenario.null_model();
    if args.test.print_config {
        return print_config(&config);
    }
    let scenario = Scenario {
        kl_terms: args.kl_terms,
        grid_size: args.curve_points,
        ..Scenario::new(args.scenario, args.n, args.deviation)
    };
    let table = power_study(
        &scenario,
        &config.bandwidths,
        &config,
        args.mc_reps,
        &config.bootstrap_plan(),
    )?;
    for r in &table.rows {
        eprintln!(
            "{} dev={} h={:.2}: rate {:.3} (se {:.3}, {} reps, {} failed)",
            r.scenario, r.deviation, r.h, r.rejection_rate, r.se, r.mc_reps, r.failed
        );
    }
    let out = open_out(args.out.as_deref())?;
    table.write_csv(out)?;
    Ok(())
}

#[derive(Serialize)]
struct FpcaReport {
    n: usize,
    grid_points: usize,
    eigenvalues: Vec<f64>,
    explained: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<fgof::models::ModelReport<f64>>,
}

fn fpca_report(args: &FpcaArgs) -> CliResult<()> {
    let curves = load(&args.curves, args.grid.as_deref())?;
    let dec = fpca(&curves)?;
    let total: f64 = dec.eigenvalues.iter().sum();
    let k = args.components.min(dec.eigenvalues.len());
    let eigenvalues = dec.eigenvalues[..k].to_vec();
    let explained = eigenvalues.iter().map(|v| v / total).collect();
    let model = match &args.response {
        Some(path) => {
            let y = read_response(path, response_column(args.response_column)?)?;
            let dec = std::sync::Arc::new(dec);
            let fitted = match args.model {
                ModelKind::Linear => fgof::models::fit_flm_with(dec, &y, args.m)?,
                ModelKind::Quadratic => fgof::models::fit_fqm_with(dec, &y, args.m)?,
                ModelKind::None => {
                    return Err(config_failure(
                        "fpca-report needs a linear or quadratic model".into(),
                    ))
                }
            };
            Some(fitted.report())
        }
        None => None,
    };
    emit_json(
        args.out.as_deref(),
        &FpcaReport {
            n: curves.len(),
            grid_points: curves[0].grid().len(),
            eigenvalues,
            explained,
            model,
        },
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gof(a) => gof(a),
        Command::Sim(a) => sim(a),
        Command::FpcaReport(a) => fpca_report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
