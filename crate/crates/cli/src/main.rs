//! `jdan`: train, evaluate, query and check joint density forecasting
//! models.
//!
//! Exit status is 0 on success, 2 for usage, configuration and data
//! errors, and 3 for numerical failures (including failed verification).

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jdan_core::activations::Activation;
use jdan_core::data::{read_table, CsvSpec, Dataset};
use jdan_core::hypernet::{Architecture, Forecaster};
use jdan_core::metrics::{self, DEFAULT_ENERGY_SAMPLES};
use jdan_core::miso::{find_negative_witness, WitnessConfig};
use jdan_core::model_file::{ModelDocument, TrainingState};
use jdan_core::training::{train, training_bounds};
use jdan_core::verify::{verify, Level};
use jdan_core::{Error, Result};

use config::TrainFile;

#[derive(Parser, Debug)]
#[command(name = "jdan", version, about = "Joint density forecasting with monotone networks")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Training configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only warnings and errors on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model from --config; writes the model file and an epoch CSV.
    Train,
    /// Score a model on a CSV file.
    Evaluate(EvaluateArgs),
    /// Joint density on a grid.
    Density(DensityArgs),
    /// Draw samples from a forecast.
    Sample(SampleArgs),
    /// Search for a negative mixed partial in a two-layer network.
    DiagnoseMiso(DiagnoseArgs),
    /// Run the invariant battery on a model.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Samples per observation for the energy score.
    #[arg(long, default_value_t = DEFAULT_ENERGY_SAMPLES)]
    energy_samples: usize,
    /// Also write PIT values to this CSV.
    #[arg(long)]
    pit: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DensityArgs {
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated feature values for conditional models.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<f64>,
    /// Grid points per free dimension (cell midpoints).
    #[arg(long, default_value_t = 11)]
    grid: usize,
    /// Pin a coordinate, as `DIM=VALUE` with 1-based DIM; repeatable.
    #[arg(long = "fix", value_parser = parse_fix)]
    fixed: Vec<(usize, f64)>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<f64>,
    #[arg(long, short)]
    n: usize,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long, value_parser = parse_activation)]
    activation: Activation,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    hidden: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "quick", value_parser = parse_level)]
    level: Level,
}

fn parse_fix(s: &str) -> std::result::Result<(usize, f64), String> {
    let (d, v) = s.split_once('=').ok_or("expected DIM=VALUE")?;
    let d: usize = d.trim().parse().map_err(|e| format!("{e}"))?;
    if d == 0 {
        return Err("dimensions are numbered from 1".into());
    }
    let v: f64 = v.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((d - 1, v))
}

fn parse_activation(s: &str) -> std::result::Result<Activation, String> {
    s.parse::<Activation>().map_err(|e| e.to_string())
}

fn parse_level(s: &str) -> std::result::Result<Level, String> {
    s.parse::<Level>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level))
        .format_timestamp(None)
        .init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("JDAN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Contract(format!("JDAN_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Contract(e.to_string()))
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Train => cmd_train(cli),
        Command::Evaluate(a) => cmd_evaluate(cli, a),
        Command::Density(a) => cmd_density(cli, a),
        Command::Sample(a) => cmd_sample(cli, a),
        Command::DiagnoseMiso(a) => cmd_diagnose(cli, a),
        Command::Verify(a) => cmd_verify(cli, a),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(Error::file(path))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(Error::file(p))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn report_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("report.csv")
}

fn cmd_train(cli: &Cli) -> Result<ExitCode> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Contract("train needs --config".into()))?;
    let mut cfg = TrainFile::read(path)?;
    if let Some(seed) = cli.seed {
        cfg.training.seed = seed;
    }
    let table = read_table(open(&cfg.data_path())?, &cfg.data.columns)?;
    let dataset = Dataset::from_table(table, cfg.bound_margin)?;
    let bounds = match &cfg.bounds {
        Some(b) => b.clone(),
        None => training_bounds(&dataset, &cfg.training, cfg.bound_margin)?,
    };
    let mut arch = Architecture::new(bounds, dataset.feature_dim())
        .with_hypernet(cfg.architecture.hypernet_hidden.clone(), cfg.architecture.hypernet_activation);
    arch.marginals = cfg.architecture.marginals.expand(arch.dim)?;
    log::info!(
        "{} rows ({} dropped), {} targets, {} features",
        dataset.len(),
        dataset.dropped_rows(),
        dataset.dim(),
        dataset.feature_dim()
    );
    let outcome = train(&dataset, &arch, &cfg.training)?;
    let mut doc = if arch.input_dim == 0 {
        ModelDocument::from_joint(&outcome.model.model_for(&[])?)
    } else {
        ModelDocument::from_conditional(&outcome.model)?
    }
    .with_data(cfg.data.columns.clone());
    doc.training = Some(TrainingState {
        epoch: outcome.report.stopped_epoch,
        optimizer: outcome.optimizer,
    });
    let model_path = match (&cli.out, &cfg.output.model) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => cfg.resolve(p),
        (None, None) => cfg.resolve(Path::new("model.json")),
    };
    let csv_path = match (&cli.out, &cfg.output.report) {
        (None, Some(p)) => cfg.resolve(p),
        _ => report_path(&model_path),
    };
    doc.write(&model_path)?;
    std::fs::write(&csv_path, outcome.report.to_csv()).map_err(Error::file(&csv_path))?;
    let r = &outcome.report;
    if r.validation_excluded > 0 {
        log::warn!("{} validation rows outside the bounds were not scored", r.validation_excluded);
    }
    println!(
        "validation nll {} (best epoch {} of {})",
        r.best_validation_nll, r.best_epoch, r.stopped_epoch
    );
    log::info!("wrote {} and {}", model_path.display(), csv_path.display());
    Ok(ExitCode::SUCCESS)
}

fn evaluation_columns(cli: &Cli, doc: &ModelDocument) -> Result<CsvSpec> {
    if let Some(spec) = &doc.data {
        return Ok(spec.clone());
    }
    if let Some(path) = &cli.config {
        return Ok(TrainFile::read(path)?.data.columns);
    }
    if doc.conditioning.is_some() {
        return Err(Error::Contract(
            "conditional model without column names; pass --config".into(),
        ));
    }
    Ok(CsvSpec {
        target_columns: (1..=doc.dim).map(|d| format!("y{d}")).collect(),
        ..CsvSpec::default()
    })
}

fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<ExitCode> {
    let doc = ModelDocument::read(&a.model)?;
    let model = doc.load()?;
    let spec = evaluation_columns(cli, &doc)?;
    let table = read_table(open(&a.data)?, &spec)?;
    let data = table.observations();
    let report = metrics::evaluate(&model, &data, a.energy_samples, cli.seed.unwrap_or(0))?;
    let mut w = output(cli.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    if !cli.quiet {
        eprint!("{}", report.table());
    }
    if let Some(p) = &a.pit {
        let mut csv = csv::Writer::from_writer(output(Some(p))?);
        let header: Vec<String> = (1..=model.dim()).map(|d| format!("u{d}")).collect();
        csv.write_record(&header)?;
        let pits = (0..model.dim())
            .map(|d| metrics::pit_values(&model, &data, d))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..data.len() {
            csv.write_record(pits.iter().map(|col| col[i].to_string()))?;
        }
        csv.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_density(cli: &Cli, a: &DensityArgs) -> Result<ExitCode> {
    let model = ModelDocument::read(&a.model)?.load()?.model_for(&a.x)?;
    let dim = model.dim();
    if a.grid < 2 {
        return Err(Error::Contract("--grid must be at least 2".into()));
    }
    let mut fixed: Vec<Option<f64>> = vec![None; dim];
    for &(d, v) in &a.fixed {
        if d >= dim {
            return Err(Error::Contract(format!("--fix dimension {} exceeds {dim}", d + 1)));
        }
        fixed[d] = Some(v);
    }
    let free: Vec<usize> = (0..dim).filter(|&d| fixed[d].is_none()).collect();
    if free.len() > 3 {
        return Err(Error::Contract(format!(
            "{} free dimensions; fix all but at most 3 with --fix",
            free.len()
        )));
    }
    let norms = model.normalizers()?;
    let mut csv = csv::Writer::from_writer(output(cli.out.as_deref())?);
    let mut header: Vec<String> = (1..=dim).map(|d| format!("y{d}")).collect();
    header.push("density".into());
    csv.write_record(&header)?;
    let cells = a.grid.pow(free.len() as u32);
    let mut point: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
    for cell in 0..cells {
        let mut rest = cell;
        // Last free dimension varies fastest.
        for &d in free.iter().rev() {
            let b = model.bounds()[d];
            let i = rest % a.grid;
            rest /= a.grid;
            point[d] = b.lower + (i as f64 + 0.5) * b.width() / a.grid as f64;
        }
        let p = model.joint_pdf_with(&norms, &point)?;
        let mut row: Vec<String> = point.iter().map(f64::to_string).collect();
        row.push(p.to_string());
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sample(cli: &Cli, a: &SampleArgs) -> Result<ExitCode> {
    let model = ModelDocument::read(&a.model)?.load()?.model_for(&a.x)?;
    let samples = model.sample_seeded(a.n, cli.seed.unwrap_or(0))?;
    let mut csv = csv::Writer::from_writer(output(cli.out.as_deref())?);
    csv.write_record((1..=model.dim()).map(|d| format!("y{d}")))?;
    for s in &samples {
        csv.write_record(s.iter().map(f64::to_string))?;
    }
    csv.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_diagnose(cli: &Cli, a: &DiagnoseArgs) -> Result<ExitCode> {
    let mut config = WitnessConfig::new(a.activation, a.dim, cli.seed.unwrap_or(0));
    config.hidden = a.hidden;
    config.max_trials = a.trials;
    let report = find_negative_witness(&config)?;
    let mut w = output(cli.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    if !cli.quiet {
        eprintln!("{}", report.summary());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> Result<ExitCode> {
    let model = ModelDocument::read(&a.model)?.load()?;
    let report = verify(&model, a.level, cli.seed.unwrap_or(0))?;
    if let Some(p) = &cli.out {
        let mut w = output(Some(p))?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        w.flush()?;
    }
    if !cli.quiet || !report.passed() {
        eprint!("{}", report.summary());
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}
