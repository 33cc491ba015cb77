//! Command-line front end.
//!
//! Every command resolves a [`RunConfig`] from, in increasing priority,
//! built-in defaults, an optional `--config` TOML file and explicit flags, and
//! writes the result to `<output>/<command>.config.toml` before doing any work.
//! Passing that file back with `--config` reproduces the run.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{
    clean_and_aggregate, generate_synthetic, generate_synthetic_daily, ingest_daily, load_monthly_cache,
    prepare_dataset, save_monthly_cache, write_daily_csv, CleanPolicy, DailyFormat, DailySynthConfig, MonthlySeries,
    PreparedData, SplitYears, SynthConfig, YearRange, DEFAULT_WINDOW_MONTHS,
};
use crate::error::{Error, Result};
use crate::eval::{
    per_month_metrics, plot_tables, prediction_records, predictions_csv, statistical_summary, MetricUnit, MetricsTable,
};
use crate::models::{CoordsWiring, ModelKind, ModelSpec, TrainedModel};
use crate::optim::{train, Selection, TrainConfig, TrainHistory};

/// Fully resolved settings for one command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    /// Daily CSV for `ingest`; monthly cache for every other command. Without
    /// it, dataset commands generate the default synthetic network.
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    /// Trained model consumed by `predict` and `evaluate`.
    pub model_file: Option<PathBuf>,
    pub format: DailyFormat,
    pub train_years: YearRange,
    pub val_years: YearRange,
    pub test_years: YearRange,
    pub window_months: usize,
    pub model: ModelKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub unit: MetricUnit,
    pub coords_wiring: CoordsWiring,
    pub strict_paper_head: bool,
    pub final_epoch_weights: bool,
    /// Restricts `summarize` to one station.
    pub station: Option<String>,
    pub synth_stations: usize,
    pub synth_years: usize,
    pub synth_start_year: i32,
    /// `synth` also writes a defect-laden daily CSV.
    pub daily: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let train = TrainConfig::default();
        Self {
            command: String::new(),
            input: None,
            output: PathBuf::from("monsoon-out"),
            model_file: None,
            format: DailyFormat::WrdStation,
            train_years: SplitYears::WRD.train,
            val_years: SplitYears::WRD.validation,
            test_years: SplitYears::WRD.test,
            window_months: DEFAULT_WINDOW_MONTHS,
            model: ModelKind::Dwmrpm,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr: train.lr,
            seed: 42,
            unit: MetricUnit::Normalized,
            coords_wiring: CoordsWiring::Both,
            strict_paper_head: false,
            final_epoch_weights: false,
            station: None,
            synth_stations: synth.stations,
            synth_years: synth.years,
            synth_start_year: synth.start_year,
            daily: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn split_years(&self) -> SplitYears {
        SplitYears {
            train: self.train_years,
            validation: self.val_years,
            test: self.test_years,
        }
    }

    pub fn model_spec(&self, kind: ModelKind) -> ModelSpec {
        let mut spec = ModelSpec::new(kind)
            .with_seed(self.seed)
            .with_window(self.window_months);
        spec.coords_wiring = self.coords_wiring;
        spec.head_bias = !self.strict_paper_head;
        spec
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            seed: self.seed,
            shuffle: true,
            selection: if self.final_epoch_weights {
                Selection::FinalEpoch
            } else {
                Selection::BestValidation
            },
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            stations: self.synth_stations,
            years: self.synth_years,
            start_year: self.synth_start_year,
            ..SynthConfig::default()
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dwmrpm",
    version,
    about = "Monsoon rainfall prediction with deep and wide networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Daily CSV to monthly cache plus cleaning report
    Ingest(Flags),
    /// Monthly mean/max/min table per station
    Summarize(Flags),
    /// Synthetic monthly cache
    Synth(Flags),
    /// Train one model
    Train(Flags),
    /// Predictions for the test split
    Predict(Flags),
    /// Per-month RMSE/MAE for the test split
    Evaluate(Flags),
    /// Train all three models on one split and report side by side
    Compare(Flags),
}

impl Command {
    fn split(self) -> (&'static str, Flags) {
        match self {
            Command::Ingest(f) => ("ingest", f),
            Command::Summarize(f) => ("summarize", f),
            Command::Synth(f) => ("synth", f),
            Command::Train(f) => ("train", f),
            Command::Predict(f) => ("predict", f),
            Command::Evaluate(f) => ("evaluate", f),
            Command::Compare(f) => ("compare", f),
        }
    }
}

#[derive(Debug, Default, Args)]
struct Flags {
    /// TOML file with any of the settings below (kebab-case keys)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// imd_grid or wrd_station
    #[arg(long, value_parser = parse_with::<DailyFormat>)]
    format: Option<DailyFormat>,
    #[arg(long, value_parser = parse_with::<YearRange>)]
    train_years: Option<YearRange>,
    #[arg(long, value_parser = parse_with::<YearRange>)]
    val_years: Option<YearRange>,
    #[arg(long, value_parser = parse_with::<YearRange>)]
    test_years: Option<YearRange>,
    #[arg(long)]
    window_months: Option<usize>,
    /// dwmrpm, mlp or cnn
    #[arg(long, value_parser = parse_with::<ModelKind>)]
    model: Option<ModelKind>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// normalized or mm
    #[arg(long, value_parser = parse_with::<MetricUnit>)]
    unit: Option<MetricUnit>,
    /// both or deep-only
    #[arg(long, value_parser = parse_with::<CoordsWiring>)]
    coords_wiring: Option<CoordsWiring>,
    /// Drop the scalar bias from the joint output
    #[arg(long)]
    strict_paper_head: bool,
    /// Keep last-epoch weights instead of the best-validation ones
    #[arg(long)]
    final_epoch_weights: bool,
    #[arg(long)]
    station: Option<String>,
    #[arg(long)]
    synth_stations: Option<usize>,
    #[arg(long)]
    synth_years: Option<usize>,
    #[arg(long)]
    synth_start_year: Option<i32>,
    #[arg(long)]
    daily: bool,
}

fn parse_with<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Flags {
    fn resolve(self, command: &str) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?,
            None => RunConfig::default(),
        };
        cfg.command = command.to_string();
        macro_rules! overlay {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        overlay!(
            output,
            format,
            train_years,
            val_years,
            test_years,
            window_months,
            model,
            epochs,
            batch_size,
            lr,
            seed,
            unit,
            coords_wiring,
            synth_stations,
            synth_years,
            synth_start_year
        );
        if self.input.is_some() {
            cfg.input = self.input;
        }
        if self.model_file.is_some() {
            cfg.model_file = self.model_file;
        }
        if self.station.is_some() {
            cfg.station = self.station;
        }
        cfg.strict_paper_head |= self.strict_paper_head;
        cfg.final_epoch_weights |= self.final_epoch_weights;
        cfg.daily |= self.daily;
        Ok(cfg)
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on data or contract errors, 2 on usage
/// errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (name, flags) = cli.command.split();
    match flags.resolve(name).and_then(|cfg| execute(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs an already resolved configuration.
pub fn execute(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    let out = Output { cfg };
    out.write(&format!("{}.config.toml", cfg.command), &cfg.to_toml()?)?;
    match cfg.command.as_str() {
        "ingest" => ingest(&out),
        "summarize" => summarize(&out),
        "synth" => synth(&out),
        "train" => train_one(&out),
        "predict" => predict(&out),
        "evaluate" => evaluate(&out),
        "compare" => compare(&out),
        other => Err(Error::Contract(format!("unknown command `{other}`"))),
    }
}

/// Writes artifacts under the output directory, refusing to overwrite inputs.
struct Output<'a> {
    cfg: &'a RunConfig,
}

impl Output<'_> {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.cfg.output.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        for input in [&self.cfg.input, &self.cfg.model_file].into_iter().flatten() {
            if same_file(input, &path) {
                return Err(Error::Contract(format!(
                    "refusing to overwrite input {}",
                    input.display()
                )));
            }
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Contract(format!("{what} is required (--{what})")))
}

/// Monthly series from `--input`, or the synthetic network when absent.
fn load_series(cfg: &RunConfig) -> Result<Vec<MonthlySeries>> {
    match &cfg.input {
        Some(path) => load_monthly_cache(path),
        None => generate_synthetic(&cfg.synth_config(), cfg.seed),
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<PreparedData> {
    prepare_dataset(&load_series(cfg)?, cfg.split_years(), cfg.window_months)
}

fn ingest(out: &Output) -> Result<()> {
    let cfg = out.cfg;
    let input = require(&cfg.input, "input")?;
    let ingested = ingest_daily(input, cfg.format)?;
    let (series, mut report) = clean_and_aggregate(&ingested.records, &CleanPolicy::default());
    report.row_issues = ingested.report.issues;
    let mut cache = Vec::new();
    crate::data::write_monthly_cache(&mut cache, &series)?;
    out.write("monthly.csv", &String::from_utf8_lossy(&cache))?;
    out.write("cleaning_report.json", &report.to_json()?)?;
    println!(
        "{} stations kept, {} excluded, {} months imputed, {} rows rejected",
        series.len(),
        report.excluded.len(),
        report.imputed_months(),
        report.row_issues.len()
    );
    Ok(())
}

fn summarize(out: &Output) -> Result<()> {
    let cfg = out.cfg;
    let series = load_monthly_cache(require(&cfg.input, "input")?)?;
    let chosen: Vec<&MonthlySeries> = match &cfg.station {
        Some(id) => {
            let s = series
                .iter()
                .find(|s| &s.station_id == id)
                .ok_or_else(|| Error::Contract(format!("station {id} not in input")))?;
            vec![s]
        }
        None => series.iter().collect(),
    };
    for s in chosen {
        let summary = statistical_summary(s)?;
        out.write(&format!("summary_{}.csv", s.station_id), &summary.to_csv())?;
    }
    Ok(())
}

fn synth(out: &Output) -> Result<()> {
    let cfg = out.cfg;
    let series = generate_synthetic(&cfg.synth_config(), cfg.seed)?;
    let path = cfg.output.join("monthly.csv");
    save_monthly_cache(&path, &series)?;
    if cfg.daily {
        let daily = generate_synthetic_daily(
            &DailySynthConfig {
                monthly: cfg.synth_config(),
                ..DailySynthConfig::default()
            },
            cfg.seed,
        )?;
        let mut buf = Vec::new();
        write_daily_csv(&mut buf, &daily)?;
        out.write("daily.csv", &String::from_utf8_lossy(&buf))?;
    }
    println!("{} synthetic stations written to {}", series.len(), path.display());
    Ok(())
}

fn fit(cfg: &RunConfig, data: &PreparedData, kind: ModelKind) -> Result<(TrainedModel, TrainHistory)> {
    train(
        &cfg.model_spec(kind),
        &data.split.train,
        &data.split.validation,
        data.normalization,
        &cfg.train_config(),
    )
}

fn train_one(out: &Output) -> Result<()> {
    let cfg = out.cfg;
    let data = load_dataset(cfg)?;
    let (model, history) = fit(cfg, &data, cfg.model)?;
    out.write("model.json", &model.to_json()?)?;
    out.write("history.json", &history.to_json()?)?;
    if let Some(best) = history.best_epoch {
        let r = &history.epochs[best];
        println!(
            "{}: kept epoch {best}, train MSE {:.4}, validation MSE {}",
            cfg.model,
            r.train_mse,
            r.val_mse.map_or("n/a".into(), |v| format!("{v:.4}"))
        );
    }
    Ok(())
}

/// Loads the model and the dataset, insisting they share a normalization.
fn model_and_data(cfg: &RunConfig) -> Result<(TrainedModel, PreparedData)> {
    let model = TrainedModel::load(require(&cfg.model_file, "model-file")?)?;
    let data = load_dataset(cfg)?;
    let (want, have) = (model.normalization().fingerprint(), data.normalization.fingerprint());
    if want != have {
        return Err(Error::FingerprintMismatch {
            model: want,
            dataset: have,
        });
    }
    Ok((model, data))
}

fn predict(out: &Output) -> Result<()> {
    let (model, data) = model_and_data(out.cfg)?;
    let records = prediction_records(&model, &data.split.test)?;
    out.write("predictions.csv", &predictions_csv(&records))?;
    for (station, table) in plot_tables(&records) {
        out.write(&format!("plots/{station}.csv"), &table)?;
    }
    Ok(())
}

fn evaluate(out: &Output) -> Result<()> {
    let (model, data) = model_and_data(out.cfg)?;
    let records = prediction_records(&model, &data.split.test)?;
    let table = per_month_metrics(&records, out.cfg.unit)?;
    out.write("metrics.csv", &table.to_csv())?;
    out.write("metrics.json", &table.to_json()?)?;
    print!("{}", table.to_csv());
    Ok(())
}

fn compare(out: &Output) -> Result<()> {
    let cfg = out.cfg;
    let data = load_dataset(cfg)?;
    // Each model owns its parameters and RNG streams, so threads do not
    // change results.
    let fitted: Vec<Result<(TrainedModel, TrainHistory)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ModelKind::ALL
            .iter()
            .map(|&kind| {
                let data = &data;
                scope.spawn(move || fit(cfg, data, kind))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Contract("training thread panicked".into())))
            })
            .collect()
    });

    let mut records = Vec::new();
    for (kind, result) in ModelKind::ALL.iter().zip(fitted) {
        let (model, history) = result?;
        out.write(&format!("{}/model.json", kind.flag()), &model.to_json()?)?;
        out.write(&format!("{}/history.json", kind.flag()), &history.to_json()?)?;
        records.extend(prediction_records(&model, &data.split.test)?);
    }
    out.write("predictions.csv", &predictions_csv(&records))?;
    let primary = per_month_metrics(&records, cfg.unit)?;
    let secondary = per_month_metrics(&records, cfg.unit.other())?;
    write_table(out, "comparison", &primary)?;
    write_table(out, &format!("comparison_{}", secondary.unit.as_str()), &secondary)?;
    print!("{}", primary.to_csv());
    Ok(())
}

fn write_table(out: &Output, stem: &str, table: &MetricsTable) -> Result<()> {
    out.write(&format!("{stem}.csv"), &table.to_csv())?;
    out.write(&format!("{stem}.json"), &table.to_json()?)?;
    Ok(())
}
