//! Command-line front end.
//!
//! Every subcommand resolves its settings from an optional JSON config file
//! overlaid with the flags given on the command line (flags win), prints the
//! resolved settings to stderr and then runs the library operation.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, PredictionRow};
use crate::extrap::{self, ChangeWindow};
use crate::gbt::{self, HyperParams, Matrix, TreeEnsemble};
use crate::mc::{self, McConfig};
use crate::month::YearMonth;
use crate::panel::{self, FeatureSpec, HarborSize, Panel, Target};
use crate::raster::{self, ExtractOptions, NtlStdMode};

#[derive(Debug, Parser)]
#[command(name = "seatrade", version, about = "Port trade nowcasting from satellite rasters")]
struct Cli {
    /// JSON file with settings for the subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reduce raster stacks to monthly port features.
    Extract(ExtractArgs),
    /// Join features, port attributes and trade into a panel.
    Panel(PanelArgs),
    /// Fit a model on a panel split and predict the held-out rows.
    Train(SplitArgs),
    /// Predict a panel with a saved model.
    Predict(PredictArgs),
    /// Score predictions and write the report.
    Eval(EvalArgs),
    /// Train and score with satellite columns shuffled across rows.
    Placebo(SplitArgs),
    /// Anchor port predictions and estimate pre/post changes.
    Extrap(ExtrapArgs),
    /// Run the fixed-effect Monte Carlo simulation.
    Mc(McArgs),
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Args, Serialize)]
struct ExtractArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    raster_root: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
    /// Lit-area radiance threshold.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ntl_std_mode: Option<NtlStdMode>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExtractConfig {
    raster_root: Option<PathBuf>,
    out_dir: PathBuf,
    tau: f64,
    ntl_std_mode: NtlStdMode,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        let o = ExtractOptions::default();
        ExtractConfig {
            raster_root: None,
            out_dir: PathBuf::from("."),
            tau: o.tau,
            ntl_std_mode: o.ntl_std_mode,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct PanelArgs {
    /// Features CSV from `extract`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    wpi: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trade: Option<PathBuf>,
    /// sat, port or sat+port.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PanelConfig {
    features: Option<PathBuf>,
    wpi: Option<PathBuf>,
    trade: Option<PathBuf>,
    spec: String,
    out_dir: PathBuf,
}

impl Default for PanelConfig {
    fn default() -> Self {
        PanelConfig {
            features: None,
            wpi: None,
            trade: None,
            spec: "sat+port".into(),
            out_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Args, Serialize, Default)]
struct ModelArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_rounds: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    min_child_weight: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    subsample_rows: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    subsample_cols: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_bins: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct SplitArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    panel: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<Target>,
    /// Share of months used for training in the chronological split.
    #[arg(long, conflicts_with = "leave_out_region")]
    #[serde(skip_serializing_if = "Option::is_none")]
    train_frac: Option<f64>,
    /// Hold out one region instead of splitting by time.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    leave_out_region: Option<String>,
    /// Comma-separated harbor sizes to keep (e.g. `S,M`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sizes: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(rename = "params")]
    model: ModelArgs,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SplitConfig {
    panel: Option<PathBuf>,
    target: Target,
    train_frac: f64,
    leave_out_region: Option<String>,
    sizes: Option<String>,
    out_dir: PathBuf,
    params: HyperParams,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            panel: None,
            target: Target::Value,
            train_frac: 0.7,
            leave_out_region: None,
            sizes: None,
            out_dir: PathBuf::from("."),
            params: HyperParams::default(),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    panel: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<Target>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PredictConfig {
    model: Option<PathBuf>,
    panel: Option<PathBuf>,
    target: Target,
    out_dir: PathBuf,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            model: None,
            panel: None,
            target: Target::Value,
            out_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    predictions: Option<PathBuf>,
    /// Model whose gain importance goes into the report.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<PathBuf>,
    /// Feature-spec label recorded in the report.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<String>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<Target>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvalConfig {
    predictions: Option<PathBuf>,
    model: Option<PathBuf>,
    spec: String,
    target: Target,
    out_dir: PathBuf,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            predictions: None,
            model: None,
            spec: "sat+port".into(),
            target: Target::Value,
            out_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct ExtrapArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    predictions: Option<PathBuf>,
    /// Month excluded between the pre and post windows.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    cutoff: Option<YearMonth>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pre_from: Option<YearMonth>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pre_to: Option<YearMonth>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    post_from: Option<YearMonth>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    post_to: Option<YearMonth>,
    /// Minimum share of window months a port must cover.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    min_coverage: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExtrapConfig {
    predictions: Option<PathBuf>,
    cutoff: Option<YearMonth>,
    pre_from: Option<YearMonth>,
    pre_to: Option<YearMonth>,
    post_from: Option<YearMonth>,
    post_to: Option<YearMonth>,
    min_coverage: f64,
    out_dir: PathBuf,
}

impl Default for ExtrapConfig {
    fn default() -> Self {
        ExtrapConfig {
            predictions: None,
            cutoff: None,
            pre_from: None,
            pre_to: None,
            post_from: None,
            post_to: None,
            min_coverage: 0.8,
            out_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct McArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_reps: Option<usize>,
    /// Permute X across rows before fitting.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    shuffle_x: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct McRunConfig {
    out_dir: PathBuf,
    #[serde(flatten)]
    mc: McConfig,
}

impl Default for McRunConfig {
    fn default() -> Self {
        McRunConfig {
            out_dir: PathBuf::from("."),
            mc: McConfig::default(),
        }
    }
}

/// Recursively overlays `top` onto `base`; objects merge, anything else replaces.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, t) => *b = t,
    }
}

fn resolve<A: Serialize, C: DeserializeOwned + Serialize>(
    name: &str,
    config: Option<&Path>,
    args: &A,
    overrides: Value,
) -> Result<C> {
    let mut value = match config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => Value::Object(Default::default()),
    };
    if !value.is_object() {
        return Err(Error::Config("config file must hold a JSON object".into()));
    }
    merge(&mut value, serde_json::to_value(args)?);
    merge(&mut value, overrides);
    let resolved: C = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    eprintln!("seatrade {name}: {}", serde_json::to_string(&resolved)?);
    Ok(resolved)
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Config(format!("missing --{flag}")))
}

fn existing<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    let p = required(v, flag)?;
    if !p.exists() {
        return Err(Error::Config(format!("--{flag} {} does not exist", p.display())));
    }
    Ok(p)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, BufWriter::new(file)))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let (path, mut w) = create(dir, name)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn finish(path: PathBuf, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(&path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn seed_override(seed: Option<u64>, pointer: &[&str]) -> Value {
    let Some(seed) = seed else {
        return Value::Object(Default::default());
    };
    let mut v = Value::from(seed);
    for key in pointer.iter().rev() {
        let mut obj = serde_json::Map::new();
        obj.insert(key.to_string(), v);
        v = Value::Object(obj);
    }
    v
}

fn cmd_extract(cfg: &ExtractConfig) -> Result<()> {
    let root = existing(&cfg.raster_root, "raster-root")?;
    let opts = ExtractOptions {
        tau: cfg.tau,
        ntl_std_mode: cfg.ntl_std_mode,
    };
    let rows = raster::extract_features(root, &opts)?;
    let (path, mut w) = create(&cfg.out_dir, "features.csv")?;
    raster::write_features_csv(&mut w, &rows)?;
    finish(path, w)
}

fn cmd_panel(cfg: &PanelConfig) -> Result<()> {
    let spec: FeatureSpec = cfg.spec.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let sat = if spec.uses_sat() {
        raster::read_features_csv(open(existing(&cfg.features, "features")?)?)?
    } else {
        Vec::new()
    };
    // Without port features the WPI table still supplies region and size.
    let wpi = if spec.uses_port() || cfg.wpi.is_some() {
        panel::read_wpi_csv(open(existing(&cfg.wpi, "wpi")?)?)?
    } else {
        Vec::new()
    };
    let trade = panel::read_trade_csv(open(existing(&cfg.trade, "trade")?)?)?;
    let p = panel::assemble_panel(&sat, &wpi, &trade, spec)?;
    let (path, mut w) = create(&cfg.out_dir, "panel.csv")?;
    panel::write_panel_csv(&mut w, &p)?;
    finish(path, w)
}

/// Loads, size-filters and splits the panel named in `cfg`.
fn split_panel(cfg: &SplitConfig) -> Result<(Panel, Panel)> {
    let mut p = panel::read_panel_csv(open(existing(&cfg.panel, "panel")?)?)?;
    if let Some(sizes) = &cfg.sizes {
        let sizes = HarborSize::parse_set(sizes).map_err(|e| Error::Config(e.to_string()))?;
        p = panel::filter_size(&p, &sizes)?;
    }
    match &cfg.leave_out_region {
        Some(region) => panel::leave_region_out(&p, region),
        None => panel::chrono_split(&p, cfg.train_frac),
    }
}

fn fit_panel(train: &Panel, target: Target, params: &HyperParams) -> Result<TreeEnsemble> {
    let x = train.matrix();
    gbt::fit(
        &Matrix::new(&x, train.feature_names.len())?,
        &train.targets(target),
        &train.feature_names,
        params,
    )
}

fn predict_panel(model: &TreeEnsemble, p: &Panel, target: Target) -> Result<Vec<PredictionRow>> {
    let x = p.matrix();
    let pred = model.predict_named(&Matrix::new(&x, p.feature_names.len())?, &p.feature_names)?;
    Ok(p.rows
        .iter()
        .zip(pred)
        .map(|(r, predicted)| PredictionRow {
            port_id: r.port_id.clone(),
            year_month: r.year_month,
            actual: Some(r.target(target)).filter(|v| v.is_finite()),
            predicted,
        })
        .collect())
}

fn write_predictions(dir: &Path, rows: &[PredictionRow]) -> Result<()> {
    let (path, mut w) = create(dir, "predictions.csv")?;
    eval::write_predictions_csv(&mut w, rows)?;
    finish(path, w)
}

fn report(rows: &[PredictionRow], spec: &str, target: Target, importance: Vec<(String, f64)>) -> Result<EvalReport> {
    let (actual, predicted): (Vec<f64>, Vec<f64>) =
        rows.iter().filter_map(|r| r.actual.map(|a| (a, r.predicted))).unzip();
    let m = eval::metrics(&actual, &predicted)?;
    Ok(EvalReport::new(spec, &target.to_string(), m, importance))
}

fn write_report(dir: &Path, rows: &[PredictionRow], r: &EvalReport) -> Result<()> {
    let path = write_text(dir, "report.json", &(serde_json::to_string_pretty(r)? + "\n"))?;
    log::info!("wrote {}", path.display());
    let (path, mut w) = create(dir, "aggregate_timeseries.csv")?;
    eval::write_aggregate_csv(&mut w, &eval::aggregate_timeseries(rows))?;
    finish(path, w)?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into());
    println!(
        "n_test {}  r2 {}  corr {}  mae {:.4}  rmse {:.4}  mape% {}",
        r.n_test,
        fmt(r.r2),
        fmt(r.pearson_corr),
        r.mae,
        r.rmse,
        fmt(r.mape_pct)
    );
    Ok(())
}

fn cmd_train(cfg: &SplitConfig) -> Result<()> {
    let (train, test) = split_panel(cfg)?;
    log::info!("train rows {}, test rows {}", train.len(), test.len());
    let model = fit_panel(&train, cfg.target, &cfg.params)?;
    write_text(&cfg.out_dir, "model.json", &(model.to_json()? + "\n"))?;
    write_predictions(&cfg.out_dir, &predict_panel(&model, &test, cfg.target)?)
}

fn cmd_placebo(cfg: &SplitConfig) -> Result<()> {
    let mut p = panel::read_panel_csv(open(existing(&cfg.panel, "panel")?)?)?;
    if p.sat_columns.is_empty() {
        return Err(Error::Schema("panel has no satellite columns to shuffle".into()));
    }
    p = eval::placebo_shuffle(&p, &p.sat_columns, cfg.params.seed)?;
    if let Some(sizes) = &cfg.sizes {
        let sizes = HarborSize::parse_set(sizes).map_err(|e| Error::Config(e.to_string()))?;
        p = panel::filter_size(&p, &sizes)?;
    }
    let (train, test) = match &cfg.leave_out_region {
        Some(region) => panel::leave_region_out(&p, region)?,
        None => panel::chrono_split(&p, cfg.train_frac)?,
    };
    let model = fit_panel(&train, cfg.target, &cfg.params)?;
    let rows = predict_panel(&model, &test, cfg.target)?;
    write_predictions(&cfg.out_dir, &rows)?;
    let spec = if p.sat_columns.len() == p.feature_names.len() { "sat" } else { "sat+port" };
    let r = report(&rows, &format!("{spec} (placebo)"), cfg.target, model.gain_importance())?;
    write_report(&cfg.out_dir, &rows, &r)
}

fn cmd_predict(cfg: &PredictConfig) -> Result<()> {
    let path = existing(&cfg.model, "model")?;
    let model = TreeEnsemble::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?;
    let p = panel::read_panel_csv(open(existing(&cfg.panel, "panel")?)?)?;
    write_predictions(&cfg.out_dir, &predict_panel(&model, &p, cfg.target)?)
}

fn cmd_eval(cfg: &EvalConfig) -> Result<()> {
    let rows = eval::read_predictions_csv(open(existing(&cfg.predictions, "predictions")?)?)?;
    let importance = match &cfg.model {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            TreeEnsemble::from_json(&text)?.gain_importance()
        }
        None => Vec::new(),
    };
    let r = report(&rows, &cfg.spec, cfg.target, importance)?;
    write_report(&cfg.out_dir, &rows, &r)
}

fn change_window(cfg: &ExtrapConfig) -> Result<ChangeWindow> {
    let d = ChangeWindow::sanctions_default();
    let (pre_from, pre_to, post_from, post_to) = match cfg.cutoff {
        // A cutoff alone puts the windows on either side of it.
        Some(c) => (
            cfg.pre_from.unwrap_or(d.pre_from),
            cfg.pre_to.unwrap_or(c.pred()),
            cfg.post_from.unwrap_or(c.succ()),
            cfg.post_to.unwrap_or(d.post_to),
        ),
        None => (
            cfg.pre_from.unwrap_or(d.pre_from),
            cfg.pre_to.unwrap_or(d.pre_to),
            cfg.post_from.unwrap_or(d.post_from),
            cfg.post_to.unwrap_or(d.post_to),
        ),
    };
    ChangeWindow::new(pre_from, pre_to, post_from, post_to).map_err(|e| Error::Config(e.to_string()))
}

fn cmd_extrap(cfg: &ExtrapConfig) -> Result<()> {
    if !(0.0..=1.0).contains(&cfg.min_coverage) {
        return Err(Error::Config(format!("min_coverage {} not in [0,1]", cfg.min_coverage)));
    }
    let window = change_window(cfg)?;
    let rows = eval::read_predictions_csv(open(existing(&cfg.predictions, "predictions")?)?)?;
    let span = window.pre_from.span_to(window.post_to) as f64;
    let mut changes = Vec::new();
    let mut anchored = Vec::new();
    for (series, observed) in extrap::series_by_port(&rows)? {
        let covered = series
            .months
            .iter()
            .filter(|m| **m >= window.pre_from && **m <= window.post_to)
            .count() as f64;
        if covered / span < cfg.min_coverage {
            log::info!("dropping {}: coverage {:.1}%", series.port_id, 100.0 * covered / span);
            continue;
        }
        match extrap::pct_change(&series, &window) {
            Ok(c) => changes.push(c),
            Err(e) => log::warn!("{}: {e}", series.port_id),
        }
        match extrap::anchor_first_observed(&series, &observed) {
            Ok(a) => anchored.push((a, observed)),
            Err(e) => log::info!("{e}"),
        }
    }
    if changes.is_empty() {
        return Err(Error::Empty("no port passes the coverage and window requirements".into()));
    }
    let (path, mut w) = create(&cfg.out_dir, "changes.csv")?;
    extrap::write_changes_csv(&mut w, &changes)?;
    finish(path, w)?;
    let (path, mut w) = create(&cfg.out_dir, "anchored.csv")?;
    extrap::write_anchored_csv(&mut w, &anchored)?;
    finish(path, w)
}

fn cmd_mc(cfg: &McRunConfig) -> Result<()> {
    cfg.mc.validate()?;
    let result = mc::run_mc(&cfg.mc)?;
    let (path, mut w) = create(&cfg.out_dir, "mc_results.csv")?;
    mc::write_mc_results_csv(&mut w, &result)?;
    finish(path, w)?;
    print!("{}", mc::summary_table(&result.summary));
    Ok(())
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("SEATRADE_LOG", "warn");
    // A second call (in-process tests) keeps the first logger.
    let _ = env_logger::Builder::from_env(env).try_init();
}

fn init_threads(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be >= 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already set up: {e}");
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    init_threads(cli.jobs)?;
    let config = cli.config.as_deref();
    let none = Value::Object(Default::default());
    match &cli.command {
        Command::Extract(a) => cmd_extract(&resolve("extract", config, a, none)?),
        Command::Panel(a) => cmd_panel(&resolve("panel", config, a, none)?),
        Command::Train(a) => cmd_train(&resolve("train", config, a, seed_override(cli.seed, &["params", "seed"]))?),
        Command::Placebo(a) => {
            cmd_placebo(&resolve("placebo", config, a, seed_override(cli.seed, &["params", "seed"]))?)
        }
        Command::Predict(a) => cmd_predict(&resolve("predict", config, a, none)?),
        Command::Eval(a) => cmd_eval(&resolve("eval", config, a, none)?),
        Command::Extrap(a) => cmd_extrap(&resolve("extrap", config, a, none)?),
        Command::Mc(a) => cmd_mc(&resolve("mc", config, a, seed_override(cli.seed, &["master_seed"]))?),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flags_override_config_values() {
        let mut base = json!({"tau": 0.2, "params": {"n_rounds": 10, "max_depth": 3}});
        merge(&mut base, json!({"params": {"n_rounds": 50}}));
        assert_eq!(base, json!({"tau": 0.2, "params": {"n_rounds": 50, "max_depth": 3}}));
    }

    #[test]
    fn seed_lands_in_nested_field() {
        assert_eq!(seed_override(Some(7), &["params", "seed"]), json!({"params": {"seed": 7}}));
        assert_eq!(seed_override(None, &["master_seed"]), json!({}));
    }

    #[test]
    fn cutoff_sets_adjacent_windows() {
        let cfg = ExtrapConfig {
            cutoff: Some("2020-06".parse().unwrap()),
            pre_from: Some("2020-01".parse().unwrap()),
            post_to: Some("2020-12".parse().unwrap()),
            ..ExtrapConfig::default()
        };
        let w = change_window(&cfg).unwrap();
        assert_eq!(w.pre_to.to_string(), "2020-05");
        assert_eq!(w.post_from.to_string(), "2020-07");
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run(["seatrade", "train", "--bogus"]), 1);
        assert_eq!(run(["seatrade", "train"]), 1);
        assert_eq!(run(["seatrade", "--help"]), 0);
    }
}
