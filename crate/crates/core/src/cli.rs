//! Command-line entry points. Exit codes: 0 success, 2 usage, 3 data or
//! config, 4 runtime. Failures print one `error code=.. kind=.. message=..`
//! line on stderr.

use std::fmt::Write as _;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::atmos::{argmax, Regime};
use crate::baselines::{train_baselines, MlpTrainConfig};
use crate::config::{ConfigFile, Section};
use crate::datagen::{make_dataset, Dataset};
use crate::error::{Error, Result};
use crate::estimators::{artifact_file, load_trained, resolve, EstimatorRef};
use crate::ingest::{IngestConfig, PowerClient};
use crate::net::PstnetModel;
use crate::service::{grid_cells, grid_values, AppState, FLIGHT_LEVELS_M};
use crate::sim::{campaign, CampaignConfig, CampaignSummary, ScenarioPresets};
use crate::train::{eval_metrics, eval_with, gate_purity, train_loop, TrainConfig, TrainHistory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "pstnet", version, about = "Physics-structured turbulence estimation and paired guidance evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic dataset, train the model and optionally the
    /// learned baselines.
    Train {
        /// key = value training config
        config: PathBuf,
        /// Output directory for model files, history and model card
        #[arg(long, default_value = "models")]
        out: PathBuf,
    },
    /// Test-split metrics for every model file present.
    Eval {
        /// Training config the models were fitted with (dataset size and seed)
        config: PathBuf,
        #[arg(long, default_value = "models")]
        models: PathBuf,
    },
    /// Paired guidance campaign with statistics and plot-data exports.
    Campaign {
        /// Campaign config; keys may sit at top level or under [campaign]
        config: PathBuf,
        #[arg(long, default_value = "models")]
        models: PathBuf,
        #[arg(long, default_value = "campaign-out")]
        out: PathBuf,
    },
    /// Point estimate with gate diagnostics from surface weather.
    Infer {
        #[arg(long, allow_negative_numbers = true)]
        lat: f64,
        #[arg(long, allow_negative_numbers = true)]
        lon: f64,
        /// Flight level index 0..7
        #[arg(long, conflicts_with = "altitude")]
        level: Option<usize>,
        /// Altitude above the surface (m)
        #[arg(long)]
        altitude: Option<f64>,
        #[arg(long, default_value = "models")]
        models: PathBuf,
        /// Surface-weather cache directory
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// HTTP service for the web UI.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value = "models")]
        models: PathBuf,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Concurrent trajectory runs
        #[arg(long, default_value_t = crate::service::TRAJECTORY_WORKERS)]
        workers: usize,
    },
    /// Gridded estimates at one flight level as a tab-separated table.
    ExportGrid {
        /// Flight level index 0..7
        #[arg(long)]
        level: usize,
        /// Grid resolution (degrees)
        #[arg(long, default_value_t = 2.0)]
        res: f64,
        /// min_lon,min_lat,max_lon,max_lat; whole globe when absent
        #[arg(long, allow_hyphen_values = true)]
        bbox: Option<String>,
        #[arg(long, default_value = "models")]
        models: PathBuf,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value = "grid.tsv")]
        out: PathBuf,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Corrupt(_) | Error::Version { .. } | Error::Checksum { .. } => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Io(_) => "io",
        Error::Corrupt(_) => "corrupt",
        Error::Version { .. } => "version",
        Error::Checksum { .. } => "checksum",
        Error::Config(_) => "config",
        Error::Diverged { .. } => "diverged",
        Error::SimAbort(_) => "sim_abort",
        Error::Unsupported(_) => "unsupported",
        Error::Ingest(_) => "ingest",
    }
}

/// `error code=3 kind=config message="..."`, newlines folded.
pub fn error_line(code: i32, kind: &str, message: &str) -> String {
    let msg = message.replace('\n', " ");
    format!("error code={code} kind={kind} message={}", serde_json::Value::String(msg))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let first = e.to_string().lines().next().unwrap_or("usage error").trim_start_matches("error: ").to_string();
            eprintln!("{}", error_line(EXIT_USAGE, "usage", &first));
            eprintln!("{}", e.render().to_string().lines().filter(|l| l.starts_with("Usage")).collect::<Vec<_>>().join("\n"));
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("{}", error_line(code, kind(&e), &e.to_string()));
            code
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train { config, out } => cmd_train(&config, &out).map(|_| ()),
        Command::Eval { config, models } => cmd_eval(&config, &models),
        Command::Campaign { config, models, out } => cmd_campaign(&config, &models, &out).map(|_| ()),
        Command::Infer { lat, lon, level, altitude, models, cache } => {
            cmd_infer(lat, lon, level, altitude, &models, cache)
        }
        Command::Serve { addr, models, cache, workers } => cmd_serve(addr, &models, cache, workers),
        Command::ExportGrid { level, res, bbox, models, cache, out } => {
            cmd_export_grid(level, res, bbox.as_deref(), &models, cache, &out)
        }
    }
}

const TRAIN_KEYS: [&str; 14] = [
    "samples",
    "seed",
    "epochs",
    "batch_size",
    "learning_rate",
    "final_learning_rate",
    "lambda_gate",
    "lambda_balance",
    "divergence_factor",
    "baselines",
    "baseline_epochs",
    "baseline_learning_rate",
    "baseline_final_learning_rate",
    "gbt_trees",
];

/// Dataset size, seed, and the model and baseline training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPlan {
    pub samples: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub baselines: bool,
    pub mlp: MlpTrainConfig,
    pub gbt_trees: usize,
}

impl TrainPlan {
    pub fn from_section(s: &Section) -> Result<Self> {
        s.check_keys(&TRAIN_KEYS)?;
        let d = TrainConfig::default();
        let m = MlpTrainConfig::default();
        let seed = s.get_or("seed", d.seed)?;
        let train = TrainConfig {
            epochs: s.get_or("epochs", d.epochs)?,
            batch_size: s.get_or("batch_size", d.batch_size)?,
            learning_rate: s.get_or("learning_rate", d.learning_rate)?,
            final_learning_rate: s.get_or("final_learning_rate", d.final_learning_rate)?,
            lambda_gate: s.get_or("lambda_gate", d.lambda_gate)?,
            lambda_balance: s.get_or("lambda_balance", d.lambda_balance)?,
            divergence_factor: s.get_or("divergence_factor", d.divergence_factor)?,
            seed,
            ..d
        };
        train.validate()?;
        let mlp = MlpTrainConfig {
            epochs: s.get_or("baseline_epochs", m.epochs)?,
            batch_size: train.batch_size,
            learning_rate: s.get_or("baseline_learning_rate", m.learning_rate)?,
            final_learning_rate: s.get_or("baseline_final_learning_rate", m.final_learning_rate)?,
            seed,
        };
        Ok(Self {
            samples: s.get_or("samples", 20_000)?,
            seed,
            train,
            baselines: s.get_or("baselines", false)?,
            mlp,
            gbt_trees: s.get_or("gbt_trees", 200)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = ConfigFile::load(path)?;
        Self::from_section(file.section("train").unwrap_or(&file.root()))
    }

    pub fn dataset(&self) -> Result<Dataset> {
        make_dataset(self.samples, self.seed)
    }
}

fn model_card(model: &PstnetModel, plan: &TrainPlan, ds: &Dataset, history: &TrainHistory) -> Result<String> {
    let a = model.param_audit();
    let test = eval_metrics(model, &ds.test())?;
    let mut s = String::new();
    let _ = writeln!(s, "model\tpstnet");
    let _ = writeln!(s, "version\t{}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "checksum\t{:08x}", model.checksum());
    let _ = writeln!(s, "params_total\t{}", a.total);
    let _ = writeln!(s, "params_gate\t{}", a.gate);
    let _ = writeln!(s, "params_experts\t{}", a.experts);
    let _ = writeln!(s, "params_film\t{}", a.film);
    let _ = writeln!(s, "params_head\t{}", a.head);
    let _ = writeln!(s, "norm_stats\t{}", a.norm_stats);
    let _ = writeln!(s, "serialized_bytes\t{}", a.serialized_bytes);
    let _ = writeln!(s, "dataset_samples\t{}", plan.samples);
    let _ = writeln!(s, "dataset_seed\t{}", plan.seed);
    let _ = writeln!(s, "dataset_hash\t{:08x}", ds.hash());
    let _ = writeln!(s, "epochs\t{}", plan.train.epochs);
    let _ = writeln!(s, "best_epoch\t{}", history.best_epoch);
    let _ = writeln!(s, "lambda_gate\t{}", plan.train.lambda_gate);
    let _ = writeln!(s, "lambda_balance\t{}", plan.train.lambda_balance);
    let _ = writeln!(s, "final_train_mse\t{:.6e}", history.final_train_mse());
    let _ = writeln!(s, "test_mse\t{:.6e}", test.mse);
    let _ = writeln!(s, "test_gate_accuracy\t{:.4}", test.gate_accuracy);
    Ok(s)
}

/// Writes `pstnet.bin`, `history.tsv`, `model_card.txt` and, when enabled,
/// the baseline model files.
pub fn cmd_train(config: &Path, out: &Path) -> Result<PstnetModel> {
    let plan = TrainPlan::load(config)?;
    let ds = plan.dataset()?;
    std::fs::create_dir_all(out)?;
    let (model, history) = train_loop(&ds, &plan.train)?;
    model.save(&out.join("pstnet.bin"))?;
    history.export(&out.join("history.tsv"))?;
    std::fs::write(out.join("model_card.txt"), model_card(&model, &plan, &ds, &history)?)?;
    println!("pstnet\t{}\t{:08x}", out.join("pstnet.bin").display(), model.checksum());
    if plan.baselines {
        let b = train_baselines(&ds, &plan.mlp, plan.gbt_trees)?;
        for (name, save) in [
            ("mlp", b.mlp.save(&out.join(artifact_file("mlp").expect("known")))),
            ("deep-mlp", b.deep_mlp.save(&out.join(artifact_file("deep-mlp").expect("known")))),
            ("gbt", b.gbt.save(&out.join(artifact_file("gbt").expect("known")))),
        ] {
            save?;
            println!("{name}\t{}", out.join(artifact_file(name).expect("known")).display());
        }
    }
    Ok(model)
}

fn load_pstnet(models: &Path) -> Result<PstnetModel> {
    let path = models.join(artifact_file("pstnet").expect("known"));
    if !path.exists() {
        return Err(Error::Config(format!("missing model file {}", path.display())));
    }
    PstnetModel::load(&path)
}

fn cmd_eval(config: &Path, models: &Path) -> Result<()> {
    let plan = TrainPlan::load(config)?;
    let model = load_pstnet(models)?;
    let ds = plan.dataset()?;
    let test = ds.test();
    let m = eval_metrics(&model, &test)?;
    let mut rows = vec![format!("pstnet\t{}\t{:.6e}\t{:.6e}\t{:.4}\t{:.4}", m.n, m.mse, m.mae, m.gate_accuracy, gate_purity(&model, &test))];
    for name in ["mlp", "deep-mlp", "gbt"] {
        let path = models.join(artifact_file(name).expect("known"));
        if !path.exists() {
            continue;
        }
        let est = load_trained(name, models)?;
        let b = eval_with(&model, &test, |s| est.estimate_tke(&s.state))?;
        rows.push(format!("{name}\t{}\t{:.6e}\t{:.6e}\t-\t-", b.n, b.mse, b.mae));
    }
    println!("# model\tn\ttest_mse\ttest_mae\tgate_accuracy\tgate_purity");
    for r in rows {
        println!("{r}");
    }
    Ok(())
}

/// Campaign config, accepting keys at top level or under `[campaign]`.
pub fn load_campaign_config(path: &Path) -> Result<CampaignConfig> {
    let file = ConfigFile::load(path)?;
    CampaignConfig::from_section(file.section("campaign").unwrap_or(&file.root()))
}

fn group_rows(summary: &CampaignSummary, per_vehicle: bool) -> String {
    let mut s = format!("# model\treference\t{}\tn\tmean_delta_pct\twin_rate\tcohens_d\n", if per_vehicle { "vehicle" } else { "category" });
    for c in &summary.comparisons {
        let groups = if per_vehicle { &c.per_vehicle } else { &c.per_category };
        for g in groups {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}",
                c.model,
                c.reference,
                g.group,
                g.n,
                g.mean_delta_pct,
                g.win_rate,
                g.cohens_d.map_or("-".to_string(), |d| format!("{d:.6}"))
            );
        }
    }
    s
}

/// Runs the campaign and writes `results.tsv`, `summary.txt`,
/// `per_category.tsv` and `per_vehicle.tsv` under `out`.
pub fn cmd_campaign(config: &Path, models: &Path, out: &Path) -> Result<CampaignSummary> {
    let cfg = load_campaign_config(config)?;
    let estimators = resolve(&cfg.estimators, models)?;
    let result = campaign(&cfg, ScenarioPresets::shipped(), &estimators)?;
    let summary = result.summary(cfg.seed)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("results.tsv"), result.to_tsv())?;
    std::fs::write(out.join("summary.txt"), summary.to_text())?;
    std::fs::write(out.join("per_category.tsv"), group_rows(&summary, false))?;
    std::fs::write(out.join("per_vehicle.tsv"), group_rows(&summary, true))?;
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(summary.to_text().as_bytes());
    Ok(summary)
}

fn ingest_client(cache: Option<PathBuf>) -> Result<PowerClient> {
    let cfg = IngestConfig { cache_dir: cache, ..IngestConfig::from_env() };
    Ok(PowerClient::new(cfg)?)
}

fn cmd_infer(lat: f64, lon: f64, level: Option<usize>, altitude: Option<f64>, models: &Path, cache: Option<PathBuf>) -> Result<()> {
    let altitude = match (level, altitude) {
        (Some(l), None) => *FLIGHT_LEVELS_M
            .get(l)
            .ok_or_else(|| Error::Config(format!("level {l} outside 0..={}", FLIGHT_LEVELS_M.len() - 1)))?,
        (None, Some(h)) => h,
        _ => return Err(Error::Config("give exactly one of --level or --altitude".into())),
    };
    let model = load_pstnet(models)?;
    let client = ingest_client(cache)?;
    let (resp, col) = client.column(lat, lon, &[altitude])?;
    let (k, d) = model.forward(&col[0])?;
    let regime = Regime::from_index(argmax(&d.alpha)).expect("four experts");
    let body = json!({
        "lat": lat,
        "lon": lon,
        "altitude_m": altitude,
        "k": k,
        "k_mo": d.k_mo,
        "alpha": d.alpha,
        "regime": regime.name(),
        "source": resp.source.to_string(),
        "model_checksum": format!("{:08x}", model.checksum()),
    });
    println!("{body}");
    Ok(())
}

fn baseline_estimators(models: &Path) -> Result<Vec<EstimatorRef>> {
    ["mlp", "deep-mlp", "gbt"]
        .into_iter()
        .filter(|n| models.join(artifact_file(n).expect("known")).exists())
        .map(|n| load_trained(n, models))
        .collect()
}

fn cmd_serve(addr: SocketAddr, models: &Path, cache: Option<PathBuf>, workers: usize) -> Result<()> {
    let model = load_pstnet(models)?;
    let state = AppState::new(model, baseline_estimators(models)?, ingest_client(cache)?).with_workers(workers.max(1));
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    eprintln!("listening on http://{addr}");
    rt.block_on(crate::service::serve(Arc::new(state), addr))?;
    Ok(())
}

fn parse_bbox(s: Option<&str>) -> Result<[f64; 4]> {
    let Some(s) = s else { return Ok([-180.0, -90.0, 180.0, 90.0]) };
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Config(format!("invalid bbox '{s}'"))))
        .collect::<Result<_>>()?;
    match v[..] {
        [a, b, c, d] if a < c && b < d && a >= -180.0 && c <= 180.0 && b >= -90.0 && d <= 90.0 => Ok([a, b, c, d]),
        _ => Err(Error::Config(format!("bbox '{s}' must be min_lon,min_lat,max_lon,max_lat within range"))),
    }
}

fn cmd_export_grid(level: usize, res: f64, bbox: Option<&str>, models: &Path, cache: Option<PathBuf>, out: &Path) -> Result<()> {
    let altitude = *FLIGHT_LEVELS_M
        .get(level)
        .ok_or_else(|| Error::Config(format!("level {level} outside 0..={}", FLIGHT_LEVELS_M.len() - 1)))?;
    if !(res > 0.0 && res <= 90.0) {
        return Err(Error::Config("res must lie in (0, 90] degrees".into()));
    }
    let client = ingest_client(cache)?;
    if !client.is_offline() && res < crate::ingest::NATIVE_RESOLUTION_DEG {
        return Err(Error::Config(format!("res {res} finer than the native grid")));
    }
    let model = load_pstnet(models)?;
    let (rows, cols, cells) = grid_cells(parse_bbox(bbox)?, res);
    let (values, source) = grid_values(&model, &client, altitude, &cells)?;
    let mut s = format!(
        "# level={level} altitude_m={altitude} res={res} rows={rows} cols={cols} source={} model_checksum={:08x}\n# lat\tlon\tk\n",
        source.map(|s| s.to_string()).unwrap_or_default(),
        model.checksum()
    );
    for ((lat, lon), k) in cells.iter().zip(&values) {
        let _ = writeln!(s, "{lat}\t{lon}\t{k:.9e}");
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out, s)?;
    println!("{}\t{rows}x{cols}", out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_lines_are_single_line_and_quoted() {
        let l = error_line(3, "config", "bad\nvalue \"x\"");
        assert_eq!(l, r#"error code=3 kind=config message="bad value \"x\"""#);
        assert_eq!(l.lines().count(), 1);
    }

    #[test]
    fn codes_follow_the_error_class() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_DATA);
        assert_eq!(exit_code(&Error::Corrupt("x".into())), EXIT_DATA);
        assert_eq!(exit_code(&Error::SimAbort("x".into())), EXIT_RUNTIME);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_RUNTIME);
    }

    #[test]
    fn train_plan_reads_keys_and_rejects_unknown_ones() {
        let f = ConfigFile::parse("samples = 800\nseed = 4\nepochs = 3\nlambda_gate = 0\n").unwrap();
        let p = TrainPlan::from_section(&f.root()).unwrap();
        assert_eq!((p.samples, p.seed, p.train.epochs, p.train.seed), (800, 4, 3, 4));
        assert_eq!(p.train.lambda_gate, 0.0);
        assert!(!p.baselines);
        let bad = ConfigFile::parse("sampels = 800\n").unwrap();
        assert!(matches!(TrainPlan::from_section(&bad.root()), Err(Error::Config(_))));
    }

    #[test]
    fn missing_arguments_are_usage_errors() {
        assert_eq!(run(["pstnet", "train"]), EXIT_USAGE);
        assert_eq!(run(["pstnet", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["pstnet", "--help"]), EXIT_OK);
    }
}
