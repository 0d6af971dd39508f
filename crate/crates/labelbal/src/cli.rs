//! The experiment runner behind the `labelbal` binary: dataset generation,
//! feasibility audits, the training arms, evaluation, comparisons, and the
//! label-balancing-ratio sweep. Commands are config-file driven and write
//! machine-readable outputs; given identical config and seed every artifact
//! is byte-identical (timestamps live only in a sidecar metadata file).

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{positive_feature_covariances, random_noise_sigma};
use crate::datagen::{self, label_stats, Dataset, GenConfig, LabelStats};
use crate::error::{Error, Result};
use crate::lir;
use crate::metrics::{evaluate, ma_by_label_mean_buckets, BucketReport, EvalReport};
use crate::model::{predict_probs, HeadKind, ModelDims, ModelParams};
use crate::numkit::{RngStream, StreamId};
use crate::trainer::{
    compute_loss_centroids, finetune_classifier, harvest_banks, refit_classifier_weighted,
    train_reweighted, train_stage1, write_log_csv, FinetuneLoss, TrainConfig, TrainLog,
};

pub const DEFAULT_BUCKET_EDGES: [f64; 3] = [0.1, 0.5, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Baseline,
    Reweighted,
    Frdl,
    FrdlGoat,
    Isda,
}

impl Arm {
    pub fn name(&self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Reweighted => "reweighted",
            Arm::Frdl => "frdl",
            Arm::FrdlGoat => "frdl_goat",
            Arm::Isda => "isda",
        }
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Arm::Baseline),
            "reweighted" => Ok(Arm::Reweighted),
            "frdl" => Ok(Arm::Frdl),
            "frdl_goat" => Ok(Arm::FrdlGoat),
            "isda" => Ok(Arm::Isda),
            other => Err(Error::config(
                "config.arm",
                format!("unknown arm '{other}'"),
            )),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataSource {
    Generate { config: GenConfig },
    Csv { path: PathBuf },
}

/// Extractor/decomposer widths; input and attribute counts come from data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelShape {
    pub hidden: Vec<usize>,
    pub m_h: usize,
    pub m: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            hidden: vec![64],
            m_h: 64,
            m: 16,
        }
    }
}

/// Covariance choice for the homogeneous-augmentation arm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IsdaSigmaChoice {
    #[default]
    Empirical,
    RandomNoise,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub source: DataSource,
    #[serde(default)]
    pub model: ModelShape,
    pub train: TrainConfig,
    pub arm: Arm,
    pub eval_split: f64,
    pub out_dir: PathBuf,
    /// Master seed; overrides the generation and training seeds so one value
    /// pins the whole run.
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Extractor step size for the trajectory harvest of the frdl_goat arm
    /// (the frdl and isda arms force it to 0).
    #[serde(default = "default_harvest_alpha")]
    pub harvest_alpha: f64,
    #[serde(default = "default_isda_lambda")]
    pub isda_lambda: f64,
    #[serde(default)]
    pub isda_sigma: IsdaSigmaChoice,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_harvest_alpha() -> f64 {
    0.005
}

fn default_isda_lambda() -> f64 {
    0.5
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.eval_split > 0.0 && self.eval_split < 1.0) {
            return Err(Error::config(
                "config.eval_split",
                "eval split fraction must lie in (0, 1)",
            ));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config(
                "config.threshold",
                "threshold must lie in (0, 1)",
            ));
        }
        if !(self.harvest_alpha.is_finite() && self.harvest_alpha >= 0.0) {
            return Err(Error::config(
                "config.harvest_alpha",
                "harvest alpha must be finite and >= 0",
            ));
        }
        if !(self.isda_lambda.is_finite() && self.isda_lambda >= 0.0) {
            return Err(Error::config(
                "config.isda_lambda",
                "isda lambda must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// The stock synthetic benchmark: strongly imbalanced label means with
    /// one strong co-occurrence pair.
    pub fn default_benchmark(arm: Arm, seed: u64, out_dir: PathBuf) -> Self {
        RunConfig {
            source: DataSource::Generate {
                config: default_benchmark_gen(seed),
            },
            model: ModelShape::default(),
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            arm,
            eval_split: 0.25,
            out_dir,
            seed,
            threshold: 0.5,
            harvest_alpha: default_harvest_alpha(),
            isda_lambda: default_isda_lambda(),
            isda_sigma: IsdaSigmaChoice::Empirical,
        }
    }
}

pub fn default_benchmark_gen(seed: u64) -> GenConfig {
    GenConfig {
        n: 20_000,
        d: 32,
        c: 8,
        target_means: vec![0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.5],
        co_occurrence_rules: vec![crate::datagen::CoOccurrenceRule {
            source: 6,
            target: 7,
            rho: 0.9,
        }],
        prototype_scale: 1.0,
        noise_sigma: 0.5,
        seed,
    }
}

/// Everything a training run produces, before any file is written.
pub struct TrainOutcome {
    pub params: ModelParams,
    pub report: TrainReport,
    pub log: TrainLog,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema_version: u32,
    pub arm: Arm,
    pub seed: u64,
    pub eval: EvalReport,
    pub buckets: BucketReport,
    pub eval_label_stats: LabelStats,
}

fn load_source(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.source {
        DataSource::Generate { config } => {
            let mut gen = config.clone();
            gen.seed = cfg.seed;
            datagen::generate_synthetic(&gen)
        }
        DataSource::Csv { path } => datagen::load_csv(path),
    }
}

fn effective_train_cfg(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    }
}

/// Runs one training arm end to end and evaluates on the held-out split.
pub fn run_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let ds = load_source(cfg)?;
    let tcfg = effective_train_cfg(cfg);
    let mut split_rng = RngStream::new(cfg.seed, StreamId::Split);
    let (train, eval) = ds.split(cfg.eval_split, &mut split_rng)?;

    let dims = ModelDims {
        d: train.input_dim(),
        hidden: cfg.model.hidden.clone(),
        m_h: cfg.model.m_h,
        c: train.num_attributes(),
        m: cfg.model.m,
    };
    let mut init_rng = RngStream::new(cfg.seed, StreamId::Init);
    let p0 = ModelParams::init(&dims, &mut init_rng)?;

    let (params, head, mut log) = match cfg.arm {
        Arm::Baseline => {
            let (p, log) = train_stage1(&train, &tcfg, &p0)?;
            (p, HeadKind::Cls, log)
        }
        Arm::Reweighted => {
            let (p, log) = train_reweighted(&train, &tcfg, &p0)?;
            (p, HeadKind::Cls, log)
        }
        Arm::Frdl | Arm::FrdlGoat | Arm::Isda => {
            let (p_star, mut log) = train_stage1(&train, &tcfg, &p0)?;
            let mu = compute_loss_centroids(&p_star, &train)?;

            // Trajectory step size: 0 freezes the extractor (pure feature
            // re-sampling); the goat arm takes short constant-rate steps.
            let mut harvest_cfg = tcfg.clone();
            harvest_cfg.lr_decay = None;
            harvest_cfg.alpha = match cfg.arm {
                Arm::FrdlGoat => cfg.harvest_alpha,
                _ => 0.0,
            };
            let harvest = harvest_banks(&p_star, &train, &harvest_cfg, &mu)?;

            let loss = match cfg.arm {
                Arm::Frdl => FinetuneLoss::PlainBce,
                Arm::FrdlGoat => FinetuneLoss::Denoised,
                Arm::Isda => {
                    let sigma = match cfg.isda_sigma {
                        IsdaSigmaChoice::Empirical => {
                            positive_feature_covariances(&p_star, &train)?
                        }
                        IsdaSigmaChoice::RandomNoise => {
                            vec![random_noise_sigma(dims.m, cfg.seed); dims.c]
                        }
                    };
                    FinetuneLoss::IsdaMargin {
                        lambda: vec![cfg.isda_lambda; dims.c],
                        sigma,
                    }
                }
                _ => unreachable!(),
            };
            let mut p = p_star;
            let ft_log = finetune_classifier(&harvest.banks, &mu, &tcfg, &mut p, &loss)?;
            log.extend(ft_log);
            (p, HeadKind::Ft, log)
        }
    };

    let probs = predict_probs(&params, &eval, head)?;
    let eval_report = evaluate(&probs, &eval.y, cfg.threshold)?;
    let eval_stats = label_stats(&eval);
    let buckets = ma_by_label_mean_buckets(&eval_report, &eval_stats, &DEFAULT_BUCKET_EDGES, None)?;
    log.shrink_to_fit();
    Ok(TrainOutcome {
        params,
        report: TrainReport {
            schema_version: crate::SCHEMA_VERSION,
            arm: cfg.arm,
            seed: cfg.seed,
            eval: eval_report,
            buckets,
            eval_label_stats: eval_stats,
        },
        log,
    })
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("encode {}: {e}", path.display())))?;
    std::fs::write(path, json)?;
    Ok(())
}

fn write_run_meta(out_dir: &Path, started: std::time::SystemTime, what: &str) -> Result<()> {
    let elapsed = started.elapsed().unwrap_or_default();
    let meta = serde_json::json!({
        "schema_version": crate::SCHEMA_VERSION,
        "command": what,
        "unix_time": started
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap_or_default()
            .as_secs(),
        "wall_seconds": elapsed.as_secs_f64(),
    });
    write_json(&meta, &out_dir.join("run_meta.json"))
}

/// `train` subcommand: checkpoints, training log, evaluation report.
pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let started = std::time::SystemTime::now();
    std::fs::create_dir_all(&cfg.out_dir)?;
    let outcome = run_train(cfg)?;
    outcome.params.save(&cfg.out_dir.join("checkpoint.json"))?;
    write_log_csv(&outcome.log, &cfg.out_dir.join("train_log.csv"))?;
    write_json(&outcome.report, &cfg.out_dir.join("report.json"))?;
    write_bucket_csv(&outcome.report.buckets, &cfg.out_dir.join("buckets.csv"))?;
    write_run_meta(&cfg.out_dir, started, "train")?;
    Ok(())
}

fn write_bucket_csv(buckets: &BucketReport, path: &Path) -> Result<()> {
    let mut out = String::from("lo,hi,attribute_count,mean_ma\n");
    for e in &buckets.curve {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.lo, e.hi, e.attribute_count, e.mean_ma
        ));
    }
    out.push_str("attribute,label_mean,imbalance,ma\n");
    for r in &buckets.ranked {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.attribute, r.label_mean, r.imbalance, r.ma
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// `gen` subcommand: dataset CSV plus label statistics JSON.
pub fn cmd_gen(gen: &GenConfig, data_path: &Path, stats_path: &Path) -> Result<()> {
    let ds = datagen::generate_synthetic(gen)?;
    datagen::save_csv(&ds, data_path)?;
    write_json(&label_stats(&ds), stats_path)?;
    Ok(())
}

/// `feasibility` subcommand: the balanced-sampling audit on a dataset's
/// label columns.
pub fn cmd_feasibility(data_path: &Path, eps: Option<f64>, out_path: &Path) -> Result<()> {
    let ds = datagen::load_csv(data_path)?;
    let eps = eps.unwrap_or_else(|| lir::default_eps(ds.len()));
    let result = lir::check_lir_feasibility(&ds.y, eps)?;
    write_json(&result, out_path)?;
    Ok(())
}

/// `eval` subcommand: score a checkpoint on a dataset CSV.
pub fn cmd_eval(
    checkpoint: &Path,
    data_path: &Path,
    head: HeadKind,
    threshold: f64,
    out_path: &Path,
) -> Result<()> {
    let params = ModelParams::load(checkpoint)?;
    let ds = datagen::load_csv(data_path)?;
    if ds.input_dim() != params.dims.d || ds.num_attributes() != params.dims.c {
        return Err(Error::Dim(format!(
            "dataset is {}x{} but checkpoint expects d={}, c={}",
            ds.input_dim(),
            ds.num_attributes(),
            params.dims.d,
            params.dims.c
        )));
    }
    let probs = predict_probs(&params, &ds, head)?;
    let report = evaluate(&probs, &ds.y, threshold)?;
    write_json(&report, out_path)?;
    Ok(())
}

/// `compare` subcommand: per-attribute mA deltas of each report against the
/// first, as CSV plus a text table on stdout.
pub fn cmd_compare(report_paths: &[PathBuf], out_path: &Path) -> Result<String> {
    if report_paths.len() < 2 {
        return Err(Error::config(
            "config.compare_arity",
            "compare needs at least two reports",
        ));
    }
    let mut reports = Vec::new();
    for path in report_paths {
        let text = std::fs::read_to_string(path)?;
        let report: TrainReport = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        reports.push(report);
    }
    let c = reports[0].eval.per_attribute_ma.len();
    if reports.iter().any(|r| r.eval.per_attribute_ma.len() != c) {
        return Err(Error::config(
            "config.attribute_count",
            "reports disagree on attribute count",
        ));
    }

    let mut csv = String::from("row");
    for r in &reports {
        csv.push_str(&format!(",{}", r.arm.name()));
    }
    for r in &reports[1..] {
        csv.push_str(&format!(",delta_{}", r.arm.name()));
    }
    csv.push('\n');
    let mut push_row = |label: String, values: Vec<f64>| {
        csv.push_str(&label);
        for v in &values {
            csv.push_str(&format!(",{v}"));
        }
        for v in &values[1..] {
            csv.push_str(&format!(",{}", v - values[0]));
        }
        csv.push('\n');
    };
    push_row(
        "mA".to_string(),
        reports.iter().map(|r| r.eval.ma).collect(),
    );
    push_row(
        "F1".to_string(),
        reports.iter().map(|r| r.eval.f1).collect(),
    );
    for k in 0..c {
        push_row(
            format!("attr_{k}_mA"),
            reports.iter().map(|r| r.eval.per_attribute_ma[k]).collect(),
        );
    }
    std::fs::write(out_path, &csv)?;

    let mut pretty = String::new();
    pretty.push_str(&format!("{:<12}", "row"));
    for r in &reports {
        pretty.push_str(&format!("{:>12}", r.arm.name()));
    }
    pretty.push('\n');
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        pretty.push_str(&format!("{:<12}", fields[0]));
        for f in &fields[1..=reports.len()] {
            let v: f64 = f.parse().unwrap_or(f64::NAN);
            pretty.push_str(&format!("{v:>12.4}"));
        }
        pretty.push('\n');
    }
    Ok(pretty)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub mode: &'static str,
    pub ma: f64,
}

/// `sweep-gamma`: trains one extractor per gamma, then scores two classifier
/// retrains on its frozen features: balanced feature re-sampling (`rs`) and
/// weighted-BCE (`rw`).
pub fn run_sweep_gamma(cfg: &RunConfig, gammas: &[f64]) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if gammas.is_empty() {
        return Err(Error::config("config.gammas", "gamma list is empty"));
    }
    if gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(Error::config(
            "config.gammas",
            "gamma values must lie in [0, 1]",
        ));
    }
    let threads = max_threads();
    let mut results: Vec<Option<Result<[SweepRow; 2]>>> = (0..gammas.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<[SweepRow; 2]>>>> = (0..gammas.len())
        .map(|_| std::sync::Mutex::new(None))
        .collect();
    std::thread::scope(|scope| {
        for _ in 0..threads.min(gammas.len()) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if idx >= gammas.len() {
                    break;
                }
                let out = sweep_one_gamma(cfg, gammas[idx]);
                *slots[idx].lock().unwrap() = Some(out);
            });
        }
    });
    for (slot, result) in slots.into_iter().zip(results.iter_mut()) {
        *result = slot.into_inner().unwrap();
    }
    let mut rows = Vec::with_capacity(2 * gammas.len());
    for r in results {
        let pair = r.expect("sweep slot filled")?;
        rows.extend(pair);
    }
    Ok(rows)
}

fn sweep_one_gamma(cfg: &RunConfig, gamma: f64) -> Result<[SweepRow; 2]> {
    let ds = load_source(cfg)?;
    let tcfg = TrainConfig {
        gamma,
        ..effective_train_cfg(cfg)
    };
    let mut split_rng = RngStream::new(cfg.seed, StreamId::Split);
    let (train, eval) = ds.split(cfg.eval_split, &mut split_rng)?;
    let dims = ModelDims {
        d: train.input_dim(),
        hidden: cfg.model.hidden.clone(),
        m_h: cfg.model.m_h,
        c: train.num_attributes(),
        m: cfg.model.m,
    };
    let mut init_rng = RngStream::new(cfg.seed, StreamId::Init);
    let p0 = ModelParams::init(&dims, &mut init_rng)?;

    // gamma = 0 is instance-balanced training up to a constant loss scale.
    let (extractor, _) = if gamma == 0.0 {
        train_stage1(&train, &tcfg, &p0)?
    } else {
        train_reweighted(&train, &tcfg, &p0)?
    };

    // rs: balanced feature re-sampling fine-tune on frozen features.
    let mu = compute_loss_centroids(&extractor, &train)?;
    let mut frozen_cfg = tcfg.clone();
    frozen_cfg.alpha = 0.0;
    frozen_cfg.lr_decay = None;
    let harvest = harvest_banks(&extractor, &train, &frozen_cfg, &mu)?;
    let mut p_rs = extractor.clone();
    finetune_classifier(
        &harvest.banks,
        &mu,
        &tcfg,
        &mut p_rs,
        &FinetuneLoss::PlainBce,
    )?;
    let probs = predict_probs(&p_rs, &eval, HeadKind::Ft)?;
    let rs_ma = evaluate(&probs, &eval.y, cfg.threshold)?.ma;

    // rw: weighted-BCE classifier retrain on the same frozen features.
    let mut p_rw = extractor.clone();
    refit_classifier_weighted(&train, &tcfg, &mut p_rw, 1.0)?;
    let probs = predict_probs(&p_rw, &eval, HeadKind::Ft)?;
    let rw_ma = evaluate(&probs, &eval.y, cfg.threshold)?.ma;

    Ok([
        SweepRow {
            gamma,
            mode: "rs",
            ma: rs_ma,
        },
        SweepRow {
            gamma,
            mode: "rw",
            ma: rw_ma,
        },
    ])
}

pub fn cmd_sweep_gamma(cfg: &RunConfig, gammas: &[f64], out_path: &Path) -> Result<()> {
    let rows = run_sweep_gamma(cfg, gammas)?;
    let mut csv = String::from("gamma,mode,ma\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.gamma, r.mode, r.ma));
    }
    std::fs::write(out_path, csv)?;
    Ok(())
}

/// Thread cap for sweep fan-out: `LABELBAL_THREADS` or available parallelism.
fn max_threads() -> usize {
    std::env::var("LABELBAL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(1)
        })
}

/// Prints the JSON error object the CLI emits on stderr.
pub fn report_error(err: &Error) -> i32 {
    let obj = serde_json::json!({
        "error": err.code(),
        "message": err.to_string(),
    });
    let _ = writeln!(std::io::stderr(), "{obj}");
    err.exit_code()
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Error::config("config.parse", format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

pub fn load_gen_config(path: &Path) -> Result<GenConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: GenConfig = serde_json::from_str(&text)
        .map_err(|e| Error::config("config.parse", format!("{}: {e}", path.display())))?;
    Ok(cfg)
}
