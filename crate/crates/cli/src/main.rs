mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use xlalign::diagnostics::default_threshold;
use xlalign::io::{read_embeddings, read_map, write_embeddings, write_map};
use xlalign::{
    dilation_report, evaluate, fit, ortho_report_with_threshold, split, EmbeddingSet, FitConfig, FitMethod, LinearMap,
    PairedEmbeddings, SplitSpec, SynthSpec, TransformKind,
};

use report::{render, Cell, Format, Table};

/// Fit and audit linear maps between sentence-embedding spaces.
#[derive(Parser)]
#[command(name = "xlalign", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a map from source to target embeddings.
    Fit(FitArgs),
    /// Score a map on paired embeddings.
    Eval(EvalArgs),
    /// Report how far the map's columns are from mutually orthogonal.
    Ortho(OrthoArgs),
    /// Report how uniform the map's column norms are.
    Dilation(MapArgs),
    /// Generate synthetic pairs with a known map.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ols,
    Sgd,
    Procrustes,
}

impl From<Method> for FitMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Ols => FitMethod::Ols,
            Method::Sgd => FitMethod::DistanceSgd,
            Method::Procrustes => FitMethod::Procrustes,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    val_count: usize,
    #[arg(long, default_value_t = 0)]
    test_count: usize,
    /// Seed for the split and for SGD shuffling.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file with fitting hyperparameters; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Scale every embedding to unit length before fitting.
    #[arg(long)]
    normalize: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Subset {
    /// Rows recorded as the test split at fit time, or all rows if none were.
    Test,
    All,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    subset: Subset,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct OrthoArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Flag column pairs whose |cosine| exceeds this.
    #[arg(long, value_parser = parse_threshold)]
    threshold: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Orthogonal,
    Linear,
    Identity,
}

impl From<Kind> for TransformKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Orthogonal => TransformKind::Orthogonal,
            Kind::Linear => TransformKind::GeneralLinear,
            Kind::Identity => TransformKind::Identity,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0, value_parser = parse_non_negative)]
    noise: f64,
    /// Scale of the random shift `b`.
    #[arg(long, default_value_t = 1.0, value_parser = parse_non_negative)]
    shift: f64,
    #[arg(long, value_enum, default_value = "orthogonal")]
    kind: Kind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "src")]
    src_lang: String,
    #[arg(long, default_value = "tgt")]
    tgt_lang: String,
    #[arg(long)]
    out_src: PathBuf,
    #[arg(long)]
    out_tgt: PathBuf,
    #[arg(long)]
    out_truth: PathBuf,
}

fn parse_finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("must be finite".into())
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    parse_finite(s).and_then(|v| if v > 0.0 { Ok(v) } else { Err("must be positive".into()) })
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    parse_finite(s).and_then(|v| {
        if v >= 0.0 {
            Ok(v)
        } else {
            Err("must be non-negative".into())
        }
    })
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    parse_finite(s).and_then(|v| {
        if (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            Err("must lie in [0, 1]".into())
        }
    })
}

fn load_pairs(src: &Path, tgt: &Path, normalize: bool) -> Result<PairedEmbeddings> {
    let load = |p: &Path| -> Result<EmbeddingSet> {
        let set: EmbeddingSet = read_embeddings(p)?;
        Ok(if normalize {
            set.l2_normalized()
                .with_context(|| format!("normalizing {}", p.display()))?
        } else {
            set
        })
    };
    Ok(PairedEmbeddings::new(load(src)?, load(tgt)?)?)
}

fn load_config(args: &FitArgs) -> Result<FitConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => FitConfig::default(),
    };
    config.method = args.method.into();
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.max_epochs {
        config.max_epochs = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.patience {
        config.patience = v;
    }
    if let Some(v) = args.tolerance {
        config.tolerance = v;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let config = load_config(&args)?;
    if config.method == FitMethod::DistanceSgd && args.val_count == 0 {
        bail!("--method sgd needs a validation split (--val-count > 0)");
    }
    let pairs = load_pairs(&args.src, &args.tgt, args.normalize)?;
    let parts = split(&pairs, &SplitSpec::new(args.test_count, args.val_count, config.seed))?;
    log::info!(
        "fitting {} on {} pairs (val {}, test {}), dim {}",
        config.method.name(),
        parts.train.count(),
        parts.val.count(),
        parts.test.count(),
        pairs.dim()
    );
    let val = (parts.val.count() > 0).then_some(&parts.val);
    let result = fit(&parts.train, val, &config)?;
    if result.rank_deficient() {
        log::warn!("training problem is rank deficient; returned the minimum-norm solution");
    }

    let mut map = result.map.clone();
    let p = &mut map.provenance;
    p.training_set = Some(format!("{}|{}", args.src.display(), args.tgt.display()));
    p.timestamp = Some(humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string());
    p.set("source_lang", pairs.source().lang());
    p.set("target_lang", pairs.target().lang());
    p.set("normalized", args.normalize);
    p.set("config", serde_json::to_value(&config)?);
    p.set(
        "split",
        json!({
            "seed": config.seed,
            "n": pairs.count(),
            "val_count": args.val_count,
            "test_count": args.test_count,
            "val_indices": parts.indices.val,
            "test_indices": parts.indices.test,
        }),
    );
    write_map(&map, &args.out)?;

    let summary = json!({
        "method": config.method.name(),
        "train_loss": result.train_loss,
        "val_loss": result.val_loss,
        "epochs_run": result.epochs_run,
        "converged": result.converged,
        "rank_deficient": result.rank_deficient(),
        "n_train": parts.train.count(),
        "n_val": parts.val.count(),
        "n_test": parts.test.count(),
    });
    println!("{summary}");
    Ok(())
}

/// Test indices recorded by `fit`, if any.
fn recorded_test_indices(map: &LinearMap) -> Result<Option<Vec<usize>>> {
    let Some(indices) = map.provenance.get("split").and_then(|s| s.get("test_indices")) else {
        return Ok(None);
    };
    let indices: Vec<usize> =
        serde_json::from_value(indices.clone()).context("malformed test_indices in map metadata")?;
    Ok((!indices.is_empty()).then_some(indices))
}

fn recorded_flag(map: &LinearMap, key: &str) -> bool {
    map.provenance.get(key).and_then(Value::as_bool).unwrap_or(false)
}

fn recorded_lang(map: &LinearMap) -> String {
    map.provenance
        .get("target_lang")
        .and_then(Value::as_str)
        .unwrap_or("-")
        .to_owned()
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let map: LinearMap = read_map(&args.map)?;
    let pairs = load_pairs(&args.src, &args.tgt, recorded_flag(&map, "normalized"))?;
    let test = match (args.subset, recorded_test_indices(&map)?) {
        (Subset::Test, Some(indices)) => {
            if let Some(&bad) = indices.iter().find(|&&i| i >= pairs.count()) {
                bail!(
                    "recorded test index {bad} is out of range for {} pairs; were these the files the map was fit on?",
                    pairs.count()
                );
            }
            pairs.select_rows(&indices)
        }
        _ => pairs,
    };
    let r = evaluate(&map, &test)?;
    let table = Table {
        lang: test.target().lang(),
        columns: &["dD", "dC", "fD", "fC", "n"],
        values: vec![
            Cell::Real(r.d_d),
            Cell::Real(r.d_c),
            Cell::Real(r.f_d),
            Cell::Real(r.f_c),
            Cell::Count(r.n),
        ],
    };
    print!("{}", render(args.format, &r, &table));
    Ok(())
}

fn cmd_ortho(args: OrthoArgs) -> Result<()> {
    let map: LinearMap = read_map(&args.map.map)?;
    let r = ortho_report_with_threshold(&map, args.threshold.unwrap_or_else(default_threshold))?;
    let lang = recorded_lang(&map);
    let table = Table {
        lang: &lang,
        columns: &["mean_abs_p", "sigma_p", "min_p", "max_p", "flagged"],
        values: vec![
            Cell::Real(r.mean_abs_p),
            Cell::Real(r.sigma_p),
            Cell::Real(r.min_p),
            Cell::Real(r.max_p),
            Cell::Count(r.flagged_pairs),
        ],
    };
    print!("{}", render(args.map.format, &r, &table));
    Ok(())
}

fn cmd_dilation(args: MapArgs) -> Result<()> {
    let map: LinearMap = read_map(&args.map)?;
    let r = dilation_report(&map);
    let lang = recorded_lang(&map);
    let table = Table {
        lang: &lang,
        columns: &["alpha_bar", "nstd", "range", "min_alpha", "max_alpha"],
        values: vec![
            Cell::Real(r.alpha_bar),
            Cell::Real(r.nstd),
            Cell::Real(r.range),
            Cell::Real(r.min_alpha),
            Cell::Real(r.max_alpha),
        ],
    };
    print!("{}", render(args.format, &r, &table));
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec::new(args.n as usize, args.dim as usize, args.kind.into(), args.seed)
        .alpha(args.alpha)
        .noise(args.noise)
        .shift_scale(args.shift)
        .langs(&args.src_lang, &args.tgt_lang);
    let (pairs, truth) = xlalign::generate::<f64>(&spec)?;
    write_embeddings(pairs.source(), &args.out_src)?;
    write_embeddings(pairs.target(), &args.out_tgt)?;
    write_map(&truth, &args.out_truth)?;
    println!("{}", json!({ "n": pairs.count(), "dim": pairs.dim(), "spec": spec }));
    Ok(())
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("XLALIGN_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("XLALIGN_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ortho(a) => cmd_ortho(a),
        Command::Dilation(a) => cmd_dilation(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
