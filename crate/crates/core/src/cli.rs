//! `satfuse` command line: argument parsing and subcommand dispatch.
//!
//! Every subcommand echoes its effective settings to stderr as
//! `key = value` lines, writes outputs atomically, and reports failures as
//! `error[<category>]: <message>` with exit code 1. Usage errors exit with 2.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{self, LabeledSet};
use crate::error::{bail, Result};
use crate::eval;
use crate::features::{self, catalog, FeatureScaler, FeatureTable};
use crate::io::write_atomic;
use crate::model::{
    predict_labels, predict_proba, train, Adadelta, Checkpoint, FusionNet, ModelConfig,
    ModelInputs,
};
use crate::ranking;

#[derive(Debug, Parser)]
#[command(name = "satfuse", version, about = "Texture features fused with a CNN for 4-band satellite patches")]
pub struct Cli {
    /// Seed for data synthesis, splitting and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Omit wall-clock data from outputs so reruns are byte-identical.
    #[arg(long, global = true)]
    pub reproducible: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a SATBIN file from CSV pixel rows and labels.
    Convert(ConvertArgs),
    /// Generate the synthetic texture dataset.
    Synth(SynthArgs),
    /// Split a SATBIN file into stratified train and test parts.
    Split(SplitArgs),
    /// Compute handcrafted features for every patch.
    Extract(ExtractArgs),
    /// Rank features by distribution separability.
    Rank(RankArgs),
    /// Train the network and write a checkpoint.
    Train(TrainArgs),
    /// Predict class probabilities with a checkpoint.
    Predict(PredictArgs),
    /// Accuracy and confusion matrix of a prediction file.
    Eval(EvalArgs),
    /// McNemar test between two prediction files.
    Mcnemar(McnemarArgs),
    /// Separability summary of raw pixels and features.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// CSV with one row of height*width*4 byte values per patch.
    #[arg(long)]
    pub images: PathBuf,
    /// CSV with a class index or a one-hot row per patch.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = dataset::PATCH_SIDE)]
    pub height: usize,
    #[arg(long, default_value_t = dataset::PATCH_SIDE)]
    pub width: usize,
    /// Class count; inferred from the labels when omitted.
    #[arg(long)]
    pub classes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Fraction of each class sent to the train output.
    #[arg(long, default_value_t = 0.8)]
    pub fraction: f64,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Emit the full 150-feature catalog.
    #[arg(long, conflicts_with = "selected")]
    pub all: bool,
    /// Emit the 22 ranked features (default).
    #[arg(long)]
    pub selected: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = ranking::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub features_train: Option<PathBuf>,
    #[arg(long)]
    pub features_test: Option<PathBuf>,
    /// `key = value` model configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` settings applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the confusion matrix.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McnemarArgs {
    #[arg(long)]
    pub pred_a: PathBuf,
    #[arg(long)]
    pub pred_b: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Skip the continuity correction.
    #[arg(long)]
    pub uncorrected: bool,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Feature CSV for the same patches, for the feature row.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Dataset name written in the first column.
    #[arg(long, default_value = "dataset")]
    pub name: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn echo(pairs: &[(&str, String)]) {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    eprint!("{s}");
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn show_opt(p: &Option<PathBuf>) -> String {
    p.as_deref().map(show).unwrap_or_else(|| "-".to_string())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| crate::Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_set(path: &Path) -> Result<LabeledSet> {
    let bytes = std::fs::read(path)
        .map_err(|e| crate::Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    LabeledSet::from_satbin(&bytes)
}

fn read_table(path: &Path) -> Result<FeatureTable> {
    FeatureTable::from_csv(&read_text(path)?)
}

/// Columns of `table` named by `names`, in that order.
fn project(table: &FeatureTable, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let idx = names
        .iter()
        .map(|n| match table.names.iter().position(|m| m == n) {
            Some(i) => Ok(i),
            None => bail!(Argument, "feature '{n}' missing from feature CSV"),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(table.rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect())
}

fn check_alignment(table: &FeatureTable, set: &LabeledSet, what: &str) -> Result<()> {
    if table.rows.len() != set.len() {
        bail!(Argument, "{what}: {} feature rows for {} patches", table.rows.len(), set.len());
    }
    let same = table.labels.iter().zip(set.labels()).all(|(&a, &b)| a == b as usize);
    if !same {
        bail!(Argument, "{what}: feature labels disagree with the patch labels");
    }
    Ok(())
}

/// Feature columns fused by the model: the 22 ranked features when the CSV
/// carries them and the model fuses 22, otherwise every CSV column.
fn fused_names(table: &FeatureTable, width: usize) -> Result<Vec<String>> {
    let ranked = catalog::selected_names();
    if width == ranked.len() && ranked.iter().all(|n| table.names.contains(n)) {
        return Ok(ranked.to_vec());
    }
    if table.width() != width {
        bail!(
            Argument,
            "model fuses {width} features, feature CSV has {}",
            table.width()
        );
    }
    Ok(table.names.clone())
}

fn read_predictions(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().unwrap_or("");
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let (Some(ii), Some(pi)) = (
        cols.iter().position(|&c| c == "index"),
        cols.iter().position(|&c| c == "pred"),
    ) else {
        bail!(Format, "{}: prediction CSV needs 'index' and 'pred' columns", path.display());
    };
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |i: usize| -> Result<usize> {
            cells
                .get(i)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| crate::Error::Format(format!("{}: bad row {}", path.display(), n + 1)))
        };
        rows.push((parse(ii)?, parse(pi)?));
    }
    rows.sort_unstable();
    if rows.iter().enumerate().any(|(i, &(idx, _))| idx != i) {
        bail!(Format, "{}: indices must cover 0..{} once each", path.display(), rows.len());
    }
    Ok(rows.into_iter().map(|(_, p)| p).collect())
}

fn labels_of(set: &LabeledSet) -> Vec<usize> {
    set.labels().iter().map(|&l| l as usize).collect()
}

fn run_convert(a: &ConvertArgs) -> Result<()> {
    echo(&[
        ("command", "convert".into()),
        ("images", show(&a.images)),
        ("labels", show(&a.labels)),
        ("out", show(&a.out)),
        ("height", a.height.to_string()),
        ("width", a.width.to_string()),
        ("classes", a.classes.map_or("auto".into(), |k| k.to_string())),
    ]);
    let set = dataset::convert_csv(
        &read_text(&a.images)?,
        &read_text(&a.labels)?,
        a.height,
        a.width,
        a.classes,
    )?;
    dataset::write_satbin(&set, &a.out)
}

fn run_synth(a: &SynthArgs, seed: u64) -> Result<()> {
    echo(&[
        ("command", "synth".into()),
        ("out", show(&a.out)),
        ("classes", a.classes.to_string()),
        ("per_class", a.per_class.to_string()),
        ("seed", seed.to_string()),
    ]);
    let set = dataset::synth_generate(a.per_class, a.classes, seed)?;
    dataset::write_satbin(&set, &a.out)
}

fn run_split(a: &SplitArgs, seed: u64) -> Result<()> {
    echo(&[
        ("command", "split".into()),
        ("in", show(&a.input)),
        ("fraction", a.fraction.to_string()),
        ("train_out", show(&a.train_out)),
        ("test_out", show(&a.test_out)),
        ("seed", seed.to_string()),
    ]);
    let set = read_set(&a.input)?;
    let (tr, te) = dataset::split(&set, a.fraction, seed)?;
    dataset::write_satbin(&tr, &a.train_out)?;
    dataset::write_satbin(&te, &a.test_out)
}

fn run_extract(a: &ExtractArgs) -> Result<()> {
    echo(&[
        ("command", "extract".into()),
        ("in", show(&a.input)),
        ("out", show(&a.out)),
        ("features", if a.all { "all" } else { "selected" }.into()),
        ("catalog_version", features::CATALOG_VERSION.to_string()),
    ]);
    let set = read_set(&a.input)?;
    let table = features::extract_set(&set, !a.all)?;
    write_atomic(&a.out, table.to_csv().as_bytes())
}

fn run_rank(a: &RankArgs) -> Result<()> {
    echo(&[
        ("command", "rank".into()),
        ("features", show(&a.features)),
        ("threshold", a.threshold.to_string()),
        ("out", show(&a.out)),
    ]);
    let table = read_table(&a.features)?;
    let k = table.labels.iter().max().map_or(0, |m| m + 1);
    let ranked = ranking::rank_features(&table.names, &table.rows, &table.labels, k, a.threshold)?;
    write_atomic(&a.out, ranked.to_csv().as_bytes())
}

fn run_train(a: &TrainArgs, cli: &Cli) -> Result<()> {
    let train_set = read_set(&a.train)?;
    let test_set = a.test.as_deref().map(read_set).transpose()?;
    let mut cfg = match &a.config {
        Some(p) => ModelConfig::parse(&read_text(p)?)?,
        None => ModelConfig::default(),
    };
    for kv in &a.overrides {
        let Some((k, v)) = kv.split_once('=') else {
            bail!(Config, "--set expects key=value, got '{kv}'");
        };
        cfg.set(k, v)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.reproducible {
        cfg.reproducible = true;
    }
    let (h, w) = train_set.patch_dims().unwrap_or((cfg.input_height, cfg.input_width));
    cfg.input_height = h;
    cfg.input_width = w;
    cfg.input_channels = dataset::CHANNELS;
    cfg.num_classes = train_set.num_classes();
    cfg.validate()?;
    let mut pairs = vec![
        ("command", "train".to_string()),
        ("train", show(&a.train)),
        ("test", show_opt(&a.test)),
        ("features_train", show_opt(&a.features_train)),
        ("features_test", show_opt(&a.features_test)),
        ("out", show(&a.out)),
        ("report", show_opt(&a.report)),
    ];
    let cfg_text = cfg.to_text();
    let cfg_pairs: Vec<(String, String)> = cfg_text
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    for (k, v) in &cfg_pairs {
        pairs.push((k.as_str(), v.clone()));
    }
    echo(&pairs);

    if let Some(t) = &test_set {
        if t.num_classes() != train_set.num_classes() {
            bail!(Argument, "train has {} classes, test has {}", train_set.num_classes(), t.num_classes());
        }
    }
    let (scaler, names, train_feats, test_feats) = if cfg.fused_feature_width > 0 {
        let Some(ftr_path) = &a.features_train else {
            bail!(Argument, "fused model needs --features-train");
        };
        let ftr = read_table(ftr_path)?;
        check_alignment(&ftr, &train_set, "train")?;
        let names = fused_names(&ftr, cfg.fused_feature_width)?;
        let raw = project(&ftr, &names)?;
        let scaler = FeatureScaler::fit(&raw)?;
        let train_feats = scaler.transform(&raw)?;
        let test_feats = match (&test_set, &a.features_test) {
            (Some(t), Some(p)) => {
                let fte = read_table(p)?;
                check_alignment(&fte, t, "test")?;
                Some(scaler.transform(&project(&fte, &names)?)?)
            }
            (Some(_), None) => bail!(Argument, "fused model with --test needs --features-test"),
            _ => None,
        };
        (Some(scaler), names, Some(train_feats), test_feats)
    } else {
        (None, Vec::new(), None, None)
    };

    let mut net = FusionNet::<f32>::build(&cfg)?;
    let mut optimizer = Adadelta::new(&net)?;
    let train_inputs = ModelInputs::new(&train_set, train_feats.as_deref())?;
    let test_inputs = test_set
        .as_ref()
        .map(|t| ModelInputs::new(t, test_feats.as_deref()))
        .transpose()?;
    let report = train(&mut net, &mut optimizer, &train_inputs, test_inputs.as_ref())?;
    let ck = Checkpoint {
        net,
        optimizer,
        scaler,
        feature_names: names,
    };
    ck.save(&a.out)?;
    if let Some(p) = &a.report {
        write_atomic(p, report.to_csv().as_bytes())?;
    }
    Ok(())
}

fn run_predict(a: &PredictArgs) -> Result<()> {
    echo(&[
        ("command", "predict".into()),
        ("ckpt", show(&a.ckpt)),
        ("in", show(&a.input)),
        ("features", show_opt(&a.features)),
        ("out", show(&a.out)),
    ]);
    let ck = Checkpoint::<f32>::load(&a.ckpt)?;
    let set = read_set(&a.input)?;
    let cfg = ck.net.config();
    if set.num_classes() != cfg.num_classes {
        bail!(
            Version,
            "checkpoint predicts {} classes, data has {}",
            cfg.num_classes,
            set.num_classes()
        );
    }
    if set.patch_dims().is_some_and(|d| d != (cfg.input_height, cfg.input_width)) {
        bail!(Version, "checkpoint expects {}x{} patches", cfg.input_height, cfg.input_width);
    }
    let feats = if cfg.fused_feature_width > 0 {
        let Some(p) = &a.features else {
            bail!(Argument, "checkpoint fuses features; pass --features");
        };
        let table = read_table(p)?;
        check_alignment(&table, &set, "predict")?;
        let raw = project(&table, &ck.feature_names)?;
        let scaler = ck
            .scaler
            .as_ref()
            .ok_or_else(|| crate::Error::Version("checkpoint lacks a feature scaler".into()))?;
        Some(scaler.transform(&raw)?)
    } else {
        None
    };
    let inputs = ModelInputs::<f32>::new(&set, feats.as_deref())?;
    let probs = predict_proba(&ck.net, &inputs)?;
    let preds = predict_labels(&probs);
    write_atomic(&a.out, predictions_csv(&preds, &probs).as_bytes())
}

/// `index,pred,p_0..p_{K-1}`.
pub fn predictions_csv(preds: &[usize], probs: &[Vec<f64>]) -> String {
    let k = probs.first().map_or(0, |r| r.len());
    let mut s = String::from("index,pred");
    for j in 0..k {
        let _ = write!(s, ",p_{j}");
    }
    s.push('\n');
    for (i, (p, row)) in preds.iter().zip(probs).enumerate() {
        let _ = write!(s, "{i},{p}");
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    echo(&[
        ("command", "eval".into()),
        ("pred", show(&a.pred)),
        ("labels", show(&a.labels)),
        ("out", show(&a.out)),
        ("confusion", show_opt(&a.confusion)),
    ]);
    let preds = read_predictions(&a.pred)?;
    let set = read_set(&a.labels)?;
    let labels = labels_of(&set);
    let acc = eval::accuracy(&preds, &labels)?;
    let cm = eval::confusion(&preds, &labels, set.num_classes())?;
    let report = format!("accuracy,correct,total\n{acc},{},{}\n", cm.trace(), cm.total());
    write_atomic(&a.out, report.as_bytes())?;
    if let Some(p) = &a.confusion {
        write_atomic(p, cm.to_csv().as_bytes())?;
    }
    Ok(())
}

fn run_mcnemar(a: &McnemarArgs) -> Result<()> {
    echo(&[
        ("command", "mcnemar".into()),
        ("pred_a", show(&a.pred_a)),
        ("pred_b", show(&a.pred_b)),
        ("labels", show(&a.labels)),
        ("continuity_corrected", (!a.uncorrected).to_string()),
        ("out", show_opt(&a.out)),
    ]);
    let pa = read_predictions(&a.pred_a)?;
    let pb = read_predictions(&a.pred_b)?;
    let labels = labels_of(&read_set(&a.labels)?);
    let r = eval::mcnemar(&pa, &pb, &labels, !a.uncorrected)?;
    match &a.out {
        Some(p) => write_atomic(p, r.to_csv().as_bytes()),
        None => {
            print!("{}", r.to_csv());
            Ok(())
        }
    }
}

fn run_stats(a: &StatsArgs) -> Result<()> {
    echo(&[
        ("command", "stats".into()),
        ("in", show(&a.input)),
        ("features", show_opt(&a.features)),
        ("name", a.name.clone()),
        ("out", show(&a.out)),
    ]);
    let set = read_set(&a.input)?;
    let feats = match &a.features {
        Some(p) => {
            let t = read_table(p)?;
            check_alignment(&t, &set, "stats")?;
            Some(t.rows)
        }
        None => None,
    };
    let rows = eval::separability_report(&a.name, &set, feats.as_deref())?;
    write_atomic(&a.out, eval::separability_csv(&rows).as_bytes())
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    if cli.threads > 0 {
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let seed = cli.seed.unwrap_or(0);
    eprintln!("seed = {seed}\nreproducible = {}\nthreads = {}", cli.reproducible, cli.threads);
    match &cli.command {
        Command::Convert(a) => run_convert(a),
        Command::Synth(a) => run_synth(a, seed),
        Command::Split(a) => run_split(a, seed),
        Command::Extract(a) => run_extract(a),
        Command::Rank(a) => run_rank(a),
        Command::Train(a) => run_train(a, cli),
        Command::Predict(a) => run_predict(a),
        Command::Eval(a) => run_eval(a),
        Command::Mcnemar(a) => run_mcnemar(a),
        Command::Stats(a) => run_stats(a),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn dispatch<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            1
        }
    }
}
