//! `specdeg`: command-line front end for the hyperspectral degradation
//! toolkit. Synthesizes scenes, applies degradation recipes, computes the
//! metric registry, trains the degradation classifier, ranks metrics, routes
//! cubes through the expert gate, scores restorations, and runs the whole
//! synthetic pipeline from one JSON config.
//!
//! Exit codes: 0 success, 1 usage, 2 data/IO error, 3 invariant violation.
//! Every file is written atomically (temp file + rename), so re-running a
//! command with the same inputs and seeds yields byte-identical outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use specdeg::cube::{read_hsc, synth_scene, write_hsc_to, SynthSpec};
use specdeg::degrade::{
    apply, blur_sigma_from_kernel, effective_sigma255, Degradation, DegradationMask,
    DegradationRecipe,
};
use specdeg::error::{Error, Result};
use specdeg::eval::evaluate;
use specdeg::metrics::{degradation_prompt, MetricRegistry};
use specdeg::rng::stream_seed;
use specdeg::route::{embed_prompt, gate, Mode, RouterConfig};
use specdeg::select::{
    accuracy, confusion_matrix, degradation_class, importance_report, pearson_filter,
    stratified_split, train_forest, LabeledSamples, RfConfig, CLASSES,
};
use specdeg::HsiCube;

#[derive(Parser)]
#[command(
    name = "specdeg",
    version,
    about = "Hyperspectral degradation simulation, fingerprinting, and routing",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic scene and write it as an HSC cube.
    Synth(SynthArgs),
    /// Apply a degradation recipe to a cube (plus a JSON sidecar).
    Degrade(DegradeArgs),
    /// Compute the metric registry for one or more cubes into a CSV table.
    Metrics(MetricsArgs),
    /// Train the random-forest degradation classifier and report accuracy.
    Classify(ClassifyArgs),
    /// Rank metrics: Pearson de-correlation, then forest importances.
    Select(SelectArgs),
    /// Compute a cube's degradation prompt and route it through the gate.
    Route(RouteArgs),
    /// PSNR and band-averaged SSIM between two cubes.
    Eval(EvalArgs),
    /// Run the full synthetic pipeline from a JSON config.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output .hsc path.
    out: PathBuf,
    #[arg(long, default_value_t = 32)]
    height: usize,
    #[arg(long, default_value_t = 32)]
    width: usize,
    #[arg(long, default_value_t = 31)]
    bands: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of endmember materials in the mixture.
    #[arg(long, default_value_t = 4)]
    materials: usize,
    /// Texture frequencies in cycles per image (comma-separated).
    #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 5.0, 11.0])]
    freqs: Vec<f64>,
}

#[derive(Args)]
struct DegradeArgs {
    /// Input .hsc cube.
    input: PathBuf,
    /// Recipe JSON: {"kind": "...", "params": {...}, "seed": N}.
    recipe: PathBuf,
    /// Output .hsc path. A sidecar OUT.json records the recipe, derived
    /// parameters (e.g. the blur sigma implied by the kernel size), and a
    /// summary of any pixel/band mask.
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Input .hsc cubes.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output CSV path (header: path,label,<metric names>).
    #[arg(long)]
    out: PathBuf,
    /// Label written for every row (e.g. a class name).
    #[arg(long, default_value = "")]
    label: String,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Training table: path,label,<metrics> CSV.
    train: PathBuf,
    /// Held-out test table; mutually exclusive with --split.
    #[arg(long, conflicts_with = "split")]
    test: Option<PathBuf>,
    /// Train fraction for a seeded stratified split of TRAIN.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Write the trained model JSON here.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write the confusion matrix CSV here (header: true_class,<classes>).
    #[arg(long)]
    confusion: Option<PathBuf>,
    /// Seed for the split and the forest.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of trees.
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Maximum tree depth; 0 means unlimited.
    #[arg(long, default_value_t = 12)]
    max_depth: usize,
    /// Minimum samples per leaf.
    #[arg(long, default_value_t = 2)]
    min_leaf: usize,
    /// Candidate features per split; defaults to ceil(sqrt(d)).
    #[arg(long)]
    features_per_split: Option<usize>,
    /// Train each tree on the full sample instead of a bootstrap resample.
    #[arg(long)]
    no_bootstrap: bool,
}

#[derive(Args)]
struct SelectArgs {
    /// Metric table: path,label,<metrics> CSV.
    samples: PathBuf,
    /// Drop a metric whose |Pearson rho| with an already-kept one reaches
    /// this threshold.
    #[arg(long, default_value_t = 0.8)]
    rho_max: f64,
    /// Forest seed for the importance ranking.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RouteArgs {
    /// Input .hsc cube.
    input: PathBuf,
    /// Router weights JSON; omitted = seeded weights from
    /// --experts/--top-k/--embed-dim/--seed.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 4, conflicts_with = "weights")]
    experts: usize,
    #[arg(long, default_value_t = 1, conflicts_with = "weights")]
    top_k: usize,
    #[arg(long, default_value_t = 64, conflicts_with = "weights")]
    embed_dim: usize,
    /// Seed for generated weights and for train-mode logit noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// train adds seeded exploration noise to the logits; infer is exact.
    #[arg(long, value_enum, default_value_t = ModeArg::Infer)]
    mode: ModeArg,
    /// Write the router weights actually used (useful with seeded weights).
    #[arg(long)]
    save_weights: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Infer,
    Train,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Infer => Mode::Infer,
            ModeArg::Train => Mode::Train,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Reference .hsc cube.
    reference: PathBuf,
    /// Cube under test.
    test: PathBuf,
    /// Peak signal value.
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline config JSON; see `PipelineConfig`.
    config: PathBuf,
}

/// One degradation template, instantiated `count` times with per-item seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecipeTemplate {
    count: usize,
    #[serde(flatten)]
    degradation: Degradation,
}

/// Full pipeline config: synthesize `count` scenes per template, degrade
/// them, compute the metric registry, split, train, and write
/// metrics/model/confusion/distributions/report files into `output_dir`.
///
/// `scene.seed` is ignored: item i (in template order) uses scene seed
/// `stream_seed(master_seed, 2i)` and recipe seed `stream_seed(master_seed,
/// 2i+1)`, so adding templates at the end never reshuffles existing items.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PipelineConfig {
    #[serde(default)]
    scene: SynthSpec,
    recipes: Vec<RecipeTemplate>,
    /// Train fraction.
    #[serde(default = "default_split")]
    split: f64,
    forest: RfConfig,
    output_dir: PathBuf,
    master_seed: u64,
}

fn default_split() -> f64 {
    0.8
}

impl PipelineConfig {
    fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        if self.recipes.is_empty() {
            return Err(Error::invalid_param("recipes must not be empty".to_string()));
        }
        for t in &self.recipes {
            if t.count == 0 {
                return Err(Error::invalid_param(format!(
                    "recipe count for kind {} must be at least 1",
                    t.degradation.kind_name()
                )));
            }
            t.degradation.validate()?;
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::invalid_param(format!("split {} out of (0, 1)", self.split)));
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version print to stdout and exit 0; real usage errors
            // go to stderr and exit 1.
            let use_stderr = e.use_stderr();
            let _ = e.print();
            return if use_stderr { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Format { .. } | Error::Data(_) | Error::Io(_) => 2,
        Error::Dimension(_) | Error::InvalidParam(_) => 3,
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Degrade(args) => cmd_degrade(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Select(args) => cmd_select(args),
        Command::Route(args) => cmd_route(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Pipeline(args) => cmd_pipeline(args),
    }
}

// ---------------------------------------------------------------- file IO

/// Write `bytes` to `path` atomically: temp file in the same directory, then
/// rename. Creates parent directories as needed.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid_param(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

fn write_cube(cube: &HsiCube, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_hsc_to(cube, &mut buf)?;
    atomic_write(path, &buf)
}

/// Prefix IO errors with the file they came from.
fn with_path<T>(r: Result<T>, path: &Path) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    })
}

fn load_cube(path: &Path) -> Result<HsiCube> {
    with_path(read_hsc(path), path)
}

fn load_samples(path: &Path) -> Result<LabeledSamples> {
    with_path(LabeledSamples::read_csv_path(path), path)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = with_path(fs::read_to_string(path).map_err(Error::Io), path)?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::data(format!("json encode: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, to_pretty_json(value)?.as_bytes())
}

/// Pretty JSON to `out` if given, else stdout.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = to_pretty_json(value)?;
    match out {
        Some(path) => atomic_write(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::data(format!("csv write: {e}"))
}

fn csv_finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::data(format!("csv flush: {e}")))
}

/// `path` with `suffix` appended to the full file name ("out.hsc" + ".json"
/// = "out.hsc.json").
fn append_ext(path: &Path, suffix: &str) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(suffix);
    PathBuf::from(os)
}

// ------------------------------------------------------------- subcommands

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        height: args.height,
        width: args.width,
        bands: args.bands,
        seed: args.seed,
        n_materials: args.materials,
        texture_freqs: args.freqs.clone(),
    };
    let cube = synth_scene(&spec)?;
    write_cube(&cube, &args.out)
}

#[derive(Serialize)]
struct DegradeSidecar {
    recipe: DegradationRecipe,
    #[serde(skip_serializing_if = "Option::is_none")]
    derived: Option<DerivedParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<MaskSummary>,
}

/// Parameters the operator computes from the recipe: the Gaussian-blur sigma
/// implied by the kernel size, or the noise sigma actually used (drawn from
/// the recipe's range when not fixed).
#[derive(Serialize)]
struct DerivedParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    blur_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma255: Option<f64>,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum MaskSummary {
    Pixels { height: usize, width: usize, masked_count: usize, fraction: f64 },
    Bands { dropped: Vec<usize>, count: usize },
}

fn cmd_degrade(args: &DegradeArgs) -> Result<()> {
    let cube = load_cube(&args.input)?;
    let recipe: DegradationRecipe = read_json(&args.recipe)?;
    let pair = apply(&recipe, &cube)?;
    write_cube(&pair.degraded, &args.out)?;

    let derived = match recipe.degradation {
        Degradation::GaussianBlur { kernel_size } => Some(DerivedParams {
            blur_sigma: Some(blur_sigma_from_kernel(kernel_size)?),
            sigma255: None,
        }),
        Degradation::GaussianNoise { .. } => {
            Some(DerivedParams { blur_sigma: None, sigma255: effective_sigma255(&recipe) })
        }
        _ => None,
    };
    let mask = pair.mask.as_ref().map(|m| match m {
        DegradationMask::Pixels { height, width, masked } => {
            let masked_count = masked.iter().filter(|b| **b).count();
            MaskSummary::Pixels {
                height: *height,
                width: *width,
                masked_count,
                fraction: masked_count as f64 / masked.len() as f64,
            }
        }
        DegradationMask::Bands { dropped } => {
            MaskSummary::Bands { dropped: dropped.clone(), count: dropped.len() }
        }
    });
    let sidecar = DegradeSidecar { recipe: pair.recipe, derived, mask };
    write_json(&append_ext(&args.out, ".json"), &sidecar)
}

fn cmd_metrics(args: &MetricsArgs) -> Result<()> {
    let registry = MetricRegistry::standard();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["path".to_string(), "label".to_string()];
    header.extend(registry.names().iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for input in &args.inputs {
        let cube = read_hsc(input)?;
        let values = registry.evaluate_all(&cube)?;
        let mut record = vec![input.display().to_string(), args.label.clone()];
        record.extend(values.iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(csv_err)?;
    }
    atomic_write(&args.out, &csv_finish(w)?)
}

fn confusion_csv(classes: &[String], matrix: &[Vec<usize>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["true_class".to_string()];
    header.extend_from_slice(classes);
    w.write_record(&header).map_err(csv_err)?;
    for (name, row) in classes.iter().zip(matrix) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(|c| c.to_string()));
        w.write_record(&record).map_err(csv_err)?;
    }
    csv_finish(w)
}

fn cmd_classify(args: &ClassifyArgs) -> Result<()> {
    let samples = load_samples(&args.train)?;
    let (train, test) = match &args.test {
        Some(path) => (samples, load_samples(path)?),
        None => {
            if !(args.split > 0.0 && args.split < 1.0) {
                return Err(Error::invalid_param(format!(
                    "--split {} out of (0, 1)",
                    args.split
                )));
            }
            stratified_split(&samples, 1.0 - args.split, args.seed)?
        }
    };
    let config = RfConfig {
        n_trees: args.trees,
        max_depth: (args.max_depth > 0).then_some(args.max_depth),
        min_leaf: args.min_leaf,
        features_per_split: args.features_per_split,
        bootstrap: !args.no_bootstrap,
        seed: args.seed,
    };
    let model = train_forest(&train, &config)?;
    let matrix = confusion_matrix(&model, &test)?;
    if let Some(path) = &args.model {
        atomic_write(path, (model.to_json()? + "\n").as_bytes())?;
    }
    if let Some(path) = &args.confusion {
        atomic_write(path, &confusion_csv(&model.classes, &matrix)?)?;
    }
    println!(
        "{}",
        json!({ "accuracy": accuracy(&matrix), "n_train": train.len(), "n_test": test.len() })
    );
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let samples = load_samples(&args.samples)?;
    let kept = pearson_filter(&samples, args.rho_max)?;
    let filtered = samples.select_columns(&kept)?;
    let model = train_forest(&filtered, &RfConfig::new(args.seed))?;
    let kept_names: Vec<&str> =
        kept.iter().map(|j| samples.feature_names()[*j].as_str()).collect();
    let dropped: Vec<&str> = (0..samples.feature_names().len())
        .filter(|j| !kept.contains(j))
        .map(|j| samples.feature_names()[j].as_str())
        .collect();
    let report = json!({
        "rho_max": args.rho_max,
        "kept": kept_names,
        "dropped": dropped,
        "importances": importance_report(&model),
    });
    emit_json(&report, args.out.as_deref())
}

fn cmd_route(args: &RouteArgs) -> Result<()> {
    let cube = load_cube(&args.input)?;
    let config = match &args.weights {
        Some(path) => {
            let c: RouterConfig = read_json(path)?;
            c.validate()?;
            c
        }
        None => RouterConfig::seeded_with(args.experts, args.top_k, args.embed_dim, args.seed),
    };
    let prompt = degradation_prompt(&cube)?;
    let embedding = embed_prompt(&prompt, &config)?;
    let result = gate(&cube, &embedding, &config, args.mode.into(), args.seed)?;
    if let Some(path) = &args.save_weights {
        write_json(path, &config)?;
    }
    let report = json!({
        "prompt": prompt,
        "logits": result.logits,
        "gates": result.gates,
        "selected": result.selected,
        "mode": result.mode,
    });
    emit_json(&report, args.out.as_deref())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let reference = load_cube(&args.reference)?;
    let test = load_cube(&args.test)?;
    let score = evaluate(&reference, &test, args.peak)?;
    let text =
        serde_json::to_string(&score).map_err(|e| Error::data(format!("json encode: {e}")))?;
    println!("{text}");
    Ok(())
}

/// Stream index for the train/test split; per-item streams use 2i and 2i+1,
/// which never reach this.
const SPLIT_STREAM: u64 = u64::MAX;

fn cmd_pipeline(args: &PipelineArgs) -> Result<()> {
    let config: PipelineConfig = read_json(&args.config)?;
    config.validate()?;
    let registry = MetricRegistry::standard();
    let feature_names: Vec<String> = registry.names().iter().map(|s| s.to_string()).collect();

    // Class names in canonical order, restricted to what the templates make.
    let mut present = Vec::new();
    for t in &config.recipes {
        let class = degradation_class(t.degradation.kind_name()).ok_or_else(|| {
            Error::invalid_param(format!("no class for kind {}", t.degradation.kind_name()))
        })?;
        if !present.contains(&class) {
            present.push(class);
        }
    }
    let class_names: Vec<String> =
        CLASSES.iter().filter(|c| present.contains(c)).map(|c| c.to_string()).collect();

    let mut paths = Vec::new();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut per_class: BTreeMap<&str, usize> = BTreeMap::new();
    let mut item: u64 = 0;
    for t in &config.recipes {
        let class = degradation_class(t.degradation.kind_name()).expect("checked in validate");
        let label = class_names.iter().position(|c| c == class).expect("class is present");
        for _ in 0..t.count {
            let scene = SynthSpec {
                seed: stream_seed(config.master_seed, 2 * item),
                ..config.scene.clone()
            };
            let recipe = DegradationRecipe::new(
                t.degradation.clone(),
                stream_seed(config.master_seed, 2 * item + 1),
            );
            let pair = apply(&recipe, &synth_scene(&scene)?)?;
            let values = registry.evaluate_all(&pair.degraded)?;
            let index = per_class.entry(class).or_insert(0);
            paths.push(format!("synthetic/{class}/{index}"));
            *index += 1;
            features.extend_from_slice(&values);
            labels.push(label);
            item += 1;
        }
    }

    let samples =
        LabeledSamples::new(paths, features, labels, class_names, feature_names)?;
    let (train, test) = stratified_split(
        &samples,
        1.0 - config.split,
        stream_seed(config.master_seed, SPLIT_STREAM),
    )?;
    let model = train_forest(&train, &config.forest)?;
    let matrix = confusion_matrix(&model, &test)?;
    let acc = accuracy(&matrix);

    let dir = &config.output_dir;
    let mut metrics_buf = Vec::new();
    samples.write_csv(&mut metrics_buf)?;
    atomic_write(&dir.join("metrics.csv"), &metrics_buf)?;
    atomic_write(&dir.join("model.json"), (model.to_json()? + "\n").as_bytes())?;
    atomic_write(&dir.join("confusion.csv"), &confusion_csv(&model.classes, &matrix)?)?;
    atomic_write(&dir.join("distributions.csv"), &distributions_csv(&samples)?)?;
    let report = json!({
        "accuracy": acc,
        "classes": model.classes,
        "confusion": matrix,
        "importances": importance_report(&model),
        "n_samples": samples.len(),
        "n_train": train.len(),
        "n_test": test.len(),
        "split": config.split,
        "master_seed": config.master_seed,
    });
    write_json(&dir.join("report.json"), &report)?;
    println!("{}", json!({ "accuracy": acc }));
    Ok(())
}

/// Long-format per-sample metric values: class,metric,value.
fn distributions_csv(samples: &LabeledSamples) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["class", "metric", "value"]).map_err(csv_err)?;
    for i in 0..samples.len() {
        let class = samples.class_names()[samples.labels()[i]].as_str();
        for (j, name) in samples.feature_names().iter().enumerate() {
            w.write_record([class, name.as_str(), &samples.row(i)[j].to_string()])
                .map_err(csv_err)?;
        }
    }
    csv_finish(w)
}
