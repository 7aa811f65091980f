//! Command-line pipelines: generate, run, verify, map-params, train, predict.
//!
//! Every command is a plain function returning [`Result`]; [`main_with_args`]
//! parses arguments and maps outcomes onto exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{ds_em, majority_vote, sml_predict, threshold, EmOptions};
use crate::data::{read_labels, write_labels, PredictionMatrix};
use crate::datagen::{bayes_optimal_accuracy, GeneratorKind, GeneratorModel};
use crate::dnn::{
    predict_batch, random_hyperparameter_search, train_stack, DnnModel, HyperSpace, PredictMode, DEFAULT_PASSES,
};
use crate::error::{check_dim, Error, Result};
use crate::mapping::{condind_to_rbm, rbm_to_condind, CondIndParams};
use crate::math::mean_and_std;
use crate::metrics::{balanced_accuracy, conditional_correlation, matrix_to_csv};
use crate::rbm::{RbmParams, TrainConfig};
use crate::rng;
use crate::verify::{run_suite, Suite, SuiteReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;

const TOOL: &str = "rbmvote";
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vote,
    Ds,
    Sml,
    Dnn,
}

/// Where a synthetic dataset comes from. The model is, in order of
/// preference: `model` as given, `model_seed`, the family's canonical seed,
/// or a fresh draw per repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<GeneratorModel>,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "sample size must be >= 1"));
        }
        if let Some(model) = &self.model {
            if GeneratorKind::of(model) != self.kind {
                return Err(Error::invalid("model", "kind does not match the requested generator"));
            }
            model.validate()?;
        }
        Ok(())
    }

    /// The model for one repetition; `rng` is only consumed for fresh draws.
    pub fn resolve_model<R: Rng + ?Sized>(&self, rng: &mut R) -> GeneratorModel {
        if let Some(model) = &self.model {
            return model.clone();
        }
        match self.model_seed.or(self.kind.default_model_seed()) {
            Some(seed) => self.kind.sample_model(&mut rng::stream(seed)),
            None => self.kind.sample_model(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub predictions: PathBuf,
    #[serde(default)]
    pub labels: Option<PathBuf>,
}

/// Exactly one dataset source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Generator(GeneratorSpec),
    Csv(CsvSource),
}

fn default_repetitions() -> usize {
    5
}

fn default_passes() -> usize {
    DEFAULT_PASSES
}

fn default_mode() -> PredictMode {
    PredictMode::Sample
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub method: Method,
    /// Training overrides for the dnn method; `seed` is replaced per repetition.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: PredictMode,
    #[serde(default = "default_passes")]
    pub passes: usize,
    /// Also estimate the Bayes-optimal accuracy (generator sources only).
    #[serde(default)]
    pub bayes_optimal: bool,
    /// Output directory; never written into reports so they do not depend on it.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(source: DataSource, method: Method) -> Self {
        Self {
            source,
            method,
            train: TrainConfig::default(),
            repetitions: default_repetitions(),
            seed: 0,
            mode: default_mode(),
            passes: default_passes(),
            bayes_optimal: false,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be >= 1"));
        }
        if self.passes == 0 {
            return Err(Error::invalid("passes", "must be >= 1"));
        }
        self.train.validate()?;
        match &self.source {
            DataSource::Generator(spec) => spec.validate(),
            DataSource::Csv(csv) => {
                if csv.labels.is_none() {
                    return Err(Error::invalid("source.csv.labels", "a labels file is required for evaluation"));
                }
                if self.bayes_optimal {
                    return Err(Error::invalid("bayes_optimal", "needs a generator source"));
                }
                Ok(())
            }
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// Accuracies are reported to four decimal places.
fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

pub struct GeneratedFiles {
    pub predictions: PathBuf,
    pub labels: PathBuf,
    pub generator: PathBuf,
}

/// Writes `predictions.csv`, `labels.csv` and the `generator.json` sidecar
/// into `out`. With the same seed this is repetition 0 of [`cmd_run`].
pub fn cmd_generate(spec: &GeneratorSpec, seed: u64, out: &Path) -> Result<GeneratedFiles> {
    spec.validate()?;
    let (model, data, labels, _) = generate_repetition(spec, seed, 0)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let files = GeneratedFiles {
        predictions: out.join("predictions.csv"),
        labels: out.join("labels.csv"),
        generator: out.join("generator.json"),
    };
    data.write_csv(&files.predictions)?;
    write_labels(&labels, &files.labels)?;
    write_text(&files.generator, &to_json(&model)?)?;
    Ok(files)
}

/// Model, data, labels and training seed of one repetition.
fn generate_repetition(
    spec: &GeneratorSpec,
    seed: u64,
    rep: usize,
) -> Result<(GeneratorModel, PredictionMatrix, Vec<u8>, u64)> {
    let mut rep_rng = rng::substream(seed, rep as u64);
    let model = spec.resolve_model(&mut rep_rng);
    let data_seed: u64 = rep_rng.gen();
    let train_seed: u64 = rep_rng.gen();
    let (data, labels) = model.generate(spec.n, &mut rng::stream(data_seed))?;
    Ok((model, data, labels, train_seed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepetitionResult {
    pub index: usize,
    pub train_seed: u64,
    pub balanced_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub architecture: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bayes_optimal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_and_std(values);
        Self {
            mean: round4(mean),
            std: round4(std),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub repetitions: Vec<RepetitionResult>,
    pub balanced_accuracy: Summary,
    /// Most frequent architecture across repetitions (dnn only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub architecture: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bayes_optimal: Option<Summary>,
}

impl RunReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.repetitions.iter().map(|r| r.balanced_accuracy).collect()
    }

    pub fn architectures(&self) -> Vec<&str> {
        self.repetitions.iter().filter_map(|r| r.architecture.as_deref()).collect()
    }
}

struct MethodOutcome {
    labels: Vec<u8>,
    dnn: Option<(DnnModel, Vec<u8>, Vec<u8>)>,
}

fn apply_method(config: &ExperimentConfig, data: &PredictionMatrix, train_seed: u64) -> Result<MethodOutcome> {
    let labels = match config.method {
        Method::Vote => majority_vote(data),
        Method::Ds => ds_em(data, EmOptions::default()).labels(),
        Method::Sml => sml_predict(data).labels,
        Method::Dnn => {
            let train = TrainConfig {
                seed: train_seed,
                ..config.train.clone()
            };
            let model = train_stack(data, &train)?;
            let mut pred_rng = rng::substream(train_seed, 1);
            let sample = threshold(&predict_batch(&model, data, PredictMode::Sample, config.passes, &mut pred_rng)?);
            let map = threshold(&predict_batch(&model, data, PredictMode::Map, 1, &mut pred_rng)?);
            let chosen = match config.mode {
                PredictMode::Sample => sample.clone(),
                PredictMode::Map => map.clone(),
            };
            return Ok(MethodOutcome {
                labels: chosen,
                dnn: Some((model, sample, map)),
            });
        }
    };
    Ok(MethodOutcome { labels, dnn: None })
}

fn most_common(values: &[String]) -> Option<String> {
    let mut best: Option<(&String, usize)> = None;
    for v in values {
        let count = values.iter().filter(|w| *w == v).count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((v, count));
        }
    }
    best.map(|(v, _)| v.clone())
}

/// Runs every repetition and assembles the report (nothing is written).
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let csv_data = match &config.source {
        DataSource::Csv(csv) => {
            let data = PredictionMatrix::read_csv(&csv.predictions)?;
            let labels = read_labels(csv.labels.as_ref().expect("validated"))?;
            check_dim("labels", data.n_rows(), labels.len())?;
            Some((data, labels))
        }
        DataSource::Generator(_) => None,
    };

    let mut reps = Vec::with_capacity(config.repetitions);
    for rep in 0..config.repetitions {
        let (data, labels, train_seed, bayes) = match (&config.source, &csv_data) {
            (DataSource::Generator(spec), _) => {
                let (model, data, labels, train_seed) = generate_repetition(spec, config.seed, rep)?;
                let bayes = if config.bayes_optimal {
                    let mut bayes_rng = rng::substream(train_seed, 2);
                    Some(round4(bayes_optimal_accuracy(&model, &mut bayes_rng)?))
                } else {
                    None
                };
                (data, labels, train_seed, bayes)
            }
            (DataSource::Csv(_), Some((data, labels))) => {
                (data.clone(), labels.clone(), rng::derive_seed(config.seed, rep as u64), None)
            }
            (DataSource::Csv(_), None) => unreachable!("csv data loaded above"),
        };
        let outcome = apply_method(config, &data, train_seed)?;
        let accuracy = balanced_accuracy(&outcome.labels, &labels)?;
        let mut result = RepetitionResult {
            index: rep,
            train_seed,
            balanced_accuracy: round4(accuracy),
            architecture: None,
            flip: None,
            sample_accuracy: None,
            map_accuracy: None,
            bayes_optimal: bayes,
        };
        if let Some((model, sample, map)) = &outcome.dnn {
            result.architecture = Some(model.architecture_string());
            result.flip = Some(model.flip());
            result.sample_accuracy = Some(round4(balanced_accuracy(sample, &labels)?));
            result.map_accuracy = Some(round4(balanced_accuracy(map, &labels)?));
        }
        log::info!("repetition {rep}: balanced accuracy {accuracy:.4}");
        reps.push(result);
    }

    let accuracies: Vec<f64> = reps.iter().map(|r| r.balanced_accuracy).collect();
    let architectures: Vec<String> = reps.iter().filter_map(|r| r.architecture.clone()).collect();
    let bayes: Vec<f64> = reps.iter().filter_map(|r| r.bayes_optimal).collect();
    Ok(RunReport {
        tool: TOOL.to_string(),
        version: VERSION.to_string(),
        seed: config.seed,
        config: config.clone(),
        balanced_accuracy: Summary::of(&accuracies),
        architecture: most_common(&architectures),
        bayes_optimal: (!bayes.is_empty()).then(|| Summary::of(&bayes)),
        repetitions: reps,
    })
}

/// Runs the experiment and writes `report.json` into `out`.
pub fn cmd_run(config: &ExperimentConfig, out: &Path) -> Result<(PathBuf, RunReport)> {
    let report = run_experiment(config)?;
    let path = out.join("report.json");
    write_text(&path, &to_json(&report)?)?;
    Ok((path, report))
}

pub fn cmd_verify(suites: &[Suite], seed: u64) -> Result<Vec<SuiteReport>> {
    suites.iter().map(|&s| run_suite(s, seed)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParamsTarget {
    /// One-hidden-unit RBM to sensitivities/specificities/prior.
    Condind,
    /// Sensitivities/specificities/prior to RBM parameters.
    Rbm,
}

/// Converts between the two parametrizations; returns the output JSON.
pub fn cmd_map_params(input: &str, to: ParamsTarget) -> Result<String> {
    match to {
        ParamsTarget::Condind => {
            let params: RbmParams = serde_json::from_str(input)?;
            to_json(&rbm_to_condind(&params)?)
        }
        ParamsTarget::Rbm => {
            let theta: CondIndParams = serde_json::from_str(input)?;
            to_json(&condind_to_rbm(&theta)?)
        }
    }
}

pub fn cmd_train(data: &PredictionMatrix, config: &TrainConfig) -> Result<DnnModel> {
    train_stack(data, config)
}

/// Posterior estimates for every row, one per line.
pub fn cmd_predict(
    model: &DnnModel,
    data: &PredictionMatrix,
    mode: PredictMode,
    passes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    predict_batch(model, data, mode, passes, &mut rng::stream(seed))
}

#[derive(Parser, Debug)]
#[command(name = "rbmvote", version, about = "Unsupervised ensemble labelling with stacked RBMs")]
pub struct Cli {
    /// Log verbosity (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a synthetic dataset and its generator parameters.
    Generate {
        /// Generator spec JSON; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        generator: Option<GeneratorKind>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        model_seed: Option<u64>,
        /// Reuse a generator.json sidecar instead of drawing parameters.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run repeated experiments and write report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        mode: Option<PredictMode>,
        #[arg(long)]
        passes: Option<usize>,
    },
    /// Enumeration-based self-checks.
    Verify {
        /// bijection, lemma3, gradient or all.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert between RBM and sensitivity/specificity parameters.
    MapParams {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        to: ParamsTarget,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a stacked network on a predictions CSV and save it as JSON.
    Train {
        #[arg(long)]
        predictions: PathBuf,
        /// TrainConfig JSON; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predictions CSV with a saved network.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// When given, print the balanced accuracy of the thresholded output.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value = "sample")]
        mode: PredictMode,
        #[arg(long, default_value_t = DEFAULT_PASSES)]
        passes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Class-conditional correlation matrix of the classifiers as CSV.
    Correlations {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 0)]
        class: u8,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random hyperparameter search scored on a 10% holdout.
    Search {
        #[arg(long)]
        predictions: PathBuf,
        /// HyperSpace JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Executes a parsed command; `Ok(false)` means a verification failed.
pub fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Generate {
            config,
            generator,
            n,
            model_seed,
            model,
            seed,
            out,
        } => {
            let mut spec: GeneratorSpec = match (&config, generator) {
                (Some(path), _) => read_json(path)?,
                (None, Some(kind)) => GeneratorSpec {
                    kind,
                    n: 0,
                    model_seed: None,
                    model: None,
                },
                (None, None) => return Err(Error::invalid("generator", "give --generator or --config")),
            };
            if let Some(kind) = generator {
                spec.kind = kind;
            }
            if let Some(n) = n {
                spec.n = n;
            }
            if model_seed.is_some() {
                spec.model_seed = model_seed;
            }
            if let Some(path) = model {
                spec.model = Some(read_json(&path)?);
            }
            let files = cmd_generate(&spec, seed, &out)?;
            println!("wrote {}", files.predictions.display());
            Ok(true)
        }
        Command::Run {
            config,
            seed,
            out,
            method,
            mode,
            passes,
        } => {
            let mut cfg = ExperimentConfig::read(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(method) = method {
                cfg.method = method;
            }
            if let Some(mode) = mode {
                cfg.mode = mode;
            }
            if let Some(passes) = passes {
                cfg.passes = passes;
            }
            if out.is_some() {
                cfg.out = out;
            }
            let dir = cfg
                .out
                .clone()
                .ok_or_else(|| Error::invalid("out", "give --out or set \"out\" in the config"))?;
            let (path, report) = cmd_run(&cfg, &dir)?;
            let arch = report.architecture.as_deref().map(|a| format!(" ({a})")).unwrap_or_default();
            println!(
                "balanced accuracy {:.4} +/- {:.4}{arch}; report at {}",
                report.balanced_accuracy.mean,
                report.balanced_accuracy.std,
                path.display()
            );
            Ok(true)
        }
        Command::Verify { suite, seed, out } => {
            let suites: Vec<Suite> = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![suite.parse()?]
            };
            let reports = cmd_verify(&suites, seed)?;
            for report in &reports {
                for check in &report.checks {
                    println!(
                        "{} {}: {}: max error {:.3e} (tolerance {:.0e})",
                        if check.passed { "PASS" } else { "FAIL" },
                        report.suite,
                        check.name,
                        check.max_error,
                        check.tolerance
                    );
                }
            }
            if let Some(path) = out {
                write_text(&path, &to_json(&reports)?)?;
            }
            Ok(reports.iter().all(|r| r.passed))
        }
        Command::MapParams { input, to, out } => {
            let text = fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            emit(out.as_deref(), &cmd_map_params(&text, to)?)?;
            Ok(true)
        }
        Command::Train {
            predictions,
            config,
            seed,
            out,
        } => {
            let data = PredictionMatrix::read_csv(&predictions)?;
            let mut train: TrainConfig = match config {
                Some(path) => read_json(&path)?,
                None => TrainConfig::default(),
            };
            if let Some(seed) = seed {
                train.seed = seed;
            }
            let model = cmd_train(&data, &train)?;
            write_text(&out, &to_json(&model)?)?;
            println!("architecture {}; model at {}", model.architecture_string(), out.display());
            Ok(true)
        }
        Command::Predict {
            model,
            predictions,
            labels,
            mode,
            passes,
            seed,
            out,
        } => {
            let net: DnnModel = read_json(&model)?;
            let data = PredictionMatrix::read_csv(&predictions)?;
            let probs = cmd_predict(&net, &data, mode, passes, seed)?;
            let text: String = probs.iter().map(|p| format!("{p:.6}\n")).collect();
            emit(out.as_deref(), &text)?;
            if let Some(path) = labels {
                let truth = read_labels(&path)?;
                let acc = balanced_accuracy(&threshold(&probs), &truth)?;
                eprintln!("balanced accuracy {acc:.4}");
            }
            Ok(true)
        }
        Command::Correlations {
            predictions,
            labels,
            class,
            out,
        } => {
            let data = PredictionMatrix::read_csv(&predictions)?;
            let truth = read_labels(&labels)?;
            let corr = conditional_correlation(&data, &truth, class)?;
            emit(out.as_deref(), &matrix_to_csv(&corr))?;
            Ok(true)
        }
        Command::Search {
            predictions,
            config,
            seed,
            out,
        } => {
            let data = PredictionMatrix::read_csv(&predictions)?;
            let space: HyperSpace = match config {
                Some(path) => read_json(&path)?,
                None => HyperSpace::default(),
            };
            let result = random_hyperparameter_search(&data, &space, &mut rng::stream(seed))?;
            emit(out.as_deref(), &to_json(&result)?)?;
            Ok(true)
        }
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::new().parse_filters(&cli.log).try_init();
    match execute(cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VERIFY_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}
