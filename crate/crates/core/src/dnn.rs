//! Stacked-RBM network for label estimation.
//!
//! Layer widths are chosen greedily: a probe RBM with as many hidden units
//! as the current layer width is trained, the smallest number of leading
//! singular values of its weight matrix covering 95% of their sum becomes
//! the next width, and the RBM is retrained at that width. One sampled
//! hidden vector per row becomes the next layer's training data. The stack
//! ends at a single hidden unit whose activation estimates `P(Y = 1 | x)`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{agreement, majority_vote, threshold};
use crate::data::PredictionMatrix;
use crate::error::{check_dim, Error, Result};
use crate::math::sigmoid;
use crate::rbm::{train_rbm_with_rng, RbmParams, TrainConfig, MAX_ENUM_VISIBLE};
use crate::rng;

/// Fraction of the singular-value sum that the kept units must cover.
pub const SVD_ENERGY: f64 = 0.95;
pub const DEFAULT_PASSES: usize = 100;
const FORMAT_TAG: &str = "rbmvote-dnn";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictMode {
    /// Sample every hidden layer and average the top activation over passes.
    Sample,
    /// Set every hidden unit to its more probable value; one pass.
    Map,
}

impl std::str::FromStr for PredictMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(PredictMode::Sample),
            "map" => Ok(PredictMode::Map),
            other => Err(Error::invalid("mode", format!("expected sample|map, got {other:?}"))),
        }
    }
}

/// A trained stack. Layer `l + 1` reads the hidden units of layer `l`; the
/// last layer has exactly one hidden unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DnnDocument", into = "DnnDocument")]
pub struct DnnModel {
    layers: Vec<RbmParams>,
    flip: bool,
    train_config: Option<TrainConfig>,
}

#[derive(Serialize, Deserialize)]
struct DnnDocument {
    format: String,
    architecture: Vec<usize>,
    flip: bool,
    #[serde(default)]
    train_config: Option<TrainConfig>,
    layers: Vec<RbmParams>,
}

impl From<DnnModel> for DnnDocument {
    fn from(m: DnnModel) -> Self {
        DnnDocument {
            format: FORMAT_TAG.to_string(),
            architecture: m.architecture(),
            flip: m.flip,
            train_config: m.train_config,
            layers: m.layers,
        }
    }
}

impl TryFrom<DnnDocument> for DnnModel {
    type Error = Error;

    fn try_from(doc: DnnDocument) -> Result<Self> {
        if doc.format != FORMAT_TAG {
            return Err(Error::invalid("format", format!("expected {FORMAT_TAG:?}, got {:?}", doc.format)));
        }
        let mut model = DnnModel::new(doc.layers, doc.flip)?;
        if model.architecture() != doc.architecture {
            return Err(Error::invalid("architecture", "does not match layer shapes"));
        }
        model.train_config = doc.train_config;
        Ok(model)
    }
}

impl DnnModel {
    pub fn new(layers: Vec<RbmParams>, flip: bool) -> Result<Self> {
        let last = layers
            .last()
            .ok_or_else(|| Error::invalid("layers", "need at least one layer"))?;
        if last.n_hidden() != 1 {
            return Err(Error::invalid("layers", "top layer must have one hidden unit"));
        }
        for pair in layers.windows(2) {
            check_dim("layer visible width", pair[0].n_hidden(), pair[1].n_visible())?;
            if pair[1].n_hidden() >= pair[1].n_visible() {
                return Err(Error::invalid("layers", "widths must strictly decrease"));
            }
        }
        if layers[0].n_hidden() >= layers[0].n_visible() && layers.len() > 1 {
            return Err(Error::invalid("layers", "widths must strictly decrease"));
        }
        Ok(Self {
            layers,
            flip,
            train_config: None,
        })
    }

    pub fn layers(&self) -> &[RbmParams] {
        &self.layers
    }

    pub fn flip(&self) -> bool {
        self.flip
    }

    pub fn with_flip(mut self, flip: bool) -> Self {
        self.flip = flip;
        self
    }

    pub fn train_config(&self) -> Option<&TrainConfig> {
        self.train_config.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_visible()
    }

    /// `(d, m_1, ..., 1)`.
    pub fn architecture(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].n_visible())
            .chain(self.layers.iter().map(|l| l.n_hidden()))
            .collect()
    }

    /// Architecture joined by dashes, e.g. `"15-3-1"`.
    pub fn architecture_string(&self) -> String {
        self.architecture()
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    fn top_activation(&self, h: &[u8]) -> f64 {
        sigmoid(self.layers.last().expect("non-empty").hidden_input(h, 0))
    }

    /// Unflipped `P(top = 1 | x)` estimate.
    fn raw_output<R: Rng + ?Sized>(&self, x: &[u8], mode: PredictMode, n_passes: usize, rng: &mut R) -> f64 {
        let below = &self.layers[..self.layers.len() - 1];
        if below.is_empty() {
            return self.top_activation(x);
        }
        let mut probs: Vec<f64> = Vec::new();
        let mut h: Vec<u8> = Vec::new();
        let mut pass = |rng: &mut R, sample: bool| {
            h.clear();
            h.extend_from_slice(x);
            for layer in below {
                probs.resize(layer.n_hidden(), 0.0);
                layer.hidden_probs_into(&h, &mut probs);
                h.clear();
                if sample {
                    h.extend(probs.iter().map(|&p| rng::bernoulli(rng, p)));
                } else {
                    h.extend(probs.iter().map(|&p| (p >= 0.5) as u8));
                }
            }
            self.top_activation(&h)
        };
        match mode {
            PredictMode::Map => pass(rng, false),
            PredictMode::Sample => {
                let total: f64 = (0..n_passes).map(|_| pass(rng, true)).sum();
                total / n_passes as f64
            }
        }
    }

    /// Samples the hidden representation of every row at every layer below
    /// the top: element `l` holds the output of layer `l`.
    pub fn hidden_representations<R: Rng + ?Sized>(
        &self,
        data: &PredictionMatrix,
        rng: &mut R,
    ) -> Result<Vec<PredictionMatrix>> {
        check_dim("data columns", self.input_dim(), data.n_cols())?;
        let mut out = Vec::with_capacity(self.layers.len() - 1);
        let mut current = data.clone();
        for layer in &self.layers[..self.layers.len() - 1] {
            current = layer.sample_hidden_representation(&current, rng)?;
            out.push(current.clone());
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Smallest `k` whose `k` largest singular values reach 95% of the total.
pub fn width_from_singular_values(singular_values: &[f64]) -> Result<usize> {
    let mut sv: Vec<f64> = singular_values.to_vec();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let total: f64 = sv.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("weights", "all singular values are zero"));
    }
    let target = SVD_ENERGY * total;
    let mut cum = 0.0;
    for (k, s) in sv.iter().enumerate() {
        cum += s;
        if cum >= target * (1.0 - 1e-12) {
            return Ok(k + 1);
        }
    }
    Ok(sv.len())
}

pub fn singular_values(weights: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = weights.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Hidden width suggested by the singular values of `weights`.
pub fn choose_hidden_width(weights: &DMatrix<f64>) -> Result<usize> {
    width_from_singular_values(&singular_values(weights))
}

/// What happened at one level of [`train_stack`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerReport {
    pub input_width: usize,
    pub probe_singular_values: Vec<f64>,
    pub suggested_width: usize,
    pub chosen_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackReport {
    pub layers: Vec<LayerReport>,
    pub flip: bool,
}

/// Greedy layer-wise training with SVD-chosen widths. Deterministic given `config.seed`.
pub fn train_stack(data: &PredictionMatrix, config: &TrainConfig) -> Result<DnnModel> {
    train_stack_with_report(data, config).map(|(m, _)| m)
}

pub fn train_stack_with_report(data: &PredictionMatrix, config: &TrainConfig) -> Result<(DnnModel, StackReport)> {
    config.validate()?;
    if data.n_cols() < 2 {
        return Err(Error::invalid("data", "stacking needs d >= 2"));
    }
    let mut rng = rng::stream(config.seed);
    let mut layers = Vec::new();
    let mut reports = Vec::new();
    let mut current = data.clone();
    loop {
        let width = current.n_cols();
        let probe = train_rbm_with_rng(&current, width, config, &mut rng)?;
        let sv = singular_values(probe.weights());
        let suggested = width_from_singular_values(&sv)?;
        // strictly decreasing widths guarantee termination
        let chosen = suggested.min(width - 1).max(1);
        log::debug!("layer {}: width {width} -> {chosen} (svd suggested {suggested})", layers.len());
        let rbm = train_rbm_with_rng(&current, chosen, config, &mut rng)?;
        reports.push(LayerReport {
            input_width: width,
            probe_singular_values: sv,
            suggested_width: suggested,
            chosen_width: chosen,
        });
        if chosen == 1 {
            layers.push(rbm);
            break;
        }
        current = rbm.sample_hidden_representation(&current, &mut rng)?;
        layers.push(rbm);
    }
    let mut model = DnnModel::new(layers, false)?;
    model.train_config = Some(config.clone());
    let flip = resolve_label_flip(&model, data)?;
    model.flip = flip;
    Ok((model, StackReport { layers: reports, flip }))
}

/// Estimate of `P(Y = 1 | x)`, including the model's flip.
pub fn propagate_predict<R: Rng + ?Sized>(
    model: &DnnModel,
    x: &[u8],
    mode: PredictMode,
    n_passes: usize,
    rng: &mut R,
) -> Result<f64> {
    check_dim("x", model.input_dim(), x.len())?;
    if mode == PredictMode::Sample && n_passes == 0 {
        return Err(Error::invalid("n_passes", "must be >= 1"));
    }
    let p = model.raw_output(x, mode, n_passes, rng);
    Ok(if model.flip { 1.0 - p } else { p })
}

/// [`propagate_predict`] over every row.
pub fn predict_batch<R: Rng + ?Sized>(
    model: &DnnModel,
    data: &PredictionMatrix,
    mode: PredictMode,
    n_passes: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    data.rows()
        .map(|x| propagate_predict(model, x, mode, n_passes, rng))
        .collect()
}

/// True iff the unflipped network's MAP labels agree with majority vote on
/// fewer than half the rows. Exactly half keeps the current orientation.
pub fn resolve_label_flip(model: &DnnModel, data: &PredictionMatrix) -> Result<bool> {
    check_dim("data columns", model.input_dim(), data.n_cols())?;
    let mut unused = rng::stream(0);
    let outputs: Vec<f64> = data
        .rows()
        .map(|x| model.raw_output(x, PredictMode::Map, 1, &mut unused))
        .collect();
    Ok(agreement(&threshold(&outputs), &majority_vote(data)) < 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    pub scale: Scale,
}

impl ParamRange {
    pub fn linear(min: f64, max: f64) -> Self {
        Self { min, max, scale: Scale::Linear }
    }

    pub fn log(min: f64, max: f64) -> Self {
        Self { min, max, scale: Scale::Log }
    }

    fn validate(&self, field: &'static str) -> Result<()> {
        if !(self.min <= self.max) {
            return Err(Error::invalid(field, "min must not exceed max"));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return Err(Error::invalid(field, "log-scale range must be positive"));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            return self.min;
        }
        match self.scale {
            Scale::Linear => rng.gen_range(self.min..=self.max),
            Scale::Log => rng.gen_range(self.min.ln()..=self.max.ln()).exp(),
        }
    }
}

/// Search ranges; fields left `None` keep the value from `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperSpace {
    pub base: TrainConfig,
    pub learning_rate: Option<ParamRange>,
    pub momentum: Option<ParamRange>,
    pub weight_decay: Option<ParamRange>,
    pub epochs: Option<ParamRange>,
    pub batch_size: Option<ParamRange>,
    pub cd_k: Option<ParamRange>,
    pub n_configs: usize,
}

impl Default for HyperSpace {
    fn default() -> Self {
        Self {
            base: TrainConfig::default(),
            learning_rate: Some(ParamRange::log(0.005, 0.2)),
            momentum: Some(ParamRange::linear(0.5, 0.95)),
            weight_decay: Some(ParamRange::log(1e-5, 1e-2)),
            epochs: None,
            batch_size: None,
            cd_k: None,
            n_configs: 20,
        }
    }
}

impl HyperSpace {
    pub fn validate(&self) -> Result<()> {
        if self.n_configs == 0 {
            return Err(Error::invalid("n_configs", "search space is empty"));
        }
        let ranges = [
            ("learning_rate", self.learning_rate),
            ("momentum", self.momentum),
            ("weight_decay", self.weight_decay),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("cd_k", self.cd_k),
        ];
        for (name, r) in ranges {
            if let Some(r) = r {
                r.validate(name)?;
            }
        }
        self.base.validate()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TrainConfig {
        let mut c = self.base.clone();
        let int = |r: &ParamRange, rng: &mut R| r.sample(rng).round().max(1.0) as usize;
        if let Some(r) = &self.learning_rate {
            c.learning_rate = r.sample(rng);
        }
        if let Some(r) = &self.momentum {
            c.momentum = r.sample(rng).min(0.999);
        }
        if let Some(r) = &self.weight_decay {
            c.weight_decay = r.sample(rng);
        }
        if let Some(r) = &self.epochs {
            c.epochs = int(r, rng);
        }
        if let Some(r) = &self.batch_size {
            c.batch_size = int(r, rng);
        }
        if let Some(r) = &self.cd_k {
            c.cd_k = int(r, rng);
        }
        c.seed = rng.gen();
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchTrial {
    pub config: TrainConfig,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: TrainConfig,
    pub score: f64,
    pub trials: Vec<SearchTrial>,
}

/// Splits rows 90/10 with a seeded shuffle: `(train, holdout)`.
pub fn holdout_split<R: Rng + ?Sized>(data: &PredictionMatrix, rng: &mut R) -> Result<(PredictionMatrix, PredictionMatrix)> {
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::invalid("data", "need at least 2 rows for a holdout split"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_hold = (n / 10).max(1);
    let (hold, train) = idx.split_at(n_hold);
    Ok((data.select_rows(train)?, data.select_rows(hold)?))
}

/// Holdout score of a one-hidden-unit RBM: exact mean log-likelihood for
/// `d <= 20`, otherwise the mean free-energy gap between a column-shuffled
/// copy of the holdout and the holdout itself.
pub fn holdout_score<R: Rng + ?Sized>(params: &RbmParams, holdout: &PredictionMatrix, rng: &mut R) -> Result<f64> {
    if holdout.n_cols() <= MAX_ENUM_VISIBLE {
        return params.mean_log_likelihood(holdout);
    }
    let (n, d) = (holdout.n_rows(), holdout.n_cols());
    let mut shuffled = vec![0u8; n * d];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(rng);
        for (i, &src) in perm.iter().enumerate() {
            shuffled[i * d + j] = holdout.get(src, j);
        }
    }
    let surrogate = PredictionMatrix::new(n, d, shuffled)?;
    let mut gap = 0.0;
    for (x, s) in holdout.rows().zip(surrogate.rows()) {
        gap += params.free_energy(s)? - params.free_energy(x)?;
    }
    Ok(gap / n as f64)
}

/// Random search over `space`, scoring width-1 RBMs on a 10% holdout.
pub fn random_hyperparameter_search<R: Rng + ?Sized>(
    data: &PredictionMatrix,
    space: &HyperSpace,
    rng: &mut R,
) -> Result<SearchResult> {
    space.validate()?;
    let (train, holdout) = holdout_split(data, rng)?;
    let mut trials = Vec::with_capacity(space.n_configs);
    for _ in 0..space.n_configs {
        let config = space.sample(rng);
        let mut train_rng = rng::stream(config.seed);
        let params = train_rbm_with_rng(&train, 1, &config, &mut train_rng)?;
        let score = holdout_score(&params, &holdout, rng)?;
        log::debug!("search trial lr={:.4} score={score:.5}", config.learning_rate);
        trials.push(SearchTrial { config, score });
    }
    let best = trials
        .iter()
        .max_by(|a, b| a.score.partial_cmp(&b.score).unwrap_or(std::cmp::Ordering::Less))
        .expect("n_configs >= 1");
    Ok(SearchResult {
        best: best.config.clone(),
        score: best.score,
        trials,
    })
}

#[cfg(test)]
mod tests;
