//! Bernoulli-Bernoulli restricted Boltzmann machine.
//!
//! Energy: `E(x, h) = -(a·x + b·h + xᵀ W h)` with `W` of shape `d x m`.
//! Conditionals factorize:
//!
//! * `p(h_j = 1 | x) = σ(b_j + xᵀ W[:, j])`
//! * `p(x_i = 1 | h) = σ(a_i + W[i, :] h)`
//!
//! Training is minibatch CD-k with momentum and L2 weight decay. The chain
//! restarts at the data batch on every update.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::PredictionMatrix;
use crate::error::{check_dim, Error, Result};
use crate::math::{log_sum_exp, logit, sigmoid, softplus, unpack_bits};
use crate::rng;

/// Largest visible dimension for which the partition function is enumerated.
pub const MAX_ENUM_VISIBLE: usize = 20;

/// Parameters `(W, a, b)` of an RBM with `d` visible and `m` hidden units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RbmDocument", into = "RbmDocument")]
pub struct RbmParams {
    weights: DMatrix<f64>,
    visible_bias: DVector<f64>,
    hidden_bias: DVector<f64>,
}

/// Row-major JSON layout of [`RbmParams`].
#[derive(Serialize, Deserialize)]
struct RbmDocument {
    weights: Vec<Vec<f64>>,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
}

impl From<RbmParams> for RbmDocument {
    fn from(p: RbmParams) -> Self {
        let weights = (0..p.n_visible())
            .map(|i| p.weights.row(i).iter().copied().collect())
            .collect();
        RbmDocument {
            weights,
            visible_bias: p.visible_bias.iter().copied().collect(),
            hidden_bias: p.hidden_bias.iter().copied().collect(),
        }
    }
}

impl TryFrom<RbmDocument> for RbmParams {
    type Error = Error;

    fn try_from(doc: RbmDocument) -> Result<Self> {
        let d = doc.weights.len();
        let m = doc.hidden_bias.len();
        let mut flat = Vec::with_capacity(d * m);
        for row in &doc.weights {
            check_dim("weight row", m, row.len())?;
            flat.extend_from_slice(row);
        }
        let weights = DMatrix::from_row_slice(d, m, &flat);
        RbmParams::new(
            weights,
            DVector::from_vec(doc.visible_bias),
            DVector::from_vec(doc.hidden_bias),
        )
    }
}

impl RbmParams {
    pub fn new(
        weights: DMatrix<f64>,
        visible_bias: DVector<f64>,
        hidden_bias: DVector<f64>,
    ) -> Result<Self> {
        let (d, m) = weights.shape();
        if d == 0 || m == 0 {
            return Err(Error::invalid("weights", "need d >= 1 and m >= 1"));
        }
        check_dim("visible bias", d, visible_bias.len())?;
        check_dim("hidden bias", m, hidden_bias.len())?;
        let all_finite = weights.iter().all(|v| v.is_finite())
            && visible_bias.iter().all(|v| v.is_finite())
            && hidden_bias.iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("rbm params", "non-finite entry"));
        }
        Ok(Self {
            weights,
            visible_bias,
            hidden_bias,
        })
    }

    /// Builds parameters from a row-major `d x m` weight slice.
    pub fn from_parts(d: usize, m: usize, weights_row_major: &[f64], a: &[f64], b: &[f64]) -> Result<Self> {
        check_dim("weights", d * m, weights_row_major.len())?;
        Self::new(
            DMatrix::from_row_slice(d, m, weights_row_major),
            DVector::from_column_slice(a),
            DVector::from_column_slice(b),
        )
    }

    pub fn zeros(d: usize, m: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(d, m), DVector::zeros(d), DVector::zeros(m))
    }

    #[inline]
    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    #[inline]
    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn visible_bias(&self) -> &DVector<f64> {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &DVector<f64> {
        &self.hidden_bias
    }

    /// `E(x, h) = -(aᵀx + bᵀh + xᵀWh)`.
    pub fn energy(&self, x: &[u8], h: &[u8]) -> Result<f64> {
        check_dim("visible vector x", self.n_visible(), x.len())?;
        check_dim("hidden vector h", self.n_hidden(), h.len())?;
        Ok(self.energy_unchecked(x, h))
    }

    pub(crate) fn energy_unchecked(&self, x: &[u8], h: &[u8]) -> f64 {
        let mut e = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 1 {
                e += self.visible_bias[i];
            }
        }
        for (j, &hj) in h.iter().enumerate() {
            if hj == 1 {
                e += self.hidden_bias[j] + self.visible_dot_column(x, j);
            }
        }
        -e
    }

    /// `xᵀ W[:, j]` for binary `x`.
    #[inline]
    fn visible_dot_column(&self, x: &[u8], j: usize) -> f64 {
        let col = self.weights.column(j);
        x.iter()
            .zip(col.iter())
            .filter(|(&xi, _)| xi == 1)
            .map(|(_, w)| w)
            .sum()
    }

    /// Pre-activation `b_j + xᵀ W[:, j]` of hidden unit `j`.
    #[inline]
    pub(crate) fn hidden_input(&self, x: &[u8], j: usize) -> f64 {
        self.hidden_bias[j] + self.visible_dot_column(x, j)
    }

    pub(crate) fn hidden_probs_into(&self, x: &[u8], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = sigmoid(self.hidden_input(x, j));
        }
    }

    pub(crate) fn visible_probs_into(&self, h: &[u8], out: &mut [f64]) {
        out.copy_from_slice(self.visible_bias.as_slice());
        for (j, &hj) in h.iter().enumerate() {
            if hj == 1 {
                for (o, w) in out.iter_mut().zip(self.weights.column(j).iter()) {
                    *o += w;
                }
            }
        }
        for o in out.iter_mut() {
            *o = sigmoid(*o);
        }
    }

    /// `p(h_j = 1 | x)` for every hidden unit.
    pub fn hidden_activation(&self, x: &[u8]) -> Result<Vec<f64>> {
        check_dim("visible vector x", self.n_visible(), x.len())?;
        let mut out = vec![0.0; self.n_hidden()];
        self.hidden_probs_into(x, &mut out);
        Ok(out)
    }

    /// `p(x_i = 1 | h)` for every visible unit.
    pub fn visible_activation(&self, h: &[u8]) -> Result<Vec<f64>> {
        check_dim("hidden vector h", self.n_hidden(), h.len())?;
        let mut out = vec![0.0; self.n_visible()];
        self.visible_probs_into(h, &mut out);
        Ok(out)
    }

    /// `F(x) = -aᵀx - Σ_j log(1 + exp(b_j + xᵀW[:, j]))`, so that
    /// `p(x) = e^{-F(x)} / Σ_x' e^{-F(x')}`.
    pub fn free_energy(&self, x: &[u8]) -> Result<f64> {
        check_dim("visible vector x", self.n_visible(), x.len())?;
        Ok(self.free_energy_unchecked(x))
    }

    pub(crate) fn free_energy_unchecked(&self, x: &[u8]) -> f64 {
        let linear: f64 = x
            .iter()
            .zip(self.visible_bias.iter())
            .filter(|(&xi, _)| xi == 1)
            .map(|(_, a)| a)
            .sum();
        let hidden: f64 = (0..self.n_hidden())
            .map(|j| softplus(self.hidden_input(x, j)))
            .sum();
        -linear - hidden
    }

    /// `log Z` by enumerating all `2^d` visible states.
    pub fn log_partition(&self) -> Result<f64> {
        let d = self.n_visible();
        if d > MAX_ENUM_VISIBLE {
            return Err(Error::EnumerationLimit {
                what: "visible layer",
                dim: d,
                limit: MAX_ENUM_VISIBLE,
            });
        }
        let mut x = vec![0u8; d];
        let neg_free: Vec<f64> = (0..1usize << d)
            .map(|idx| {
                unpack_bits(idx, &mut x);
                -self.free_energy_unchecked(&x)
            })
            .collect();
        Ok(log_sum_exp(&neg_free))
    }

    /// `Σ_i log p(x_i)` with an exactly enumerated partition function.
    pub fn exact_log_likelihood(&self, data: &PredictionMatrix) -> Result<f64> {
        check_dim("data columns", self.n_visible(), data.n_cols())?;
        let log_z = self.log_partition()?;
        let unnorm: f64 = data.rows().map(|x| -self.free_energy_unchecked(x)).sum();
        Ok(unnorm - data.n_rows() as f64 * log_z)
    }

    /// Mean per-row exact log-likelihood.
    pub fn mean_log_likelihood(&self, data: &PredictionMatrix) -> Result<f64> {
        Ok(self.exact_log_likelihood(data)? / data.n_rows() as f64)
    }

    /// The same model with hidden units reordered: new unit `k` is old unit `perm[k]`.
    pub fn permute_hidden(&self, perm: &[usize]) -> Result<Self> {
        check_dim("permutation", self.n_hidden(), perm.len())?;
        let weights = DMatrix::from_fn(self.n_visible(), perm.len(), |i, k| {
            self.weights[(i, perm[k])]
        });
        let hidden_bias = DVector::from_fn(perm.len(), |k, _| self.hidden_bias[perm[k]]);
        Self::new(weights, self.visible_bias.clone(), hidden_bias)
    }

    /// Draws one hidden vector per row of `data` from `p(h | x)`.
    pub fn sample_hidden_representation<R: Rng + ?Sized>(
        &self,
        data: &PredictionMatrix,
        rng: &mut R,
    ) -> Result<PredictionMatrix> {
        check_dim("data columns", self.n_visible(), data.n_cols())?;
        let m = self.n_hidden();
        let mut probs = vec![0.0; m];
        let mut values = Vec::with_capacity(data.n_rows() * m);
        for x in data.rows() {
            self.hidden_probs_into(x, &mut probs);
            values.extend(probs.iter().map(|&p| rng::bernoulli(rng, p)));
        }
        PredictionMatrix::new(data.n_rows(), m, values)
    }
}

/// Draws each unit independently as Bernoulli(`activations[j]`).
pub fn sample_layer<R: Rng + ?Sized>(activations: &[f64], rng: &mut R) -> Result<Vec<u8>> {
    if let Some(p) = activations.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(
            "activations",
            format!("probability {p} outside [0, 1]"),
        ));
    }
    Ok(activations.iter().map(|&p| rng::bernoulli(rng, p)).collect())
}

/// A parameter-shaped update direction: `(ΔW, Δa, Δb)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: DMatrix<f64>,
    pub visible_bias: DVector<f64>,
    pub hidden_bias: DVector<f64>,
}

impl Gradient {
    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            weights: DMatrix::zeros(d, m),
            visible_bias: DVector::zeros(d),
            hidden_bias: DVector::zeros(m),
        }
    }

    /// Flattened as `[W (column-major), a, b]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .chain(self.visible_bias.iter())
            .chain(self.hidden_bias.iter())
            .copied()
            .collect()
    }
}

/// Reusable buffers for one CD update.
struct CdWorkspace {
    pos_h: Vec<f64>,
    neg_h: Vec<f64>,
    vis_p: Vec<f64>,
    h: Vec<u8>,
    v: Vec<u8>,
}

impl CdWorkspace {
    fn new(d: usize, m: usize) -> Self {
        Self {
            pos_h: vec![0.0; m],
            neg_h: vec![0.0; m],
            vis_p: vec![0.0; d],
            h: vec![0; m],
            v: vec![0; d],
        }
    }
}

/// Accumulates the CD-k statistics of one data row into `grad` (unnormalized).
fn accumulate_cd<R: Rng + ?Sized>(
    params: &RbmParams,
    x: &[u8],
    k: usize,
    ws: &mut CdWorkspace,
    grad: &mut Gradient,
    rng: &mut R,
) {
    let d = params.n_visible();
    let m = params.n_hidden();
    params.hidden_probs_into(x, &mut ws.pos_h);
    for j in 0..m {
        ws.h[j] = rng::bernoulli(rng, ws.pos_h[j]);
    }
    for step in 0..k {
        params.visible_probs_into(&ws.h, &mut ws.vis_p);
        for i in 0..d {
            ws.v[i] = rng::bernoulli(rng, ws.vis_p[i]);
        }
        params.hidden_probs_into(&ws.v, &mut ws.neg_h);
        if step + 1 < k {
            for j in 0..m {
                ws.h[j] = rng::bernoulli(rng, ws.neg_h[j]);
            }
        }
    }
    let gw = grad.weights.as_mut_slice();
    for j in 0..m {
        let col = &mut gw[j * d..(j + 1) * d];
        let (p, q) = (ws.pos_h[j], ws.neg_h[j]);
        for i in 0..d {
            col[i] += x[i] as f64 * p - ws.v[i] as f64 * q;
        }
        grad.hidden_bias[j] += p - q;
    }
    for i in 0..d {
        grad.visible_bias[i] += x[i] as f64 - ws.v[i] as f64;
    }
}

/// CD-k estimate of the mean log-likelihood gradient over `batch`.
///
/// Positive statistics use `p(h | x)` at the data; negative statistics use
/// the visible sample after `k` Gibbs steps and `p(h | x̃)` at that sample.
pub fn cd_step<R: Rng + ?Sized>(
    params: &RbmParams,
    batch: &PredictionMatrix,
    k: usize,
    rng: &mut R,
) -> Result<Gradient> {
    check_dim("batch columns", params.n_visible(), batch.n_cols())?;
    if k < 1 {
        return Err(Error::invalid("k", "CD needs at least one Gibbs step"));
    }
    let (d, m) = (params.n_visible(), params.n_hidden());
    let mut grad = Gradient::zeros(d, m);
    let mut ws = CdWorkspace::new(d, m);
    for x in batch.rows() {
        accumulate_cd(params, x, k, &mut ws, &mut grad, rng);
    }
    let scale = 1.0 / batch.n_rows() as f64;
    grad.weights *= scale;
    grad.visible_bias *= scale;
    grad.hidden_bias *= scale;
    Ok(grad)
}

/// Optimization schedule for [`train_rbm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub cd_k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Momentum used for the first `momentum_switch_epoch` epochs.
    pub initial_momentum: f64,
    pub momentum: f64,
    pub momentum_switch_epoch: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            cd_k: 1,
            epochs: 50,
            batch_size: 100,
            initial_momentum: 0.5,
            momentum: 0.9,
            momentum_switch_epoch: 5,
            weight_decay: 2e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if self.cd_k == 0 {
            return Err(Error::invalid("cd_k", "must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        for (name, m) in [
            ("initial_momentum", self.initial_momentum),
            ("momentum", self.momentum),
        ] {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::invalid(name, "must lie in [0, 1)"));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay", "must be non-negative"));
        }
        Ok(())
    }

    fn momentum_at(&self, epoch: usize) -> f64 {
        if epoch < self.momentum_switch_epoch {
            self.initial_momentum
        } else {
            self.momentum
        }
    }
}

/// Initial parameters: `W ~ N(0, 0.01²)`, `a_i = logit(mean of column i)`, `b = 0`.
pub fn initial_params<R: Rng + ?Sized>(
    data: &PredictionMatrix,
    m: usize,
    rng: &mut R,
) -> Result<RbmParams> {
    let d = data.n_cols();
    let weights = DMatrix::from_fn(d, m, |_, _| 0.01 * rng::standard_normal(rng));
    let a: Vec<f64> = data.column_means().into_iter().map(logit).collect();
    RbmParams::new(weights, DVector::from_vec(a), DVector::zeros(m))
}

/// Trains an RBM with `m` hidden units, seeded from `config.seed`.
pub fn train_rbm(data: &PredictionMatrix, m: usize, config: &TrainConfig) -> Result<RbmParams> {
    let mut rng = rng::stream(config.seed);
    train_rbm_with_rng(data, m, config, &mut rng)
}

/// [`train_rbm`] drawing from a caller-supplied stream.
pub fn train_rbm_with_rng<R: Rng + ?Sized>(
    data: &PredictionMatrix,
    m: usize,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<RbmParams> {
    config.validate()?;
    if m == 0 {
        return Err(Error::invalid("m", "need at least one hidden unit"));
    }
    let mut params = initial_params(data, m, rng)?;
    let (d, n) = (data.n_cols(), data.n_rows());
    let mut vel = Gradient::zeros(d, m);
    let mut grad = Gradient::zeros(d, m);
    let mut ws = CdWorkspace::new(d, m);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..config.epochs {
        let momentum = config.momentum_at(epoch);
        order.shuffle(rng);
        for batch in order.chunks(config.batch_size) {
            grad.weights.fill(0.0);
            grad.visible_bias.fill(0.0);
            grad.hidden_bias.fill(0.0);
            for &row in batch {
                accumulate_cd(&params, data.row(row), config.cd_k, &mut ws, &mut grad, rng);
            }
            let step = config.learning_rate / batch.len() as f64;
            let decay = config.learning_rate * config.weight_decay;
            for ((v, g), w) in vel
                .weights
                .iter_mut()
                .zip(grad.weights.iter())
                .zip(params.weights.iter())
            {
                *v = momentum * *v + step * g - decay * w;
            }
            for (v, g) in vel.visible_bias.iter_mut().zip(grad.visible_bias.iter()) {
                *v = momentum * *v + step * g;
            }
            for (v, g) in vel.hidden_bias.iter_mut().zip(grad.hidden_bias.iter()) {
                *v = momentum * *v + step * g;
            }
            params.weights += &vel.weights;
            params.visible_bias += &vel.visible_bias;
            params.hidden_bias += &vel.hidden_bias;
        }
        log::trace!("rbm d={d} m={m} epoch {epoch} done");
    }
    if !params.weights.iter().all(|w| w.is_finite()) {
        return Err(Error::invalid("training", "parameters diverged"));
    }
    Ok(params)
}
