//! Posterior estimation by pattern counting over a large sample.

use rand::Rng;

use super::GeneratorModel;
use crate::data::PredictionMatrix;
use crate::error::{check_dim, Error, Result};
use crate::math::pack_bits;
use crate::metrics::balanced_accuracy;

/// Largest `d` for which the pattern table is allocated.
pub const MAX_ORACLE_DIM: usize = 20;
pub const ORACLE_SAMPLE: usize = 1_000_000;
pub const EVAL_SAMPLE: usize = 10_000;

/// Empirical `P(Y = 1 | X = x)` from label counts per observed pattern.
#[derive(Debug, Clone)]
pub struct PosteriorOracle {
    dim: usize,
    /// `counts[x] = [#(y=0, X=x), #(y=1, X=x)]`
    counts: Vec<[u32; 2]>,
}

impl PosteriorOracle {
    pub fn from_sample(data: &PredictionMatrix, labels: &[u8]) -> Result<Self> {
        check_dim("labels", data.n_rows(), labels.len())?;
        let dim = data.n_cols();
        if dim > MAX_ORACLE_DIM {
            return Err(Error::EnumerationLimit {
                what: "posterior oracle",
                dim,
                limit: MAX_ORACLE_DIM,
            });
        }
        let mut counts = vec![[0u32; 2]; 1 << dim];
        for (x, &y) in data.rows().zip(labels) {
            counts[pack_bits(x)][y as usize] += 1;
        }
        Ok(Self { dim, counts })
    }

    /// Builds the table from `sample_size` fresh draws of `generator`.
    pub fn estimate<R: Rng + ?Sized>(
        generator: &GeneratorModel,
        sample_size: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if generator.dim() > MAX_ORACLE_DIM {
            return Err(Error::EnumerationLimit {
                what: "posterior oracle",
                dim: generator.dim(),
                limit: MAX_ORACLE_DIM,
            });
        }
        let (data, labels) = generator.generate(sample_size, rng)?;
        Self::from_sample(&data, &labels)
    }

    pub fn count(&self, x: &[u8]) -> u32 {
        let c = self.counts[pack_bits(x)];
        c[0] + c[1]
    }

    /// Estimated posterior; unseen patterns fall back to the majority vote of `x` (0 or 1).
    pub fn posterior(&self, x: &[u8]) -> Result<f64> {
        check_dim("x", self.dim, x.len())?;
        let c = self.counts[pack_bits(x)];
        let total = c[0] + c[1];
        if total == 0 {
            let ones = x.iter().filter(|&&v| v == 1).count();
            return Ok(if 2 * ones >= x.len() { 1.0 } else { 0.0 });
        }
        Ok(c[1] as f64 / total as f64)
    }
}

/// Balanced accuracy of the thresholded oracle posterior on a fresh sample.
pub fn bayes_optimal_accuracy_with<R: Rng + ?Sized>(
    generator: &GeneratorModel,
    oracle_sample: usize,
    eval_sample: usize,
    rng: &mut R,
) -> Result<f64> {
    let oracle = PosteriorOracle::estimate(generator, oracle_sample, rng)?;
    let (data, labels) = generator.generate(eval_sample, rng)?;
    let pred: Vec<u8> = data
        .rows()
        .map(|x| oracle.posterior(x).map(|p| (p >= 0.5) as u8))
        .collect::<Result<_>>()?;
    balanced_accuracy(&pred, &labels)
}

/// [`bayes_optimal_accuracy_with`] at 10⁶ estimation draws and 10⁴ evaluation rows.
pub fn bayes_optimal_accuracy<R: Rng + ?Sized>(generator: &GeneratorModel, rng: &mut R) -> Result<f64> {
    bayes_optimal_accuracy_with(generator, ORACLE_SAMPLE, EVAL_SAMPLE, rng)
}
