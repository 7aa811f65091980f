//! Reference aggregators: majority vote, Dawid-Skene EM and the spectral
//! meta-learner.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::PredictionMatrix;
use crate::mapping::{condind_posterior, CondIndParams};
use crate::math::clamp_prob;

/// Label 1 iff at least half the classifiers say 1 (ties go to 1).
pub fn majority_vote(data: &PredictionMatrix) -> Vec<u8> {
    let d = data.n_cols();
    data.rows()
        .map(|r| {
            let ones = r.iter().filter(|&&v| v == 1).count();
            (2 * ones >= d) as u8
        })
        .collect()
}

/// Fraction of positions where `a` and `b` agree.
pub fn agreement(a: &[u8], b: &[u8]) -> f64 {
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    same as f64 / a.len().max(1) as f64
}

pub fn threshold(probs: &[f64]) -> Vec<u8> {
    probs.iter().map(|&p| (p >= 0.5) as u8).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsFit {
    pub theta: CondIndParams,
    /// `P(Y = 1 | x_i)` for each row, after flip resolution.
    pub posterior: Vec<f64>,
    /// Observed-data log-likelihood after each M-step.
    pub log_likelihood: Vec<f64>,
    pub flipped: bool,
}

impl DsFit {
    pub fn labels(&self) -> Vec<u8> {
        threshold(&self.posterior)
    }
}

fn observed_log_likelihood(theta: &CondIndParams, data: &PredictionMatrix) -> f64 {
    data.rows().map(|x| theta.log_marginal(x)).sum()
}

/// M-step: sensitivities, specificities and prior from soft labels `q`.
fn m_step(data: &PredictionMatrix, q: &[f64]) -> CondIndParams {
    let d = data.n_cols();
    let mut on_pos = vec![0.0; d];
    let mut off_neg = vec![0.0; d];
    let (mut q_sum, mut nq_sum) = (0.0, 0.0);
    for (x, &qi) in data.rows().zip(q) {
        q_sum += qi;
        nq_sum += 1.0 - qi;
        for j in 0..d {
            if x[j] == 1 {
                on_pos[j] += qi;
            } else {
                off_neg[j] += 1.0 - qi;
            }
        }
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.5 };
    CondIndParams {
        psi: on_pos.iter().map(|&s| clamp_prob(ratio(s, q_sum))).collect(),
        eta: off_neg.iter().map(|&s| clamp_prob(ratio(s, nq_sum))).collect(),
        pi: clamp_prob(q_sum / q.len() as f64),
    }
}

/// Dawid-Skene EM for binary labels, initialized from majority-vote hard labels.
pub fn ds_em(data: &PredictionMatrix, options: EmOptions) -> DsFit {
    if data.n_cols() < 3 {
        log::warn!(
            "ds_em with d = {} < 3: the model is not identifiable",
            data.n_cols()
        );
    }
    let vote = majority_vote(data);
    let mut q: Vec<f64> = vote.iter().map(|&v| v as f64).collect();
    let mut theta = m_step(data, &q);
    let mut trace = vec![observed_log_likelihood(&theta, data)];

    for _ in 1..options.max_iters.max(1) {
        for (qi, x) in q.iter_mut().zip(data.rows()) {
            *qi = condind_posterior(&theta, x).expect("row width matches theta");
        }
        theta = m_step(data, &q);
        let ll = observed_log_likelihood(&theta, data);
        let prev = *trace.last().unwrap();
        trace.push(ll);
        if ll - prev < options.tol {
            break;
        }
    }

    let mut posterior: Vec<f64> = data
        .rows()
        .map(|x| condind_posterior(&theta, x).expect("row width matches theta"))
        .collect();
    let flipped = agreement(&threshold(&posterior), &vote) < 0.5;
    if flipped {
        theta = theta.flipped();
        posterior.iter_mut().for_each(|p| *p = 1.0 - *p);
    }
    DsFit {
        theta,
        posterior,
        log_likelihood: trace,
        flipped,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmlFit {
    /// Leading eigenvector of the rank-one fit, sign-aligned with majority vote.
    pub weights: Vec<f64>,
    pub eigenvalue: f64,
    pub labels: Vec<u8>,
}

const SML_OUTER_PASSES: usize = 10;
const SML_POWER_STEPS: usize = 200;

/// Leading (largest algebraic) eigenpair of a symmetric matrix by shifted
/// power iteration from the all-ones vector.
fn leading_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let d = m.nrows();
    // Gershgorin bound makes the shifted matrix positive semidefinite
    let shift = (0..d)
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let shifted = m + DMatrix::identity(d, d) * shift;
    let mut v = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    for _ in 0..SML_POWER_STEPS {
        let next = &shifted * &v;
        let norm = next.norm();
        if norm == 0.0 {
            break;
        }
        v = next / norm;
    }
    let lambda = v.dot(&(m * &v));
    (lambda, v)
}

/// Spectral meta-learner: weights from the rank-one structure of the
/// off-diagonal covariance of the ±1 predictions.
pub fn sml_predict(data: &PredictionMatrix) -> SmlFit {
    let (n, d) = (data.n_rows(), data.n_cols());
    if d < 3 {
        log::warn!("sml_predict with d = {d} < 3: rank-one fit is underdetermined");
    }
    let means: Vec<f64> = data.column_means().iter().map(|m| 2.0 * m - 1.0).collect();
    let mut q = DMatrix::<f64>::zeros(d, d);
    for x in data.rows() {
        for i in 0..d {
            let zi = 2.0 * x[i] as f64 - 1.0 - means[i];
            for j in i..d {
                let zj = 2.0 * x[j] as f64 - 1.0 - means[j];
                q[(i, j)] += zi * zj;
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..d {
        for j in i..d {
            q[(i, j)] /= denom;
            q[(j, i)] = q[(i, j)];
        }
    }
    let dead: Vec<bool> = (0..d).map(|i| q[(i, i)] <= 1e-12).collect();
    for (i, &is_dead) in dead.iter().enumerate() {
        if is_dead {
            log::warn!("column {i} has zero variance; its SML weight is 0");
            for j in 0..d {
                q[(i, j)] = 0.0;
                q[(j, i)] = 0.0;
            }
        }
    }

    for i in 0..d {
        q[(i, i)] = (0..d)
            .filter(|&j| j != i)
            .map(|j| q[(i, j)].abs())
            .fold(0.0, f64::max);
    }
    let mut lambda = 0.0;
    let mut v = DVector::zeros(d);
    for _ in 0..SML_OUTER_PASSES {
        (lambda, v) = leading_eigenpair(&q);
        for i in 0..d {
            q[(i, i)] = v[i] * v[i] * lambda;
        }
    }
    for (i, &is_dead) in dead.iter().enumerate() {
        if is_dead {
            v[i] = 0.0;
        }
    }

    let score = |v: &DVector<f64>| -> Vec<u8> {
        data.rows()
            .map(|x| {
                let s: f64 = x
                    .iter()
                    .zip(v.iter())
                    .map(|(&xi, w)| w * (2.0 * xi as f64 - 1.0))
                    .sum();
                (s >= 0.0) as u8
            })
            .collect()
    };
    let mut labels = score(&v);
    if agreement(&labels, &majority_vote(data)) < 0.5 {
        v = -v;
        labels = score(&v);
    }
    SmlFit {
        weights: v.iter().copied().collect(),
        eigenvalue: lambda,
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::gen_condind;
    use crate::mapping::condind_to_rbm;
    use crate::mapping::rbm_posterior;
    use crate::metrics::balanced_accuracy;
    use crate::rng;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    #[test]
    fn majority_vote_examples() {
        let data = PredictionMatrix::from_rows(&[[1u8, 1, 0], [0, 0, 0], [1, 0, 0]]).unwrap();
        assert_eq!(majority_vote(&data), vec![1, 0, 0]);
        let tie = PredictionMatrix::from_rows(&[[1u8, 0]]).unwrap();
        assert_eq!(majority_vote(&tie), vec![1]);
    }

    #[test]
    fn em_recovers_labels_from_noiseless_channels() {
        let theta = CondIndParams::symmetric(vec![1.0; 5], 0.5).unwrap().clamped();
        let (data, labels) = gen_condind(&theta, 1000, &mut rng::stream(1)).unwrap();
        let fit = ds_em(&data, EmOptions::default());
        assert_eq!(fit.labels(), labels);
    }

    #[test]
    fn em_log_likelihood_is_monotone() {
        let mut r = rng::stream(77);
        let psi: Vec<f64> = (0..8).map(|_| r.gen_range(0.3..0.95)).collect();
        let eta: Vec<f64> = (0..8).map(|_| r.gen_range(0.3..0.95)).collect();
        let theta = CondIndParams::new(psi, eta, 0.4).unwrap();
        let (data, _) = gen_condind(&theta, 500, &mut r).unwrap();
        let fit = ds_em(&data, EmOptions::default());
        assert!(fit.log_likelihood.len() > 2);
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn em_posterior_matches_mapped_rbm() {
        let theta = CondIndParams::new(vec![0.8, 0.7, 0.9, 0.6], vec![0.75, 0.85, 0.6, 0.7], 0.35).unwrap();
        let (data, _) = gen_condind(&theta, 2000, &mut rng::stream(5)).unwrap();
        let fit = ds_em(&data, EmOptions::default());
        let rbm = condind_to_rbm(&fit.theta).unwrap();
        for (x, q) in data.rows().zip(&fit.posterior) {
            assert!((rbm_posterior(&rbm, x).unwrap() - q).abs() < 1e-10);
        }
    }

    #[test]
    fn em_runs_with_two_columns() {
        let data = PredictionMatrix::from_rows(&[[1u8, 0], [1, 1], [0, 0], [0, 1]]).unwrap();
        let fit = ds_em(&data, EmOptions::default());
        assert_eq!(fit.posterior.len(), 4);
    }

    fn condind_with_guessers(seed: u64) -> (PredictionMatrix, Vec<u8>) {
        let mut psi = vec![0.85, 0.8, 0.9, 0.75, 0.8];
        let mut eta = vec![0.8, 0.9, 0.75, 0.85, 0.8];
        psi.extend([0.5; 10]);
        eta.extend([0.5; 10]);
        let theta = CondIndParams::new(psi, eta, 0.5).unwrap();
        gen_condind(&theta, 10_000, &mut rng::stream(seed)).unwrap()
    }

    #[test]
    fn sml_downweights_random_guessers() {
        let (data, labels) = condind_with_guessers(3);
        let fit = sml_predict(&data);
        let informative = fit.weights[..5].iter().map(|w| w.abs()).sum::<f64>() / 5.0;
        let guess = fit.weights[5..].iter().map(|w| w.abs()).sum::<f64>() / 10.0;
        assert!(guess < 0.25 * informative, "{guess} vs {informative}");
        assert!(fit.weights[..5].iter().all(|&w| w > 0.0));
        assert!(balanced_accuracy(&fit.labels, &labels).unwrap() > 0.85);
    }

    #[test]
    fn sml_weights_agree_within_symmetric_groups() {
        let mut acc = vec![0.8; 4];
        acc.extend([0.65; 4]);
        let theta = CondIndParams::symmetric(acc, 0.5).unwrap();
        let (data, _) = gen_condind(&theta, 20_000, &mut rng::stream(8)).unwrap();
        let fit = sml_predict(&data);
        for group in [&fit.weights[..4], &fit.weights[4..]] {
            let mean = group.iter().sum::<f64>() / 4.0;
            let spread = group.iter().map(|w| (w - mean).abs()).fold(0.0, f64::max);
            assert!(spread < 0.1 * mean.abs(), "{group:?}");
        }
        assert!(fit.weights[0] > fit.weights[4]);
    }

    #[test]
    fn sml_unanimous_voters() {
        let theta = CondIndParams::symmetric(vec![1.0; 3], 0.5).unwrap().clamped();
        let (data, labels) = gen_condind(&theta, 500, &mut rng::stream(2)).unwrap();
        assert_eq!(sml_predict(&data).labels, labels);
    }

    #[test]
    fn sml_zero_variance_column_gets_zero_weight() {
        let mut rows = Vec::new();
        let mut r = rng::stream(6);
        for _ in 0..300 {
            let y = r.gen_range(0..2u8);
            let noisy = |r: &mut rng::Stream| if r.gen::<f64>() < 0.85 { y } else { 1 - y };
            rows.push([noisy(&mut r), noisy(&mut r), noisy(&mut r), 1]);
        }
        let data = PredictionMatrix::from_rows(&rows).unwrap();
        assert_eq!(sml_predict(&data).weights[3], 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn majority_vote_column_permutation_invariant(seed in any::<u64>(), d in 1usize..9) {
            let mut r = rng::stream(seed);
            let values: Vec<u8> = (0..40 * d).map(|_| r.gen_range(0..2)).collect();
            let data = PredictionMatrix::new(40, d, values).unwrap();
            let mut perm: Vec<usize> = (0..d).collect();
            perm.shuffle(&mut r);
            let permuted: Vec<Vec<u8>> = data.rows().map(|row| perm.iter().map(|&j| row[j]).collect()).collect();
            let permuted = PredictionMatrix::from_rows(&permuted).unwrap();
            prop_assert_eq!(majority_vote(&data), majority_vote(&permuted));
        }

        #[test]
        fn sml_weights_follow_column_permutation(seed in any::<u64>()) {
            let mut r = rng::stream(seed);
            let acc: Vec<f64> = (0..6).map(|_| r.gen_range(0.6..0.95)).collect();
            let theta = CondIndParams::symmetric(acc, 0.5).unwrap();
            let (data, _) = gen_condind(&theta, 2000, &mut r).unwrap();
            let mut perm: Vec<usize> = (0..6).collect();
            perm.shuffle(&mut r);
            let permuted: Vec<Vec<u8>> = data.rows().map(|row| perm.iter().map(|&j| row[j]).collect()).collect();
            let permuted = PredictionMatrix::from_rows(&permuted).unwrap();
            let a = sml_predict(&data).weights;
            let b = sml_predict(&permuted).weights;
            let sign = if a[perm[0]] * b[0] >= 0.0 { 1.0 } else { -1.0 };
            for (k, &j) in perm.iter().enumerate() {
                prop_assert!((a[j] - sign * b[k]).abs() < 1e-6);
            }
        }
    }
}
