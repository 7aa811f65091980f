//! Brute-force enumeration over joint RBM configurations.
//!
//! These routines only call [`RbmParams::energy`] and sum over every `(x, h)`
//! state, so they share no code path with the closed forms they check.

use crate::data::PredictionMatrix;
use crate::math::{log_sum_exp, unpack_bits};
use crate::rbm::{Gradient, RbmParams};

/// `Σ_h exp(-E(x, h))` over all `2^m` hidden states.
pub fn sum_hidden_boltzmann(params: &RbmParams, x: &[u8]) -> f64 {
    let m = params.n_hidden();
    let mut h = vec![0u8; m];
    (0..1usize << m)
        .map(|idx| {
            unpack_bits(idx, &mut h);
            (-params.energy_unchecked(x, &h)).exp()
        })
        .sum()
}

/// `log Z` from all `2^(d+m)` joint states.
pub fn joint_log_partition(params: &RbmParams) -> f64 {
    let (d, m) = (params.n_visible(), params.n_hidden());
    let mut x = vec![0u8; d];
    let mut h = vec![0u8; m];
    let mut terms = Vec::with_capacity(1 << (d + m));
    for xi in 0..1usize << d {
        unpack_bits(xi, &mut x);
        for hi in 0..1usize << m {
            unpack_bits(hi, &mut h);
            terms.push(-params.energy_unchecked(&x, &h));
        }
    }
    log_sum_exp(&terms)
}

/// `Σ_i log p(x_i)` computed entirely from joint energies.
pub fn joint_log_likelihood(params: &RbmParams, data: &PredictionMatrix) -> f64 {
    let log_z = joint_log_partition(params);
    let m = params.n_hidden();
    let mut h = vec![0u8; m];
    data.rows()
        .map(|x| {
            let terms: Vec<f64> = (0..1usize << m)
                .map(|hi| {
                    unpack_bits(hi, &mut h);
                    -params.energy_unchecked(x, &h)
                })
                .collect();
            log_sum_exp(&terms) - log_z
        })
        .sum()
}

/// Exact gradient of the mean log-likelihood of `data`, by enumeration.
///
/// `∂/∂W = <x hᵀ>_{data, p(h|x)} - <x hᵀ>_{p(x, h)}`, likewise for the biases.
pub fn exact_gradient(params: &RbmParams, data: &PredictionMatrix) -> Gradient {
    let (d, m) = (params.n_visible(), params.n_hidden());
    let mut grad = Gradient::zeros(d, m);
    let mut h = vec![0u8; m];

    // positive phase: conditional expectation of h for each data row
    for x in data.rows() {
        let weights: Vec<f64> = (0..1usize << m)
            .map(|hi| {
                unpack_bits(hi, &mut h);
                -params.energy_unchecked(x, &h)
            })
            .collect();
        let norm = log_sum_exp(&weights);
        for (hi, lw) in weights.iter().enumerate() {
            let p = (lw - norm).exp() / data.n_rows() as f64;
            unpack_bits(hi, &mut h);
            add_outer(&mut grad, x, &h, p);
        }
    }

    // negative phase: full joint expectation
    let log_z = joint_log_partition(params);
    let mut x = vec![0u8; d];
    for xi in 0..1usize << d {
        unpack_bits(xi, &mut x);
        for hi in 0..1usize << m {
            unpack_bits(hi, &mut h);
            let p = (-params.energy_unchecked(&x, &h) - log_z).exp();
            add_outer(&mut grad, &x, &h, -p);
        }
    }
    grad
}

fn add_outer(grad: &mut Gradient, x: &[u8], h: &[u8], weight: f64) {
    for (i, &xi) in x.iter().enumerate() {
        if xi == 1 {
            grad.visible_bias[i] += weight;
            for (j, &hj) in h.iter().enumerate() {
                if hj == 1 {
                    grad.weights[(i, j)] += weight;
                }
            }
        }
    }
    for (j, &hj) in h.iter().enumerate() {
        if hj == 1 {
            grad.hidden_bias[j] += weight;
        }
    }
}
