//! Equivalence between a single-hidden-unit RBM and the conditional
//! independence (Dawid-Skene) model.
//!
//! With `w = W[:, 0]` and scalar hidden bias `b`:
//!
//! ```text
//! ψ_i = σ(a_i + w_i)        η_i = 1 - σ(a_i)
//! π   = σ(b + Σ_i softplus(a_i + w_i) - Σ_i softplus(a_i))
//! ```
//!
//! The sums over `x ∈ {0,1}^d` in the prior factor into products, so both
//! directions are O(d) and evaluated in log space.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::math::{clamp_prob, log_add_exp, logit, sigmoid, softplus, unpack_bits, PROB_EPS};
use crate::rbm::RbmParams;

/// Largest `d` accepted by [`joint_table`].
pub const MAX_JOINT_TABLE_DIM: usize = 12;

/// Sensitivities `ψ_i = P(X_i=1|Y=1)`, specificities `η_i = P(X_i=0|Y=0)`
/// and class prior `π = P(Y=1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondIndParams {
    pub psi: Vec<f64>,
    pub eta: Vec<f64>,
    pub pi: f64,
}

impl CondIndParams {
    pub fn new(psi: Vec<f64>, eta: Vec<f64>, pi: f64) -> Result<Self> {
        check_dim("eta", psi.len(), eta.len())?;
        if psi.is_empty() {
            return Err(Error::invalid("psi", "need at least one classifier"));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !psi.iter().chain(eta.iter()).all(|&v| in_unit(v)) || !in_unit(pi) {
            return Err(Error::invalid("cond-ind params", "probabilities must lie in [0, 1]"));
        }
        Ok(Self { psi, eta, pi })
    }

    /// Symmetric channels: `ψ_i = η_i = accuracy_i`.
    pub fn symmetric(accuracy: Vec<f64>, pi: f64) -> Result<Self> {
        Self::new(accuracy.clone(), accuracy, pi)
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    /// The same distribution with the label renamed `Y -> 1 - Y`.
    pub fn flipped(&self) -> Self {
        Self {
            psi: self.eta.iter().map(|e| 1.0 - e).collect(),
            eta: self.psi.iter().map(|p| 1.0 - p).collect(),
            pi: 1.0 - self.pi,
        }
    }

    /// Copy with every probability clamped to `[1e-6, 1 - 1e-6]`, warning on change.
    pub fn clamped(&self) -> Self {
        let mut changed = false;
        let mut clamp = |v: f64| {
            let c = clamp_prob(v);
            changed |= c != v;
            c
        };
        let out = Self {
            psi: self.psi.iter().map(|&v| clamp(v)).collect(),
            eta: self.eta.iter().map(|&v| clamp(v)).collect(),
            pi: clamp(self.pi),
        };
        if changed {
            log::warn!("cond-ind parameters clamped to [{PROB_EPS}, {}]", 1.0 - PROB_EPS);
        }
        out
    }

    /// `log P(X = x | Y = 1)` and `log P(X = x | Y = 0)`.
    fn class_log_likelihoods(&self, x: &[u8]) -> (f64, f64) {
        let mut l1 = 0.0;
        let mut l0 = 0.0;
        for ((&xi, &psi), &eta) in x.iter().zip(&self.psi).zip(&self.eta) {
            if xi == 1 {
                l1 += psi.ln();
                l0 += (1.0 - eta).ln();
            } else {
                l1 += (1.0 - psi).ln();
                l0 += eta.ln();
            }
        }
        (l1, l0)
    }

    /// `log P(X = x)`, with parameters as given (not clamped).
    pub fn log_marginal(&self, x: &[u8]) -> f64 {
        let (l1, l0) = self.class_log_likelihoods(x);
        log_add_exp(self.pi.ln() + l1, (1.0 - self.pi).ln() + l0)
    }
}

fn require_single_hidden(params: &RbmParams) -> Result<()> {
    if params.n_hidden() != 1 {
        return Err(Error::invalid(
            "rbm params",
            format!("expected exactly one hidden unit, found {}", params.n_hidden()),
        ));
    }
    Ok(())
}

/// Maps a one-hidden-unit RBM `(w, a, b)` to the equivalent `(ψ, η, π)`.
pub fn rbm_to_condind(params: &RbmParams) -> Result<CondIndParams> {
    require_single_hidden(params)?;
    let a = params.visible_bias();
    let w = params.weights().column(0);
    let b = params.hidden_bias()[0];
    let psi = a.iter().zip(w.iter()).map(|(a, w)| sigmoid(a + w)).collect();
    let eta = a.iter().map(|a| sigmoid(-a)).collect();
    let log_on: f64 = a.iter().zip(w.iter()).map(|(a, w)| softplus(a + w)).sum();
    let log_off: f64 = a.iter().map(|&a| softplus(a)).sum();
    Ok(CondIndParams {
        psi,
        eta,
        pi: sigmoid(b + log_on - log_off),
    })
}

/// Inverse of [`rbm_to_condind`]. Probabilities are clamped away from 0 and 1 first.
pub fn condind_to_rbm(theta: &CondIndParams) -> Result<RbmParams> {
    let theta = theta.clamped();
    let d = theta.dim();
    let a: Vec<f64> = theta.eta.iter().map(|&e| -logit(e)).collect();
    let w: Vec<f64> = theta
        .psi
        .iter()
        .zip(&a)
        .map(|(&p, &a)| logit(p) - a)
        .collect();
    let log_off: f64 = a.iter().map(|&a| softplus(a)).sum();
    let log_on: f64 = a.iter().zip(&w).map(|(a, w)| softplus(a + w)).sum();
    let b = logit(theta.pi) + log_off - log_on;
    RbmParams::new(
        DMatrix::from_column_slice(d, 1, &w),
        DVector::from_vec(a),
        DVector::from_element(1, b),
    )
}

/// `P(Y = 1 | X = x)` under the conditional independence model.
pub fn condind_posterior(theta: &CondIndParams, x: &[u8]) -> Result<f64> {
    check_dim("x", theta.dim(), x.len())?;
    let theta = theta.clamped();
    let (l1, l0) = theta.class_log_likelihoods(x);
    Ok(sigmoid_unclamped(theta.pi.ln() + l1 - (1.0 - theta.pi).ln() - l0))
}

/// Sigmoid without the logit clamp, for posteriors that must reach 1 - 1e-13.
fn sigmoid_unclamped(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `P(H = 1 | X = x) = σ(b + xᵀw)` for a one-hidden-unit RBM.
pub fn rbm_posterior(params: &RbmParams, x: &[u8]) -> Result<f64> {
    require_single_hidden(params)?;
    check_dim("x", params.n_visible(), x.len())?;
    Ok(sigmoid(params.hidden_input(x, 0)))
}

/// Either side of the equivalence, for [`joint_table`].
#[derive(Debug, Clone, Copy)]
pub enum JointModel<'a> {
    Rbm(&'a RbmParams),
    CondInd(&'a CondIndParams),
}

/// Exhaustive `p(X = x, label = y)`; entry `[x][y]` with `x` the bit-packed
/// pattern (bit `i` is classifier `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub dim: usize,
    pub probs: Vec<[f64; 2]>,
}

impl JointTable {
    pub fn total(&self) -> f64 {
        self.probs.iter().map(|p| p[0] + p[1]).sum()
    }

    pub fn marginal(&self, pattern: usize) -> f64 {
        self.probs[pattern][0] + self.probs[pattern][1]
    }

    pub fn max_abs_diff(&self, other: &JointTable) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .flat_map(|(a, b)| [(a[0] - b[0]).abs(), (a[1] - b[1]).abs()])
            .fold(0.0, f64::max)
    }
}

pub fn joint_table(model: JointModel<'_>) -> Result<JointTable> {
    let d = match model {
        JointModel::Rbm(p) => {
            require_single_hidden(p)?;
            p.n_visible()
        }
        JointModel::CondInd(t) => t.dim(),
    };
    if d > MAX_JOINT_TABLE_DIM {
        return Err(Error::EnumerationLimit {
            what: "joint table",
            dim: d,
            limit: MAX_JOINT_TABLE_DIM,
        });
    }
    let mut x = vec![0u8; d];
    let mut probs = Vec::with_capacity(1 << d);
    match model {
        JointModel::Rbm(p) => {
            let mut logs = Vec::with_capacity(2 << d);
            for idx in 0..1usize << d {
                unpack_bits(idx, &mut x);
                logs.push([-p.energy_unchecked(&x, &[0]), -p.energy_unchecked(&x, &[1])]);
            }
            let flat: Vec<f64> = logs.iter().flatten().copied().collect();
            let log_z = crate::math::log_sum_exp(&flat);
            probs.extend(logs.iter().map(|l| [(l[0] - log_z).exp(), (l[1] - log_z).exp()]));
        }
        JointModel::CondInd(t) => {
            for idx in 0..1usize << d {
                unpack_bits(idx, &mut x);
                let (l1, l0) = t.class_log_likelihoods(&x);
                probs.push([((1.0 - t.pi).ln() + l0).exp(), (t.pi.ln() + l1).exp()]);
            }
        }
    }
    Ok(JointTable { dim: d, probs })
}
