//! Enumeration-based self-checks exposed through `rbmvote verify`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::data::PredictionMatrix;
use crate::datagen::{verify_lemma3, DirectedModel};
use crate::error::{Error, Result};
use crate::mapping::{condind_to_rbm, joint_table, rbm_to_condind, CondIndParams, JointModel};
use crate::oracle::exact_gradient;
use crate::rbm::{cd_step, RbmParams};
use crate::rng;

pub const BIJECTION_DRAWS: usize = 100;
pub const BIJECTION_MAX_DIM: usize = 8;
pub const LEMMA3_DRAWS: usize = 50;
pub const GRADIENT_DRAWS: usize = 10_000;
pub const GRADIENT_CD_K: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Bijection,
    Lemma3,
    Gradient,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Bijection, Suite::Lemma3, Suite::Gradient];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Bijection => "bijection",
            Suite::Lemma3 => "lemma3",
            Suite::Gradient => "gradient",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::invalid("suite", format!("expected bijection|lemma3|gradient, got {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, max_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            max_error,
            tolerance,
            // NaN never passes
            passed: max_error < tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng::stream(seed);
    let checks = match suite {
        Suite::Bijection => bijection_checks(&mut rng)?,
        Suite::Lemma3 => lemma3_checks(&mut rng)?,
        Suite::Gradient => vec![gradient_check(&mut rng)?],
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(SuiteReport {
        suite,
        seed,
        checks,
        passed,
    })
}

fn max_abs_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn flat_theta(t: &CondIndParams) -> Vec<f64> {
    t.psi.iter().chain(&t.eta).copied().chain([t.pi]).collect()
}

fn flat_lambda(p: &RbmParams) -> Vec<f64> {
    p.weights()
        .iter()
        .chain(p.visible_bias().iter())
        .chain(p.hidden_bias().iter())
        .copied()
        .collect()
}

/// RBM parameters small enough that every mapped probability stays inside
/// the clamp range, so both directions are exact inverses.
fn random_lambda<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<RbmParams> {
    let mut u = || rng.gen_range(-1.0..1.0);
    let w: Vec<f64> = (0..d).map(|_| u()).collect();
    let a: Vec<f64> = (0..d).map(|_| u()).collect();
    let b = [u()];
    RbmParams::from_parts(d, 1, &w, &a, &b)
}

fn random_theta<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CondIndParams> {
    let mut u = || rng.gen_range(0.05..0.95);
    let psi = (0..d).map(|_| u()).collect();
    let eta = (0..d).map(|_| u()).collect();
    CondIndParams::new(psi, eta, u())
}

fn bijection_checks<R: Rng + ?Sized>(rng: &mut R) -> Result<Vec<Check>> {
    let (mut lambda_gap, mut theta_gap, mut joint_gap) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..BIJECTION_DRAWS {
        let d = rng.gen_range(1..=BIJECTION_MAX_DIM);
        let lambda = random_lambda(d, rng)?;
        let theta = rbm_to_condind(&lambda)?;
        let back = condind_to_rbm(&theta)?;
        lambda_gap = lambda_gap.max(max_abs_gap(&flat_lambda(&lambda), &flat_lambda(&back)));
        let rbm_joint = joint_table(JointModel::Rbm(&lambda))?;
        let ci_joint = joint_table(JointModel::CondInd(&theta))?;
        joint_gap = joint_gap.max(rbm_joint.max_abs_diff(&ci_joint));

        let theta = random_theta(d, rng)?;
        let back = rbm_to_condind(&condind_to_rbm(&theta)?)?;
        theta_gap = theta_gap.max(max_abs_gap(&flat_theta(&theta), &flat_theta(&back)));
    }
    Ok(vec![
        Check::new("lambda->theta->lambda", lambda_gap, 1e-10),
        Check::new("theta->lambda->theta", theta_gap, 1e-10),
        Check::new("joint table", joint_gap, 1e-12),
    ])
}

fn lemma3_checks<R: Rng + ?Sized>(rng: &mut R) -> Result<Vec<Check>> {
    let (mut gap, mut norm) = (0.0f64, 0.0f64);
    for _ in 0..LEMMA3_DRAWS {
        let d = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=4);
        let report = verify_lemma3(&DirectedModel::random(d, m, 1.5, rng))?;
        gap = gap.max(report.max_abs_gap);
        norm = norm
            .max((report.forward_total - 1.0).abs())
            .max((report.closed_form_total - 1.0).abs());
    }
    Ok(vec![
        Check::new("closed form vs forward joint", gap, 1e-10),
        Check::new("joint normalization", norm, 1e-12),
    ])
}

/// Mean per-coordinate gap between the averaged CD-50 estimate and the exact
/// gradient, at a random `d = 4, m = 2` model and a random 16-row batch.
fn gradient_check<R: Rng + ?Sized>(rng: &mut R) -> Result<Check> {
    let (d, m) = (4, 2);
    let mut u = || rng.gen_range(-1.0..1.0);
    let w: Vec<f64> = (0..d * m).map(|_| u()).collect();
    let a: Vec<f64> = (0..d).map(|_| u()).collect();
    let b: Vec<f64> = (0..m).map(|_| u()).collect();
    let params = RbmParams::from_parts(d, m, &w, &a, &b)?;
    let values: Vec<u8> = (0..16 * d).map(|_| rng::bernoulli(rng, 0.5)).collect();
    let data = PredictionMatrix::new(16, d, values)?;

    let exact = exact_gradient(&params, &data).to_flat();
    let mut mean = vec![0.0; exact.len()];
    for _ in 0..GRADIENT_DRAWS {
        let g = cd_step(&params, &data, GRADIENT_CD_K, rng)?.to_flat();
        for (acc, v) in mean.iter_mut().zip(g) {
            *acc += v;
        }
    }
    let gap = mean
        .iter()
        .zip(&exact)
        .map(|(s, e)| (s / GRADIENT_DRAWS as f64 - e).abs())
        .sum::<f64>()
        / exact.len() as f64;
    Ok(Check::new("CD-50 vs exact gradient (mean)", gap, 0.01))
}
