//! Joint law of `(X, H)` for the directed chain `Y → H → X` with
//! sigmoid conditionals, computed two ways.
//!
//! * forward: `Σ_y p(y) Π_i p(h_i | y) Π_j p(x_j | h)`
//! * closed form: `exp(aᵀx + xᵀWh + bᵀh) · Z(h)` with
//!   `Z(h) = [Σ_x' exp(aᵀx' + x'ᵀWh)]⁻¹ · Σ_y p(y) exp(hᵀu y) / Σ_h' exp(bᵀh' + h'ᵀu y)`
//!
//! The normalizers in the closed form are summed by enumeration.

use rand::Rng;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::math::{sigmoid, unpack_bits};

pub const MAX_LEMMA3_VISIBLE: usize = 6;
pub const MAX_LEMMA3_HIDDEN: usize = 4;

/// `p(h_i = 1 | y) = σ(b_i + u_i y)`, `p(x_j = 1 | h) = σ(a_j + W[j, :] h)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectedModel {
    pub pi: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Row-major `d x m`.
    pub w: Vec<Vec<f64>>,
    pub u: Vec<f64>,
}

impl DirectedModel {
    pub fn random<R: Rng + ?Sized>(d: usize, m: usize, scale: f64, rng: &mut R) -> Self {
        let mut draw = || scale * (2.0 * rng.gen::<f64>() - 1.0);
        let a = (0..d).map(|_| draw()).collect();
        let b = (0..m).map(|_| draw()).collect();
        let w = (0..d).map(|_| (0..m).map(|_| draw()).collect()).collect();
        let u = (0..m).map(|_| draw()).collect();
        let pi = rng.gen_range(0.05..0.95);
        Self { pi, a, b, w, u }
    }

    fn dims(&self) -> Result<(usize, usize)> {
        let (d, m) = (self.a.len(), self.b.len());
        check_dim("u", m, self.u.len())?;
        check_dim("W rows", d, self.w.len())?;
        for row in &self.w {
            check_dim("W row", m, row.len())?;
        }
        if d == 0 || m == 0 || d > MAX_LEMMA3_VISIBLE || m > MAX_LEMMA3_HIDDEN {
            return Err(Error::EnumerationLimit {
                what: "directed model (d <= 6, m <= 4)",
                dim: d.max(m),
                limit: MAX_LEMMA3_VISIBLE,
            });
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(Error::invalid("pi", "must be a probability"));
        }
        Ok((d, m))
    }

    fn label_prob(&self, y: u8) -> f64 {
        if y == 1 {
            self.pi
        } else {
            1.0 - self.pi
        }
    }

    /// `Π_i p(h_i | y)` from the per-unit sigmoids.
    pub fn hidden_given_label(&self, h: &[u8], y: u8) -> f64 {
        h.iter()
            .enumerate()
            .map(|(i, &hi)| {
                let p = sigmoid(self.b[i] + self.u[i] * y as f64);
                if hi == 1 {
                    p
                } else {
                    1.0 - p
                }
            })
            .product()
    }

    fn visible_input(&self, j: usize, h: &[u8]) -> f64 {
        self.a[j]
            + self.w[j]
                .iter()
                .zip(h)
                .filter(|(_, &hk)| hk == 1)
                .map(|(w, _)| w)
                .sum::<f64>()
    }

    /// `Π_j p(x_j | h)` from the per-unit sigmoids.
    pub fn visible_given_hidden(&self, x: &[u8], h: &[u8]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(j, &xj)| {
                let p = sigmoid(self.visible_input(j, h));
                if xj == 1 {
                    p
                } else {
                    1.0 - p
                }
            })
            .product()
    }

    fn joint_forward(&self, x: &[u8], h: &[u8]) -> f64 {
        [0u8, 1]
            .iter()
            .map(|&y| self.label_prob(y) * self.hidden_given_label(h, y) * self.visible_given_hidden(x, h))
            .sum()
    }

    /// `exp(aᵀx + xᵀWh)` without the hidden bias.
    fn visible_weight(&self, x: &[u8], h: &[u8]) -> f64 {
        x.iter()
            .enumerate()
            .filter(|(_, &xj)| xj == 1)
            .map(|(j, _)| self.visible_input(j, h))
            .sum::<f64>()
            .exp()
    }

    fn hidden_weight(&self, h: &[u8], y: u8) -> f64 {
        h.iter()
            .enumerate()
            .filter(|(_, &hi)| hi == 1)
            .map(|(i, _)| self.b[i] + self.u[i] * y as f64)
            .sum::<f64>()
            .exp()
    }

    fn joint_closed_form(&self, x: &[u8], h: &[u8], d: usize, m: usize) -> f64 {
        let mut xs = vec![0u8; d];
        let x_norm: f64 = (0..1usize << d)
            .map(|idx| {
                unpack_bits(idx, &mut xs);
                self.visible_weight(&xs, h)
            })
            .sum();
        let mut hs = vec![0u8; m];
        let label_mix: f64 = [0u8, 1]
            .iter()
            .map(|&y| {
                let h_norm: f64 = (0..1usize << m)
                    .map(|idx| {
                        unpack_bits(idx, &mut hs);
                        self.hidden_weight(&hs, y)
                    })
                    .sum();
                let coupling: f64 = h
                    .iter()
                    .zip(&self.u)
                    .filter(|(&hi, _)| hi == 1)
                    .map(|(_, u)| u * y as f64)
                    .sum::<f64>()
                    .exp();
                self.label_prob(y) * coupling / h_norm
            })
            .sum();
        let bias: f64 = h
            .iter()
            .zip(&self.b)
            .filter(|(&hi, _)| hi == 1)
            .map(|(_, b)| b)
            .sum();
        self.visible_weight(x, h) * bias.exp() * label_mix / x_norm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma3Report {
    pub max_abs_gap: f64,
    pub forward_total: f64,
    pub closed_form_total: f64,
}

/// Max entrywise gap between the forward and closed-form joint tables of `p(X, H)`.
pub fn verify_lemma3(model: &DirectedModel) -> Result<Lemma3Report> {
    let (d, m) = model.dims()?;
    let mut x = vec![0u8; d];
    let mut h = vec![0u8; m];
    let mut report = Lemma3Report {
        max_abs_gap: 0.0,
        forward_total: 0.0,
        closed_form_total: 0.0,
    };
    for xi in 0..1usize << d {
        unpack_bits(xi, &mut x);
        for hi in 0..1usize << m {
            unpack_bits(hi, &mut h);
            let f = model.joint_forward(&x, &h);
            let c = model.joint_closed_form(&x, &h, d, m);
            report.forward_total += f;
            report.closed_form_total += c;
            report.max_abs_gap = report.max_abs_gap.max((f - c).abs());
        }
    }
    Ok(report)
}
