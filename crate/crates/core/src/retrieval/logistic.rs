//! One-feature logistic regression fitted by damped Newton iterations.

use super::LabeledPair;
use crate::{Error, Result};

/// L2 penalty on both coefficients. Within-image and cross-image
/// similarities can be perfectly separable, which sends the plain MLE off to
/// infinity.
pub const L2_PENALTY: f64 = 1e-4;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_ITERATIONS: usize = 500;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    pub beta0: f64,
    pub beta1: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

struct Problem<'a> {
    pairs: &'a [LabeledPair],
    lambda: f64,
}

impl Problem<'_> {
    /// Negative penalized log-likelihood, written in terms of the signed
    /// margin so that flipping every label and negating the coefficients
    /// reproduces every intermediate value exactly.
    fn objective(&self, b: [f64; 2]) -> f64 {
        let loss: f64 = self
            .pairs
            .iter()
            .map(|p| softplus(-p.sign() * (b[0] + b[1] * p.sim)))
            .sum();
        loss + self.lambda * (b[0] * b[0] + b[1] * b[1])
    }

    fn gradient_hessian(&self, b: [f64; 2]) -> ([f64; 2], [f64; 3]) {
        let mut g = [2.0 * self.lambda * b[0], 2.0 * self.lambda * b[1]];
        let mut h = [2.0 * self.lambda, 0.0, 2.0 * self.lambda];
        for p in self.pairs {
            let s = p.sign();
            let m = s * (b[0] + b[1] * p.sim);
            let q = sigmoid(-m);
            let w = sigmoid(m) * q;
            g[0] -= s * q;
            g[1] -= s * q * p.sim;
            h[0] += w;
            h[1] += w * p.sim;
            h[2] += w * p.sim * p.sim;
        }
        (g, h)
    }
}

/// Maximizes `Σ log P(label | sim) − λ(β0² + β1²)` with
/// `P(1 | sim) = sigmoid(β0 + β1·sim)`, stopping once the gradient norm is at
/// most [`GRADIENT_TOLERANCE`].
pub fn fit_logistic(pairs: &[LabeledPair], lambda: f64) -> Result<LogisticFit> {
    let positives = pairs.iter().filter(|p| p.label).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass {
            positives,
            negatives,
        });
    }
    let problem = Problem { pairs, lambda };
    let mut b = [0.0, 0.0];
    let mut f = problem.objective(b);
    for it in 0..MAX_ITERATIONS {
        let (g, h) = problem.gradient_hessian(b);
        let gnorm = g[0].hypot(g[1]);
        if gnorm <= GRADIENT_TOLERANCE {
            return Ok(LogisticFit {
                beta0: b[0],
                beta1: b[1],
                iterations: it,
                gradient_norm: gnorm,
            });
        }
        let det = h[0] * h[2] - h[1] * h[1];
        let step = [
            -(h[2] * g[0] - h[1] * g[1]) / det,
            -(h[0] * g[1] - h[1] * g[0]) / det,
        ];
        let slope = g[0] * step[0] + g[1] * step[1];
        let mut t = 1.0;
        let mut accepted = false;
        while t >= 1e-12 {
            let cand = [b[0] + t * step[0], b[1] + t * step[1]];
            let fc = problem.objective(cand);
            if fc <= f + 1e-4 * t * slope {
                b = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // objective is flat to rounding here
            break;
        }
    }
    let (g, _) = problem.gradient_hessian(b);
    let gnorm = g[0].hypot(g[1]);
    if gnorm <= GRADIENT_TOLERANCE * 1e3 {
        log::warn!("logistic fit stopped at gradient norm {gnorm:e}");
        return Ok(LogisticFit {
            beta0: b[0],
            beta1: b[1],
            iterations: MAX_ITERATIONS,
            gradient_norm: gnorm,
        });
    }
    Err(Error::Degenerate(format!(
        "logistic regression did not converge (gradient norm {gnorm:e})"
    )))
}
