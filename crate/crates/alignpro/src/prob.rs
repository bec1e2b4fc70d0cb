//! Finite categorical distributions and the log-space primitives the rest of
//! the crate is built on: normalization, KL / total-variation divergences,
//! expectations, inverse-CDF sampling, and exponential (Gibbs) tilting.

use crate::error::{Error, Result};
use rand::Rng;

/// Construction accepts row sums within this distance of 1 and renormalizes.
const SUM_TOLERANCE: f64 = 1e-6;
/// Below this deviation the stored entries are kept bit-for-bit, so that
/// re-wrapping an already-normalized row is the identity.
const RENORM_SKIP: f64 = 1e-12;

/// A probability vector over a finite index set.
///
/// Entries are nonnegative and sum to 1; construction renormalizes small
/// deviations and rejects large ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    /// Wraps an (approximately) normalized probability vector.
    ///
    /// Sums within 1e-6 of 1 are renormalized; larger deviations are rejected
    /// so corrupt inputs fail loudly while serialization rounding is tolerated.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate_weights(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        if (sum - 1.0).abs() <= RENORM_SKIP {
            return Ok(Self { probs });
        }
        Ok(Self {
            probs: probs.iter().map(|p| p / sum).collect(),
        })
    }

    /// Normalizes an arbitrary nonnegative weight vector into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        validate_weights(weights)?;
        let sum: f64 = weights.iter().sum();
        Ok(Self {
            probs: weights.iter().map(|w| w / sum).collect(),
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    /// Point mass at `index`.
    pub fn delta(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::Empty);
        }
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Inverse-CDF sample: index `i` with probability `probs[i]`.
    /// Deterministic given the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding can leave acc fractionally below 1; fall back to the last
        // index with positive mass.
        self.probs
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(self.probs.len() - 1)
    }

    fn check_len(&self, other_len: usize) -> Result<()> {
        if self.probs.len() != other_len {
            return Err(Error::LengthMismatch {
                left: self.probs.len(),
                right: other_len,
            });
        }
        Ok(())
    }
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Empty);
    }
    for &w in weights {
        if !w.is_finite() {
            return Err(Error::NonFinite(w));
        }
        if w < 0.0 {
            return Err(Error::Negative(w));
        }
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::AllZero);
    }
    Ok(())
}

/// `KL(p ‖ q)` in nats, `Σ pᵢ ln(pᵢ/qᵢ)` with the convention `0·ln(0/q) = 0`.
/// Returns `f64::INFINITY` when `p` puts mass where `q` has none.
pub fn kl_divergence(p: &Categorical, q: &Categorical) -> Result<f64> {
    p.check_len(q.len())?;
    let mut total = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pi * (pi.ln() - qi.ln());
    }
    // Accumulated rounding can leave a tiny negative residue.
    Ok(total.max(0.0))
}

/// Total variation distance, half-L1 convention: `(1/2)·Σ |pᵢ − qᵢ| ∈ [0, 1]`.
pub fn tv_distance(p: &Categorical, q: &Categorical) -> Result<f64> {
    p.check_len(q.len())?;
    let l1: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(&pi, &qi)| (pi - qi).abs())
        .sum();
    Ok(0.5 * l1)
}

/// `ln Σ exp(vᵢ)` by max-shift; entries may be `-∞` but not `+∞` or NaN.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    for &v in values {
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::NonFinite(v));
        }
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Gibbs reweighting: output `∝ baseᵢ · exp(scoresᵢ / temperature)`, computed
/// entirely in log space. Support equals the support of `base` exactly.
pub fn exponential_tilt(
    base: &Categorical,
    scores: &[f64],
    temperature: f64,
) -> Result<Categorical> {
    base.check_len(scores.len())?;
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    for &s in scores {
        if !s.is_finite() {
            return Err(Error::NonFinite(s));
        }
    }
    let logits: Vec<f64> = base
        .probs
        .iter()
        .zip(scores)
        .map(|(&b, &s)| {
            if b == 0.0 {
                f64::NEG_INFINITY
            } else {
                b.ln() + s / temperature
            }
        })
        .collect();
    let lse = log_sum_exp(&logits)?;
    let probs: Vec<f64> = logits.iter().map(|&l| (l - lse).exp()).collect();
    let sum: f64 = probs.iter().sum();
    Ok(Categorical {
        probs: probs.iter().map(|p| p / sum).collect(),
    })
}

/// `Σ pᵢ · valuesᵢ`.
pub fn expectation(p: &Categorical, values: &[f64]) -> Result<f64> {
    p.check_len(values.len())?;
    Ok(p.probs.iter().zip(values).map(|(&pi, &v)| pi * v).sum())
}

/// A row-stochastic matrix: one `Categorical` per conditioning index.
///
/// Houses every conditional object in the pipeline: the frozen response model,
/// reference and optimal prompters, and composed policies.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDistribution {
    rows: Vec<Categorical>,
}

impl ConditionalDistribution {
    pub fn from_rows(rows: Vec<Categorical>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty);
        }
        let n_out = rows[0].len();
        for row in &rows[1..] {
            if row.len() != n_out {
                return Err(Error::LengthMismatch {
                    left: n_out,
                    right: row.len(),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn from_matrix(matrix: &[Vec<f64>]) -> Result<Self> {
        let rows = matrix
            .iter()
            .map(|r| Categorical::new(r.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    pub fn n_in(&self) -> usize {
        self.rows.len()
    }

    pub fn n_out(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, i: usize) -> &Categorical {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Categorical] {
        &self.rows
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.probs().to_vec()).collect()
    }
}
