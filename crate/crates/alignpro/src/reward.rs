//! Ground-truth reward tables, Bradley–Terry preference generation, and
//! maximum-likelihood reward recovery with analytic gradients.

use crate::alignment::AlignmentInstance;
use crate::error::{Error, Result};
use crate::prob::ConditionalDistribution;
use crate::rng::derive_rng;
use rand::Rng;
use std::collections::BTreeMap;

/// Bounded reward matrix `r(x, y)` with a declared upper bound `r_max`.
///
/// The declared bound is what the suboptimality analysis uses; entries may sit
/// strictly below it.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    values: Vec<Vec<f64>>,
    r_max: f64,
}

impl RewardTable {
    pub fn new(values: Vec<Vec<f64>>, r_max: f64) -> Result<Self> {
        if values.is_empty() || values[0].is_empty() {
            return Err(Error::Empty);
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "r_max must be positive and finite, got {r_max}"
            )));
        }
        let n_responses = values[0].len();
        for row in &values {
            if row.len() != n_responses {
                return Err(Error::LengthMismatch {
                    left: n_responses,
                    right: row.len(),
                });
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::NonFinite(v));
                }
                if v < 0.0 || v > r_max {
                    return Err(Error::InvariantViolation(format!(
                        "reward entry {v} outside [0, {r_max}]"
                    )));
                }
            }
        }
        Ok(Self { values, r_max })
    }

    pub fn n_prompts(&self) -> usize {
        self.values.len()
    }

    pub fn n_responses(&self) -> usize {
        self.values[0].len()
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x]
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[x][y]
    }
}

/// One pairwise comparison: `winner` beat `loser` under prompt `prompt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreferencePair {
    pub prompt: usize,
    pub winner: usize,
    pub loser: usize,
}

/// A list of comparisons plus the metadata that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceDataset {
    pub pairs: Vec<PreferencePair>,
    pub behavior_id: String,
    pub seed: u64,
    pub count: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Draws `count` preference pairs: prompt from the instance's prompt
/// distribution, two responses from `behavior`, winner labeled by the
/// Bradley–Terry probability `σ(r*(x, y_a) − r*(x, y_b))`.
///
/// Equal response draws carry no information and are redrawn (up to 100
/// attempts, then kept with a uniform winner — only reachable for near
/// point-mass behavior rows). Bit-identical output for identical seeds.
pub fn generate_preferences(
    instance: &AlignmentInstance,
    behavior: &ConditionalDistribution,
    behavior_id: &str,
    count: usize,
    seed: u64,
) -> Result<PreferenceDataset> {
    if count == 0 {
        return Err(Error::CountZero);
    }
    let expected = (instance.n_prompts(), instance.n_responses());
    let got = (behavior.n_in(), behavior.n_out());
    if expected != got {
        return Err(Error::ShapeMismatch { expected, got });
    }
    let reward = instance.reward();
    let mut rng = derive_rng(seed, "preferences");
    let mut pairs = Vec::with_capacity(count);
    for _ in 0..count {
        let x = instance.prompt_dist().sample(&mut rng);
        let row = behavior.row(x);
        let mut y_a = row.sample(&mut rng);
        let mut y_b = row.sample(&mut rng);
        let mut attempts = 0;
        while y_a == y_b && attempts < 100 {
            y_a = row.sample(&mut rng);
            y_b = row.sample(&mut rng);
            attempts += 1;
        }
        let (winner, loser) = if y_a == y_b {
            (y_a, y_b)
        } else {
            let p_a_wins = sigmoid(reward.get(x, y_a) - reward.get(x, y_b));
            let u: f64 = rng.random();
            if u < p_a_wins {
                (y_a, y_b)
            } else {
                (y_b, y_a)
            }
        };
        pairs.push(PreferencePair {
            prompt: x,
            winner,
            loser,
        });
    }
    Ok(PreferenceDataset {
        pairs,
        behavior_id: behavior_id.to_string(),
        seed,
        count,
    })
}

fn check_candidate(candidate: &[Vec<f64>], data: &PreferenceDataset) -> Result<(usize, usize)> {
    if data.pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if candidate.is_empty() || candidate[0].is_empty() {
        return Err(Error::Empty);
    }
    let (nx, ny) = (candidate.len(), candidate[0].len());
    if candidate.iter().any(|r| r.len() != ny) {
        return Err(Error::ShapeMismatch {
            expected: (nx, ny),
            got: (nx, candidate.iter().map(|r| r.len()).max().unwrap()),
        });
    }
    for p in &data.pairs {
        if p.prompt >= nx || p.winner >= ny || p.loser >= ny {
            return Err(Error::ShapeMismatch {
                expected: (nx, ny),
                got: (p.prompt + 1, p.winner.max(p.loser) + 1),
            });
        }
    }
    Ok((nx, ny))
}

/// Multiplicity map over distinct (prompt, winner, loser) tuples; the loss and
/// gradient are linear in these counts, which makes large datasets cheap.
fn aggregate(data: &PreferenceDataset) -> BTreeMap<(usize, usize, usize), f64> {
    let mut counts = BTreeMap::new();
    for p in &data.pairs {
        *counts.entry((p.prompt, p.winner, p.loser)).or_insert(0.0) += 1.0;
    }
    counts
}

/// Negative mean Bradley–Terry log-likelihood of `candidate` on `data`.
pub fn bt_loss(candidate: &[Vec<f64>], data: &PreferenceDataset) -> Result<f64> {
    check_candidate(candidate, data)?;
    let n = data.pairs.len() as f64;
    let mut total = 0.0;
    for ((x, yu, yv), c) in aggregate(data) {
        let gap = candidate[x][yu] - candidate[x][yv];
        total += c * softplus(-gap);
    }
    Ok(total / n)
}

/// Analytic gradient of [`bt_loss`]: per pair, `−(1−σ(Δ))` at the winner entry
/// and `+(1−σ(Δ))` at the loser entry, averaged over pairs.
pub fn bt_loss_gradient(candidate: &[Vec<f64>], data: &PreferenceDataset) -> Result<Vec<Vec<f64>>> {
    let (nx, ny) = check_candidate(candidate, data)?;
    let n = data.pairs.len() as f64;
    let mut grad = vec![vec![0.0; ny]; nx];
    for ((x, yu, yv), c) in aggregate(data) {
        let gap = candidate[x][yu] - candidate[x][yv];
        let w = c * (1.0 - sigmoid(gap)) / n;
        grad[x][yu] -= w;
        grad[x][yv] += w;
    }
    Ok(grad)
}

/// Gradient-descent settings for [`fit_reward`].
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub step: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub r_max: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            max_iters: 20_000,
            tolerance: 1e-10,
            r_max: 1.0,
        }
    }
}

/// Result of a reward fit: the recovered table and the accepted loss trace.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub table: RewardTable,
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
}

/// Fits a tabular reward by gradient descent on the Bradley–Terry loss,
/// starting from the zero table. The returned table is gauge-centered
/// (row minima at zero) and clamped into `[0, r_max]`.
pub fn fit_reward(
    data: &PreferenceDataset,
    shape: (usize, usize),
    config: &FitConfig,
) -> Result<FitResult> {
    let (nx, ny) = shape;
    let mut theta = vec![vec![0.0; ny]; nx];
    let mut loss = bt_loss(&theta, data)?;
    let mut trace = vec![loss];
    let mut step = config.step;
    let mut bad_steps = 0;
    let mut iterations = 0;

    for _ in 0..config.max_iters {
        let grad = bt_loss_gradient(&theta, data)?;
        let mut accepted = false;
        let mut candidate_loss = loss;
        for _ in 0..30 {
            let candidate: Vec<Vec<f64>> = theta
                .iter()
                .zip(&grad)
                .map(|(tr, gr)| tr.iter().zip(gr).map(|(t, g)| t - step * g).collect())
                .collect();
            candidate_loss = bt_loss(&candidate, data)?;
            if candidate_loss <= loss + 1e-15 {
                theta = candidate;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if accepted {
            bad_steps = 0;
        } else {
            bad_steps += 1;
            if bad_steps >= 10 {
                return Err(Error::Divergence(bad_steps));
            }
            continue;
        }
        let decrease = loss - candidate_loss;
        loss = candidate_loss;
        trace.push(loss);
        if decrease < config.tolerance {
            break;
        }
    }

    let centered = center_matrix(&theta);
    let clamped: Vec<Vec<f64>> = centered
        .iter()
        .map(|row| row.iter().map(|v| v.clamp(0.0, config.r_max)).collect())
        .collect();
    Ok(FitResult {
        table: RewardTable::new(clamped, config.r_max)?,
        loss_trace: trace,
        iterations,
    })
}

/// Subtracts each row's minimum so row minima are zero. Bradley–Terry
/// likelihoods only see within-row differences, so this is a pure gauge fix.
pub fn center_matrix(values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    values
        .iter()
        .map(|row| {
            let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
            row.iter().map(|v| v - min).collect()
        })
        .collect()
}

/// [`center_matrix`] lifted to reward tables.
pub fn center_reward(r: &RewardTable) -> RewardTable {
    RewardTable {
        values: center_matrix(&r.values),
        r_max: r.r_max,
    }
}
