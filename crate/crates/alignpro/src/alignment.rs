//! The fine-tuning side of the theory: closed-form KL-regularized optimal
//! policy, policy values, and the suboptimality gap with its per-prompt
//! decomposition.

use crate::error::{Error, Result};
use crate::prob::{
    expectation, exponential_tilt, kl_divergence, Categorical, ConditionalDistribution,
};
use crate::prompter::compose_policy;
use crate::reward::RewardTable;

/// A complete tabular alignment problem.
///
/// Holds the prompt distribution, the frozen response model, the reference
/// prompter, the ground-truth reward, and both regularization temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentInstance {
    prompt_dist: Categorical,
    frozen: ConditionalDistribution,
    ref_prompter: ConditionalDistribution,
    reward: RewardTable,
    beta: f64,
    lambda: f64,
}

impl AlignmentInstance {
    pub fn new(
        prompt_dist: Categorical,
        frozen: ConditionalDistribution,
        ref_prompter: ConditionalDistribution,
        reward: RewardTable,
        beta: f64,
        lambda: f64,
    ) -> Result<Self> {
        let n_prompts = prompt_dist.len();
        let n_responses = frozen.n_out();
        if frozen.n_in() != n_prompts {
            return Err(Error::ShapeMismatch {
                expected: (n_prompts, n_responses),
                got: (frozen.n_in(), frozen.n_out()),
            });
        }
        if ref_prompter.n_in() != n_prompts || ref_prompter.n_out() != n_prompts {
            return Err(Error::ShapeMismatch {
                expected: (n_prompts, n_prompts),
                got: (ref_prompter.n_in(), ref_prompter.n_out()),
            });
        }
        if reward.n_prompts() != n_prompts || reward.n_responses() != n_responses {
            return Err(Error::ShapeMismatch {
                expected: (n_prompts, n_responses),
                got: (reward.n_prompts(), reward.n_responses()),
            });
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        // Strictly positive rows keep every in-pipeline KL finite.
        for (name, dist) in [("frozen", &frozen), ("ref_prompter", &ref_prompter)] {
            for (i, row) in dist.rows().iter().enumerate() {
                if row.probs().iter().any(|&p| p <= 0.0) {
                    return Err(Error::InvariantViolation(format!(
                        "{name} row {i} must be strictly positive"
                    )));
                }
            }
        }
        Ok(Self {
            prompt_dist,
            frozen,
            ref_prompter,
            reward,
            beta,
            lambda,
        })
    }

    pub fn n_prompts(&self) -> usize {
        self.prompt_dist.len()
    }

    pub fn n_responses(&self) -> usize {
        self.frozen.n_out()
    }

    pub fn prompt_dist(&self) -> &Categorical {
        &self.prompt_dist
    }

    pub fn frozen(&self) -> &ConditionalDistribution {
        &self.frozen
    }

    pub fn ref_prompter(&self) -> &ConditionalDistribution {
        &self.ref_prompter
    }

    pub fn reward(&self) -> &RewardTable {
        &self.reward
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Suboptimality gap of a prompter against the fine-tuned optimum, with its
/// per-prompt split into the frozen-model deficit and the prompting deficit.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub j_star: f64,
    pub j_tilde: f64,
    pub gap: f64,
    pub delta1_per_prompt: Vec<f64>,
    pub delta2_per_prompt: Vec<f64>,
}

/// Closed-form optimum of the KL-regularized objective: each row of the
/// frozen model tilted by its reward row at temperature `beta`.
pub fn rlhf_optimal_policy(instance: &AlignmentInstance) -> Result<ConditionalDistribution> {
    let rows = instance
        .frozen()
        .rows()
        .iter()
        .enumerate()
        .map(|(x, row)| exponential_tilt(row, instance.reward().row(x), instance.beta()))
        .collect::<Result<Vec<_>>>()?;
    ConditionalDistribution::from_rows(rows)
}

/// Expected reward `J(π) = E_{x∼P, y∼π(·|x)}[r*(x, y)]`.
pub fn policy_value(instance: &AlignmentInstance, policy: &ConditionalDistribution) -> Result<f64> {
    let expected = (instance.n_prompts(), instance.n_responses());
    let got = (policy.n_in(), policy.n_out());
    if expected != got {
        return Err(Error::ShapeMismatch { expected, got });
    }
    let mut total = 0.0;
    for (x, &px) in instance.prompt_dist().probs().iter().enumerate() {
        total += px * expectation(policy.row(x), instance.reward().row(x))?;
    }
    Ok(total)
}

/// The KL-regularized objective `J(π) − β·E_P[KL(π ‖ π_F)]`.
/// An infinite KL row yields `-∞`.
pub fn rlhf_objective(
    instance: &AlignmentInstance,
    policy: &ConditionalDistribution,
) -> Result<f64> {
    let j = policy_value(instance, policy)?;
    let mut kl_term = 0.0;
    for (x, &px) in instance.prompt_dist().probs().iter().enumerate() {
        let kl = kl_divergence(policy.row(x), instance.frozen().row(x))?;
        if kl.is_infinite() {
            return Ok(f64::NEG_INFINITY);
        }
        kl_term += px * kl;
    }
    Ok(j - instance.beta() * kl_term)
}

/// Computes `Δ(ρ) = J(π*) − J(π̃_ρ)` and the per-prompt decomposition
/// `Δ₁(x) = E_{π*}[r*] − E_{π_F}[r*]`, `Δ₂(x) = E_{π_F}[r*] − E_{π̃_ρ}[r*]`.
pub fn suboptimality_gap(instance: &AlignmentInstance, rho: &ConditionalDistribution) -> Result<GapReport> {
    let n = instance.n_prompts();
    let expected = (n, n);
    let got = (rho.n_in(), rho.n_out());
    if expected != got {
        return Err(Error::ShapeMismatch { expected, got });
    }
    let pi_star = rlhf_optimal_policy(instance)?;
    let pi_tilde = compose_policy(rho, instance.frozen())?;
    let j_star = policy_value(instance, &pi_star)?;
    let j_tilde = policy_value(instance, &pi_tilde)?;

    let mut delta1 = Vec::with_capacity(n);
    let mut delta2 = Vec::with_capacity(n);
    for x in 0..n {
        let r_row = instance.reward().row(x);
        let e_star = expectation(pi_star.row(x), r_row)?;
        let e_frozen = expectation(instance.frozen().row(x), r_row)?;
        let e_tilde = expectation(pi_tilde.row(x), r_row)?;
        delta1.push(e_star - e_frozen);
        delta2.push(e_frozen - e_tilde);
    }

    Ok(GapReport {
        j_star,
        j_tilde,
        gap: j_star - j_tilde,
        delta1_per_prompt: delta1,
        delta2_per_prompt: delta2,
    })
}
