//! Upper-bound machinery for the suboptimality gap: every bound term, the
//! per-prompt intermediate decomposition with its individual inequalities, and
//! the non-negativity budget condition on the prompter's KL.

use crate::alignment::{rlhf_optimal_policy, suboptimality_gap, AlignmentInstance};
use crate::error::Result;
use crate::prob::{expectation, tv_distance};
use crate::prompter::{optimal_prompter, prompter_value};

/// All quantities of the gap bound. `rhs = term1 + term2 − term3`;
/// `holds ⟺ slack ≥ −1e-9`. Per-prompt vectors localize looseness.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub lhs_gap: f64,
    /// `r_max · E_P[d_TV(π*, π_F)]`
    pub term1: f64,
    /// `r_max · E_{P, ρ_sft}[d_TV(π_F(·|x), π_F(·|x'))]`
    pub term2: f64,
    /// `λ · E_P[KL(ρ* ‖ ρ_sft)]`
    pub term3: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    pub eps1_per_prompt: Vec<f64>,
    pub eps2_per_prompt: Vec<f64>,
    pub delta3_per_prompt: Vec<f64>,
    pub delta4_per_prompt: Vec<f64>,
}

/// Per-prompt decomposition of the prompting deficit with its two bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixReport {
    pub delta2_star_per_prompt: Vec<f64>,
    pub delta3_per_prompt: Vec<f64>,
    pub delta4_per_prompt: Vec<f64>,
    /// `r_max · E_{ρ_sft}[d_TV(π_F(·|x), π_F(·|x'))]` per prompt.
    pub delta3_bound_per_prompt: Vec<f64>,
    /// `−λ · KL(ρ*(·|x) ‖ ρ_sft(·|x))` per prompt.
    pub delta4_bound_per_prompt: Vec<f64>,
}

/// Budget condition: where the bound's right-hand side stays non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub kl_mean: f64,
    /// `E_P[r_max · (ε₁ + ε₂)]`.
    pub budget: f64,
    /// Pointwise `λ·KL ≤ r_max·(ε₁+ε₂)` — equivalent to a pointwise
    /// non-negative right-hand side.
    pub within: bool,
    pub kl_per_prompt: Vec<f64>,
    /// Literal `(ε₁+ε₂)/λ` threshold as stated.
    pub literal_threshold_per_prompt: Vec<f64>,
    /// `r_max·(ε₁+ε₂)/λ`, the form under which `within` is evaluated.
    pub corrected_threshold_per_prompt: Vec<f64>,
    pub within_literal: bool,
}

struct TermParts {
    eps1: Vec<f64>,
    eps2: Vec<f64>,
    kl: Vec<f64>,
    term1: f64,
    term2: f64,
    term3: f64,
}

fn term_parts(instance: &AlignmentInstance) -> Result<TermParts> {
    let pi_star = rlhf_optimal_policy(instance)?;
    let sol = optimal_prompter(instance)?;
    let r_max = instance.reward().r_max();
    let lambda = instance.lambda();
    let n = instance.n_prompts();

    let mut eps1 = Vec::with_capacity(n);
    let mut eps2 = Vec::with_capacity(n);
    let mut kl = Vec::with_capacity(n);
    for x in 0..n {
        eps1.push(tv_distance(pi_star.row(x), instance.frozen().row(x))?);
        let mut drift = 0.0;
        for (xp, &w) in instance.ref_prompter().row(x).probs().iter().enumerate() {
            drift += w * tv_distance(instance.frozen().row(x), instance.frozen().row(xp))?;
        }
        eps2.push(drift);
        kl.push(sol.kl_to_ref[x]);
    }

    let p = instance.prompt_dist();
    let term1 = r_max * expectation(p, &eps1)?;
    let term2 = r_max * expectation(p, &eps2)?;
    let term3 = lambda * expectation(p, &kl)?;
    Ok(TermParts {
        eps1,
        eps2,
        kl,
        term1,
        term2,
        term3,
    })
}

fn appendix_parts(instance: &AlignmentInstance) -> Result<AppendixReport> {
    let r = prompter_value(instance)?;
    let sol = optimal_prompter(instance)?;
    let r_max = instance.reward().r_max();
    let lambda = instance.lambda();
    let n = instance.n_prompts();

    let mut delta2_star = Vec::with_capacity(n);
    let mut delta3 = Vec::with_capacity(n);
    let mut delta4 = Vec::with_capacity(n);
    let mut delta3_bound = Vec::with_capacity(n);
    let mut delta4_bound = Vec::with_capacity(n);
    for x in 0..n {
        let e_frozen = expectation(instance.frozen().row(x), instance.reward().row(x))?;
        let e_ref = expectation(instance.ref_prompter().row(x), r.row(x))?;
        let e_star = expectation(sol.rho_star.row(x), r.row(x))?;
        let d3 = e_frozen - e_ref;
        let d4 = e_ref - e_star;
        delta3.push(d3);
        delta4.push(d4);
        delta2_star.push(d3 + d4);

        let mut drift = 0.0;
        for (xp, &w) in instance.ref_prompter().row(x).probs().iter().enumerate() {
            drift += w * tv_distance(instance.frozen().row(x), instance.frozen().row(xp))?;
        }
        delta3_bound.push(r_max * drift);
        delta4_bound.push(-lambda * sol.kl_to_ref[x]);
    }
    Ok(AppendixReport {
        delta2_star_per_prompt: delta2_star,
        delta3_per_prompt: delta3,
        delta4_per_prompt: delta4,
        delta3_bound_per_prompt: delta3_bound,
        delta4_bound_per_prompt: delta4_bound,
    })
}

/// Computes the three bound terms (and per-prompt pieces) without evaluating
/// the left-hand side.
pub fn theorem1_terms(instance: &AlignmentInstance) -> Result<BoundReport> {
    let parts = term_parts(instance)?;
    let appendix = appendix_parts(instance)?;
    let rhs = parts.term1 + parts.term2 - parts.term3;
    Ok(BoundReport {
        lhs_gap: f64::NAN,
        term1: parts.term1,
        term2: parts.term2,
        term3: parts.term3,
        rhs,
        slack: f64::NAN,
        holds: false,
        eps1_per_prompt: parts.eps1,
        eps2_per_prompt: parts.eps2,
        delta3_per_prompt: appendix.delta3_per_prompt,
        delta4_per_prompt: appendix.delta4_per_prompt,
    })
}

/// Full verification: gap at the optimal prompter against the bound's
/// right-hand side.
pub fn verify_bound(instance: &AlignmentInstance) -> Result<BoundReport> {
    let mut report = theorem1_terms(instance)?;
    let sol = optimal_prompter(instance)?;
    let gap = suboptimality_gap(instance, &sol.rho_star)?;
    report.lhs_gap = gap.gap;
    report.slack = report.rhs - report.lhs_gap;
    report.holds = report.slack >= -1e-9;
    Ok(report)
}

/// Per-prompt decomposition of the prompting deficit, with the two
/// inequalities it satisfies.
pub fn appendix_decomposition(instance: &AlignmentInstance) -> Result<AppendixReport> {
    appendix_parts(instance)
}

/// Compares each prompt's `λ·KL(ρ* ‖ ρ_sft)` against its TV budget, in both
/// the literal and the `r_max`-corrected form.
pub fn budget_check(instance: &AlignmentInstance) -> Result<BudgetReport> {
    let parts = term_parts(instance)?;
    let r_max = instance.reward().r_max();
    let lambda = instance.lambda();
    let p = instance.prompt_dist();
    let n = instance.n_prompts();

    let mut literal = Vec::with_capacity(n);
    let mut corrected = Vec::with_capacity(n);
    let mut budget_per_prompt = Vec::with_capacity(n);
    let mut within = true;
    let mut within_literal = true;
    for x in 0..n {
        let eps_sum = parts.eps1[x] + parts.eps2[x];
        literal.push(eps_sum / lambda);
        corrected.push(r_max * eps_sum / lambda);
        budget_per_prompt.push(r_max * eps_sum);
        within &= lambda * parts.kl[x] <= r_max * eps_sum + 1e-12;
        within_literal &= parts.kl[x] <= eps_sum / lambda + 1e-12;
    }

    Ok(BudgetReport {
        kl_mean: expectation(p, &parts.kl)?,
        budget: expectation(p, &budget_per_prompt)?,
        within,
        kl_per_prompt: parts.kl,
        literal_threshold_per_prompt: literal,
        corrected_threshold_per_prompt: corrected,
        within_literal,
    })
}
