//! The prompt-optimization side: prompter value function, closed-form optimal
//! prompter, composed policies, the KL-regularized prompter objective, and an
//! independent exponentiated-gradient solver used as a correctness oracle for
//! the closed form.

use crate::alignment::AlignmentInstance;
use crate::error::{Error, Result};
use crate::prob::{
    expectation, exponential_tilt, kl_divergence, log_sum_exp, Categorical,
    ConditionalDistribution,
};

/// `R(x, x') = E_{y∼π_F(·|x')}[r*(x, y)]`: the expected reward of asking the
/// frozen model the rewritten prompt, scored against the original prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PrompterValue {
    values: Vec<Vec<f64>>,
}

impl PrompterValue {
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x]
    }
}

/// Closed-form optimal prompter and its per-prompt diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PrompterSolution {
    pub rho_star: ConditionalDistribution,
    pub objective_value: f64,
    pub kl_to_ref: Vec<f64>,
    pub log_partition: Vec<f64>,
}

pub fn prompter_value(instance: &AlignmentInstance) -> Result<PrompterValue> {
    let n = instance.n_prompts();
    let mut values = Vec::with_capacity(n);
    for x in 0..n {
        let r_row = instance.reward().row(x);
        let mut row = Vec::with_capacity(n);
        for xp in 0..n {
            row.push(expectation(instance.frozen().row(xp), r_row)?);
        }
        values.push(row);
    }
    Ok(PrompterValue { values })
}

/// Row-wise closed form: `ρ*(·|x) ∝ ρ_sft(·|x) · exp(R(x,·)/λ)`, with the log
/// partition computed by max-shifted log-sum-exp.
pub fn optimal_prompter(instance: &AlignmentInstance) -> Result<PrompterSolution> {
    let r = prompter_value(instance)?;
    let lambda = instance.lambda();
    let n = instance.n_prompts();
    let mut rows = Vec::with_capacity(n);
    let mut log_partition = Vec::with_capacity(n);
    let mut kl_to_ref = Vec::with_capacity(n);
    for x in 0..n {
        let base = instance.ref_prompter().row(x);
        let row = exponential_tilt(base, r.row(x), lambda)?;
        let logits: Vec<f64> = base
            .probs()
            .iter()
            .zip(r.row(x))
            .map(|(&q, &v)| {
                if q == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    q.ln() + v / lambda
                }
            })
            .collect();
        log_partition.push(log_sum_exp(&logits)?);
        kl_to_ref.push(kl_divergence(&row, base)?);
        rows.push(row);
    }
    let rho_star = ConditionalDistribution::from_rows(rows)?;
    let objective_value = prompter_objective(instance, &rho_star)?;
    Ok(PrompterSolution {
        rho_star,
        objective_value,
        kl_to_ref,
        log_partition,
    })
}

/// `π̃_ρ(y|x) = Σ_{x'} π_F(y|x')·ρ(x'|x)` — the response distribution seen
/// through the prompter.
pub fn compose_policy(
    rho: &ConditionalDistribution,
    frozen: &ConditionalDistribution,
) -> Result<ConditionalDistribution> {
    if rho.n_out() != frozen.n_in() {
        return Err(Error::ShapeMismatch {
            expected: (rho.n_out(), frozen.n_out()),
            got: (frozen.n_in(), frozen.n_out()),
        });
    }
    let n_out = frozen.n_out();
    let mut rows = Vec::with_capacity(rho.n_in());
    for rho_row in rho.rows() {
        let mut out = vec![0.0; n_out];
        for (xp, &w) in rho_row.probs().iter().enumerate() {
            for (j, &p) in frozen.row(xp).probs().iter().enumerate() {
                out[j] += w * p;
            }
        }
        rows.push(Categorical::new(out)?);
    }
    ConditionalDistribution::from_rows(rows)
}

/// The prompter objective: `E_P[E_{ρ}[R(x,·)] − λ·KL(ρ(·|x) ‖ ρ_sft(·|x))]`.
/// An infinite KL row yields `-∞`.
pub fn prompter_objective(instance: &AlignmentInstance, rho: &ConditionalDistribution) -> Result<f64> {
    let n = instance.n_prompts();
    if rho.n_in() != n || rho.n_out() != n {
        return Err(Error::ShapeMismatch {
            expected: (n, n),
            got: (rho.n_in(), rho.n_out()),
        });
    }
    let r = prompter_value(instance)?;
    let lambda = instance.lambda();
    let mut total = 0.0;
    for (x, &px) in instance.prompt_dist().probs().iter().enumerate() {
        let kl = kl_divergence(rho.row(x), instance.ref_prompter().row(x))?;
        if kl.is_infinite() {
            return Ok(f64::NEG_INFINITY);
        }
        total += px * (expectation(rho.row(x), r.row(x))? - lambda * kl);
    }
    Ok(total)
}

/// Settings for the exponentiated-gradient oracle.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub step: f64,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_iters: 10_000,
            tolerance: 1e-12,
        }
    }
}

/// Outcome of the numerical solve; `converged == false` flags rows that hit
/// the iteration cap before meeting the tolerance.
#[derive(Debug, Clone)]
pub struct NumericalSolution {
    pub rho: ConditionalDistribution,
    pub converged: bool,
    pub iterations: usize,
    /// Accepted objective values per row, nondecreasing by construction.
    pub row_traces: Vec<Vec<f64>>,
}

/// Iterate cap aside, stop a row once the objective change drops below the
/// configured tolerance and the iterate moves by less than this per entry.
const PARAM_TOLERANCE: f64 = 1e-9;

/// Independent oracle for the closed form: per-prompt exponentiated-gradient
/// ascent on the simplex, initialized at the reference prompter, with step
/// halving whenever a trial step would decrease the objective.
pub fn solve_prompter_numerical(
    instance: &AlignmentInstance,
    config: &SolverConfig,
) -> Result<NumericalSolution> {
    let r = prompter_value(instance)?;
    let lambda = instance.lambda();
    let n = instance.n_prompts();
    let mut rows = Vec::with_capacity(n);
    let mut row_traces = Vec::with_capacity(n);
    let mut converged = true;
    let mut iterations = 0;

    for x in 0..n {
        let q = instance.ref_prompter().row(x);
        let log_q: Vec<f64> = q.probs().iter().map(|&v| v.ln()).collect();
        let r_row = r.row(x);

        let objective = |log_rho: &[f64]| -> f64 {
            log_rho
                .iter()
                .zip(r_row)
                .zip(&log_q)
                .map(|((&lr, &ri), &lq)| lr.exp() * (ri - lambda * (lr - lq)))
                .sum()
        };

        let mut log_rho = log_q.clone();
        let mut f_cur = objective(&log_rho);
        let mut trace = vec![f_cur];
        let mut step = config.step;
        let mut row_converged = false;

        for iter in 0..config.max_iters {
            let grad: Vec<f64> = log_rho
                .iter()
                .zip(r_row)
                .zip(&log_q)
                .map(|((&lr, &ri), &lq)| ri - lambda * (lr - lq + 1.0))
                .collect();

            let mut accepted = None;
            for _ in 0..60 {
                let eta = step / lambda;
                let unnormalized: Vec<f64> = log_rho
                    .iter()
                    .zip(&grad)
                    .map(|(&lr, &g)| lr + eta * g)
                    .collect();
                let lse = log_sum_exp(&unnormalized)?;
                let candidate: Vec<f64> = unnormalized.iter().map(|&v| v - lse).collect();
                let f_new = objective(&candidate);
                if f_new >= f_cur - 1e-15 {
                    accepted = Some((candidate, f_new));
                    break;
                }
                step *= 0.5;
            }
            let Some((candidate, f_new)) = accepted else {
                break;
            };

            let max_move = candidate
                .iter()
                .zip(&log_rho)
                .map(|(&a, &b)| (a.exp() - b.exp()).abs())
                .fold(0.0, f64::max);
            let improvement = f_new - f_cur;
            log_rho = candidate;
            f_cur = f_cur.max(f_new);
            trace.push(f_cur);
            iterations = iterations.max(iter + 1);
            if improvement.abs() < config.tolerance && max_move < PARAM_TOLERANCE {
                row_converged = true;
                break;
            }
        }
        converged &= row_converged;

        let probs: Vec<f64> = log_rho.iter().map(|&lr| lr.exp()).collect();
        rows.push(Categorical::from_weights(&probs)?);
        row_traces.push(trace);
    }

    Ok(NumericalSolution {
        rho: ConditionalDistribution::from_rows(rows)?,
        converged,
        iterations,
        row_traces,
    })
}
