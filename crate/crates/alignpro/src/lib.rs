//! Exact tabular laboratory for prompt optimization under KL-regularized
//! alignment.
//!
//! Everything runs over finite prompt/response spaces, so closed-form optimal
//! policies and prompters, suboptimality gaps, and the gap upper bound are all
//! computable to machine precision and verifiable against brute-force
//! enumeration.

pub mod alignment;
pub mod bound;
pub mod error;
pub mod harness;
pub mod prob;
pub mod prompter;
pub mod reward;
pub mod rng;

pub use alignment::{
    policy_value, rlhf_objective, rlhf_optimal_policy, suboptimality_gap, AlignmentInstance,
    GapReport,
};
pub use bound::{
    appendix_decomposition, budget_check, theorem1_terms, verify_bound, AppendixReport,
    BoundReport, BudgetReport,
};
pub use error::{Error, Result};
pub use harness::{
    generate_instance, load_instance, parse_grid, run_single, run_sweep, save_instance,
    InstanceMeta, InstanceSpec, RefStyle, ReportFormat, RewardStyle, SweepRecord, SweepSummary,
};
pub use prob::{
    expectation, exponential_tilt, kl_divergence, log_sum_exp, tv_distance, Categorical,
    ConditionalDistribution,
};
pub use prompter::{
    compose_policy, optimal_prompter, prompter_objective, prompter_value,
    solve_prompter_numerical, NumericalSolution, PrompterSolution, PrompterValue, SolverConfig,
};
pub use reward::{
    bt_loss, bt_loss_gradient, center_matrix, center_reward, fit_reward, generate_preferences,
    FitConfig, FitResult, PreferenceDataset, PreferencePair, RewardTable,
};
