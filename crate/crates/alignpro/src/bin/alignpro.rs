//! Command-line front end: instance generation, single solves, λ/β sweeps,
//! bound verification, reward fitting, and gap decomposition.
//!
//! Exit codes: 0 success, 1 usage or IO errors, 2 bound violation or
//! invariant failure (so CI can gate on it).

use alignpro::harness::{
    emit_report, generate_instance, load_instance, parse_grid, run_single, run_sweep,
    save_instance, InstanceMeta, InstanceSpec, RefStyle, ReportFormat, RewardStyle,
};
use alignpro::reward::{center_matrix, fit_reward, generate_preferences, FitConfig};
use alignpro::{appendix_decomposition, budget_check, verify_bound, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RewardStyleArg {
    UniformRandom,
    StructuredGap,
    Constant,
}

impl From<RewardStyleArg> for RewardStyle {
    fn from(v: RewardStyleArg) -> Self {
        match v {
            RewardStyleArg::UniformRandom => RewardStyle::UniformRandom,
            RewardStyleArg::StructuredGap => RewardStyle::StructuredGap,
            RewardStyleArg::Constant => RewardStyle::Constant,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RefStyleArg {
    Dirichlet,
    IdentityLike,
}

impl From<RefStyleArg> for RefStyle {
    fn from(v: RefStyleArg) -> Self {
        match v {
            RefStyleArg::Dirichlet => RefStyle::Dirichlet,
            RefStyleArg::IdentityLike => RefStyle::IdentityLike,
        }
    }
}

#[derive(Debug, Args)]
struct SpecArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of prompts.
    #[arg(long, default_value_t = 4)]
    nx: usize,
    /// Number of responses.
    #[arg(long, default_value_t = 4)]
    ny: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = RewardStyleArg::UniformRandom)]
    reward_style: RewardStyleArg,
    #[arg(long, value_enum, default_value_t = RefStyleArg::Dirichlet)]
    ref_style: RefStyleArg,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    r_max: f64,
}

impl SpecArgs {
    fn to_spec(&self) -> InstanceSpec {
        InstanceSpec {
            n_prompts: self.nx,
            n_responses: self.ny,
            reward_style: self.reward_style.into(),
            ref_style: self.ref_style.into(),
            dirichlet_alpha: self.alpha,
            beta: self.beta,
            lambda: self.lambda,
            r_max: self.r_max,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "alignpro", about = "Tabular prompt-optimization laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded instance and write it as JSON.
    Gen {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one instance end to end and emit its record.
    Solve {
        /// Instance JSON file.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Sweep λ and/or β grids over seeded instances.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        /// Grid as lo:hi:points:{log|lin}; defaults to the single --lambda.
        #[arg(long)]
        lambda_grid: Option<String>,
        /// Grid as lo:hi:points:{log|lin}; defaults to the single --beta.
        #[arg(long)]
        beta_grid: Option<String>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Verify the gap upper bound on one instance.
    VerifyBound {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Generate preferences from an instance and recover its reward table.
    FitReward {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 50_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-prompt gap decomposition and budget condition for one instance.
    Decompose {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Gen { spec, out } => {
            let spec = spec.to_spec();
            let instance = generate_instance(&spec)?;
            save_instance(&instance, &InstanceMeta::new(spec.seed), &out)?;
            println!(
                "wrote {} ({} prompts x {} responses, seed {})",
                out.display(),
                instance.n_prompts(),
                instance.n_responses(),
                spec.seed
            );
            Ok(0)
        }
        Command::Solve { input, out, format } => {
            let (instance, meta) = load_instance(&input)?;
            let record = run_single(&instance, meta.seed)?;
            let format: ReportFormat = format.parse()?;
            match out {
                Some(path) => emit_report(std::slice::from_ref(&record), format, &path)?,
                None => print!(
                    "{}",
                    alignpro::harness::render_report(std::slice::from_ref(&record), format)?
                ),
            }
            Ok(if record.bound_holds { 0 } else { 2 })
        }
        Command::Sweep {
            spec,
            lambda_grid,
            beta_grid,
            trials,
            out,
            format,
        } => {
            let spec = spec.to_spec();
            let lambdas = match lambda_grid {
                Some(g) => parse_grid(&g)?,
                None => vec![spec.lambda],
            };
            let betas = match beta_grid {
                Some(g) => parse_grid(&g)?,
                None => vec![spec.beta],
            };
            let output = run_sweep(&spec, &lambdas, &betas, trials, None)?;
            let format: ReportFormat = format.parse()?;
            emit_report(&output.records, format, &out)?;
            println!(
                "wrote {} records to {}; min slack {:.3e}; bounds hold: {}",
                output.records.len(),
                out.display(),
                output.summary.min_slack,
                output.summary.all_bounds_hold
            );
            Ok(if output.summary.all_bounds_hold { 0 } else { 2 })
        }
        Command::VerifyBound { input } => {
            let (instance, _) = load_instance(&input)?;
            let report = verify_bound(&instance)?;
            println!("lhs_gap = {:.12}", report.lhs_gap);
            println!("term1   = {:.12}", report.term1);
            println!("term2   = {:.12}", report.term2);
            println!("term3   = {:.12}", report.term3);
            println!("rhs     = {:.12}", report.rhs);
            println!("slack   = {:.3e}", report.slack);
            println!("holds   = {}", report.holds);
            Ok(if report.holds { 0 } else { 2 })
        }
        Command::FitReward { input, count, seed } => {
            let (instance, _) = load_instance(&input)?;
            let data = generate_preferences(&instance, instance.frozen(), "frozen", count, seed)?;
            let config = FitConfig {
                r_max: instance.reward().r_max(),
                ..FitConfig::default()
            };
            let fit = fit_reward(
                &data,
                (instance.n_prompts(), instance.n_responses()),
                &config,
            )?;
            let fitted = center_matrix(fit.table.values());
            let truth = center_matrix(instance.reward().values());
            let max_err = fitted
                .iter()
                .flatten()
                .zip(truth.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            println!(
                "fitted {} pairs in {} iterations; final loss {:.6}; centered max-abs error {:.6}",
                count,
                fit.iterations,
                fit.loss_trace.last().unwrap(),
                max_err
            );
            Ok(0)
        }
        Command::Decompose { input } => {
            let (instance, _) = load_instance(&input)?;
            let appendix = appendix_decomposition(&instance)?;
            let budget = budget_check(&instance)?;
            println!("prompt,delta2_star,delta3,delta4,delta3_bound,delta4_bound,kl,kl_budget");
            for x in 0..instance.n_prompts() {
                println!(
                    "{x},{:.12},{:.12},{:.12},{:.12},{:.12},{:.12},{:.12}",
                    appendix.delta2_star_per_prompt[x],
                    appendix.delta3_per_prompt[x],
                    appendix.delta4_per_prompt[x],
                    appendix.delta3_bound_per_prompt[x],
                    appendix.delta4_bound_per_prompt[x],
                    budget.kl_per_prompt[x],
                    budget.corrected_threshold_per_prompt[x],
                );
            }
            println!(
                "kl_mean = {:.12}; budget = {:.12}; within = {}",
                budget.kl_mean, budget.budget, budget.within
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are success; anything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::InvariantViolation(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
