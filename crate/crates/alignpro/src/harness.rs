//! Reproducibility surface: seeded instance generation, instance file IO,
//! single-instance solves, λ/β sweeps, and CSV/JSON report emission.

use crate::alignment::{policy_value, rlhf_optimal_policy, suboptimality_gap, AlignmentInstance};
use crate::bound::verify_bound;
use crate::error::{Error, Result};
use crate::prob::{expectation, Categorical, ConditionalDistribution};
use crate::prompter::{compose_policy, optimal_prompter};
use crate::reward::RewardTable;
use crate::rng::{derive_rng, derive_seed, GENERATOR_VERSION};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// Probability floor applied to generated rows so every in-pipeline KL is
/// finite.
pub const PROB_FLOOR: f64 = 1e-9;
/// Mixing weight of the uniform component in identity-like reference
/// prompters. A pure delta would pin the optimal prompter to the reference.
pub const IDENTITY_EPS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardStyle {
    UniformRandom,
    StructuredGap,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefStyle {
    Dirichlet,
    IdentityLike,
}

/// Everything needed to deterministically build one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n_prompts: usize,
    pub n_responses: usize,
    pub reward_style: RewardStyle,
    pub ref_style: RefStyle,
    pub dirichlet_alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_prompts < 2 || self.n_responses < 2 {
            return Err(Error::InvalidSpec(format!(
                "n_prompts and n_responses must be >= 2, got {} x {}",
                self.n_prompts, self.n_responses
            )));
        }
        for (name, v) in [
            ("dirichlet_alpha", self.dirichlet_alpha),
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("r_max", self.r_max),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            n_prompts: 4,
            n_responses: 4,
            reward_style: RewardStyle::UniformRandom,
            ref_style: RefStyle::Dirichlet,
            dirichlet_alpha: 1.0,
            beta: 1.0,
            lambda: 1.0,
            r_max: 1.0,
            seed: 0,
        }
    }
}

fn dirichlet_row<R: Rng>(rng: &mut R, n: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("validated alpha");
    (0..n).map(|_| gamma.sample(rng)).collect()
}

fn floor_and_renorm(mut weights: Vec<f64>) -> Result<Categorical> {
    for w in &mut weights {
        *w = w.max(PROB_FLOOR);
    }
    Categorical::from_weights(&weights)
}

/// Builds the instance determined by `spec`. Each field draws from its own
/// derived substream, so the result is reproducible field by field.
pub fn generate_instance(spec: &InstanceSpec) -> Result<AlignmentInstance> {
    spec.validate()?;
    let (nx, ny) = (spec.n_prompts, spec.n_responses);

    let mut rng = derive_rng(spec.seed, "prompt_dist");
    let prompt_dist = floor_and_renorm(dirichlet_row(&mut rng, nx, spec.dirichlet_alpha))?;

    let mut rng = derive_rng(spec.seed, "frozen");
    let frozen_rows = (0..nx)
        .map(|_| floor_and_renorm(dirichlet_row(&mut rng, ny, spec.dirichlet_alpha)))
        .collect::<Result<Vec<_>>>()?;
    let frozen = ConditionalDistribution::from_rows(frozen_rows)?;

    let ref_prompter = match spec.ref_style {
        RefStyle::Dirichlet => {
            let mut rng = derive_rng(spec.seed, "ref_prompter");
            let rows = (0..nx)
                .map(|_| floor_and_renorm(dirichlet_row(&mut rng, nx, spec.dirichlet_alpha)))
                .collect::<Result<Vec<_>>>()?;
            ConditionalDistribution::from_rows(rows)?
        }
        RefStyle::IdentityLike => {
            let rows = (0..nx)
                .map(|x| {
                    let mut row = vec![IDENTITY_EPS / nx as f64; nx];
                    row[x] += 1.0 - IDENTITY_EPS;
                    floor_and_renorm(row)
                })
                .collect::<Result<Vec<_>>>()?;
            ConditionalDistribution::from_rows(rows)?
        }
    };

    let mut rng = derive_rng(spec.seed, "reward");
    let values: Vec<Vec<f64>> = (0..nx)
        .map(|x| {
            (0..ny)
                .map(|y| match spec.reward_style {
                    RewardStyle::UniformRandom => spec.r_max * rng.random::<f64>(),
                    RewardStyle::StructuredGap => {
                        let hit = if y == x % ny { 1.0 } else { 0.0 };
                        spec.r_max * (0.9 * hit + 0.1 * rng.random::<f64>())
                    }
                    RewardStyle::Constant => 0.5 * spec.r_max,
                })
                .collect()
        })
        .collect();
    let reward = RewardTable::new(values, spec.r_max)?;

    AlignmentInstance::new(
        prompt_dist,
        frozen,
        ref_prompter,
        reward,
        spec.beta,
        spec.lambda,
    )
}

/// Provenance carried inside instance files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub seed: u64,
    pub generator_version: String,
}

impl InstanceMeta {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            generator_version: GENERATOR_VERSION.to_string(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    n_prompts: usize,
    n_responses: usize,
    r_max: f64,
    beta: f64,
    lambda: f64,
    prompt_dist: Vec<f64>,
    frozen: Vec<Vec<f64>>,
    ref_prompter: Vec<Vec<f64>>,
    reward: Vec<Vec<f64>>,
    meta: InstanceMeta,
}

pub fn save_instance(
    instance: &AlignmentInstance,
    meta: &InstanceMeta,
    path: &Path,
) -> Result<()> {
    let file = InstanceFile {
        n_prompts: instance.n_prompts(),
        n_responses: instance.n_responses(),
        r_max: instance.reward().r_max(),
        beta: instance.beta(),
        lambda: instance.lambda(),
        prompt_dist: instance.prompt_dist().probs().to_vec(),
        frozen: instance.frozen().to_matrix(),
        ref_prompter: instance.ref_prompter().to_matrix(),
        reward: instance.reward().values().to_vec(),
        meta: meta.clone(),
    };
    let json = serde_json::to_string_pretty(&file).expect("instance files always serialize");
    std::fs::write(path, json).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_instance(path: &Path) -> Result<(AlignmentInstance, InstanceMeta)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let file: InstanceFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    if file.frozen.len() != file.n_prompts
        || file.prompt_dist.len() != file.n_prompts
        || file.ref_prompter.len() != file.n_prompts
        || file.reward.len() != file.n_prompts
    {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: "matrix row counts disagree with n_prompts".into(),
        });
    }
    let instance = AlignmentInstance::new(
        Categorical::new(file.prompt_dist)?,
        ConditionalDistribution::from_matrix(&file.frozen)?,
        ConditionalDistribution::from_matrix(&file.ref_prompter)?,
        RewardTable::new(file.reward, file.r_max)?,
        file.beta,
        file.lambda,
    )?;
    if instance.n_responses() != file.n_responses {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: "matrix column counts disagree with n_responses".into(),
        });
    }
    Ok((instance, file.meta))
}

/// One solved instance, flattened to the report schema. Field order is the
/// CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub n_prompts: usize,
    pub n_responses: usize,
    pub beta: f64,
    pub lambda: f64,
    pub j_star: f64,
    pub j_frozen: f64,
    pub j_tilde_star: f64,
    pub j_tilde_ref: f64,
    pub gap: f64,
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub rhs: f64,
    pub slack: f64,
    pub kl_mean: f64,
    pub bound_holds: bool,
    pub wall_time_ms: u64,
}

/// Runs the full pipeline on one instance: closed-form policy and prompter,
/// both compositions, the gap, and the bound report.
pub fn run_single(instance: &AlignmentInstance, seed: u64) -> Result<SweepRecord> {
    let start = Instant::now();
    let pi_star = rlhf_optimal_policy(instance)?;
    let sol = optimal_prompter(instance)?;
    let tilde_star = compose_policy(&sol.rho_star, instance.frozen())?;
    let tilde_ref = compose_policy(instance.ref_prompter(), instance.frozen())?;

    let j_star = policy_value(instance, &pi_star)?;
    let j_frozen = policy_value(instance, instance.frozen())?;
    let j_tilde_star = policy_value(instance, &tilde_star)?;
    let j_tilde_ref = policy_value(instance, &tilde_ref)?;

    let gap_report = suboptimality_gap(instance, &sol.rho_star)?;
    let bound = verify_bound(instance)?;
    let kl_mean = expectation(instance.prompt_dist(), &sol.kl_to_ref)?;

    let record = SweepRecord {
        seed,
        n_prompts: instance.n_prompts(),
        n_responses: instance.n_responses(),
        beta: instance.beta(),
        lambda: instance.lambda(),
        j_star,
        j_frozen,
        j_tilde_star,
        j_tilde_ref,
        gap: gap_report.gap,
        term1: bound.term1,
        term2: bound.term2,
        term3: bound.term3,
        rhs: bound.rhs,
        slack: bound.slack,
        kl_mean,
        bound_holds: bound.holds,
        wall_time_ms: start.elapsed().as_millis() as u64,
    };
    validate_record(&record)?;
    Ok(record)
}

/// Re-checks a record's internal identities before it is emitted.
pub fn validate_record(record: &SweepRecord) -> Result<()> {
    if (record.gap - (record.j_star - record.j_tilde_star)).abs() > 1e-12 {
        return Err(Error::InvariantViolation(format!(
            "gap {} != j_star - j_tilde_star {}",
            record.gap,
            record.j_star - record.j_tilde_star
        )));
    }
    if (record.rhs - (record.term1 + record.term2 - record.term3)).abs() > 1e-12 {
        return Err(Error::InvariantViolation("rhs term identity broken".into()));
    }
    if record.bound_holds != (record.slack >= -1e-9) {
        return Err(Error::InvariantViolation(
            "bound_holds inconsistent with slack".into(),
        ));
    }
    Ok(())
}

/// Per-grid-point aggregate statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPointSummary {
    pub lambda: f64,
    pub beta: f64,
    pub trials: usize,
    pub mean_j_tilde_star: f64,
    pub mean_gap: f64,
    pub mean_slack: f64,
    pub min_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub points: Vec<GridPointSummary>,
    pub min_slack: f64,
    pub all_bounds_hold: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub summary: SweepSummary,
}

/// Cartesian sweep over `lambda_grid × beta_grid × trials`, executed on a
/// worker pool. Records come back canonically sorted by (seed, lambda, beta),
/// so parallel and serial runs emit identical bytes apart from wall times.
pub fn run_sweep(
    base: &InstanceSpec,
    lambda_grid: &[f64],
    beta_grid: &[f64],
    trials: usize,
    threads: Option<usize>,
) -> Result<SweepOutput> {
    base.validate()?;
    if lambda_grid.is_empty() || beta_grid.is_empty() {
        return Err(Error::InvalidSpec("grids must be nonempty".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidSpec("trials must be >= 1".into()));
    }

    let mut jobs = Vec::new();
    for t in 0..trials {
        let seed = derive_seed(base.seed, &format!("trial/{t}"));
        for &lambda in lambda_grid {
            for &beta in beta_grid {
                let mut spec = base.clone();
                spec.seed = seed;
                spec.lambda = lambda;
                spec.beta = beta;
                jobs.push(spec);
            }
        }
    }

    let solve = |spec: &InstanceSpec| -> Result<SweepRecord> {
        let instance = generate_instance(spec)?;
        run_single(&instance, spec.seed)
    };

    let n_threads = threads.or_else(|| {
        std::env::var("ALIGNPRO_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let mut records = match n_threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
            pool.install(|| jobs.par_iter().map(solve).collect::<Result<Vec<_>>>())?
        }
        None => jobs.par_iter().map(solve).collect::<Result<Vec<_>>>()?,
    };

    records.sort_by(|a, b| {
        a.seed
            .cmp(&b.seed)
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.beta.total_cmp(&b.beta))
    });

    let mut points = Vec::new();
    for &lambda in lambda_grid {
        for &beta in beta_grid {
            let subset: Vec<&SweepRecord> = records
                .iter()
                .filter(|r| r.lambda == lambda && r.beta == beta)
                .collect();
            let n = subset.len() as f64;
            points.push(GridPointSummary {
                lambda,
                beta,
                trials: subset.len(),
                mean_j_tilde_star: subset.iter().map(|r| r.j_tilde_star).sum::<f64>() / n,
                mean_gap: subset.iter().map(|r| r.gap).sum::<f64>() / n,
                mean_slack: subset.iter().map(|r| r.slack).sum::<f64>() / n,
                min_slack: subset
                    .iter()
                    .map(|r| r.slack)
                    .fold(f64::INFINITY, f64::min),
            });
        }
    }
    let min_slack = records.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    let all_bounds_hold = records.iter().all(|r| r.bound_holds);
    Ok(SweepOutput {
        records,
        summary: SweepSummary {
            points,
            min_slack,
            all_bounds_hold,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidSpec(format!("unknown format {other}"))),
        }
    }
}

/// Renders records to the report schema: CSV with the fixed column order, or
/// a JSON array with the same field names.
pub fn render_report(records: &[SweepRecord], format: ReportFormat) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Empty);
    }
    match format {
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            for record in records {
                writer
                    .serialize(record)
                    .map_err(|e| Error::InvalidSpec(format!("csv: {e}")))?;
            }
            let bytes = writer
                .into_inner()
                .map_err(|e| Error::InvalidSpec(format!("csv: {e}")))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Json => {
            Ok(serde_json::to_string_pretty(records).expect("records always serialize"))
        }
    }
}

pub fn emit_report(records: &[SweepRecord], format: ReportFormat, path: &Path) -> Result<()> {
    for record in records {
        validate_record(record)?;
    }
    let rendered = render_report(records, format)?;
    let mut file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    file.write_all(rendered.as_bytes()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Parses `lo:hi:points:{log|lin}` into a grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err(Error::InvalidSpec(format!(
            "grid must be lo:hi:points:{{log|lin}}, got {s}"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::InvalidSpec(format!("bad grid lo {}", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::InvalidSpec(format!("bad grid hi {}", parts[1])))?;
    let points: usize = parts[2]
        .parse()
        .map_err(|_| Error::InvalidSpec(format!("bad grid points {}", parts[2])))?;
    if points == 0 {
        return Err(Error::InvalidSpec("grid needs at least 1 point".into()));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    match parts[3] {
        "lin" => {
            let step = (hi - lo) / (points - 1) as f64;
            Ok((0..points).map(|i| lo + step * i as f64).collect())
        }
        "log" => {
            if !(lo > 0.0) || !(hi > 0.0) {
                return Err(Error::InvalidSpec("log grid endpoints must be > 0".into()));
            }
            let step = (hi.ln() - lo.ln()) / (points - 1) as f64;
            Ok((0..points)
                .map(|i| (lo.ln() + step * i as f64).exp())
                .collect())
        }
        other => Err(Error::InvalidSpec(format!("unknown grid scale {other}"))),
    }
}
