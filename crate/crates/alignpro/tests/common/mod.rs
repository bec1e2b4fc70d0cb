//! Shared helpers for the integration suites: the seeded random instance
//! family used across tests, and independent brute-force oracles that
//! recompute every report quantity with plain nested loops (no log-space
//! tricks, no shared code paths with the library internals).
#![allow(dead_code)]

use alignpro::harness::{generate_instance, InstanceSpec, RefStyle, RewardStyle};
use alignpro::rng::derive_rng;
use alignpro::AlignmentInstance;
use rand::Rng;

/// Draws one spec from the standard random family:
/// dims in {2,…,8}, β and λ log-uniform in [0.1, 10].
pub fn family_spec(master_seed: u64, index: u64, ref_style: RefStyle) -> InstanceSpec {
    let mut rng = derive_rng(master_seed, &format!("family/{index}"));
    let n_prompts = 2 + (rng.random::<u64>() % 7) as usize;
    let n_responses = 2 + (rng.random::<u64>() % 7) as usize;
    let lo = 0.1f64.ln();
    let hi = 10.0f64.ln();
    let beta = (lo + rng.random::<f64>() * (hi - lo)).exp();
    let lambda = (lo + rng.random::<f64>() * (hi - lo)).exp();
    InstanceSpec {
        n_prompts,
        n_responses,
        reward_style: RewardStyle::UniformRandom,
        ref_style,
        dirichlet_alpha: 1.0,
        beta,
        lambda,
        r_max: 1.0,
        seed: derive_rng(master_seed, &format!("family-seed/{index}")).random(),
    }
}

pub fn family_instance(master_seed: u64, index: u64, ref_style: RefStyle) -> AlignmentInstance {
    generate_instance(&family_spec(master_seed, index, ref_style)).expect("family spec is valid")
}

// ---- brute-force oracles -------------------------------------------------
//
// Everything below works on raw nested Vec<f64> matrices pulled out of the
// instance, using textbook formulas and naive exp — deliberately not the
// library's log-space implementations.

pub struct RawInstance {
    pub p: Vec<f64>,
    pub frozen: Vec<Vec<f64>>,
    pub ref_prompter: Vec<Vec<f64>>,
    pub reward: Vec<Vec<f64>>,
    pub r_max: f64,
    pub beta: f64,
    pub lambda: f64,
    pub nx: usize,
    pub ny: usize,
}

impl RawInstance {
    pub fn from(instance: &AlignmentInstance) -> Self {
        Self {
            p: instance.prompt_dist().probs().to_vec(),
            frozen: instance.frozen().to_matrix(),
            ref_prompter: instance.ref_prompter().to_matrix(),
            reward: instance.reward().values().to_vec(),
            r_max: instance.reward().r_max(),
            beta: instance.beta(),
            lambda: instance.lambda(),
            nx: instance.n_prompts(),
            ny: instance.n_responses(),
        }
    }
}

pub fn brute_tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn brute_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| if a == 0.0 { 0.0 } else { a * (a / b).ln() })
        .sum()
}

/// `π*` by raw exponentiation and division — valid for moderate `r/β`.
pub fn brute_pi_star(raw: &RawInstance) -> Vec<Vec<f64>> {
    (0..raw.nx)
        .map(|x| {
            let w: Vec<f64> = (0..raw.ny)
                .map(|y| raw.frozen[x][y] * (raw.reward[x][y] / raw.beta).exp())
                .collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|v| v / z).collect()
        })
        .collect()
}

/// `R(x, x') = Σ_y π_F(y|x')·r(x,y)` by direct loops.
pub fn brute_prompter_value(raw: &RawInstance) -> Vec<Vec<f64>> {
    (0..raw.nx)
        .map(|x| {
            (0..raw.nx)
                .map(|xp| {
                    (0..raw.ny)
                        .map(|y| raw.frozen[xp][y] * raw.reward[x][y])
                        .sum()
                })
                .collect()
        })
        .collect()
}

pub fn brute_rho_star(raw: &RawInstance) -> Vec<Vec<f64>> {
    let r = brute_prompter_value(raw);
    (0..raw.nx)
        .map(|x| {
            let w: Vec<f64> = (0..raw.nx)
                .map(|xp| raw.ref_prompter[x][xp] * (r[x][xp] / raw.lambda).exp())
                .collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|v| v / z).collect()
        })
        .collect()
}

pub fn brute_compose(rho: &[Vec<f64>], frozen: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let ny = frozen[0].len();
    rho.iter()
        .map(|row| {
            let mut out = vec![0.0; ny];
            for (xp, &w) in row.iter().enumerate() {
                for (y, &f) in frozen[xp].iter().enumerate() {
                    out[y] += w * f;
                }
            }
            out
        })
        .collect()
}

pub fn brute_policy_value(raw: &RawInstance, policy: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for x in 0..raw.nx {
        for y in 0..raw.ny {
            total += raw.p[x] * policy[x][y] * raw.reward[x][y];
        }
    }
    total
}

/// Every record-level quantity recomputed independently.
pub struct BruteRecord {
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
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    pub kl: Vec<f64>,
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
    pub delta3: Vec<f64>,
    pub delta4: Vec<f64>,
}

pub fn brute_record(raw: &RawInstance) -> BruteRecord {
    let pi_star = brute_pi_star(raw);
    let rho_star = brute_rho_star(raw);
    let r = brute_prompter_value(raw);
    let tilde_star = brute_compose(&rho_star, &raw.frozen);
    let tilde_ref = brute_compose(&raw.ref_prompter, &raw.frozen);

    let j_star = brute_policy_value(raw, &pi_star);
    let j_frozen = brute_policy_value(raw, &raw.frozen);
    let j_tilde_star = brute_policy_value(raw, &tilde_star);
    let j_tilde_ref = brute_policy_value(raw, &tilde_ref);
    let gap = j_star - j_tilde_star;

    let mut eps1 = Vec::new();
    let mut eps2 = Vec::new();
    let mut kl = Vec::new();
    let mut delta1 = Vec::new();
    let mut delta2 = Vec::new();
    let mut delta3 = Vec::new();
    let mut delta4 = Vec::new();
    for x in 0..raw.nx {
        eps1.push(brute_tv(&pi_star[x], &raw.frozen[x]));
        let mut drift = 0.0;
        for xp in 0..raw.nx {
            drift += raw.ref_prompter[x][xp] * brute_tv(&raw.frozen[x], &raw.frozen[xp]);
        }
        eps2.push(drift);
        kl.push(brute_kl(&rho_star[x], &raw.ref_prompter[x]));

        let row_exp = |policy: &[Vec<f64>]| -> f64 {
            (0..raw.ny).map(|y| policy[x][y] * raw.reward[x][y]).sum()
        };
        let e_star = row_exp(&pi_star);
        let e_frozen = row_exp(&raw.frozen);
        let e_tilde = row_exp(&tilde_star);
        delta1.push(e_star - e_frozen);
        delta2.push(e_frozen - e_tilde);

        let e_ref: f64 = (0..raw.nx).map(|xp| raw.ref_prompter[x][xp] * r[x][xp]).sum();
        let e_rho: f64 = (0..raw.nx).map(|xp| rho_star[x][xp] * r[x][xp]).sum();
        delta3.push(e_frozen - e_ref);
        delta4.push(e_ref - e_rho);
    }

    let dot = |v: &[f64]| -> f64 { v.iter().zip(&raw.p).map(|(a, b)| a * b).sum() };
    let term1 = raw.r_max * dot(&eps1);
    let term2 = raw.r_max * dot(&eps2);
    let term3 = raw.lambda * dot(&kl);
    let rhs = term1 + term2 - term3;

    BruteRecord {
        j_star,
        j_frozen,
        j_tilde_star,
        j_tilde_ref,
        gap,
        term1,
        term2,
        term3,
        rhs,
        slack: rhs - gap,
        kl_mean: dot(&kl),
        eps1,
        eps2,
        kl,
        delta1,
        delta2,
        delta3,
        delta4,
    }
}
