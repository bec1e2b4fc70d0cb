//! Acceptance gate: ten oracle- and property-based criteria, each printed as
//! a single pass/fail line (run with `--nocapture` to see them when green).
//!
//! Criteria are numbered and self-contained; tolerances and seeds are pinned.

mod common;

use alignpro::harness::{
    generate_instance, parse_grid, render_report, run_single, run_sweep, InstanceSpec, RefStyle,
    ReportFormat, RewardStyle,
};
use alignpro::prompter::{optimal_prompter, prompter_value, solve_prompter_numerical, SolverConfig};
use alignpro::reward::{
    bt_loss, bt_loss_gradient, center_matrix, fit_reward, generate_preferences, FitConfig,
    PreferenceDataset, PreferencePair,
};
use alignpro::rng::derive_rng;
use alignpro::{
    appendix_decomposition, expectation, suboptimality_gap, theorem1_terms, tv_distance,
    verify_bound,
};
use common::{brute_record, family_instance, family_spec, RawInstance};
use rand::Rng;

fn report(name: &str, result: Result<(), String>) {
    match &result {
        Ok(()) => println!("[acceptance] {name}: PASS"),
        Err(e) => println!("[acceptance] {name}: FAIL — {e}"),
    }
    if let Err(e) = result {
        panic!("{name} failed: {e}");
    }
}

#[test]
fn criterion_01_closed_form_matches_numerical_oracle() {
    let result = (|| -> Result<(), String> {
        for i in 0..200u64 {
            let instance = family_instance(1, i, RefStyle::Dirichlet);
            let sol = optimal_prompter(&instance).map_err(|e| e.to_string())?;
            let num = solve_prompter_numerical(&instance, &SolverConfig::default())
                .map_err(|e| e.to_string())?;
            if !num.converged {
                return Err(format!("numerical solver did not converge on instance {i}"));
            }
            for x in 0..instance.n_prompts() {
                let tv = tv_distance(num.rho.row(x), sol.rho_star.row(x))
                    .map_err(|e| e.to_string())?;
                if tv > 1e-6 {
                    return Err(format!("instance {i} row {x}: TV {tv:.3e} > 1e-6"));
                }
            }
        }
        Ok(())
    })();
    report("criterion 1 — closed-form vs numerical prompter (200 instances, TV <= 1e-6)", result);
}

#[test]
fn criterion_02_gap_bound_holds_on_1000_instances() {
    let result = (|| -> Result<(), String> {
        for i in 0..1000u64 {
            let instance = family_instance(2, i, RefStyle::Dirichlet);
            let bound = verify_bound(&instance).map_err(|e| e.to_string())?;
            if !bound.holds {
                return Err(format!("instance {i}: slack {:.3e} < -1e-9", bound.slack));
            }
        }
        Ok(())
    })();
    report("criterion 2 — gap upper bound holds (1000 instances, slack >= -1e-9)", result);
}

#[test]
fn criterion_03_per_prompt_decomposition_identity_and_inequalities() {
    let result = (|| -> Result<(), String> {
        for i in 0..1000u64 {
            let instance = family_instance(2, i, RefStyle::Dirichlet);
            let appendix = appendix_decomposition(&instance).map_err(|e| e.to_string())?;
            let sol = optimal_prompter(&instance).map_err(|e| e.to_string())?;
            // Independent route to the prompting deficit: through the composed
            // policy rather than through the prompter value function.
            let gap = suboptimality_gap(&instance, &sol.rho_star).map_err(|e| e.to_string())?;
            for x in 0..instance.n_prompts() {
                let d2_composed = gap.delta2_per_prompt[x];
                let d2_split =
                    appendix.delta3_per_prompt[x] + appendix.delta4_per_prompt[x];
                if (d2_composed - d2_split).abs() > 1e-12 {
                    return Err(format!(
                        "instance {i} prompt {x}: split identity off by {:.3e}",
                        (d2_composed - d2_split).abs()
                    ));
                }
                if appendix.delta2_star_per_prompt[x] != d2_split {
                    return Err(format!("instance {i} prompt {x}: delta2* not the sum"));
                }
                if appendix.delta3_per_prompt[x] > appendix.delta3_bound_per_prompt[x] + 1e-12 {
                    return Err(format!("instance {i} prompt {x}: delta3 bound violated"));
                }
                if appendix.delta4_per_prompt[x] > appendix.delta4_bound_per_prompt[x] + 1e-12 {
                    return Err(format!("instance {i} prompt {x}: delta4 bound violated"));
                }
            }
        }
        Ok(())
    })();
    report(
        "criterion 3 — per-prompt split identity (1e-12) and both inequalities (1000 instances)",
        result,
    );
}

#[test]
fn criterion_04_gap_decomposition_identity() {
    let result = (|| -> Result<(), String> {
        for i in 0..1000u64 {
            let instance = family_instance(2, i, RefStyle::Dirichlet);
            let sol = optimal_prompter(&instance).map_err(|e| e.to_string())?;
            let gap = suboptimality_gap(&instance, &sol.rho_star).map_err(|e| e.to_string())?;
            let per_prompt: Vec<f64> = gap
                .delta1_per_prompt
                .iter()
                .zip(&gap.delta2_per_prompt)
                .map(|(a, b)| a + b)
                .collect();
            let recomposed = expectation(instance.prompt_dist(), &per_prompt)
                .map_err(|e| e.to_string())?;
            if (gap.gap - recomposed).abs() > 1e-10 {
                return Err(format!(
                    "instance {i}: gap {} vs E[delta1+delta2] {}",
                    gap.gap, recomposed
                ));
            }
            for (x, &d1) in gap.delta1_per_prompt.iter().enumerate() {
                if d1 < -1e-12 {
                    return Err(format!("instance {i} prompt {x}: delta1 {d1:.3e} < -1e-12"));
                }
            }
        }
        Ok(())
    })();
    report(
        "criterion 4 — gap = E[delta1] + E[delta2] within 1e-10, delta1 >= -1e-12 (1000 instances)",
        result,
    );
}

#[test]
fn criterion_05_preference_loss_gradient_check() {
    let result = (|| -> Result<(), String> {
        let mut rng = derive_rng(5, "gradient-check");
        for draw in 0..20 {
            let nx = 2 + (rng.random::<u64>() % 4) as usize;
            let ny = 2 + (rng.random::<u64>() % 4) as usize;
            let candidate: Vec<Vec<f64>> = (0..nx)
                .map(|_| (0..ny).map(|_| 2.0 * rng.random::<f64>()).collect())
                .collect();
            let pairs: Vec<PreferencePair> = (0..200)
                .map(|_| {
                    let prompt = (rng.random::<u64>() % nx as u64) as usize;
                    let winner = (rng.random::<u64>() % ny as u64) as usize;
                    let mut loser = (rng.random::<u64>() % ny as u64) as usize;
                    while loser == winner {
                        loser = (rng.random::<u64>() % ny as u64) as usize;
                    }
                    PreferencePair { prompt, winner, loser }
                })
                .collect();
            let data = PreferenceDataset {
                count: pairs.len(),
                pairs,
                behavior_id: "synthetic".into(),
                seed: draw,
            };
            let grad = bt_loss_gradient(&candidate, &data).map_err(|e| e.to_string())?;
            let h = 1e-5;
            for x in 0..nx {
                for y in 0..ny {
                    let mut plus = candidate.clone();
                    plus[x][y] += h;
                    let mut minus = candidate.clone();
                    minus[x][y] -= h;
                    let fd = (bt_loss(&plus, &data).map_err(|e| e.to_string())?
                        - bt_loss(&minus, &data).map_err(|e| e.to_string())?)
                        / (2.0 * h);
                    let err = (grad[x][y] - fd).abs();
                    if err > 1e-6 {
                        return Err(format!(
                            "draw {draw} entry ({x},{y}): analytic {} vs fd {} (err {err:.3e})",
                            grad[x][y], fd
                        ));
                    }
                }
            }
        }
        Ok(())
    })();
    report("criterion 5 — analytic gradient vs central differences (20 draws, 1e-6)", result);
}

#[test]
fn criterion_06_reward_recovery_from_preferences() {
    let result = (|| -> Result<(), String> {
        // Seed and the 0.1 threshold were calibrated once against an oracle
        // run and are frozen here; do not tune them to make the test pass.
        let spec = InstanceSpec {
            seed: 20_240_817,
            ..InstanceSpec::default()
        };
        let instance = generate_instance(&spec).map_err(|e| e.to_string())?;
        let data = generate_preferences(&instance, instance.frozen(), "frozen", 50_000, 99)
            .map_err(|e| e.to_string())?;
        let fit = fit_reward(&data, (4, 4), &FitConfig::default()).map_err(|e| e.to_string())?;
        let truth = center_matrix(instance.reward().values());
        let fitted = center_matrix(fit.table.values());
        let max_err = fitted
            .iter()
            .flatten()
            .zip(truth.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if max_err > 0.1 {
            return Err(format!("centered max-abs error {max_err:.4} > 0.1"));
        }
        Ok(())
    })();
    report("criterion 6 — reward recovery from 50k pairs (centered max-abs <= 0.1)", result);
}

#[test]
fn criterion_07_prompting_beats_no_prompting() {
    let result = (|| -> Result<(), String> {
        let mut beats_fine_tuned = 0usize;
        for i in 0..1000u64 {
            let instance = family_instance(7, i, RefStyle::IdentityLike);
            let record = run_single(&instance, i).map_err(|e| e.to_string())?;
            if record.j_tilde_star < record.j_tilde_ref - 1e-9 {
                return Err(format!(
                    "instance {i}: optimized prompter worse than reference ({} < {})",
                    record.j_tilde_star, record.j_tilde_ref
                ));
            }
            if record.j_tilde_star >= record.j_star {
                beats_fine_tuned += 1;
            }
        }
        println!(
            "[acceptance]   (info) prompting matched or beat the fine-tuned optimum on \
             {beats_fine_tuned}/1000 instances"
        );
        Ok(())
    })();
    report(
        "criterion 7 — optimized prompter >= identity-like reference (1000 instances, 1e-9)",
        result,
    );
}

#[test]
fn criterion_08_lambda_limits_and_monotonicity() {
    let result = (|| -> Result<(), String> {
        // λ → ∞ pins the prompter to the reference.
        for i in 0..20u64 {
            let mut spec = family_spec(8, i, RefStyle::Dirichlet);
            spec.lambda = 1e8;
            let instance = generate_instance(&spec).map_err(|e| e.to_string())?;
            let sol = optimal_prompter(&instance).map_err(|e| e.to_string())?;
            for x in 0..instance.n_prompts() {
                let tv = tv_distance(sol.rho_star.row(x), instance.ref_prompter().row(x))
                    .map_err(|e| e.to_string())?;
                if tv > 1e-6 {
                    return Err(format!("lambda=1e8 instance {i} row {x}: TV {tv:.3e}"));
                }
            }
        }

        // λ → 0 concentrates each row on its value-argmax whenever the
        // argmax is separated; structured rewards give wide separations.
        let mut checked = 0;
        for i in 0..200u64 {
            let mut spec = family_spec(8, 1000 + i, RefStyle::Dirichlet);
            spec.reward_style = RewardStyle::StructuredGap;
            spec.lambda = 1e-6;
            let instance = generate_instance(&spec).map_err(|e| e.to_string())?;
            let r = prompter_value(&instance).map_err(|e| e.to_string())?;
            let separated = (0..instance.n_prompts()).all(|x| {
                let mut row = r.row(x).to_vec();
                row.sort_by(|a, b| b.total_cmp(a));
                row[0] - row[1] >= 0.01
            });
            if !separated {
                continue;
            }
            checked += 1;
            let sol = optimal_prompter(&instance).map_err(|e| e.to_string())?;
            for x in 0..instance.n_prompts() {
                let argmax = r
                    .row(x)
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .unwrap()
                    .0;
                let mass = sol.rho_star.row(x).probs()[argmax];
                if mass < 1.0 - 1e-6 {
                    return Err(format!(
                        "lambda=1e-6 instance {i} row {x}: argmax mass {mass}"
                    ));
                }
            }
            if checked >= 20 {
                break;
            }
        }
        if checked < 10 {
            return Err(format!("only {checked} separated instances found"));
        }

        // E_{ρ*_λ}[R] is nonincreasing in λ along a log grid.
        let grid = parse_grid("0.01:100:20:log").map_err(|e| e.to_string())?;
        for seed in [3u64, 41, 271, 828, 1828] {
            let mut prev = f64::INFINITY;
            for &lambda in &grid {
                let spec = InstanceSpec {
                    seed,
                    lambda,
                    ..InstanceSpec::default()
                };
                let instance = generate_instance(&spec).map_err(|e| e.to_string())?;
                let r = prompter_value(&instance).map_err(|e| e.to_string())?;
                let sol = optimal_prompter(&instance).map_err(|e| e.to_string())?;
                let per_prompt: Vec<f64> = (0..instance.n_prompts())
                    .map(|x| expectation(sol.rho_star.row(x), r.row(x)).unwrap())
                    .collect();
                let value = expectation(instance.prompt_dist(), &per_prompt)
                    .map_err(|e| e.to_string())?;
                if value > prev + 1e-9 {
                    return Err(format!(
                        "seed {seed}: E[R] rose from {prev} to {value} at lambda {lambda}"
                    ));
                }
                prev = value;
            }
        }
        Ok(())
    })();
    report("criterion 8 — lambda limits (1e8/1e-6) and monotone reward path", result);
}

#[test]
fn criterion_09_brute_force_enumeration_agreement() {
    let result = (|| -> Result<(), String> {
        for i in 0..50u64 {
            let mut rng = derive_rng(9, &format!("small/{i}"));
            let spec = InstanceSpec {
                n_prompts: 2 + (rng.random::<u64>() % 3) as usize,
                n_responses: 2 + (rng.random::<u64>() % 3) as usize,
                beta: (0.1f64.ln() + rng.random::<f64>() * 100f64.ln()).exp(),
                lambda: (0.1f64.ln() + rng.random::<f64>() * 100f64.ln()).exp(),
                seed: rng.random(),
                ..InstanceSpec::default()
            };
            let instance = generate_instance(&spec).map_err(|e| e.to_string())?;
            let record = run_single(&instance, spec.seed).map_err(|e| e.to_string())?;
            let bound = theorem1_terms(&instance).map_err(|e| e.to_string())?;
            let sol = optimal_prompter(&instance).map_err(|e| e.to_string())?;
            let gap = suboptimality_gap(&instance, &sol.rho_star).map_err(|e| e.to_string())?;
            let appendix = appendix_decomposition(&instance).map_err(|e| e.to_string())?;
            let brute = brute_record(&RawInstance::from(&instance));

            let scalars = [
                ("j_star", record.j_star, brute.j_star),
                ("j_frozen", record.j_frozen, brute.j_frozen),
                ("j_tilde_star", record.j_tilde_star, brute.j_tilde_star),
                ("j_tilde_ref", record.j_tilde_ref, brute.j_tilde_ref),
                ("gap", record.gap, brute.gap),
                ("term1", record.term1, brute.term1),
                ("term2", record.term2, brute.term2),
                ("term3", record.term3, brute.term3),
                ("rhs", record.rhs, brute.rhs),
                ("slack", record.slack, brute.slack),
                ("kl_mean", record.kl_mean, brute.kl_mean),
            ];
            for (name, got, want) in scalars {
                if (got - want).abs() > 1e-10 {
                    return Err(format!(
                        "instance {i}: {name} {got} vs brute {want} (err {:.3e})",
                        (got - want).abs()
                    ));
                }
            }
            let vectors = [
                ("eps1", &bound.eps1_per_prompt, &brute.eps1),
                ("eps2", &bound.eps2_per_prompt, &brute.eps2),
                ("delta1", &gap.delta1_per_prompt, &brute.delta1),
                ("delta2", &gap.delta2_per_prompt, &brute.delta2),
                ("delta3", &appendix.delta3_per_prompt, &brute.delta3),
                ("delta4", &appendix.delta4_per_prompt, &brute.delta4),
            ];
            for (name, got, want) in vectors {
                for (x, (g, w)) in got.iter().zip(want).enumerate() {
                    if (g - w).abs() > 1e-10 {
                        return Err(format!(
                            "instance {i}: {name}[{x}] {g} vs brute {w}"
                        ));
                    }
                }
            }
        }
        Ok(())
    })();
    report("criterion 9 — all report values match triple-loop enumeration (50 seeds, 1e-10)", result);
}

/// CSV bytes with the trailing wall_time_ms column removed from every line.
fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|line| match line.rfind(',') {
            Some(idx) => &line[..idx],
            None => line,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_10_sweep_reproducibility() {
    let result = (|| -> Result<(), String> {
        let spec = InstanceSpec {
            seed: 77,
            ..InstanceSpec::default()
        };
        let lambdas = parse_grid("0.1:10:3:log").map_err(|e| e.to_string())?;
        let betas = [0.5, 1.0];
        let mut renders = Vec::new();
        for threads in [Some(1), Some(1), Some(4)] {
            let out =
                run_sweep(&spec, &lambdas, &betas, 5, threads).map_err(|e| e.to_string())?;
            let csv =
                render_report(&out.records, ReportFormat::Csv).map_err(|e| e.to_string())?;
            renders.push(strip_wall_time(&csv));
        }
        if renders[0] != renders[1] {
            return Err("two serial runs differ".into());
        }
        if renders[0] != renders[2] {
            return Err("serial and parallel runs differ".into());
        }
        Ok(())
    })();
    report("criterion 10 — byte-identical sweep CSV across runs and thread counts", result);
}
