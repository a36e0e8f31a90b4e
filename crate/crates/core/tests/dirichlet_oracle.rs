//! Closed-form likelihood and gradient checked against independent oracles:
//! Monte-Carlo integration, exhaustive enumeration and finite differences.

use gzhybrid_core::dirichlet::{
    dm_grad_alpha, dm_log_likelihood, dm_mc_oracle, link, link_derivative, multi_question_loss,
    DirichletPrediction,
};
use gzhybrid_core::schema::{AnswerSchema, VoteVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// All compositions of `n` into `parts` nonnegative integers.
fn compositions(n: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in compositions(n - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-9)
}

#[test]
fn monte_carlo_known_values() {
    let p = dm_mc_oracle(&[1, 0], &[1.0, 1.0], 1_000_000, 1).unwrap();
    assert!((p - 0.5).abs() < 0.002, "{p}");
    let p = dm_mc_oracle(&[2, 0], &[2.0, 2.0], 1_000_000, 2).unwrap();
    assert!((p - 0.3).abs() < 0.002, "{p}");
    let closed = dm_log_likelihood(&[2, 0], &[2.0, 2.0], true).unwrap().exp();
    assert!((closed - p).abs() < 0.002);
}

#[test]
fn normalization_is_exhaustive() {
    let alphas: [&[f64]; 5] = [
        &[1.0, 1.0],
        &[0.5, 7.0],
        &[2.0, 3.0, 4.0],
        &[1.5, 99.0, 20.0],
        &[50.5, 1.01],
    ];
    for alpha in alphas {
        for n in 0..=4 {
            let total: f64 = compositions(n, alpha.len())
                .iter()
                .map(|k| dm_log_likelihood(k, alpha, true).unwrap().exp())
                .sum();
            assert!((total - 1.0).abs() < 1e-10, "alpha={alpha:?} n={n}: {total}");
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    let h = 1e-3;
    for case in 0..100 {
        let len = rng.random_range(2..=5);
        let k: Vec<u32> = (0..len).map(|_| rng.random_range(0..=12)).collect();
        let alpha: Vec<f64> = (0..len).map(|_| rng.random_range(1.0..100.0)).collect();
        let g = dm_grad_alpha(&k, &alpha).unwrap();
        for i in 0..len {
            // five-point stencil: truncation O(h^4), rounding O(eps/h)
            let at = |d: f64| {
                let mut a = alpha.clone();
                a[i] += d;
                dm_log_likelihood(&k, &a, false).unwrap()
            };
            let fd = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
            let err = rel_err(g[i], fd);
            assert!(err < 1e-6, "case {case} k={k:?} α={alpha:?} i={i}: {} vs {fd} ({err:e})", g[i]);
        }
    }
}

#[test]
fn two_vote_gradient_matches_finite_differences() {
    let g = dm_grad_alpha(&[2, 0], &[2.0, 2.0]).unwrap();
    let h = 1e-5;
    for i in 0..2 {
        let mut up = vec![2.0, 2.0];
        let mut down = vec![2.0, 2.0];
        up[i] += h;
        down[i] -= h;
        let fd = (dm_log_likelihood(&[2, 0], &up, true).unwrap()
            - dm_log_likelihood(&[2, 0], &down, true).unwrap())
            / (2.0 * h);
        assert!(rel_err(g[i], fd) < 1e-6);
    }
}

#[test]
fn closed_form_agrees_with_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..20u64 {
        let len = rng.random_range(2..=4);
        let n = rng.random_range(0..=5);
        let mut k = vec![0u32; len];
        for _ in 0..n {
            k[rng.random_range(0..len)] += 1;
        }
        let alpha: Vec<f64> = (0..len).map(|_| rng.random_range(0.5..10.0)).collect();
        let closed = dm_log_likelihood(&k, &alpha, true).unwrap().exp();
        let mc = dm_mc_oracle(&k, &alpha, 1_000_000, case).unwrap();
        assert!((closed - mc).abs() < 0.01, "k={k:?} α={alpha:?}: {closed} vs {mc}");
    }
}

#[test]
fn link_bounds_and_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let raw: Vec<f64> = (0..10_000).map(|_| rng.random_range(-60.0..60.0)).collect();
    let p = link(&raw).unwrap();
    assert!(p.alpha().iter().all(|&a| a > 1.0 && a < 100.0));

    let h = 1e-6;
    let d = link_derivative(&raw);
    for (x, dx) in raw.iter().zip(&d).take(2_000) {
        let up = link(&[x + h]).unwrap().alpha()[0];
        let down = link(&[x - h]).unwrap().alpha()[0];
        let fd = (up - down) / (2.0 * h);
        assert!((fd - dx).abs() < 1e-6 * dx.abs().max(1.0), "x={x}: {dx} vs {fd}");
    }
}

fn synthetic_vector(schema: &AnswerSchema, counts: &[u32]) -> VoteVector {
    VoteVector::from_counts(counts.to_vec(), schema)
}

proptest! {
    #[test]
    fn perturbing_unanswered_questions_changes_nothing(
        seed in any::<u64>(),
        perturb in 1.0f64..30.0,
    ) {
        let schema = AnswerSchema::synthetic();
        let slices = schema.question_slices();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0u32; schema.answer_count()];
        let mut answered = vec![false; slices.len()];
        for (qi, s) in slices.iter().enumerate() {
            if rng.random_bool(0.5) {
                answered[qi] = true;
                for c in &mut counts[s.range()] {
                    *c = rng.random_range(0..6);
                }
            }
        }
        let votes = synthetic_vector(&schema, &counts);
        let alpha: Vec<f64> = (0..counts.len()).map(|_| rng.random_range(1.01..99.0)).collect();
        let mut moved = alpha.clone();
        for (qi, s) in slices.iter().enumerate() {
            if votes.question_totals()[qi] == 0 {
                for a in &mut moved[s.range()] {
                    *a = (*a + perturb).min(99.9);
                }
            }
        }
        let base = multi_question_loss(&votes, &DirichletPrediction::from_alpha(alpha).unwrap(), &slices).unwrap();
        let after = multi_question_loss(&votes, &DirichletPrediction::from_alpha(moved).unwrap(), &slices).unwrap();
        prop_assert_eq!(base.total, after.total);
        prop_assert_eq!(base.gradient(&slices), after.gradient(&slices));
    }
}
