//! Dirichlet-Multinomial likelihood over multi-question vote vectors.
//!
//! For one question with counts `k`, total `N = Σk` and concentrations `α`
//! summing to `A`:
//!
//! ```text
//! log p(k | α) = lnΓ(A) − lnΓ(A + N) + Σ_i [lnΓ(α_i + k_i) − lnΓ(α_i)]
//!                (+ lnΓ(N + 1) − Σ_i lnΓ(k_i + 1)   with the coefficient)
//!
//! ∂/∂α_i     = ψ(A) − ψ(A + N) + ψ(α_i + k_i) − ψ(α_i)
//! ```
//!
//! A question with `N = 0` has probability one for every `α`, so both the
//! value and the gradient are exactly zero. Everything here returns
//! log-likelihoods; the trainer negates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::schema::{QuestionSlice, VoteVector};
use crate::special::{digamma, ln_gamma};

pub const ALPHA_MIN: f64 = 1.0;
pub const ALPHA_MAX: f64 = 100.0;

fn check_inputs(k: &[u32], alpha: &[f64]) -> Result<()> {
    if k.len() != alpha.len() {
        return Err(Error::Domain(format!(
            "length mismatch: {} counts vs {} concentrations",
            k.len(),
            alpha.len()
        )));
    }
    if k.len() < 2 {
        return Err(Error::Domain("at least two answers required".into()));
    }
    if let Some(a) = alpha.iter().find(|a| !a.is_finite() || **a <= 0.0) {
        return Err(Error::Domain(format!("concentration {a} is not positive and finite")));
    }
    Ok(())
}

/// Log of the Dirichlet-Multinomial probability of `k` under `alpha`.
pub fn dm_log_likelihood(k: &[u32], alpha: &[f64], include_coefficient: bool) -> Result<f64> {
    check_inputs(k, alpha)?;
    let n: u32 = k.iter().sum();
    if n == 0 {
        return Ok(0.0);
    }
    let a_sum: f64 = alpha.iter().sum();
    let n = f64::from(n);
    let mut ll = ln_gamma(a_sum) - ln_gamma(a_sum + n);
    for (&ki, &ai) in k.iter().zip(alpha) {
        if ki > 0 {
            ll += ln_gamma(ai + f64::from(ki)) - ln_gamma(ai);
        }
    }
    if include_coefficient {
        ll += ln_gamma(n + 1.0);
        for &ki in k.iter().filter(|&&ki| ki > 1) {
            ll -= ln_gamma(f64::from(ki) + 1.0);
        }
    }
    Ok(ll)
}

/// Gradient of [`dm_log_likelihood`] with respect to each concentration.
pub fn dm_grad_alpha(k: &[u32], alpha: &[f64]) -> Result<Vec<f64>> {
    check_inputs(k, alpha)?;
    let n: u32 = k.iter().sum();
    if n == 0 {
        return Ok(vec![0.0; alpha.len()]);
    }
    let a_sum: f64 = alpha.iter().sum();
    let shared = digamma(a_sum) - digamma(a_sum + f64::from(n));
    Ok(k.iter()
        .zip(alpha)
        .map(|(&ki, &ai)| {
            if ki == 0 {
                shared
            } else {
                shared + digamma(ai + f64::from(ki)) - digamma(ai)
            }
        })
        .collect())
}

/// Monte-Carlo estimate of the Dirichlet-Multinomial probability (not its log):
/// draws `ρ ~ Dirichlet(α)` and averages `Multinomial(k | ρ, N)`.
pub fn dm_mc_oracle(k: &[u32], alpha: &[f64], samples: usize, seed: u64) -> Result<f64> {
    check_inputs(k, alpha)?;
    if samples < 10_000 {
        return Err(Error::Domain(format!("{samples} samples; at least 10^4 required")));
    }
    let n: u32 = k.iter().sum();
    let log_coef = ln_gamma(f64::from(n) + 1.0)
        - k.iter().map(|&ki| ln_gamma(f64::from(ki) + 1.0)).sum::<f64>();
    let gammas = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::Domain(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = vec![0.0; alpha.len()];
    let mut acc = 0.0;
    for _ in 0..samples {
        let mut total = 0.0;
        for (d, g) in draws.iter_mut().zip(&gammas) {
            *d = g.sample(&mut rng);
            total += *d;
        }
        let mut log_p = log_coef;
        for (&ki, &d) in k.iter().zip(&draws) {
            if ki > 0 {
                log_p += f64::from(ki) * (d / total).ln();
            }
        }
        acc += log_p.exp();
    }
    Ok(acc / samples as f64)
}

/// Concentrations for every answer in the global index, each in `(1, 100)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletPrediction {
    alpha: Vec<f64>,
}

impl DirichletPrediction {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Wraps concentrations already known to lie in `(1, 100)`.
    pub fn from_alpha(alpha: Vec<f64>) -> Result<Self> {
        if let Some(a) = alpha.iter().find(|a| !(**a > ALPHA_MIN && **a < ALPHA_MAX)) {
            return Err(Error::Domain(format!("concentration {a} outside (1, 100)")));
        }
        Ok(Self { alpha })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps raw head outputs to concentrations via `α = 1 + 99·σ(x)`.
///
/// Saturated inputs are held one ulp inside the open interval.
pub fn link(raw: &[f64]) -> Result<DirichletPrediction> {
    let lo = ALPHA_MIN.next_up();
    let hi = ALPHA_MAX.next_down();
    let alpha = raw
        .iter()
        .map(|&x| {
            if !x.is_finite() {
                return Err(Error::Domain(format!("non-finite head output {x}")));
            }
            Ok((ALPHA_MIN + (ALPHA_MAX - ALPHA_MIN) * sigmoid(x)).clamp(lo, hi))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DirichletPrediction { alpha })
}

/// `dα/dx` for each raw input.
pub fn link_derivative(raw: &[f64]) -> Vec<f64> {
    raw.iter()
        .map(|&x| {
            let s = sigmoid(x);
            (ALPHA_MAX - ALPHA_MIN) * s * (1.0 - s)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuestionLikelihood {
    pub question: String,
    pub log_likelihood: f64,
    /// Gradient over the question's answer slice.
    pub gradient: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiQuestionLikelihood {
    pub total: f64,
    pub per_question: Vec<QuestionLikelihood>,
}

impl MultiQuestionLikelihood {
    /// Gradient of `total` over the whole answer index.
    pub fn gradient(&self, slices: &[QuestionSlice]) -> Vec<f64> {
        let len = slices.last().map_or(0, |s| s.end);
        let mut g = vec![0.0; len];
        for (s, q) in slices.iter().zip(&self.per_question) {
            g[s.range()].copy_from_slice(&q.gradient);
        }
        g
    }
}

/// Sum of per-question log-likelihoods (multinomial coefficient omitted).
pub fn multi_question_loss(
    votes: &VoteVector,
    prediction: &DirichletPrediction,
    slices: &[QuestionSlice],
) -> Result<MultiQuestionLikelihood> {
    let len = votes.len();
    if prediction.len() != len {
        return Err(Error::Domain(format!(
            "vote vector has {len} answers, prediction has {}",
            prediction.len()
        )));
    }
    if slices.last().map_or(0, |s| s.end) != len {
        return Err(Error::Domain("question slices do not cover the answer index".into()));
    }
    let mut total = 0.0;
    let mut per_question = Vec::with_capacity(slices.len());
    for s in slices {
        let k = &votes.counts()[s.range()];
        let a = &prediction.alpha()[s.range()];
        let (log_likelihood, gradient) = if k.iter().all(|&x| x == 0) {
            (0.0, vec![0.0; s.len()])
        } else {
            (dm_log_likelihood(k, a, false)?, dm_grad_alpha(k, a)?)
        };
        total += log_likelihood;
        per_question.push(QuestionLikelihood {
            question: s.question.clone(),
            log_likelihood,
            gradient,
        });
    }
    Ok(MultiQuestionLikelihood { total, per_question })
}
