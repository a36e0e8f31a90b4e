use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::schema::{AnswerSchema, Question, VoteRecord};

use super::galaxy::GalaxyParams;

/// Maps morphology to per-question answer probabilities and draws vote totals.
#[derive(Clone, Debug)]
pub struct SyntheticCampaignTruth {
    schema: AnswerSchema,
    votes_per_question: (u32, u32),
}

/// Probability mass peaked at fractional position `pos` of `n` ordered answers.
fn ordinal(n: usize, pos: f64, width: f64) -> Vec<f64> {
    (0..n)
        .map(|j| (-(j as f64 - pos).powi(2) / (2.0 * width * width)).exp())
        .collect()
}

fn normalise(mut w: Vec<f64>) -> Vec<f64> {
    // keep every answer possible
    let floor = 0.01;
    let total: f64 = w.iter().sum();
    let n = w.len() as f64;
    for x in &mut w {
        *x = (1.0 - floor) * *x / total + floor / n;
    }
    w
}

fn answer_suffix<'a>(question: &Question, answer: &'a str) -> &'a str {
    answer
        .strip_prefix(question.id.as_str())
        .and_then(|s| s.strip_prefix('_'))
        .unwrap_or(answer)
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn featured(p: &GalaxyParams) -> f64 {
    let mut f = 0.15 + 0.7 * (1.0 - p.bulge_fraction);
    if p.has_ring {
        f += 0.2;
    }
    if p.has_bar {
        f += 0.15 * p.bar_strength;
    }
    if p.arm_count > 0 {
        f += 0.15;
    }
    f.clamp(0.02, 0.95)
}

impl SyntheticCampaignTruth {
    pub fn new(schema: AnswerSchema, votes_per_question: (u32, u32)) -> Result<Self> {
        let (lo, hi) = votes_per_question;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("vote range ({lo}, {hi}) invalid")));
        }
        Ok(Self {
            schema,
            votes_per_question,
        })
    }

    pub fn schema(&self) -> &AnswerSchema {
        &self.schema
    }

    /// True answer probabilities `ρ` for one question.
    pub fn rho(&self, question: &Question, p: &GalaxyParams) -> Vec<f64> {
        let n = question.answers.len();
        let kind = question
            .id
            .rsplit_once('_')
            .map(|(_, k)| k)
            .unwrap_or(&question.id);
        let last = (n - 1) as f64;
        let w = match kind {
            "smooth-or-featured" => {
                let f = featured(p);
                let mut w = vec![0.03 / (n as f64 - 2.0).max(1.0); n];
                w[0] = 1.0 - f;
                w[1] = f;
                w
            }
            "disk-edge-on" => {
                let yes = 0.03 + 0.9 * (p.ellipticity / 0.8).powi(3);
                ordinal(n, (1.0 - yes) * last, 0.5)
            }
            "bar" => {
                let level = if p.has_bar { p.bar_strength } else { 0.0 };
                ordinal(n, (1.0 - level) * last, 0.5)
            }
            "has-spiral-arms" => {
                let yes = if p.arm_count > 0 { 0.9 } else { 0.08 };
                ordinal(n, (1.0 - yes) * last, 0.5)
            }
            "spiral-winding" => {
                let w = ordinal(n, (1.0 - p.winding) * last, 0.6);
                if p.arm_count > 0 {
                    w
                } else {
                    w.iter().map(|x| 0.3 * x + 0.7).collect()
                }
            }
            "spiral-arm-count" => question
                .answers
                .iter()
                .map(|a| {
                    let s = answer_suffix(question, a);
                    let hit = match p.arm_count {
                        0 => s == "none" || s == "cant-tell",
                        k => s == k.to_string(),
                    };
                    if hit {
                        1.0
                    } else {
                        0.1
                    }
                })
                .collect(),
            "bulge-size" => ordinal(n, p.bulge_fraction * last, 0.6),
            _ => self.hashed(question, p),
        };
        normalise(w)
    }

    /// Fixed pseudo-random linear readout of the morphology for unmodelled questions.
    fn hashed(&self, question: &Question, p: &GalaxyParams) -> Vec<f64> {
        let features = [
            p.bulge_fraction,
            p.ellipticity,
            p.bar_strength,
            f64::from(p.arm_count) / 4.0,
            f64::from(u8::from(p.has_ring)),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(fnv(&question.id));
        (0..question.answers.len())
            .map(|_| {
                let logit: f64 = features.iter().map(|f| f * rng.random_range(-2.0..2.0)).sum();
                logit.exp()
            })
            .collect()
    }

    /// Draws `N_q` then multinomial counts for every question in `campaign`.
    pub fn simulate_votes<R: Rng + ?Sized>(
        &self,
        galaxy_id: &str,
        campaign: &str,
        params: &GalaxyParams,
        rng: &mut R,
    ) -> Result<VoteRecord> {
        let ci = self
            .schema
            .campaign_index(campaign)
            .ok_or_else(|| Error::Dataset(format!("unknown campaign `{campaign}`")))?;
        let (lo, hi) = self.votes_per_question;
        let mut votes = BTreeMap::new();
        for q in &self.schema.questions()[self.schema.campaigns()[ci].questions.clone()] {
            let rho = self.rho(q, params);
            let total = rng.random_range(lo..=hi);
            let mut counts = vec![0u32; rho.len()];
            for _ in 0..total {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                let mut pick = rho.len() - 1;
                for (j, r) in rho.iter().enumerate() {
                    acc += r;
                    if u < acc {
                        pick = j;
                        break;
                    }
                }
                counts[pick] += 1;
            }
            for (a, k) in q.answers.iter().zip(counts) {
                if k > 0 {
                    votes.insert(a.clone(), k);
                }
            }
        }
        Ok(VoteRecord {
            galaxy_id: galaxy_id.to_string(),
            campaign: campaign.to_string(),
            votes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_is_a_distribution_for_every_question() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for schema in [AnswerSchema::synthetic(), AnswerSchema::gz_evo()] {
            let truth = SyntheticCampaignTruth::new(schema.clone(), (5, 40)).unwrap();
            for _ in 0..50 {
                let p = GalaxyParams::sample(&mut rng, None, 0.5);
                for q in schema.questions() {
                    let rho = truth.rho(q, &p);
                    assert_eq!(rho.len(), q.answers.len());
                    assert!(rho.iter().all(|&r| r > 0.0));
                    assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rings_look_more_featured() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut p = GalaxyParams::sample(&mut rng, Some(false), 0.0);
        p.bulge_fraction = 0.5;
        let plain = featured(&p);
        p.has_ring = true;
        assert!(featured(&p) > plain);
    }
}
