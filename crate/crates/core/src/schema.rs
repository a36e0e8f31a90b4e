//! Multi-campaign question/answer vocabulary and vote vectors.
//!
//! A schema document is TOML:
//!
//! ```toml
//! [[campaigns]]
//! name = "gz2"
//!
//! [[campaigns.questions]]
//! id = "gz2_bar"
//! answers = ["gz2_bar_yes", "gz2_bar_no"]
//! ```
//!
//! Answer positions in the global index follow document order: campaign,
//! then question, then answer. Unknown keys are rejected.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

pub const SYNTHETIC_SCHEMA_TOML: &str = include_str!("../data/synthetic_schema.toml");
pub const GZ_EVO_SCHEMA_TOML: &str = include_str!("../data/gz_evo_schema.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaDoc {
    campaigns: Vec<CampaignDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CampaignDoc {
    name: String,
    #[serde(default)]
    questions: Vec<QuestionDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuestionDoc {
    id: String,
    answers: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Campaign {
    pub name: String,
    /// Indices into [`AnswerSchema::questions`].
    pub questions: std::ops::Range<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Question {
    pub id: String,
    pub campaign: usize,
    pub answers: Vec<String>,
    pub start: usize,
    pub end: usize,
}

/// Contiguous slice of the global answer index owned by one question.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuestionSlice {
    pub question: String,
    pub start: usize,
    pub end: usize,
}

impl QuestionSlice {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Immutable registry of campaigns, questions and answers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnswerSchema {
    campaigns: Vec<Campaign>,
    questions: Vec<Question>,
    answer_ids: Vec<String>,
    answer_question: Vec<usize>,
    index: HashMap<String, usize>,
}

impl AnswerSchema {
    /// Parses and validates a schema document.
    pub fn load_str(document: &str) -> Result<Self> {
        let doc: SchemaDoc =
            toml::from_str(document).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_doc(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        Self::load_str(&text)
    }

    /// The two-campaign schema used by the synthetic generator.
    pub fn synthetic() -> Self {
        Self::load_str(SYNTHETIC_SCHEMA_TOML).expect("bundled synthetic schema is valid")
    }

    /// Best-effort reconstruction of the 65-question, 206-answer GZ-Evo schema.
    pub fn gz_evo() -> Self {
        Self::load_str(GZ_EVO_SCHEMA_TOML).expect("bundled GZ-Evo schema is valid")
    }

    fn from_doc(doc: SchemaDoc) -> Result<Self> {
        let mut campaigns = Vec::with_capacity(doc.campaigns.len());
        let mut questions = Vec::new();
        let mut answer_ids = Vec::new();
        let mut answer_question = Vec::new();
        let mut index = HashMap::new();
        let mut campaign_names = HashSet::new();
        let mut question_ids = HashSet::new();

        for (ci, c) in doc.campaigns.into_iter().enumerate() {
            if c.name.is_empty() {
                return Err(Error::Schema("empty campaign name".into()));
            }
            if !campaign_names.insert(c.name.clone()) {
                return Err(Error::Schema(format!("duplicate campaign `{}`", c.name)));
            }
            let q_start = questions.len();
            for q in c.questions {
                if !question_ids.insert(q.id.clone()) {
                    return Err(Error::Schema(format!("duplicate question `{}`", q.id)));
                }
                if q.answers.len() < 2 {
                    return Err(Error::Schema(format!(
                        "question `{}` has {} answer(s); at least 2 required",
                        q.id,
                        q.answers.len()
                    )));
                }
                let start = answer_ids.len();
                for a in &q.answers {
                    if index.insert(a.clone(), answer_ids.len()).is_some() {
                        return Err(Error::Schema(format!("duplicate answer `{a}`")));
                    }
                    answer_ids.push(a.clone());
                    answer_question.push(questions.len());
                }
                questions.push(Question {
                    id: q.id,
                    campaign: ci,
                    answers: q.answers,
                    start,
                    end: answer_ids.len(),
                });
            }
            campaigns.push(Campaign {
                name: c.name,
                questions: q_start..questions.len(),
            });
        }

        Ok(Self {
            campaigns,
            questions,
            answer_ids,
            answer_question,
            index,
        })
    }

    /// Number of answers `A` in the global index.
    pub fn answer_count(&self) -> usize {
        self.answer_ids.len()
    }

    pub fn campaigns(&self) -> &[Campaign] {
        &self.campaigns
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn answer_ids(&self) -> &[String] {
        &self.answer_ids
    }

    pub fn answer_position(&self, answer_id: &str) -> Option<usize> {
        self.index.get(answer_id).copied()
    }

    pub fn campaign_index(&self, name: &str) -> Option<usize> {
        self.campaigns.iter().position(|c| c.name == name)
    }

    /// Schema document that [`load_str`](Self::load_str) parses back to `self`.
    pub fn to_toml(&self) -> String {
        let quote = |s: &str| toml::Value::String(s.to_string()).to_string();
        let mut out = String::new();
        for c in &self.campaigns {
            out.push_str(&format!("[[campaigns]]\nname = {}\n\n", quote(&c.name)));
            for q in &self.questions[c.questions.clone()] {
                let answers: Vec<String> = q.answers.iter().map(|a| quote(a)).collect();
                out.push_str(&format!(
                    "[[campaigns.questions]]\nid = {}\nanswers = [{}]\n\n",
                    quote(&q.id),
                    answers.join(", ")
                ));
            }
        }
        out
    }

    /// Question owning the answer at `position`.
    pub fn question_of(&self, position: usize) -> &Question {
        &self.questions[self.answer_question[position]]
    }

    /// Ordered, disjoint slices covering `[0, A)`.
    pub fn question_slices(&self) -> Vec<QuestionSlice> {
        self.questions
            .iter()
            .map(|q| QuestionSlice {
                question: q.id.clone(),
                start: q.start,
                end: q.end,
            })
            .collect()
    }

    /// Converts a record to a dense vector over the global answer index.
    pub fn encode_votes(&self, record: &VoteRecord) -> Result<VoteVector> {
        let ci = self.campaign_index(&record.campaign).ok_or_else(|| {
            Error::Encoding(format!(
                "galaxy `{}`: unknown campaign `{}`",
                record.galaxy_id, record.campaign
            ))
        })?;
        let mut counts = vec![0u32; self.answer_count()];
        for (answer, &count) in &record.votes {
            let pos = self.answer_position(answer).ok_or_else(|| {
                Error::Encoding(format!(
                    "galaxy `{}`: unknown answer `{answer}`",
                    record.galaxy_id
                ))
            })?;
            if self.question_of(pos).campaign != ci {
                return Err(Error::Encoding(format!(
                    "galaxy `{}`: answer `{answer}` does not belong to campaign `{}`",
                    record.galaxy_id, record.campaign
                )));
            }
            counts[pos] = count;
        }
        Ok(VoteVector::from_counts(counts, self))
    }

    /// Inverse of [`encode_votes`](Self::encode_votes) for the non-zero entries.
    pub fn decode_votes(&self, vector: &VoteVector) -> BTreeMap<String, u32> {
        vector
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(i, &k)| (self.answer_ids[i].clone(), k))
            .collect()
    }
}

/// One galaxy's responses from a single campaign.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteRecord {
    pub galaxy_id: String,
    pub campaign: String,
    pub votes: BTreeMap<String, u32>,
}

/// Dense vote counts `K` over the global answer index, with per-question totals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteVector {
    counts: Vec<u32>,
    totals: Vec<u32>,
}

impl VoteVector {
    pub fn from_counts(counts: Vec<u32>, schema: &AnswerSchema) -> Self {
        assert_eq!(counts.len(), schema.answer_count());
        let totals = schema
            .questions()
            .iter()
            .map(|q| counts[q.start..q.end].iter().sum())
            .collect();
        Self { counts, totals }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// `N_q` for every question, in schema order.
    pub fn question_totals(&self) -> &[u32] {
        &self.totals
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}
