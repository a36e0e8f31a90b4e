//! Training loops for the four representation modes.
//!
//! Batches mix the labelled and unlabelled pools in proportion to their
//! sizes. Each pool walks its own seeded permutation, reshuffled every pool
//! epoch, and every augmented view draws from a stream keyed by
//! `(seed, pool epoch, record index)`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{center_view, standard_view, strong_views, AugmentPolicy};
use crate::byol::{
    contrastive_step, evaluate_hybrid, evaluate_supervised, hybrid_step, supervised_step, HybridModel,
    HybridState, LossBreakdown, PairedBatch, SupervisedBatch,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::netcore::{checkpoint, EncoderConfig, HeadConfig, HeadKind, HeadsConfig, Network, ParameterSet, Tensor};
use crate::optim::{Adam, AdamConfig};
use crate::raster::Image;
use crate::rng::SeedStreams;
use crate::schema::VoteVector;
use crate::synthdata::{Dataset, Split};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Encoder plus a one-logit head trained on ring labels only.
    Direct,
    /// Supervised Dirichlet pretraining on votes.
    Pretrain,
    Contrastive,
    #[default]
    Hybrid,
}

impl TrainMode {
    pub const ALL: [TrainMode; 4] = [
        TrainMode::Direct,
        TrainMode::Pretrain,
        TrainMode::Contrastive,
        TrainMode::Hybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Direct => "direct",
            TrainMode::Pretrain => "pretrain",
            TrainMode::Contrastive => "contrastive",
            TrainMode::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TrainMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub mode: TrainMode,
    pub batch_size: usize,
    pub max_steps: u64,
    /// Steps between validation evaluations.
    pub eval_every: u64,
    /// Evaluations without improvement before stopping.
    pub patience: u32,
    /// Relative drop in the validation objective that counts as improvement.
    pub min_delta: f64,
    /// Validation records used per evaluation.
    pub val_size: usize,
    /// Optimizer steps for each direct-baseline fit.
    pub direct_steps: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Hybrid,
            batch_size: 32,
            max_steps: 3000,
            eval_every: 50,
            patience: 10,
            min_delta: 0.002,
            val_size: 256,
            direct_steps: 300,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if self.eval_every == 0 || self.patience == 0 || self.val_size == 0 {
            return Err(Error::Config("eval_every, patience and val_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.min_delta) {
            return Err(Error::Config("min_delta must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub contrastive: f64,
    pub supervised: f64,
    pub combined: f64,
    pub labelled_count: usize,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub step: u64,
    pub objective: f64,
    pub contrastive: f64,
    pub supervised: f64,
    pub improved: bool,
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn write_validation(path: &Path, rows: &[ValidationRow]) -> Result<()> {
    write_rows(path, rows)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar written next to every checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub mode: TrainMode,
    pub seed: u64,
    pub encoder: EncoderConfig,
    pub heads: Option<HeadsConfig>,
    pub answer_count: usize,
    pub best_step: u64,
    pub steps_run: u64,
    pub best_objective: Option<f64>,
    /// Validation contrastive loss of the saved weights.
    pub final_contrastive_loss: Option<f64>,
}

pub fn meta_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".meta.toml");
    PathBuf::from(s)
}

pub fn save_checkpoint(path: &Path, tensors: &ParameterSet<f32>, meta: &CheckpointMeta) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    checkpoint::save(path, tensors)?;
    let text = toml::to_string(meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
    std::fs::write(meta_path(path), text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ParameterSet<f32>, CheckpointMeta)> {
    let tensors = checkpoint::load(path)?;
    let mp = meta_path(path);
    let text = std::fs::read_to_string(&mp)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", mp.display())))?;
    let meta = toml::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", mp.display())))?;
    Ok((tensors, meta))
}

/// Online encoder of a saved checkpoint.
#[derive(Clone, Debug)]
pub struct FrozenEncoder {
    pub network: Network,
    pub params: ParameterSet<f32>,
    pub meta: CheckpointMeta,
}

impl FrozenEncoder {
    pub fn load(path: &Path) -> Result<Self> {
        let (tensors, meta) = load_checkpoint(path)?;
        let network = Network::encoder(&meta.encoder)?;
        let params = tensors.strip_prefix("online.encoder.");
        network
            .check_params(&params)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Ok(Self { network, params, meta })
    }

    pub fn from_state(model: &HybridModel, state: &HybridState, meta: CheckpointMeta) -> Self {
        Self {
            network: model.encoder.clone(),
            params: state.online.encoder.clone(),
            meta,
        }
    }
}

pub fn stack_images(images: &[Image]) -> Result<Tensor<f32>> {
    let first = images
        .first()
        .ok_or_else(|| Error::Training("no images to stack".into()))?;
    let shape = [3, first.height(), first.width()];
    let rows: Vec<Vec<f32>> = images.iter().map(|im| im.data().to_vec()).collect();
    Tensor::stack(&shape, &rows)
}

/// Walks one pool in seeded permutations.
struct PoolCursor {
    name: &'static str,
    indices: Vec<usize>,
    order: Vec<usize>,
    pos: usize,
    epoch: u64,
}

impl PoolCursor {
    fn new(name: &'static str, indices: Vec<usize>, streams: &SeedStreams) -> Self {
        let mut c = Self {
            name,
            indices,
            order: Vec::new(),
            pos: 0,
            epoch: 0,
        };
        c.shuffle(streams);
        c
    }

    fn shuffle(&mut self, streams: &SeedStreams) {
        self.order = self.indices.clone();
        self.order.shuffle(&mut streams.rng(self.name, self.epoch, 0));
        self.pos = 0;
    }

    /// `(record index, pool epoch)`.
    fn next(&mut self, streams: &SeedStreams) -> (usize, u64) {
        if self.pos == self.order.len() {
            self.epoch += 1;
            self.shuffle(streams);
        }
        let i = self.order[self.pos];
        self.pos += 1;
        (i, self.epoch)
    }
}

const VALIDATION_EPOCH: u64 = u64::MAX;

struct Views<'a> {
    dataset: &'a Dataset,
    streams: SeedStreams,
    strong: AugmentPolicy,
    standard: AugmentPolicy,
}

impl Views<'_> {
    fn votes(&self, picks: &[(usize, u64)], keep_votes: bool) -> Vec<Option<VoteVector>> {
        picks
            .iter()
            .map(|&(i, _)| if keep_votes { self.dataset.records()[i].votes.clone() } else { None })
            .collect()
    }

    fn paired(&self, picks: &[(usize, u64)], keep_votes: bool) -> Result<PairedBatch> {
        let views = picks
            .par_iter()
            .map(|&(i, epoch)| {
                let image = self.dataset.image(i)?;
                let mut rng = self.streams.rng("strong", epoch, i as u64);
                strong_views(&self.strong, &image, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let (a, b): (Vec<Image>, Vec<Image>) = views.into_iter().unzip();
        Ok(PairedBatch {
            view_a: stack_images(&a)?,
            view_b: stack_images(&b)?,
            votes: self.votes(picks, keep_votes),
        })
    }

    fn standard_tensor(&self, picks: &[(usize, u64)]) -> Result<Tensor<f32>> {
        let views = picks
            .par_iter()
            .map(|&(i, epoch)| {
                let image = self.dataset.image(i)?;
                let mut rng = self.streams.rng("standard", epoch, i as u64);
                standard_view(&self.standard, &image, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        stack_images(&views)
    }

    fn supervised(&self, picks: &[(usize, u64)]) -> Result<SupervisedBatch> {
        Ok(SupervisedBatch {
            views: self.standard_tensor(picks)?,
            votes: self.votes(picks, true),
        })
    }
}

/// Result of a representation-learning run; `state` holds the best validation snapshot.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: HybridState,
    pub best_step: u64,
    pub steps_run: u64,
    pub best_objective: f64,
    pub final_contrastive: f64,
    pub metrics: Vec<MetricsRow>,
    pub validation: Vec<ValidationRow>,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn meta(&self, config: &ExperimentConfig, model: &HybridModel) -> CheckpointMeta {
        CheckpointMeta {
            mode: config.training.mode,
            seed: config.seed,
            encoder: model.encoder_config.clone(),
            heads: Some(model.heads_config.clone()),
            answer_count: model.answer_count(),
            best_step: self.best_step,
            steps_run: self.steps_run,
            best_objective: Some(self.best_objective),
            final_contrastive_loss: Some(self.final_contrastive),
        }
    }
}

/// Per-sample mean components over the validation set.
fn validate_paired(
    model: &HybridModel,
    state: &HybridState,
    views: &Views<'_>,
    picks: &[(usize, u64)],
    batch: usize,
    keep_votes: bool,
) -> Result<LossBreakdown> {
    let (mut con, mut sup, mut n, mut labelled) = (0.0, 0.0, 0usize, 0usize);
    for chunk in picks.chunks(batch) {
        let l = evaluate_hybrid(model, state, &views.paired(chunk, keep_votes)?)?;
        con += l.contrastive * chunk.len() as f64;
        sup += l.supervised * l.labelled_count as f64;
        n += chunk.len();
        labelled += l.labelled_count;
    }
    let contrastive = con / n as f64;
    let supervised = if labelled > 0 { sup / labelled as f64 } else { 0.0 };
    Ok(LossBreakdown {
        contrastive,
        supervised,
        combined: state.config.combine(contrastive, supervised),
        labelled_count: labelled,
    })
}

fn validate_supervised(
    model: &HybridModel,
    state: &HybridState,
    views: &Views<'_>,
    picks: &[(usize, u64)],
    batch: usize,
) -> Result<f64> {
    let (mut sup, mut labelled) = (0.0, 0usize);
    for chunk in picks.chunks(batch) {
        let l = evaluate_supervised(model, state, &views.supervised(chunk)?)?;
        sup += l.supervised * l.labelled_count as f64;
        labelled += l.labelled_count;
    }
    Ok(sup / labelled as f64)
}

fn evenly_spaced(indices: &[usize], n: usize) -> Vec<usize> {
    if indices.len() <= n {
        return indices.to_vec();
    }
    (0..n).map(|k| indices[k * indices.len() / n]).collect()
}

/// Pretrain, contrastive or hybrid training with early stopping on validation.
pub fn train_representation(
    model: &HybridModel,
    dataset: &Dataset,
    config: &ExperimentConfig,
    mut on_step: impl FnMut(&MetricsRow),
) -> Result<TrainOutcome> {
    let tc = &config.training;
    let mode = tc.mode;
    if mode == TrainMode::Direct {
        return Err(Error::Config("direct mode is trained with train_direct".into()));
    }
    let streams = SeedStreams::new(config.seed);
    let data_streams = streams.child("batches");
    let views = Views {
        dataset,
        streams: streams.child("augment"),
        strong: config.augment.strong,
        standard: config.augment.standard,
    };
    let mut state = HybridState::init(model, config.hybrid(), streams.derive("init", 0, 0))?;

    let labelled_pool: Vec<usize> = dataset
        .split(Split::Train)
        .into_iter()
        .filter(|&i| dataset.records()[i].votes.is_some())
        .collect();
    let unlabelled_pool = if mode == TrainMode::Pretrain {
        Vec::new()
    } else {
        dataset.split(Split::Unlabelled)
    };
    let (nl, nu) = (labelled_pool.len(), unlabelled_pool.len());
    if mode == TrainMode::Pretrain && nl == 0 {
        return Err(Error::Training("pretraining needs labelled training records".into()));
    }
    if nl + nu == 0 {
        return Err(Error::Training("no training records".into()));
    }
    let b = tc.batch_size;
    let per_labelled = if nu == 0 {
        b
    } else if nl == 0 {
        0
    } else {
        ((b as f64 * nl as f64 / (nl + nu) as f64).round() as usize).clamp(1, b - 1)
    };
    let mut lab = PoolCursor::new("labelled", labelled_pool, &data_streams);
    let mut unl = PoolCursor::new("unlabelled", unlabelled_pool, &data_streams);

    let val_indices = evenly_spaced(&dataset.split(Split::Val), tc.val_size);
    if val_indices.is_empty() {
        return Err(Error::Training("validation split is empty".into()));
    }
    let val_picks: Vec<(usize, u64)> = val_indices.iter().map(|&i| (i, VALIDATION_EPOCH)).collect();
    let keep_votes = mode == TrainMode::Hybrid;

    let evaluate = |state: &HybridState| -> Result<(f64, LossBreakdown)> {
        match mode {
            TrainMode::Pretrain => {
                let s = validate_supervised(model, state, &views, &val_picks, b)?;
                Ok((
                    s,
                    LossBreakdown {
                        contrastive: f64::NAN,
                        supervised: s,
                        combined: s,
                        labelled_count: val_picks.len(),
                    },
                ))
            }
            TrainMode::Contrastive => {
                let l = validate_paired(model, state, &views, &val_picks, b, false)?;
                Ok((l.contrastive, l))
            }
            _ => {
                let l = validate_paired(model, state, &views, &val_picks, b, true)?;
                Ok((l.contrastive + state.config.lambda * l.supervised, l))
            }
        }
    };

    let start = Instant::now();
    let mut metrics = Vec::new();
    let mut validation = Vec::new();
    let (first, first_parts) = evaluate(&state)?;
    validation.push(ValidationRow {
        step: 0,
        objective: first,
        contrastive: first_parts.contrastive,
        supervised: first_parts.supervised,
        improved: true,
    });
    let mut best = (state.clone(), 0u64, first, first_parts.contrastive);
    let mut stale = 0u32;
    let mut stopped_early = false;
    let mut step = 0u64;
    while step < tc.max_steps {
        let mut picks = Vec::with_capacity(b);
        for _ in 0..per_labelled {
            picks.push(lab.next(&data_streams));
        }
        for _ in per_labelled..b {
            picks.push(unl.next(&data_streams));
        }
        let loss = match mode {
            TrainMode::Pretrain => supervised_step(model, &mut state, &views.supervised(&picks)?)?,
            TrainMode::Contrastive => contrastive_step(model, &mut state, &views.paired(&picks, keep_votes)?)?,
            _ => hybrid_step(model, &mut state, &views.paired(&picks, keep_votes)?)?,
        };
        step += 1;
        let row = MetricsRow {
            step,
            contrastive: loss.contrastive,
            supervised: loss.supervised,
            combined: loss.combined,
            labelled_count: loss.labelled_count,
            wall_ms: start.elapsed().as_millis() as u64,
        };
        on_step(&row);
        metrics.push(row);

        if step.is_multiple_of(tc.eval_every) {
            let (objective, parts) = evaluate(&state)?;
            let improved = objective < best.2 - tc.min_delta * best.2.abs();
            validation.push(ValidationRow {
                step,
                objective,
                contrastive: parts.contrastive,
                supervised: parts.supervised,
                improved,
            });
            if improved {
                best = (state.clone(), step, objective, parts.contrastive);
                stale = 0;
            } else {
                stale += 1;
                if stale >= tc.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let (best_state, best_step, best_objective, mut final_contrastive) = best;
    if mode == TrainMode::Pretrain {
        final_contrastive = validate_paired(model, &best_state, &views, &val_picks, b, false)?.contrastive;
    }
    Ok(TrainOutcome {
        state: best_state,
        best_step,
        steps_run: step,
        best_objective,
        final_contrastive,
        metrics,
        validation,
        stopped_early,
    })
}

/// Encoder plus single-logit classifier.
#[derive(Clone, Debug)]
pub struct DirectModel {
    pub encoder: Network,
    pub head: Network,
    pub encoder_params: ParameterSet<f32>,
    pub head_params: ParameterSet<f32>,
}

pub const CLASSIFIER_PREFIX: &str = "online.classifier.";

impl DirectModel {
    pub fn init(encoder: &EncoderConfig, seed: u64) -> Result<Self> {
        let enc = Network::encoder(encoder)?;
        let head = Network::head(&HeadConfig::new(HeadKind::Classifier, Vec::new(), 1), enc.output_width())?;
        let streams = SeedStreams::new(seed).child("init");
        Ok(Self {
            encoder_params: enc.init_params(streams.derive("encoder", 0, 0)),
            head_params: head.init_params(streams.derive("classifier", 0, 0)),
            encoder: enc,
            head,
        })
    }

    pub fn to_tensors(&self) -> ParameterSet<f32> {
        let mut all = self.encoder_params.prefixed("online.encoder.");
        all.extend(self.head_params.prefixed(CLASSIFIER_PREFIX))
            .expect("prefixes are distinct");
        all
    }

    /// Ring probabilities from the centre view.
    pub fn predict(&self, images: &[Image]) -> Result<Vec<f64>> {
        let size = self.encoder.input_shape()[1];
        let centred = images
            .iter()
            .map(|im| center_view(im, size))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(images.len());
        for chunk in centred.chunks(64) {
            let rep = self.encoder.infer(&self.encoder_params, &stack_images(chunk)?)?;
            let logits = self.head.infer(&self.head_params, &rep)?;
            out.extend(logits.data().iter().map(|&z| sigmoid(f64::from(z))));
        }
        Ok(out)
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Clone, Debug)]
pub struct DirectSettings {
    pub steps: u64,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub policy: AugmentPolicy,
    pub seed: u64,
}

/// End-to-end fit on ring labels with standard augmentation; one metrics row per step.
pub fn train_direct(
    encoder: &EncoderConfig,
    dataset: &Dataset,
    indices: &[usize],
    labels: &[bool],
    settings: &DirectSettings,
) -> Result<(DirectModel, Vec<MetricsRow>)> {
    if indices.is_empty() || indices.len() != labels.len() {
        return Err(Error::Training("direct training needs one label per record".into()));
    }
    let streams = SeedStreams::new(settings.seed);
    let mut model = DirectModel::init(encoder, streams.derive("init", 0, 0))?;
    let mut enc_opt = Adam::new(settings.optimizer, &model.encoder_params);
    let mut head_opt = Adam::new(settings.optimizer, &model.head_params);
    let data_streams = streams.child("batches");
    let aug = streams.child("augment");
    let positions: Vec<usize> = (0..indices.len()).collect();
    let mut cursor = PoolCursor::new("direct", positions, &data_streams);
    let b = settings.batch_size.min(indices.len());
    let start = Instant::now();
    let mut rows = Vec::new();
    for step in 1..=settings.steps {
        let picks: Vec<(usize, u64)> = (0..b).map(|_| cursor.next(&data_streams)).collect();
        let views = picks
            .par_iter()
            .map(|&(p, epoch)| {
                let i = indices[p];
                let mut rng = aug.rng("standard", epoch, i as u64);
                standard_view(&settings.policy, &dataset.image(i)?, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let x = stack_images(&views)?;
        let enc_acts = model.encoder.forward(&model.encoder_params, &x)?;
        let head_acts = model.head.forward(&model.head_params, &enc_acts.output)?;
        let n = b as f64;
        let mut loss = 0.0;
        let mut d = Vec::with_capacity(b);
        for (r, &(p, _)) in picks.iter().enumerate() {
            let z = f64::from(head_acts.output.data()[r]);
            let y = if labels[p] { 1.0 } else { 0.0 };
            // stable binary cross-entropy with logits
            loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
            d.push(((sigmoid(z) - y) / n) as f32);
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(LossBreakdown {
                contrastive: 0.0,
                supervised: loss,
                combined: loss,
                labelled_count: b,
            }));
        }
        let upstream = Tensor::from_vec(&[b, 1], d)?;
        let g_head = model.head.backward(&model.head_params, &head_acts, &upstream)?;
        let g_enc = model.encoder.backward(&model.encoder_params, &enc_acts, &g_head.input)?;
        head_opt.update(&mut model.head_params, &g_head.params.expect("online head"))?;
        enc_opt.update(&mut model.encoder_params, &g_enc.params.expect("online encoder"))?;
        rows.push(MetricsRow {
            step,
            contrastive: 0.0,
            supervised: loss,
            combined: loss,
            labelled_count: b,
            wall_ms: start.elapsed().as_millis() as u64,
        });
    }
    Ok((model, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_round_trip() {
        for m in TrainMode::ALL {
            assert_eq!(m.as_str().parse::<TrainMode>().unwrap(), m);
        }
        assert!("bogus".parse::<TrainMode>().is_err());
    }

    #[test]
    fn cursor_visits_every_index_once_per_epoch() {
        let streams = SeedStreams::new(1);
        let mut c = PoolCursor::new("t", (0..7).collect(), &streams);
        let mut first: Vec<usize> = (0..7).map(|_| c.next(&streams).0).collect();
        first.sort_unstable();
        assert_eq!(first, (0..7).collect::<Vec<_>>());
        assert_eq!(c.next(&streams).1, 1);
    }

    #[test]
    fn evenly_spaced_subsample() {
        let idx: Vec<usize> = (0..10).collect();
        assert_eq!(evenly_spaced(&idx, 5), vec![0, 2, 4, 6, 8]);
        assert_eq!(evenly_spaced(&idx, 20), idx);
    }

    #[test]
    fn meta_sidecar_name() {
        assert_eq!(meta_path(Path::new("a/b.ckpt")), PathBuf::from("a/b.ckpt.meta.toml"));
    }
}
