//! BYOL with an added supervised Dirichlet head.
//!
//! The online side is encoder → projection → contrastive predictor, plus a
//! supervised head reading the representation directly. The target side is
//! an encoder and projection that only ever move by exponential averaging of
//! the online weights.
//!
//! Combined objective per step:
//!
//! ```text
//! detached:  L = L_con + λ · L_sup / max(stop_grad(L_con), floor)
//! off:       L = L_con + λ · L_sup
//! ```
//!
//! where `L_sup` is the negated multi-question Dirichlet-Multinomial
//! log-likelihood averaged over labelled samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{link, link_derivative, multi_question_loss};
use crate::error::{Error, Result};
use crate::netcore::{
    EncoderConfig, HeadsConfig, Network, ParameterSet, Tensor,
};
use crate::optim::{Adam, AdamConfig};
use crate::rng::SeedStreams;
use crate::schema::{AnswerSchema, QuestionSlice, VoteVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossDenominator {
    #[default]
    Detached,
    Off,
}

/// Which augmented views feed the supervised head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SupervisedViews {
    #[default]
    ViewA,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridConfig {
    pub lambda: f64,
    pub ema_decay: f64,
    pub denominator: LossDenominator,
    /// Lower bound on the detached contrastive denominator.
    pub denominator_floor: f64,
    pub supervised_views: SupervisedViews,
    pub optimizer: AdamConfig,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            ema_decay: 0.99,
            denominator: LossDenominator::Detached,
            denominator_floor: 0.1,
            supervised_views: SupervisedViews::ViewA,
            optimizer: AdamConfig::default(),
        }
    }
}

impl HybridConfig {
    /// Multiplier on the supervised term given the current contrastive value.
    pub fn supervised_weight(&self, lambda: f64, contrastive: f64) -> f64 {
        match self.denominator {
            LossDenominator::Detached => lambda / contrastive.max(self.denominator_floor),
            LossDenominator::Off => lambda,
        }
    }

    pub fn combine(&self, contrastive: f64, supervised: f64) -> f64 {
        contrastive + self.supervised_weight(self.lambda, contrastive) * supervised
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ema_decay) {
            return Err(Error::Config(format!("ema_decay {} outside [0, 1]", self.ema_decay)));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda {} must be nonnegative", self.lambda)));
        }
        if self.denominator_floor.is_nan() || self.denominator_floor <= 0.0 {
            return Err(Error::Config("denominator_floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub contrastive: f64,
    pub supervised: f64,
    pub combined: f64,
    pub labelled_count: usize,
}

impl LossBreakdown {
    fn is_finite(&self) -> bool {
        self.contrastive.is_finite() && self.supervised.is_finite() && self.combined.is_finite()
    }
}

/// Architecture shared by online and target networks.
#[derive(Clone, Debug)]
pub struct HybridModel {
    pub encoder_config: EncoderConfig,
    pub heads_config: HeadsConfig,
    pub encoder: Network,
    pub projection: Network,
    pub predictor: Network,
    pub supervised: Network,
    slices: Vec<QuestionSlice>,
}

impl HybridModel {
    pub fn new(encoder: &EncoderConfig, heads: &HeadsConfig, schema: &AnswerSchema) -> Result<Self> {
        heads.validate(schema.answer_count())?;
        let enc = Network::encoder(encoder)?;
        let rep = enc.output_width();
        let projection = Network::head(&heads.projection, rep)?;
        let predictor = Network::head(&heads.contrastive_predictor, projection.output_width())?;
        let supervised = Network::head(&heads.supervised_predictor, rep)?;
        Ok(Self {
            encoder_config: encoder.clone(),
            heads_config: heads.clone(),
            encoder: enc,
            projection,
            predictor,
            supervised,
            slices: schema.question_slices(),
        })
    }

    pub fn slices(&self) -> &[QuestionSlice] {
        &self.slices
    }

    pub fn answer_count(&self) -> usize {
        self.supervised.output_width()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineParams {
    pub encoder: ParameterSet<f32>,
    pub projection: ParameterSet<f32>,
    pub predictor: ParameterSet<f32>,
    pub supervised: ParameterSet<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetParams {
    pub encoder: ParameterSet<f32>,
    pub projection: ParameterSet<f32>,
}

/// Optimizer state exists for online parameters only.
#[derive(Clone, Debug, PartialEq)]
struct OnlineOptimizer {
    encoder: Adam,
    projection: Adam,
    predictor: Adam,
    supervised: Adam,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridState {
    pub online: OnlineParams,
    pub target: TargetParams,
    pub config: HybridConfig,
    optimizer: OnlineOptimizer,
    step: u64,
}

/// Parameter gradients for the online networks. There is no target field.
#[derive(Clone, Debug)]
pub struct OnlineGradients {
    pub encoder: ParameterSet<f32>,
    pub projection: Option<ParameterSet<f32>>,
    pub predictor: Option<ParameterSet<f32>>,
    pub supervised: Option<ParameterSet<f32>>,
}

/// Two strongly augmented views per sample, with optional votes.
#[derive(Clone, Debug)]
pub struct PairedBatch {
    pub view_a: Tensor<f32>,
    pub view_b: Tensor<f32>,
    pub votes: Vec<Option<VoteVector>>,
}

/// One standard-augmented view per sample.
#[derive(Clone, Debug)]
pub struct SupervisedBatch {
    pub views: Tensor<f32>,
    pub votes: Vec<Option<VoteVector>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PureMode {
    ContrastiveOnly,
    SupervisedOnly,
}

pub const ONLINE_PREFIX: &str = "online.";
pub const TARGET_PREFIX: &str = "target.";

impl HybridState {
    /// Fresh online weights; the target starts as an exact copy.
    pub fn init(model: &HybridModel, config: HybridConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let streams = SeedStreams::new(seed).child("init");
        let online = OnlineParams {
            encoder: model.encoder.init_params(streams.derive("encoder", 0, 0)),
            projection: model.projection.init_params(streams.derive("projection", 0, 0)),
            predictor: model.predictor.init_params(streams.derive("predictor", 0, 0)),
            supervised: model.supervised.init_params(streams.derive("supervised", 0, 0)),
        };
        Ok(Self::from_online(online, None, config))
    }

    fn from_online(online: OnlineParams, target: Option<TargetParams>, config: HybridConfig) -> Self {
        let target = target.unwrap_or_else(|| TargetParams {
            encoder: online.encoder.clone(),
            projection: online.projection.clone(),
        });
        let opt = config.optimizer;
        let optimizer = OnlineOptimizer {
            encoder: Adam::new(opt, &online.encoder),
            projection: Adam::new(opt, &online.projection),
            predictor: Adam::new(opt, &online.predictor),
            supervised: Adam::new(opt, &online.supervised),
        };
        Self {
            online,
            target,
            config,
            optimizer,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// All online and target tensors under `online.` / `target.` prefixes.
    pub fn to_tensors(&self) -> ParameterSet<f32> {
        let mut all = ParameterSet::new();
        let parts = [
            ("online.encoder.", &self.online.encoder),
            ("online.projection.", &self.online.projection),
            ("online.predictor.", &self.online.predictor),
            ("online.supervised.", &self.online.supervised),
            ("target.encoder.", &self.target.encoder),
            ("target.projection.", &self.target.projection),
        ];
        for (prefix, p) in parts {
            all.extend(p.prefixed(prefix)).expect("prefixes are distinct");
        }
        all
    }

    /// Rebuilds a state from checkpoint tensors; optimizer moments restart.
    pub fn from_tensors(
        model: &HybridModel,
        tensors: &ParameterSet<f32>,
        config: HybridConfig,
    ) -> Result<Self> {
        let take = |prefix: &str, net: &Network| -> Result<ParameterSet<f32>> {
            let p = tensors.strip_prefix(prefix);
            net.check_params(&p)
                .map_err(|e| Error::Checkpoint(format!("{prefix}: {e}")))?;
            Ok(p)
        };
        let online = OnlineParams {
            encoder: take("online.encoder.", &model.encoder)?,
            projection: take("online.projection.", &model.projection)?,
            predictor: take("online.predictor.", &model.predictor)?,
            supervised: take("online.supervised.", &model.supervised)?,
        };
        let target = TargetParams {
            encoder: take("target.encoder.", &model.encoder)?,
            projection: take("target.projection.", &model.projection)?,
        };
        Ok(Self::from_online(online, Some(target), config))
    }
}

/// `decay·target + (1−decay)·online`, element-wise.
pub fn ema_update(
    online: &ParameterSet<f32>,
    target: &ParameterSet<f32>,
    decay: f64,
) -> Result<ParameterSet<f32>> {
    if !(0.0..=1.0).contains(&decay) {
        return Err(Error::Config(format!("decay {decay} outside [0, 1]")));
    }
    let mut next = target.clone();
    next.ema_toward(online, decay as f32)?;
    Ok(next)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `2 − 2·cos(prediction, target)`: squared distance of the L2-normalised vectors.
pub fn contrastive_loss(prediction: &[f64], target: &[f64]) -> Result<f64> {
    Ok(contrastive_loss_and_grad(prediction, target)?.0)
}

/// Loss and its gradient with respect to `prediction`.
pub fn contrastive_loss_and_grad(prediction: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if prediction.len() != target.len() {
        return Err(Error::Shape(format!(
            "prediction has {} elements, target {}",
            prediction.len(),
            target.len()
        )));
    }
    let (np, nt) = (norm(prediction), norm(target));
    if np == 0.0 || nt == 0.0 {
        return Err(Error::Domain("zero-norm vector in contrastive loss".into()));
    }
    let dot: f64 = prediction.iter().zip(target).map(|(a, b)| a * b).sum();
    let cos = dot / (np * nt);
    let grad = prediction
        .iter()
        .zip(target)
        .map(|(&p, &t)| -2.0 * (t / (np * nt) - cos * p / (np * np)))
        .collect();
    Ok((2.0 - 2.0 * cos, grad))
}

fn row_f64(t: &Tensor<f32>, i: usize) -> Vec<f64> {
    t.row(i).iter().map(|&x| f64::from(x)).collect()
}

fn check_batch_rows(a: &Tensor<f32>, votes: &[Option<VoteVector>]) -> Result<()> {
    if a.rows() == 0 {
        return Err(Error::Training("empty batch".into()));
    }
    if a.rows() != votes.len() {
        return Err(Error::Shape(format!(
            "{} images but {} vote entries",
            a.rows(),
            votes.len()
        )));
    }
    Ok(())
}

/// Supervised loss over the labelled rows of `representation`.
struct SupervisedPass {
    /// Mean negated log-likelihood over labelled rows (0 when none).
    loss: f64,
    labelled: Vec<usize>,
    head_acts: Option<crate::netcore::Activations<f32>>,
    /// ∂loss/∂raw head output, already divided by the labelled count.
    d_raw: Option<Tensor<f32>>,
}

fn supervised_pass(
    model: &HybridModel,
    head: &ParameterSet<f32>,
    representation: &Tensor<f32>,
    votes: &[Option<VoteVector>],
    row_offset: usize,
) -> Result<SupervisedPass> {
    let labelled: Vec<usize> = votes
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.as_ref().map(|_| i))
        .collect();
    if labelled.is_empty() {
        return Ok(SupervisedPass {
            loss: 0.0,
            labelled,
            head_acts: None,
            d_raw: None,
        });
    }
    let rows: Vec<Vec<f32>> = labelled
        .iter()
        .map(|&i| representation.row(row_offset + i).to_vec())
        .collect();
    let input = Tensor::stack(&[representation.row_len()], &rows)?;
    let acts = model.supervised.forward(head, &input)?;
    let answers = model.answer_count();
    let slices = model.slices();
    let per_row = labelled
        .par_iter()
        .enumerate()
        .map(|(r, &i)| {
            let raw = row_f64(&acts.output, r);
            let pred = link(&raw)?;
            let ll = multi_question_loss(votes[i].as_ref().expect("labelled"), &pred, slices)?;
            let g = ll.gradient(slices);
            let d = link_derivative(&raw);
            // loss = −ll, so ∂loss/∂raw = −∂ll/∂α · dα/draw
            let d_raw: Vec<f64> = g.iter().zip(&d).map(|(a, b)| -a * b).collect();
            Ok((-ll.total, d_raw))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = labelled.len() as f64;
    let mut loss = 0.0;
    let mut d_raw = Vec::with_capacity(labelled.len() * answers);
    for (l, d) in per_row {
        loss += l;
        d_raw.extend(d.into_iter().map(|x| (x / n) as f32));
    }
    Ok(SupervisedPass {
        loss: loss / n,
        labelled,
        head_acts: Some(acts),
        d_raw: Some(Tensor::from_vec(&[rows.len(), answers], d_raw)?),
    })
}

fn stack_views(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<Tensor<f32>> {
    if a.shape() != b.shape() {
        return Err(Error::Shape("view A and view B shapes differ".into()));
    }
    let mut shape = a.shape().to_vec();
    shape[0] *= 2;
    let mut data = a.data().to_vec();
    data.extend_from_slice(b.data());
    Tensor::from_vec(&shape, data)
}

/// Loss breakdown and (optionally) online gradients for one paired batch.
/// `lambda` overrides the configured weight.
fn hybrid_objective(
    model: &HybridModel,
    state: &HybridState,
    batch: &PairedBatch,
    lambda: f64,
    want_grads: bool,
) -> Result<(LossBreakdown, Option<OnlineGradients>)> {
    check_batch_rows(&batch.view_a, &batch.votes)?;
    let b = batch.view_a.rows();
    let views = stack_views(&batch.view_a, &batch.view_b)?;
    let cfg = state.config;

    // Online branch over both views: rows [0, b) are A, [b, 2b) are B.
    let enc = model.encoder.forward(&state.online.encoder, &views)?;
    let proj = model.projection.forward(&state.online.projection, &enc.output)?;
    let pred = model.predictor.forward(&state.online.predictor, &proj.output)?;

    // Target branch: stop-gradient.
    let t_enc = model.encoder.forward(&state.target.encoder, &views)?.detach();
    let t_proj = model
        .projection
        .forward(&state.target.projection, &t_enc.output)?
        .detach();

    let width = pred.output.row_len();
    let per_sample = (0..b)
        .into_par_iter()
        .map(|i| {
            let (la, ga) =
                contrastive_loss_and_grad(&row_f64(&pred.output, i), &row_f64(&t_proj.output, b + i))?;
            let (lb, gb) =
                contrastive_loss_and_grad(&row_f64(&pred.output, b + i), &row_f64(&t_proj.output, i))?;
            Ok((0.5 * (la + lb), ga, gb))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut contrastive = 0.0;
    let mut d_pred = vec![0f32; 2 * b * width];
    let scale = 0.5 / b as f64;
    for (i, (l, ga, gb)) in per_sample.into_iter().enumerate() {
        contrastive += l;
        for (j, (x, y)) in ga.iter().zip(&gb).enumerate() {
            d_pred[i * width + j] = (x * scale) as f32;
            d_pred[(b + i) * width + j] = (y * scale) as f32;
        }
    }
    contrastive /= b as f64;

    let sup_a = supervised_pass(model, &state.online.supervised, &enc.output, &batch.votes, 0)?;
    let sup_b = match cfg.supervised_views {
        SupervisedViews::ViewA => None,
        SupervisedViews::Both => Some(supervised_pass(
            model,
            &state.online.supervised,
            &enc.output,
            &batch.votes,
            b,
        )?),
    };
    let supervised = match &sup_b {
        Some(sb) => 0.5 * (sup_a.loss + sb.loss),
        None => sup_a.loss,
    };
    let weight = cfg.supervised_weight(lambda, contrastive);
    let breakdown = LossBreakdown {
        contrastive,
        supervised,
        combined: contrastive + weight * supervised,
        labelled_count: sup_a.labelled.len(),
    };
    if !breakdown.is_finite() {
        return Err(Error::NonFiniteLoss(breakdown));
    }
    if !want_grads {
        return Ok((breakdown, None));
    }

    let d_pred = Tensor::from_vec(pred.output.shape(), d_pred)?;
    let g_pred = model.predictor.backward(&state.online.predictor, &pred, &d_pred)?;
    let g_proj = model.projection.backward(&state.online.projection, &proj, &g_pred.input)?;
    let mut d_rep = g_proj.input;

    // Target branches are detached: backward yields nothing for them.
    debug_assert!(t_enc.is_detached() && t_proj.is_detached());

    let mut sup_grads: Option<ParameterSet<f32>> = None;
    if lambda != 0.0 {
        let view_weight = if sup_b.is_some() { 0.5 * weight } else { weight };
        for (pass, offset) in std::iter::once((&sup_a, 0)).chain(sup_b.as_ref().map(|s| (s, b))) {
            let (Some(acts), Some(d_raw)) = (&pass.head_acts, &pass.d_raw) else {
                continue;
            };
            let mut d_raw = d_raw.clone();
            for v in d_raw.data_mut() {
                *v *= view_weight as f32;
            }
            let g = model.supervised.backward(&state.online.supervised, acts, &d_raw)?;
            for (r, &i) in pass.labelled.iter().enumerate() {
                for (d, &s) in d_rep.row_mut(offset + i).iter_mut().zip(g.input.row(r)) {
                    *d += s;
                }
            }
            let gp = g.params.expect("online head is not detached");
            match sup_grads.as_mut() {
                Some(acc) => acc.add_scaled(&gp, 1.0)?,
                None => sup_grads = Some(gp),
            }
        }
        if sup_grads.is_none() {
            sup_grads = Some(state.online.supervised.zeros_like());
        }
    }
    let g_enc = model.encoder.backward(&state.online.encoder, &enc, &d_rep)?;
    Ok((
        breakdown,
        Some(OnlineGradients {
            encoder: g_enc.params.expect("online encoder is not detached"),
            projection: g_proj.params,
            predictor: g_pred.params,
            supervised: sup_grads,
        }),
    ))
}

/// Gradients of the combined objective without updating anything.
pub fn hybrid_gradients(
    model: &HybridModel,
    state: &HybridState,
    batch: &PairedBatch,
) -> Result<(LossBreakdown, OnlineGradients)> {
    let (l, g) = hybrid_objective(model, state, batch, state.config.lambda, true)?;
    Ok((l, g.expect("gradients requested")))
}

/// Combined objective on a batch, no update.
pub fn evaluate_hybrid(model: &HybridModel, state: &HybridState, batch: &PairedBatch) -> Result<LossBreakdown> {
    Ok(hybrid_objective(model, state, batch, state.config.lambda, false)?.0)
}

fn apply(state: &mut HybridState, grads: OnlineGradients) -> Result<()> {
    let opt = &mut state.optimizer;
    opt.encoder.update(&mut state.online.encoder, &grads.encoder)?;
    if let Some(g) = &grads.projection {
        opt.projection.update(&mut state.online.projection, g)?;
    }
    if let Some(g) = &grads.predictor {
        opt.predictor.update(&mut state.online.predictor, g)?;
    }
    if let Some(g) = &grads.supervised {
        opt.supervised.update(&mut state.online.supervised, g)?;
    }
    Ok(())
}

fn step_with_lambda(
    model: &HybridModel,
    state: &mut HybridState,
    batch: &PairedBatch,
    lambda: f64,
) -> Result<LossBreakdown> {
    let (breakdown, grads) = hybrid_objective(model, state, batch, lambda, true)?;
    apply(state, grads.expect("gradients requested"))?;
    let decay = state.config.ema_decay;
    state.target.encoder = ema_update(&state.online.encoder, &state.target.encoder, decay)?;
    state.target.projection = ema_update(&state.online.projection, &state.target.projection, decay)?;
    state.step += 1;
    Ok(breakdown)
}

/// One optimizer step on the combined objective, then the EMA target update.
pub fn hybrid_step(model: &HybridModel, state: &mut HybridState, batch: &PairedBatch) -> Result<LossBreakdown> {
    let lambda = state.config.lambda;
    step_with_lambda(model, state, batch, lambda)
}

/// Contrastive-only step: the hybrid step with λ = 0 and the supervised head untouched.
pub fn contrastive_step(
    model: &HybridModel,
    state: &mut HybridState,
    batch: &PairedBatch,
) -> Result<LossBreakdown> {
    step_with_lambda(model, state, batch, 0.0)
}

fn supervised_objective(
    model: &HybridModel,
    state: &HybridState,
    batch: &SupervisedBatch,
    want_grads: bool,
) -> Result<(LossBreakdown, Option<OnlineGradients>)> {
    check_batch_rows(&batch.views, &batch.votes)?;
    if batch.votes.iter().all(Option::is_none) {
        return Err(Error::Training("supervised-only step on a batch with no labelled samples".into()));
    }
    let enc = model.encoder.forward(&state.online.encoder, &batch.views)?;
    let pass = supervised_pass(model, &state.online.supervised, &enc.output, &batch.votes, 0)?;
    let breakdown = LossBreakdown {
        contrastive: 0.0,
        supervised: pass.loss,
        combined: pass.loss,
        labelled_count: pass.labelled.len(),
    };
    if !breakdown.is_finite() {
        return Err(Error::NonFiniteLoss(breakdown));
    }
    if !want_grads {
        return Ok((breakdown, None));
    }
    let acts = pass.head_acts.as_ref().expect("labelled rows present");
    let d_raw = pass.d_raw.as_ref().expect("labelled rows present");
    let g = model.supervised.backward(&state.online.supervised, acts, d_raw)?;
    let mut d_rep = Tensor::zeros(enc.output.shape());
    for (r, &i) in pass.labelled.iter().enumerate() {
        d_rep.row_mut(i).copy_from_slice(g.input.row(r));
    }
    let g_enc = model.encoder.backward(&state.online.encoder, &enc, &d_rep)?;
    Ok((
        breakdown,
        Some(OnlineGradients {
            encoder: g_enc.params.expect("online encoder is not detached"),
            projection: None,
            predictor: None,
            supervised: g.params,
        }),
    ))
}

/// Supervised-only step: encoder plus supervised head, no target network.
pub fn supervised_step(
    model: &HybridModel,
    state: &mut HybridState,
    batch: &SupervisedBatch,
) -> Result<LossBreakdown> {
    let (breakdown, grads) = supervised_objective(model, state, batch, true)?;
    apply(state, grads.expect("gradients requested"))?;
    state.step += 1;
    Ok(breakdown)
}

pub fn evaluate_supervised(
    model: &HybridModel,
    state: &HybridState,
    batch: &SupervisedBatch,
) -> Result<LossBreakdown> {
    Ok(supervised_objective(model, state, batch, false)?.0)
}
