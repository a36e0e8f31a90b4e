//! Linear probes over frozen representations and the label-budget sweep.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{center_view, AugmentPolicy};
use crate::error::{Error, Result};
use crate::netcore::EncoderConfig;
use crate::optim::AdamConfig;
use crate::rng::SeedStreams;
use crate::synthdata::{Dataset, Split};
use crate::train::{stack_images, train_direct, DirectSettings, FrozenEncoder};

pub const DIRECT: &str = "direct";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// L2 penalty on the probe weights.
    pub l2: f64,
    pub folds: usize,
    /// Label budgets, ascending.
    pub budgets: Vec<usize>,
    pub max_iter: usize,
    /// Stop once the loss changes by less than this.
    pub tolerance: f64,
    /// Split the probe pool is drawn from.
    pub pool: Split,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            folds: 5,
            budgets: vec![100, 200, 300, 500],
            max_iter: 5000,
            tolerance: 1e-8,
            pool: Split::RingTrain,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config("probe needs at least 2 folds".into()));
        }
        if !(self.l2 >= 0.0 && self.tolerance > 0.0) || self.max_iter == 0 {
            return Err(Error::Config("probe l2, tolerance and max_iter out of range".into()));
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("probe budgets must be strictly ascending".into()));
        }
        if self.budgets.first().is_some_and(|&b| b < self.folds) {
            return Err(Error::Config("every budget must cover each fold".into()));
        }
        Ok(())
    }
}

/// One representation row per galaxy.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationMatrix {
    ids: Vec<String>,
    width: usize,
    data: Vec<f64>,
}

impl RepresentationMatrix {
    pub fn new(ids: Vec<String>, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != ids.len() * width {
            return Err(Error::Shape(format!(
                "{} values for {} rows of width {width}",
                data.len(),
                ids.len()
            )));
        }
        if let Some(p) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Probe(format!("non-finite representation for `{}`", ids[p / width])));
        }
        Ok(Self { ids, width, data })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
}

/// Online-encoder representations of the centre view of each record.
pub fn extract_representations(
    encoder: &FrozenEncoder,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<RepresentationMatrix> {
    let size = encoder.network.input_shape()[1];
    let width = encoder.network.output_width();
    let mut data = Vec::with_capacity(indices.len() * width);
    for chunk in indices.chunks(64) {
        let views = chunk
            .par_iter()
            .map(|&i| center_view(&dataset.image(i)?, size))
            .collect::<Result<Vec<_>>>()?;
        let rep = encoder.network.infer(&encoder.params, &stack_images(&views)?)?;
        data.extend(rep.data().iter().map(|&v| f64::from(v)));
    }
    let ids = indices.iter().map(|&i| dataset.records()[i].id.clone()).collect();
    RepresentationMatrix::new(ids, width, data)
}

/// Cross-validated accuracy of one method at one budget.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeResult {
    pub method: String,
    pub budget: usize,
    pub fold_accuracies: Vec<f64>,
    /// Held-out row positions (into the probe pool) of each fold.
    #[serde(skip)]
    pub folds: Vec<Vec<usize>>,
    pub mean: f64,
    pub std: f64,
}

impl ProbeResult {
    fn new(method: &str, budget: usize, fold_accuracies: Vec<f64>, folds: Vec<Vec<usize>>) -> Self {
        let (mean, std) = mean_std(&fold_accuracies);
        Self {
            method: method.to_string(),
            budget,
            fold_accuracies,
            folds,
            mean,
            std,
        }
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Stratified subsample of `budget` positions, each class within one row of the pool's balance.
pub fn stratified_subsample(labels: &[bool], budget: usize, seed: u64) -> Result<Vec<usize>> {
    if budget > labels.len() {
        return Err(Error::Probe(format!("budget {budget} exceeds the {} available labels", labels.len())));
    }
    let streams = SeedStreams::new(seed);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i]);
    pos.shuffle(&mut streams.rng("subsample-pos", budget as u64, 0));
    neg.shuffle(&mut streams.rng("subsample-neg", budget as u64, 0));
    let want = (budget as f64 * pos.len() as f64 / labels.len() as f64).round() as usize;
    let n_pos = want.min(pos.len()).max(budget.saturating_sub(neg.len()));
    if n_pos == 0 || n_pos == budget {
        return Err(Error::Probe(format!(
            "budget {budget} subsample holds a single class; reseed or raise the budget"
        )));
    }
    let mut picked: Vec<usize> = pos[..n_pos].iter().chain(&neg[..budget - n_pos]).copied().collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Class-stratified fold assignment over `rows` (positions into `labels`).
pub fn stratified_folds(labels: &[bool], rows: &[usize], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let streams = SeedStreams::new(seed);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| labels[i]);
    pos.shuffle(&mut streams.rng("folds-pos", rows.len() as u64, 0));
    neg.shuffle(&mut streams.rng("folds-neg", rows.len() as u64, 0));
    let mut out = vec![Vec::new(); folds];
    for (k, &i) in pos.iter().chain(&neg).enumerate() {
        out[k % folds].push(i);
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

/// L2-penalised logistic regression on standardised features.
#[derive(Clone, Debug)]
pub struct LogisticModel {
    mean: Vec<f64>,
    scale: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn fit(x: &[&[f64]], y: &[bool], l2: f64, max_iter: usize, tolerance: f64) -> Self {
        let n = x.len();
        let d = x.first().map_or(0, |r| r.len());
        let mut mean = vec![0.0; d];
        for r in x {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v / n as f64;
            }
        }
        let mut scale = vec![0.0; d];
        for r in x {
            for j in 0..d {
                scale[j] += (r[j] - mean[j]).powi(2) / n as f64;
            }
        }
        for s in &mut scale {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        let z: Vec<Vec<f64>> = x
            .iter()
            .map(|r| (0..d).map(|j| (r[j] - mean[j]) / scale[j]).collect())
            .collect();
        let t: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

        let objective = |w: &[f64], b: f64| -> f64 {
            let mut loss = 0.0;
            for (zi, ti) in z.iter().zip(&t) {
                let s = b + dot(w, zi);
                loss += s.max(0.0) - s * ti + (-s.abs()).exp().ln_1p();
            }
            loss / n as f64 + 0.5 * l2 * dot(w, w)
        };
        let gradient = |w: &[f64], b: f64| -> (Vec<f64>, f64) {
            let mut gw: Vec<f64> = w.iter().map(|wi| l2 * wi).collect();
            let mut gb = 0.0;
            for (zi, ti) in z.iter().zip(&t) {
                let r = (sigmoid(b + dot(w, zi)) - ti) / n as f64;
                gb += r;
                for (g, v) in gw.iter_mut().zip(zi) {
                    *g += r * v;
                }
            }
            (gw, gb)
        };

        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut f = objective(&w, b);
        let mut step = 1.0;
        let mut iterations = 0;
        while iterations < max_iter {
            iterations += 1;
            let (gw, gb) = gradient(&w, b);
            let g2 = dot(&gw, &gw) + gb * gb;
            if g2 == 0.0 {
                break;
            }
            step *= 2.0;
            // Armijo backtracking
            let (nw, nb, nf) = loop {
                let nw: Vec<f64> = w.iter().zip(&gw).map(|(wi, gi)| wi - step * gi).collect();
                let nb = b - step * gb;
                let nf = objective(&nw, nb);
                if nf <= f - 1e-4 * step * g2 || step < 1e-12 {
                    break (nw, nb, nf);
                }
                step *= 0.5;
            };
            let change = (f - nf).abs();
            w = nw;
            b = nb;
            f = nf;
            if change < tolerance {
                break;
            }
        }
        Self {
            mean,
            scale,
            weights: w,
            bias: b,
            iterations,
        }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.bias
            + x.iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .zip(&self.weights)
                .map(|(((v, m), s), w)| w * (v - m) / s)
                .sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.logit(x) > 0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn accuracy(predicted: impl Iterator<Item = bool>, truth: &[bool], rows: &[usize]) -> f64 {
    let hits = predicted.zip(rows).filter(|(p, &i)| *p == truth[i]).count();
    hits as f64 / rows.len() as f64
}

/// Subsample and fold split shared by every method at one budget.
pub fn probe_plan(labels: &[bool], budget: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let rows = stratified_subsample(labels, budget, seed)?;
    Ok(stratified_folds(labels, &rows, folds, seed))
}

/// K-fold cross-validated logistic probe on `budget` stratified rows of `x`.
pub fn train_linear_probe(
    method: &str,
    x: &RepresentationMatrix,
    labels: &[bool],
    budget: usize,
    config: &ProbeConfig,
    seed: u64,
) -> Result<ProbeResult> {
    if labels.len() != x.rows() {
        return Err(Error::Probe(format!("{} labels for {} representation rows", labels.len(), x.rows())));
    }
    let folds = probe_plan(labels, budget, config.folds, seed)?;
    let accs = (0..folds.len())
        .map(|k| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            let xs: Vec<&[f64]> = train.iter().map(|&i| x.row(i)).collect();
            let ys: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
            let model = LogisticModel::fit(&xs, &ys, config.l2, config.max_iter, config.tolerance);
            accuracy(folds[k].iter().map(|&i| model.predict(x.row(i))), labels, &folds[k])
        })
        .collect();
    Ok(ProbeResult::new(method, budget, accs, folds))
}

/// End-to-end encoder trained per fold on the same subsample and folds as the probes.
#[allow(clippy::too_many_arguments)]
pub fn direct_probe(
    encoder: &EncoderConfig,
    settings: &DirectSettings,
    dataset: &Dataset,
    pool: &[usize],
    labels: &[bool],
    budget: usize,
    config: &ProbeConfig,
    seed: u64,
) -> Result<ProbeResult> {
    let folds = probe_plan(labels, budget, config.folds, seed)?;
    let mut accs = Vec::with_capacity(folds.len());
    for k in 0..folds.len() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        let idx: Vec<usize> = train.iter().map(|&p| pool[p]).collect();
        let ys: Vec<bool> = train.iter().map(|&p| labels[p]).collect();
        let fold_settings = DirectSettings {
            seed: SeedStreams::new(settings.seed).derive("direct-fold", budget as u64, k as u64),
            ..settings.clone()
        };
        let (model, _) = train_direct(encoder, dataset, &idx, &ys, &fold_settings)?;
        let images = folds[k]
            .iter()
            .map(|&p| dataset.image(pool[p]))
            .collect::<Result<Vec<_>>>()?;
        let probs = model.predict(&images)?;
        accs.push(accuracy(probs.iter().map(|&p| p > 0.5), labels, &folds[k]));
    }
    Ok(ProbeResult::new(DIRECT, budget, accs, folds))
}

/// Ring labels of a split, in dataset order.
pub fn ring_pool(dataset: &Dataset, split: Split) -> Result<(Vec<usize>, Vec<bool>)> {
    let mut idx = Vec::new();
    let mut labels = Vec::new();
    for i in dataset.split(split) {
        match dataset.records()[i].ring {
            Some(r) => {
                idx.push(i);
                labels.push(r);
            }
            None => {
                return Err(Error::Probe(format!("`{}` has no ring label", dataset.records()[i].id)));
            }
        }
    }
    if idx.is_empty() {
        return Err(Error::Probe(format!("no ring labels in split `{split}`")));
    }
    Ok((idx, labels))
}

pub enum MethodSource {
    Frozen(Box<FrozenEncoder>),
    Direct {
        encoder: EncoderConfig,
        settings: DirectSettings,
    },
}

pub struct SweepMethod {
    pub name: String,
    pub source: MethodSource,
}

impl SweepMethod {
    pub fn frozen(name: impl Into<String>, encoder: FrozenEncoder) -> Self {
        Self {
            name: name.into(),
            source: MethodSource::Frozen(Box::new(encoder)),
        }
    }

    pub fn direct(encoder: EncoderConfig, settings: DirectSettings) -> Self {
        Self {
            name: DIRECT.into(),
            source: MethodSource::Direct { encoder, settings },
        }
    }

    fn final_contrastive_loss(&self) -> Option<f64> {
        match &self.source {
            MethodSource::Frozen(e) => e.meta.final_contrastive_loss,
            MethodSource::Direct { .. } => None,
        }
    }
}

/// Direct-baseline settings derived from an experiment config.
pub fn direct_settings(steps: u64, batch_size: usize, optimizer: AdamConfig, policy: AugmentPolicy, seed: u64) -> DirectSettings {
    DirectSettings {
        steps,
        batch_size,
        optimizer,
        policy,
        seed: SeedStreams::new(seed).derive("direct", 0, 0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub budget: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub folds: usize,
    /// Empty for a completed cell, otherwise the failure message.
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub method: String,
    pub final_contrastive_loss: Option<f64>,
    pub budget: usize,
    pub mean_accuracy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub budgets: Vec<usize>,
    pub methods: Vec<String>,
    pub results: Vec<ProbeResult>,
    pub summary: Vec<SummaryRow>,
    pub losses: Vec<LossRow>,
    /// Rank correlation between budget and mean accuracy per method.
    pub spearman: BTreeMap<String, Option<f64>>,
}

/// Probes every method at every budget; failed cells are kept as missing rows.
pub fn budget_sweep(
    methods: &[SweepMethod],
    budgets: &[usize],
    dataset: &Dataset,
    config: &ProbeConfig,
    seed: u64,
) -> Result<SweepReport> {
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Probe("budgets must be strictly ascending".into()));
    }
    let (pool, labels) = ring_pool(dataset, config.pool)?;
    let probe_seed = SeedStreams::new(seed).derive("probe", 0, 0);
    let reps: Vec<Option<RepresentationMatrix>> = methods
        .iter()
        .map(|m| match &m.source {
            MethodSource::Frozen(e) => extract_representations(e, dataset, &pool).map(Some),
            MethodSource::Direct { .. } => Ok(None),
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..methods.len())
        .flat_map(|m| budgets.iter().map(move |&b| (m, b)))
        .collect();
    let outcomes: Vec<Result<ProbeResult>> = cells
        .par_iter()
        .map(|&(m, budget)| {
            let method = &methods[m];
            match (&method.source, &reps[m]) {
                (MethodSource::Frozen(_), Some(x)) => {
                    train_linear_probe(&method.name, x, &labels, budget, config, probe_seed)
                }
                (MethodSource::Direct { encoder, settings }, _) => {
                    direct_probe(encoder, settings, dataset, &pool, &labels, budget, config, probe_seed)
                        .map(|r| ProbeResult { method: method.name.clone(), ..r })
                }
                _ => unreachable!("frozen methods have representations"),
            }
        })
        .collect();

    let mut results = Vec::new();
    let mut summary = Vec::new();
    for (&(m, budget), outcome) in cells.iter().zip(outcomes) {
        let name = methods[m].name.clone();
        match outcome {
            Ok(r) => {
                summary.push(SummaryRow {
                    method: name,
                    budget,
                    mean: Some(r.mean),
                    std: Some(r.std),
                    folds: r.fold_accuracies.len(),
                    error: String::new(),
                });
                results.push(r);
            }
            Err(e) if e.is_numeric() || matches!(e, Error::Probe(_) | Error::Training(_)) => {
                summary.push(SummaryRow {
                    method: name,
                    budget,
                    mean: None,
                    std: None,
                    folds: 0,
                    error: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }

    let losses = summary
        .iter()
        .map(|s| LossRow {
            method: s.method.clone(),
            final_contrastive_loss: methods.iter().find(|m| m.name == s.method).and_then(|m| m.final_contrastive_loss()),
            budget: s.budget,
            mean_accuracy: s.mean,
        })
        .collect();
    let names: Vec<String> = methods.iter().map(|m| m.name.clone()).collect();
    let spearman = method_trends(&summary, &names);
    Ok(SweepReport {
        budgets: budgets.to_vec(),
        methods: names,
        results,
        summary,
        losses,
        spearman,
    })
}

fn method_trends(summary: &[SummaryRow], methods: &[String]) -> BTreeMap<String, Option<f64>> {
    methods
        .iter()
        .map(|m| {
            let (b, a): (Vec<f64>, Vec<f64>) = summary
                .iter()
                .filter(|s| &s.method == m)
                .filter_map(|s| s.mean.map(|mean| (s.budget as f64, mean)))
                .unzip();
            (m.clone(), spearman(&b, &a))
        })
        .collect()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
///
/// `None` below two points; `Some(0.0)` when either series is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, _) = mean_std(&rx);
    let (my, _) = mean_std(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Some(0.0);
    }
    Some(cov / (vx * vy).sqrt())
}

impl SweepReport {
    /// Methods at the smallest budget, best first; read for the reported ordering.
    pub fn ordering_report(&self) -> String {
        let mut s = String::new();
        let Some(&budget) = self.budgets.first() else {
            return s;
        };
        let mut at: Vec<(&str, f64)> = self
            .summary
            .iter()
            .filter(|r| r.budget == budget)
            .filter_map(|r| r.mean.map(|m| (r.method.as_str(), m)))
            .collect();
        at.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        let _ = writeln!(s, "budget {budget}, mean accuracy, best first:");
        for (m, a) in &at {
            let _ = writeln!(s, "  {m:<12} {a:.4}");
        }
        let get = |m: &str| at.iter().find(|x| x.0 == m).map(|x| x.1);
        if let (Some(h), Some(p), Some(c)) = (get("hybrid"), get("pretrained"), get("contrastive")) {
            let _ = writeln!(
                s,
                "hybrid >= pretrained >= contrastive: {}",
                if h >= p && p >= c { "holds" } else { "does not hold" }
            );
        }
        let _ = writeln!(s, "spearman(budget, mean accuracy):");
        for (m, r) in &self.spearman {
            match r {
                Some(r) => {
                    let _ = writeln!(s, "  {m:<12} {r:.3}");
                }
                None => {
                    let _ = writeln!(s, "  {m:<12} undefined");
                }
            }
        }
        s
    }

    /// Writes folds.csv, summary.csv, losses.csv, ordering.txt and the two SVG plots.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv_writer(&dir.join("folds.csv"))?;
        w.write_record(["method", "budget", "fold", "accuracy"])?;
        for r in &self.results {
            for (k, a) in r.fold_accuracies.iter().enumerate() {
                w.write_record([r.method.clone(), r.budget.to_string(), k.to_string(), format!("{a}")])?;
            }
        }
        w.flush()?;
        let mut w = csv_writer(&dir.join("summary.csv"))?;
        for r in &self.summary {
            w.serialize(r)?;
        }
        w.flush()?;
        let mut w = csv_writer(&dir.join("losses.csv"))?;
        for r in &self.losses {
            w.serialize(r)?;
        }
        w.flush()?;
        std::fs::write(dir.join("ordering.txt"), self.ordering_report())?;
        std::fs::write(dir.join("accuracy_vs_budget.svg"), accuracy_plot(&self.summary)?)?;
        if let Ok(svg) = loss_plot(&self.losses) {
            std::fs::write(dir.join("contrastive_vs_accuracy.svg"), svg)?;
        }
        Ok(())
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<SummaryRow>, _>>()?;
    Ok(rows)
}

pub fn read_losses(path: &Path) -> Result<Vec<LossRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<LossRow>, _>>()?;
    Ok(rows)
}

const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

struct Axes {
    title: String,
    x_label: String,
    y_label: String,
    log_x: bool,
    lines: bool,
}

/// Mean accuracy against budget, one series per method.
pub fn accuracy_plot(summary: &[SummaryRow]) -> Result<String> {
    let mut by: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for r in summary {
        if let Some(m) = r.mean {
            by.entry(&r.method).or_default().push((r.budget as f64, m));
        }
    }
    let series = by
        .into_iter()
        .map(|(n, p)| Series {
            name: n.to_string(),
            points: p,
        })
        .collect();
    svg_plot(
        series,
        &Axes {
            title: "Linear probe accuracy".into(),
            x_label: "label budget".into(),
            y_label: "mean accuracy".into(),
            log_x: true,
            lines: true,
        },
    )
}

/// Final contrastive loss against mean accuracy at the smallest budget.
pub fn loss_plot(losses: &[LossRow]) -> Result<String> {
    let smallest = losses.iter().map(|r| r.budget).min().unwrap_or(0);
    let series = losses
        .iter()
        .filter(|r| r.budget == smallest)
        .filter_map(|r| {
            Some(Series {
                name: r.method.clone(),
                points: vec![(r.final_contrastive_loss?, r.mean_accuracy?)],
            })
        })
        .collect();
    svg_plot(
        series,
        &Axes {
            title: format!("Contrastive loss vs accuracy (budget {smallest})"),
            x_label: "final contrastive loss".into(),
            y_label: "mean accuracy".into(),
            log_x: false,
            lines: false,
        },
    )
}

fn svg_plot(series: Vec<Series>, axes: &Axes) -> Result<String> {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        return Err(Error::Probe("nothing to plot".into()));
    }
    let tx = |x: f64| if axes.log_x { x.max(1e-12).log10() } else { x };
    let (mut x0, mut x1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(tx(p.0)), b.max(tx(p.0)))
    });
    let (mut y0, mut y1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.05;
        y1 += 0.05;
    }
    let pad_x = (x1 - x0) * 0.05;
    let pad_y = (y1 - y0) * 0.1;
    let (x0, x1, y0, y1) = (x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y);
    let (w, h, left, right, top, bottom) = (640.0, 420.0, 70.0, 150.0, 40.0, 55.0);
    let px = |x: f64| left + (tx(x) - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(&axes.title));
    let (ax0, ay0, ax1, ay1) = (left, h - bottom, w - right, top);
    let _ = writeln!(s, r#"<path d="M{ax0} {ay1} L{ax0} {ay0} L{ax1} {ay0}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let yv = y0 + f * (y1 - y0);
        let xv = x0 + f * (x1 - x0);
        let xlabel = if axes.log_x { 10f64.powf(xv) } else { xv };
        let (sx, sy) = (left + f * (w - left - right), py(yv));
        let _ = writeln!(s, r#"<line x1="{ax0}" y1="{sy:.1}" x2="{}" y2="{sy:.1}" stroke="black"/>"#, ax0 - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{yv:.3}</text>"#, ax0 - 6.0, sy + 4.0);
        let _ = writeln!(s, r#"<line x1="{sx:.1}" y1="{ay0}" x2="{sx:.1}" y2="{}" stroke="black"/>"#, ay0 + 4.0);
        let _ = writeln!(s, r#"<text x="{sx:.1}" y="{}" text-anchor="middle">{}</text>"#, ay0 + 18.0, tick(xlabel));
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (ax0 + ax1) / 2.0,
        h - 12.0,
        escape(&axes.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (ay0 + ay1) / 2.0,
        escape(&axes.y_label)
    );
    for (k, se) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let _ = writeln!(s, r#"<g class="series" data-name="{}">"#, escape(&se.name));
        if axes.lines && se.points.len() > 1 {
            let d: Vec<String> = se
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| format!("{}{:.1} {:.1}", if i == 0 { "M" } else { "L" }, px(p.0), py(p.1)))
                .collect();
            let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#, d.join(" "));
        }
        for p in &se.points {
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{colour}"/>"#, px(p.0), py(p.1));
        }
        let ly = top + 10.0 + 18.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="12" height="12" fill="{colour}"/>"#, ax1 + 15.0, ly - 10.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, ax1 + 32.0, escape(&se.name));
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
