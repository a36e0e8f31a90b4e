use gzhybrid_core::byol::HybridModel;
use gzhybrid_core::config::ExperimentConfig;
use gzhybrid_core::netcore::{ConvStage, EncoderConfig, HeadConfig, HeadKind, HeadsConfig};
use gzhybrid_core::schema::AnswerSchema;
use gzhybrid_core::synthdata::{make_dataset, Dataset, DatasetConfig};
use gzhybrid_core::train::{
    load_checkpoint, save_checkpoint, train_direct, train_representation, FrozenEncoder, MetricsRow, TrainMode,
};

const SIZE: usize = 16;

fn small_config(mode: TrainMode) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk(SIZE);
    cfg.seed = 5;
    cfg.encoder = EncoderConfig {
        stages: vec![
            ConvStage { filters: 8, kernel: 3, stride: 2 },
            ConvStage { filters: 16, kernel: 3, stride: 2 },
        ],
        representation_width: 16,
        ..EncoderConfig::desk(SIZE)
    };
    let schema = AnswerSchema::synthetic();
    cfg.heads = Some(HeadsConfig {
        projection: HeadConfig::new(HeadKind::Projection, vec![16], 8),
        contrastive_predictor: HeadConfig::new(HeadKind::ContrastivePredictor, vec![16], 8),
        supervised_predictor: HeadConfig::new(HeadKind::SupervisedPredictor, vec![16], schema.answer_count()),
    });
    cfg.dataset.generate = DatasetConfig {
        labelled: 60,
        unlabelled: 40,
        rings: 40,
        image_size: SIZE,
        ..DatasetConfig::default()
    };
    cfg.training.mode = mode;
    cfg.training.batch_size = 8;
    cfg.training.max_steps = 12;
    cfg.training.eval_every = 4;
    cfg.training.patience = 2;
    cfg.training.val_size = 6;
    cfg.resolve(&schema);
    cfg.validate(&schema).unwrap();
    cfg
}

fn setup(mode: TrainMode) -> (ExperimentConfig, HybridModel, Dataset) {
    let cfg = small_config(mode);
    let schema = cfg.load_schema().unwrap();
    let model = HybridModel::new(&cfg.encoder, cfg.heads.as_ref().unwrap(), &schema).unwrap();
    let ds = make_dataset(&schema, &cfg.dataset.generate, cfg.seed).unwrap();
    (cfg, model, ds)
}

fn without_clock(rows: &[MetricsRow]) -> Vec<MetricsRow> {
    rows.iter().map(|r| MetricsRow { wall_ms: 0, ..r.clone() }).collect()
}

#[test]
fn hybrid_run_is_deterministic() {
    let (cfg, model, ds) = setup(TrainMode::Hybrid);
    let a = train_representation(&model, &ds, &cfg, |_| {}).unwrap();
    let b = train_representation(&model, &ds, &cfg, |_| {}).unwrap();
    assert_eq!(without_clock(&a.metrics), without_clock(&b.metrics));
    assert_eq!(a.validation, b.validation);
    assert_eq!(a.state.to_tensors(), b.state.to_tensors());
    assert!(a.metrics.iter().all(|r| r.labelled_count >= 1 && r.labelled_count < 8));
}

#[test]
fn best_snapshot_matches_the_best_validation_row() {
    let (cfg, model, ds) = setup(TrainMode::Hybrid);
    let out = train_representation(&model, &ds, &cfg, |_| {}).unwrap();
    let best = out
        .validation
        .iter().rfind(|v| v.improved)
        .unwrap();
    assert_eq!(best.step, out.best_step);
    assert_eq!(best.objective, out.best_objective);
    assert_eq!(out.state.step(), out.best_step);
    assert!(out.steps_run <= cfg.training.max_steps);
}

#[test]
fn zero_lambda_hybrid_matches_contrastive_training() {
    let (mut cfg, model, ds) = setup(TrainMode::Hybrid);
    cfg.objective.lambda = 0.0;
    let hybrid = train_representation(&model, &ds, &cfg, |_| {}).unwrap();
    cfg.training.mode = TrainMode::Contrastive;
    let contrastive = train_representation(&model, &ds, &cfg, |_| {}).unwrap();
    let con = |rows: &[MetricsRow]| rows.iter().map(|r| r.contrastive.to_bits()).collect::<Vec<_>>();
    assert_eq!(con(&hybrid.metrics), con(&contrastive.metrics));
    assert_eq!(hybrid.final_contrastive.to_bits(), contrastive.final_contrastive.to_bits());
    assert_eq!(hybrid.state.online.encoder, contrastive.state.online.encoder);
}

#[test]
fn pretraining_uses_labelled_rows_only() {
    let (cfg, model, ds) = setup(TrainMode::Pretrain);
    let out = train_representation(&model, &ds, &cfg, |_| {}).unwrap();
    assert!(out.metrics.iter().all(|r| r.labelled_count == 8));
    assert!(out.final_contrastive.is_finite());
    assert!(out.best_objective.is_finite());
}

#[test]
fn direct_mode_is_rejected_by_the_representation_loop() {
    let (cfg, model, ds) = setup(TrainMode::Direct);
    assert!(train_representation(&model, &ds, &cfg, |_| {}).is_err());
}

#[test]
fn checkpoint_reloads_as_a_frozen_encoder() {
    let (cfg, model, ds) = setup(TrainMode::Contrastive);
    let out = train_representation(&model, &ds, &cfg, |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run/model.ckpt");
    let meta = out.meta(&cfg, &model);
    save_checkpoint(&path, &out.state.to_tensors(), &meta).unwrap();
    let (tensors, back) = load_checkpoint(&path).unwrap();
    assert_eq!(back, meta);
    assert_eq!(tensors, out.state.to_tensors());
    let frozen = FrozenEncoder::load(&path).unwrap();
    assert_eq!(frozen.params, out.state.online.encoder);
    assert_eq!(frozen.meta.final_contrastive_loss, Some(out.final_contrastive));
}

#[test]
fn missing_sidecar_is_a_checkpoint_error() {
    let (cfg, model, ds) = setup(TrainMode::Contrastive);
    let out = train_representation(&model, &ds, &cfg, |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&path, &out.state.to_tensors(), &out.meta(&cfg, &model)).unwrap();
    std::fs::remove_file(gzhybrid_core::train::meta_path(&path)).unwrap();
    assert!(FrozenEncoder::load(&path).is_err());
}

#[test]
fn direct_training_reduces_its_loss() {
    let (cfg, _, ds) = setup(TrainMode::Direct);
    let idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.records()[i].ring.is_some()).collect();
    let labels: Vec<bool> = idx.iter().map(|&i| ds.records()[i].ring.unwrap()).collect();
    let settings = gzhybrid_core::probe::direct_settings(60, 16, cfg.optimizer, cfg.augment.standard, 3);
    let (model, rows) = train_direct(&cfg.encoder, &ds, &idx, &labels, &settings).unwrap();
    let head: f64 = rows[..10].iter().map(|r| r.combined).sum::<f64>() / 10.0;
    let tail: f64 = rows[rows.len() - 10..].iter().map(|r| r.combined).sum::<f64>() / 10.0;
    assert!(tail < head, "{head} -> {tail}");
    let images: Vec<_> = idx.iter().map(|&i| ds.image(i).unwrap()).collect();
    let p = model.predict(&images).unwrap();
    assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
}
