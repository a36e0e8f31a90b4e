use gzhybrid_core::byol::{HybridConfig, HybridModel, HybridState};
use gzhybrid_core::netcore::{EncoderConfig, HeadsConfig};
use gzhybrid_core::probe::{
    budget_sweep, direct_settings, extract_representations, ring_pool, train_linear_probe, ProbeConfig,
    RepresentationMatrix, SweepMethod, DIRECT,
};
use gzhybrid_core::schema::AnswerSchema;
use gzhybrid_core::synthdata::{make_dataset, Dataset, DatasetConfig, Split};
use gzhybrid_core::train::{CheckpointMeta, FrozenEncoder, TrainMode};
use gzhybrid_core::AugmentPolicy;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_matrix(rows: usize, width: usize, seed: u64) -> RepresentationMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * width).map(|_| StandardNormal.sample(&mut rng)).collect();
    RepresentationMatrix::new((0..rows).map(|i| format!("r{i}")).collect(), width, data).unwrap()
}

#[test]
fn separable_features_are_learned() {
    let mut x = gaussian_matrix(1000, 8, 1);
    // open a gap around the separating plane
    let data: Vec<f64> = (0..1000)
        .flat_map(|i| {
            let mut r = x.row(i).to_vec();
            r[3] += 0.25 * r[3].signum();
            r
        })
        .collect();
    x = RepresentationMatrix::new(x.ids().to_vec(), 8, data).unwrap();
    let y: Vec<bool> = (0..1000).map(|i| x.row(i)[3] > 0.0).collect();
    let r = train_linear_probe("sep", &x, &y, 500, &ProbeConfig::default(), 9).unwrap();
    assert!(r.mean >= 0.99, "{:?}", r.fold_accuracies);
}

#[test]
fn permuted_labels_give_chance_accuracy() {
    let x = gaussian_matrix(4000, 16, 2);
    let mut y: Vec<bool> = (0..4000).map(|i| x.row(i)[0] > 0.0).collect();
    y.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let r = train_linear_probe("perm", &x, &y, 2000, &ProbeConfig::default(), 4).unwrap();
    assert!((0.45..=0.55).contains(&r.mean), "{}", r.mean);
}

#[test]
fn folds_partition_the_budgeted_rows() {
    let x = gaussian_matrix(300, 4, 5);
    let y: Vec<bool> = (0..300).map(|i| i % 3 == 0).collect();
    let r = train_linear_probe("f", &x, &y, 123, &ProbeConfig::default(), 6).unwrap();
    assert_eq!(r.folds.len(), 5);
    assert_eq!(r.fold_accuracies.len(), 5);
    let mut all: Vec<usize> = r.folds.iter().flatten().copied().collect();
    all.sort_unstable();
    let n = all.len();
    all.dedup();
    assert_eq!((n, all.len()), (123, 123));
    assert!(r.fold_accuracies.iter().all(|a| (0.0..=1.0).contains(a)));
    let again = train_linear_probe("f", &x, &y, 123, &ProbeConfig::default(), 6).unwrap();
    assert_eq!(r, again);
}

#[test]
fn budget_beyond_the_pool_is_an_error() {
    let x = gaussian_matrix(50, 4, 7);
    let y: Vec<bool> = (0..50).map(|i| i % 2 == 0).collect();
    assert!(train_linear_probe("b", &x, &y, 51, &ProbeConfig::default(), 0).is_err());
}

fn ring_dataset(size: usize) -> Dataset {
    let cfg = DatasetConfig {
        labelled: 0,
        unlabelled: 0,
        rings: 240,
        image_size: size,
        ..DatasetConfig::default()
    };
    make_dataset(&AnswerSchema::synthetic(), &cfg, 21).unwrap()
}

fn frozen(size: usize, seed: u64) -> FrozenEncoder {
    let schema = AnswerSchema::synthetic();
    let enc = EncoderConfig::desk(size);
    let heads = HeadsConfig::desk(schema.answer_count());
    let model = HybridModel::new(&enc, &heads, &schema).unwrap();
    let state = HybridState::init(&model, HybridConfig::default(), seed).unwrap();
    let meta = CheckpointMeta {
        mode: TrainMode::Hybrid,
        seed,
        encoder: enc,
        heads: Some(heads),
        answer_count: schema.answer_count(),
        best_step: 0,
        steps_run: 0,
        best_objective: None,
        final_contrastive_loss: Some(1.0 + seed as f64),
    };
    FrozenEncoder::from_state(&model, &state, meta)
}

#[test]
fn representations_have_the_expected_shape_and_are_pure() {
    let ds = ring_dataset(32);
    let enc = frozen(32, 1);
    let before = enc.params.clone();
    let idx = [3, 7, 3, 11];
    let x = extract_representations(&enc, &ds, &idx).unwrap();
    assert_eq!((x.rows(), x.width()), (4, 64));
    assert_eq!(x.row(0), x.row(2));
    assert_eq!(x.ids()[1], ds.records()[7].id);

    let (pool, labels) = ring_pool(&ds, Split::RingTrain).unwrap();
    let full = extract_representations(&enc, &ds, &pool).unwrap();
    train_linear_probe("h", &full, &labels, 60, &ProbeConfig::default(), 2).unwrap();
    assert_eq!(enc.params, before);
    assert_eq!(extract_representations(&enc, &ds, &idx).unwrap(), x);
}

#[test]
fn sweep_rows_cover_every_cell_including_direct() {
    let size = 16;
    let ds = ring_dataset(size);
    let mut enc = EncoderConfig::desk(size);
    enc.stages.truncate(2);
    enc.stages[1].filters = 64;
    let settings = direct_settings(4, 8, Default::default(), AugmentPolicy::standard(size), 1);
    let methods = vec![
        SweepMethod::frozen("hybrid", frozen(size, 1)),
        SweepMethod::direct(enc, settings),
    ];
    let report = budget_sweep(&methods, &[20, 40], &ds, &ProbeConfig::default(), 3).unwrap();
    assert_eq!(report.summary.len(), 4);
    assert_eq!(report.results.len(), 4);
    assert!(report.results.iter().all(|r| r.fold_accuracies.len() == 5));
    assert_eq!(report.summary.iter().filter(|r| r.method == DIRECT).count(), 2);
    // identical subsample and folds across methods at one budget
    let folds = |m: &str| report.results.iter().find(|r| r.method == m && r.budget == 20).unwrap().folds.clone();
    assert_eq!(folds("hybrid"), folds(DIRECT));
    assert_eq!(report.losses.iter().find(|l| l.method == "hybrid").unwrap().final_contrastive_loss, Some(2.0));

    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path()).unwrap();
    let folds_csv = std::fs::read_to_string(dir.path().join("folds.csv")).unwrap();
    assert_eq!(folds_csv.lines().count(), 1 + 4 * 5);
    let summary = gzhybrid_core::probe::read_summary(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary, report.summary);
    let svg = std::fs::read_to_string(dir.path().join("accuracy_vs_budget.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="series""#).count(), 2);
}

#[test]
fn failed_cells_are_recorded_as_missing() {
    let ds = ring_dataset(32);
    let methods = vec![SweepMethod::frozen("hybrid", frozen(32, 2))];
    let report = budget_sweep(&methods, &[20, 10_000], &ds, &ProbeConfig::default(), 3).unwrap();
    assert_eq!(report.summary.len(), 2);
    assert!(report.summary[0].mean.is_some());
    assert!(report.summary[1].mean.is_none() && !report.summary[1].error.is_empty());
}
