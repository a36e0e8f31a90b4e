use gzhybrid_core::byol::{
    contrastive_step, ema_update, evaluate_hybrid, hybrid_gradients, hybrid_step, supervised_step,
    HybridConfig, HybridModel, HybridState, PairedBatch, SupervisedBatch,
};
use gzhybrid_core::netcore::{ConvStage, EncoderConfig, HeadsConfig, ParameterSet, Tensor};
use gzhybrid_core::schema::{AnswerSchema, VoteVector};
use gzhybrid_core::synthdata::{GalaxyParams, SyntheticCampaignTruth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIZE: usize = 12;

fn tiny_model(schema: &AnswerSchema) -> HybridModel {
    let stage = |filters| ConvStage {
        filters,
        kernel: 3,
        stride: 2,
    };
    let enc = EncoderConfig {
        channels: 3,
        height: SIZE,
        width: SIZE,
        stages: vec![stage(8), stage(16)],
        representation_width: 16,
        sample_norm: false,
    };
    HybridModel::new(&enc, &HeadsConfig::desk(schema.answer_count()), schema).unwrap()
}

fn images(rows: usize, size: usize, rng: &mut ChaCha8Rng) -> Tensor<f32> {
    let data = (0..rows * 3 * size * size).map(|_| rng.random::<f32>()).collect();
    Tensor::from_vec(&[rows, 3, size, size], data).unwrap()
}

fn votes(schema: &AnswerSchema, rows: usize, labelled: usize, rng: &mut ChaCha8Rng) -> Vec<Option<VoteVector>> {
    let truth = SyntheticCampaignTruth::new(schema.clone(), (5, 40)).unwrap();
    (0..rows)
        .map(|i| {
            (i < labelled).then(|| {
                let p = GalaxyParams::sample(rng, None, 0.3);
                let campaign = &schema.campaigns()[i % 2].name;
                schema.encode_votes(&truth.simulate_votes("x", campaign, &p, rng).unwrap()).unwrap()
            })
        })
        .collect()
}

fn batch(schema: &AnswerSchema, rows: usize, labelled: usize, seed: u64) -> PairedBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PairedBatch {
        view_a: images(rows, SIZE, &mut rng),
        view_b: images(rows, SIZE, &mut rng),
        votes: votes(schema, rows, labelled, &mut rng),
    }
}

fn scalar(v: f32) -> ParameterSet<f32> {
    let mut p = ParameterSet::new();
    p.insert("w", Tensor::from_vec(&[1], vec![v]).unwrap()).unwrap();
    p
}

#[test]
fn ema_recursion_on_a_scalar_probe() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let decay = 0.9;
    let mut target = scalar(0.0);
    let mut expected = 0.0f64;
    for _ in 0..200 {
        let online: f32 = rng.random_range(-1.0..1.0);
        target = ema_update(&scalar(online), &target, decay).unwrap();
        expected = decay * expected + (1.0 - decay) * f64::from(online);
        assert!((f64::from(target.get("w").unwrap().data()[0]) - expected).abs() < 1e-6);
    }
}

#[test]
fn target_follows_the_ema_of_the_online_history() {
    let schema = AnswerSchema::synthetic();
    let model = tiny_model(&schema);
    let config = HybridConfig {
        ema_decay: 0.8,
        ..HybridConfig::default()
    };
    let mut state = HybridState::init(&model, config, 1).unwrap();
    let mut reference: ParameterSet<f64> = state.target.encoder.cast();
    for step in 0..6 {
        hybrid_step(&model, &mut state, &batch(&schema, 4, 2, step)).unwrap();
        let online: ParameterSet<f64> = state.online.encoder.cast();
        reference.ema_toward(&online, 0.8).unwrap();
    }
    for ((_, t), (_, r)) in state.target.encoder.iter().zip(reference.iter()) {
        for (a, b) in t.data().iter().zip(r.data()) {
            assert!((f64::from(*a) - b).abs() < 1e-6);
        }
    }
}

#[test]
fn gradient_evaluation_leaves_target_untouched() {
    let schema = AnswerSchema::synthetic();
    let model = tiny_model(&schema);
    let state = HybridState::init(&model, HybridConfig::default(), 2).unwrap();
    let before = state.target.clone();
    let (_, grads) = hybrid_gradients(&model, &state, &batch(&schema, 3, 2, 9)).unwrap();
    assert_eq!(state.target, before);
    assert!(grads.projection.is_some() && grads.predictor.is_some());
}

#[test]
fn lambda_zero_is_bit_equal_to_contrastive_mode() {
    let schema = AnswerSchema::synthetic();
    let model = tiny_model(&schema);
    let hybrid_cfg = HybridConfig {
        lambda: 0.0,
        ..HybridConfig::default()
    };
    let mut a = HybridState::init(&model, hybrid_cfg, 3).unwrap();
    let mut b = HybridState::init(&model, HybridConfig::default(), 3).unwrap();
    let sup_before = b.online.supervised.clone();
    for step in 0..4 {
        let bt = batch(&schema, 4, 3, 100 + step);
        let la = hybrid_step(&model, &mut a, &bt).unwrap();
        let lb = contrastive_step(&model, &mut b, &bt).unwrap();
        assert_eq!(la.contrastive.to_bits(), lb.contrastive.to_bits());
        assert_eq!(la.combined.to_bits(), la.contrastive.to_bits());
    }
    assert_eq!(a.to_tensors(), b.to_tensors());
    assert_eq!(b.online.supervised, sup_before);
}

#[test]
fn swapping_views_keeps_the_contrastive_term() {
    let schema = AnswerSchema::synthetic();
    let model = tiny_model(&schema);
    let mut state = HybridState::init(&model, HybridConfig::default(), 4).unwrap();
    // make target differ from online
    for s in 0..3 {
        hybrid_step(&model, &mut state, &batch(&schema, 4, 2, 200 + s)).unwrap();
    }
    let bt = batch(&schema, 5, 0, 7);
    let swapped = PairedBatch {
        view_a: bt.view_b.clone(),
        view_b: bt.view_a.clone(),
        votes: bt.votes.clone(),
    };
    let x = evaluate_hybrid(&model, &state, &bt).unwrap().contrastive;
    let y = evaluate_hybrid(&model, &state, &swapped).unwrap().contrastive;
    assert!((x - y).abs() < 1e-6);
}

#[test]
fn supervised_term_ignores_lambda_and_unlabelled_rows() {
    let schema = AnswerSchema::synthetic();
    let model = tiny_model(&schema);
    let bt = batch(&schema, 6, 3, 11);
    let eval = |lambda: f64| {
        let cfg = HybridConfig {
            lambda,
            ..HybridConfig::default()
        };
        let state = HybridState::init(&model, cfg, 5).unwrap();
        evaluate_hybrid(&model, &state, &bt).unwrap()
    };
    let (l1, l2) = (eval(1.0), eval(0.25));
    assert_eq!(l1.supervised, l2.supervised);
    assert_ne!(l1.combined, l2.combined);

    let state = HybridState::init(&model, HybridConfig::default(), 5).unwrap();
    let labelled_only = PairedBatch {
        view_a: Tensor::stack(&[3, SIZE, SIZE], &(0..3).map(|i| bt.view_a.row(i).to_vec()).collect::<Vec<_>>()).unwrap(),
        view_b: Tensor::stack(&[3, SIZE, SIZE], &(0..3).map(|i| bt.view_b.row(i).to_vec()).collect::<Vec<_>>()).unwrap(),
        votes: bt.votes[..3].to_vec(),
    };
    let full = evaluate_hybrid(&model, &state, &bt).unwrap();
    let part = evaluate_hybrid(&model, &state, &labelled_only).unwrap();
    assert!((full.supervised - part.supervised).abs() < 1e-9);
    assert_eq!(full.labelled_count, 3);
}

#[test]
fn unlabelled_batches_reduce_to_contrastive() {
    let schema = AnswerSchema::synthetic();
    let model = tiny_model(&schema);
    let state = HybridState::init(&model, HybridConfig::default(), 6).unwrap();
    let l = evaluate_hybrid(&model, &state, &batch(&schema, 4, 0, 12)).unwrap();
    assert_eq!(l.supervised, 0.0);
    assert_eq!(l.combined, l.contrastive);
    assert_eq!(l.labelled_count, 0);
}

#[test]
fn lambda_zero_keeps_supervised_gradients_out_of_the_encoder() {
    let schema = AnswerSchema::synthetic();
    let model = tiny_model(&schema);
    let cfg = HybridConfig {
        lambda: 0.0,
        ..HybridConfig::default()
    };
    let state = HybridState::init(&model, cfg, 7).unwrap();
    let labelled = batch(&schema, 4, 4, 13);
    let unlabelled = PairedBatch {
        votes: vec![None; 4],
        ..labelled.clone()
    };
    let (_, g1) = hybrid_gradients(&model, &state, &labelled).unwrap();
    let (_, g2) = hybrid_gradients(&model, &state, &unlabelled).unwrap();
    assert_eq!(g1.encoder, g2.encoder);
    assert!(g1.supervised.is_none());
}

fn supervised_batch(schema: &AnswerSchema, rows: usize, labelled: usize, seed: u64) -> SupervisedBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SupervisedBatch {
        views: images(rows, SIZE, &mut rng),
        votes: votes(schema, rows, labelled, &mut rng),
    }
}

#[test]
fn supervised_only_needs_labels() {
    let schema = AnswerSchema::synthetic();
    let model = tiny_model(&schema);
    let mut state = HybridState::init(&model, HybridConfig::default(), 8).unwrap();
    assert!(supervised_step(&model, &mut state, &supervised_batch(&schema, 4, 0, 1)).is_err());
}

#[test]
fn supervised_only_overfits_a_small_set() {
    let schema = AnswerSchema::synthetic();
    let model = tiny_model(&schema);
    let mut state = HybridState::init(&model, HybridConfig::default(), 9).unwrap();
    let bt = supervised_batch(&schema, 64, 64, 2);
    let target_before = state.target.clone();
    let first = supervised_step(&model, &mut state, &bt).unwrap().supervised;
    let mut last = first;
    for _ in 0..49 {
        last = supervised_step(&model, &mut state, &bt).unwrap().supervised;
    }
    assert!(last < first, "{last} !< {first}");
    assert_eq!(state.target, target_before);
}

#[test]
fn state_round_trips_through_checkpoint_tensors() {
    let schema = AnswerSchema::synthetic();
    let model = tiny_model(&schema);
    let state = HybridState::init(&model, HybridConfig::default(), 10).unwrap();
    let tensors = state.to_tensors();
    assert!(tensors.iter().any(|(n, _)| n.starts_with("target.encoder.")));
    let back = HybridState::from_tensors(&model, &tensors, HybridConfig::default()).unwrap();
    assert_eq!(back.online, state.online);
    assert_eq!(back.target, state.target);
}

#[test]
fn composed_gradients_match_finite_differences() {
    use gzhybrid_core::byol::LossDenominator;
    let schema = AnswerSchema::synthetic();
    let model = tiny_model(&schema);
    let cfg = HybridConfig {
        lambda: 0.05,
        denominator: LossDenominator::Off,
        ..HybridConfig::default()
    };
    let mut state = HybridState::init(&model, cfg, 12).unwrap();
    for s in 0..2 {
        hybrid_step(&model, &mut state, &batch(&schema, 4, 2, 300 + s)).unwrap();
    }
    let bt = batch(&schema, 4, 2, 14);
    let (_, grads) = hybrid_gradients(&model, &state, &bt).unwrap();

    type Pick = fn(&mut HybridState) -> &mut ParameterSet<f32>;
    let parts: [(&str, &ParameterSet<f32>, Pick); 4] = [
        ("encoder", &grads.encoder, |s| &mut s.online.encoder),
        ("projection", grads.projection.as_ref().unwrap(), |s| &mut s.online.projection),
        ("predictor", grads.predictor.as_ref().unwrap(), |s| &mut s.online.predictor),
        ("supervised", grads.supervised.as_ref().unwrap(), |s| &mut s.online.supervised),
    ];
    for (name, g, pick) in parts {
        // the largest components are well above f32 round-off in the loss
        let mut flat: Vec<(usize, usize, f32)> = g
            .iter()
            .enumerate()
            .flat_map(|(ti, (_, t))| t.data().iter().enumerate().map(move |(ei, &v)| (ti, ei, v)))
            .collect();
        flat.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()));
        for &(ti, ei, an) in flat.iter().take(5) {
            let eval = |delta: f32| {
                let mut s = state.clone();
                pick(&mut s).tensor_mut(ti).data_mut()[ei] += delta;
                evaluate_hybrid(&model, &s, &bt).unwrap().combined
            };
            let h = 1e-3f32;
            let fd = (eval(h) - eval(-h)) / (2.0 * f64::from(h));
            let err = (fd - f64::from(an)).abs() / fd.abs().max(f64::from(an).abs());
            assert!(err < 0.02, "{name}[{ti}][{ei}]: analytic {an} vs fd {fd}");
        }
    }
}
