mod common;

use aphasr::autodiff::{encode_checkpoint, ParamStore};
use aphasr::corpus::{FeatureMatrix, SyntheticSpec};
use aphasr::model::*;
use proptest::prelude::*;
use rand::Rng;

fn words() -> Vocabulary {
    Vocabulary::new(["a", "b", "c"])
}

/// Fresh parameters with every entry jittered, so zero-initialized
/// projections and unit norm gains are exercised away from their start.
fn jittered(cfg: &ModelConfig, dims: usize, vocab: &Vocabulary, seed: u64) -> ParamStore {
    let mut rng = common::rng(seed);
    let mut p = init_params(cfg, dims, vocab.len(), &mut rng).unwrap();
    for (_, t) in p.iter_mut() {
        for v in t.values.iter_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
    }
    p
}

fn loss_of(
    params: &ParamStore,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    batch: &[Sample],
) -> LossBreakdown {
    compute_loss(params, cfg, vocab, batch, false).unwrap().0
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let vocab = words();
    let mut cfg = common::tiny_model(2, 8, &[1]);
    cfg.interctc_targets = vec![InterTarget::TagPrefixedTokens];
    let feats = common::random_features(&mut common::rng(5), 12, 3);
    let tokens = vocab.encode(&["a", "c", "b"]);
    let batch = [Sample {
        features: &feats,
        tokens: &tokens,
        aphasia: true,
    }];
    let params = jittered(&cfg, 3, &vocab, 11);
    let (_, grads) = compute_loss(&params, &cfg, &vocab, &batch, true).unwrap();
    let grads = grads.unwrap();

    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (name, _) in params.iter() {
        let analytic = grads.get(name).unwrap();
        for (i, &a) in analytic.iter().enumerate() {
            let mut plus = params.clone();
            plus.get_mut(name).unwrap().values[i] += h;
            let mut minus = params.clone();
            minus.get_mut(name).unwrap().values[i] -= h;
            let fd = (loss_of(&plus, &cfg, &vocab, &batch).l_total
                - loss_of(&minus, &cfg, &vocab, &batch).l_total)
                / (2.0 * h);
            let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-4);
            assert!(
                err < 1e-3,
                "{name}[{i}]: autodiff {a} vs finite difference {fd}"
            );
            worst = worst.max(err);
            checked += 1;
        }
    }
    assert_eq!(checked, params.num_scalars());
    assert!(worst < 1e-3);
}

fn toy_batch(seed: u64) -> (Vec<FeatureMatrix>, Vec<Vec<usize>>, Vec<bool>) {
    let mut rng = common::rng(seed);
    let feats = (0..3)
        .map(|_| {
            let frames = rng.random_range(8..14);
            common::random_features(&mut rng, frames, 4)
        })
        .collect();
    let tokens = (0..3)
        .map(|_| {
            (0..rng.random_range(1..4))
                .map(|_| rng.random_range(5..8))
                .collect()
        })
        .collect();
    (feats, tokens, vec![true, false, true])
}

fn samples<'a>(b: &'a (Vec<FeatureMatrix>, Vec<Vec<usize>>, Vec<bool>)) -> Vec<Sample<'a>> {
    (0..b.0.len())
        .map(|i| Sample {
            features: &b.0[i],
            tokens: &b.1[i],
            aphasia: b.2[i],
        })
        .collect()
}

#[test]
fn total_loss_matches_closed_form() {
    let vocab = words();
    let data = toy_batch(3);
    let batch = samples(&data);
    let mut rng = common::rng(17);
    for trial in 0..100 {
        let taps: &[usize] = if trial % 2 == 0 { &[1] } else { &[] };
        let mut cfg = common::tiny_model(2, 8, taps);
        cfg.ctc_weight = rng.random_range(0.0..=1.0);
        cfg.interctc_weight = rng.random_range(0.0..=1.0);
        cfg.self_condition = trial % 4 == 0;
        let params = jittered(&cfg, 4, &vocab, trial);
        let bd = loss_of(&params, &cfg, &vocab, &batch);
        let closed = combine_losses(
            bd.l_ctc,
            bd.l_inter_mean,
            bd.l_dec,
            cfg.ctc_weight,
            cfg.interctc_weight,
        );
        assert!(
            (bd.l_total - closed).abs() <= 1e-12,
            "trial {trial}: {} vs {closed}",
            bd.l_total
        );
        assert_eq!(bd.l_inter.len(), taps.len());
    }
}

#[test]
fn loss_endpoints() {
    let vocab = words();
    let data = toy_batch(4);
    let batch = samples(&data);

    let mut no_taps = common::tiny_model(2, 8, &[]);
    let params = jittered(&no_taps, 4, &vocab, 1);
    no_taps.ctc_weight = 0.0;
    let bd = loss_of(&params, &no_taps, &vocab, &batch);
    assert_eq!(bd.l_total, bd.l_dec);
    no_taps.ctc_weight = 1.0;
    let bd = loss_of(&params, &no_taps, &vocab, &batch);
    assert_eq!(bd.l_total, bd.l_ctc);

    // Without conditioning the tap leaves the encoder stream untouched, so
    // alpha = 0 must reproduce the tap-free loss.
    let mut tapped = common::tiny_model(2, 8, &[1]);
    tapped.self_condition = false;
    tapped.interctc_weight = 0.0;
    no_taps.ctc_weight = 0.3;
    let with = loss_of(&params, &tapped, &vocab, &batch);
    let without = loss_of(&params, &no_taps, &vocab, &batch);
    assert_eq!(with.l_total, without.l_total);
    assert!(with.l_inter_mean.unwrap() > 0.0);
}

#[test]
fn batch_order_does_not_leak_between_examples() {
    let vocab = words();
    let data = toy_batch(8);
    let cfg = common::tiny_model(2, 8, &[1]);
    let params = jittered(&cfg, 4, &vocab, 2);
    let batch = samples(&data);
    let swapped = vec![batch[1], batch[0], batch[2]];
    let (a, ga) = compute_loss(&params, &cfg, &vocab, &batch, true).unwrap();
    let (b, gb) = compute_loss(&params, &cfg, &vocab, &swapped, true).unwrap();
    assert!((a.l_total - b.l_total).abs() < 1e-12);
    let (ga, gb) = (ga.unwrap(), gb.unwrap());
    for (name, g) in &ga.0 {
        for (x, y) in g.iter().zip(gb.get(name).unwrap()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
    let model = AsrModel {
        config: ExperimentConfig {
            model: cfg,
            ..ExperimentConfig::default()
        },
        vocab,
        params,
    };
    let alone = model.encode(&data.0[1]).unwrap();
    let again = model.encode(&data.0[1]).unwrap();
    assert_eq!(alone.hidden, again.hidden);
}

fn small_model(subsample: usize, taps: &[usize], dims: usize) -> AsrModel {
    let mut cfg = ExperimentConfig {
        model: common::tiny_model(3, 8, taps),
        ..Default::default()
    };
    cfg.model.subsample = subsample;
    AsrModel::new(cfg, words(), dims, 9).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encoder_shape_contract(
        frames in 1usize..30,
        dims in 1usize..6,
        subsample in 1usize..=2,
        tapped in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let taps: &[usize] = if tapped { &[1, 2] } else { &[] };
        let model = small_model(subsample, taps, dims);
        let f = common::random_features(&mut common::rng(seed), frames, dims);
        let enc = model.encode(&f).unwrap();
        let expected = frames.div_ceil(subsample);
        prop_assert_eq!(enc.frames, expected);
        prop_assert_eq!(enc.hidden.len(), expected * 8);
        prop_assert_eq!(enc.lattice.frames(), expected);
        prop_assert_eq!(enc.lattice.vocab(), model.vocab.len());
        prop_assert_eq!(enc.taps.len(), taps.len());
        for (_, _, lat) in &enc.taps {
            prop_assert_eq!(lat.frames(), expected);
        }
    }

    #[test]
    fn decode_step_is_normalized_and_ignores_masked_padding(
        frames in 2usize..12,
        pad in 1usize..5,
        prefix in prop::collection::vec(3usize..8, 0..4),
        seed in any::<u64>(),
    ) {
        let model = small_model(1, &[1], 4);
        let mut rng = common::rng(seed);
        let f = common::random_features(&mut rng, frames, 4);
        let enc = model.encode(&f).unwrap();
        let mut ids = vec![SOS_EOS];
        ids.extend(prefix);
        let lp = model.decode_step(&enc.hidden, enc.width, enc.frames, &ids);
        let m = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + lp.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        prop_assert!(lse.abs() < 1e-6);
        prop_assert_eq!(&lp, &model.decode_step(&enc.hidden, enc.width, enc.frames, &ids));

        let mut padded = enc.hidden.clone();
        padded.extend((0..pad * enc.width).map(|_| rng.random_range(-5.0..5.0)));
        let masked = model.decode_step(&padded, enc.width, enc.frames, &ids);
        for (a, b) in lp.iter().zip(&masked) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tag_round_trip(
        words in prop::collection::vec(5usize..12, 0..8),
        aphasia in any::<bool>(),
        mode in prop::sample::select(vec![TagMode::None, TagMode::Prepend, TagMode::Append, TagMode::Both]),
    ) {
        let vocab = Vocabulary::new((0..7).map(|i| format!("w{i}")));
        let tagged = insert_tags(&words, aphasia, mode, &vocab).unwrap();
        let (plain, tags) = strip_tags(&tagged, &vocab);
        prop_assert_eq!(plain, words);
        let n = match mode {
            TagMode::None => 0,
            TagMode::Prepend | TagMode::Append => 1,
            TagMode::Both => 2,
        };
        prop_assert_eq!(tags, vec![vocab.tag_for(aphasia); n]);
        prop_assert!(insert_tags(&tagged, aphasia, mode, &vocab).is_err() || n == 0);
    }
}

fn tiny_training(epochs: usize, top_k: usize) -> (common::SyntheticSplit, ExperimentConfig) {
    let spec = SyntheticSpec {
        speakers_per_class: 4,
        utterances_per_speaker: 3,
        vocab_size: 6,
        feature_dim: 4,
        ..SyntheticSpec::default()
    };
    let data = common::synthetic_split(&spec);
    let mut cfg = ExperimentConfig {
        model: common::tiny_model(2, 8, &[1]),
        ..Default::default()
    };
    cfg.train.epochs = epochs;
    cfg.train.top_k = top_k;
    cfg.train.batch_size = 4;
    cfg.train.warmup_steps = 10;
    cfg.train.seed = 42;
    cfg.train.augment.spec_augment = Some(aphasr::corpus::SpecAugmentConfig {
        time_masks: 1,
        time_width: 2,
        freq_masks: 1,
        freq_width: 1,
    });
    (data, cfg)
}

#[test]
fn single_epoch_with_k1_keeps_that_checkpoint() {
    let (data, cfg) = tiny_training(1, 1);
    let out = train(&data.train, &data.valid, &cfg, data.vocab.clone()).unwrap();
    assert_eq!(out.selected_epochs, [1]);
    assert_eq!(
        encode_checkpoint(&out.model.params),
        encode_checkpoint(&out.last_epoch)
    );
    assert_eq!(out.log.len(), 1);
}

#[test]
fn training_is_reproducible_across_runs_and_thread_counts() {
    let (data, cfg) = tiny_training(3, 2);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| train(&data.train, &data.valid, &cfg, data.vocab.clone()).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(
        encode_checkpoint(&a.model.params),
        encode_checkpoint(&b.model.params)
    );
    assert_eq!(a.log, b.log);
    assert_eq!(a.selected_epochs.len(), 2);
    assert!(a.log.iter().all(|l| l.loss.l_total.is_finite()));
}

#[test]
fn saved_model_loads_back_identically() {
    let model = small_model(2, &[1], 5);
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();
    let back = AsrModel::load(&dir.path().join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(back.config, model.config);
    assert_eq!(back.vocab, model.vocab);
    assert_eq!(back.feature_dim(), 5);
    assert_eq!(
        encode_checkpoint(&back.params),
        encode_checkpoint(&model.params)
    );
}
