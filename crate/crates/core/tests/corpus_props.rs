mod common;

use std::collections::{BTreeMap, BTreeSet};

use aphasr::corpus::*;
use proptest::prelude::*;
use rand::Rng;

fn record(speaker: &str, idx: usize, severity: SeverityLevel, duration_s: f64) -> UtteranceRecord {
    let aphasia = severity != SeverityLevel::Control;
    UtteranceRecord {
        utt_id: format!("{speaker}-{idx:03}"),
        speaker_id: speaker.to_string(),
        tokens: vec!["w".into()],
        duration_s,
        aphasia,
        aq: aphasia.then_some(50.0),
        severity,
        feature_path: None,
    }
}

/// `n` speakers per listed stratum, `utts` utterances each.
fn corpus(strata: &[(SeverityLevel, usize)], utts: usize) -> Vec<UtteranceRecord> {
    let mut out = Vec::new();
    for &(sev, n) in strata {
        for s in 0..n {
            let spk = format!("{}-{s:04}", sev.as_str());
            for u in 0..utts {
                out.push(record(&spk, u, sev, 1.0));
            }
        }
    }
    out
}

fn speakers(records: &[UtteranceRecord]) -> BTreeSet<String> {
    records.iter().map(|r| r.speaker_id.clone()).collect()
}

fn per_stratum(records: &[UtteranceRecord]) -> BTreeMap<SeverityLevel, usize> {
    let mut seen = BTreeSet::new();
    let mut out = BTreeMap::new();
    for r in records {
        if seen.insert(&r.speaker_id) {
            *out.entry(r.severity).or_default() += 1;
        }
    }
    out
}

#[test]
fn hundred_speakers_per_stratum_split_56_19_25() {
    let strata: Vec<_> = SeverityLevel::ALL.iter().map(|&s| (s, 100)).collect();
    let split = stratified_split(&corpus(&strata, 2), &SplitSpec::default()).unwrap();
    for (part, want) in [(&split.train, 56), (&split.valid, 19), (&split.test, 25)] {
        let counts = per_stratum(part);
        for s in SeverityLevel::ALL {
            assert_eq!(counts[&s], want, "{s}");
        }
    }
}

#[test]
fn single_speaker_goes_to_train() {
    let split = stratified_split(
        &corpus(&[(SeverityLevel::Mild, 1)], 3),
        &SplitSpec::default(),
    )
    .unwrap();
    assert_eq!(split.train.len(), 3);
    assert!(split.valid.is_empty() && split.test.is_empty());
}

#[test]
fn no_speaker_crosses_splits_in_a_large_random_instance() {
    let mut rng = common::rng(99);
    let mut records = Vec::new();
    for s in 0..200 {
        let sev = SeverityLevel::ALL[rng.random_range(0..5)];
        let spk = format!("spk{s:03}");
        for u in 0..rng.random_range(1..6) {
            records.push(record(&spk, u, sev, 2.0));
        }
    }
    let split =
        stratified_split(&records, &SplitSpec::new([0.56, 0.19, 0.25], 3).unwrap()).unwrap();
    let (a, b, c) = (
        speakers(&split.train),
        speakers(&split.valid),
        speakers(&split.test),
    );
    assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
    assert_eq!(a.len() + b.len() + c.len(), 200);
    assert_eq!(
        split.train.len() + split.valid.len() + split.test.len(),
        records.len()
    );
    for part in [&split.train, &split.valid, &split.test] {
        for r in part.iter() {
            let original: Vec<_> = records
                .iter()
                .filter(|o| o.speaker_id == r.speaker_id)
                .collect();
            assert!(original.iter().all(|o| part.contains(o)));
        }
    }
}

proptest! {
    #[test]
    fn split_is_deterministic_and_ratio_error_bounded(
        counts in prop::collection::vec(0usize..40, 5),
        seed in any::<u64>(),
        w in prop::collection::vec(0.05f64..1.0, 3),
    ) {
        let total: f64 = w.iter().sum();
        let mut ratios = [w[0] / total, w[1] / total, 0.0];
        ratios[2] = 1.0 - ratios[0] - ratios[1];
        let strata: Vec<_> = SeverityLevel::ALL.iter().cloned().zip(counts.iter().cloned()).collect();
        let records = corpus(&strata, 2);
        let spec = SplitSpec::new(ratios, seed).unwrap();
        let a = stratified_split(&records, &spec).unwrap();
        let b = stratified_split(&records, &spec).unwrap();
        prop_assert_eq!(&a, &b);
        for (i, part) in [&a.train, &a.valid, &a.test].into_iter().enumerate() {
            let got = per_stratum(part);
            for &(sev, n) in &strata {
                let assigned = *got.get(&sev).unwrap_or(&0) as f64;
                prop_assert!((assigned - ratios[i] * n as f64).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn feature_files_round_trip_bit_exactly(
        frames in 1usize..20,
        dims in 1usize..8,
        seed in any::<u64>(),
    ) {
        let f = common::random_features(&mut common::rng(seed), frames, dims);
        let back = FeatureMatrix::from_bytes(&f.to_bytes()).unwrap();
        prop_assert_eq!(back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            f.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(back, f);
    }

    #[test]
    fn augmentation_preserves_dims(
        frames in 1usize..60,
        dims in 1usize..10,
        ratio in prop::sample::select(vec![0.9, 1.0, 1.1]),
        seed in any::<u64>(),
    ) {
        let f = common::random_features(&mut common::rng(seed), frames, dims);
        let sped = speed_perturb(&f, ratio);
        prop_assert_eq!(sped.dims(), dims);
        prop_assert_eq!(sped.frames(), ((frames as f64 / ratio).round() as usize).max(1));
        let cfg = SpecAugmentConfig { time_masks: 2, time_width: 5, freq_masks: 2, freq_width: 3 };
        let masked = spec_augment(&f, &cfg, &mut common::rng(seed ^ 1));
        prop_assert_eq!((masked.frames(), masked.dims()), (frames, dims));
        let changed = masked.data().iter().zip(f.data()).filter(|(a, b)| a != b).count();
        let bound = cfg.time_masks * cfg.time_width * dims + cfg.freq_masks * cfg.freq_width * frames;
        prop_assert!(changed <= bound);
    }
}

#[test]
fn duration_filter_drops_exactly_the_out_of_range_fixtures() {
    let durations = [0.1, 0.29, 0.3, 0.31, 5.0, 29.99, 30.0, 30.01, 45.0];
    let records: Vec<_> = durations
        .iter()
        .enumerate()
        .map(|(i, &d)| record("s", i, SeverityLevel::Mild, d))
        .collect();
    let kept: Vec<f64> = filter_duration(records)
        .iter()
        .map(|r| r.duration_s)
        .collect();
    assert_eq!(kept, [0.3, 0.31, 5.0, 29.99, 30.0]);
}

/// Decodes by matching each `frames_per_token` block to the closest
/// template after removing either class bias.
fn nearest_template(world: &SyntheticWorld, f: &FeatureMatrix) -> Vec<usize> {
    let spec = &world.spec;
    let block = spec.frames_per_token * spec.feature_dim;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for bias in &world.class_bias {
        let mut tokens = Vec::new();
        let mut cost = 0.0;
        for chunk in f.data().chunks(block) {
            let (k, c) = world
                .templates
                .iter()
                .enumerate()
                .map(|(k, tpl)| {
                    let c: f64 = chunk
                        .iter()
                        .zip(tpl)
                        .enumerate()
                        .map(|(i, (x, t))| {
                            let d = (*x - t - bias[i % spec.feature_dim]) as f64;
                            d * d
                        })
                        .sum();
                    (k, c)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            tokens.push(k);
            cost += c;
        }
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, tokens));
        }
    }
    best.unwrap().1
}

#[test]
fn noise_free_synthetic_data_is_decodable_by_template_matching() {
    let spec = SyntheticSpec {
        noise_sigma: 0.0,
        speakers_per_class: 4,
        utterances_per_speaker: 5,
        ..SyntheticSpec::default()
    };
    let world = SyntheticWorld::new(&spec).unwrap();
    let data = generate_synthetic(&spec).unwrap();
    assert_eq!(data.len(), 40);
    for u in &data {
        assert_eq!(
            u.features.frames(),
            u.token_ids.len() * spec.frames_per_token
        );
        assert_eq!(nearest_template(&world, &u.features), u.token_ids);
        let names: Vec<String> = u.token_ids.iter().map(|&i| token_name(i)).collect();
        assert_eq!(names, u.record.tokens);
    }
}

#[test]
fn class_bias_is_the_only_difference_between_classes() {
    let spec = SyntheticSpec {
        noise_sigma: 0.0,
        ..SyntheticSpec::default()
    };
    let world = SyntheticWorld::new(&spec).unwrap();
    let tokens = [3, 1, 4];
    let a = world.render(&tokens, true);
    let c = world.render(&tokens, false);
    for (i, (x, y)) in a.iter().zip(&c).enumerate() {
        let d = i % spec.feature_dim;
        let expected = world.class_bias[1][d] - world.class_bias[0][d];
        assert!(((x - y) - expected).abs() < 1e-6);
    }
}

#[test]
fn synthetic_generation_is_reproducible_and_filter_clean() {
    let spec = SyntheticSpec {
        speakers_per_class: 3,
        utterances_per_speaker: 4,
        ..SyntheticSpec::default()
    };
    let a = generate_synthetic(&spec).unwrap();
    let b = generate_synthetic(&spec).unwrap();
    assert_eq!(a, b);
    let records: Vec<_> = a.iter().map(|u| u.record.clone()).collect();
    check_speaker_consistency(&records).unwrap();
    assert_eq!(filter_duration(records.clone()).len(), records.len());
}
