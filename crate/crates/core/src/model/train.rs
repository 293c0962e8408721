use log::{info, warn};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AugmentConfig, ExperimentConfig};
use super::loss::{compute_loss, teacher_forced_hits, LossBreakdown, Sample};
use super::vocab::Vocabulary;
use super::AsrModel;
use crate::autodiff::{adam_step, average_checkpoints, OptimizerState, ParamStore};
use crate::corpus::{spec_augment, speed_perturb, FeatureMatrix, SeverityLevel, UtteranceRecord};
use crate::error::{Error, Result};

/// An utterance ready for training or evaluation.
#[derive(Debug, Clone)]
pub struct Example {
    pub utt_id: String,
    pub speaker_id: String,
    pub severity: SeverityLevel,
    pub aphasia: bool,
    /// Untagged word ids.
    pub tokens: Vec<usize>,
    pub features: FeatureMatrix,
}

impl Example {
    pub fn from_record(
        record: &UtteranceRecord,
        vocab: &Vocabulary,
        features: FeatureMatrix,
    ) -> Self {
        Self {
            utt_id: record.utt_id.clone(),
            speaker_id: record.speaker_id.clone(),
            severity: record.severity,
            aphasia: record.aphasia,
            tokens: vocab.encode(&record.tokens),
            features,
        }
    }

    pub fn sample(&self) -> Sample<'_> {
        Sample {
            features: &self.features,
            tokens: &self.tokens,
            aphasia: self.aphasia,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub step: u64,
    pub lr: f64,
    /// Mean over the epoch's batches.
    pub loss: LossBreakdown,
    pub grad_norm: f64,
    pub valid_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: AsrModel,
    pub log: Vec<EpochLog>,
    /// Epochs whose checkpoints were averaged, best first.
    pub selected_epochs: Vec<usize>,
    /// Parameters after the final epoch, before averaging.
    pub last_epoch: ParamStore,
}

fn augment(
    f: &FeatureMatrix,
    cfg: &AugmentConfig,
    ratio: f64,
    rng: &mut ChaCha8Rng,
) -> FeatureMatrix {
    let sped = if ratio == 1.0 {
        f.clone()
    } else {
        speed_perturb(f, ratio)
    };
    match &cfg.spec_augment {
        Some(sa) => spec_augment(&sped, sa, rng),
        None => sped,
    }
}

/// Length-bucketed batches in a shuffled order.
fn make_batches(lengths: &[usize], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by_key(|&i| (lengths[i], i));
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    batches.shuffle(rng);
    batches
}

/// Teacher-forced token accuracy of the decoder over `examples`.
pub fn validation_accuracy(model: &AsrModel, examples: &[Example]) -> Result<f64> {
    let counts: Vec<(usize, usize)> = examples
        .par_iter()
        .map(|e| {
            teacher_forced_hits(
                &model.params,
                &model.config.model,
                &model.vocab,
                &e.sample(),
            )
        })
        .collect::<Result<_>>()?;
    let (hit, total) = counts.iter().fold((0, 0), |(h, t), &(a, b)| (h + a, t + b));
    Ok(if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    })
}

fn accumulate(acc: &mut LossBreakdown, bd: &LossBreakdown) {
    acc.l_ctc += bd.l_ctc;
    acc.l_dec += bd.l_dec;
    acc.l_total += bd.l_total;
    acc.infeasible += bd.infeasible;
    if acc.l_inter.len() < bd.l_inter.len() {
        acc.l_inter.resize(bd.l_inter.len(), 0.0);
    }
    for (a, b) in acc.l_inter.iter_mut().zip(&bd.l_inter) {
        *a += b;
    }
    if let Some(m) = bd.l_inter_mean {
        *acc.l_inter_mean.get_or_insert(0.0) += m;
    }
}

fn scale(acc: &mut LossBreakdown, n: f64) {
    acc.l_ctc /= n;
    acc.l_dec /= n;
    acc.l_total /= n;
    acc.l_inter.iter_mut().for_each(|v| *v /= n);
    if let Some(m) = acc.l_inter_mean.as_mut() {
        *m /= n;
    }
}

/// Minibatch Adam over `train_set` for `config.train.epochs` epochs. After
/// every epoch the decoder's teacher-forced accuracy on `valid_set` is
/// measured; the final parameters average the `top_k` best epochs (ties go
/// to the later epoch).
pub fn train(
    train_set: &[Example],
    valid_set: &[Example],
    config: &ExperimentConfig,
    vocab: Vocabulary,
) -> Result<TrainOutcome> {
    config.validate()?;
    let tc = &config.train;
    let feature_dim = train_set
        .first()
        .map(|e| e.features.dims())
        .ok_or(Error::EmptyList("training set"))?;
    if valid_set.is_empty() {
        return Err(Error::EmptyList("validation set"));
    }
    let mut model = AsrModel::new(config.clone(), vocab, feature_dim, tc.seed)?;
    let mut opt = OptimizerState::new(tc.adam(), &model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x7261_696e);
    let mut best: Vec<(f64, usize, ParamStore)> = Vec::new();
    let mut log = Vec::with_capacity(tc.epochs);

    for epoch in 1..=tc.epochs {
        // Augmentation choices are drawn up front so the parallel part is
        // free of shared state.
        let draws: Vec<(f64, u64)> = train_set
            .iter()
            .map(|_| {
                let r = *tc
                    .augment
                    .speed_ratios
                    .choose(&mut rng)
                    .expect("validated non-empty");
                (r, rng.random())
            })
            .collect();
        let features: Vec<FeatureMatrix> = train_set
            .par_iter()
            .zip(&draws)
            .map(|(e, &(ratio, seed))| {
                augment(
                    &e.features,
                    &tc.augment,
                    ratio,
                    &mut ChaCha8Rng::seed_from_u64(seed),
                )
            })
            .collect();
        let lengths: Vec<usize> = features.iter().map(FeatureMatrix::frames).collect();
        let batches = make_batches(&lengths, tc.batch_size, &mut rng);

        let mut epoch_loss = LossBreakdown::default();
        let (mut lr, mut grad_norm) = (0.0, 0.0);
        for batch in &batches {
            let samples: Vec<Sample> = batch
                .iter()
                .map(|&i| Sample {
                    features: &features[i],
                    tokens: &train_set[i].tokens,
                    aphasia: train_set[i].aphasia,
                })
                .collect();
            let diverged = Error::Diverged {
                epoch,
                step: opt.step as usize + 1,
            };
            let (bd, grads) =
                match compute_loss(&model.params, &config.model, &model.vocab, &samples, true) {
                    Err(Error::NaNDetected(what)) => {
                        warn!("non-finite activations in {what}");
                        return Err(diverged);
                    }
                    other => other?,
                };
            if !bd.l_total.is_finite() {
                return Err(diverged);
            }
            let info = adam_step(&mut model.params, &grads.expect("requested"), &mut opt)?;
            lr = info.lr;
            grad_norm = info.grad_norm;
            accumulate(&mut epoch_loss, &bd);
        }
        scale(&mut epoch_loss, batches.len() as f64);
        if epoch_loss.infeasible > 0 {
            warn!(
                "epoch {epoch}: {} utterances had CTC targets longer than their frames",
                epoch_loss.infeasible
            );
        }

        let valid_acc = validation_accuracy(&model, valid_set)?;
        info!(
            "epoch {epoch}: loss {:.4} (ctc {:.4}, dec {:.4}) valid acc {:.4}",
            epoch_loss.l_total, epoch_loss.l_ctc, epoch_loss.l_dec, valid_acc
        );
        log.push(EpochLog {
            epoch,
            step: opt.step,
            lr,
            loss: epoch_loss,
            grad_norm,
            valid_acc,
        });

        best.push((valid_acc, epoch, model.params.clone()));
        best.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
        best.truncate(tc.top_k);
    }

    let selected_epochs = best.iter().map(|b| b.1).collect();
    let stores: Vec<ParamStore> = best.into_iter().map(|b| b.2).collect();
    let last_epoch = std::mem::replace(&mut model.params, average_checkpoints(&stores)?);
    Ok(TrainOutcome {
        model,
        log,
        selected_epochs,
        last_epoch,
    })
}
