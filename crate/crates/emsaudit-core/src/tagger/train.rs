//! Mini-batch Adam training with dev-loss early stopping.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Hyperparams, TaggerModel, Vocabulary};
use crate::entities::Tag;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

/// One training example: tokens with their gold IOB2 tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrainError {
    EmptyTrainingSet,
    EmptyDevSet,
    LengthMismatch { tokens: usize, tags: usize },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::EmptyTrainingSet => f.write_str("empty training set"),
            TrainError::EmptyDevSet => f.write_str("empty dev set"),
            TrainError::LengthMismatch { tokens, tags } => {
                write!(f, "sentence has {tokens} tokens but {tags} tags")
            }
        }
    }
}

/// Per-epoch losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

#[derive(Debug)]
pub struct TrainedTagger {
    pub model: TaggerModel,
    pub log: TrainingLog,
}

/// Token ids paired with tag ids for one sentence.
type EncodedSentence = (Vec<usize>, Vec<usize>);

fn encode_set(
    model: &TaggerModel,
    set: &[TaggedSentence],
) -> Result<Vec<EncodedSentence>, TrainError> {
    let mut out = Vec::with_capacity(set.len());
    for s in set {
        if s.tokens.len() != s.tags.len() {
            return Err(TrainError::LengthMismatch {
                tokens: s.tokens.len(),
                tags: s.tags.len(),
            });
        }
        if s.tokens.is_empty() {
            continue;
        }
        let ids = model.token_ids(&s.tokens);
        let tag_ids = s.tags.iter().map(|t| t.id()).collect();
        out.push((ids, tag_ids));
    }
    Ok(out)
}

/// Train a fresh model, evaluating dev loss with the real NLL.
///
/// Stops when the dev loss has not strictly decreased for `patience`
/// consecutive epochs (or at `max_epochs`) and returns the parameters from
/// the best-dev-loss epoch.
pub fn train(
    train_set: &[TaggedSentence],
    dev_set: &[TaggedSentence],
    hp: &Hyperparams,
    observer: &mut dyn FnMut(&EpochStats),
) -> Result<TrainedTagger, TrainError> {
    let mut dev_encoded: Option<Vec<EncodedSentence>> = None;
    train_with_eval(
        train_set,
        hp,
        |model, _epoch| {
            let encoded = dev_encoded.get_or_insert_with(|| {
                encode_set(model, dev_set).expect("dev set validated before first epoch")
            });
            let total: f64 = encoded
                .iter()
                .map(|(ids, tags)| {
                    model
                        .nll_loss(ids, tags)
                        .expect("dev sentences are non-empty and in range")
                })
                .sum();
            total / encoded.len() as f64
        },
        observer,
        Some(dev_set),
    )
}

/// Training loop with an injectable dev evaluation hook.
///
/// `dev_eval` is called once per epoch with the current model; its return
/// value drives early stopping. `dev_set_check`, when given, is validated
/// up front so the real path rejects an empty dev set.
pub fn train_with_eval(
    train_set: &[TaggedSentence],
    hp: &Hyperparams,
    mut dev_eval: impl FnMut(&TaggerModel, usize) -> f64,
    observer: &mut dyn FnMut(&EpochStats),
    dev_set_check: Option<&[TaggedSentence]>,
) -> Result<TrainedTagger, TrainError> {
    let vocab = Vocabulary::build(
        train_set.iter().map(|s| s.tokens.as_slice()),
        hp.min_token_count,
    );
    let mut model = TaggerModel::new(vocab, hp.embed_dim, hp.hidden_dim, hp.seed);

    let train_encoded = encode_set(&model, train_set)?;
    if train_encoded.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    if let Some(dev) = dev_set_check {
        if encode_set(&model, dev)?.is_empty() {
            return Err(TrainError::EmptyDevSet);
        }
    }

    let n_params = model.param_count();
    let mut adam_m = alloc::vec![0.0; n_params];
    let mut adam_v = alloc::vec![0.0; n_params];
    let mut adam_step = 0u64;
    let mut grad = alloc::vec![0.0; n_params];

    // Separate stream from the init RNG so shuffles stay stable if the
    // parameter count changes.
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(hp.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..train_encoded.len()).collect();

    let batch_size = hp.batch_size.max(1);
    let mut log = TrainingLog {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best_params: Vec<f64> = model.params().to_vec();
    let mut best_dev = f64::INFINITY;
    let mut epochs_without_improvement = 0usize;

    for epoch in 1..=hp.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let (ids, tags) = &train_encoded[i];
                batch_loss += model
                    .accumulate_loss_and_grad(ids, tags, &mut grad)
                    .expect("training sentences are non-empty and in range");
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            adam_step += 1;
            let bc1 = 1.0 - libm::pow(ADAM_BETA1, adam_step as f64);
            let bc2 = 1.0 - libm::pow(ADAM_BETA2, adam_step as f64);
            let lr = hp.learning_rate;
            let params = model.params_mut();
            for idx in 0..n_params {
                let g = grad[idx] * scale;
                if g == 0.0 && adam_m[idx] == 0.0 && adam_v[idx] == 0.0 {
                    continue;
                }
                adam_m[idx] = ADAM_BETA1 * adam_m[idx] + (1.0 - ADAM_BETA1) * g;
                adam_v[idx] = ADAM_BETA2 * adam_v[idx] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = adam_m[idx] / bc1;
                let v_hat = adam_v[idx] / bc2;
                params[idx] -= lr * m_hat / (libm::sqrt(v_hat) + ADAM_EPSILON);
            }
        }
        let train_loss = epoch_loss / train_encoded.len() as f64;
        let dev_loss = dev_eval(&model, epoch);
        let stats = EpochStats {
            epoch,
            train_loss,
            dev_loss,
        };
        log.epochs.push(stats);
        observer(&stats);

        if dev_loss < best_dev {
            best_dev = dev_loss;
            best_params = model.params().to_vec();
            log.best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= hp.patience {
                log.stopped_early = true;
                break;
            }
        }
    }

    model.params_mut().copy_from_slice(&best_params);
    Ok(TrainedTagger { model, log })
}
