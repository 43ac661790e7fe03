use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::Batch;
use super::layers::Dropper;
use super::net::{EditorModel, LossStats};
use super::optim::{Adam, InverseSqrt};
use super::params::Params;
use super::scalar::Scalar;
use crate::dataset::{DatasetSplit, TrainingExample};
use crate::error::{Error, Result};

const SHUFFLE_STREAM: u64 = 0x5eed_0001;
const DROPOUT_STREAM: u64 = 0x5eed_0002;

/// One line of the training log. Contains no timing so logs of equal-seed
/// runs compare equal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub updates: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_nll: f64,
    pub dev_nll: Option<f64>,
    pub dev_ppl: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// 1-based epoch whose parameters the model holds after training.
    pub best_epoch: usize,
    pub best_dev_ppl: Option<f64>,
    pub log: Vec<EpochLog>,
}

/// Groups example indices, in the given order, into batches whose source plus
/// target token count stays within `max_tokens`. An example larger than the
/// budget gets a batch of its own.
pub fn make_batches(examples: &[TrainingExample], order: &[usize], max_tokens: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut tokens = 0;
    for &i in order {
        let n = examples[i].source_len() + examples[i].target_len();
        if !cur.is_empty() && tokens + n > max_tokens {
            out.push(std::mem::take(&mut cur));
            tokens = 0;
        }
        cur.push(i);
        tokens += n;
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Weighted, unsmoothed token-mean NLL of a set of examples.
pub fn evaluate_nll<F: Scalar>(model: &EditorModel<F>, examples: &[TrainingExample]) -> Result<LossStats> {
    let order: Vec<usize> = (0..examples.len()).collect();
    let mut total = LossStats::default();
    for idx in make_batches(examples, &order, model.config.max_tokens_per_batch) {
        let b = Batch::from_examples(idx.iter().map(|&i| &examples[i]), model.config.max_len)?;
        total = total.merge(model.loss(&b, 0.0)?);
    }
    Ok(total)
}

/// Perplexity `exp(mean NLL)` without label smoothing.
pub fn perplexity<F: Scalar>(model: &EditorModel<F>, examples: &[TrainingExample]) -> Result<f64> {
    Ok(evaluate_nll(model, examples)?.perplexity())
}

/// Trains in place and leaves the model holding the parameters of the epoch
/// with the lowest dev perplexity (the last epoch when dev is empty).
pub fn train<F: Scalar>(
    model: &mut EditorModel<F>,
    split: &DatasetSplit,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    if split.train.is_empty() {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    let cfg = model.config.clone();
    let sched = InverseSqrt::from_config(&cfg);
    let mut opt = Adam::new(model.params(), &cfg);
    let mut shuffle = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut dropper = Dropper::train(ChaCha8Rng::seed_from_u64(cfg.seed ^ DROPOUT_STREAM));
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut updates = 0usize;
    let mut log = Vec::new();
    let mut best: Option<(usize, f64, Params<F>)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_stats = LossStats::default();
        let mut lr = sched.at(updates);
        for idx in make_batches(&split.train, &order, cfg.max_tokens_per_batch) {
            let b = Batch::from_examples(idx.iter().map(|&i| &split.train[i]), cfg.max_len)?;
            let (stats, mut grads) = model.loss_and_grads(&b, &mut dropper).map_err(|e| match e {
                Error::NonFiniteLoss { detail, .. } => Error::NonFiniteLoss {
                    update: updates,
                    detail: format!("epoch {epoch}: {detail}"),
                },
                other => other,
            })?;
            let gnorm = grads.sq_norm().sqrt();
            if !gnorm.is_finite() {
                return Err(Error::NonFiniteLoss {
                    update: updates,
                    detail: format!("epoch {epoch}: gradient norm {gnorm}"),
                });
            }
            if cfg.clip_norm > 0.0 && gnorm > cfg.clip_norm {
                grads.scale(F::of(cfg.clip_norm / gnorm));
            }
            lr = sched.at(updates);
            opt.step(model.params_mut(), &grads, lr);
            updates += 1;
            epoch_stats = epoch_stats.merge(stats);
        }
        let dev = if split.dev.is_empty() {
            None
        } else {
            Some(evaluate_nll(model, &split.dev)?)
        };
        let entry = EpochLog {
            epoch,
            updates,
            lr,
            train_loss: epoch_stats.loss,
            train_nll: epoch_stats.nll,
            dev_nll: dev.map(|d| d.nll),
            dev_ppl: dev.map(|d| d.perplexity()),
        };
        on_epoch(&entry);
        log.push(entry);
        match dev {
            Some(d) => {
                let ppl = d.perplexity();
                if best.as_ref().is_none_or(|(_, b, _)| ppl < *b) {
                    best = Some((epoch, ppl, model.params().clone()));
                    since_best = 0;
                } else {
                    since_best += 1;
                }
            }
            None => best = Some((epoch, f64::NAN, model.params().clone())),
        }
        if cfg.patience > 0 && since_best >= cfg.patience {
            break;
        }
    }
    let (best_epoch, best_ppl, params) = best.expect("at least one epoch ran");
    *model.params_mut() = params;
    Ok(TrainOutcome {
        best_epoch,
        best_dev_ppl: (!split.dev.is_empty()).then_some(best_ppl),
        log,
    })
}
