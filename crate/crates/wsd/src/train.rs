//! Training orchestration: epochs, regularization scheduling, σᵢ
//! maintenance, early stopping, ablation modes, and evaluation.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{AblationMode, TrainConfig};
use crate::data::checkpoint::TrainedModel;
use crate::data::glove::GloveTable;
use crate::data::score::{score, EvaluationReport, GoldLabels};
use crate::data::vocab::{build_vocab_and_inventory, encode_eval, encode_train};
use crate::data::{preprocess, EncodedInstance, Instance};
use crate::error::{Result, WsdError};
use crate::model::{backward, forward_with_masks, init_params, loss, sample_masks, Gradients};
use crate::numeric::Rng;
use crate::optim::OptimizerState;

// rng stream ids, fixed so unrelated draws never interleave
const STREAM_INIT: u64 = 10;
const STREAM_EPOCH_SHUFFLE: u64 = 11;
const STREAM_MASKS: u64 = 12;
const STREAM_DEV_SPLIT: u64 = 13;
const STREAM_CONTEXT_SHUFFLE: u64 = 14;
const STREAM_EVAL_SHUFFLE: u64 = 15;

/// One line of the training log.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LogRecord {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_f1: Option<f64>,
    pub lr: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub log: Vec<LogRecord>,
    /// Set when training aborted on a numerical failure; the model is the
    /// last good checkpoint.
    pub diverged: Option<String>,
}

pub fn write_log(path: &Path, log: &[LogRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for rec in log {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn preprocess_instance(inst: &Instance) -> Instance {
    let (tokens, target) = preprocess(&inst.tokens, inst.target_position);
    Instance { tokens, target_position: target, ..inst.clone() }
}

/// Permutes the context around the target, leaving the target in place.
fn shuffle_context(enc: &EncodedInstance, rng: &mut Rng) -> EncodedInstance {
    let mut context: Vec<usize> = enc
        .token_ids
        .iter()
        .enumerate()
        .filter(|(pos, _)| *pos != enc.target_position)
        .map(|(_, &id)| id)
        .collect();
    rng.shuffle(&mut context);
    let mut ids = Vec::with_capacity(enc.token_ids.len());
    let mut it = context.into_iter();
    for pos in 0..enc.token_ids.len() {
        if pos == enc.target_position {
            ids.push(enc.token_ids[pos]);
        } else {
            ids.push(it.next().unwrap());
        }
    }
    EncodedInstance { token_ids: ids, ..enc.clone() }
}

/// 10% per-lemma stratified holdout (lemmas with fewer than two instances
/// stay entirely in training). Returns (train indices, dev indices).
fn stratified_split(instances: &[Instance], rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
    let mut by_lemma: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        by_lemma.entry(&inst.lemma).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut dev = Vec::new();
    for (_, mut idxs) in by_lemma {
        if idxs.len() < 2 {
            train.extend(idxs);
            continue;
        }
        rng.shuffle(&mut idxs);
        let n_dev = (idxs.len() / 10).max(1);
        dev.extend(idxs.drain(..n_dev));
        train.extend(idxs);
    }
    train.sort_unstable();
    dev.sort_unstable();
    (train, dev)
}

struct Presentation {
    enc: EncodedInstance,
    masks: crate::model::RegMasks,
    gold: usize,
}

fn batch_gradients(
    model: &TrainedModel,
    batch: &[Presentation],
    threads: usize,
) -> Result<(Gradients, f64)> {
    let compute = |p: &Presentation| -> Result<(Gradients, f64)> {
        let trace = forward_with_masks(&model.params, &p.enc, Some(p.masks.clone()))?;
        let (l, _) = loss(&trace, p.gold);
        let g = backward(&model.params, &trace, p.gold)?;
        Ok((g, l))
    };

    let per_instance: Vec<Result<(Gradients, f64)>> = if threads > 1 && batch.len() > 1 {
        std::thread::scope(|scope| {
            let chunk = batch.len().div_ceil(threads);
            let handles: Vec<_> = batch
                .chunks(chunk)
                .map(|slice| scope.spawn(move || slice.iter().map(compute).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
        })
    } else {
        batch.iter().map(compute).collect()
    };

    // summed in fixed instance order for determinism
    let mut total = Gradients::zeros(&model.params);
    let mut total_loss = 0.0;
    for item in per_instance {
        let (g, l) = item?;
        total.add_scaled(1.0, &g);
        total_loss += l;
    }
    Ok((total, total_loss))
}

/// Full training protocol: per instance dropword/noise/dropout → forward →
/// backward → momentum SGD step → σᵢ refresh; per epoch learning-rate decay
/// and dev evaluation with early stopping. Returns the best-dev checkpoint
/// (the final model when no dev set is used).
pub fn train(
    train_set: &[Instance],
    dev_set: &[Instance],
    config: &TrainConfig,
    mode: AblationMode,
    pretrained: Option<&GloveTable>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(WsdError::Data("empty training set".into()));
    }

    let mut reg = config.reg.clone();
    if mode == AblationMode::NoDropword {
        reg.p_dropword = 0.0;
    }
    let pretrained = if mode == AblationMode::NoPretrained { None } else { pretrained };

    let preprocessed: Vec<Instance> = train_set.iter().map(preprocess_instance).collect();
    let (vocab, inventory) = build_vocab_and_inventory(&preprocessed)?;

    let root = Rng::from_seed(config.seed);
    let mut shuffle_rng = root.split(STREAM_EPOCH_SHUFFLE);
    let mut mask_rng = root.split(STREAM_MASKS);
    let mut ctx_rng = root.split(STREAM_CONTEXT_SHUFFLE);

    // explicit dev set wins; otherwise hold out 10% per lemma when early
    // stopping is requested
    let (train_encoded, dev_instances): (Vec<EncodedInstance>, Vec<Instance>) = if !dev_set.is_empty() {
        let enc = preprocessed
            .iter()
            .map(|i| encode_train(i, &vocab, &inventory))
            .collect::<Result<Vec<_>>>()?;
        (enc, dev_set.iter().map(preprocess_instance).collect())
    } else if config.patience > 0 {
        let mut split_rng = root.split(STREAM_DEV_SPLIT);
        let (train_idx, dev_idx) = stratified_split(&preprocessed, &mut split_rng);
        let enc = train_idx
            .iter()
            .map(|&i| encode_train(&preprocessed[i], &vocab, &inventory))
            .collect::<Result<Vec<_>>>()?;
        (enc, dev_idx.iter().map(|&i| preprocessed[i].clone()).collect())
    } else {
        let enc = preprocessed
            .iter()
            .map(|i| encode_train(i, &vocab, &inventory))
            .collect::<Result<Vec<_>>>()?;
        (enc, Vec::new())
    };

    let mut init_rng = root.split(STREAM_INIT);
    let params = init_params(&vocab, &inventory, config, &mut init_rng, pretrained)?;
    let mut model = TrainedModel { params, vocab, inventory, config: config.clone() };

    let mut optimizer = OptimizerState::new(
        &model.params,
        config.learning_rate,
        config.momentum,
        config.lr_decay,
    );

    let mut log = Vec::new();
    let mut best: Option<(f64, TrainedModel)> = None;
    let mut epochs_since_best = 0usize;
    let mut diverged = None;

    'epochs: for epoch in 1..=config.max_epochs {
        let mut order: Vec<usize> = (0..train_encoded.len()).collect();
        shuffle_rng.shuffle(&mut order);

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            // masks are sampled sequentially so thread count never affects draws
            let batch: Vec<Presentation> = chunk
                .iter()
                .map(|&i| {
                    let base = &train_encoded[i];
                    let enc = if mode == AblationMode::ShuffledContext {
                        shuffle_context(base, &mut ctx_rng)
                    } else {
                        base.clone()
                    };
                    let sigma = optimizer.sigma();
                    let masks = sample_masks(
                        &enc,
                        model.params.embed_dim,
                        model.params.hidden,
                        model.params.hidden_layer,
                        &reg,
                        &sigma,
                        model.vocab.dropped_id(),
                        &mut mask_rng,
                    );
                    let gold = base.gold_sense_index.expect("training instance has gold");
                    Presentation { enc, masks, gold }
                })
                .collect();

            let (grads, batch_loss) = batch_gradients(&model, &batch, config.threads)?;
            epoch_loss += batch_loss;
            if let Err(e) = optimizer.sgd_step(&mut model.params, &grads) {
                diverged = Some(e.to_string());
                break 'epochs;
            }
        }
        assert_eq!(
            optimizer.sigma_updates, optimizer.step_count,
            "sigma must be refreshed after every optimizer step"
        );

        let dev_f1 = if dev_instances.is_empty() {
            None
        } else {
            let mut eval_rng = root.split(STREAM_EVAL_SHUFFLE + epoch as u64);
            let (report, _) = evaluate(&model, &dev_instances, mode, &mut eval_rng);
            Some(report.f1)
        };

        log.push(LogRecord {
            epoch,
            train_loss: epoch_loss,
            dev_f1,
            lr: optimizer.learning_rate,
        });
        optimizer.decay_lr();

        if let Some(f1) = dev_f1 {
            let improved = best.as_ref().map(|(b, _)| f1 > *b).unwrap_or(true);
            if improved {
                best = Some((f1, model.clone()));
                epochs_since_best = 0;
            } else {
                epochs_since_best += 1;
                if config.patience > 0 && epochs_since_best >= config.patience {
                    break;
                }
            }
        }
    }

    let final_model = match best {
        Some((_, m)) => m,
        None => model,
    };
    Ok(TrainOutcome { model: final_model, log, diverged })
}

/// Predicts every test instance and scores against the instances' gold
/// labels. Instances are preprocessed and encoded with eval-time unknown
/// mapping; under the shuffled-context ablation the contexts are permuted
/// here too. Lemmas without a trained head fall back to the most frequent
/// training sense when the inventory knows the lemma, and are skipped
/// (unattempted) otherwise.
pub fn evaluate(
    model: &TrainedModel,
    test: &[Instance],
    mode: AblationMode,
    rng: &mut Rng,
) -> (EvaluationReport, BTreeMap<String, (String, String)>) {
    let mut predictions: BTreeMap<String, String> = BTreeMap::new();
    let mut answers: BTreeMap<String, (String, String)> = BTreeMap::new();
    let mut gold: GoldLabels = BTreeMap::new();

    for inst in test {
        let pp = preprocess_instance(inst);
        if !pp.gold.is_empty() {
            gold.insert(pp.id.clone(), (pp.lemma.clone(), pp.gold.clone()));
        }
        let mut enc = encode_eval(&pp, &model.vocab);
        if mode == AblationMode::ShuffledContext {
            enc = shuffle_context(&enc, rng);
        }
        let sense = match crate::model::predict(&model.params, &enc) {
            Ok((idx, _)) => model.inventory.senses(&pp.lemma).map(|s| s[idx].clone()),
            Err(WsdError::UnknownLemma(_)) => {
                model.inventory.most_frequent_sense(&pp.lemma).map(|s| s.to_string())
            }
            Err(_) => None,
        };
        if let Some(sense) = sense {
            predictions.insert(pp.id.clone(), sense.clone());
            answers.insert(pp.id.clone(), (pp.lemma.clone(), sense));
        }
    }
    (score(&predictions, &gold), answers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Vector;
    use crate::reg::RegConfig;
    use std::collections::HashMap;

    fn word(i: usize) -> String {
        format!("word{i}")
    }

    /// Unit-scale embeddings for every corpus token. With the default tiny
    /// uniform initialization the forward signal is vanishingly small and toy
    /// tasks train impractically slowly; pretrained-magnitude vectors are the
    /// realistic regime.
    fn synthetic_embeddings(corpus: &[Instance], dim: usize, seed: u64) -> GloveTable {
        let mut rng = Rng::from_seed(seed);
        let mut vectors = HashMap::new();
        for inst in corpus {
            for tok in &inst.tokens {
                vectors.entry(tok.clone()).or_insert_with(|| {
                    Vector::from((0..dim).map(|_| rng.gaussian(0.0, 1.0)).collect::<Vec<_>>())
                });
            }
        }
        GloveTable::from_vectors(dim, vectors)
    }

    /// Toy corpus: sense fully determined by a cue word in the context.
    fn toy_corpus(lemmas: usize, per_lemma: usize, seed: u64) -> Vec<Instance> {
        let mut rng = Rng::from_seed(seed);
        let mut out = Vec::new();
        for l in 0..lemmas {
            for k in 0..per_lemma {
                let sense = k % 2;
                let cue = format!("cue_{l}_{sense}");
                let filler1 = word(rng.gen_range(30));
                let filler2 = word(rng.gen_range(30));
                out.push(Instance {
                    id: format!("t.{l}.{k}"),
                    lemma: format!("lemma{l}"),
                    tokens: vec![filler1, cue, format!("lemma{l}"), filler2],
                    target_position: 2,
                    gold: vec![format!("sense{sense}")],
                });
            }
        }
        out
    }

    fn fast_config(seed: u64) -> TrainConfig {
        TrainConfig {
            embed_dim: 10,
            hidden: 8,
            hidden_layer: 10,
            reg: RegConfig {
                p_drop_embed: 0.1,
                p_drop_lstm_out: 0.1,
                p_drop_hidden: 0.1,
                p_dropword: 0.0,
                noise_scale: 0.05,
            },
            learning_rate: 0.5,
            max_epochs: 60,
            patience: 0,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn overfits_small_toy_set() {
        let corpus = toy_corpus(2, 6, 3);
        let glove = synthetic_embeddings(&corpus, 10, 99);
        let outcome = train(&corpus, &[], &fast_config(7), AblationMode::Full, Some(&glove)).unwrap();
        assert!(outcome.diverged.is_none());
        let mut rng = Rng::from_seed(0);
        let (report, _) = evaluate(&outcome.model, &corpus, AblationMode::Full, &mut rng);
        assert!(report.f1 >= 0.98, "train accuracy {}", report.f1);
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = toy_corpus(2, 5, 4);
        let mut config = fast_config(11);
        config.max_epochs = 5;
        let a = train(&corpus, &[], &config, AblationMode::Full, None).unwrap();
        let b = train(&corpus, &[], &config, AblationMode::Full, None).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.model.params, b.model.params);
    }

    #[test]
    fn no_dropword_mode_forces_probability_zero() {
        // with dropword at an extreme rate, disabling it must change the run
        let corpus = toy_corpus(1, 6, 5);
        let mut config = fast_config(13);
        config.max_epochs = 3;
        config.reg.p_dropword = 0.9;
        let with = train(&corpus, &[], &config, AblationMode::Full, None).unwrap();
        let without = train(&corpus, &[], &config, AblationMode::NoDropword, None).unwrap();
        assert_ne!(with.model.params, without.model.params);
    }

    #[test]
    fn dev_early_stopping_returns_best_checkpoint() {
        let corpus = toy_corpus(2, 10, 6);
        let mut config = fast_config(17);
        config.max_epochs = 30;
        config.patience = 5;
        let outcome = train(&corpus, &[], &config, AblationMode::Full, None).unwrap();
        // every epoch logged a dev F1
        assert!(outcome.log.iter().all(|r| r.dev_f1.is_some()));
        let best_logged = outcome
            .log
            .iter()
            .filter_map(|r| r.dev_f1)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best_logged >= 0.0);
    }

    #[test]
    fn evaluate_scores_crafted_set() {
        // 4 instances, single-sense lemma: every prediction forced correct
        let corpus: Vec<Instance> = (0..4)
            .map(|i| Instance {
                id: format!("e.{i}"),
                lemma: "only".into(),
                tokens: vec!["a".into(), "only".into(), "b".into()],
                target_position: 1,
                gold: vec!["s0".into()],
            })
            .collect();
        let mut config = fast_config(19);
        config.max_epochs = 1;
        config.patience = 0;
        let outcome = train(&corpus, &[], &config, AblationMode::Full, None).unwrap();
        let mut rng = Rng::from_seed(0);
        let (report, answers) = evaluate(&outcome.model, &corpus, AblationMode::Full, &mut rng);
        assert_eq!(report.f1, 1.0);
        assert_eq!(answers.len(), 4);
    }

    #[test]
    fn shuffled_context_changes_presentations() {
        let enc = EncodedInstance {
            id: "x".into(),
            lemma: "l".into(),
            token_ids: (0..10).collect(),
            target_position: 4,
            gold_sense_index: Some(0),
        };
        let mut rng = Rng::from_seed(8);
        let shuffled = shuffle_context(&enc, &mut rng);
        assert_eq!(shuffled.token_ids[4], 4); // target fixed
        let mut sorted = shuffled.token_ids.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>()); // permutation
        assert_ne!(shuffled.token_ids, enc.token_ids);
    }

    #[test]
    fn stratified_split_is_per_lemma() {
        let corpus = toy_corpus(3, 20, 9);
        let mut rng = Rng::from_seed(1);
        let (train_idx, dev_idx) = stratified_split(&corpus, &mut rng);
        assert_eq!(train_idx.len() + dev_idx.len(), corpus.len());
        assert_eq!(dev_idx.len(), 6); // 10% of 20, per 3 lemmas
        for lemma in ["lemma0", "lemma1", "lemma2"] {
            assert!(dev_idx.iter().any(|&i| corpus[i].lemma == lemma));
        }
    }

    #[test]
    fn trained_model_is_order_sensitive() {
        // contexts that are permutations of each other must be separable
        let mut corpus = Vec::new();
        for k in 0..12 {
            let (order, sense) = if k % 2 == 0 { (("alpha", "beta"), 0) } else { (("beta", "alpha"), 1) };
            corpus.push(Instance {
                id: format!("o.{k}"),
                lemma: "probe".into(),
                tokens: vec![order.0.into(), order.1.into(), "probe".into()],
                target_position: 2,
                gold: vec![format!("s{sense}")],
            });
        }
        let glove = synthetic_embeddings(&corpus, 10, 99);
        let mut config = fast_config(23);
        config.max_epochs = 120;
        let outcome = train(&corpus, &[], &config, AblationMode::Full, Some(&glove)).unwrap();
        let mut rng = Rng::from_seed(0);
        let (report, _) = evaluate(&outcome.model, &corpus, AblationMode::Full, &mut rng);
        assert!(report.f1 >= 0.99, "order task accuracy {}", report.f1);
    }
}
