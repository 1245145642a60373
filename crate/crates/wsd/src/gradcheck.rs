//! End-to-end gradient verification: random tiny models, frozen
//! regularization masks, every analytic coordinate against central finite
//! differences.

use crate::config::TrainConfig;
use crate::data::vocab::{SenseInventory, Vocabulary};
use crate::data::EncodedInstance;
use crate::model::{backward, forward_with_masks, init_params, loss, sample_masks, ModelParams};
use crate::numeric::Rng;
use crate::optim::{finite_difference_gradient, max_gradient_error};
use crate::reg::{compute_sigma, RegConfig};

pub struct GradCheckReport {
    pub configs_run: usize,
    pub max_relative_error: f64,
    pub worst_coordinate: String,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= self.tolerance
    }
}

struct RandomCase {
    params: ModelParams,
    enc: EncodedInstance,
    gold: usize,
}

fn random_case(rng: &mut Rng, with_masks: bool) -> (RandomCase, Option<crate::model::RegMasks>) {
    let embed = 3 + rng.gen_range(4); // 3..=6
    let hidden = 2 + rng.gen_range(4); // 2..=5
    let hidden_layer = 2 + rng.gen_range(4);
    let context_len = 1 + rng.gen_range(8); // 1..=8
    let n_lemmas = 2 + rng.gen_range(2); // 2..=3

    let mut vocab = Vocabulary::new();
    for i in 0..9 {
        vocab.add(&format!("w{i}"));
    }
    let mut inventory = SenseInventory::new();
    for l in 0..n_lemmas {
        let lemma = format!("lemma{l}");
        let senses = 2 + rng.gen_range(3); // 2..=4
        for s in 0..senses {
            inventory.add(&lemma, &format!("s{s}"));
        }
    }

    let config = TrainConfig {
        embed_dim: embed,
        hidden,
        hidden_layer,
        forget_bias_one: false,
        ..TrainConfig::default()
    };
    let params = init_params(&vocab, &inventory, &config, rng, None).unwrap();

    let lemma = format!("lemma{}", rng.gen_range(n_lemmas));
    let n_senses = inventory.senses(&lemma).unwrap().len();
    let token_ids: Vec<usize> = (0..context_len).map(|_| rng.gen_range(vocab.len())).collect();
    let enc = EncodedInstance {
        id: "gc".into(),
        lemma,
        token_ids,
        target_position: rng.gen_range(context_len),
        gold_sense_index: Some(rng.gen_range(n_senses)),
    };
    let gold = enc.gold_sense_index.unwrap();

    let masks = if with_masks {
        // moderate rates so masks exercise both kept and dropped units
        let reg = RegConfig {
            p_drop_embed: 0.3,
            p_drop_lstm_out: 0.3,
            p_drop_hidden: 0.3,
            p_dropword: 0.2,
            noise_scale: 0.2,
        };
        let sigma = compute_sigma(&params.embeddings);
        Some(sample_masks(
            &enc,
            params.embed_dim,
            params.hidden,
            params.hidden_layer,
            &reg,
            &sigma,
            vocab.dropped_id(),
            rng,
        ))
    } else {
        None
    };

    (RandomCase { params, enc, gold }, masks)
}

/// Checks one random configuration; alternates eval-mode passes and passes
/// with frozen training masks. Returns the worst error and its coordinate.
pub fn check_one(seed: u64, with_masks: bool, eps: f64) -> (f64, String) {
    let mut rng = Rng::from_seed(seed);
    let (case, masks) = random_case(&mut rng, with_masks);

    let trace = forward_with_masks(&case.params, &case.enc, masks.clone()).unwrap();
    let analytic = backward(&case.params, &trace, case.gold).unwrap().to_dense(&case.params);

    let enc = case.enc.clone();
    let gold = case.gold;
    let loss_fn = move |p: &ModelParams| -> f64 {
        let t = forward_with_masks(p, &enc, masks.clone()).unwrap();
        loss(&t, gold).0
    };
    let numeric = finite_difference_gradient(&loss_fn, &case.params, eps);
    max_gradient_error(&analytic, &numeric)
}

/// Runs `configs` random checks (half eval-mode, half frozen-mask training
/// mode) and reports the overall worst coordinate.
pub fn run_suite(seed: u64, configs: usize, tolerance: f64) -> GradCheckReport {
    let mut worst = 0.0f64;
    let mut at = String::new();
    for k in 0..configs {
        let (err, coord) = check_one(seed.wrapping_add(k as u64), k % 2 == 1, 1e-5);
        if err > worst {
            worst = err;
            at = format!("config {k}: {coord}");
        }
    }
    GradCheckReport {
        configs_run: configs,
        max_relative_error: worst,
        worst_coordinate: at,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_mode_gradients_match() {
        let (err, at) = check_one(1001, false, 1e-5);
        assert!(err <= 1e-6, "worst {err} at {at}");
    }

    #[test]
    fn frozen_mask_gradients_match() {
        let (err, at) = check_one(2002, true, 1e-5);
        assert!(err <= 1e-6, "worst {err} at {at}");
    }

    #[test]
    fn zero_loss_gradient_is_zero() {
        // y one-hot at gold: saturate a head bias so y ~ [1, 0]; gradients vanish
        use crate::data::vocab::build_vocab_and_inventory;
        use crate::data::Instance;
        use crate::model::{backward, forward_with_masks, zero_params};

        let insts = vec![Instance {
            id: "a".into(),
            lemma: "w".into(),
            tokens: ["a", "w"].iter().map(|s| s.to_string()).collect(),
            target_position: 1,
            gold: vec!["s1".into(), "s2".into()],
        }];
        let (vocab, inv) = build_vocab_and_inventory(&insts).unwrap();
        let config = TrainConfig {
            embed_dim: 2,
            hidden: 2,
            hidden_layer: 2,
            ..TrainConfig::default()
        };
        let mut params = zero_params(&vocab, &inv, &config);
        params.heads.get_mut("w").unwrap().b[0] = 60.0;
        let enc = crate::data::vocab::encode_train(&insts[0], &vocab, &inv).unwrap();
        let trace = forward_with_masks(&params, &enc, None).unwrap();
        let grads = backward(&params, &trace, 0).unwrap();
        for (_, g) in grads.to_dense(&params) {
            for v in g {
                assert!(v.abs() < 1e-12);
            }
        }
    }
}
