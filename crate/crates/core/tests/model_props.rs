use bitext_core::dataset::{DatasetSplit, Task, TrainingExample};
use bitext_core::model::{
    checkpoint_bytes, encode_input, perplexity, read_checkpoint, train, Batch, CheckpointMeta, Dropper, EditorModel,
    ModelConfig,
};
use bitext_core::tokenize::{LANG_E, LANG_F, MASK};
use proptest::prelude::*;

fn config() -> ModelConfig {
    ModelConfig {
        dim: 16,
        ffn_dim: 32,
        heads: 2,
        layers: 1,
        dropout: 0.1,
        label_smoothing: 0.0,
        max_epochs: 3,
        warmup_updates: 4,
        max_tokens_per_batch: 40,
        max_len: 32,
        ..ModelConfig::default()
    }
}

fn examples() -> Vec<TrainingExample> {
    (0..12u32)
        .map(|i| {
            let a = 7 + i % 9;
            let b = 7 + (i * 5) % 9;
            if i % 3 == 0 {
                TrainingExample {
                    pair: i as usize,
                    task: Task::Mt,
                    in_f: vec![a, b],
                    in_e: vec![MASK],
                    target: vec![LANG_E, b, a],
                    weight: 2,
                }
            } else {
                TrainingExample {
                    pair: i as usize,
                    task: Task::Edit,
                    in_f: vec![a, b, a],
                    in_e: vec![b, b],
                    target: vec![LANG_F, a, b],
                    weight: 1,
                }
            }
        })
        .collect()
}

proptest! {
    #[test]
    fn positions_restart_after_the_separator(f in 1usize..20, e in 1usize..20) {
        let in_f: Vec<u32> = (0..f as u32).map(|i| 7 + i).collect();
        let in_e: Vec<u32> = (0..e as u32).map(|i| 30 + i).collect();
        let enc = encode_input(&in_f, &in_e, 64).unwrap();
        let expect: Vec<usize> = (0..f).chain(0..=e).collect();
        prop_assert_eq!(enc.positions, expect);
    }
}

#[test]
fn training_twice_gives_identical_checkpoints() {
    let split = DatasetSplit {
        train: examples(),
        dev: examples()[..3].to_vec(),
    };
    let run = || {
        let mut m = EditorModel::<f32>::new(config(), 20).unwrap();
        let out = train(&mut m, &split, &mut |_| {}).unwrap();
        let meta = CheckpointMeta {
            epoch: out.best_epoch,
            dev_ppl: out.best_dev_ppl,
        };
        checkpoint_bytes(&m, meta).unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    let (m, _) = read_checkpoint(&a).unwrap();
    assert_eq!(checkpoint_bytes(&m, read_checkpoint(&a).unwrap().1).unwrap(), a);
}

#[test]
fn perplexity_is_exp_of_unsmoothed_nll() {
    let m = EditorModel::<f64>::new(config(), 20).unwrap();
    let exs = examples();
    let b = Batch::from_examples(&exs, 32).unwrap();
    let (stats, _) = m.loss_and_grads(&b, &mut Dropper::eval()).unwrap();
    let ppl = perplexity(&m, &exs).unwrap();
    assert!((ppl - stats.nll.exp()).abs() < 1e-9 * ppl, "{ppl} vs {}", stats.nll.exp());
}
