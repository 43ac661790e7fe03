use std::collections::HashSet;

use bitext_core::corpus::{gen_synthetic, Corpus, NoiseSpec, Side};
use bitext_core::dataset::{build_examples, make_split, weighted_mass, BuildOptions, Task};
use bitext_core::mine::{mine_candidates, EmbeddingIndex, HashEmbedder, PairCandidates};
use bitext_core::tokenize::{Tokenizer, LANG_E};
use proptest::prelude::*;

fn setup(n: usize, seed: u64, k: usize) -> (Corpus, Vec<PairCandidates>, Tokenizer) {
    let noise = NoiseSpec {
        p_replace: 0.3,
        p_drop: 0.1,
        seed,
        ..NoiseSpec::zero(seed)
    };
    let (clean, noisy) = gen_synthetic(n, 40, (2, 7), &noise, seed).unwrap();
    let emb = HashEmbedder::toy(64);
    let pools = [&clean, &noisy];
    let s = EmbeddingIndex::from_corpus_side(&pools, Side::Src, &emb).unwrap();
    let t = EmbeddingIndex::from_corpus_side(&pools, Side::Tgt, &emb).unwrap();
    let cands = mine_candidates(&clean, &s, &t, k, &emb).unwrap();
    let tok = Tokenizer::learn(
        pools
            .iter()
            .flat_map(|c| c.side_texts(Side::Src).chain(c.side_texts(Side::Tgt))),
        300,
    )
    .unwrap();
    (clean, cands, tok)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn examples_are_valid_and_targets_reproduce_the_pair(n in 2usize..30, seed in any::<u64>(), k in 1usize..5) {
        let (c, cands, tok) = setup(n, seed, k);
        let (exs, stats) = build_examples(&c, Some(&cands), &tok, &BuildOptions::default()).unwrap();
        prop_assert_eq!(stats.dropped_too_long, 0);
        for e in &exs {
            e.validate(tok.vocab.len()).unwrap();
            if e.task == Task::Edit {
                let side = if e.target[0] == LANG_E { Side::Tgt } else { Side::Src };
                prop_assert_eq!(tok.decode(&e.target[1..]), c.pairs()[e.pair].side(side).text());
            }
        }
    }

    #[test]
    fn split_never_shares_a_pair(n in 3usize..40, seed in any::<u64>(), dev_frac in 0.0f64..0.9) {
        let (c, cands, tok) = setup(n, seed, 2);
        let (exs, _) = build_examples(&c, Some(&cands), &tok, &BuildOptions::default()).unwrap();
        let dev_pairs = (dev_frac * n as f64) as usize;
        let total = exs.len();
        let split = make_split(exs, dev_pairs, seed).unwrap();
        prop_assert_eq!(split.train.len() + split.dev.len(), total);
        let train: HashSet<usize> = split.train.iter().map(|e| e.pair).collect();
        let dev: HashSet<usize> = split.dev.iter().map(|e| e.pair).collect();
        prop_assert!(train.is_disjoint(&dev));
        prop_assert_eq!(dev.len(), dev_pairs);
    }
}

#[test]
fn upweighted_mt_mass_matches_edit_mass() {
    let (c, cands, tok) = setup(1000, 17, 4);
    let (exs, stats) = build_examples(&c, Some(&cands), &tok, &BuildOptions::default()).unwrap();
    let edit = weighted_mass(&exs, Task::Edit) as f64;
    let mt = weighted_mass(&exs, Task::Mt) as f64;
    assert_eq!(edit as usize, stats.edit_examples);
    assert!((mt - edit).abs() <= 1e-3 * edit, "mt {mt} edit {edit}");
}
