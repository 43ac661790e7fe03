//! Shared fixtures for the benchmarks.

use bitext_core::corpus::{gen_synthetic, Corpus, NoiseSpec, Side};
use bitext_core::dataset::{build_examples, BuildOptions, TrainingExample};
use bitext_core::mine::{mine_candidates, EmbeddingIndex, HashEmbedder};
use bitext_core::tokenize::Tokenizer;

pub struct Fixture {
    pub corpus: Corpus,
    pub tokenizer: Tokenizer,
    pub embedder: HashEmbedder,
    pub src_index: EmbeddingIndex,
    pub examples: Vec<TrainingExample>,
}

/// A synthetic corpus of `pairs` pairs with its tokenizer, source index and
/// editing examples (k = 4).
pub fn fixture(pairs: usize) -> Fixture {
    let noise = NoiseSpec {
        p_replace: 0.3,
        ..NoiseSpec::zero(1)
    };
    let (corpus, noisy) = gen_synthetic(pairs, 500, (4, 12), &noise, 1).unwrap();
    let pools = [&corpus, &noisy];
    let texts = pools
        .iter()
        .flat_map(|c| c.side_texts(Side::Src).chain(c.side_texts(Side::Tgt)));
    let tokenizer = Tokenizer::learn(texts, 1000).unwrap();
    let embedder = HashEmbedder::toy(256);
    let src_index = EmbeddingIndex::from_corpus_side(&pools, Side::Src, &embedder).unwrap();
    let tgt_index = EmbeddingIndex::from_corpus_side(&pools, Side::Tgt, &embedder).unwrap();
    let cands = mine_candidates(&corpus, &src_index, &tgt_index, 4, &embedder).unwrap();
    let (examples, _) = build_examples(&corpus, Some(&cands), &tokenizer, &BuildOptions::default()).unwrap();
    Fixture {
        corpus,
        tokenizer,
        embedder,
        src_index,
        examples,
    }
}
