//! Byte-pair encoding and the joint vocabulary consumed by the editor.

mod bpe;
mod vocab;

use std::path::Path;

pub use bpe::{detok, learn_bpe, pretokenize, BpeModel};
pub use vocab::{
    build_vocab, is_lang_id, TokenId, Vocab, BOS, EOS, LANG_E, LANG_F, MASK, NUM_SPECIALS, PAD,
    SEP, SPECIAL_TOKENS, UNK_TOKEN,
};

use crate::error::Result;

pub const BPE_FILE: &str = "bpe.codes";
pub const VOCAB_FILE: &str = "vocab.txt";

/// A BPE model paired with the vocabulary built from it.
#[derive(Clone, Debug, PartialEq)]
pub struct Tokenizer {
    pub bpe: BpeModel,
    pub vocab: Vocab,
}

impl Tokenizer {
    /// Learns a joint BPE model and vocabulary from sentences of both languages.
    pub fn learn<'a, I>(sentences: I, num_merges: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str> + Clone,
    {
        let bpe = learn_bpe(sentences.clone(), num_merges)?;
        let vocab = build_vocab(&bpe, sentences);
        Ok(Tokenizer { bpe, vocab })
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        self.vocab.encode(&self.bpe.apply(text))
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        detok(&self.vocab.decode(ids))
    }

    /// Writes `bpe.codes` and `vocab.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.bpe.save(&dir.join(BPE_FILE))?;
        self.vocab.save(&dir.join(VOCAB_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Tokenizer {
            bpe: BpeModel::load(&dir.join(BPE_FILE))?,
            vocab: Vocab::load(&dir.join(VOCAB_FILE))?,
        })
    }
}
