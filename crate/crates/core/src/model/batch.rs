use crate::dataset::TrainingExample;
use crate::error::{Error, Result};
use crate::tokenize::{TokenId, BOS, EOS, LANG_E, LANG_F, SEP};

use super::layers::Span;

/// Encoder input for one example: `in_f SEP in_e` with positions restarting
/// at SEP and per-segment language tags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedInput {
    pub ids: Vec<TokenId>,
    pub positions: Vec<usize>,
    /// `LANG_F` over the first segment, `LANG_E` over SEP and the second.
    pub lang_tags: Vec<TokenId>,
}

pub fn encode_input(in_f: &[TokenId], in_e: &[TokenId], max_len: usize) -> Result<EncodedInput> {
    let n = in_f.len() + 1 + in_e.len();
    if n > max_len {
        return Err(Error::SequenceTooLong { len: n, max: max_len });
    }
    let mut ids = Vec::with_capacity(n);
    ids.extend_from_slice(in_f);
    ids.push(SEP);
    ids.extend_from_slice(in_e);
    let positions = (0..in_f.len()).chain(0..=in_e.len()).collect();
    let mut lang_tags = vec![LANG_F; in_f.len()];
    lang_tags.resize(n, LANG_E);
    Ok(EncodedInput {
        ids,
        positions,
        lang_tags,
    })
}

/// Flat, unpadded batch of examples under teacher forcing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Batch {
    pub enc_ids: Vec<TokenId>,
    pub enc_pos: Vec<usize>,
    /// 0 for the source language, 1 for the target language.
    pub enc_lang: Vec<usize>,
    pub enc_spans: Vec<Span>,
    pub dec_ids: Vec<TokenId>,
    pub dec_pos: Vec<usize>,
    pub dec_spans: Vec<Span>,
    pub targets: Vec<TokenId>,
    /// Per example.
    pub weights: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.enc_spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.enc_spans.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.enc_ids.len() + self.dec_ids.len()
    }

    pub(crate) fn push_encoder(&mut self, enc: &EncodedInput) {
        self.enc_spans.push((self.enc_ids.len(), enc.ids.len()));
        self.enc_ids.extend_from_slice(&enc.ids);
        self.enc_pos.extend_from_slice(&enc.positions);
        self.enc_lang
            .extend(enc.lang_tags.iter().map(|&t| usize::from(t == LANG_E)));
    }

    /// Decoder input `BOS target`, output `target EOS`.
    pub fn from_examples<'a, I>(examples: I, max_len: usize) -> Result<Batch>
    where
        I: IntoIterator<Item = &'a TrainingExample>,
    {
        let mut b = Batch::default();
        for ex in examples {
            let enc = encode_input(&ex.in_f, &ex.in_e, max_len)?;
            if ex.target_len() > max_len {
                return Err(Error::SequenceTooLong {
                    len: ex.target_len(),
                    max: max_len,
                });
            }
            b.push_encoder(&enc);
            b.dec_spans.push((b.dec_ids.len(), ex.target.len() + 1));
            b.dec_ids.push(BOS);
            b.dec_ids.extend_from_slice(&ex.target);
            b.dec_pos.extend(0..=ex.target.len());
            b.targets.extend_from_slice(&ex.target);
            b.targets.push(EOS);
            b.weights.push(ex.weight as f64);
        }
        Ok(b)
    }

    /// Per-token weights aligned with `targets`.
    pub(crate) fn token_weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.targets.len());
        for (&(_, l), &x) in self.dec_spans.iter().zip(&self.weights) {
            w.extend(std::iter::repeat_n(x, l));
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::MASK;

    #[test]
    fn positions_restart_after_sep() {
        let e = encode_input(&[10, 11, 12], &[20, 21], 128).unwrap();
        assert_eq!(e.positions, vec![0, 1, 2, 0, 1, 2]);
        assert_eq!(e.ids[3], SEP);
        assert_eq!(e.lang_tags, vec![LANG_F, LANG_F, LANG_F, LANG_E, LANG_E, LANG_E]);
    }

    #[test]
    fn masked_segment_keeps_its_tag() {
        let e = encode_input(&[MASK], &[20, 21], 128).unwrap();
        assert_eq!(e.ids[0], MASK);
        assert_eq!(e.lang_tags[0], LANG_F);
        let e = encode_input(&[10], &[MASK], 128).unwrap();
        assert_eq!(e.ids[2], MASK);
        assert_eq!(e.lang_tags[2], LANG_E);
    }

    #[test]
    fn positions_depend_only_on_lengths() {
        let a = encode_input(&[10, 11], &[20, 21, 22], 128).unwrap();
        let b = encode_input(&[30, 31], &[40, 41, 42], 128).unwrap();
        assert_ne!(a.ids, b.ids);
        assert_eq!(a.positions, b.positions);
    }

    #[test]
    fn too_long_input_is_rejected() {
        assert!(matches!(
            encode_input(&[9; 5], &[9; 5], 10),
            Err(Error::SequenceTooLong { len: 11, max: 10 })
        ));
    }
}
