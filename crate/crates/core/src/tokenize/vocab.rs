use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::bpe::BpeModel;
use crate::error::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const SEP: TokenId = 3;
pub const MASK: TokenId = 4;
pub const LANG_F: TokenId = 5;
pub const LANG_E: TokenId = 6;
pub const NUM_SPECIALS: usize = 7;

pub const SPECIAL_TOKENS: [&str; NUM_SPECIALS] =
    ["<pad>", "<s>", "</s>", "<sep>", "<mask>", "<f>", "<e>"];

/// Appended after every learned subword; pieces missing from the vocabulary map here.
pub const UNK_TOKEN: &str = "<unk>";

pub fn is_lang_id(id: TokenId) -> bool {
    id == LANG_F || id == LANG_E
}

/// Joint subword vocabulary shared by both languages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    id_of: HashMap<String, TokenId>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "vocab",
            detail,
        };
        if tokens.len() < NUM_SPECIALS + 1 {
            return Err(bad("too few entries".into()));
        }
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens[i] != *s {
                return Err(bad(format!("id {i} must be {s}")));
            }
        }
        if tokens.last().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(bad(format!("last id must be {UNK_TOKEN}")));
        }
        let mut id_of = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if id_of.insert(t.clone(), i as TokenId).is_some() {
                return Err(bad(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocab { tokens, id_of })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unk(&self) -> TokenId {
        (self.tokens.len() - 1) as TokenId
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        (id as usize) < NUM_SPECIALS || id == self.unk()
    }

    pub fn encode<S: AsRef<str>>(&self, pieces: &[S]) -> Vec<TokenId> {
        pieces
            .iter()
            .map(|p| self.id(p.as_ref()).unwrap_or(self.unk()))
            .collect()
    }

    /// Maps ids back to subword strings, skipping the fixed specials.
    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .filter(|&&id| (id as usize) >= NUM_SPECIALS)
            .filter_map(|&id| self.token(id).map(str::to_string))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            s.push_str(t);
            s.push('\t');
            s.push_str(&i.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let (tok, id) = line.rsplit_once('\t').ok_or_else(|| Error::Format {
                what: "vocab",
                detail: format!("line {} lacks a tab", i + 1),
            })?;
            if id.parse::<usize>().ok() != Some(i) {
                return Err(Error::Format {
                    what: "vocab",
                    detail: format!("line {} has id {id:?}, expected {i}", i + 1),
                });
            }
            tokens.push(tok.to_string());
        }
        Vocab::from_tokens(tokens)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocab::from_text(&text)
    }
}

/// Builds the joint vocabulary: specials at ids 0..=6, then subwords by
/// descending frequency (ties lexicographic), then `<unk>`.
pub fn build_vocab<'a, I>(model: &BpeModel, sentences: I) -> Vocab
where
    I: IntoIterator<Item = &'a str>,
{
    let mut freq: HashMap<String, u64> = HashMap::new();
    for s in sentences {
        for p in model.apply(s) {
            *freq.entry(p).or_default() += 1;
        }
    }
    let mut types: Vec<(String, u64)> = freq
        .into_iter()
        .filter(|(t, _)| !SPECIAL_TOKENS.contains(&t.as_str()) && t != UNK_TOKEN)
        .collect();
    types.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    tokens.extend(types.into_iter().map(|(t, _)| t));
    tokens.push(UNK_TOKEN.to_string());
    Vocab::from_tokens(tokens).expect("layout is valid by construction")
}
