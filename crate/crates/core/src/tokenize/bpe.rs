use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const EOW: &str = "</w>";
const CONT: &str = "@@";
const HEADER: &str = "#version: bpe-1";

/// Ordered merge list learned by [`learn_bpe`].
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
}

/// Splits one whitespace word into BPE segments: runs of alphanumeric
/// characters, with every other character standing alone. Merges never cross
/// a segment boundary.
pub fn pretokenize(word: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in word.char_indices() {
        if ch.is_alphanumeric() {
            start.get_or_insert(i);
        } else {
            if let Some(s) = start.take() {
                out.push(&word[s..i]);
            }
            out.push(&word[i..i + ch.len_utf8()]);
        }
    }
    if let Some(s) = start {
        out.push(&word[s..]);
    }
    out
}

fn initial_symbols(segment: &str) -> Vec<String> {
    let mut syms: Vec<String> = segment.chars().map(String::from).collect();
    if let Some(last) = syms.last_mut() {
        last.push_str(EOW);
    }
    syms
}

fn pairs_of(syms: &[String]) -> impl Iterator<Item = (String, String)> + '_ {
    syms.windows(2).map(|w| (w[0].clone(), w[1].clone()))
}

fn merge_in_place(syms: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < syms.len() {
        if syms[i] == left && syms[i + 1] == right {
            let r = syms.remove(i + 1);
            syms[i].push_str(&r);
        }
        i += 1;
    }
}

/// Learns up to `num_merges` merges from the given sentences. Each step merges
/// the most frequent adjacent pair; equal counts go to the lexicographically
/// smallest `(left, right)`. Learning stops early once no pair occurs twice.
pub fn learn_bpe<'a, I>(sentences: I, num_merges: usize) -> Result<BpeModel>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut seg_freq: HashMap<&str, i64> = HashMap::new();
    for s in sentences {
        for w in s.split_whitespace() {
            for seg in pretokenize(w) {
                *seg_freq.entry(seg).or_default() += 1;
            }
        }
    }
    if seg_freq.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut segs: Vec<(&str, i64)> = seg_freq.into_iter().collect();
    segs.sort_unstable();
    let mut words: Vec<Vec<String>> = segs.iter().map(|(s, _)| initial_symbols(s)).collect();
    let freqs: Vec<i64> = segs.iter().map(|&(_, f)| f).collect();

    let mut counts: HashMap<(String, String), i64> = HashMap::new();
    let mut where_: HashMap<(String, String), HashSet<usize>> = HashMap::new();
    for (wi, syms) in words.iter().enumerate() {
        for p in pairs_of(syms) {
            *counts.entry(p.clone()).or_default() += freqs[wi];
            where_.entry(p).or_default().insert(wi);
        }
    }

    let mut model = BpeModel::default();
    while model.merges.len() < num_merges {
        let best = counts
            .iter()
            .filter(|(_, &c)| c >= 2)
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
        let Some((pair, _)) = best else { break };
        let pair = pair.clone();
        let mut affected: Vec<usize> = where_
            .remove(&pair)
            .unwrap_or_default()
            .into_iter()
            .collect();
        affected.sort_unstable();
        for wi in affected {
            let f = freqs[wi];
            for p in pairs_of(&words[wi]) {
                if let Some(c) = counts.get_mut(&p) {
                    *c -= f;
                }
            }
            merge_in_place(&mut words[wi], &pair.0, &pair.1);
            for p in pairs_of(&words[wi]) {
                *counts.entry(p.clone()).or_default() += f;
                where_.entry(p).or_default().insert(wi);
            }
        }
        counts.retain(|_, c| *c > 0);
        model.push(pair);
    }
    Ok(model)
}

impl BpeModel {
    pub fn from_merges(merges: Vec<(String, String)>) -> Result<Self> {
        let mut m = BpeModel::default();
        for pair in merges {
            if m.ranks.contains_key(&pair) {
                return Err(Error::Format {
                    what: "bpe model",
                    detail: format!("duplicate merge {} {}", pair.0, pair.1),
                });
            }
            m.push(pair);
        }
        Ok(m)
    }

    fn push(&mut self, pair: (String, String)) {
        self.ranks.insert(pair.clone(), self.merges.len());
        self.merges.push(pair);
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn num_merges(&self) -> usize {
        self.merges.len()
    }

    fn segment(&self, seg: &str) -> Vec<String> {
        let mut syms = initial_symbols(seg);
        loop {
            let best = syms
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min();
            let Some(&rank) = best else { break };
            let (l, r) = &self.merges[rank];
            merge_in_place(&mut syms, l, r);
        }
        syms
    }

    /// Segments whitespace-separated text into subwords. Every piece except the
    /// last one of a word carries the `@@` continuation marker.
    pub fn apply(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for word in text.split_whitespace() {
            let mut pieces: Vec<String> = Vec::new();
            for seg in pretokenize(word) {
                for mut p in self.segment(seg) {
                    if let Some(stripped) = p.strip_suffix(EOW) {
                        p = stripped.to_string();
                    }
                    pieces.push(p);
                }
            }
            let n = pieces.len();
            for (i, mut p) in pieces.into_iter().enumerate() {
                if i + 1 < n {
                    p.push_str(CONT);
                }
                out.push(p);
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from(HEADER);
        s.push('\n');
        for (l, r) in &self.merges {
            s.push_str(l);
            s.push(' ');
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::Format {
                what: "bpe model",
                detail: format!("missing {HEADER:?} header"),
            });
        }
        let mut merges = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut it = line.split(' ');
            match (it.next(), it.next(), it.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_string(), r.to_string()))
                }
                _ => {
                    return Err(Error::Format {
                        what: "bpe model",
                        detail: format!("bad merge on line {}", i + 2),
                    })
                }
            }
        }
        BpeModel::from_merges(merges)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BpeModel::from_text(&text)
    }
}

/// Joins subwords back into text, removing `@@` continuation markers.
pub fn detok<S: AsRef<str>>(subwords: &[S]) -> String {
    let mut out = String::new();
    for p in subwords {
        let p = p.as_ref();
        match p.strip_suffix(CONT) {
            Some(stem) => out.push_str(stem),
            None => {
                out.push_str(p);
                out.push(' ');
            }
        }
    }
    if out.ends_with(' ') {
        out.pop();
    }
    out
}
