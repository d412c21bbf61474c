//! Whitespace pre-tokenization, byte-pair encoding, and percentile-based
//! length filtering ("toss reduction").

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asmprep::FUNC_BOUNDARY;
use crate::corpus::{Corpus, FunctionPair};

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("BPE training set is empty")]
    EmptyTrainingSet,
    #[error("percentile of an empty list")]
    EmptyInput,
    #[error("percentile {0} outside [0, 100]")]
    BadPercentile(f64),
    #[error("toss reduction dropped every pair")]
    EverythingDropped,
    #[error("pair `{0}` has no normalized text for the selected side")]
    MissingNormalized(String),
    #[error("malformed BPE model: {0}")]
    Malformed(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub fn pretokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Specials {
    pub pad: String,
    pub unk: String,
    pub bos: String,
    pub eos: String,
    pub func: String,
}

impl Default for Specials {
    fn default() -> Self {
        Self {
            pad: "<pad>".into(),
            unk: "<unk>".into(),
            bos: "<s>".into(),
            eos: "</s>".into(),
            func: FUNC_BOUNDARY.into(),
        }
    }
}

impl Specials {
    fn glyphs(&self) -> [&str; 5] {
        [&self.pad, &self.unk, &self.bos, &self.eos, &self.func]
    }
}

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const BOS_ID: usize = 2;
pub const EOS_ID: usize = 3;
pub const FUNC_ID: usize = 4;
const N_SPECIALS: usize = 5;

pub const DEFAULT_EOW: &str = "</w>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    pub ids: Vec<usize>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Ordered merge list plus vocabulary. Ids 0..5 are the specials, then the
/// base characters (each in plain and end-of-word form), then merge results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBpeModel")]
pub struct BpeModel {
    pub merges: Vec<(String, String)>,
    /// Symbol strings indexed by id; serialized as a symbol → id map.
    #[serde(with = "vocab_map")]
    pub vocab: Vec<String>,
    pub specials: Specials,
    pub end_of_word_marker: String,
    #[serde(skip)]
    index: HashMap<String, usize>,
    #[serde(skip)]
    ranks: HashMap<(String, String), usize>,
}

#[derive(Deserialize)]
struct RawBpeModel {
    merges: Vec<(String, String)>,
    #[serde(with = "vocab_map")]
    vocab: Vec<String>,
    specials: Specials,
    end_of_word_marker: String,
}

impl TryFrom<RawBpeModel> for BpeModel {
    type Error = TokenizerError;
    fn try_from(raw: RawBpeModel) -> Result<Self, TokenizerError> {
        let glyphs = raw.specials.glyphs();
        if raw.vocab.len() < N_SPECIALS || raw.vocab[..N_SPECIALS].iter().zip(glyphs).any(|(v, g)| v != g) {
            return Err(TokenizerError::Malformed("specials must occupy the lowest ids".into()));
        }
        let model = Self::from_parts(raw.merges, raw.vocab, raw.specials, raw.end_of_word_marker);
        if model.index.len() != model.vocab.len() {
            return Err(TokenizerError::Malformed("duplicate vocabulary entry".into()));
        }
        Ok(model)
    }
}

impl BpeModel {
    fn from_parts(merges: Vec<(String, String)>, vocab: Vec<String>, specials: Specials, eow: String) -> Self {
        let mut model = Self { merges, vocab, specials, end_of_word_marker: eow, index: HashMap::new(), ranks: HashMap::new() };
        model.rebuild_indices();
        model
    }

    fn rebuild_indices(&mut self) {
        self.index = self.vocab.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        self.ranks = self.merges.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn id_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TokenizerError> {
        serde_json::from_str(text).map_err(|e| TokenizerError::Malformed(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), TokenizerError> {
        fs::write(path, self.to_json()).map_err(|e| TokenizerError::Io { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, TokenizerError> {
        let text = fs::read_to_string(path).map_err(|e| TokenizerError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    /// Initial symbols of a word: one per char, the last carrying the marker.
    fn initial_symbols(&self, word: &str) -> Vec<String> {
        split_word(word, &self.end_of_word_marker)
    }

    /// Subword symbols of one word after applying merges in training order.
    pub fn segment(&self, word: &str) -> Vec<String> {
        if self.specials.glyphs().contains(&word) {
            return vec![word.to_string()];
        }
        let mut symbols = self.initial_symbols(word);
        loop {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| self.ranks.get(&(w[0].clone(), w[1].clone())).map(|&r| (r, i)))
                .min();
            let Some((rank, _)) = best else { break };
            let (left, right) = &self.merges[rank];
            symbols = merge_pair(&symbols, left, right);
        }
        symbols
    }

    pub fn encode<'a, I>(&self, words: I) -> TokenSeq
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut ids = Vec::new();
        for word in words {
            for symbol in self.segment(word) {
                ids.push(self.id_of(&symbol).unwrap_or(UNK_ID));
            }
        }
        TokenSeq { ids }
    }

    pub fn encode_text(&self, text: &str) -> TokenSeq {
        self.encode(pretokenize(text))
    }

    /// Inverse of [`encode`](Self::encode) up to unknown-symbol substitution.
    /// Padding and sequence markers are skipped.
    pub fn decode(&self, seq: &TokenSeq) -> String {
        self.decode_ids(&seq.ids)
    }

    pub fn decode_ids(&self, ids: &[usize]) -> String {
        let mut words: Vec<String> = Vec::new();
        let mut current = String::new();
        for &id in ids {
            match id {
                PAD_ID | BOS_ID | EOS_ID => continue,
                UNK_ID | FUNC_ID => {
                    let glyph = if id == UNK_ID { &self.specials.unk } else { &self.specials.func };
                    if id == FUNC_ID && !current.is_empty() {
                        words.push(std::mem::take(&mut current));
                    }
                    current.push_str(glyph);
                    if id == FUNC_ID {
                        words.push(std::mem::take(&mut current));
                    }
                }
                _ => {
                    let Some(symbol) = self.vocab.get(id) else { continue };
                    match symbol.strip_suffix(self.end_of_word_marker.as_str()) {
                        Some(stem) => {
                            current.push_str(stem);
                            words.push(std::mem::take(&mut current));
                        }
                        None => current.push_str(symbol),
                    }
                }
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
        words.join(" ")
    }
}

mod vocab_map {
    use indexmap::IndexMap;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(vocab: &[String], ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_map(vocab.iter().enumerate().map(|(i, s)| (s, i)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<String>, D::Error> {
        let map = IndexMap::<String, usize>::deserialize(de)?;
        let mut vocab = vec![None; map.len()];
        for (symbol, id) in map {
            let slot = vocab.get_mut(id).ok_or_else(|| D::Error::custom(format!("vocab id {id} is not dense")))?;
            if slot.replace(symbol).is_some() {
                return Err(D::Error::custom(format!("vocab id {id} assigned twice")));
            }
        }
        Ok(vocab.into_iter().map(|s| s.expect("dense ids fill every slot")).collect())
    }
}

fn split_word(word: &str, eow: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    chars
        .iter()
        .enumerate()
        .map(|(i, c)| if i + 1 == chars.len() { format!("{c}{eow}") } else { c.to_string() })
        .collect()
}

fn merge_pair(symbols: &[String], left: &str, right: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

/// Word multiset for training.
pub fn count_words<'a, I>(words: I) -> BTreeMap<String, usize>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts = BTreeMap::new();
    for w in words {
        *counts.entry(w.to_string()).or_insert(0) += 1;
    }
    counts
}

/// Standard BPE: repeatedly merge the most frequent adjacent pair (weighted
/// by word multiplicity); ties go to the lexicographically smallest pair.
/// Stops early once no pair is left.
pub fn bpe_train(words: &BTreeMap<String, usize>, num_merges: usize) -> Result<BpeModel, TokenizerError> {
    let specials = Specials::default();
    let glyphs = specials.glyphs();
    let eow = DEFAULT_EOW.to_string();
    let training: Vec<(Vec<String>, usize)> = words
        .iter()
        .filter(|(w, &c)| c > 0 && !w.is_empty() && !glyphs.contains(&w.as_str()))
        .map(|(w, &c)| (split_word(w, &eow), c))
        .collect();
    if training.is_empty() {
        return Err(TokenizerError::EmptyTrainingSet);
    }

    let mut vocab: Vec<String> = glyphs.iter().map(|s| s.to_string()).collect();
    let mut chars: Vec<char> = words.keys().filter(|w| !glyphs.contains(&w.as_str())).flat_map(|w| w.chars()).collect();
    chars.sort_unstable();
    chars.dedup();
    for c in &chars {
        vocab.push(c.to_string());
        vocab.push(format!("{c}{eow}"));
    }
    let mut known: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();

    let mut corpus = training;
    let mut merges = Vec::new();
    while merges.len() < num_merges {
        let mut counts: HashMap<(&str, &str), usize> = HashMap::new();
        for (symbols, count) in &corpus {
            for pair in symbols.windows(2) {
                *counts.entry((pair[0].as_str(), pair[1].as_str())).or_insert(0) += count;
            }
        }
        let best = counts
            .into_iter()
            .filter(|((l, r), _)| {
                let joined = format!("{l}{r}");
                !glyphs.contains(&joined.as_str())
            })
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
        let Some(((left, right), _)) = best else { break };
        let (left, right) = (left.to_string(), right.to_string());
        for (symbols, _) in corpus.iter_mut() {
            if symbols.len() > 1 {
                *symbols = merge_pair(symbols, &left, &right);
            }
        }
        let joined = format!("{left}{right}");
        if !known.contains_key(&joined) {
            known.insert(joined.clone(), vocab.len());
            vocab.push(joined);
        }
        merges.push((left, right));
    }
    Ok(BpeModel::from_parts(merges, vocab, specials, eow))
}

/// Nearest-rank percentile: the value at 1-based rank `ceil(p/100 * n)` of
/// the sorted list, with `p = 0` giving the minimum.
pub fn length_percentile(lengths: &[usize], p: f64) -> Result<usize, TokenizerError> {
    if lengths.is_empty() {
        return Err(TokenizerError::EmptyInput);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(TokenizerError::BadPercentile(p));
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let rank = ((p * n as f64) / 100.0).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

/// Which side's lengths toss reduction looks at. The source language is the
/// assembly (translation input), the target language the C/C++ code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    SourceLang,
    TargetLang,
    Both,
}

impl std::str::FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "source_lang" | "source-lang" | "asm" => Ok(Self::SourceLang),
            "target_lang" | "target-lang" | "src" => Ok(Self::TargetLang),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub low: usize,
    pub high: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TossReport {
    pub kept: usize,
    pub dropped: usize,
    pub source_bounds: Option<Bounds>,
    pub target_bounds: Option<Bounds>,
}

/// Fills `asm_token_len`/`src_token_len` from the normalized texts.
pub fn annotate_lengths(corpus: &mut Corpus, asm_model: &BpeModel, src_model: &BpeModel) {
    for pair in &mut corpus.pairs {
        pair.asm_token_len = pair.asm_norm.as_deref().map(|t| asm_model.encode_text(t).len());
        pair.src_token_len = pair.src_norm.as_deref().map(|t| src_model.encode_text(t).len());
    }
}

fn side_lengths(pairs: &[FunctionPair], pick: fn(&FunctionPair) -> Option<usize>) -> Result<Vec<usize>, TokenizerError> {
    pairs
        .iter()
        .map(|p| pick(p).ok_or_else(|| TokenizerError::MissingNormalized(p.id.clone())))
        .collect()
}

/// Keeps pairs whose token length lies within the inclusive
/// [low_p, high_p] percentile band on every selected side.
pub fn toss_reduce(corpus: &Corpus, low_p: f64, high_p: f64, side: Side) -> Result<(Corpus, TossReport), TokenizerError> {
    let asm_len = |p: &FunctionPair| p.asm_token_len;
    let src_len = |p: &FunctionPair| p.src_token_len;
    let bounds_for = |pick: fn(&FunctionPair) -> Option<usize>| -> Result<Bounds, TokenizerError> {
        let lengths = side_lengths(&corpus.pairs, pick)?;
        Ok(Bounds { low: length_percentile(&lengths, low_p)?, high: length_percentile(&lengths, high_p)? })
    };
    let source_bounds = matches!(side, Side::SourceLang | Side::Both).then(|| bounds_for(asm_len)).transpose()?;
    let target_bounds = matches!(side, Side::TargetLang | Side::Both).then(|| bounds_for(src_len)).transpose()?;

    let within = |len: Option<usize>, b: Option<Bounds>| match (len, b) {
        (_, None) => true,
        (Some(l), Some(b)) => b.low <= l && l <= b.high,
        (None, Some(_)) => false,
    };
    let kept: Vec<FunctionPair> = corpus
        .pairs
        .iter()
        .filter(|p| within(p.asm_token_len, source_bounds) && within(p.src_token_len, target_bounds))
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(TokenizerError::EverythingDropped);
    }
    let report = TossReport { kept: kept.len(), dropped: corpus.len() - kept.len(), source_bounds, target_bounds };
    Ok((corpus.with_pairs(kept), report))
}
