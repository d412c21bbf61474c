//! Juliet-style paired corpora: ingestion, labels, JSON-lines I/O and
//! deterministic stratified splitting.
//!
//! A raw tree holds, per sample, one disassembly listing and one C/C++ source
//! file sharing a stem such as `CWE190_Integer_Overflow__int_add_01.bad`. The
//! stem is the sample id; the CWE number and the good/bad variant are read
//! from it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("`{0}` has no CWE<digits>_ prefix")]
    MalformedName(String),
    #[error("`{0}` matches neither or both variant markers")]
    AmbiguousVariant(String),
    #[error("no asm/source pairs matched under {0}")]
    EmptyCorpus(String),
    #[error("duplicate sample id `{id}` ({first} and {second})")]
    DuplicateId { id: String, first: String, second: String },
    #[error("stratum `{stratum}` has {size} member(s); at least 2 are required")]
    StratumTooSmall { stratum: String, size: usize },
    #[error("test fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("manifest does not assign a split to `{0}`")]
    UnpinnedId(String),
    #[error("CWE id must be positive")]
    ZeroCwe,
    #[error("line {line}: {message}")]
    Jsonl { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.display().to_string(), source }
}

/// MITRE CWE number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct CweId(u32);

impl CweId {
    pub fn new(value: u32) -> Result<Self, CorpusError> {
        if value == 0 {
            return Err(CorpusError::ZeroCwe);
        }
        Ok(Self(value))
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for CweId {
    type Error = CorpusError;
    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<CweId> for u32 {
    fn from(id: CweId) -> u32 {
        id.0
    }
}

impl fmt::Display for CweId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CWE{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Non-vulnerable.
    Good,
    /// Vulnerable to the target CWE.
    Bad,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Good => "good",
            Variant::Bad => "bad",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionPair {
    pub id: String,
    pub cwe: CweId,
    pub variant: Variant,
    pub asm_raw: String,
    pub src_raw: String,
    pub asm_norm: Option<String>,
    pub src_norm: Option<String>,
    #[serde(skip)]
    pub asm_token_len: Option<usize>,
    #[serde(skip)]
    pub src_token_len: Option<usize>,
}

impl FunctionPair {
    pub fn new(id: impl Into<String>, cwe: CweId, variant: Variant, asm_raw: String, src_raw: String) -> Self {
        Self {
            id: id.into(),
            cwe,
            variant,
            asm_raw,
            src_raw,
            asm_norm: None,
            src_norm: None,
            asm_token_len: None,
            src_token_len: None,
        }
    }
}

/// Free-text metadata about where a corpus came from. Never serialized into
/// the JSON-lines file, so corpus bytes stay reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub ingested_at_unix: u64,
    pub toolkit_version: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub pairs: Vec<FunctionPair>,
    pub provenance: Provenance,
}

impl Corpus {
    pub fn new(pairs: Vec<FunctionPair>) -> Self {
        Self { pairs, provenance: Provenance::default() }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn ids(&self) -> BTreeSet<&str> {
        self.pairs.iter().map(|p| p.id.as_str()).collect()
    }

    /// Keeps the provenance, replaces the pairs.
    pub fn with_pairs(&self, pairs: Vec<FunctionPair>) -> Self {
        Self { pairs, provenance: self.provenance.clone() }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for pair in &self.pairs {
            out.push_str(&serde_json::to_string(pair).expect("pair serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, CorpusError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let pair: FunctionPair = serde_json::from_str(line)
                .map_err(|e| CorpusError::Jsonl { line: i + 1, message: e.to_string() })?;
            pairs.push(pair);
        }
        Ok(Self::new(pairs))
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, CorpusError> {
        let file = fs::File::open(path).map_err(io_err(path))?;
        let mut text = String::new();
        for line in BufReader::new(file).lines() {
            text.push_str(&line.map_err(io_err(path))?);
            text.push('\n');
        }
        let mut corpus = Self::from_jsonl(&text)?;
        corpus.provenance.source = path.display().to_string();
        Ok(corpus)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        let mut file = fs::File::create(path).map_err(io_err(path))?;
        file.write_all(self.to_jsonl().as_bytes()).map_err(io_err(path))
    }
}

/// Filename substrings that mark the two variants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantMarkers {
    pub good: String,
    pub bad: String,
}

impl Default for VariantMarkers {
    fn default() -> Self {
        Self { good: ".good.".into(), bad: ".bad.".into() }
    }
}

fn cwe_prefix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"CWE(\d+)_").unwrap())
}

pub fn parse_case_label(filename: &str) -> Result<(CweId, Variant), CorpusError> {
    parse_case_label_with(filename, &VariantMarkers::default())
}

pub fn parse_case_label_with(filename: &str, markers: &VariantMarkers) -> Result<(CweId, Variant), CorpusError> {
    let base = Path::new(filename)
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| filename.to_string());
    let caps = cwe_prefix()
        .captures(&base)
        .ok_or_else(|| CorpusError::MalformedName(base.clone()))?;
    let number: u32 = caps[1].parse().map_err(|_| CorpusError::MalformedName(base.clone()))?;
    let cwe = CweId::new(number).map_err(|_| CorpusError::MalformedName(base.clone()))?;
    // Markers are matched against the name with a trailing dot so that a
    // bare stem (`X.bad`) and a full filename (`X.bad.c`) behave alike.
    let probe = format!("{base}.");
    let good = probe.contains(&markers.good);
    let bad = probe.contains(&markers.bad);
    match (good, bad) {
        (true, false) => Ok((cwe, Variant::Good)),
        (false, true) => Ok((cwe, Variant::Bad)),
        _ => Err(CorpusError::AmbiguousVariant(base)),
    }
}

/// Layout of a raw ingestion tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub asm_extensions: Vec<String>,
    pub src_extensions: Vec<String>,
    pub markers: VariantMarkers,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            asm_extensions: vec!["asm".into(), "objdump".into()],
            src_extensions: vec!["c".into(), "cpp".into(), "cc".into()],
            markers: VariantMarkers::default(),
        }
    }
}

/// Something ingestion noticed but did not treat as fatal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestWarning {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Optional file pinning sample ids (and optionally their split).
///
/// JSON: `{"entries": [{"id": "...", "split": "train"}, ...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default)]
    pub split: Option<Split>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| CorpusError::Jsonl { line: e.line(), message: e.to_string() })
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.entries.iter().find(|e| e.id == id).and_then(|e| e.split)
    }
}

pub fn ingest_pairs(root: &Path, manifest: Option<&Manifest>) -> Result<Ingested, CorpusError> {
    ingest_pairs_with(root, manifest, &IngestOptions::default())
}

pub fn ingest_pairs_with(root: &Path, manifest: Option<&Manifest>, opts: &IngestOptions) -> Result<Ingested, CorpusError> {
    #[derive(Default)]
    struct Slot {
        asm: Option<PathBuf>,
        src: Option<PathBuf>,
    }

    let mut slots: BTreeMap<String, Slot> = BTreeMap::new();
    let mut warnings = Vec::new();

    let mut files: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: root.display().to_string(),
            source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk failed")),
        })?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }

    for path in files {
        let (Some(stem), Some(ext)) = (path.file_stem(), path.extension()) else {
            continue;
        };
        let stem = stem.to_string_lossy().into_owned();
        let ext = ext.to_string_lossy().to_ascii_lowercase();
        let is_asm = opts.asm_extensions.contains(&ext);
        let is_src = opts.src_extensions.contains(&ext);
        if !is_asm && !is_src {
            continue;
        }
        let slot = slots.entry(stem.clone()).or_default();
        let target = if is_asm { &mut slot.asm } else { &mut slot.src };
        if let Some(first) = target {
            return Err(CorpusError::DuplicateId {
                id: stem,
                first: first.display().to_string(),
                second: path.display().to_string(),
            });
        }
        *target = Some(path);
    }

    let pinned: Option<BTreeSet<&str>> = manifest.map(|m| m.entries.iter().map(|e| e.id.as_str()).collect());
    let mut pairs = Vec::new();
    for (stem, slot) in &slots {
        if let Some(pinned) = &pinned {
            if !pinned.contains(stem.as_str()) {
                continue;
            }
        }
        match (&slot.asm, &slot.src) {
            (Some(asm), Some(src)) => {
                let (cwe, variant) = match parse_case_label_with(stem, &opts.markers) {
                    Ok(label) => label,
                    Err(e) => {
                        warnings.push(IngestWarning { path: src.display().to_string(), reason: e.to_string() });
                        continue;
                    }
                };
                let asm_raw = fs::read_to_string(asm).map_err(io_err(asm))?;
                let src_raw = fs::read_to_string(src).map_err(io_err(src))?;
                if asm_raw.trim().is_empty() || src_raw.trim().is_empty() {
                    warnings.push(IngestWarning { path: stem.clone(), reason: "empty asm or source file".into() });
                    continue;
                }
                pairs.push(FunctionPair::new(stem.clone(), cwe, variant, asm_raw, src_raw));
            }
            (Some(orphan), None) | (None, Some(orphan)) => warnings.push(IngestWarning {
                path: orphan.display().to_string(),
                reason: "no matching counterpart file".into(),
            }),
            (None, None) => {}
        }
    }
    if let Some(manifest) = manifest {
        for entry in &manifest.entries {
            if !slots.contains_key(&entry.id) {
                warnings.push(IngestWarning { path: entry.id.clone(), reason: "listed in manifest but not found".into() });
            }
        }
    }

    if pairs.is_empty() {
        return Err(CorpusError::EmptyCorpus(root.display().to_string()));
    }
    let provenance = Provenance {
        source: root.display().to_string(),
        ingested_at_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(Ingested { corpus: Corpus { pairs, provenance }, warnings })
}

/// What a stratified split groups samples by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratifyKey {
    Variant,
    Cwe,
    CweAndVariant,
}

impl StratifyKey {
    pub fn key_of(self, pair: &FunctionPair) -> String {
        match self {
            StratifyKey::Variant => pair.variant.to_string(),
            StratifyKey::Cwe => pair.cwe.value().to_string(),
            StratifyKey::CweAndVariant => format!("{}/{}", pair.cwe.value(), pair.variant),
        }
    }
}

impl FromStr for StratifyKey {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "variant" => Ok(Self::Variant),
            "cwe" => Ok(Self::Cwe),
            "cwe_and_variant" | "cwe-and-variant" => Ok(Self::CweAndVariant),
            other => Err(format!("unknown stratification key `{other}`")),
        }
    }
}

/// Per-stratum test counts by largest remainder.
///
/// The total is `round(fraction * n)`; each stratum first gets the floor of
/// its quota and the leftover units go to the largest fractional remainders
/// (ties: earlier stratum in key order).
pub fn largest_remainder_counts(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let target = (fraction * total as f64).round() as usize;
    let quotas: Vec<f64> = sizes.iter().map(|&n| fraction * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut leftover = target.saturating_sub(assigned);
    for &i in order.iter().cycle().take(order.len() * 2) {
        if leftover == 0 {
            break;
        }
        if counts[i] < sizes[i] {
            counts[i] += 1;
            leftover -= 1;
        }
    }
    counts
}

/// Splits by an arbitrary stratum key. Both outputs keep input order.
pub fn stratified_split_by<F>(corpus: &Corpus, test_fraction: f64, seed: u64, key: F) -> Result<(Corpus, Corpus), CorpusError>
where
    F: Fn(&FunctionPair) -> String,
{
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::BadFraction(test_fraction));
    }
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, pair) in corpus.pairs.iter().enumerate() {
        strata.entry(key(pair)).or_default().push(i);
    }
    for (name, members) in &strata {
        if members.len() < 2 {
            return Err(CorpusError::StratumTooSmall { stratum: name.clone(), size: members.len() });
        }
    }
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let counts = largest_remainder_counts(&sizes, test_fraction);

    let mut in_test = vec![false; corpus.len()];
    for (stratum_index, (members, count)) in strata.values().zip(counts).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (stratum_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for &i in &shuffled[..count] {
            in_test[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (pair, is_test) in corpus.pairs.iter().zip(in_test) {
        if is_test { test.push(pair.clone()) } else { train.push(pair.clone()) }
    }
    Ok((corpus.with_pairs(train), corpus.with_pairs(test)))
}

pub fn stratified_split(corpus: &Corpus, test_fraction: f64, key: StratifyKey, seed: u64) -> Result<(Corpus, Corpus), CorpusError> {
    stratified_split_by(corpus, test_fraction, seed, |p| key.key_of(p))
}

/// Reproduces a published split. Every corpus id must be pinned.
pub fn split_from_manifest(corpus: &Corpus, manifest: &Manifest) -> Result<(Corpus, Corpus), CorpusError> {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for pair in &corpus.pairs {
        match manifest.split_of(&pair.id) {
            Some(Split::Train) => train.push(pair.clone()),
            Some(Split::Test) => test.push(pair.clone()),
            None => return Err(CorpusError::UnpinnedId(pair.id.clone())),
        }
    }
    Ok((corpus.with_pairs(train), corpus.with_pairs(test)))
}

/// Keeps one variant of a Juliet source file by evaluating its
/// `OMITGOOD`/`OMITBAD` conditional blocks.
///
/// Blocks guarded by `#ifndef OMITBAD` are bad-only, `#ifndef OMITGOOD`
/// good-only; `#ifdef`/`#if defined` forms are handled too. Any other
/// conditional passes through untouched. The directive lines of evaluated
/// blocks are removed.
pub fn filter_variant(text: &str, keep: Variant) -> String {
    #[derive(Clone, Copy)]
    enum Frame {
        // Conditional we do not evaluate; keep its directive lines.
        Foreign,
        // Evaluated conditional: whether the current branch is live.
        Eval { live: bool },
    }

    fn macro_defined(name: &str, keep: Variant) -> Option<bool> {
        match name {
            "OMITBAD" => Some(keep == Variant::Good),
            "OMITGOOD" => Some(keep == Variant::Bad),
            _ => None,
        }
    }

    let mut out = String::new();
    let mut stack: Vec<Frame> = Vec::new();
    for line in text.split_inclusive('\n') {
        let live = stack.iter().all(|f| !matches!(f, Frame::Eval { live: false }));
        let trimmed = line.trim_start();
        if let Some(directive) = trimmed.strip_prefix('#') {
            let mut words = directive.split_whitespace();
            let head = words.next().unwrap_or("");
            let rest: String = words.collect::<Vec<_>>().join(" ");
            let negated = rest.starts_with('!');
            let name = rest
                .trim_start_matches('!')
                .trim_start_matches("defined")
                .trim_matches(|c: char| c == '(' || c == ')' || c.is_whitespace());
            match head {
                "ifndef" | "ifdef" | "if" => {
                    let eval = match head {
                        "ifndef" => macro_defined(name, keep).map(|d| !d),
                        "ifdef" => macro_defined(name, keep),
                        _ if rest.contains("defined") && !rest.contains("&&") && !rest.contains("||") => {
                            macro_defined(name, keep).map(|d| d != negated)
                        }
                        _ => None,
                    };
                    match eval {
                        Some(value) => stack.push(Frame::Eval { live: value }),
                        None => {
                            stack.push(Frame::Foreign);
                            if live {
                                out.push_str(line);
                            }
                        }
                    }
                    continue;
                }
                "else" => {
                    match stack.last_mut() {
                        Some(Frame::Eval { live: l }) => *l = !*l,
                        _ => {
                            if live {
                                out.push_str(line);
                            }
                        }
                    }
                    continue;
                }
                "endif" => {
                    match stack.pop() {
                        Some(Frame::Eval { .. }) => {}
                        _ => {
                            if live {
                                out.push_str(line);
                            }
                        }
                    }
                    continue;
                }
                _ => {}
            }
        }
        if live {
            out.push_str(line);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, cwe: u32, variant: Variant) -> FunctionPair {
        FunctionPair::new(id, CweId::new(cwe).unwrap(), variant, "nop".into(), "void f(){}".into())
    }

    #[test]
    fn labels_from_juliet_names() {
        assert_eq!(
            parse_case_label("CWE190_Integer_Overflow__int_fgets_add_01.bad.c").unwrap(),
            (CweId::new(190).unwrap(), Variant::Bad)
        );
        assert_eq!(
            parse_case_label("CWE78_OS_Command_Injection__char_console_execl_02.good.c").unwrap(),
            (CweId::new(78).unwrap(), Variant::Good)
        );
        assert!(matches!(parse_case_label("main_helper.c"), Err(CorpusError::MalformedName(_))));
        assert!(matches!(parse_case_label("CWE78_x_01.c"), Err(CorpusError::AmbiguousVariant(_))));
        assert!(matches!(parse_case_label("CWE78_x.good.bad.c"), Err(CorpusError::AmbiguousVariant(_))));
        // first CWE number wins
        assert_eq!(parse_case_label("CWE121_a_CWE129_b.bad").unwrap().0.value(), 121);
    }

    #[test]
    fn cwe_zero_rejected() {
        assert!(CweId::new(0).is_err());
        assert!(serde_json::from_str::<CweId>("0").is_err());
    }

    #[test]
    fn jsonl_field_order_is_fixed() {
        let mut p = pair("CWE1_a.bad", 1, Variant::Bad);
        p.asm_norm = Some("x".into());
        p.asm_token_len = Some(3);
        let line = serde_json::to_string(&p).unwrap();
        assert_eq!(
            line,
            r#"{"id":"CWE1_a.bad","cwe":1,"variant":"bad","asm_raw":"nop","src_raw":"void f(){}","asm_norm":"x","src_norm":null}"#
        );
        let back = Corpus::from_jsonl(&format!("{line}\n")).unwrap();
        assert_eq!(back.pairs[0].asm_norm.as_deref(), Some("x"));
        assert_eq!(back.pairs[0].asm_token_len, None);
    }

    #[test]
    fn largest_remainder_single_stratum() {
        // 10 * 0.25 = 2.5, rounded half away from zero.
        assert_eq!(largest_remainder_counts(&[10], 0.25), vec![3]);
        assert_eq!(largest_remainder_counts(&[50, 50], 0.2), vec![10, 10]);
        // quotas 1.5, 1.5, 1.0 -> total round(4.0)=4 -> first remainder wins
        assert_eq!(largest_remainder_counts(&[3, 3, 2], 0.5), vec![2, 1, 1]);
    }

    #[test]
    fn split_exact_by_variant() {
        let pairs: Vec<_> = (0..100)
            .map(|i| pair(&format!("CWE190_x_{i:03}"), 190, if i % 2 == 0 { Variant::Good } else { Variant::Bad }))
            .collect();
        let corpus = Corpus::new(pairs);
        let (train, test) = stratified_split(&corpus, 0.2, StratifyKey::Variant, 7).unwrap();
        assert_eq!(test.pairs.iter().filter(|p| p.variant == Variant::Good).count(), 10);
        assert_eq!(test.pairs.iter().filter(|p| p.variant == Variant::Bad).count(), 10);
        assert_eq!(train.len(), 80);
        let again = stratified_split(&corpus, 0.2, StratifyKey::Variant, 7).unwrap();
        assert_eq!(again.1.to_jsonl(), test.to_jsonl());
    }

    #[test]
    fn split_rejects_singleton_stratum() {
        let corpus = Corpus::new(vec![pair("a", 1, Variant::Good), pair("b", 1, Variant::Bad), pair("c", 1, Variant::Bad)]);
        match stratified_split(&corpus, 0.5, StratifyKey::Variant, 0) {
            Err(CorpusError::StratumTooSmall { stratum, size }) => {
                assert_eq!(stratum, "good");
                assert_eq!(size, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            stratified_split(&corpus, 1.0, StratifyKey::Variant, 0),
            Err(CorpusError::BadFraction(_))
        ));
    }

    #[test]
    fn manifest_split() {
        let corpus = Corpus::new(vec![pair("a", 1, Variant::Good), pair("b", 1, Variant::Bad)]);
        let manifest = Manifest {
            entries: vec![
                ManifestEntry { id: "a".into(), split: Some(Split::Test) },
                ManifestEntry { id: "b".into(), split: Some(Split::Train) },
            ],
        };
        let (train, test) = split_from_manifest(&corpus, &manifest).unwrap();
        assert_eq!(train.pairs[0].id, "b");
        assert_eq!(test.pairs[0].id, "a");
        let partial = Manifest { entries: vec![ManifestEntry { id: "a".into(), split: None }] };
        assert!(matches!(split_from_manifest(&corpus, &partial), Err(CorpusError::UnpinnedId(_))));
    }

    #[test]
    fn variant_filter() {
        let src = "#include <stdio.h>\n#ifndef OMITBAD\nvoid bad(){}\n#endif\n#ifndef OMITGOOD\nvoid good(){}\n#else\nint x;\n#endif\n#ifdef DEBUG\nint dbg;\n#endif\n";
        assert_eq!(
            filter_variant(src, Variant::Bad),
            "#include <stdio.h>\nvoid bad(){}\nint x;\n#ifdef DEBUG\nint dbg;\n#endif\n"
        );
        assert_eq!(
            filter_variant(src, Variant::Good),
            "#include <stdio.h>\nvoid good(){}\n#ifdef DEBUG\nint dbg;\n#endif\n"
        );
    }
}
