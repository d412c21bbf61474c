//! Output-similarity metrics for decompiled code and classification metrics
//! for the prediction task. Similarity is measured over whitespace-separated
//! words of the normalized text, never over BPE subwords.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenizer::pretokenize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no pairs to score")]
    EmptyInput,
    #[error("{predicted} predictions for {actual} labels")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("label `{0}` is not in the label set")]
    UnknownLabel(String),
    #[error("bleu needs at least one reference")]
    NoReferences,
}

pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = diag + usize::from(x != y);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

/// `1 - lev / max(|a|, |b|)`; two empty sequences are identical.
pub fn edit_similarity<T: PartialEq>(candidate: &[T], reference: &[T]) -> f64 {
    let longest = candidate.len().max(reference.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(candidate, reference) as f64 / longest as f64
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and candidate n-gram totals for n = 1..=4.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [usize; 4],
    pub totals: [usize; 4],
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl BleuStats {
    pub fn collect<T: Eq + Hash>(candidate: &[T], references: &[&[T]]) -> Result<Self, MetricsError> {
        if references.is_empty() {
            return Err(MetricsError::NoReferences);
        }
        let mut stats = Self { candidate_len: candidate.len(), ..Self::default() };
        for n in 1..=4 {
            let mut max_ref: HashMap<&[T], usize> = HashMap::new();
            for r in references {
                for (gram, c) in ngram_counts(r, n) {
                    let slot = max_ref.entry(gram).or_insert(0);
                    *slot = (*slot).max(c);
                }
            }
            let cand = ngram_counts(candidate, n);
            stats.totals[n - 1] = cand.values().sum();
            stats.matches[n - 1] = cand.iter().map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0))).sum();
        }
        // closest reference length, shorter on ties
        stats.reference_len = references
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| (l.abs_diff(candidate.len()), l))
            .expect("references non-empty");
        Ok(stats)
    }

    fn add(mut self, other: &Self) -> Self {
        for n in 0..4 {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
        self
    }

    /// Geometric mean of the four precisions times the brevity penalty.
    /// Orders n >= 2 with zero matches use `1 / (total + 1)`.
    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 {
            return if self.reference_len == 0 { 1.0 } else { 0.0 };
        }
        if self.matches[0] == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 0..4 {
            let p = if n > 0 && self.matches[n] == 0 {
                1.0 / (self.totals[n] as f64 + 1.0)
            } else {
                self.matches[n] as f64 / self.totals[n] as f64
            };
            log_sum += p.ln();
        }
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        (bp * (log_sum / 4.0).exp()).clamp(0.0, 1.0)
    }
}

pub fn bleu4<T: Eq + Hash>(candidate: &[T], references: &[&[T]]) -> Result<f64, MetricsError> {
    Ok(BleuStats::collect(candidate, references)?.score())
}

/// Corpus BLEU from counts pooled over all pairs.
pub fn bleu4_pooled(stats: &[BleuStats]) -> Result<f64, MetricsError> {
    if stats.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(stats.iter().fold(BleuStats::default(), |acc, s| acc.add(s)).score())
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let keep = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { row[j + 1].max(row[j]) };
            diag = keep;
        }
    }
    row[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeL {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> RougeL {
    match (candidate.is_empty(), reference.is_empty()) {
        (true, true) => return RougeL { precision: 1.0, recall: 1.0, f: 1.0 },
        (true, false) | (false, true) => return RougeL { precision: 0.0, recall: 0.0, f: 0.0 },
        _ => {}
    }
    let lcs = lcs_len(candidate, reference) as f64;
    let precision = lcs / candidate.len() as f64;
    let recall = lcs / reference.len() as f64;
    let f = if lcs == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    RougeL { precision, recall, f }
}

/// Exact-match unigram alignment as (candidate index, reference index)
/// pairs, in candidate order. Each candidate word continues the previous
/// chunk when the next reference position matches, else takes the leftmost
/// unused reference occurrence.
pub fn meteor_alignment<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> Vec<(usize, usize)> {
    let mut positions: HashMap<&T, Vec<usize>> = HashMap::new();
    for (j, t) in reference.iter().enumerate() {
        positions.entry(t).or_default().push(j);
    }
    let mut used = vec![false; reference.len()];
    let mut alignment = Vec::new();
    let mut prev: Option<(usize, usize)> = None;
    for (i, t) in candidate.iter().enumerate() {
        let Some(slots) = positions.get(t) else { continue };
        let next = prev
            .filter(|&(pi, _)| pi + 1 == i)
            .map(|(_, pj)| pj + 1)
            .filter(|&j| j < reference.len() && !used[j] && reference[j] == *t);
        let chosen = next.or_else(|| slots.iter().copied().find(|&j| !used[j]));
        if let Some(j) = chosen {
            used[j] = true;
            alignment.push((i, j));
            prev = Some((i, j));
        }
    }
    alignment
}

pub fn count_chunks(alignment: &[(usize, usize)]) -> usize {
    if alignment.is_empty() {
        return 0;
    }
    1 + alignment.windows(2).filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1)).count()
}

/// Fmean = 10PR / (R + 9P), penalty = 0.5 (chunks / m)^3.
pub fn meteor<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> f64 {
    let alignment = meteor_alignment(candidate, reference);
    let m = alignment.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let p = m / candidate.len() as f64;
    let r = m / reference.len() as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (count_chunks(&alignment) as f64 / m).powi(3);
    f_mean * (1.0 - penalty)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScores {
    pub edit_similarity: f64,
    pub bleu4: f64,
    pub rouge_l_f: f64,
    pub meteor: f64,
}

pub fn similarity<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> SimilarityScores {
    SimilarityScores {
        edit_similarity: edit_similarity(candidate, reference),
        bleu4: bleu4(candidate, &[reference]).expect("one reference"),
        rouge_l_f: rouge_l(candidate, reference).f,
        meteor: meteor(candidate, reference),
    }
}

/// Whitespace-word similarity of two normalized texts.
pub fn text_similarity(candidate: &str, reference: &str) -> SimilarityScores {
    similarity(&pretokenize(candidate), &pretokenize(reference))
}

/// Corpus-level aggregates. BLEU is given both as the mean of per-pair
/// scores and from pooled counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub edit_similarity: f64,
    pub bleu4_mean: f64,
    pub bleu4_pooled: f64,
    pub rouge_l_f: f64,
    pub meteor: f64,
    pub pairs: usize,
}

impl CorpusScores {
    pub fn fields(&self) -> [(&'static str, f64); 5] {
        [
            ("edit_similarity", self.edit_similarity),
            ("bleu4_mean", self.bleu4_mean),
            ("bleu4_pooled", self.bleu4_pooled),
            ("rouge_l_f", self.rouge_l_f),
            ("meteor", self.meteor),
        ]
    }
}

pub fn corpus_scores<S: AsRef<str> + Sync>(pairs: &[(S, S)]) -> Result<CorpusScores, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let per_pair: Vec<(SimilarityScores, BleuStats)> = pairs
        .par_iter()
        .map(|(c, r)| {
            let (c, r) = (pretokenize(c.as_ref()), pretokenize(r.as_ref()));
            (similarity(&c, &r), BleuStats::collect(&c, &[r.as_slice()]).expect("one reference"))
        })
        .collect();
    let n = per_pair.len() as f64;
    let mean = |f: fn(&SimilarityScores) -> f64| per_pair.iter().map(|(s, _)| f(s)).sum::<f64>() / n;
    let stats: Vec<BleuStats> = per_pair.iter().map(|(_, b)| *b).collect();
    Ok(CorpusScores {
        edit_similarity: mean(|s| s.edit_similarity),
        bleu4_mean: mean(|s| s.bleu4),
        bleu4_pooled: bleu4_pooled(&stats)?,
        rouge_l_f: mean(|s| s.rouge_l_f),
        meteor: mean(|s| s.meteor),
        pairs: per_pair.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when precision or recall had a zero denominator.
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub labels: Vec<String>,
    pub per_class: IndexMap<String, ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    /// Rows are actual labels, columns predicted labels, both in `labels` order.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn classification_report<S: AsRef<str>>(predicted: &[S], actual: &[S], labels: &[S]) -> Result<ClassificationReport, MetricsError> {
    if predicted.len() != actual.len() {
        return Err(MetricsError::LengthMismatch { predicted: predicted.len(), actual: actual.len() });
    }
    if actual.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_ref(), i)).collect();
    let lookup = |l: &S| index.get(l.as_ref()).copied().ok_or_else(|| MetricsError::UnknownLabel(l.as_ref().to_string()));
    let k = labels.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (p, a) in predicted.iter().zip(actual) {
        confusion[lookup(a)?][lookup(p)?] += 1;
    }

    let total = actual.len();
    let mut per_class = IndexMap::new();
    for (i, label) in labels.iter().enumerate() {
        let tp = confusion[i][i];
        let support: usize = confusion[i].iter().sum();
        let predicted_i: usize = confusion.iter().map(|row| row[i]).sum();
        let (precision, p_undef) = ratio(tp, predicted_i);
        let (recall, r_undef) = ratio(tp, support);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        per_class.insert(label.as_ref().to_string(), ClassMetrics { precision, recall, f1, support, undefined: p_undef || r_undef });
    }
    let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.values().map(f).sum::<f64>() / k as f64;
    let weighted_f1 = per_class.values().map(|m| m.f1 * m.support as f64).sum::<f64>() / total as f64;
    Ok(ClassificationReport {
        labels: labels.iter().map(|l| l.as_ref().to_string()).collect(),
        accuracy: trace as f64 / total as f64,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        weighted_f1,
        per_class,
        confusion,
    })
}

impl ClassificationReport {
    pub fn undefined_classes(&self) -> Vec<&str> {
        self.per_class.iter().filter(|(_, m)| m.undefined).map(|(l, _)| l.as_str()).collect()
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Fixed-width table: one row per system, columns BLEU-4 | ED | METEOR | ROUGE-L.
pub fn render_similarity_table(rows: &[(&str, CorpusScores)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$} | {:>12} | {:>14} | {:>7} | {:>7} | {:>7} | {:>6}", "Model", "BLEU-4 (mean)", "BLEU-4 (pooled)", "ED", "METEOR", "ROUGE-L", "pairs");
    let _ = writeln!(out, "{}", "-".repeat(width + 75));
    for (name, s) in rows {
        let _ = writeln!(
            out,
            "{:<width$} | {:>13} | {:>15} | {:>7} | {:>7} | {:>7} | {:>6}",
            name,
            pct(s.bleu4_mean),
            pct(s.bleu4_pooled),
            pct(s.edit_similarity),
            pct(s.meteor),
            pct(s.rouge_l_f),
            s.pairs
        );
    }
    out
}

/// Fixed-width table: one row per system with binary and multi-class
/// accuracy and macro F1 in percent.
pub fn render_classification_table(rows: &[(&str, Option<&ClassificationReport>, Option<&ClassificationReport>)]) -> String {
    let width = rows.iter().map(|(n, _, _)| n.len()).max().unwrap_or(0).max(6);
    let cell = |r: Option<&ClassificationReport>, f: fn(&ClassificationReport) -> f64| r.map(|r| pct(f(r))).unwrap_or_else(|| "-".into());
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$} | {:>10} | {:>10} | {:>10} | {:>10}", "Model", "Bin Acc", "Bin F1", "Multi Acc", "Multi F1");
    let _ = writeln!(out, "{}", "-".repeat(width + 52));
    for (name, bin, multi) in rows {
        let _ = writeln!(
            out,
            "{:<width$} | {:>10} | {:>10} | {:>10} | {:>10}",
            name,
            cell(*bin, |r| r.accuracy),
            cell(*bin, |r| r.macro_f1),
            cell(*multi, |r| r.accuracy),
            cell(*multi, |r| r.macro_f1)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn w(s: &str) -> Vec<&str> {
        pretokenize(s)
    }

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn edit_similarity_examples() {
        assert_eq!(edit_similarity(&w("a b c"), &w("a b c")), 1.0);
        assert_abs_diff_eq!(edit_similarity(&chars("kitten"), &chars("sitting")), 1.0 - 3.0 / 7.0, epsilon = 1e-15);
        assert_eq!(edit_similarity::<&str>(&[], &[]), 1.0);
        assert_eq!(edit_similarity(&w("a"), &[]), 0.0);
    }

    #[test]
    fn bleu_examples() {
        assert_eq!(bleu4(&w("a b c d"), &[&w("a b c d")]).unwrap(), 1.0);
        // p1..p4 = 4/5, 3/4, 2/3, 1/2; candidate longer so BP = 1
        let expected = (0.8f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25);
        assert_abs_diff_eq!(bleu4(&w("a b c d e"), &[&w("a b c d")]).unwrap(), expected, epsilon = 1e-12);
        assert!(matches!(bleu4::<&str>(&w("a"), &[]), Err(MetricsError::NoReferences)));
    }

    #[test]
    fn bleu_smoothing_keeps_short_candidates_positive() {
        // no 4-gram overlap: p4 = 1/(2+1) replaces zero
        let cand = w("a b c x d e");
        let score = bleu4(&cand, &[&w("a b c y d e")]).unwrap();
        assert!(score > 0.0);
        let stats = BleuStats::collect(&cand, &[&w("a b c y d e")[..]]).unwrap();
        assert_eq!(stats.matches[3], 0);
        let unsmoothed_upper = ((stats.matches[0] as f64 / stats.totals[0] as f64)
            * (stats.matches[1] as f64 / stats.totals[1] as f64)
            * (stats.matches[2] as f64 / stats.totals[2] as f64))
            .powf(0.25);
        assert!(score < unsmoothed_upper);
        assert!(bleu4(&w("a b"), &[&w("a b")]).unwrap() > 0.0);
    }

    #[test]
    fn rouge_examples() {
        let r = rouge_l(&w("a c b d"), &w("a b c d"));
        assert_eq!((r.precision, r.recall, r.f), (0.75, 0.75, 0.75));
        assert_eq!(rouge_l(&w("x y"), &w("x y")).f, 1.0);
        assert_eq!(rouge_l(&w("x y"), &w("p q")).f, 0.0);
        assert_eq!(rouge_l::<&str>(&[], &[]).f, 1.0);
        assert_eq!(rouge_l(&[], &w("a")).f, 0.0);
    }

    #[test]
    fn meteor_examples() {
        assert_eq!(meteor(&w("a"), &w("a")), 0.5);
        assert_eq!(meteor(&w("a b c d"), &w("a b c d")), 0.9921875);
        assert_eq!(meteor(&w("a b"), &w("c d")), 0.0);
    }

    #[test]
    fn meteor_prefers_chunk_continuation() {
        // second `a` continues the chunk at reference position 3 rather than taking position 0
        let align = meteor_alignment(&w("b a"), &w("a x b a"));
        assert_eq!(align, vec![(0, 2), (1, 3)]);
        assert_eq!(count_chunks(&align), 1);
    }

    #[test]
    fn classification_example() {
        let labels = ["A", "B"];
        let r = classification_report(&["A", "B", "B", "B"], &["A", "A", "B", "B"], &labels).unwrap();
        assert_eq!(r.accuracy, 0.75);
        let a = &r.per_class["A"];
        assert_eq!((a.precision, a.recall), (1.0, 0.5));
        assert_abs_diff_eq!(a.f1, 2.0 / 3.0, epsilon = 1e-15);
        let b = &r.per_class["B"];
        assert_abs_diff_eq!(b.precision, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(b.recall, 1.0);
        assert_abs_diff_eq!(b.f1, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(r.macro_f1, (2.0 / 3.0 + 0.8) / 2.0, epsilon = 1e-15);
        assert_eq!(r.confusion, vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn classification_edge_cases() {
        let r = classification_report(&["A", "A"], &["A", "A"], &["A", "B"]).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.per_class["A"].f1, 1.0);
        let b = &r.per_class["B"];
        assert_eq!((b.precision, b.recall, b.f1, b.support), (0.0, 0.0, 0.0, 0));
        assert_eq!(r.undefined_classes(), ["B"]);
        assert!(matches!(classification_report(&["A"], &["A", "B"], &["A", "B"]), Err(MetricsError::LengthMismatch { .. })));
        assert!(matches!(classification_report(&["C"], &["A"], &["A", "B"]), Err(MetricsError::UnknownLabel(l)) if l == "C"));
    }

    #[test]
    fn corpus_scores_aggregate() {
        let one = corpus_scores(&[("a b c d", "a b c e")]).unwrap();
        let s = text_similarity("a b c d", "a b c e");
        assert_eq!(one.edit_similarity, s.edit_similarity);
        assert_eq!(one.bleu4_mean, s.bleu4);
        assert_eq!(one.bleu4_pooled, s.bleu4);
        let two = corpus_scores(&[("a b c d", "a b c e"), ("a b c d", "a b c e")]).unwrap();
        assert_eq!(two.edit_similarity, one.edit_similarity);
        assert_eq!(two.meteor, one.meteor);
        assert!(matches!(corpus_scores::<&str>(&[]), Err(MetricsError::EmptyInput)));
    }

    #[test]
    fn pooled_and_mean_bleu_differ() {
        // a long perfect pair and a short poor one weigh differently when pooled
        let pairs = [("a b c d e f g h i j", "a b c d e f g h i j"), ("x y", "x z")];
        let s = corpus_scores(&pairs).unwrap();
        assert!((s.bleu4_mean - s.bleu4_pooled).abs() > 1e-3);
    }

    #[test]
    fn tables_render() {
        let s = corpus_scores(&[("a b", "a b")]).unwrap();
        let t = render_similarity_table(&[("neural", s)]);
        assert!(t.lines().nth(2).unwrap().starts_with("neural"));
        assert!(t.contains("100.00"));
    }

    fn seq() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..4, 0..10)
    }

    proptest! {
        #[test]
        fn edit_similarity_symmetric(a in seq(), b in seq()) {
            prop_assert_eq!(edit_similarity(&a, &b), edit_similarity(&b, &a));
        }

        #[test]
        fn levenshtein_triangle(a in seq(), b in seq(), c in seq()) {
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        }

        #[test]
        fn metrics_bounded(a in seq(), b in seq()) {
            let s = similarity(&a, &b);
            for v in [s.edit_similarity, s.bleu4, s.rouge_l_f, s.meteor] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn weighted_f1_is_support_weighted(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..40)) {
            let names = ["x", "y", "z"];
            let pred: Vec<&str> = pairs.iter().map(|p| names[p.0]).collect();
            let act: Vec<&str> = pairs.iter().map(|p| names[p.1]).collect();
            let r = classification_report(&pred, &act, &names).unwrap();
            let total: usize = r.per_class.values().map(|m| m.support).sum();
            let entries: usize = r.confusion.iter().flatten().sum();
            prop_assert_eq!(total, entries);
            let w: f64 = r.per_class.values().map(|m| m.f1 * m.support as f64).sum::<f64>() / total as f64;
            prop_assert!((w - r.weighted_f1).abs() < 1e-12);
        }
    }
}
