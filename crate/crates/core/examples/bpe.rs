//! Trains per-side BPE models on the fixture corpus, shows how words are
//! segmented, and applies percentile toss reduction.
//!
//! ```text
//! cargo run --example bpe -- [merges]
//! ```

use std::path::Path;

use anyhow::Result;
use bindecomp::asmprep::{prepare_asm, PrunePolicy};
use bindecomp::corpus::ingest_pairs;
use bindecomp::srcprep::normalize_source;
use bindecomp::tokenizer::{annotate_lengths, bpe_train, count_words, pretokenize, toss_reduce, Side};

fn main() -> Result<()> {
    let merges: usize = std::env::args().nth(1).map(|m| m.parse()).transpose()?.unwrap_or(500);
    let mut corpus = ingest_pairs(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/juliet-mini"), None)?.corpus;
    for p in &mut corpus.pairs {
        p.asm_norm = Some(prepare_asm(&p.asm_raw, &PrunePolicy::default())?.text);
        p.src_norm = Some(normalize_source(&p.src_raw)?);
    }

    let asm_words = count_words(corpus.pairs.iter().flat_map(|p| pretokenize(p.asm_norm.as_deref().unwrap())));
    let src_words = count_words(corpus.pairs.iter().flat_map(|p| pretokenize(p.src_norm.as_deref().unwrap())));
    let asm = bpe_train(&asm_words, merges)?;
    let src = bpe_train(&src_words, merges)?;
    println!("assembly vocabulary {}, source vocabulary {}", asm.vocab_size(), src.vocab_size());

    for word in ["0x8(%rbp),%rax", "funct0", "-0x14(%rbp)"] {
        println!("{word:>16} -> {:?}", asm.segment(word));
    }
    let sample = corpus.pairs[0].src_norm.as_deref().unwrap();
    let seq = src.encode_text(sample);
    println!("\n{} words encode to {} tokens; decode round-trips: {}", pretokenize(sample).len(), seq.len(), src.decode(&seq) == sample);

    annotate_lengths(&mut corpus, &asm, &src);
    let (kept, report) = toss_reduce(&corpus, 5.0, 95.0, Side::Both)?;
    println!("toss reduction kept {} of {} pairs", kept.len(), corpus.len());
    if let (Some(s), Some(t)) = (report.source_bounds, report.target_bounds) {
        println!("  assembly length band [{}, {}], source length band [{}, {}]", s.low, s.high, t.low, t.high);
    }
    Ok(())
}
