//! Scores a candidate decompilation against a reference with the four
//! similarity metrics. Both files are normalized first.
//!
//! ```text
//! cargo run --example score -- <candidate.c> <reference.c>
//! ```
//! Without arguments the bundled `table3` pair is scored.

use std::env;
use std::path::PathBuf;

use anyhow::Result;
use bindecomp::metrics::text_similarity;
use bindecomp::srcprep::normalize_source;

fn main() -> Result<()> {
    let table3 = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/table3");
    let mut args = env::args().skip(1);
    let candidate = args.next().map(PathBuf::from).unwrap_or_else(|| table3.join("neural_decompilation.cpp"));
    let reference = args.next().map(PathBuf::from).unwrap_or_else(|| table3.join("ground_truth.cpp"));

    let candidate = normalize_source(&std::fs::read_to_string(candidate)?)?;
    let reference = normalize_source(&std::fs::read_to_string(reference)?)?;
    println!("candidate: {candidate}\nreference: {reference}\n");
    let s = text_similarity(&candidate, &reference);
    println!("edit similarity {:.4}", s.edit_similarity);
    println!("BLEU-4          {:.4}", s.bleu4);
    println!("ROUGE-L F       {:.4}", s.rouge_l_f);
    println!("METEOR          {:.4}", s.meteor);
    Ok(())
}
