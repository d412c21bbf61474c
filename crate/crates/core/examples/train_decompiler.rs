//! Trains a small translation model on part of the fixture corpus and scores
//! it on the held-out pairs against the reference decompilers.
//!
//! ```text
//! cargo run --release --example train_decompiler -- [max_steps]
//! ```

use std::path::Path;

use anyhow::Result;
use bindecomp::asmprep::{prepare_asm, PrunePolicy};
use bindecomp::corpus::{ingest_pairs, stratified_split, StratifyKey};
use bindecomp::metrics::render_similarity_table;
use bindecomp::neural::{TrainSchedule, TransformerConfig};
use bindecomp::srcprep::normalize_source;
use bindecomp::tasks::{run_decompile_eval, DecoderSpec, EmptyDecompiler, ExperimentSpec, IdentityDecompiler, ModelSpec, NeuralDecompiler};

fn main() -> Result<()> {
    let max_steps: usize = std::env::args().nth(1).map(|m| m.parse()).transpose()?.unwrap_or(400);
    let mut corpus = ingest_pairs(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/juliet-mini"), None)?.corpus;
    for p in &mut corpus.pairs {
        p.asm_norm = Some(prepare_asm(&p.asm_raw, &PrunePolicy::default())?.text);
        p.src_norm = Some(normalize_source(&p.src_raw)?);
    }
    let (train, test) = stratified_split(&corpus, 0.25, StratifyKey::Variant, 0)?;

    let spec = ModelSpec {
        model: TransformerConfig { d_model: 64, n_heads: 4, n_enc_layers: 1, n_dec_layers: 1, d_ff: 128, max_seq_len: 128, ..TransformerConfig::default() },
        schedule: TrainSchedule { max_steps, batch_size: 8, lr: 1e-3, ..TrainSchedule::default() },
    };
    let (model, report) = NeuralDecompiler::train(&train, 4000, &spec, DecoderSpec { beam_width: 3, max_len: 0 }, 0)?;
    println!("{} steps, stop: {:?}, final loss {:?}", report.steps, report.stop, report.final_loss);

    let pair = &test.pairs[0];
    println!("\n{}\n  decompiled: {}\n  reference:  {}\n", pair.id, model.decompile_text(pair.asm_norm.as_deref().unwrap())?, pair.src_norm.as_deref().unwrap());

    let eval = ExperimentSpec::default();
    let neural = run_decompile_eval(&eval, &test, &model)?;
    let identity = run_decompile_eval(&eval, &test, &IdentityDecompiler)?;
    let empty = run_decompile_eval(&eval, &test, &EmptyDecompiler)?;
    println!("{}", render_similarity_table(&[("neural", neural.scores), ("identity", identity.scores), ("empty", empty.scores)]));
    Ok(())
}
