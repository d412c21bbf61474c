//! Trains a good/bad classifier on original source and compares its accuracy
//! on decompiled test functions against the original test functions.
//!
//! The fixture corpus is tiny, so the numbers only show the mechanics.
//!
//! ```text
//! cargo run --release --example vulnerability_prediction
//! ```

use std::path::Path;

use anyhow::Result;
use bindecomp::asmprep::{prepare_asm, PrunePolicy};
use bindecomp::corpus::ingest_pairs;
use bindecomp::neural::{TrainSchedule, TransformerConfig};
use bindecomp::srcprep::normalize_source;
use bindecomp::tasks::{build_biclass_dataset, run_prediction_eval, train_bpe_on, DecoderSpec, ExperimentSpec, ModelSpec, NeuralClassifier, NeuralDecompiler};

fn main() -> Result<()> {
    let mut corpus = ingest_pairs(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/juliet-mini"), None)?.corpus;
    for p in &mut corpus.pairs {
        p.asm_norm = Some(prepare_asm(&p.asm_raw, &PrunePolicy::default())?.text);
        p.src_norm = Some(normalize_source(&p.src_raw)?);
    }
    let dataset = build_biclass_dataset(&corpus, 0.25, 0)?;
    let test_ids = dataset.test_ids();
    let train_pairs = corpus.with_pairs(corpus.pairs.iter().filter(|p| !test_ids.contains(&p.id)).cloned().collect());

    let small = |dec_layers, max_steps| ModelSpec {
        model: TransformerConfig { d_model: 32, n_heads: 2, n_enc_layers: 1, n_dec_layers: dec_layers, d_ff: 64, max_seq_len: 128, ..TransformerConfig::default() },
        schedule: TrainSchedule { max_steps, batch_size: 8, lr: 2e-3, ..TrainSchedule::default() },
    };
    let (decompiler, _) = NeuralDecompiler::train(&train_pairs, 1000, &small(1, 300), DecoderSpec { beam_width: 1, max_len: 0 }, 0)?;
    let bpe = train_bpe_on(dataset.train.iter().map(|s| s.text.as_str()), 1000)?;
    let (classifier, report) = NeuralClassifier::train(&dataset.train, dataset.labels.clone(), bpe, &small(0, 200), 0)?;
    println!("classifier: {} steps, final loss {:?}", report.steps, report.final_loss);

    let outcome = run_prediction_eval(&ExperimentSpec::default(), &dataset, &corpus, &decompiler, &classifier)?;
    println!("{}", outcome.table());
    Ok(())
}
