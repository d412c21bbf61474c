use std::path::{Path, PathBuf};

use bindecomp::asmprep::{prepare_asm, PrunePolicy};
use bindecomp::corpus::{ingest_pairs, CorpusError, stratified_split, Corpus, StratifyKey, Variant};
use bindecomp::neural::{TrainSchedule, TransformerConfig};
use bindecomp::srcprep::normalize_source;
use bindecomp::tasks::{
    build_biclass_dataset, build_multiclass_dataset, run_decompile_eval, run_experiment, DecoderSpec, EmptyDecompiler, ExperimentSpec, IdentityDecompiler, LabelSpace,
    ModelSpec, NeuralDecompiler, TaskError, TaskKind,
};
use bindecomp::tokenizer::{annotate_lengths, bpe_train, count_words, pretokenize, toss_reduce, Side, FUNC_ID};

fn fixture_tree() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/juliet-mini")
}

fn prepared() -> Corpus {
    let mut corpus = ingest_pairs(&fixture_tree(), None).unwrap().corpus;
    for p in &mut corpus.pairs {
        p.asm_norm = Some(prepare_asm(&p.asm_raw, &PrunePolicy::default()).unwrap().text);
        p.src_norm = Some(normalize_source(&p.src_raw).unwrap());
    }
    corpus
}

fn tiny_spec(task: TaskKind) -> ExperimentSpec {
    let model = |dec_layers| ModelSpec {
        model: TransformerConfig { d_model: 16, n_heads: 2, n_enc_layers: 1, n_dec_layers: dec_layers, d_ff: 32, max_seq_len: 64, ..TransformerConfig::default() },
        schedule: TrainSchedule { max_steps: 20, batch_size: 4, lr: 3e-3, ..TrainSchedule::default() },
    };
    ExperimentSpec {
        task,
        seed: 11,
        num_merges: 300,
        decompiler: model(1),
        decoder: DecoderSpec { beam_width: 2, max_len: 24 },
        classifier: model(0),
        ..ExperimentSpec::default()
    }
}

#[test]
fn fixture_tree_pairs_every_case_with_both_variants() {
    let ingested = ingest_pairs(&fixture_tree(), None).unwrap();
    let corpus = ingested.corpus;
    assert_eq!(corpus.len(), 32);
    let bad = corpus.pairs.iter().filter(|p| p.variant == Variant::Bad).count();
    assert_eq!(bad, 16);
}

#[test]
fn prepared_texts_use_canonical_names() {
    for p in prepared().pairs {
        let asm = p.asm_norm.unwrap();
        let src = p.src_norm.unwrap();
        assert!(asm.contains("funct0"), "{}: {asm}", p.id);
        assert!(src.contains("funct0"), "{}: {src}", p.id);
        assert!(!src.contains("main"), "{}", p.id);
    }
}

#[test]
fn function_separator_encodes_to_reserved_id() {
    let corpus = prepared();
    let words = count_words(corpus.pairs.iter().flat_map(|p| pretokenize(p.asm_norm.as_deref().unwrap())));
    let model = bpe_train(&words, 200).unwrap();
    let multi = corpus.pairs.iter().find(|p| p.asm_norm.as_deref().unwrap().contains("<func>")).expect("a multi-function listing");
    let seq = model.encode_text(multi.asm_norm.as_deref().unwrap());
    assert!(seq.ids.contains(&FUNC_ID));
}

#[test]
fn toss_then_split_keeps_ids_disjoint() {
    let mut corpus = prepared();
    let words = |side: fn(&bindecomp::corpus::FunctionPair) -> &str| count_words(corpus.pairs.iter().flat_map(|p| pretokenize(side(p))));
    let asm = bpe_train(&words(|p| p.asm_norm.as_deref().unwrap()), 300).unwrap();
    let src = bpe_train(&words(|p| p.src_norm.as_deref().unwrap()), 300).unwrap();
    annotate_lengths(&mut corpus, &asm, &src);
    let (reduced, report) = toss_reduce(&corpus, 5.0, 95.0, Side::Both).unwrap();
    assert_eq!(report.kept + report.dropped, 32);
    assert!(report.kept >= 24, "kept {}", report.kept);
    let (train, test) = stratified_split(&reduced, 0.25, StratifyKey::Variant, 3).unwrap();
    assert_eq!(train.len() + test.len(), reduced.len());
    assert!(train.ids().is_disjoint(&test.ids()));
}

#[test]
fn reference_decompilers_bound_the_scores() {
    let corpus = prepared();
    let spec = ExperimentSpec::default();
    let perfect = run_decompile_eval(&spec, &corpus, &IdentityDecompiler).unwrap();
    for (name, value) in perfect.scores.fields() {
        if name == "meteor" {
            // one chunk still costs 0.5 / m^3
            assert!(value < 1.0 && value > 0.9999, "{value}");
        } else {
            assert_eq!(value, 1.0, "{name}");
        }
    }
    let empty = run_decompile_eval(&spec, &corpus, &EmptyDecompiler).unwrap();
    for (name, value) in empty.scores.fields() {
        assert_eq!(value, 0.0, "{name}");
    }
}

#[test]
fn decompile_eval_rejects_training_ids() {
    let corpus = prepared();
    let spec = tiny_spec(TaskKind::DecompileEval);
    let (decompiler, _) = NeuralDecompiler::train(&corpus, 300, &spec.decompiler, spec.decoder.clone(), 1).unwrap();
    let err = run_decompile_eval(&spec, &corpus, &decompiler).unwrap_err();
    assert!(matches!(err, TaskError::Leakage(ids) if ids.len() == 32));
}

#[test]
fn labeled_datasets_from_fixture_are_stratified() {
    let corpus = prepared();
    let bi = build_biclass_dataset(&corpus, 0.25, 4).unwrap();
    bi.check_disjoint().unwrap();
    let test_bad = bi.test.iter().filter(|s| s.label == 1).count();
    assert_eq!(test_bad * 2, bi.test.len());

    // one bad sample per CWE cannot be split by label
    let err = build_multiclass_dataset(&corpus, &LabelSpace::default(), 0.25, 4).unwrap_err();
    assert!(matches!(err, TaskError::Corpus(CorpusError::StratumTooSmall { size: 1, .. })), "{err}");
}

#[test]
fn experiment_runs_end_to_end_and_is_reproducible() {
    let corpus = prepared();
    let spec = tiny_spec(TaskKind::Biclass);
    let first = run_experiment(&spec, &corpus).unwrap();
    let second = run_experiment(&spec, &corpus).unwrap();
    assert_eq!(first.decompile, second.decompile);
    let prediction = first.prediction.as_ref().expect("biclass runs prediction");
    assert_eq!(Some(prediction), second.prediction.as_ref());
    assert_eq!(first.decompile.header.spec_hash, spec.hash());
    for (_, value) in first.decompile.scores.fields() {
        assert!((0.0..=1.0).contains(&value));
    }
    for report in [&prediction.decompiled, &prediction.control] {
        assert!((0.0..=1.0).contains(&report.accuracy));
        assert!((0.0..=1.0).contains(&report.macro_f1));
    }
}
