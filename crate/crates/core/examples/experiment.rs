//! Runs a whole experiment from a JSON spec over a prepared corpus file
//! (the output of `bindecomp prep-src`) and prints its reports as tables.
//!
//! ```text
//! cargo run --release --example experiment -- <corpus.jsonl> [spec.json]
//! ```

use std::path::PathBuf;

use anyhow::{bail, Result};
use bindecomp::corpus::Corpus;
use bindecomp::tasks::{run_experiment, ExperimentSpec};

fn main() -> Result<()> {
    let args: Vec<PathBuf> = std::env::args_os().skip(1).map(PathBuf::from).collect();
    let (corpus, spec) = match args.as_slice() {
        [corpus] => (corpus, ExperimentSpec::default()),
        [corpus, spec] => (corpus, ExperimentSpec::load(spec)?),
        _ => bail!("usage: experiment <corpus.jsonl> [spec.json]"),
    };
    let corpus = Corpus::read_jsonl(corpus)?;
    println!("task {}, seed {}, spec {}", spec.task, spec.seed, spec.hash());

    let outcome = run_experiment(&spec, &corpus)?;
    println!("decompiler: {} steps, stop {:?}", outcome.decompiler_training.steps, outcome.decompiler_training.stop);
    println!("{}", outcome.decompile.table());
    if let Some(prediction) = &outcome.prediction {
        println!("{}", prediction.table());
    }
    Ok(())
}
