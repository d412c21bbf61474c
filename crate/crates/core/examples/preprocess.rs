//! Normalizes one assembly listing and one C/C++ source into model text.
//!
//! ```text
//! cargo run --example preprocess -- <listing.objdump> <source.c>
//! ```
//! Without arguments the first fixture pair is used.

use std::env;
use std::path::PathBuf;

use anyhow::{Context, Result};
use bindecomp::asmprep::{prepare_asm, PrunePolicy};
use bindecomp::srcprep::{normalize_source_with, SrcConfig};

fn main() -> Result<()> {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/juliet-mini/CWE190_Integer_Overflow");
    let mut args = env::args().skip(1);
    let listing = args.next().map(PathBuf::from).unwrap_or_else(|| fixture.join("CWE190_Integer_Overflow__int_add_01.bad.objdump"));
    let source = args.next().map(PathBuf::from).unwrap_or_else(|| fixture.join("CWE190_Integer_Overflow__int_add_01.bad.c"));

    let asm = prepare_asm(&std::fs::read_to_string(&listing).with_context(|| listing.display().to_string())?, &PrunePolicy::default())?;
    println!("== assembly, functions kept: {}", asm.name_map.len());
    for (symbol, canonical) in &asm.name_map {
        println!("  {symbol} -> {canonical}");
    }
    println!("{}\n", asm.text);

    let src = normalize_source_with(&std::fs::read_to_string(&source).with_context(|| source.display().to_string())?, &SrcConfig::default())?;
    println!("== source");
    for (name, canonical) in &src.name_map {
        println!("  {name} -> {canonical}");
    }
    println!("{}", src.text);
    for d in &src.diagnostics {
        eprintln!("warning: {d}");
    }
    Ok(())
}
