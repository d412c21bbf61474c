//! Builds a raw ingestion tree from Juliet-style test-case sources.
//!
//! Each `CWE*.c` file is split into its good and bad variants, compiled with
//! `gcc -O0` and disassembled, giving `<case>.<variant>.c` and
//! `<case>.<variant>.objdump` side by side.
//!
//! ```text
//! cargo run --example build_fixture_tree -- fixtures/juliet-mini-src fixtures/juliet-mini
//! ```

use std::path::Path;
use std::process::Command;
use std::{env, fs};

use anyhow::{bail, Context, Result};
use bindecomp::asmprep::disassemble;
use bindecomp::corpus::{filter_variant, Variant};

fn main() -> Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let [src_dir, out_dir] = args.as_slice() else {
        bail!("usage: build_fixture_tree <sources-dir> <out-dir>");
    };
    let work = tempfile::tempdir()?;
    let mut cases: Vec<_> = fs::read_dir(src_dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "c")).collect();
    cases.sort();
    for case in &cases {
        let stem = case.file_stem().unwrap().to_string_lossy().into_owned();
        let cwe_dir = Path::new(out_dir).join(stem.split("__").next().unwrap());
        fs::create_dir_all(&cwe_dir)?;
        let text = fs::read_to_string(case)?;
        for variant in [Variant::Good, Variant::Bad] {
            let name = format!("{stem}.{variant}");
            let source = filter_variant(&text, variant);
            let c_path = cwe_dir.join(format!("{name}.c"));
            fs::write(&c_path, &source)?;
            // a fixed binary name keeps the listing header stable
            let binary = work.path().join("case");
            let status = Command::new("gcc").args(["-O0", "-w", "-o"]).arg(&binary).arg(&c_path).status().context("running gcc")?;
            if !status.success() {
                bail!("gcc failed on {}", c_path.display());
            }
            let listing = disassemble(&binary)?;
            fs::write(cwe_dir.join(format!("{name}.objdump")), listing)?;
        }
        println!("{stem}");
    }
    println!("{} cases, {} pairs", cases.len(), cases.len() * 2);
    Ok(())
}
