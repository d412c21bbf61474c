//! Disassembly listing parsing and function-level normalization.
//!
//! Input is `objdump -d` text for one x86-64 ELF. Normalized output keeps only
//! user functions from `.text`, renames them `funct0`, `funct1`, ... and strips
//! addresses and raw bytes:
//!
//! ```text
//! <funct0>:
//! endbr64
//! push %rbp
//! ...
//! <func>
//! <funct1>:
//! call funct0
//! ```
//!
//! Jump targets inside a function become `.L<k>` labels, numbered per
//! function in address order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Token separating functions inside one normalized sample.
pub const FUNC_BOUNDARY: &str = "<func>";

#[derive(Debug, Error)]
pub enum AsmError {
    #[error("input is not a disassembly listing (no section header)")]
    NotADisassembly,
    #[error("listing has no .text section")]
    MissingTextSection,
    #[error("pruning removed every function")]
    NothingLeft,
    #[error("disassembler failed: {0}")]
    Disassembler(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsmInstruction {
    pub address: Option<u64>,
    pub bytes: Option<String>,
    pub mnemonic: String,
    pub operands: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsmFunction {
    pub symbol: String,
    pub canonical: Option<String>,
    pub instructions: Vec<AsmInstruction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    /// Lines with an `address:` prefix inside a recognized section.
    pub addressed_lines: usize,
    /// Addressed lines carrying only overflow bytes of the previous instruction.
    pub continuation_lines: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsmDocument {
    pub format: String,
    pub sections: IndexMap<String, Vec<AsmFunction>>,
    pub diagnostics: Vec<Diagnostic>,
    pub stats: ParseStats,
}

impl AsmDocument {
    pub fn instruction_count(&self) -> usize {
        self.sections.values().flatten().map(|f| f.instructions.len()).sum()
    }
}

struct Patterns {
    section: Regex,
    format: Regex,
    symbol: Regex,
    addressed: Regex,
    byte: Regex,
    target: Regex,
    bare_hex: Regex,
    local_label: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        section: Regex::new(r"^Disassembly of section (\S+):\s*$").unwrap(),
        format: Regex::new(r"file format (\S+)").unwrap(),
        symbol: Regex::new(r"^([0-9a-fA-F]+) <(.+)>:\s*$").unwrap(),
        addressed: Regex::new(r"^\s*([0-9a-fA-F]+):(.*)$").unwrap(),
        byte: Regex::new(r"^[0-9a-fA-F]{2}$").unwrap(),
        target: Regex::new(r"\b([0-9a-fA-F]+) <([^>]+)>").unwrap(),
        bare_hex: Regex::new(r"^[0-9a-f]+$").unwrap(),
        local_label: Regex::new(r"^\.L(\d+)$").unwrap(),
    })
}

fn finish_function(
    current: &mut Option<(AsmFunction, usize)>,
    section: &mut Vec<AsmFunction>,
    diagnostics: &mut Vec<Diagnostic>,
) {
    if let Some((func, line)) = current.take() {
        if func.instructions.is_empty() {
            diagnostics.push(Diagnostic { line, message: format!("symbol <{}> has no instructions", func.symbol) });
        } else {
            section.push(func);
        }
    }
}

pub fn parse_objdump(text: &str) -> Result<AsmDocument, AsmError> {
    let p = patterns();
    let mut format = String::from("unknown");
    let mut sections: IndexMap<String, Vec<AsmFunction>> = IndexMap::new();
    let mut diagnostics = Vec::new();
    let mut stats = ParseStats::default();
    let mut section: Option<String> = None;
    let mut current: Option<(AsmFunction, usize)> = None;

    for (index, line) in text.lines().enumerate() {
        let lineno = index + 1;
        if let Some(c) = p.section.captures(line) {
            if let Some(name) = &section {
                let funcs = sections.entry(name.clone()).or_default();
                finish_function(&mut current, funcs, &mut diagnostics);
            }
            let name = c[1].to_string();
            sections.entry(name.clone()).or_default();
            section = Some(name);
            continue;
        }
        let Some(section_name) = &section else {
            if let Some(c) = p.format.captures(line) {
                format = c[1].to_string();
            }
            continue;
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed == "..." {
            continue;
        }
        if let Some(c) = p.symbol.captures(trimmed) {
            let funcs = sections.get_mut(section_name).expect("section registered");
            finish_function(&mut current, funcs, &mut diagnostics);
            let func = AsmFunction { symbol: c[2].to_string(), canonical: None, instructions: Vec::new() };
            current = Some((func, lineno));
            continue;
        }
        let Some(c) = p.addressed.captures(line) else {
            diagnostics.push(Diagnostic { line: lineno, message: format!("unrecognized line `{trimmed}`") });
            continue;
        };
        stats.addressed_lines += 1;
        let address = u64::from_str_radix(&c[1], 16).ok();
        let words: Vec<&str> = c[2].split_whitespace().collect();
        let n_bytes = words.iter().take_while(|w| p.byte.is_match(w)).count();
        let bytes = (n_bytes > 0).then(|| words[..n_bytes].join(" "));
        let rest = &words[n_bytes..];

        let Some((func, _)) = current.as_mut() else {
            diagnostics.push(Diagnostic { line: lineno, message: "instruction outside any symbol".into() });
            continue;
        };
        if rest.is_empty() {
            match (func.instructions.last_mut(), bytes) {
                (Some(prev), Some(extra)) => {
                    stats.continuation_lines += 1;
                    let joined = match prev.bytes.take() {
                        Some(b) => format!("{b} {extra}"),
                        None => extra,
                    };
                    prev.bytes = Some(joined);
                }
                _ => diagnostics.push(Diagnostic { line: lineno, message: "address without instruction".into() }),
            }
            continue;
        }
        func.instructions.push(AsmInstruction {
            address,
            bytes,
            mnemonic: rest[0].to_string(),
            operands: rest[1..].join(" "),
        });
    }
    match &section {
        Some(name) => {
            let funcs = sections.get_mut(name).expect("section registered");
            finish_function(&mut current, funcs, &mut diagnostics);
        }
        None => return Err(AsmError::NotADisassembly),
    }
    Ok(AsmDocument { format, sections, diagnostics, stats })
}

pub fn extract_text_section(doc: &AsmDocument) -> Result<Vec<AsmFunction>, AsmError> {
    doc.sections.get(".text").cloned().ok_or(AsmError::MissingTextSection)
}

/// Which `.text` symbols are toolchain artifacts rather than user code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrunePolicy {
    pub exact: Vec<String>,
    pub prefixes: Vec<String>,
    pub substrings: Vec<String>,
}

impl Default for PrunePolicy {
    fn default() -> Self {
        let exact = [
            "main",
            "_start",
            "_init",
            "_fini",
            "frame_dummy",
            "register_tm_clones",
            "deregister_tm_clones",
            "__do_global_dtors_aux",
            "_dl_relocate_static_pie",
        ];
        Self {
            exact: exact.iter().map(|s| s.to_string()).collect(),
            prefixes: vec!["__libc_csu_".into(), "__x86.get_pc_thunk".into()],
            // compiler-emitted clones of user functions
            substrings: vec!["@plt".into(), ".cold".into(), ".part.".into()],
        }
    }
}

impl PrunePolicy {
    pub fn denies(&self, symbol: &str) -> bool {
        self.exact.iter().any(|s| s == symbol)
            || self.prefixes.iter().any(|p| symbol.starts_with(p.as_str()))
            || self.substrings.iter().any(|s| symbol.contains(s.as_str()))
    }
}

pub fn prune_functions(funcs: Vec<AsmFunction>, policy: &PrunePolicy) -> Result<Vec<AsmFunction>, AsmError> {
    let kept: Vec<AsmFunction> = funcs.into_iter().filter(|f| !policy.denies(&f.symbol)).collect();
    if kept.is_empty() {
        return Err(AsmError::NothingLeft);
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canonicalized {
    pub text: String,
    /// Original symbol to canonical name, in definition order.
    pub name_map: IndexMap<String, String>,
    pub diagnostics: Vec<String>,
}

fn strip_comment(operands: &str) -> &str {
    match operands.find('#') {
        Some(i) => operands[..i].trim_end(),
        None => operands,
    }
}

fn is_branch(mnemonic: &str) -> bool {
    mnemonic.starts_with('j') || mnemonic.starts_with("call") || mnemonic.starts_with("loop")
}

/// Splits `sym+0x1f` into (`sym`, Some(0x1f)).
fn split_offset(target: &str) -> (&str, Option<&str>) {
    match target.rfind("+0x") {
        Some(i) => (&target[..i], Some(&target[i + 1..])),
        None => (target, None),
    }
}

fn external_name(symbol: &str) -> &str {
    symbol.split('@').next().unwrap_or(symbol)
}

pub fn canonicalize_asm(funcs: &[AsmFunction]) -> Canonicalized {
    let p = patterns();
    let mut name_map: IndexMap<String, String> = IndexMap::new();
    for func in funcs {
        let next = format!("funct{}", name_map.len());
        name_map.entry(func.symbol.clone()).or_insert(next);
    }
    let mut diagnostics = Vec::new();
    let mut blocks = Vec::with_capacity(funcs.len());

    for func in funcs {
        let canonical = &name_map[&func.symbol];
        let local: BTreeSet<u64> = func.instructions.iter().filter_map(|i| i.address).collect();

        // First pass: rewrite operands, remembering local jump targets.
        let mut targets: BTreeSet<u64> = BTreeSet::new();
        let mut rendered: Vec<(Option<u64>, String, Vec<Option<u64>>)> = Vec::new();
        for insn in &func.instructions {
            let operands = strip_comment(&insn.operands);
            let mut pending_locals = Vec::new();
            let mut out = String::new();
            let mut last = 0;
            for c in p.target.captures_iter(operands) {
                let whole = c.get(0).unwrap();
                out.push_str(&operands[last..whole.start()]);
                last = whole.end();
                let address = u64::from_str_radix(&c[1], 16).ok();
                let (base, offset) = split_offset(&c[2]);
                let replacement = if offset.is_none() && name_map.contains_key(base) {
                    name_map[base].clone()
                } else if address.is_some_and(|a| local.contains(&a)) {
                    let a = address.unwrap();
                    targets.insert(a);
                    pending_locals.push(Some(a));
                    "\u{0}".to_string()
                } else if let (Some(name), Some(off)) = (name_map.get(base), offset) {
                    format!("{name}+{off}")
                } else {
                    let name = external_name(base);
                    diagnostics.push(format!("{}: unresolved reference <{}> kept as `{}`", func.symbol, &c[2], name));
                    match offset {
                        Some(off) => format!("{name}+{off}"),
                        None => name.to_string(),
                    }
                };
                out.push_str(&replacement);
            }
            out.push_str(&operands[last..]);

            // Bare words naming a defined function, and bare branch addresses
            // (only in raw disassembly; normalized text has no addresses).
            let words: Vec<String> = out
                .split_whitespace()
                .map(|w| {
                    if let Some(name) = name_map.get(w) {
                        return name.clone();
                    }
                    if insn.bytes.is_some() && is_branch(&insn.mnemonic) && p.bare_hex.is_match(w) {
                        if let Ok(a) = u64::from_str_radix(w, 16) {
                            if local.contains(&a) {
                                targets.insert(a);
                                pending_locals.push(Some(a));
                                return "\u{0}".to_string();
                            }
                        }
                        diagnostics.push(format!("{}: branch to unknown address {w}", func.symbol));
                        return "ext".to_string();
                    }
                    w.to_string()
                })
                .collect();
            rendered.push((insn.address, words.join(" "), pending_locals));
        }

        let labels: BTreeMap<u64, usize> = targets.iter().enumerate().map(|(k, &a)| (a, k)).collect();
        let mut lines = vec![format!("<{canonical}>:")];
        for ((address, operands, locals), insn) in rendered.into_iter().zip(&func.instructions) {
            if let Some(k) = address.and_then(|a| labels.get(&a)) {
                lines.push(format!(".L{k}:"));
            }
            let mut operands = operands;
            for target in locals.into_iter().flatten() {
                operands = operands.replacen('\u{0}', &format!(".L{}", labels[&target]), 1);
            }
            if operands.is_empty() {
                lines.push(insn.mnemonic.clone());
            } else {
                lines.push(format!("{} {}", insn.mnemonic, operands));
            }
        }
        blocks.push(lines.join("\n"));
    }

    Canonicalized { text: blocks.join(&format!("\n{FUNC_BOUNDARY}\n")), name_map, diagnostics }
}

/// Reads normalized text back into functions so it can be re-canonicalized.
///
/// Instructions get synthetic addresses and `.L<k>` operands are turned back
/// into `address <symbol+0xoff>` references.
pub fn parse_normalized_asm(text: &str) -> Vec<AsmFunction> {
    let p = patterns();
    let mut out: Vec<AsmFunction> = Vec::new();
    // (label lines before each instruction, instruction text)
    let mut pending: Vec<(Vec<usize>, String)> = Vec::new();
    let mut labels_here: Vec<usize> = Vec::new();
    let mut symbol: Option<String> = None;

    fn flush(symbol: &mut Option<String>, pending: &mut Vec<(Vec<usize>, String)>, out: &mut Vec<AsmFunction>, p: &Patterns) {
        let Some(name) = symbol.take() else {
            pending.clear();
            return;
        };
        let base = out.iter().map(|f| f.instructions.len() as u64).sum::<u64>() + 16 * out.len() as u64;
        let mut label_addr: HashMap<usize, u64> = HashMap::new();
        for (i, (labels, _)) in pending.iter().enumerate() {
            for &k in labels {
                label_addr.insert(k, base + i as u64);
            }
        }
        let mut instructions = Vec::new();
        for (i, (_, line)) in pending.drain(..).enumerate() {
            let mut words = line.split_whitespace();
            let mnemonic = words.next().unwrap_or_default().to_string();
            let operands: Vec<String> = words
                .map(|w| match p.local_label.captures(w).and_then(|c| c[1].parse::<usize>().ok()) {
                    Some(k) if label_addr.contains_key(&k) => {
                        let a = label_addr[&k];
                        format!("{a:x} <{name}+0x{:x}>", a - base)
                    }
                    _ => w.to_string(),
                })
                .collect();
            instructions.push(AsmInstruction { address: Some(base + i as u64), bytes: None, mnemonic, operands: operands.join(" ") });
        }
        out.push(AsmFunction { symbol: name, canonical: None, instructions });
    }

    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if line == FUNC_BOUNDARY {
            continue;
        }
        if let Some(name) = line.strip_prefix('<').and_then(|l| l.strip_suffix(">:")) {
            flush(&mut symbol, &mut pending, &mut out, p);
            symbol = Some(name.to_string());
            continue;
        }
        if let Some(k) = line.strip_prefix(".L").and_then(|l| l.strip_suffix(':')).and_then(|k| k.parse().ok()) {
            labels_here.push(k);
            continue;
        }
        pending.push((std::mem::take(&mut labels_here), line.to_string()));
    }
    flush(&mut symbol, &mut pending, &mut out, p);
    out
}

/// Full low-level preparation of one listing.
pub fn prepare_asm(listing: &str, policy: &PrunePolicy) -> Result<Canonicalized, AsmError> {
    let doc = parse_objdump(listing)?;
    let text = extract_text_section(&doc)?;
    let kept = prune_functions(text, policy)?;
    Ok(canonicalize_asm(&kept))
}

/// Runs the system disassembler (`objdump -d`, or `$OBJDUMP`) on a binary.
pub fn disassemble(binary: &Path) -> Result<String, AsmError> {
    let tool = std::env::var("OBJDUMP").unwrap_or_else(|_| "objdump".into());
    let output = Command::new(&tool)
        .arg("-d")
        .arg(binary)
        .output()
        .map_err(|e| AsmError::Disassembler(format!("{tool}: {e}")))?;
    if !output.status.success() {
        return Err(AsmError::Disassembler(String::from_utf8_lossy(&output.stderr).into_owned()));
    }
    String::from_utf8(output.stdout).map_err(|e| AsmError::Disassembler(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING: &str = "\
t:     file format elf64-x86-64


Disassembly of section .init:

0000000000001000 <_init>:
    1000:\tf3 0f 1e fa          \tendbr64
    101a:\tc3                   \tret

Disassembly of section .text:

0000000000001169 <goodG2B>:
    1169:\tf3 0f 1e fa          \tendbr64
    116d:\t55                   \tpush   %rbp
    1184:\t7e 11                \tjle    1197 <goodG2B+0x2e>
    1186:\t48 8d 05 77 0e 00 00 \tlea    0xe77(%rip),%rax        # 2004 <_IO_stdin_used+0x4>
    1190:\te8 cb fe ff ff       \tcall   1060 <puts@plt>
    1197:\tc9                   \tleave
    1198:\tc3                   \tret

00000000000013bb <caller>:
    13bb:\t48 b8 00 00 00 00 00 \tmovabs $0x0,%rax
    13c2:\t00 00 00
    13c8:\te8 fc fe ff ff       \tcall   1169 <goodG2B>
    13cf:\tc3                   \tret

00000000000013d0 <main>:
    13d0:\tc3                   \tret

Disassembly of section .fini:

0000000000001208 <_fini>:
    1208:\tc3                   \tret
";

    #[test]
    fn parses_sections_and_columns() {
        let doc = parse_objdump(LISTING).unwrap();
        assert_eq!(doc.format, "elf64-x86-64");
        assert_eq!(doc.sections.keys().collect::<Vec<_>>(), [".init", ".text", ".fini"]);
        assert_eq!(doc.sections[".text"].len(), 3);
        let first = &doc.sections[".text"][0].instructions[0];
        assert_eq!(
            first,
            &AsmInstruction {
                address: Some(0x1169),
                bytes: Some("f3 0f 1e fa".into()),
                mnemonic: "endbr64".into(),
                operands: String::new()
            }
        );
        let movabs = &doc.sections[".text"][1].instructions[0];
        assert_eq!(movabs.bytes.as_deref(), Some("48 b8 00 00 00 00 00 00 00 00"));
        assert_eq!(doc.stats.continuation_lines, 1);
        assert!(doc.diagnostics.is_empty());
        assert_eq!(
            doc.stats.addressed_lines,
            doc.instruction_count() + doc.stats.continuation_lines + doc.diagnostics.len()
        );
    }

    #[test]
    fn space_separated_listing_line() {
        let doc = parse_objdump("Disassembly of section .text:\n<f>:\n0 <f>:\n 13bb: f3 0f 1e fa endbr64\n").unwrap();
        // `<f>:` without address is unparseable here
        assert_eq!(doc.diagnostics.len(), 1);
        let insn = &doc.sections[".text"][0].instructions[0];
        assert_eq!(insn.address, Some(0x13bb));
        assert_eq!(insn.bytes.as_deref(), Some("f3 0f 1e fa"));
        assert_eq!(insn.mnemonic, "endbr64");
        assert_eq!(insn.operands, "");
    }

    #[test]
    fn empty_input_is_not_a_disassembly() {
        assert!(matches!(parse_objdump(""), Err(AsmError::NotADisassembly)));
    }

    #[test]
    fn text_section_extraction() {
        let doc = parse_objdump(LISTING).unwrap();
        let funcs = extract_text_section(&doc).unwrap();
        assert_eq!(funcs.iter().map(|f| f.symbol.as_str()).collect::<Vec<_>>(), ["goodG2B", "caller", "main"]);
        let data_only = parse_objdump("Disassembly of section .data:\n").unwrap();
        assert!(matches!(extract_text_section(&data_only), Err(AsmError::MissingTextSection)));
        let empty_text = parse_objdump("Disassembly of section .text:\n").unwrap();
        assert!(extract_text_section(&empty_text).unwrap().is_empty());
    }

    fn named(symbols: &[&str]) -> Vec<AsmFunction> {
        symbols
            .iter()
            .map(|s| AsmFunction {
                symbol: s.to_string(),
                canonical: None,
                instructions: vec![AsmInstruction { address: None, bytes: None, mnemonic: "ret".into(), operands: String::new() }],
            })
            .collect()
    }

    fn symbols(funcs: &[AsmFunction]) -> Vec<&str> {
        funcs.iter().map(|f| f.symbol.as_str()).collect()
    }

    #[test]
    fn pruning_deny_list() {
        let policy = PrunePolicy::default();
        let kept = prune_functions(named(&["main", "funcA", "__libc_csu_init", "funcB"]), &policy).unwrap();
        assert_eq!(symbols(&kept), ["funcA", "funcB"]);
        let kept = prune_functions(named(&["printf@plt", "funcA", "funcA.cold", "g.part.0"]), &policy).unwrap();
        assert_eq!(symbols(&kept), ["funcA"]);
        assert!(matches!(prune_functions(named(&["main", "_start"]), &policy), Err(AsmError::NothingLeft)));
    }

    #[test]
    fn canonical_names_and_calls() {
        let out = prepare_asm(LISTING, &PrunePolicy::default()).unwrap();
        assert_eq!(
            out.text,
            "<funct0>:\nendbr64\npush %rbp\njle .L0\nlea 0xe77(%rip),%rax\ncall puts\n.L0:\nleave\nret\n<func>\n<funct1>:\nmovabs $0x0,%rax\ncall funct0\nret"
        );
        assert_eq!(out.name_map["goodG2B"], "funct0");
        assert_eq!(out.name_map["caller"], "funct1");
        assert_eq!(out.diagnostics.len(), 1);
        assert!(out.diagnostics[0].contains("puts"));
    }

    #[test]
    fn single_function_has_one_label() {
        let out = canonicalize_asm(&named(&["lonely"]));
        assert_eq!(out.text.matches("funct0").count(), 1);
        assert_eq!(out.text, "<funct0>:\nret");
    }

    #[test]
    fn recanonicalization_is_identity() {
        let out = prepare_asm(LISTING, &PrunePolicy::default()).unwrap();
        let again = canonicalize_asm(&parse_normalized_asm(&out.text));
        assert_eq!(again.text, out.text);
    }
}
