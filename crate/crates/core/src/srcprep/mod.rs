//! High-level source normalization.
//!
//! Works on the lossless token stream from [`lex_c`] rather than a syntax
//! tree, so fragments that would not compile are still handled. The
//! normalized form is the significant tokens joined by single spaces, with
//! comments, preprocessor lines, namespace wrappers, `using namespace`
//! declarations and `main` removed, string payloads replaced by `"STR"`, and
//! function names replaced by `funct0`, `funct1`, ... in definition order.

mod lexer;

use std::collections::{HashMap, HashSet};
use std::ops::RangeInclusive;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexer::{is_keyword, lex_c, LexDiagnostic, LexIssue, Lexed, SrcToken, TokenKind};

/// Replacement for every string literal.
pub const STRING_PLACEHOLDER: &str = "\"STR\"";
/// Replacement for character literals when they are anonymized.
pub const CHAR_PLACEHOLDER: &str = "'C'";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SrcError {
    #[error("no function definition is left after removing main")]
    NoFunctionsLeft,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SrcConfig {
    /// Replace character literals with `'C'` as well.
    pub anonymize_chars: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrcFunction {
    pub name: String,
    pub canonical: Option<String>,
    /// Token indices of the whole definition, return type through `}`.
    pub span: RangeInclusive<usize>,
    /// Token indices from `{` to its matching `}`.
    pub body_span: RangeInclusive<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrcNormalization {
    pub text: String,
    pub name_map: IndexMap<String, String>,
    pub diagnostics: Vec<String>,
}

/// Brace/paren structure over the significant tokens of a stream.
struct Structure<'t> {
    tokens: &'t [SrcToken],
    /// Indices into `tokens` of non-trivia, non-preprocessor tokens.
    sig: Vec<usize>,
    /// Matching delimiter, by position in `sig`.
    partner: HashMap<usize, usize>,
    /// `sig` positions of braces that do not open a scope (namespace,
    /// `extern "C"`).
    transparent: HashSet<usize>,
    /// `sig` positions dropped by normalization: namespace headers and their
    /// closing braces, `using namespace ...;`.
    namespace_syntax: HashSet<usize>,
}

impl<'t> Structure<'t> {
    fn new(tokens: &'t [SrcToken]) -> Self {
        let sig: Vec<usize> = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_trivia() && t.kind != TokenKind::Preprocessor)
            .map(|(i, _)| i)
            .collect();
        let mut s = Self {
            tokens,
            sig,
            partner: HashMap::new(),
            transparent: HashSet::new(),
            namespace_syntax: HashSet::new(),
        };
        s.match_delimiters();
        s.find_namespaces();
        s
    }

    fn text(&self, pos: usize) -> &'t str {
        &self.tokens[self.sig[pos]].text
    }

    fn kind(&self, pos: usize) -> TokenKind {
        self.tokens[self.sig[pos]].kind
    }

    fn match_delimiters(&mut self) {
        let mut stack: Vec<(usize, &'t str)> = Vec::new();
        for pos in 0..self.sig.len() {
            if self.kind(pos) != TokenKind::Punctuator {
                continue;
            }
            let t = self.text(pos);
            match t {
                "(" | "[" | "{" => stack.push((pos, t)),
                ")" | "]" | "}" => {
                    let open = match t {
                        ")" => "(",
                        "]" => "[",
                        _ => "{",
                    };
                    // tolerate stray closers in ill-formed code
                    if let Some(depth) = stack.iter().rposition(|(_, o)| *o == open) {
                        let (p, _) = stack[depth];
                        stack.truncate(depth);
                        self.partner.insert(p, pos);
                        self.partner.insert(pos, p);
                    }
                }
                _ => {}
            }
        }
    }

    fn find_namespaces(&mut self) {
        let n = self.sig.len();
        for pos in 0..n {
            match self.text(pos) {
                "namespace" if self.kind(pos) == TokenKind::Keyword => {
                    if pos > 0 && self.text(pos - 1) == "using" {
                        let end = (pos..n).find(|&p| self.text(p) == ";").unwrap_or(n - 1);
                        self.namespace_syntax.extend(pos - 1..=end);
                        continue;
                    }
                    let mut p = pos + 1;
                    while p < n && (self.kind(p) == TokenKind::Identifier || self.text(p) == "::") {
                        p += 1;
                    }
                    if p < n && self.text(p) == "{" {
                        if let Some(&close) = self.partner.get(&p) {
                            let start = if pos > 0 && self.text(pos - 1) == "inline" { pos - 1 } else { pos };
                            self.namespace_syntax.extend(start..=p);
                            self.namespace_syntax.insert(close);
                            self.transparent.insert(p);
                            self.transparent.insert(close);
                        }
                    }
                }
                "extern"
                    if pos + 2 < n && self.kind(pos + 1) == TokenKind::StringLiteral && self.text(pos + 2) == "{" => {
                        if let Some(&close) = self.partner.get(&(pos + 2)) {
                            self.transparent.insert(pos + 2);
                            self.transparent.insert(close);
                        }
                    }
                _ => {}
            }
        }
    }

    /// For a top-level `{`, the `sig` position of the defined function's name.
    fn definition_name(&self, brace: usize) -> Option<usize> {
        const TRAILING: &[&str] = &["const", "volatile", "noexcept", "override", "final", "mutable"];
        let mut p = brace.checked_sub(1)?;
        loop {
            let t = self.text(p);
            if TRAILING.contains(&t) {
                p = p.checked_sub(1)?;
                continue;
            }
            if t != ")" {
                return None;
            }
            let open = *self.partner.get(&p)?;
            let before = open.checked_sub(1)?;
            if matches!(self.text(before), "throw" | "noexcept") {
                p = before.checked_sub(1)?;
                continue;
            }
            return (self.kind(before) == TokenKind::Identifier).then_some(before);
        }
    }

    fn declaration_start(&self, name: usize) -> usize {
        let mut p = name;
        while p > 0 {
            let prev = p - 1;
            let t = self.text(prev);
            if t == ";" || t == "}" || (t == "{" && self.transparent.contains(&prev)) {
                break;
            }
            p = prev;
        }
        p
    }

    /// Top-level function definitions in order, as `sig` positions
    /// (start, name, open brace, close brace).
    fn definitions(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::new();
        let mut depth = 0usize;
        for pos in 0..self.sig.len() {
            if self.kind(pos) != TokenKind::Punctuator || self.transparent.contains(&pos) {
                continue;
            }
            match self.text(pos) {
                "{" => {
                    if depth == 0 {
                        if let (Some(name), Some(&close)) = (self.definition_name(pos), self.partner.get(&pos)) {
                            out.push((self.declaration_start(name), name, pos, close));
                        }
                    }
                    depth += 1;
                }
                "}" => depth = depth.saturating_sub(1),
                _ => {}
            }
        }
        out
    }
}

/// Canonical names for defined functions plus alpha-renames for colliding
/// identifiers. `main` is never renamed.
fn build_rename_map(
    defined: &[String],
    all_identifiers: &HashSet<&str>,
    seed: Option<&IndexMap<String, String>>,
) -> (IndexMap<String, String>, HashMap<String, String>) {
    let mut map: IndexMap<String, String> = IndexMap::new();
    let mut used: HashSet<String> = HashSet::new();
    if let Some(seed) = seed {
        for name in defined {
            if let Some(c) = seed.get(name) {
                map.insert(name.clone(), c.clone());
                used.insert(c.clone());
            }
        }
    }
    let mut next = 0usize;
    for name in defined {
        if name == "main" || map.contains_key(name) {
            continue;
        }
        while used.contains(&format!("funct{next}")) {
            next += 1;
        }
        let canonical = format!("funct{next}");
        used.insert(canonical.clone());
        map.insert(name.clone(), canonical);
    }

    let mut alpha = HashMap::new();
    for ident in all_identifiers {
        if map.contains_key(*ident) || !used.contains(*ident) {
            continue;
        }
        let mut renamed = format!("{ident}_");
        while all_identifiers.contains(renamed.as_str()) || used.contains(&renamed) {
            renamed.push('_');
        }
        alpha.insert(ident.to_string(), renamed);
    }
    (map, alpha)
}

pub fn find_functions(tokens: &[SrcToken]) -> Vec<SrcFunction> {
    let s = Structure::new(tokens);
    s.definitions()
        .into_iter()
        .map(|(start, name, open, close)| SrcFunction {
            name: s.text(name).to_string(),
            canonical: None,
            span: s.sig[start]..=s.sig[close],
            body_span: s.sig[open]..=s.sig[close],
        })
        .collect()
}

/// Renames function definitions and their uses in place, preserving all
/// other text. Names present in `name_map` keep their given canonical name.
pub fn canonicalize_src_names(text: &str, name_map: Option<&IndexMap<String, String>>) -> (String, IndexMap<String, String>) {
    let lexed = lex_c(text);
    let s = Structure::new(&lexed.tokens);
    let defined: Vec<String> = s.definitions().iter().map(|d| s.text(d.1).to_string()).collect();
    let idents: HashSet<&str> = lexed
        .tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Identifier)
        .map(|t| t.text.as_str())
        .collect();
    let (map, alpha) = build_rename_map(&defined, &idents, name_map);
    let out = lexed
        .tokens
        .iter()
        .map(|t| match t.kind {
            TokenKind::Identifier => map.get(&t.text).or_else(|| alpha.get(&t.text)).unwrap_or(&t.text).as_str(),
            _ => t.text.as_str(),
        })
        .collect();
    (out, map)
}

pub fn normalize_source(text: &str) -> Result<String, SrcError> {
    normalize_source_with(text, &SrcConfig::default()).map(|n| n.text)
}

pub fn normalize_source_with(text: &str, config: &SrcConfig) -> Result<SrcNormalization, SrcError> {
    let lexed = lex_c(text);
    let s = Structure::new(&lexed.tokens);
    let mut diagnostics: Vec<String> = lexed
        .diagnostics
        .iter()
        .map(|d| format!("line {}: {:?}", d.line, d.issue))
        .collect();

    let mut dropped: HashSet<usize> = s.namespace_syntax.clone();
    let mut defined = Vec::new();
    for (start, name, _, close) in s.definitions() {
        if s.text(name) == "main" {
            dropped.extend(start..=close);
        } else {
            defined.push(s.text(name).to_string());
        }
    }
    if defined.is_empty() {
        return Err(SrcError::NoFunctionsLeft);
    }

    let kept: Vec<usize> = (0..s.sig.len()).filter(|p| !dropped.contains(p)).collect();
    let idents: HashSet<&str> = kept
        .iter()
        .filter(|&&p| s.kind(p) == TokenKind::Identifier)
        .map(|&p| s.text(p))
        .collect();
    let (name_map, alpha) = build_rename_map(&defined, &idents, None);
    if idents.contains("main") {
        diagnostics.push("reference to `main` outside its removed definition left intact".into());
    }

    let pieces: Vec<&str> = kept
        .iter()
        .map(|&p| {
            let t = s.text(p);
            match s.kind(p) {
                TokenKind::Identifier => name_map.get(t).or_else(|| alpha.get(t)).map(String::as_str).unwrap_or(t),
                TokenKind::StringLiteral => STRING_PLACEHOLDER,
                TokenKind::CharLiteral if config.anonymize_chars => CHAR_PLACEHOLDER,
                _ => t,
            }
        })
        .collect();
    Ok(SrcNormalization { text: pieces.join(" "), name_map, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let out = normalize_source(r#"int main(){ f(); } void f(){ /*c*/ puts("hello"); }"#).unwrap();
        assert_eq!(out, r#"void funct0 ( ) { puts ( "STR" ) ; }"#);
        assert_eq!(normalize_source(&out).unwrap(), out);
    }

    #[test]
    fn main_only_leaves_nothing() {
        assert_eq!(normalize_source("int main(void) { return 0; }"), Err(SrcError::NoFunctionsLeft));
    }

    #[test]
    fn includes_namespaces_and_usings() {
        let src = "#include <cstdio>\n#include \"std_testcase.h\"\nusing namespace std;\nnamespace CWE762_x {\n// sink\nvoid bad() { char *d = new char[10]; delete d; }\n}\n";
        assert_eq!(
            normalize_source(src).unwrap(),
            "void funct0 ( ) { char * d = new char [ 10 ] ; delete d ; }"
        );
    }

    #[test]
    fn call_sites_and_prototypes_follow_renames() {
        let src = "static void sink(int x);\nvoid goodG2B() { sink(1); }\nstatic void sink(int x) { printIntLine(x); }";
        let n = normalize_source_with(src, &SrcConfig::default()).unwrap();
        assert_eq!(
            n.text,
            "static void funct1 ( int x ) ; void funct0 ( ) { funct1 ( 1 ) ; } static void funct1 ( int x ) { printIntLine ( x ) ; }"
        );
        assert_eq!(n.name_map.get_index(0), Some((&"goodG2B".to_string(), &"funct0".to_string())));
    }

    #[test]
    fn definition_order_names() {
        let (_, map) = canonicalize_src_names("void goodG2B(){} void goodG2BSink(){}", None);
        assert_eq!(map["goodG2B"], "funct0");
        assert_eq!(map["goodG2BSink"], "funct1");
    }

    #[test]
    fn colliding_identifier_is_alpha_renamed() {
        let (text, map) = canonicalize_src_names("int funct0;\nvoid f() { funct0 = 1; }", None);
        assert_eq!(text, "int funct0_;\nvoid funct0() { funct0_ = 1; }");
        assert_eq!(map["f"], "funct0");
    }

    #[test]
    fn empty_text_empty_map() {
        let (text, map) = canonicalize_src_names("", None);
        assert!(text.is_empty());
        assert!(map.is_empty());
    }

    #[test]
    fn seeded_map_is_honored() {
        let mut seed = IndexMap::new();
        seed.insert("b".to_string(), "funct0".to_string());
        let (text, map) = canonicalize_src_names("void a(){} void b(){ a(); }", Some(&seed));
        assert_eq!(text, "void funct1(){} void funct0(){ funct1(); }");
        assert_eq!(map["a"], "funct1");
    }

    #[test]
    fn char_literals_optional() {
        let src = "void f(){ char c = 'A'; }";
        assert!(normalize_source(src).unwrap().contains("'A'"));
        let anon = normalize_source_with(src, &SrcConfig { anonymize_chars: true }).unwrap();
        assert!(anon.text.contains("'C'"));
    }

    #[test]
    fn qualifiers_between_params_and_body() {
        let src = "int S::get() const { return v; }\nvoid g() noexcept(true) {}";
        let n = normalize_source_with(src, &SrcConfig::default()).unwrap();
        assert_eq!(n.name_map.keys().collect::<Vec<_>>(), ["get", "g"]);
    }

    #[test]
    fn main_call_is_flagged() {
        let n = normalize_source_with("void f(){ main(); } int main(){ return 0; }", &SrcConfig::default()).unwrap();
        assert_eq!(n.text, "void funct0 ( ) { main ( ) ; }");
        assert!(n.diagnostics.iter().any(|d| d.contains("main")));
    }

    #[test]
    fn function_spans() {
        let tokens = lex_c("int x; static int f(int a) { return a; }").tokens;
        let funcs = find_functions(&tokens);
        assert_eq!(funcs.len(), 1);
        assert_eq!(tokens[*funcs[0].span.start()].text, "static");
        assert_eq!(tokens[*funcs[0].body_span.start()].text, "{");
        assert_eq!(tokens[*funcs[0].body_span.end()].text, "}");
    }
}
