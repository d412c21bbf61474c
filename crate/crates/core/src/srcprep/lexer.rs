//! Lossless C/C++ lexer. Concatenating token texts reproduces the input.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    StringLiteral,
    CharLiteral,
    Comment,
    Punctuator,
    Preprocessor,
    Whitespace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrcToken {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the token's first byte.
    pub line: usize,
}

impl SrcToken {
    pub fn is_trivia(&self) -> bool {
        matches!(self.kind, TokenKind::Whitespace | TokenKind::Comment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LexIssue {
    UnterminatedLiteral,
    UnterminatedComment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexDiagnostic {
    pub issue: LexIssue,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexed {
    pub tokens: Vec<SrcToken>,
    pub diagnostics: Vec<LexDiagnostic>,
}

const KEYWORDS: &[&str] = &[
    "alignas", "alignof", "asm", "auto", "bool", "break", "case", "catch", "char", "class", "const", "constexpr",
    "const_cast", "continue", "decltype", "default", "delete", "do", "double", "dynamic_cast", "else", "enum",
    "explicit", "extern", "false", "float", "for", "friend", "goto", "if", "inline", "int", "long", "mutable",
    "namespace", "new", "noexcept", "nullptr", "operator", "private", "protected", "public", "register",
    "reinterpret_cast", "restrict", "return", "short", "signed", "sizeof", "static", "static_assert",
    "static_cast", "struct", "switch", "template", "this", "throw", "true", "try", "typedef", "typeid",
    "typename", "union", "unsigned", "using", "virtual", "void", "volatile", "wchar_t", "while", "_Bool",
];

// Longest first so maximal munch is a linear scan.
const PUNCTUATORS: &[&str] = &[
    "%:%:", "...", "<<=", ">>=", "->*", "<=>", "::", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&",
    "||", "*=", "/=", "%=", "+=", "-=", "&=", "^=", "|=", "##", ".*", "<:", ":>", "<%", "%>", "%:",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Length in bytes of a quoted literal starting at `s` (which begins with the
/// quote). Stops at the closing quote or before an unescaped newline.
fn quoted_len(s: &str, quote: char) -> (usize, bool) {
    let mut chars = s.char_indices().skip(1);
    while let Some((i, c)) = chars.next() {
        match c {
            '\\' => {
                // escaped char, including a line splice
                chars.next();
            }
            '\n' => return (i, false),
            c if c == quote => return (i + c.len_utf8(), true),
            _ => {}
        }
    }
    (s.len(), false)
}

/// `R"delim( ... )delim"` starting at the `"`.
fn raw_string_len(s: &str) -> Option<(usize, bool)> {
    let open = s[1..].find('(')?;
    let delim = &s[1..1 + open];
    if delim.len() > 16 || delim.contains(|c: char| c.is_whitespace() || c == '\\' || c == ')') {
        return None;
    }
    let close = format!("){delim}\"");
    match s[open + 2..].find(&close) {
        Some(i) => Some((open + 2 + i + close.len(), true)),
        None => Some((s.len(), false)),
    }
}

pub fn lex_c(text: &str) -> Lexed {
    let mut cur = Cursor { src: text, pos: 0, line: 1 };
    let mut out = Lexed::default();
    let mut at_line_start = true;

    while let Some(c) = cur.peek() {
        let start_line = cur.line;
        let rest = cur.rest();
        let (kind, len) = if c.is_whitespace() {
            let len = rest.find(|ch: char| !ch.is_whitespace()).unwrap_or(rest.len());
            (TokenKind::Whitespace, len)
        } else if rest.starts_with("//") {
            let mut len = rest.find('\n').unwrap_or(rest.len());
            // backslash-continued line comment
            while len < rest.len() && rest[..len].ends_with('\\') {
                len += 1 + rest[len + 1..].find('\n').unwrap_or(rest.len() - len - 1);
            }
            (TokenKind::Comment, len)
        } else if let Some(body) = rest.strip_prefix("/*") {
            match body.find("*/") {
                Some(i) => (TokenKind::Comment, i + 4),
                None => {
                    out.diagnostics.push(LexDiagnostic { issue: LexIssue::UnterminatedComment, line: start_line });
                    (TokenKind::Comment, rest.len())
                }
            }
        } else if c == '#' && at_line_start {
            let mut len = 0;
            loop {
                let line_end = rest[len..].find('\n').map(|i| len + i).unwrap_or(rest.len());
                // a block comment may span lines inside a directive
                let segment = &rest[len..line_end];
                if let Some(open) = segment.rfind("/*") {
                    if !segment[open..].contains("*/") {
                        if let Some(close) = rest[len + open..].find("*/") {
                            len = len + open + close + 2;
                            continue;
                        }
                    }
                }
                if line_end < rest.len() && rest[..line_end].ends_with('\\') {
                    len = line_end + 1;
                    continue;
                }
                len = line_end;
                break;
            }
            (TokenKind::Preprocessor, len)
        } else if let Some((prefix_len, quote)) = literal_prefix(rest) {
            let body = &rest[prefix_len..];
            let (len, ok) = if quote == 'R' {
                raw_string_len(body).unwrap_or_else(|| quoted_len(body, '"'))
            } else {
                quoted_len(body, quote)
            };
            if !ok {
                out.diagnostics.push(LexDiagnostic { issue: LexIssue::UnterminatedLiteral, line: start_line });
            }
            let kind = if quote == '\'' { TokenKind::CharLiteral } else { TokenKind::StringLiteral };
            (kind, prefix_len + len)
        } else if is_ident_start(c) {
            let len = rest.find(|ch: char| !is_ident_continue(ch)).unwrap_or(rest.len());
            let kind = if is_keyword(&rest[..len]) { TokenKind::Keyword } else { TokenKind::Identifier };
            (kind, len)
        } else if c.is_ascii_digit() || (c == '.' && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            (TokenKind::Number, pp_number_len(rest))
        } else {
            let len = PUNCTUATORS
                .iter()
                .find(|p| rest.starts_with(*p))
                .map(|p| p.len())
                .unwrap_or(c.len_utf8());
            (TokenKind::Punctuator, len)
        };

        let piece = &rest[..len];
        let newlines = piece.matches('\n').count();
        cur.line += newlines;
        cur.pos += len;
        at_line_start = match kind {
            TokenKind::Whitespace | TokenKind::Comment => at_line_start || newlines > 0,
            _ => false,
        };
        out.tokens.push(SrcToken { kind, text: piece.to_string(), line: start_line });
    }
    out
}

/// Detects string/char literal openings, including encoding prefixes.
/// Returns (prefix length, quote char) where `R` marks a raw string.
fn literal_prefix(rest: &str) -> Option<(usize, char)> {
    for prefix in ["u8R", "uR", "UR", "LR", "R"] {
        if rest.starts_with(prefix) && rest[prefix.len()..].starts_with('"') {
            return Some((prefix.len(), 'R'));
        }
    }
    for prefix in ["u8", "u", "U", "L", ""] {
        if let Some(after) = rest.strip_prefix(prefix) {
            if after.starts_with('"') {
                return Some((prefix.len(), '"'));
            }
            if after.starts_with('\'') {
                return Some((prefix.len(), '\''));
            }
        }
    }
    None
}

fn pp_number_len(s: &str) -> usize {
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        // a sign continues the number only after an exponent letter
        let exponent_sign = (b == b'+' || b == b'-') && i > 0 && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P');
        if exponent_sign || b.is_ascii_alphanumeric() || b == b'.' || b == b'_' {
            i += 1;
        } else if b == b'\'' && i > 0 && i + 1 < bytes.len() && bytes[i + 1].is_ascii_alphanumeric() {
            // C++14 digit separator
            i += 1;
        } else {
            break;
        }
    }
    i.max(1)
}
