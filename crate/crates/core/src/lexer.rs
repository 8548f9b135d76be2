//! Lossless, language-lenient tokenizer for C-family sources.
//!
//! The lexer only needs to know enough to find operator tokens that are safe
//! to mutate: literals and comments are opaque, preprocessor lines are a
//! single opaque token, and everything it does not recognise is emitted as
//! single-character punctuation. Joining the `text` of every token always
//! reproduces the input exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    IntegerLiteral,
    FloatLiteral,
    StringLiteral,
    CharLiteral,
    LineComment,
    BlockComment,
    Operator,
    Punctuation,
    Whitespace,
}

impl TokenKind {
    pub fn is_trivia(self) -> bool {
        matches!(
            self,
            TokenKind::Whitespace | TokenKind::LineComment | TokenKind::BlockComment
        )
    }

    pub fn is_literal(self) -> bool {
        matches!(
            self,
            TokenKind::IntegerLiteral
                | TokenKind::FloatLiteral
                | TokenKind::StringLiteral
                | TokenKind::CharLiteral
        )
    }
}

/// Half-open byte range into the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'src> {
    pub kind: TokenKind,
    pub text: &'src str,
    pub span: Span,
    /// 1-based line of the first byte.
    pub line: usize,
    pub index: usize,
    /// Set on unterminated string/char literals and block comments.
    pub malformed: bool,
}

/// Operators recognised by maximal munch, longest first.
pub const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "+", "-", "*", "/", "%", "&", "|", "^", "<", ">",
    "!", "=", "?", ":", "~",
];

/// Multi-character punctuation that must not be split into operators.
const PUNCT_MULTI: &[&str] = &["->", "::"];

const PUNCT_SINGLE: &[u8] = b"()[]{},;.";

const KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "auto",
    "bool",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "delete",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "extern",
    "false",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "inline",
    "instanceof",
    "int",
    "interface",
    "long",
    "namespace",
    "native",
    "new",
    "null",
    "nullptr",
    "package",
    "private",
    "protected",
    "public",
    "register",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "super",
    "switch",
    "synchronized",
    "template",
    "this",
    "throw",
    "throws",
    "transient",
    "true",
    "try",
    "typedef",
    "typename",
    "union",
    "unsigned",
    "using",
    "var",
    "virtual",
    "void",
    "volatile",
    "while",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

struct Lexer<'src> {
    src: &'src str,
    bytes: &'src [u8],
    pos: usize,
    line: usize,
    at_line_start: bool,
    tokens: Vec<Token<'src>>,
}

/// Tokenize `source`. Never fails: malformed regions are flagged on the token.
pub fn tokenize(source: &str) -> Vec<Token<'_>> {
    let mut lexer = Lexer {
        src: source,
        bytes: source.as_bytes(),
        pos: 0,
        line: 1,
        at_line_start: true,
        tokens: Vec::new(),
    };
    lexer.run();
    lexer.tokens
}

impl<'src> Lexer<'src> {
    fn run(&mut self) {
        while self.pos < self.bytes.len() {
            let start = self.pos;
            let (kind, malformed) = self.next_kind();
            debug_assert!(self.pos > start);
            let text = &self.src[start..self.pos];
            let line = self.line;
            self.line += text.bytes().filter(|&b| b == b'\n').count();
            if kind == TokenKind::Whitespace {
                if text.contains('\n') {
                    self.at_line_start = true;
                }
            } else if !kind.is_trivia() {
                self.at_line_start = false;
            }
            let index = self.tokens.len();
            self.tokens.push(Token {
                kind,
                text,
                span: Span::new(start, self.pos),
                line,
                index,
                malformed,
            });
        }
    }

    fn peek(&self, offset: usize) -> Option<u8> {
        self.bytes.get(self.pos + offset).copied()
    }

    fn rest(&self) -> &'src str {
        &self.src[self.pos..]
    }

    fn next_kind(&mut self) -> (TokenKind, bool) {
        let c = self.bytes[self.pos];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => {
                while matches!(
                    self.peek(0),
                    Some(b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
                ) {
                    self.pos += 1;
                }
                (TokenKind::Whitespace, false)
            }
            b'/' if self.peek(1) == Some(b'/') => {
                self.skip_to_eol();
                (TokenKind::LineComment, false)
            }
            b'/' if self.peek(1) == Some(b'*') => match self.rest()[2..].find("*/") {
                Some(off) => {
                    self.pos += 2 + off + 2;
                    (TokenKind::BlockComment, false)
                }
                None => {
                    self.pos = self.bytes.len();
                    (TokenKind::BlockComment, true)
                }
            },
            b'#' if self.at_line_start => {
                self.skip_directive();
                (TokenKind::Punctuation, false)
            }
            b'"' => (TokenKind::StringLiteral, !self.skip_quoted(b'"')),
            b'\'' => (TokenKind::CharLiteral, !self.skip_quoted(b'\'')),
            b'0'..=b'9' => (self.number(), false),
            b'.' if matches!(self.peek(1), Some(b'0'..=b'9')) => (self.number(), false),
            _ if is_ident_start(self.rest()) => {
                let start = self.pos;
                self.skip_ident();
                if is_keyword(&self.src[start..self.pos]) {
                    (TokenKind::Keyword, false)
                } else {
                    (TokenKind::Identifier, false)
                }
            }
            _ => {
                let rest = self.rest();
                if let Some(p) = PUNCT_MULTI.iter().find(|p| rest.starts_with(**p)) {
                    self.pos += p.len();
                    return (TokenKind::Punctuation, false);
                }
                if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) {
                    self.pos += op.len();
                    return (TokenKind::Operator, false);
                }
                if PUNCT_SINGLE.contains(&c) {
                    self.pos += 1;
                } else {
                    // Any other character (including non-ASCII) becomes one
                    // punctuation token so the stream stays lossless.
                    self.pos += rest.chars().next().map_or(1, char::len_utf8);
                }
                (TokenKind::Punctuation, false)
            }
        }
    }

    fn skip_to_eol(&mut self) {
        while let Some(b) = self.peek(0) {
            if b == b'\n' {
                break;
            }
            self.pos += 1;
        }
    }

    /// A preprocessor directive, including backslash-continued lines.
    fn skip_directive(&mut self) {
        while let Some(b) = self.peek(0) {
            match b {
                b'\n' => break,
                b'\\' if self.peek(1) == Some(b'\n') => self.pos += 2,
                b'\\' if self.peek(1) == Some(b'\r') && self.peek(2) == Some(b'\n') => {
                    self.pos += 3
                }
                _ => self.pos += 1,
            }
        }
    }

    /// Returns false when the closing quote is missing.
    fn skip_quoted(&mut self, quote: u8) -> bool {
        self.pos += 1;
        while let Some(b) = self.peek(0) {
            if b == b'\\' {
                // Step over the escaped character, which may be multi-byte.
                self.pos += 1;
                if let Some(ch) = self.rest().chars().next() {
                    self.pos += ch.len_utf8();
                }
                continue;
            }
            self.pos += 1;
            if b == quote {
                return true;
            }
        }
        false
    }

    fn skip_ident(&mut self) {
        while let Some(ch) = self.rest().chars().next() {
            if ch == '_' || ch == '$' || ch.is_alphanumeric() {
                self.pos += ch.len_utf8();
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> TokenKind {
        let mut float = false;
        let radix_prefix =
            self.peek(0) == Some(b'0') && matches!(self.peek(1), Some(b'x' | b'X' | b'b' | b'B'));
        if radix_prefix {
            self.pos += 2;
            while matches!(self.peek(0), Some(b) if b.is_ascii_hexdigit() || b == b'_') {
                self.pos += 1;
            }
        } else {
            while matches!(self.peek(0), Some(b) if b.is_ascii_digit() || b == b'_') {
                self.pos += 1;
            }
            if self.peek(0) == Some(b'.') && !matches!(self.peek(1), Some(b'.')) {
                float = true;
                self.pos += 1;
                while matches!(self.peek(0), Some(b) if b.is_ascii_digit() || b == b'_') {
                    self.pos += 1;
                }
            }
            if matches!(self.peek(0), Some(b'e' | b'E')) {
                let sign = usize::from(matches!(self.peek(1), Some(b'+' | b'-')));
                if matches!(self.peek(1 + sign), Some(b'0'..=b'9')) {
                    float = true;
                    self.pos += 1 + sign;
                    while matches!(self.peek(0), Some(b'0'..=b'9')) {
                        self.pos += 1;
                    }
                }
            }
        }
        // Type suffixes: 10L, 3.0f, 1ULL ...
        while let Some(b) = self.peek(0) {
            match b {
                b'f' | b'F' | b'd' | b'D' if !radix_prefix => {
                    float = true;
                    self.pos += 1;
                }
                b'u' | b'U' | b'l' | b'L' => self.pos += 1,
                _ => break,
            }
        }
        if float {
            TokenKind::FloatLiteral
        } else {
            TokenKind::IntegerLiteral
        }
    }
}

fn is_ident_start(rest: &str) -> bool {
    rest.chars()
        .next()
        .is_some_and(|ch| ch == '_' || ch == '$' || ch.is_alphabetic())
}

/// How a `+`, `-`, `++` or `--` token is used at its position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignContext {
    Unary,
    Binary,
    Prefix,
    Postfix,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignContextError {
    #[error("token index {index} out of range (stream has {len} tokens)")]
    OutOfRange { index: usize, len: usize },
    #[error("token {index} ({text:?}) is not one of + - ++ --")]
    NotEligible { index: usize, text: String },
}

/// Classify a sign or increment token by the nearest preceding significant
/// token: operands, closing brackets and postfix increments put it in binary
/// (resp. postfix) position, anything else in unary (resp. prefix) position.
pub fn classify_sign_context(
    tokens: &[Token<'_>],
    index: usize,
) -> Result<SignContext, SignContextError> {
    let token = tokens.get(index).ok_or(SignContextError::OutOfRange {
        index,
        len: tokens.len(),
    })?;
    let incdec = match (token.kind, token.text) {
        (TokenKind::Operator, "+" | "-") => false,
        (TokenKind::Operator, "++" | "--") => true,
        _ => {
            return Err(SignContextError::NotEligible {
                index,
                text: token.text.to_string(),
            })
        }
    };
    let after_operand = follows_operand(tokens, index);
    Ok(match (incdec, after_operand) {
        (false, true) => SignContext::Binary,
        (false, false) => SignContext::Unary,
        (true, true) => SignContext::Postfix,
        (true, false) => SignContext::Prefix,
    })
}

/// True when the nearest preceding significant token ends an operand.
pub fn follows_operand(tokens: &[Token<'_>], index: usize) -> bool {
    let mut i = index;
    while i > 0 {
        i -= 1;
        let prev = &tokens[i];
        if prev.kind.is_trivia() {
            continue;
        }
        return match prev.kind {
            TokenKind::Identifier => true,
            k if k.is_literal() => true,
            TokenKind::Punctuation => matches!(prev.text, ")" | "]"),
            TokenKind::Operator if matches!(prev.text, "++" | "--") => {
                // postfix iff it itself follows an operand
                follows_operand(tokens, i)
            }
            _ => false,
        };
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds_and_texts(src: &str) -> Vec<(TokenKind, &str)> {
        tokenize(src)
            .into_iter()
            .map(|t| (t.kind, t.text))
            .collect()
    }

    fn ops(src: &str) -> Vec<&str> {
        tokenize(src)
            .into_iter()
            .filter(|t| t.kind == TokenKind::Operator)
            .map(|t| t.text)
            .collect()
    }

    #[test]
    fn keywords_are_sorted() {
        let mut sorted = KEYWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, KEYWORDS);
    }

    #[test]
    fn smallest_binary_expression() {
        use TokenKind::*;
        assert_eq!(
            kinds_and_texts("a + b"),
            vec![
                (Identifier, "a"),
                (Whitespace, " "),
                (Operator, "+"),
                (Whitespace, " "),
                (Identifier, "b"),
            ]
        );
    }

    #[test]
    fn maximal_munch_relational() {
        assert_eq!(ops("a >= b"), vec![">="]);
        assert_eq!(ops("a>>>=b"), vec![">>>="]);
        assert_eq!(ops("a+++b"), vec!["++", "+"]);
    }

    #[test]
    fn every_operator_lexes_alone() {
        for op in OPERATORS {
            let toks = tokenize(op);
            assert_eq!(toks.len(), 1, "{op}");
            assert_eq!(toks[0].kind, TokenKind::Operator);
            assert_eq!(toks[0].text, *op);
        }
    }

    #[test]
    fn literals_and_comments_are_opaque() {
        let src = "s = \"a+b\"; // x<y";
        assert_eq!(ops(src), vec!["="]);
        let toks = tokenize(src);
        assert!(toks
            .iter()
            .any(|t| t.kind == TokenKind::StringLiteral && t.text == "\"a+b\""));
        assert!(toks
            .iter()
            .any(|t| t.kind == TokenKind::LineComment && t.text == "// x<y"));
    }

    #[test]
    fn escapes_inside_literals() {
        let toks = tokenize(r#"x = "a\"+b" + '\'';"#);
        let lits: Vec<_> = toks
            .iter()
            .filter(|t| t.kind.is_literal())
            .map(|t| t.text)
            .collect();
        assert_eq!(lits, vec![r#""a\"+b""#, r"'\''"]);
        assert_eq!(
            toks.iter()
                .filter(|t| t.kind == TokenKind::Operator)
                .count(),
            2
        );
    }

    #[test]
    fn unterminated_regions_are_flagged() {
        for src in ["x = \"abc + d", "c = 'a", "/* open + comment"] {
            let toks = tokenize(src);
            let last = toks.last().unwrap();
            assert!(last.malformed, "{src}");
            assert_eq!(last.span.end, src.len());
        }
        assert!(tokenize("\"ok\" /* fine */").iter().all(|t| !t.malformed));
    }

    #[test]
    fn block_comment_spans_lines() {
        let toks = tokenize("a /* x\n + y */ - b\nc");
        let c = toks.last().unwrap();
        assert_eq!(c.text, "c");
        assert_eq!(c.line, 3);
        assert_eq!(ops("a /* x\n + y */ - b"), vec!["-"]);
    }

    #[test]
    fn numbers() {
        use TokenKind::*;
        let nums: Vec<_> = tokenize("1 0x1F 10L 3.14 .5 1e+5 2.0f 1_000 0b101")
            .into_iter()
            .filter(|t| t.kind != Whitespace)
            .map(|t| (t.kind, t.text))
            .collect();
        assert_eq!(
            nums,
            vec![
                (IntegerLiteral, "1"),
                (IntegerLiteral, "0x1F"),
                (IntegerLiteral, "10L"),
                (FloatLiteral, "3.14"),
                (FloatLiteral, ".5"),
                (FloatLiteral, "1e+5"),
                (FloatLiteral, "2.0f"),
                (IntegerLiteral, "1_000"),
                (IntegerLiteral, "0b101"),
            ]
        );
        assert_eq!(ops("x = 1e+5 - 2"), vec!["=", "-"]);
    }

    #[test]
    fn preprocessor_lines_are_opaque() {
        let src = "#include <stdio.h>\n#define ADD(a, b) \\\n  ((a) + (b))\nint x = a+b;";
        let toks = tokenize(src);
        assert_eq!(toks[0].kind, TokenKind::Punctuation);
        assert_eq!(toks[0].text, "#include <stdio.h>");
        assert!(toks[2].text.starts_with("#define") && toks[2].text.ends_with("((a) + (b))"));
        assert_eq!(ops(src), vec!["=", "+"]);
        // '#' that is not at line start is ordinary punctuation
        assert_eq!(ops("x # y + z"), vec!["+"]);
    }

    #[test]
    fn arrows_and_scopes_are_not_operators() {
        assert!(ops("p->x").is_empty());
        assert!(ops("std::max").is_empty());
    }

    #[test]
    fn line_numbers_and_indices() {
        let toks = tokenize("a\nb\n\nc");
        let idents: Vec<_> = toks
            .iter()
            .filter(|t| t.kind == TokenKind::Identifier)
            .map(|t| (t.text, t.line))
            .collect();
        assert_eq!(idents, vec![("a", 1), ("b", 2), ("c", 4)]);
        assert!(toks.iter().enumerate().all(|(i, t)| t.index == i));
    }

    #[test]
    fn non_ascii_round_trips() {
        let src = "naïve = «x» + 'é'; // ünïcode\n";
        let joined: String = tokenize(src).iter().map(|t| t.text).collect();
        assert_eq!(joined, src);
    }

    fn sign_of(src: &str, nth: usize) -> SignContext {
        let toks = tokenize(src);
        let idx = toks
            .iter()
            .filter(|t| matches!(t.text, "+" | "-" | "++" | "--"))
            .nth(nth)
            .unwrap()
            .index;
        classify_sign_context(&toks, idx).unwrap()
    }

    #[test]
    fn sign_context_rule() {
        assert_eq!(sign_of("-a", 0), SignContext::Unary);
        assert_eq!(sign_of("a - b", 0), SignContext::Binary);
        assert_eq!(sign_of("f(-x) * (-1)", 0), SignContext::Unary);
        assert_eq!(sign_of("f(-x) * (-1)", 1), SignContext::Unary);
        assert_eq!(sign_of("a[i] - 1", 0), SignContext::Binary);
        assert_eq!(sign_of("return -x;", 0), SignContext::Unary);
        assert_eq!(sign_of("\"s\" + t", 0), SignContext::Binary);
        assert_eq!(sign_of("x /* c */ - y", 0), SignContext::Binary);
        assert_eq!(sign_of("++a", 0), SignContext::Prefix);
        assert_eq!(sign_of("a++", 0), SignContext::Postfix);
        assert_eq!(sign_of("a++ + b", 1), SignContext::Binary);
        assert_eq!(sign_of("a + ++b", 1), SignContext::Prefix);
        assert_eq!(sign_of("x = --y", 0), SignContext::Prefix);
        assert_eq!(sign_of("(x)--", 0), SignContext::Postfix);
    }

    #[test]
    fn sign_context_errors() {
        let toks = tokenize("a * b");
        assert_eq!(
            classify_sign_context(&toks, 99),
            Err(SignContextError::OutOfRange { index: 99, len: 5 })
        );
        assert!(matches!(
            classify_sign_context(&toks, 2),
            Err(SignContextError::NotEligible { .. })
        ));
        // a "-" inside a string literal is not an operator token
        let toks = tokenize("\"-\"");
        assert!(classify_sign_context(&toks, 0).is_err());
    }
}
