//! Mutation points, single-fault mutants and their content-addressed ids.
//!
//! Each eligible operator token has exactly one replacement (the "minimal
//! set"): the engine never enumerates alternative replacements per token.
//!
//! | code  | replacements                                                    |
//! |-------|-----------------------------------------------------------------|
//! | AOR-B | `+`↔`-`, `*`↔`/`, `%`→`*`                                       |
//! | AOR-S | `++`↔`--` (prefix and postfix)                                  |
//! | AOR-U | unary `-`↔`+`                                                   |
//! | LOR   | `&`↔`|`, `^`→`&`                                                |
//! | SOR   | `<<`↔`>>`, `>>>`→`<<`                                           |
//! | ROR   | `<`↔`>=`, `<=`↔`>`, `==`↔`!=`                                   |
//! | COR   | `&&`↔`||`                                                       |
//! | COD   | delete logical `!`                                              |
//! | SAOR  | `+=`↔`-=`, `*=`↔`/=`, `%=`→`*=`, `&=`↔`|=`, `^=`→`&=`,          |
//! |       | `<<=`↔`>>=`, `>>>=`→`<<=`                                       |
//!
//! `*` and `&` are only mutated in binary position, so pointer dereference
//! and address-of are left alone.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lexer::{self, SignContext, Span, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MutationOperator {
    #[serde(rename = "AOR-B")]
    AorB,
    #[serde(rename = "AOR-S")]
    AorS,
    #[serde(rename = "AOR-U")]
    AorU,
    #[serde(rename = "LOR")]
    Lor,
    #[serde(rename = "SOR")]
    Sor,
    #[serde(rename = "ROR")]
    Ror,
    #[serde(rename = "COR")]
    Cor,
    #[serde(rename = "COD")]
    Cod,
    #[serde(rename = "SAOR")]
    Saor,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 9] = [
        MutationOperator::AorB,
        MutationOperator::AorS,
        MutationOperator::AorU,
        MutationOperator::Lor,
        MutationOperator::Sor,
        MutationOperator::Ror,
        MutationOperator::Cor,
        MutationOperator::Cod,
        MutationOperator::Saor,
    ];

    pub fn all() -> BTreeSet<MutationOperator> {
        Self::ALL.into_iter().collect()
    }

    pub fn code(self) -> &'static str {
        match self {
            MutationOperator::AorB => "AOR-B",
            MutationOperator::AorS => "AOR-S",
            MutationOperator::AorU => "AOR-U",
            MutationOperator::Lor => "LOR",
            MutationOperator::Sor => "SOR",
            MutationOperator::Ror => "ROR",
            MutationOperator::Cor => "COR",
            MutationOperator::Cod => "COD",
            MutationOperator::Saor => "SAOR",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            MutationOperator::AorB => "Replaces a binary arithmetic operator",
            MutationOperator::AorS => "Replaces a shortcut arithmetic operator",
            MutationOperator::AorU => "Replaces a unary arithmetic operator",
            MutationOperator::Lor => "Replaces a logical operator",
            MutationOperator::Sor => "Replaces a shift operator",
            MutationOperator::Ror => "Replaces a relational operator",
            MutationOperator::Cor => "Replaces a binary conditional operator",
            MutationOperator::Cod => "Removes a unary conditional operator",
            MutationOperator::Saor => "Replaces a shortcut assignment operator",
        }
    }
}

impl fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown mutation operator {0:?} (expected one of AOR-B, AOR-S, AOR-U, LOR, SOR, ROR, COR, COD, SAOR)")]
pub struct UnknownOperator(pub String);

impl FromStr for MutationOperator {
    type Err = UnknownOperator;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|op| op.code() == wanted)
            .ok_or_else(|| UnknownOperator(s.to_string()))
    }
}

/// Which operator applies to the token at `index`, and what it becomes.
pub fn replacement_for(
    tokens: &[Token<'_>],
    index: usize,
) -> Option<(MutationOperator, &'static str)> {
    use MutationOperator::*;
    let token = tokens.get(index)?;
    if token.kind != TokenKind::Operator {
        return None;
    }
    let binary = || lexer::follows_operand(tokens, index);
    let found = match token.text {
        "+" | "-" => {
            let ctx = lexer::classify_sign_context(tokens, index).ok()?;
            let swapped = if token.text == "+" { "-" } else { "+" };
            match ctx {
                SignContext::Binary => (AorB, swapped),
                _ => (AorU, swapped),
            }
        }
        "*" if binary() => (AorB, "/"),
        "/" => (AorB, "*"),
        "%" => (AorB, "*"),
        "++" => (AorS, "--"),
        "--" => (AorS, "++"),
        "&" if binary() => (Lor, "|"),
        "|" => (Lor, "&"),
        "^" => (Lor, "&"),
        "<<" => (Sor, ">>"),
        ">>" => (Sor, "<<"),
        ">>>" => (Sor, "<<"),
        "<" => (Ror, ">="),
        ">=" => (Ror, "<"),
        "<=" => (Ror, ">"),
        ">" => (Ror, "<="),
        "==" => (Ror, "!="),
        "!=" => (Ror, "=="),
        "&&" => (Cor, "||"),
        "||" => (Cor, "&&"),
        "!" => (Cod, ""),
        "+=" => (Saor, "-="),
        "-=" => (Saor, "+="),
        "*=" => (Saor, "/="),
        "/=" => (Saor, "*="),
        "%=" => (Saor, "*="),
        "&=" => (Saor, "|="),
        "|=" => (Saor, "&="),
        "^=" => (Saor, "&="),
        "<<=" => (Saor, ">>="),
        ">>=" => (Saor, "<<="),
        ">>>=" => (Saor, "<<="),
        _ => return None,
    };
    Some(found)
}

/// One place in one file where one operator applies.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MutationPoint {
    /// Path relative to the project root, `/`-separated.
    pub file: String,
    pub token_index: usize,
    pub span: Span,
    pub line: usize,
    pub original: String,
    pub operator: MutationOperator,
    /// Empty for COD deletions.
    pub replacement: String,
}

/// Enumerate every mutation point in `source` for the enabled operators,
/// ordered by span.
///
/// Points whose replacement would merge with a neighbouring token (for
/// example `a+-b` becoming `a--b`) are skipped: the result would not be a
/// single-token fault.
pub fn enumerate_points(
    file: &str,
    source: &str,
    enabled: &BTreeSet<MutationOperator>,
) -> Vec<MutationPoint> {
    let tokens = lexer::tokenize(source);
    let mut points = Vec::new();
    for token in &tokens {
        let Some((operator, replacement)) = replacement_for(&tokens, token.index) else {
            continue;
        };
        if !enabled.contains(&operator) || !relexes_cleanly(&tokens, token.index, replacement) {
            continue;
        }
        points.push(MutationPoint {
            file: file.to_string(),
            token_index: token.index,
            span: token.span,
            line: token.line,
            original: token.text.to_string(),
            operator,
            replacement: replacement.to_string(),
        });
    }
    points
}

/// Lex a small window around the replacement and check the token boundaries
/// survive. Adjacent whitespace is allowed to coalesce.
fn relexes_cleanly(tokens: &[Token<'_>], index: usize, replacement: &str) -> bool {
    let lo = index.saturating_sub(2);
    let hi = (index + 3).min(tokens.len());
    let mut window = String::new();
    let mut expected: Vec<String> = Vec::new();
    for t in &tokens[lo..hi] {
        let text = if t.index == index {
            replacement
        } else {
            t.text
        };
        window.push_str(text);
        if text.is_empty() {
            continue;
        }
        let is_ws = t.index != index && t.kind == TokenKind::Whitespace;
        match expected.last_mut() {
            Some(last) if is_ws && last.chars().all(char::is_whitespace) => last.push_str(text),
            _ => expected.push(text.to_string()),
        }
    }
    let relexed = lexer::tokenize(&window);
    relexed.len() == expected.len() && relexed.iter().zip(&expected).all(|(t, e)| t.text == e)
}

/// 256-bit content hash identifying a mutant across runs and checkouts.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MutantId([u8; 32]);

impl MutantId {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// First 12 hex digits, for human-facing output.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..6])
    }
}

impl fmt::Display for MutantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for MutantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MutantId({})", self.short())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid mutant id {0:?}: expected 64 hex digits")]
pub struct InvalidMutantId(pub String);

impl FromStr for MutantId {
    type Err = InvalidMutantId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(s, &mut bytes).map_err(|_| InvalidMutantId(s.to_string()))?;
        Ok(MutantId(bytes))
    }
}

impl Serialize for MutantId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MutantId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

const ID_DOMAIN: &[u8] = b"mutagate/mutant/v1";

/// SHA-256 over the length-prefixed tuple
/// (file, operator code, span start, original, replacement).
pub fn mutant_id(point: &MutationPoint) -> MutantId {
    let mut hasher = Sha256::new();
    hasher.update(ID_DOMAIN);
    let start = point.span.start.to_string();
    for field in [
        point.file.as_bytes(),
        point.operator.code().as_bytes(),
        start.as_bytes(),
        point.original.as_bytes(),
        point.replacement.as_bytes(),
    ] {
        hasher.update((field.len() as u64).to_le_bytes());
        hasher.update(field);
    }
    MutantId(hasher.finalize().into())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mutant {
    pub id: MutantId,
    pub point: MutationPoint,
    pub mutated_source: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MutationError {
    #[error("stale mutation point in {file} at bytes {}..{}: expected {expected:?}, found {found:?}", span.start, span.end)]
    StalePoint {
        file: String,
        span: Span,
        expected: String,
        found: String,
    },
    #[error("duplicate mutation point in {file} at byte {start}")]
    DuplicatePoint { file: String, start: usize },
}

/// Apply one point to `source`, checking it still matches.
pub fn apply_point(point: &MutationPoint, source: &str) -> Result<String, MutationError> {
    let found = source.get(point.span.start..point.span.end);
    if found != Some(point.original.as_str()) {
        return Err(MutationError::StalePoint {
            file: point.file.clone(),
            span: point.span,
            expected: point.original.clone(),
            found: found.unwrap_or("<out of range>").to_string(),
        });
    }
    let mut mutated = String::with_capacity(source.len() + point.replacement.len());
    mutated.push_str(&source[..point.span.start]);
    mutated.push_str(&point.replacement);
    mutated.push_str(&source[point.span.end..]);
    Ok(mutated)
}

/// One mutant per point. All points must come from the same `source`.
pub fn generate_mutants(
    points: &[MutationPoint],
    source: &str,
) -> Result<Vec<Mutant>, MutationError> {
    let mut seen = BTreeSet::new();
    points
        .iter()
        .map(|point| {
            let mutated_source = apply_point(point, source)?;
            let id = mutant_id(point);
            if !seen.insert(id) {
                return Err(MutationError::DuplicatePoint {
                    file: point.file.clone(),
                    start: point.span.start,
                });
            }
            Ok(Mutant {
                id,
                point: point.clone(),
                mutated_source,
            })
        })
        .collect()
}
