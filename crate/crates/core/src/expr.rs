// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! SPDX license expressions.
//!
//! Expressions are parsed into a binary tree where `AND` binds tighter than
//! `OR` and both operators associate to the left. [`to_choice_sets`] expands a
//! tree into its disjunctive normal form: every returned [`ChoiceSet`] is one
//! way a licensee can satisfy the expression (`OR` is a choice, `AND` means
//! every operand applies).

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Default upper bound on the number of choice sets produced by a DNF expansion.
pub const DEFAULT_CHOICE_SET_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("expression expands to more than {cap} choice sets")]
    ExpansionLimit { cap: usize },
}

/// A single license reference, optionally with `+` and a `WITH` exception.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LicenseTerm {
    pub license_id: String,
    pub or_later: bool,
    pub exception_id: Option<String>,
}

impl LicenseTerm {
    pub fn new(license_id: impl Into<String>) -> Self {
        Self {
            license_id: license_id.into(),
            or_later: false,
            exception_id: None,
        }
    }

    pub fn or_later(mut self) -> Self {
        self.or_later = true;
        self
    }

    pub fn with_exception(mut self, exception: impl Into<String>) -> Self {
        self.exception_id = Some(exception.into());
        self
    }

    pub fn is_license_ref(&self) -> bool {
        self.license_id.starts_with("LicenseRef-")
    }
}

impl fmt::Display for LicenseTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.license_id)?;
        if self.or_later {
            f.write_str("+")?;
        }
        if let Some(exception) = &self.exception_id {
            write!(f, " WITH {exception}")?;
        }
        Ok(())
    }
}

// Terms order by their rendering so choice sets sort the way they print.
impl Ord for LicenseTerm {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_string().cmp(&other.to_string())
    }
}

impl PartialOrd for LicenseTerm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LicenseExpression {
    Term(LicenseTerm),
    Conjunction(Box<LicenseExpression>, Box<LicenseExpression>),
    Disjunction(Box<LicenseExpression>, Box<LicenseExpression>),
}

impl LicenseExpression {
    pub fn term(id: impl Into<String>) -> Self {
        Self::Term(LicenseTerm::new(id))
    }

    pub fn and(self, rhs: Self) -> Self {
        Self::Conjunction(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Self) -> Self {
        Self::Disjunction(Box::new(self), Box::new(rhs))
    }

    pub fn parse(text: &str) -> Result<Self, ExprError> {
        parse_expression(text)
    }

    /// Nesting depth; a bare term has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Self::Term(_) => 1,
            Self::Conjunction(l, r) | Self::Disjunction(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = &LicenseTerm> {
        let mut stack = vec![self];
        std::iter::from_fn(move || loop {
            match stack.pop()? {
                Self::Term(t) => return Some(t),
                Self::Conjunction(l, r) | Self::Disjunction(l, r) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        })
    }

    /// Folds `exprs` into a left-nested conjunction. `None` when empty.
    pub fn all_of<I: IntoIterator<Item = Self>>(exprs: I) -> Option<Self> {
        exprs.into_iter().reduce(Self::and)
    }
}

impl fmt::Display for LicenseExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

impl FromStr for LicenseExpression {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

impl Serialize for LicenseExpression {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&render(self))
    }
}

impl<'de> Deserialize<'de> for LicenseExpression {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_expression(&text).map_err(serde::de::Error::custom)
    }
}

/// One conjunction of simultaneously applicable licenses.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChoiceSet(BTreeSet<LicenseTerm>);

impl ChoiceSet {
    /// Returns `None` for an empty set of terms.
    pub fn new<I: IntoIterator<Item = LicenseTerm>>(terms: I) -> Option<Self> {
        let terms: BTreeSet<_> = terms.into_iter().collect();
        (!terms.is_empty()).then_some(Self(terms))
    }

    pub fn terms(&self) -> impl Iterator<Item = &LicenseTerm> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, term: &LicenseTerm) -> bool {
        self.0.contains(term)
    }
}

impl fmt::Display for ChoiceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, term) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{term}")?;
        }
        Ok(())
    }
}

impl Serialize for ChoiceSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter().map(ToString::to_string))
    }
}

impl<'de> Deserialize<'de> for ChoiceSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rendered = Vec::<String>::deserialize(deserializer)?;
        let mut terms = BTreeSet::new();
        for text in rendered {
            match parse_expression(&text).map_err(serde::de::Error::custom)? {
                LicenseExpression::Term(t) => {
                    terms.insert(t);
                }
                _ => return Err(serde::de::Error::custom("choice set entries must be single terms")),
            }
        }
        Self::new(terms).ok_or_else(|| serde::de::Error::custom("empty choice set"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    Plus,
    And,
    Or,
    With,
    Open,
    Close,
}

fn is_id_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '.' || c == '-'
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                tokens.push((pos, Token::Open));
            }
            ')' => {
                chars.next();
                tokens.push((pos, Token::Close));
            }
            '+' => {
                chars.next();
                tokens.push((pos, Token::Plus));
            }
            c if is_id_char(c) => {
                let mut end = pos;
                while let Some(&(i, c)) = chars.peek() {
                    if !is_id_char(c) {
                        break;
                    }
                    end = i + c.len_utf8();
                    chars.next();
                }
                let word = &text[pos..end];
                let token = if word.eq_ignore_ascii_case("AND") {
                    Token::And
                } else if word.eq_ignore_ascii_case("OR") {
                    Token::Or
                } else if word.eq_ignore_ascii_case("WITH") {
                    Token::With
                } else {
                    Token::Ident(word.to_string())
                };
                tokens.push((pos, token));
            }
            _ => {
                return Err(ExprError::Syntax {
                    position: pos,
                    expected: "license identifier, operator or parenthesis".into(),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [(usize, Token)],
    idx: usize,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx).map(|(_, t)| t)
    }

    fn position(&self) -> usize {
        self.tokens.get(self.idx).map_or(self.end, |(p, _)| *p)
    }

    fn error(&self, expected: &str) -> ExprError {
        ExprError::Syntax {
            position: self.position(),
            expected: expected.into(),
        }
    }

    fn or_expr(&mut self) -> Result<LicenseExpression, ExprError> {
        let mut lhs = self.and_expr()?;
        while self.peek() == Some(&Token::Or) {
            self.idx += 1;
            let rhs = self.and_expr()?;
            lhs = lhs.or(rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<LicenseExpression, ExprError> {
        let mut lhs = self.primary()?;
        while self.peek() == Some(&Token::And) {
            self.idx += 1;
            let rhs = self.primary()?;
            lhs = lhs.and(rhs);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<LicenseExpression, ExprError> {
        match self.peek() {
            Some(Token::Open) => {
                self.idx += 1;
                let inner = self.or_expr()?;
                if self.peek() != Some(&Token::Close) {
                    return Err(self.error("')'"));
                }
                self.idx += 1;
                Ok(inner)
            }
            Some(Token::Ident(_)) => self.term().map(LicenseExpression::Term),
            _ => Err(self.error("license identifier or '('")),
        }
    }

    fn term(&mut self) -> Result<LicenseTerm, ExprError> {
        let (pos, token) = &self.tokens[self.idx];
        let Token::Ident(id) = token else {
            return Err(self.error("license identifier"));
        };
        let mut term = LicenseTerm::new(id.clone());
        let id_end = pos + id.len();
        self.idx += 1;
        if let Some((plus_pos, Token::Plus)) = self.tokens.get(self.idx) {
            if *plus_pos != id_end {
                return Err(ExprError::Syntax {
                    position: *plus_pos,
                    expected: "'+' directly after the license identifier".into(),
                });
            }
            term.or_later = true;
            self.idx += 1;
        }
        if self.peek() == Some(&Token::With) {
            self.idx += 1;
            match self.peek() {
                Some(Token::Ident(exception)) => {
                    term.exception_id = Some(exception.clone());
                    self.idx += 1;
                }
                _ => return Err(self.error("exception identifier after WITH")),
            }
        }
        Ok(term)
    }
}

/// Parses an SPDX license expression.
///
/// Operators are case-insensitive, identifiers keep their case.
pub fn parse_expression(text: &str) -> Result<LicenseExpression, ExprError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens: &tokens,
        idx: 0,
        end: text.len(),
    };
    let expr = parser.or_expr()?;
    if parser.idx != tokens.len() {
        return Err(parser.error("operator or end of expression"));
    }
    Ok(expr)
}

/// Renders with the minimum parentheses needed to parse back to the same tree.
pub fn render(expr: &LicenseExpression) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out);
    out
}

fn precedence(expr: &LicenseExpression) -> u8 {
    match expr {
        LicenseExpression::Disjunction(..) => 1,
        LicenseExpression::Conjunction(..) => 2,
        LicenseExpression::Term(_) => 3,
    }
}

fn write_expr(expr: &LicenseExpression, out: &mut String) {
    let (l, r, op) = match expr {
        LicenseExpression::Term(t) => {
            out.push_str(&t.to_string());
            return;
        }
        LicenseExpression::Conjunction(l, r) => (l, r, " AND "),
        LicenseExpression::Disjunction(l, r) => (l, r, " OR "),
    };
    let own = precedence(expr);
    // Left operand may share our precedence (left associativity); the right
    // one needs parentheses unless it binds strictly tighter.
    write_operand(l, precedence(l) < own, out);
    out.push_str(op);
    write_operand(r, precedence(r) <= own, out);
}

fn write_operand(expr: &LicenseExpression, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        write_expr(expr, out);
        out.push(')');
    } else {
        write_expr(expr, out);
    }
}

/// Expands `expr` into deduplicated, sorted choice sets.
pub fn to_choice_sets(expr: &LicenseExpression) -> Result<Vec<ChoiceSet>, ExprError> {
    to_choice_sets_capped(expr, DEFAULT_CHOICE_SET_CAP)
}

pub fn to_choice_sets_capped(expr: &LicenseExpression, cap: usize) -> Result<Vec<ChoiceSet>, ExprError> {
    Ok(expand(expr, cap)?.into_iter().map(ChoiceSet).collect())
}

fn expand(expr: &LicenseExpression, cap: usize) -> Result<BTreeSet<BTreeSet<LicenseTerm>>, ExprError> {
    let limit = ExprError::ExpansionLimit { cap };
    match expr {
        LicenseExpression::Term(t) => Ok(BTreeSet::from([BTreeSet::from([t.clone()])])),
        LicenseExpression::Disjunction(l, r) => {
            let mut sets = expand(l, cap)?;
            sets.extend(expand(r, cap)?);
            if sets.len() > cap {
                return Err(limit);
            }
            Ok(sets)
        }
        LicenseExpression::Conjunction(l, r) => {
            let left = expand(l, cap)?;
            let right = expand(r, cap)?;
            let mut sets = BTreeSet::new();
            for a in &left {
                for b in &right {
                    sets.insert(a.union(b).cloned().collect());
                    if sets.len() > cap {
                        return Err(limit);
                    }
                }
            }
            Ok(sets)
        }
    }
}

pub fn licenses_mentioned(expr: &LicenseExpression) -> BTreeSet<LicenseTerm> {
    expr.terms().cloned().collect()
}

/// License identifiers the case-insensitive fallback knows about.
pub const KNOWN_LICENSE_IDS: &[&str] = &[
    "0BSD",
    "AGPL-3.0-only",
    "AGPL-3.0-or-later",
    "Apache-1.1",
    "Apache-2.0",
    "Artistic-2.0",
    "BSD-2-Clause",
    "BSD-3-Clause",
    "BSL-1.0",
    "CC-BY-4.0",
    "CC0-1.0",
    "CDDL-1.0",
    "EPL-1.0",
    "EPL-2.0",
    "EUPL-1.2",
    "GPL-2.0-only",
    "GPL-2.0-or-later",
    "GPL-3.0-only",
    "GPL-3.0-or-later",
    "ISC",
    "LGPL-2.0-only",
    "LGPL-2.1-only",
    "LGPL-2.1-or-later",
    "LGPL-3.0-only",
    "LGPL-3.0-or-later",
    "MIT",
    "MIT-0",
    "MPL-1.1",
    "MPL-2.0",
    "OpenSSL",
    "PostgreSQL",
    "Python-2.0",
    "Unicode-3.0",
    "Unicode-DFS-2016",
    "Unlicense",
    "WTFPL",
    "Zlib",
];

pub const KNOWN_EXCEPTION_IDS: &[&str] = &[
    "Autoconf-exception-3.0",
    "Bison-exception-2.2",
    "Classpath-exception-2.0",
    "GCC-exception-3.1",
    "LLVM-exception",
    "OpenJDK-assembly-exception-1.0",
];

/// An identifier that was only recognized through case-insensitive lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseWarning {
    pub found: String,
    pub canonical: String,
}

impl fmt::Display for CaseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "license identifier `{}` matched `{}` case-insensitively",
            self.found, self.canonical
        )
    }
}

fn canonical_id(id: &str, known: &[&'static str]) -> Option<&'static str> {
    known.iter().find(|k| k.eq_ignore_ascii_case(id) && **k != id).copied()
}

/// Rewrites identifiers that differ from a known SPDX id only by case.
/// `LicenseRef-` identifiers are opaque and left alone.
pub fn canonicalize_case(expr: &LicenseExpression) -> (LicenseExpression, Vec<CaseWarning>) {
    let mut warnings = Vec::new();
    let fixed = map_terms(expr, &mut |term| {
        let mut term = term.clone();
        if !term.is_license_ref() && !KNOWN_LICENSE_IDS.contains(&term.license_id.as_str()) {
            if let Some(canonical) = canonical_id(&term.license_id, KNOWN_LICENSE_IDS) {
                warnings.push(CaseWarning {
                    found: term.license_id.clone(),
                    canonical: canonical.to_string(),
                });
                term.license_id = canonical.to_string();
            }
        }
        if let Some(exception) = &term.exception_id {
            if !exception.starts_with("LicenseRef-") && !KNOWN_EXCEPTION_IDS.contains(&exception.as_str()) {
                if let Some(canonical) = canonical_id(exception, KNOWN_EXCEPTION_IDS) {
                    warnings.push(CaseWarning {
                        found: exception.clone(),
                        canonical: canonical.to_string(),
                    });
                    term.exception_id = Some(canonical.to_string());
                }
            }
        }
        term
    });
    (fixed, warnings)
}

fn map_terms(expr: &LicenseExpression, f: &mut impl FnMut(&LicenseTerm) -> LicenseTerm) -> LicenseExpression {
    match expr {
        LicenseExpression::Term(t) => LicenseExpression::Term(f(t)),
        LicenseExpression::Conjunction(l, r) => map_terms(l, f).and(map_terms(r, f)),
        LicenseExpression::Disjunction(l, r) => map_terms(l, f).or(map_terms(r, f)),
    }
}
