// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! License evidence from source trees.
//!
//! Two detectors run over every file: `SPDX-License-Identifier:` tags, and,
//! for files named like license files (`LICENSE*`, `LICENCE*`, `COPYING*`,
//! `NOTICE*`), full-text matching against a corpus of canonical license
//! texts. Matching compares token-bigram multisets with the Sørensen–Dice
//! coefficient after normalization.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::expr::{canonicalize_case, parse_expression, LicenseExpression};
use crate::par::Execution;

const TAG_MARKER: &str = "SPDX-License-Identifier:";
const BINARY_SNIFF_BYTES: usize = 8192;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("cannot read scan root {path}: {source}")]
    Root { path: PathBuf, source: std::io::Error },
    #[error("cannot load corpus from {path}: {source}")]
    Corpus { path: PathBuf, source: std::io::Error },
    #[error("corpus at {0} contains no license texts")]
    EmptyCorpus(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub match_floor: f64,
    pub confident: f64,
    pub max_file_bytes: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            match_floor: 0.80,
            confident: 0.95,
            max_file_bytes: 4 * 1024 * 1024,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tag,
    TextMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFinding {
    pub path: String,
    pub method: Method,
    pub expression: LicenseExpression,
    pub score: f64,
    /// Inclusive 1-based line range.
    pub span: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    MalformedTag,
    CaseFallback,
    IoError,
    TooLarge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanWarning {
    pub path: String,
    pub kind: WarningKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub findings: Vec<ScanFinding>,
    /// Conjunction of the distinct confident findings; `None` means unknown.
    pub summary: Option<LicenseExpression>,
    /// Copyright lines as they appear in the files, in path order.
    pub copyrights: Vec<String>,
    pub warnings: Vec<ScanWarning>,
}

/// Sorted token-bigram multiset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigramProfile {
    grams: Vec<((String, String), u32)>,
    total: usize,
}

impl BigramProfile {
    pub fn new(tokens: &[String]) -> Self {
        let mut pairs: Vec<(String, String)> = tokens.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        pairs.sort_unstable();
        let total = pairs.len();
        let mut grams: Vec<((String, String), u32)> = Vec::new();
        for pair in pairs {
            match grams.last_mut() {
                Some((last, count)) if *last == pair => *count += 1,
                _ => grams.push((pair, 1)),
            }
        }
        Self { grams, total }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    fn shared(&self, other: &Self) -> usize {
        let (mut i, mut j, mut shared) = (0, 0, 0usize);
        while i < self.grams.len() && j < other.grams.len() {
            match self.grams[i].0.cmp(&other.grams[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    shared += self.grams[i].1.min(other.grams[j].1) as usize;
                    i += 1;
                    j += 1;
                }
            }
        }
        shared
    }

    /// Dice coefficient between two non-identical profiles.
    pub fn dice(&self, other: &Self) -> f64 {
        if self.total == 0 || other.total == 0 {
            return 0.0;
        }
        2.0 * self.shared(other) as f64 / (self.total + other.total) as f64
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub license_id: String,
    pub canonical_text: String,
    pub normalized_tokens: Vec<String>,
    profile: BigramProfile,
}

impl CorpusEntry {
    pub fn new(license_id: impl Into<String>, canonical_text: impl Into<String>) -> Self {
        let canonical_text = canonical_text.into();
        let normalized_tokens = normalize_text(&canonical_text);
        let profile = BigramProfile::new(&normalized_tokens);
        Self {
            license_id: license_id.into(),
            canonical_text,
            normalized_tokens,
            profile,
        }
    }
}

macro_rules! bundled {
    ($($id:literal),* $(,)?) => {
        &[$(($id, include_str!(concat!("../corpus/", $id, ".txt")))),*]
    };
}

const BUNDLED: &[(&str, &str)] = bundled!(
    "0BSD",
    "AGPL-3.0-only",
    "Apache-2.0",
    "BSD-2-Clause",
    "BSD-3-Clause",
    "BSL-1.0",
    "EPL-2.0",
    "GPL-2.0-only",
    "GPL-3.0-only",
    "ISC",
    "LGPL-2.1-only",
    "LGPL-3.0-only",
    "MIT",
    "MPL-2.0",
    "Unlicense",
    "Zlib",
);

/// Canonical license texts, sorted by license id.
#[derive(Debug, Clone)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn bundled() -> Self {
        Self::from_entries(BUNDLED.iter().map(|(id, text)| CorpusEntry::new(*id, *text)).collect())
    }

    pub fn from_entries(mut entries: Vec<CorpusEntry>) -> Self {
        entries.sort_by(|a, b| a.license_id.cmp(&b.license_id));
        entries.dedup_by(|a, b| a.license_id == b.license_id);
        Self { entries }
    }

    /// Loads every `<license-id>.txt` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, ScanError> {
        let wrap = |source| ScanError::Corpus {
            path: dir.to_path_buf(),
            source,
        };
        let mut entries = Vec::new();
        for item in fs::read_dir(dir).map_err(wrap)? {
            let path = item.map_err(wrap)?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let bytes = fs::read(&path).map_err(|source| ScanError::Corpus {
                path: path.clone(),
                source,
            })?;
            entries.push(CorpusEntry::new(id, String::from_utf8_lossy(&bytes)));
        }
        if entries.is_empty() {
            return Err(ScanError::EmptyCorpus(dir.to_path_buf()));
        }
        Ok(Self::from_entries(entries))
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn get(&self, license_id: &str) -> Option<&CorpusEntry> {
        self.entries
            .binary_search_by(|e| e.license_id.as_str().cmp(license_id))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Highest-scoring entry; ties go to the smaller license id.
    pub fn best_match(&self, tokens: &[String]) -> Option<(&CorpusEntry, f64)> {
        self.best_match_above(tokens, 0.0)
    }

    fn best_match_above(&self, tokens: &[String], floor: f64) -> Option<(&CorpusEntry, f64)> {
        let profile = BigramProfile::new(tokens);
        let mut best: Option<(&CorpusEntry, f64)> = None;
        for entry in &self.entries {
            let bound = dice_upper_bound(profile.total(), entry.profile.total());
            if bound < floor || best.is_some_and(|(_, s)| bound <= s) {
                continue;
            }
            let score = if entry.normalized_tokens == tokens {
                1.0
            } else {
                profile.dice(&entry.profile)
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((entry, score));
            }
        }
        best
    }
}

fn dice_upper_bound(a: usize, b: usize) -> f64 {
    if a + b == 0 {
        return 1.0;
    }
    2.0 * a.min(b) as f64 / (a + b) as f64
}

fn typographic_to_ascii(c: char) -> char {
    match c {
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' => '\'',
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' => '"',
        '\u{2010}'..='\u{2015}' | '\u{2212}' => '-',
        other => other,
    }
}

/// A line whose first word is `copyright` (after comment punctuation), or
/// which starts with `©`.
pub fn is_copyright_line(line: &str) -> bool {
    let rest = line.trim_start_matches(|c: char| c.is_whitespace() || (c.is_ascii() && !c.is_ascii_alphanumeric()));
    if rest.starts_with('©') {
        return true;
    }
    let Some(head) = rest.get(..9) else {
        return false;
    };
    if !head.eq_ignore_ascii_case("copyright") {
        return false;
    }
    match rest[9..].chars().next() {
        None => true,
        Some(c) => c.is_whitespace() || c == '(' || c == '©',
    }
}

/// Lowercased word list with copyright lines and punctuation removed.
pub fn normalize_text(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for line in text.lines() {
        if is_copyright_line(line) {
            continue;
        }
        let cleaned: String = line
            .chars()
            .map(typographic_to_ascii)
            .flat_map(char::to_lowercase)
            .map(|c| if c.is_alphanumeric() { c } else { ' ' })
            .collect();
        tokens.extend(cleaned.split_whitespace().map(str::to_owned));
    }
    tokens
}

/// Sørensen–Dice coefficient over token-bigram multisets.
pub fn similarity(a: &[String], b: &[String]) -> f64 {
    if a == b {
        return 1.0;
    }
    BigramProfile::new(a).dice(&BigramProfile::new(b))
}

fn strip_comment_closers(mut s: &str) -> &str {
    loop {
        let trimmed = s.trim_end();
        let next = ["*/", "-->", "#"]
            .iter()
            .find_map(|closer| trimmed.strip_suffix(closer))
            .unwrap_or(trimmed);
        if next.len() == s.len() {
            return next;
        }
        s = next;
    }
}

/// Findings for every `SPDX-License-Identifier:` line in `file_text`.
pub fn extract_tags(file_text: &str, path: &str) -> (Vec<ScanFinding>, Vec<ScanWarning>) {
    let mut findings = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in file_text.lines().enumerate() {
        let Some(at) = line.find(TAG_MARKER) else {
            continue;
        };
        let raw = strip_comment_closers(line[at + TAG_MARKER.len()..].trim());
        let line_no = idx + 1;
        match parse_expression(raw) {
            Ok(expr) => {
                let (expression, case_warnings) = canonicalize_case(&expr);
                warnings.extend(case_warnings.into_iter().map(|w| ScanWarning {
                    path: path.to_string(),
                    kind: WarningKind::CaseFallback,
                    message: format!("line {line_no}: {w}"),
                }));
                findings.push(ScanFinding {
                    path: path.to_string(),
                    method: Method::Tag,
                    expression,
                    score: 1.0,
                    span: (line_no, line_no),
                });
            }
            Err(err) => warnings.push(ScanWarning {
                path: path.to_string(),
                kind: WarningKind::MalformedTag,
                message: format!("line {line_no}: `{raw}`: {err}"),
            }),
        }
    }
    (findings, warnings)
}

pub fn is_license_like(file_name: &str) -> bool {
    let upper = file_name.to_ascii_uppercase();
    ["LICENSE", "LICENCE", "COPYING", "NOTICE"]
        .iter()
        .any(|p| upper.starts_with(p))
}

#[derive(Default)]
struct FileOutcome {
    findings: Vec<ScanFinding>,
    copyrights: Vec<String>,
    warnings: Vec<ScanWarning>,
}

fn warn(path: &str, kind: WarningKind, message: String) -> FileOutcome {
    FileOutcome {
        warnings: vec![ScanWarning {
            path: path.to_string(),
            kind,
            message,
        }],
        ..Default::default()
    }
}

fn read_capped(path: &Path, cap: u64) -> std::io::Result<Option<Vec<u8>>> {
    let file = fs::File::open(path)?;
    if file.metadata()?.len() > cap {
        return Ok(None);
    }
    let mut bytes = Vec::new();
    file.take(cap + 1).read_to_end(&mut bytes)?;
    Ok((bytes.len() as u64 <= cap).then_some(bytes))
}

fn scan_file(abs: &Path, rel: &str, corpus: &Corpus, config: &ScanConfig) -> FileOutcome {
    let bytes = match read_capped(abs, config.max_file_bytes) {
        Ok(Some(bytes)) => bytes,
        Ok(None) => {
            return warn(
                rel,
                WarningKind::TooLarge,
                format!("skipped: larger than {} bytes", config.max_file_bytes),
            )
        }
        Err(err) => return warn(rel, WarningKind::IoError, err.to_string()),
    };
    if bytes[..bytes.len().min(BINARY_SNIFF_BYTES)].contains(&0) {
        return FileOutcome::default();
    }
    let text = String::from_utf8_lossy(&bytes);

    let (mut findings, warnings) = extract_tags(&text, rel);
    let file_name = rel.rsplit('/').next().unwrap_or(rel);
    if is_license_like(file_name) {
        let tokens = normalize_text(&text);
        if let Some((entry, score)) = corpus.best_match_above(&tokens, config.match_floor) {
            if score >= config.match_floor {
                findings.push(ScanFinding {
                    path: rel.to_string(),
                    method: Method::TextMatch,
                    expression: LicenseExpression::term(entry.license_id.clone()),
                    score,
                    span: (1, text.lines().count().max(1)),
                });
            }
        }
    }
    let copyrights = text
        .lines()
        .filter(|l| is_copyright_line(l))
        .map(|l| l.trim().to_string())
        .collect();
    FileOutcome {
        findings,
        copyrights,
        warnings,
    }
}

fn relative_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Scans every regular file below `root` in lexicographic path order.
pub fn scan_tree(root: &Path, corpus: &Corpus, config: &ScanConfig) -> Result<ScanReport, ScanError> {
    fs::read_dir(root).map_err(|source| ScanError::Root {
        path: root.to_path_buf(),
        source,
    })?;

    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let walker = WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || e.file_name() != ".git");
    for item in walker {
        match item {
            Ok(entry) if entry.file_type().is_file() => {
                let rel = relative_path(root, entry.path());
                files.push((entry.into_path(), rel));
            }
            Ok(_) => {}
            Err(err) => warnings.push(ScanWarning {
                path: err.path().map(|p| relative_path(root, p)).unwrap_or_default(),
                kind: WarningKind::IoError,
                message: err.to_string(),
            }),
        }
    }
    // Byte order rather than walkdir's per-directory order.
    files.sort_by(|a, b| a.1.cmp(&b.1));

    let outcomes = config
        .execution
        .map(&files, |(abs, rel)| scan_file(abs, rel, corpus, config));

    let mut findings = Vec::new();
    let mut copyrights = Vec::new();
    let mut seen_copyrights = BTreeSet::new();
    for outcome in outcomes {
        findings.extend(outcome.findings);
        warnings.extend(outcome.warnings);
        for line in outcome.copyrights {
            if seen_copyrights.insert(line.clone()) {
                copyrights.push(line);
            }
        }
    }

    let confident: BTreeSet<String> = findings
        .iter()
        .filter(|f| f.score >= config.confident)
        .map(|f| f.expression.to_string())
        .collect();
    let summary = LicenseExpression::all_of(
        confident
            .iter()
            .map(|text| parse_expression(text).expect("rendered expressions parse")),
    );

    Ok(ScanReport {
        findings,
        summary,
        copyrights,
        warnings,
    })
}
