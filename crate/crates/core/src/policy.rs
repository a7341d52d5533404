// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! Declarative license policy and its evaluation.
//!
//! A policy maps license patterns to a [`Class`] per distribution
//! [`Channel`] and to the obligations a license carries. Patterns are either
//! an exact id (optionally `ID+` or `ID WITH EXCEPTION`) or a prefix ending in
//! `*`. The most specific pattern that says something about the channel wins:
//! exact forms first (exception form, then `ID+`, then the bare id), then
//! globs by length, ties broken lexicographically.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::coords::Coordinates;
use crate::expr::{to_choice_sets, ChoiceSet, ExprError, LicenseExpression, LicenseTerm};
use crate::ingest::{DependencyGraph, ProductManifest, ScopeFilter};
use crate::inventory::{ClearanceState, Store};
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Internal,
    DistributedBinary,
    DistributedSource,
    Saas,
    Embedded,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::Internal,
        Channel::DistributedBinary,
        Channel::DistributedSource,
        Channel::Saas,
        Channel::Embedded,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Internal => "internal",
            Channel::DistributedBinary => "distributed_binary",
            Channel::DistributedSource => "distributed_source",
            Channel::Saas => "saas",
            Channel::Embedded => "embedded",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Allow,
    AllowWithObligations,
    ReviewRequired,
    Deny,
}

impl Class {
    pub const ALL: [Class; 4] = [
        Class::Allow,
        Class::AllowWithObligations,
        Class::ReviewRequired,
        Class::Deny,
    ];

    pub fn is_allowed(self) -> bool {
        matches!(self, Class::Allow | Class::AllowWithObligations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObligationKind {
    Attribution,
    SourceDisclosure,
    SameLicense,
    NoticeFile,
    SourceOffer,
}

impl ObligationKind {
    pub fn is_disclosure(self) -> bool {
        matches!(self, ObligationKind::SourceDisclosure | ObligationKind::SourceOffer)
    }

    pub fn is_attribution(self) -> bool {
        matches!(self, ObligationKind::Attribution | ObligationKind::NoticeFile)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obligation {
    pub kind: ObligationKind,
    /// Channels the obligation applies to; absent means all of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<BTreeSet<Channel>>,
}

impl Obligation {
    pub fn new(kind: ObligationKind) -> Self {
        Self { kind, scope: None }
    }

    pub fn scoped(kind: ObligationKind, channels: &[Channel]) -> Self {
        Self {
            kind,
            scope: Some(channels.iter().copied().collect()),
        }
    }

    pub fn applies_to(&self, channel: Channel) -> bool {
        self.scope.as_ref().is_none_or(|s| s.contains(&channel))
    }
}

/// An obligation a specific license term brings into a product.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DueObligation {
    pub kind: ObligationKind,
    pub license: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waiver {
    /// `eco/name@version`, `eco/name` (any version) or a prefix ending in `*`.
    pub coords: String,
    pub reason: String,
    pub approver: String,
    pub expires: NaiveDate,
}

impl Waiver {
    pub fn matches(&self, coords: &Coordinates) -> bool {
        if let Some(prefix) = self.coords.strip_suffix('*') {
            return coords.to_string().starts_with(prefix);
        }
        match self.coords.parse::<Coordinates>() {
            Ok(p) if p.version.is_none() => p == coords.unversioned(),
            Ok(p) => &p == coords,
            Err(_) => false,
        }
    }

    /// A waiver stops applying at the start (00:00 UTC) of its expiry date.
    pub fn is_active(&self, now: DateTime<Utc>) -> bool {
        now < self.expires.and_hms_opt(0, 0, 0).expect("midnight").and_utc()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("pattern `{0}` is listed more than once")]
    DuplicateExactPattern(String),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> PolicyError {
    PolicyError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pattern {
    Exact(String),
    /// Matches license ids starting with the prefix.
    Prefix(String),
}

fn is_id(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '-')
}

impl Pattern {
    pub fn parse(text: &str) -> Option<Self> {
        if let Some(prefix) = text.strip_suffix('*') {
            let valid = prefix.is_empty() || is_id(prefix);
            return valid.then(|| Pattern::Prefix(prefix.to_string()));
        }
        let (license, exception) = match text.split_once(" WITH ") {
            Some((l, e)) => (l, Some(e)),
            None => (text, None),
        };
        let base = license.strip_suffix('+').unwrap_or(license);
        (is_id(base) && exception.is_none_or(is_id)).then(|| Pattern::Exact(text.to_string()))
    }

    fn glob_len(&self) -> Option<usize> {
        match self {
            Pattern::Prefix(p) => Some(p.len() + 1),
            Pattern::Exact(_) => None,
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Exact(s) => f.write_str(s),
            Pattern::Prefix(p) => write!(f, "{p}*"),
        }
    }
}

/// Class per channel, with an optional `*` fallback for the rest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassRule {
    pub any: Option<Class>,
    pub channels: BTreeMap<Channel, Class>,
}

impl ClassRule {
    pub fn for_channel(&self, channel: Channel) -> Option<Class> {
        self.channels.get(&channel).copied().or(self.any)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyDocument {
    pub policy_version: String,
    pub default_class: Class,
    pub classes: BTreeMap<Pattern, ClassRule>,
    pub obligations: BTreeMap<Pattern, Vec<Obligation>>,
    pub waivers: Vec<Waiver>,
}

pub const DEFAULT_POLICY_VERSION: &str = "unversioned";

impl PolicyDocument {
    pub fn new(policy_version: impl Into<String>, default_class: Class) -> Self {
        Self {
            policy_version: policy_version.into(),
            default_class,
            classes: BTreeMap::new(),
            obligations: BTreeMap::new(),
            waivers: Vec::new(),
        }
    }

    /// Sets the class of `pattern` for `channel` (`None` = every channel).
    ///
    /// # Panics
    /// If `pattern` is not a valid pattern.
    pub fn with_class(mut self, pattern: &str, channel: Option<Channel>, class: Class) -> Self {
        let pattern = Pattern::parse(pattern).expect("valid pattern");
        let rule = self.classes.entry(pattern).or_default();
        match channel {
            Some(c) => {
                rule.channels.insert(c, class);
            }
            None => rule.any = Some(class),
        }
        self
    }

    /// # Panics
    /// If `pattern` is not a valid pattern.
    pub fn with_obligations(mut self, pattern: &str, obligations: Vec<Obligation>) -> Self {
        let pattern = Pattern::parse(pattern).expect("valid pattern");
        self.obligations.insert(pattern, obligations);
        self
    }

    pub fn with_waiver(mut self, waiver: Waiver) -> Self {
        self.waivers.push(waiver);
        self
    }

    /// Patterns that apply to `term`, most specific first.
    fn candidates<'a, V>(&self, map: &'a BTreeMap<Pattern, V>, term: &LicenseTerm) -> Vec<&'a V> {
        let id = term.license_id.as_str();
        let mut exact = Vec::new();
        if let Some(exc) = &term.exception_id {
            let plus = if term.or_later { "+" } else { "" };
            exact.push(format!("{id}{plus} WITH {exc}"));
        }
        if term.or_later {
            exact.push(format!("{id}+"));
        }
        exact.push(id.to_string());

        let mut found: Vec<&V> = exact.into_iter().filter_map(|e| map.get(&Pattern::Exact(e))).collect();
        let mut globs: Vec<(&Pattern, &V)> = map
            .iter()
            .filter(|(p, _)| matches!(p, Pattern::Prefix(prefix) if id.starts_with(prefix.as_str())))
            .collect();
        globs.sort_by(|(a, _), (b, _)| b.glob_len().cmp(&a.glob_len()).then_with(|| a.cmp(b)));
        found.extend(globs.into_iter().map(|(_, v)| v));
        found
    }

    pub fn classify(&self, term: &LicenseTerm, channel: Channel) -> Class {
        self.candidates(&self.classes, term)
            .into_iter()
            .find_map(|rule| rule.for_channel(channel))
            .unwrap_or(self.default_class)
    }

    /// Obligations of the most specific obligation pattern for `term`,
    /// restricted to those applying to `channel`.
    pub fn obligations_for(&self, term: &LicenseTerm, channel: Channel) -> BTreeSet<DueObligation> {
        let license = term.to_string();
        self.candidates(&self.obligations, term)
            .into_iter()
            .next()
            .into_iter()
            .flatten()
            .filter(|o| o.applies_to(channel))
            .map(|o| DueObligation {
                kind: o.kind,
                license: license.clone(),
            })
            .collect()
    }

    pub fn active_waiver(&self, coords: &Coordinates, now: DateTime<Utc>) -> Option<&Waiver> {
        self.waivers.iter().find(|w| w.is_active(now) && w.matches(coords))
    }

    /// Human-readable problems that do not prevent loading.
    pub fn load_warnings(&self, now: DateTime<Utc>) -> Vec<String> {
        self.waivers
            .iter()
            .filter(|w| !w.is_active(now))
            .map(|w| format!("waiver for {} expired on {}", w.coords, w.expires))
            .collect()
    }
}

/// A JSON object kept as an ordered list so repeated keys are visible.
struct Entries<V>(Vec<(String, V)>);

impl<V> Default for Entries<V> {
    fn default() -> Self {
        Self(Vec::new())
    }
}

impl<'de, V: Deserialize<'de>> Deserialize<'de> for Entries<V> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor<V>(std::marker::PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for EntriesVisitor<V> {
            type Value = Entries<V>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }

        deserializer.deserialize_map(EntriesVisitor(std::marker::PhantomData))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    #[serde(default = "default_version")]
    policy_version: String,
    default_class: Class,
    #[serde(default)]
    classes: Entries<Entries<Class>>,
    #[serde(default)]
    obligations: Entries<Vec<Obligation>>,
    #[serde(default)]
    waivers: Vec<Waiver>,
}

fn default_version() -> String {
    DEFAULT_POLICY_VERSION.to_string()
}

fn insert_unique<V>(map: &mut BTreeMap<Pattern, V>, section: &str, key: &str, value: V) -> Result<(), PolicyError> {
    let pattern =
        Pattern::parse(key).ok_or_else(|| schema(format!("{section}.{key}"), "not an exact id or trailing-* glob"))?;
    if map.contains_key(&pattern) {
        return Err(match pattern {
            Pattern::Exact(_) => PolicyError::DuplicateExactPattern(key.to_string()),
            Pattern::Prefix(_) => schema(format!("{section}.{key}"), "glob listed more than once"),
        });
    }
    map.insert(pattern, value);
    Ok(())
}

/// Parses and validates a policy document; unknown keys are rejected.
pub fn load_policy(bytes: &[u8]) -> Result<PolicyDocument, PolicyError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let raw: RawPolicy = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(if path == "." { "$".into() } else { path }, e.inner().to_string())
    })?;
    if raw.policy_version.trim().is_empty() {
        return Err(schema("policy_version", "must not be empty"));
    }
    let mut policy = PolicyDocument::new(raw.policy_version, raw.default_class);
    for (key, per_channel) in raw.classes.0 {
        let mut rule = ClassRule::default();
        for (channel, class) in per_channel.0 {
            let path = format!("classes.{key}.{channel}");
            if channel == "*" {
                if rule.any.replace(class).is_some() {
                    return Err(schema(path, "listed more than once"));
                }
            } else {
                let c = Channel::parse(&channel).ok_or_else(|| schema(&path, "unknown channel"))?;
                if rule.channels.insert(c, class).is_some() {
                    return Err(schema(path, "listed more than once"));
                }
            }
        }
        insert_unique(&mut policy.classes, "classes", &key, rule)?;
    }
    for (key, obligations) in raw.obligations.0 {
        insert_unique(&mut policy.obligations, "obligations", &key, obligations)?;
    }
    for (i, waiver) in raw.waivers.iter().enumerate() {
        if waiver.reason.trim().is_empty() {
            return Err(schema(format!("waivers[{i}].reason"), "must not be empty"));
        }
        if waiver.approver.trim().is_empty() {
            return Err(schema(format!("waivers[{i}].approver"), "must not be empty"));
        }
        let valid = match waiver.coords.strip_suffix('*') {
            Some(prefix) => !prefix.contains('*'),
            None => waiver.coords.parse::<Coordinates>().is_ok(),
        };
        if !valid {
            return Err(schema(format!("waivers[{i}].coords"), "not a coordinates pattern"));
        }
    }
    policy.waivers = raw.waivers;
    Ok(policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    NeedsReview,
    Fail,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::NeedsReview => "NEEDS_REVIEW",
            Status::Fail => "FAIL",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReasonCode {
    Uncleared,
    Rejected,
    NoLicense,
    DeniedLicense,
    ReviewLicense,
    ExpressionTooComplex,
    Waived,
}

impl ReasonCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReasonCode::Uncleared => "UNCLEARED",
            ReasonCode::Rejected => "REJECTED",
            ReasonCode::NoLicense => "NO_LICENSE",
            ReasonCode::DeniedLicense => "DENIED_LICENSE",
            ReasonCode::ReviewLicense => "REVIEW_LICENSE",
            ReasonCode::ExpressionTooComplex => "EXPRESSION_TOO_COMPLEX",
            ReasonCode::Waived => "WAIVED",
        }
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reason {
    pub code: ReasonCode,
    pub message: String,
    #[serde(default)]
    pub evidence: Vec<String>,
}

impl Reason {
    fn new(code: ReasonCode, message: impl Into<String>, evidence: Vec<String>) -> Self {
        Self {
            code,
            message: message.into(),
            evidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Subject {
    Product { name: String, version: String },
    Component(Coordinates),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Product { name, version } => write!(f, "{name}@{version}"),
            Subject::Component(c) => c.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub subject: Subject,
    pub status: Status,
    pub reasons: Vec<Reason>,
    pub chosen_licenses: Option<ChoiceSet>,
    pub obligations_due: BTreeSet<DueObligation>,
    pub policy_version: String,
}

impl Verdict {
    pub fn has_code(&self, code: ReasonCode) -> bool {
        self.reasons.iter().any(|r| r.code == code)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpressionOutcome {
    pub status: Status,
    pub chosen: Option<ChoiceSet>,
    pub obligations: BTreeSet<DueObligation>,
    /// Terms that made the outcome worse than PASS.
    pub blocking: BTreeSet<LicenseTerm>,
}

pub fn evaluate_expression(
    expr: &LicenseExpression,
    channel: Channel,
    policy: &PolicyDocument,
) -> Result<ExpressionOutcome, ExprError> {
    let sets = to_choice_sets(expr)?;
    let mut best: Option<(usize, &ChoiceSet, BTreeSet<DueObligation>)> = None;
    let mut review_free_of_deny = false;
    let mut blocking = BTreeSet::new();
    for set in &sets {
        let classes: Vec<(&LicenseTerm, Class)> = set.terms().map(|t| (t, policy.classify(t, channel))).collect();
        if classes.iter().all(|(_, c)| c.is_allowed()) {
            let dues: BTreeSet<DueObligation> = set.terms().flat_map(|t| policy.obligations_for(t, channel)).collect();
            let kinds = dues.iter().map(|d| d.kind).collect::<BTreeSet<_>>().len();
            // Sets arrive in rendering order, so the first of equal weight wins.
            if best.as_ref().is_none_or(|(k, _, _)| kinds < *k) {
                best = Some((kinds, set, dues));
            }
        } else if classes.iter().all(|(_, c)| *c != Class::Deny) {
            review_free_of_deny = true;
            blocking.extend(
                classes
                    .iter()
                    .filter(|(_, c)| *c == Class::ReviewRequired)
                    .map(|(t, _)| (*t).clone()),
            );
        }
    }
    if let Some((_, set, dues)) = best {
        return Ok(ExpressionOutcome {
            status: Status::Pass,
            chosen: Some(set.clone()),
            obligations: dues,
            blocking: BTreeSet::new(),
        });
    }
    if !review_free_of_deny {
        blocking = sets
            .iter()
            .flat_map(|s| s.terms())
            .filter(|t| policy.classify(t, channel) == Class::Deny)
            .cloned()
            .collect();
    }
    Ok(ExpressionOutcome {
        status: if review_free_of_deny {
            Status::NeedsReview
        } else {
            Status::Fail
        },
        chosen: None,
        obligations: BTreeSet::new(),
        blocking,
    })
}

#[derive(Debug, Clone)]
pub struct EvaluationOptions {
    pub now: DateTime<Utc>,
    pub scopes: ScopeFilter,
    pub execution: Execution,
}

impl EvaluationOptions {
    pub fn at(now: DateTime<Utc>) -> Self {
        Self {
            now,
            scopes: ScopeFilter::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductEvaluation {
    pub product: Verdict,
    /// One verdict per evaluated node, ordered by coordinates.
    pub nodes: Vec<Verdict>,
}

impl ProductEvaluation {
    pub fn node(&self, coords: &Coordinates) -> Option<&Verdict> {
        self.nodes
            .iter()
            .find(|v| matches!(&v.subject, Subject::Component(c) if c == coords))
    }
}

fn join_terms(terms: &BTreeSet<LicenseTerm>) -> Vec<String> {
    terms.iter().map(ToString::to_string).collect()
}

/// Verdict for a single release, before waivers. The clearance state and
/// the license evaluation both contribute; the worse status wins.
pub fn evaluate_node(coords: &Coordinates, store: &Store, policy: &PolicyDocument, channel: Channel) -> Verdict {
    let mut status = Status::Pass;
    let mut reasons = Vec::new();
    let mut chosen = None;
    let mut obligations = BTreeSet::new();
    let release = store.find_release(coords);
    match release.map(|r| r.state) {
        None => {
            status = Status::NeedsReview;
            reasons.push(Reason::new(
                ReasonCode::Uncleared,
                format!("{coords} is not in the inventory"),
                vec![coords.to_string()],
            ));
        }
        Some(ClearanceState::Cleared) => {}
        Some(ClearanceState::Rejected) => {
            status = Status::Fail;
            reasons.push(Reason::new(
                ReasonCode::Rejected,
                format!("{coords} was rejected in review"),
                vec![coords.to_string()],
            ));
        }
        Some(state) => {
            status = Status::NeedsReview;
            reasons.push(Reason::new(
                ReasonCode::Uncleared,
                format!("{coords} is {}", state.as_str()),
                vec![coords.to_string(), state.as_str().to_string()],
            ));
        }
    }
    match release.and_then(|r| r.effective_license()) {
        None => {
            status = status.max(Status::NeedsReview);
            reasons.push(Reason::new(
                ReasonCode::NoLicense,
                format!("no license known for {coords}"),
                vec![coords.to_string()],
            ));
        }
        Some(expr) => match evaluate_expression(expr, channel, policy) {
            Ok(outcome) => {
                status = status.max(outcome.status);
                match outcome.status {
                    Status::Pass => {}
                    Status::NeedsReview => reasons.push(Reason::new(
                        ReasonCode::ReviewLicense,
                        format!("`{expr}` needs review for channel {channel}"),
                        join_terms(&outcome.blocking),
                    )),
                    Status::Fail => reasons.push(Reason::new(
                        ReasonCode::DeniedLicense,
                        format!("`{expr}` is denied for channel {channel}"),
                        join_terms(&outcome.blocking),
                    )),
                }
                chosen = outcome.chosen;
                obligations = outcome.obligations;
            }
            Err(err) => {
                status = status.max(Status::NeedsReview);
                reasons.push(Reason::new(
                    ReasonCode::ExpressionTooComplex,
                    format!("`{expr}`: {err}"),
                    vec![coords.to_string()],
                ));
            }
        },
    }
    Verdict {
        subject: Subject::Component(coords.clone()),
        status,
        reasons,
        chosen_licenses: chosen,
        obligations_due: obligations,
        policy_version: policy.policy_version.clone(),
    }
}

/// A waived node is shipped without a licensee choice having been made, so
/// it carries the obligations of every term in its expression.
fn apply_waiver(
    mut verdict: Verdict,
    coords: &Coordinates,
    store: &Store,
    policy: &PolicyDocument,
    channel: Channel,
    now: DateTime<Utc>,
) -> Verdict {
    if verdict.status == Status::Pass {
        return verdict;
    }
    if let Some(w) = policy.active_waiver(coords, now) {
        if verdict.chosen_licenses.is_none() {
            if let Some(expr) = store.find_release(coords).and_then(|r| r.effective_license()) {
                verdict.obligations_due = expr.terms().flat_map(|t| policy.obligations_for(t, channel)).collect();
            }
        }
        let mut evidence: Vec<String> = verdict.reasons.iter().map(|r| r.code.to_string()).collect();
        evidence.push(format!("approver={}", w.approver));
        evidence.push(format!("expires={}", w.expires));
        verdict.status = Status::Pass;
        verdict.reasons = vec![Reason::new(
            ReasonCode::Waived,
            format!("waived: {}", w.reason),
            evidence,
        )];
    }
    verdict
}

/// Evaluates every node reachable from the product root and aggregates.
pub fn evaluate_product(
    manifest: &ProductManifest,
    graph: &DependencyGraph,
    store: &Store,
    policy: &PolicyDocument,
    options: &EvaluationOptions,
) -> ProductEvaluation {
    let nodes: Vec<Coordinates> = graph.product_closure(&options.scopes).into_iter().collect();
    let verdicts = options.execution.map(&nodes, |coords| {
        let v = evaluate_node(coords, store, policy, manifest.channel);
        apply_waiver(v, coords, store, policy, manifest.channel, options.now)
    });
    let status = verdicts.iter().map(|v| v.status).max().unwrap_or(Status::Pass);
    let reasons = verdicts
        .iter()
        .filter(|v| v.status != Status::Pass)
        .flat_map(|v| {
            v.reasons.iter().map(move |r| Reason {
                code: r.code,
                message: format!("{}: {}", v.subject, r.message),
                evidence: vec![v.subject.to_string()],
            })
        })
        .collect();
    let obligations = verdicts
        .iter()
        .flat_map(|v| v.obligations_due.iter().cloned())
        .collect();
    ProductEvaluation {
        product: Verdict {
            subject: Subject::Product {
                name: manifest.product_name.clone(),
                version: manifest.product_version.clone(),
            },
            status,
            reasons,
            chosen_licenses: None,
            obligations_due: obligations,
            policy_version: policy.policy_version.clone(),
        },
        nodes: verdicts,
    }
}
