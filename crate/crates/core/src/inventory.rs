// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! Component inventory with a per-release clearance workflow.
//!
//! State lives in a [`Store`] that is only ever changed by applying
//! [`Event`]s. [`Inventory`] validates commands, appends the resulting event
//! to a journal (one JSON object per line: `seq`, `ts`, `kind`, `payload`)
//! and then applies it, so replaying the journal rebuilds the same store.
//!
//! Release lifecycle:
//!
//! ```text
//! NEW -> SCANNED -> PENDING_REVIEW -> CLEARED (terminal)
//!          ^  |                   \-> REJECTED -> PENDING_REVIEW
//!          \--/ (re-scan)
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coords::Coordinates;
use crate::expr::LicenseExpression;
use crate::scanner::ScanFinding;

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReleaseId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u64);

macro_rules! display_id {
    ($($ty:ident),*) => {$(
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    )*};
}
display_id!(ComponentId, ReleaseId, RequestId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClearanceState {
    New,
    Scanned,
    PendingReview,
    Cleared,
    Rejected,
}

impl ClearanceState {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::New => "NEW",
            Self::Scanned => "SCANNED",
            Self::PendingReview => "PENDING_REVIEW",
            Self::Cleared => "CLEARED",
            Self::Rejected => "REJECTED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::New,
            Self::Scanned,
            Self::PendingReview,
            Self::Cleared,
            Self::Rejected,
        ]
        .into_iter()
        .find(|st| st.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for ClearanceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionVerdict {
    Cleared,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearanceDecision {
    pub reviewer: String,
    pub role: String,
    pub timestamp: DateTime<Utc>,
    pub verdict: DecisionVerdict,
    pub rationale: String,
    pub policy_version: String,
}

/// What a caller supplies to [`Inventory::decide`]; the timestamp comes from
/// the inventory clock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionInput {
    pub reviewer: String,
    pub role: String,
    pub verdict: DecisionVerdict,
    pub rationale: String,
    pub policy_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRef {
    pub url: String,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearanceRequest {
    pub id: RequestId,
    pub requested_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseRecord {
    pub id: ReleaseId,
    pub component_id: ComponentId,
    /// Coordinates the release was first registered under.
    pub coords: Coordinates,
    pub version: String,
    pub source_ref: Option<SourceRef>,
    pub declared_license: Option<LicenseExpression>,
    pub detected_license: Option<LicenseExpression>,
    pub findings: Vec<ScanFinding>,
    pub copyrights: Vec<String>,
    pub state: ClearanceState,
    pub decisions: Vec<ClearanceDecision>,
    pub request: Option<ClearanceRequest>,
    pub registered_at: DateTime<Utc>,
}

impl ReleaseRecord {
    /// Scanner evidence first, then what the package declares.
    pub fn effective_license(&self) -> Option<&LicenseExpression> {
        self.detected_license.as_ref().or(self.declared_license.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub id: ComponentId,
    pub canonical_name: String,
    /// Unversioned coordinates that resolve to this component.
    pub aliases: BTreeSet<Coordinates>,
    pub homepage: Option<String>,
    pub releases: BTreeMap<String, ReleaseRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    Registered {
        coords: Coordinates,
        component_id: ComponentId,
        canonical_name: String,
        new_component: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        homepage: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        release_id: Option<ReleaseId>,
    },
    ScanAttached {
        release_id: ReleaseId,
        findings: Vec<ScanFinding>,
        summary: Option<LicenseExpression>,
        #[serde(default)]
        copyrights: Vec<String>,
    },
    ClearanceRequested {
        release_id: ReleaseId,
        request_id: RequestId,
    },
    Decided {
        release_id: ReleaseId,
        decision: ClearanceDecision,
    },
    SourceRecorded {
        release_id: ReleaseId,
        source: SourceRef,
    },
    DeclaredLicenseSet {
        release_id: ReleaseId,
        expression: LicenseExpression,
        origin: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Registered { .. } => "registered",
            Self::ScanAttached { .. } => "scan_attached",
            Self::ClearanceRequested { .. } => "clearance_requested",
            Self::Decided { .. } => "decided",
            Self::SourceRecorded { .. } => "source_recorded",
            Self::DeclaredLicenseSet { .. } => "declared_license_set",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, String> {
        let event: Event = serde_json::from_str(line).map_err(|e| e.to_string())?;
        Ok(event)
    }
}

#[derive(Debug, Error)]
pub enum InventoryError {
    #[error("invalid coordinates `{0}`")]
    InvalidCoordinates(Coordinates),
    #[error("{coords} is bound to component `{bound_to}`, not `{requested}`")]
    AliasConflict {
        coords: Coordinates,
        bound_to: String,
        requested: String,
    },
    #[error("unknown release {0}")]
    UnknownRelease(ReleaseId),
    #[error("release {release} is {from}; cannot {action}")]
    IllegalTransition {
        release: ReleaseId,
        from: ClearanceState,
        action: &'static str,
    },
    #[error("role `{0}` may not record clearance decisions")]
    Unauthorized(String),
    #[error("invalid decision: {0}")]
    InvalidDecision(String),
    #[error("event rejected by the store: {0}")]
    Inconsistent(String),
    #[error("journal write failed: {0}")]
    Journal(#[from] io::Error),
    #[error(transparent)]
    Corrupt(#[from] CorruptJournal),
}

/// Replay stopped at `line`; `partial` holds the state before that line.
#[derive(Debug, Error)]
#[error("corrupt journal at line {line}: {reason}")]
pub struct CorruptJournal {
    pub line: usize,
    pub reason: String,
    pub partial: Box<Store>,
}

/// The materialized inventory. Changes only through [`Store::apply`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Store {
    components: BTreeMap<ComponentId, ComponentRecord>,
    aliases: BTreeMap<Coordinates, ComponentId>,
    names: BTreeMap<String, ComponentId>,
    releases: BTreeMap<ReleaseId, (ComponentId, String)>,
    next_component: u64,
    next_release: u64,
    next_request: u64,
    last_seq: u64,
}

#[derive(Serialize)]
struct SnapshotRef<'a> {
    schema_version: u32,
    last_seq: u64,
    components: Vec<&'a ComponentRecord>,
}

/// One row of the clearance queue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueItem {
    pub request_id: RequestId,
    pub requested_at: DateTime<Utc>,
    pub release_id: ReleaseId,
    pub component_id: ComponentId,
    pub canonical_name: String,
    pub coords: Coordinates,
    pub state: ClearanceState,
    pub declared_license: Option<LicenseExpression>,
    pub detected_license: Option<LicenseExpression>,
    pub top_findings: Vec<ScanFinding>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueueFilter {
    /// Defaults to `PENDING_REVIEW` when unset.
    pub state: Option<ClearanceState>,
    pub ecosystem: Option<String>,
}

impl Store {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn components(&self) -> impl Iterator<Item = &ComponentRecord> {
        self.components.values()
    }

    pub fn component(&self, id: ComponentId) -> Option<&ComponentRecord> {
        self.components.get(&id)
    }

    pub fn component_for(&self, coords: &Coordinates) -> Option<&ComponentRecord> {
        self.aliases
            .get(&coords.unversioned())
            .and_then(|id| self.components.get(id))
    }

    pub fn release(&self, id: ReleaseId) -> Option<&ReleaseRecord> {
        let (component, version) = self.releases.get(&id)?;
        self.components.get(component)?.releases.get(version)
    }

    pub fn releases(&self) -> impl Iterator<Item = &ReleaseRecord> {
        self.components.values().flat_map(|c| c.releases.values())
    }

    fn release_mut(&mut self, id: ReleaseId) -> Option<&mut ReleaseRecord> {
        let (component, version) = self.releases.get(&id)?;
        self.components.get_mut(component)?.releases.get_mut(version)
    }

    /// Resolves versioned coordinates through aliases. Never mutates.
    pub fn lookup(&self, coords: &Coordinates) -> Option<(ReleaseId, ClearanceState)> {
        let version = coords.version.as_ref()?;
        let release = self.component_for(coords)?.releases.get(version)?;
        Some((release.id, release.state))
    }

    pub fn find_release(&self, coords: &Coordinates) -> Option<&ReleaseRecord> {
        let (id, _) = self.lookup(coords)?;
        self.release(id)
    }

    pub fn queue(&self, filter: &QueueFilter) -> Vec<QueueItem> {
        let state = filter.state.unwrap_or(ClearanceState::PendingReview);
        let mut items: Vec<QueueItem> = self
            .components
            .values()
            .filter(|c| {
                filter
                    .ecosystem
                    .as_ref()
                    .is_none_or(|eco| c.aliases.iter().any(|a| &a.ecosystem == eco))
            })
            .flat_map(|c| c.releases.values().map(move |r| (c, r)))
            .filter(|(_, r)| r.state == state)
            .filter_map(|(c, r)| {
                let request = r.request.as_ref()?;
                let mut top_findings = r.findings.clone();
                top_findings.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.path.cmp(&b.path)));
                top_findings.truncate(5);
                Some(QueueItem {
                    request_id: request.id,
                    requested_at: request.requested_at,
                    release_id: r.id,
                    component_id: c.id,
                    canonical_name: c.canonical_name.clone(),
                    coords: r.coords.clone(),
                    state: r.state,
                    declared_license: r.declared_license.clone(),
                    detected_license: r.detected_license.clone(),
                    top_findings,
                })
            })
            .collect();
        items.sort_by(|a, b| {
            a.requested_at
                .cmp(&b.requested_at)
                .then_with(|| a.coords.cmp(&b.coords))
        });
        items
    }

    /// Canonical JSON export. Identical stores export identical bytes.
    pub fn snapshot_json(&self) -> String {
        let snapshot = SnapshotRef {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            last_seq: self.last_seq,
            components: self.components.values().collect(),
        };
        // Round-trip through Value so object keys come out sorted.
        let value = serde_json::to_value(&snapshot).expect("snapshot serializes");
        serde_json::to_string_pretty(&value).expect("snapshot serializes")
    }

    /// Applies one event. The store is left untouched on error.
    pub fn apply(&mut self, event: &Event) -> Result<(), String> {
        if event.seq <= self.last_seq {
            return Err(format!("seq {} does not follow {}", event.seq, self.last_seq));
        }
        self.apply_kind(&event.kind, event.ts)?;
        self.last_seq = event.seq;
        Ok(())
    }

    fn apply_kind(&mut self, kind: &EventKind, ts: DateTime<Utc>) -> Result<(), String> {
        match kind {
            EventKind::Registered {
                coords,
                component_id,
                canonical_name,
                new_component,
                homepage,
                release_id,
            } => {
                if !coords.is_valid() {
                    return Err(format!("invalid coordinates {coords}"));
                }
                let alias = coords.unversioned();
                if let Some(bound) = self.aliases.get(&alias) {
                    if bound != component_id {
                        return Err(format!("{alias} already bound to component {bound}"));
                    }
                }
                if *new_component {
                    if component_id.0 != self.next_component {
                        return Err(format!("unexpected component id {component_id}"));
                    }
                    if self.names.contains_key(canonical_name) {
                        return Err(format!("duplicate canonical name {canonical_name}"));
                    }
                } else {
                    let existing = self
                        .components
                        .get(component_id)
                        .ok_or_else(|| format!("unknown component {component_id}"))?;
                    if &existing.canonical_name != canonical_name {
                        return Err(format!("component {component_id} is not {canonical_name}"));
                    }
                }
                let version = match (release_id, &coords.version) {
                    (Some(rid), Some(v)) => {
                        if rid.0 != self.next_release {
                            return Err(format!("unexpected release id {rid}"));
                        }
                        let has = self
                            .components
                            .get(component_id)
                            .is_some_and(|c| c.releases.contains_key(v));
                        if has {
                            return Err(format!("release {v} already registered"));
                        }
                        Some((*rid, v.clone()))
                    }
                    (None, _) => None,
                    (Some(_), None) => return Err("release id without version".into()),
                };

                if *new_component {
                    self.components.insert(
                        *component_id,
                        ComponentRecord {
                            id: *component_id,
                            canonical_name: canonical_name.clone(),
                            aliases: BTreeSet::new(),
                            homepage: homepage.clone(),
                            releases: BTreeMap::new(),
                        },
                    );
                    self.names.insert(canonical_name.clone(), *component_id);
                    self.next_component += 1;
                }
                let component = self.components.get_mut(component_id).expect("present");
                component.aliases.insert(alias.clone());
                self.aliases.insert(alias, *component_id);
                if let Some((rid, v)) = version {
                    component.releases.insert(
                        v.clone(),
                        ReleaseRecord {
                            id: rid,
                            component_id: *component_id,
                            coords: coords.clone(),
                            version: v.clone(),
                            source_ref: None,
                            declared_license: None,
                            detected_license: None,
                            findings: Vec::new(),
                            copyrights: Vec::new(),
                            state: ClearanceState::New,
                            decisions: Vec::new(),
                            request: None,
                            registered_at: ts,
                        },
                    );
                    self.releases.insert(rid, (*component_id, v));
                    self.next_release += 1;
                }
                Ok(())
            }
            EventKind::ScanAttached {
                release_id,
                findings,
                summary,
                copyrights,
            } => {
                let release = self.release_for_apply(*release_id)?;
                check_transition(
                    release,
                    "attach scan results",
                    &[ClearanceState::New, ClearanceState::Scanned],
                )?;
                release.findings = findings.clone();
                release.detected_license = summary.clone();
                release.copyrights = copyrights.clone();
                release.state = ClearanceState::Scanned;
                Ok(())
            }
            EventKind::ClearanceRequested { release_id, request_id } => {
                if request_id.0 != self.next_request {
                    return Err(format!("unexpected request id {request_id}"));
                }
                let release = self.release_for_apply(*release_id)?;
                check_transition(
                    release,
                    "request clearance",
                    &[ClearanceState::Scanned, ClearanceState::Rejected],
                )?;
                release.state = ClearanceState::PendingReview;
                release.request = Some(ClearanceRequest {
                    id: *request_id,
                    requested_at: ts,
                });
                self.next_request += 1;
                Ok(())
            }
            EventKind::Decided { release_id, decision } => {
                validate_decision_shape(&decision.verdict, &decision.rationale).map_err(|e| e.to_string())?;
                let release = self.release_for_apply(*release_id)?;
                check_transition(release, "decide", &[ClearanceState::PendingReview])?;
                release.state = match decision.verdict {
                    DecisionVerdict::Cleared => ClearanceState::Cleared,
                    DecisionVerdict::Rejected => ClearanceState::Rejected,
                };
                release.decisions.push(decision.clone());
                Ok(())
            }
            EventKind::SourceRecorded { release_id, source } => {
                self.release_for_apply(*release_id)?.source_ref = Some(source.clone());
                Ok(())
            }
            EventKind::DeclaredLicenseSet {
                release_id, expression, ..
            } => {
                let release = self.release_for_apply(*release_id)?;
                check_transition(
                    release,
                    "set the declared license",
                    &[
                        ClearanceState::New,
                        ClearanceState::Scanned,
                        ClearanceState::PendingReview,
                    ],
                )?;
                if release.declared_license.is_some() {
                    return Err(format!("release {release_id} already has a declared license"));
                }
                release.declared_license = Some(expression.clone());
                Ok(())
            }
        }
    }

    fn release_for_apply(&mut self, id: ReleaseId) -> Result<&mut ReleaseRecord, String> {
        self.release_mut(id).ok_or_else(|| format!("unknown release {id}"))
    }
}

fn check_transition(release: &ReleaseRecord, action: &'static str, allowed: &[ClearanceState]) -> Result<(), String> {
    if allowed.contains(&release.state) {
        Ok(())
    } else {
        Err(InventoryError::IllegalTransition {
            release: release.id,
            from: release.state,
            action,
        }
        .to_string())
    }
}

fn validate_decision_shape(verdict: &DecisionVerdict, rationale: &str) -> Result<(), InventoryError> {
    if *verdict == DecisionVerdict::Rejected && rationale.trim().is_empty() {
        return Err(InventoryError::InvalidDecision("a rejection needs a rationale".into()));
    }
    Ok(())
}

/// Rebuilds a store from journal lines. Blank lines are ignored.
pub fn replay<R: BufRead>(reader: R) -> Result<Store, CorruptJournal> {
    let mut store = Store::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let corrupt = |store: &Store, reason: String| CorruptJournal {
            line: line_no,
            reason,
            partial: Box::new(store.clone()),
        };
        let line = line.map_err(|e| corrupt(&store, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = Event::from_line(&line).map_err(|e| corrupt(&store, e))?;
        store.apply(&event).map_err(|e| corrupt(&store, e))?;
    }
    Ok(store)
}

pub fn replay_events<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Store, CorruptJournal> {
    let mut store = Store::default();
    for (idx, event) in events.into_iter().enumerate() {
        if let Err(reason) = store.apply(event) {
            return Err(CorruptJournal {
                line: idx + 1,
                reason,
                partial: Box::new(store),
            });
        }
    }
    Ok(store)
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(at: DateTime<Utc>) -> Self {
        Self(Mutex::new(at))
    }

    pub fn set(&self, at: DateTime<Utc>) {
        *self.0.lock().unwrap() = at;
    }

    pub fn advance(&self, by: chrono::Duration) {
        let mut now = self.0.lock().unwrap();
        *now += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap()
    }
}

pub trait JournalSink: Send {
    fn append(&mut self, line: &str) -> io::Result<()>;
}

/// Appends to a file, flushing after every event.
pub struct FileJournal {
    path: PathBuf,
    file: File,
}

impl FileJournal {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl JournalSink for FileJournal {
    fn append(&mut self, line: &str) -> io::Result<()> {
        let mut buf = String::with_capacity(line.len() + 1);
        buf.push_str(line);
        buf.push('\n');
        self.file.write_all(buf.as_bytes())?;
        self.file.flush()?;
        self.file.sync_data()
    }
}

/// Keeps journal lines in memory; clones share the same buffer.
#[derive(Debug, Clone, Default)]
pub struct MemoryJournal(Arc<Mutex<Vec<String>>>);

impl MemoryJournal {
    pub fn lines(&self) -> Vec<String> {
        self.0.lock().unwrap().clone()
    }

    pub fn contents(&self) -> String {
        let mut out = String::new();
        for line in self.0.lock().unwrap().iter() {
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

impl JournalSink for MemoryJournal {
    fn append(&mut self, line: &str) -> io::Result<()> {
        self.0.lock().unwrap().push(line.to_string());
        Ok(())
    }
}

pub const DEFAULT_REVIEWER_ROLES: &[&str] = &["reviewer", "ospo"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Registration {
    pub component_id: ComponentId,
    pub release_id: Option<ReleaseId>,
    /// False when the coordinates were already known and nothing changed.
    pub changed: bool,
}

/// Command side of the inventory: validates, journals, applies.
pub struct Inventory {
    store: Store,
    journal: Box<dyn JournalSink>,
    clock: Arc<dyn Clock>,
    reviewer_roles: BTreeSet<String>,
}

impl fmt::Debug for Inventory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Inventory")
            .field("last_seq", &self.store.last_seq)
            .field("reviewer_roles", &self.reviewer_roles)
            .finish_non_exhaustive()
    }
}

impl Inventory {
    pub fn new(store: Store, journal: Box<dyn JournalSink>, clock: Arc<dyn Clock>) -> Self {
        Self {
            store,
            journal,
            clock,
            reviewer_roles: DEFAULT_REVIEWER_ROLES.iter().map(|r| r.to_string()).collect(),
        }
    }

    pub fn in_memory(clock: Arc<dyn Clock>) -> (Self, MemoryJournal) {
        let journal = MemoryJournal::default();
        (Self::new(Store::default(), Box::new(journal.clone()), clock), journal)
    }

    /// Replays `path` (a missing file is an empty journal) and appends to it.
    pub fn open(path: &Path, clock: Arc<dyn Clock>) -> Result<Self, InventoryError> {
        let store = match File::open(path) {
            Ok(file) => replay(BufReader::new(file))?,
            Err(err) if err.kind() == io::ErrorKind::NotFound => Store::default(),
            Err(err) => return Err(err.into()),
        };
        let journal = FileJournal::open(path)?;
        Ok(Self::new(store, Box::new(journal), clock))
    }

    pub fn with_reviewer_roles<I, S>(mut self, roles: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.reviewer_roles = roles.into_iter().map(Into::into).collect();
        self
    }

    pub fn is_reviewer_role(&self, role: &str) -> bool {
        self.reviewer_roles.contains(role)
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn commit(&mut self, kind: EventKind) -> Result<(), InventoryError> {
        let event = Event {
            seq: self.store.last_seq + 1,
            ts: self.clock.now(),
            kind,
        };
        // The journal must never hold an event that cannot be replayed, and
        // the store must not run ahead of the journal on a failed write.
        let mut next = self.store.clone();
        next.apply(&event).map_err(InventoryError::Inconsistent)?;
        self.journal.append(&event.to_line())?;
        self.store = next;
        Ok(())
    }

    pub fn register_component(
        &mut self,
        coords: &Coordinates,
        canonical_name: Option<&str>,
    ) -> Result<Registration, InventoryError> {
        self.register_with_homepage(coords, canonical_name, None)
    }

    pub fn register_with_homepage(
        &mut self,
        coords: &Coordinates,
        canonical_name: Option<&str>,
        homepage: Option<&str>,
    ) -> Result<Registration, InventoryError> {
        if !coords.is_valid() {
            return Err(InventoryError::InvalidCoordinates(coords.clone()));
        }
        let alias = coords.unversioned();
        let requested = canonical_name.map(str::trim).filter(|n| !n.is_empty());

        let (component_id, name, new_component) = match self.store.aliases.get(&alias) {
            Some(&bound) => {
                let bound_name = &self.store.components[&bound].canonical_name;
                if let Some(requested) = requested {
                    if requested != bound_name {
                        return Err(InventoryError::AliasConflict {
                            coords: coords.clone(),
                            bound_to: bound_name.clone(),
                            requested: requested.to_string(),
                        });
                    }
                }
                (bound, bound_name.clone(), false)
            }
            None => match requested.and_then(|n| self.store.names.get(n).map(|id| (n, *id))) {
                Some((n, id)) => (id, n.to_string(), false),
                None => {
                    let name = match requested {
                        Some(n) => n.to_string(),
                        None => self.default_canonical_name(coords),
                    };
                    (ComponentId(self.store.next_component), name, true)
                }
            },
        };

        let alias_known = self.store.aliases.contains_key(&alias);
        let release_exists = coords.version.as_ref().is_some_and(|v| {
            self.store
                .components
                .get(&component_id)
                .is_some_and(|c| c.releases.contains_key(v))
        });
        let release_id = match &coords.version {
            Some(_) if !release_exists => Some(ReleaseId(self.store.next_release)),
            _ => None,
        };
        if alias_known && release_id.is_none() {
            let existing = coords
                .version
                .as_ref()
                .and_then(|v| self.store.components[&component_id].releases.get(v).map(|r| r.id));
            return Ok(Registration {
                component_id,
                release_id: existing,
                changed: false,
            });
        }
        self.commit(EventKind::Registered {
            coords: coords.clone(),
            component_id,
            canonical_name: name,
            new_component,
            homepage: if new_component {
                homepage.map(str::to_string)
            } else {
                None
            },
            release_id,
        })?;
        let release_id = release_id.or_else(|| {
            coords
                .version
                .as_ref()
                .and_then(|v| self.store.components[&component_id].releases.get(v).map(|r| r.id))
        });
        Ok(Registration {
            component_id,
            release_id,
            changed: true,
        })
    }

    fn default_canonical_name(&self, coords: &Coordinates) -> String {
        let mut candidates = vec![coords.name.clone(), format!("{}/{}", coords.ecosystem, coords.name)];
        candidates.extend(
            (2..)
                .take(1000)
                .map(|n| format!("{}/{}#{n}", coords.ecosystem, coords.name)),
        );
        candidates
            .into_iter()
            .find(|c| !self.store.names.contains_key(c))
            .expect("a free name exists")
    }

    fn existing_release(&self, id: ReleaseId) -> Result<&ReleaseRecord, InventoryError> {
        self.store.release(id).ok_or(InventoryError::UnknownRelease(id))
    }

    fn require_state(
        &self,
        id: ReleaseId,
        action: &'static str,
        allowed: &[ClearanceState],
    ) -> Result<(), InventoryError> {
        let release = self.existing_release(id)?;
        if allowed.contains(&release.state) {
            Ok(())
        } else {
            Err(InventoryError::IllegalTransition {
                release: id,
                from: release.state,
                action,
            })
        }
    }

    pub fn attach_scan(
        &mut self,
        release: ReleaseId,
        findings: Vec<ScanFinding>,
        summary: Option<LicenseExpression>,
        copyrights: Vec<String>,
    ) -> Result<&ReleaseRecord, InventoryError> {
        self.require_state(
            release,
            "attach scan results",
            &[ClearanceState::New, ClearanceState::Scanned],
        )?;
        self.commit(EventKind::ScanAttached {
            release_id: release,
            findings,
            summary,
            copyrights,
        })?;
        self.existing_release(release)
    }

    pub fn request_clearance(&mut self, release: ReleaseId) -> Result<RequestId, InventoryError> {
        self.require_state(
            release,
            "request clearance",
            &[ClearanceState::Scanned, ClearanceState::Rejected],
        )?;
        let request_id = RequestId(self.store.next_request);
        self.commit(EventKind::ClearanceRequested {
            release_id: release,
            request_id,
        })?;
        Ok(request_id)
    }

    pub fn decide(&mut self, release: ReleaseId, input: DecisionInput) -> Result<&ReleaseRecord, InventoryError> {
        if !self.is_reviewer_role(&input.role) {
            return Err(InventoryError::Unauthorized(input.role));
        }
        self.existing_release(release)?;
        validate_decision_shape(&input.verdict, &input.rationale)?;
        if input.reviewer.trim().is_empty() {
            return Err(InventoryError::InvalidDecision("reviewer identity is empty".into()));
        }
        self.require_state(release, "decide", &[ClearanceState::PendingReview])?;
        let decision = ClearanceDecision {
            reviewer: input.reviewer,
            role: input.role,
            timestamp: self.clock.now(),
            verdict: input.verdict,
            rationale: input.rationale,
            policy_version: input.policy_version,
        };
        self.commit(EventKind::Decided {
            release_id: release,
            decision,
        })?;
        self.existing_release(release)
    }

    /// Records where the release source can be fetched. No event when unchanged.
    pub fn record_source(&mut self, release: ReleaseId, source: SourceRef) -> Result<bool, InventoryError> {
        if self.existing_release(release)?.source_ref.as_ref() == Some(&source) {
            return Ok(false);
        }
        self.commit(EventKind::SourceRecorded {
            release_id: release,
            source,
        })?;
        Ok(true)
    }

    /// Fills `declared_license` when it is still empty. Returns whether it changed.
    pub fn set_declared_license(
        &mut self,
        release: ReleaseId,
        expression: LicenseExpression,
        origin: &str,
    ) -> Result<bool, InventoryError> {
        self.require_state(
            release,
            "set the declared license",
            &[
                ClearanceState::New,
                ClearanceState::Scanned,
                ClearanceState::PendingReview,
            ],
        )?;
        if self.existing_release(release)?.declared_license.is_some() {
            return Ok(false);
        }
        self.commit(EventKind::DeclaredLicenseSet {
            release_id: release,
            expression,
            origin: origin.to_string(),
        })?;
        Ok(true)
    }

    pub fn lookup(&self, coords: &Coordinates) -> Option<(ReleaseId, ClearanceState)> {
        self.store.lookup(coords)
    }
}
