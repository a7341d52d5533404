// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! Compliance deliverables: SPDX SBOM, NOTICE file, license list and the
//! complete-and-corresponding-source (CCS) manifest with its offer text.
//!
//! Every generator is a pure function of its inputs. The SBOM takes its
//! creation time as a parameter so output can be reproduced byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coords::Coordinates;
use crate::ingest::{purl_for, DependencyGraph, ProductManifest};
use crate::inventory::{ClearanceState, ReleaseRecord, Store};
use crate::policy::{Channel, ObligationKind, ProductEvaluation, Subject, Verdict};
use crate::scanner::Corpus;

pub const SBOM_FILE: &str = "sbom.spdx.json";
pub const NOTICE_FILE: &str = "NOTICE.txt";
pub const LICENSE_LIST_FILE: &str = "licenses.csv";
pub const CCS_MANIFEST_FILE: &str = "ccs-manifest.json";
pub const SOURCE_OFFER_FILE: &str = "source-offer.txt";

pub const CCS_SCHEMA_VERSION: u32 = 1;
const NOASSERTION: &str = "NOASSERTION";

#[derive(Debug, Clone)]
pub struct SbomOptions {
    pub created: DateTime<Utc>,
    pub creator: String,
    /// Prefix for `documentNamespace`; product name and version are appended.
    pub namespace_base: String,
}

impl SbomOptions {
    pub fn at(created: DateTime<Utc>) -> Self {
        Self {
            created,
            creator: format!("Tool: clearway-{}", env!("CARGO_PKG_VERSION")),
            namespace_base: "https://spdx.clearway.invalid".into(),
        }
    }
}

fn path_segment(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// `licenseConcluded`: the effective expression once cleared, otherwise
/// only what the scanner found.
fn concluded(release: &ReleaseRecord) -> Option<String> {
    match release.state {
        ClearanceState::Cleared => release.effective_license(),
        _ => release.detected_license.as_ref(),
    }
    .map(ToString::to_string)
}

/// Serializes the SBOM as canonical JSON: sorted keys, two-space indent,
/// trailing newline.
pub fn generate_sbom(
    manifest: &ProductManifest,
    graph: &DependencyGraph,
    store: &Store,
    options: &SbomOptions,
) -> String {
    let ids: BTreeMap<&Coordinates, String> = graph
        .nodes()
        .iter()
        .enumerate()
        .map(|(n, c)| (c, format!("SPDXRef-Package-{n}")))
        .collect();

    let packages: Vec<Value> = graph
        .nodes()
        .iter()
        .map(|coords| {
            let release = store.find_release(coords);
            let declared = release
                .and_then(|r| r.declared_license.as_ref())
                .map(ToString::to_string);
            let download = release.and_then(|r| r.source_ref.as_ref()).map(|s| s.url.clone());
            let copyright = release
                .filter(|r| !r.copyrights.is_empty())
                .map(|r| r.copyrights.join("\n"));
            let mut package = json!({
                "SPDXID": ids[coords],
                "name": coords.name,
                "licenseConcluded": release.and_then(concluded).as_deref().unwrap_or(NOASSERTION),
                "licenseDeclared": declared.as_deref().unwrap_or(NOASSERTION),
                "downloadLocation": download.as_deref().unwrap_or(NOASSERTION),
                "copyrightText": copyright.as_deref().unwrap_or(NOASSERTION),
                "filesAnalyzed": false,
                "externalRefs": [{
                    "referenceCategory": "PACKAGE-MANAGER",
                    "referenceType": "purl",
                    "referenceLocator": purl_for(coords),
                }],
            });
            if let Some(v) = &coords.version {
                package["versionInfo"] = json!(v);
            }
            package
        })
        .collect();

    let relationships: Vec<Value> = graph
        .edges()
        .map(|e| {
            let from = e
                .from
                .as_ref()
                .map_or("SPDXRef-DOCUMENT".to_string(), |c| ids[c].clone());
            json!({
                "spdxElementId": from,
                "relationshipType": "DEPENDS_ON",
                "relatedSpdxElement": ids[&e.to],
            })
        })
        .collect();

    let doc = json!({
        "spdxVersion": "SPDX-2.3",
        "dataLicense": "CC0-1.0",
        "SPDXID": "SPDXRef-DOCUMENT",
        "name": format!("{}-{}", manifest.product_name, manifest.product_version),
        "documentNamespace": format!(
            "{}/{}/{}",
            options.namespace_base.trim_end_matches('/'),
            path_segment(&manifest.product_name),
            path_segment(&manifest.product_version)
        ),
        "creationInfo": {
            "created": options.created.to_rfc3339_opts(SecondsFormat::Secs, true),
            "creators": [options.creator],
        },
        "packages": packages,
        "relationships": relationships,
    });
    let mut out = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
    out.push('\n');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ArtifactWarning {
    /// A license needs its text reproduced but the corpus has none.
    MissingCorpusText(String),
}

impl std::fmt::Display for ArtifactWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArtifactWarning::MissingCorpusText(id) => {
                write!(f, "no license text available for {id}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Notices {
    pub text: String,
    pub warnings: Vec<ArtifactWarning>,
}

fn node_verdicts(evaluation: &ProductEvaluation) -> impl Iterator<Item = (&Coordinates, &Verdict)> {
    evaluation.nodes.iter().filter_map(|v| match &v.subject {
        Subject::Component(c) => Some((c, v)),
        Subject::Product { .. } => None,
    })
}

const RULE: &str = "----------------------------------------------------------------------";
const DOUBLE_RULE: &str = "======================================================================";

/// One section per node with an attribution or notice obligation, then each
/// license text once.
pub fn generate_notices(
    manifest: &ProductManifest,
    evaluation: &ProductEvaluation,
    store: &Store,
    corpus: &Corpus,
) -> Notices {
    let mut text = format!(
        "THIRD-PARTY SOFTWARE NOTICES\n{} {}\n\nThis product includes the third-party components listed below.\n",
        manifest.product_name, manifest.product_version
    );
    let mut texts: BTreeSet<String> = BTreeSet::new();
    for (coords, verdict) in node_verdicts(evaluation) {
        let licenses: BTreeSet<&str> = verdict
            .obligations_due
            .iter()
            .filter(|d| d.kind.is_attribution())
            .map(|d| d.license.as_str())
            .collect();
        if licenses.is_empty() {
            continue;
        }
        let release = store.find_release(coords);
        let _ = writeln!(text, "\n{RULE}");
        let _ = writeln!(
            text,
            "{}/{} {}",
            coords.ecosystem,
            coords.name,
            coords.version.as_deref().unwrap_or("")
        );
        let license_line = match (&verdict.chosen_licenses, release.and_then(|r| r.effective_license())) {
            (Some(chosen), _) => chosen.to_string(),
            (None, Some(expr)) => expr.to_string(),
            (None, None) => licenses.iter().copied().collect::<Vec<_>>().join(" AND "),
        };
        let _ = writeln!(text, "License: {license_line}");
        for line in release.map(|r| r.copyrights.as_slice()).unwrap_or_default() {
            let _ = writeln!(text, "{line}");
        }
        let ids: BTreeSet<String> = licenses.iter().map(|l| base_id(l)).collect();
        for id in &ids {
            if corpus.get(id).is_some() {
                let _ = writeln!(text, "License text: {id} (reproduced below)");
            } else {
                let _ = writeln!(text, "License text: {id} (not available)");
            }
        }
        texts.extend(ids);
    }
    let mut warnings = Vec::new();
    for id in &texts {
        match corpus.get(id) {
            Some(entry) => {
                let _ = write!(text, "\n{DOUBLE_RULE}\n{id}\n{DOUBLE_RULE}\n\n{}", entry.canonical_text);
                if !entry.canonical_text.ends_with('\n') {
                    text.push('\n');
                }
            }
            None => warnings.push(ArtifactWarning::MissingCorpusText(id.clone())),
        }
    }
    Notices { text, warnings }
}

/// The license id of a rendered term: `GPL-2.0+ WITH X` → `GPL-2.0`.
fn base_id(term: &str) -> String {
    let license = term.split(" WITH ").next().unwrap_or(term);
    license.trim_end_matches('+').to_string()
}

/// CSV with header `component,version,license,clearance_state`, one row per
/// graph node.
pub fn generate_license_list(graph: &DependencyGraph, store: &Store) -> String {
    let mut rows: Vec<[String; 4]> = graph
        .nodes()
        .iter()
        .map(|coords| {
            let release = store.find_release(coords);
            [
                format!("{}/{}", coords.ecosystem, coords.name),
                coords.version.clone().unwrap_or_default(),
                release
                    .and_then(|r| r.effective_license())
                    .map(ToString::to_string)
                    .unwrap_or_default(),
                release.map_or("UNKNOWN", |r| r.state.as_str()).to_string(),
            ]
        })
        .collect();
    rows.sort();
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["component", "version", "license", "clearance_state"])
        .expect("writing to memory");
    for row in rows {
        writer.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("flush to memory")).expect("CSV of UTF-8 input")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CcsStatus {
    Complete,
    /// No source location is recorded for the release.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcsEntry {
    pub coords: Coordinates,
    pub license_ids: Vec<String>,
    pub obligations: Vec<ObligationKind>,
    pub source_url: Option<String>,
    pub content_hash: Option<String>,
    /// Covered by the written offer rather than shipped alongside.
    pub offer_text_included: bool,
    pub status: CcsStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcsManifest {
    pub schema_version: u32,
    pub product: String,
    pub version: String,
    pub channel: Channel,
    pub entries: Vec<CcsEntry>,
}

impl CcsManifest {
    pub fn incomplete(&self) -> impl Iterator<Item = &CcsEntry> {
        self.entries.iter().filter(|e| e.status == CcsStatus::Incomplete)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("manifest serializes");
        out.push('\n');
        out
    }
}

pub const DEFAULT_CONTACT: &str = "<CONTACT ADDRESS>";

/// Entries for exactly the nodes whose verdict carries a source disclosure
/// or source offer obligation.
pub fn generate_ccs_manifest(
    manifest: &ProductManifest,
    evaluation: &ProductEvaluation,
    store: &Store,
    contact: &str,
) -> (CcsManifest, String) {
    let mut entries = Vec::new();
    for (coords, verdict) in node_verdicts(evaluation) {
        let due: Vec<_> = verdict
            .obligations_due
            .iter()
            .filter(|d| d.kind.is_disclosure())
            .collect();
        if due.is_empty() {
            continue;
        }
        let source = store.find_release(coords).and_then(|r| r.source_ref.as_ref());
        let license_ids: BTreeSet<String> = due.iter().map(|d| d.license.clone()).collect();
        let kinds: BTreeSet<ObligationKind> = due.iter().map(|d| d.kind).collect();
        entries.push(CcsEntry {
            coords: coords.clone(),
            license_ids: license_ids.into_iter().collect(),
            offer_text_included: kinds.contains(&ObligationKind::SourceOffer),
            obligations: kinds.into_iter().collect(),
            source_url: source.map(|s| s.url.clone()),
            content_hash: source.map(|s| s.content_hash.clone()),
            status: if source.is_some() {
                CcsStatus::Complete
            } else {
                CcsStatus::Incomplete
            },
        });
    }
    let ccs = CcsManifest {
        schema_version: CCS_SCHEMA_VERSION,
        product: manifest.product_name.clone(),
        version: manifest.product_version.clone(),
        channel: manifest.channel,
        entries,
    };
    let offer = source_offer(&ccs, contact);
    (ccs, offer)
}

fn source_offer(ccs: &CcsManifest, contact: &str) -> String {
    let mut text = format!(
        "WRITTEN OFFER FOR SOURCE CODE\n\n\
         {product} {version} contains open source software whose licenses entitle you\n\
         to the complete corresponding source code. For at least three years after\n\
         you received this product, a copy of that source code can be requested from:\n\n    \
         {contact}\n\n\
         Please name the product, its version and the components you are interested in.\n",
        product = ccs.product,
        version = ccs.version,
    );
    let covered: Vec<&CcsEntry> = ccs.entries.iter().filter(|e| e.offer_text_included).collect();
    if !covered.is_empty() {
        text.push_str("\nComponents covered by this offer:\n\n");
        for entry in covered {
            let _ = writeln!(text, "  {} ({})", entry.coords, entry.license_ids.join(", "));
        }
    }
    text
}
