// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! `clearway sync`: bring every dependency of a product into the inventory
//! so it can be reviewed.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use clearway_core::inventory::{ClearanceState, Clock, Inventory, ManualClock, SourceRef, SystemClock};
use clearway_core::scanner::{scan_tree, ScanConfig};
use clearway_core::{Coordinates, Execution};
use clearway_enrichment::{Enricher, EnrichmentConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::config::load_corpus;
use crate::inputs::{load_product, LockfileArg, PathCheck};

#[derive(Debug, Clone, Default)]
pub struct SyncConfig {
    pub journal: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub lockfiles: Vec<LockfileArg>,
    pub sbom_in: Option<PathBuf>,
    /// Unpacked sources, laid out as `<dir>/<ecosystem>/<name>/<version>/`.
    pub sources: Option<PathBuf>,
    pub enrichment: Option<EnrichmentConfig>,
    pub now: Option<DateTime<Utc>>,
    pub execution: Execution,
    pub corpus_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncSummary {
    pub registered: usize,
    pub scanned: usize,
    pub requested: usize,
    /// Declared licenses taken from the input SBOM.
    pub declared: usize,
    /// Declared licenses taken from the knowledge base.
    pub enriched: usize,
    pub warnings: Vec<String>,
}

impl SyncSummary {
    pub fn to_text(&self) -> String {
        let mut out: String = self.warnings.iter().map(|w| format!("WARN {w}\n")).collect();
        out.push_str(&format!(
            "SYNC registered={} scanned={} requested={} declared={} enriched={}\n",
            self.registered, self.scanned, self.requested, self.declared, self.enriched
        ));
        out
    }
}

/// Where the unpacked source of `coords` would live under `root`.
pub fn source_dir(root: &Path, coords: &Coordinates) -> Option<PathBuf> {
    let version = coords.version.as_deref()?;
    Some(root.join(&coords.ecosystem).join(&coords.name).join(version))
}

/// SHA-256 over the sorted `(relative path, file digest)` pairs of a tree,
/// so the hash does not depend on directory listing order.
pub fn tree_hash(root: &Path) -> Result<String> {
    let mut outer = Sha256::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.with_context(|| format!("walking {}", root.display()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("walk stays under root");
        let rel: Vec<String> = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        let bytes = fs::read(entry.path()).with_context(|| format!("reading {}", entry.path().display()))?;
        outer.update(rel.join("/").as_bytes());
        outer.update([0]);
        outer.update(Sha256::digest(&bytes));
    }
    Ok(format!("sha256:{}", hex::encode(outer.finalize())))
}

fn open_for_review(state: ClearanceState) -> bool {
    !matches!(state, ClearanceState::Cleared | ClearanceState::Rejected)
}

pub fn sync_inventory(cfg: &SyncConfig) -> Result<SyncSummary> {
    PathCheck::default()
        .creatable("--journal", cfg.journal.as_deref())
        .file("--manifest", cfg.manifest.as_deref())
        .lockfiles(&cfg.lockfiles)
        .optional_file("--sbom-in", cfg.sbom_in.as_deref())
        .optional_dir("--sources", cfg.sources.as_deref())
        .optional_dir("corpus_dir", cfg.corpus_dir.as_deref())
        .finish()?;
    let inputs = load_product(
        cfg.manifest.as_deref().expect("validated"),
        &cfg.lockfiles,
        cfg.sbom_in.as_deref(),
    )?;
    let corpus = load_corpus(cfg.corpus_dir.as_deref())?;
    let clock: Arc<dyn Clock> = match cfg.now {
        Some(at) => Arc::new(ManualClock::new(at)),
        None => Arc::new(SystemClock),
    };
    let journal = cfg.journal.as_deref().expect("validated");
    let mut inventory = Inventory::open(journal, clock).with_context(|| format!("journal {}", journal.display()))?;
    let mut summary = SyncSummary {
        warnings: inputs.warnings.clone(),
        ..Default::default()
    };
    let nodes: Vec<Coordinates> = inputs.graph.nodes().iter().cloned().collect();

    for coords in &nodes {
        if inventory.lookup(coords).is_none() {
            let reg = inventory
                .register_component(coords, None)
                .with_context(|| format!("registering {coords}"))?;
            summary.registered += usize::from(reg.changed);
        }
    }

    if let Some(sbom) = &inputs.sbom {
        for pkg in &sbom.components {
            let Some(expr) = &pkg.declared else { continue };
            let Some(release) = inventory.store().find_release(&pkg.coords) else {
                continue;
            };
            if release.declared_license.is_some() || !open_for_review(release.state) {
                continue;
            }
            let id = release.id;
            if inventory.set_declared_license(id, expr.clone(), "sbom")? {
                summary.declared += 1;
            }
        }
    }

    if let Some(config) = &cfg.enrichment {
        let wanted: Vec<Coordinates> = nodes
            .iter()
            .filter(|c| {
                inventory
                    .store()
                    .find_release(c)
                    .is_some_and(|r| r.declared_license.is_none() && open_for_review(r.state))
            })
            .cloned()
            .collect();
        let enricher = Enricher::new(config.clone());
        for result in enricher.enrich_all(&wanted) {
            summary.warnings.extend(result.warnings.iter().cloned());
            if clearway_enrichment::apply(&mut inventory, &result)? {
                summary.enriched += 1;
            }
        }
    }

    if let Some(root) = &cfg.sources {
        let scan_config = ScanConfig {
            execution: cfg.execution,
            ..ScanConfig::default()
        };
        for coords in &nodes {
            let Some(release) = inventory.store().find_release(coords) else {
                continue;
            };
            if release.state != ClearanceState::New {
                continue;
            }
            let id = release.id;
            let Some(dir) = source_dir(root, coords).filter(|d| d.is_dir()) else {
                continue;
            };
            let report =
                scan_tree(&dir, &corpus, &scan_config).with_context(|| format!("scanning {}", dir.display()))?;
            summary.warnings.extend(
                report
                    .warnings
                    .iter()
                    .map(|w| format!("{coords}: {}: {}", w.path, w.message)),
            );
            inventory.attach_scan(id, report.findings, report.summary, report.copyrights)?;
            summary.scanned += 1;
            let absolute = fs::canonicalize(&dir).unwrap_or(dir.clone());
            inventory.record_source(
                id,
                SourceRef {
                    url: format!("file://{}", absolute.display()),
                    content_hash: tree_hash(&dir)?,
                },
            )?;
            inventory.request_clearance(id)?;
            summary.requested += 1;
        }
    }
    Ok(summary)
}
