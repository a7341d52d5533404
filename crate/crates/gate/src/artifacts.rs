// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! Writing compliance artifacts to disk.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use clearway_core::artifacts::{
    generate_ccs_manifest, generate_license_list, generate_notices, generate_sbom, SbomOptions, CCS_MANIFEST_FILE,
    LICENSE_LIST_FILE, NOTICE_FILE, SBOM_FILE, SOURCE_OFFER_FILE,
};
use clearway_core::ingest::{DependencyGraph, ProductManifest};
use clearway_core::inventory::Store;
use clearway_core::policy::ProductEvaluation;
use clearway_core::scanner::Corpus;

/// Everything the generators read. `graph` should already be cut down to
/// what ships with the product.
pub struct ArtifactInputs<'a> {
    pub manifest: &'a ProductManifest,
    pub graph: &'a DependencyGraph,
    pub store: &'a Store,
    pub evaluation: &'a ProductEvaluation,
    pub corpus: &'a Corpus,
    pub created: DateTime<Utc>,
    pub contact: &'a str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Artifact {
    Sbom,
    Notice,
    LicenseList,
    Ccs,
}

impl Artifact {
    pub const ALL: [Artifact; 4] = [Artifact::Sbom, Artifact::Notice, Artifact::LicenseList, Artifact::Ccs];
}

/// Rendered artifact files, as `(file name, contents)`.
pub fn render(inputs: &ArtifactInputs<'_>, which: Artifact, warnings: &mut Vec<String>) -> Vec<(&'static str, String)> {
    match which {
        Artifact::Sbom => vec![(
            SBOM_FILE,
            generate_sbom(
                inputs.manifest,
                inputs.graph,
                inputs.store,
                &SbomOptions::at(inputs.created),
            ),
        )],
        Artifact::Notice => {
            let notices = generate_notices(inputs.manifest, inputs.evaluation, inputs.store, inputs.corpus);
            warnings.extend(notices.warnings.iter().map(ToString::to_string));
            vec![(NOTICE_FILE, notices.text)]
        }
        Artifact::LicenseList => vec![(LICENSE_LIST_FILE, generate_license_list(inputs.graph, inputs.store))],
        Artifact::Ccs => {
            let (ccs, offer) = generate_ccs_manifest(inputs.manifest, inputs.evaluation, inputs.store, inputs.contact);
            warnings.extend(
                ccs.incomplete()
                    .map(|e| format!("no source location recorded for {}; CCS entry is incomplete", e.coords)),
            );
            vec![(CCS_MANIFEST_FILE, ccs.to_json()), (SOURCE_OFFER_FILE, offer)]
        }
    }
}

/// Writes the files through a temporary name so a reader never sees a
/// half-written artifact.
pub fn write(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        let tmp = dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_all(inputs: &ArtifactInputs<'_>, dir: &Path, warnings: &mut Vec<String>) -> Result<Vec<PathBuf>> {
    let files: Vec<_> = Artifact::ALL
        .into_iter()
        .flat_map(|a| render(inputs, a, warnings))
        .collect();
    write(dir, &files)
}
