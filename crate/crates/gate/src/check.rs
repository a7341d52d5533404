// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! `clearway check`: evaluate a product against the policy and the current
//! inventory, and decide whether the build may proceed.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use clearway_core::policy::{evaluate_product, EvaluationOptions, Status};
use clearway_core::Execution;

use crate::artifacts::{write_all, ArtifactInputs};
use crate::config::load_corpus;
use crate::inputs::{load_product, read_policy, read_store, LockfileArg, PathCheck};
use crate::report::{
    apply_baseline, exit_code, Baseline, GateReport, ProductInfo, ReportFormat, Timing, REPORT_SCHEMA_VERSION,
};

pub const REPORT_JSON_FILE: &str = "gate-report.json";
pub const REPORT_TEXT_FILE: &str = "gate-report.txt";

#[derive(Debug, Clone, Default)]
pub struct CheckConfig {
    pub policy: Option<PathBuf>,
    pub journal: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub lockfiles: Vec<LockfileArg>,
    pub sbom_in: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub strict: bool,
    pub baseline: Option<PathBuf>,
    pub report: ReportFormat,
    pub artifacts_always: bool,
    /// Evaluation time; the wall clock when unset.
    pub now: Option<DateTime<Utc>>,
    pub execution: Execution,
    pub corpus_dir: Option<PathBuf>,
    pub contact: Option<String>,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}

/// Runs the check. Inputs are only read; the journal is replayed, never
/// appended to. An `Err` is an internal failure (exit 3).
pub fn run_check(cfg: &CheckConfig) -> Result<GateReport> {
    let start = Instant::now();
    PathCheck::default()
        .file("--policy", cfg.policy.as_deref())
        .file("--journal", cfg.journal.as_deref())
        .file("--manifest", cfg.manifest.as_deref())
        .lockfiles(&cfg.lockfiles)
        .optional_file("--sbom-in", cfg.sbom_in.as_deref())
        .optional_file("--baseline", cfg.baseline.as_deref())
        .optional_dir("corpus_dir", cfg.corpus_dir.as_deref())
        .out_dir(cfg.out_dir.as_deref())
        .finish()?;
    let now = cfg.now.unwrap_or_else(Utc::now);

    let inputs = load_product(
        cfg.manifest.as_deref().expect("validated"),
        &cfg.lockfiles,
        cfg.sbom_in.as_deref(),
    )?;
    let policy = read_policy(cfg.policy.as_deref().expect("validated"))?;
    let store = read_store(cfg.journal.as_deref().expect("validated"))?;
    let baseline = match &cfg.baseline {
        Some(path) => Baseline::load(path)?,
        None => Baseline::default(),
    };
    let ingest_ms = ms(start);

    let evaluate_start = Instant::now();
    let mut options = EvaluationOptions::at(now);
    options.execution = cfg.execution;
    let evaluation = evaluate_product(&inputs.manifest, &inputs.graph, &store, &policy, &options);
    let (status, baselined) = apply_baseline(&evaluation, &baseline);
    let exit = exit_code(status, cfg.strict);
    let evaluate_ms = ms(evaluate_start);

    let mut warnings = inputs.warnings.clone();
    warnings.extend(policy.load_warnings(now));
    if status == Status::NeedsReview && !cfg.strict {
        let pending = evaluation
            .nodes
            .iter()
            .filter(|n| n.status == Status::NeedsReview)
            .count();
        warnings.push(format!(
            "{pending} component(s) need review; not failing the build without --strict"
        ));
    }

    let artifacts_start = Instant::now();
    let mut artifacts = Vec::new();
    if let Some(dir) = &cfg.out_dir {
        if exit != 1 || cfg.artifacts_always {
            let corpus = load_corpus(cfg.corpus_dir.as_deref())?;
            let closure = inputs.graph.product_closure(&options.scopes);
            let shipped = inputs.graph.restricted_to(&closure, &options.scopes);
            let artifact_inputs = ArtifactInputs {
                manifest: &inputs.manifest,
                graph: &shipped,
                store: &store,
                evaluation: &evaluation,
                corpus: &corpus,
                created: now,
                contact: cfg
                    .contact
                    .as_deref()
                    .unwrap_or(clearway_core::artifacts::DEFAULT_CONTACT),
            };
            artifacts = write_all(&artifact_inputs, dir, &mut warnings)?
                .into_iter()
                .map(|p| p.display().to_string())
                .collect();
        } else {
            warnings.push("artifacts not generated for a failing build (see --artifacts-always)".into());
        }
    }
    let artifacts_ms = ms(artifacts_start);

    let report = GateReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool: format!("clearway {}", env!("CARGO_PKG_VERSION")),
        product: ProductInfo {
            name: inputs.manifest.product_name.clone(),
            version: inputs.manifest.product_version.clone(),
            channel: inputs.manifest.channel,
        },
        status,
        exit_code: exit,
        strict: cfg.strict,
        policy_version: policy.policy_version.clone(),
        product_verdict: evaluation.product,
        nodes: evaluation.nodes,
        baselined,
        warnings,
        artifacts,
        generated_at: Utc::now(),
        timing: Timing {
            ingest_ms,
            evaluate_ms,
            artifacts_ms,
            total_ms: ms(start),
        },
    };

    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let (name, body) = match cfg.report {
            ReportFormat::Json => (REPORT_JSON_FILE, report.to_json()),
            ReportFormat::Text => (REPORT_TEXT_FILE, report.to_text()),
        };
        crate::artifacts::write(dir, &[(name, body)])?;
    }
    Ok(report)
}
