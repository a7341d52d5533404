// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! The gate report in its JSON and text forms, and baseline filtering.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use clearway_core::policy::{Channel, ProductEvaluation, ReasonCode, Status, Subject, Verdict};
use clearway_core::Coordinates;
use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductInfo {
    pub name: String,
    pub version: String,
    pub channel: Channel,
}

/// A reason attached to one node; the unit a baseline suppresses.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub coords: Coordinates,
    pub code: ReasonCode,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub ingest_ms: f64,
    pub evaluate_ms: f64,
    pub artifacts_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub schema_version: u32,
    pub tool: String,
    pub product: ProductInfo,
    /// Status after baseline suppression; this is what the exit code follows.
    pub status: Status,
    pub exit_code: u8,
    pub strict: bool,
    pub product_verdict: Verdict,
    pub nodes: Vec<Verdict>,
    pub baselined: Vec<Finding>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
    pub policy_version: String,
    pub generated_at: DateTime<Utc>,
    pub timing: Timing,
}

fn severity(code: ReasonCode) -> Status {
    match code {
        ReasonCode::Rejected | ReasonCode::DeniedLicense => Status::Fail,
        ReasonCode::Uncleared
        | ReasonCode::NoLicense
        | ReasonCode::ReviewLicense
        | ReasonCode::ExpressionTooComplex => Status::NeedsReview,
        ReasonCode::Waived => Status::Pass,
    }
}

fn coords_of(v: &Verdict) -> Option<&Coordinates> {
    match &v.subject {
        Subject::Component(c) => Some(c),
        Subject::Product { .. } => None,
    }
}

/// Findings a previous report already carried.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Baseline(BTreeSet<Finding>);

impl Baseline {
    pub fn from_report(report: &GateReport) -> Self {
        Self(findings(&report.nodes).collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading baseline {}", path.display()))?;
        let report: GateReport = serde_json::from_slice(&bytes)
            .with_context(|| format!("baseline {} is not a JSON gate report", path.display()))?;
        Ok(Self::from_report(&report))
    }

    pub fn contains(&self, f: &Finding) -> bool {
        self.0.contains(f)
    }
}

fn findings(nodes: &[Verdict]) -> impl Iterator<Item = Finding> + '_ {
    nodes
        .iter()
        .filter(|v| v.status != Status::Pass)
        .filter_map(|v| coords_of(v).map(|c| (c, v)))
        .flat_map(|(c, v)| {
            v.reasons.iter().map(move |r| Finding {
                coords: c.clone(),
                code: r.code,
            })
        })
}

/// The status a node counts with once baselined reasons are ignored.
pub fn gating_status(node: &Verdict, baseline: &Baseline) -> Status {
    if node.status == Status::Pass {
        return Status::Pass;
    }
    let Some(coords) = coords_of(node) else {
        return node.status;
    };
    node.reasons
        .iter()
        .filter(|r| {
            !baseline.contains(&Finding {
                coords: coords.clone(),
                code: r.code,
            })
        })
        .map(|r| severity(r.code))
        .max()
        .unwrap_or(Status::Pass)
}

/// Overall status and the findings the baseline suppressed.
pub fn apply_baseline(evaluation: &ProductEvaluation, baseline: &Baseline) -> (Status, Vec<Finding>) {
    let status = evaluation
        .nodes
        .iter()
        .map(|n| gating_status(n, baseline))
        .max()
        .unwrap_or(Status::Pass);
    let suppressed = findings(&evaluation.nodes).filter(|f| baseline.contains(f)).collect();
    (status, suppressed)
}

/// Exit code for a gating status.
pub fn exit_code(status: Status, strict: bool) -> u8 {
    match status {
        Status::Pass => 0,
        Status::Fail => 1,
        Status::NeedsReview if strict => 2,
        Status::NeedsReview => 0,
    }
}

impl GateReport {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    /// One `FAIL` or `REVIEW` line per offending node, then warnings and
    /// artifacts, then a closing `RESULT` line.
    pub fn to_text(&self) -> String {
        let baseline = Baseline(self.baselined.iter().cloned().collect());
        let mut out = String::new();
        let mut failed = 0;
        let mut review = 0;
        for node in &self.nodes {
            let label = match gating_status(node, &baseline) {
                Status::Pass => continue,
                Status::Fail => {
                    failed += 1;
                    "FAIL"
                }
                Status::NeedsReview => {
                    review += 1;
                    "REVIEW"
                }
            };
            let coords = coords_of(node).map_or_else(|| node.subject.to_string(), ToString::to_string);
            let codes: Vec<&str> = node.reasons.iter().map(|r| r.code.as_str()).collect();
            let message = node.reasons.first().map_or("", |r| r.message.as_str());
            let _ = writeln!(out, "{label} {coords} {} {message}", codes.join(","));
        }
        for w in &self.warnings {
            let _ = writeln!(out, "WARN {w}");
        }
        for a in &self.artifacts {
            let _ = writeln!(out, "ARTIFACT {a}");
        }
        let _ = writeln!(
            out,
            "RESULT {} exit={} nodes={} fail={failed} review={review} baselined={} policy={}",
            self.status,
            self.exit_code,
            self.nodes.len(),
            self.baselined.len(),
            self.policy_version,
        );
        out
    }

    /// The report with wall-clock fields zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self {
            generated_at: DateTime::<Utc>::UNIX_EPOCH,
            timing: Timing::default(),
            ..self.clone()
        }
    }
}
