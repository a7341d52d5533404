// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! The CI gate: ingest a product's dependencies, look them up in the
//! inventory, evaluate them against the policy, write compliance artifacts
//! and turn the result into an exit code.
//!
//! | exit | meaning |
//! |------|---------|
//! | 0 | pass, or needs review without `--strict` |
//! | 1 | policy violation |
//! | 2 | needs review, with `--strict` |
//! | 3 | bad configuration, unreadable input or internal error |

pub mod artifacts;
pub mod check;
pub mod cli;
pub mod config;
pub mod evaluator;
pub mod inputs;
pub mod report;
pub mod sync;

pub use check::{run_check, CheckConfig};
pub use report::{GateReport, ReportFormat};
pub use sync::{sync_inventory, SyncConfig, SyncSummary};
