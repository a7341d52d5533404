// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! Continuous open-source license compliance.
//!
//! The crate covers the whole evaluation path a CI gate needs:
//!
//! - [`expr`]: SPDX license expressions and their choice-set expansion.
//! - [`scanner`]: license tags and full-text matches in source trees.
//! - [`inventory`]: the journaled component registry and clearance workflow.
//! - [`ingest`]: lockfiles and SPDX documents into dependency graphs.
//! - [`policy`]: declarative license policy and verdicts.
//! - [`artifacts`]: SBOM, notices, license list and source-offer material.

pub mod artifacts;
pub mod coords;
pub mod expr;
pub mod ingest;
pub mod inventory;
pub mod par;
pub mod policy;
pub mod scanner;

pub use coords::Coordinates;
pub use expr::{ChoiceSet, LicenseExpression, LicenseTerm};
pub use par::Execution;
