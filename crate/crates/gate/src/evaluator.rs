// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use chrono::Utc;
use clearway_core::ingest::{DependencyGraph, ProductManifest};
use clearway_core::inventory::Store;
use clearway_core::par::Execution;
use clearway_core::policy::{evaluate_product, EvaluationOptions, PolicyDocument, ProductEvaluation};
use clearway_service::ProductEvaluator;

/// Products known to a running service, evaluated on demand against the
/// current inventory snapshot and the wall clock.
pub struct GateEvaluator {
    policy: PolicyDocument,
    products: BTreeMap<String, (ProductManifest, DependencyGraph)>,
    execution: Execution,
}

impl GateEvaluator {
    pub fn new(policy: PolicyDocument, execution: Execution) -> Self {
        Self {
            policy,
            products: BTreeMap::new(),
            execution,
        }
    }

    pub fn add(&mut self, id: impl Into<String>, manifest: ProductManifest, graph: DependencyGraph) {
        self.products.insert(id.into(), (manifest, graph));
    }

    pub fn product_ids(&self) -> impl Iterator<Item = &str> {
        self.products.keys().map(String::as_str)
    }
}

impl ProductEvaluator for GateEvaluator {
    fn evaluate(&self, product_id: &str, store: &Store) -> Option<Result<ProductEvaluation, String>> {
        let (manifest, graph) = self.products.get(product_id)?;
        let mut options = EvaluationOptions::at(Utc::now());
        options.execution = self.execution;
        Some(Ok(evaluate_product(manifest, graph, store, &self.policy, &options)))
    }

    fn policy_version(&self) -> String {
        self.policy.policy_version.clone()
    }
}
