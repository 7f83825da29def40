//! A source adapter driven by a behavior script, for exercising the pipeline
//! without touching the filesystem.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use dupband_core::sources::{
    QuerySpec, ResultDocument, SourceAdapter, SourceName, SourceUnavailable,
};

use super::oracle::ProbeBehavior;

pub struct ScriptedSource {
    name: SourceName,
    behaviors: HashMap<String, ProbeBehavior>,
    fallback: ProbeBehavior,
    calls: Arc<AtomicUsize>,
}

impl ScriptedSource {
    pub fn new(name: impl Into<SourceName>, fallback: ProbeBehavior) -> Self {
        Self {
            name: name.into(),
            behaviors: HashMap::new(),
            fallback,
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn on_query(mut self, query_id: impl Into<String>, behavior: ProbeBehavior) -> Self {
        self.behaviors.insert(query_id.into(), behavior);
        self
    }

    /// Shared counter of `execute` calls, for probe-economy assertions.
    pub fn call_counter(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.calls)
    }
}

impl SourceAdapter for ScriptedSource {
    fn source_ref(&self) -> &SourceName {
        &self.name
    }

    fn execute(&self, query: &QuerySpec) -> Result<Vec<ResultDocument>, SourceUnavailable> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let behavior = self
            .behaviors
            .get(query.query_id().as_str())
            .copied()
            .unwrap_or(self.fallback);
        match behavior {
            ProbeBehavior::Documents(n) => Ok((0..n)
                .map(|i| ResultDocument {
                    payload: format!("scripted payload {i}").into_bytes(),
                    source_ref: self.name.clone(),
                    query: query.clone(),
                    label: format!("{}#{i}", query.query_id()),
                })
                .collect()),
            ProbeBehavior::Empty => Ok(Vec::new()),
            ProbeBehavior::Unavailable => Err(SourceUnavailable {
                source_ref: self.name.clone(),
                reason: "scripted outage".into(),
            }),
        }
    }
}
