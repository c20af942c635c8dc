//! Prepared assisting metrics per (scenario, kind), built once and shared by runs.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use biam_core::metrics::cache_file_name;
use biam_core::{AssistingMetric, MetricKind, MetricParams, Scenario};

use crate::BenchError;

#[derive(Debug, Clone, Default)]
pub struct MetricPolicy {
    /// Directory for sidecar caches; `None` keeps everything in memory.
    pub cache_dir: Option<PathBuf>,
    /// Ignore existing sidecars and overwrite them.
    pub rebuild: bool,
    /// Refuse to build when a sidecar is missing.
    pub cached_only: bool,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub metric: AssistingMetric,
    /// Seconds spent loading or building, measured once per store entry.
    pub prep_time: f64,
}

#[derive(Debug, Default)]
pub struct MetricStore {
    policy: MetricPolicy,
    entries: Mutex<HashMap<(Scenario, MetricKind), Prepared>>,
}

impl MetricStore {
    pub fn new(policy: MetricPolicy) -> Self {
        MetricStore {
            policy,
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, scenario: Scenario, kind: MetricKind) -> Result<Prepared, BenchError> {
        if let Some(p) = self.entries.lock().unwrap().get(&(scenario, kind)) {
            return Ok(p.clone());
        }
        let map = scenario.load();
        let params = MetricParams::for_scenario(scenario);
        if let (Some(dir), true) = (&self.policy.cache_dir, self.policy.cached_only) {
            let missing = cache_file_name(&map, kind, params).is_some_and(|name| !dir.join(name).exists());
            if missing {
                return Err(BenchError::MissingMetricCache {
                    scenario,
                    kind,
                    dir: dir.clone(),
                });
            }
        }
        if let Some(dir) = &self.policy.cache_dir {
            std::fs::create_dir_all(dir).map_err(|e| BenchError::Io(dir.clone(), e))?;
        }
        let t0 = Instant::now();
        let metric = AssistingMetric::load_or_build(
            &map,
            kind,
            params,
            self.policy.cache_dir.as_deref(),
            self.policy.rebuild,
        )
        .map_err(|source| BenchError::Metric { scenario, kind, source })?;
        let prepared = Prepared {
            metric,
            prep_time: t0.elapsed().as_secs_f64(),
        };
        self.entries
            .lock()
            .unwrap()
            .entry((scenario, kind))
            .or_insert(prepared.clone());
        Ok(prepared)
    }
}
