//! Run manifests: parsing, validation, concurrent execution and the
//! summary artifacts.

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::parse_json;
use crate::error::{CliError, CliResult};
use crate::experiment::{in_window, Context, ExperimentKind, Params, Window};
use crate::output::{write_artifacts, Artifact};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable holding the number of worker threads.
pub const THREADS_ENV: &str = "MALAB_THREADS";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    experiments: Vec<RawExperiment>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: String,
    kind: ExperimentKind,
    #[serde(default)]
    params: serde_json::Value,
    #[serde(default)]
    acceptance: BTreeMap<String, Window>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub kind: ExperimentKind,
    pub params: Params,
    pub acceptance: BTreeMap<String, Window>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub experiments: Vec<Experiment>,
    /// SHA-256 of the canonical JSON of the manifest.
    pub config_hash: String,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        && !name.starts_with('.')
}

impl Manifest {
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let value: serde_json::Value = parse_json(text, origin)?;
        let raw: RawManifest = parse_json(text, origin)?;
        let mut seen = HashSet::new();
        let mut experiments = Vec::with_capacity(raw.experiments.len());
        for (k, e) in raw.experiments.into_iter().enumerate() {
            let at = format!("{origin}: experiments[{k}] `{}`", e.name);
            if !valid_name(&e.name) {
                return Err(CliError::usage(format!(
                    "{at}: name must be a plain file name"
                )));
            }
            if !seen.insert(e.name.clone()) {
                return Err(CliError::usage(format!("{at}: duplicate experiment name")));
            }
            let params = Params::parse(e.kind, &e.params, &format!("{at}.params"))?;
            for (metric, w) in &e.acceptance {
                if !e.kind.metrics().contains(&metric.as_str()) {
                    return Err(CliError::usage(format!(
                        "{at}.acceptance: unknown metric `{metric}` for kind {:?}; known: {}",
                        e.kind,
                        e.kind.metrics().join(", ")
                    )));
                }
                if let [Some(lo), Some(hi)] = w {
                    if lo > hi {
                        return Err(CliError::usage(format!(
                            "{at}.acceptance.{metric}: empty window"
                        )));
                    }
                }
            }
            if let Some(missing) = e
                .kind
                .required()
                .iter()
                .find(|m| !e.acceptance.contains_key(**m))
            {
                return Err(CliError::usage(format!(
                    "{at}.acceptance: missing window for `{missing}`"
                )));
            }
            experiments.push(Experiment {
                name: e.name,
                kind: e.kind,
                params,
                acceptance: e.acceptance,
            });
        }
        if experiments.is_empty() {
            return Err(CliError::usage(format!("{origin}: no experiments")));
        }
        let canonical = serde_json::to_string(&value).expect("serializable value");
        let config_hash = Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Ok(Manifest {
            experiments,
            config_hash,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Keeps the named experiments; every name must exist.
    pub fn select(mut self, only: &[String]) -> CliResult<Self> {
        if only.is_empty() {
            return Ok(self);
        }
        for n in only {
            if !self.experiments.iter().any(|e| &e.name == n) {
                return Err(CliError::usage(format!(
                    "--only: no experiment named `{n}`"
                )));
            }
        }
        self.experiments.retain(|e| only.contains(&e.name));
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub window: Window,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub kind: ExperimentKind,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub metrics: BTreeMap<String, Option<f64>>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub name: String,
    pub kind: ExperimentKind,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tool_version: String,
    pub config_hash: String,
    pub experiments: Vec<RunEntry>,
    pub pass: bool,
}

/// Worker count from the environment, defaulting to the available cores.
pub fn thread_count() -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::usage(format!("{THREADS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Runs one experiment, converting errors and panics into a failed summary.
pub fn run_experiment(e: &Experiment, ctx: &Context) -> (ExperimentSummary, Vec<Artifact>) {
    let result = catch_unwind(AssertUnwindSafe(|| e.params.run(ctx)));
    let (outcome, error) = match result {
        Ok(Ok(o)) => (Some(o), None),
        Ok(Err(err)) => (None, Some(err.to_string())),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            (None, Some(format!("panic: {msg}")))
        }
    };
    let metrics: BTreeMap<String, f64> = outcome
        .as_ref()
        .map(|o| o.metrics.clone())
        .unwrap_or_default();
    let checks: Vec<Check> = e
        .acceptance
        .iter()
        .map(|(name, w)| {
            let value = metrics.get(name).copied();
            Check {
                name: name.clone(),
                value: value.and_then(finite),
                window: *w,
                pass: value.is_some_and(|v| in_window(v, w)),
            }
        })
        .collect();
    let summary = ExperimentSummary {
        name: e.name.clone(),
        kind: e.kind,
        pass: error.is_none() && checks.iter().all(|c| c.pass),
        error,
        metrics: metrics.into_iter().map(|(k, v)| (k, finite(v))).collect(),
        checks,
    };
    let mut artifacts = outcome.map(|o| o.artifacts).unwrap_or_default();
    artifacts.push(Artifact::json("summary.json", &summary));
    (summary, artifacts)
}

/// Runs every experiment on `threads` workers. Each experiment owns
/// `<out>/<name>/`; `run.json` is written last.
pub fn run(
    manifest: &Manifest,
    out: &Path,
    threads: usize,
) -> CliResult<(RunSummary, Vec<ExperimentSummary>)> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.display().to_string(),
        source,
    })?;
    let ctx = Context::default();
    let next = AtomicUsize::new(0);
    let n = manifest.experiments.len();
    let results: Mutex<Vec<Option<CliResult<ExperimentSummary>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, n) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= n {
                    break;
                }
                let e = &manifest.experiments[k];
                let (summary, artifacts) = run_experiment(e, &ctx);
                let dir: PathBuf = out.join(&e.name);
                let written = write_artifacts(&dir, &artifacts).map(|_| summary);
                results.lock().unwrap_or_else(|p| p.into_inner())[k] = Some(written);
            });
        }
    });
    let mut summaries = Vec::with_capacity(n);
    for r in results.into_inner().unwrap_or_else(|p| p.into_inner()) {
        summaries.push(r.expect("every experiment ran")?);
    }
    let run = RunSummary {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: manifest.config_hash.clone(),
        experiments: summaries
            .iter()
            .map(|s| RunEntry {
                name: s.name.clone(),
                kind: s.kind,
                pass: s.pass,
            })
            .collect(),
        pass: summaries.iter().all(|s| s.pass),
    };
    write_artifacts(out, &[Artifact::json("run.json", &run)])?;
    Ok((run, summaries))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{"experiments": [
        {"name": "analytic", "kind": "verify-analytic",
         "params": {"samples": 100, "barrier_samples": 200},
         "acceptance": {
            "u0_max_deviation": [0, 1e-10], "nonuniqueness_max_deviation": [0, 1e-10],
            "nonuniqueness_gap": [0.01, null], "barrier_failures": [0, 0],
            "barrier_min_samples": [200, null], "wbar_max_deviation": [0, 1e-10],
            "v_det_deviation": [0, 1e-12], "legendre_involution_ratio": [0, 1],
            "partial_legendre_closed_residual": [0, 0], "partial_legendre_fd_residual": [0, 1e-8],
            "levelset_gauss_deviation": [0, 1e-8]}}
    ]}"#;

    fn usage(text: &str) -> String {
        match Manifest::parse(text, "m") {
            Err(e @ CliError::Usage(_)) => e.to_string(),
            other => panic!("expected usage error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_a_usage_error_with_position() {
        let msg = usage("{\"experiments\": [\n  {\"name\": 1,}]}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn validation_errors_name_the_key() {
        let mut v: serde_json::Value = serde_json::from_str(SMALL).unwrap();
        let first = v["experiments"][0].clone();
        v["experiments"].as_array_mut().unwrap().push(first);
        assert!(usage(&v.to_string()).contains("duplicate"));
        assert!(usage(&SMALL.replace("\"samples\": 100", "\"samples\": -1")).contains("params"));
        assert!(usage(&SMALL.replace("\"barrier_failures\"", "\"bogus\""))
            .contains("unknown metric `bogus`"));
        assert!(usage(&SMALL.replace("verify-analytic", "nope")).contains("kind"));
        let mut v: serde_json::Value = serde_json::from_str(SMALL).unwrap();
        v["experiments"][0]["acceptance"]
            .as_object_mut()
            .unwrap()
            .remove("levelset_gauss_deviation");
        assert!(usage(&v.to_string()).contains("missing window for `levelset_gauss_deviation`"));
        let guard = r#"{"experiments": [{"name": "l", "kind": "liouville-2d", "params": {"lengths": [1.5, 3]},
            "acceptance": {"case1_min_decay": [1.5, null], "case2_min_gap_fraction": [0.5, null], "case2_trend": [0, 1]}}]}"#;
        assert!(usage(guard).contains("boundary layer"));
    }

    #[test]
    fn runs_are_deterministic_and_isolated() {
        let m = Manifest::parse(SMALL, "m").unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let (ra, _) = run(&m, a.path(), 2).unwrap();
        let (rb, _) = run(&m, b.path(), 1).unwrap();
        assert!(ra.pass && ra == rb);
        for f in ["run.json", "analytic/summary.json", "analytic/verify.csv"] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert_eq!(x, y, "{f}");
        }
    }

    #[test]
    fn failing_window_fails_only_its_experiment() {
        let text = SMALL.replace(
            "\"nonuniqueness_gap\": [0.01, null]",
            "\"nonuniqueness_gap\": [10, null]",
        );
        let m = Manifest::parse(&text, "m").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (r, s) = run(&m, dir.path(), 1).unwrap();
        assert!(!r.pass && !s[0].pass);
        assert_eq!(s[0].checks.iter().filter(|c| !c.pass).count(), 1);
    }

    #[test]
    fn only_selects_known_names() {
        let m = Manifest::parse(SMALL, "m").unwrap();
        assert!(m.clone().select(&["analytic".into()]).is_ok());
        assert!(matches!(m.select(&["x".into()]), Err(CliError::Usage(_))));
    }
}
