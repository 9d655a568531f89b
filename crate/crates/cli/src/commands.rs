//! Single-problem subcommands: `solve`, `sections`, `monitor`, `verify`.

use std::path::{Path, PathBuf};

use malab_core::section::{
    default_ladder, enforce_h2, growth_envelope, normal_derivative_monitor, pogorelov_series,
    scaling_fit, tangent_cone_profile,
};
use malab_core::solver::solve_dirichlet;
use malab_core::{ScalarField, VerifyReport};
use serde::{Deserialize, Serialize};

use crate::config::{from_value, parse_json, ProblemConfig};
use crate::error::{CliError, CliResult};
use crate::experiment::localization::{records_csv, section_records, FitSummary};
use crate::output::{write_atomic, Artifact, Csv};
use crate::verify::{verify, VerifyKind, VerifyOptions};

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Splits an optional extra section `key` off a problem configuration.
fn problem_with<T: for<'de> Deserialize<'de> + Default>(
    path: &Path,
    key: &str,
) -> CliResult<(ProblemConfig, T)> {
    let origin = path.display().to_string();
    let mut value: serde_json::Value = parse_json(&read(path)?, &origin)?;
    let extra = match value.as_object_mut().and_then(|m| m.remove(key)) {
        Some(v) => from_value(&v, &format!("{origin}: {key}"))?,
        None => T::default(),
    };
    Ok((from_value(&value, &origin)?, extra))
}

/// `<prefix><suffix>` next to the prefix.
fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write(prefix: &Path, suffix: &str, artifact: &Artifact) -> CliResult<PathBuf> {
    let path = with_suffix(prefix, suffix);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    write_atomic(&path, &artifact.contents)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub residual_sup: f64,
    pub runtime_ms: f64,
    pub converged: bool,
    pub convexity_flag: bool,
}

fn solve_problem(problem: &ProblemConfig) -> CliResult<(ScalarField, SolveSummary)> {
    let b = problem.build()?;
    let trace = b.trace.clone();
    let (field, rep) = solve_dirichlet(
        &b.domain,
        &b.grid,
        &b.rhs,
        move |x: &[f64]| trace(x),
        &b.solver,
    )?;
    let summary = SolveSummary {
        iterations: rep.iterations,
        residual_sup: rep.residual_sup,
        runtime_ms: rep.runtime_ms,
        converged: rep.converged,
        convexity_flag: rep.convexity_flag,
    };
    Ok((field, summary))
}

/// Writes `<prefix>.csv` (node values) and `<prefix>.json` (solve report).
pub fn solve(config: &Path, prefix: &Path) -> CliResult<SolveSummary> {
    let origin = config.display().to_string();
    let problem: ProblemConfig = parse_json(&read(config)?, &origin)?;
    let (field, summary) = solve_problem(&problem)?;
    let mut csv = Vec::new();
    field.write_csv(&mut csv).expect("writing to memory");
    write(
        prefix,
        ".csv",
        &Artifact {
            file: String::new(),
            contents: csv,
        },
    )?;
    write(prefix, ".json", &Artifact::json("", &summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectionOptions {
    /// Heights; the default ladder of the grid when absent.
    pub heights: Option<Vec<f64>>,
    /// Normal range for removing the slope `b x_n` at the marked point;
    /// `null` keeps the field as solved.
    pub t_max: Option<f64>,
}

impl Default for SectionOptions {
    fn default() -> Self {
        SectionOptions {
            heights: None,
            t_max: Some(0.1),
        }
    }
}

fn prepared(problem: &ProblemConfig, t_max: Option<f64>) -> CliResult<ScalarField> {
    let (field, summary) = solve_problem(problem)?;
    if !summary.converged {
        return Err(CliError::Lab(malab_core::LabError::Precondition(format!(
            "solve did not converge (residual {:e})",
            summary.residual_sup
        ))));
    }
    Ok(match t_max {
        Some(t) => enforce_h2(&field, problem.rhs.alpha, t)?.0,
        None => field,
    })
}

/// Writes `<prefix>.csv` (normalization records) and `<prefix>.json` (fit).
pub fn sections(config: &Path, prefix: &Path) -> CliResult<FitSummary> {
    let (problem, opts): (ProblemConfig, SectionOptions) = problem_with(config, "sections")?;
    let field = prepared(&problem, opts.t_max)?;
    let heights = opts
        .heights
        .unwrap_or_else(|| default_ladder(field.grid().spacing()));
    let records = section_records(&field, &heights, problem.rhs.alpha)?;
    let fit = FitSummary::from(&scaling_fit(&records)?);
    write(prefix, ".csv", &Artifact::csv("", &records_csv(&records)))?;
    write(prefix, ".json", &Artifact::json("", &fit))?;
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MonitorKind {
    Pogorelov,
    NormalDerivative,
    Growth,
    TangentCone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorOptions {
    pub radius: f64,
    pub heights: Vec<f64>,
    pub direction: Vec<f64>,
    pub scales: Vec<f64>,
    pub t_max: Option<f64>,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        MonitorOptions {
            radius: 0.25,
            heights: vec![0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625],
            direction: vec![1.0, 0.0],
            scales: vec![0.25, 0.125, 0.0625],
            t_max: Some(0.1),
        }
    }
}

/// Writes `<prefix>.json` with the monitor output and, for series and
/// profiles, `<prefix>.csv`.
pub fn monitor(kind: MonitorKind, config: &Path, prefix: &Path) -> CliResult<serde_json::Value> {
    let (problem, opts): (ProblemConfig, MonitorOptions) = problem_with(config, "monitor")?;
    let field = prepared(&problem, opts.t_max)?;
    let alpha = problem.rhs.alpha;
    let x0 = field.domain().marked_point().to_vec();
    let (json, csv) = match kind {
        MonitorKind::Pogorelov => {
            let r = pogorelov_series(&field, &x0, &opts.heights, &opts.direction, alpha)?;
            let mut csv = Csv::new(&["h", "normalized_product"]);
            for &(h, v) in &r.series {
                csv.row(&[h.into(), v.into()]);
            }
            (serde_json::to_value(&r), Some(csv))
        }
        MonitorKind::NormalDerivative => (
            serde_json::to_value(normal_derivative_monitor(&field, alpha, opts.radius)?),
            None,
        ),
        MonitorKind::Growth => (
            serde_json::to_value(growth_envelope(&field, opts.radius)?),
            None,
        ),
        MonitorKind::TangentCone => {
            let n = field.dim();
            let mut dirs = Vec::new();
            for d in 0..n - 1 {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; n - 1];
                    e[d] = s;
                    dirs.push(e);
                }
            }
            let profiles = tangent_cone_profile(&field, &dirs, &opts.scales)?;
            let mut header: Vec<String> = (1..n).map(|i| format!("e_{i}")).collect();
            header.extend(["lambda", "quotient"].map(String::from));
            let mut csv = Csv::new(&header);
            for p in &profiles {
                for &(l, q) in &p.samples {
                    let mut row: Vec<crate::output::Cell> =
                        p.direction.iter().map(|&v| v.into()).collect();
                    row.push(l.into());
                    row.push(q.into());
                    csv.row(&row);
                }
            }
            (serde_json::to_value(&profiles), Some(csv))
        }
    };
    let json = json.expect("serializable monitor");
    write(prefix, ".json", &Artifact::json("", &json))?;
    if let Some(csv) = csv {
        write(prefix, ".csv", &Artifact::csv("", &csv))?;
    }
    Ok(json)
}

/// Runs one verification suite; the report is also written to `out` if given.
pub fn verify_command(
    kind: VerifyKind,
    opts: &VerifyOptions,
    out: Option<&Path>,
) -> CliResult<VerifyReport> {
    let rep = verify(kind, opts)?;
    if let Some(path) = out {
        write_atomic(path, &Artifact::json("", &rep).contents)?;
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROBLEM: &str = r#"{
        "domain": {"dimension": 2, "shape": "half-ball", "params": {"radius": 1.0}},
        "grid": {"cells": 32},
        "rhs": {"alpha": 1.0},
        "solver": {"tol_residual": 1e-9},
        "boundary": {"kind": "quadratic"}
    }"#;

    #[test]
    fn solve_writes_field_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("p.json");
        std::fs::write(&cfg, PROBLEM).unwrap();
        let prefix = dir.path().join("out/run");
        let s = solve(&cfg, &prefix).unwrap();
        assert!(s.converged && s.residual_sup <= 1e-9);
        let csv = std::fs::read_to_string(dir.path().join("out/run.csv")).unwrap();
        assert!(csv.starts_with("i,j,x1,x2,value\n"));
        let json: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("out/run.json")).unwrap(),
        )
        .unwrap();
        for k in ["iterations", "residual_sup", "runtime_ms"] {
            assert!(json.get(k).is_some(), "{k}");
        }
    }

    #[test]
    fn monitor_options_are_read_from_their_own_key() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("p.json");
        let text = PROBLEM.replacen('{', r#"{"monitor": {"radius": 0.5, "t_max": 0.25},"#, 1);
        std::fs::write(&cfg, text).unwrap();
        let (p, o): (ProblemConfig, MonitorOptions) = problem_with(&cfg, "monitor").unwrap();
        assert_eq!(o.radius, 0.5);
        assert_eq!(p.rhs.alpha, 1.0);
        let bad = PROBLEM.replacen('{', r#"{"monitor": {"radios": 0.5},"#, 1);
        std::fs::write(&cfg, bad).unwrap();
        let e = problem_with::<MonitorOptions>(&cfg, "monitor").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
