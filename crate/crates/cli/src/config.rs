//! Configuration files: covariance specs and simulation configs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use torus_polymer::covariance::CovarianceModel;
use torus_polymer::error::Error as CoreError;
use torus_polymer::grid::TorusSpec;
use torus_polymer::mc::SimConfig;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    LogSlope,
    Overlap,
    Q2,
}

fn all_estimators() -> Vec<Estimator> {
    vec![Estimator::LogSlope, Estimator::Overlap, Estimator::Q2]
}

fn one() -> usize {
    1
}

/// On-disk schema of `simulate --config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    pub torus: TorusSpec,
    pub model: CovarianceModel,
    pub beta: f64,
    pub dt: f64,
    #[serde(default)]
    pub t_burn: Option<f64>,
    pub t_total: f64,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "all_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_batches: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_modes: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q3_points: Option<usize>,
}

/// A validated simulation configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSim {
    pub config: SimConfig,
    pub estimators: Vec<Estimator>,
    pub fingerprint: String,
}

impl ResolvedSim {
    /// The fully explicit file form.
    pub fn to_file(&self) -> SimFile {
        let c = &self.config;
        SimFile {
            torus: c.torus,
            model: c.model,
            beta: c.beta,
            dt: c.dt,
            t_burn: Some(c.burn_in()),
            t_total: c.t_total,
            replicas: c.replicas,
            seed: Some(c.seed),
            estimators: self.estimators.clone(),
            alias_tol: Some(c.alias_tol),
            min_batches: Some(c.min_batches),
            trace_points: Some(c.trace_points),
            test_modes: Some(c.test_modes.clone()),
            q3_points: Some(c.q3_points),
        }
    }
}

/// JSON with object keys in sorted order and no whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string(&v).expect("JSON value")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn fingerprint<T: Serialize>(value: &T) -> String {
    sha256_hex(canonical_json(value).as_bytes())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn schema(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Parse and range errors become schema errors; an unresolved grid keeps its
/// own exit class.
fn config_error(path: &Path, e: CoreError) -> CliError {
    match e {
        CoreError::Resolution { .. } => CliError::Core(e),
        other => schema(path, other.to_string()),
    }
}

/// Loads a covariance specification such as `{"family":"bspline","d":1,"k":2,"w":1.0}`.
pub fn load_model(path: &Path) -> Result<CovarianceModel> {
    serde_json::from_str(&read(path)?).map_err(|e| schema(path, e.to_string()))
}

/// Fills defaults, applies the seed override and checks every invariant.
pub fn resolve(file: SimFile, seed_override: Option<u64>, path: &Path) -> Result<ResolvedSim> {
    let seed = seed_override.or(file.seed).ok_or_else(|| {
        CliError::Usage("a seed is required: pass --seed or set \"seed\" in the config".into())
    })?;
    let mut config = SimConfig::new(file.torus, file.model, file.beta, seed);
    config.dt = file.dt;
    config.t_burn = file.t_burn;
    config.t_total = file.t_total;
    config.replicas = file.replicas;
    if let Some(v) = file.alias_tol {
        config.alias_tol = v;
    }
    if let Some(v) = file.min_batches {
        config.min_batches = v;
    }
    if let Some(v) = file.trace_points {
        config.trace_points = v;
    }
    if let Some(v) = file.test_modes {
        config.test_modes = v;
    }
    if let Some(v) = file.q3_points {
        config.q3_points = v;
    }
    config.t_burn = Some(config.burn_in());
    config.plan().map_err(|e| config_error(path, e))?;
    if file.estimators.is_empty() {
        return Err(schema(path, "estimators must not be empty"));
    }
    let mut resolved = ResolvedSim {
        config,
        estimators: file.estimators,
        fingerprint: String::new(),
    };
    resolved.fingerprint = fingerprint(&resolved.to_file());
    Ok(resolved)
}

/// Reads, validates and resolves a simulation config.
pub fn load_config(path: &Path, seed_override: Option<u64>) -> Result<ResolvedSim> {
    let file: SimFile =
        serde_json::from_str(&read(path)?).map_err(|e| schema(path, e.to_string()))?;
    resolve(file, seed_override, path)
}

/// Writes the explicit form of a resolved config.
pub fn save_config(path: &Path, resolved: &ResolvedSim) -> Result<()> {
    let text = serde_json::to_string_pretty(&resolved.to_file()).expect("serializable config");
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "torus": {"d": 1, "L": 4.0, "N": 64},
        "model": {"family": "bspline", "d": 1, "k": 2, "w": 1.0},
        "beta": 0.3, "dt": 0.01, "t_total": 40.0
    }"#;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn minimal_config_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "sim.json", MINIMAL);
        let a = load_config(&p, Some(5)).unwrap();
        assert_eq!(a.config.burn_in(), 16.0);
        let saved = dir.path().join("saved.json");
        save_config(&saved, &a).unwrap();
        let b = load_config(&saved, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint.len(), 64);
    }

    #[test]
    fn seed_is_required_and_flag_wins() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "sim.json", MINIMAL);
        assert!(matches!(load_config(&p, None), Err(CliError::Usage(_))));
        let with_seed = MINIMAL.replace("\"t_total\": 40.0", "\"t_total\": 40.0, \"seed\": 3");
        let p = write(dir.path(), "seeded.json", &with_seed);
        assert_eq!(load_config(&p, None).unwrap().config.seed, 3);
        assert_eq!(load_config(&p, Some(9)).unwrap().config.seed, 9);
    }

    #[test]
    fn range_and_support_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "b.json", &MINIMAL.replace("0.3", "1.5"));
        let e = load_config(&p, Some(1)).unwrap_err();
        assert!(
            matches!(e, CliError::Schema { .. }) && e.to_string().contains("β must lie"),
            "{e}"
        );
        let p = write(
            dir.path(),
            "w.json",
            &MINIMAL.replace("\"w\": 1.0", "\"w\": 5.0"),
        );
        let e = load_config(&p, Some(1)).unwrap_err();
        assert!(e.to_string().contains("support"), "{e}");
        let p = write(dir.path(), "m.json", &MINIMAL.replace("\"beta\": 0.3,", ""));
        let e = load_config(&p, Some(1)).unwrap_err();
        assert!(e.to_string().contains("missing field `beta`"), "{e}");
        assert_eq!(e.exit_code(), 65);
    }

    #[test]
    fn canonical_form_sorts_keys() {
        let v: serde_json::Value = serde_json::from_str(r#"{"b":1,"a":{"d":2,"c":3}}"#).unwrap();
        assert_eq!(canonical_json(&v), r#"{"a":{"c":3,"d":2},"b":1}"#);
    }
}
