//! Scenario files: JSON checked against the shipped schema, then against the
//! scene's own geometric rules.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use jsonschema::Validator;
use otdoa_core::scene::{Scene, SceneError};
use serde_json::Value;
use thiserror::Error;

pub const SCENARIO_SCHEMA: &str = include_str!("../schema/scenario.schema.json");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: not valid JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: schema violations:\n  {}", .violations.join("\n  "))]
    Schema { path: PathBuf, violations: Vec<String> },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: SceneError },
}

fn validator() -> &'static Validator {
    static VALIDATOR: OnceLock<Validator> = OnceLock::new();
    VALIDATOR.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCENARIO_SCHEMA).expect("shipped schema is JSON");
        jsonschema::validator_for(&schema).expect("shipped schema compiles")
    })
}

/// Schema violations of a parsed document, `instance_path: message` each.
pub fn schema_violations(doc: &Value) -> Vec<String> {
    validator()
        .iter_errors(doc)
        .map(|e| {
            let at = e.instance_path.to_string();
            if at.is_empty() {
                e.to_string()
            } else {
                format!("{at}: {e}")
            }
        })
        .collect()
}

/// Parses and validates a scenario from JSON text. `origin` only labels errors.
pub fn parse_scene(text: &str, origin: &Path) -> Result<Scene, ScenarioError> {
    let path = origin.to_path_buf();
    let doc: Value = serde_json::from_str(text).map_err(|source| ScenarioError::Json { path: path.clone(), source })?;
    let violations = schema_violations(&doc);
    if !violations.is_empty() {
        return Err(ScenarioError::Schema { path, violations });
    }
    let scene: Scene =
        serde_json::from_value(doc).map_err(|source| ScenarioError::Json { path: path.clone(), source })?;
    scene.validate().map_err(|source| ScenarioError::Invalid { path, source })?;
    Ok(scene)
}

pub fn load_scene(path: &Path) -> Result<Scene, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    parse_scene(&text, path)
}

pub fn scene_to_json(scene: &Scene) -> String {
    let mut s = serde_json::to_string_pretty(scene).expect("scene serializes");
    s.push('\n');
    s
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<(), ScenarioError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| ScenarioError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, scene_to_json(scene)).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}
