//! Prompt catalogs: JSON arrays of [`PromptPair`] objects.
//!
//! The four bundled catalogs are compiled in from `data/catalog/`; user
//! catalogs with the same layout can be loaded from disk.

use super::{PromptPair, StateChangeKind, Violation};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("failed to read catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed catalog: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate prompt pair id '{0}'")]
    DuplicateId(String),
    #[error("invalid prompt pair: {0}")]
    InvalidPair(Violation),
}

const VAPORIZATION: &str = include_str!("../../data/catalog/vaporization.json");
const MELTING: &str = include_str!("../../data/catalog/melting.json");
const PROTEIN_DENATURATION: &str = include_str!("../../data/catalog/protein_denaturation.json");
const MAILLARD: &str = include_str!("../../data/catalog/maillard.json");

/// The bundled catalog for `kind`: four template forms for each of the two
/// gaze areas.
pub fn load_prompt_catalog(kind: StateChangeKind) -> Vec<PromptPair> {
    let source = match kind {
        StateChangeKind::Vaporization => VAPORIZATION,
        StateChangeKind::Melting => MELTING,
        StateChangeKind::ProteinDenaturation => PROTEIN_DENATURATION,
        StateChangeKind::Maillard => MAILLARD,
    };
    parse_catalog(source).expect("bundled catalog is valid")
}

/// Parses and validates a catalog document.
pub fn parse_catalog(json: &str) -> Result<Vec<PromptPair>, CatalogError> {
    let pairs: Vec<PromptPair> = serde_json::from_str(json)?;
    let mut seen = BTreeSet::new();
    for (i, pair) in pairs.iter().enumerate() {
        if let Some(v) = pair.violations(&format!("[{i}]")).into_iter().next() {
            return Err(CatalogError::InvalidPair(v));
        }
        if !seen.insert(pair.id.as_str()) {
            return Err(CatalogError::DuplicateId(pair.id.clone()));
        }
    }
    Ok(pairs)
}

pub fn load_catalog_file(path: &Path) -> Result<Vec<PromptPair>, CatalogError> {
    let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_catalog(&text)
}
