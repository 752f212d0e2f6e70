//! Recipe dataset files.

use std::fs;
use std::path::{Path, PathBuf};

use mealrec_core::{Error, LoadMode, RawDataset, RecipeDataset};

/// The bundled 50-recipe dataset.
pub const FIXTURE_JSON: &str = include_str!("../data/fixture_recipes.json");

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}", path = .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: line {line}, column {column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: {source}")]
    Invalid {
        origin: String,
        #[source]
        source: Error,
    },
}

impl LoadError {
    /// True for failures to read the file at all, as opposed to problems
    /// with its content.
    pub fn is_io(&self) -> bool {
        matches!(self, LoadError::Io { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: RecipeDataset,
    pub warnings: Vec<String>,
}

/// Parse and validate a dataset document. `origin` names the source in
/// error messages.
pub fn parse_dataset(text: &str, origin: &str, mode: LoadMode) -> Result<Loaded, LoadError> {
    let raw: RawDataset = serde_json::from_str(text).map_err(|e| {
        // serde_json appends " at line L column C"; report it separately.
        let message = e.to_string();
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        LoadError::Parse {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message,
        }
    })?;
    let (dataset, warnings) =
        RecipeDataset::from_raw(raw, mode).map_err(|source| LoadError::Invalid {
            origin: origin.to_string(),
            source,
        })?;
    Ok(Loaded { dataset, warnings })
}

pub fn load_dataset(path: &Path, mode: LoadMode) -> Result<Loaded, LoadError> {
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, &path.display().to_string(), mode)
}

/// The bundled dataset, or the file at `path`.
pub fn load_or_fixture(path: Option<&Path>, mode: LoadMode) -> Result<Loaded, LoadError> {
    match path {
        Some(p) => load_dataset(p, mode),
        None => parse_dataset(FIXTURE_JSON, "<fixture>", mode),
    }
}

pub fn fixture() -> RecipeDataset {
    parse_dataset(FIXTURE_JSON, "<fixture>", LoadMode::Full)
        .expect("bundled fixture is valid")
        .dataset
}

/// Pretty JSON in the on-disk format.
pub fn to_json(ds: &RecipeDataset) -> String {
    serde_json::to_string_pretty(&ds.to_raw()).expect("datasets serialize")
}
