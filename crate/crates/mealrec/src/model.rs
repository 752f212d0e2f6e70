//! Versioned JSON documents for trained bandit state.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mealrec_core::BanditState;
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT: &str = "mealrec-bandit";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk wrapper: the stump list, exploration schedule, seed, replay
/// buffer and feature schema, tagged with a format version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub format_version: u32,
    pub state: BanditState,
}

impl ModelDocument {
    pub fn new(state: BanditState) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            format_version: MODEL_FORMAT_VERSION,
            state,
        }
    }
}

pub fn model_to_json(state: &BanditState) -> String {
    serde_json::to_string(&ModelDocument::new(state.clone())).expect("bandit state serializes")
}

pub fn model_from_json(text: &str) -> Result<BanditState> {
    let doc: ModelDocument = serde_json::from_str(text).context("malformed model document")?;
    if doc.format != MODEL_FORMAT || doc.format_version != MODEL_FORMAT_VERSION {
        bail!(
            "unsupported model format {} v{} (expected {MODEL_FORMAT} v{MODEL_FORMAT_VERSION})",
            doc.format,
            doc.format_version
        );
    }
    Ok(doc.state)
}

pub fn load_model(path: &Path) -> Result<BanditState> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    model_from_json(&text).with_context(|| format!("loading {}", path.display()))
}

pub fn save_model(path: &Path, state: &BanditState) -> Result<()> {
    write_atomic(path, model_to_json(state).as_bytes())
}

/// Write to a sibling temporary file, sync it, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).with_context(|| format!("writing {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}
