//! Directory of JSON documents: `profiles/<user>.json` and
//! `models/<user>.json`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mealrec_core::{BanditState, UserProfile};
use serde::{Deserialize, Serialize};

use crate::model::{load_model, save_model, write_atomic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredProfile {
    pub version: u64,
    pub profile: UserProfile,
}

#[derive(Debug, Clone)]
pub struct ProfileStore {
    root: PathBuf,
}

/// User ids double as file names, so they are restricted to a safe
/// alphabet.
pub fn valid_user_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl ProfileStore {
    pub fn open(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root.join("profiles"))?;
        fs::create_dir_all(root.join("models"))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn profile_path(&self, user: &str) -> PathBuf {
        self.root.join("profiles").join(format!("{user}.json"))
    }

    fn model_path(&self, user: &str) -> PathBuf {
        self.root.join("models").join(format!("{user}.json"))
    }

    pub fn get(&self, user: &str) -> Result<Option<StoredProfile>> {
        let path = self.profile_path(user);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
            )),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e).with_context(|| format!("reading {}", path.display())),
        }
    }

    /// Replace the stored profile and bump its version. A persisted model
    /// was trained for the previous preferences, so it is dropped when they
    /// change.
    pub fn put(&self, profile: UserProfile) -> Result<StoredProfile> {
        let user = profile.user_id.clone();
        let previous = self.get(&user)?;
        let prefs_changed = previous
            .as_ref()
            .is_some_and(|p| p.profile.prefs != profile.prefs);
        let stored = StoredProfile {
            version: previous.map_or(1, |p| p.version + 1),
            profile,
        };
        let json = serde_json::to_vec_pretty(&stored)?;
        write_atomic(&self.profile_path(&user), &json)?;
        if prefs_changed {
            self.delete_model(&user)?;
        }
        Ok(stored)
    }

    pub fn load_model(&self, user: &str) -> Result<Option<BanditState>> {
        let path = self.model_path(user);
        if !path.exists() {
            return Ok(None);
        }
        load_model(&path).map(Some)
    }

    pub fn save_model(&self, user: &str, state: &BanditState) -> Result<()> {
        save_model(&self.model_path(user), state)
    }

    pub fn delete_model(&self, user: &str) -> Result<()> {
        match fs::remove_file(self.model_path(user)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }

    /// Sync the store directories so completed renames are durable.
    pub fn flush(&self) -> io::Result<()> {
        for sub in ["profiles", "models"] {
            fs::File::open(self.root.join(sub))?.sync_all()?;
        }
        Ok(())
    }
}
