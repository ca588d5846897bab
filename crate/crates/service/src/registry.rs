use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use pf_core::generate::{bundle_id, read_bundle, AgentBundle, BundleError, BUNDLE_EXTENSION};
use pf_core::model::Modality;
use serde::{Deserialize, Serialize};

/// What the profile picker shows for one loaded bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCard {
    pub bundle_id: String,
    pub profile_label: String,
    pub description: String,
    pub avatar: Option<String>,
    pub font_scale: f64,
    pub high_contrast: bool,
    pub input_modalities: BTreeSet<Modality>,
    pub output_modalities: BTreeSet<Modality>,
}

impl ProfileCard {
    pub fn for_bundle(id: &str, bundle: &AgentBundle) -> Self {
        let features = &bundle.directives.deterministic;
        Self {
            bundle_id: id.to_string(),
            profile_label: bundle.profile_label.clone(),
            description: format!(
                "{} personalized for the {} profile",
                bundle.agent.name, bundle.profile_label
            ),
            avatar: features.avatar.clone(),
            font_scale: features.text_style.font_scale,
            high_contrast: features.text_style.high_contrast,
            input_modalities: features.input_modalities.clone(),
            output_modalities: features.output_modalities.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedBundle {
    pub id: String,
    pub bundle: Arc<AgentBundle>,
}

/// Bundles in load order, deduplicated by digest.
#[derive(Debug, Clone, Default)]
pub struct BundleRegistry {
    bundles: Vec<LoadedBundle>,
    digests: HashSet<String>,
}

impl BundleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a bundle; returns false when an identical bundle is already
    /// loaded. A different bundle with a taken id gets a numeric suffix.
    pub fn insert(&mut self, bundle: AgentBundle) -> bool {
        if !self.digests.insert(bundle.digest.clone()) {
            return false;
        }
        let base = bundle_id(&bundle);
        let mut id = base.clone();
        let mut n = 2;
        while self.get(&id).is_some() {
            id = format!("{base}-{n}");
            n += 1;
        }
        self.bundles.push(LoadedBundle {
            id,
            bundle: Arc::new(bundle),
        });
        true
    }

    pub fn load_file(&mut self, path: &Path) -> Result<bool, BundleError> {
        Ok(self.insert(read_bundle(path)?))
    }

    /// Loads every `.pab` file directly in `dir`, sorted by file name.
    pub fn load_dir(&mut self, dir: &Path) -> Result<usize, BundleError> {
        let io = |source| BundleError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == BUNDLE_EXTENSION))
            .collect();
        paths.sort();
        let mut added = 0;
        for path in paths {
            if self.load_file(&path)? {
                added += 1;
            }
        }
        Ok(added)
    }

    pub fn get(&self, id: &str) -> Option<&LoadedBundle> {
        self.bundles.iter().find(|b| b.id == id)
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    pub fn cards(&self) -> Vec<ProfileCard> {
        self.bundles
            .iter()
            .map(|b| ProfileCard::for_bundle(&b.id, &b.bundle))
            .collect()
    }
}
