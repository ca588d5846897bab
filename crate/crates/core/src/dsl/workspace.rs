use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::parser::{parse_agent_in, parse_configuration_in, parse_mappings_in, parse_profile_in};
use super::ParseDiagnostic;
use crate::model::ModelWorkspace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFileKind {
    Profile,
    Agent,
    Configuration,
    Mappings,
}

impl ModelFileKind {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "uprof" => Some(Self::Profile),
            "agent" => Some(Self::Agent),
            "aconf" => Some(Self::Configuration),
            "map" => Some(Self::Mappings),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{} parse error(s) in workspace", .0.len())]
    Parse(Vec<ParseDiagnostic>),
}

/// True for generated artifacts such as `gym.elderly.agent`, which live next
/// to the sources but are not part of the workspace.
pub(crate) fn is_derived(path: &Path) -> bool {
    path.file_stem()
        .and_then(|s| s.to_str())
        .is_some_and(|stem| stem.contains('.'))
}

/// Loads every model file directly inside `dir`, in file-name order.
pub fn load_workspace(dir: &Path) -> Result<ModelWorkspace, WorkspaceError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| WorkspaceError::Io { path, source }
    };
    let mut files: Vec<(PathBuf, ModelFileKind)> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(Result::ok)
        .map(|entry| entry.path())
        .filter(|path| path.is_file() && !is_derived(path))
        .filter_map(|path| ModelFileKind::from_path(&path).map(|kind| (path, kind)))
        .collect();
    files.sort_by(|a, b| a.0.cmp(&b.0));

    let mut workspace = ModelWorkspace::default();
    let mut diagnostics = Vec::new();
    for (path, kind) in files {
        let source = fs::read_to_string(&path).map_err(io_err(&path))?;
        let file = path.display().to_string();
        let outcome = match kind {
            ModelFileKind::Profile => {
                parse_profile_in(&source, &file).map(|p| workspace.profiles.push(p))
            }
            ModelFileKind::Agent => {
                parse_agent_in(&source, &file).map(|a| workspace.agents.push(a))
            }
            ModelFileKind::Configuration => {
                parse_configuration_in(&source, &file).map(|c| workspace.configurations.push(c))
            }
            // Duplicates are kept so the validator can report them.
            ModelFileKind::Mappings => {
                parse_mappings_in(&source, &file).map(|m| workspace.mappings.extend(m))
            }
        };
        if let Err(errs) = outcome {
            diagnostics.extend(errs);
        }
    }
    if diagnostics.is_empty() {
        Ok(workspace)
    } else {
        Err(WorkspaceError::Parse(diagnostics))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_files_are_skipped() {
        assert!(is_derived(Path::new("ws/gym.elderly.agent")));
        assert!(!is_derived(Path::new("ws/gym.agent")));
    }

    #[test]
    fn loads_gym_fixture() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/gym");
        let ws = load_workspace(&dir).unwrap();
        assert_eq!(ws.profiles.len(), 2);
        assert_eq!(ws.agents.len(), 1);
        assert_eq!(ws.configurations.len(), 2);
        assert_eq!(ws.mappings.len(), 2);
    }

    #[test]
    fn parse_errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("broken.agent"), "agent {").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let Err(WorkspaceError::Parse(diags)) = load_workspace(dir.path()) else {
            panic!("expected parse failure");
        };
        assert!(diags[0].span.file.ends_with("broken.agent"));
    }
}
