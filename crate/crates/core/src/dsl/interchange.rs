use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AgentConfiguration, AgentModel, ModelWorkspace, PersonalizationMapping, UserProfile,
};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("malformed interchange document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported schema_version '{0}'")]
    UnsupportedVersion(String),
}

#[derive(Serialize)]
struct DocumentRef<'a> {
    schema_version: &'a str,
    profiles: &'a [UserProfile],
    agents: &'a [AgentModel],
    configurations: &'a [AgentConfiguration],
    mappings: &'a [PersonalizationMapping],
}

#[derive(Deserialize)]
struct Document {
    schema_version: String,
    profiles: Vec<UserProfile>,
    agents: Vec<AgentModel>,
    configurations: Vec<AgentConfiguration>,
    mappings: Vec<PersonalizationMapping>,
}

/// One JSON document holding every model and mapping of the workspace.
pub fn export_interchange(workspace: &ModelWorkspace) -> String {
    let doc = DocumentRef {
        schema_version: SCHEMA_VERSION,
        profiles: &workspace.profiles,
        agents: &workspace.agents,
        configurations: &workspace.configurations,
        mappings: &workspace.mappings,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("workspace serializes");
    text.push('\n');
    text
}

pub fn import_interchange(text: &str) -> Result<ModelWorkspace, InterchangeError> {
    #[derive(Deserialize)]
    struct VersionProbe {
        schema_version: String,
    }
    let probe: VersionProbe = serde_json::from_str(text)?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(InterchangeError::UnsupportedVersion(probe.schema_version));
    }
    let doc: Document = serde_json::from_str(text)?;
    debug_assert_eq!(doc.schema_version, SCHEMA_VERSION);
    Ok(ModelWorkspace {
        profiles: doc.profiles,
        agents: doc.agents,
        configurations: doc.configurations,
        mappings: doc.mappings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_workspace_document() {
        let text = export_interchange(&ModelWorkspace::default());
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["schema_version"], "1");
        for key in ["profiles", "agents", "configurations", "mappings"] {
            assert_eq!(value[key], serde_json::json!([]), "{key}");
        }
        assert_eq!(
            import_interchange(&text).unwrap(),
            ModelWorkspace::default()
        );
    }

    #[test]
    fn rejects_other_versions() {
        let text =
            r#"{"schema_version":"2","profiles":[],"agents":[],"configurations":[],"mappings":[]}"#;
        assert!(matches!(
            import_interchange(text),
            Err(InterchangeError::UnsupportedVersion(v)) if v == "2"
        ));
        assert!(matches!(
            import_interchange("{"),
            Err(InterchangeError::Malformed(_))
        ));
    }
}
