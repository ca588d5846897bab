//! In-memory domain types for user profiles, agents, agent configurations and
//! the mappings that link them.
//!
//! All types are plain immutable data once built; the DSL parsers in
//! [`crate::dsl`] and the interchange importer are the usual constructors.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Language an agent's texts are authored in when the header does not say.
pub const DEFAULT_AGENT_LANGUAGE: &str = "en";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown state '{0}'")]
    UnknownState(String),
    #[error("dangling {kind} reference '{id}'")]
    DanglingReference { kind: ArtifactKind, id: String },
    #[error("a mapping for profile '{user_profile}' and agent '{agent}' already exists")]
    DuplicateMapping { user_profile: String, agent: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    UserProfile,
    Agent,
    Configuration,
    Mapping,
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArtifactKind::UserProfile => "user profile",
            ArtifactKind::Agent => "agent",
            ArtifactKind::Configuration => "configuration",
            ArtifactKind::Mapping => "mapping",
        })
    }
}

/// `[A-Za-z_][A-Za-z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Primary language subtag of 2-8 letters, optionally followed by one
/// region/script subtag of 2-8 alphanumerics (`en`, `fr-CA`, `zh-Hant`).
pub fn is_language_tag(s: &str) -> bool {
    let mut parts = s.split('-');
    let primary = parts.next().unwrap_or_default();
    if !(2..=8).contains(&primary.len()) || !primary.chars().all(|c| c.is_ascii_alphabetic()) {
        return false;
    }
    match (parts.next(), parts.next()) {
        (None, _) => true,
        (Some(region), None) => {
            (2..=8).contains(&region.len()) && region.chars().all(|c| c.is_ascii_alphanumeric())
        }
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// User profiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeGroup {
    Child,
    Adult,
    Elderly,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbilityKind {
    Physical,
    Sensory,
    Cognitive,
    Other,
}

/// A disability or constraint of the user and what it affects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbilityConstraint {
    pub id: String,
    pub kind: AbilityKind,
    pub description: String,
    pub affected_capabilities: Vec<String>,
    /// Content tags the agent must never recommend to this user.
    pub excludes_content: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceTag {
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: String,
    pub display_name: String,
    pub age_group: AgeGroup,
    pub native_language: Option<String>,
    pub preferred_languages: Vec<String>,
    pub abilities: Vec<AbilityConstraint>,
    pub preferences: Vec<PreferenceTag>,
    pub notes: String,
}

impl UserProfile {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            display_name: id.clone(),
            id,
            age_group: AgeGroup::Unspecified,
            native_language: None,
            preferred_languages: Vec::new(),
            abilities: Vec::new(),
            preferences: Vec::new(),
            notes: String::new(),
        }
    }

    /// Invariant violations, as human-readable messages. Empty when valid.
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.id.is_empty() {
            problems.push("profile id must not be empty".to_string());
        }
        if let Some(lang) = &self.native_language {
            if !is_language_tag(lang) {
                problems.push(format!(
                    "native_language '{lang}' is not a valid language tag"
                ));
            }
        }
        for lang in &self.preferred_languages {
            if !is_language_tag(lang) {
                problems.push(format!(
                    "preferred language '{lang}' is not a valid language tag"
                ));
            }
        }
        let mut seen = BTreeSet::new();
        for ability in &self.abilities {
            if !seen.insert(ability.id.as_str()) {
                problems.push(format!("duplicate ability '{}'", ability.id));
            }
            if ability.kind != AbilityKind::Other && ability.affected_capabilities.is_empty() {
                problems.push(format!(
                    "ability '{}' must list affected capabilities",
                    ability.id
                ));
            }
        }
        problems
    }

    /// Excluded content tags over all abilities, first-seen order, deduplicated.
    pub fn excluded_content(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.abilities
            .iter()
            .flat_map(|a| a.excludes_content.iter())
            .filter(|tag| seen.insert(tag.as_str()))
            .cloned()
            .collect()
    }

    pub fn has_adaptation_data(&self) -> bool {
        !self.abilities.is_empty() || !self.preferences.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Agents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    PredefinedResponse { text: String },
    LlmResponse { instruction: Option<String> },
    RagResponse { instruction: Option<String> },
}

impl Action {
    pub fn say(text: impl Into<String>) -> Self {
        Action::PredefinedResponse { text: text.into() }
    }

    pub fn predefined_text(&self) -> Option<&str> {
        match self {
            Action::PredefinedResponse { text } => Some(text),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Action::PredefinedResponse { .. } => "predefined_response",
            Action::LlmResponse { .. } => "llm_response",
            Action::RagResponse { .. } => "rag_response",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Body {
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    IntentMatched { intent: String },
}

impl Condition {
    pub fn intent(&self) -> &str {
        match self {
            Condition::IntentMatched { intent } => intent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub source: String,
    pub target: String,
    /// Absent for automatic transitions.
    pub condition: Option<Condition>,
}

impl Transition {
    pub fn automatic(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            condition: None,
        }
    }

    pub fn on_intent(
        source: impl Into<String>,
        intent: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            condition: Some(Condition::IntentMatched {
                intent: intent.into(),
            }),
        }
    }

    pub fn is_automatic(&self) -> bool {
        self.condition.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub id: String,
    pub body: Body,
    pub transitions: Vec<Transition>,
}

impl State {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            body: Body::default(),
            transitions: Vec::new(),
        }
    }

    pub fn automatic_transition(&self) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.is_automatic())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub id: String,
    pub training_phrases: Vec<String>,
    pub is_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentModel {
    pub id: String,
    pub name: String,
    /// Language the predefined texts are authored in.
    pub language: String,
    pub intents: Vec<Intent>,
    pub states: Vec<State>,
    pub initial_state: String,
}

impl AgentModel {
    pub fn lookup_state(&self, id: &str) -> Option<&State> {
        self.states.iter().find(|s| s.id == id)
    }

    pub fn lookup_intent(&self, id: &str) -> Option<&Intent> {
        self.intents.iter().find(|i| i.id == id)
    }

    /// Transitions leaving `state`, in declaration order.
    pub fn outgoing_transitions(&self, state: &str) -> Result<Vec<&Transition>, ModelError> {
        let found = self
            .lookup_state(state)
            .ok_or_else(|| ModelError::UnknownState(state.to_string()))?;
        Ok(found
            .transitions
            .iter()
            .filter(|t| t.source == state)
            .collect())
    }

    pub fn fallback_intent(&self) -> Option<&Intent> {
        self.intents.iter().find(|i| i.is_fallback)
    }

    /// Predefined response texts in model order (states, then actions).
    pub fn predefined_texts(&self) -> Vec<&str> {
        self.states
            .iter()
            .flat_map(|s| s.body.actions.iter())
            .filter_map(Action::predefined_text)
            .collect()
    }

    pub fn predefined_texts_mut(&mut self) -> impl Iterator<Item = &mut String> {
        self.states
            .iter_mut()
            .flat_map(|s| s.body.actions.iter_mut())
            .filter_map(|a| match a {
                Action::PredefinedResponse { text } => Some(text),
                _ => None,
            })
    }
}

// ---------------------------------------------------------------------------
// Agent configurations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Formal,
    Informal,
    #[default]
    Unchanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceLength {
    Concise,
    Elaborate,
    #[default]
    Unchanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abbreviations {
    Expand,
    Allow,
    #[default]
    Unchanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageComplexity {
    Simple,
    Standard,
    Expert,
    #[default]
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextStyle {
    /// Multiplier, at least 1.0.
    pub font_scale: f64,
    pub high_contrast: bool,
}

impl Default for TextStyle {
    fn default() -> Self {
        Self {
            font_scale: 1.0,
            high_contrast: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechStyle {
    pub voice: String,
    /// Multiplier in `[0.5, 2.0]`.
    pub speed: f64,
}

impl Default for SpeechStyle {
    fn default() -> Self {
        Self {
            voice: "default".to_string(),
            speed: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PresentationConfig {
    pub language: Option<String>,
    pub style: Style,
    pub sentence_length: SentenceLength,
    pub abbreviations: Abbreviations,
    pub language_complexity: LanguageComplexity,
    pub text_style: TextStyle,
    pub speech_style: SpeechStyle,
    pub avatar: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseTiming {
    #[default]
    Instant,
    SimulatedTyping,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BehaviorConfig {
    pub response_timing: ResponseTiming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Speech,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityConfig {
    pub input: BTreeSet<Modality>,
    pub output: BTreeSet<Modality>,
}

impl Default for ModalityConfig {
    fn default() -> Self {
        Self {
            input: BTreeSet::from([Modality::Text]),
            output: BTreeSet::from([Modality::Text]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContentConfig {
    pub adapt_to_user_profile: bool,
    pub verify_with_second_llm: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentClassifierKind {
    #[default]
    Keyword,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    #[default]
    HttpChat,
    Console,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TechnologyConfig {
    pub intent_classifier: IntentClassifierKind,
    pub llm_endpoint: String,
    pub rag_db: Option<String>,
    pub platform: Platform,
    pub text2speech: Option<String>,
}

impl Default for TechnologyConfig {
    fn default() -> Self {
        Self {
            intent_classifier: IntentClassifierKind::Keyword,
            llm_endpoint: "default".to_string(),
            rag_db: None,
            platform: Platform::HttpChat,
            text2speech: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfiguration {
    pub id: String,
    pub presentation: PresentationConfig,
    pub behavior: BehaviorConfig,
    pub modality: ModalityConfig,
    pub content: ContentConfig,
    pub technology: TechnologyConfig,
}

impl AgentConfiguration {
    /// A configuration with every aspect left unchanged and text-only I/O.
    pub fn identity(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            presentation: PresentationConfig::default(),
            behavior: BehaviorConfig::default(),
            modality: ModalityConfig::default(),
            content: ContentConfig::default(),
            technology: TechnologyConfig::default(),
        }
    }

    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.id.is_empty() {
            problems.push("configuration id must not be empty".to_string());
        }
        let p = &self.presentation;
        if let Some(lang) = &p.language {
            if !is_language_tag(lang) {
                problems.push(format!("language '{lang}' is not a valid language tag"));
            }
        }
        if !(p.text_style.font_scale.is_finite() && p.text_style.font_scale >= 1.0) {
            problems.push(format!(
                "font_scale {} must be at least 1.0",
                p.text_style.font_scale
            ));
        }
        if !(0.5..=2.0).contains(&p.speech_style.speed) {
            problems.push(format!(
                "voice_speed {} must lie in [0.5, 2.0]",
                p.speech_style.speed
            ));
        }
        if self.modality.input.is_empty() {
            problems.push("input modalities must not be empty".to_string());
        }
        if self.modality.output.is_empty() {
            problems.push("output modalities must not be empty".to_string());
        }
        if self.content.verify_with_second_llm && !self.content.adapt_to_user_profile {
            problems.push("verify_with_second_llm requires adapt_to_user_profile".to_string());
        }
        if let Some(problem) = self.speech_without_tts() {
            problems.push(problem);
        }
        problems
    }

    pub fn speech_without_tts(&self) -> Option<String> {
        (self.modality.output.contains(&Modality::Speech) && self.technology.text2speech.is_none())
            .then(|| "speech output requires a text2speech adapter".to_string())
    }
}

// ---------------------------------------------------------------------------
// Mappings and workspaces
// ---------------------------------------------------------------------------

/// Links a user profile and a base agent to the configuration applied for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonalizationMapping {
    pub id: String,
    pub user_profile: String,
    pub agent: String,
    pub configuration: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelWorkspace {
    pub profiles: Vec<UserProfile>,
    pub agents: Vec<AgentModel>,
    pub configurations: Vec<AgentConfiguration>,
    pub mappings: Vec<PersonalizationMapping>,
}

#[derive(Debug, Clone, Copy)]
pub struct ResolvedMapping<'a> {
    pub profile: &'a UserProfile,
    pub agent: &'a AgentModel,
    pub configuration: &'a AgentConfiguration,
}

impl ModelWorkspace {
    pub fn profile(&self, id: &str) -> Option<&UserProfile> {
        self.profiles.iter().find(|p| p.id == id)
    }

    pub fn agent(&self, id: &str) -> Option<&AgentModel> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn configuration(&self, id: &str) -> Option<&AgentConfiguration> {
        self.configurations.iter().find(|c| c.id == id)
    }

    pub fn mapping(&self, id: &str) -> Option<&PersonalizationMapping> {
        self.mappings.iter().find(|m| m.id == id)
    }

    /// Adds a mapping, rejecting a second one for the same (profile, agent).
    pub fn insert_mapping(&mut self, mapping: PersonalizationMapping) -> Result<(), ModelError> {
        if self
            .mappings
            .iter()
            .any(|m| m.user_profile == mapping.user_profile && m.agent == mapping.agent)
        {
            return Err(ModelError::DuplicateMapping {
                user_profile: mapping.user_profile,
                agent: mapping.agent,
            });
        }
        self.mappings.push(mapping);
        Ok(())
    }

    pub fn resolve_mapping<'a>(
        &'a self,
        mapping: &PersonalizationMapping,
    ) -> Result<ResolvedMapping<'a>, ModelError> {
        let dangling = |kind, id: &str| ModelError::DanglingReference {
            kind,
            id: id.to_string(),
        };
        Ok(ResolvedMapping {
            profile: self
                .profile(&mapping.user_profile)
                .ok_or_else(|| dangling(ArtifactKind::UserProfile, &mapping.user_profile))?,
            agent: self
                .agent(&mapping.agent)
                .ok_or_else(|| dangling(ArtifactKind::Agent, &mapping.agent))?,
            configuration: self
                .configuration(&mapping.configuration)
                .ok_or_else(|| dangling(ArtifactKind::Configuration, &mapping.configuration))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gym() -> AgentModel {
        let mut greeting = State::new("Greeting");
        greeting.body.actions.push(Action::say("Hi"));
        greeting
            .transitions
            .push(Transition::automatic("Greeting", "Idle"));
        let mut idle = State::new("Idle");
        idle.transitions.extend([
            Transition::on_intent("Idle", "Muscles_intent", "TrainingPlan"),
            Transition::on_intent("Idle", "Nutrition_intent", "Nutrition"),
            Transition::on_intent("Idle", "Other", "OtherQuestions"),
        ]);
        let mut plan = State::new("TrainingPlan");
        plan.body.actions.push(Action::say("Plan"));
        plan.transitions
            .push(Transition::automatic("TrainingPlan", "Idle"));
        AgentModel {
            id: "gym".into(),
            name: "Gym".into(),
            language: "en".into(),
            intents: vec![],
            states: vec![greeting, idle, plan],
            initial_state: "Greeting".into(),
        }
    }

    #[test]
    fn lookup_state_hits_and_misses() {
        let model = gym();
        assert_eq!(
            model.lookup_state("TrainingPlan").unwrap().id,
            "TrainingPlan"
        );
        assert!(model.lookup_state("NoSuchState").is_none());
        let empty = AgentModel {
            states: vec![],
            ..gym()
        };
        assert!(empty.lookup_state("Greeting").is_none());
    }

    #[test]
    fn outgoing_transitions_keep_declaration_order() {
        let model = gym();
        let idle = model.outgoing_transitions("Idle").unwrap();
        let targets: Vec<_> = idle.iter().map(|t| t.target.as_str()).collect();
        assert_eq!(targets, ["TrainingPlan", "Nutrition", "OtherQuestions"]);
        let greeting = model.outgoing_transitions("Greeting").unwrap();
        assert_eq!(greeting.len(), 1);
        assert!(greeting[0].is_automatic());
        assert_eq!(
            model.outgoing_transitions("Nope"),
            Err(ModelError::UnknownState("Nope".into()))
        );
    }

    #[test]
    fn language_tags() {
        for ok in ["en", "fr", "fr-CA", "zh-Hant", "es-419"] {
            assert!(is_language_tag(ok), "{ok}");
        }
        for bad in ["12", "", "e", "en-", "en-US-x", "en_US", "toolonglang"] {
            assert!(!is_language_tag(bad), "{bad}");
        }
    }

    #[test]
    fn mapping_uniqueness_and_resolution() {
        let mut ws = ModelWorkspace::default();
        ws.agents.push(gym());
        ws.profiles.push(UserProfile::new("elderly"));
        ws.configurations
            .push(AgentConfiguration::identity("elderly_conf"));
        let mapping = PersonalizationMapping {
            id: "elderly".into(),
            user_profile: "elderly".into(),
            agent: "gym".into(),
            configuration: "elderly_conf".into(),
        };
        ws.insert_mapping(mapping.clone()).unwrap();
        let dup = PersonalizationMapping {
            id: "again".into(),
            ..mapping.clone()
        };
        assert!(matches!(
            ws.insert_mapping(dup),
            Err(ModelError::DuplicateMapping { .. })
        ));

        let resolved = ws.resolve_mapping(&mapping).unwrap();
        assert_eq!(resolved.configuration.id, "elderly_conf");

        let broken = PersonalizationMapping {
            configuration: "missing_conf".into(),
            ..mapping
        };
        assert_eq!(
            ws.resolve_mapping(&broken).unwrap_err(),
            ModelError::DanglingReference {
                kind: ArtifactKind::Configuration,
                id: "missing_conf".into()
            }
        );
    }

    #[test]
    fn configuration_invariants() {
        let mut conf = AgentConfiguration::identity("c");
        assert!(conf.check().is_empty());
        conf.modality.output.insert(Modality::Speech);
        assert_eq!(conf.check().len(), 1);
        conf.technology.text2speech = Some("browser".into());
        conf.content.verify_with_second_llm = true;
        assert_eq!(conf.check().len(), 1);
        conf.content.adapt_to_user_profile = true;
        conf.presentation.speech_style.speed = 2.5;
        assert_eq!(conf.check().len(), 1);
    }
}
