//! Design-time personalization: rewrite every predefined response of an
//! agent, one configuration aspect at a time, through a text-rewriting
//! adapter. Each aspect sees the output of the previous one.

mod numbered;
mod prompts;

use std::fmt;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use numbered::{parse_numbered, render_numbered, NumberedListError};
pub use prompts::{build_aspect_prompt, NUMBERED_LIST_TAIL};

use crate::dsl::Keyword;
use crate::llm::{AdapterError, ChatMessage, LlmEndpoint, Role};
use crate::model::{
    Abbreviations, AgentConfiguration, AgentModel, LanguageComplexity, ResolvedMapping,
    SentenceLength, Style, UserProfile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AspectKind {
    Language,
    Style,
    SentenceLength,
    Abbreviations,
    LanguageComplexity,
    ContentAdaptation,
}

impl AspectKind {
    /// Order in which active aspects are applied.
    pub const CANONICAL_ORDER: [AspectKind; 6] = [
        AspectKind::Language,
        AspectKind::Style,
        AspectKind::SentenceLength,
        AspectKind::Abbreviations,
        AspectKind::LanguageComplexity,
        AspectKind::ContentAdaptation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AspectKind::Language => "language",
            AspectKind::Style => "style",
            AspectKind::SentenceLength => "sentence_length",
            AspectKind::Abbreviations => "abbreviations",
            AspectKind::LanguageComplexity => "language_complexity",
            AspectKind::ContentAdaptation => "content_adaptation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignTimeAspect {
    pub kind: AspectKind,
    /// Aspect-specific setting, never `unchanged`. For content adaptation
    /// this is the id of the profile being adapted to.
    pub value: String,
    /// Rendered profile summary; present iff `kind` is content adaptation.
    pub user_context: Option<String>,
}

impl DesignTimeAspect {
    /// `kind=value`, e.g. `sentence_length=concise`.
    pub fn label(&self) -> String {
        format!("{}={}", self.kind.name(), self.value)
    }
}

impl fmt::Display for DesignTimeAspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn same_language(a: &str, b: &str) -> bool {
    a.eq_ignore_ascii_case(b)
}

/// The language responses must be delivered in, when it differs from the
/// language the agent was authored in. An explicit configuration language
/// wins over the profile's native language.
pub fn target_language(
    config: &AgentConfiguration,
    profile: &UserProfile,
    agent_language: &str,
) -> Option<String> {
    config
        .presentation
        .language
        .as_ref()
        .or(profile.native_language.as_ref())
        .filter(|lang| !same_language(lang, agent_language))
        .cloned()
}

/// Deterministic plain-text summary of a profile, used as the content
/// adaptation context for the rewriting and generation models.
pub fn render_user_context(profile: &UserProfile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Profile: {}", profile.display_name);
    let _ = writeln!(out, "Age group: {}", profile.age_group.keyword());
    if let Some(lang) = &profile.native_language {
        let _ = writeln!(out, "Native language: {lang}");
    }
    if !profile.preferred_languages.is_empty() {
        let _ = writeln!(
            out,
            "Preferred languages: {}",
            profile.preferred_languages.join(", ")
        );
    }
    for ability in &profile.abilities {
        let _ = write!(
            out,
            "Ability {} ({}): {}",
            ability.id,
            ability.kind.keyword(),
            ability.description
        );
        if !ability.affected_capabilities.is_empty() {
            let _ = write!(
                out,
                "; affects: {}",
                ability.affected_capabilities.join(", ")
            );
        }
        if !ability.excludes_content.is_empty() {
            let _ = write!(
                out,
                "; never recommend content tagged: {}",
                ability.excludes_content.join(", ")
            );
        }
        out.push('\n');
    }
    for pref in &profile.preferences {
        let _ = writeln!(out, "Preference: {} = {}", pref.key, pref.value);
    }
    if !profile.notes.is_empty() {
        let _ = writeln!(out, "Notes: {}", profile.notes);
    }
    out.truncate(out.trim_end().len());
    out
}

/// Active design-time aspects in canonical order.
pub fn plan_aspects(
    config: &AgentConfiguration,
    profile: &UserProfile,
    agent_language: &str,
) -> Vec<DesignTimeAspect> {
    let p = &config.presentation;
    let simple = |kind, value: &str| DesignTimeAspect {
        kind,
        value: value.to_string(),
        user_context: None,
    };
    let mut aspects = Vec::new();
    if let Some(lang) = target_language(config, profile, agent_language) {
        aspects.push(simple(AspectKind::Language, &lang));
    }
    if p.style != Style::Unchanged {
        aspects.push(simple(AspectKind::Style, p.style.keyword()));
    }
    if p.sentence_length != SentenceLength::Unchanged {
        aspects.push(simple(
            AspectKind::SentenceLength,
            p.sentence_length.keyword(),
        ));
    }
    if p.abbreviations != Abbreviations::Unchanged {
        aspects.push(simple(AspectKind::Abbreviations, p.abbreviations.keyword()));
    }
    if p.language_complexity != LanguageComplexity::Unchanged {
        aspects.push(simple(
            AspectKind::LanguageComplexity,
            p.language_complexity.keyword(),
        ));
    }
    if config.content.adapt_to_user_profile {
        aspects.push(DesignTimeAspect {
            kind: AspectKind::ContentAdaptation,
            value: profile.id.clone(),
            user_context: Some(render_user_context(profile)),
        });
    }
    aspects
}

// ---------------------------------------------------------------------------
// Adapters
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRequest {
    /// `kind=value` of the aspect being applied.
    pub aspect: String,
    pub system_prompt: String,
    /// Numbered list of the texts to rewrite.
    pub user_payload: String,
}

pub trait RewriteAdapter: Send + Sync {
    fn complete(&self, request: &RewriteRequest) -> Result<String, AdapterError>;
}

/// Deterministic offline adapter: echoes the numbered list with
/// `[<kind>=<value>] ` prepended to every item.
#[derive(Debug, Default)]
pub struct MockRewriter {
    calls: AtomicUsize,
}

impl MockRewriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl RewriteAdapter for MockRewriter {
    fn complete(&self, request: &RewriteRequest) -> Result<String, AdapterError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let items = parse_numbered(&request.user_payload)
            .map_err(|e| AdapterError::Failed(format!("mock could not read payload: {e}")))?;
        let rewritten: Vec<String> = items
            .iter()
            .map(|item| format!("[{}] {item}", request.aspect))
            .collect();
        Ok(render_numbered(&rewritten))
    }
}

/// Rewrites through a chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct LlmRewriter {
    endpoint: LlmEndpoint,
}

impl LlmRewriter {
    pub fn new(endpoint: LlmEndpoint) -> Self {
        Self { endpoint }
    }

    pub fn from_env() -> Result<Self, AdapterError> {
        LlmEndpoint::from_env().map(Self::new)
    }
}

impl RewriteAdapter for LlmRewriter {
    fn complete(&self, request: &RewriteRequest) -> Result<String, AdapterError> {
        self.endpoint.chat(&[
            ChatMessage::new(Role::System, &request.system_prompt),
            ChatMessage::new(Role::User, &request.user_payload),
        ])
    }
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectLogEntry {
    pub aspect: DesignTimeAspect,
    pub prompt: String,
    pub request: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonalizationRun {
    pub base_agent: String,
    pub configuration: Option<String>,
    pub user_profile: Option<String>,
    pub aspect_log: Vec<AspectLogEntry>,
    pub result: AgentModel,
}

impl PersonalizationRun {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("run serializes");
        text.push('\n');
        text
    }

    pub fn applied_aspects(&self) -> impl Iterator<Item = &DesignTimeAspect> {
        self.aspect_log.iter().map(|e| &e.aspect)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PersonalizeError {
    #[error("adapter failed while applying {aspect}: {source}")]
    Adapter {
        aspect: String,
        #[source]
        source: AdapterError,
    },
    #[error("adapter returned {found} item(s) for {expected} text(s) while applying {aspect}")]
    CountMismatch {
        aspect: String,
        expected: usize,
        found: usize,
    },
    #[error("predefined text #{index} cannot be sent as a numbered-list item: {text:?}")]
    Unbatchable { index: usize, text: String },
    #[error("malformed numbered list while applying {aspect}: {source}")]
    MalformedResponse {
        aspect: String,
        #[source]
        source: NumberedListError,
    },
}

/// Texts must survive the numbered-list format unchanged: non-empty,
/// without surrounding whitespace, and without lines that read as items.
fn check_batchable(texts: &[String]) -> Result<(), PersonalizeError> {
    for (i, text) in texts.iter().enumerate() {
        let alone = parse_numbered(&render_numbered(std::slice::from_ref(text)));
        if alone.as_deref() != Ok(std::slice::from_ref(text)) {
            return Err(PersonalizeError::Unbatchable {
                index: i + 1,
                text: text.clone(),
            });
        }
    }
    Ok(())
}

/// Applies `aspects` in order, one adapter call per aspect covering all
/// predefined texts. Only `say` texts change; on any error the input model
/// is left as it was and no result is produced.
pub fn apply_design_time(
    agent: &AgentModel,
    aspects: &[DesignTimeAspect],
    adapter: &dyn RewriteAdapter,
) -> Result<PersonalizationRun, PersonalizeError> {
    let mut texts: Vec<String> = agent
        .predefined_texts()
        .into_iter()
        .map(str::to_string)
        .collect();
    if !aspects.is_empty() {
        check_batchable(&texts)?;
    }
    let mut log = Vec::with_capacity(aspects.len());

    for aspect in aspects {
        let label = aspect.label();
        let prompt = build_aspect_prompt(aspect);
        let payload = render_numbered(&texts);
        if texts.is_empty() {
            log.push(AspectLogEntry {
                aspect: aspect.clone(),
                prompt,
                request: payload,
                response: String::new(),
            });
            continue;
        }
        let request = RewriteRequest {
            aspect: label.clone(),
            system_prompt: prompt,
            user_payload: payload,
        };
        let response = adapter
            .complete(&request)
            .map_err(|source| PersonalizeError::Adapter {
                aspect: label.clone(),
                source,
            })?;
        let items =
            parse_numbered(&response).map_err(|source| PersonalizeError::MalformedResponse {
                aspect: label.clone(),
                source,
            })?;
        if items.len() != texts.len() {
            return Err(PersonalizeError::CountMismatch {
                aspect: label,
                expected: texts.len(),
                found: items.len(),
            });
        }
        texts = items;
        log.push(AspectLogEntry {
            aspect: aspect.clone(),
            prompt: request.system_prompt,
            request: request.user_payload,
            response,
        });
    }

    let mut result = agent.clone();
    for (slot, text) in result.predefined_texts_mut().zip(texts) {
        *slot = text;
    }
    Ok(PersonalizationRun {
        base_agent: agent.id.clone(),
        configuration: None,
        user_profile: None,
        aspect_log: log,
        result,
    })
}

/// Plans and applies the aspects of a resolved mapping.
pub fn personalize(
    mapping: ResolvedMapping<'_>,
    adapter: &dyn RewriteAdapter,
) -> Result<PersonalizationRun, PersonalizeError> {
    let aspects = plan_aspects(
        mapping.configuration,
        mapping.profile,
        &mapping.agent.language,
    );
    let mut run = apply_design_time(mapping.agent, &aspects, adapter)?;
    run.configuration = Some(mapping.configuration.id.clone());
    run.user_profile = Some(mapping.profile.id.clone());
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_agent, parse_configuration, parse_profile};

    fn gym() -> AgentModel {
        parse_agent(include_str!("../../examples/gym/gym.agent")).unwrap()
    }

    fn aspect(kind: AspectKind, value: &str) -> DesignTimeAspect {
        DesignTimeAspect {
            kind,
            value: value.into(),
            user_context: None,
        }
    }

    #[test]
    fn elderly_plan() {
        let conf =
            parse_configuration(include_str!("../../examples/gym/elderly_conf.aconf")).unwrap();
        let profile = parse_profile(include_str!("../../examples/gym/elderly.uprof")).unwrap();
        let labels: Vec<String> = plan_aspects(&conf, &profile, "en")
            .iter()
            .map(DesignTimeAspect::label)
            .collect();
        assert_eq!(
            labels,
            [
                "language=fr",
                "style=formal",
                "language_complexity=simple",
                "content_adaptation=elderly"
            ]
        );
    }

    #[test]
    fn identity_plan_is_empty() {
        let profile = parse_profile(include_str!("../../examples/gym/elderly.uprof")).unwrap();
        let conf = AgentConfiguration::identity("id");
        // The profile's native language still differs from the agent's.
        assert_eq!(plan_aspects(&conf, &profile, "en").len(), 1);
        assert!(plan_aspects(&conf, &profile, "fr").is_empty());
        assert!(plan_aspects(&conf, &UserProfile::new("nobody"), "en").is_empty());
    }

    #[test]
    fn paraplegic_plan_is_content_only() {
        let conf =
            parse_configuration(include_str!("../../examples/gym/paraplegic_conf.aconf")).unwrap();
        let profile = parse_profile(include_str!("../../examples/gym/paraplegic.uprof")).unwrap();
        let plan = plan_aspects(&conf, &profile, "en");
        assert_eq!(plan.len(), 1);
        assert_eq!(plan[0].kind, AspectKind::ContentAdaptation);
        let context = plan[0].user_context.as_deref().unwrap();
        assert!(
            context.contains("never recommend content tagged: lower_body"),
            "{context}"
        );
    }

    #[test]
    fn explicit_language_wins_and_base_language_is_skipped() {
        let mut conf = AgentConfiguration::identity("c");
        let mut profile = UserProfile::new("p");
        profile.native_language = Some("fr".into());
        conf.presentation.language = Some("es".into());
        assert_eq!(
            target_language(&conf, &profile, "en").as_deref(),
            Some("es")
        );
        conf.presentation.language = Some("EN".into());
        assert_eq!(target_language(&conf, &profile, "en"), None);
    }

    #[test]
    fn concise_mock_prefixes_each_text() {
        let mock = MockRewriter::new();
        let run = apply_design_time(
            &gym(),
            &[aspect(AspectKind::SentenceLength, "concise")],
            &mock,
        )
        .unwrap();
        let texts = run.result.predefined_texts();
        assert_eq!(texts.len(), 3);
        assert!(texts
            .iter()
            .all(|t| t.starts_with("[sentence_length=concise] ")));
        assert_eq!(mock.calls(), 1);
        assert_eq!(run.aspect_log.len(), 1);
    }

    #[test]
    fn empty_plan_is_identity() {
        let run = apply_design_time(&gym(), &[], &MockRewriter::new()).unwrap();
        assert_eq!(run.result, gym());
        assert!(run.aspect_log.is_empty());
    }

    #[test]
    fn sequential_composition_wraps_previous_output() {
        let base = gym();
        let run = apply_design_time(
            &base,
            &[
                aspect(AspectKind::Language, "fr"),
                aspect(AspectKind::SentenceLength, "concise"),
            ],
            &MockRewriter::new(),
        )
        .unwrap();
        for (adapted, original) in run
            .result
            .predefined_texts()
            .iter()
            .zip(base.predefined_texts())
        {
            assert_eq!(
                *adapted,
                format!("[sentence_length=concise] [language=fr] {original}")
            );
        }
    }

    struct Truncating;

    impl RewriteAdapter for Truncating {
        fn complete(&self, request: &RewriteRequest) -> Result<String, AdapterError> {
            let items = parse_numbered(&request.user_payload).unwrap();
            Ok(render_numbered(&items[..items.len() - 1]))
        }
    }

    struct Garbled;

    impl RewriteAdapter for Garbled {
        fn complete(&self, _: &RewriteRequest) -> Result<String, AdapterError> {
            Ok("Sure! Here are your texts.".into())
        }
    }

    #[test]
    fn short_response_is_a_count_mismatch() {
        let base = gym();
        let snapshot = base.clone();
        let err = apply_design_time(&base, &[aspect(AspectKind::Style, "formal")], &Truncating)
            .unwrap_err();
        assert_eq!(
            err,
            PersonalizeError::CountMismatch {
                aspect: "style=formal".into(),
                expected: 3,
                found: 2
            }
        );
        assert_eq!(base, snapshot);
    }

    #[test]
    fn texts_that_break_the_format_are_refused() {
        let mut agent = gym();
        *agent.predefined_texts_mut().nth(1).unwrap() = "Plan:\n2. squats".into();
        let err = apply_design_time(
            &agent,
            &[aspect(AspectKind::Style, "formal")],
            &MockRewriter::new(),
        )
        .unwrap_err();
        assert!(
            matches!(err, PersonalizeError::Unbatchable { index: 2, .. }),
            "{err}"
        );
        assert!(apply_design_time(&agent, &[], &MockRewriter::new()).is_ok());
    }

    #[test]
    fn unnumbered_response_is_malformed() {
        let err = apply_design_time(&gym(), &[aspect(AspectKind::Style, "formal")], &Garbled)
            .unwrap_err();
        assert!(matches!(err, PersonalizeError::MalformedResponse { .. }));
    }

    #[test]
    fn llm_and_structure_untouched() {
        let base = gym();
        let run = apply_design_time(
            &base,
            &[aspect(AspectKind::Style, "informal")],
            &MockRewriter::new(),
        )
        .unwrap();
        let mut restored = run.result.clone();
        for (slot, original) in restored.predefined_texts_mut().zip(base.predefined_texts()) {
            *slot = original.to_string();
        }
        assert_eq!(restored, base);
    }
}
