//! Compiles a personalized agent plus its configuration into a
//! self-contained, digest-protected bundle (`.pab`) that the runtime
//! interprets.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::Keyword;
use crate::model::{
    AgentConfiguration, AgentModel, Modality, ResponseTiming, TechnologyConfig, TextStyle,
    UserProfile,
};
use crate::personalize::{plan_aspects, AspectKind, DesignTimeAspect, PersonalizationRun};
use crate::validate::{validate_agent, Finding};

pub const BUNDLE_VERSION: &str = "1";
pub const DIGEST_ALGO: &str = "sha256";
pub const BUNDLE_EXTENSION: &str = "pab";

pub const DEFAULT_MAX_RETRIES: u8 = 2;
pub const MAX_RETRIES_LIMIT: u8 = 5;
pub const DEFAULT_FALLBACK_MESSAGE: &str =
    "I'm sorry, I cannot provide a suitable answer right now.";

const DIGEST_MARKER: &[u8] = b"\"digest\": \"";
const DIGEST_HEX_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationPolicy {
    pub check_prompt: String,
    pub max_retries: u8,
    pub fallback_message: String,
    /// Content tags a reply must not mention.
    pub forbidden_tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicFeatures {
    pub voice_style: String,
    pub voice_speed: f64,
    pub text_style: TextStyle,
    pub avatar: Option<String>,
    pub input_modalities: BTreeSet<Modality>,
    pub output_modalities: BTreeSet<Modality>,
    pub response_timing: ResponseTiming,
    /// Name of the text-to-speech adapter, if any.
    pub speech_adapter: Option<String>,
}

impl DeterministicFeatures {
    pub fn from_config(config: &AgentConfiguration) -> Self {
        let p = &config.presentation;
        Self {
            voice_style: p.speech_style.voice.clone(),
            voice_speed: p.speech_style.speed,
            text_style: p.text_style.clone(),
            avatar: p.avatar.clone(),
            input_modalities: config.modality.input.clone(),
            output_modalities: config.modality.output.clone(),
            response_timing: config.behavior.response_timing,
            speech_adapter: config.technology.text2speech.clone(),
        }
    }
}

impl Default for DeterministicFeatures {
    fn default() -> Self {
        Self::from_config(&AgentConfiguration::identity("default"))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RuntimeDirectives {
    /// Prepended to every generated-response request; empty when no
    /// runtime aspect is active.
    pub context_prompt: String,
    pub verification: Option<VerificationPolicy>,
    pub deterministic: DeterministicFeatures,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub base_agent: String,
    pub configuration: String,
    pub user_profile: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentBundle {
    pub bundle_version: String,
    /// Hex SHA-256 of the serialized bundle with this field zeroed.
    pub digest: String,
    pub digest_algo: String,
    pub profile_label: String,
    pub agent: AgentModel,
    pub directives: RuntimeDirectives,
    pub technology: TechnologyConfig,
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("personalized agent fails validation: {}", summarize(.0))]
    ValidationFailed(Vec<Finding>),
    #[error("bundle digest does not match its content")]
    DigestMismatch,
    #[error("unsupported bundle version {0:?} (expected {BUNDLE_VERSION:?})")]
    VersionUnsupported(String),
    #[error("unsupported digest algorithm {0:?}")]
    AlgorithmUnsupported(String),
    #[error("malformed bundle: {0}")]
    Malformed(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn summarize(findings: &[Finding]) -> String {
    findings
        .iter()
        .map(|f| format!("{} {}", f.code, f.message))
        .collect::<Vec<_>>()
        .join("; ")
}

fn directive_lines(aspect: &DesignTimeAspect, profile: &UserProfile) -> Vec<String> {
    let v = aspect.value.as_str();
    match aspect.kind {
        AspectKind::Language => vec![format!("Respond in {v}.")],
        AspectKind::Style if v == "formal" => vec!["Use a formal register.".into()],
        AspectKind::Style => vec!["Use an informal, friendly register.".into()],
        AspectKind::SentenceLength if v == "concise" => vec!["Keep sentences concise.".into()],
        AspectKind::SentenceLength => vec!["Give elaborate, detailed answers.".into()],
        AspectKind::Abbreviations if v == "expand" => {
            vec!["Write out abbreviations in full.".into()]
        }
        AspectKind::Abbreviations => vec!["Common abbreviations are acceptable.".into()],
        AspectKind::LanguageComplexity => match v {
            "simple" => vec!["Use simple language.".into()],
            "expert" => vec!["Use precise expert terminology.".into()],
            _ => vec!["Use standard everyday language.".into()],
        },
        AspectKind::ContentAdaptation => {
            let mut lines = vec![format!(
                "Adapt the content to this user: {} (age group: {}).",
                profile.display_name,
                profile.age_group.keyword()
            )];
            for ability in &profile.abilities {
                lines.push(format!("Take into account: {}", ability.description));
            }
            for pref in &profile.preferences {
                lines.push(format!("User preference: {} = {}.", pref.key, pref.value));
            }
            let excluded = profile.excluded_content();
            if !excluded.is_empty() {
                lines.push(format!(
                    "Never recommend content tagged: {}",
                    excluded.join(", ")
                ));
            }
            lines
        }
    }
}

/// The personalization directive block for generated responses: one line
/// per active aspect, plus profile-derived content constraints.
pub fn build_context_prompt(
    config: &AgentConfiguration,
    profile: &UserProfile,
    agent_language: &str,
) -> String {
    plan_aspects(config, profile, agent_language)
        .iter()
        .flat_map(|aspect| directive_lines(aspect, profile))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_check_prompt(context_prompt: &str) -> String {
    format!(
        "You review replies of a conversational agent before they reach the user. \
         Answer APPROVED if the reply follows every directive below; otherwise answer \
         REJECTED: followed by the reason.\nDirectives:\n{context_prompt}"
    )
}

pub fn default_verification_policy(
    context_prompt: &str,
    profile: &UserProfile,
) -> VerificationPolicy {
    VerificationPolicy {
        check_prompt: build_check_prompt(context_prompt),
        max_retries: DEFAULT_MAX_RETRIES,
        fallback_message: DEFAULT_FALLBACK_MESSAGE.to_string(),
        forbidden_tags: profile.excluded_content(),
    }
}

pub fn bundle_id(bundle: &AgentBundle) -> String {
    format!("{}.{}", bundle.agent.id, bundle.provenance.user_profile)
}

/// Compiles a personalization run into a bundle. Pure: identical inputs
/// serialize to identical bytes.
pub fn generate_bundle(
    run: &PersonalizationRun,
    config: &AgentConfiguration,
    profile: &UserProfile,
) -> Result<AgentBundle, BundleError> {
    let report = validate_agent(&run.result);
    if !report.passed {
        return Err(BundleError::ValidationFailed(
            report.errors().cloned().collect(),
        ));
    }
    let context_prompt = build_context_prompt(config, profile, &run.result.language);
    let verification = config
        .content
        .verify_with_second_llm
        .then(|| default_verification_policy(&context_prompt, profile));
    let mut bundle = AgentBundle {
        bundle_version: BUNDLE_VERSION.to_string(),
        digest: String::new(),
        digest_algo: DIGEST_ALGO.to_string(),
        profile_label: profile.display_name.clone(),
        agent: run.result.clone(),
        directives: RuntimeDirectives {
            context_prompt,
            verification,
            deterministic: DeterministicFeatures::from_config(config),
        },
        technology: config.technology.clone(),
        provenance: Provenance {
            base_agent: run.base_agent.clone(),
            configuration: config.id.clone(),
            user_profile: profile.id.clone(),
        },
    };
    bundle.seal();
    Ok(bundle)
}

fn zeroed_digest() -> String {
    "0".repeat(DIGEST_HEX_LEN)
}

fn pretty(bundle: &AgentBundle) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(bundle).expect("bundle serializes");
    bytes.push(b'\n');
    bytes
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl AgentBundle {
    /// Recomputes `digest` over the current content.
    pub fn seal(&mut self) {
        self.digest = zeroed_digest();
        self.digest = sha256_hex(&pretty(self));
    }

    /// Whether `digest` matches the in-memory content.
    pub fn verify_digest(&self) -> bool {
        let mut copy = self.clone();
        copy.seal();
        copy.digest == self.digest
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        pretty(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BundleError> {
        if let Ok(header) = serde_json::from_slice::<Value>(bytes) {
            match header.get("bundle_version").and_then(Value::as_str) {
                Some(BUNDLE_VERSION) => {}
                Some(other) => return Err(BundleError::VersionUnsupported(other.to_string())),
                None => return Err(BundleError::Malformed("missing bundle_version".into())),
            }
            match header.get("digest_algo").and_then(Value::as_str) {
                Some(DIGEST_ALGO) => {}
                Some(other) => return Err(BundleError::AlgorithmUnsupported(other.to_string())),
                None => return Err(BundleError::Malformed("missing digest_algo".into())),
            }
        }
        verify_raw_digest(bytes)?;
        serde_json::from_slice(bytes).map_err(|e| BundleError::Malformed(e.to_string()))
    }
}

/// Checks the digest against the exact bytes on disk, so that any change,
/// including whitespace, is detected.
fn verify_raw_digest(bytes: &[u8]) -> Result<(), BundleError> {
    let start = bytes
        .windows(DIGEST_MARKER.len())
        .position(|w| w == DIGEST_MARKER)
        .ok_or(BundleError::DigestMismatch)?
        + DIGEST_MARKER.len();
    let end = start + DIGEST_HEX_LEN;
    if end > bytes.len() {
        return Err(BundleError::DigestMismatch);
    }
    let stored =
        std::str::from_utf8(&bytes[start..end]).map_err(|_| BundleError::DigestMismatch)?;
    let mut zeroed = bytes.to_vec();
    zeroed[start..end].fill(b'0');
    if sha256_hex(&zeroed) == stored {
        Ok(())
    } else {
        Err(BundleError::DigestMismatch)
    }
}

/// Writes the bundle atomically (temp file in the target directory, then
/// rename).
pub fn write_bundle(bundle: &AgentBundle, path: &Path) -> Result<(), BundleError> {
    write_atomic(path, &bundle.to_bytes()).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_bundle(path: &Path) -> Result<AgentBundle, BundleError> {
    let bytes = fs::read(path).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    AgentBundle::from_bytes(&bytes)
}

/// Replaces `path` with `contents` via a sibling temporary file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_agent, parse_configuration, parse_profile};
    use crate::model::ResolvedMapping;
    use crate::personalize::{apply_design_time, personalize, MockRewriter};

    fn gym() -> AgentModel {
        parse_agent(include_str!("../examples/gym/gym.agent")).unwrap()
    }

    fn elderly() -> (AgentConfiguration, UserProfile) {
        (
            parse_configuration(include_str!("../examples/gym/elderly_conf.aconf")).unwrap(),
            parse_profile(include_str!("../examples/gym/elderly.uprof")).unwrap(),
        )
    }

    fn paraplegic() -> (AgentConfiguration, UserProfile) {
        (
            parse_configuration(include_str!("../examples/gym/paraplegic_conf.aconf")).unwrap(),
            parse_profile(include_str!("../examples/gym/paraplegic.uprof")).unwrap(),
        )
    }

    fn bundle_for(config: &AgentConfiguration, profile: &UserProfile) -> AgentBundle {
        let agent = gym();
        let run = personalize(
            ResolvedMapping {
                profile,
                agent: &agent,
                configuration: config,
            },
            &MockRewriter::new(),
        )
        .unwrap();
        generate_bundle(&run, config, profile).unwrap()
    }

    #[test]
    fn paraplegic_context_names_excluded_tags() {
        let (config, profile) = paraplegic();
        let prompt = build_context_prompt(&config, &profile, "en");
        assert!(
            prompt
                .lines()
                .any(|l| l == "Never recommend content tagged: lower_body"),
            "{prompt}"
        );
    }

    #[test]
    fn elderly_context_lines() {
        let (config, profile) = elderly();
        let prompt = build_context_prompt(&config, &profile, "en");
        let lines: Vec<&str> = prompt.lines().collect();
        assert_eq!(lines[0], "Respond in fr.");
        assert!(lines.contains(&"Use a formal register."));
        assert!(lines.contains(&"Use simple language."));
    }

    #[test]
    fn identity_context_is_empty() {
        let config = AgentConfiguration::identity("id");
        assert_eq!(
            build_context_prompt(&config, &UserProfile::new("p"), "en"),
            ""
        );
    }

    #[test]
    fn every_active_aspect_has_a_directive() {
        for (config, profile) in [elderly(), paraplegic()] {
            for aspect in plan_aspects(&config, &profile, "en") {
                assert!(!directive_lines(&aspect, &profile).is_empty(), "{aspect}");
            }
        }
    }

    #[test]
    fn elderly_bundle_features() {
        let (config, profile) = elderly();
        let bundle = bundle_for(&config, &profile);
        let features = &bundle.directives.deterministic;
        assert_eq!(features.response_timing, ResponseTiming::SimulatedTyping);
        assert_eq!(
            features.output_modalities,
            BTreeSet::from([Modality::Speech])
        );
        assert_eq!(features.voice_speed, 0.8);
        assert!(bundle.directives.verification.is_none());
        assert_eq!(bundle.profile_label, "Elderly");
        assert_eq!(bundle_id(&bundle), "gym.elderly");
    }

    #[test]
    fn identity_bundle_keeps_base_agent() {
        let config = AgentConfiguration::identity("identity");
        let profile = UserProfile::new("nobody");
        let run = apply_design_time(&gym(), &[], &MockRewriter::new()).unwrap();
        let bundle = generate_bundle(&run, &config, &profile).unwrap();
        assert_eq!(bundle.agent, gym());
        assert_eq!(bundle.directives, RuntimeDirectives::default());
    }

    #[test]
    fn paraplegic_bundle_has_default_policy() {
        let (config, profile) = paraplegic();
        let policy = bundle_for(&config, &profile)
            .directives
            .verification
            .unwrap();
        assert_eq!(policy.max_retries, 2);
        assert_eq!(policy.fallback_message, DEFAULT_FALLBACK_MESSAGE);
        assert_eq!(policy.forbidden_tags, ["lower_body"]);
    }

    #[test]
    fn invalid_agent_is_rejected() {
        let mut run = apply_design_time(&gym(), &[], &MockRewriter::new()).unwrap();
        run.result.initial_state = "Nowhere".into();
        let (config, profile) = elderly();
        assert!(matches!(
            generate_bundle(&run, &config, &profile),
            Err(BundleError::ValidationFailed(f)) if f.iter().any(|f| f.code == "E001")
        ));
    }

    #[test]
    fn generation_is_byte_stable() {
        let (config, profile) = elderly();
        assert_eq!(
            bundle_for(&config, &profile).to_bytes(),
            bundle_for(&config, &profile).to_bytes()
        );
    }

    #[test]
    fn header_key_order() {
        let (config, profile) = elderly();
        let value: serde_json::Value =
            serde_json::from_slice(&bundle_for(&config, &profile).to_bytes()).unwrap();
        let keys: Vec<&str> = value
            .as_object()
            .unwrap()
            .keys()
            .map(String::as_str)
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        let expected = [
            "bundle_version",
            "digest",
            "digest_algo",
            "profile_label",
            "agent",
            "directives",
            "technology",
            "provenance",
        ];
        let mut expected_sorted = expected.to_vec();
        expected_sorted.sort();
        assert_eq!(sorted, expected_sorted);
        let text = String::from_utf8(bundle_for(&config, &profile).to_bytes()).unwrap();
        let positions: Vec<usize> = expected
            .iter()
            .map(|k| text.find(&format!("\n  \"{k}\":")).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gym.elderly.pab");
        let (config, profile) = elderly();
        let bundle = bundle_for(&config, &profile);
        write_bundle(&bundle, &path).unwrap();
        assert_eq!(read_bundle(&path).unwrap(), bundle);
    }

    #[test]
    fn flipped_byte_is_detected() {
        let (config, profile) = elderly();
        let bytes = bundle_for(&config, &profile).to_bytes();
        let at = String::from_utf8_lossy(&bytes).find("\"states\"").unwrap() + 3;
        let mut corrupt = bytes.clone();
        corrupt[at] ^= 0x01;
        assert!(matches!(
            AgentBundle::from_bytes(&corrupt),
            Err(BundleError::DigestMismatch)
        ));
    }

    #[test]
    fn any_single_byte_change_is_detected() {
        let (config, profile) = paraplegic();
        let bytes = bundle_for(&config, &profile).to_bytes();
        for at in (0..bytes.len()).step_by(7) {
            let mut corrupt = bytes.clone();
            corrupt[at] = corrupt[at].wrapping_add(1);
            assert!(AgentBundle::from_bytes(&corrupt).is_err(), "byte {at}");
        }
    }

    #[test]
    fn unknown_version_is_refused() {
        let (config, profile) = elderly();
        let mut bundle = bundle_for(&config, &profile);
        bundle.bundle_version = "999".into();
        bundle.seal();
        assert!(matches!(
            AgentBundle::from_bytes(&bundle.to_bytes()),
            Err(BundleError::VersionUnsupported(v)) if v == "999"
        ));
    }
}
