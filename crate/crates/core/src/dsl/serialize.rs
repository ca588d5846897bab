use std::fmt::Write as _;

use super::lexer::quote;
use super::Keyword;
use crate::model::{
    Action, AgentConfiguration, AgentModel, Modality, PersonalizationMapping, UserProfile,
};

/// Canonical DSL text: stable field order, one statement per line,
/// two-space indentation. Parsing the output yields an equal model.
pub trait ToDsl {
    fn to_dsl(&self) -> String;
}

fn text_list(items: &[String]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| quote(s)).collect();
    format!("[{}]", quoted.join(", "))
}

fn modality_list(set: &std::collections::BTreeSet<Modality>) -> String {
    let words: Vec<&str> = set.iter().map(|m| m.keyword()).collect();
    format!("[{}]", words.join(", "))
}

impl ToDsl for AgentModel {
    fn to_dsl(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "agent {} {} language {} {{",
            self.id,
            quote(&self.name),
            quote(&self.language)
        );
        for intent in &self.intents {
            if intent.is_fallback {
                let _ = writeln!(out, "  intent {} fallback", intent.id);
            } else {
                let _ = writeln!(out, "  intent {} {{", intent.id);
                for phrase in &intent.training_phrases {
                    let _ = writeln!(out, "    {}", quote(phrase));
                }
                out.push_str("  }\n");
            }
        }
        for state in &self.states {
            out.push('\n');
            let marker = if state.id == self.initial_state {
                " initial"
            } else {
                ""
            };
            let _ = writeln!(out, "  state {}{} {{", state.id, marker);
            for action in &state.body.actions {
                let line = match action {
                    Action::PredefinedResponse { text } => format!("say {}", quote(text)),
                    Action::LlmResponse { instruction: None } => "llm".to_string(),
                    Action::LlmResponse {
                        instruction: Some(i),
                    } => format!("llm {}", quote(i)),
                    Action::RagResponse { instruction: None } => "rag".to_string(),
                    Action::RagResponse {
                        instruction: Some(i),
                    } => format!("rag {}", quote(i)),
                };
                let _ = writeln!(out, "    {line}");
            }
            for t in &state.transitions {
                match &t.condition {
                    None => {
                        let _ = writeln!(out, "    auto -> {}", t.target);
                    }
                    Some(c) => {
                        let _ = writeln!(out, "    on {} -> {}", c.intent(), t.target);
                    }
                }
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }
}

impl ToDsl for UserProfile {
    fn to_dsl(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "profile {} {{", self.id);
        let _ = writeln!(out, "  display_name = {}", quote(&self.display_name));
        let _ = writeln!(out, "  age_group = {}", self.age_group.keyword());
        if let Some(lang) = &self.native_language {
            let _ = writeln!(out, "  native_language = {}", quote(lang));
        }
        let _ = writeln!(
            out,
            "  preferred_languages = {}",
            text_list(&self.preferred_languages)
        );
        let _ = writeln!(out, "  notes = {}", quote(&self.notes));
        for ability in &self.abilities {
            let _ = writeln!(out, "  ability {} {{", ability.id);
            let _ = writeln!(out, "    kind = {}", ability.kind.keyword());
            let _ = writeln!(out, "    description = {}", quote(&ability.description));
            let _ = writeln!(
                out,
                "    affected_capabilities = {}",
                text_list(&ability.affected_capabilities)
            );
            let _ = writeln!(
                out,
                "    excludes_content = {}",
                text_list(&ability.excludes_content)
            );
            out.push_str("  }\n");
        }
        if !self.preferences.is_empty() {
            out.push_str("  preferences {\n");
            for pref in &self.preferences {
                let _ = writeln!(out, "    {} = {}", pref.key, quote(&pref.value));
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }
}

impl ToDsl for AgentConfiguration {
    fn to_dsl(&self) -> String {
        let p = &self.presentation;
        let t = &self.technology;
        let mut out = String::new();
        let _ = writeln!(out, "config {} {{", self.id);

        out.push_str("  presentation {\n");
        if let Some(lang) = &p.language {
            let _ = writeln!(out, "    language = {}", quote(lang));
        }
        let _ = writeln!(out, "    style = {}", p.style.keyword());
        let _ = writeln!(out, "    sentence_length = {}", p.sentence_length.keyword());
        let _ = writeln!(out, "    abbreviations = {}", p.abbreviations.keyword());
        let _ = writeln!(
            out,
            "    language_complexity = {}",
            p.language_complexity.keyword()
        );
        let _ = writeln!(out, "    font_scale = {}", p.text_style.font_scale);
        let _ = writeln!(out, "    high_contrast = {}", p.text_style.high_contrast);
        let _ = writeln!(out, "    voice = {}", quote(&p.speech_style.voice));
        let _ = writeln!(out, "    voice_speed = {}", p.speech_style.speed);
        if let Some(avatar) = &p.avatar {
            let _ = writeln!(out, "    avatar = {}", quote(avatar));
        }
        out.push_str("  }\n");

        out.push_str("  behavior {\n");
        let _ = writeln!(
            out,
            "    response_timing = {}",
            self.behavior.response_timing.keyword()
        );
        out.push_str("  }\n");

        out.push_str("  modality {\n");
        let _ = writeln!(out, "    input = {}", modality_list(&self.modality.input));
        let _ = writeln!(out, "    output = {}", modality_list(&self.modality.output));
        out.push_str("  }\n");

        out.push_str("  content {\n");
        let _ = writeln!(
            out,
            "    adapt_to_user_profile = {}",
            self.content.adapt_to_user_profile
        );
        let _ = writeln!(
            out,
            "    verify_with_second_llm = {}",
            self.content.verify_with_second_llm
        );
        out.push_str("  }\n");

        out.push_str("  technology {\n");
        let _ = writeln!(
            out,
            "    intent_classifier = {}",
            t.intent_classifier.keyword()
        );
        let _ = writeln!(out, "    llm_endpoint = {}", quote(&t.llm_endpoint));
        if let Some(rag) = &t.rag_db {
            let _ = writeln!(out, "    rag_db = {}", quote(rag));
        }
        let _ = writeln!(out, "    platform = {}", t.platform.keyword());
        if let Some(tts) = &t.text2speech {
            let _ = writeln!(out, "    text2speech = {}", quote(tts));
        }
        out.push_str("  }\n");

        out.push_str("}\n");
        out
    }
}

impl ToDsl for PersonalizationMapping {
    fn to_dsl(&self) -> String {
        format!(
            "map {} {{\n  user_profile = {}\n  agent = {}\n  configuration = {}\n}}\n",
            self.id, self.user_profile, self.agent, self.configuration
        )
    }
}

impl ToDsl for [PersonalizationMapping] {
    fn to_dsl(&self) -> String {
        self.iter()
            .map(ToDsl::to_dsl)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_agent, parse_configuration, parse_mappings, parse_profile};

    #[test]
    fn gym_round_trip_and_determinism() {
        let gym = parse_agent(include_str!("../../examples/gym/gym.agent")).unwrap();
        let text = gym.to_dsl();
        assert_eq!(parse_agent(&text).unwrap(), gym);
        assert_eq!(gym.clone().to_dsl(), text);
    }

    #[test]
    fn fixture_round_trips() {
        let elderly = parse_profile(include_str!("../../examples/gym/elderly.uprof")).unwrap();
        assert_eq!(parse_profile(&elderly.to_dsl()).unwrap(), elderly);
        let conf =
            parse_configuration(include_str!("../../examples/gym/elderly_conf.aconf")).unwrap();
        assert_eq!(parse_configuration(&conf.to_dsl()).unwrap(), conf);
        let maps = parse_mappings(include_str!("../../examples/gym/mappings.map")).unwrap();
        assert_eq!(parse_mappings(&maps.to_dsl()).unwrap(), maps);
    }

    #[test]
    fn canonical_layout() {
        let conf = AgentConfiguration::identity("c");
        let text = conf.to_dsl();
        assert!(text.starts_with("config c {\n  presentation {\n    style = unchanged\n"));
        assert!(text.contains("    input = [text]\n"));
        assert!(!text.contains('\t'));
    }
}
