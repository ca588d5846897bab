//! Proptest strategies for model types, shared by property tests.

use std::collections::{BTreeMap, BTreeSet};

use proptest::collection::{btree_map, btree_set, vec};
use proptest::prelude::*;
use proptest::sample::select;

use crate::model::{
    Abbreviations, AbilityConstraint, AbilityKind, Action, AgeGroup, AgentConfiguration,
    AgentModel, BehaviorConfig, Body, ContentConfig, Intent, IntentClassifierKind,
    LanguageComplexity, Modality, ModalityConfig, PersonalizationMapping, Platform, PreferenceTag,
    PresentationConfig, ResponseTiming, SentenceLength, SpeechStyle, State, Style,
    TechnologyConfig, TextStyle, Transition, UserProfile,
};

pub fn identifier() -> impl Strategy<Value = String> {
    "[A-Za-z_][A-Za-z0-9_]{0,10}"
}

/// Arbitrary text, including quotes, backslashes and control characters.
pub fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[ -~]{0,24}",
        vec(any::<char>(), 0..12).prop_map(String::from_iter),
        Just("say \"hi\" \\ # not a comment // nor this\n\ttab".to_string()),
    ]
}

pub fn language_tag() -> impl Strategy<Value = String> {
    prop_oneof!["[a-z]{2,3}", "[a-z]{2}-[A-Z]{2}", "[a-z]{2}-[A-Za-z]{4}"]
}

fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        text().prop_map(|text| Action::PredefinedResponse { text }),
        proptest::option::of(text()).prop_map(|instruction| Action::LlmResponse { instruction }),
        proptest::option::of(text()).prop_map(|instruction| Action::RagResponse { instruction }),
    ]
}

fn intents(ids: Vec<String>) -> impl Strategy<Value = Vec<Intent>> {
    let n = ids.len();
    (vec(vec(text(), 1..4), n), proptest::option::of(0..n.max(1))).prop_map(
        move |(phrases, fallback)| {
            ids.iter()
                .zip(phrases)
                .enumerate()
                .map(|(i, (id, phrases))| {
                    let is_fallback = fallback == Some(i);
                    Intent {
                        id: id.clone(),
                        training_phrases: if is_fallback { Vec::new() } else { phrases },
                        is_fallback,
                    }
                })
                .collect()
        },
    )
}

/// Syntactically valid agents; structure is arbitrary, so many would fail
/// validation.
pub fn agent() -> impl Strategy<Value = AgentModel> {
    (
        identifier(),
        text(),
        language_tag(),
        btree_set(identifier(), 0..5),
        btree_set(identifier(), 1..7),
    )
        .prop_flat_map(|(id, name, language, intent_ids, state_ids)| {
            let intent_ids: Vec<String> = intent_ids.into_iter().collect();
            let state_ids: Vec<String> = state_ids.into_iter().collect();
            let n = state_ids.len();
            let transition = (
                proptest::option::of(select(if intent_ids.is_empty() {
                    vec!["_".to_string()]
                } else {
                    intent_ids.clone()
                })),
                0..n,
            );
            let has_intents = !intent_ids.is_empty();
            (
                Just((id, name, language, state_ids.clone())),
                intents(intent_ids),
                vec((vec(action(), 0..3), vec(transition, 0..3)), n),
                0..n,
            )
                .prop_map(
                    move |((id, name, language, state_ids), intents, bodies, initial)| {
                        let states = state_ids
                            .iter()
                            .zip(bodies)
                            .map(|(sid, (actions, transitions))| State {
                                id: sid.clone(),
                                body: Body { actions },
                                transitions: transitions
                                    .into_iter()
                                    .map(|(intent, target)| match intent.filter(|_| has_intents) {
                                        Some(intent) => {
                                            Transition::on_intent(sid, intent, &state_ids[target])
                                        }
                                        None => Transition::automatic(sid, &state_ids[target]),
                                    })
                                    .collect(),
                            })
                            .collect();
                        AgentModel {
                            id,
                            name,
                            language,
                            intents,
                            states,
                            initial_state: state_ids[initial].clone(),
                        }
                    },
                )
        })
}

/// Agents over `1..=max_states` states whose transitions may point at
/// missing states and whose initial state may be missing. Used to test
/// reachability analysis.
pub fn graph_agent(max_states: usize) -> impl Strategy<Value = AgentModel> {
    (1..=max_states).prop_flat_map(|n| {
        let edge = prop_oneof![
            9 => (0..n).prop_map(Some),
            1 => Just(None),
        ];
        (
            vec((vec(edge, 0..4), any::<bool>()), n),
            prop_oneof![19 => (0..n).prop_map(Some), 1 => Just(None)],
        )
            .prop_map(move |(edges, initial)| {
                let name = |i: usize| format!("S{i}");
                let states = edges
                    .into_iter()
                    .enumerate()
                    .map(|(i, (targets, automatic))| State {
                        id: name(i),
                        body: Body::default(),
                        transitions: targets
                            .into_iter()
                            .map(|t| {
                                let target = t.map_or_else(|| "Ghost".to_string(), name);
                                if automatic {
                                    Transition::automatic(name(i), target)
                                } else {
                                    Transition::on_intent(name(i), "Go", target)
                                }
                            })
                            .collect(),
                    })
                    .collect();
                AgentModel {
                    id: "graph".into(),
                    name: "graph".into(),
                    language: "en".into(),
                    intents: vec![Intent {
                        id: "Go".into(),
                        training_phrases: vec!["go".into()],
                        is_fallback: false,
                    }],
                    states,
                    initial_state: initial.map_or_else(|| "Nowhere".to_string(), name),
                }
            })
    })
}

fn ability(id: String) -> impl Strategy<Value = AbilityConstraint> {
    (
        select(vec![
            AbilityKind::Physical,
            AbilityKind::Sensory,
            AbilityKind::Cognitive,
            AbilityKind::Other,
        ]),
        text(),
        vec(text(), 0..3),
        vec(text(), 0..3),
    )
        .prop_map(move |(kind, description, mut affected, excludes)| {
            if kind != AbilityKind::Other && affected.is_empty() {
                affected.push("general".into());
            }
            AbilityConstraint {
                id: id.clone(),
                kind,
                description,
                affected_capabilities: affected,
                excludes_content: excludes,
            }
        })
}

/// Profiles satisfying every profile invariant.
type ProfileFields = (
    String,
    String,
    AgeGroup,
    Option<String>,
    Vec<String>,
    BTreeMap<String, String>,
    String,
);

pub fn profile() -> impl Strategy<Value = UserProfile> {
    (
        identifier(),
        text(),
        select(vec![
            AgeGroup::Child,
            AgeGroup::Adult,
            AgeGroup::Elderly,
            AgeGroup::Unspecified,
        ]),
        proptest::option::of(language_tag()),
        vec(language_tag(), 0..3),
        btree_set(identifier(), 0..3),
        btree_map(identifier(), text(), 0..3),
        text(),
    )
        .prop_flat_map(
            |(id, display_name, age_group, native, preferred, ability_ids, prefs, notes)| {
                let abilities: Vec<_> = ability_ids.into_iter().map(ability).collect();
                (
                    Just((id, display_name, age_group, native, preferred, prefs, notes)),
                    abilities,
                )
                    .prop_map(
                        |(
                            (id, display_name, age_group, native, preferred, prefs, notes),
                            abilities,
                        ): (ProfileFields, Vec<AbilityConstraint>)| {
                            UserProfile {
                                id,
                                display_name,
                                age_group,
                                native_language: native,
                                preferred_languages: preferred,
                                abilities,
                                preferences: prefs
                                    .into_iter()
                                    .map(|(key, value)| PreferenceTag { key, value })
                                    .collect(),
                                notes,
                            }
                        },
                    )
            },
        )
}

fn modalities() -> impl Strategy<Value = BTreeSet<Modality>> {
    select(vec![
        BTreeSet::from([Modality::Text]),
        BTreeSet::from([Modality::Speech]),
        BTreeSet::from([Modality::Text, Modality::Speech]),
    ])
}

fn presentation() -> impl Strategy<Value = PresentationConfig> {
    (
        proptest::option::of(language_tag()),
        select(vec![Style::Formal, Style::Informal, Style::Unchanged]),
        select(vec![
            SentenceLength::Concise,
            SentenceLength::Elaborate,
            SentenceLength::Unchanged,
        ]),
        select(vec![
            Abbreviations::Expand,
            Abbreviations::Allow,
            Abbreviations::Unchanged,
        ]),
        select(vec![
            LanguageComplexity::Simple,
            LanguageComplexity::Standard,
            LanguageComplexity::Expert,
            LanguageComplexity::Unchanged,
        ]),
        (1.0f64..8.0, any::<bool>()),
        (text(), 0.5f64..=2.0),
        proptest::option::of(text()),
    )
        .prop_map(
            |(
                language,
                style,
                sentence_length,
                abbreviations,
                language_complexity,
                (font_scale, high_contrast),
                (voice, speed),
                avatar,
            )| {
                PresentationConfig {
                    language,
                    style,
                    sentence_length,
                    abbreviations,
                    language_complexity,
                    text_style: TextStyle {
                        font_scale,
                        high_contrast,
                    },
                    speech_style: SpeechStyle { voice, speed },
                    avatar,
                }
            },
        )
}

/// Configurations satisfying every configuration invariant.
pub fn configuration() -> impl Strategy<Value = AgentConfiguration> {
    (
        identifier(),
        presentation(),
        select(vec![
            ResponseTiming::Instant,
            ResponseTiming::SimulatedTyping,
        ]),
        modalities(),
        modalities(),
        (any::<bool>(), any::<bool>()),
        (
            select(vec![
                IntentClassifierKind::Keyword,
                IntentClassifierKind::Llm,
            ]),
            text(),
            proptest::option::of(text()),
            select(vec![Platform::HttpChat, Platform::Console]),
            proptest::option::of(text()),
        ),
    )
        .prop_map(
            |(id, presentation, response_timing, input, output, (adapt, verify), tech)| {
                let (intent_classifier, llm_endpoint, rag_db, platform, mut text2speech) = tech;
                if output.contains(&Modality::Speech) && text2speech.is_none() {
                    text2speech = Some("browser".into());
                }
                AgentConfiguration {
                    id,
                    presentation,
                    behavior: BehaviorConfig { response_timing },
                    modality: ModalityConfig { input, output },
                    content: ContentConfig {
                        adapt_to_user_profile: adapt || verify,
                        verify_with_second_llm: verify,
                    },
                    technology: TechnologyConfig {
                        intent_classifier,
                        llm_endpoint,
                        rag_db,
                        platform,
                        text2speech,
                    },
                }
            },
        )
}

pub fn mapping() -> impl Strategy<Value = PersonalizationMapping> {
    (identifier(), identifier(), identifier(), identifier()).prop_map(
        |(id, user_profile, agent, configuration)| PersonalizationMapping {
            id,
            user_profile,
            agent,
            configuration,
        },
    )
}

/// Mapping files hold one or more mappings with distinct ids.
pub fn mappings() -> impl Strategy<Value = Vec<PersonalizationMapping>> {
    vec(mapping(), 1..4).prop_map(|mut maps| {
        let mut seen = BTreeSet::new();
        maps.retain(|m| seen.insert(m.id.clone()));
        maps
    })
}
