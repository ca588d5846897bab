//! Interprets an [`AgentBundle`] as a live conversation.
//!
//! A session sits in a state awaiting input. Each user message is
//! classified into an intent, the matching transition is followed, the
//! target state's actions run, and automatic transitions are chased until
//! the session again awaits input. Everything observable is recorded as
//! an append-only, sequence-numbered event log.

mod adapters;
mod classify;

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapters::{
    parse_verdict, tag_verdict, GenerationAdapter, GenerationRequest, LlmGenerator, MockGenerator,
    ScriptedGenerator, Verdict,
};
pub use classify::{classification_prompt, keyword_match, keyword_score, tokens};

use crate::generate::{AgentBundle, DeterministicFeatures, VerificationPolicy};
use crate::llm::AdapterError;
use crate::model::{Action, IntentClassifierKind, Modality, ResponseTiming};
use crate::validate::validate_agent;

/// Turns of history handed to the generator.
pub const HISTORY_EXCERPT_TURNS: usize = 6;

pub const TYPING_BASE_MS: u64 = 200;
pub const TYPING_PER_CHAR_MS: u64 = 30;
pub const TYPING_CAP_MS: u64 = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityHint {
    pub voice_style: String,
    pub voice_speed: f64,
    pub speech_adapter: Option<String>,
    /// Whether the text should also be shown on screen.
    pub display_text: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventPayload {
    SessionStarted {
        bundle_id: String,
        state: String,
    },
    TypingStarted {
        delay_ms: u64,
    },
    Message {
        speaker: Speaker,
        text: String,
        state: String,
        retry_count: u32,
        fallback: bool,
    },
    ModalityHint(ModalityHint),
    Error {
        message: String,
    },
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::SessionStarted { .. } => "session_started",
            EventPayload::TypingStarted { .. } => "typing_started",
            EventPayload::Message { .. } => "message",
            EventPayload::ModalityHint(_) => "modality_hint",
            EventPayload::Error { .. } => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub sequence: u64,
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
    #[error("message must not be empty")]
    EmptyMessage,
    #[error("no intent matched and the agent declares no fallback intent")]
    NoFallback,
    #[error("state '{state}' has no transition for intent '{intent}'")]
    NoTransition { state: String, intent: String },
    #[error("generation failed: {0}")]
    Adapter(#[from] AdapterError),
}

/// One piece of rendered agent output.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputPart {
    Message(String),
    ModalityHint(ModalityHint),
}

/// Milliseconds the client should show a typing indicator before `text`.
pub fn compute_typing_delay(text: &str, features: &DeterministicFeatures) -> u64 {
    match features.response_timing {
        ResponseTiming::Instant => 0,
        ResponseTiming::SimulatedTyping => {
            let chars = text.chars().count() as u64;
            TYPING_BASE_MS
                .saturating_add(TYPING_PER_CHAR_MS.saturating_mul(chars))
                .min(TYPING_CAP_MS)
        }
    }
}

/// Splits an agent reply into output parts according to the output
/// modalities: always the message, followed by speech parameters when
/// speech output is enabled.
pub fn render_output(text: &str, features: &DeterministicFeatures) -> Vec<OutputPart> {
    let mut parts = vec![OutputPart::Message(text.to_string())];
    if features.output_modalities.contains(&Modality::Speech) {
        parts.push(OutputPart::ModalityHint(ModalityHint {
            voice_style: features.voice_style.clone(),
            voice_speed: features.voice_speed,
            speech_adapter: features.speech_adapter.clone(),
            display_text: features.output_modalities.contains(&Modality::Text),
        }));
    }
    parts
}

/// Retry instruction given to the generator after a rejection.
pub fn retry_instruction(reason: &str) -> String {
    format!(
        "Your previous reply was rejected by the reviewer: {reason}. \
         Write a new reply that follows every directive."
    )
}

/// Result of one generation with optional verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedReply {
    pub text: String,
    pub retry_count: u32,
    pub fallback: bool,
}

/// Generates a reply, re-generating after each rejection up to
/// `max_retries` times. On exhaustion the policy's fallback message is
/// returned. Without a policy the first candidate is used as is.
pub fn generate_verified(
    mut request: GenerationRequest,
    policy: Option<&VerificationPolicy>,
    adapter: &dyn GenerationAdapter,
) -> Result<VerifiedReply, AdapterError> {
    let Some(policy) = policy else {
        return Ok(VerifiedReply {
            text: adapter.generate(&request)?,
            retry_count: 0,
            fallback: false,
        });
    };
    for attempt in 0..=u32::from(policy.max_retries) {
        let candidate = adapter.generate(&request)?;
        match adapter.verify(policy, &candidate)? {
            Verdict::Approved => {
                return Ok(VerifiedReply {
                    text: candidate,
                    retry_count: attempt,
                    fallback: false,
                })
            }
            Verdict::Rejected(reason) => {
                request.retry_instruction = Some(retry_instruction(&reason));
            }
        }
    }
    Ok(VerifiedReply {
        text: policy.fallback_message.clone(),
        retry_count: u32::from(policy.max_retries),
        fallback: true,
    })
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct ChatSession {
    id: String,
    bundle: Arc<AgentBundle>,
    current_state: String,
    history: Vec<Turn>,
    events: Vec<SessionEvent>,
}

/// Events and turns produced by one step, committed only on success.
struct Pending<'a> {
    session: &'a ChatSession,
    events: Vec<EventPayload>,
    turns: Vec<Turn>,
    state: String,
}

impl Pending<'_> {
    /// Turns preceding `user_message`, most recent last.
    fn history_excerpt(&self, user_message: &str) -> Vec<Turn> {
        let mut all: Vec<&Turn> = self.session.history.iter().chain(&self.turns).collect();
        if all
            .last()
            .is_some_and(|t| t.speaker == Speaker::User && t.text == user_message)
        {
            all.pop();
        }
        let start = all.len().saturating_sub(HISTORY_EXCERPT_TURNS);
        all[start..].iter().map(|t| (*t).clone()).collect()
    }

    fn emit_reply(&mut self, text: String, retry_count: u32, fallback: bool) {
        let features = &self.session.bundle.directives.deterministic;
        if features.response_timing == ResponseTiming::SimulatedTyping {
            self.events.push(EventPayload::TypingStarted {
                delay_ms: compute_typing_delay(&text, features),
            });
        }
        for part in render_output(&text, features) {
            self.events.push(match part {
                OutputPart::Message(text) => EventPayload::Message {
                    speaker: Speaker::Agent,
                    text,
                    state: self.state.clone(),
                    retry_count,
                    fallback,
                },
                OutputPart::ModalityHint(hint) => EventPayload::ModalityHint(hint),
            });
        }
        self.turns.push(Turn {
            speaker: Speaker::Agent,
            text,
            timestamp_ms: now_ms(),
        });
    }

    fn run_actions(
        &mut self,
        user_message: &str,
        adapter: &dyn GenerationAdapter,
    ) -> Result<(), RuntimeError> {
        let bundle = Arc::clone(&self.session.bundle);
        let state = bundle.agent.lookup_state(&self.state).ok_or_else(|| {
            RuntimeError::InvalidBundle(format!("unknown state '{}'", self.state))
        })?;
        for action in &state.body.actions {
            match action {
                Action::PredefinedResponse { text } => self.emit_reply(text.clone(), 0, false),
                Action::LlmResponse { instruction } => {
                    self.generate(instruction.clone(), user_message, adapter)?
                }
                Action::RagResponse { instruction } => {
                    let source = bundle.technology.rag_db.as_deref().unwrap_or("none");
                    let note = format!("Ground the answer in the knowledge base '{source}'.");
                    let instruction = match instruction {
                        Some(i) => format!("{i}\n{note}"),
                        None => note,
                    };
                    self.generate(Some(instruction), user_message, adapter)?
                }
            }
        }
        Ok(())
    }

    fn generate(
        &mut self,
        instruction: Option<String>,
        user_message: &str,
        adapter: &dyn GenerationAdapter,
    ) -> Result<(), RuntimeError> {
        let directives = &self.session.bundle.directives;
        let history = self.history_excerpt(user_message);
        let request = GenerationRequest {
            context_prompt: directives.context_prompt.clone(),
            instruction,
            user_message: user_message.to_string(),
            history,
            retry_instruction: None,
        };
        let reply = generate_verified(request, directives.verification.as_ref(), adapter)?;
        self.emit_reply(reply.text, reply.retry_count, reply.fallback);
        Ok(())
    }

    /// Runs the current state's body, then follows automatic transitions.
    fn enter(
        &mut self,
        user_message: &str,
        adapter: &dyn GenerationAdapter,
    ) -> Result<(), RuntimeError> {
        let bundle = Arc::clone(&self.session.bundle);
        let limit = bundle.agent.states.len() + 1;
        for _ in 0..limit {
            self.run_actions(user_message, adapter)?;
            let state = bundle
                .agent
                .lookup_state(&self.state)
                .expect("state checked");
            match state.automatic_transition() {
                Some(t) => self.state = t.target.clone(),
                None => return Ok(()),
            }
        }
        Err(RuntimeError::InvalidBundle(
            "automatic transitions do not terminate".into(),
        ))
    }
}

impl ChatSession {
    /// Starts a session at the bundle's initial state and runs it until it
    /// awaits user input.
    pub fn create(
        id: impl Into<String>,
        bundle: Arc<AgentBundle>,
        adapter: &dyn GenerationAdapter,
    ) -> Result<Self, RuntimeError> {
        if !bundle.verify_digest() {
            return Err(RuntimeError::InvalidBundle("digest mismatch".into()));
        }
        let report = validate_agent(&bundle.agent);
        if !report.passed {
            let codes: Vec<&str> = report.errors().map(|f| f.code.as_str()).collect();
            return Err(RuntimeError::InvalidBundle(format!(
                "agent fails validation ({})",
                codes.join(", ")
            )));
        }
        let mut session = Self {
            id: id.into(),
            current_state: bundle.agent.initial_state.clone(),
            bundle,
            history: Vec::new(),
            events: Vec::new(),
        };
        let mut pending = Pending {
            session: &session,
            events: vec![EventPayload::SessionStarted {
                bundle_id: crate::generate::bundle_id(&session.bundle),
                state: session.current_state.clone(),
            }],
            turns: Vec::new(),
            state: session.current_state.clone(),
        };
        pending.enter("", adapter)?;
        let Pending {
            events,
            turns,
            state,
            ..
        } = pending;
        session.commit(events, turns, state);
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn bundle(&self) -> &AgentBundle {
        &self.bundle
    }

    pub fn current_state(&self) -> &str {
        &self.current_state
    }

    pub fn history(&self) -> &[Turn] {
        &self.history
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    /// Events with a sequence number greater than `after`.
    pub fn events_after(&self, after: u64) -> &[SessionEvent] {
        let start = self.events.partition_point(|e| e.sequence <= after);
        &self.events[start..]
    }

    pub fn last_sequence(&self) -> u64 {
        self.events.last().map_or(0, |e| e.sequence)
    }

    fn commit(
        &mut self,
        payloads: Vec<EventPayload>,
        turns: Vec<Turn>,
        state: String,
    ) -> Vec<SessionEvent> {
        let first = self.events.len();
        for payload in payloads {
            let sequence = self.last_sequence() + 1;
            self.events.push(SessionEvent {
                sequence,
                timestamp_ms: now_ms(),
                payload,
            });
        }
        self.history.extend(turns);
        self.current_state = state;
        self.events[first..].to_vec()
    }

    /// Intent id for `utterance` under the bundle's classifier.
    pub fn classify(
        &self,
        utterance: &str,
        adapter: &dyn GenerationAdapter,
    ) -> Result<String, RuntimeError> {
        classify_intent(&self.bundle, utterance, adapter)
    }

    /// Handles one user message. On failure an error event is recorded
    /// and the session stays in its current state.
    pub fn step(
        &mut self,
        user_message: &str,
        adapter: &dyn GenerationAdapter,
    ) -> Result<Vec<SessionEvent>, RuntimeError> {
        match self.try_step(user_message, adapter) {
            Ok((events, turns, state)) => Ok(self.commit(events, turns, state)),
            Err(err) => {
                self.commit(
                    vec![EventPayload::Error {
                        message: err.to_string(),
                    }],
                    Vec::new(),
                    self.current_state.clone(),
                );
                Err(err)
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn try_step(
        &self,
        user_message: &str,
        adapter: &dyn GenerationAdapter,
    ) -> Result<(Vec<EventPayload>, Vec<Turn>, String), RuntimeError> {
        let text = user_message.trim();
        if text.is_empty() {
            return Err(RuntimeError::EmptyMessage);
        }
        let intent = self.classify(text, adapter)?;
        let transition = self
            .bundle
            .agent
            .outgoing_transitions(&self.current_state)
            .map_err(|e| RuntimeError::InvalidBundle(e.to_string()))?
            .into_iter()
            .find(|t| t.condition.as_ref().is_some_and(|c| c.intent() == intent))
            .ok_or_else(|| RuntimeError::NoTransition {
                state: self.current_state.clone(),
                intent: intent.clone(),
            })?;
        let mut pending = Pending {
            session: self,
            events: Vec::new(),
            turns: vec![Turn {
                speaker: Speaker::User,
                text: text.to_string(),
                timestamp_ms: now_ms(),
            }],
            state: transition.target.clone(),
        };
        pending.enter(text, adapter)?;
        Ok((pending.events, pending.turns, pending.state))
    }
}

/// Classifies an utterance: keyword scoring by default, or the generation
/// adapter when the bundle asks for an LLM classifier. Unmatched input
/// goes to the fallback intent.
pub fn classify_intent(
    bundle: &AgentBundle,
    utterance: &str,
    adapter: &dyn GenerationAdapter,
) -> Result<String, RuntimeError> {
    let agent = &bundle.agent;
    let matched = match bundle.technology.intent_classifier {
        IntentClassifierKind::Keyword => keyword_match(agent, utterance).map(|i| i.id.clone()),
        IntentClassifierKind::Llm => {
            let answer = adapter.generate(&GenerationRequest {
                context_prompt: String::new(),
                instruction: Some(classification_prompt(agent)),
                user_message: utterance.to_string(),
                history: Vec::new(),
                retry_instruction: None,
            })?;
            let answer = answer.trim();
            agent
                .intents
                .iter()
                .find(|i| !i.is_fallback && i.id == answer)
                .map(|i| i.id.clone())
        }
    };
    matched
        .or_else(|| agent.fallback_intent().map(|i| i.id.clone()))
        .ok_or(RuntimeError::NoFallback)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_agent, parse_configuration, parse_profile};
    use crate::generate::generate_bundle;
    use crate::model::{AgentConfiguration, AgentModel, ResolvedMapping, State, UserProfile};
    use crate::personalize::{apply_design_time, personalize, MockRewriter};

    fn gym() -> AgentModel {
        parse_agent(include_str!("../../examples/gym/gym.agent")).unwrap()
    }

    fn bundle(conf: &str, profile: &str) -> Arc<AgentBundle> {
        let agent = gym();
        let config = parse_configuration(conf).unwrap();
        let profile = parse_profile(profile).unwrap();
        let run = personalize(
            ResolvedMapping {
                profile: &profile,
                agent: &agent,
                configuration: &config,
            },
            &MockRewriter::new(),
        )
        .unwrap();
        Arc::new(generate_bundle(&run, &config, &profile).unwrap())
    }

    fn elderly() -> Arc<AgentBundle> {
        bundle(
            include_str!("../../examples/gym/elderly_conf.aconf"),
            include_str!("../../examples/gym/elderly.uprof"),
        )
    }

    fn paraplegic() -> Arc<AgentBundle> {
        bundle(
            include_str!("../../examples/gym/paraplegic_conf.aconf"),
            include_str!("../../examples/gym/paraplegic.uprof"),
        )
    }

    fn plain(agent: AgentModel) -> Arc<AgentBundle> {
        let run = apply_design_time(&agent, &[], &MockRewriter::new()).unwrap();
        Arc::new(
            generate_bundle(
                &run,
                &AgentConfiguration::identity("default"),
                &UserProfile::new("default"),
            )
            .unwrap(),
        )
    }

    fn kinds(events: &[SessionEvent]) -> Vec<&'static str> {
        events.iter().map(|e| e.payload.kind()).collect()
    }

    fn message_states(events: &[SessionEvent]) -> Vec<String> {
        events
            .iter()
            .filter_map(|e| match &e.payload {
                EventPayload::Message { state, .. } => Some(state.clone()),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn typing_delay_formula() {
        let mut features = DeterministicFeatures::default();
        assert_eq!(compute_typing_delay("anything", &features), 0);
        features.response_timing = ResponseTiming::SimulatedTyping;
        assert_eq!(compute_typing_delay("0123456789", &features), 500);
        assert_eq!(compute_typing_delay(&"x".repeat(10_000), &features), 3000);
        assert_eq!(compute_typing_delay("", &features), 200);
    }

    #[test]
    fn output_parts_follow_modalities() {
        let mut features = DeterministicFeatures::default();
        assert_eq!(
            render_output("hi", &features),
            [OutputPart::Message("hi".into())]
        );
        features.output_modalities = [Modality::Speech].into();
        features.voice_speed = 0.8;
        let parts = render_output("hi", &features);
        assert_eq!(parts.len(), 2);
        assert!(
            matches!(&parts[1], OutputPart::ModalityHint(h) if h.voice_speed == 0.8 && !h.display_text)
        );
        features.output_modalities = [Modality::Text, Modality::Speech].into();
        let parts = render_output("hi", &features);
        assert!(matches!(&parts[0], OutputPart::Message(_)));
        assert!(matches!(&parts[1], OutputPart::ModalityHint(h) if h.display_text));
    }

    #[test]
    fn elderly_session_greets_and_idles() {
        let session = ChatSession::create("s1", elderly(), &MockGenerator::new()).unwrap();
        assert_eq!(session.current_state(), "Idle");
        assert_eq!(
            kinds(session.events()),
            [
                "session_started",
                "typing_started",
                "message",
                "modality_hint"
            ]
        );
        assert_eq!(message_states(session.events()), ["Greeting"]);
        let seqs: Vec<u64> = session.events().iter().map(|e| e.sequence).collect();
        assert_eq!(seqs, [1, 2, 3, 4]);
    }

    #[test]
    fn silent_initial_state_only_starts() {
        let mut agent = gym();
        agent.states.insert(0, State::new("Start"));
        agent.initial_state = "Start".into();
        agent.states.retain(|s| s.id != "Greeting");
        for state in &mut agent.states {
            for t in &mut state.transitions {
                if t.target == "Greeting" {
                    t.target = "Idle".into();
                }
            }
        }
        // Start must still reach the rest of the agent to validate.
        agent.states[0]
            .transitions
            .push(crate::model::Transition::on_intent(
                "Start",
                "Muscles_intent",
                "Idle",
            ));
        let session = ChatSession::create("s", plain(agent), &MockGenerator::new()).unwrap();
        assert_eq!(session.current_state(), "Start");
        assert_eq!(kinds(session.events()), ["session_started"]);
    }

    #[test]
    fn tampered_bundle_is_invalid() {
        let mut tampered = (*elderly()).clone();
        tampered.profile_label.push('!');
        assert!(matches!(
            ChatSession::create("s", Arc::new(tampered), &MockGenerator::new()),
            Err(RuntimeError::InvalidBundle(_))
        ));
    }

    #[test]
    fn scripted_conversation() {
        let mock = MockGenerator::new();
        let mut session = ChatSession::create("s", plain(gym()), &mock).unwrap();
        let mut replies = Vec::new();
        for text in [
            "tell me about muscles",
            "what should I eat",
            "what's the weather",
        ] {
            let events = session.step(text, &mock).unwrap();
            replies.extend(message_states(&events));
            assert_eq!(session.current_state(), "Idle");
        }
        assert_eq!(replies, ["TrainingPlan", "Nutrition", "OtherQuestions"]);
        assert_eq!(mock.generate_calls(), 1);
        assert_eq!(session.history().len(), 1 + 3 * 2);
    }

    #[test]
    fn context_prompt_reaches_the_generator() {
        let scripted = ScriptedGenerator::new(["ok"]);
        let bundle = elderly();
        let mut session = ChatSession::create("s", Arc::clone(&bundle), &scripted).unwrap();
        session.step("what's the weather", &scripted).unwrap();
        let request = &scripted.requests()[0];
        assert_eq!(request.context_prompt, bundle.directives.context_prompt);
        assert!(request.context_prompt.contains("Respond in fr."));
        assert_eq!(request.user_message, "what's the weather");
        assert_eq!(request.history.len(), 1);
    }

    #[test]
    fn history_excerpt_is_bounded() {
        let scripted = ScriptedGenerator::new(["ok"]);
        let mut session = ChatSession::create("s", plain(gym()), &scripted).unwrap();
        for _ in 0..5 {
            session.step("muscles", &scripted).unwrap();
        }
        session.step("weather?", &scripted).unwrap();
        assert_eq!(scripted.requests()[0].history.len(), HISTORY_EXCERPT_TURNS);
    }

    #[test]
    fn one_rejection_one_retry() {
        let scripted = ScriptedGenerator::tagged_then_clean(1, "lower_body");
        let mut session = ChatSession::create("s", paraplegic(), &scripted).unwrap();
        let events = session.step("what's the weather", &scripted).unwrap();
        let message = events
            .iter()
            .find_map(|e| match &e.payload {
                EventPayload::Message {
                    text,
                    retry_count,
                    fallback,
                    ..
                } => Some((text.clone(), *retry_count, *fallback)),
                _ => None,
            })
            .unwrap();
        assert_eq!(message.1, 1);
        assert!(!message.2);
        assert!(!message.0.contains("lower_body"));
        assert_eq!(scripted.generate_calls(), 2);
        let retry = scripted.requests()[1].retry_instruction.clone().unwrap();
        assert!(retry.contains("forbidden content 'lower_body'"), "{retry}");
    }

    #[test]
    fn verification_bound_and_fallback() {
        let bundle = paraplegic();
        let policy = bundle.directives.verification.clone().unwrap();
        for k in 0..=5usize {
            let scripted = ScriptedGenerator::tagged_then_clean(k, "lower_body");
            let mut session = ChatSession::create("s", Arc::clone(&bundle), &scripted).unwrap();
            let events = session.step("what's the weather", &scripted).unwrap();
            let bound = 1 + usize::from(policy.max_retries);
            assert_eq!(scripted.generate_calls(), (k + 1).min(bound), "k={k}");
            let fallback = events.iter().any(|e| {
                matches!(&e.payload, EventPayload::Message { fallback: true, text, .. } if *text == policy.fallback_message)
            });
            assert_eq!(fallback, k >= bound, "k={k}");
        }
    }

    struct Failing;

    impl GenerationAdapter for Failing {
        fn generate(&self, _: &GenerationRequest) -> Result<String, AdapterError> {
            Err(AdapterError::Transport("offline".into()))
        }

        fn verify(&self, _: &VerificationPolicy, _: &str) -> Result<Verdict, AdapterError> {
            Ok(Verdict::Approved)
        }
    }

    #[test]
    fn adapter_failure_keeps_state() {
        let mut session = ChatSession::create("s", plain(gym()), &Failing).unwrap();
        let before = session.events().len();
        let err = session.step("what's the weather", &Failing).unwrap_err();
        assert!(matches!(err, RuntimeError::Adapter(_)));
        assert_eq!(session.current_state(), "Idle");
        assert_eq!(session.events().len(), before + 1);
        assert_eq!(session.events().last().unwrap().payload.kind(), "error");
        assert_eq!(session.history().len(), 1);
    }

    #[test]
    fn missing_transition_is_reported() {
        let mut agent = gym();
        let idle = agent.states.iter_mut().find(|s| s.id == "Idle").unwrap();
        idle.transitions.retain(|t| t.target != "Nutrition");
        agent.states.retain(|s| s.id != "Nutrition");
        let mut session = ChatSession::create("s", plain(agent), &MockGenerator::new()).unwrap();
        assert_eq!(
            session.step("food", &MockGenerator::new()).unwrap_err(),
            RuntimeError::NoTransition {
                state: "Idle".into(),
                intent: "Nutrition_intent".into()
            }
        );
        assert_eq!(session.current_state(), "Idle");
    }

    #[test]
    fn empty_message_is_refused() {
        let mock = MockGenerator::new();
        let mut session = ChatSession::create("s", plain(gym()), &mock).unwrap();
        assert_eq!(
            session.step("  ", &mock).unwrap_err(),
            RuntimeError::EmptyMessage
        );
    }

    #[test]
    fn no_fallback_error() {
        let mut agent = gym();
        agent.intents.retain(|i| !i.is_fallback);
        let idle = agent.states.iter_mut().find(|s| s.id == "Idle").unwrap();
        idle.transitions.retain(|t| t.target != "OtherQuestions");
        agent.states.retain(|s| s.id != "OtherQuestions");
        let b = plain(agent);
        assert_eq!(
            classify_intent(&b, "weather", &MockGenerator::new()).unwrap_err(),
            RuntimeError::NoFallback
        );
    }

    #[test]
    fn llm_classifier_uses_adapter() {
        let mut b = (*plain(gym())).clone();
        b.technology.intent_classifier = IntentClassifierKind::Llm;
        b.seal();
        assert_eq!(
            classify_intent(&b, "xyz", &ScriptedGenerator::new(["Nutrition_intent"])).unwrap(),
            "Nutrition_intent"
        );
        assert_eq!(
            classify_intent(&b, "xyz", &ScriptedGenerator::new(["no idea"])).unwrap(),
            "Other"
        );
    }

    #[test]
    fn replay_is_identical_modulo_timestamps() {
        let trace = || {
            let mock = MockGenerator::new();
            let mut session = ChatSession::create("s", elderly(), &mock).unwrap();
            for text in ["muscles", "eat", "weather"] {
                session.step(text, &mock).unwrap();
            }
            session
                .events()
                .iter()
                .map(|e| (e.sequence, e.payload.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(trace(), trace());
    }

    #[test]
    fn events_after_filters_by_sequence() {
        let mock = MockGenerator::new();
        let mut session = ChatSession::create("s", plain(gym()), &mock).unwrap();
        session.step("muscles", &mock).unwrap();
        let last = session.last_sequence();
        assert_eq!(session.events_after(0).len() as u64, last);
        assert!(session.events_after(last).is_empty());
        assert_eq!(session.events_after(1)[0].sequence, 2);
    }

    #[test]
    fn event_json_shape() {
        let event = SessionEvent {
            sequence: 3,
            timestamp_ms: 0,
            payload: EventPayload::TypingStarted { delay_ms: 500 },
        };
        let json = serde_json::to_value(&event).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"sequence": 3, "timestamp_ms": 0, "kind": "typing_started", "delay_ms": 500})
        );
        let back: SessionEvent = serde_json::from_value(json).unwrap();
        assert_eq!(back, event);
    }
}
