//! Well-formedness and cross-model consistency checks, plus model diffing
//! for reviewing personalized agents against their base.
//!
//! Finding codes are stable: `Exxx` are errors, `Wxxx` warnings.
//!
//! | code | check |
//! |------|-------|
//! | E001 | initial state missing or unknown |
//! | E002 | transition endpoint does not resolve |
//! | E003 | condition references an undeclared intent |
//! | E004 | state unreachable from the initial state |
//! | E005 | automatic transition mixed with other transitions |
//! | E006 | predefined response with empty text |
//! | E007 | cycle of automatic transitions |
//! | E008 | duplicate state or intent identifier |
//! | E009 | more than one fallback intent |
//! | E010 | non-fallback intent without training phrases |
//! | W001 | intent never used by a transition |
//! | E101 | mapping references a missing artifact |
//! | E102 | two mappings for the same (profile, agent) |
//! | E103 | speech output without a text2speech adapter |
//! | E104 | configuration invariant violated |
//! | E105 | duplicate artifact identifier in the workspace |
//! | E106 | user profile invariant violated |
//! | W101 | content adaptation enabled for a profile with nothing to adapt to |

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::Severity;
use crate::model::{Action, AgentModel, ArtifactKind, ModelWorkspace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub code: String,
    pub severity: Severity,
    pub message: String,
    pub subject: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    pub passed: bool,
}

impl ValidationReport {
    fn from_findings(findings: Vec<Finding>) -> Self {
        let passed = findings.iter().all(|f| f.severity != Severity::Error);
        Self { findings, passed }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    pub fn with_code<'a>(&'a self, code: &'a str) -> impl Iterator<Item = &'a Finding> + 'a {
        self.findings.iter().filter(move |f| f.code == code)
    }

    pub fn has(&self, code: &str, subject: &str) -> bool {
        self.findings
            .iter()
            .any(|f| f.code == code && f.subject == subject)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            let level = match finding.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(
                f,
                "{level}[{}] {}: {}",
                finding.code, finding.subject, finding.message
            )?;
        }
        let errors = self.errors().count();
        let warnings = self.findings.len() - errors;
        write!(
            f,
            "{}: {errors} error(s), {warnings} warning(s)",
            if self.passed { "passed" } else { "failed" }
        )
    }
}

#[derive(Default)]
struct Findings(Vec<Finding>);

impl Findings {
    fn push(
        &mut self,
        code: &str,
        severity: Severity,
        subject: impl Into<String>,
        message: String,
    ) {
        self.0.push(Finding {
            code: code.to_string(),
            severity,
            message,
            subject: subject.into(),
        });
    }

    fn error(&mut self, code: &str, subject: impl Into<String>, message: String) {
        self.push(code, Severity::Error, subject, message);
    }

    fn warning(&mut self, code: &str, subject: impl Into<String>, message: String) {
        self.push(code, Severity::Warning, subject, message);
    }
}

pub fn validate_agent(model: &AgentModel) -> ValidationReport {
    ValidationReport::from_findings(agent_findings(model).0)
}

fn agent_findings(model: &AgentModel) -> Findings {
    let mut out = Findings::default();

    let mut state_ids = HashSet::new();
    for state in &model.states {
        if !state_ids.insert(state.id.as_str()) {
            out.error("E008", &state.id, format!("duplicate state '{}'", state.id));
        }
    }
    let mut intent_ids = HashSet::new();
    for intent in &model.intents {
        if !intent_ids.insert(intent.id.as_str()) {
            out.error(
                "E008",
                &intent.id,
                format!("duplicate intent '{}'", intent.id),
            );
        }
        if !intent.is_fallback && intent.training_phrases.is_empty() {
            out.error(
                "E010",
                &intent.id,
                format!("intent '{}' has no training phrases", intent.id),
            );
        }
    }
    let fallbacks: Vec<_> = model.intents.iter().filter(|i| i.is_fallback).collect();
    if fallbacks.len() > 1 {
        for extra in &fallbacks[1..] {
            out.error(
                "E009",
                &extra.id,
                format!("intent '{}' is a second fallback intent", extra.id),
            );
        }
    }

    let initial_ok = state_ids.contains(model.initial_state.as_str());
    if !initial_ok {
        let message = if model.initial_state.is_empty() {
            "no initial state".to_string()
        } else {
            format!("initial state '{}' does not exist", model.initial_state)
        };
        out.error("E001", &model.id, message);
    }

    let mut used_intents = HashSet::new();
    for state in &model.states {
        for (i, t) in state.transitions.iter().enumerate() {
            let subject = format!("{}.transitions[{i}]", state.id);
            if t.source != state.id {
                out.error(
                    "E002",
                    &subject,
                    format!(
                        "transition source '{}' is not its owning state '{}'",
                        t.source, state.id
                    ),
                );
            }
            if !state_ids.contains(t.target.as_str()) {
                out.error(
                    "E002",
                    &subject,
                    format!("transition target '{}' does not exist", t.target),
                );
            }
            if let Some(c) = &t.condition {
                used_intents.insert(c.intent());
                if !intent_ids.contains(c.intent()) {
                    out.error(
                        "E003",
                        &subject,
                        format!("condition references undeclared intent '{}'", c.intent()),
                    );
                }
            }
        }
        let autos = state
            .transitions
            .iter()
            .filter(|t| t.is_automatic())
            .count();
        if autos > 0 && state.transitions.len() > 1 {
            out.error(
                "E005",
                &state.id,
                format!(
                    "state '{}' mixes an automatic transition with {} other transition(s)",
                    state.id,
                    state.transitions.len() - 1
                ),
            );
        }
        for (i, action) in state.body.actions.iter().enumerate() {
            if let Action::PredefinedResponse { text } = action {
                if text.trim().is_empty() {
                    out.error(
                        "E006",
                        format!("{}.actions[{i}]", state.id),
                        "predefined response has empty text".to_string(),
                    );
                }
            }
        }
    }

    for cycle in automatic_cycles(model) {
        out.error(
            "E007",
            &cycle[0],
            format!("automatic transitions form a cycle: {}", cycle.join(" -> ")),
        );
    }

    if initial_ok {
        let reachable = reachable_states(model);
        for state in &model.states {
            if !reachable.contains(state.id.as_str()) {
                out.error(
                    "E004",
                    &state.id,
                    format!(
                        "state '{}' is unreachable from '{}'",
                        state.id, model.initial_state
                    ),
                );
            }
        }
    }

    for intent in &model.intents {
        if !used_intents.contains(intent.id.as_str()) {
            out.warning(
                "W001",
                &intent.id,
                format!("intent '{}' is never used by a transition", intent.id),
            );
        }
    }
    out
}

/// States reachable from the initial state over every transition kind.
pub fn reachable_states(model: &AgentModel) -> HashSet<&str> {
    let mut seen = HashSet::new();
    let Some(start) = model.lookup_state(&model.initial_state) else {
        return seen;
    };
    let mut stack = vec![start];
    seen.insert(start.id.as_str());
    while let Some(state) = stack.pop() {
        for t in &state.transitions {
            if let Some(next) = model.lookup_state(&t.target) {
                if seen.insert(next.id.as_str()) {
                    stack.push(next);
                }
            }
        }
    }
    seen
}

/// Each cycle formed by following automatic transitions, listed from the
/// first state on the cycle in declaration order and closed with that state.
fn automatic_cycles(model: &AgentModel) -> Vec<Vec<String>> {
    let index: HashMap<&str, usize> = model
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let next: Vec<Option<usize>> = model
        .states
        .iter()
        .map(|s| {
            s.automatic_transition()
                .and_then(|t| index.get(t.target.as_str()).copied())
        })
        .collect();

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        OnPath,
        Done,
    }
    let mut marks = vec![Mark::Fresh; model.states.len()];
    let mut cycles = Vec::new();
    for start in 0..model.states.len() {
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            match marks[i] {
                Mark::Done => break,
                Mark::OnPath => {
                    let pos = path.iter().position(|&p| p == i).expect("on path");
                    let mut members: Vec<usize> = path[pos..].to_vec();
                    let first = *members.iter().min().expect("non-empty cycle");
                    let rot = members.iter().position(|&m| m == first).expect("present");
                    members.rotate_left(rot);
                    let mut names: Vec<String> = members
                        .iter()
                        .map(|&m| model.states[m].id.clone())
                        .collect();
                    names.push(model.states[first].id.clone());
                    cycles.push(names);
                    break;
                }
                Mark::Fresh => {
                    marks[i] = Mark::OnPath;
                    path.push(i);
                    cur = next[i];
                }
            }
        }
        for i in path {
            marks[i] = Mark::Done;
        }
    }
    cycles
}

pub fn validate_workspace(workspace: &ModelWorkspace) -> ValidationReport {
    let mut out = Findings::default();

    duplicate_ids(
        &mut out,
        ArtifactKind::UserProfile,
        workspace.profiles.iter().map(|p| &p.id),
    );
    duplicate_ids(
        &mut out,
        ArtifactKind::Agent,
        workspace.agents.iter().map(|a| &a.id),
    );
    duplicate_ids(
        &mut out,
        ArtifactKind::Configuration,
        workspace.configurations.iter().map(|c| &c.id),
    );
    duplicate_ids(
        &mut out,
        ArtifactKind::Mapping,
        workspace.mappings.iter().map(|m| &m.id),
    );

    for profile in &workspace.profiles {
        for problem in profile.check() {
            out.error("E106", &profile.id, problem);
        }
    }
    for agent in &workspace.agents {
        for mut finding in agent_findings(agent).0 {
            finding.subject = format!("{}/{}", agent.id, finding.subject);
            out.0.push(finding);
        }
    }
    for conf in &workspace.configurations {
        let tts_problem = conf.speech_without_tts();
        for problem in conf.check() {
            if Some(&problem) == tts_problem.as_ref() {
                out.error("E103", &conf.id, problem);
            } else {
                out.error("E104", &conf.id, problem);
            }
        }
    }

    let mut pairs = HashSet::new();
    for mapping in &workspace.mappings {
        match workspace.resolve_mapping(mapping) {
            Ok(resolved) => {
                if resolved.configuration.content.adapt_to_user_profile
                    && !resolved.profile.has_adaptation_data()
                {
                    out.warning(
                        "W101",
                        &mapping.id,
                        format!(
                            "configuration '{}' adapts content, but profile '{}' has no abilities or preferences",
                            mapping.configuration, mapping.user_profile
                        ),
                    );
                }
            }
            Err(_) => {
                for (kind, id, found) in [
                    (
                        ArtifactKind::UserProfile,
                        &mapping.user_profile,
                        workspace.profile(&mapping.user_profile).is_some(),
                    ),
                    (
                        ArtifactKind::Agent,
                        &mapping.agent,
                        workspace.agent(&mapping.agent).is_some(),
                    ),
                    (
                        ArtifactKind::Configuration,
                        &mapping.configuration,
                        workspace.configuration(&mapping.configuration).is_some(),
                    ),
                ] {
                    if !found {
                        out.error("E101", &mapping.id, format!("{kind} '{id}' does not exist"));
                    }
                }
            }
        }
        if !pairs.insert((mapping.user_profile.as_str(), mapping.agent.as_str())) {
            out.error(
                "E102",
                &mapping.id,
                format!(
                    "a mapping for profile '{}' and agent '{}' already exists",
                    mapping.user_profile, mapping.agent
                ),
            );
        }
    }
    ValidationReport::from_findings(out.0)
}

fn duplicate_ids<'a>(
    out: &mut Findings,
    kind: ArtifactKind,
    ids: impl Iterator<Item = &'a String>,
) {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            out.error("E105", id, format!("duplicate {kind} '{id}'"));
        }
    }
}

// ---------------------------------------------------------------------------
// Diffing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextChange {
    pub state: String,
    pub action_index: usize,
    pub original: String,
    pub adapted: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelDiff {
    pub text_changes: Vec<TextChange>,
    pub added_states: Vec<String>,
    pub removed_states: Vec<String>,
    pub added_intents: Vec<String>,
    pub removed_intents: Vec<String>,
    /// Other edits to shared states and intents (actions, transitions, phrases).
    pub modified: Vec<String>,
}

impl ModelDiff {
    pub fn is_empty(&self) -> bool {
        self.text_changes.is_empty() && self.structural_change_count() == 0
    }

    pub fn structural_change_count(&self) -> usize {
        self.added_states.len()
            + self.removed_states.len()
            + self.added_intents.len()
            + self.removed_intents.len()
            + self.modified.len()
    }
}

impl fmt::Display for ModelDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for change in &self.text_changes {
            writeln!(f, "~ {}.actions[{}]", change.state, change.action_index)?;
            writeln!(f, "  - {}", change.original)?;
            writeln!(f, "  + {}", change.adapted)?;
        }
        for s in &self.added_states {
            writeln!(f, "+ state {s}")?;
        }
        for s in &self.removed_states {
            writeln!(f, "- state {s}")?;
        }
        for i in &self.added_intents {
            writeln!(f, "+ intent {i}")?;
        }
        for i in &self.removed_intents {
            writeln!(f, "- intent {i}")?;
        }
        for m in &self.modified {
            writeln!(f, "! {m}")?;
        }
        write!(
            f,
            "{} text change(s), {} structural change(s)",
            self.text_changes.len(),
            self.structural_change_count()
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DiffOptions {
    /// Report added/removed states and intents instead of failing.
    pub structural: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiffError {
    #[error("models differ in shape: {0}")]
    ShapeMismatch(String),
}

pub fn diff_models(
    base: &AgentModel,
    adapted: &AgentModel,
    options: DiffOptions,
) -> Result<ModelDiff, DiffError> {
    let mut diff = ModelDiff::default();

    let base_states: BTreeSet<&str> = base.states.iter().map(|s| s.id.as_str()).collect();
    let new_states: BTreeSet<&str> = adapted.states.iter().map(|s| s.id.as_str()).collect();
    let base_intents: BTreeSet<&str> = base.intents.iter().map(|i| i.id.as_str()).collect();
    let new_intents: BTreeSet<&str> = adapted.intents.iter().map(|i| i.id.as_str()).collect();

    // Keep declaration order for the report.
    diff.added_states = adapted
        .states
        .iter()
        .filter(|s| !base_states.contains(s.id.as_str()))
        .map(|s| s.id.clone())
        .collect();
    diff.removed_states = base
        .states
        .iter()
        .filter(|s| !new_states.contains(s.id.as_str()))
        .map(|s| s.id.clone())
        .collect();
    diff.added_intents = adapted
        .intents
        .iter()
        .filter(|i| !base_intents.contains(i.id.as_str()))
        .map(|i| i.id.clone())
        .collect();
    diff.removed_intents = base
        .intents
        .iter()
        .filter(|i| !new_intents.contains(i.id.as_str()))
        .map(|i| i.id.clone())
        .collect();

    if !options.structural && (base_states != new_states || base_intents != new_intents) {
        return Err(DiffError::ShapeMismatch(format!(
            "{} state(s) and {} intent(s) added or removed",
            diff.added_states.len() + diff.removed_states.len(),
            diff.added_intents.len() + diff.removed_intents.len()
        )));
    }

    if base.initial_state != adapted.initial_state {
        diff.modified.push(format!(
            "initial state {} -> {}",
            base.initial_state, adapted.initial_state
        ));
    }

    for old in &base.states {
        let Some(new) = adapted.lookup_state(&old.id) else {
            continue;
        };
        let (old_actions, new_actions) = (&old.body.actions, &new.body.actions);
        for (i, (a, b)) in old_actions.iter().zip(new_actions).enumerate() {
            match (a, b) {
                (
                    Action::PredefinedResponse { text: original },
                    Action::PredefinedResponse { text: adapted },
                ) => {
                    if original != adapted {
                        diff.text_changes.push(TextChange {
                            state: old.id.clone(),
                            action_index: i,
                            original: original.clone(),
                            adapted: adapted.clone(),
                        });
                    }
                }
                (a, b) if a != b => diff.modified.push(format!(
                    "state {} action {i}: {} -> {}",
                    old.id,
                    a.kind_name(),
                    b.kind_name()
                )),
                _ => {}
            }
        }
        if old_actions.len() != new_actions.len() {
            diff.modified.push(format!(
                "state {} has {} action(s), was {}",
                old.id,
                new_actions.len(),
                old_actions.len()
            ));
        }
        if old.transitions != new.transitions {
            diff.modified
                .push(format!("state {} transitions changed", old.id));
        }
    }
    for old in &base.intents {
        if let Some(new) = adapted.lookup_intent(&old.id) {
            if old != new {
                diff.modified.push(format!("intent {} changed", old.id));
            }
        }
    }
    Ok(diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{load_workspace, parse_agent};
    use crate::model::{PersonalizationMapping, State, Transition};

    fn gym() -> AgentModel {
        parse_agent(include_str!("../examples/gym/gym.agent")).unwrap()
    }

    fn gym_workspace() -> ModelWorkspace {
        load_workspace(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/gym"))
            .unwrap()
    }

    fn state_mut<'a>(model: &'a mut AgentModel, id: &str) -> &'a mut State {
        model.states.iter_mut().find(|s| s.id == id).unwrap()
    }

    #[test]
    fn gym_passes_cleanly() {
        let report = validate_agent(&gym());
        assert!(report.passed, "{report}");
        assert!(report.findings.is_empty(), "{report}");
    }

    #[test]
    fn retargeted_auto_transition_dangles() {
        let mut model = gym();
        state_mut(&mut model, "TrainingPlan").transitions[0].target = "Idl".into();
        let report = validate_agent(&model);
        assert!(!report.passed);
        assert!(report.has("E002", "TrainingPlan.transitions[0]"));
    }

    #[test]
    fn removing_other_transition_orphans_state_and_intent() {
        let mut model = gym();
        state_mut(&mut model, "Idle")
            .transitions
            .retain(|t| t.target != "OtherQuestions");
        let report = validate_agent(&model);
        assert!(report.has("E004", "OtherQuestions"));
        assert!(report.has("W001", "Other"));
        assert_eq!(report.with_code("E004").count(), 1);
    }

    #[test]
    fn structural_errors() {
        let mut model = gym();
        model.initial_state = "Nowhere".into();
        assert!(validate_agent(&model).has("E001", "gym"));

        let mut model = gym();
        state_mut(&mut model, "Idle").transitions[0]
            .condition
            .replace(crate::model::Condition::IntentMatched {
                intent: "Ghost".into(),
            });
        assert!(validate_agent(&model).has("E003", "Idle.transitions[0]"));

        let mut model = gym();
        state_mut(&mut model, "Idle")
            .transitions
            .push(Transition::automatic("Idle", "Greeting"));
        assert!(validate_agent(&model).has("E005", "Idle"));

        let mut model = gym();
        state_mut(&mut model, "Nutrition").body.actions[0] = Action::say("  ");
        assert!(validate_agent(&model).has("E006", "Nutrition.actions[0]"));

        let mut model = gym();
        let dup = model.states[2].clone();
        model.states.push(dup);
        assert!(validate_agent(&model).has("E008", "TrainingPlan"));
    }

    #[test]
    fn automatic_cycle_detected() {
        let mut model = gym();
        state_mut(&mut model, "TrainingPlan").transitions[0].target = "Nutrition".into();
        state_mut(&mut model, "Nutrition").transitions[0].target = "TrainingPlan".into();
        let report = validate_agent(&model);
        let cycles: Vec<_> = report.with_code("E007").collect();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].subject, "TrainingPlan");
        assert!(cycles[0]
            .message
            .ends_with("TrainingPlan -> Nutrition -> TrainingPlan"));

        let mut selfloop = gym();
        state_mut(&mut selfloop, "Greeting").transitions[0].target = "Greeting".into();
        assert!(validate_agent(&selfloop).has("E007", "Greeting"));
    }

    #[test]
    fn running_example_workspace_passes() {
        let report = validate_workspace(&gym_workspace());
        assert!(report.passed, "{report}");
        assert!(report.findings.is_empty(), "{report}");
    }

    #[test]
    fn workspace_cross_checks() {
        let mut ws = gym_workspace();
        ws.mappings.push(PersonalizationMapping {
            id: "elderly_again".into(),
            user_profile: "elderly".into(),
            agent: "gym".into(),
            configuration: "elderly_conf".into(),
        });
        assert!(validate_workspace(&ws).has("E102", "elderly_again"));

        let mut ws = gym_workspace();
        let elderly = ws.profiles.iter_mut().find(|p| p.id == "elderly").unwrap();
        elderly.preferences.clear();
        elderly.abilities.clear();
        let report = validate_workspace(&ws);
        assert!(report.passed);
        assert!(report.has("W101", "elderly"));

        let mut ws = gym_workspace();
        ws.mappings[0].configuration = "missing_conf".into();
        assert!(validate_workspace(&ws).has("E101", "elderly"));

        let mut ws = gym_workspace();
        ws.configurations[0].technology.text2speech = None;
        assert!(validate_workspace(&ws).has("E103", "elderly_conf"));
    }

    #[test]
    fn diff_identity_is_empty() {
        let model = gym();
        let diff = diff_models(&model, &model, DiffOptions::default()).unwrap();
        assert!(diff.is_empty());
    }

    #[test]
    fn diff_reports_text_and_added_state() {
        let base = gym();
        let mut adapted = base.clone();
        for text in adapted.predefined_texts_mut() {
            text.insert_str(0, "[x] ");
        }
        let diff = diff_models(&base, &adapted, DiffOptions::default()).unwrap();
        assert_eq!(diff.text_changes.len(), 3);
        let states: Vec<_> = diff.text_changes.iter().map(|c| c.state.as_str()).collect();
        assert_eq!(states, ["Greeting", "TrainingPlan", "Nutrition"]);
        assert_eq!(diff.structural_change_count(), 0);

        let mut edited = base.clone();
        edited.states.push(State::new("Stretching"));
        assert!(matches!(
            diff_models(&base, &edited, DiffOptions::default()),
            Err(DiffError::ShapeMismatch(_))
        ));
        let diff = diff_models(&base, &edited, DiffOptions { structural: true }).unwrap();
        assert_eq!(diff.added_states, ["Stretching"]);
        assert_eq!(diff.structural_change_count(), 1);
    }
}
