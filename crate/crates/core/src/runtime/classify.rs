use std::collections::BTreeSet;

use crate::model::{AgentModel, Intent};

/// Lowercased alphanumeric tokens of `text`.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Number of distinct training-phrase tokens of `intent` present in the
/// utterance tokens.
pub fn keyword_score(intent: &Intent, utterance: &BTreeSet<String>) -> usize {
    intent
        .training_phrases
        .iter()
        .flat_map(|phrase| tokens(phrase))
        .collect::<BTreeSet<_>>()
        .intersection(utterance)
        .count()
}

/// Best-scoring non-fallback intent; earlier declarations win ties. `None`
/// when no intent scores.
pub fn keyword_match<'a>(agent: &'a AgentModel, utterance: &str) -> Option<&'a Intent> {
    let words = tokens(utterance);
    let mut best: Option<(&Intent, usize)> = None;
    for intent in agent.intents.iter().filter(|i| !i.is_fallback) {
        let score = keyword_score(intent, &words);
        if score > 0 && best.is_none_or(|(_, s)| score > s) {
            best = Some((intent, score));
        }
    }
    best.map(|(intent, _)| intent)
}

/// Prompt for classifiers backed by a generation adapter.
pub fn classification_prompt(agent: &AgentModel) -> String {
    let mut prompt = String::from(
        "Classify the user's message into exactly one of the intents below. \
         Answer with the intent identifier only.\n",
    );
    for intent in agent.intents.iter().filter(|i| !i.is_fallback) {
        prompt.push_str(&format!(
            "- {}: {}\n",
            intent.id,
            intent.training_phrases.join(", ")
        ));
    }
    if let Some(fallback) = agent.fallback_intent() {
        prompt.push_str(&format!("- {}: anything else\n", fallback.id));
    }
    prompt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_agent;

    fn gym() -> AgentModel {
        parse_agent(include_str!("../../examples/gym/gym.agent")).unwrap()
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        let t = tokens("What's the WEATHER, today?");
        assert_eq!(
            t.into_iter().collect::<Vec<_>>(),
            ["s", "the", "today", "weather", "what"]
        );
    }

    #[test]
    fn gym_examples() {
        let agent = gym();
        let id = |u: &str| keyword_match(&agent, u).map(|i| i.id.clone());
        assert_eq!(
            id("tell me about muscles").as_deref(),
            Some("Muscles_intent")
        );
        assert_eq!(
            id("what should I eat for protein").as_deref(),
            Some("Nutrition_intent")
        );
        assert_eq!(id("what's the weather"), None);
    }

    #[test]
    fn ties_go_to_the_first_declared() {
        let agent = gym();
        let intent = keyword_match(&agent, "workout food").unwrap();
        assert_eq!(intent.id, "Muscles_intent");
        let intent = keyword_match(&agent, "workout food protein").unwrap();
        assert_eq!(intent.id, "Nutrition_intent");
    }

    #[test]
    fn prompt_lists_intents() {
        let prompt = classification_prompt(&gym());
        assert!(prompt.contains("- Muscles_intent: "));
        assert!(prompt.ends_with("- Other: anything else\n"));
    }
}
