use super::{AspectKind, DesignTimeAspect};

/// Closing instruction shared by every rewrite prompt.
pub const NUMBERED_LIST_TAIL: &str =
    "Return the rewritten texts as a numbered list in the same order.";

/// System prompt for one design-time aspect.
pub fn build_aspect_prompt(aspect: &DesignTimeAspect) -> String {
    let v = aspect.value.as_str();
    let body = match (aspect.kind, v) {
        (AspectKind::Language, lang) => format!(
            "You are a translation engine. Rewrite the texts below: translate each numbered text into {lang} while preserving the original meaning. Keep names, numbers and formatting intact."
        ),
        (AspectKind::Style, "formal") => "You are an editing engine focused on tone. Rewrite each numbered text in a formal, polite register while preserving the original meaning. Avoid slang and contractions.".to_string(),
        (AspectKind::Style, _) => "You are an editing engine focused on tone. Rewrite each numbered text in a casual, friendly register while preserving the original meaning. Use everyday words and a warm tone.".to_string(),
        (AspectKind::SentenceLength, "concise") => "You are an editing engine focused on brevity. Rewrite each numbered text to be concise while preserving the original meaning. Remove redundancy, trim filler, and keep sentences short.".to_string(),
        (AspectKind::SentenceLength, _) => "You are an editing engine focused on clarity. Rewrite each numbered text to be more elaborate while preserving the original meaning. Add helpful detail and explanation without changing the advice.".to_string(),
        (AspectKind::Abbreviations, "expand") => "You are an editing engine focused on readability. Rewrite each numbered text so that every abbreviation and acronym is written out in full while preserving the original meaning.".to_string(),
        (AspectKind::Abbreviations, _) => "You are an editing engine focused on brevity. Rewrite each numbered text using common abbreviations where they read naturally while preserving the original meaning.".to_string(),
        (AspectKind::LanguageComplexity, "simple") => "You are an editing engine focused on plain language. Rewrite each numbered text using simple words and short, clear sentences while preserving the original meaning. Avoid jargon.".to_string(),
        (AspectKind::LanguageComplexity, "expert") => "You are an editing engine focused on precision. Rewrite each numbered text using precise technical terminology suitable for experts while preserving the original meaning.".to_string(),
        (AspectKind::LanguageComplexity, _) => "You are an editing engine focused on clarity. Rewrite each numbered text in standard everyday language while preserving the original meaning.".to_string(),
        (AspectKind::ContentAdaptation, _) => format!(
            "You are an editing engine focused on personalization. Rewrite each numbered text so that its content suits the user described below while preserving the original intent. Replace any advice that conflicts with the user's constraints with a suitable alternative.\nUser profile:\n{}",
            aspect.user_context.as_deref().unwrap_or_default()
        ),
    };
    format!("{body} {NUMBERED_LIST_TAIL}")
}
