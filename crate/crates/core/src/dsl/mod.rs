//! Textual concrete syntaxes for profiles (`.uprof`), agents (`.agent`),
//! configurations (`.aconf`) and mappings (`.map`), plus the JSON
//! interchange document and directory-based workspace loading.

mod interchange;
mod lexer;
mod parser;
mod serialize;
mod workspace;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use interchange::{export_interchange, import_interchange, InterchangeError, SCHEMA_VERSION};
pub use lexer::quote;
pub use parser::{
    parse_agent, parse_agent_in, parse_configuration, parse_configuration_in, parse_mappings,
    parse_mappings_in, parse_profile, parse_profile_in, Parse,
};
pub use serialize::ToDsl;
pub use workspace::{load_workspace, ModelFileKind, WorkspaceError};

use crate::model::{
    Abbreviations, AbilityKind, AgeGroup, IntentClassifierKind, LanguageComplexity, Modality,
    Platform, ResponseTiming, SentenceLength, Style,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: String,
    /// 1-based.
    pub line: usize,
    /// 1-based.
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: SourceSpan,
}

impl ParseDiagnostic {
    pub fn error(message: impl Into<String>, span: SourceSpan) -> Self {
        Self {
            severity: Severity::Error,
            message: message.into(),
            span,
        }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {level}: {}", self.span, self.message)
    }
}

/// Enumerations spelled as bare identifiers in the DSLs.
pub(crate) trait Keyword: Copy + PartialEq + 'static {
    const TABLE: &'static [(&'static str, Self)];

    fn keyword(self) -> &'static str {
        Self::TABLE
            .iter()
            .find(|(_, v)| *v == self)
            .map(|(k, _)| *k)
            .expect("keyword table covers every variant")
    }

    fn from_keyword(word: &str) -> Option<Self> {
        Self::TABLE
            .iter()
            .find(|(k, _)| *k == word)
            .map(|(_, v)| *v)
    }

    fn expected() -> String {
        Self::TABLE
            .iter()
            .map(|(k, _)| *k)
            .collect::<Vec<_>>()
            .join(", ")
    }
}

macro_rules! keywords {
    ($ty:ty { $($word:literal => $variant:expr),* $(,)? }) => {
        impl Keyword for $ty {
            const TABLE: &'static [(&'static str, Self)] = &[$(($word, $variant)),*];
        }
    };
}

keywords!(AgeGroup {
    "child" => AgeGroup::Child,
    "adult" => AgeGroup::Adult,
    "elderly" => AgeGroup::Elderly,
    "unspecified" => AgeGroup::Unspecified,
});
keywords!(AbilityKind {
    "physical" => AbilityKind::Physical,
    "sensory" => AbilityKind::Sensory,
    "cognitive" => AbilityKind::Cognitive,
    "other" => AbilityKind::Other,
});
keywords!(Style {
    "formal" => Style::Formal,
    "informal" => Style::Informal,
    "unchanged" => Style::Unchanged,
});
keywords!(SentenceLength {
    "concise" => SentenceLength::Concise,
    "elaborate" => SentenceLength::Elaborate,
    "unchanged" => SentenceLength::Unchanged,
});
keywords!(Abbreviations {
    "expand" => Abbreviations::Expand,
    "allow" => Abbreviations::Allow,
    "unchanged" => Abbreviations::Unchanged,
});
keywords!(LanguageComplexity {
    "simple" => LanguageComplexity::Simple,
    "standard" => LanguageComplexity::Standard,
    "expert" => LanguageComplexity::Expert,
    "unchanged" => LanguageComplexity::Unchanged,
});
keywords!(ResponseTiming {
    "instant" => ResponseTiming::Instant,
    "simulated_typing" => ResponseTiming::SimulatedTyping,
});
keywords!(Modality {
    "text" => Modality::Text,
    "speech" => Modality::Speech,
});
keywords!(IntentClassifierKind {
    "keyword" => IntentClassifierKind::Keyword,
    "llm" => IntentClassifierKind::Llm,
});
keywords!(Platform {
    "http_chat" => Platform::HttpChat,
    "console" => Platform::Console,
});
