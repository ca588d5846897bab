//! Core of the personalized conversational agent pipeline: model types,
//! textual DSLs, validation, design-time personalization, bundle
//! generation and the conversation runtime.

pub mod dsl;
pub mod generate;
pub mod llm;
pub mod model;
pub mod personalize;
pub mod runtime;
#[cfg(feature = "test-support")]
pub mod testing;
pub mod validate;
