use std::collections::{BTreeSet, HashSet};

use super::lexer::{tokenize, Token, TokenKind};
use super::{Keyword, ParseDiagnostic, SourceSpan};
use crate::model::{
    is_language_tag, AbilityConstraint, Action, AgentConfiguration, AgentModel, Intent,
    ModalityConfig, PersonalizationMapping, PreferenceTag, State, Transition, UserProfile,
    DEFAULT_AGENT_LANGUAGE,
};

pub type Parse<T> = Result<T, Vec<ParseDiagnostic>>;

const INPUT: &str = "<input>";

pub fn parse_agent(source: &str) -> Parse<AgentModel> {
    parse_agent_in(source, INPUT)
}

pub fn parse_profile(source: &str) -> Parse<UserProfile> {
    parse_profile_in(source, INPUT)
}

pub fn parse_configuration(source: &str) -> Parse<AgentConfiguration> {
    parse_configuration_in(source, INPUT)
}

pub fn parse_mappings(source: &str) -> Parse<Vec<PersonalizationMapping>> {
    parse_mappings_in(source, INPUT)
}

/// Like [`parse_agent`], attributing diagnostics to `file`.
pub fn parse_agent_in(source: &str, file: &str) -> Parse<AgentModel> {
    run(source, file, Parser::agent_file)
}

pub fn parse_profile_in(source: &str, file: &str) -> Parse<UserProfile> {
    run(source, file, Parser::profile_file)
}

pub fn parse_configuration_in(source: &str, file: &str) -> Parse<AgentConfiguration> {
    run(source, file, Parser::config_file)
}

pub fn parse_mappings_in(source: &str, file: &str) -> Parse<Vec<PersonalizationMapping>> {
    run(source, file, Parser::map_file)
}

fn run<T>(
    source: &str,
    file: &str,
    rule: impl FnOnce(&mut Parser) -> Result<T, ParseDiagnostic>,
) -> Parse<T> {
    let tokens = tokenize(source, file)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        file: file.to_string(),
        errors: Vec::new(),
    };
    match rule(&mut parser) {
        Ok(value) if parser.errors.is_empty() => Ok(value),
        Ok(_) => Err(parser.errors),
        Err(fatal) => {
            parser.errors.push(fatal);
            Err(parser.errors)
        }
    }
}

/// A right-hand side of `key = value`.
#[derive(Debug, Clone)]
enum Value {
    Ident(String),
    Str(String),
    Number(String),
    List(Vec<(Value, SourceSpan)>),
}

/// Recursive-descent parser. Syntax errors abort (returned as `Err`);
/// semantic problems such as duplicate identifiers are accumulated in
/// `errors` so parsing can continue and report all of them.
struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    file: String,
    errors: Vec<ParseDiagnostic>,
}

type PResult<T> = Result<T, ParseDiagnostic>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if tok.kind != TokenKind::Eof {
            self.pos += 1;
        }
        tok
    }

    fn span_of(&self, tok: &Token) -> SourceSpan {
        SourceSpan {
            file: self.file.clone(),
            line: tok.line,
            column: tok.column,
        }
    }

    fn here(&self) -> SourceSpan {
        self.span_of(self.peek())
    }

    fn unexpected(&self, expected: &str) -> ParseDiagnostic {
        let tok = self.peek();
        ParseDiagnostic::error(
            format!("expected {expected}, found {}", tok.kind.describe()),
            self.span_of(tok),
        )
    }

    fn report(&mut self, message: impl Into<String>, span: SourceSpan) {
        self.errors.push(ParseDiagnostic::error(message, span));
    }

    fn at_word(&self, word: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(name) if name == word)
    }

    fn eat_word(&mut self, word: &str) -> bool {
        let hit = self.at_word(word);
        if hit {
            self.next();
        }
        hit
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Token> {
        if self.peek().kind == kind {
            Ok(self.next())
        } else {
            Err(self.unexpected(&kind.describe()))
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match &self.peek().kind {
            TokenKind::Ident(name) => {
                let name = name.clone();
                let span = self.here();
                self.next();
                Ok((name, span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn expect_string(&mut self, what: &str) -> PResult<String> {
        match &self.peek().kind {
            TokenKind::Str(s) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn optional_string(&mut self) -> Option<String> {
        match &self.peek().kind {
            TokenKind::Str(s) => {
                let s = s.clone();
                self.next();
                Some(s)
            }
            _ => None,
        }
    }

    fn expect_header(&mut self, keyword: &str) -> PResult<(String, SourceSpan)> {
        if !self.eat_word(keyword) {
            return Err(ParseDiagnostic::error(
                format!("expected '{keyword}' header"),
                self.here(),
            ));
        }
        self.expect_ident(&format!("{keyword} identifier"))
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if self.peek().kind == TokenKind::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    // -- agent -------------------------------------------------------------

    fn agent_file(&mut self) -> PResult<AgentModel> {
        let (id, header_span) = self.expect_header("agent")?;
        let name = self.optional_string().unwrap_or_else(|| id.clone());
        let mut language = DEFAULT_AGENT_LANGUAGE.to_string();
        if self.eat_word("language") {
            let span = self.here();
            language = self.expect_string("language tag string")?;
            if !is_language_tag(&language) {
                self.report(format!("'{language}' is not a valid language tag"), span);
            }
        }
        self.expect(TokenKind::LBrace)?;

        let mut intents: Vec<Intent> = Vec::new();
        let mut states: Vec<State> = Vec::new();
        let mut intent_ids = HashSet::new();
        let mut state_ids = HashSet::new();
        let mut initial: Option<String> = None;

        loop {
            if self.at_word("intent") {
                if !states.is_empty() {
                    return Err(ParseDiagnostic::error(
                        "intents must be declared before states",
                        self.here(),
                    ));
                }
                self.next();
                let (intent, span) = self.intent_decl()?;
                if !intent_ids.insert(intent.id.clone()) {
                    self.report(format!("duplicate intent '{}'", intent.id), span);
                }
                intents.push(intent);
            } else if self.at_word("state") {
                self.next();
                let (state, is_initial, span) = self.state_decl()?;
                if !state_ids.insert(state.id.clone()) {
                    self.report(format!("duplicate state '{}'", state.id), span.clone());
                }
                if is_initial {
                    if initial.is_some() {
                        self.report(
                            format!("state '{}' is a second initial state", state.id),
                            span,
                        );
                    } else {
                        initial = Some(state.id.clone());
                    }
                }
                states.push(state);
            } else if self.peek().kind == TokenKind::RBrace {
                break;
            } else {
                return Err(self.unexpected("'intent', 'state' or '}'"));
            }
        }
        if states.is_empty() {
            return Err(self.unexpected("at least one 'state'"));
        }
        self.expect(TokenKind::RBrace)?;
        self.expect_eof()?;

        let initial_state = match initial {
            Some(s) => s,
            None => {
                self.report("no state is marked 'initial'", header_span);
                String::new()
            }
        };
        Ok(AgentModel {
            id,
            name,
            language,
            intents,
            states,
            initial_state,
        })
    }

    fn intent_decl(&mut self) -> PResult<(Intent, SourceSpan)> {
        let (id, span) = self.expect_ident("intent identifier")?;
        if self.eat_word("fallback") {
            return Ok((
                Intent {
                    id,
                    training_phrases: Vec::new(),
                    is_fallback: true,
                },
                span,
            ));
        }
        self.expect(TokenKind::LBrace)?;
        let mut phrases = vec![self.expect_string("training phrase")?];
        while let Some(p) = self.optional_string() {
            phrases.push(p);
        }
        self.expect(TokenKind::RBrace)?;
        Ok((
            Intent {
                id,
                training_phrases: phrases,
                is_fallback: false,
            },
            span,
        ))
    }

    fn state_decl(&mut self) -> PResult<(State, bool, SourceSpan)> {
        let (id, span) = self.expect_ident("state identifier")?;
        let is_initial = self.eat_word("initial");
        self.expect(TokenKind::LBrace)?;
        let mut state = State::new(id.clone());
        loop {
            let stmt_span = self.here();
            let action = if self.eat_word("say") {
                Some(Action::PredefinedResponse {
                    text: self.expect_string("response text")?,
                })
            } else if self.eat_word("llm") {
                Some(Action::LlmResponse {
                    instruction: self.optional_string(),
                })
            } else if self.eat_word("rag") {
                Some(Action::RagResponse {
                    instruction: self.optional_string(),
                })
            } else {
                None
            };
            if let Some(action) = action {
                if !state.transitions.is_empty() {
                    return Err(ParseDiagnostic::error(
                        "actions must precede transitions",
                        stmt_span,
                    ));
                }
                state.body.actions.push(action);
                continue;
            }
            if self.eat_word("on") {
                let (intent, _) = self.expect_ident("intent identifier")?;
                self.expect(TokenKind::Arrow)?;
                let (target, _) = self.expect_ident("target state")?;
                state
                    .transitions
                    .push(Transition::on_intent(&id, intent, target));
            } else if self.eat_word("auto") {
                self.expect(TokenKind::Arrow)?;
                let (target, _) = self.expect_ident("target state")?;
                state.transitions.push(Transition::automatic(&id, target));
            } else if self.peek().kind == TokenKind::RBrace {
                self.next();
                return Ok((state, is_initial, span));
            } else {
                return Err(self.unexpected("'say', 'llm', 'rag', 'on', 'auto' or '}'"));
            }
        }
    }

    // -- key/value blocks --------------------------------------------------

    fn value(&mut self) -> PResult<(Value, SourceSpan)> {
        let span = self.here();
        let value = match self.peek().kind.clone() {
            TokenKind::Ident(s) => {
                self.next();
                Value::Ident(s)
            }
            TokenKind::Str(s) => {
                self.next();
                Value::Str(s)
            }
            TokenKind::Number(n) => {
                self.next();
                Value::Number(n)
            }
            TokenKind::LBracket => {
                self.next();
                let mut items = Vec::new();
                if self.peek().kind != TokenKind::RBracket {
                    loop {
                        let item = self.value()?;
                        if matches!(item.0, Value::List(_)) {
                            return Err(ParseDiagnostic::error(
                                "nested lists are not allowed",
                                item.1,
                            ));
                        }
                        items.push(item);
                        if self.peek().kind == TokenKind::Comma {
                            self.next();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(TokenKind::RBracket)?;
                Value::List(items)
            }
            _ => return Err(self.unexpected("a value")),
        };
        Ok((value, span))
    }

    /// `{ (key = value)* }`; each first occurrence of a key goes to `on_entry`.
    fn entries(
        &mut self,
        mut on_entry: impl FnMut(&mut Self, String, SourceSpan, Value, SourceSpan) -> PResult<()>,
    ) -> PResult<()> {
        self.expect(TokenKind::LBrace)?;
        let mut seen = HashSet::new();
        while self.peek().kind != TokenKind::RBrace {
            let (key, key_span) = self.expect_ident("key")?;
            self.expect(TokenKind::Equals)?;
            let (value, value_span) = self.value()?;
            if !seen.insert(key.clone()) {
                self.report(format!("duplicate key '{key}'"), key_span);
                continue;
            }
            on_entry(self, key, key_span, value, value_span)?;
        }
        self.expect(TokenKind::RBrace)?;
        Ok(())
    }

    fn text(&mut self, value: Value, span: SourceSpan) -> Option<String> {
        match value {
            Value::Ident(s) | Value::Str(s) => Some(s),
            _ => {
                self.report("expected text or identifier", span);
                None
            }
        }
    }

    fn ident_value(&mut self, value: Value, span: SourceSpan) -> Option<String> {
        match value {
            Value::Ident(s) => Some(s),
            _ => {
                self.report("expected identifier", span);
                None
            }
        }
    }

    fn text_list(&mut self, value: Value, span: SourceSpan) -> Option<Vec<String>> {
        match value {
            Value::List(items) => items
                .into_iter()
                .map(|(v, s)| self.text(v, s))
                .collect::<Option<Vec<_>>>(),
            _ => {
                self.report("expected a list", span);
                None
            }
        }
    }

    fn language(&mut self, value: Value, span: SourceSpan) -> Option<String> {
        let tag = match value {
            Value::Ident(s) | Value::Str(s) => s,
            Value::Number(n) => n,
            Value::List(_) => {
                self.report("expected a language tag", span);
                return None;
            }
        };
        if is_language_tag(&tag) {
            Some(tag)
        } else {
            self.report(format!("'{tag}' is not a valid language tag"), span);
            None
        }
    }

    fn boolean(&mut self, value: Value, span: SourceSpan) -> Option<bool> {
        match value {
            Value::Ident(s) if s == "true" => Some(true),
            Value::Ident(s) if s == "false" => Some(false),
            _ => {
                self.report("expected 'true' or 'false'", span);
                None
            }
        }
    }

    fn number(&mut self, value: Value, span: SourceSpan) -> Option<f64> {
        match value {
            Value::Number(n) => match n.parse::<f64>() {
                Ok(x) if x.is_finite() => Some(x),
                _ => {
                    self.report(format!("malformed number '{n}'"), span);
                    None
                }
            },
            _ => {
                self.report("expected a number", span);
                None
            }
        }
    }

    fn keyword<K: Keyword>(&mut self, value: Value, span: SourceSpan) -> Option<K> {
        match &value {
            Value::Ident(word) => {
                if let Some(k) = K::from_keyword(word) {
                    return Some(k);
                }
                self.report(
                    format!("unknown value '{word}', expected one of: {}", K::expected()),
                    span,
                );
                None
            }
            _ => {
                self.report(format!("expected one of: {}", K::expected()), span);
                None
            }
        }
    }

    fn keyword_set<K: Keyword + Ord>(
        &mut self,
        value: Value,
        span: SourceSpan,
    ) -> Option<BTreeSet<K>> {
        match value {
            Value::List(items) => items
                .into_iter()
                .map(|(v, s)| self.keyword::<K>(v, s))
                .collect(),
            Value::Ident(_) => self.keyword::<K>(value, span).map(|k| BTreeSet::from([k])),
            _ => {
                self.report(format!("expected a list of: {}", K::expected()), span);
                None
            }
        }
    }

    fn unknown_key(&mut self, key: &str, block: &str, span: SourceSpan) {
        self.report(format!("unknown key '{key}' in {block}"), span);
    }

    // -- profile -----------------------------------------------------------

    fn profile_file(&mut self) -> PResult<UserProfile> {
        let (id, header_span) = self.expect_header("profile")?;
        let mut profile = UserProfile::new(id);
        self.expect(TokenKind::LBrace)?;
        let mut seen = HashSet::new();
        let mut ability_ids = HashSet::new();
        let mut saw_preferences = false;
        while self.peek().kind != TokenKind::RBrace {
            if self.eat_word("ability") {
                let (ability, span) = self.ability_block()?;
                if !ability_ids.insert(ability.id.clone()) {
                    self.report(format!("duplicate ability '{}'", ability.id), span);
                }
                profile.abilities.push(ability);
                continue;
            }
            if self.at_word("preferences") {
                let span = self.here();
                self.next();
                if saw_preferences {
                    self.report("duplicate 'preferences' block", span);
                }
                saw_preferences = true;
                let mut prefs = Vec::new();
                self.entries(|p, key, _, value, vspan| {
                    if let Some(value) = p.text(value, vspan) {
                        prefs.push(PreferenceTag { key, value });
                    }
                    Ok(())
                })?;
                profile.preferences.extend(prefs);
                continue;
            }
            let (key, key_span) = self.expect_ident("profile statement")?;
            self.expect(TokenKind::Equals)?;
            let (value, vspan) = self.value()?;
            if !seen.insert(key.clone()) {
                self.report(format!("duplicate key '{key}'"), key_span);
                continue;
            }
            match key.as_str() {
                "display_name" => {
                    if let Some(v) = self.text(value, vspan) {
                        profile.display_name = v;
                    }
                }
                "age_group" => {
                    if let Some(v) = self.keyword(value, vspan) {
                        profile.age_group = v;
                    }
                }
                "native_language" => profile.native_language = self.language(value, vspan),
                "preferred_languages" => {
                    if let Value::List(items) = value {
                        for (item, ispan) in items {
                            if let Some(tag) = self.language(item, ispan) {
                                profile.preferred_languages.push(tag);
                            }
                        }
                    } else {
                        self.report("expected a list", vspan);
                    }
                }
                "notes" => {
                    if let Some(v) = self.text(value, vspan) {
                        profile.notes = v;
                    }
                }
                _ => self.unknown_key(&key, "profile", key_span),
            }
        }
        self.expect(TokenKind::RBrace)?;
        self.expect_eof()?;
        if self.errors.is_empty() {
            for problem in profile.check() {
                self.report(problem, header_span.clone());
            }
        }
        Ok(profile)
    }

    fn ability_block(&mut self) -> PResult<(AbilityConstraint, SourceSpan)> {
        let (id, span) = self.expect_ident("ability identifier")?;
        let mut kind = None;
        let mut description = String::new();
        let mut affected = Vec::new();
        let mut excludes = Vec::new();
        self.entries(|p, key, key_span, value, vspan| {
            match key.as_str() {
                "kind" => kind = p.keyword(value, vspan),
                "description" => description = p.text(value, vspan).unwrap_or_default(),
                "affected_capabilities" => affected = p.text_list(value, vspan).unwrap_or_default(),
                "excludes_content" => excludes = p.text_list(value, vspan).unwrap_or_default(),
                _ => p.unknown_key(&key, "ability", key_span),
            }
            Ok(())
        })?;
        let kind = match kind {
            Some(k) => k,
            None => {
                self.report(format!("ability '{id}' is missing 'kind'"), span.clone());
                crate::model::AbilityKind::Other
            }
        };
        if kind != crate::model::AbilityKind::Other && affected.is_empty() {
            self.report(
                format!("ability '{id}' must list affected_capabilities"),
                span.clone(),
            );
        }
        Ok((
            AbilityConstraint {
                id,
                kind,
                description,
                affected_capabilities: affected,
                excludes_content: excludes,
            },
            span,
        ))
    }

    // -- configuration -----------------------------------------------------

    fn config_file(&mut self) -> PResult<AgentConfiguration> {
        let (id, header_span) = self.expect_header("config")?;
        let mut conf = AgentConfiguration::identity(id);
        self.expect(TokenKind::LBrace)?;
        let mut pillars = HashSet::new();
        while self.peek().kind != TokenKind::RBrace {
            let (pillar, span) = self.expect_ident("pillar block")?;
            if !pillars.insert(pillar.clone()) {
                self.report(format!("duplicate '{pillar}' block"), span.clone());
            }
            match pillar.as_str() {
                "presentation" => self.presentation_block(&mut conf)?,
                "behavior" => self.entries(|p, key, ks, v, vs| {
                    match key.as_str() {
                        "response_timing" => {
                            if let Some(t) = p.keyword(v, vs) {
                                conf.behavior.response_timing = t;
                            }
                        }
                        _ => p.unknown_key(&key, "behavior", ks),
                    }
                    Ok(())
                })?,
                "modality" => {
                    let mut modality = ModalityConfig::default();
                    self.entries(|p, key, ks, v, vs| {
                        match key.as_str() {
                            "input" => {
                                if let Some(set) = p.keyword_set(v, vs) {
                                    modality.input = set;
                                }
                            }
                            "output" => {
                                if let Some(set) = p.keyword_set(v, vs) {
                                    modality.output = set;
                                }
                            }
                            _ => p.unknown_key(&key, "modality", ks),
                        }
                        Ok(())
                    })?;
                    conf.modality = modality;
                }
                "content" => self.entries(|p, key, ks, v, vs| {
                    match key.as_str() {
                        "adapt_to_user_profile" => {
                            if let Some(b) = p.boolean(v, vs) {
                                conf.content.adapt_to_user_profile = b;
                            }
                        }
                        "verify_with_second_llm" => {
                            if let Some(b) = p.boolean(v, vs) {
                                conf.content.verify_with_second_llm = b;
                            }
                        }
                        _ => p.unknown_key(&key, "content", ks),
                    }
                    Ok(())
                })?,
                "technology" => self.entries(|p, key, ks, v, vs| {
                    let tech = &mut conf.technology;
                    match key.as_str() {
                        "intent_classifier" => {
                            if let Some(k) = p.keyword(v, vs) {
                                tech.intent_classifier = k;
                            }
                        }
                        "llm_endpoint" => {
                            if let Some(s) = p.text(v, vs) {
                                tech.llm_endpoint = s;
                            }
                        }
                        "rag_db" => tech.rag_db = p.text(v, vs),
                        "platform" => {
                            if let Some(k) = p.keyword(v, vs) {
                                tech.platform = k;
                            }
                        }
                        "text2speech" => tech.text2speech = p.text(v, vs),
                        _ => p.unknown_key(&key, "technology", ks),
                    }
                    Ok(())
                })?,
                other => {
                    return Err(ParseDiagnostic::error(
                        format!(
                            "unknown block '{other}', expected presentation, behavior, modality, content or technology"
                        ),
                        span,
                    ))
                }
            }
        }
        self.expect(TokenKind::RBrace)?;
        self.expect_eof()?;
        if self.errors.is_empty() {
            for problem in conf.check() {
                self.report(problem, header_span.clone());
            }
        }
        Ok(conf)
    }

    fn presentation_block(&mut self, conf: &mut AgentConfiguration) -> PResult<()> {
        let pres = &mut conf.presentation;
        self.entries(|p, key, ks, v, vs| {
            match key.as_str() {
                "language" => pres.language = p.language(v, vs),
                "style" => {
                    if let Some(k) = p.keyword(v, vs) {
                        pres.style = k;
                    }
                }
                "sentence_length" => {
                    if let Some(k) = p.keyword(v, vs) {
                        pres.sentence_length = k;
                    }
                }
                "abbreviations" => {
                    if let Some(k) = p.keyword(v, vs) {
                        pres.abbreviations = k;
                    }
                }
                "language_complexity" => {
                    if let Some(k) = p.keyword(v, vs) {
                        pres.language_complexity = k;
                    }
                }
                "font_scale" => {
                    if let Some(x) = p.number(v, vs.clone()) {
                        if x < 1.0 {
                            p.report("font_scale must be at least 1.0", vs);
                        }
                        pres.text_style.font_scale = x;
                    }
                }
                "high_contrast" => {
                    if let Some(b) = p.boolean(v, vs) {
                        pres.text_style.high_contrast = b;
                    }
                }
                "voice" => {
                    if let Some(s) = p.text(v, vs) {
                        pres.speech_style.voice = s;
                    }
                }
                "voice_speed" => {
                    if let Some(x) = p.number(v, vs.clone()) {
                        if !(0.5..=2.0).contains(&x) {
                            p.report("voice_speed must lie in [0.5, 2.0]", vs);
                        }
                        pres.speech_style.speed = x;
                    }
                }
                "avatar" => pres.avatar = p.text(v, vs),
                _ => p.unknown_key(&key, "presentation", ks),
            }
            Ok(())
        })
    }

    // -- mappings ----------------------------------------------------------

    fn map_file(&mut self) -> PResult<Vec<PersonalizationMapping>> {
        let mut mappings = Vec::new();
        let mut ids = HashSet::new();
        loop {
            let (id, span) = self.expect_header("map")?;
            if !ids.insert(id.clone()) {
                self.report(format!("duplicate mapping '{id}'"), span.clone());
            }
            let mut user_profile = None;
            let mut agent = None;
            let mut configuration = None;
            self.entries(|p, key, ks, v, vs| {
                match key.as_str() {
                    "user_profile" => user_profile = p.ident_value(v, vs),
                    "agent" => agent = p.ident_value(v, vs),
                    "configuration" => configuration = p.ident_value(v, vs),
                    _ => p.unknown_key(&key, "map", ks),
                }
                Ok(())
            })?;
            let mut required = |value: Option<String>, key: &str| {
                value.unwrap_or_else(|| {
                    self.report(format!("map '{id}' is missing '{key}'"), span.clone());
                    String::new()
                })
            };
            let user_profile = required(user_profile, "user_profile");
            let agent = required(agent, "agent");
            let configuration = required(configuration, "configuration");
            mappings.push(PersonalizationMapping {
                id,
                user_profile,
                agent,
                configuration,
            });
            if self.peek().kind == TokenKind::Eof {
                break;
            }
        }
        Ok(mappings)
    }
}
