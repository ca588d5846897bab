use super::{ParseDiagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Str(String),
    /// Raw numeric literal; interpreted by the parser.
    Number(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Equals,
    Arrow,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(name) => format!("identifier '{name}'"),
            TokenKind::Str(_) => "string".to_string(),
            TokenKind::Number(n) => format!("number {n}"),
            TokenKind::LBrace => "'{'".to_string(),
            TokenKind::RBrace => "'}'".to_string(),
            TokenKind::LBracket => "'['".to_string(),
            TokenKind::RBracket => "']'".to_string(),
            TokenKind::Comma => "','".to_string(),
            TokenKind::Equals => "'='".to_string(),
            TokenKind::Arrow => "'->'".to_string(),
            TokenKind::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

/// Splits `source` into tokens. `#` and `//` start line comments.
/// Lexical errors are collected; the lexer skips the offending character
/// and keeps going so several can be reported at once.
pub fn tokenize(source: &str, file: &str) -> Result<Vec<Token>, Vec<ParseDiagnostic>> {
    let mut cur = Cursor {
        chars: source.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let span = |line, column| SourceSpan {
        file: file.to_string(),
        line,
        column,
    };

    while let Some(c) = cur.peek() {
        let (line, column) = (cur.line, cur.column);
        let kind = match c {
            c if c.is_whitespace() => {
                cur.bump();
                continue;
            }
            '#' => {
                skip_line(&mut cur);
                continue;
            }
            '/' => {
                cur.bump();
                if cur.peek() == Some('/') {
                    skip_line(&mut cur);
                } else {
                    errors.push(ParseDiagnostic::error(
                        "unexpected character '/'",
                        span(line, column),
                    ));
                }
                continue;
            }
            '{' | '}' | '[' | ']' | ',' | '=' => {
                cur.bump();
                match c {
                    '{' => TokenKind::LBrace,
                    '}' => TokenKind::RBrace,
                    '[' => TokenKind::LBracket,
                    ']' => TokenKind::RBracket,
                    ',' => TokenKind::Comma,
                    _ => TokenKind::Equals,
                }
            }
            '-' => {
                cur.bump();
                match cur.peek() {
                    Some('>') => {
                        cur.bump();
                        TokenKind::Arrow
                    }
                    Some(d) if d.is_ascii_digit() => {
                        let mut raw = String::from("-");
                        lex_number(&mut cur, &mut raw);
                        TokenKind::Number(raw)
                    }
                    _ => {
                        errors.push(ParseDiagnostic::error("expected '->'", span(line, column)));
                        continue;
                    }
                }
            }
            '"' => {
                cur.bump();
                match lex_string(&mut cur) {
                    Ok(s) => TokenKind::Str(s),
                    Err(msg) => {
                        errors.push(ParseDiagnostic::error(msg, span(line, column)));
                        continue;
                    }
                }
            }
            c if c.is_ascii_digit() => {
                let mut raw = String::new();
                lex_number(&mut cur, &mut raw);
                TokenKind::Number(raw)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some(c) = cur.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        name.push(c);
                        cur.bump();
                    } else {
                        break;
                    }
                }
                TokenKind::Ident(name)
            }
            other => {
                cur.bump();
                errors.push(ParseDiagnostic::error(
                    format!("unexpected character '{}'", other.escape_default()),
                    span(line, column),
                ));
                continue;
            }
        };
        tokens.push(Token { kind, line, column });
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        line: cur.line,
        column: cur.column,
    });
    Ok(tokens)
}

fn skip_line(cur: &mut Cursor<'_>) {
    while let Some(c) = cur.peek() {
        if c == '\n' {
            break;
        }
        cur.bump();
    }
}

fn lex_number(cur: &mut Cursor<'_>, raw: &mut String) {
    let mut seen_dot = false;
    while let Some(c) = cur.peek() {
        if c.is_ascii_digit() || (c == '.' && !seen_dot) {
            seen_dot |= c == '.';
            raw.push(c);
            cur.bump();
        } else if (c == 'e' || c == 'E') && !raw.contains(['e', 'E']) {
            // exponent, as produced by f64 Display for extreme values
            raw.push(c);
            cur.bump();
            if let Some(sign @ ('+' | '-')) = cur.peek() {
                raw.push(sign);
                cur.bump();
            }
        } else {
            break;
        }
    }
}

fn lex_string(cur: &mut Cursor<'_>) -> Result<String, String> {
    let mut out = String::new();
    loop {
        match cur.bump() {
            None => return Err("unterminated string".to_string()),
            Some('"') => return Ok(out),
            Some('\\') => match cur.bump() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('r') => out.push('\r'),
                Some('u') => out.push(lex_unicode_escape(cur)?),
                Some(other) => return Err(format!("unknown escape '\\{other}'")),
                None => return Err("unterminated string".to_string()),
            },
            Some(c) => out.push(c),
        }
    }
}

fn lex_unicode_escape(cur: &mut Cursor<'_>) -> Result<char, String> {
    if cur.bump() != Some('{') {
        return Err("expected '{' after \\u".to_string());
    }
    let mut hex = String::new();
    loop {
        match cur.bump() {
            Some('}') => break,
            Some(c) if c.is_ascii_hexdigit() && hex.len() < 6 => hex.push(c),
            _ => return Err("malformed \\u{...} escape".to_string()),
        }
    }
    u32::from_str_radix(&hex, 16)
        .ok()
        .and_then(char::from_u32)
        .ok_or_else(|| format!("invalid code point \\u{{{hex}}}"))
}

/// Quotes `s` with the escapes understood by [`tokenize`].
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c.is_control() => out.push_str(&format!("\\u{{{:x}}}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src, "t")
            .unwrap()
            .into_iter()
            .map(|t| t.kind)
            .collect()
    }

    #[test]
    fn tokens_and_positions() {
        let toks = tokenize("state Idle {\n  auto -> Idle # trailing\n}", "t").unwrap();
        let arrow = toks.iter().find(|t| t.kind == TokenKind::Arrow).unwrap();
        assert_eq!((arrow.line, arrow.column), (2, 8));
        assert_eq!(toks.last().unwrap().kind, TokenKind::Eof);
    }

    #[test]
    fn strings_numbers_and_escapes() {
        assert_eq!(
            kinds(r#""a\"b\n\u{e9}" 1.5 -0.25 1e300 [x, y]"#),
            vec![
                TokenKind::Str("a\"b\né".into()),
                TokenKind::Number("1.5".into()),
                TokenKind::Number("-0.25".into()),
                TokenKind::Number("1e300".into()),
                TokenKind::LBracket,
                TokenKind::Ident("x".into()),
                TokenKind::Comma,
                TokenKind::Ident("y".into()),
                TokenKind::RBracket,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn quote_round_trips() {
        let s = "tab\there \"quoted\" back\\slash\u{1}é";
        assert_eq!(
            kinds(&quote(s)),
            vec![TokenKind::Str(s.into()), TokenKind::Eof]
        );
    }

    #[test]
    fn lexical_errors_carry_spans() {
        let errs = tokenize("agent a {\n  say \"open", "f.agent").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].span.line, 2);
        assert_eq!(errs[0].span.column, 7);
        assert!(errs[0].message.contains("unterminated"));

        let errs = tokenize("a $ b @", "f").unwrap_err();
        assert_eq!(errs.len(), 2);
    }
}
