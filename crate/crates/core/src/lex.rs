//! Tokenizer shared by the ARC and SQL front ends.

use crate::alt::SourceSpan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// Bare word: keyword or identifier.
    Word(String),
    /// Double-quoted identifier.
    Quoted(String),
    Int(String),
    Dec(String),
    /// Single-quoted string literal.
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

impl Token {
    pub fn is_word(&self, kw: &str) -> bool {
        matches!(&self.kind, TokenKind::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(&self.kind, TokenKind::Sym(x) if *x == s)
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            TokenKind::Word(w) => format!("`{w}`"),
            TokenKind::Quoted(w) => format!("\"{w}\""),
            TokenKind::Int(n) | TokenKind::Dec(n) => format!("number {n}"),
            TokenKind::Str(s) => format!("string '{s}'"),
            TokenKind::Sym(s) => format!("`{s}`"),
            TokenKind::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {message}", line = span.line + 1, column = span.column + 1)]
pub struct LexError {
    pub span: SourceSpan,
    pub message: String,
}

const SYMBOLS: &[&str] = &[
    ":=", "<>", "!=", "<=", ">=", "{", "}", "(", ")", "[", "]", "|", ",", ".", "=", "<", ">", "+",
    "-", "*", "/", ";",
];

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 0;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn mark(&self) -> (usize, usize, usize) {
        (self.pos, self.line, self.column)
    }

    fn span_from(&self, m: (usize, usize, usize)) -> SourceSpan {
        SourceSpan {
            start: m.0,
            end: self.pos,
            line: m.1,
            column: m.2,
        }
    }
}

/// Splits `src` into tokens. `--` starts a comment running to end of line.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        chars: src.chars().collect(),
        pos: 0,
        line: 0,
        column: 0,
        _src: src,
    };
    let mut out = Vec::new();
    loop {
        while let Some(c) = cur.peek(0) {
            if c.is_whitespace() {
                cur.bump();
            } else if c == '-' && cur.peek(1) == Some('-') {
                while let Some(c) = cur.peek(0) {
                    if c == '\n' {
                        break;
                    }
                    cur.bump();
                }
            } else {
                break;
            }
        }
        let m = cur.mark();
        let Some(c) = cur.peek(0) else {
            out.push(Token {
                kind: TokenKind::Eof,
                span: cur.span_from(m),
            });
            return Ok(out);
        };
        let kind = if is_ident_start(c) {
            let mut w = String::new();
            while let Some(c) = cur.peek(0).filter(|c| is_ident_char(*c)) {
                w.push(c);
                cur.bump();
            }
            TokenKind::Word(w)
        } else if c.is_ascii_digit() {
            lex_number(&mut cur)
        } else if c == '\'' {
            cur.bump();
            let mut s = String::new();
            loop {
                match cur.bump() {
                    Some('\'') if cur.peek(0) == Some('\'') => {
                        cur.bump();
                        s.push('\'');
                    }
                    Some('\'') => break,
                    Some(c) => s.push(c),
                    None => {
                        return Err(LexError {
                            span: cur.span_from(m),
                            message: "unterminated string literal".into(),
                        })
                    }
                }
            }
            TokenKind::Str(s)
        } else if c == '"' {
            cur.bump();
            let mut s = String::new();
            loop {
                match cur.bump() {
                    Some('"') if cur.peek(0) == Some('"') => {
                        cur.bump();
                        s.push('"');
                    }
                    Some('"') => break,
                    Some(c) => s.push(c),
                    None => {
                        return Err(LexError {
                            span: cur.span_from(m),
                            message: "unterminated quoted identifier".into(),
                        })
                    }
                }
            }
            if s.is_empty() {
                return Err(LexError {
                    span: cur.span_from(m),
                    message: "empty quoted identifier".into(),
                });
            }
            TokenKind::Quoted(s)
        } else {
            let sym = SYMBOLS
                .iter()
                .find(|s| s.chars().enumerate().all(|(i, sc)| cur.peek(i) == Some(sc)));
            match sym {
                Some(s) => {
                    for _ in 0..s.chars().count() {
                        cur.bump();
                    }
                    TokenKind::Sym(s)
                }
                None => {
                    cur.bump();
                    return Err(LexError {
                        span: cur.span_from(m),
                        message: format!("unexpected character `{c}`"),
                    });
                }
            }
        };
        out.push(Token {
            kind,
            span: cur.span_from(m),
        });
    }
}

fn lex_number(cur: &mut Cursor) -> TokenKind {
    let mut s = String::new();
    let mut is_dec = false;
    while let Some(c) = cur.peek(0).filter(|c| c.is_ascii_digit()) {
        s.push(c);
        cur.bump();
    }
    if cur.peek(0) == Some('.') && cur.peek(1).is_some_and(|c| c.is_ascii_digit()) {
        is_dec = true;
        s.push('.');
        cur.bump();
        while let Some(c) = cur.peek(0).filter(|c| c.is_ascii_digit()) {
            s.push(c);
            cur.bump();
        }
    }
    if matches!(cur.peek(0), Some('e') | Some('E')) {
        let sign = matches!(cur.peek(1), Some('+') | Some('-'));
        let digit_at = if sign { 2 } else { 1 };
        if cur.peek(digit_at).is_some_and(|c| c.is_ascii_digit()) {
            is_dec = true;
            for _ in 0..digit_at {
                s.push(cur.bump().unwrap());
            }
            while let Some(c) = cur.peek(0).filter(|c| c.is_ascii_digit()) {
                s.push(c);
                cur.bump();
            }
        }
    }
    if is_dec {
        TokenKind::Dec(s)
    } else {
        TokenKind::Int(s)
    }
}
