use std::fmt;

use crate::ast::Span;

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Step,
    Channel,
    Node,
    Implements,
    Every,
    Pre,
    Fby,
    If,
    Then,
    Else,
    None,
    Some,
    Either,
    Otherwise,
}

impl Keyword {
    fn from_str(s: &str) -> Option<Keyword> {
        Some(match s {
            "step" => Keyword::Step,
            "channel" => Keyword::Channel,
            "node" => Keyword::Node,
            "implements" => Keyword::Implements,
            "every" => Keyword::Every,
            "pre" => Keyword::Pre,
            "fby" => Keyword::Fby,
            "if" => Keyword::If,
            "then" => Keyword::Then,
            "else" => Keyword::Else,
            "None" => Keyword::None,
            "Some" => Keyword::Some,
            "either" => Keyword::Either,
            "otherwise" => Keyword::Otherwise,
            _ => return Option::None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Punct {
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Equals,
    Question,
    Underscore,
    /// `-->`, separating inputs from outputs in signatures and nodes.
    LongArrow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    Int(u64),
    Real(f64),
    Bool(bool),
    /// Positive duration, normalized to microseconds.
    Duration(u64),
    Punct(Punct),
    Op(Op),
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Eof => f.write_str("end of input"),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Int(i) => write!(f, "integer `{i}`"),
            TokenKind::Real(r) => write!(f, "real `{r}`"),
            TokenKind::Bool(b) => write!(f, "`{b}`"),
            TokenKind::Duration(d) => write!(f, "duration `{d}us`"),
            TokenKind::Keyword(k) => write!(f, "keyword `{}`", format!("{k:?}").to_lowercase()),
            TokenKind::Punct(p) => write!(f, "`{}`", punct_str(*p)),
            TokenKind::Op(o) => write!(f, "`{}`", op_str(*o)),
        }
    }
}

pub(crate) fn punct_str(p: Punct) -> &'static str {
    match p {
        Punct::LParen => "(",
        Punct::RParen => ")",
        Punct::LBrace => "{",
        Punct::RBrace => "}",
        Punct::Comma => ",",
        Punct::Semi => ";",
        Punct::Colon => ":",
        Punct::Equals => "=",
        Punct::Question => "?",
        Punct::Underscore => "_",
        Punct::LongArrow => "-->",
    }
}

pub(crate) fn op_str(o: Op) -> &'static str {
    match o {
        Op::Arrow => "->",
        Op::Plus => "+",
        Op::Minus => "-",
        Op::Star => "*",
        Op::Slash => "/",
        Op::Lt => "<",
        Op::Le => "<=",
        Op::Gt => ">",
        Op::Ge => ">=",
        Op::EqEq => "==",
        Op::Ne => "!=",
        Op::AndAnd => "&&",
        Op::OrOr => "||",
        Op::Bang => "!",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

/// Splits `source` into tokens. Line comments start with `--` (but `-->` is a
/// token) and run to the end of the line.
pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = source[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let start = i;
        if source[i..].starts_with("-->") {
            i += 3;
            tokens.push(tok(TokenKind::Punct(Punct::LongArrow), source, start, i));
            continue;
        }
        if source[i..].starts_with("--") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if is_ident_start(c) {
            while i < bytes.len() && is_ident_char(bytes[i] as char) {
                i += 1;
            }
            let word = &source[start..i];
            let kind = match word {
                "_" => TokenKind::Punct(Punct::Underscore),
                "true" => TokenKind::Bool(true),
                "false" => TokenKind::Bool(false),
                _ => match Keyword::from_str(word) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident(word.to_string()),
                },
            };
            tokens.push(tok(kind, source, start, i));
            continue;
        }
        if c.is_ascii_digit() {
            let (kind, end) = lex_number(source, start)?;
            i = end;
            tokens.push(tok(kind, source, start, i));
            continue;
        }
        let two = source.get(i..i + 2).unwrap_or("");
        let (kind, len) = match two {
            "->" => (TokenKind::Op(Op::Arrow), 2),
            "<=" => (TokenKind::Op(Op::Le), 2),
            ">=" => (TokenKind::Op(Op::Ge), 2),
            "==" => (TokenKind::Op(Op::EqEq), 2),
            "!=" => (TokenKind::Op(Op::Ne), 2),
            "&&" => (TokenKind::Op(Op::AndAnd), 2),
            "||" => (TokenKind::Op(Op::OrOr), 2),
            _ => {
                let kind = match c {
                    '(' => TokenKind::Punct(Punct::LParen),
                    ')' => TokenKind::Punct(Punct::RParen),
                    '{' => TokenKind::Punct(Punct::LBrace),
                    '}' => TokenKind::Punct(Punct::RBrace),
                    ',' => TokenKind::Punct(Punct::Comma),
                    ';' => TokenKind::Punct(Punct::Semi),
                    ':' => TokenKind::Punct(Punct::Colon),
                    '=' => TokenKind::Punct(Punct::Equals),
                    '?' => TokenKind::Punct(Punct::Question),
                    '+' => TokenKind::Op(Op::Plus),
                    '-' => TokenKind::Op(Op::Minus),
                    '*' => TokenKind::Op(Op::Star),
                    '/' => TokenKind::Op(Op::Slash),
                    '<' => TokenKind::Op(Op::Lt),
                    '>' => TokenKind::Op(Op::Gt),
                    '!' => TokenKind::Op(Op::Bang),
                    _ => {
                        let span = Span::new(start, start + c.len_utf8());
                        return Err(ParseError::new(
                            span,
                            Vec::new(),
                            format!("`{c}`"),
                            format!("unexpected character `{c}`"),
                        ));
                    }
                };
                (kind, 1)
            }
        };
        i += len;
        tokens.push(tok(kind, source, start, i));
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        lexeme: String::new(),
        span: Span::new(source.len(), source.len()),
    });
    Ok(tokens)
}

fn tok(kind: TokenKind, source: &str, start: usize, end: usize) -> Token {
    Token {
        kind,
        lexeme: source[start..end].to_string(),
        span: Span::new(start, end),
    }
}

fn digits_end(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    i
}

fn lex_number(source: &str, start: usize) -> Result<(TokenKind, usize), ParseError> {
    let bytes = source.as_bytes();
    let mut i = digits_end(bytes, start);
    let int_end = i;
    let mut is_real = false;
    if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
        i = digits_end(bytes, i + 1);
        is_real = true;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = digits_end(bytes, j);
            is_real = true;
        }
    }
    let bad = |msg: String, end: usize| {
        ParseError::new(
            Span::new(start, end),
            Vec::new(),
            format!("`{}`", &source[start..end]),
            msg,
        )
    };
    if is_real {
        let text = &source[start..i];
        let r: f64 = text
            .parse()
            .map_err(|_| bad(format!("invalid real literal `{text}`"), i))?;
        return Ok((TokenKind::Real(r), i));
    }
    let digits = &source[start..int_end];
    // duration suffix: us, ms or s, glued to the digits
    let mut end = int_end;
    while end < bytes.len() && is_ident_char(bytes[end] as char) {
        end += 1;
    }
    let suffix = &source[int_end..end];
    if suffix.is_empty() {
        let n: u64 = digits
            .parse()
            .map_err(|_| bad(format!("integer literal `{digits}` is too large"), end))?;
        return Ok((TokenKind::Int(n), end));
    }
    let scale = match suffix {
        "us" => 1,
        "ms" => 1_000,
        "s" => 1_000_000,
        _ => {
            return Err(bad(
                format!("invalid number suffix `{suffix}` (durations use us, ms or s)"),
                end,
            ))
        }
    };
    let n: u64 = digits
        .parse()
        .map_err(|_| bad(format!("duration `{digits}{suffix}` is too large"), end))?;
    let us = n
        .checked_mul(scale)
        .ok_or_else(|| bad(format!("duration `{digits}{suffix}` is too large"), end))?;
    if us == 0 {
        return Err(bad("durations must be positive".to_string(), end));
    }
    Ok((TokenKind::Duration(us), end))
}

/// Formats a microsecond count with the largest unit that divides it.
pub fn format_duration(us: u64) -> String {
    if us != 0 && us.is_multiple_of(1_000_000) {
        format!("{}s", us / 1_000_000)
    } else if us != 0 && us.is_multiple_of(1_000) {
        format!("{}ms", us / 1_000)
    } else {
        format!("{us}us")
    }
}

/// Parses a standalone duration literal such as `200ms`.
pub fn parse_duration(text: &str) -> Result<u64, ParseError> {
    let tokens = tokenize(text.trim())?;
    match tokens.as_slice() {
        [Token {
            kind: TokenKind::Duration(us),
            ..
        }, Token {
            kind: TokenKind::Eof,
            ..
        }] => Ok(*us),
        _ => Err(ParseError::new(
            Span::new(0, text.len()),
            vec!["duration".into()],
            format!("`{text}`"),
            format!("`{text}` is not a duration (expected e.g. `200ms`, `2s`)"),
        )),
    }
}
