use std::sync::Arc;

use super::ast::{Pos, SourceSpan};
use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Int(i64),
    Float(f64),
    Str(String),
    Ident(String),
    // keywords
    Fn,
    Let,
    If,
    Else,
    While,
    Return,
    Throw,
    Try,
    Catch,
    Import,
    True,
    False,
    Nil,
    HashExample,
    ProbeOpen,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    AndAnd,
    OrOr,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Float(v) => format!("float `{v}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Ident(name) => format!("identifier `{name}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Fn => "fn",
            Tok::Let => "let",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::While => "while",
            Tok::Return => "return",
            Tok::Throw => "throw",
            Tok::Try => "try",
            Tok::Catch => "catch",
            Tok::Import => "import",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Nil => "nil",
            Tok::HashExample => "#example",
            Tok::ProbeOpen => "@{",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Assign => "=",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Bang => "!",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Int(_) | Tok::Float(_) | Tok::Str(_) | Tok::Ident(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

struct Cursor<'a> {
    src: &'a str,
    offset: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
            offset: self.offset,
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.offset..].chars().next()
    }

    fn peek_second(&self) -> Option<char> {
        let mut chars = self.src[self.offset..].chars();
        chars.next();
        chars.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }
}

pub fn tokenize(src: &str, module: &Arc<str>) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor {
        src,
        offset: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        // whitespace and `//` comments
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('/') if cur.peek_second() == Some('/') => {
                    while let Some(c) = cur.peek() {
                        if c == '\n' {
                            break;
                        }
                        cur.bump();
                    }
                }
                _ => break,
            }
        }
        let start = cur.pos();
        let Some(c) = cur.bump() else {
            out.push(Token {
                tok: Tok::Eof,
                span: SourceSpan::new(module.clone(), start, start),
            });
            return Ok(out);
        };
        let err = |cur: &Cursor, message: String| ParseError {
            span: SourceSpan::new(module.clone(), start, cur.pos()),
            message,
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            '.' => Tok::Dot,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '%' => Tok::Percent,
            '=' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::EqEq
            }
            '=' => Tok::Assign,
            '!' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::NotEq
            }
            '!' => Tok::Bang,
            '<' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::Le
            }
            '<' => Tok::Lt,
            '>' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::Ge
            }
            '>' => Tok::Gt,
            '&' if cur.peek() == Some('&') => {
                cur.bump();
                Tok::AndAnd
            }
            '|' if cur.peek() == Some('|') => {
                cur.bump();
                Tok::OrOr
            }
            '@' if cur.peek() == Some('{') => {
                cur.bump();
                Tok::ProbeOpen
            }
            '#' => {
                let word_start = cur.offset;
                while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    cur.bump();
                }
                if &src[word_start..cur.offset] == "example" {
                    Tok::HashExample
                } else {
                    return Err(err(&cur, "expected `#example`".to_string()));
                }
            }
            '"' => lex_string(&mut cur).map_err(|m| err(&cur, m))?,
            c if c.is_ascii_digit() => lex_number(&mut cur, start.offset).map_err(|m| err(&cur, m))?,
            c if c.is_ascii_alphabetic() || c == '_' => {
                while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    cur.bump();
                }
                keyword_or_ident(&src[start.offset..cur.offset])
            }
            other => return Err(err(&cur, format!("unexpected character `{other}`"))),
        };
        out.push(Token {
            tok,
            span: SourceSpan::new(module.clone(), start, cur.pos()),
        });
    }
}

fn keyword_or_ident(word: &str) -> Tok {
    match word {
        "fn" => Tok::Fn,
        "let" => Tok::Let,
        "if" => Tok::If,
        "else" => Tok::Else,
        "while" => Tok::While,
        "return" => Tok::Return,
        "throw" => Tok::Throw,
        "try" => Tok::Try,
        "catch" => Tok::Catch,
        "import" => Tok::Import,
        "true" => Tok::True,
        "false" => Tok::False,
        "nil" => Tok::Nil,
        _ => Tok::Ident(word.to_string()),
    }
}

fn lex_string(cur: &mut Cursor) -> Result<Tok, String> {
    let mut text = String::new();
    loop {
        match cur.bump() {
            None => return Err("unterminated string literal".to_string()),
            Some('"') => return Ok(Tok::Str(text)),
            Some('\\') => match cur.bump() {
                Some('n') => text.push('\n'),
                Some('t') => text.push('\t'),
                Some('"') => text.push('"'),
                Some('\\') => text.push('\\'),
                Some(other) => return Err(format!("unknown escape `\\{other}`")),
                None => return Err("unterminated string literal".to_string()),
            },
            Some(c) => text.push(c),
        }
    }
}

fn lex_number(cur: &mut Cursor, start: usize) -> Result<Tok, String> {
    while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
        cur.bump();
    }
    let is_float = cur.peek() == Some('.') && matches!(cur.peek_second(), Some(c) if c.is_ascii_digit());
    if is_float {
        cur.bump();
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
            cur.bump();
        }
    }
    let text = &cur.src[start..cur.offset];
    if is_float {
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Tok::Float(v)),
            _ => Err(format!("float literal `{text}` out of range")),
        }
    } else {
        text.parse::<i64>()
            .map(Tok::Int)
            .map_err(|_| format!("integer literal `{text}` out of range"))
    }
}
