//! Tokenizer shared by the model-file and property-file parsers.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    At,
    Arrow,
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    Bang,
    Amp,
    Pipe,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Number(x) => write!(f, "number `{x}`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::At => f.write_str("`@`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Le => f.write_str("`<=`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::Ge => f.write_str("`>=`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Pipe => f.write_str("`|`"),
        }
    }
}

/// Line/column position (both 1-based) of a token or error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub(crate) struct LexError {
    pub pos: Pos,
    pub message: String,
}

/// Tokenizes `text`. Everything from `#` to the end of a line is a comment.
pub(crate) fn tokenize(text: &str, first_line: usize) -> Result<Vec<Token>, LexError> {
    let mut out = Vec::new();
    let mut line = first_line;
    let mut line_start = 0usize;
    let bytes = text.as_bytes();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = text[i..].chars().next().expect("index on char boundary");
        let pos = Pos {
            line,
            col: text[line_start..i].chars().count() + 1,
        };
        let single = |tok| Token { tok, pos };
        match c {
            '\n' => {
                line += 1;
                i += 1;
                line_start = i;
            }
            c if c.is_whitespace() => i += c.len_utf8(),
            '#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(single(Tok::Ident(text[start..i].to_string())));
            }
            c if c.is_ascii_digit() || (c == '.' && next_is_digit(bytes, i + 1)) => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if next_is_digit(bytes, j) {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let value: f64 = lit.parse().map_err(|_| LexError {
                    pos,
                    message: format!("malformed number `{lit}`"),
                })?;
                out.push(single(Tok::Number(value)));
            }
            _ => {
                let next = bytes.get(i + 1).copied();
                let (tok, len) = match (c, next) {
                    ('-', Some(b'>')) => (Tok::Arrow, 2),
                    ('*', Some(b'*')) => (Tok::Caret, 2),
                    ('<', Some(b'=')) => (Tok::Le, 2),
                    ('>', Some(b'=')) => (Tok::Ge, 2),
                    ('=', Some(b'=')) => (Tok::Eq, 2),
                    ('&', Some(b'&')) => (Tok::Amp, 2),
                    ('|', Some(b'|')) => (Tok::Pipe, 2),
                    ('+', _) => (Tok::Plus, 1),
                    ('-', _) => (Tok::Minus, 1),
                    ('*', _) => (Tok::Star, 1),
                    ('/', _) => (Tok::Slash, 1),
                    ('^', _) => (Tok::Caret, 1),
                    ('(', _) => (Tok::LParen, 1),
                    (')', _) => (Tok::RParen, 1),
                    ('[', _) => (Tok::LBracket, 1),
                    (']', _) => (Tok::RBracket, 1),
                    (',', _) => (Tok::Comma, 1),
                    ('@', _) => (Tok::At, 1),
                    ('=', _) => (Tok::Eq, 1),
                    ('<', _) => (Tok::Lt, 1),
                    ('>', _) => (Tok::Gt, 1),
                    ('!', _) => (Tok::Bang, 1),
                    ('&', _) => (Tok::Amp, 1),
                    ('|', _) => (Tok::Pipe, 1),
                    _ => {
                        return Err(LexError {
                            pos,
                            message: format!("unexpected character `{c}`"),
                        })
                    }
                };
                out.push(single(tok));
                i += len;
            }
        }
    }
    Ok(out)
}

fn next_is_digit(bytes: &[u8], i: usize) -> bool {
    bytes.get(i).is_some_and(|b| b.is_ascii_digit())
}

/// Cursor over a token slice with one-token lookahead and backtracking.
pub(crate) struct Cursor<'a> {
    toks: &'a [Token],
    pub idx: usize,
    end: Pos,
}

impl<'a> Cursor<'a> {
    pub fn new(toks: &'a [Token], end: Pos) -> Self {
        Cursor { toks, idx: 0, end }
    }

    pub fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.idx).map(|t| &t.tok)
    }

    pub fn peek_at(&self, offset: usize) -> Option<&'a Tok> {
        self.toks.get(self.idx + offset).map(|t| &t.tok)
    }

    pub fn pos(&self) -> Pos {
        self.toks.get(self.idx).map(|t| t.pos).unwrap_or(self.end)
    }

    pub fn next(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.idx).map(|t| &t.tok);
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    pub fn at_end(&self) -> bool {
        self.idx >= self.toks.len()
    }

    pub fn describe_next(&self) -> String {
        match self.peek() {
            Some(t) => t.to_string(),
            None => "end of input".to_string(),
        }
    }
}

/// Position just past the last character of `text`, for end-of-input errors.
pub(crate) fn end_pos(text: &str, first_line: usize) -> Pos {
    let lines = text.split('\n').count();
    let last = text.rsplit('\n').next().unwrap_or("");
    Pos {
        line: first_line + lines - 1,
        col: last.chars().count() + 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> Vec<Tok> {
        tokenize(s, 1).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_reaction_line() {
        assert_eq!(
            kinds("2 A + B -> C @ k*A^2"),
            vec![
                Tok::Number(2.0),
                Tok::Ident("A".into()),
                Tok::Plus,
                Tok::Ident("B".into()),
                Tok::Arrow,
                Tok::Ident("C".into()),
                Tok::At,
                Tok::Ident("k".into()),
                Tok::Star,
                Tok::Ident("A".into()),
                Tok::Caret,
                Tok::Number(2.0),
            ]
        );
    }

    #[test]
    fn scientific_numbers() {
        assert_eq!(
            kinds("6.42e-5 1E3 .5"),
            vec![Tok::Number(6.42e-5), Tok::Number(1e3), Tok::Number(0.5)]
        );
        // `2e` is a number followed by an identifier
        assert_eq!(kinds("2e"), vec![Tok::Number(2.0), Tok::Ident("e".into())]);
    }

    #[test]
    fn comments_and_positions() {
        let toks = tokenize("a # ignored\n  <= b", 1).unwrap();
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[1].pos, Pos { line: 2, col: 3 });
    }

    #[test]
    fn rejects_stray_characters() {
        let err = tokenize("a $ b", 1).unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 3 });
    }
}
