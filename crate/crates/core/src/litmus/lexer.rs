use super::{Diagnostic, LitmusError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    /// `#` immediately followed by a value.
    Hash,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Colon,
    Eq,
    Not,
    And,
    Or,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Hash => "`#`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Not => "`~`".into(),
            Tok::And => "`/\\`".into(),
            Tok::Or => "`\\/`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

fn err(pos: Pos, message: impl Into<String>) -> LitmusError {
    LitmusError::Parse(Diagnostic { line: pos.line, column: pos.column, message: message.into() })
}

/// Splits litmus source into tokens.
///
/// `#` followed directly by a digit (or by `V` and a digit) marks a stored
/// value; any other `#` starts a comment that runs to the end of the line.
pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, LitmusError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        let next = chars.get(i + 1).copied();
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '#' {
            let value_follows = match next {
                Some(d) if d.is_ascii_digit() => true,
                Some('V') => chars.get(i + 2).is_some_and(|d| d.is_ascii_digit()),
                _ => false,
            };
            if value_follows {
                out.push(Token { tok: Tok::Hash, pos });
                advance(&mut i, &mut line, &mut col, 1);
            } else {
                while i < chars.len() && chars[i] != '\n' {
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            continue;
        }
        let simple = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ';' => Some(Tok::Semi),
            ':' => Some(Tok::Colon),
            '=' => Some(Tok::Eq),
            '~' => Some(Tok::Not),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, pos });
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        match (c, next) {
            ('/', Some('\\')) => {
                out.push(Token { tok: Tok::And, pos });
                advance(&mut i, &mut line, &mut col, 2);
                continue;
            }
            ('\\', Some('/')) => {
                out.push(Token { tok: Tok::Or, pos });
                advance(&mut i, &mut line, &mut col, 2);
                continue;
            }
            _ => {}
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut col, 1);
            let start = i;
            while i < chars.len() && chars[i] != '"' {
                if chars[i] == '\n' {
                    return Err(err(pos, "unterminated string"));
                }
                advance(&mut i, &mut line, &mut col, 1);
            }
            if i == chars.len() {
                return Err(err(pos, "unterminated string"));
            }
            let s: String = chars[start..i].iter().collect();
            advance(&mut i, &mut line, &mut col, 1);
            out.push(Token { tok: Tok::Str(s), pos });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse().map_err(|_| err(pos, format!("integer `{text}` out of range")))?;
            out.push(Token { tok: Tok::Int(v), pos });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), pos });
            continue;
        }
        return Err(err(pos, format!("unexpected character `{c}`")));
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, column: col } });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn hash_value_versus_comment() {
        assert_eq!(
            toks("ST a1 #1; # trailing comment\nFENCE"),
            vec![
                Tok::Ident("ST".into()),
                Tok::Ident("a1".into()),
                Tok::Hash,
                Tok::Int(1),
                Tok::Semi,
                Tok::Ident("FENCE".into()),
                Tok::Eof
            ]
        );
        assert_eq!(toks("#V1")[..2], [Tok::Hash, Tok::Ident("V1".into())]);
    }

    #[test]
    fn dotted_mnemonics_and_connectives() {
        assert_eq!(
            toks("SCLD.ACQ ~ /\\ \\/"),
            vec![Tok::Ident("SCLD.ACQ".into()), Tok::Not, Tok::And, Tok::Or, Tok::Eof]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let t = tokenize("litmus\n  \"x\" @").unwrap_err();
        assert_eq!(t, err(Pos { line: 2, column: 7 }, "unexpected character `@`"));
    }
}
