use super::ast::Pos;
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

// Longest match first.
const PUNCTS: [&str; 27] = [
    "&&", "||", "==", "!=", "<=", ">=", "<<", ">>", "(", ")", "{", "}", ";", "=", "<", ">", "+",
    "-", "*", "/", "%", "^", "|", "&", "!", "~", ",",
];

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;

    macro_rules! advance {
        ($n:expr) => {{
            for _ in 0..$n {
                if bytes[i] == b'\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }

    while i < bytes.len() {
        let c = bytes[i];
        let pos = Pos { line, col };
        if c.is_ascii_whitespace() {
            advance!(1);
        } else if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                advance!(1);
            }
        } else if src[i..].starts_with("/*") {
            advance!(2);
            loop {
                if i >= bytes.len() {
                    return Err(ParseError::Syntax {
                        pos,
                        msg: "unterminated block comment".into(),
                    });
                }
                if src[i..].starts_with("*/") {
                    advance!(2);
                    break;
                }
                advance!(1);
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                advance!(1);
            }
            let text = &src[start..i];
            let value = text.parse::<i64>().map_err(|_| ParseError::Syntax {
                pos,
                msg: format!("integer literal `{text}` out of range"),
            })?;
            out.push(Token {
                tok: Tok::Int(value),
                pos,
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                advance!(1);
            }
            out.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                pos,
            });
        } else if let Some(p) = PUNCTS.iter().find(|p| src[i..].starts_with(**p)) {
            advance!(p.len());
            out.push(Token {
                tok: Tok::Punct(p),
                pos,
            });
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(ParseError::Syntax {
                pos,
                msg: format!("unexpected character `{ch}`"),
            });
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_comments_and_tracks_positions() {
        let toks = tokenize("int x; // c\n/* a\n b */ x = 10;").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("int".into()),
                Tok::Ident("x".into()),
                Tok::Punct(";"),
                Tok::Ident("x".into()),
                Tok::Punct("="),
                Tok::Int(10),
                Tok::Punct(";"),
                Tok::Eof
            ]
        );
        assert_eq!(toks[3].pos, Pos { line: 3, col: 7 });
    }

    #[test]
    fn prefers_two_char_operators() {
        let toks = tokenize("a<=b>>c").unwrap();
        assert_eq!(toks[1].tok, Tok::Punct("<="));
        assert_eq!(toks[3].tok, Tok::Punct(">>"));
    }

    #[test]
    fn rejects_stray_characters() {
        let err = tokenize("int x;\n  x = $;").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { pos: Pos { line: 2, col: 7 }, .. }));
    }
}
