use super::{ParseError, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Decimal(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Decimal(s) => format!("`{s}`"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_owned(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

// Longest symbols first so that `<=` wins over `<`.
const SYMBOLS: &[&str] = &[
    "..", "->", "!=", "<=", ">=", "[", "]", "(", ")", ":", ";", "+", "-", "*", "/", "=", "<", ">", "&", "|", "!", "'",
    ",",
];

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0;
    let mut line = 1;
    let mut col = 1;

    let advance = |pos: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for &b in &bytes[*pos..*pos + n] {
            if b == b'\n' {
                *line += 1;
                *col = 1;
            } else if b & 0xC0 != 0x80 {
                *col += 1;
            }
        }
        *pos += n;
    };

    while pos < bytes.len() {
        let b = bytes[pos];
        if b.is_ascii_whitespace() {
            advance(&mut pos, &mut line, &mut col, 1);
            continue;
        }
        if text[pos..].starts_with("//") {
            let len = text[pos..].find('\n').unwrap_or(text.len() - pos);
            advance(&mut pos, &mut line, &mut col, len);
            continue;
        }
        let span = SourceSpan {
            line,
            column: col,
            offset: pos,
        };
        let (tok, len) = if b.is_ascii_alphabetic() || b == b'_' {
            let len = bytes[pos..]
                .iter()
                .take_while(|c| c.is_ascii_alphanumeric() || **c == b'_')
                .count();
            (Tok::Ident(text[pos..pos + len].to_owned()), len)
        } else if b.is_ascii_digit() || (b == b'.' && bytes.get(pos + 1).is_some_and(u8::is_ascii_digit)) {
            let int_len = bytes[pos..].iter().take_while(|c| c.is_ascii_digit()).count();
            let after = pos + int_len;
            let is_decimal = bytes.get(after) == Some(&b'.') && bytes.get(after + 1).is_some_and(u8::is_ascii_digit);
            if is_decimal {
                let frac = bytes[after + 1..].iter().take_while(|c| c.is_ascii_digit()).count();
                let len = int_len + 1 + frac;
                (Tok::Decimal(text[pos..pos + len].to_owned()), len)
            } else {
                let digits = &text[pos..after];
                let value = digits.parse::<i64>().map_err(|_| ParseError {
                    message: format!("integer literal `{digits}` out of range"),
                    span,
                })?;
                (Tok::Int(value), int_len)
            }
        } else if b == b'"' {
            let rest = &text[pos + 1..];
            let end = rest
                .find(['"', '\n'])
                .filter(|&i| rest.as_bytes()[i] == b'"')
                .ok_or(ParseError {
                    message: "unterminated string literal".to_owned(),
                    span,
                })?;
            (Tok::Str(rest[..end].to_owned()), end + 2)
        } else if let Some(sym) = SYMBOLS.iter().find(|s| text[pos..].starts_with(**s)) {
            (Tok::Sym(sym), sym.len())
        } else {
            let ch = text[pos..].chars().next().unwrap_or('?');
            return Err(ParseError {
                message: format!("unexpected character `{ch}`"),
                span,
            });
        };
        tokens.push(Token { tok, span });
        advance(&mut pos, &mut line, &mut col, len);
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: SourceSpan {
            line,
            column: col,
            offset: pos,
        },
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn ranges_are_not_decimals() {
        assert_eq!(
            toks("[0..3]"),
            vec![
                Tok::Sym("["),
                Tok::Int(0),
                Tok::Sym(".."),
                Tok::Int(3),
                Tok::Sym("]"),
                Tok::Eof
            ]
        );
        assert_eq!(toks("0.3:"), vec![Tok::Decimal("0.3".into()), Tok::Sym(":"), Tok::Eof]);
    }

    #[test]
    fn comments_and_crlf() {
        assert_eq!(
            toks("x // hi\r\n<= y"),
            vec![Tok::Ident("x".into()), Tok::Sym("<="), Tok::Ident("y".into()), Tok::Eof]
        );
    }

    #[test]
    fn spans_track_lines_and_columns() {
        let t = tokenize("a\n  bc").unwrap();
        assert_eq!(
            t[1].span,
            SourceSpan {
                line: 2,
                column: 3,
                offset: 4
            }
        );
    }

    #[test]
    fn bad_character_has_span() {
        let err = tokenize("x\n  #").unwrap_err();
        assert_eq!(err.span.line, 2);
        assert_eq!(err.span.column, 3);
    }
}
