use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Char(u8),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

// Longest first so that `<=` wins over `<`.
const PUNCTS: &[&str] = &[
    "++", "--", "+=", "-=", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", "[", "]",
    ";", ",", "=", "<", ">", "+", "-", "*", "!",
];

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut line_start = 0usize;

    while i < bytes.len() {
        let c = bytes[i];
        let col = (i - line_start + 1) as u32;
        match c {
            b'\n' => {
                i += 1;
                line += 1;
                line_start = i;
            }
            b' ' | b'\t' | b'\r' => i += 1,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(ParseError::syntax(line, col, "unterminated comment"));
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    if bytes[i] == b'\n' {
                        line += 1;
                        line_start = i + 1;
                    }
                    i += 1;
                }
            }
            b'#' => {
                return Err(ParseError::unsupported(line, col, "preprocessor directive"));
            }
            b'"' => {
                return Err(ParseError::unsupported(line, col, "string literal"));
            }
            b'\'' => {
                let (value, len) = lex_char(&bytes[i..])
                    .ok_or_else(|| ParseError::syntax(line, col, "malformed character literal"))?;
                out.push(Token {
                    tok: Tok::Char(value),
                    line,
                    col,
                });
                i += len;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let text = &src[start..i];
                let value = text
                    .parse::<i64>()
                    .map_err(|_| ParseError::syntax(line, col, "integer literal out of range"))?;
                out.push(Token {
                    tok: Tok::Int(value),
                    line,
                    col,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    line,
                    col,
                });
            }
            _ => {
                let rest = &src[i..];
                match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
                    Some(p) => {
                        out.push(Token {
                            tok: Tok::Punct(p),
                            line,
                            col,
                        });
                        i += p.len();
                    }
                    None => {
                        let ch = rest.chars().next().unwrap_or('?');
                        let what = match ch {
                            '&' | '|' | '^' | '~' | '%' | '/' | '.' | '?' | ':' => {
                                return Err(ParseError::unsupported(
                                    line,
                                    col,
                                    format!("operator `{ch}`"),
                                ))
                            }
                            _ => format!("unexpected character `{ch}`"),
                        };
                        return Err(ParseError::syntax(line, col, what));
                    }
                }
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col: (i - line_start + 1) as u32,
    });
    Ok(out)
}

fn lex_char(b: &[u8]) -> Option<(u8, usize)> {
    match b.get(1)? {
        b'\\' => {
            let v = match b.get(2)? {
                b'0' => 0,
                b'n' => b'\n',
                b't' => b'\t',
                b'r' => b'\r',
                b'\\' => b'\\',
                b'\'' => b'\'',
                b'"' => b'"',
                _ => return None,
            };
            (b.get(3)? == &b'\'').then_some((v, 4))
        }
        b'\'' | b'\n' => None,
        &c if c.is_ascii() => (b.get(2)? == &b'\'').then_some((c, 3)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_escapes() {
        let toks = tokenize(r"'\0' '&' '\n' '\''").unwrap();
        let vals: Vec<_> = toks
            .iter()
            .filter_map(|t| match t.tok {
                Tok::Char(c) => Some(c),
                _ => None,
            })
            .collect();
        assert_eq!(vals, vec![0, b'&', b'\n', b'\'']);
    }

    #[test]
    fn tracks_lines_through_block_comments() {
        let toks = tokenize("a /* x\ny */ b\nc").unwrap();
        let lines: Vec<_> = toks.iter().map(|t| t.line).collect();
        assert_eq!(lines, vec![1, 2, 3, 3]);
    }

    #[test]
    fn rejects_preprocessor() {
        assert!(matches!(
            tokenize("#include <stdio.h>"),
            Err(ParseError::UnsupportedConstruct { .. })
        ));
    }
}
