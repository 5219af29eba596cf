use super::DslError;

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Num(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier '{s}'"),
            TokenKind::Plus => "'+'".into(),
            TokenKind::Minus => "'-'".into(),
            TokenKind::Star => "'*'".into(),
            TokenKind::Slash => "'/'".into(),
            TokenKind::Caret => "'^'".into(),
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
            TokenKind::Comma => "','".into(),
        }
    }
}

/// A token with its 1-based source position.
#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub col: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, DslError> {
    tokenize_at(src, 1, 1)
}

/// Tokenizes `src` as if it started at `line:col` of a larger file.
/// Columns count characters.
pub fn tokenize_at(src: &str, line: usize, col: usize) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let (mut line, mut col) = (line, col);
    while i < chars.len() {
        let c = chars[i];
        let start_col = col;
        let simple = match c {
            '+' => Some(TokenKind::Plus),
            '-' => Some(TokenKind::Minus),
            '*' => Some(TokenKind::Star),
            '/' => Some(TokenKind::Slash),
            '^' => Some(TokenKind::Caret),
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            ',' => Some(TokenKind::Comma),
            _ => None,
        };
        if let Some(kind) = simple {
            out.push(Token { kind, line, col });
            i += 1;
            col += 1;
            continue;
        }
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                } else {
                    let bad = chars.get(j).copied();
                    return Err(DslError::Syntax {
                        line,
                        col: start_col + (j - start),
                        expected: "exponent digits".into(),
                        found: bad.map_or("end of input".into(), |b| format!("'{b}'")),
                    });
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| DslError::Syntax {
                line,
                col: start_col,
                expected: "a number".into(),
                found: format!("'{text}'"),
            })?;
            out.push(Token {
                kind: TokenKind::Num(value),
                line,
                col: start_col,
            });
            col += i - start;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(chars[start..i].iter().collect()),
                line,
                col: start_col,
            });
            col += i - start;
            continue;
        }
        return Err(DslError::IllegalChar { line, col, ch: c });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn basic_streams() {
        use TokenKind::*;
        assert_eq!(
            kinds("x1*z1^3"),
            vec![
                Ident("x1".into()),
                Star,
                Ident("z1".into()),
                Caret,
                Num(3.0)
            ]
        );
        assert_eq!(
            kinds("atan(-2*x1)"),
            vec![
                Ident("atan".into()),
                LParen,
                Minus,
                Num(2.0),
                Star,
                Ident("x1".into()),
                RParen
            ]
        );
        assert_eq!(
            kinds("1e-3 + .5 + 2.5E+2"),
            vec![Num(1e-3), Plus, Num(0.5), Plus, Num(250.0)]
        );
    }

    #[test]
    fn positions() {
        let t = tokenize("a +\n  b").unwrap();
        assert_eq!((t[0].line, t[0].col), (1, 1));
        assert_eq!((t[1].line, t[1].col), (1, 3));
        assert_eq!((t[2].line, t[2].col), (2, 3));
    }

    #[test]
    fn illegal_character() {
        assert_eq!(
            tokenize("1e-3 @"),
            Err(DslError::IllegalChar {
                line: 1,
                col: 6,
                ch: '@'
            })
        );
        let e = tokenize_at("x $", 4, 10).unwrap_err();
        assert_eq!(e.position(), Some((4, 12)));
    }

    #[test]
    fn bad_exponent() {
        let e = tokenize("2e+").unwrap_err();
        assert_eq!(e.position(), Some((1, 4)));
    }
}
