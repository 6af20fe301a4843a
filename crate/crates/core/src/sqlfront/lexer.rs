use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    /// Identifier or keyword. Unquoted words are lowercase-folded.
    Word { text: String, quoted: bool },
    Number(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Semicolon,
    Star,
    Plus,
    Minus,
    Slash,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Word { text, quoted: true } => format!("\"{text}\""),
            Tok::Word { text, .. } => text.clone(),
            Tok::Number(n) => n.clone(),
            Tok::Str(s) => format!("'{s}'"),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Comma => ",".into(),
            Tok::Dot => ".".into(),
            Tok::Semicolon => ";".into(),
            Tok::Star => "*".into(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Slash => "/".into(),
            Tok::Eq => "=".into(),
            Tok::NotEq => "<>".into(),
            Tok::Lt => "<".into(),
            Tok::LtEq => "<=".into(),
            Tok::Gt => ">".into(),
            Tok::GtEq => ">=".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            Tok::Word {
                text: text.to_ascii_lowercase(),
                quoted: false,
            }
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            if i < chars.len() && chars[i] == '.' {
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while i < j {
                        bump!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                }
            }
            Tok::Number(chars[start..i].iter().collect())
        } else if c == '\'' || c == '"' {
            let quote = c;
            bump!();
            let mut s = String::new();
            loop {
                if i >= chars.len() {
                    return Err(ParseError::syntax(
                        tl,
                        tc,
                        "end of input",
                        if quote == '\'' { "unterminated string literal" } else { "unterminated quoted identifier" },
                    ));
                }
                if chars[i] == quote {
                    if chars.get(i + 1) == Some(&quote) {
                        s.push(quote);
                        bump!();
                        bump!();
                        continue;
                    }
                    bump!();
                    break;
                }
                s.push(chars[i]);
                bump!();
            }
            if quote == '\'' {
                Tok::Str(s)
            } else {
                if s.is_empty() {
                    return Err(ParseError::syntax(tl, tc, "\"\"", "empty quoted identifier"));
                }
                Tok::Word { text: s, quoted: true }
            }
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let (tok, len) = match two.as_str() {
                "<>" | "!=" => (Tok::NotEq, 2),
                "<=" => (Tok::LtEq, 2),
                ">=" => (Tok::GtEq, 2),
                _ => (
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        ',' => Tok::Comma,
                        '.' => Tok::Dot,
                        ';' => Tok::Semicolon,
                        '*' => Tok::Star,
                        '+' => Tok::Plus,
                        '-' => Tok::Minus,
                        '/' => Tok::Slash,
                        '=' => Tok::Eq,
                        '<' => Tok::Lt,
                        '>' => Tok::Gt,
                        other => {
                            return Err(ParseError::syntax(tl, tc, &other.to_string(), "unexpected character"));
                        }
                    },
                    1,
                ),
            };
            for _ in 0..len {
                bump!();
            }
            tok
        };
        out.push(Token { tok, line: tl, col: tc });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_case_and_keeps_quoted() {
        let toks = tokenize("SELECT \"MixedCase\", abc FROM T").unwrap();
        assert_eq!(toks[0].tok, Tok::Word { text: "select".into(), quoted: false });
        assert_eq!(toks[1].tok, Tok::Word { text: "MixedCase".into(), quoted: true });
        assert_eq!(toks[5].tok, Tok::Word { text: "t".into(), quoted: false });
    }

    #[test]
    fn strings_numbers_and_comments() {
        let toks = tokenize("'it''s' 1.5e-3 -- trailing\n 42").unwrap();
        assert_eq!(toks[0].tok, Tok::Str("it's".into()));
        assert_eq!(toks[1].tok, Tok::Number("1.5e-3".into()));
        assert_eq!(toks[2].tok, Tok::Number("42".into()));
        assert_eq!((toks[2].line, toks[2].col), (2, 2));
    }

    #[test]
    fn unterminated_string() {
        let err = tokenize("SELECT 'abc").unwrap_err();
        assert_eq!((err.line, err.col), (1, 8));
    }
}
