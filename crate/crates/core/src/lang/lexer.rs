use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(String),
    Decimal(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Dot,
    Plus,
    OPlus,
    Dollar,
    Slash,
    Minus,
    Arrow,
    NegArrow,
    Implies,
    Eq,
    Ge,
    Gt,
    Le,
    Lt,
    Not,
    Meet,
    Underscore,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(s) | Tok::Decimal(s) => format!("number `{s}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Plus => "+",
            Tok::OPlus => "(+)",
            Tok::Dollar => "$",
            Tok::Slash => "/",
            Tok::Minus => "-",
            Tok::Arrow => "->",
            Tok::NegArrow => "-/",
            Tok::Implies => "=>",
            Tok::Eq => "=",
            Tok::Ge => ">=",
            Tok::Gt => ">",
            Tok::Le => "<=",
            Tok::Lt => "<",
            Tok::Not => "!",
            Tok::Meet => "/\\",
            Tok::Underscore => "_",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic()
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        let at = |k: usize| chars.get(i + k).copied();
        let (tok, len) = if is_ident_start(c) {
            let mut j = i;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            (Tok::Ident(chars[i..j].iter().collect()), j - i)
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if chars.get(j) == Some(&'.') && chars.get(j + 1).is_some_and(|d| d.is_ascii_digit()) {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                (Tok::Decimal(chars[i..j].iter().collect()), j - i)
            } else {
                (Tok::Int(chars[i..j].iter().collect()), j - i)
            }
        } else {
            match (c, at(1), at(2)) {
                ('(', Some('+'), Some(')')) => (Tok::OPlus, 3),
                ('-', Some('>'), _) => (Tok::Arrow, 2),
                ('-', Some('/'), _) => (Tok::NegArrow, 2),
                ('=', Some('>'), _) => (Tok::Implies, 2),
                ('>', Some('='), _) => (Tok::Ge, 2),
                ('<', Some('='), _) => (Tok::Le, 2),
                ('/', Some('\\'), _) => (Tok::Meet, 2),
                ('(', ..) => (Tok::LParen, 1),
                (')', ..) => (Tok::RParen, 1),
                ('{', ..) => (Tok::LBrace, 1),
                ('}', ..) => (Tok::RBrace, 1),
                ('[', ..) => (Tok::LBracket, 1),
                (']', ..) => (Tok::RBracket, 1),
                (',', ..) => (Tok::Comma, 1),
                (':', ..) => (Tok::Colon, 1),
                ('.', ..) => (Tok::Dot, 1),
                ('+', ..) => (Tok::Plus, 1),
                ('$', ..) => (Tok::Dollar, 1),
                ('/', ..) => (Tok::Slash, 1),
                ('-', ..) => (Tok::Minus, 1),
                ('=', ..) => (Tok::Eq, 1),
                ('>', ..) => (Tok::Gt, 1),
                ('<', ..) => (Tok::Lt, 1),
                ('!', ..) => (Tok::Not, 1),
                ('_', ..) => (Tok::Underscore, 1),
                _ => {
                    return Err(ParseError::new(
                        ParseErrorKind::Syntax,
                        line,
                        col,
                        format!("unexpected character `{c}`"),
                    ))
                }
            }
        };
        out.push(Token { tok, line, col: start_col });
        i += len;
        col += len;
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn prefix_and_decimal_are_distinguished() {
        assert_eq!(
            toks("b.0 0.5"),
            vec![Tok::Ident("b".into()), Tok::Dot, Tok::Int("0".into()), Tok::Decimal("0.5".into()), Tok::Eof]
        );
    }

    #[test]
    fn arrows_and_sums() {
        assert_eq!(
            toks("x -a-> mu (+) 1/2 -/b->"),
            vec![
                Tok::Ident("x".into()),
                Tok::Minus,
                Tok::Ident("a".into()),
                Tok::Arrow,
                Tok::Ident("mu".into()),
                Tok::OPlus,
                Tok::Int("1".into()),
                Tok::Slash,
                Tok::Int("2".into()),
                Tok::NegArrow,
                Tok::Ident("b".into()),
                Tok::Arrow,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn formula_tokens() {
        assert_eq!(
            toks("<a>_c [tt]_1/2 /\\ !tt"),
            vec![
                Tok::Lt,
                Tok::Ident("a".into()),
                Tok::Gt,
                Tok::Underscore,
                Tok::Ident("c".into()),
                Tok::LBracket,
                Tok::Ident("tt".into()),
                Tok::RBracket,
                Tok::Underscore,
                Tok::Int("1".into()),
                Tok::Slash,
                Tok::Int("2".into()),
                Tok::Meet,
                Tok::Not,
                Tok::Ident("tt".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_and_comments() {
        let t = tokenize("# note\n  op").unwrap();
        assert_eq!((t[0].line, t[0].col), (2, 3));
        let err = tokenize("a ~ b").unwrap_err();
        assert_eq!((err.line, err.col), (1, 3));
    }
}
