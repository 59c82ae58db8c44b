use super::{HornClause, Literal, RuleError, RuleSet};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Turnstile,
    Comma,
    Dot,
}

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> RuleError {
    RuleError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, RuleError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut column) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, column);
        match c {
            '\n' => {
                i += 1;
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                column += 1;
            }
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            ',' | '.' => {
                let token = if c == ',' { Token::Comma } else { Token::Dot };
                tokens.push(Spanned {
                    token,
                    line,
                    column,
                });
                i += 1;
                column += 1;
            }
            ':' => {
                if chars.get(i + 1) != Some(&'-') {
                    return Err(syntax(line, column, "expected `:-`"));
                }
                tokens.push(Spanned {
                    token: Token::Turnstile,
                    line,
                    column,
                });
                i += 2;
                column += 2;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    ident.push(chars[i]);
                    i += 1;
                    column += 1;
                }
                if super::rewrite::has_reserved_suffix(&ident) {
                    return Err(syntax(
                        start_line,
                        start_col,
                        format!("identifier `{ident}` uses the reserved `__dN` suffix"),
                    ));
                }
                tokens.push(Spanned {
                    token: Token::Ident(ident),
                    line: start_line,
                    column: start_col,
                });
            }
            other => return Err(syntax(line, column, format!("unexpected character `{other}`"))),
        }
    }
    Ok(tokens)
}

/// Parses a rule file into a validated [`RuleSet`], preserving clause order.
///
/// Grammar: `clause := IDENT ":-" literal ("," literal)* "."`,
/// `literal := ["not" WS] IDENT`; `%` starts a line comment.
pub fn parse_rules(text: &str) -> Result<RuleSet, RuleError> {
    let tokens = tokenize(text)?;
    let (end_line, end_col) = text
        .lines()
        .enumerate()
        .last()
        .map(|(i, l)| (i + 1, l.chars().count() + 1))
        .unwrap_or((1, 1));
    let mut pos = 0;
    let mut clauses = Vec::new();

    let eof = || syntax(end_line, end_col, "unexpected end of input");

    while pos < tokens.len() {
        let head_tok = &tokens[pos];
        let head = match &head_tok.token {
            Token::Ident(s) => s.clone(),
            _ => return Err(syntax(head_tok.line, head_tok.column, "expected a clause head")),
        };
        pos += 1;
        match tokens.get(pos).map(|t| &t.token) {
            Some(Token::Turnstile) => pos += 1,
            Some(Token::Dot) => return Err(RuleError::EmptyBody { head }),
            Some(_) => {
                let t = &tokens[pos];
                return Err(syntax(t.line, t.column, "expected `:-`"));
            }
            None => return Err(eof()),
        }
        if matches!(tokens.get(pos).map(|t| &t.token), Some(Token::Dot)) {
            return Err(RuleError::EmptyBody { head });
        }

        let mut body = Vec::new();
        loop {
            let t = tokens.get(pos).ok_or_else(eof)?;
            let first = match &t.token {
                Token::Ident(s) => s.clone(),
                _ => return Err(syntax(t.line, t.column, "expected an antecedent")),
            };
            pos += 1;
            let literal = match tokens.get(pos).map(|t| &t.token) {
                Some(Token::Ident(s)) if first == "not" => {
                    pos += 1;
                    Literal::negative(s.clone())
                }
                _ => Literal::positive(first),
            };
            body.push(literal);
            let t = tokens.get(pos).ok_or_else(eof)?;
            pos += 1;
            match t.token {
                Token::Comma => continue,
                Token::Dot => break,
                _ => return Err(syntax(t.line, t.column, "expected `,` or `.`")),
            }
        }
        clauses.push(HornClause::new(head, body));
    }
    RuleSet::from_clauses(clauses)
}
