use serde::{Deserialize, Serialize};

use super::label::{is_ident_part, is_ident_start, LabelRules, SemanticLabel, JAVA_OPERATORS, JAVA_SEPARATORS};
use crate::error::{Error, Result};

/// One lexical token with its exact source span.
///
/// Lines and columns are 1-based and count characters, not bytes. `col_end`
/// is inclusive and refers to `end_line`, which differs from `line` only for
/// block comments and text blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceToken {
    pub index: usize,
    pub text: String,
    pub line: usize,
    pub col_start: usize,
    pub end_line: usize,
    pub col_end: usize,
    pub byte_start: usize,
    pub byte_end: usize,
    pub label: SemanticLabel,
}

impl SourceToken {
    /// Character distance from `column` on `line` to this token's span, or
    /// `None` when the token does not touch `line`. Zero means containment.
    pub fn column_distance(&self, line: usize, column: usize) -> Option<usize> {
        if line < self.line || line > self.end_line {
            return None;
        }
        let lo = if line == self.line { self.col_start } else { 1 };
        let hi = if line == self.end_line {
            self.col_end
        } else {
            usize::MAX
        };
        Some(lo.saturating_sub(column).max(column.saturating_sub(hi)))
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn bump_n(&mut self, n: usize) {
        for _ in 0..n {
            self.bump();
        }
    }
}

/// Splits Java-like source into labelled tokens using the default rules.
pub fn tokenize(source: &str) -> Result<Vec<SourceToken>> {
    tokenize_with(source, &LabelRules::default())
}

pub fn tokenize_with(source: &str, rules: &LabelRules) -> Result<Vec<SourceToken>> {
    let mut cur = Cursor {
        src: source,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let (start, line, col) = (cur.pos, cur.line, cur.col);
        let err = |message: &str| Error::Lex {
            line,
            column: col,
            message: message.to_string(),
        };
        let rest = cur.rest();
        if rest.starts_with("//") {
            while cur.peek().is_some_and(|c| c != '\n' && c != '\r') {
                cur.bump();
            }
        } else if let Some(body) = rest.strip_prefix("/*") {
            let Some(close) = body.find("*/") else {
                return Err(err("unterminated block comment"));
            };
            let len = rest[..2 + close + 2].chars().count();
            cur.bump_n(len);
        } else if rest.starts_with("\"\"\"") {
            cur.bump_n(3);
            loop {
                match cur.peek() {
                    None => return Err(err("unterminated text block")),
                    Some('\\') => cur.bump_n(2),
                    Some('"') if cur.rest().starts_with("\"\"\"") => {
                        cur.bump_n(3);
                        break;
                    }
                    Some(_) => {
                        cur.bump();
                    }
                }
            }
        } else if c == '"' || c == '\'' {
            let what = if c == '"' { "string" } else { "character" };
            cur.bump();
            loop {
                match cur.peek() {
                    None | Some('\n') | Some('\r') => return Err(err(&format!("unterminated {what} literal"))),
                    Some('\\') => {
                        cur.bump();
                        if cur.peek().is_some_and(|c| c != '\n' && c != '\r') {
                            cur.bump();
                        }
                    }
                    Some(q) if q == c => {
                        cur.bump();
                        break;
                    }
                    Some(_) => {
                        cur.bump();
                    }
                }
            }
        } else if c.is_ascii_digit() || (c == '.' && cur.peek_nth(1).is_some_and(|d| d.is_ascii_digit())) {
            lex_number(&mut cur);
        } else if is_ident_start(c) {
            while cur.peek().is_some_and(is_ident_part) {
                cur.bump();
            }
        } else if let Some(sym) = JAVA_OPERATORS
            .iter()
            .chain(JAVA_SEPARATORS)
            .filter(|s| rest.starts_with(**s))
            .max_by_key(|s| s.len())
        {
            cur.bump_n(sym.chars().count());
        } else {
            cur.bump();
        }

        let text = &source[start..cur.pos];
        let (end_line, col_end) = end_position(line, col, text);
        tokens.push(SourceToken {
            index: tokens.len(),
            text: text.to_string(),
            line,
            col_start: col,
            end_line,
            col_end,
            byte_start: start,
            byte_end: cur.pos,
            label: rules.classify(text),
        });
    }
    Ok(tokens)
}

fn lex_number(cur: &mut Cursor<'_>) {
    let rest = cur.rest();
    let hex = rest.starts_with("0x") || rest.starts_with("0X");
    let mut prev = '\0';
    while let Some(c) = cur.peek() {
        let exponent = if hex {
            matches!(prev, 'p' | 'P')
        } else {
            matches!(prev, 'e' | 'E')
        };
        if c.is_ascii_alphanumeric() || c == '_' || c == '.' || (exponent && (c == '+' || c == '-')) {
            prev = c;
            cur.bump();
        } else {
            break;
        }
    }
}

fn end_position(line: usize, col: usize, text: &str) -> (usize, usize) {
    let mut end_line = line;
    let mut end_col = col;
    let mut first = true;
    for c in text.chars() {
        if first {
            first = false;
            continue;
        }
        if c == '\n' {
            end_line += 1;
            end_col = 0;
        } else {
            end_col += 1;
        }
    }
    (end_line, end_col)
}

/// Re-applies label rules to an existing token stream.
pub fn label_tokens(mut tokens: Vec<SourceToken>, rules: &LabelRules) -> Vec<SourceToken> {
    for token in &mut tokens {
        token.label = rules.classify(&token.text);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(tokens: &[SourceToken]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn simple_condition() {
        let tokens = tokenize("if (x == 42)").unwrap();
        assert_eq!(texts(&tokens), ["if", "(", "x", "==", "42", ")"]);
        let spans: Vec<_> = tokens.iter().map(|t| (t.line, t.col_start, t.col_end)).collect();
        assert_eq!(
            spans,
            [(1, 1, 2), (1, 4, 4), (1, 5, 5), (1, 7, 8), (1, 10, 11), (1, 12, 12)]
        );
        let labels: Vec<_> = tokens.iter().map(|t| t.label).collect();
        use SemanticLabel::*;
        assert_eq!(labels, [Keyword, Separator, Identifier, Operator, Literal, Separator]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").unwrap().is_empty());
        assert!(tokenize("  \n\t ").unwrap().is_empty());
    }

    #[test]
    fn unterminated_string() {
        match tokenize("\"unterminated") {
            Err(Error::Lex { line, column, .. }) => assert_eq!((line, column), (1, 1)),
            other => panic!("expected lex error, got {other:?}"),
        }
        match tokenize("int a;\n  x = 'c") {
            Err(Error::Lex { line, column, .. }) => assert_eq!((line, column), (2, 7)),
            other => panic!("expected lex error, got {other:?}"),
        }
    }

    #[test]
    fn unterminated_block_comment() {
        match tokenize("a /* b\n c") {
            Err(Error::Lex { line, column, .. }) => assert_eq!((line, column), (1, 3)),
            other => panic!("expected lex error, got {other:?}"),
        }
    }

    #[test]
    fn comments_are_single_tokens() {
        let src = "x = 1; // trailing\n/* multi\n line */ y";
        let tokens = tokenize(src).unwrap();
        assert_eq!(
            texts(&tokens),
            ["x", "=", "1", ";", "// trailing", "/* multi\n line */", "y"]
        );
        let block = &tokens[5];
        assert_eq!(
            (block.line, block.col_start, block.end_line, block.col_end),
            (2, 1, 3, 8)
        );
        assert_eq!(block.label, SemanticLabel::Comment);
        assert_eq!(tokens[6].line, 3);
    }

    #[test]
    fn maximal_munch_operators() {
        let tokens = tokenize("a >>>= b->c::d ... e").unwrap();
        assert_eq!(texts(&tokens), ["a", ">>>=", "b", "->", "c", "::", "d", "...", "e"]);
    }

    #[test]
    fn numbers_and_escapes() {
        let tokens = tokenize(r#"1e+5 0x1F 3.5f "a\"b" '\'' .5"#).unwrap();
        assert_eq!(texts(&tokens), ["1e+5", "0x1F", "3.5f", r#""a\"b""#, r"'\''", ".5"]);
        assert!(tokens.iter().all(|t| t.label == SemanticLabel::Literal));
    }

    #[test]
    fn unicode_columns_count_chars() {
        let tokens = tokenize("String é = \"ü\";").unwrap();
        assert_eq!(tokens[1].text, "é");
        assert_eq!((tokens[1].col_start, tokens[1].col_end), (8, 8));
        assert_eq!((tokens[3].col_start, tokens[3].col_end), (12, 14));
        assert_eq!(tokens[4].col_start, 15);
    }

    #[test]
    fn column_distance() {
        let tokens = tokenize("ab   cd").unwrap();
        assert_eq!(tokens[0].column_distance(1, 2), Some(0));
        assert_eq!(tokens[0].column_distance(1, 4), Some(2));
        assert_eq!(tokens[1].column_distance(1, 4), Some(2));
        assert_eq!(tokens[1].column_distance(2, 4), None);
    }
}
