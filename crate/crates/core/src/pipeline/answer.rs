use thiserror::Error;

use crate::table::Table;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot parse answer list at char {offset}: {message} (in {text:?})")]
pub struct AnswerParseError {
    pub text: String,
    pub offset: usize,
    pub message: String,
}

/// Parses the first balanced `[...]` span of `text` as a list of values.
///
/// Items are double- or single-quoted strings with backslash escapes,
/// integers, decimals (optional exponent), `True`/`False`, `None`/`null`,
/// or nested lists, which are flattened in order. Items are separated by
/// commas; one trailing comma is allowed.
pub fn parse_answer_list(text: &str) -> Result<Vec<Value>, AnswerParseError> {
    let chars: Vec<char> = text.chars().collect();
    let err = |offset: usize, message: &str| AnswerParseError {
        text: text.to_string(),
        offset,
        message: message.to_string(),
    };
    let start = chars
        .iter()
        .position(|&c| c == '[')
        .ok_or_else(|| err(0, "no '[' found"))?;
    let end = matching_bracket(&chars, start).ok_or_else(|| err(start, "unbalanced brackets"))?;
    let mut p = ListParser {
        chars: &chars[..=end],
        pos: start,
    };
    let mut out = Vec::new();
    p.list(&mut out).map_err(|(o, m)| err(o, &m))?;
    Ok(out)
}

fn matching_bracket(chars: &[char], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut i = start;
    while i < chars.len() {
        let c = chars[i];
        match quote {
            Some(q) => {
                if c == '\\' {
                    i += 1;
                } else if c == q {
                    quote = None;
                }
            }
            None => match c {
                '"' | '\'' => quote = Some(c),
                '[' => depth += 1,
                ']' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i);
                    }
                }
                _ => {}
            },
        }
        i += 1;
    }
    None
}

struct ListParser<'a> {
    chars: &'a [char],
    pos: usize,
}

type PResult<T> = Result<T, (usize, String)>;

impl ListParser<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn fail<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err((self.pos, msg.into()))
    }

    fn list(&mut self, out: &mut Vec<Value>) -> PResult<()> {
        debug_assert_eq!(self.peek(), Some('['));
        self.pos += 1;
        self.skip_ws();
        if self.peek() == Some(']') {
            self.pos += 1;
            return Ok(());
        }
        loop {
            self.skip_ws();
            if self.peek() == Some(']') {
                // trailing comma
                self.pos += 1;
                return Ok(());
            }
            self.item(out)?;
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(']') => {
                    self.pos += 1;
                    return Ok(());
                }
                _ => return self.fail("expected ',' or ']'"),
            }
        }
    }

    fn item(&mut self, out: &mut Vec<Value>) -> PResult<()> {
        match self.peek() {
            Some('[') => self.list(out),
            Some(q @ ('"' | '\'')) => {
                let s = self.string(q)?;
                out.push(Value::Text(s));
                Ok(())
            }
            Some(c) if c == '-' || c == '+' || c == '.' || c.is_ascii_digit() => {
                let v = self.number()?;
                out.push(v);
                Ok(())
            }
            Some(c) if c.is_alphabetic() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                let word: String = self.chars[start..self.pos].iter().collect();
                out.push(match word.as_str() {
                    "True" | "true" => Value::Bool(true),
                    "False" | "false" => Value::Bool(false),
                    "None" | "null" => Value::Null,
                    _ => return Err((start, format!("unquoted word {word:?}"))),
                });
                Ok(())
            }
            _ => self.fail("expected a value"),
        }
    }

    fn string(&mut self, quote: char) -> PResult<String> {
        self.pos += 1;
        let mut s = String::new();
        loop {
            match self.peek() {
                None => return self.fail("unterminated string"),
                Some(c) if c == quote => {
                    self.pos += 1;
                    return Ok(s);
                }
                Some('\\') => {
                    self.pos += 1;
                    let c = match self.peek() {
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('r') => '\r',
                        Some(c) => c,
                        None => return self.fail("unterminated escape"),
                    };
                    s.push(c);
                    self.pos += 1;
                }
                Some(c) => {
                    s.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn number(&mut self) -> PResult<Value> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E' | '_'))
        {
            self.pos += 1;
        }
        let raw: String = self.chars[start..self.pos].iter().filter(|&&c| c != '_').collect();
        let digits = raw.strip_prefix('+').unwrap_or(&raw);
        if let Ok(i) = digits.parse::<i64>() {
            return Ok(Value::Int(i));
        }
        match digits.parse::<f64>() {
            Ok(f) if f.is_finite() && digits.chars().any(|c| c.is_ascii_digit()) => Ok(Value::Float(f)),
            _ => Err((start, format!("bad number {raw:?}"))),
        }
    }
}

/// Flattens a result table into an answer list, row by row and left to
/// right within a row. A one-column table yields its values and a one-row
/// table its cells.
pub fn table_to_values(t: &Table) -> Vec<Value> {
    t.rows().iter().flatten().cloned().collect()
}
