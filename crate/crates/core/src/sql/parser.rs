//! Tokenizer and recursive-descent parser for the SQL subset.

use std::fmt;

use crate::value::Value;

use super::ast::*;
use super::SqlError;

/// Syntax error at a byte offset, with the set of tokens that would have
/// been accepted there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "at byte {}: expected {}, found {}",
            self.offset,
            self.expected.join(" | "),
            self.found
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    /// Bare word; keywords are bare words compared case-insensitively.
    Word(String),
    /// `"x"` or `` `x` `` or `[x]`.
    Quoted(String),
    Str(String),
    Int(i64),
    Float(f64),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Quoted(w) => write!(f, "identifier \"{w}\""),
            Tok::Str(s) => write!(f, "string '{s}'"),
            Tok::Int(i) => write!(f, "number {i}"),
            Tok::Float(x) => write!(f, "number {x}"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const SYMBOLS: &[&str] = &[
    "<=", ">=", "<>", "!=", "==", "||", "=", "<", ">", ",", "(", ")", "*", ".", ";", "+", "-", "/", "%",
];

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, SqlError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("--") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        match c {
            b'\'' => {
                let (s, end) = read_quoted(src, i, '\'')?;
                out.push((Tok::Str(s), start));
                i = end;
            }
            b'"' => {
                let (s, end) = read_quoted(src, i, '"')?;
                out.push((Tok::Quoted(s), start));
                i = end;
            }
            b'`' => {
                let (s, end) = read_quoted(src, i, '`')?;
                out.push((Tok::Quoted(s), start));
                i = end;
            }
            b'[' => {
                let close = src[i + 1..]
                    .find(']')
                    .ok_or_else(|| parse_err(start, &["`]`"], "end of input".into()))?;
                out.push((Tok::Quoted(src[i + 1..i + 1 + close].to_string()), start));
                i += close + 2;
            }
            b'0'..=b'9' => {
                let (tok, end) = read_number(src, i)?;
                out.push((tok, start));
                i = end;
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let (tok, end) = read_number(src, i)?;
                out.push((tok, start));
                i = end;
            }
            _ if c.is_ascii_alphabetic() || c == b'_' || c >= 0x80 => {
                let mut end = i;
                for (off, ch) in src[i..].char_indices() {
                    if ch.is_alphanumeric() || ch == '_' || ch == '$' {
                        end = i + off + ch.len_utf8();
                    } else {
                        break;
                    }
                }
                if end == i {
                    let ch = src[i..].chars().next().unwrap();
                    return Err(parse_err(i, &["a token"], format!("`{ch}`")));
                }
                out.push((Tok::Word(src[i..end].to_string()), start));
                i = end;
            }
            _ => {
                let sym = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)).ok_or_else(|| {
                    let ch = src[i..].chars().next().unwrap();
                    parse_err(i, &["a token"], format!("`{ch}`"))
                })?;
                out.push((Tok::Sym(sym), start));
                i += sym.len();
            }
        }
    }
    out.push((Tok::Eof, src.len()));
    Ok(out)
}

fn read_quoted(src: &str, start: usize, quote: char) -> Result<(String, usize), SqlError> {
    let mut s = String::new();
    let mut iter = src[start + 1..].char_indices().peekable();
    while let Some((off, ch)) = iter.next() {
        if ch == quote {
            if iter.peek().is_some_and(|&(_, n)| n == quote) {
                s.push(quote);
                iter.next();
            } else {
                return Ok((s, start + 1 + off + 1));
            }
        } else {
            s.push(ch);
        }
    }
    Err(parse_err(
        src.len(),
        &[&format!("closing {quote}")],
        "end of input".into(),
    ))
}

fn read_number(src: &str, start: usize) -> Result<(Tok, usize), SqlError> {
    let bytes = src.as_bytes();
    let mut i = start;
    let mut is_float = false;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        is_float = true;
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            is_float = true;
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    let text = &src[start..i];
    let tok = if is_float {
        Tok::Float(text.parse().map_err(|_| parse_err(start, &["a number"], text.into()))?)
    } else {
        match text.parse::<i64>() {
            Ok(v) => Tok::Int(v),
            Err(_) => Tok::Float(text.parse().map_err(|_| parse_err(start, &["a number"], text.into()))?),
        }
    };
    Ok((tok, i))
}

fn parse_err(offset: usize, expected: &[&str], found: String) -> SqlError {
    SqlError::Parse(ParseError {
        offset,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found,
    })
}

/// Parses one `SELECT` statement (an optional trailing `;` is allowed).
pub fn parse_sql(text: &str) -> Result<Query, SqlError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    if p.peek_word("WITH") {
        return Err(p.unsupported("common table expressions (WITH)"));
    }
    let q = p.query()?;
    p.eat_sym(";");
    if !p.at(&Tok::Eof) {
        for (kw, what) in [
            ("UNION", "compound queries (UNION)"),
            ("INTERSECT", "compound queries (INTERSECT)"),
            ("EXCEPT", "compound queries (EXCEPT)"),
            ("HAVING", "HAVING"),
            ("OFFSET", "OFFSET"),
        ] {
            if p.peek_word(kw) {
                return Err(p.unsupported(what));
            }
        }
        return Err(p.error(&["end of input"]));
    }
    Ok(q)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].0.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> SqlError {
        parse_err(self.offset(), expected, self.peek().to_string())
    }

    fn unsupported(&self, construct: &str) -> SqlError {
        SqlError::Unsupported {
            offset: self.offset(),
            construct: construct.to_string(),
        }
    }

    fn peek_word(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn peek_word_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.peek_word(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            Err(self.error(&[kw]))
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SqlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{s}`")]))
        }
    }

    fn identifier(&mut self) -> Result<String, SqlError> {
        match self.peek().clone() {
            Tok::Quoted(s) => {
                self.advance();
                Ok(s)
            }
            Tok::Word(w) if !is_keyword(&w) => {
                self.advance();
                Ok(w)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn is_identifier_start(&self) -> bool {
        match self.peek() {
            Tok::Quoted(_) => true,
            Tok::Word(w) => !is_keyword(w),
            _ => false,
        }
    }

    fn query(&mut self) -> Result<Query, SqlError> {
        self.expect_word("SELECT")?;
        let distinct = self.eat_word("DISTINCT");
        if !distinct {
            self.eat_word("ALL");
        }
        let mut select = vec![self.select_item()?];
        while self.eat_sym(",") {
            select.push(self.select_item()?);
        }
        self.expect_word("FROM")?;
        if matches!(self.peek(), Tok::Sym("(")) {
            return Err(self.unsupported("subqueries"));
        }
        let from = self.table_ref()?;
        let mut joins = Vec::new();
        loop {
            if self.at(&Tok::Sym(",")) {
                return Err(self.unsupported("comma joins"));
            }
            for kw in ["LEFT", "RIGHT", "FULL", "OUTER", "CROSS", "NATURAL"] {
                if self.peek_word(kw) {
                    return Err(self.unsupported(&format!("{kw} joins")));
                }
            }
            let inner = self.eat_word("INNER");
            if !self.eat_word("JOIN") {
                if inner {
                    return Err(self.error(&["JOIN"]));
                }
                break;
            }
            let table = self.table_ref()?;
            if self.peek_word("USING") {
                return Err(self.unsupported("JOIN ... USING"));
            }
            self.expect_word("ON")?;
            let left = self.column_ref()?;
            if !(self.eat_sym("=") || self.eat_sym("==")) {
                return Err(self.error(&["`=`"]));
            }
            let right = self.column_ref()?;
            if self.peek_word("AND") || self.peek_word("OR") {
                return Err(self.unsupported("compound join conditions"));
            }
            joins.push(Join { table, left, right });
        }
        let where_clause = if self.eat_word("WHERE") {
            Some(self.expr()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.eat_word("GROUP") {
            self.expect_word("BY")?;
            group_by.push(self.column_ref()?);
            while self.eat_sym(",") {
                group_by.push(self.column_ref()?);
            }
        }
        if self.peek_word("HAVING") {
            return Err(self.unsupported("HAVING"));
        }
        let mut order_by = Vec::new();
        if self.eat_word("ORDER") {
            self.expect_word("BY")?;
            loop {
                let key = self.scalar()?;
                let desc = if self.eat_word("DESC") {
                    true
                } else {
                    self.eat_word("ASC");
                    false
                };
                if self.peek_word("NULLS") {
                    return Err(self.unsupported("NULLS FIRST/LAST"));
                }
                order_by.push(OrderItem { key, desc });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let limit = if self.eat_word("LIMIT") {
            match self.advance() {
                Tok::Int(n) if n >= 0 => {
                    if self.at(&Tok::Sym(",")) || self.peek_word("OFFSET") {
                        return Err(self.unsupported("OFFSET"));
                    }
                    Some(n as u64)
                }
                _ => {
                    self.pos -= 1;
                    return Err(self.error(&["non-negative integer"]));
                }
            }
        } else {
            None
        };
        Ok(Query {
            distinct,
            select,
            from,
            joins,
            where_clause,
            group_by,
            order_by,
            limit,
        })
    }

    fn table_ref(&mut self) -> Result<TableRef, SqlError> {
        let name = self.identifier()?;
        let alias = if self.eat_word("AS") || self.is_identifier_start() {
            Some(self.identifier()?)
        } else {
            None
        };
        Ok(TableRef { name, alias })
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        if self.eat_sym("*") {
            return Ok(SelectItem::Wildcard);
        }
        if self.is_identifier_start()
            && matches!(self.peek_at(1), Tok::Sym("."))
            && matches!(self.peek_at(2), Tok::Sym("*"))
        {
            let t = self.identifier()?;
            self.advance();
            self.advance();
            return Ok(SelectItem::QualifiedWildcard(t));
        }
        let expr = self.scalar()?;
        self.reject_arithmetic()?;
        let alias = if self.eat_word("AS") || self.is_identifier_start() {
            Some(self.identifier()?)
        } else {
            None
        };
        Ok(SelectItem::Expr { expr, alias })
    }

    fn reject_arithmetic(&self) -> Result<(), SqlError> {
        if matches!(self.peek(), Tok::Sym("+" | "-" | "*" | "/" | "%" | "||")) {
            return Err(self.unsupported("arithmetic expressions"));
        }
        Ok(())
    }

    /// Column reference or aggregate call.
    fn scalar(&mut self) -> Result<Scalar, SqlError> {
        if let Tok::Word(w) = self.peek().clone() {
            if matches!(self.peek_at(1), Tok::Sym("(")) {
                return self.function_call(&w).map(Scalar::Aggregate);
            }
            if w.eq_ignore_ascii_case("CASE") {
                return Err(self.unsupported("CASE expressions"));
            }
        }
        if matches!(self.peek(), Tok::Sym("(")) {
            if self.peek_word_at(1, "SELECT") {
                return Err(self.unsupported("subqueries"));
            }
            return Err(self.unsupported("parenthesized expressions"));
        }
        if matches!(self.peek(), Tok::Int(_) | Tok::Float(_) | Tok::Str(_)) {
            return Err(self.unsupported("constant select items"));
        }
        match self.column_ref() {
            Ok(c) => Ok(Scalar::Column(c)),
            Err(_) => Err(self.error(&["column", "aggregate"])),
        }
    }

    fn function_call(&mut self, name: &str) -> Result<Aggregate, SqlError> {
        let Some(func) = AggFunc::from_name(name) else {
            if name.eq_ignore_ascii_case("CAST") {
                return Err(self.unsupported("CAST"));
            }
            return Err(self.unsupported(&format!("function {}", name.to_ascii_uppercase())));
        };
        self.advance();
        self.expect_sym("(")?;
        let distinct = self.eat_word("DISTINCT");
        let arg = if self.eat_sym("*") {
            if func != AggFunc::Count || distinct {
                self.pos -= 1;
                return Err(self.error(&["column"]));
            }
            None
        } else {
            if matches!(self.peek(), Tok::Sym("(")) || self.peek_word("SELECT") {
                return Err(self.unsupported("subqueries"));
            }
            let c = self.column_ref()?;
            self.reject_arithmetic()?;
            Some(c)
        };
        self.expect_sym(")")?;
        if self.peek_word("OVER") {
            return Err(self.unsupported("window functions"));
        }
        Ok(Aggregate { func, distinct, arg })
    }

    fn column_ref(&mut self) -> Result<ColumnRef, SqlError> {
        let first = self.identifier()?;
        if self.eat_sym(".") {
            let col = self.identifier()?;
            Ok(ColumnRef::qualified(first, col))
        } else {
            Ok(ColumnRef::bare(first))
        }
    }

    fn expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.and_expr()?;
        while self.eat_word("OR") {
            let right = self.and_expr()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.not_expr()?;
        while self.eat_word("AND") {
            let right = self.not_expr()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, SqlError> {
        if self.eat_word("NOT") {
            if self.peek_word("EXISTS") {
                return Err(self.unsupported("subqueries"));
            }
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        if self.peek_word("EXISTS") {
            return Err(self.unsupported("subqueries"));
        }
        if matches!(self.peek(), Tok::Sym("(")) {
            if self.peek_word_at(1, "SELECT") {
                return Err(self.unsupported("subqueries"));
            }
            self.advance();
            let e = self.expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        self.predicate()
    }

    fn operand(&mut self) -> Result<Operand, SqlError> {
        let negative = matches!(self.peek(), Tok::Sym("-")) && matches!(self.peek_at(1), Tok::Int(_) | Tok::Float(_));
        if negative {
            self.advance();
        }
        let tok = self.peek().clone();
        let lit = match tok {
            Tok::Int(i) => Some(Value::Int(if negative { -i } else { i })),
            Tok::Float(x) => Some(Value::Float(if negative { -x } else { x })),
            Tok::Str(ref s) => Some(Value::Text(s.clone())),
            Tok::Word(ref w) if w.eq_ignore_ascii_case("NULL") => Some(Value::Null),
            Tok::Word(ref w) if w.eq_ignore_ascii_case("TRUE") => Some(Value::Bool(true)),
            Tok::Word(ref w) if w.eq_ignore_ascii_case("FALSE") => Some(Value::Bool(false)),
            _ => None,
        };
        if let Some(v) = lit {
            self.advance();
            self.reject_arithmetic()?;
            return Ok(Operand::Literal(v));
        }
        match tok {
            Tok::Sym("(") if self.peek_word_at(1, "SELECT") => Err(self.unsupported("subqueries")),
            Tok::Word(ref w) if matches!(self.peek_at(1), Tok::Sym("(")) => {
                if AggFunc::from_name(w).is_some() {
                    Err(self.unsupported("aggregates outside the select list"))
                } else if w.eq_ignore_ascii_case("CAST") {
                    Err(self.unsupported("CAST"))
                } else {
                    Err(self.unsupported(&format!("function {}", w.to_ascii_uppercase())))
                }
            }
            Tok::Word(ref w) if w.eq_ignore_ascii_case("CASE") => Err(self.unsupported("CASE expressions")),
            _ if self.is_identifier_start() => {
                let c = self.column_ref()?;
                self.reject_arithmetic()?;
                Ok(Operand::Column(c))
            }
            _ => Err(self.error(&["column", "literal"])),
        }
    }

    fn literal(&mut self) -> Result<Value, SqlError> {
        match self.operand()? {
            Operand::Literal(v) => Ok(v),
            Operand::Column(_) => Err(parse_err(self.offset(), &["literal"], "column".into())),
        }
    }

    fn predicate(&mut self) -> Result<Expr, SqlError> {
        let expr = self.operand()?;
        if self.eat_word("IS") {
            let negated = self.eat_word("NOT");
            self.expect_word("NULL")?;
            return Ok(Expr::IsNull { expr, negated });
        }
        let negated = self.eat_word("NOT");
        if self.eat_word("LIKE") {
            let pattern = match self.advance() {
                Tok::Str(s) => s,
                _ => {
                    self.pos -= 1;
                    return Err(self.error(&["string pattern"]));
                }
            };
            if self.peek_word("ESCAPE") {
                return Err(self.unsupported("LIKE ... ESCAPE"));
            }
            return Ok(Expr::Like { expr, pattern, negated });
        }
        if self.eat_word("IN") {
            self.expect_sym("(")?;
            if self.peek_word("SELECT") {
                return Err(self.unsupported("subqueries"));
            }
            let mut list = vec![self.literal()?];
            while self.eat_sym(",") {
                list.push(self.literal()?);
            }
            self.expect_sym(")")?;
            return Ok(Expr::InList { expr, list, negated });
        }
        if self.eat_word("BETWEEN") {
            let low = self.operand()?;
            self.expect_word("AND")?;
            let high = self.operand()?;
            return Ok(Expr::Between {
                expr,
                low,
                high,
                negated,
            });
        }
        if negated {
            return Err(self.error(&["LIKE", "IN", "BETWEEN"]));
        }
        if self.peek_word("GLOB") || self.peek_word("REGEXP") || self.peek_word("MATCH") {
            return Err(self.unsupported("pattern operators other than LIKE"));
        }
        let op = match self.peek() {
            Tok::Sym(s) => match s.parse::<CmpOp>() {
                Ok(op) => op,
                Err(_) => return Err(self.error(&["comparison operator"])),
            },
            _ => return Err(self.error(&["comparison operator", "IS", "LIKE", "IN", "BETWEEN"])),
        };
        self.advance();
        let right = self.operand()?;
        Ok(Expr::Compare { left: expr, op, right })
    }
}
