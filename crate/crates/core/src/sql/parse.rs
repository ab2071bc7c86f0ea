//! Recursive-descent parser for the SQL subset.

use super::{FromItem, JoinKind, Select, SelectItem, SqlError, SqlExpr};
use crate::alt::{AggFn, SourceSpan};
use crate::lex::{tokenize, Token, TokenKind};
use crate::syntax::ParseError;
use crate::value::{ArithOp, CmpOp, Value};

/// Words that end an expression or a table reference.
const RESERVED: &[&str] = &[
    "select",
    "from",
    "where",
    "group",
    "having",
    "order",
    "limit",
    "offset",
    "union",
    "except",
    "intersect",
    "into",
    "on",
    "join",
    "left",
    "right",
    "full",
    "inner",
    "outer",
    "cross",
    "natural",
    "lateral",
    "and",
    "or",
    "not",
    "as",
    "by",
    "is",
    "in",
    "exists",
    "distinct",
    "null",
    "true",
    "false",
    "using",
    "window",
    "with",
];

/// Parses one statement of the supported subset.
pub fn parse_sql(text: &str) -> Result<Select, SqlError> {
    let tokens = tokenize(text).map_err(|e| ParseError::message(e.span, e.message))?;
    let mut p = Parser { tokens, pos: 0 };
    if p.peek().is_word("with") {
        return Err(SqlError::unsupported("WITH", p.peek().span));
    }
    let q = p.select()?;
    while p.peek().is_sym(";") {
        p.bump();
    }
    p.reject_clauses()?;
    if p.peek().kind != TokenKind::Eof {
        return Err(p.error(&["end of statement"]));
    }
    Ok(q)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type R<T> = Result<T, SqlError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, k: usize) -> &Token {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn prev_span(&self) -> SourceSpan {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn error(&self, expected: &[&str]) -> SqlError {
        SqlError::Parse(ParseError::new(self.peek().span, expected, self.peek()))
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.peek().is_word(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.peek().is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, kw: &str) -> R<()> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    fn expect_sym(&mut self, s: &str) -> R<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{s}`")]))
        }
    }

    fn is_reserved(t: &Token) -> bool {
        RESERVED.iter().any(|k| t.is_word(k))
    }

    fn name(&mut self, what: &str) -> R<(String, SourceSpan)> {
        let t = self.peek().clone();
        match &t.kind {
            TokenKind::Word(w) if !Self::is_reserved(&t) => {
                self.bump();
                Ok((w.clone(), t.span))
            }
            TokenKind::Quoted(w) => {
                self.bump();
                Ok((w.clone(), t.span))
            }
            _ => Err(self.error(&[what])),
        }
    }

    /// Any word, reserved or not; used where no keyword can follow.
    fn any_name(&mut self, what: &str) -> R<(String, SourceSpan)> {
        let t = self.peek().clone();
        match &t.kind {
            TokenKind::Word(w) | TokenKind::Quoted(w) => {
                self.bump();
                Ok((w.clone(), t.span))
            }
            _ => Err(self.error(&[what])),
        }
    }

    /// Optional `[AS] alias`.
    fn alias(&mut self) -> R<Option<String>> {
        if self.eat_word("as") {
            return Ok(Some(self.any_name("alias")?.0));
        }
        let t = self.peek();
        let plain = matches!(t.kind, TokenKind::Word(_)) && !Self::is_reserved(t);
        if plain || matches!(t.kind, TokenKind::Quoted(_)) {
            return Ok(Some(self.name("alias")?.0));
        }
        Ok(None)
    }

    fn reject_clauses(&self) -> R<()> {
        let t = self.peek();
        for (kw, what) in [
            ("order", "ORDER BY"),
            ("limit", "LIMIT"),
            ("offset", "OFFSET"),
            ("union", "UNION"),
            ("except", "EXCEPT"),
            ("intersect", "INTERSECT"),
            ("window", "WINDOW"),
        ] {
            if t.is_word(kw) {
                return Err(SqlError::unsupported(what, t.span));
            }
        }
        Ok(())
    }

    fn select(&mut self) -> R<Select> {
        let start = self.peek().span;
        self.expect_word("select")?;
        let distinct = self.eat_word("distinct");
        if self.peek().is_word("all") {
            self.bump();
        }
        let mut items = vec![self.select_item()?];
        while self.eat_sym(",") {
            items.push(self.select_item()?);
        }
        let into = if self.eat_word("into") {
            Some(self.name("relation name")?.0)
        } else {
            None
        };
        let mut from = Vec::new();
        if self.eat_word("from") {
            from.push(self.from_item()?);
            while self.eat_sym(",") {
                from.push(self.from_item()?);
            }
        }
        let where_clause = if self.eat_word("where") {
            Some(self.expr()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.eat_word("group") {
            self.expect_word("by")?;
            group_by.push(self.expr()?);
            while self.eat_sym(",") {
                group_by.push(self.expr()?);
            }
        }
        let having = if self.eat_word("having") {
            Some(self.expr()?)
        } else {
            None
        };
        self.reject_clauses()?;
        Ok(Select {
            distinct,
            items,
            into,
            from,
            where_clause,
            group_by,
            having,
            span: start.to(self.prev_span()),
        })
    }

    fn select_item(&mut self) -> R<SelectItem> {
        if self.peek().is_sym("*") {
            return Ok(SelectItem::Star(self.bump().span));
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    #[allow(clippy::wrong_self_convention)]
    fn from_item(&mut self) -> R<FromItem> {
        let mut left = self.table_ref()?;
        loop {
            let t = self.peek().clone();
            let kind =
                if t.is_word("join") || (t.is_word("inner") && self.peek_at(1).is_word("join")) {
                    self.eat_word("inner");
                    JoinKind::Inner
                } else if t.is_word("left") {
                    self.bump();
                    self.eat_word("outer");
                    JoinKind::Left
                } else if t.is_word("full") {
                    self.bump();
                    self.eat_word("outer");
                    JoinKind::Full
                } else if t.is_word("right") {
                    return Err(SqlError::unsupported("RIGHT JOIN", t.span));
                } else if t.is_word("cross") || t.is_word("natural") {
                    return Err(SqlError::unsupported(
                        format!("{} JOIN", t.describe().trim_matches('`').to_uppercase()),
                        t.span,
                    ));
                } else {
                    break;
                };
            self.expect_word("join")?;
            let right = self.table_ref()?;
            if self.peek().is_word("using") {
                return Err(SqlError::unsupported("JOIN ... USING", self.peek().span));
            }
            self.expect_word("on")?;
            let on = self.expr()?;
            left = FromItem::Join {
                kind,
                left: Box::new(left),
                right: Box::new(right),
                on,
            };
        }
        Ok(left)
    }

    fn table_ref(&mut self) -> R<FromItem> {
        let start = self.peek().span;
        let lateral = self.eat_word("lateral");
        if self.peek().is_sym("(") {
            if !self.peek_at(1).is_word("select") {
                return Err(SqlError::unsupported(
                    "parenthesized join",
                    self.peek().span,
                ));
            }
            self.bump();
            let query = self.select()?;
            self.expect_sym(")")?;
            let alias = self.alias()?.ok_or_else(|| {
                SqlError::invalid("a derived table needs an alias", start.to(self.prev_span()))
            })?;
            return Ok(FromItem::Subquery {
                query: Box::new(query),
                alias,
                lateral,
                span: start.to(self.prev_span()),
            });
        }
        if lateral {
            return Err(self.error(&["`(`"]));
        }
        let (name, span) = self.name("table name")?;
        let alias = self.alias()?;
        Ok(FromItem::Table {
            name,
            alias,
            span: span.to(self.prev_span()),
        })
    }

    fn expr(&mut self) -> R<SqlExpr> {
        let first = self.and_expr()?;
        if !self.peek().is_word("or") {
            return Ok(first);
        }
        let mut xs = vec![first];
        while self.eat_word("or") {
            xs.push(self.and_expr()?);
        }
        Ok(SqlExpr::Or(xs))
    }

    fn and_expr(&mut self) -> R<SqlExpr> {
        let first = self.not_expr()?;
        if !self.peek().is_word("and") {
            return Ok(first);
        }
        let mut xs = vec![first];
        while self.eat_word("and") {
            xs.push(self.not_expr()?);
        }
        Ok(SqlExpr::And(xs))
    }

    fn not_expr(&mut self) -> R<SqlExpr> {
        if self.eat_word("not") {
            return Ok(SqlExpr::Not(Box::new(self.not_expr()?)));
        }
        self.predicate()
    }

    fn predicate(&mut self) -> R<SqlExpr> {
        if self.peek().is_word("exists") {
            self.bump();
            return Ok(SqlExpr::Exists(Box::new(self.parenthesized_select()?)));
        }
        let left = self.additive()?;
        let t = self.peek().clone();
        if let TokenKind::Sym(s) = t.kind {
            let op = match s {
                "!=" => Some(CmpOp::Ne),
                s => CmpOp::from_symbol(s),
            };
            if let Some(op) = op {
                self.bump();
                if self.peek().is_word("any")
                    || self.peek().is_word("all")
                    || self.peek().is_word("some")
                {
                    return Err(SqlError::unsupported(
                        "quantified comparison",
                        self.peek().span,
                    ));
                }
                let right = self.additive()?;
                return Ok(SqlExpr::Cmp {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                });
            }
        }
        if self.eat_word("is") {
            let negated = self.eat_word("not");
            self.expect_word("null")?;
            return Ok(SqlExpr::IsNull {
                expr: Box::new(left),
                negated,
            });
        }
        let negated = self.peek().is_word("not") && self.peek_at(1).is_word("in");
        if negated {
            self.bump();
        }
        if self.eat_word("in") {
            if !self.peek_at(1).is_word("select") {
                return Err(SqlError::unsupported(
                    "IN with a value list",
                    self.peek().span,
                ));
            }
            let query = self.parenthesized_select()?;
            return Ok(SqlExpr::In {
                expr: Box::new(left),
                query: Box::new(query),
                negated,
            });
        }
        for (kw, what) in [("between", "BETWEEN"), ("like", "LIKE")] {
            if self.peek().is_word(kw) {
                return Err(SqlError::unsupported(what, self.peek().span));
            }
        }
        Ok(left)
    }

    fn parenthesized_select(&mut self) -> R<Select> {
        self.expect_sym("(")?;
        let q = self.select()?;
        self.expect_sym(")")?;
        Ok(q)
    }

    fn additive(&mut self) -> R<SqlExpr> {
        let mut left = self.multiplicative()?;
        loop {
            let op = if self.peek().is_sym("+") {
                ArithOp::Add
            } else if self.peek().is_sym("-") {
                ArithOp::Sub
            } else {
                return Ok(left);
            };
            self.bump();
            let right = self.multiplicative()?;
            left = SqlExpr::Arith {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
    }

    fn multiplicative(&mut self) -> R<SqlExpr> {
        let mut left = self.unary()?;
        loop {
            let op = if self.peek().is_sym("*") {
                ArithOp::Mul
            } else if self.peek().is_sym("/") {
                ArithOp::Div
            } else {
                return Ok(left);
            };
            self.bump();
            let right = self.unary()?;
            left = SqlExpr::Arith {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
    }

    fn unary(&mut self) -> R<SqlExpr> {
        if self.peek().is_sym("-") {
            let start = self.bump().span;
            let t = self.bump();
            let v = match &t.kind {
                TokenKind::Int(n) => Value::parse_int(&format!("-{n}")),
                TokenKind::Dec(n) => Value::parse_dec(&format!("-{n}")),
                _ => None,
            };
            return match v {
                Some(v) => Ok(SqlExpr::Lit(v, start.to(t.span))),
                None => Err(SqlError::unsupported("unary minus on a non-literal", start)),
            };
        }
        self.primary()
    }

    fn primary(&mut self) -> R<SqlExpr> {
        let t = self.peek().clone();
        let lit = |v: Option<Value>| v.ok_or_else(|| SqlError::invalid("malformed number", t.span));
        match &t.kind {
            TokenKind::Int(n) => {
                self.bump();
                return Ok(SqlExpr::Lit(lit(Value::parse_int(n))?, t.span));
            }
            TokenKind::Dec(n) => {
                self.bump();
                return Ok(SqlExpr::Lit(lit(Value::parse_dec(n))?, t.span));
            }
            TokenKind::Str(s) => {
                self.bump();
                return Ok(SqlExpr::Lit(Value::text(s.as_str()), t.span));
            }
            TokenKind::Sym("(") => {
                self.bump();
                if self.peek().is_word("select") {
                    let q = self.select()?;
                    self.expect_sym(")")?;
                    return Ok(SqlExpr::Subquery(Box::new(q)));
                }
                let e = self.expr()?;
                self.expect_sym(")")?;
                return Ok(e);
            }
            _ => {}
        }
        for (kw, v) in [
            ("null", Value::Null),
            ("true", Value::Bool(true)),
            ("false", Value::Bool(false)),
        ] {
            if t.is_word(kw) {
                self.bump();
                return Ok(SqlExpr::Lit(v, t.span));
            }
        }
        if t.is_word("exists") {
            self.bump();
            return Ok(SqlExpr::Exists(Box::new(self.parenthesized_select()?)));
        }
        if t.is_word("case") {
            return Err(SqlError::unsupported("CASE", t.span));
        }
        if let TokenKind::Word(w) = &t.kind {
            if self.peek_at(1).is_sym("(") {
                let Some(func) = AggFn::from_name(w).filter(|f| *f != AggFn::CountDistinct) else {
                    return Err(SqlError::unsupported(format!("function {w}"), t.span));
                };
                self.bump();
                self.bump();
                if self.peek().is_sym("*") {
                    if func != AggFn::Count {
                        return Err(self.error(&["expression"]));
                    }
                    self.bump();
                    self.expect_sym(")")?;
                    return Ok(SqlExpr::Agg {
                        func,
                        arg: None,
                        span: t.span.to(self.prev_span()),
                    });
                }
                let distinct = self.eat_word("distinct");
                if distinct && func != AggFn::Count {
                    return Err(SqlError::unsupported(
                        format!("{}(DISTINCT ...)", func.name()),
                        t.span,
                    ));
                }
                let arg = self.expr()?;
                self.expect_sym(")")?;
                if self.peek().is_word("over") {
                    return Err(SqlError::unsupported("window function", self.peek().span));
                }
                return Ok(SqlExpr::Agg {
                    func: if distinct { AggFn::CountDistinct } else { func },
                    arg: Some(Box::new(arg)),
                    span: t.span.to(self.prev_span()),
                });
            }
        }
        let (first, span) = self.name("expression")?;
        if self.eat_sym(".") {
            let (attr, aspan) = self.any_name("column name")?;
            return Ok(SqlExpr::Column {
                qualifier: Some(first),
                name: attr,
                span: span.to(aspan),
            });
        }
        Ok(SqlExpr::Column {
            qualifier: None,
            name: first,
            span,
        })
    }
}
