//! Recursive-descent parser for the ARC comprehension syntax.

use crate::alt::{
    AggFn, AttributeRef, Binding, BindingSource, CollectionExpr, Definition, Formula, GroupingOp,
    HeadSpec, JoinTree, Main, Meta, Polarity, Predicate, Program, Quantified, SourceSpan, Term,
};
use crate::lex::{tokenize, Token, TokenKind};
use crate::value::{ArithOp, CmpOp, Value};

/// A syntax error with the set of token classes that would have been accepted.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub message: String,
}

impl ParseError {
    pub fn new(span: SourceSpan, expected: &[&str], found: &Token) -> ParseError {
        let expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        ParseError {
            span,
            message: format!(
                "expected {}, found {}",
                expected.join(" or "),
                found.describe()
            ),
            expected,
        }
    }

    pub fn message(span: SourceSpan, message: impl Into<String>) -> ParseError {
        ParseError {
            span,
            expected: Vec::new(),
            message: message.into(),
        }
    }
}

/// Parses ARC text into a program with spans and node ids attached.
pub fn parse_arc(text: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(text).map_err(|e| ParseError::message(e.span, e.message))?;
    let mut p = Parser { tokens, pos: 0 };
    let mut program = p.program()?;
    program
        .validate()
        .map_err(|e| ParseError::message(e.span, format!("{}: {}", e.path, e.reason)))?;
    program.renumber();
    Ok(program)
}

struct Parser {
    pub(crate) tokens: Vec<Token>,
    pub(crate) pos: usize,
}

const FORMULA_START: &[&str] = &["formula"];

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
        if self.pos == 0 {
            return self.peek().span;
        }
        self.tokens[self.pos - 1].span
    }

    fn span_from(&self, start: SourceSpan) -> SourceSpan {
        start.to(self.prev_span())
    }

    fn expect_sym(&mut self, s: &'static str) -> Result<Token, ParseError> {
        if self.peek().is_sym(s) {
            Ok(self.bump())
        } else {
            Err(ParseError::new(
                self.peek().span,
                &[&format!("`{s}`")],
                self.peek(),
            ))
        }
    }

    fn expect_word(&mut self, kw: &str) -> Result<Token, ParseError> {
        if self.peek().is_word(kw) {
            Ok(self.bump())
        } else {
            Err(ParseError::new(
                self.peek().span,
                &[&format!("`{kw}`")],
                self.peek(),
            ))
        }
    }

    fn name(&mut self, what: &str) -> Result<(String, SourceSpan), ParseError> {
        match &self.peek().kind {
            TokenKind::Word(w) | TokenKind::Quoted(w) => {
                let w = w.clone();
                let t = self.bump();
                Ok((w, t.span))
            }
            _ => Err(ParseError::new(self.peek().span, &[what], self.peek())),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut definitions = Vec::new();
        loop {
            let is_abstract = self.peek().is_word("abstract") && self.peek_at(1).is_word("def");
            if !(is_abstract || (self.peek().is_word("def") && !self.peek_at(1).is_sym("."))) {
                break;
            }
            let start = self.peek().span;
            if is_abstract {
                self.bump();
            }
            self.bump();
            let (name, name_span) = self.name("definition name")?;
            self.expect_sym(":=")?;
            let mut collection = self.collection()?;
            if collection.head.relation != name {
                return Err(ParseError::message(
                    name_span,
                    format!(
                        "definition `{name}` must have head `{name}`, found `{}`",
                        collection.head.relation
                    ),
                ));
            }
            collection.meta.span = self.span_from(start);
            definitions.push(Definition {
                is_abstract,
                collection,
            });
        }
        let main = if self.peek().is_sym("{") {
            Main::Query(self.collection()?)
        } else if self.peek().kind == TokenKind::Eof {
            return Err(ParseError::new(
                self.peek().span,
                &["query", "sentence"],
                self.peek(),
            ));
        } else {
            Main::Sentence(self.formula()?)
        };
        if self.peek().kind != TokenKind::Eof {
            return Err(ParseError::new(
                self.peek().span,
                &["end of input"],
                self.peek(),
            ));
        }
        Ok(Program { definitions, main })
    }

    fn collection(&mut self) -> Result<CollectionExpr, ParseError> {
        let start = self.expect_sym("{")?.span;
        let (relation, _) = self.name("head relation name")?;
        self.expect_sym("(")?;
        let mut attributes = vec![self.name("head attribute")?.0];
        while self.peek().is_sym(",") {
            self.bump();
            attributes.push(self.name("head attribute")?.0);
        }
        self.expect_sym(")")?;
        self.expect_sym("|")?;
        let body = self.formula()?;
        self.expect_sym("}")?;
        Ok(CollectionExpr {
            head: HeadSpec {
                relation,
                attributes,
            },
            body,
            meta: Meta::at(self.span_from(start)),
        })
    }

    fn can_start_formula(&self) -> bool {
        let t = self.peek();
        match &t.kind {
            TokenKind::Word(w) => !["and", "or"].iter().any(|k| w.eq_ignore_ascii_case(k)),
            TokenKind::Quoted(_) | TokenKind::Int(_) | TokenKind::Dec(_) | TokenKind::Str(_) => {
                true
            }
            TokenKind::Sym(s) => *s == "(" || *s == "-",
            TokenKind::Eof => false,
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.and_formula()?];
        while self.peek().is_word("or") {
            let op = self.bump();
            if !self.can_start_formula() {
                return Err(dangling(&op, self.peek()));
            }
            parts.push(self.and_formula()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        })
    }

    fn and_formula(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.not_formula()?];
        while self.peek().is_word("and") {
            let op = self.bump();
            if !self.can_start_formula() {
                return Err(dangling(&op, self.peek()));
            }
            parts.push(self.not_formula()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn not_formula(&mut self) -> Result<Formula, ParseError> {
        if self.peek().is_word("not") && !self.peek_at(1).is_sym(".") {
            let start = self.bump().span;
            if self.peek().is_word("exists") && !self.peek_at(1).is_sym(".") {
                self.bump();
                return self.quantified(Polarity::NotExists, start);
            }
            if !self.can_start_formula() {
                return Err(ParseError::new(
                    self.peek().span,
                    FORMULA_START,
                    self.peek(),
                ));
            }
            return Ok(Formula::not(self.not_formula()?));
        }
        self.primary_formula()
    }

    fn primary_formula(&mut self) -> Result<Formula, ParseError> {
        let t = self.peek().clone();
        if t.is_word("exists") && !self.peek_at(1).is_sym(".") {
            self.bump();
            return self.quantified(Polarity::Exists, t.span);
        }
        if t.is_word("true") && !self.starts_predicate_tail(1) {
            self.bump();
            return Ok(Formula::True);
        }
        if t.is_sym("(") {
            let save = self.pos;
            if let Ok(p) = self.predicate() {
                return Ok(Formula::Atom(p));
            }
            self.pos = save;
            self.bump();
            let f = self.formula()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        if !self.can_start_formula() {
            return Err(ParseError::new(t.span, FORMULA_START, &t));
        }
        Ok(Formula::Atom(self.predicate()?))
    }

    fn starts_predicate_tail(&self, k: usize) -> bool {
        let t = self.peek_at(k);
        t.is_word("is")
            || matches!(&t.kind, TokenKind::Sym(s) if ["=", "<>", "!=", "<", "<=", ">", ">=", "+", "-", "*", "/"].contains(s))
    }

    fn quantified(&mut self, polarity: Polarity, start: SourceSpan) -> Result<Formula, ParseError> {
        let mut bindings = vec![self.binding()?];
        let mut grouping = None;
        let mut joins = None;
        while self.peek().is_sym(",") {
            self.bump();
            let next_paren = self.peek_at(1).is_sym("(");
            if self.peek().is_word("group") && next_paren {
                if grouping.is_some() || joins.is_some() {
                    return Err(ParseError::message(
                        self.peek().span,
                        "grouping must follow the bindings once",
                    ));
                }
                self.bump();
                self.expect_sym("(")?;
                let mut keys = Vec::new();
                if !self.peek().is_sym(")") {
                    keys.push(self.attr_ref()?);
                    while self.peek().is_sym(",") {
                        self.bump();
                        keys.push(self.attr_ref()?);
                    }
                }
                self.expect_sym(")")?;
                grouping = Some(GroupingOp { keys });
            } else if ["inner", "left", "full"]
                .iter()
                .any(|k| self.peek().is_word(k))
                && next_paren
            {
                if joins.is_some() {
                    return Err(ParseError::message(
                        self.peek().span,
                        "only one join annotation is allowed",
                    ));
                }
                joins = Some(self.join_tree()?);
            } else {
                if grouping.is_some() || joins.is_some() {
                    return Err(ParseError::message(
                        self.peek().span,
                        "bindings must precede group and join annotations",
                    ));
                }
                bindings.push(self.binding()?);
            }
        }
        self.expect_sym("[")?;
        let body = self.formula()?;
        self.expect_sym("]")?;
        Ok(Formula::Quantified(Quantified {
            polarity,
            bindings,
            grouping,
            joins,
            body: Box::new(body),
            meta: Meta::at(self.span_from(start)),
        }))
    }

    fn binding(&mut self) -> Result<Binding, ParseError> {
        let (var, start) = self.name("binding variable")?;
        self.expect_word("in")?;
        let source = if self.peek().is_sym("{") {
            BindingSource::Nested(Box::new(self.collection()?))
        } else if self.peek().is_word("ext")
            && matches!(
                self.peek_at(1).kind,
                TokenKind::Word(_) | TokenKind::Quoted(_)
            )
        {
            self.bump();
            BindingSource::External(self.name("external relation name")?.0)
        } else {
            BindingSource::Named(self.name("relation name or `{`")?.0)
        };
        Ok(Binding {
            var,
            source,
            meta: Meta::at(self.span_from(start)),
        })
    }

    fn join_tree(&mut self) -> Result<JoinTree, ParseError> {
        let kind = self.bump();
        let kind_span = kind.span;
        self.expect_sym("(")?;
        let mut children = vec![self.join_leaf()?];
        while self.peek().is_sym(",") {
            self.bump();
            children.push(self.join_leaf()?);
        }
        self.expect_sym(")")?;
        let tree = if kind.is_word("inner") {
            if children.len() < 2 {
                return Err(ParseError::message(
                    kind_span,
                    "inner join needs at least two children",
                ));
            }
            JoinTree::Inner(children)
        } else {
            if children.len() != 2 {
                return Err(ParseError::message(
                    kind_span,
                    "left and full joins take exactly two children",
                ));
            }
            let r = children.pop().unwrap();
            let l = children.pop().unwrap();
            if kind.is_word("left") {
                JoinTree::left(l, r)
            } else {
                JoinTree::full(l, r)
            }
        };
        Ok(tree)
    }

    fn join_leaf(&mut self) -> Result<JoinTree, ParseError> {
        let next_paren = self.peek_at(1).is_sym("(");
        if ["inner", "left", "full"]
            .iter()
            .any(|k| self.peek().is_word(k))
            && next_paren
        {
            return self.join_tree();
        }
        let t1 = self.peek_at(1).clone();
        if self.peek().is_word("lit") && !(t1.is_sym(",") || t1.is_sym(")")) {
            let start = self.bump().span;
            let value = self.value()?;
            self.expect_word("as")?;
            let (var, _) = self.name("literal variable")?;
            return Ok(JoinTree::Literal {
                value,
                var,
                meta: Meta::at(self.span_from(start)),
            });
        }
        Ok(JoinTree::Leaf(self.name("join leaf")?.0))
    }

    fn predicate(&mut self) -> Result<Predicate, ParseError> {
        let start = self.peek().span;
        let left = self.term()?;
        if self.peek().is_word("is") {
            self.bump();
            let negated = if self.peek().is_word("not") {
                self.bump();
                true
            } else {
                false
            };
            self.expect_word("null")?;
            return Ok(Predicate {
                kind: crate::alt::PredicateKind::IsNull {
                    term: left,
                    negated,
                },
                meta: Meta::at(self.span_from(start)),
            });
        }
        let op = match &self.peek().kind {
            TokenKind::Sym(s) => CmpOp::from_symbol(s),
            _ => None,
        };
        let Some(op) = op else {
            return Err(ParseError::new(
                self.peek().span,
                &["comparison operator", "`is`"],
                self.peek(),
            ));
        };
        self.bump();
        let right = self.term()?;
        Ok(Predicate {
            kind: crate::alt::PredicateKind::Compare { op, left, right },
            meta: Meta::at(self.span_from(start)),
        })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let mut left = self.mul_term()?;
        loop {
            let op = if self.peek().is_sym("+") {
                ArithOp::Add
            } else if self.peek().is_sym("-") {
                ArithOp::Sub
            } else {
                break;
            };
            self.bump();
            let right = self.mul_term()?;
            left = Term::arith(op, left, right);
        }
        Ok(left)
    }

    fn mul_term(&mut self) -> Result<Term, ParseError> {
        let mut left = self.unary_term()?;
        loop {
            let op = if self.peek().is_sym("*") {
                ArithOp::Mul
            } else if self.peek().is_sym("/") {
                ArithOp::Div
            } else {
                break;
            };
            self.bump();
            let right = self.unary_term()?;
            left = Term::arith(op, left, right);
        }
        Ok(left)
    }

    fn unary_term(&mut self) -> Result<Term, ParseError> {
        let t = self.peek().clone();
        if t.is_sym("-") {
            return Ok(Term::Const(self.value()?));
        }
        if t.is_sym("(") {
            self.bump();
            let inner = self.term()?;
            self.expect_sym(")")?;
            return Ok(inner);
        }
        if let TokenKind::Word(w) = &t.kind {
            if self.peek_at(1).is_sym(".") {
                return Ok(Term::Attr(self.attr_ref()?));
            }
            if self.peek_at(1).is_sym("(") {
                if let Some(func) = AggFn::from_name(w) {
                    self.bump();
                    self.bump();
                    let arg = self.term()?;
                    self.expect_sym(")")?;
                    return Ok(Term::agg(func, arg));
                }
            }
        }
        if matches!(t.kind, TokenKind::Quoted(_)) {
            return Ok(Term::Attr(self.attr_ref()?));
        }
        Ok(Term::Const(self.value()?))
    }

    fn attr_ref(&mut self) -> Result<AttributeRef, ParseError> {
        let (var, start) = self.name("range variable")?;
        self.expect_sym(".")?;
        let (attr, _) = self.name("attribute name")?;
        Ok(AttributeRef {
            var,
            attr,
            meta: Meta::at(self.span_from(start)),
        })
    }

    fn value(&mut self) -> Result<Value, ParseError> {
        let negative = if self.peek().is_sym("-") {
            self.bump();
            true
        } else {
            false
        };
        let t = self.peek().clone();
        let v = match &t.kind {
            TokenKind::Int(s) => {
                Value::parse_int(&format!("{}{s}", if negative { "-" } else { "" }))
            }
            TokenKind::Dec(s) => {
                Value::parse_dec(&format!("{}{s}", if negative { "-" } else { "" }))
            }
            _ if negative => None,
            TokenKind::Str(s) => Some(Value::Text(s.clone())),
            TokenKind::Word(w) if w.eq_ignore_ascii_case("true") => Some(Value::Bool(true)),
            TokenKind::Word(w) if w.eq_ignore_ascii_case("false") => Some(Value::Bool(false)),
            TokenKind::Word(w) if w.eq_ignore_ascii_case("null") => Some(Value::Null),
            _ => None,
        };
        match v {
            Some(v) => {
                self.bump();
                Ok(v)
            }
            None => Err(ParseError::new(
                t.span,
                if negative { &["number"] } else { &["term"] },
                &t,
            )),
        }
    }
}

fn dangling(op: &Token, found: &Token) -> ParseError {
    let word = match &op.kind {
        TokenKind::Word(w) => w.to_lowercase(),
        _ => op.describe(),
    };
    ParseError {
        span: op.span,
        expected: vec!["formula".to_string()],
        message: format!(
            "dangling `{word}`: expected formula, found {}",
            found.describe()
        ),
    }
}
