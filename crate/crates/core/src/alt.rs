//! The ALT node family: collections, formulas, bindings, predicates and terms.
//!
//! Every node that the binder links or that diagnostics point at carries a
//! [`Meta`] with a source span and a node id. `Meta` never participates in
//! structural equality or hashing, so two programs that differ only in where
//! they came from compare equal.

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::value::{ArithOp, CmpOp, Value};

/// Location of a node in its source text. Offsets, lines and columns are
/// 0-based counts of code points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

impl SourceSpan {
    pub fn to(self, other: SourceSpan) -> SourceSpan {
        if other.end < self.start {
            return self;
        }
        SourceSpan {
            start: self.start,
            end: other.end.max(self.end),
            line: self.line,
            column: self.column,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line + 1, self.column + 1)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Span and identity of a node; ignored by `==` and `Hash`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Meta {
    pub span: SourceSpan,
    pub id: NodeId,
}

impl Meta {
    pub fn at(span: SourceSpan) -> Meta {
        Meta {
            span,
            id: NodeId::default(),
        }
    }
}

impl PartialEq for Meta {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Meta {}

impl Hash for Meta {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttributeRef {
    pub var: String,
    pub attr: String,
    pub meta: Meta,
}

impl AttributeRef {
    pub fn new(var: impl Into<String>, attr: impl Into<String>) -> AttributeRef {
        AttributeRef {
            var: var.into(),
            attr: attr.into(),
            meta: Meta::default(),
        }
    }
}

impl PartialOrd for AttributeRef {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AttributeRef {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (&self.var, &self.attr).cmp(&(&other.var, &other.attr))
    }
}

impl fmt::Display for AttributeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.var, self.attr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggFn {
    Sum,
    Count,
    Avg,
    Min,
    Max,
    CountDistinct,
}

impl AggFn {
    pub const ALL: [AggFn; 6] = [
        AggFn::Sum,
        AggFn::Count,
        AggFn::Avg,
        AggFn::Min,
        AggFn::Max,
        AggFn::CountDistinct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggFn::Sum => "sum",
            AggFn::Count => "count",
            AggFn::Avg => "avg",
            AggFn::Min => "min",
            AggFn::Max => "max",
            AggFn::CountDistinct => "countdistinct",
        }
    }

    pub fn from_name(s: &str) -> Option<AggFn> {
        AggFn::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Const(Value),
    Attr(AttributeRef),
    Arith {
        op: ArithOp,
        left: Box<Term>,
        right: Box<Term>,
    },
    Agg {
        func: AggFn,
        arg: Box<Term>,
    },
}

impl Term {
    pub fn attr(var: &str, attr: &str) -> Term {
        Term::Attr(AttributeRef::new(var, attr))
    }

    pub fn arith(op: ArithOp, left: Term, right: Term) -> Term {
        Term::Arith {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn agg(func: AggFn, arg: Term) -> Term {
        Term::Agg {
            func,
            arg: Box::new(arg),
        }
    }

    pub fn contains_aggregate(&self) -> bool {
        match self {
            Term::Agg { .. } => true,
            Term::Arith { left, right, .. } => {
                left.contains_aggregate() || right.contains_aggregate()
            }
            _ => false,
        }
    }

    /// Visits every attribute reference in the term, including those inside
    /// aggregates.
    pub fn for_each_ref<'a>(&'a self, f: &mut dyn FnMut(&'a AttributeRef)) {
        match self {
            Term::Attr(a) => f(a),
            Term::Arith { left, right, .. } => {
                left.for_each_ref(f);
                right.for_each_ref(f);
            }
            Term::Agg { arg, .. } => arg.for_each_ref(f),
            Term::Const(_) => {}
        }
    }

    pub fn for_each_ref_mut(&mut self, f: &mut dyn FnMut(&mut AttributeRef)) {
        match self {
            Term::Attr(a) => f(a),
            Term::Arith { left, right, .. } => {
                left.for_each_ref_mut(f);
                right.for_each_ref_mut(f);
            }
            Term::Agg { arg, .. } => arg.for_each_ref_mut(f),
            Term::Const(_) => {}
        }
    }

    /// Attribute references outside any aggregate.
    pub fn for_each_ref_outside_agg<'a>(&'a self, f: &mut dyn FnMut(&'a AttributeRef)) {
        match self {
            Term::Attr(a) => f(a),
            Term::Arith { left, right, .. } => {
                left.for_each_ref_outside_agg(f);
                right.for_each_ref_outside_agg(f);
            }
            Term::Agg { .. } | Term::Const(_) => {}
        }
    }

    pub fn refs(&self) -> Vec<&AttributeRef> {
        let mut out = Vec::new();
        self.for_each_ref(&mut |a| out.push(a));
        out
    }

    pub fn as_attr(&self) -> Option<&AttributeRef> {
        match self {
            Term::Attr(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PredicateKind {
    Compare { op: CmpOp, left: Term, right: Term },
    IsNull { term: Term, negated: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Predicate {
    pub kind: PredicateKind,
    pub meta: Meta,
}

impl Predicate {
    pub fn compare(op: CmpOp, left: Term, right: Term) -> Predicate {
        Predicate {
            kind: PredicateKind::Compare { op, left, right },
            meta: Meta::default(),
        }
    }

    pub fn is_null(term: Term, negated: bool) -> Predicate {
        Predicate {
            kind: PredicateKind::IsNull { term, negated },
            meta: Meta::default(),
        }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match &self.kind {
            PredicateKind::Compare { left, right, .. } => vec![left, right],
            PredicateKind::IsNull { term, .. } => vec![term],
        }
    }

    pub fn terms_mut(&mut self) -> Vec<&mut Term> {
        match &mut self.kind {
            PredicateKind::Compare { left, right, .. } => vec![left, right],
            PredicateKind::IsNull { term, .. } => vec![term],
        }
    }

    pub fn contains_aggregate(&self) -> bool {
        self.terms().iter().any(|t| t.contains_aggregate())
    }

    pub fn for_each_ref<'a>(&'a self, f: &mut dyn FnMut(&'a AttributeRef)) {
        for t in self.terms() {
            t.for_each_ref(f);
        }
    }

    pub fn refs(&self) -> Vec<&AttributeRef> {
        let mut out = Vec::new();
        self.for_each_ref(&mut |a| out.push(a));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BindingSource {
    Named(String),
    Nested(Box<CollectionExpr>),
    External(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Binding {
    pub var: String,
    pub source: BindingSource,
    pub meta: Meta,
}

impl Binding {
    pub fn named(var: &str, rel: &str) -> Binding {
        Binding {
            var: var.into(),
            source: BindingSource::Named(rel.into()),
            meta: Meta::default(),
        }
    }

    pub fn nested(var: &str, c: CollectionExpr) -> Binding {
        Binding {
            var: var.into(),
            source: BindingSource::Nested(Box::new(c)),
            meta: Meta::default(),
        }
    }

    pub fn external(var: &str, rel: &str) -> Binding {
        Binding {
            var: var.into(),
            source: BindingSource::External(rel.into()),
            meta: Meta::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum JoinTree {
    Leaf(String),
    Literal {
        value: Value,
        var: String,
        meta: Meta,
    },
    Inner(Vec<JoinTree>),
    Left(Box<JoinTree>, Box<JoinTree>),
    Full(Box<JoinTree>, Box<JoinTree>),
}

impl JoinTree {
    pub fn left(l: JoinTree, r: JoinTree) -> JoinTree {
        JoinTree::Left(Box::new(l), Box::new(r))
    }

    pub fn full(l: JoinTree, r: JoinTree) -> JoinTree {
        JoinTree::Full(Box::new(l), Box::new(r))
    }

    pub fn literal(value: Value, var: &str) -> JoinTree {
        JoinTree::Literal {
            value,
            var: var.into(),
            meta: Meta::default(),
        }
    }

    /// Variables of all leaves (binding and literal) in left-to-right order.
    pub fn leaf_vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaf_vars(&mut out);
        out
    }

    fn collect_leaf_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            JoinTree::Leaf(v) => out.push(v),
            JoinTree::Literal { var, .. } => out.push(var),
            JoinTree::Inner(cs) => cs.iter().for_each(|c| c.collect_leaf_vars(out)),
            JoinTree::Left(l, r) | JoinTree::Full(l, r) => {
                l.collect_leaf_vars(out);
                r.collect_leaf_vars(out);
            }
        }
    }

    pub fn has_outer(&self) -> bool {
        match self {
            JoinTree::Left(..) | JoinTree::Full(..) => true,
            JoinTree::Inner(cs) => cs.iter().any(|c| c.has_outer()),
            _ => false,
        }
    }

    pub fn literals(&self) -> Vec<(&Value, &str, &Meta)> {
        let mut out = Vec::new();
        self.collect_literals(&mut out);
        out
    }

    fn collect_literals<'a>(&'a self, out: &mut Vec<(&'a Value, &'a str, &'a Meta)>) {
        match self {
            JoinTree::Literal { value, var, meta } => out.push((value, var, meta)),
            JoinTree::Inner(cs) => cs.iter().for_each(|c| c.collect_literals(out)),
            JoinTree::Left(l, r) | JoinTree::Full(l, r) => {
                l.collect_literals(out);
                r.collect_literals(out);
            }
            JoinTree::Leaf(_) => {}
        }
    }

    /// Subtree at a child-index path.
    pub fn at_path(&self, path: &[usize]) -> Option<&JoinTree> {
        let Some((&i, rest)) = path.split_first() else {
            return Some(self);
        };
        let child = match self {
            JoinTree::Inner(cs) => cs.get(i)?,
            JoinTree::Left(l, r) | JoinTree::Full(l, r) => match i {
                0 => l,
                1 => r,
                _ => return None,
            },
            _ => return None,
        };
        child.at_path(rest)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct GroupingOp {
    pub keys: Vec<AttributeRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Exists,
    NotExists,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Quantified {
    pub polarity: Polarity,
    pub bindings: Vec<Binding>,
    pub grouping: Option<GroupingOp>,
    pub joins: Option<JoinTree>,
    pub body: Box<Formula>,
    pub meta: Meta,
}

impl Quantified {
    pub fn exists(bindings: Vec<Binding>, body: Formula) -> Quantified {
        Quantified {
            polarity: Polarity::Exists,
            bindings,
            grouping: None,
            joins: None,
            body: Box::new(body),
            meta: Meta::default(),
        }
    }

    pub fn binding(&self, var: &str) -> Option<&Binding> {
        self.bindings.iter().find(|b| b.var == var)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Quantified(Quantified),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Atom(Predicate),
    True,
}

impl Formula {
    pub fn atom(p: Predicate) -> Formula {
        Formula::Atom(p)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    /// Top-level conjuncts: the children of an `And`, or the formula itself.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(cs) => cs.iter().flat_map(|c| c.conjuncts()).collect(),
            Formula::True => Vec::new(),
            other => vec![other],
        }
    }

    /// Visits every predicate reachable without entering a nested scope
    /// (quantifier or nested collection).
    pub fn for_each_immediate_predicate<'a>(&'a self, f: &mut dyn FnMut(&'a Predicate)) {
        match self {
            Formula::Atom(p) => f(p),
            Formula::And(cs) | Formula::Or(cs) => {
                cs.iter().for_each(|c| c.for_each_immediate_predicate(f))
            }
            Formula::Not(c) => c.for_each_immediate_predicate(f),
            Formula::Quantified(_) | Formula::True => {}
        }
    }

    /// Visits every predicate anywhere below, including nested scopes and
    /// nested collections.
    pub fn for_each_predicate<'a>(&'a self, f: &mut dyn FnMut(&'a Predicate)) {
        match self {
            Formula::Atom(p) => f(p),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| c.for_each_predicate(f)),
            Formula::Not(c) => c.for_each_predicate(f),
            Formula::Quantified(q) => {
                for b in &q.bindings {
                    if let BindingSource::Nested(c) = &b.source {
                        c.body.for_each_predicate(f);
                    }
                }
                q.body.for_each_predicate(f);
            }
            Formula::True => {}
        }
    }

    pub fn for_each_quantified<'a>(&'a self, f: &mut dyn FnMut(&'a Quantified)) {
        match self {
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| c.for_each_quantified(f)),
            Formula::Not(c) => c.for_each_quantified(f),
            Formula::Quantified(q) => {
                f(q);
                for b in &q.bindings {
                    if let BindingSource::Nested(c) = &b.source {
                        c.body.for_each_quantified(f);
                    }
                }
                q.body.for_each_quantified(f);
            }
            Formula::Atom(_) | Formula::True => {}
        }
    }

    pub fn contains_quantifier(&self) -> bool {
        match self {
            Formula::Quantified(_) => true,
            Formula::And(cs) | Formula::Or(cs) => cs.iter().any(|c| c.contains_quantifier()),
            Formula::Not(c) => c.contains_quantifier(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HeadSpec {
    pub relation: String,
    pub attributes: Vec<String>,
}

impl HeadSpec {
    pub fn new(relation: &str, attributes: &[&str]) -> HeadSpec {
        HeadSpec {
            relation: relation.into(),
            attributes: attributes.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CollectionExpr {
    pub head: HeadSpec,
    pub body: Formula,
    pub meta: Meta,
}

impl CollectionExpr {
    pub fn new(head: HeadSpec, body: Formula) -> CollectionExpr {
        CollectionExpr {
            head,
            body,
            meta: Meta::default(),
        }
    }
}

/// A named collection. Abstract definitions are modules whose head attributes
/// act as parameters; they are inlined by [`crate::expand::expand_abstract`]
/// before evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Definition {
    pub is_abstract: bool,
    pub collection: CollectionExpr,
}

impl Definition {
    pub fn name(&self) -> &str {
        &self.collection.head.relation
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Main {
    Query(CollectionExpr),
    Sentence(Formula),
}

impl Main {
    pub fn is_sentence(&self) -> bool {
        matches!(self, Main::Sentence(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub definitions: Vec<Definition>,
    pub main: Main,
}

/// A violated type invariant, located by its JSON path.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {reason}")]
pub struct StructureError {
    pub path: String,
    pub reason: String,
    pub span: SourceSpan,
}

impl Program {
    pub fn query(c: CollectionExpr) -> Program {
        Program {
            definitions: Vec::new(),
            main: Main::Query(c),
        }
    }

    pub fn sentence(f: Formula) -> Program {
        Program {
            definitions: Vec::new(),
            main: Main::Sentence(f),
        }
    }

    pub fn definition(&self, name: &str) -> Option<&Definition> {
        self.definitions.iter().find(|d| d.name() == name)
    }

    /// Assigns fresh node ids in preorder, starting at 1.
    pub fn renumber(&mut self) {
        let mut next = 0u32;
        let mut fresh = |m: &mut Meta| {
            next += 1;
            m.id = NodeId(next);
        };
        for d in &mut self.definitions {
            renumber_collection(&mut d.collection, &mut fresh);
        }
        match &mut self.main {
            Main::Query(c) => renumber_collection(c, &mut fresh),
            Main::Sentence(f) => renumber_formula(f, &mut fresh),
        }
    }

    /// Checks the type invariants of every node.
    pub fn validate(&self) -> Result<(), StructureError> {
        let mut names = BTreeSet::new();
        for (i, d) in self.definitions.iter().enumerate() {
            let path = format!("definitions[{i}]");
            if !names.insert(d.name()) {
                return Err(err(
                    &path,
                    "duplicate definition name",
                    d.collection.meta.span,
                ));
            }
            validate_collection(&d.collection, &path)?;
        }
        match &self.main {
            Main::Query(c) => validate_collection(c, "main"),
            Main::Sentence(f) => validate_formula(f, "main.formula", SourceSpan::default()),
        }
    }

    pub fn collections(&self) -> Vec<&CollectionExpr> {
        let mut out = Vec::new();
        for d in &self.definitions {
            collect_collections(&d.collection, &mut out);
        }
        match &self.main {
            Main::Query(c) => collect_collections(c, &mut out),
            Main::Sentence(f) => collect_collections_in(f, &mut out),
        }
        out
    }
}

fn collect_collections<'a>(c: &'a CollectionExpr, out: &mut Vec<&'a CollectionExpr>) {
    out.push(c);
    collect_collections_in(&c.body, out);
}

fn collect_collections_in<'a>(f: &'a Formula, out: &mut Vec<&'a CollectionExpr>) {
    match f {
        Formula::And(cs) | Formula::Or(cs) => {
            cs.iter().for_each(|c| collect_collections_in(c, out))
        }
        Formula::Not(c) => collect_collections_in(c, out),
        Formula::Quantified(q) => {
            for b in &q.bindings {
                if let BindingSource::Nested(c) = &b.source {
                    collect_collections(c, out);
                }
            }
            collect_collections_in(&q.body, out);
        }
        Formula::Atom(_) | Formula::True => {}
    }
}

fn renumber_collection(c: &mut CollectionExpr, fresh: &mut impl FnMut(&mut Meta)) {
    fresh(&mut c.meta);
    renumber_formula(&mut c.body, fresh);
}

fn renumber_formula(f: &mut Formula, fresh: &mut impl FnMut(&mut Meta)) {
    match f {
        Formula::Quantified(q) => {
            fresh(&mut q.meta);
            for b in &mut q.bindings {
                fresh(&mut b.meta);
                if let BindingSource::Nested(c) = &mut b.source {
                    renumber_collection(c, fresh);
                }
            }
            if let Some(g) = &mut q.grouping {
                for k in &mut g.keys {
                    fresh(&mut k.meta);
                }
            }
            if let Some(j) = &mut q.joins {
                renumber_join(j, fresh);
            }
            renumber_formula(&mut q.body, fresh);
        }
        Formula::And(cs) | Formula::Or(cs) => {
            cs.iter_mut().for_each(|c| renumber_formula(c, fresh))
        }
        Formula::Not(c) => renumber_formula(c, fresh),
        Formula::Atom(p) => {
            fresh(&mut p.meta);
            for t in p.terms_mut() {
                t.for_each_ref_mut(&mut |a| fresh(&mut a.meta));
            }
        }
        Formula::True => {}
    }
}

fn renumber_join(j: &mut JoinTree, fresh: &mut impl FnMut(&mut Meta)) {
    match j {
        JoinTree::Literal { meta, .. } => fresh(meta),
        JoinTree::Inner(cs) => cs.iter_mut().for_each(|c| renumber_join(c, fresh)),
        JoinTree::Left(l, r) | JoinTree::Full(l, r) => {
            renumber_join(l, fresh);
            renumber_join(r, fresh);
        }
        JoinTree::Leaf(_) => {}
    }
}

fn err(path: &str, reason: &str, span: SourceSpan) -> StructureError {
    StructureError {
        path: path.to_string(),
        reason: reason.to_string(),
        span,
    }
}

fn validate_ident(s: &str, path: &str, span: SourceSpan) -> Result<(), StructureError> {
    if s.is_empty() {
        return Err(err(path, "identifier must be nonempty", span));
    }
    Ok(())
}

fn validate_collection(c: &CollectionExpr, path: &str) -> Result<(), StructureError> {
    let span = c.meta.span;
    validate_ident(&c.head.relation, &format!("{path}.head.relation"), span)?;
    if c.head.attributes.is_empty() {
        return Err(err(
            &format!("{path}.head.attributes"),
            "head needs at least one attribute",
            span,
        ));
    }
    let mut seen = BTreeSet::new();
    for (i, a) in c.head.attributes.iter().enumerate() {
        let p = format!("{path}.head.attributes[{i}]");
        validate_ident(a, &p, span)?;
        if !seen.insert(a) {
            return Err(err(&p, "duplicate head attribute", span));
        }
    }
    validate_formula(&c.body, &format!("{path}.body"), span)
}

fn validate_formula(f: &Formula, path: &str, span: SourceSpan) -> Result<(), StructureError> {
    match f {
        Formula::Quantified(q) => validate_quantified(q, &format!("{path}.quantified")),
        Formula::And(cs) => {
            if cs.len() < 2 {
                return Err(err(
                    &format!("{path}.and"),
                    "conjunction needs at least two operands",
                    span,
                ));
            }
            for (i, c) in cs.iter().enumerate() {
                validate_formula(c, &format!("{path}.and[{i}]"), span)?;
            }
            Ok(())
        }
        Formula::Or(cs) => {
            if cs.len() < 2 {
                return Err(err(
                    &format!("{path}.or"),
                    "disjunction needs at least two operands",
                    span,
                ));
            }
            for (i, c) in cs.iter().enumerate() {
                validate_formula(c, &format!("{path}.or[{i}]"), span)?;
            }
            Ok(())
        }
        Formula::Not(c) => validate_formula(c, &format!("{path}.not"), span),
        Formula::Atom(p) => validate_predicate(p, &format!("{path}.atom")),
        Formula::True => Ok(()),
    }
}

fn validate_quantified(q: &Quantified, path: &str) -> Result<(), StructureError> {
    let span = q.meta.span;
    if q.bindings.is_empty() {
        return Err(err(
            &format!("{path}.bindings"),
            "quantifier needs at least one binding",
            span,
        ));
    }
    for (i, b) in q.bindings.iter().enumerate() {
        let p = format!("{path}.bindings[{i}]");
        validate_ident(&b.var, &format!("{p}.var"), b.meta.span)?;
        match &b.source {
            BindingSource::Named(n) => {
                validate_ident(n, &format!("{p}.source.relation"), b.meta.span)?
            }
            BindingSource::External(n) => {
                validate_ident(n, &format!("{p}.source.external"), b.meta.span)?
            }
            BindingSource::Nested(c) => validate_collection(c, &format!("{p}.source.collection"))?,
        }
    }
    if let Some(g) = &q.grouping {
        for (i, k) in g.keys.iter().enumerate() {
            validate_ref(k, &format!("{path}.grouping.keys[{i}]"))?;
        }
    }
    if let Some(j) = &q.joins {
        let jp = format!("{path}.joins");
        validate_join(j, &jp, span)?;
        let leaves = j.leaf_vars();
        let literal_vars: BTreeSet<&str> = j.literals().iter().map(|(_, v, _)| *v).collect();
        let mut seen = BTreeSet::new();
        for v in &leaves {
            if !seen.insert(*v) {
                return Err(err(
                    &jp,
                    &format!("join tree mentions `{v}` more than once"),
                    span,
                ));
            }
        }
        for b in &q.bindings {
            if !seen.contains(b.var.as_str()) {
                return Err(err(
                    &jp,
                    &format!("binding `{}` is missing from the join tree", b.var),
                    span,
                ));
            }
            if literal_vars.contains(b.var.as_str()) {
                return Err(err(
                    &jp,
                    &format!("literal leaf reuses binding name `{}`", b.var),
                    span,
                ));
            }
        }
        for v in leaves {
            if !literal_vars.contains(v) && q.binding(v).is_none() {
                return Err(err(
                    &jp,
                    &format!("join leaf `{v}` is not a binding of this quantifier"),
                    span,
                ));
            }
        }
    }
    validate_formula(&q.body, &format!("{path}.body"), span)
}

fn validate_join(j: &JoinTree, path: &str, span: SourceSpan) -> Result<(), StructureError> {
    match j {
        JoinTree::Leaf(v) => validate_ident(v, &format!("{path}.leaf"), span),
        JoinTree::Literal { var, meta, .. } => {
            validate_ident(var, &format!("{path}.literal.var"), meta.span)
        }
        JoinTree::Inner(cs) => {
            if cs.len() < 2 {
                return Err(err(
                    &format!("{path}.inner"),
                    "inner join needs at least two children",
                    span,
                ));
            }
            for (i, c) in cs.iter().enumerate() {
                validate_join(c, &format!("{path}.inner[{i}]"), span)?;
            }
            Ok(())
        }
        JoinTree::Left(l, r) => {
            validate_join(l, &format!("{path}.left[0]"), span)?;
            validate_join(r, &format!("{path}.left[1]"), span)
        }
        JoinTree::Full(l, r) => {
            validate_join(l, &format!("{path}.full[0]"), span)?;
            validate_join(r, &format!("{path}.full[1]"), span)
        }
    }
}

fn validate_ref(a: &AttributeRef, path: &str) -> Result<(), StructureError> {
    validate_ident(&a.var, &format!("{path}.var"), a.meta.span)?;
    validate_ident(&a.attr, &format!("{path}.attr"), a.meta.span)
}

fn validate_predicate(p: &Predicate, path: &str) -> Result<(), StructureError> {
    let span = p.meta.span;
    match &p.kind {
        PredicateKind::Compare { left, right, .. } => {
            let p = format!("{path}.compare");
            validate_term(left, &format!("{p}.left"), span)?;
            validate_term(right, &format!("{p}.right"), span)?;
            if left.contains_aggregate() && right.contains_aggregate() {
                return Err(err(
                    &p,
                    "at most one side of a comparison may contain an aggregate",
                    span,
                ));
            }
            Ok(())
        }
        PredicateKind::IsNull { term, .. } => {
            validate_term(term, &format!("{path}.isNull.term"), span)
        }
    }
}

fn validate_term(t: &Term, path: &str, span: SourceSpan) -> Result<(), StructureError> {
    match t {
        Term::Const(_) => Ok(()),
        Term::Attr(a) => validate_ref(a, &format!("{path}.attr")),
        Term::Arith { left, right, .. } => {
            validate_term(left, &format!("{path}.arith.left"), span)?;
            validate_term(right, &format!("{path}.arith.right"), span)
        }
        Term::Agg { arg, .. } => {
            let p = format!("{path}.aggregate.arg");
            if arg.contains_aggregate() {
                return Err(err(&p, "aggregate nested inside aggregate", span));
            }
            if arg.refs().is_empty() {
                return Err(err(
                    &p,
                    "aggregate argument must reference an attribute",
                    span,
                ));
            }
            validate_term(arg, &p, span)
        }
    }
}

/// Every attribute reference in `f` whose variable is not bound by a
/// quantifier (or, for nested collections, by their own head) within `f`.
pub fn free_attribute_refs(f: &Formula) -> BTreeSet<AttributeRef> {
    let mut out = BTreeSet::new();
    let mut bound: Vec<String> = Vec::new();
    free_in_formula(f, &mut bound, &mut out);
    out
}

fn note_ref(a: &AttributeRef, bound: &[String], out: &mut BTreeSet<AttributeRef>) {
    if !bound.iter().any(|b| b == &a.var) {
        out.insert(a.clone());
    }
}

fn free_in_formula(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<AttributeRef>) {
    match f {
        Formula::Atom(p) => p.for_each_ref(&mut |a| note_ref(a, bound, out)),
        Formula::And(cs) | Formula::Or(cs) => {
            cs.iter().for_each(|c| free_in_formula(c, bound, out))
        }
        Formula::Not(c) => free_in_formula(c, bound, out),
        Formula::True => {}
        Formula::Quantified(q) => {
            let mark = bound.len();
            bound.extend(q.bindings.iter().map(|b| b.var.clone()));
            if let Some(j) = &q.joins {
                bound.extend(j.literals().iter().map(|(_, v, _)| v.to_string()));
            }
            for b in &q.bindings {
                if let BindingSource::Nested(c) = &b.source {
                    bound.push(c.head.relation.clone());
                    free_in_formula(&c.body, bound, out);
                    bound.pop();
                }
            }
            if let Some(g) = &q.grouping {
                g.keys.iter().for_each(|k| note_ref(k, bound, out));
            }
            free_in_formula(&q.body, bound, out);
            bound.truncate(mark);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq1_body() -> Formula {
        Formula::Quantified(Quantified::exists(
            vec![Binding::named("r", "R"), Binding::named("s", "S")],
            Formula::And(vec![
                Formula::atom(Predicate::compare(
                    CmpOp::Eq,
                    Term::attr("Q", "A"),
                    Term::attr("r", "A"),
                )),
                Formula::atom(Predicate::compare(
                    CmpOp::Eq,
                    Term::attr("r", "B"),
                    Term::attr("s", "B"),
                )),
                Formula::atom(Predicate::compare(
                    CmpOp::Eq,
                    Term::attr("s", "C"),
                    Term::Const(Value::int(0)),
                )),
            ]),
        ))
    }

    #[test]
    fn free_refs_of_simple_query_body() {
        let free = free_attribute_refs(&eq1_body());
        assert_eq!(
            free.into_iter().collect::<Vec<_>>(),
            vec![AttributeRef::new("Q", "A")]
        );
    }

    #[test]
    fn free_refs_of_constant_atom() {
        let f = Formula::atom(Predicate::compare(
            CmpOp::Eq,
            Term::Const(Value::int(5)),
            Term::Const(Value::int(5)),
        ));
        assert!(free_attribute_refs(&f).is_empty());
    }

    #[test]
    fn meta_is_ignored_by_equality() {
        let mut a = Program::query(CollectionExpr::new(HeadSpec::new("Q", &["A"]), eq1_body()));
        let b = a.clone();
        a.renumber();
        assert_eq!(a, b);
    }

    #[test]
    fn validate_rejects_nested_aggregate() {
        let t = Term::agg(AggFn::Sum, Term::agg(AggFn::Count, Term::attr("r", "A")));
        let body = Formula::Quantified(Quantified {
            grouping: Some(GroupingOp::default()),
            ..Quantified::exists(
                vec![Binding::named("r", "R")],
                Formula::atom(Predicate::compare(CmpOp::Eq, Term::attr("Q", "A"), t)),
            )
        });
        let p = Program::query(CollectionExpr::new(HeadSpec::new("Q", &["A"]), body));
        let e = p.validate().unwrap_err();
        assert!(e.reason.contains("nested"));
    }

    #[test]
    fn validate_rejects_join_tree_missing_binding() {
        let q = Quantified {
            joins: Some(JoinTree::left(
                JoinTree::Leaf("r".into()),
                JoinTree::Leaf("t".into()),
            )),
            ..Quantified::exists(
                vec![Binding::named("r", "R"), Binding::named("s", "S")],
                Formula::True,
            )
        };
        let p = Program::sentence(Formula::Quantified(q));
        assert!(p.validate().is_err());
    }
}
