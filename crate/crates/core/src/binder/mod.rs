//! Name resolution and legality checking.
//!
//! [`bind`] links every attribute reference to the binding, head or literal
//! leaf it denotes, classifies predicates, builds the scope tree and assigns
//! join conditions to join-tree nodes. The `check_*` passes and
//! [`plan_access`] validate a bound program; [`analyze`] runs all of them.

mod access;
mod checks;
mod registry;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::alt::{
    BindingSource, CollectionExpr, Formula, JoinTree, Main, NodeId, Polarity, Predicate,
    PredicateKind, Program, Quantified, SourceSpan, Term,
};
use crate::value::CmpOp;

pub use access::{plan_access, Access, EvaluationOrder, PlanStep};
pub use checks::{check_grouping, check_heads, check_recursion, is_post_group};
pub use registry::{
    invoke, like_matches, ExternalRegistry, ExternalSemantics, ExternalSpec, RegistryError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub span: SourceSpan,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: &'static str, span: SourceSpan, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Error,
            code,
            span,
            message: message.into(),
        }
    }

    pub fn warning(code: &'static str, span: SourceSpan, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Warning,
            code,
            span,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}] {}: {}", self.code, self.span, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RelationKind {
    Base,
    Intensional,
    External,
    Abstract,
}

/// What an attribute reference denotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinkTarget {
    /// A binding of a quantifier (by binding node id).
    Binding(NodeId),
    /// A literal join leaf (by leaf node id).
    Literal(NodeId),
    /// The head of the immediately enclosing collection (by collection id).
    Head(NodeId),
    /// A head attribute of an abstract definition, acting as a parameter.
    Parameter(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PredicateClass {
    Assignment,
    Comparison,
    AggregationAssignment,
    AggregationComparison,
}

impl PredicateClass {
    pub fn is_assignment(self) -> bool {
        matches!(
            self,
            PredicateClass::Assignment | PredicateClass::AggregationAssignment
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScopeKind {
    Canvas,
    Collection,
    Quantifier,
    Negation,
    Disjunction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeInfo {
    pub kind: ScopeKind,
    /// Collection or quantifier node, when the scope has one.
    pub node: Option<NodeId>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Base,
    Intensional,
    Abstract,
    External,
    Nested,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindingInfo {
    pub var: String,
    /// Quantifier that introduces the binding.
    pub scope: NodeId,
    pub kind: SourceKind,
    /// Relation name for named and external sources.
    pub relation: Option<String>,
    /// Attribute names, when known statically.
    pub attributes: Option<Vec<String>>,
    pub span: SourceSpan,
    /// Sibling bindings referenced from inside a nested source.
    pub lateral_deps: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralInfo {
    pub var: String,
    pub scope: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentInfo {
    pub collection: NodeId,
    pub attr: String,
    /// Whether the head attribute is the left operand.
    pub head_on_left: bool,
}

/// A join-tree node, addressed by the quantifier that owns the tree and the
/// child-index path from its root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JoinNodeRef {
    pub scope: NodeId,
    pub path: Vec<usize>,
}

/// A program after name resolution.
#[derive(Debug, Clone)]
pub struct LinkedProgram {
    pub program: Program,
    pub scopes: Vec<ScopeInfo>,
    pub links: BTreeMap<NodeId, LinkTarget>,
    pub predicate_class: BTreeMap<NodeId, PredicateClass>,
    pub assignments: BTreeMap<NodeId, AssignmentInfo>,
    pub relation_kinds: BTreeMap<String, RelationKind>,
    pub recursive_defs: BTreeSet<String>,
    pub join_condition_assignment: BTreeMap<NodeId, JoinNodeRef>,
    pub bindings: BTreeMap<NodeId, BindingInfo>,
    pub literals: BTreeMap<NodeId, LiteralInfo>,
    /// Collections by node id, with the head they define and whether they
    /// are abstract definitions.
    pub collections: BTreeMap<NodeId, (String, Vec<String>, bool)>,
    pub registry: ExternalRegistry,
    pub warnings: Vec<Diagnostic>,
}

impl LinkedProgram {
    pub fn link(&self, id: NodeId) -> Option<LinkTarget> {
        self.links.get(&id).copied()
    }

    pub fn class(&self, p: &Predicate) -> PredicateClass {
        self.predicate_class
            .get(&p.meta.id)
            .copied()
            .unwrap_or(PredicateClass::Comparison)
    }

    pub fn is_assignment(&self, p: &Predicate) -> bool {
        self.class(p).is_assignment()
    }

    /// The binding (if any) a reference links to.
    pub fn binding_of(&self, id: NodeId) -> Option<&BindingInfo> {
        match self.link(id)? {
            LinkTarget::Binding(b) => self.bindings.get(&b),
            _ => None,
        }
    }

    /// The quantifier owning the binding or literal leaf a reference links to.
    pub fn owner_scope(&self, id: NodeId) -> Option<NodeId> {
        match self.link(id)? {
            LinkTarget::Binding(b) => self.bindings.get(&b).map(|i| i.scope),
            LinkTarget::Literal(l) => self.literals.get(&l).map(|i| i.scope),
            _ => None,
        }
    }

    /// All quantifier nodes, in preorder.
    pub fn quantifiers(&self) -> Vec<&Quantified> {
        let mut out = Vec::new();
        for d in &self.program.definitions {
            d.collection.body.for_each_quantified(&mut |q| out.push(q));
        }
        match &self.program.main {
            Main::Query(c) => c.body.for_each_quantified(&mut |q| out.push(q)),
            Main::Sentence(f) => f.for_each_quantified(&mut |q| out.push(q)),
        }
        out
    }

    /// Every predicate of the program by node id.
    pub fn predicates(&self) -> BTreeMap<NodeId, &Predicate> {
        let mut out = BTreeMap::new();
        for_each_program_predicate(&self.program, &mut |p| {
            out.insert(p.meta.id, p);
        });
        out
    }
}

pub(crate) fn for_each_program_predicate<'a>(p: &'a Program, f: &mut dyn FnMut(&'a Predicate)) {
    for d in &p.definitions {
        d.collection.body.for_each_predicate(f);
    }
    match &p.main {
        Main::Query(c) => c.body.for_each_predicate(f),
        Main::Sentence(s) => s.for_each_predicate(f),
    }
}

/// Binds a program, returning every resolution error on failure.
pub fn bind(p: &Program, registry: &ExternalRegistry) -> Result<LinkedProgram, Vec<Diagnostic>> {
    let mut program = p.clone();
    program.renumber();
    let mut b = Binder {
        registry,
        frames: Vec::new(),
        nested_stack: Vec::new(),
        diags: Vec::new(),
        lp: LinkedProgram {
            program: Program::sentence(Formula::True),
            scopes: vec![ScopeInfo {
                kind: ScopeKind::Canvas,
                node: None,
                parent: None,
                children: Vec::new(),
            }],
            links: BTreeMap::new(),
            predicate_class: BTreeMap::new(),
            assignments: BTreeMap::new(),
            relation_kinds: BTreeMap::new(),
            recursive_defs: BTreeSet::new(),
            join_condition_assignment: BTreeMap::new(),
            bindings: BTreeMap::new(),
            literals: BTreeMap::new(),
            collections: BTreeMap::new(),
            registry: registry.clone(),
            warnings: Vec::new(),
        },
        defs: BTreeMap::new(),
        head_reads: Vec::new(),
    };
    for d in &program.definitions {
        b.defs.insert(
            d.name().to_string(),
            (d.collection.head.attributes.clone(), d.is_abstract),
        );
        let kind = if d.is_abstract {
            RelationKind::Abstract
        } else {
            RelationKind::Intensional
        };
        b.lp.relation_kinds.insert(d.name().to_string(), kind);
    }
    for d in &program.definitions {
        b.collection(&d.collection, d.is_abstract, 0);
    }
    match &program.main {
        Main::Query(c) => b.collection(c, false, 0),
        Main::Sentence(f) => b.formula(f, 0),
    }
    b.classify(&program);
    let mut diags = b.diags;
    let mut lp = b.lp;
    lp.program = program;
    checks::assign_join_conditions(&mut lp);
    lp.recursive_defs = checks::recursive_defs(&lp);
    diags.extend(check_recursion(&lp));
    diags.sort_by_key(|d| (d.span.start, d.code));
    diags.dedup();
    if diags.iter().any(|d| d.is_error()) {
        return Err(diags);
    }
    lp.warnings = diags;
    Ok(lp)
}

/// Binds and runs every check, including access planning. Returns the linked
/// program with its warnings, or all errors (and warnings) found.
pub fn analyze(p: &Program, registry: &ExternalRegistry) -> Result<LinkedProgram, Vec<Diagnostic>> {
    let mut lp = bind(p, registry)?;
    let mut diags = lp.warnings.clone();
    diags.extend(check_grouping(&lp));
    diags.extend(check_heads(&lp));
    if let Err(ds) = plan_access(&lp) {
        diags.extend(ds);
    }
    diags.sort_by_key(|d| (d.span.start, d.code));
    diags.dedup();
    if diags.iter().any(|d| d.is_error()) {
        return Err(diags);
    }
    lp.warnings = diags;
    Ok(lp)
}

enum Frame {
    Head {
        name: String,
        collection: NodeId,
        attrs: Vec<String>,
        is_abstract: bool,
    },
    Scope {
        quantifier: NodeId,
        vars: Vec<FrameVar>,
    },
}

struct FrameVar {
    name: String,
    target: LinkTarget,
    attrs: Option<Vec<String>>,
    /// Hidden while resolving its own nested source.
    hidden: bool,
}

struct Binder<'a> {
    registry: &'a ExternalRegistry,
    frames: Vec<Frame>,
    /// (quantifier, binding) pairs whose nested source is being resolved.
    nested_stack: Vec<(NodeId, NodeId)>,
    diags: Vec<Diagnostic>,
    lp: LinkedProgram,
    defs: BTreeMap<String, (Vec<String>, bool)>,
    head_reads: Vec<(NodeId, SourceSpan)>,
}

impl<'a> Binder<'a> {
    fn push_scope(&mut self, kind: ScopeKind, node: Option<NodeId>, parent: usize) -> usize {
        let idx = self.lp.scopes.len();
        self.lp.scopes.push(ScopeInfo {
            kind,
            node,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.lp.scopes[parent].children.push(idx);
        idx
    }

    fn collection(&mut self, c: &CollectionExpr, is_abstract: bool, parent: usize) {
        let scope = self.push_scope(ScopeKind::Collection, Some(c.meta.id), parent);
        self.lp.collections.insert(
            c.meta.id,
            (
                c.head.relation.clone(),
                c.head.attributes.clone(),
                is_abstract,
            ),
        );
        self.frames.push(Frame::Head {
            name: c.head.relation.clone(),
            collection: c.meta.id,
            attrs: c.head.attributes.clone(),
            is_abstract,
        });
        self.formula(&c.body, scope);
        self.frames.pop();
    }

    fn formula(&mut self, f: &Formula, scope: usize) {
        match f {
            Formula::Quantified(q) => self.quantified(q, scope),
            Formula::And(cs) => cs.iter().for_each(|c| self.formula(c, scope)),
            Formula::Or(cs) => {
                let s = self.push_scope(ScopeKind::Disjunction, None, scope);
                cs.iter().for_each(|c| self.formula(c, s));
            }
            Formula::Not(c) => {
                let s = self.push_scope(ScopeKind::Negation, None, scope);
                self.formula(c, s);
            }
            Formula::Atom(p) => self.predicate(p),
            Formula::True => {}
        }
    }

    fn quantified(&mut self, q: &Quantified, parent: usize) {
        let scope = self.push_scope(ScopeKind::Quantifier, Some(q.meta.id), parent);
        let qid = q.meta.id;
        let mut vars: Vec<FrameVar> = Vec::new();
        let mut seen = BTreeSet::new();
        for b in &q.bindings {
            if !seen.insert(b.var.clone()) {
                self.diags.push(Diagnostic::error(
                    "E_DUPLICATE_BINDING",
                    b.meta.span,
                    format!("variable `{}` is bound twice in the same quantifier", b.var),
                ));
                continue;
            }
            let (kind, relation, attrs) = match &b.source {
                BindingSource::Named(n) => match self.defs.get(n) {
                    Some((attrs, true)) => {
                        (SourceKind::Abstract, Some(n.clone()), Some(attrs.clone()))
                    }
                    Some((attrs, false)) => (
                        SourceKind::Intensional,
                        Some(n.clone()),
                        Some(attrs.clone()),
                    ),
                    None => {
                        self.lp
                            .relation_kinds
                            .entry(n.clone())
                            .or_insert(RelationKind::Base);
                        (SourceKind::Base, Some(n.clone()), None)
                    }
                },
                BindingSource::External(n) => match self.registry.get(n) {
                    Some(spec) => {
                        self.lp
                            .relation_kinds
                            .insert(n.clone(), RelationKind::External);
                        (
                            SourceKind::External,
                            Some(n.clone()),
                            Some(spec.attributes.clone()),
                        )
                    }
                    None => {
                        self.diags.push(Diagnostic::error(
                            "E_UNKNOWN_EXTERNAL",
                            b.meta.span,
                            format!("external relation `{n}` is not in the registry"),
                        ));
                        (SourceKind::External, Some(n.clone()), None)
                    }
                },
                BindingSource::Nested(c) => {
                    (SourceKind::Nested, None, Some(c.head.attributes.clone()))
                }
            };
            self.lp.bindings.insert(
                b.meta.id,
                BindingInfo {
                    var: b.var.clone(),
                    scope: qid,
                    kind,
                    relation,
                    attributes: attrs.clone(),
                    span: b.meta.span,
                    lateral_deps: Vec::new(),
                },
            );
            vars.push(FrameVar {
                name: b.var.clone(),
                target: LinkTarget::Binding(b.meta.id),
                attrs,
                hidden: false,
            });
        }
        if let Some(j) = &q.joins {
            for (_, var, meta) in j.literals() {
                if !seen.insert(var.to_string()) {
                    self.diags.push(Diagnostic::error(
                        "E_DUPLICATE_BINDING",
                        meta.span,
                        format!("variable `{var}` is bound twice in the same quantifier"),
                    ));
                    continue;
                }
                self.lp.literals.insert(
                    meta.id,
                    LiteralInfo {
                        var: var.to_string(),
                        scope: qid,
                    },
                );
                vars.push(FrameVar {
                    name: var.to_string(),
                    target: LinkTarget::Literal(meta.id),
                    attrs: Some(vec!["val".to_string()]),
                    hidden: false,
                });
            }
            if j.has_outer() {
                for b in &q.bindings {
                    if matches!(b.source, BindingSource::External(_)) {
                        self.diags.push(Diagnostic::error(
                            "E_UNSAFE_EXTERNAL",
                            b.meta.span,
                            format!(
                                "external relation bound by `{}` cannot take part in an outer join",
                                b.var
                            ),
                        ));
                    }
                }
            }
        }
        self.frames.push(Frame::Scope {
            quantifier: qid,
            vars,
        });
        for (i, b) in q.bindings.iter().enumerate() {
            if let BindingSource::Nested(c) = &b.source {
                self.set_hidden(i, true);
                self.nested_stack.push((qid, b.meta.id));
                self.collection(c, false, scope);
                self.nested_stack.pop();
                self.set_hidden(i, false);
            }
        }
        if let Some(g) = &q.grouping {
            if q.polarity == Polarity::NotExists {
                self.diags.push(Diagnostic::warning(
                    "W_NEGATED_GROUPING",
                    q.meta.span,
                    "grouping scope under a negated quantifier",
                ));
            }
            for k in &g.keys {
                self.resolve(k);
                if let Some(LinkTarget::Binding(b)) = self.lp.links.get(&k.meta.id) {
                    if self.lp.bindings.get(b).map(|i| i.scope) != Some(qid) {
                        self.diags.push(Diagnostic::error(
                            "E_GROUP_KEY_SCOPE",
                            k.meta.span,
                            format!(
                                "grouping key `{k}` must reference a binding of its own quantifier"
                            ),
                        ));
                    }
                } else if self.lp.links.contains_key(&k.meta.id) {
                    self.diags.push(Diagnostic::error(
                        "E_GROUP_KEY_SCOPE",
                        k.meta.span,
                        format!(
                            "grouping key `{k}` must reference a binding of its own quantifier"
                        ),
                    ));
                }
            }
        }
        self.formula(&q.body, scope);
        self.frames.pop();
    }

    fn set_hidden(&mut self, idx: usize, hidden: bool) {
        if let Some(Frame::Scope { vars, .. }) = self.frames.last_mut() {
            vars[idx].hidden = hidden;
        }
    }

    fn predicate(&mut self, p: &Predicate) {
        for t in p.terms() {
            let mut refs = Vec::new();
            t.for_each_ref(&mut |a| refs.push(a.clone()));
            for a in refs {
                self.resolve(&a);
            }
        }
    }

    fn resolve(&mut self, a: &crate::alt::AttributeRef) {
        let mut innermost_head = true;
        for fi in (0..self.frames.len()).rev() {
            match &self.frames[fi] {
                Frame::Scope { quantifier, vars } => {
                    let Some(v) = vars.iter().find(|v| v.name == a.var && !v.hidden) else {
                        continue;
                    };
                    let (target, attrs, quantifier) = (v.target, v.attrs.clone(), *quantifier);
                    if let Some(attrs) = attrs {
                        if !attrs.contains(&a.attr) {
                            self.diags.push(Diagnostic::error(
                                "E_UNKNOWN_ATTR",
                                a.meta.span,
                                format!(
                                    "`{}` has no attribute `{}` (has {})",
                                    a.var,
                                    a.attr,
                                    attrs.join(", ")
                                ),
                            ));
                        }
                    }
                    self.lp.links.insert(a.meta.id, target);
                    for (q, b) in &self.nested_stack {
                        if *q == quantifier {
                            let deps = &mut self.lp.bindings.get_mut(b).unwrap().lateral_deps;
                            if let LinkTarget::Binding(t) = target {
                                if !deps.contains(&t) {
                                    deps.push(t);
                                }
                            }
                        }
                    }
                    return;
                }
                Frame::Head {
                    name,
                    collection,
                    attrs,
                    is_abstract,
                } => {
                    if *name != a.var {
                        innermost_head = false;
                        continue;
                    }
                    if !attrs.contains(&a.attr) {
                        self.diags.push(Diagnostic::error(
                            "E_UNKNOWN_ATTR",
                            a.meta.span,
                            format!("head `{name}` has no attribute `{}`", a.attr),
                        ));
                    }
                    if *is_abstract {
                        self.lp
                            .links
                            .insert(a.meta.id, LinkTarget::Parameter(*collection));
                        return;
                    }
                    if !innermost_head {
                        self.diags.push(Diagnostic::error(
                            "E_HEAD_IN_BODY",
                            a.meta.span,
                            format!("`{a}` reads the head of an enclosing collection"),
                        ));
                    }
                    self.lp
                        .links
                        .insert(a.meta.id, LinkTarget::Head(*collection));
                    self.head_reads.push((a.meta.id, a.meta.span));
                    return;
                }
            }
        }
        self.diags.push(Diagnostic::error(
            "E_UNBOUND_VAR",
            a.meta.span,
            format!("`{}` in `{a}` is not bound in scope", a.var),
        ));
    }

    /// Classifies predicates and checks head attributes are only read in
    /// assignment position.
    fn classify(&mut self, program: &Program) {
        let mut head_ok: BTreeSet<NodeId> = BTreeSet::new();
        for c in program.collections() {
            let Some((_, _, is_abstract)) = self.lp.collections.get(&c.meta.id).cloned() else {
                continue;
            };
            let mut candidates = Vec::new();
            collect_candidates(&c.body, c.meta.id, &self.lp.links, &mut candidates, false);
            let cand_ids: BTreeSet<NodeId> = candidates.iter().map(|(p, _)| p.meta.id).collect();
            let mut designated = BTreeSet::new();
            if !is_abstract {
                for branch in branches(&c.body, &cand_ids) {
                    let mut seen_attrs = BTreeSet::new();
                    for pid in branch {
                        let attr = &candidates
                            .iter()
                            .find(|(p, _)| p.meta.id == pid)
                            .unwrap()
                            .1
                            .attr;
                        if seen_attrs.insert(attr.clone()) {
                            designated.insert(pid);
                        }
                    }
                }
            }
            for (p, info) in candidates {
                if let PredicateKind::Compare { left, right, .. } = &p.kind {
                    let head_side = if info.head_on_left { left } else { right };
                    if let Term::Attr(a) = head_side {
                        head_ok.insert(a.meta.id);
                    }
                }
                self.lp.assignments.insert(p.meta.id, info);
                if designated.contains(&p.meta.id) {
                    let class = if p.contains_aggregate() {
                        PredicateClass::AggregationAssignment
                    } else {
                        PredicateClass::Assignment
                    };
                    self.lp.predicate_class.insert(p.meta.id, class);
                }
            }
        }
        let mut all_preds = Vec::new();
        for_each_program_predicate(program, &mut |p| all_preds.push(p));
        for p in all_preds {
            self.lp
                .predicate_class
                .entry(p.meta.id)
                .or_insert(if p.contains_aggregate() {
                    PredicateClass::AggregationComparison
                } else {
                    PredicateClass::Comparison
                });
        }
        for (rid, span) in std::mem::take(&mut self.head_reads) {
            if !head_ok.contains(&rid) {
                self.diags.push(Diagnostic::error(
                    "E_HEAD_IN_BODY",
                    span,
                    "head attribute read outside assignment position",
                ));
            }
        }
    }
}

/// Assignment candidates of collection `cid`: positive equalities with one
/// side a bare attribute of the collection head and no head reads on the
/// other side. Does not descend into nested collections.
fn collect_candidates<'p>(
    f: &'p Formula,
    cid: NodeId,
    links: &BTreeMap<NodeId, LinkTarget>,
    out: &mut Vec<(&'p Predicate, AssignmentInfo)>,
    negated: bool,
) {
    match f {
        Formula::Atom(p) if !negated => {
            if let PredicateKind::Compare {
                op: CmpOp::Eq,
                left,
                right,
            } = &p.kind
            {
                let is_head = |t: &Term| match t {
                    Term::Attr(a) => links.get(&a.meta.id) == Some(&LinkTarget::Head(cid)),
                    _ => false,
                };
                let reads_head = |t: &Term| {
                    let mut any = false;
                    t.for_each_ref(&mut |a| {
                        if links.get(&a.meta.id) == Some(&LinkTarget::Head(cid)) {
                            any = true;
                        }
                    });
                    any
                };
                let side = if is_head(left) && !reads_head(right) {
                    Some((true, left))
                } else if is_head(right) && !reads_head(left) {
                    Some((false, right))
                } else {
                    None
                };
                if let Some((head_on_left, Term::Attr(a))) = side {
                    out.push((
                        p,
                        AssignmentInfo {
                            collection: cid,
                            attr: a.attr.clone(),
                            head_on_left,
                        },
                    ));
                }
            }
        }
        Formula::Atom(_) | Formula::True => {}
        Formula::And(cs) | Formula::Or(cs) => cs
            .iter()
            .for_each(|c| collect_candidates(c, cid, links, out, negated)),
        Formula::Not(c) => collect_candidates(c, cid, links, out, true),
        Formula::Quantified(q) => collect_candidates(
            &q.body,
            cid,
            links,
            out,
            negated || q.polarity == Polarity::NotExists,
        ),
    }
}

const MAX_BRANCHES: usize = 4096;

/// Disjunctive branches of a collection body, each listing the assignment
/// candidates on it in source order. Negated parts contribute nothing.
pub(crate) fn branches(f: &Formula, candidates: &BTreeSet<NodeId>) -> Vec<Vec<NodeId>> {
    match f {
        Formula::Atom(p) if candidates.contains(&p.meta.id) => vec![vec![p.meta.id]],
        Formula::Atom(_) | Formula::True | Formula::Not(_) => vec![Vec::new()],
        Formula::Quantified(q) if q.polarity == Polarity::Exists => branches(&q.body, candidates),
        Formula::Quantified(_) => vec![Vec::new()],
        Formula::Or(cs) => {
            let mut out = Vec::new();
            for c in cs {
                out.extend(branches(c, candidates));
                out.truncate(MAX_BRANCHES);
            }
            out
        }
        Formula::And(cs) => {
            let mut acc: Vec<Vec<NodeId>> = vec![Vec::new()];
            for c in cs {
                let bs = branches(c, candidates);
                let mut next = Vec::new();
                for a in &acc {
                    for b in &bs {
                        let mut m = a.clone();
                        m.extend(b.iter().copied());
                        next.push(m);
                        if next.len() >= MAX_BRANCHES {
                            break;
                        }
                    }
                }
                acc = next;
            }
            acc
        }
    }
}

/// Join-tree path of the lowest node spanning all `vars` leaves.
pub(crate) fn lowest_spanning_node(tree: &JoinTree, vars: &BTreeSet<String>) -> Option<Vec<usize>> {
    fn covers(t: &JoinTree, vars: &BTreeSet<String>) -> bool {
        let leaves: BTreeSet<&str> = t.leaf_vars().into_iter().collect();
        vars.iter().all(|v| leaves.contains(v.as_str()))
    }
    if !covers(tree, vars) {
        return None;
    }
    let mut path = Vec::new();
    let mut node = tree;
    loop {
        let children: Vec<&JoinTree> = match node {
            JoinTree::Inner(cs) => cs.iter().collect(),
            JoinTree::Left(l, r) | JoinTree::Full(l, r) => vec![l, r],
            _ => return Some(path),
        };
        match children.iter().position(|c| covers(c, vars)) {
            Some(i) => {
                path.push(i);
                node = children[i];
            }
            None => return Some(path),
        }
    }
}

#[cfg(test)]
mod tests;
