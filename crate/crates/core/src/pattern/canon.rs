//! Canonical forms up to range-variable names, conjunct and disjunct order,
//! and binding order.

use std::collections::HashMap;
use std::fmt;

use crate::alt::{
    AttributeRef, Binding, BindingSource, CollectionExpr, Definition, Formula, GroupingOp,
    HeadSpec, JoinTree, Main, Polarity, Predicate, PredicateKind, Program, Quantified, Term,
};
use crate::binder::LinkedProgram;
use crate::syntax::{print_arc, print_formula};
use crate::value::{ArithOp, CmpOp};

/// Upper bound on binding orders tried per scope when breaking ties.
const MAX_CANDIDATES: usize = 720;

/// A program in canonical form together with its printed text, which is the
/// comparison key.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub program: Program,
    text: String,
}

impl CanonicalForm {
    pub fn text(&self) -> &str {
        &self.text
    }
}

impl PartialEq for CanonicalForm {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Eq for CanonicalForm {}

impl fmt::Display for CanonicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Where two canonical forms first diverge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Difference {
    pub path: String,
    pub left: String,
    pub right: String,
}

impl fmt::Display for Difference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "at {}:\n  left:  {}\n  right: {}",
            self.path, self.left, self.right
        )
    }
}

pub fn canonicalize(lp: &LinkedProgram) -> CanonicalForm {
    canonicalize_program(&lp.program)
}

pub fn pattern_equal(a: &LinkedProgram, b: &LinkedProgram) -> bool {
    canonicalize(a) == canonicalize(b)
}

pub fn canonicalize_program(p: &Program) -> CanonicalForm {
    let mut ctx = Ctx::default();
    let mut definitions: Vec<Definition> = p
        .definitions
        .iter()
        .map(|d| Definition {
            is_abstract: d.is_abstract,
            collection: canon_collection(&normalize_collection(&d.collection), &mut ctx, 0, false),
        })
        .collect();
    definitions.sort_by(|a, b| a.name().cmp(b.name()));
    let main = match &p.main {
        Main::Query(c) => Main::Query(canon_collection(
            &normalize_collection(c),
            &mut ctx,
            0,
            false,
        )),
        Main::Sentence(f) => Main::Sentence(canon_formula(&normalize(f), &mut ctx, 0)),
    };
    let mut program = Program { definitions, main };
    Renamer::default().program(&mut program);
    program.renumber();
    let text = print_arc(&program);
    CanonicalForm { program, text }
}

// ---------------------------------------------------------------------------
// normalization

fn normalize_collection(c: &CollectionExpr) -> CollectionExpr {
    CollectionExpr {
        head: c.head.clone(),
        body: normalize(&c.body),
        meta: c.meta,
    }
}

/// `not (exists ...)` becomes `not exists ...`; nested `and`/`or` are
/// flattened; join annotations without outer joins or literals are dropped
/// and nested `inner` nodes are flattened.
fn normalize(f: &Formula) -> Formula {
    match f {
        Formula::Not(inner) => match normalize(inner) {
            Formula::Quantified(mut q) if q.polarity == Polarity::Exists => {
                q.polarity = Polarity::NotExists;
                Formula::Quantified(q)
            }
            g => Formula::Not(Box::new(g)),
        },
        Formula::And(cs) => flatten(cs, true),
        Formula::Or(cs) => flatten(cs, false),
        Formula::Quantified(q) => {
            let bindings = q
                .bindings
                .iter()
                .map(|b| Binding {
                    var: b.var.clone(),
                    source: match &b.source {
                        BindingSource::Nested(c) => {
                            BindingSource::Nested(Box::new(normalize_collection(c)))
                        }
                        s => s.clone(),
                    },
                    meta: b.meta,
                })
                .collect();
            let joins = q
                .joins
                .as_ref()
                .filter(|j| j.has_outer() || !j.literals().is_empty())
                .map(flatten_inner);
            Formula::Quantified(Quantified {
                polarity: q.polarity,
                bindings,
                grouping: q.grouping.clone(),
                joins,
                body: Box::new(normalize(&q.body)),
                meta: q.meta,
            })
        }
        Formula::Atom(_) | Formula::True => f.clone(),
    }
}

fn flatten(cs: &[Formula], is_and: bool) -> Formula {
    let mut out = Vec::new();
    for c in cs {
        match (normalize(c), is_and) {
            (Formula::And(xs), true) | (Formula::Or(xs), false) => out.extend(xs),
            (g, _) => out.push(g),
        }
    }
    if out.len() == 1 {
        return out.pop().expect("one operand");
    }
    if is_and {
        Formula::And(out)
    } else {
        Formula::Or(out)
    }
}

fn flatten_inner(j: &JoinTree) -> JoinTree {
    match j {
        JoinTree::Inner(cs) => {
            let mut out = Vec::new();
            for c in cs {
                match flatten_inner(c) {
                    JoinTree::Inner(xs) => out.extend(xs),
                    x => out.push(x),
                }
            }
            JoinTree::Inner(out)
        }
        JoinTree::Left(l, r) => JoinTree::left(flatten_inner(l), flatten_inner(r)),
        JoinTree::Full(l, r) => JoinTree::full(flatten_inner(l), flatten_inner(r)),
        leaf => leaf.clone(),
    }
}

// ---------------------------------------------------------------------------
// canonical ordering with depth-based names

#[derive(Default, Clone)]
struct Ctx {
    /// Range-variable renamings, innermost last.
    vars: Vec<HashMap<String, String>>,
    /// Attribute renamings of nested bindings, parallel to `vars`.
    attrs: Vec<HashMap<String, HashMap<String, String>>>,
    /// Head renamings: original name to (new name, attribute renaming).
    heads: Vec<(String, String, HashMap<String, String>)>,
}

impl Ctx {
    fn rename_ref(&self, a: &AttributeRef) -> AttributeRef {
        for (scope, attrs) in self.vars.iter().zip(&self.attrs).rev() {
            if let Some(v) = scope.get(&a.var) {
                let attr = attrs.get(&a.var).and_then(|m| m.get(&a.attr));
                return AttributeRef {
                    var: v.clone(),
                    attr: attr.cloned().unwrap_or_else(|| a.attr.clone()),
                    meta: a.meta,
                };
            }
        }
        for (orig, new, attrs) in self.heads.iter().rev() {
            if *orig == a.var {
                return AttributeRef {
                    var: new.clone(),
                    attr: attrs
                        .get(&a.attr)
                        .cloned()
                        .unwrap_or_else(|| a.attr.clone()),
                    meta: a.meta,
                };
            }
        }
        a.clone()
    }
}

/// Nested collections get a depth-based head name and positional attribute
/// names; top-level heads keep theirs.
fn canon_collection(
    c: &CollectionExpr,
    ctx: &mut Ctx,
    depth: usize,
    nested: bool,
) -> CollectionExpr {
    let (name, attrs): (String, Vec<String>) = if nested {
        (
            format!("H{depth}"),
            (1..=c.head.attributes.len())
                .map(|i| format!("a{i}"))
                .collect(),
        )
    } else {
        (c.head.relation.clone(), c.head.attributes.clone())
    };
    let map = if nested {
        positional(&c.head.attributes)
    } else {
        HashMap::new()
    };
    ctx.heads.push((c.head.relation.clone(), name.clone(), map));
    let body = canon_formula(&c.body, ctx, depth);
    ctx.heads.pop();
    let attr_refs: Vec<&str> = attrs.iter().map(|s| s.as_str()).collect();
    CollectionExpr {
        head: HeadSpec::new(&name, &attr_refs),
        body,
        meta: c.meta,
    }
}

fn positional(attrs: &[String]) -> HashMap<String, String> {
    attrs
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), format!("a{}", i + 1)))
        .collect()
}

fn canon_formula(f: &Formula, ctx: &mut Ctx, depth: usize) -> Formula {
    match f {
        Formula::Quantified(q) => Formula::Quantified(canon_quantified(q, ctx, depth)),
        Formula::And(cs) => Formula::And(sorted(
            cs.iter().map(|c| canon_formula(c, ctx, depth)).collect(),
        )),
        Formula::Or(cs) => Formula::Or(sorted(
            cs.iter().map(|c| canon_formula(c, ctx, depth)).collect(),
        )),
        Formula::Not(inner) => Formula::Not(Box::new(canon_formula(inner, ctx, depth))),
        Formula::Atom(p) => Formula::Atom(canon_predicate(p, ctx)),
        Formula::True => Formula::True,
    }
}

fn sorted(mut fs: Vec<Formula>) -> Vec<Formula> {
    fs.sort_by_cached_key(print_formula);
    fs
}

fn canon_term(t: &Term, ctx: &Ctx) -> Term {
    match t {
        Term::Const(v) => Term::Const(v.clone()),
        Term::Attr(a) => Term::Attr(ctx.rename_ref(a)),
        Term::Arith { op, left, right } => {
            let (mut l, mut r) = (canon_term(left, ctx), canon_term(right, ctx));
            if matches!(op, ArithOp::Add | ArithOp::Mul) && key(&r) < key(&l) {
                std::mem::swap(&mut l, &mut r);
            }
            Term::arith(*op, l, r)
        }
        Term::Agg { func, arg } => Term::agg(*func, canon_term(arg, ctx)),
    }
}

fn key(t: &Term) -> String {
    crate::syntax::print_term(t)
}

/// Symmetric comparisons order their sides; `>` and `>=` become `<` and `<=`.
fn canon_predicate(p: &Predicate, ctx: &Ctx) -> Predicate {
    let kind = match &p.kind {
        PredicateKind::Compare { op, left, right } => {
            let (mut op, mut l, mut r) = (*op, canon_term(left, ctx), canon_term(right, ctx));
            match op {
                CmpOp::Eq | CmpOp::Ne => {
                    if key(&r) < key(&l) {
                        std::mem::swap(&mut l, &mut r);
                    }
                }
                CmpOp::Gt | CmpOp::Ge => {
                    op = op.flipped();
                    std::mem::swap(&mut l, &mut r);
                }
                _ => {}
            }
            PredicateKind::Compare {
                op,
                left: l,
                right: r,
            }
        }
        PredicateKind::IsNull { term, negated } => PredicateKind::IsNull {
            term: canon_term(term, ctx),
            negated: *negated,
        },
    };
    Predicate { kind, meta: p.meta }
}

fn binding_key(b: &Binding, ctx: &mut Ctx, depth: usize, siblings: &[&str]) -> String {
    match &b.source {
        BindingSource::Named(n) => format!("0:{n}"),
        BindingSource::External(n) => format!("1:{n}"),
        BindingSource::Nested(c) => {
            ctx.vars.push(
                siblings
                    .iter()
                    .map(|s| (s.to_string(), "_".to_string()))
                    .collect(),
            );
            ctx.attrs.push(HashMap::new());
            let text = {
                let c = canon_collection(c, ctx, depth + 1, true);
                let mut s = String::new();
                s.push_str("2:");
                s.push_str(&print_formula(&c.body));
                s.push_str(&format!("/{}", c.head.attributes.len()));
                s
            };
            ctx.vars.pop();
            ctx.attrs.pop();
            text
        }
    }
}

/// Orders to try: bindings sorted by key, with every permutation inside
/// each group of equal keys (source order if there are too many).
fn candidate_orders(keys: &[String]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|a, b| keys[*a].cmp(&keys[*b]).then(a.cmp(b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if keys[g[0]] == keys[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let total = groups
        .iter()
        .try_fold(1usize, |acc, g| {
            acc.checked_mul((1..=g.len()).product::<usize>())
        })
        .unwrap_or(usize::MAX);
    if total > MAX_CANDIDATES {
        return vec![groups.concat()];
    }
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for g in &groups {
        let perms = permutations(g);
        out = out
            .iter()
            .flat_map(|prefix| {
                perms.iter().map(move |p| {
                    let mut v = prefix.clone();
                    v.extend(p);
                    v
                })
            })
            .collect();
    }
    out
}

fn permutations(xs: &[usize]) -> Vec<Vec<usize>> {
    if xs.len() <= 1 {
        return vec![xs.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let mut rest = xs.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

fn canon_quantified(q: &Quantified, ctx: &mut Ctx, depth: usize) -> Quantified {
    let siblings: Vec<&str> = q.bindings.iter().map(|b| b.var.as_str()).collect();
    let keys: Vec<String> = q
        .bindings
        .iter()
        .map(|b| binding_key(b, ctx, depth, &siblings))
        .collect();
    let mut best: Option<(String, Quantified)> = None;
    for order in candidate_orders(&keys) {
        let cand = quantified_in_order(q, &order, ctx, depth);
        let text = print_formula(&Formula::Quantified(cand.clone()));
        if best.as_ref().is_none_or(|(t, _)| text < *t) {
            best = Some((text, cand));
        }
    }
    best.expect("at least one candidate").1
}

fn quantified_in_order(q: &Quantified, order: &[usize], ctx: &mut Ctx, depth: usize) -> Quantified {
    let mut scope: HashMap<String, String> = HashMap::new();
    for (pos, &i) in order.iter().enumerate() {
        scope.insert(q.bindings[i].var.clone(), format!("v{depth}_{}", pos + 1));
    }
    let literals: Vec<(String, String)> = q
        .joins
        .as_ref()
        .map(|j| {
            j.literals()
                .into_iter()
                .map(|(v, var, _)| (crate::syntax::print_value(v), var.to_string()))
                .collect()
        })
        .unwrap_or_default();
    let mut lit_order: Vec<usize> = (0..literals.len()).collect();
    lit_order.sort_by(|a, b| literals[*a].0.cmp(&literals[*b].0).then(a.cmp(b)));
    for (pos, &i) in lit_order.iter().enumerate() {
        scope.insert(literals[i].1.clone(), format!("w{depth}_{}", pos + 1));
    }
    let attrs = q
        .bindings
        .iter()
        .filter_map(|b| match &b.source {
            BindingSource::Nested(c) => Some((b.var.clone(), positional(&c.head.attributes))),
            _ => None,
        })
        .collect();
    ctx.vars.push(scope);
    ctx.attrs.push(attrs);
    let bindings: Vec<Binding> = order
        .iter()
        .map(|&i| {
            let b = &q.bindings[i];
            let var = ctx.vars.last().expect("scope")[&b.var].clone();
            let source = match &b.source {
                BindingSource::Nested(c) => {
                    BindingSource::Nested(Box::new(canon_collection(c, ctx, depth + 1, true)))
                }
                s => s.clone(),
            };
            Binding {
                var,
                source,
                meta: b.meta,
            }
        })
        .collect();
    let grouping = q.grouping.as_ref().map(|g| {
        let mut keys: Vec<AttributeRef> = g.keys.iter().map(|k| ctx.rename_ref(k)).collect();
        keys.sort_by_cached_key(|k| format!("{}.{}", k.var, k.attr));
        GroupingOp { keys }
    });
    let joins = q.joins.as_ref().map(|j| canon_join(j, ctx));
    let body = canon_formula(&q.body, ctx, depth + 1);
    ctx.vars.pop();
    ctx.attrs.pop();
    Quantified {
        polarity: q.polarity,
        bindings,
        grouping,
        joins,
        body: Box::new(body),
        meta: q.meta,
    }
}

fn join_key(j: &JoinTree) -> String {
    match j {
        JoinTree::Leaf(v) => v.clone(),
        JoinTree::Literal { var, .. } => var.clone(),
        JoinTree::Inner(cs) => format!(
            "inner({})",
            cs.iter().map(join_key).collect::<Vec<_>>().join(",")
        ),
        JoinTree::Left(l, r) => format!("left({},{})", join_key(l), join_key(r)),
        JoinTree::Full(l, r) => format!("full({},{})", join_key(l), join_key(r)),
    }
}

fn canon_join(j: &JoinTree, ctx: &Ctx) -> JoinTree {
    let var = |v: &str| {
        ctx.vars
            .last()
            .and_then(|s| s.get(v))
            .cloned()
            .unwrap_or_else(|| v.to_string())
    };
    match j {
        JoinTree::Leaf(v) => JoinTree::Leaf(var(v)),
        JoinTree::Literal {
            value,
            var: v,
            meta,
        } => JoinTree::Literal {
            value: value.clone(),
            var: var(v),
            meta: *meta,
        },
        JoinTree::Inner(cs) => {
            let mut cs: Vec<JoinTree> = cs.iter().map(|c| canon_join(c, ctx)).collect();
            cs.sort_by_cached_key(join_key);
            JoinTree::Inner(cs)
        }
        JoinTree::Left(l, r) => JoinTree::left(canon_join(l, ctx), canon_join(r, ctx)),
        JoinTree::Full(l, r) => {
            let (mut l, mut r) = (canon_join(l, ctx), canon_join(r, ctx));
            if join_key(&r) < join_key(&l) {
                std::mem::swap(&mut l, &mut r);
            }
            JoinTree::full(l, r)
        }
    }
}

// ---------------------------------------------------------------------------
// final renaming: v1, v2, ... and X1, X2, ... in scope-tree preorder

#[derive(Default)]
struct Renamer {
    vars: Vec<HashMap<String, String>>,
    heads: Vec<(String, String)>,
    next_var: usize,
    next_head: usize,
}

impl Renamer {
    fn program(&mut self, p: &mut Program) {
        for d in &mut p.definitions {
            self.collection(&mut d.collection, false);
        }
        match &mut p.main {
            Main::Query(c) => self.collection(c, false),
            Main::Sentence(f) => self.formula(f),
        }
    }

    fn collection(&mut self, c: &mut CollectionExpr, nested: bool) {
        let orig = c.head.relation.clone();
        if nested {
            self.next_head += 1;
            c.head.relation = format!("X{}", self.next_head);
        }
        self.heads.push((orig, c.head.relation.clone()));
        self.formula(&mut c.body);
        self.heads.pop();
    }

    fn rename(&self, a: &mut AttributeRef) {
        for scope in self.vars.iter().rev() {
            if let Some(v) = scope.get(&a.var) {
                a.var = v.clone();
                return;
            }
        }
        for (orig, new) in self.heads.iter().rev() {
            if *orig == a.var {
                a.var = new.clone();
                return;
            }
        }
    }

    fn formula(&mut self, f: &mut Formula) {
        match f {
            Formula::Quantified(q) => {
                let mut scope = HashMap::new();
                for b in &mut q.bindings {
                    self.next_var += 1;
                    let new = format!("v{}", self.next_var);
                    scope.insert(std::mem::replace(&mut b.var, new.clone()), new);
                }
                if let Some(j) = &q.joins {
                    for (_, var, _) in j.literals() {
                        self.next_var += 1;
                        scope.insert(var.to_string(), format!("v{}", self.next_var));
                    }
                }
                self.vars.push(scope);
                for b in &mut q.bindings {
                    if let BindingSource::Nested(c) = &mut b.source {
                        self.collection(c, true);
                    }
                }
                if let Some(g) = &mut q.grouping {
                    for k in &mut g.keys {
                        self.rename(k);
                    }
                }
                if let Some(j) = &mut q.joins {
                    self.join(j);
                }
                self.formula(&mut q.body);
                self.vars.pop();
            }
            Formula::And(cs) | Formula::Or(cs) => cs.iter_mut().for_each(|c| self.formula(c)),
            Formula::Not(inner) => self.formula(inner),
            Formula::Atom(p) => {
                for t in p.terms_mut() {
                    t.for_each_ref_mut(&mut |a| self.rename(a));
                }
            }
            Formula::True => {}
        }
    }

    fn join(&self, j: &mut JoinTree) {
        let scope = self.vars.last().expect("scope");
        match j {
            JoinTree::Leaf(v) | JoinTree::Literal { var: v, .. } => {
                if let Some(n) = scope.get(v) {
                    *v = n.clone();
                }
            }
            JoinTree::Inner(cs) => cs.iter_mut().for_each(|c| self.join(c)),
            JoinTree::Left(l, r) | JoinTree::Full(l, r) => {
                self.join(l);
                self.join(r);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// first difference

/// The first place, in scope-tree order, where two canonical forms differ.
pub fn first_difference(a: &CanonicalForm, b: &CanonicalForm) -> Option<Difference> {
    if a == b {
        return None;
    }
    let (pa, pb) = (&a.program, &b.program);
    let names = |p: &Program| {
        p.definitions
            .iter()
            .map(|d| d.name().to_string())
            .collect::<Vec<_>>()
    };
    if names(pa) != names(pb) {
        return Some(Difference {
            path: "definitions".to_string(),
            left: names(pa).join(", "),
            right: names(pb).join(", "),
        });
    }
    for (da, db) in pa.definitions.iter().zip(&pb.definitions) {
        if let Some(d) = diff_collection(
            &da.collection,
            &db.collection,
            &format!("def {}", da.name()),
        ) {
            return Some(d);
        }
    }
    match (&pa.main, &pb.main) {
        (Main::Query(x), Main::Query(y)) => diff_collection(x, y, "main"),
        (Main::Sentence(x), Main::Sentence(y)) => diff_formula(x, y, "main"),
        _ => Some(Difference {
            path: "main".to_string(),
            left: main_kind(&pa.main).to_string(),
            right: main_kind(&pb.main).to_string(),
        }),
    }
}

fn main_kind(m: &Main) -> &'static str {
    match m {
        Main::Query(_) => "query",
        Main::Sentence(_) => "sentence",
    }
}

fn diff_collection(a: &CollectionExpr, b: &CollectionExpr, path: &str) -> Option<Difference> {
    if a.head != b.head {
        let h = |h: &HeadSpec| format!("{}({})", h.relation, h.attributes.join(", "));
        return Some(Difference {
            path: format!("{path} head"),
            left: h(&a.head),
            right: h(&b.head),
        });
    }
    diff_formula(&a.body, &b.body, &format!("{path} {}", a.head.relation))
}

fn scope_label(q: &Quantified) -> String {
    let pol = match q.polarity {
        Polarity::Exists => "exists",
        Polarity::NotExists => "not exists",
    };
    let vars: Vec<&str> = q.bindings.iter().map(|b| b.var.as_str()).collect();
    format!("{pol} {}", vars.join(", "))
}

fn header(q: &Quantified) -> String {
    let mut shallow = q.clone();
    shallow.body = Box::new(Formula::True);
    for b in &mut shallow.bindings {
        if let BindingSource::Nested(c) = &mut b.source {
            c.body = Formula::True;
        }
    }
    let text = print_formula(&Formula::Quantified(shallow));
    text.trim_end_matches("[ true ]")
        .trim_end()
        .replace("| true }", "| ... }")
}

fn diff_formula(a: &Formula, b: &Formula, path: &str) -> Option<Difference> {
    if a == b {
        return None;
    }
    let here = || Difference {
        path: path.to_string(),
        left: print_formula(a),
        right: print_formula(b),
    };
    match (a, b) {
        (Formula::Quantified(x), Formula::Quantified(y)) => {
            let p = format!("{path} > {}", scope_label(x));
            if x.polarity != y.polarity
                || x.bindings.len() != y.bindings.len()
                || x.grouping != y.grouping
                || x.joins != y.joins
            {
                return Some(Difference {
                    path: p,
                    left: header(x),
                    right: header(y),
                });
            }
            for (bx, by) in x.bindings.iter().zip(&y.bindings) {
                match (&bx.source, &by.source) {
                    (BindingSource::Nested(cx), BindingSource::Nested(cy)) => {
                        if let Some(d) = diff_collection(cx, cy, &format!("{p} > {} in", bx.var)) {
                            return Some(d);
                        }
                    }
                    (sx, sy) if sx != sy || bx.var != by.var => {
                        return Some(Difference {
                            path: p,
                            left: header(x),
                            right: header(y),
                        })
                    }
                    _ => {}
                }
            }
            diff_formula(&x.body, &y.body, &p)
        }
        (Formula::And(xs), Formula::And(ys)) | (Formula::Or(xs), Formula::Or(ys))
            if xs.len() == ys.len() =>
        {
            xs.iter()
                .zip(ys)
                .find_map(|(x, y)| diff_formula(x, y, path))
                .or_else(|| Some(here()))
        }
        (Formula::Not(x), Formula::Not(y)) => diff_formula(x, y, &format!("{path} > not")),
        _ => Some(here()),
    }
}
