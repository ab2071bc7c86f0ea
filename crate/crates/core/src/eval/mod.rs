//! Reference interpreter.
//!
//! Scopes are evaluated as nested loops over their bindings. A quantifier
//! whose body assigns the enclosing head enumerates every satisfying
//! environment; any other quantifier is a satisfaction test. Grouping scopes
//! partition the filtered join and evaluate their aggregate and assignment
//! conjuncts once per group. Recursive definitions are computed by
//! semi-naive iteration.

mod db;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use indexmap::IndexMap;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

pub use db::{value_from_json, value_to_json, Database, DbError, Relation};

use crate::alt::{
    AggFn, BindingSource, CollectionExpr, Formula, JoinTree, Main, NodeId, Polarity, Predicate,
    PredicateKind, Quantified, Term,
};
use crate::binder::{
    invoke, is_post_group, plan_access, Access, Diagnostic, EvaluationOrder, LinkTarget,
    LinkedProgram, PlanStep,
};
use crate::conventions::{empty_aggregate_value, ConventionError, Conventions};
use crate::value::{ArithOp, Value, ValueError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{0}")]
    Value(#[from] ValueError),
    #[error("{0}")]
    Convention(#[from] ConventionError),
    #[error("E_UNKNOWN_RELATION: relation `{0}` is not in the database")]
    UnknownRelation(String),
    #[error("E_UNKNOWN_ATTR: `{relation}` has no attribute `{attr}`")]
    UnknownAttr { relation: String, attr: String },
    #[error("E_ABSTRACT_UNEXPANDED: abstract relation `{0}` must be expanded before evaluation")]
    AbstractUnexpanded(String),
    #[error("E_BAG_RECURSION: recursive definition `{0}` requires set semantics")]
    BagRecursion(String),
    #[error("E_FIXPOINT_CAP: no fixpoint for {{{relations}}} within {cap} iterations")]
    FixpointCap { relations: String, cap: u32 },
    #[error("E_NAME_CLASH: `{0}` is both a definition and a database relation")]
    NameClash(String),
    #[error("E_WRONG_MAIN: expected a {0}")]
    WrongMain(&'static str),
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Plan(Vec<Diagnostic>),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::Value(ValueError::Type { .. }) => "E_TYPE",
            EvalError::Value(ValueError::DivZero) => "E_DIV_ZERO",
            EvalError::Convention(ConventionError::NoNeutral(_)) => "E_NO_NEUTRAL",
            EvalError::Convention(_) => "E_CONVENTION",
            EvalError::UnknownRelation(_) => "E_UNKNOWN_RELATION",
            EvalError::UnknownAttr { .. } => "E_UNKNOWN_ATTR",
            EvalError::AbstractUnexpanded(_) => "E_ABSTRACT_UNEXPANDED",
            EvalError::BagRecursion(_) => "E_BAG_RECURSION",
            EvalError::FixpointCap { .. } => "E_FIXPOINT_CAP",
            EvalError::NameClash(_) => "E_NAME_CLASH",
            EvalError::WrongMain(_) => "E_WRONG_MAIN",
            EvalError::Plan(ds) => ds.first().map(|d| d.code).unwrap_or("E_PLAN"),
        }
    }
}

type R<T> = Result<T, EvalError>;

/// Evaluates the main query of `lp`. Rows are returned in ascending order.
pub fn eval_query(lp: &LinkedProgram, db: &Database, conv: &Conventions) -> R<Relation> {
    let Main::Query(c) = &lp.program.main else {
        return Err(EvalError::WrongMain("query"));
    };
    let ev = Evaluator::new(lp, db, *conv)?;
    ev.prepare_for(&collection_refs(c))?;
    let rows = ev.collection(c, &Env::default())?;
    Ok(Relation {
        name: c.head.relation.clone(),
        schema: c.head.attributes.clone(),
        rows,
    }
    .sorted())
}

/// Evaluates the main sentence of `lp`.
pub fn eval_sentence(lp: &LinkedProgram, db: &Database, conv: &Conventions) -> R<bool> {
    let Main::Sentence(f) = &lp.program.main else {
        return Err(EvalError::WrongMain("sentence"));
    };
    let ev = Evaluator::new(lp, db, *conv)?;
    let mut names = BTreeSet::new();
    formula_refs(f, &mut names);
    ev.prepare_for(&names)?;
    ev.holds(f, &Env::default(), Ctx::top())
}

/// Aggregate over a multiset; nulls are skipped before accumulation.
pub fn eval_aggregate(func: AggFn, values: &[Value], conv: &Conventions) -> R<Value> {
    let vals: Vec<&Value> = values.iter().filter(|v| !v.is_null()).collect();
    if vals.is_empty() {
        return Ok(empty_aggregate_value(func, conv)?);
    }
    let sum = || -> R<Value> {
        let mut acc = vals[0].clone();
        if !acc.is_numeric() {
            return Err(ValueError::Type {
                op: func.name().into(),
                left: acc.describe(),
                right: acc.describe(),
            }
            .into());
        }
        for v in &vals[1..] {
            acc = acc.arith(ArithOp::Add, v, conv.div_zero_is_error())?;
        }
        Ok(acc)
    };
    Ok(match func {
        AggFn::Count => Value::int(vals.len() as i64),
        AggFn::CountDistinct => Value::int(vals.iter().collect::<BTreeSet<_>>().len() as i64),
        AggFn::Sum => sum()?,
        AggFn::Avg => sum()?.arith(
            ArithOp::Div,
            &Value::int(vals.len() as i64),
            conv.div_zero_is_error(),
        )?,
        AggFn::Min | AggFn::Max => {
            let mut best = vals[0];
            for v in &vals[1..] {
                let ord = v.partial_order(best, func.name())?;
                let better = match func {
                    AggFn::Min => ord == Some(std::cmp::Ordering::Less),
                    _ => ord == Some(std::cmp::Ordering::Greater),
                };
                if better {
                    best = v;
                }
            }
            best.clone()
        }
    })
}

/// Computes the recursive stratum containing `names` (and everything it
/// depends on) and returns `db` extended with those relations.
pub fn eval_fixpoint(
    lp: &LinkedProgram,
    names: &[&str],
    db: &Database,
    conv: &Conventions,
) -> R<Database> {
    let ev = Evaluator::new(lp, db, *conv)?;
    let set: BTreeSet<String> = names.iter().map(|s| s.to_string()).collect();
    ev.prepare_for(&set)?;
    let mut out = db.clone();
    for r in ev.materialized.borrow().values() {
        out.insert(Relation::clone(r).sorted());
    }
    Ok(out)
}

#[derive(Clone)]
struct Slot {
    id: NodeId,
    schema: Rc<[String]>,
    row: Rc<[Value]>,
}

#[derive(Clone, Default)]
struct Env {
    slots: Vec<Slot>,
}

impl Env {
    fn with(&self, slot: Slot) -> Env {
        let mut e = self.clone();
        e.slots.push(slot);
        e
    }
}

type Assign = Vec<Option<Value>>;

#[derive(Clone, Copy)]
struct Ctx<'c> {
    head: &'c [String],
    group: Option<&'c [Env]>,
}

impl<'c> Ctx<'c> {
    fn top() -> Ctx<'static> {
        Ctx {
            head: &[],
            group: None,
        }
    }

    fn scoped(self) -> Ctx<'c> {
        Ctx {
            head: self.head,
            group: None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flow {
    Continue,
    Stop,
}

type Sink<'s> = dyn FnMut(&Env, &Assign) -> R<Flow> + 's;

/// Per-quantifier evaluation layout.
struct QInfo<'a> {
    conjuncts: Vec<&'a Formula>,
    /// Conjuncts applied while the join is built.
    filter: Vec<bool>,
    /// Filters that become checkable at each point: index 0 before any
    /// binding is placed, index i+1 after plan step i.
    ready: Vec<Vec<usize>>,
    /// Predicates consumed as join conditions, by join-tree path.
    join_conds: BTreeMap<Vec<usize>, Vec<&'a Predicate>>,
    consumed: Vec<bool>,
    enumerates: bool,
}

struct Evaluator<'a> {
    lp: &'a LinkedProgram,
    db: &'a Database,
    conv: Conventions,
    plan: EvaluationOrder,
    qinfo: BTreeMap<NodeId, QInfo<'a>>,
    base_cache: RefCell<BTreeMap<String, Rc<Relation>>>,
    materialized: RefCell<BTreeMap<String, Rc<Relation>>>,
    overrides: RefCell<BTreeMap<NodeId, Rc<Relation>>>,
}

impl<'a> Evaluator<'a> {
    fn new(lp: &'a LinkedProgram, db: &'a Database, conv: Conventions) -> R<Evaluator<'a>> {
        let plan = plan_access(lp).map_err(EvalError::Plan)?;
        let mut qinfo = BTreeMap::new();
        for q in lp.quantifiers() {
            qinfo.insert(q.meta.id, layout(lp, &plan, q));
        }
        for d in &lp.program.definitions {
            if db.get(d.name()).is_some() {
                return Err(EvalError::NameClash(d.name().to_string()));
            }
        }
        Ok(Evaluator {
            lp,
            db,
            conv,
            plan,
            qinfo,
            base_cache: RefCell::new(BTreeMap::new()),
            materialized: RefCell::new(BTreeMap::new()),
            overrides: RefCell::new(BTreeMap::new()),
        })
    }

    /// Materializes every definition reachable from `names`, dependencies
    /// first.
    fn prepare_for(&self, names: &BTreeSet<String>) -> R<()> {
        let defs: BTreeMap<&str, &CollectionExpr> = self
            .lp
            .program
            .definitions
            .iter()
            .map(|d| (d.name(), &d.collection))
            .collect();
        let abstracts: BTreeSet<&str> = self
            .lp
            .program
            .definitions
            .iter()
            .filter(|d| d.is_abstract)
            .map(|d| d.name())
            .collect();
        let mut reach: BTreeSet<String> = BTreeSet::new();
        let mut todo: Vec<String> = names.iter().cloned().collect();
        while let Some(n) = todo.pop() {
            if abstracts.contains(n.as_str()) {
                return Err(EvalError::AbstractUnexpanded(n));
            }
            let Some(c) = defs.get(n.as_str()) else {
                continue;
            };
            if reach.insert(n.clone()) {
                todo.extend(collection_refs(c));
            }
        }
        let mut g: DiGraph<&str, ()> = DiGraph::new();
        let idx: BTreeMap<&str, _> = reach
            .iter()
            .map(|n| (n.as_str(), g.add_node(n.as_str())))
            .collect();
        for n in &reach {
            for m in collection_refs(defs[n.as_str()]) {
                if let Some(&to) = idx.get(m.as_str()) {
                    g.add_edge(idx[n.as_str()], to, ());
                }
            }
        }
        for comp in tarjan_scc(&g) {
            let mut names: Vec<&str> = comp.iter().map(|i| g[*i]).collect();
            names.sort();
            if names.iter().any(|n| self.lp.recursive_defs.contains(*n)) {
                self.fixpoint(&names, &defs)?;
            } else {
                for n in names {
                    let c = defs[n];
                    let rows = self.collection(c, &Env::default())?;
                    self.store(c, rows);
                }
            }
        }
        Ok(())
    }

    fn store(&self, c: &CollectionExpr, rows: Vec<Vec<Value>>) {
        self.materialized.borrow_mut().insert(
            c.head.relation.clone(),
            Rc::new(Relation {
                name: c.head.relation.clone(),
                schema: c.head.attributes.clone(),
                rows,
            }),
        );
    }

    /// Semi-naive least fixpoint of a recursive stratum.
    fn fixpoint(&self, names: &[&str], defs: &BTreeMap<&str, &CollectionExpr>) -> R<()> {
        if !self.conv.is_set() {
            return Err(EvalError::BagRecursion(names.join(", ")));
        }
        let members: BTreeSet<&str> = names.iter().copied().collect();
        let mut totals: BTreeMap<&str, BTreeSet<Vec<Value>>> = BTreeMap::new();
        for n in names {
            totals.insert(n, BTreeSet::new());
            self.store(defs[n], Vec::new());
        }
        let mut deltas: BTreeMap<&str, Vec<Vec<Value>>> = BTreeMap::new();
        for n in names {
            deltas.insert(n, self.collection(defs[n], &Env::default())?);
        }
        let mut iterations = 1;
        loop {
            let mut grew = false;
            for n in names {
                let t = totals.get_mut(n).unwrap();
                let fresh: Vec<Vec<Value>> = deltas[n]
                    .iter()
                    .filter(|r| !t.contains(*r))
                    .cloned()
                    .collect();
                t.extend(fresh.iter().cloned());
                grew |= !fresh.is_empty();
                deltas.insert(n, fresh);
            }
            for n in names {
                self.store(defs[n], totals[n].iter().cloned().collect());
            }
            if !grew {
                return Ok(());
            }
            iterations += 1;
            if iterations > self.conv.fixpoint_cap {
                return Err(EvalError::FixpointCap {
                    relations: names.join(", "),
                    cap: self.conv.fixpoint_cap,
                });
            }
            let mut next: BTreeMap<&str, Vec<Vec<Value>>> = BTreeMap::new();
            for n in names {
                let c = defs[n];
                let mut rows = Vec::new();
                for (bid, rel) in recursive_occurrences(c, &members) {
                    let delta = &deltas[rel.as_str()];
                    if delta.is_empty() {
                        continue;
                    }
                    let d = defs[rel.as_str()];
                    self.overrides.borrow_mut().insert(
                        bid,
                        Rc::new(Relation {
                            name: rel.clone(),
                            schema: d.head.attributes.clone(),
                            rows: delta.clone(),
                        }),
                    );
                    let r = self.collection(c, &Env::default());
                    self.overrides.borrow_mut().remove(&bid);
                    rows.extend(r?);
                }
                next.insert(n, rows);
            }
            deltas = next;
        }
    }

    fn collection(&self, c: &'a CollectionExpr, env: &Env) -> R<Vec<Vec<Value>>> {
        let ctx = Ctx {
            head: &c.head.attributes,
            group: None,
        };
        let mut rows = Vec::new();
        let init: Assign = vec![None; c.head.attributes.len()];
        self.solve(&c.body, env, &init, ctx, &mut |_, a| {
            rows.push(a.iter().map(|v| v.clone().unwrap_or(Value::Null)).collect());
            Ok(Flow::Continue)
        })?;
        if self.conv.is_set() {
            let mut seen = BTreeSet::new();
            rows.retain(|r: &Vec<Value>| seen.insert(r.clone()));
        }
        Ok(rows)
    }

    /// Whether `f` has at least one solution.
    fn holds(&self, f: &'a Formula, env: &Env, ctx: Ctx) -> R<bool> {
        let mut found = false;
        let dummy: Assign = vec![None; ctx.head.len()];
        self.solve(f, env, &dummy, ctx, &mut |_, _| {
            found = true;
            Ok(Flow::Stop)
        })?;
        Ok(found)
    }

    fn solve(&self, f: &'a Formula, env: &Env, asg: &Assign, ctx: Ctx, k: &mut Sink) -> R<Flow> {
        match f {
            Formula::True => k(env, asg),
            Formula::Atom(p) => {
                if self.lp.is_assignment(p) {
                    let info = &self.lp.assignments[&p.meta.id];
                    let PredicateKind::Compare { left, right, .. } = &p.kind else {
                        unreachable!("assignments are equalities")
                    };
                    let src = if info.head_on_left { right } else { left };
                    let v = self.term(src, env, ctx)?;
                    let i = ctx
                        .head
                        .iter()
                        .position(|a| *a == info.attr)
                        .expect("assigned attribute is in head");
                    let mut next = asg.clone();
                    next[i] = Some(v);
                    k(env, &next)
                } else if self.test(p, env, ctx)? {
                    k(env, asg)
                } else {
                    Ok(Flow::Continue)
                }
            }
            Formula::And(cs) => {
                let parts: Vec<&'a Formula> = cs.iter().collect();
                self.solve_all(&parts, env, asg, ctx, k)
            }
            Formula::Or(cs) => {
                for c in cs {
                    if self.solve(c, env, asg, ctx, k)? == Flow::Stop {
                        return Ok(Flow::Stop);
                    }
                }
                Ok(Flow::Continue)
            }
            Formula::Not(c) => {
                if self.holds(c, env, ctx)? {
                    Ok(Flow::Continue)
                } else {
                    k(env, asg)
                }
            }
            Formula::Quantified(q) => self.quantified(q, env, asg, ctx, k),
        }
    }

    fn solve_all(
        &self,
        parts: &[&'a Formula],
        env: &Env,
        asg: &Assign,
        ctx: Ctx,
        k: &mut Sink,
    ) -> R<Flow> {
        match parts.split_first() {
            None => k(env, asg),
            Some((first, rest)) => self.solve(first, env, asg, ctx, &mut |e, a| {
                self.solve_all(rest, e, a, ctx, k)
            }),
        }
    }

    fn quantified(
        &self,
        q: &'a Quantified,
        env: &Env,
        asg: &Assign,
        ctx: Ctx,
        k: &mut Sink,
    ) -> R<Flow> {
        let info = &self.qinfo[&q.meta.id];
        let inner = ctx.scoped();
        let rest: Vec<&'a Formula> = (0..info.conjuncts.len())
            .filter(|i| !info.filter[*i] && !info.consumed[*i])
            .map(|i| info.conjuncts[i])
            .collect();
        let negated = q.polarity == Polarity::NotExists;
        let enumerate = info.enumerates && !negated;
        if q.grouping.is_none() {
            if enumerate {
                return self.each_env(q, env, inner, &mut |e| {
                    self.solve_all(&rest, e, asg, inner, k)
                });
            }
            let mut found = false;
            self.each_env(q, env, inner, &mut |e| {
                let dummy: Assign = vec![None; ctx.head.len()];
                let mut hit = false;
                self.solve_all(&rest, e, &dummy, inner, &mut |_, _| {
                    hit = true;
                    Ok(Flow::Stop)
                })?;
                found = hit;
                Ok(if hit { Flow::Stop } else { Flow::Continue })
            })?;
            return if found != negated {
                k(env, asg)
            } else {
                Ok(Flow::Continue)
            };
        }
        let keys = &q.grouping.as_ref().unwrap().keys;
        let mut members: Vec<Env> = Vec::new();
        self.each_env(q, env, inner, &mut |e| {
            members.push(e.clone());
            Ok(Flow::Continue)
        })?;
        let mut groups: IndexMap<Vec<Value>, Vec<Env>> = IndexMap::new();
        for m in members {
            let key = keys
                .iter()
                .map(|a| self.lookup(a, &m))
                .collect::<R<Vec<Value>>>()?;
            groups.entry(key).or_default().push(m);
        }
        if keys.is_empty() && groups.is_empty() {
            groups.insert(Vec::new(), Vec::new());
        }
        let mut found = false;
        for (_, group) in &groups {
            let rep = group.first().cloned().unwrap_or_else(|| env.clone());
            let gctx = Ctx {
                head: ctx.head,
                group: Some(group.as_slice()),
            };
            if enumerate {
                let flow = self.solve_all(&rest, &rep, asg, gctx, &mut |_, a| k(env, a))?;
                if flow == Flow::Stop {
                    return Ok(Flow::Stop);
                }
            } else {
                let dummy: Assign = vec![None; ctx.head.len()];
                self.solve_all(&rest, &rep, &dummy, gctx, &mut |_, _| {
                    found = true;
                    Ok(Flow::Stop)
                })?;
                if found {
                    break;
                }
            }
        }
        if enumerate {
            Ok(Flow::Continue)
        } else if found != negated {
            k(env, asg)
        } else {
            Ok(Flow::Continue)
        }
    }

    /// Enumerates the environments of a quantifier's join, with filter
    /// conjuncts applied.
    fn each_env(
        &self,
        q: &'a Quantified,
        env: &Env,
        ctx: Ctx,
        cb: &mut dyn FnMut(&Env) -> R<Flow>,
    ) -> R<Flow> {
        let info = &self.qinfo[&q.meta.id];
        if let Some(tree) = q.joins.as_ref().filter(|j| j.has_outer()) {
            let envs = self.join_tree(q, tree, &mut Vec::new(), env, ctx)?;
            for e in envs {
                if self.filters(
                    info,
                    (0..info.conjuncts.len()).filter(|i| info.filter[*i]),
                    &e,
                    ctx,
                )? && cb(&e)? == Flow::Stop
                {
                    return Ok(Flow::Stop);
                }
            }
            return Ok(Flow::Continue);
        }
        let mut start = env.clone();
        if let Some(tree) = &q.joins {
            for (v, _, meta) in tree.literals() {
                start = start.with(literal_slot(meta.id, v));
            }
        }
        if !self.filters(info, info.ready[0].iter().copied(), &start, ctx)? {
            return Ok(Flow::Continue);
        }
        let steps = self.plan.steps(q.meta.id);
        self.place(q, info, steps, 0, &start, ctx, cb)
    }

    #[allow(clippy::too_many_arguments)]
    fn place(
        &self,
        q: &'a Quantified,
        info: &QInfo<'a>,
        steps: &[PlanStep],
        i: usize,
        env: &Env,
        ctx: Ctx,
        cb: &mut dyn FnMut(&Env) -> R<Flow>,
    ) -> R<Flow> {
        let Some(step) = steps.get(i) else {
            return cb(env);
        };
        let rel = self.rows(q, step, env, ctx)?;
        let schema: Rc<[String]> = rel.schema.clone().into();
        for row in &rel.rows {
            let e = env.with(Slot {
                id: step.binding,
                schema: schema.clone(),
                row: row.clone().into(),
            });
            if !self.filters(info, info.ready[i + 1].iter().copied(), &e, ctx)? {
                continue;
            }
            if self.place(q, info, steps, i + 1, &e, ctx, cb)? == Flow::Stop {
                return Ok(Flow::Stop);
            }
        }
        Ok(Flow::Continue)
    }

    fn filters(
        &self,
        info: &QInfo<'a>,
        idx: impl Iterator<Item = usize>,
        env: &Env,
        ctx: Ctx,
    ) -> R<bool> {
        for i in idx {
            if !self.holds(info.conjuncts[i], env, ctx)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The tuples a binding ranges over in `env`.
    fn rows(&self, q: &'a Quantified, step: &PlanStep, env: &Env, ctx: Ctx) -> R<Rc<Relation>> {
        let b = q
            .bindings
            .iter()
            .find(|b| b.meta.id == step.binding)
            .expect("plan step names a binding");
        match (&b.source, &step.access) {
            (BindingSource::Named(n), _) => self.named(step.binding, n),
            (BindingSource::Nested(c), _) => {
                let rows = self.collection(c, env)?;
                Ok(Rc::new(Relation {
                    name: c.head.relation.clone(),
                    schema: c.head.attributes.clone(),
                    rows,
                }))
            }
            (BindingSource::External(n), Access::External { inputs, .. }) => {
                let spec = self.lp.registry.get(n).expect("external checked by binder");
                let mut bound: Vec<Option<Value>> = vec![None; spec.attributes.len()];
                for (i, t) in inputs {
                    bound[*i] = Some(self.term(t, env, ctx)?);
                }
                let rows = invoke(spec.semantics, &bound, self.conv.div_zero_is_error())?;
                Ok(Rc::new(Relation {
                    name: n.clone(),
                    schema: spec.attributes.clone(),
                    rows,
                }))
            }
            (BindingSource::External(n), _) => Err(EvalError::UnknownRelation(n.clone())),
        }
    }

    fn named(&self, binding: NodeId, name: &str) -> R<Rc<Relation>> {
        if let Some(r) = self.overrides.borrow().get(&binding) {
            return Ok(r.clone());
        }
        if let Some(r) = self.materialized.borrow().get(name) {
            return Ok(r.clone());
        }
        if self
            .lp
            .program
            .definition(name)
            .is_some_and(|d| d.is_abstract)
        {
            return Err(EvalError::AbstractUnexpanded(name.to_string()));
        }
        if let Some(r) = self.base_cache.borrow().get(name) {
            return Ok(r.clone());
        }
        let r = self
            .db
            .get(name)
            .ok_or_else(|| EvalError::UnknownRelation(name.to_string()))?;
        let r = if self.conv.is_set() {
            r.clone().dedup()
        } else {
            r.clone()
        };
        let r = Rc::new(r);
        self.base_cache
            .borrow_mut()
            .insert(name.to_string(), r.clone());
        Ok(r)
    }

    /// Evaluates a join-tree node, extending `env` with the slots of its
    /// leaves. Left and inner nodes evaluate later children per environment
    /// of earlier ones; full joins evaluate both sides independently.
    fn join_tree(
        &self,
        q: &'a Quantified,
        node: &'a JoinTree,
        path: &mut Vec<usize>,
        env: &Env,
        ctx: Ctx,
    ) -> R<Vec<Env>> {
        let info = &self.qinfo[&q.meta.id];
        let conds: &[&Predicate] = info
            .join_conds
            .get(path.as_slice())
            .map(|v| v.as_slice())
            .unwrap_or(&[]);
        let ok = |e: &Env| -> R<bool> {
            for p in conds {
                if !self.test(p, e, ctx)? {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        match node {
            JoinTree::Leaf(v) => {
                let b = q.binding(v).expect("join leaf names a binding");
                let step = self
                    .plan
                    .steps(q.meta.id)
                    .iter()
                    .find(|s| s.binding == b.meta.id)
                    .expect("every binding is planned");
                let rel = self.rows(q, step, env, ctx)?;
                let schema: Rc<[String]> = rel.schema.clone().into();
                Ok(rel
                    .rows
                    .iter()
                    .map(|r| {
                        env.with(Slot {
                            id: b.meta.id,
                            schema: schema.clone(),
                            row: r.clone().into(),
                        })
                    })
                    .collect())
            }
            JoinTree::Literal { value, meta, .. } => {
                Ok(vec![env.with(literal_slot(meta.id, value))])
            }
            JoinTree::Inner(cs) => {
                let mut envs = vec![env.clone()];
                for (i, c) in cs.iter().enumerate() {
                    let mut next = Vec::new();
                    path.push(i);
                    for e in &envs {
                        next.extend(self.join_tree(q, c, path, e, ctx)?);
                    }
                    path.pop();
                    envs = next;
                }
                let mut out = Vec::new();
                for e in envs {
                    if ok(&e)? {
                        out.push(e);
                    }
                }
                Ok(out)
            }
            JoinTree::Left(l, r) => {
                path.push(0);
                let ls = self.join_tree(q, l, path, env, ctx)?;
                path.pop();
                let r_nulls = self.null_slots(q, r)?;
                let mut out = Vec::new();
                for le in ls {
                    path.push(1);
                    let rs = self.join_tree(q, r, path, &le, ctx)?;
                    path.pop();
                    let mut matched = false;
                    for re in rs {
                        if ok(&re)? {
                            matched = true;
                            out.push(re);
                        }
                    }
                    if !matched {
                        let mut e = le.clone();
                        e.slots.extend(r_nulls.iter().cloned());
                        out.push(e);
                    }
                }
                Ok(out)
            }
            JoinTree::Full(l, r) => {
                path.push(0);
                let ls = self.join_tree(q, l, path, env, ctx)?;
                path.pop();
                path.push(1);
                let rs = self.join_tree(q, r, path, env, ctx)?;
                path.pop();
                let base = env.slots.len();
                let l_nulls = self.null_slots(q, l)?;
                let r_nulls = self.null_slots(q, r)?;
                let mut r_matched = vec![false; rs.len()];
                let mut out = Vec::new();
                for le in &ls {
                    let mut matched = false;
                    for (j, re) in rs.iter().enumerate() {
                        let mut e = le.clone();
                        e.slots.extend(re.slots[base..].iter().cloned());
                        if ok(&e)? {
                            matched = true;
                            r_matched[j] = true;
                            out.push(e);
                        }
                    }
                    if !matched {
                        let mut e = le.clone();
                        e.slots.extend(r_nulls.iter().cloned());
                        out.push(e);
                    }
                }
                for (j, re) in rs.iter().enumerate() {
                    if !r_matched[j] {
                        let mut e = env.clone();
                        e.slots.extend(l_nulls.iter().cloned());
                        e.slots.extend(re.slots[base..].iter().cloned());
                        out.push(e);
                    }
                }
                Ok(out)
            }
        }
    }

    /// All-null slots for the leaves of a join subtree.
    fn null_slots(&self, q: &'a Quantified, node: &JoinTree) -> R<Vec<Slot>> {
        let mut out = Vec::new();
        for v in node.leaf_vars() {
            if let Some(b) = q.binding(v) {
                let schema: Vec<String> = match &b.source {
                    BindingSource::Named(n) => match self.materialized.borrow().get(n.as_str()) {
                        Some(r) => r.schema.clone(),
                        None => match self.lp.program.definition(n) {
                            Some(d) => d.collection.head.attributes.clone(),
                            None => self
                                .db
                                .get(n)
                                .ok_or_else(|| EvalError::UnknownRelation(n.clone()))?
                                .schema
                                .clone(),
                        },
                    },
                    BindingSource::Nested(c) => c.head.attributes.clone(),
                    BindingSource::External(n) => self
                        .lp
                        .registry
                        .get(n)
                        .map(|s| s.attributes.clone())
                        .unwrap_or_default(),
                };
                let row = vec![Value::Null; schema.len()];
                out.push(Slot {
                    id: b.meta.id,
                    schema: schema.into(),
                    row: row.into(),
                });
            } else {
                let lit = node
                    .literals()
                    .into_iter()
                    .find(|(_, lv, _)| *lv == v)
                    .map(|(_, _, m)| m.id)
                    .expect("leaf is a binding or literal");
                out.push(literal_slot(lit, &Value::Null));
            }
        }
        Ok(out)
    }

    fn test(&self, p: &Predicate, env: &Env, ctx: Ctx) -> R<bool> {
        match &p.kind {
            PredicateKind::Compare { op, left, right } => {
                let l = self.term(left, env, ctx)?;
                let r = self.term(right, env, ctx)?;
                Ok(l.compare(*op, &r)?)
            }
            PredicateKind::IsNull { term, negated } => {
                Ok(self.term(term, env, ctx)?.is_null() != *negated)
            }
        }
    }

    fn term(&self, t: &Term, env: &Env, ctx: Ctx) -> R<Value> {
        match t {
            Term::Const(v) => Ok(v.clone()),
            Term::Attr(a) => self.lookup(a, env),
            Term::Arith { op, left, right } => {
                let l = self.term(left, env, ctx)?;
                let r = self.term(right, env, ctx)?;
                Ok(l.arith(*op, &r, self.conv.div_zero_is_error())?)
            }
            Term::Agg { func, arg } => {
                let group = ctx
                    .group
                    .expect("aggregates are evaluated inside grouping scopes");
                let vals = group
                    .iter()
                    .map(|m| self.term(arg, m, ctx.scoped()))
                    .collect::<R<Vec<Value>>>()?;
                eval_aggregate(*func, &vals, &self.conv)
            }
        }
    }

    fn lookup(&self, a: &crate::alt::AttributeRef, env: &Env) -> R<Value> {
        let id = match self.lp.link(a.meta.id) {
            Some(LinkTarget::Binding(b)) => b,
            Some(LinkTarget::Literal(l)) => l,
            Some(LinkTarget::Parameter(_)) => {
                return Err(EvalError::AbstractUnexpanded(a.var.clone()))
            }
            _ => unreachable!("binder links every read reference"),
        };
        let slot = env
            .slots
            .iter()
            .rev()
            .find(|s| s.id == id)
            .expect("bound variable is in the environment");
        match slot.schema.iter().position(|s| *s == a.attr) {
            Some(i) => Ok(slot.row[i].clone()),
            None => Err(EvalError::UnknownAttr {
                relation: a.var.clone(),
                attr: a.attr.clone(),
            }),
        }
    }
}

fn literal_slot(id: NodeId, v: &Value) -> Slot {
    Slot {
        id,
        schema: vec!["val".to_string()].into(),
        row: vec![v.clone()].into(),
    }
}

fn layout<'a>(lp: &'a LinkedProgram, plan: &EvaluationOrder, q: &'a Quantified) -> QInfo<'a> {
    let conjuncts = q.body.conjuncts();
    let outer = q.joins.as_ref().is_some_and(|j| j.has_outer());
    let mut join_conds: BTreeMap<Vec<usize>, Vec<&'a Predicate>> = BTreeMap::new();
    let mut consumed = BTreeSet::new();
    for c in &conjuncts {
        if let Formula::Atom(p) = c {
            if let Some(j) = lp.join_condition_assignment.get(&p.meta.id) {
                if j.scope == q.meta.id && outer {
                    join_conds.entry(j.path.clone()).or_default().push(p);
                    consumed.insert(p.meta.id);
                }
            }
        }
    }
    let mut filter = Vec::new();
    let mut deps = Vec::new();
    let mut consumed_flags = Vec::new();
    for c in &conjuncts {
        let is_consumed = matches!(c, Formula::Atom(p) if consumed.contains(&p.meta.id));
        consumed_flags.push(is_consumed);
        let is_filter = !is_consumed
            && !has_assignment(lp, c)
            && !(q.grouping.is_some() && is_post_group(lp, c));
        filter.push(is_filter && !has_immediate_aggregate(c));
        let mut d = BTreeSet::new();
        deep_refs(c, &mut |a| {
            if lp.owner_scope(a) == Some(q.meta.id) {
                match lp.link(a) {
                    Some(LinkTarget::Binding(b)) | Some(LinkTarget::Literal(b)) => {
                        d.insert(b);
                    }
                    _ => {}
                }
            }
        });
        deps.push(d);
    }
    let steps = plan.steps(q.meta.id);
    let mut ready = vec![Vec::new(); steps.len() + 1];
    let mut placed: BTreeSet<NodeId> = BTreeSet::new();
    if let Some(j) = &q.joins {
        placed.extend(j.literals().iter().map(|(_, _, m)| m.id));
    }
    let mut done = vec![false; conjuncts.len()];
    for stage in 0..=steps.len() {
        if stage > 0 {
            placed.insert(steps[stage - 1].binding);
        }
        for (i, d) in deps.iter().enumerate() {
            if filter[i] && !done[i] && d.is_subset(&placed) {
                ready[stage].push(i);
                done[i] = true;
            }
        }
    }
    // a filter whose dependencies never become placed still runs at the end
    for (i, flag) in done.iter().enumerate() {
        if filter[i] && !flag {
            ready[steps.len()].push(i);
        }
    }
    let enumerates = has_assignment(lp, &q.body);
    QInfo {
        conjuncts,
        filter,
        ready,
        join_conds,
        consumed: consumed_flags,
        enumerates,
    }
}

fn has_immediate_aggregate(f: &Formula) -> bool {
    let mut any = false;
    f.for_each_immediate_predicate(&mut |p| any |= p.contains_aggregate());
    any
}

/// Whether `f` assigns the enclosing head (nested collections excluded).
fn has_assignment(lp: &LinkedProgram, f: &Formula) -> bool {
    match f {
        Formula::Atom(p) => lp.is_assignment(p),
        Formula::And(cs) | Formula::Or(cs) => cs.iter().any(|c| has_assignment(lp, c)),
        Formula::Not(c) => has_assignment(lp, c),
        Formula::Quantified(q) => has_assignment(lp, &q.body),
        Formula::True => false,
    }
}

/// Every attribute reference below `f`, including grouping keys and nested
/// collection bodies.
fn deep_refs(f: &Formula, cb: &mut dyn FnMut(NodeId)) {
    match f {
        Formula::Atom(p) => p.for_each_ref(&mut |a| cb(a.meta.id)),
        Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| deep_refs(c, cb)),
        Formula::Not(c) => deep_refs(c, cb),
        Formula::True => {}
        Formula::Quantified(q) => {
            for b in &q.bindings {
                if let BindingSource::Nested(c) = &b.source {
                    deep_refs(&c.body, cb);
                }
            }
            if let Some(g) = &q.grouping {
                g.keys.iter().for_each(|k| cb(k.meta.id));
            }
            deep_refs(&q.body, cb);
        }
    }
}

/// Names of relations bound anywhere in a collection.
fn collection_refs(c: &CollectionExpr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    formula_refs(&c.body, &mut out);
    out
}

fn formula_refs(f: &Formula, out: &mut BTreeSet<String>) {
    f.for_each_quantified(&mut |q| {
        for b in &q.bindings {
            if let BindingSource::Named(n) = &b.source {
                out.insert(n.clone());
            }
        }
    });
}

/// Bindings inside `c` that range over a member of the recursive stratum.
fn recursive_occurrences(c: &CollectionExpr, members: &BTreeSet<&str>) -> Vec<(NodeId, String)> {
    let mut out = Vec::new();
    c.body.for_each_quantified(&mut |q| {
        for b in &q.bindings {
            if let BindingSource::Named(n) = &b.source {
                if members.contains(n.as_str()) {
                    out.push((b.meta.id, n.clone()));
                }
            }
        }
    });
    out
}

#[cfg(test)]
mod tests;
