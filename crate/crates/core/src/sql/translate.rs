//! SQL subset to ARC.
//!
//! Correlated scalar subqueries in the select list become lateral nested
//! collections; scalar subqueries under a comparison become a nested scope
//! holding the comparison; `NOT IN` spells out its null checks; `HAVING`
//! selects over an inner grouping collection; `DISTINCT` groups on every
//! output column; constants in outer-join conditions become literal leaves.

use std::collections::BTreeSet;

use super::{FromItem, JoinKind, Select, SelectItem, SqlError, SqlExpr};
use crate::alt::{
    AttributeRef, Binding, CollectionExpr, Formula, GroupingOp, HeadSpec, JoinTree, Main, Meta,
    Polarity, Predicate, PredicateKind, Program, Quantified, SourceSpan, Term,
};
use crate::binder::{Diagnostic, ExternalRegistry};
use crate::eval::Database;
use crate::lex::{is_ident_char, is_ident_start};
use crate::value::{CmpOp, Value};

/// Marker alias for the inner collection of a `HAVING` query.
const GROUPED: &str = "\u{0}grouped";

#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub program: Program,
    pub warnings: Vec<Diagnostic>,
}

/// Translation settings: the external registry decides which `FROM` names
/// are external relations, and an optional schema catalog resolves
/// unqualified columns and `count(*)`.
#[derive(Debug, Clone, Copy)]
pub struct SqlTranslator<'a> {
    registry: &'a ExternalRegistry,
    schemas: Option<&'a Database>,
}

/// Translates with the built-in external registry and no schema catalog.
pub fn translate_sql(ast: &Select) -> Result<Program, SqlError> {
    let registry = ExternalRegistry::default();
    Ok(SqlTranslator::new(&registry).translate(ast)?.program)
}

impl<'a> SqlTranslator<'a> {
    pub fn new(registry: &'a ExternalRegistry) -> SqlTranslator<'a> {
        SqlTranslator {
            registry,
            schemas: None,
        }
    }

    pub fn with_schemas(mut self, db: &'a Database) -> SqlTranslator<'a> {
        self.schemas = Some(db);
        self
    }

    pub fn translate(&self, ast: &Select) -> Result<Translation, SqlError> {
        let mut t = Translator {
            cfg: *self,
            scopes: Vec::new(),
            vars: BTreeSet::new(),
            heads: BTreeSet::new(),
            warnings: Vec::new(),
        };
        let main = if let Some(f) = t.sentence(ast)? {
            Main::Sentence(f)
        } else {
            let head = ast.into.clone().unwrap_or_else(|| "Q".to_string());
            t.heads.insert(head.clone());
            Main::Query(t.collection(ast, head)?)
        };
        let mut program = Program {
            definitions: Vec::new(),
            main,
        };
        program.validate().map_err(|e| {
            SqlError::invalid(
                format!("translation produced an invalid tree: {}", e.reason),
                ast.span,
            )
        })?;
        program.renumber();
        Ok(Translation {
            program,
            warnings: t.warnings,
        })
    }
}

#[derive(Debug, Clone)]
enum ItemKind {
    Table(String),
    Derived(Vec<String>),
    External(String),
    Literal,
}

#[derive(Debug, Clone)]
struct Item {
    alias: String,
    var: String,
    kind: ItemKind,
}

/// Bindings, join tree and `ON` conditions collected from a `FROM` clause.
#[derive(Default)]
struct FromParts {
    bindings: Vec<Binding>,
    trees: Vec<JoinTree>,
    outer: bool,
    on: Vec<Formula>,
}

impl FromParts {
    fn joins(&self) -> Option<JoinTree> {
        if !self.outer {
            return None;
        }
        Some(inner_of(self.trees.clone()))
    }
}

struct Translator<'a> {
    cfg: SqlTranslator<'a>,
    scopes: Vec<Vec<Item>>,
    vars: BTreeSet<String>,
    heads: BTreeSet<String>,
    warnings: Vec<Diagnostic>,
}

type R<T> = Result<T, SqlError>;

fn conj(mut fs: Vec<Formula>) -> Formula {
    let mut flat = Vec::new();
    for f in fs.drain(..) {
        match f {
            Formula::And(cs) => flat.extend(cs),
            Formula::True => {}
            f => flat.push(f),
        }
    }
    match flat.len() {
        0 => Formula::True,
        1 => flat.pop().expect("one conjunct"),
        _ => Formula::And(flat),
    }
}

fn inner_of(trees: Vec<JoinTree>) -> JoinTree {
    let mut flat = Vec::new();
    for t in trees {
        match t {
            JoinTree::Inner(cs) => flat.extend(cs),
            t => flat.push(t),
        }
    }
    if flat.len() == 1 {
        flat.pop().expect("one tree")
    } else {
        JoinTree::Inner(flat)
    }
}

fn cmp(op: CmpOp, left: Term, right: Term) -> Formula {
    Formula::atom(Predicate::compare(op, left, right))
}

fn quantified(
    polarity: Polarity,
    parts: &FromParts,
    grouping: Option<GroupingOp>,
    body: Formula,
) -> Formula {
    Formula::Quantified(Quantified {
        polarity,
        bindings: parts.bindings.clone(),
        grouping,
        joins: parts.joins(),
        body: Box::new(body),
        meta: Meta::default(),
    })
}

fn item_expr(item: &SelectItem) -> R<&SqlExpr> {
    match item {
        SelectItem::Expr { expr, .. } => Ok(expr),
        SelectItem::Star(span) => Err(SqlError::unsupported("SELECT *", *span)),
    }
}

/// Output column name of a select item.
fn item_name(item: &SelectItem, i: usize) -> String {
    match item {
        SelectItem::Expr { alias: Some(a), .. } => a.clone(),
        SelectItem::Expr { expr, .. } => match expr {
            SqlExpr::Column { name, .. } => name.clone(),
            SqlExpr::Agg { func, .. } => func.name().to_string(),
            SqlExpr::Subquery(q) if q.items.len() == 1 => item_name(&q.items[0], 0),
            _ => format!("col{}", i + 1),
        },
        SelectItem::Star(_) => format!("col{}", i + 1),
    }
}

fn unique_names(items: &[SelectItem]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let base = item_name(it, i);
            let mut name = base.clone();
            let mut n = 2;
            while !seen.insert(name.clone()) {
                name = format!("{base}_{n}");
                n += 1;
            }
            name
        })
        .collect()
}

/// A subquery that can be flattened into a quantifier scope.
fn is_flat(q: &Select) -> bool {
    q.group_by.is_empty() && q.having.is_none() && !q.from.is_empty()
}

fn single_aggregate(q: &Select) -> bool {
    q.items.len() == 1
        && matches!(&q.items[0], SelectItem::Expr { expr, .. } if expr.contains_aggregate())
}

fn any_aggregate(q: &Select) -> bool {
    q.items
        .iter()
        .any(|it| matches!(it, SelectItem::Expr { expr, .. } if expr.contains_aggregate()))
}

/// Relation-name-based variable stem: `R2` becomes `r2`.
fn var_stem(alias: &str) -> String {
    let lower = alias.to_lowercase();
    let mut chars = lower.chars();
    if chars.next().is_some_and(is_ident_start) && chars.all(is_ident_char) {
        lower
    } else {
        "f".to_string()
    }
}

fn head_stem(alias: &str) -> String {
    let mut chars = alias.chars();
    match chars.next() {
        Some(c) if is_ident_start(c) && alias.chars().all(is_ident_char) => {
            c.to_uppercase().chain(chars).collect()
        }
        _ => "X".to_string(),
    }
}

impl<'a> Translator<'a> {
    fn fresh(set: &mut BTreeSet<String>, base: &str) -> String {
        let mut name = base.to_string();
        let mut n = 2;
        while set.contains(&name) {
            name = format!("{base}_{n}");
            n += 1;
        }
        set.insert(name.clone());
        name
    }

    fn fresh_var(&mut self, base: &str) -> String {
        Self::fresh(&mut self.vars, base)
    }

    fn fresh_head(&mut self, base: &str) -> String {
        Self::fresh(&mut self.heads, base)
    }

    /// `SELECT [NOT] EXISTS (...)` without `FROM` is a Boolean sentence.
    fn sentence(&mut self, q: &Select) -> R<Option<Formula>> {
        if !q.from.is_empty() || q.items.len() != 1 {
            return Ok(None);
        }
        let e = item_expr(&q.items[0])?;
        let is_exists = match e {
            SqlExpr::Exists(_) => true,
            SqlExpr::Not(inner) => matches!(**inner, SqlExpr::Exists(_)),
            _ => false,
        };
        if !is_exists {
            return Err(SqlError::unsupported(
                "SELECT without FROM other than [NOT] EXISTS",
                q.span,
            ));
        }
        Ok(Some(self.condition(e, false)?))
    }

    /// Translates a query into a collection with head `head`.
    fn collection(&mut self, q: &Select, head: String) -> R<CollectionExpr> {
        let names = unique_names(&q.items);
        let body = self.query_body(q, &head, &names)?;
        let attrs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        Ok(CollectionExpr::new(HeadSpec::new(&head, &attrs), body))
    }

    fn query_body(&mut self, q: &Select, head: &str, names: &[String]) -> R<Formula> {
        if q.from.is_empty() {
            return Err(SqlError::unsupported("subquery without FROM", q.span));
        }
        if q.having.is_some() {
            return self.having_body(q, head, names);
        }
        self.scopes.push(Vec::new());
        let r = self.grouped_or_plain(q, head, names);
        self.scopes.pop();
        r
    }

    fn grouped_or_plain(&mut self, q: &Select, head: &str, names: &[String]) -> R<Formula> {
        let mut parts = self.from_clause(&q.from)?;
        let where_f = self.where_clause(q)?;
        if !q.group_by.is_empty() && q.from.iter().any(|f| f.has_outer_join()) {
            self.warnings.push(Diagnostic::warning(
                "W_KEY_ASSUMPTION",
                q.span,
                "outer join under GROUP BY: the result matches a correlated subquery only if the grouping key is a key of the preserved side",
            ));
        }
        let mut assigns = Vec::new();
        let mut assigned_terms = Vec::new();
        for (it, name) in q.items.iter().zip(names) {
            let e = item_expr(it)?;
            let t = if let SqlExpr::Subquery(sub) = e {
                self.lateral_scalar(sub, name, &mut parts)?
            } else {
                self.term(e, true)?
            };
            assigned_terms.push(t.clone());
            assigns.push(cmp(CmpOp::Eq, Term::attr(head, name), t));
        }
        let mut grouping = None;
        if !q.group_by.is_empty() {
            let keys = q
                .group_by
                .iter()
                .map(|k| match self.term(k, false)? {
                    Term::Attr(a) => Ok(a),
                    _ => Err(SqlError::unsupported("GROUP BY on an expression", k.span())),
                })
                .collect::<R<Vec<_>>>()?;
            if q.distinct {
                let covered = keys
                    .iter()
                    .all(|k| assigned_terms.iter().any(|t| t.as_attr() == Some(k)));
                if !covered {
                    return Err(SqlError::unsupported(
                        "DISTINCT with GROUP BY keys that are not selected",
                        q.span,
                    ));
                }
            }
            grouping = Some(GroupingOp { keys });
        } else if any_aggregate(q) {
            grouping = Some(GroupingOp { keys: Vec::new() });
        } else if q.distinct {
            let keys = assigned_terms
                .iter()
                .map(|t| match t {
                    Term::Attr(a) => Ok(a.clone()),
                    _ => Err(SqlError::unsupported(
                        "DISTINCT over a computed column",
                        q.span,
                    )),
                })
                .collect::<R<Vec<_>>>()?;
            grouping = Some(GroupingOp { keys });
        }
        let mut body = assigns;
        body.append(&mut parts.on);
        body.extend(where_f);
        Ok(quantified(Polarity::Exists, &parts, grouping, conj(body)))
    }

    /// `GROUP BY ... HAVING`: an inner grouping collection carries the
    /// selected columns plus whatever the `HAVING` condition reads, and the
    /// outer scope selects over it.
    fn having_body(&mut self, q: &Select, head: &str, names: &[String]) -> R<Formula> {
        let having = q.having.as_ref().expect("having present");
        let mut columns: Vec<(SqlExpr, String)> = Vec::new();
        for (it, n) in q.items.iter().zip(names) {
            columns.push((item_expr(it)?.clone(), n.clone()));
        }
        let mut taken: BTreeSet<String> = names.iter().cloned().collect();
        collect_having_columns(having, &mut |e: &SqlExpr| {
            if columns.iter().any(|(c, _)| same_expr(c, e)) {
                return;
            }
            let base = match e {
                SqlExpr::Agg { func, .. } => func.name().to_string(),
                SqlExpr::Column { name, .. } => name.clone(),
                _ => "col".to_string(),
            };
            let name = Self::fresh(&mut taken, &base);
            columns.push((e.clone(), name));
        });
        let inner_items: Vec<SelectItem> = columns
            .iter()
            .map(|(e, n)| SelectItem::Expr {
                expr: e.clone(),
                alias: Some(n.clone()),
            })
            .collect();
        let inner_q = Select {
            distinct: false,
            items: inner_items,
            into: None,
            from: q.from.clone(),
            where_clause: q.where_clause.clone(),
            group_by: q.group_by.clone(),
            having: None,
            span: q.span,
        };
        let inner_head = self.fresh_head("X");
        let inner = self.collection(&inner_q, inner_head)?;
        let var = self.fresh_var("x");
        let rewritten = replace_columns(having, &columns);
        self.scopes.push(vec![Item {
            alias: GROUPED.to_string(),
            var: var.clone(),
            kind: ItemKind::Derived(columns.iter().map(|(_, n)| n.clone()).collect()),
        }]);
        let cond = self.condition(&rewritten, false);
        self.scopes.pop();
        let mut body: Vec<Formula> = names
            .iter()
            .map(|n| cmp(CmpOp::Eq, Term::attr(head, n), Term::attr(&var, n)))
            .collect();
        body.push(cond?);
        let parts = FromParts {
            bindings: vec![Binding::nested(&var, inner)],
            ..FromParts::default()
        };
        let grouping = if q.distinct {
            Some(GroupingOp {
                keys: names.iter().map(|n| AttributeRef::new(&var, n)).collect(),
            })
        } else {
            None
        };
        Ok(quantified(Polarity::Exists, &parts, grouping, conj(body)))
    }

    /// A scalar subquery in the select list becomes a lateral binding.
    fn lateral_scalar(&mut self, sub: &Select, name: &str, parts: &mut FromParts) -> R<Term> {
        if !(is_flat(sub) && single_aggregate(sub)) {
            return Err(SqlError::unsupported(
                "scalar subquery in SELECT that is not a single aggregate",
                sub.span,
            ));
        }
        let head = self.fresh_head("X");
        let mut inner = sub.clone();
        if let SelectItem::Expr { alias, .. } = &mut inner.items[0] {
            *alias = Some(name.to_string());
        }
        let coll = self.collection(&inner, head)?;
        let var = self.fresh_var("x");
        parts.bindings.push(Binding::nested(&var, coll));
        parts.trees.push(JoinTree::Leaf(var.clone()));
        self.scopes.last_mut().expect("scope").push(Item {
            alias: format!("\u{0}{var}"),
            var: var.clone(),
            kind: ItemKind::Derived(vec![name.to_string()]),
        });
        Ok(Term::attr(&var, name))
    }

    fn where_clause(&mut self, q: &Select) -> R<Option<Formula>> {
        q.where_clause
            .as_ref()
            .map(|w| self.condition(w, false))
            .transpose()
    }

    #[allow(clippy::wrong_self_convention)]
    fn from_clause(&mut self, from: &[FromItem]) -> R<FromParts> {
        let mut parts = FromParts::default();
        for item in from {
            let tree = self.from_item(item, &mut parts)?;
            parts.trees.push(tree);
        }
        Ok(parts)
    }

    #[allow(clippy::wrong_self_convention)]
    fn from_item(&mut self, item: &FromItem, parts: &mut FromParts) -> R<JoinTree> {
        match item {
            FromItem::Table { name, alias, span } => {
                let alias = alias.clone().unwrap_or_else(|| name.clone());
                self.check_alias(&alias, *span)?;
                let is_base = self.cfg.schemas.is_some_and(|db| db.get(name).is_some());
                let external = !is_base && self.cfg.registry.get(name).is_some();
                let var = self.fresh_var(&var_stem(&alias));
                let (binding, kind) = if external {
                    (
                        Binding::external(&var, name),
                        ItemKind::External(name.clone()),
                    )
                } else {
                    (Binding::named(&var, name), ItemKind::Table(name.clone()))
                };
                parts.bindings.push(binding);
                self.scopes.last_mut().expect("scope").push(Item {
                    alias,
                    var: var.clone(),
                    kind,
                });
                Ok(JoinTree::Leaf(var))
            }
            FromItem::Subquery {
                query, alias, span, ..
            } => {
                self.check_alias(alias, *span)?;
                let head = self.fresh_head(&head_stem(alias));
                let coll = self.collection(query, head)?;
                let columns = coll.head.attributes.clone();
                let var = self.fresh_var(&var_stem(alias));
                parts.bindings.push(Binding::nested(&var, coll));
                self.scopes.last_mut().expect("scope").push(Item {
                    alias: alias.clone(),
                    var: var.clone(),
                    kind: ItemKind::Derived(columns),
                });
                Ok(JoinTree::Leaf(var))
            }
            FromItem::Join {
                kind,
                left,
                right,
                on,
            } => {
                let l = self.from_item(left, parts)?;
                let mut r = self.from_item(right, parts)?;
                let cond = self.condition(on, false)?;
                let l = match kind {
                    JoinKind::Inner => {
                        parts.on.push(cond);
                        return Ok(inner_of(vec![l, r]));
                    }
                    _ => l,
                };
                parts.outer = true;
                let mut literals = Vec::new();
                let lifted = self.lift_constants(cond, &mut literals);
                let local: BTreeSet<String> = self
                    .scopes
                    .last()
                    .expect("scope")
                    .iter()
                    .map(|i| i.var.clone())
                    .collect();
                for c in lifted.conjuncts() {
                    let mut seen = BTreeSet::new();
                    if let Formula::Atom(p) = c {
                        p.for_each_ref(&mut |a| {
                            if local.contains(&a.var) {
                                seen.insert(a.var.clone());
                            }
                        });
                    }
                    if seen.len() < 2 && !matches!(c, Formula::True) {
                        return Err(SqlError::unsupported(
                            "outer-join condition that reads a single relation and no constant",
                            on.span(),
                        ));
                    }
                }
                if !literals.is_empty() {
                    literals.push(r);
                    r = inner_of(literals);
                }
                parts.on.push(lifted);
                Ok(match kind {
                    JoinKind::Left => JoinTree::left(l, r),
                    _ => JoinTree::full(l, r),
                })
            }
        }
    }

    /// Replaces constants in comparisons with literal leaves so that the
    /// condition sits at the outer-join node rather than after it.
    fn lift_constants(&mut self, f: Formula, out: &mut Vec<JoinTree>) -> Formula {
        match f {
            Formula::And(cs) => Formula::And(
                cs.into_iter()
                    .map(|c| self.lift_constants(c, out))
                    .collect(),
            ),
            Formula::Atom(mut p) => {
                if let PredicateKind::Compare { left, right, .. } = &mut p.kind {
                    for side in [left, right] {
                        if let Term::Const(v) = side {
                            if v.is_null() {
                                continue;
                            }
                            let var = self.fresh_var("v");
                            out.push(JoinTree::literal(v.clone(), &var));
                            self.scopes.last_mut().expect("scope").push(Item {
                                alias: format!("\u{0}{var}"),
                                var: var.clone(),
                                kind: ItemKind::Literal,
                            });
                            *side = Term::attr(&var, "val");
                        }
                    }
                }
                Formula::Atom(p)
            }
            f => f,
        }
    }

    fn check_alias(&self, alias: &str, span: SourceSpan) -> R<()> {
        let scope = self.scopes.last().expect("scope");
        if scope.iter().any(|i| i.alias.eq_ignore_ascii_case(alias)) {
            return Err(SqlError::invalid(
                format!("alias `{alias}` is used twice in one FROM clause"),
                span,
            ));
        }
        Ok(())
    }

    fn resolve(&self, qualifier: Option<&str>, name: &str, span: SourceSpan) -> R<Term> {
        let column_of = |item: &Item| -> Option<String> {
            match &item.kind {
                ItemKind::Derived(cols) => cols
                    .iter()
                    .find(|c| *c == name)
                    .or_else(|| cols.iter().find(|c| c.eq_ignore_ascii_case(name)))
                    .cloned(),
                ItemKind::Table(rel) => match self.cfg.schemas.and_then(|db| db.get(rel)) {
                    Some(r) => r.schema.iter().find(|c| *c == name).cloned(),
                    None => Some(name.to_string()),
                },
                ItemKind::External(rel) => match self.cfg.registry.get(rel) {
                    Some(s) => s.attributes.iter().find(|c| *c == name).cloned(),
                    None => Some(name.to_string()),
                },
                ItemKind::Literal => None,
            }
        };
        if let Some(q) = qualifier {
            for scope in self.scopes.iter().rev() {
                let hit = scope
                    .iter()
                    .find(|i| i.alias == q)
                    .or_else(|| scope.iter().find(|i| i.alias.eq_ignore_ascii_case(q)));
                if let Some(item) = hit {
                    return match column_of(item) {
                        Some(col) => Ok(Term::attr(&item.var, &col)),
                        None => Err(SqlError::invalid(
                            format!("`{q}` has no column `{name}`"),
                            span,
                        )),
                    };
                }
            }
            return Err(SqlError::invalid(
                format!("unknown table or alias `{q}`"),
                span,
            ));
        }
        for scope in self.scopes.iter().rev() {
            let visible: Vec<&Item> = scope
                .iter()
                .filter(|i| !matches!(i.kind, ItemKind::Literal))
                .collect();
            let known = |i: &&Item| match &i.kind {
                ItemKind::Table(rel) => self.cfg.schemas.and_then(|db| db.get(rel)).is_some(),
                _ => true,
            };
            let hits: Vec<&Item> = if visible.len() == 1 && visible[0].alias != GROUPED {
                visible.clone()
            } else {
                visible
                    .iter()
                    .copied()
                    .filter(|i| known(i) && column_of(i).is_some())
                    .collect()
            };
            match hits.len() {
                0 if visible.iter().all(known) => continue,
                1 => {
                    let col = column_of(hits[0]).unwrap_or_else(|| name.to_string());
                    return Ok(Term::attr(&hits[0].var, &col));
                }
                _ => {
                    return Err(SqlError::invalid(
                        format!("column `{name}` is ambiguous; qualify it with a table alias"),
                        span,
                    ))
                }
            }
        }
        Err(SqlError::invalid(format!("unknown column `{name}`"), span))
    }

    fn term(&mut self, e: &SqlExpr, agg_ok: bool) -> R<Term> {
        match e {
            SqlExpr::Column {
                qualifier,
                name,
                span,
            } => self.resolve(qualifier.as_deref(), name, *span),
            SqlExpr::Lit(v, _) => Ok(Term::Const(v.clone())),
            SqlExpr::Arith { op, left, right } => Ok(Term::arith(
                *op,
                self.term(left, agg_ok)?,
                self.term(right, agg_ok)?,
            )),
            SqlExpr::Agg { func, arg, span } => {
                if !agg_ok {
                    return Err(SqlError::invalid(
                        "aggregates are only allowed in SELECT and HAVING",
                        *span,
                    ));
                }
                let arg = match arg {
                    Some(a) => {
                        if a.contains_aggregate() {
                            return Err(SqlError::invalid("aggregates cannot be nested", *span));
                        }
                        self.term(a, false)?
                    }
                    None => self.count_star_column(*span)?,
                };
                if arg.refs().is_empty() {
                    return Err(SqlError::unsupported("aggregate over a constant", *span));
                }
                Ok(Term::agg(*func, arg))
            }
            SqlExpr::Subquery(q) => Err(SqlError::unsupported(
                "scalar subquery in this position",
                q.span,
            )),
            other => Err(SqlError::unsupported(
                "condition used as a value",
                other.span(),
            )),
        }
    }

    /// `count(*)` counts the first column of the first relation in scope.
    fn count_star_column(&self, span: SourceSpan) -> R<Term> {
        let scope = self.scopes.last().expect("scope");
        let first = scope.iter().find(|i| !matches!(i.kind, ItemKind::Literal));
        let col = first.and_then(|i| match &i.kind {
            ItemKind::Derived(cols) => cols.first().cloned(),
            ItemKind::Table(rel) => self
                .cfg
                .schemas
                .and_then(|db| db.get(rel))
                .and_then(|r| r.schema.first().cloned()),
            ItemKind::External(rel) => self
                .cfg
                .registry
                .get(rel)
                .and_then(|s| s.attributes.first().cloned()),
            ItemKind::Literal => None,
        });
        match (first, col) {
            (Some(i), Some(c)) => Ok(Term::attr(&i.var, &c)),
            _ => Err(SqlError::unsupported(
                "COUNT(*) without a schema for the first relation",
                span,
            )),
        }
    }

    fn condition(&mut self, e: &SqlExpr, agg_ok: bool) -> R<Formula> {
        match e {
            SqlExpr::And(xs) => Ok(conj(
                xs.iter()
                    .map(|x| self.condition(x, agg_ok))
                    .collect::<R<_>>()?,
            )),
            SqlExpr::Or(xs) => {
                let mut out = Vec::new();
                for x in xs {
                    match self.condition(x, agg_ok)? {
                        Formula::Or(cs) => out.extend(cs),
                        f => out.push(f),
                    }
                }
                Ok(Formula::Or(out))
            }
            SqlExpr::Not(inner) => match &**inner {
                SqlExpr::Exists(q) => self.subquery_scope(q, Polarity::NotExists, Link::None),
                SqlExpr::In {
                    expr,
                    query,
                    negated,
                } => self.in_subquery(expr, query, !negated),
                other => Ok(Formula::not(self.condition(other, agg_ok)?)),
            },
            SqlExpr::Exists(q) => self.subquery_scope(q, Polarity::Exists, Link::None),
            SqlExpr::In {
                expr,
                query,
                negated,
            } => self.in_subquery(expr, query, *negated),
            SqlExpr::Cmp { op, left, right } => match (&**left, &**right) {
                (SqlExpr::Subquery(_), SqlExpr::Subquery(_)) => Err(SqlError::unsupported(
                    "comparison between two subqueries",
                    e.span(),
                )),
                (outer, SqlExpr::Subquery(q)) => {
                    let t = self.term(outer, agg_ok)?;
                    self.subquery_scope(
                        q,
                        Polarity::Exists,
                        Link::Cmp {
                            op: *op,
                            outer: t,
                            outer_left: true,
                        },
                    )
                }
                (SqlExpr::Subquery(q), outer) => {
                    let t = self.term(outer, agg_ok)?;
                    self.subquery_scope(
                        q,
                        Polarity::Exists,
                        Link::Cmp {
                            op: *op,
                            outer: t,
                            outer_left: false,
                        },
                    )
                }
                (l, r) => Ok(cmp(*op, self.term(l, agg_ok)?, self.term(r, agg_ok)?)),
            },
            SqlExpr::IsNull { expr, negated } => Ok(Formula::atom(Predicate::is_null(
                self.term(expr, agg_ok)?,
                *negated,
            ))),
            SqlExpr::Lit(Value::Bool(true), _) => Ok(Formula::True),
            SqlExpr::Lit(Value::Bool(false), _) => Ok(Formula::not(Formula::True)),
            other => Err(SqlError::unsupported(
                "value used as a condition",
                other.span(),
            )),
        }
    }

    fn in_subquery(&mut self, expr: &SqlExpr, query: &Select, negated: bool) -> R<Formula> {
        if query.items.len() != 1 {
            return Err(SqlError::invalid(
                "IN subquery must select one column",
                query.span,
            ));
        }
        let outer = self.term(expr, false)?;
        if negated {
            self.subquery_scope(query, Polarity::NotExists, Link::NotIn(outer))
        } else {
            self.subquery_scope(query, Polarity::Exists, Link::In(outer))
        }
    }

    /// A subquery under `EXISTS`, `IN` or a comparison becomes a quantifier
    /// scope; its single output column, if needed, is linked by `link`.
    fn subquery_scope(&mut self, q: &Select, polarity: Polarity, link: Link) -> R<Formula> {
        let agg = any_aggregate(q);
        let needs_value = !matches!(link, Link::None);
        let flat =
            is_flat(q) && (!agg || (single_aggregate(q) && matches!(link, Link::Cmp { .. })));
        if flat {
            self.scopes.push(Vec::new());
            let r = (|| {
                let mut parts = self.from_clause(&q.from)?;
                let where_f = self.where_clause(q)?;
                let mut body = std::mem::take(&mut parts.on);
                body.extend(where_f);
                if needs_value {
                    if q.items.len() != 1 {
                        return Err(SqlError::invalid("subquery must select one column", q.span));
                    }
                    let value = self.term(item_expr(&q.items[0])?, agg)?;
                    body.push(link.formula(value));
                }
                let grouping = agg.then(|| GroupingOp { keys: Vec::new() });
                Ok(quantified(polarity, &parts, grouping, conj(body)))
            })();
            self.scopes.pop();
            return r;
        }
        let head = self.fresh_head("X");
        let coll = self.collection(q, head)?;
        let var = self.fresh_var("x");
        let body = match &link {
            Link::None => Formula::True,
            _ => link.formula(Term::attr(&var, &coll.head.attributes[0])),
        };
        let parts = FromParts {
            bindings: vec![Binding::nested(&var, coll)],
            ..FromParts::default()
        };
        Ok(quantified(polarity, &parts, None, body))
    }
}

enum Link {
    None,
    In(Term),
    NotIn(Term),
    Cmp {
        op: CmpOp,
        outer: Term,
        outer_left: bool,
    },
}

impl Link {
    fn formula(&self, value: Term) -> Formula {
        match self {
            Link::None => Formula::True,
            Link::In(outer) => cmp(CmpOp::Eq, value, outer.clone()),
            Link::NotIn(outer) => Formula::Or(vec![
                cmp(CmpOp::Eq, value.clone(), outer.clone()),
                Formula::atom(Predicate::is_null(value, false)),
                Formula::atom(Predicate::is_null(outer.clone(), false)),
            ]),
            Link::Cmp {
                op,
                outer,
                outer_left,
            } => {
                if *outer_left {
                    cmp(*op, outer.clone(), value)
                } else {
                    cmp(*op, value, outer.clone())
                }
            }
        }
    }
}

/// Aggregates and bare columns read by a `HAVING` condition.
fn collect_having_columns(e: &SqlExpr, f: &mut dyn FnMut(&SqlExpr)) {
    match e {
        SqlExpr::Agg { .. } | SqlExpr::Column { .. } => f(e),
        SqlExpr::Lit(..) => {}
        SqlExpr::Arith { left, right, .. } | SqlExpr::Cmp { left, right, .. } => {
            collect_having_columns(left, f);
            collect_having_columns(right, f);
        }
        SqlExpr::And(xs) | SqlExpr::Or(xs) => xs.iter().for_each(|x| collect_having_columns(x, f)),
        SqlExpr::Not(x) | SqlExpr::IsNull { expr: x, .. } | SqlExpr::In { expr: x, .. } => {
            collect_having_columns(x, f)
        }
        SqlExpr::Exists(_) | SqlExpr::Subquery(_) => {}
    }
}

/// Structural equality ignoring spans.
fn same_expr(a: &SqlExpr, b: &SqlExpr) -> bool {
    match (a, b) {
        (
            SqlExpr::Column {
                qualifier: qa,
                name: na,
                ..
            },
            SqlExpr::Column {
                qualifier: qb,
                name: nb,
                ..
            },
        ) => qa == qb && na == nb,
        (SqlExpr::Lit(x, _), SqlExpr::Lit(y, _)) => x == y,
        (
            SqlExpr::Arith {
                op: oa,
                left: la,
                right: ra,
            },
            SqlExpr::Arith {
                op: ob,
                left: lb,
                right: rb,
            },
        ) => oa == ob && same_expr(la, lb) && same_expr(ra, rb),
        (
            SqlExpr::Agg {
                func: fa, arg: aa, ..
            },
            SqlExpr::Agg {
                func: fb, arg: ab, ..
            },
        ) => {
            fa == fb
                && match (aa, ab) {
                    (Some(x), Some(y)) => same_expr(x, y),
                    (None, None) => true,
                    _ => false,
                }
        }
        _ => false,
    }
}

/// Rewrites `HAVING` so that aggregates and columns read the grouped
/// collection.
fn replace_columns(e: &SqlExpr, columns: &[(SqlExpr, String)]) -> SqlExpr {
    if let Some((_, n)) = columns.iter().find(|(c, _)| same_expr(c, e)) {
        return SqlExpr::Column {
            qualifier: Some(GROUPED.to_string()),
            name: n.clone(),
            span: e.span(),
        };
    }
    let rec = |x: &SqlExpr| Box::new(replace_columns(x, columns));
    match e {
        SqlExpr::Arith { op, left, right } => SqlExpr::Arith {
            op: *op,
            left: rec(left),
            right: rec(right),
        },
        SqlExpr::Cmp { op, left, right } => SqlExpr::Cmp {
            op: *op,
            left: rec(left),
            right: rec(right),
        },
        SqlExpr::And(xs) => SqlExpr::And(xs.iter().map(|x| replace_columns(x, columns)).collect()),
        SqlExpr::Or(xs) => SqlExpr::Or(xs.iter().map(|x| replace_columns(x, columns)).collect()),
        SqlExpr::Not(x) => SqlExpr::Not(rec(x)),
        SqlExpr::IsNull { expr, negated } => SqlExpr::IsNull {
            expr: rec(expr),
            negated: *negated,
        },
        other => other.clone(),
    }
}
