//! Inlining of abstract relations.
//!
//! A binding `s in S` of an abstract relation `S(a1, .., an)` is replaced by
//! the body of `S`, with each `S.ai` substituted by the term `t` of a guard
//! conjunct `s.ai = t` in the binding's quantifier.

use std::collections::{BTreeMap, BTreeSet};

use crate::alt::{
    AttributeRef, Binding, BindingSource, CollectionExpr, Formula, JoinTree, Main, Polarity,
    PredicateKind, Program, Quantified, Term,
};
use crate::value::CmpOp;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExpandError {
    #[error("E_ABSTRACT_UNEXPANDED: `{var}` binds abstract `{relation}` but `{var}.{attr}` has no guard equality")]
    MissingGuard {
        var: String,
        relation: String,
        attr: String,
    },
    #[error("E_ABSTRACT_UNEXPANDED: `{var}` binds abstract `{relation}` inside a join annotation or grouping scope")]
    Unsupported { var: String, relation: String },
}

/// Inlines every binding of an abstract relation and drops the abstract
/// definitions. Programs without abstract definitions are returned as is.
pub fn expand_abstract(p: &Program) -> Result<Program, ExpandError> {
    let abstracts: BTreeMap<String, CollectionExpr> = p
        .definitions
        .iter()
        .filter(|d| d.is_abstract)
        .map(|d| (d.name().to_string(), d.collection.clone()))
        .collect();
    if abstracts.is_empty() {
        return Ok(p.clone());
    }
    let mut names = BTreeSet::new();
    collect_program_vars(p, &mut names);
    let mut ex = Expander {
        abstracts,
        names,
        counter: 0,
    };
    let mut out = p.clone();
    out.definitions.retain(|d| !d.is_abstract);
    for d in &mut out.definitions {
        ex.collection(&mut d.collection)?;
    }
    match &mut out.main {
        Main::Query(c) => ex.collection(c)?,
        Main::Sentence(f) => ex.formula(f)?,
    }
    out.renumber();
    Ok(out)
}

struct Expander {
    abstracts: BTreeMap<String, CollectionExpr>,
    names: BTreeSet<String>,
    counter: usize,
}

impl Expander {
    fn fresh(&mut self, base: &str) -> String {
        loop {
            self.counter += 1;
            let n = format!("{base}_{}", self.counter);
            if self.names.insert(n.clone()) {
                return n;
            }
        }
    }

    fn collection(&mut self, c: &mut CollectionExpr) -> Result<(), ExpandError> {
        self.formula(&mut c.body)
    }

    fn formula(&mut self, f: &mut Formula) -> Result<(), ExpandError> {
        match f {
            Formula::And(cs) | Formula::Or(cs) => cs.iter_mut().try_for_each(|c| self.formula(c)),
            Formula::Not(c) => self.formula(c),
            Formula::Atom(_) | Formula::True => Ok(()),
            Formula::Quantified(q) => {
                for b in &mut q.bindings {
                    if let BindingSource::Nested(c) = &mut b.source {
                        self.collection(c)?;
                    }
                }
                self.formula(&mut q.body)?;
                if let Some(replacement) = self.quantified(q)? {
                    *f = replacement;
                }
                Ok(())
            }
        }
    }

    /// Expands the abstract bindings of `q`; returns a replacement formula
    /// when no bindings remain.
    fn quantified(&mut self, q: &mut Quantified) -> Result<Option<Formula>, ExpandError> {
        let mut i = 0;
        while i < q.bindings.len() {
            let BindingSource::Named(rel) = &q.bindings[i].source else {
                i += 1;
                continue;
            };
            let Some(def) = self.abstracts.get(rel).cloned() else {
                i += 1;
                continue;
            };
            let var = q.bindings[i].var.clone();
            if q.joins.is_some() || q.grouping.is_some() {
                return Err(ExpandError::Unsupported {
                    var,
                    relation: rel.clone(),
                });
            }
            let mut conjuncts: Vec<Formula> =
                match std::mem::replace(q.body.as_mut(), Formula::True) {
                    Formula::And(cs) => cs,
                    Formula::True => Vec::new(),
                    other => vec![other],
                };
            let mut guards: BTreeMap<String, Term> = BTreeMap::new();
            conjuncts.retain(|c| {
                if let Some((attr, t)) = guard(c, &var) {
                    if let std::collections::btree_map::Entry::Vacant(e) = guards.entry(attr) {
                        e.insert(t);
                        return false;
                    }
                }
                true
            });
            for a in &def.head.attributes {
                if !guards.contains_key(a) {
                    return Err(ExpandError::MissingGuard {
                        var,
                        relation: rel.clone(),
                        attr: a.clone(),
                    });
                }
            }
            // further references to the abstract binding read the guard terms
            for c in &mut conjuncts {
                substitute(c, &var, &guards);
            }
            let mut body = def.body.clone();
            self.rename_bound(&mut body);
            substitute(&mut body, &def.head.relation, &guards);
            conjuncts.push(body);
            *q.body = match conjuncts.len() {
                0 => Formula::True,
                1 => conjuncts.pop().unwrap(),
                _ => Formula::And(conjuncts),
            };
            q.bindings.remove(i);
        }
        if !q.bindings.is_empty() {
            return Ok(None);
        }
        let body = std::mem::replace(q.body.as_mut(), Formula::True);
        Ok(Some(match q.polarity {
            Polarity::Exists => body,
            Polarity::NotExists => Formula::not(body),
        }))
    }

    /// Gives every variable bound inside `f` a fresh name.
    fn rename_bound(&mut self, f: &mut Formula) {
        match f {
            Formula::And(cs) | Formula::Or(cs) => cs.iter_mut().for_each(|c| self.rename_bound(c)),
            Formula::Not(c) => self.rename_bound(c),
            Formula::Atom(_) | Formula::True => {}
            Formula::Quantified(q) => {
                let mut map = BTreeMap::new();
                for b in &mut q.bindings {
                    let n = self.fresh(&b.var);
                    map.insert(b.var.clone(), n.clone());
                    b.var = n;
                }
                if let Some(j) = &mut q.joins {
                    rename_join(j, &mut |v| {
                        if !map.contains_key(v.as_str()) {
                            let n = self.fresh(v);
                            map.insert(v.clone(), n);
                        }
                        *v = map[v.as_str()].clone();
                    });
                }
                for b in &mut q.bindings {
                    if let BindingSource::Nested(c) = &mut b.source {
                        rename_refs(&mut c.body, &map);
                        self.rename_bound(&mut c.body);
                    }
                }
                if let Some(g) = &mut q.grouping {
                    g.keys.iter_mut().for_each(|k| rename_ref(k, &map));
                }
                rename_refs(&mut q.body, &map);
                self.rename_bound(&mut q.body);
            }
        }
    }
}

fn guard(c: &Formula, var: &str) -> Option<(String, Term)> {
    let Formula::Atom(p) = c else { return None };
    let PredicateKind::Compare {
        op: CmpOp::Eq,
        left,
        right,
    } = &p.kind
    else {
        return None;
    };
    let mentions = |t: &Term| t.refs().iter().any(|a| a.var == var);
    match (left, right) {
        (Term::Attr(a), t) if a.var == var && !mentions(t) => Some((a.attr.clone(), t.clone())),
        (t, Term::Attr(a)) if a.var == var && !mentions(t) => Some((a.attr.clone(), t.clone())),
        _ => None,
    }
}

fn rename_ref(a: &mut AttributeRef, map: &BTreeMap<String, String>) {
    if let Some(n) = map.get(&a.var) {
        a.var = n.clone();
    }
}

fn rename_join(j: &mut JoinTree, f: &mut dyn FnMut(&mut String)) {
    match j {
        JoinTree::Leaf(v) => f(v),
        JoinTree::Literal { var, .. } => f(var),
        JoinTree::Inner(cs) => cs.iter_mut().for_each(|c| rename_join(c, f)),
        JoinTree::Left(l, r) | JoinTree::Full(l, r) => {
            rename_join(l, f);
            rename_join(r, f);
        }
    }
}

/// Renames free occurrences of the variables in `map` throughout `f`.
fn rename_refs(f: &mut Formula, map: &BTreeMap<String, String>) {
    map_terms(f, &mut |t| {
        t.for_each_ref_mut(&mut |a| rename_ref(a, map));
    });
}

/// Replaces `var.attr` by `subst[attr]` throughout `f`.
fn substitute(f: &mut Formula, var: &str, subst: &BTreeMap<String, Term>) {
    map_terms(f, &mut |t| substitute_term(t, var, subst));
}

fn substitute_term(t: &mut Term, var: &str, subst: &BTreeMap<String, Term>) {
    match t {
        Term::Attr(a) if a.var == var => {
            if let Some(r) = subst.get(&a.attr) {
                *t = r.clone();
            }
        }
        Term::Arith { left, right, .. } => {
            substitute_term(left, var, subst);
            substitute_term(right, var, subst);
        }
        Term::Agg { arg, .. } => substitute_term(arg, var, subst),
        _ => {}
    }
}

/// Applies `f` to every top-level term of every predicate and grouping key
/// below `formula`, including nested collections.
fn map_terms(formula: &mut Formula, f: &mut dyn FnMut(&mut Term)) {
    match formula {
        Formula::And(cs) | Formula::Or(cs) => cs.iter_mut().for_each(|c| map_terms(c, f)),
        Formula::Not(c) => map_terms(c, f),
        Formula::True => {}
        Formula::Atom(p) => p.terms_mut().into_iter().for_each(&mut *f),
        Formula::Quantified(q) => {
            for b in &mut q.bindings {
                if let BindingSource::Nested(c) = &mut b.source {
                    map_terms(&mut c.body, f);
                }
            }
            if let Some(g) = &mut q.grouping {
                for k in &mut g.keys {
                    let mut t = Term::Attr(k.clone());
                    f(&mut t);
                    if let Term::Attr(a) = t {
                        *k = a;
                    }
                }
            }
            map_terms(&mut q.body, f);
        }
    }
}

fn collect_program_vars(p: &Program, out: &mut BTreeSet<String>) {
    let mut visit = |f: &Formula| {
        f.for_each_quantified(&mut |q| {
            out.extend(q.bindings.iter().map(|b: &Binding| b.var.clone()));
            if let Some(j) = &q.joins {
                out.extend(j.leaf_vars().into_iter().map(String::from));
            }
        })
    };
    for d in &p.definitions {
        visit(&d.collection.body);
    }
    match &p.main {
        Main::Query(c) => visit(&c.body),
        Main::Sentence(f) => visit(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_arc;

    #[test]
    fn inlines_guarded_binding() {
        let p = parse_arc(
            "abstract def S := { S(left, right) | not exists l3 in L [ l3.d = S.left and not exists l4 in L [ l4.b = l3.b and l4.d = S.right ] ] }\n\
             { Q(d) | exists l1 in L [ Q.d = l1.d and not exists l2 in L, s1 in S [ l2.d <> l1.d and s1.left = l1.d and s1.right = l2.d ] ] }",
        )
        .unwrap();
        let e = expand_abstract(&p).unwrap();
        let expected = parse_arc(
            "{ Q(d) | exists l1 in L [ Q.d = l1.d and not exists l2 in L [ l2.d <> l1.d and not exists l3_1 in L [ l3_1.d = l1.d and not exists l4_2 in L [ l4_2.b = l3_1.b and l4_2.d = l2.d ] ] ] ] }",
        )
        .unwrap();
        assert_eq!(e, expected, "{}", crate::print_arc(&e));
    }

    #[test]
    fn missing_guard_is_reported() {
        let p = parse_arc(
            "abstract def S := { S(a, b) | exists l in L [ l.x = S.a and l.y = S.b ] }\n{ Q(d) | exists s in S, r in R [ Q.d = r.d and s.a = r.d ] }",
        )
        .unwrap();
        assert!(matches!(
            expand_abstract(&p),
            Err(ExpandError::MissingGuard { .. })
        ));
    }

    #[test]
    fn sole_binding_collapses_quantifier() {
        let p = parse_arc(
            "abstract def S := { S(a) | exists l in L [ l.x = S.a ] }\n{ Q(d) | exists r in R [ Q.d = r.d and exists s in S [ s.a = r.d ] ] }",
        )
        .unwrap();
        let e = expand_abstract(&p).unwrap();
        let expected =
            parse_arc("{ Q(d) | exists r in R [ Q.d = r.d and exists l_1 in L [ l_1.x = r.d ] ] }")
                .unwrap();
        assert_eq!(e, expected);
    }
}
