//! Legality checks over a bound program.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::{branches, lowest_spanning_node, Diagnostic, JoinNodeRef, LinkTarget, LinkedProgram};
use crate::alt::{
    AttributeRef, BindingSource, CollectionExpr, Formula, Main, NodeId, Polarity, Predicate,
    Quantified,
};

/// Whether a top-level conjunct of a grouping scope is evaluated per group:
/// it carries an aggregate outside nested quantifiers, or an assignment.
pub fn is_post_group(lp: &LinkedProgram, f: &Formula) -> bool {
    let mut post = false;
    f.for_each_immediate_predicate(&mut |p| {
        if p.contains_aggregate() || lp.is_assignment(p) {
            post = true;
        }
    });
    post
}

/// Aggregates need a grouping scope; post-group conjuncts may only read
/// grouping keys of their own scope outside aggregates.
pub fn check_grouping(lp: &LinkedProgram) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let no_group = |p: &Predicate, out: &mut Vec<Diagnostic>| {
        if p.contains_aggregate() {
            out.push(Diagnostic::error(
                "E_AGG_NO_GROUP",
                p.meta.span,
                "aggregate outside a grouping scope",
            ));
        }
    };
    for c in lp.program.collections() {
        c.body
            .for_each_immediate_predicate(&mut |p| no_group(p, &mut out));
    }
    if let Main::Sentence(f) = &lp.program.main {
        f.for_each_immediate_predicate(&mut |p| no_group(p, &mut out));
    }
    for q in lp.quantifiers() {
        let Some(g) = &q.grouping else {
            q.body.for_each_immediate_predicate(&mut |p| {
                if p.contains_aggregate() {
                    out.push(Diagnostic::error(
                        "E_AGG_NO_GROUP",
                        p.meta.span,
                        "aggregate in a scope without a grouping operator",
                    ));
                }
            });
            continue;
        };
        let keys: BTreeSet<&AttributeRef> = g.keys.iter().collect();
        for c in q.body.conjuncts() {
            if !is_post_group(lp, c) {
                continue;
            }
            c.for_each_immediate_predicate(&mut |p| {
                for t in p.terms() {
                    t.for_each_ref_outside_agg(&mut |a| {
                        if lp.owner_scope(a.meta.id) == Some(q.meta.id) && !keys.contains(a) {
                            out.push(Diagnostic::error(
                                "E_NONKEY_REF_POST_GROUP",
                                a.meta.span,
                                format!("`{a}` is neither a grouping key nor inside an aggregate"),
                            ));
                        }
                    });
                }
            });
        }
    }
    out
}

/// Every head attribute is assigned exactly once on every disjunctive branch.
pub fn check_heads(lp: &LinkedProgram) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let preds = lp.predicates();
    for c in lp.program.collections() {
        let Some((name, attrs, is_abstract)) = lp.collections.get(&c.meta.id) else {
            continue;
        };
        if *is_abstract {
            continue;
        }
        let cands: BTreeSet<NodeId> = lp
            .assignments
            .iter()
            .filter(|(_, a)| a.collection == c.meta.id)
            .map(|(id, _)| *id)
            .collect();
        let bs = branches(&c.body, &cands);
        let many = bs.len() > 1;
        for (k, branch) in bs.iter().enumerate() {
            let mut by_attr: BTreeMap<&str, Vec<NodeId>> = BTreeMap::new();
            for pid in branch {
                by_attr
                    .entry(lp.assignments[pid].attr.as_str())
                    .or_default()
                    .push(*pid);
            }
            for attr in attrs {
                let on_branch = if many {
                    format!(" on branch {}", k + 1)
                } else {
                    String::new()
                };
                match by_attr.get(attr.as_str()).map(|v| v.as_slice()) {
                    None | Some([]) => out.push(Diagnostic::error(
                        "E_HEAD_UNASSIGNED",
                        c.meta.span,
                        format!("head attribute `{name}.{attr}` is not assigned{on_branch}"),
                    )),
                    Some([_]) => {}
                    Some([_, second, ..]) => out.push(Diagnostic::error(
                        "E_HEAD_MULTIASSIGNED",
                        preds
                            .get(second)
                            .map(|p| p.meta.span)
                            .unwrap_or(c.meta.span),
                        format!(
                            "head attribute `{name}.{attr}` is assigned more than once{on_branch}"
                        ),
                    )),
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
struct EdgeFlags {
    negation: bool,
    grouping: bool,
    outer_join: bool,
}

impl EdgeFlags {
    fn any(self) -> bool {
        self.negation || self.grouping || self.outer_join
    }

    fn describe(self) -> String {
        let mut parts = Vec::new();
        if self.negation {
            parts.push("negation");
        }
        if self.grouping {
            parts.push("grouping");
        }
        if self.outer_join {
            parts.push("outer join");
        }
        parts.join(" and ")
    }
}

struct DepEdge {
    from: String,
    to: String,
    flags: EdgeFlags,
    span: crate::alt::SourceSpan,
}

fn dependency_edges(lp: &LinkedProgram) -> Vec<DepEdge> {
    let defs: BTreeSet<&str> = lp.program.definitions.iter().map(|d| d.name()).collect();
    let mut out = Vec::new();
    for d in &lp.program.definitions {
        collect_deps_collection(
            &d.collection,
            d.name(),
            &defs,
            EdgeFlags::default(),
            &mut out,
        );
    }
    out
}

fn collect_deps_collection(
    c: &CollectionExpr,
    from: &str,
    defs: &BTreeSet<&str>,
    flags: EdgeFlags,
    out: &mut Vec<DepEdge>,
) {
    collect_deps(&c.body, from, defs, flags, out);
}

fn collect_deps(
    f: &Formula,
    from: &str,
    defs: &BTreeSet<&str>,
    flags: EdgeFlags,
    out: &mut Vec<DepEdge>,
) {
    match f {
        Formula::And(cs) | Formula::Or(cs) => cs
            .iter()
            .for_each(|c| collect_deps(c, from, defs, flags, out)),
        Formula::Not(c) => collect_deps(
            c,
            from,
            defs,
            EdgeFlags {
                negation: true,
                ..flags
            },
            out,
        ),
        Formula::Atom(_) | Formula::True => {}
        Formula::Quantified(q) => {
            let inner = quantifier_flags(q, flags);
            for b in &q.bindings {
                match &b.source {
                    BindingSource::Named(n) if defs.contains(n.as_str()) => out.push(DepEdge {
                        from: from.to_string(),
                        to: n.clone(),
                        flags: inner,
                        span: b.meta.span,
                    }),
                    BindingSource::Nested(c) => collect_deps_collection(c, from, defs, inner, out),
                    _ => {}
                }
            }
            collect_deps(&q.body, from, defs, inner, out);
        }
    }
}

fn quantifier_flags(q: &Quantified, flags: EdgeFlags) -> EdgeFlags {
    EdgeFlags {
        negation: flags.negation || q.polarity == Polarity::NotExists,
        grouping: flags.grouping || q.grouping.is_some(),
        outer_join: flags.outer_join || q.joins.as_ref().is_some_and(|j| j.has_outer()),
    }
}

/// Strongly connected components of the definition dependency graph, with
/// the edges inside each.
fn cyclic_components(lp: &LinkedProgram) -> Vec<(Vec<String>, Vec<DepEdge>)> {
    let edges = dependency_edges(lp);
    let mut g: DiGraph<String, ()> = DiGraph::new();
    let mut idx: BTreeMap<String, NodeIndex> = BTreeMap::new();
    for d in &lp.program.definitions {
        idx.insert(d.name().to_string(), g.add_node(d.name().to_string()));
    }
    for e in &edges {
        g.add_edge(idx[&e.from], idx[&e.to], ());
    }
    let mut out = Vec::new();
    let mut edges = edges;
    for comp in tarjan_scc(&g) {
        let names: BTreeSet<String> = comp.iter().map(|i| g[*i].clone()).collect();
        let (inside, rest): (Vec<DepEdge>, Vec<DepEdge>) = edges
            .into_iter()
            .partition(|e| names.contains(&e.from) && names.contains(&e.to));
        edges = rest;
        if comp.len() > 1 || !inside.is_empty() {
            out.push((names.into_iter().collect(), inside));
        }
    }
    out
}

pub(crate) fn recursive_defs(lp: &LinkedProgram) -> BTreeSet<String> {
    cyclic_components(lp)
        .into_iter()
        .flat_map(|(names, _)| names)
        .collect()
}

/// Recursion may not pass through negation, grouping or outer joins.
pub fn check_recursion(lp: &LinkedProgram) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (names, edges) in cyclic_components(lp) {
        for e in edges.iter().filter(|e| e.flags.any()) {
            out.push(Diagnostic::error(
                "E_UNSTRATIFIED",
                e.span,
                format!(
                    "recursive cycle {{{}}}: `{}` uses `{}` under {}",
                    names.join(", "),
                    e.from,
                    e.to,
                    e.flags.describe()
                ),
            ));
        }
    }
    out
}

/// Maps predicates of outer-join scopes that mention two or more local join
/// leaves to the lowest join-tree node spanning them.
pub(crate) fn assign_join_conditions(lp: &mut LinkedProgram) {
    let mut found = Vec::new();
    for q in lp.quantifiers() {
        let Some(tree) = q.joins.as_ref().filter(|j| j.has_outer()) else {
            continue;
        };
        for c in q.body.conjuncts() {
            let Formula::Atom(p) = c else { continue };
            if p.contains_aggregate() {
                continue;
            }
            let mut vars = BTreeSet::new();
            let mut head = false;
            p.for_each_ref(&mut |a| match lp.link(a.meta.id) {
                Some(LinkTarget::Head(_)) => head = true,
                Some(_) if lp.owner_scope(a.meta.id) == Some(q.meta.id) => {
                    vars.insert(a.var.clone());
                }
                _ => {}
            });
            if head || vars.len() < 2 {
                continue;
            }
            if let Some(path) = lowest_spanning_node(tree, &vars) {
                found.push((
                    p.meta.id,
                    JoinNodeRef {
                        scope: q.meta.id,
                        path,
                    },
                ));
            }
        }
    }
    lp.join_condition_assignment.extend(found);
}
