//! Binding order per scope, driven by external-relation access patterns.

use std::collections::{BTreeMap, BTreeSet};

use super::{Diagnostic, LinkTarget, LinkedProgram, SourceKind};
use crate::alt::{BindingSource, Formula, NodeId, PredicateKind, Quantified, Term};
use crate::value::CmpOp;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Access {
    /// Enumerate a stored or materialized relation.
    Scan,
    /// Evaluate a nested collection under the current environment.
    Lateral,
    /// Invoke an external relation; `inputs` gives, per bound attribute
    /// position, the term supplying its value.
    External {
        pattern: String,
        inputs: Vec<(usize, Term)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub binding: NodeId,
    pub var: String,
    pub access: Access,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvaluationOrder {
    /// Steps per quantifier node.
    pub scopes: BTreeMap<NodeId, Vec<PlanStep>>,
}

impl EvaluationOrder {
    pub fn steps(&self, quantifier: NodeId) -> &[PlanStep] {
        self.scopes
            .get(&quantifier)
            .map(|s| s.as_slice())
            .unwrap_or(&[])
    }
}

/// Orders the bindings of every scope so that nested collections follow the
/// siblings they read and each external relation is reached with an
/// admissible access pattern.
pub fn plan_access(lp: &LinkedProgram) -> Result<EvaluationOrder, Vec<Diagnostic>> {
    let mut order = EvaluationOrder::default();
    let mut diags = Vec::new();
    for q in lp.quantifiers() {
        match plan_scope(lp, q) {
            Ok(steps) => {
                order.scopes.insert(q.meta.id, steps);
            }
            Err(ds) => diags.extend(ds),
        }
    }
    if diags.is_empty() {
        Ok(order)
    } else {
        Err(diags)
    }
}

fn plan_scope(lp: &LinkedProgram, q: &Quantified) -> Result<Vec<PlanStep>, Vec<Diagnostic>> {
    let mut placed: BTreeSet<NodeId> = BTreeSet::new();
    let mut steps = Vec::new();
    let mut remaining: Vec<usize> = (0..q.bindings.len()).collect();
    let leaf_order: Vec<&str> = q.joins.as_ref().map(|j| j.leaf_vars()).unwrap_or_default();
    let outer = q.joins.as_ref().is_some_and(|j| j.has_outer());
    while !remaining.is_empty() {
        let mut pick: Option<(usize, Access)> = None;
        for external_pass in [false, true] {
            for (ri, &bi) in remaining.iter().enumerate() {
                let b = &q.bindings[bi];
                let is_external = matches!(b.source, BindingSource::External(_));
                if is_external != external_pass {
                    continue;
                }
                let access = match &b.source {
                    BindingSource::Named(_) => Some(Access::Scan),
                    BindingSource::Nested(_) => {
                        let deps = &lp.bindings[&b.meta.id].lateral_deps;
                        deps.iter()
                            .all(|d| placed.contains(d))
                            .then_some(Access::Lateral)
                    }
                    BindingSource::External(_) => external_access(lp, q, b.meta.id, &placed),
                };
                if let Some(a) = access {
                    pick = Some((ri, a));
                    break;
                }
            }
            if pick.is_some() {
                break;
            }
        }
        let Some((ri, access)) = pick else {
            let mut ds = Vec::new();
            for &bi in &remaining {
                let b = &q.bindings[bi];
                let info = &lp.bindings[&b.meta.id];
                if info.kind == SourceKind::External {
                    ds.push(Diagnostic::error(
                        "E_UNSAFE_EXTERNAL",
                        b.meta.span,
                        format!(
                            "no admissible access pattern for `{}` (bound as `{}`) in scope {}",
                            info.relation.as_deref().unwrap_or("?"),
                            b.var,
                            q.meta.id
                        ),
                    ));
                } else {
                    ds.push(Diagnostic::error(
                        "E_CYCLIC_LATERAL",
                        b.meta.span,
                        format!("nested collection bound to `{}` depends on itself through its siblings", b.var),
                    ));
                }
            }
            return Err(ds);
        };
        let bi = remaining.remove(ri);
        let b = &q.bindings[bi];
        placed.insert(b.meta.id);
        steps.push(PlanStep {
            binding: b.meta.id,
            var: b.var.clone(),
            access,
        });
    }
    if outer {
        // join trees are evaluated left to right, so lateral reads must
        // point to earlier leaves
        let pos = |v: &str| leaf_order.iter().position(|l| *l == v);
        let mut ds = Vec::new();
        for b in &q.bindings {
            for d in &lp.bindings[&b.meta.id].lateral_deps {
                let dv = &lp.bindings[d].var;
                if pos(dv) >= pos(&b.var) {
                    ds.push(Diagnostic::error(
                        "E_CYCLIC_LATERAL",
                        b.meta.span,
                        format!(
                            "`{}` reads `{dv}`, which comes later in the join annotation",
                            b.var
                        ),
                    ));
                }
            }
        }
        if !ds.is_empty() {
            return Err(ds);
        }
    }
    Ok(steps)
}

/// The most-bound admissible pattern for external binding `fid` given the
/// bindings placed so far, with the terms supplying each bound attribute.
fn external_access(
    lp: &LinkedProgram,
    q: &Quantified,
    fid: NodeId,
    placed: &BTreeSet<NodeId>,
) -> Option<Access> {
    let info = &lp.bindings[&fid];
    let spec = lp.registry.get(info.relation.as_deref()?)?;
    let available = |t: &Term| {
        let mut ok = !t.contains_aggregate();
        t.for_each_ref(&mut |a| match lp.link(a.meta.id) {
            Some(LinkTarget::Binding(b)) => {
                let inside = lp.bindings.get(&b).map(|i| i.scope) == Some(q.meta.id);
                if b == fid || (inside && !placed.contains(&b)) {
                    ok = false;
                }
            }
            Some(LinkTarget::Literal(_)) | Some(LinkTarget::Parameter(_)) => {}
            Some(LinkTarget::Head(_)) | None => ok = false,
        });
        ok
    };
    let mut inputs: BTreeMap<usize, Term> = BTreeMap::new();
    for c in q.body.conjuncts() {
        let Formula::Atom(p) = c else { continue };
        let PredicateKind::Compare {
            op: CmpOp::Eq,
            left,
            right,
        } = &p.kind
        else {
            continue;
        };
        for (side, other) in [(left, right), (right, left)] {
            let Term::Attr(a) = side else { continue };
            if lp.link(a.meta.id) != Some(LinkTarget::Binding(fid)) || !available(other) {
                continue;
            }
            if let Some(i) = spec.attributes.iter().position(|x| *x == a.attr) {
                inputs.entry(i).or_insert_with(|| other.clone());
            }
        }
    }
    let best = spec
        .patterns
        .iter()
        .filter(|p| {
            p.chars()
                .enumerate()
                .all(|(i, c)| c == 'f' || inputs.contains_key(&i))
        })
        .max_by_key(|p| {
            (
                p.chars().filter(|c| *c == 'b').count(),
                std::cmp::Reverse((*p).clone()),
            )
        })?;
    let used = best
        .chars()
        .enumerate()
        .filter(|(_, c)| *c == 'b')
        .map(|(i, _)| (i, inputs[&i].clone()))
        .collect();
    Some(Access::External {
        pattern: best.clone(),
        inputs: used,
    })
}
