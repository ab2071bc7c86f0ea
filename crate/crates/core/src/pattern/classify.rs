//! Aggregation patterns of grouping scopes.

use std::fmt;

use crate::alt::{NodeId, PredicateKind};
use crate::binder::LinkedProgram;

/// How a grouping scope relates to the scopes around it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggregationPattern {
    /// From the inside out: groups are formed inside the scope and their
    /// aggregates are read outside.
    Fio,
    /// From the outside in: an outer scope fixes the group through a
    /// correlation predicate and the scope aggregates per outer tuple.
    Foi,
}

impl AggregationPattern {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationPattern::Fio => "FIO",
            AggregationPattern::Foi => "FOI",
        }
    }
}

impl fmt::Display for AggregationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies every grouping scope that carries an aggregation predicate.
/// A scope is FOI when one of its non-aggregate comparisons relates a tuple
/// it binds to a binding owned by an enclosing scope; otherwise FIO.
pub fn classify_aggregation(lp: &LinkedProgram) -> Vec<(NodeId, AggregationPattern)> {
    let mut out = Vec::new();
    for q in lp.quantifiers() {
        if q.grouping.is_none() {
            continue;
        }
        let mut aggregates = false;
        let mut correlated = false;
        q.body.for_each_immediate_predicate(&mut |p| {
            if p.contains_aggregate() {
                aggregates = true;
                return;
            }
            if !matches!(p.kind, PredicateKind::Compare { .. }) {
                return;
            }
            let owners: Vec<Option<NodeId>> =
                p.refs().iter().map(|a| lp.owner_scope(a.meta.id)).collect();
            let local = owners.contains(&Some(q.meta.id));
            let outer = owners
                .iter()
                .any(|o| matches!(o, Some(s) if *s != q.meta.id));
            correlated |= local && outer;
        });
        if aggregates {
            let pattern = if correlated {
                AggregationPattern::Foi
            } else {
                AggregationPattern::Fio
            };
            out.push((q.meta.id, pattern));
        }
    }
    out.sort_by_key(|(id, _)| *id);
    out
}
