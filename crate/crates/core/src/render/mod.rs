//! The diagrammatic modality: scopes become nested regions, bindings become
//! tables with attribute ports and predicates become edges between ports.

mod dot;
#[cfg(test)]
mod tests;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::alt::{
    BindingSource, CollectionExpr, Formula, JoinTree, Main, NodeId, Polarity, Predicate,
    PredicateKind, Quantified, Term,
};
use crate::binder::{LinkTarget, LinkedProgram, SourceKind};
use crate::syntax::{print_join_tree, print_name, print_term, print_value};

pub use dot::to_dot;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Canvas,
    Collection,
    Quantifier,
    Negation,
    Disjunction,
    /// The expansion of an abstract relation at one use site.
    Module,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Region {
    pub id: usize,
    pub parent: Option<usize>,
    pub kind: RegionKind,
    pub label: String,
    /// Grouping scopes are drawn with a double boundary.
    pub double_border: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub site: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Table,
    Intensional,
    External,
    Nested,
    Head,
    Literal,
    Expression,
    Module,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Port {
    pub name: String,
    /// Grouping keys are shaded.
    pub shaded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Node {
    pub id: String,
    pub region: usize,
    pub kind: NodeKind,
    pub title: String,
    pub ports: Vec<Port>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub site: Option<usize>,
}

impl Node {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Endpoint {
    pub node: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub port: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// A comparison or null test.
    Predicate,
    /// An assignment into a head attribute, directed towards the head.
    Assignment,
    /// From an attribute to an expression that reads it.
    Operand,
    /// From a nested collection's head to the binding ranging over it.
    Binds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub from: Endpoint,
    pub to: Endpoint,
    pub kind: EdgeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Endpoints on the optional side of an outer join.
    pub optional_from: bool,
    pub optional_to: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub site: Option<usize>,
}

/// One use of an abstract relation: a module box plus its expansion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModuleSite {
    pub name: String,
    pub node: String,
    pub parent: Option<usize>,
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HigraphDoc {
    pub regions: Vec<Region>,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub modules: Vec<ModuleSite>,
}

#[derive(Debug, Clone, Default)]
pub struct RenderOptions {
    /// Abstract relations drawn as single module boxes.
    pub collapse: BTreeSet<String>,
}

impl HigraphDoc {
    fn site_visible(&self, site: Option<usize>) -> bool {
        let mut s = site;
        while let Some(i) = s {
            if self.modules[i].collapsed {
                return false;
            }
            s = self.modules[i].parent;
        }
        true
    }

    pub fn visible_regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| self.site_visible(r.site))
    }

    pub fn visible_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| self.site_visible(n.site))
    }

    pub fn visible_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| self.site_visible(e.site))
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.visible_edges().filter(|e| e.kind == kind).count()
    }

    /// Hides the expansion of every use of `name`, leaving its module box.
    pub fn collapse(&mut self, name: &str) {
        self.set_collapsed(name, true);
    }

    pub fn expand(&mut self, name: &str) {
        self.set_collapsed(name, false);
    }

    fn set_collapsed(&mut self, name: &str, collapsed: bool) {
        for m in &mut self.modules {
            if m.name == name {
                m.collapsed = collapsed;
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("render document serializes")
    }
}

/// Builds the diagram of a bound program.
pub fn to_higraph(lp: &LinkedProgram, options: &RenderOptions) -> HigraphDoc {
    let mut b = Builder {
        lp,
        doc: HigraphDoc {
            regions: Vec::new(),
            nodes: Vec::new(),
            edges: Vec::new(),
            modules: Vec::new(),
        },
        used: BTreeSet::new(),
        bindings: HashMap::new(),
        literals: HashMap::new(),
        heads: HashMap::new(),
        params: Vec::new(),
        site: None,
        defs: lp
            .program
            .definitions
            .iter()
            .filter(|d| d.is_abstract)
            .map(|d| (d.name().to_string(), &d.collection))
            .collect(),
    };
    let canvas = b.region(None, RegionKind::Canvas, String::new());
    for d in &lp.program.definitions {
        b.collection(&d.collection, canvas);
    }
    match &lp.program.main {
        Main::Query(c) => b.collection(c, canvas),
        Main::Sentence(f) => b.formula(f, canvas),
    }
    let mut doc = b.doc;
    for name in &options.collapse {
        doc.collapse(name);
    }
    doc
}

struct Builder<'a> {
    lp: &'a LinkedProgram,
    doc: HigraphDoc,
    used: BTreeSet<String>,
    bindings: HashMap<NodeId, String>,
    literals: HashMap<NodeId, String>,
    heads: HashMap<NodeId, String>,
    /// Module boxes standing for abstract heads, innermost last.
    params: Vec<String>,
    site: Option<usize>,
    defs: BTreeMap<String, &'a CollectionExpr>,
}

fn is_plain(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl<'a> Builder<'a> {
    fn fresh(&mut self, base: &str) -> String {
        let base = if is_plain(base) {
            base.to_string()
        } else {
            "n".to_string()
        };
        let mut id = base.clone();
        let mut i = 2;
        while self.used.contains(&id) {
            id = format!("{base}_{i}");
            i += 1;
        }
        self.used.insert(id.clone());
        id
    }

    fn region(&mut self, parent: Option<usize>, kind: RegionKind, label: String) -> usize {
        let id = self.doc.regions.len();
        self.doc.regions.push(Region {
            id,
            parent,
            kind,
            label,
            double_border: false,
            site: self.site,
        });
        id
    }

    fn node(
        &mut self,
        base: &str,
        region: usize,
        kind: NodeKind,
        title: String,
        ports: &[String],
    ) -> String {
        let id = self.fresh(base);
        self.doc.nodes.push(Node {
            id: id.clone(),
            region,
            kind,
            title,
            ports: ports
                .iter()
                .map(|p| Port {
                    name: p.clone(),
                    shaded: false,
                })
                .collect(),
            site: self.site,
        });
        id
    }

    fn port_mut(&mut self, node: &str, port: &str) -> &mut Port {
        let n = self
            .doc
            .nodes
            .iter_mut()
            .rev()
            .find(|n| n.id == node)
            .expect("node exists");
        if let Some(i) = n.ports.iter().position(|p| p.name == port) {
            return &mut n.ports[i];
        }
        n.ports.push(Port {
            name: port.to_string(),
            shaded: false,
        });
        n.ports.last_mut().expect("just pushed")
    }

    fn edge(
        &mut self,
        from: Endpoint,
        to: Endpoint,
        kind: EdgeKind,
        label: Option<String>,
    ) -> usize {
        self.doc.edges.push(Edge {
            from,
            to,
            kind,
            label,
            optional_from: false,
            optional_to: false,
            site: self.site,
        });
        self.doc.edges.len() - 1
    }

    fn collection(&mut self, c: &CollectionExpr, parent: usize) {
        let h = &c.head;
        let label = format!("{}({})", print_name(&h.relation), h.attributes.join(", "));
        let region = self.region(Some(parent), RegionKind::Collection, label);
        let head = self.node(
            &h.relation,
            region,
            NodeKind::Head,
            print_name(&h.relation),
            &h.attributes,
        );
        self.heads.insert(c.meta.id, head);
        self.formula(&c.body, region);
    }

    fn formula(&mut self, f: &Formula, region: usize) {
        match f {
            Formula::Quantified(q) => self.quantified(q, region),
            Formula::And(cs) => cs.iter().for_each(|c| self.formula(c, region)),
            Formula::Or(cs) => {
                let r = self.region(Some(region), RegionKind::Disjunction, "∨".to_string());
                cs.iter().for_each(|c| self.formula(c, r));
            }
            Formula::Not(c) => {
                let r = self.region(Some(region), RegionKind::Negation, "¬".to_string());
                self.formula(c, r);
            }
            Formula::Atom(p) => self.predicate(p, region),
            Formula::True => {}
        }
    }

    fn quantified(&mut self, q: &Quantified, parent: usize) {
        let mut label = match q.polarity {
            Polarity::Exists => "∃".to_string(),
            Polarity::NotExists => "¬∃".to_string(),
        };
        if let Some(g) = &q.grouping {
            let keys: Vec<String> = g.keys.iter().map(|k| k.to_string()).collect();
            label.push_str(&format!(" γ({})", keys.join(", ")));
        }
        if let Some(j) = &q.joins {
            label.push(' ');
            label.push_str(&print_join_tree(j));
        }
        let region = self.region(Some(parent), RegionKind::Quantifier, label);
        self.doc.regions[region].double_border = q.grouping.is_some();
        let mut nested = Vec::new();
        let mut modules = Vec::new();
        for b in &q.bindings {
            let info = &self.lp.bindings[&b.meta.id];
            let attrs = info.attributes.clone().unwrap_or_default();
            let (kind, title) = match (&b.source, info.kind) {
                (BindingSource::Nested(c), _) => (
                    NodeKind::Nested,
                    format!("{}: {}", print_name(&b.var), print_name(&c.head.relation)),
                ),
                (BindingSource::External(n), _) => (
                    NodeKind::External,
                    format!("{}: ext {}", print_name(&b.var), print_name(n)),
                ),
                (BindingSource::Named(n), SourceKind::Abstract) => (
                    NodeKind::Module,
                    format!("{}: {}", print_name(&b.var), print_name(n)),
                ),
                (BindingSource::Named(n), SourceKind::Intensional) => (
                    NodeKind::Intensional,
                    format!("{}: {}", print_name(&b.var), print_name(n)),
                ),
                (BindingSource::Named(n), _) => (
                    NodeKind::Table,
                    format!("{}: {}", print_name(&b.var), print_name(n)),
                ),
            };
            let id = self.node(&b.var, region, kind.clone(), title, &attrs);
            self.bindings.insert(b.meta.id, id.clone());
            match &b.source {
                BindingSource::Nested(c) => nested.push((c, id)),
                BindingSource::Named(n) if kind == NodeKind::Module => {
                    modules.push((n.clone(), b.var.clone(), id))
                }
                _ => {}
            }
        }
        if let Some(j) = &q.joins {
            for (v, var, meta) in j.literals() {
                let id = self.node(
                    var,
                    region,
                    NodeKind::Literal,
                    format!("{}: {}", print_name(var), print_value(v)),
                    &["val".to_string()],
                );
                self.literals.insert(meta.id, id);
            }
        }
        for (c, id) in nested {
            self.collection(c, region);
            let head = self.heads[&c.meta.id].clone();
            self.edge(
                Endpoint {
                    node: head,
                    port: None,
                },
                Endpoint {
                    node: id,
                    port: None,
                },
                EdgeKind::Binds,
                None,
            );
        }
        for (name, var, id) in modules {
            self.module(&name, &var, id, region);
        }
        if let Some(g) = &q.grouping {
            for k in &g.keys {
                if let Some(ep) = self.attr_endpoint(k.meta.id, &k.attr) {
                    self.port_mut(&ep.node, &k.attr).shaded = true;
                }
            }
        }
        self.formula(&q.body, region);
    }

    /// Draws the body of an abstract relation inside a module region whose
    /// parameters are the ports of the module box.
    fn module(&mut self, name: &str, var: &str, node: String, parent: usize) {
        let Some(def) = self.defs.get(name).copied() else {
            return;
        };
        let mut s = self.site;
        while let Some(i) = s {
            if self.doc.modules[i].name == name {
                return;
            }
            s = self.doc.modules[i].parent;
        }
        let site = self.doc.modules.len();
        self.doc.modules.push(ModuleSite {
            name: name.to_string(),
            node: node.clone(),
            parent: self.site,
            collapsed: false,
        });
        let outer = self.site.replace(site);
        let region = self.region(
            Some(parent),
            RegionKind::Module,
            format!("{} {}", print_name(name), print_name(var)),
        );
        self.params.push(node);
        let saved = (self.bindings.clone(), self.literals.clone());
        self.formula(&def.body, region);
        (self.bindings, self.literals) = saved;
        self.params.pop();
        self.site = outer;
    }

    fn attr_endpoint(&mut self, id: NodeId, attr: &str) -> Option<Endpoint> {
        let node = match self.lp.link(id)? {
            LinkTarget::Binding(b) => self.bindings.get(&b)?.clone(),
            LinkTarget::Literal(l) => self.literals.get(&l)?.clone(),
            LinkTarget::Head(c) => self.heads.get(&c)?.clone(),
            LinkTarget::Parameter(c) => match self.params.last() {
                Some(p) => p.clone(),
                None => self.heads.get(&c)?.clone(),
            },
        };
        self.port_mut(&node, attr);
        Some(Endpoint {
            node,
            port: Some(attr.to_string()),
        })
    }

    /// Bare attributes are ports; anything else gets an expression node fed
    /// by operand edges.
    fn term_endpoint(&mut self, t: &Term, region: usize) -> Endpoint {
        if let Term::Attr(a) = t {
            if let Some(ep) = self.attr_endpoint(a.meta.id, &a.attr) {
                return ep;
            }
        }
        self.expression(&print_term(t), t, region)
    }

    fn expression(&mut self, label: &str, t: &Term, region: usize) -> Endpoint {
        let id = self.node("e", region, NodeKind::Expression, label.to_string(), &[]);
        let mut refs = Vec::new();
        t.for_each_ref(&mut |a| refs.push((a.meta.id, a.attr.clone())));
        for (rid, attr) in refs {
            if let Some(ep) = self.attr_endpoint(rid, &attr) {
                self.edge(
                    ep,
                    Endpoint {
                        node: id.clone(),
                        port: None,
                    },
                    EdgeKind::Operand,
                    None,
                );
            }
        }
        Endpoint {
            node: id,
            port: None,
        }
    }

    /// Variables on the optional side of the join node a predicate is
    /// assigned to.
    fn optional_vars(&self, p: &Predicate) -> (Option<NodeId>, Vec<String>) {
        let Some(jn) = self.lp.join_condition_assignment.get(&p.meta.id) else {
            return (None, Vec::new());
        };
        let mut tree = None;
        for q in self.lp.quantifiers() {
            if q.meta.id == jn.scope {
                tree = q.joins.as_ref().and_then(|j| j.at_path(&jn.path));
            }
        }
        let vars = match tree {
            Some(JoinTree::Left(_, r)) => r.leaf_vars(),
            Some(JoinTree::Full(l, r)) => l.leaf_vars().into_iter().chain(r.leaf_vars()).collect(),
            _ => Vec::new(),
        };
        (Some(jn.scope), vars.into_iter().map(String::from).collect())
    }

    fn is_optional(&self, t: &Term, scope: Option<NodeId>, vars: &[String]) -> bool {
        let Term::Attr(a) = t else { return false };
        scope.is_some() && self.lp.owner_scope(a.meta.id) == scope && vars.contains(&a.var)
    }

    fn predicate(&mut self, p: &Predicate, region: usize) {
        match &p.kind {
            PredicateKind::Compare { op, left, right } => {
                if let Some(info) = self.lp.assignments.get(&p.meta.id) {
                    let (head, value) = if info.head_on_left {
                        (left, right)
                    } else {
                        (right, left)
                    };
                    let to = self.term_endpoint(head, region);
                    let from = self.term_endpoint(value, region);
                    self.edge(from, to, EdgeKind::Assignment, None);
                    return;
                }
                let from = self.term_endpoint(left, region);
                let to = self.term_endpoint(right, region);
                let label = (op.symbol() != "=").then(|| op.symbol().to_string());
                let e = self.edge(from, to, EdgeKind::Predicate, label);
                let (scope, vars) = self.optional_vars(p);
                self.doc.edges[e].optional_from = self.is_optional(left, scope, &vars);
                self.doc.edges[e].optional_to = self.is_optional(right, scope, &vars);
            }
            PredicateKind::IsNull { term, negated } => {
                let from = self.term_endpoint(term, region);
                let null = self.node("e", region, NodeKind::Expression, "null".to_string(), &[]);
                let label = if *negated { "is not" } else { "is" };
                self.edge(
                    from,
                    Endpoint {
                        node: null,
                        port: None,
                    },
                    EdgeKind::Predicate,
                    Some(label.to_string()),
                );
            }
        }
    }
}
