//! DOT emission. Regions become clusters, tables become HTML-label nodes
//! whose rows are ports.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::{Edge, EdgeKind, Endpoint, HigraphDoc, Node, NodeKind, Region, RegionKind};

const SHADE: &str = "#d9d9d9";

/// Deterministic DOT text for a document; collapsed expansions are omitted.
pub fn to_dot(doc: &HigraphDoc) -> String {
    let mut out = String::new();
    out.push_str("graph arc {\n");
    out.push_str("  compound=true;\n");
    out.push_str("  fontname=\"Helvetica\";\n");
    out.push_str("  node [shape=plaintext, fontname=\"Helvetica\"];\n");
    out.push_str("  edge [fontname=\"Helvetica\"];\n");
    let regions: Vec<&Region> = doc.visible_regions().collect();
    let nodes: Vec<&Node> = doc.visible_nodes().collect();
    for r in regions.iter().filter(|r| r.parent.is_none()) {
        region(r, &regions, &nodes, 1, &mut out);
    }
    let shown: BTreeSet<&str> = nodes.iter().map(|n| n.id.as_str()).collect();
    for e in doc.visible_edges() {
        if shown.contains(e.from.node.as_str()) && shown.contains(e.to.node.as_str()) {
            edge(e, &mut out);
        }
    }
    out.push_str("}\n");
    out
}

fn region(r: &Region, regions: &[&Region], nodes: &[&Node], depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let _ = writeln!(out, "{pad}subgraph cluster_{} {{", r.id);
    let _ = writeln!(out, "{pad}  label={};", quote(&r.label));
    match r.kind {
        RegionKind::Canvas => {
            let _ = writeln!(out, "{pad}  style=invis;");
        }
        RegionKind::Negation | RegionKind::Disjunction => {
            let _ = writeln!(out, "{pad}  style=dashed;");
        }
        RegionKind::Module => {
            let _ = writeln!(out, "{pad}  style=dotted;");
        }
        RegionKind::Collection | RegionKind::Quantifier => {}
    }
    if r.double_border {
        let _ = writeln!(out, "{pad}  peripheries=2;");
    }
    for n in nodes.iter().filter(|n| n.region == r.id) {
        let _ = writeln!(out, "{pad}  {} [{}];", id(&n.id), node_attrs(n));
    }
    for c in regions.iter().filter(|c| c.parent == Some(r.id)) {
        region(c, regions, nodes, depth + 1, out);
    }
    let _ = writeln!(out, "{pad}}}");
}

fn node_attrs(n: &Node) -> String {
    if n.kind == NodeKind::Expression {
        return format!("shape=ellipse, label={}", quote(&n.title));
    }
    let (border, header) = match n.kind {
        NodeKind::Head => ("2", format!("<B>{}</B>", html(&n.title))),
        NodeKind::Module => ("3", format!("<B>{}</B>", html(&n.title))),
        NodeKind::External => ("1", format!("<I>{}</I>", html(&n.title))),
        _ => ("1", html(&n.title)),
    };
    let mut label = format!("<TABLE BORDER=\"{border}\" CELLBORDER=\"1\" CELLSPACING=\"0\">");
    let _ = write!(label, "<TR><TD>{header}</TD></TR>");
    for p in &n.ports {
        let fill = if p.shaded {
            format!(" BGCOLOR=\"{SHADE}\"")
        } else {
            String::new()
        };
        let _ = write!(
            label,
            "<TR><TD PORT=\"{}\"{fill}>{}</TD></TR>",
            html(&p.name),
            html(&p.name)
        );
    }
    label.push_str("</TABLE>");
    format!("label=<{label}>")
}

fn edge(e: &Edge, out: &mut String) {
    let mut attrs: Vec<String> = Vec::new();
    if let Some(l) = &e.label {
        attrs.push(format!("label={}", quote(l)));
    }
    match e.kind {
        EdgeKind::Predicate => {}
        EdgeKind::Assignment => {
            attrs.push("dir=forward".into());
            attrs.push("style=bold".into());
        }
        EdgeKind::Operand => attrs.push("style=dashed".into()),
        EdgeKind::Binds => {
            attrs.push("style=dotted".into());
            attrs.push("dir=forward".into());
        }
    }
    if e.optional_from || e.optional_to {
        let glyph = |o: bool| if o { "odot" } else { "none" };
        attrs.push("dir=both".into());
        attrs.push(format!("arrowtail={}", glyph(e.optional_from)));
        attrs.push(format!("arrowhead={}", glyph(e.optional_to)));
    }
    let _ = write!(out, "  {} -- {}", endpoint(&e.from), endpoint(&e.to));
    if !attrs.is_empty() {
        let _ = write!(out, " [{}]", attrs.join(", "));
    }
    out.push_str(";\n");
}

fn endpoint(ep: &Endpoint) -> String {
    match &ep.port {
        Some(p) => format!("{}:{}", id(&ep.node), id(p)),
        None => id(&ep.node),
    }
}

fn id(s: &str) -> String {
    let keyword = ["graph", "digraph", "subgraph", "node", "edge", "strict"]
        .contains(&s.to_ascii_lowercase().as_str());
    if super::is_plain(s) && !keyword {
        s.to_string()
    } else {
        quote(s)
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn html(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
