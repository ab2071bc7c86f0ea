use super::*;
use crate::binder::{analyze, ExternalRegistry};
use crate::syntax::parse_arc;

fn lp(src: &str) -> LinkedProgram {
    analyze(&parse_arc(src).unwrap(), &ExternalRegistry::default())
        .unwrap_or_else(|e| panic!("{src}: {e:?}"))
}

fn render(src: &str) -> (LinkedProgram, HigraphDoc) {
    let l = lp(src);
    let doc = to_higraph(&l, &RenderOptions::default());
    (l, doc)
}

const SELECTION: &str = "{ Q(A) | exists r in R, s in S [ Q.A = r.A and r.B = s.B and s.C = 0 ] }";
const UNIQUE_SET: &str = "abstract def Subset := { Subset(left, right) | not exists l3 in L [ l3.d = Subset.left and not exists l4 in L [ l4.b = l3.b and l4.d = Subset.right ] ] }\n\
    { Q(d) | exists l1 in L [ Q.d = l1.d and not exists l2 in L, s1 in Subset, s2 in Subset [ l2.d <> l1.d and s1.left = l1.d and s1.right = l2.d and s2.left = l2.d and s2.right = l1.d ] ] }";

#[test]
fn selection_query_layout() {
    let (l, doc) = render(SELECTION);
    let kinds: Vec<&RegionKind> = doc.regions.iter().map(|r| &r.kind).collect();
    assert_eq!(
        kinds,
        vec![
            &RegionKind::Canvas,
            &RegionKind::Collection,
            &RegionKind::Quantifier
        ]
    );
    assert_eq!(doc.regions.len(), l.scopes.len());
    assert_eq!(doc.node("r").unwrap().region, 2);
    assert_eq!(doc.node("s").unwrap().region, 2);
    assert_eq!(doc.count_edges(EdgeKind::Predicate), 2);
    assert_eq!(doc.count_edges(EdgeKind::Assignment), 1);
    let dot = to_dot(&doc);
    assert!(dot.contains("  r:B -- s:B;\n"), "{dot}");
    assert!(
        dot.contains("  r:A -- Q:A [dir=forward, style=bold];\n"),
        "{dot}"
    );
    assert!(dot.contains("label=\"0\""), "{dot}");
    assert_eq!(dot.matches("subgraph cluster_").count(), 3);
}

#[test]
fn grouping_scope_is_double_bordered_with_shaded_keys() {
    let (_, doc) =
        render("{ Q(A, sm) | exists r in R, group(r.A) [ Q.A = r.A and Q.sm = sum(r.B) ] }");
    let q = doc
        .regions
        .iter()
        .find(|r| r.kind == RegionKind::Quantifier)
        .unwrap();
    assert!(q.double_border);
    let r = doc.node("r").unwrap();
    assert!(r.port("A").unwrap().shaded);
    assert!(!r.port("B").unwrap().shaded);
    let dot = to_dot(&doc);
    assert!(dot.contains("peripheries=2;"));
    assert!(dot.contains("BGCOLOR=\"#d9d9d9\">A<"), "{dot}");
    assert!(dot.contains("label=\"sum(r.B)\""), "{dot}");
}

#[test]
fn empty_sentence_is_a_single_cluster() {
    let (_, doc) = render("true");
    let dot = to_dot(&doc);
    assert_eq!(dot.matches("subgraph cluster_").count(), 1);
}

#[test]
fn left_join_marks_optional_side() {
    let src = "{ Q(id) | exists r in R, x in { X(id, ct) | exists s in S, r2 in R, group(r2.id), left(r2, s) [ X.id = r2.id and X.ct = count(s.d) and r2.id = s.id ] } [ Q.id = r.id and r.id = x.id and r.q = x.ct ] }";
    let (l, doc) = render(src);
    assert_eq!(doc.regions.len(), l.scopes.len());
    let dot = to_dot(&doc);
    assert!(dot.contains("peripheries=2;"));
    assert!(
        dot.contains("r2:id -- s:id [dir=both, arrowtail=none, arrowhead=odot];"),
        "{dot}"
    );
    assert!(dot.contains("left(r2, s)"));
    assert!(dot.contains("X -- x [style=dotted, dir=forward];"), "{dot}");
}

#[test]
fn negation_and_disjunction_get_regions() {
    let src = "{ Q(A) | exists r in R [ Q.A = r.A and not (exists s in S [ s.A = r.A or s.A is null or r.A is null ]) ] }";
    let (l, doc) = render(src);
    assert_eq!(doc.regions.len(), l.scopes.len());
    assert!(doc
        .regions
        .iter()
        .any(|r| r.kind == RegionKind::Negation && r.label == "¬"));
    assert!(doc
        .regions
        .iter()
        .any(|r| r.kind == RegionKind::Disjunction));
    assert_eq!(doc.count_edges(EdgeKind::Predicate), 3);
}

#[test]
fn abstract_relations_collapse_into_module_boxes() {
    let l = lp(UNIQUE_SET);
    let expanded = to_higraph(&l, &RenderOptions::default());
    let collapsed = to_higraph(
        &l,
        &RenderOptions {
            collapse: ["Subset".to_string()].into(),
        },
    );
    let modules = |d: &HigraphDoc| {
        d.visible_nodes()
            .filter(|n| n.kind == NodeKind::Module)
            .count()
    };
    let module_regions = |d: &HigraphDoc| {
        d.visible_regions()
            .filter(|r| r.kind == RegionKind::Module)
            .count()
    };
    assert_eq!(modules(&collapsed), 2);
    assert_eq!(module_regions(&collapsed), 0);
    assert_eq!(module_regions(&expanded), 2);
    assert!(to_dot(&collapsed).len() < to_dot(&expanded).len());
    let mut round = collapsed.clone();
    round.expand("Subset");
    assert_eq!(round, expanded);
    round.collapse("Subset");
    assert_eq!(round, collapsed);
    let dot = to_dot(&expanded);
    assert!(dot.contains("s1:left"), "{dot}");
}

#[test]
fn dot_output_is_deterministic() {
    let (_, a) = render(UNIQUE_SET);
    let (_, b) = render(UNIQUE_SET);
    assert_eq!(to_dot(&a), to_dot(&b));
    assert!(a.to_json()["regions"].is_array());
}
