use super::*;
use crate::syntax::parse_arc;

fn bound(src: &str) -> LinkedProgram {
    bind(&parse_arc(src).unwrap(), &ExternalRegistry::default())
        .unwrap_or_else(|e| panic!("{src}: {e:?}"))
}

fn codes(src: &str) -> Vec<&'static str> {
    match analyze(&parse_arc(src).unwrap(), &ExternalRegistry::default()) {
        Ok(lp) => lp.warnings.iter().map(|d| d.code).collect(),
        Err(ds) => ds.iter().map(|d| d.code).collect(),
    }
}

const EQ1: &str = "{ Q(A) | exists r in R, s in S [ Q.A = r.A and r.B = s.B and s.C = 0 ] }";

#[test]
fn links_and_classes_of_simple_query() {
    let lp = bound(EQ1);
    let preds = lp.predicates();
    let classes: Vec<PredicateClass> = preds.values().map(|p| lp.class(p)).collect();
    assert_eq!(
        classes,
        vec![
            PredicateClass::Assignment,
            PredicateClass::Comparison,
            PredicateClass::Comparison
        ]
    );
    let mut heads = 0;
    for p in preds.values() {
        p.for_each_ref(&mut |a| {
            let t = lp.link(a.meta.id).unwrap();
            if a.var == "Q" {
                heads += 1;
                assert!(matches!(t, LinkTarget::Head(_)));
            } else {
                assert_eq!(lp.binding_of(a.meta.id).unwrap().var, a.var);
            }
        });
    }
    assert_eq!(heads, 1);
}

#[test]
fn lateral_reference_links_outward() {
    let lp = bound("{ Q(A, B) | exists x in X, z in { Z(B) | exists y in Y [ x.A < y.A and Z.B = y.B ] } [ Q.A = x.A and Q.B = z.B ] }");
    let z = lp.bindings.values().find(|b| b.var == "z").unwrap();
    let x = lp
        .bindings
        .iter()
        .find(|(_, b)| b.var == "x")
        .map(|(id, _)| *id)
        .unwrap();
    assert_eq!(z.lateral_deps, vec![x]);
}

#[test]
fn resolution_errors() {
    assert_eq!(
        codes("{ Q(A) | exists r in R [ Q.A = t.A ] }"),
        vec!["E_UNBOUND_VAR"]
    );
    assert_eq!(
        codes("{ Q(A) | exists r in R, r in S [ Q.A = r.A ] }"),
        vec!["E_DUPLICATE_BINDING"]
    );
    assert_eq!(
        codes("{ Q(A) | exists r in R [ Q.A = r.A and r.B > Q.A ] }"),
        vec!["E_HEAD_IN_BODY"]
    );
    assert_eq!(
        codes("{ Q(A) | exists r in R [ Q.A = r.A and not exists s in S [ s.A = Q.A ] ] }"),
        vec!["E_HEAD_IN_BODY"]
    );
    assert_eq!(
        codes("{ Q(A) | exists f in ext Nope [ Q.A = f.out ] }"),
        vec!["E_UNKNOWN_EXTERNAL"]
    );
}

#[test]
fn grouping_checks() {
    assert!(
        codes("{ Q(A,sm) | exists r in R, group(r.A) [ Q.A = r.A and Q.sm = sum(r.B) ] }")
            .is_empty()
    );
    assert_eq!(
        codes("{ Q(A,sm) | exists r in R, group() [ Q.A = r.A and Q.sm = sum(r.B) ] }"),
        vec!["E_NONKEY_REF_POST_GROUP"]
    );
    assert_eq!(
        codes("{ Q(sm) | exists r in R [ Q.sm = sum(r.B) ] }"),
        vec!["E_AGG_NO_GROUP"]
    );
    assert_eq!(
        codes("not exists r in R, group() [ count(r.A) > 1 ]"),
        vec!["W_NEGATED_GROUPING"]
    );
}

#[test]
fn head_checks() {
    let anc = "def A := { A(s, t) | exists p in P [ A.s = p.s and A.t = p.t ] or exists p in P, a2 in A [ A.s = p.s and p.t = a2.s and A.t = a2.t ] } { Q(s, t) | exists a in A [ Q.s = a.s and Q.t = a.t ] }";
    assert!(codes(anc).is_empty());
    let broken = anc.replace(" and A.t = a2.t", "");
    let err = analyze(&parse_arc(&broken).unwrap(), &ExternalRegistry::default()).unwrap_err();
    assert_eq!(err.len(), 1);
    assert_eq!(err[0].code, "E_HEAD_UNASSIGNED");
    assert!(
        err[0].message.contains("A.t") && err[0].message.contains("branch 2"),
        "{}",
        err[0].message
    );
    assert_eq!(
        codes("{ Q(A, B) | exists r in R [ Q.A = r.A ] }"),
        vec!["E_HEAD_UNASSIGNED"]
    );
    assert_eq!(
        codes("{ Q(A) | exists r in R [ Q.A = r.A and Q.A = r.B ] }"),
        vec!["E_HEAD_MULTIASSIGNED"]
    );
}

#[test]
fn recursion_checks() {
    let lp = bound("def A := { A(s, t) | exists p in P [ A.s = p.s and A.t = p.t ] or exists p in P, a2 in A [ A.s = p.s and p.t = a2.s and A.t = a2.t ] } { Q(s) | exists a in A [ Q.s = a.s ] }");
    assert_eq!(lp.recursive_defs.iter().collect::<Vec<_>>(), vec!["A"]);
    assert_eq!(
        codes("def A := { A(x) | exists p in P [ A.x = p.x and not exists a in A [ a.x = p.x ] ] } { Q(x) | exists a in A [ Q.x = a.x ] }"),
        vec!["E_UNSTRATIFIED"]
    );
    assert_eq!(
        codes("def A := { A(x) | exists p in P [ A.x = p.x ] or exists a in A, group() [ A.x = sum(a.x) ] } { Q(x) | exists a in A [ Q.x = a.x ] }"),
        vec!["E_UNSTRATIFIED"]
    );
}

#[test]
fn access_planning() {
    let lp = analyze(
        &parse_arc("{ Q(A) | exists f in ext Minus, r in R, s in S [ f.left = r.B and f.right = s.B and Q.A = f.out ] }").unwrap(),
        &ExternalRegistry::default(),
    )
    .unwrap();
    let order = plan_access(&lp).unwrap();
    let steps = order.scopes.values().next().unwrap();
    let vars: Vec<&str> = steps.iter().map(|s| s.var.as_str()).collect();
    assert_eq!(vars, vec!["r", "s", "f"]);
    assert!(matches!(&steps[2].access, Access::External { pattern, .. } if pattern == "bbf"));
    assert_eq!(
        codes("{ Q(A) | exists f in ext Minus [ Q.A = f.out ] }"),
        vec!["E_UNSAFE_EXTERNAL"]
    );
}

#[test]
fn join_conditions_go_to_lowest_spanning_node() {
    let lp = bound("{ Q(m, n) | exists r in R, s in S, left(r, inner(lit 11 as v, s)) [ Q.m = r.m and Q.n = s.n and r.h = v.val and r.y = s.y ] }");
    let paths: Vec<Vec<usize>> = lp
        .join_condition_assignment
        .values()
        .map(|j| j.path.clone())
        .collect();
    assert_eq!(paths, vec![Vec::<usize>::new(), Vec::new()]);
    let lp = bound("{ Q(m) | exists r in R, s in S, t in T, left(r, inner(s, t)) [ Q.m = r.m and s.y = t.y ] }");
    let paths: Vec<Vec<usize>> = lp
        .join_condition_assignment
        .values()
        .map(|j| j.path.clone())
        .collect();
    assert_eq!(paths, vec![vec![1]]);
}

#[test]
fn scopes_mirror_nesting() {
    let lp = bound(
        "{ Q(A) | exists r in R [ Q.A = r.A and not (r.B = 1 or exists s in S [ s.A = r.A ]) ] }",
    );
    let kinds: Vec<ScopeKind> = lp.scopes.iter().map(|s| s.kind).collect();
    assert_eq!(
        kinds,
        vec![
            ScopeKind::Canvas,
            ScopeKind::Collection,
            ScopeKind::Quantifier,
            ScopeKind::Negation,
            ScopeKind::Disjunction,
            ScopeKind::Quantifier
        ]
    );
}
