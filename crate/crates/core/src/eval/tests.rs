use super::*;
use crate::binder::{analyze, ExternalRegistry};
use crate::syntax::parse_arc;

fn lp(src: &str) -> LinkedProgram {
    analyze(&parse_arc(src).unwrap(), &ExternalRegistry::default())
        .unwrap_or_else(|e| panic!("{src}: {e:?}"))
}

fn db(json: &str) -> Database {
    Database::from_json(json).unwrap()
}

fn rows(r: &Relation) -> Vec<Vec<String>> {
    r.rows
        .iter()
        .map(|row| row.iter().map(|v| v.to_string()).collect())
        .collect()
}

const COUNT_BUG_DB: &str = r#"{"relations":{"R":{"schema":["id","q"],"rows":[[9,0]]},"S":{"schema":["id","d"],"rows":[]}}}"#;

#[test]
fn count_bug_versions() {
    let v1 = "{ Q(id) | exists r in R [ Q.id = r.id and exists s in S, group() [ r.id = s.id and r.q = count(s.d) ] ] }";
    let v2 = "{ Q(id) | exists r in R, x in { X(id, ct) | exists s in S, group(s.id) [ X.id = s.id and X.ct = count(s.d) ] } [ Q.id = r.id and r.id = x.id and r.q = x.ct ] }";
    let v3 = "{ Q(id) | exists r in R, x in { X(id, ct) | exists s in S, r2 in R, group(r2.id), left(r2, s) [ X.id = r2.id and X.ct = count(s.d) and r2.id = s.id ] } [ Q.id = r.id and r.id = x.id and r.q = x.ct ] }";
    let d = db(COUNT_BUG_DB);
    let sql = Conventions::sql();
    assert_eq!(
        rows(&eval_query(&lp(v1), &d, &sql).unwrap()),
        vec![vec!["9"]]
    );
    assert!(eval_query(&lp(v2), &d, &sql).unwrap().is_empty());
    assert_eq!(
        rows(&eval_query(&lp(v3), &d, &sql).unwrap()),
        vec![vec!["9"]]
    );
}

#[test]
fn empty_sum_follows_convention() {
    let q = "{ Q(ak, sm) | exists r in R, x in { X(sm) | exists s in S, group() [ s.k = r.k and X.sm = sum(s.v) ] } [ Q.ak = r.k and Q.sm = x.sm ] }";
    let d = db(
        r#"{"relations":{"R":{"schema":["k","v"],"rows":[[1,2]]},"S":{"schema":["k","v"],"rows":[]}}}"#,
    );
    let l = lp(q);
    assert_eq!(
        rows(&eval_query(&l, &d, &Conventions::souffle()).unwrap()),
        vec![vec!["1", "0"]]
    );
    assert_eq!(
        rows(&eval_query(&l, &d, &Conventions::sql()).unwrap()),
        vec![vec!["1", "null"]]
    );
}

#[test]
fn not_in_rewrite_with_null() {
    let q = "{ Q(A) | exists r in R [ Q.A = r.A and not exists s in S [ s.A = r.A or s.A is null or r.A is null ] ] }";
    let with_null = db(
        r#"{"relations":{"R":{"schema":["A"],"rows":[[1]]},"S":{"schema":["A"],"rows":[[null]]}}}"#,
    );
    let without =
        db(r#"{"relations":{"R":{"schema":["A"],"rows":[[1]]},"S":{"schema":["A"],"rows":[]}}}"#);
    assert!(eval_query(&lp(q), &with_null, &Conventions::sql())
        .unwrap()
        .is_empty());
    assert_eq!(
        rows(&eval_query(&lp(q), &without, &Conventions::sql()).unwrap()),
        vec![vec!["1"]]
    );
}

#[test]
fn nested_and_unnested_multiplicities() {
    let nested = "{ Q(A) | exists r in R [ Q.A = r.A and exists s in S [ s.B = r.B ] ] }";
    let unnested = "{ Q(A) | exists r in R, s in S [ Q.A = r.A and s.B = r.B ] }";
    let d = db(
        r#"{"relations":{"R":{"schema":["A","B"],"rows":[["x",1]]},"S":{"schema":["B"],"rows":[[1],[1]]}}}"#,
    );
    let bag = Conventions::sql();
    let x = vec![Value::text("x")];
    assert_eq!(
        eval_query(&lp(nested), &d, &bag).unwrap().multiplicity(&x),
        1
    );
    assert_eq!(
        eval_query(&lp(unnested), &d, &bag)
            .unwrap()
            .multiplicity(&x),
        2
    );
    let set = Conventions::souffle();
    assert_eq!(
        eval_query(&lp(unnested), &d, &set)
            .unwrap()
            .multiplicity(&x),
        1
    );
}

#[test]
fn grouping_with_multiple_aggregates() {
    let q = "{ Q(dept, av) | exists x in { X(dept, sm, av) | exists r in R, s in S, group(r.dept) [ X.dept = r.dept and X.sm = sum(s.sal) and X.av = avg(s.sal) and r.empl = s.empl ] } [ Q.dept = x.dept and Q.av = x.av and x.sm > 100 ] }";
    let d = db(
        r#"{"relations":{"R":{"schema":["empl","dept"],"rows":[["e1","d1"],["e2","d1"]]},"S":{"schema":["empl","sal"],"rows":[["e1",60],["e2",60]]}}}"#,
    );
    let r = eval_query(&lp(q), &d, &Conventions::souffle()).unwrap();
    assert_eq!(
        r.rows,
        vec![vec![Value::text("d1"), Value::parse_dec("60").unwrap()]]
    );
}

#[test]
fn sentences_with_aggregates() {
    let d = db(
        r#"{"relations":{"R":{"schema":["id","q"],"rows":[[1,1]]},"S":{"schema":["id","d"],"rows":[[1,7]]}}}"#,
    );
    let s12 = "exists r in R [ exists s in S, group() [ r.id = s.id and r.q <= count(s.d) ] ]";
    let s13 = "not exists r in R [ exists s in S, group() [ r.id = s.id and r.q > count(s.d) ] ]";
    assert!(eval_sentence(&lp(s12), &d, &Conventions::sql()).unwrap());
    assert!(eval_sentence(&lp(s13), &d, &Conventions::sql()).unwrap());
    let empty = db(r#"{"relations":{"R":{"schema":["a"],"rows":[]}}}"#);
    assert!(eval_sentence(
        &lp("not exists r in R [ true ]"),
        &empty,
        &Conventions::sql()
    )
    .unwrap());
}

#[test]
fn aggregates_over_multisets() {
    let sql = Conventions::sql();
    let ints = |xs: &[i64]| xs.iter().map(|x| Value::int(*x)).collect::<Vec<_>>();
    assert_eq!(
        eval_aggregate(AggFn::Sum, &ints(&[2, 1]), &sql).unwrap(),
        Value::int(3)
    );
    assert_eq!(
        eval_aggregate(AggFn::Sum, &[], &Conventions::souffle()).unwrap(),
        Value::int(0)
    );
    assert_eq!(
        eval_aggregate(AggFn::CountDistinct, &ints(&[1, 1, 2]), &sql).unwrap(),
        Value::int(2)
    );
    assert_eq!(
        eval_aggregate(AggFn::Count, &[Value::Null, Value::int(1)], &sql).unwrap(),
        Value::int(1)
    );
    assert_eq!(
        eval_aggregate(AggFn::Avg, &ints(&[1, 2]), &sql).unwrap(),
        Value::parse_dec("1.5").unwrap()
    );
    assert_eq!(
        eval_aggregate(AggFn::Min, &ints(&[3, 1, 2]), &sql).unwrap(),
        Value::int(1)
    );
    assert_eq!(
        eval_aggregate(AggFn::Sum, &[Value::text("a")], &sql)
            .unwrap_err()
            .code(),
        "E_TYPE"
    );
}

#[test]
fn transitive_closure() {
    let q = "def A := { A(s, t) | exists p in P [ A.s = p.s and A.t = p.t ] or exists p in P, a2 in A [ A.s = p.s and p.t = a2.s and A.t = a2.t ] } { Q(s, t) | exists a in A [ Q.s = a.s and Q.t = a.t ] }";
    let d = db(r#"{"relations":{"P":{"schema":["s","t"],"rows":[["a","b"],["b","c"]]}}}"#);
    let r = eval_query(&lp(q), &d, &Conventions::souffle()).unwrap();
    assert_eq!(
        rows(&r),
        vec![vec!["a", "b"], vec!["a", "c"], vec!["b", "c"]]
    );
    let cyc =
        db(r#"{"relations":{"P":{"schema":["s","t"],"rows":[["a","b"],["b","c"],["c","a"]]}}}"#);
    assert_eq!(
        eval_query(&lp(q), &cyc, &Conventions::souffle())
            .unwrap()
            .len(),
        9
    );
    assert_eq!(
        eval_query(&lp(q), &d, &Conventions::sql())
            .unwrap_err()
            .code(),
        "E_BAG_RECURSION"
    );
    let capped = Conventions::souffle().with_fixpoint_cap(1).unwrap();
    assert_eq!(
        eval_query(&lp(q), &d, &capped).unwrap_err().code(),
        "E_FIXPOINT_CAP"
    );
    let fx = eval_fixpoint(&lp(q), &["A"], &d, &Conventions::souffle()).unwrap();
    assert_eq!(fx.get("A").unwrap().len(), 3);
}

#[test]
fn left_join_with_literal_leaf() {
    let q = "{ Q(m, n) | exists r in R, s in S, left(r, inner(lit 11 as v, s)) [ Q.m = r.m and Q.n = s.n and r.h = v.val and r.y = s.y ] }";
    let d = db(
        r#"{"relations":{"R":{"schema":["m","y","h"],"rows":[["m1",5,11],["m2",6,0]]},"S":{"schema":["n","y"],"rows":[["n1",5]]}}}"#,
    );
    let r = eval_query(&lp(q), &d, &Conventions::sql()).unwrap();
    assert_eq!(rows(&r), vec![vec!["m1", "n1"], vec!["m2", "null"]]);
    let simple =
        "{ Q(A, B) | exists r in R, s in S, left(r, s) [ Q.A = r.A and Q.B = s.B and r.A = s.B ] }";
    let d =
        db(r#"{"relations":{"R":{"schema":["A"],"rows":[[1]]},"S":{"schema":["B"],"rows":[]}}}"#);
    assert_eq!(
        rows(&eval_query(&lp(simple), &d, &Conventions::sql()).unwrap()),
        vec![vec!["1", "null"]]
    );
}

#[test]
fn full_join_extends_both_sides() {
    let q =
        "{ Q(A, B) | exists r in R, s in S, full(r, s) [ Q.A = r.A and Q.B = s.B and r.A = s.B ] }";
    let d = db(
        r#"{"relations":{"R":{"schema":["A"],"rows":[[1],[2]]},"S":{"schema":["B"],"rows":[[2],[3]]}}}"#,
    );
    let r = eval_query(&lp(q), &d, &Conventions::sql()).unwrap();
    assert_eq!(
        rows(&r),
        vec![vec!["null", "3"], vec!["1", "null"], vec!["2", "2"]]
    );
}

#[test]
fn external_relations_compute_outputs() {
    let q = "{ Q(A) | exists r in R, f in ext Minus, g in ext Bigger [ f.left = r.a and f.right = r.b and Q.A = f.out and g.left = f.out and g.right = 0 ] }";
    let d = db(r#"{"relations":{"R":{"schema":["a","b"],"rows":[[5,3],[1,4]]}}}"#);
    assert_eq!(
        rows(&eval_query(&lp(q), &d, &Conventions::sql()).unwrap()),
        vec![vec!["2"]]
    );
}

#[test]
fn abstract_relations_need_expansion() {
    let q = "abstract def S := { S(a) | exists l in L [ l.x = S.a ] }\n{ Q(d) | exists r in R [ Q.d = r.d and exists s in S [ s.a = r.d ] ] }";
    let d = db(
        r#"{"relations":{"R":{"schema":["d"],"rows":[[1]]},"L":{"schema":["x"],"rows":[[1]]}}}"#,
    );
    assert_eq!(
        eval_query(&lp(q), &d, &Conventions::sql())
            .unwrap_err()
            .code(),
        "E_ABSTRACT_UNEXPANDED"
    );
    let expanded = crate::expand::expand_abstract(&parse_arc(q).unwrap()).unwrap();
    let l = analyze(&expanded, &ExternalRegistry::default()).unwrap();
    assert_eq!(
        rows(&eval_query(&l, &d, &Conventions::sql()).unwrap()),
        vec![vec!["1"]]
    );
}

#[test]
fn matrix_product() {
    let q = "{ C(row, col, val) | exists a in A, b in B, f in ext \"*\", group(a.row, b.col) [ C.row = a.row and C.col = b.col and C.val = sum(f.out) and a.col = b.row and f.$1 = a.val and f.$2 = b.val ] }";
    let d = db(
        r#"{"relations":{"A":{"schema":["row","col","val"],"rows":[[1,1,2],[1,2,1]]},"B":{"schema":["row","col","val"],"rows":[[1,1,3],[2,1,4]]}}}"#,
    );
    assert_eq!(
        rows(&eval_query(&lp(q), &d, &Conventions::souffle()).unwrap()),
        vec![vec!["1", "1", "10"]]
    );
}

#[test]
fn division_by_zero_follows_convention() {
    let q = "{ Q(x) | exists r in R [ Q.x = r.a / r.b ] }";
    let d = db(r#"{"relations":{"R":{"schema":["a","b"],"rows":[[1,0]]}}}"#);
    assert_eq!(
        rows(&eval_query(&lp(q), &d, &Conventions::sql()).unwrap()),
        vec![vec!["null"]]
    );
    assert_eq!(
        eval_query(&lp(q), &d, &Conventions::souffle())
            .unwrap_err()
            .code(),
        "E_DIV_ZERO"
    );
}
