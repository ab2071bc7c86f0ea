use super::*;
use crate::binder::{analyze, ExternalRegistry, LinkedProgram};
use crate::sql::{parse_sql, translate_sql};
use crate::syntax::parse_arc;

fn lp(src: &str) -> LinkedProgram {
    analyze(&parse_arc(src).unwrap(), &ExternalRegistry::default())
        .unwrap_or_else(|e| panic!("{src}: {e:?}"))
}

fn from_sql(sql: &str) -> LinkedProgram {
    let p = translate_sql(&parse_sql(sql).unwrap()).unwrap();
    analyze(&p, &ExternalRegistry::default()).unwrap()
}

fn assert_same(a: &LinkedProgram, b: &LinkedProgram) {
    let (ca, cb) = (canonicalize(a), canonicalize(b));
    assert!(ca == cb, "{}", first_difference(&ca, &cb).unwrap());
}

const SELECTION: &str = "{ Q(A) | exists r in R, s in S [ Q.A = r.A and r.B = s.B and s.C = 0 ] }";
const GROUPED: &str = "{ Q(A, sm) | exists r in R, group(r.A) [ Q.A = r.A and Q.sm = sum(r.B) ] }";
const CORRELATED: &str = "{ Q(A, sm) | exists r in R, x in { X(sm) | exists r2 in R, group() [ r2.A = r.A and X.sm = sum(r2.B) ] } [ Q.A = r.A and Q.sm = x.sm ] }";
const CORRELATED_DISTINCT: &str = "{ Q(A, sm) | exists r in R, x in { X(sm) | exists r2 in R, group() [ r2.A = r.A and X.sm = sum(r2.B) ] }, group(r.A, x.sm) [ Q.A = r.A and Q.sm = x.sm ] }";

const COUNT_V1: &str = "{ Q(id) | exists r in R [ Q.id = r.id and exists s in S, group() [ r.id = s.id and r.q = count(s.d) ] ] }";
const COUNT_V2: &str = "{ Q(id) | exists r in R, x in { X(id, ct) | exists s in S, group(s.id) [ X.id = s.id and X.ct = count(s.d) ] } [ Q.id = r.id and r.id = x.id and r.q = x.ct ] }";
const COUNT_V3: &str = "{ Q(id) | exists r in R, x in { X(id, ct) | exists s in S, r2 in R, group(r2.id), left(r2, s) [ X.id = r2.id and X.ct = count(s.d) and r2.id = s.id ] } [ Q.id = r.id and r.id = x.id and r.q = x.ct ] }";

const PER_DEPT_CORRELATED: &str = "{ Q(dept, av) | exists r3 in R, s3 in S, \
    x in { X(av) | exists r1 in R, s1 in S, group(r1.dept) [ r1.dept = r3.dept and r1.empl = s1.empl and X.av = avg(s1.sal) ] }, \
    y in { Y(sm) | exists r2 in R, s2 in S, group(r2.dept) [ r2.dept = r3.dept and r2.empl = s2.empl and Y.sm = sum(s2.sal) ] } \
    [ Q.dept = r3.dept and Q.av = x.av and r3.empl = s3.empl and y.sm > 100 ] }";
const PER_DEPT_JOINED: &str = "{ Q(dept, av) | \
    exists x in { X(dept, av) | exists r1 in R, s1 in S, group(r1.dept) [ X.dept = r1.dept and r1.empl = s1.empl and X.av = avg(s1.sal) ] }, \
    y in { Y(dept, sm) | exists r2 in R, s2 in S, group(r2.dept) [ Y.dept = r2.dept and r2.empl = s2.empl and Y.sm = sum(s2.sal) ] } \
    [ Q.dept = x.dept and Q.av = x.av and x.dept = y.dept and y.sm > 100 ] }";

#[test]
fn alpha_renaming_and_reordering_are_invisible() {
    let other = "{ Q(A) | exists b in S, a in R [ 0 = b.C and b.B = a.B and a.A = Q.A ] }";
    assert_same(&lp(SELECTION), &lp(other));
    let different = "{ Q(A) | exists r in R, s in S [ Q.A = r.A and r.B = s.B and s.C = 1 ] }";
    assert!(!pattern_equal(&lp(SELECTION), &lp(different)));
}

#[test]
fn flipped_comparisons_and_not_exists_spellings_agree() {
    let a = "{ Q(A) | exists r in R [ Q.A = r.A and not (exists s in S [ s.B > r.B ]) ] }";
    let b = "{ Q(A) | exists r in R [ Q.A = r.A and not exists s in S [ r.B < s.B ] ] }";
    assert_same(&lp(a), &lp(b));
}

#[test]
fn canonical_form_is_idempotent() {
    for src in [
        SELECTION,
        GROUPED,
        CORRELATED,
        COUNT_V3,
        PER_DEPT_CORRELATED,
        PER_DEPT_JOINED,
    ] {
        let c = canonicalize(&lp(src));
        let again = canonicalize_program(&c.program);
        assert_eq!(c.text(), again.text());
        let reparsed = canonicalize(&lp(c.text()));
        assert_eq!(c.text(), reparsed.text());
    }
}

#[test]
fn grouped_and_correlated_aggregation_differ() {
    let (a, b) = (canonicalize(&lp(GROUPED)), canonicalize(&lp(CORRELATED)));
    assert!(a != b);
    let d = first_difference(&a, &b).unwrap();
    assert!(d.path.starts_with("main"), "{d}");
}

#[test]
fn scalar_and_lateral_subqueries_share_a_pattern() {
    let scalar =
        from_sql("select distinct R.A, (select sum(R2.B) sm from R R2 where R2.A=R.A) from R");
    let lateral =
        from_sql("select distinct R.A, X.sm from R join lateral (select sum(R2.B) sm from R R2 where R2.A=R.A) X on true");
    assert_same(&scalar, &lateral);
    assert_same(&scalar, &lp(CORRELATED_DISTINCT));
    let grouped = from_sql("select R.A, sum(R.B) sm from R group by R.A");
    assert_same(&grouped, &lp(GROUPED));
    assert!(!pattern_equal(&grouped, &scalar));
}

#[test]
fn count_bug_versions_are_distinct_patterns() {
    let (v1, v2, v3) = (lp(COUNT_V1), lp(COUNT_V2), lp(COUNT_V3));
    assert!(!pattern_equal(&v1, &v2));
    assert!(!pattern_equal(&v2, &v3));
    assert!(!pattern_equal(&v1, &v3));
}

#[test]
fn count_bug_sql_matches_calculus() {
    let sql = [
        "select R.id from R where R.q = (select count(S.d) from S where S.id = R.id)",
        "select R.id from R, (select S.id, count(S.d) as ct from S group by S.id) as X where R.q = X.ct and R.id = X.id",
        "select R.id from R, (select R2.id, count(S.d) as ct from R R2 left join S on R2.id = S.id group by R2.id) as X where R.q = X.ct and R.id = X.id",
    ];
    for (q, arc) in sql.iter().zip([COUNT_V1, COUNT_V2, COUNT_V3]) {
        assert_same(&from_sql(q), &lp(arc));
    }
}

#[test]
fn not_in_matches_spelled_out_negation() {
    let arc = "{ Q(A) | exists r in R [ Q.A = r.A and not (exists s in S [ s.A = r.A or s.A is null or r.A is null ]) ] }";
    assert_same(
        &from_sql("select R.A from R where R.A not in (select S.A from S)"),
        &lp(arc),
    );
}

#[test]
fn correlated_and_joined_aggregates_differ() {
    assert!(!pattern_equal(
        &lp(PER_DEPT_CORRELATED),
        &lp(PER_DEPT_JOINED)
    ));
}

#[test]
fn nested_head_names_do_not_matter() {
    let renamed = COUNT_V2
        .replace("X(id, ct)", "Agg(k, n)")
        .replace("X.id", "Agg.k")
        .replace("X.ct", "Agg.n")
        .replace("x.ct", "x.n")
        .replace("x.id", "x.k");
    assert_same(&lp(COUNT_V2), &lp(&renamed));
}

#[test]
fn outer_join_sides_matter() {
    let a = "{ Q(A) | exists r in R, s in S, left(r, s) [ Q.A = r.A and r.B = s.B ] }";
    let b = "{ Q(A) | exists r in R, s in S, left(s, r) [ Q.A = r.A and r.B = s.B ] }";
    let c = "{ Q(A) | exists s in S, r in R, full(s, r) [ Q.A = r.A and r.B = s.B ] }";
    let d = "{ Q(A) | exists r in R, s in S, full(r, s) [ Q.A = r.A and r.B = s.B ] }";
    assert!(!pattern_equal(&lp(a), &lp(b)));
    assert_same(&lp(c), &lp(d));
}

#[test]
fn classifies_aggregation_patterns() {
    let g = classify_aggregation(&lp(GROUPED));
    assert_eq!(
        g.iter().map(|x| x.1).collect::<Vec<_>>(),
        vec![AggregationPattern::Fio]
    );
    let c = classify_aggregation(&lp(CORRELATED));
    assert_eq!(
        c.iter().map(|x| x.1).collect::<Vec<_>>(),
        vec![AggregationPattern::Foi]
    );
    let h = classify_aggregation(&lp(PER_DEPT_CORRELATED));
    assert_eq!(
        h.iter().map(|x| x.1).collect::<Vec<_>>(),
        vec![AggregationPattern::Foi; 2]
    );
    let j = classify_aggregation(&lp(PER_DEPT_JOINED));
    assert_eq!(
        j.iter().map(|x| x.1).collect::<Vec<_>>(),
        vec![AggregationPattern::Fio; 2]
    );
    assert!(classify_aggregation(&lp(SELECTION)).is_empty());
    assert_eq!(AggregationPattern::Foi.to_string(), "FOI");
}
