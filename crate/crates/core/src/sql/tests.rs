use super::*;
use crate::binder::analyze;
use crate::syntax::print_arc;

const COUNT_BUG_DB: &str = r#"{"relations":{"R":{"schema":["id","q"],"rows":[[9,0]]},"S":{"schema":["id","d"],"rows":[]}}}"#;

const V1: &str = "select R.id from R where R.q = (select count(S.d) from S where S.id = R.id)";
const V2: &str = "select R.id from R, (select S.id, count(S.d) as ct from S group by S.id) as X where R.q = X.ct and R.id = X.id";
const V3: &str = "select R.id from R, (select R2.id, count(S.d) as ct from R R2 left join S on R2.id = S.id group by R2.id) as X where R.q = X.ct and R.id = X.id";

fn arc(sql: &str) -> String {
    print_arc(&translate_sql(&parse_sql(sql).unwrap()).unwrap())
}

fn eval(sql: &str, db: &str, conv: &Conventions) -> Vec<Vec<Value>> {
    sql_roundtrip_eval(sql, &Database::from_json(db).unwrap(), conv)
        .unwrap()
        .rows
}

#[test]
fn parses_grouped_aggregate() {
    let q = parse_sql("select R.A, sum(R.B) sm\nfrom R\ngroup by R.A").unwrap();
    assert_eq!(q.group_by.len(), 1);
    let SelectItem::Expr { expr, alias } = &q.items[1] else {
        panic!()
    };
    assert_eq!(alias.as_deref(), Some("sm"));
    assert!(matches!(
        expr,
        SqlExpr::Agg {
            func: AggFn::Sum,
            ..
        }
    ));
}

#[test]
fn parses_scalar_subquery_in_where() {
    let q = parse_sql(V1).unwrap();
    let Some(SqlExpr::Cmp { right, .. }) = &q.where_clause else {
        panic!()
    };
    assert!(matches!(**right, SqlExpr::Subquery(_)));
}

#[test]
fn rejects_out_of_scope_constructs() {
    for (text, what) in [
        ("select * from R order by A", "ORDER BY"),
        ("select R.A from R union select S.A from S", "UNION"),
        ("select R.A from R right join S on R.A = S.A", "RIGHT JOIN"),
        (
            "select R.A from R where R.A in (1, 2)",
            "IN with a value list",
        ),
    ] {
        match parse_sql(text) {
            Err(SqlError::Unsupported { construct, .. }) => assert_eq!(construct, what),
            other => panic!("{text}: {other:?}"),
        }
    }
    let star = translate_sql(&parse_sql("select * from R").unwrap()).unwrap_err();
    assert_eq!(star.code(), "E_UNSUPPORTED_SQL");
}

#[test]
fn count_bug_translations_evaluate() {
    let sql = Conventions::sql();
    assert_eq!(eval(V1, COUNT_BUG_DB, &sql), vec![vec![Value::int(9)]]);
    assert!(eval(V2, COUNT_BUG_DB, &sql).is_empty());
    assert_eq!(eval(V3, COUNT_BUG_DB, &sql), vec![vec![Value::int(9)]]);
}

#[test]
fn count_bug_shapes() {
    assert_eq!(
        arc(V1),
        "{ Q(id) | exists r in R [ Q.id = r.id and exists s in S, group() [ s.id = r.id and r.q = count(s.d) ] ] }\n"
    );
    assert!(arc(V3).contains("exists r2 in R, s in S, group(r2.id), left(r2, s)"));
}

#[test]
fn not_in_spells_out_null_checks() {
    let q = "select R.A from R where R.A not in (select S.A from S)";
    assert_eq!(
        arc(q),
        "{ Q(A) | exists r in R [ Q.A = r.A and not exists s in S [ s.A = r.A or s.A is null or r.A is null ] ] }\n"
    );
    let with_null =
        r#"{"relations":{"R":{"schema":["A"],"rows":[[1]]},"S":{"schema":["A"],"rows":[[null]]}}}"#;
    let without =
        r#"{"relations":{"R":{"schema":["A"],"rows":[[1]]},"S":{"schema":["A"],"rows":[]}}}"#;
    assert!(eval(q, with_null, &Conventions::sql()).is_empty());
    assert_eq!(
        eval(q, without, &Conventions::sql()),
        vec![vec![Value::int(1)]]
    );
}

#[test]
fn scalar_subquery_in_select_is_lateral() {
    let scalar = "select distinct R.A, (select sum(R2.B) sm from R R2 where R2.A=R.A) from R";
    let lateral = "select distinct R.A, X.sm from R join lateral (select sum(R2.B) sm from R R2 where R2.A=R.A) X on true";
    let a = arc(scalar);
    assert!(
        a.contains("x in { X(sm) | exists r2 in R, group() [ X.sm = sum(r2.B) and r2.A = r.A ] }"),
        "{a}"
    );
    assert!(a.contains("group(r.A, x.sm)"), "{a}");
    let b = arc(lateral);
    assert!(b.contains("x in { X(sm) |"), "{b}");
}

#[test]
fn having_selects_over_grouped_collection() {
    let q = "select R.dept, avg(S.sal) av from R, S where R.empl=S.empl group by R.dept having sum(S.sal)>100";
    let a = arc(q);
    assert!(a.contains("X(dept, av, sum)"), "{a}");
    assert!(a.contains("x.sum > 100"), "{a}");
    let db = r#"{"relations":{"R":{"schema":["empl","dept"],"rows":[["e1","d1"],["e2","d1"],["e3","d2"]]},"S":{"schema":["empl","sal"],"rows":[["e1",60],["e2",60],["e3",10]]}}}"#;
    assert_eq!(
        eval(q, db, &Conventions::souffle()),
        vec![vec![Value::text("d1"), Value::parse_dec("60").unwrap()]]
    );
}

#[test]
fn outer_join_constants_become_literal_leaves() {
    let q = "select R.m, S.n from R left outer join S on (R.h=11 and R.y=S.y)";
    let a = arc(q);
    assert!(a.contains("left(r, inner(lit 11 as v, s))"), "{a}");
    let db = r#"{"relations":{"R":{"schema":["m","y","h"],"rows":[["m1",5,11],["m2",6,0]]},"S":{"schema":["n","y"],"rows":[["n1",5]]}}}"#;
    assert_eq!(
        eval(q, db, &Conventions::sql()),
        vec![
            vec![Value::text("m1"), Value::text("n1")],
            vec![Value::text("m2"), Value::Null]
        ]
    );
}

#[test]
fn exists_without_from_is_a_sentence() {
    let q =
        "select not exists(select 1 from R where R.q > (select count(S.d) from S where S.id=R.id))";
    let p = translate_sql(&parse_sql(q).unwrap()).unwrap();
    assert!(p.main.is_sentence());
    let db = r#"{"relations":{"R":{"schema":["id","q"],"rows":[[1,1]]},"S":{"schema":["id","d"],"rows":[[1,7]]}}}"#;
    assert_eq!(
        eval(q, db, &Conventions::sql()),
        vec![vec![Value::Bool(true)]]
    );
}

#[test]
fn named_perspective_uses_externals() {
    let q = "select R.A from R,S,T,\">\",\"-\" where R.B=\"-\".left and S.B=\"-\".right and \">\".left=\"-\".out and \">\".right=T.B";
    let a = arc(q);
    assert!(a.contains("f in ext \">\", f_2 in ext \"-\""), "{a}");
    let db = r#"{"relations":{"R":{"schema":["A","B"],"rows":[[1,10],[2,3]]},"S":{"schema":["B"],"rows":[[4]]},"T":{"schema":["B"],"rows":[[5]]}}}"#;
    assert_eq!(
        eval(q, db, &Conventions::souffle()),
        vec![vec![Value::int(1)]]
    );
}

#[test]
fn count_star_needs_a_schema() {
    let q = "select count(*) from R";
    assert_eq!(
        translate_sql(&parse_sql(q).unwrap()).unwrap_err().code(),
        "E_UNSUPPORTED_SQL"
    );
    let db = r#"{"relations":{"R":{"schema":["a"],"rows":[[1],[2]]}}}"#;
    assert_eq!(eval(q, db, &Conventions::sql()), vec![vec![Value::int(2)]]);
}

#[test]
fn left_join_group_by_warns() {
    let q =
        parse_sql("select R.A, sum(S.B) sm from R left join S on S.A<R.A group by R.A").unwrap();
    let reg = ExternalRegistry::default();
    let t = SqlTranslator::new(&reg).translate(&q).unwrap();
    assert_eq!(t.warnings.len(), 1);
    assert_eq!(t.warnings[0].code, "W_KEY_ASSUMPTION");
    assert!(analyze(&t.program, &reg).is_ok());
}

#[test]
fn unresolved_names_are_reported() {
    let e = translate_sql(&parse_sql("select Z.A from R").unwrap()).unwrap_err();
    assert_eq!(e.code(), "E_SQL_INVALID");
    let e = translate_sql(&parse_sql("select A from R, S").unwrap()).unwrap_err();
    assert!(e.to_string().contains("ambiguous"), "{e}");
}
