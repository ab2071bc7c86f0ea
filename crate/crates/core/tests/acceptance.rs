//! Acceptance checks, one line per criterion. All comparisons are exact:
//! relations are compared as sorted multisets, decimals by value.

use std::collections::{BTreeMap, BTreeSet};

use arc_core::corpus::{default_corpus_dir, load_corpus};
use arc_core::{
    analyze, classify_aggregation, deserialize_alt, evaluate_program, expand_abstract, parse_arc,
    parse_sql, pattern_equal, print_arc, serialize_alt, sql_roundtrip_eval, to_dot, to_higraph,
    AggregationPattern, Answer, CollectionSemantics, Conventions, Database, ExternalRegistry,
    LinkedProgram, Relation, RenderOptions, SqlTranslator, Value,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 13] = [
        ("count bug versions and their SQL", count_bug),
        (
            "aggregate on empty input under both conventions",
            convention_divergence,
        ),
        ("NOT IN with a null in the subquery", not_in_null),
        (
            "set and bag semantics of nested vs unnested quantifiers",
            set_bag,
        ),
        (
            "grouped and correlated aggregation agree but differ in pattern",
            fio_foi,
        ),
        (
            "left join annotation equals union of two queries",
            left_join,
        ),
        (
            "scalar, lateral and left-join-group-by rewrites",
            single_valued,
        ),
        ("recursive transitive closure and stratification", recursion),
        ("sparse matrix product", matrix),
        ("unique-set query, flat and modular", unique_set),
        ("per-department aggregates in three patterns", departments),
        ("parse, print, JSON and SQL round trips", round_trips),
        ("deterministic rendering against golden files", rendering),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(()) => println!("PASS {:>2} {name} (exact)", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {e}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn lp(src: &str) -> LinkedProgram {
    analyze(&parse_arc(src).unwrap(), &ExternalRegistry::default())
        .unwrap_or_else(|e| panic!("{src}: {e:?}"))
}

fn sql_lp(sql: &str) -> LinkedProgram {
    let reg = ExternalRegistry::default();
    let t = SqlTranslator::new(&reg)
        .translate(&parse_sql(sql).unwrap())
        .unwrap();
    analyze(&t.program, &reg).unwrap()
}

fn rows(src: &str, db: &Database, conv: &Conventions) -> Vec<Vec<Value>> {
    match evaluate_program(
        &parse_arc(src).unwrap(),
        &ExternalRegistry::default(),
        db,
        conv,
    ) {
        Ok(Answer::Rows(r)) => r.sorted().rows,
        other => panic!("{src}: {other:?}"),
    }
}

fn sql_rows(sql: &str, db: &Database, conv: &Conventions) -> Vec<Vec<Value>> {
    sql_roundtrip_eval(sql, db, conv).unwrap().sorted().rows
}

fn rel(name: &str, schema: &[&str], rows: Vec<Vec<Value>>) -> Relation {
    Relation::new(name, schema, rows)
}

fn ints(xs: &[i64]) -> Vec<Value> {
    xs.iter().map(|x| Value::int(*x)).collect()
}

fn set_conv() -> Conventions {
    Conventions::sql().with_semantics(CollectionSemantics::Set)
}

fn bag_conv() -> Conventions {
    Conventions::sql().with_semantics(CollectionSemantics::Bag)
}

const COUNT_V1: &str = "{ Q(id) | exists r in R [ Q.id = r.id and exists s in S, group() [ r.id = s.id and r.q = count(s.d) ] ] }";
const COUNT_V2: &str = "{ Q(id) | exists r in R, x in { X(id, ct) | exists s in S, group(s.id) [ X.id = s.id and X.ct = count(s.d) ] } [ Q.id = r.id and r.id = x.id and r.q = x.ct ] }";
const COUNT_V3: &str = "{ Q(id) | exists r in R, x in { X(id, ct) | exists s in S, r2 in R, group(r2.id), left(r2, s) [ X.id = r2.id and X.ct = count(s.d) and r2.id = s.id ] } [ Q.id = r.id and r.id = x.id and r.q = x.ct ] }";
const COUNT_SQL: [&str; 3] = [
    "select R.id from R where R.q = (select count(S.d) from S where S.id = R.id)",
    "select R.id from R, (select S.id, count(S.d) as ct from S group by S.id) as X where R.q = X.ct and R.id = X.id",
    "select R.id from R, (select R2.id, count(S.d) as ct from R R2 left join S on R2.id = S.id group by R2.id) as X where R.q = X.ct and R.id = X.id",
];

fn count_bug() -> Check {
    let db = Database::new()
        .with(rel("R", &["id", "q"], vec![ints(&[9, 0])]))
        .with(rel("S", &["id", "d"], vec![]));
    let conv = Conventions::sql();
    let expected = [vec![ints(&[9])], vec![], vec![ints(&[9])]];
    for (i, (arc, sql)) in [COUNT_V1, COUNT_V2, COUNT_V3]
        .iter()
        .zip(COUNT_SQL)
        .enumerate()
    {
        let got = rows(arc, &db, &conv);
        ensure(got == expected[i], || {
            format!("version {} gave {got:?}", i + 1)
        })?;
        ensure(pattern_equal(&lp(arc), &sql_lp(sql)), || {
            format!("version {} SQL pattern differs", i + 1)
        })?;
        let s = sql_rows(sql, &db, &conv);
        ensure(s == expected[i], || {
            format!("version {} SQL gave {s:?}", i + 1)
        })?;
    }
    Ok(())
}

fn convention_divergence() -> Check {
    let q = "{ Q(A, sm) | exists r in R, x in { X(sm) | exists s in S, group() [ s.A < r.A and X.sm = sum(s.B) ] } [ Q.A = r.A and Q.sm = x.sm ] }";
    let db = Database::new()
        .with(rel("R", &["A", "B"], vec![ints(&[1, 2])]))
        .with(rel("S", &["A", "B"], vec![]));
    let zero = rows(q, &db, &Conventions::souffle());
    ensure(zero == vec![ints(&[1, 0])], || {
        format!("souffle gave {zero:?}")
    })?;
    let null = rows(q, &db, &Conventions::sql());
    ensure(null == vec![vec![Value::int(1), Value::Null]], || {
        format!("sql gave {null:?}")
    })
}

fn not_in_null() -> Check {
    let sql = "select R.A from R where R.A not in (select S.A from S)";
    let r = rel("R", &["A"], vec![ints(&[1])]);
    let with_null = Database::new()
        .with(r.clone())
        .with(rel("S", &["A"], vec![vec![Value::Null]]));
    let without = Database::new().with(r).with(rel("S", &["A"], vec![]));
    let a = sql_rows(sql, &with_null, &Conventions::sql());
    ensure(a.is_empty(), || format!("with null gave {a:?}"))?;
    let b = sql_rows(sql, &without, &Conventions::sql());
    ensure(b == vec![ints(&[1])], || format!("without null gave {b:?}"))
}

const NESTED: &str = "{ Q(A) | exists r in R [ Q.A = r.A and exists s in S [ s.B = r.B ] ] }";
const UNNESTED: &str = "{ Q(A) | exists r in R, s in S [ Q.A = r.A and s.B = r.B ] }";

fn random_rows(g: &mut ChaCha8Rng, max: usize, arity: usize, dom: i64) -> Vec<Vec<Value>> {
    let n = g.gen_range(0..=max);
    (0..n)
        .map(|_| {
            (0..arity)
                .map(|_| Value::int(g.gen_range(0..dom)))
                .collect()
        })
        .collect()
}

fn set_bag() -> Check {
    let mut g = rng(4);
    for i in 0..200 {
        let r = random_rows(&mut g, 6, 2, 4);
        let s = random_rows(&mut g, 6, 1, 4);
        let oracle: BTreeSet<Vec<Value>> = r
            .iter()
            .filter(|t| s.iter().any(|u| u[0] == t[1]))
            .map(|t| vec![t[0].clone()])
            .collect();
        let db = Database::new()
            .with(rel("R", &["A", "B"], r))
            .with(rel("S", &["B"], s));
        let a = rows(NESTED, &db, &set_conv());
        let b = rows(UNNESTED, &db, &set_conv());
        let o: Vec<_> = oracle.into_iter().collect();
        ensure(a == o && b == o, || {
            format!("instance {i}: nested {a:?}, unnested {b:?}, oracle {o:?}")
        })?;
    }
    let db = Database::new()
        .with(rel(
            "R",
            &["A", "B"],
            vec![vec![Value::text("x"), Value::int(1)]],
        ))
        .with(rel("S", &["B"], vec![ints(&[1]), ints(&[1])]));
    let x = vec![Value::text("x")];
    let n = rows(NESTED, &db, &bag_conv());
    let u = rows(UNNESTED, &db, &bag_conv());
    ensure(n == vec![x.clone()], || {
        format!("nested under bag gave {n:?}")
    })?;
    ensure(u == vec![x.clone(), x], || {
        format!("unnested under bag gave {u:?}")
    })
}

const GROUPED: &str = "{ Q(A, sm) | exists r in R, group(r.A) [ Q.A = r.A and Q.sm = sum(r.B) ] }";
const CORRELATED: &str = "{ Q(A, sm) | exists r in R, x in { X(sm) | exists r2 in R, group() [ r2.A = r.A and X.sm = sum(r2.B) ] } [ Q.A = r.A and Q.sm = x.sm ] }";

fn fio_foi() -> Check {
    let mut g = rng(5);
    for i in 0..200 {
        let r: BTreeSet<Vec<Value>> = random_rows(&mut g, 8, 2, 5).into_iter().collect();
        let mut oracle: BTreeMap<Value, i64> = BTreeMap::new();
        for t in &r {
            let Value::Int(b) = &t[1] else { unreachable!() };
            *oracle.entry(t[0].clone()).or_default() += i64::try_from(b.clone()).unwrap();
        }
        let o: Vec<Vec<Value>> = oracle
            .into_iter()
            .map(|(a, s)| vec![a, Value::int(s)])
            .collect();
        let db = Database::new().with(rel("R", &["A", "B"], r.into_iter().collect()));
        let a = rows(GROUPED, &db, &set_conv());
        let b = rows(CORRELATED, &db, &set_conv());
        ensure(a == o && b == o, || {
            format!("instance {i}: grouped {a:?}, correlated {b:?}, oracle {o:?}")
        })?;
    }
    let (fio, foi) = (lp(GROUPED), lp(CORRELATED));
    ensure(!pattern_equal(&fio, &foi), || {
        "patterns reported equal".to_string()
    })?;
    let labels = |l: &LinkedProgram| {
        classify_aggregation(l)
            .into_iter()
            .map(|x| x.1)
            .collect::<Vec<_>>()
    };
    ensure(labels(&fio) == vec![AggregationPattern::Fio], || {
        format!("grouped labelled {:?}", labels(&fio))
    })?;
    ensure(labels(&foi) == vec![AggregationPattern::Foi], || {
        format!("correlated labelled {:?}", labels(&foi))
    })
}

const LEFT: &str =
    "{ Q(A, C) | exists r in R, s in S, left(r, s) [ Q.A = r.A and Q.C = s.C and r.B = s.B ] }";
const LEFT_UNION: &str = "{ Q(A, C) | exists r in R, s in S [ Q.A = r.A and Q.C = s.C and r.B = s.B ] or exists r in R [ Q.A = r.A and Q.C = null and not exists s in S [ s.B = r.B ] ] }";

fn maybe_null(g: &mut ChaCha8Rng, dom: i64) -> Value {
    if g.gen_bool(0.15) {
        Value::Null
    } else {
        Value::int(g.gen_range(0..dom))
    }
}

fn left_join() -> Check {
    let mut g = rng(6);
    for i in 0..200 {
        let nr = g.gen_range(0..6);
        let r: Vec<Vec<Value>> = (0..nr)
            .map(|_| vec![Value::int(g.gen_range(0..4)), maybe_null(&mut g, 3)])
            .collect();
        let ns = g.gen_range(0..6);
        let s: Vec<Vec<Value>> = (0..ns)
            .map(|_| vec![maybe_null(&mut g, 3), maybe_null(&mut g, 4)])
            .collect();
        let mut oracle = Vec::new();
        for t in &r {
            let matches: Vec<&Vec<Value>> = s
                .iter()
                .filter(|u| !t[1].is_null() && u[0] == t[1])
                .collect();
            if matches.is_empty() {
                oracle.push(vec![t[0].clone(), Value::Null]);
            }
            for u in matches {
                oracle.push(vec![t[0].clone(), u[1].clone()]);
            }
        }
        oracle.sort();
        let db = Database::new()
            .with(rel("R", &["A", "B"], r))
            .with(rel("S", &["B", "C"], s));
        let a = rows(LEFT, &db, &bag_conv());
        let b = rows(LEFT_UNION, &db, &bag_conv());
        ensure(a == oracle && b == oracle, || {
            format!("instance {i}: join {a:?}, union {b:?}, oracle {oracle:?}")
        })?;
    }
    let q = "{ Q(m, n) | exists r in R, s in S, left(r, inner(lit 11 as v, s)) [ Q.m = r.m and Q.n = s.n and r.h = v.val and r.y = s.y ] }";
    let t = |s: &str| Value::text(s);
    let db = Database::new()
        .with(rel(
            "R",
            &["m", "y", "h"],
            vec![
                vec![t("m1"), Value::int(5), Value::int(11)],
                vec![t("m2"), Value::int(6), Value::int(0)],
                vec![t("m3"), Value::int(5), Value::int(0)],
            ],
        ))
        .with(rel("S", &["n", "y"], vec![vec![t("n1"), Value::int(5)]]));
    let got = rows(q, &db, &Conventions::sql());
    let want = vec![
        vec![t("m1"), t("n1")],
        vec![t("m2"), Value::Null],
        vec![t("m3"), Value::Null],
    ];
    ensure(got == want, || format!("literal leaf query gave {got:?}"))
}

const SCALAR_SQL: &str = "select R.A, (select sum(S.B) sm from S where S.A < R.A) from R";
const LATERAL_SQL: &str =
    "select R.A, X.sm from R join lateral (select sum(S.B) sm from S where S.A < R.A) X on true";
const LEFT_GROUP_SQL: &str = "select R.A, sum(S.B) sm from R left join S on S.A < R.A group by R.A";

fn single_valued() -> Check {
    ensure(
        pattern_equal(&sql_lp(SCALAR_SQL), &sql_lp(LATERAL_SQL)),
        || "scalar and lateral patterns differ".to_string(),
    )?;
    let mut g = rng(7);
    let mut diverged = 0;
    for i in 0..200 {
        let r = random_rows(&mut g, 5, 1, 4);
        let s = random_rows(&mut g, 5, 2, 4);
        let dup = r.iter().collect::<BTreeSet<_>>().len() != r.len();
        let db = Database::new()
            .with(rel("R", &["A"], r))
            .with(rel("S", &["A", "B"], s));
        for conv in [set_conv(), bag_conv()] {
            let a = sql_rows(SCALAR_SQL, &db, &conv);
            let b = sql_rows(LATERAL_SQL, &db, &conv);
            ensure(a == b, || {
                format!("instance {i}: scalar {a:?} vs lateral {b:?}")
            })?;
        }
        let scalar = sql_rows(SCALAR_SQL, &db, &bag_conv());
        let grouped = sql_rows(LEFT_GROUP_SQL, &db, &bag_conv());
        ensure((scalar != grouped) == dup, || {
            format!("instance {i}: duplicates {dup}, scalar {scalar:?}, left join {grouped:?}")
        })?;
        diverged += usize::from(dup);
    }
    ensure(diverged > 0, || {
        "no instance with duplicates was generated".to_string()
    })
}

const ANCESTOR: &str = "def A := { A(s, t) | exists p in P [ A.s = p.s and A.t = p.t ] or exists p in P, a2 in A [ A.s = p.s and p.t = a2.s and A.t = a2.t ] }\n{ Q(s, t) | exists a in A [ Q.s = a.s and Q.t = a.t ] }";

fn recursion() -> Check {
    let mut g = rng(8);
    for i in 0..100 {
        let n = g.gen_range(1..=8);
        let m = g.gen_range(0..=n * 2);
        let edges: BTreeSet<(i64, i64)> = (0..m)
            .map(|_| (g.gen_range(0..n), g.gen_range(0..n)))
            .collect();
        let mut reach = edges.clone();
        loop {
            let next: BTreeSet<(i64, i64)> = reach
                .iter()
                .flat_map(|&(a, b)| {
                    edges
                        .iter()
                        .filter(move |&&(c, _)| c == b)
                        .map(move |&(_, d)| (a, d))
                })
                .collect();
            let before = reach.len();
            reach.extend(next);
            if reach.len() == before {
                break;
            }
        }
        let oracle: Vec<Vec<Value>> = reach.iter().map(|&(a, b)| ints(&[a, b])).collect();
        let db = Database::new().with(rel(
            "P",
            &["s", "t"],
            edges.iter().map(|&(a, b)| ints(&[a, b])).collect(),
        ));
        let got = rows(ANCESTOR, &db, &Conventions::souffle());
        ensure(got == oracle, || {
            format!("graph {i}: got {got:?}, closure {oracle:?}")
        })?;
    }
    let bad = "def A := { A(x) | exists p in P [ A.x = p.x and not exists a in A [ a.x = p.x ] ] }\n{ Q(x) | exists a in A [ Q.x = a.x ] }";
    match analyze(&parse_arc(bad).unwrap(), &ExternalRegistry::default()) {
        Err(ds) if ds.iter().any(|d| d.code == "E_UNSTRATIFIED") => Ok(()),
        other => Err(format!("unstratified program accepted: {other:?}")),
    }
}

const MATRIX: &str = "{ C(row, col, val) | exists a in A, b in B, group(a.row, b.col) [ C.row = a.row and C.col = b.col and C.val = sum(a.val * b.val) and a.col = b.row ] }";
const MATRIX_EXT: &str = "{ C(row, col, val) | exists a in A, b in B, f in ext \"*\", group(a.row, b.col) [ C.row = a.row and C.col = b.col and C.val = sum(f.out) and a.col = b.row and f.$1 = a.val and f.$2 = b.val ] }";

fn sparse(g: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<i64>> {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if g.gen_bool(0.5) {
                        g.gen_range(1..10)
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect()
}

fn triples(m: &[Vec<i64>]) -> Vec<Vec<Value>> {
    let mut out = Vec::new();
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0 {
                out.push(ints(&[i as i64 + 1, j as i64 + 1, v]));
            }
        }
    }
    out
}

fn matrix() -> Check {
    let mut g = rng(9);
    for i in 0..50 {
        let (n, k, m) = (g.gen_range(1..=5), g.gen_range(1..=5), g.gen_range(1..=5));
        let a = sparse(&mut g, n, k);
        let b = sparse(&mut g, k, m);
        let dense: Vec<Vec<i64>> = (0..n)
            .map(|r| {
                (0..m)
                    .map(|c| (0..k).map(|x| a[r][x] * b[x][c]).sum())
                    .collect()
            })
            .collect();
        let oracle = triples(&dense);
        let db = Database::new()
            .with(rel("A", &["row", "col", "val"], triples(&a)))
            .with(rel("B", &["row", "col", "val"], triples(&b)));
        for q in [MATRIX, MATRIX_EXT] {
            let got = rows(q, &db, &Conventions::souffle());
            ensure(got == oracle, || {
                format!("matrices {i}: got {got:?}, dense {oracle:?}")
            })?;
        }
    }
    Ok(())
}

const UNIQUE_SET: &str = "{ Q(d) | exists l1 in Likes [ Q.d = l1.drinker and
  not exists l2 in Likes [ l2.drinker <> l1.drinker and
    not exists l3 in Likes [ l3.drinker = l2.drinker and
      not exists l4 in Likes [ l4.beer = l3.beer and l4.drinker = l1.drinker ] ] and
    not exists l5 in Likes [ l5.drinker = l1.drinker and
      not exists l6 in Likes [ l6.drinker = l2.drinker and l6.beer = l5.beer ] ] ] ] }";
const UNIQUE_SET_MODULAR: &str = "abstract def Subset := { Subset(left, right) |
  not exists l3 in Likes [ l3.drinker = Subset.left and
    not exists l4 in Likes [ l4.beer = l3.beer and l4.drinker = Subset.right ] ] }
{ Q(d) | exists l1 in Likes [ Q.d = l1.drinker and
  not exists l2 in Likes, s1 in Subset, s2 in Subset [ l2.drinker <> l1.drinker and
    s1.left = l1.drinker and s1.right = l2.drinker and
    s2.left = l2.drinker and s2.right = l1.drinker ] ] }";

fn unique_set() -> Check {
    let modular =
        expand_abstract(&parse_arc(UNIQUE_SET_MODULAR).unwrap()).map_err(|e| e.to_string())?;
    ensure(modular.definitions.is_empty(), || {
        "Subset survived expansion".to_string()
    })?;
    let modular_text = print_arc(&modular);
    let mut g = rng(10);
    for i in 0..100 {
        let drinkers = g.gen_range(1..=5);
        let beers = g.gen_range(1..=4);
        let mut likes: BTreeMap<i64, BTreeSet<i64>> = BTreeMap::new();
        for d in 0..drinkers {
            for b in 0..beers {
                if g.gen_bool(0.4) {
                    likes.entry(d).or_default().insert(b);
                }
            }
        }
        let oracle: Vec<Vec<Value>> = likes
            .iter()
            .filter(|(d, set)| likes.iter().all(|(e, other)| e == *d || other != *set))
            .map(|(d, _)| vec![Value::text(format!("d{d}"))])
            .collect();
        let rows_in: Vec<Vec<Value>> = likes
            .iter()
            .flat_map(|(d, set)| {
                set.iter()
                    .map(move |b| vec![Value::text(format!("d{d}")), Value::text(format!("b{b}"))])
            })
            .collect();
        let db = Database::new().with(rel("Likes", &["drinker", "beer"], rows_in));
        let flat = rows(UNIQUE_SET, &db, &Conventions::souffle());
        let modular = rows(&modular_text, &db, &Conventions::souffle());
        ensure(flat == oracle && modular == oracle, || {
            format!("instance {i}: flat {flat:?}, modular {modular:?}, oracle {oracle:?}")
        })?;
    }
    Ok(())
}

const DEPT_HAVING: &str = "{ Q(dept, av) | exists x in { X(dept, av, sm) | exists r in R, s in S, group(r.dept) [ X.dept = r.dept and X.av = avg(s.sal) and X.sm = sum(s.sal) and r.empl = s.empl ] } [ Q.dept = x.dept and Q.av = x.av and x.sm > 100 ] }";
const DEPT_CORRELATED: &str = "{ Q(dept, av) | exists r3 in R, s3 in S,
    x in { X(av) | exists r1 in R, s1 in S, group(r1.dept) [ r1.dept = r3.dept and r1.empl = s1.empl and X.av = avg(s1.sal) ] },
    y in { Y(sm) | exists r2 in R, s2 in S, group(r2.dept) [ r2.dept = r3.dept and r2.empl = s2.empl and Y.sm = sum(s2.sal) ] }
    [ Q.dept = r3.dept and Q.av = x.av and r3.empl = s3.empl and y.sm > 100 ] }";
const DEPT_JOINED: &str = "{ Q(dept, av) |
    exists x in { X(dept, av) | exists r1 in R, s1 in S, group(r1.dept) [ X.dept = r1.dept and r1.empl = s1.empl and X.av = avg(s1.sal) ] },
    y in { Y(dept, sm) | exists r2 in R, s2 in S, group(r2.dept) [ Y.dept = r2.dept and r2.empl = s2.empl and Y.sm = sum(s2.sal) ] }
    [ Q.dept = x.dept and Q.av = x.av and x.dept = y.dept and y.sm > 100 ] }";

fn departments() -> Check {
    let t = |s: &str| Value::text(s);
    let db = Database::new()
        .with(rel(
            "R",
            &["empl", "dept"],
            vec![vec![t("e1"), t("d1")], vec![t("e2"), t("d1")]],
        ))
        .with(rel(
            "S",
            &["empl", "sal"],
            vec![vec![t("e1"), Value::int(60)], vec![t("e2"), Value::int(60)]],
        ));
    let got = rows(DEPT_HAVING, &db, &Conventions::sql());
    let sixty = Value::parse_dec("60.0").unwrap();
    ensure(got == vec![vec![t("d1"), sixty]], || {
        format!("two-employee instance gave {got:?}")
    })?;
    let forms = [lp(DEPT_HAVING), lp(DEPT_CORRELATED), lp(DEPT_JOINED)];
    for (i, a) in forms.iter().enumerate() {
        for b in &forms[i + 1..] {
            ensure(!pattern_equal(a, b), || {
                "two department forms share a pattern".to_string()
            })?;
        }
    }
    let mut g = rng(11);
    for i in 0..50 {
        let ne = g.gen_range(1..=6);
        let r: BTreeSet<Vec<Value>> = (0..ne)
            .map(|e| vec![t(&format!("e{e}")), t(&format!("d{}", g.gen_range(0..3)))])
            .collect();
        let s: BTreeSet<Vec<Value>> = (0..g.gen_range(0..=8))
            .map(|_| {
                vec![
                    t(&format!("e{}", g.gen_range(0..ne))),
                    Value::int(g.gen_range(0..4) * 20),
                ]
            })
            .collect();
        let mut sums: BTreeMap<Value, i64> = BTreeMap::new();
        for a in &r {
            for b in s.iter().filter(|b| b[0] == a[0]) {
                let Value::Int(x) = &b[1] else { unreachable!() };
                *sums.entry(a[1].clone()).or_default() += i64::try_from(x.clone()).unwrap();
            }
        }
        let depts: Vec<Value> = sums
            .into_iter()
            .filter(|(_, s)| *s > 100)
            .map(|(d, _)| d)
            .collect();
        let db = Database::new()
            .with(rel("R", &["empl", "dept"], r.into_iter().collect()))
            .with(rel("S", &["empl", "sal"], s.into_iter().collect()));
        let results: Vec<_> = [DEPT_HAVING, DEPT_CORRELATED, DEPT_JOINED]
            .iter()
            .map(|q| rows(q, &db, &set_conv()))
            .collect();
        ensure(results.iter().all(|x| *x == results[0]), || {
            format!("instance {i}: {results:?}")
        })?;
        let got: Vec<Value> = results[0].iter().map(|row| row[0].clone()).collect();
        ensure(got == depts, || {
            format!("instance {i}: departments {got:?}, oracle {depts:?}")
        })?;
    }
    Ok(())
}

fn round_trips() -> Check {
    let fixtures = load_corpus(&default_corpus_dir(), "").map_err(|e| e.to_string())?;
    ensure(!fixtures.is_empty(), || "empty corpus".to_string())?;
    let reg = ExternalRegistry::default();
    let mut sql_count = 0;
    for f in &fixtures {
        let p = parse_arc(&f.arc).map_err(|e| format!("{}: {e}", f.id))?;
        let text = print_arc(&p);
        let again = parse_arc(&text).map_err(|e| format!("{}: {e}", f.id))?;
        ensure(again == p && print_arc(&again) == text, || {
            format!("{}: print is not a fixed point", f.id)
        })?;
        let back = deserialize_alt(&serialize_alt(&p)).map_err(|e| format!("{}: {e}", f.id))?;
        ensure(back == p, || {
            format!("{}: JSON round trip changed the program", f.id)
        })?;
        if let Some(sql) = &f.sql {
            sql_count += 1;
            let ast = parse_sql(sql).map_err(|e| format!("{}: {e}", f.id))?;
            let mut tr = SqlTranslator::new(&reg);
            if let Some(db) = &f.db {
                tr = tr.with_schemas(db);
            }
            let t = tr.translate(&ast).map_err(|e| format!("{}: {e}", f.id))?;
            analyze(&t.program, &reg)
                .map_err(|ds| format!("{}: {} binder errors", f.id, ds.len()))?;
        }
    }
    ensure(sql_count >= 20, || format!("only {sql_count} SQL fixtures"))
}

fn rendering() -> Check {
    let required = [
        "selection-join",
        "grouped-sum",
        "scalar-subquery-distinct",
        "left-join-literal",
        "count-bug-correlated",
        "count-bug-grouped",
        "count-bug-left-join",
        "unique-set-modular",
    ];
    let fixtures = load_corpus(&default_corpus_dir(), "").map_err(|e| e.to_string())?;
    let reg = ExternalRegistry::default();
    for id in required {
        let f = fixtures
            .iter()
            .find(|f| f.id == id)
            .ok_or_else(|| format!("missing fixture {id}"))?;
        let golden = f
            .dot
            .as_ref()
            .ok_or_else(|| format!("{id} has no golden"))?;
        let opts = RenderOptions {
            collapse: f.meta.collapse.iter().cloned().collect(),
        };
        let render = || {
            let lp = analyze(&parse_arc(&f.arc).unwrap(), &reg).unwrap();
            to_dot(&to_higraph(&lp, &opts))
        };
        let (a, b) = (render(), render());
        ensure(a == b, || format!("{id}: two renders differ"))?;
        ensure(&a == golden, || format!("{id}: render differs from golden"))?;
    }
    Ok(())
}
