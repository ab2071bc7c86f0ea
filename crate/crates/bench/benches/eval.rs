use arc_core::{
    analyze, canonicalize, eval_query, parse_arc, to_dot, to_higraph, Conventions, Database,
    ExternalRegistry, LinkedProgram, Relation, RenderOptions, Value,
};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

const COUNT_BUG_LEFT_JOIN: &str = "{ Q(id) | exists r in R, x in { X(id, ct) | exists s in S, r2 in R, group(r2.id), left(r2, s) [ X.id = r2.id and X.ct = count(s.d) and r2.id = s.id ] } [ Q.id = r.id and r.id = x.id and r.q = x.ct ] }";
const ANCESTOR: &str = "def A := { A(s, t) | exists p in P [ A.s = p.s and A.t = p.t ] or exists p in P, a2 in A [ A.s = p.s and p.t = a2.s and A.t = a2.t ] }\n{ Q(s, t) | exists a in A [ Q.s = a.s and Q.t = a.t ] }";
const UNIQUE_SET: &str = "{ Q(d) | exists l1 in Likes [ Q.d = l1.drinker and not exists l2 in Likes [ l2.drinker <> l1.drinker and not exists l3 in Likes [ l3.drinker = l2.drinker and not exists l4 in Likes [ l4.beer = l3.beer and l4.drinker = l1.drinker ] ] and not exists l5 in Likes [ l5.drinker = l1.drinker and not exists l6 in Likes [ l6.drinker = l2.drinker and l6.beer = l5.beer ] ] ] ] }";

fn linked(src: &str) -> LinkedProgram {
    analyze(&parse_arc(src).unwrap(), &ExternalRegistry::default()).unwrap()
}

fn ints(name: &str, schema: &[&str], rows: impl Iterator<Item = Vec<i64>>) -> Relation {
    Relation::new(
        name,
        schema,
        rows.map(|r| r.into_iter().map(Value::int).collect())
            .collect(),
    )
}

fn benches(c: &mut Criterion) {
    let count_db = Database::new()
        .with(ints("R", &["id", "q"], (0..20).map(|i| vec![i, i % 3])))
        .with(ints("S", &["id", "d"], (0..40).map(|i| vec![i % 10, i])));
    let lp = linked(COUNT_BUG_LEFT_JOIN);
    c.bench_function("count bug, left join then group", |b| {
        b.iter(|| eval_query(black_box(&lp), &count_db, &Conventions::sql()).unwrap())
    });

    let chain = Database::new().with(ints("P", &["s", "t"], (0..20).map(|i| vec![i, i + 1])));
    let lp = linked(ANCESTOR);
    c.bench_function("transitive closure of a 20-edge chain", |b| {
        b.iter(|| eval_query(black_box(&lp), &chain, &Conventions::souffle()).unwrap())
    });

    let lp = linked(UNIQUE_SET);
    c.bench_function("canonicalize unique-set", |b| {
        b.iter(|| canonicalize(black_box(&lp)))
    });
    c.bench_function("render unique-set", |b| {
        b.iter(|| to_dot(&to_higraph(black_box(&lp), &RenderOptions::default())))
    });
    c.bench_function("parse and bind unique-set", |b| {
        b.iter(|| linked(black_box(UNIQUE_SET)))
    });
}

criterion_group!(eval, benches);
criterion_main!(eval);
