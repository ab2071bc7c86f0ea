//! Self-contained demonstrations with inline databases.

use std::fmt::Write;

use arc_core::{
    analyze, evaluate_program, parse_arc, parse_sql, pattern_equal, Answer, Conventions, Database,
    ExternalRegistry, Relation, SqlTranslator,
};
use clap::ValueEnum;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Demo {
    /// Three formulations of the count-bug query.
    CountBug,
    /// One aggregate query under SQL and Datalog conventions.
    Conventions,
    /// Sparse matrix product, inline and with an external multiplication.
    Matrix,
    /// Unique-set query, flat and with an abstract Subset relation.
    UniqueSet,
}

const COUNT_BUG_DB: &str = r#"{"relations":{"R":{"schema":["id","q"],"rows":[[9,0]]},"S":{"schema":["id","d"],"rows":[]}}}"#;

const COUNT_BUG: [(&str, &str, &str); 3] = [
    (
        "correlated subquery",
        "{ Q(id) | exists r in R [ Q.id = r.id and exists s in S, group() [ r.id = s.id and r.q = count(s.d) ] ] }",
        "select R.id from R where R.q = (select count(S.d) from S where S.id = R.id)",
    ),
    (
        "grouped derived table",
        "{ Q(id) | exists r in R, x in { X(id, ct) | exists s in S, group(s.id) [ X.id = s.id and X.ct = count(s.d) ] } [ Q.id = r.id and r.id = x.id and r.q = x.ct ] }",
        "select R.id from R, (select S.id, count(S.d) as ct from S group by S.id) as X where R.q = X.ct and R.id = X.id",
    ),
    (
        "left join then group",
        "{ Q(id) | exists r in R, x in { X(id, ct) | exists s in S, r2 in R, group(r2.id), left(r2, s) [ X.id = r2.id and X.ct = count(s.d) and r2.id = s.id ] } [ Q.id = r.id and r.id = x.id and r.q = x.ct ] }",
        "select R.id from R, (select R2.id, count(S.d) as ct from R R2 left join S on R2.id = S.id group by R2.id) as X where R.q = X.ct and R.id = X.id",
    ),
];

const CONVENTIONS_DB: &str =
    r#"{"relations":{"R":{"schema":["A","B"],"rows":[[1,2]]},"S":{"schema":["A","B"],"rows":[]}}}"#;
const CONVENTIONS_QUERY: &str = "{ Q(A, sm) | exists r in R, x in { X(sm) | exists s in S, group() [ s.A < r.A and X.sm = sum(s.B) ] } [ Q.A = r.A and Q.sm = x.sm ] }";

const MATRIX_DB: &str = r#"{"relations":{
  "A":{"schema":["row","col","val"],"rows":[[1,1,1],[1,2,2],[2,2,3]]},
  "B":{"schema":["row","col","val"],"rows":[[1,1,4],[2,1,5],[2,2,6]]}}}"#;
const MATRIX_INLINE: &str = "{ C(row, col, val) | exists a in A, b in B, group(a.row, b.col) [ C.row = a.row and C.col = b.col and C.val = sum(a.val * b.val) and a.col = b.row ] }";
const MATRIX_EXTERNAL: &str = "{ C(row, col, val) | exists a in A, b in B, f in ext \"*\", group(a.row, b.col) [ C.row = a.row and C.col = b.col and C.val = sum(f.out) and a.col = b.row and f.$1 = a.val and f.$2 = b.val ] }";

const LIKES_DB: &str = r#"{"relations":{"Likes":{"schema":["drinker","beer"],"rows":[
  ["alice","a"],["alice","b"],["bob","a"],["bob","b"],["carol","a"],["dave","c"]]}}}"#;
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

pub fn run(demo: Demo) -> Result<String, String> {
    match demo {
        Demo::CountBug => count_bug(),
        Demo::Conventions => conventions(),
        Demo::Matrix => matrix(),
        Demo::UniqueSet => unique_set(),
    }
}

fn db(text: &str) -> Database {
    Database::from_json(text).expect("demo database is valid")
}

fn eval(arc: &str, db: &Database, conv: &Conventions) -> Result<Relation, String> {
    let p = parse_arc(arc).map_err(|e| e.to_string())?;
    match evaluate_program(&p, &ExternalRegistry::default(), db, conv).map_err(|e| e.to_string())? {
        Answer::Rows(r) => Ok(r.sorted()),
        Answer::Truth(_) => Err("demo query is a sentence".to_string()),
    }
}

/// `{(9)}`-style rendering of a relation's rows.
fn set(r: &Relation) -> String {
    let rows: Vec<String> = r
        .rows
        .iter()
        .map(|row| {
            format!(
                "({})",
                row.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        })
        .collect();
    format!("{{{}}}", rows.join(", "))
}

fn count_bug() -> Result<String, String> {
    let d = db(COUNT_BUG_DB);
    let conv = Conventions::sql();
    let reg = ExternalRegistry::default();
    let mut out = String::from("count bug on R(id, q) = {(9, 0)}, S(id, d) = {}\n");
    for (i, (label, arc, sql)) in COUNT_BUG.iter().enumerate() {
        let r = eval(arc, &d, &conv)?;
        let translated = SqlTranslator::new(&reg)
            .translate(&parse_sql(sql).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let a = analyze(&parse_arc(arc).map_err(|e| e.to_string())?, &reg)
            .map_err(|_| "calculus does not bind")?;
        let b = analyze(&translated.program, &reg).map_err(|_| "translation does not bind")?;
        let same = if pattern_equal(&a, &b) {
            "same pattern as SQL"
        } else {
            "differs from SQL"
        };
        let _ = writeln!(out, "version {} ({label}): {}  [{same}]", i + 1, set(&r));
    }
    Ok(out)
}

fn conventions() -> Result<String, String> {
    let d = db(CONVENTIONS_DB);
    let mut out = String::from("sum over an empty group, R(A, B) = {(1, 2)}, S(A, B) = {}\n");
    for (name, conv) in [
        ("souffle", Conventions::souffle()),
        ("sql", Conventions::sql()),
    ] {
        let _ = writeln!(
            out,
            "{name:<8} {}",
            set(&eval(CONVENTIONS_QUERY, &d, &conv)?)
        );
    }
    Ok(out)
}

fn matrix() -> Result<String, String> {
    let d = db(MATRIX_DB);
    let conv = Conventions::souffle();
    let inline = eval(MATRIX_INLINE, &d, &conv)?;
    let external = eval(MATRIX_EXTERNAL, &d, &conv)?;
    let mut out = String::from("C = A x B over sparse (row, col, val) triples\n");
    out.push_str(&inline.to_table());
    let agree = if inline == external {
        "agrees"
    } else {
        "disagrees"
    };
    let _ = writeln!(out, "external multiplication {agree}");
    Ok(out)
}

fn unique_set() -> Result<String, String> {
    let d = db(LIKES_DB);
    let conv = Conventions::souffle();
    let flat = eval(UNIQUE_SET, &d, &conv)?;
    let modular = eval(UNIQUE_SET_MODULAR, &d, &conv)?;
    let mut out = String::from("drinkers with a unique set of liked beers\n");
    let _ = writeln!(out, "flat     {}", set(&flat));
    let _ = writeln!(out, "modular  {}", set(&modular));
    Ok(out)
}
