//! Canonical JSON form of the ALT.
//!
//! The wire types below mirror the published schema (`schema/alt.schema.json`)
//! one-to-one and reject unknown fields. Object keys are emitted in sorted
//! order, so equal programs serialize to identical text.

use serde::{Deserialize, Serialize};

use crate::alt::{
    AggFn, AttributeRef, Binding, BindingSource, CollectionExpr, Definition, Formula, GroupingOp,
    HeadSpec, JoinTree, Main, Meta, Polarity, Predicate, PredicateKind, Program, Quantified, Term,
};
use crate::value::{ArithOp, CmpOp, Value};

pub const ALT_VERSION: u32 = 1;

/// Malformed ALT JSON, located by a dotted path.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("schema error at {path}: {reason}")]
pub struct SchemaError {
    pub path: String,
    pub reason: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WProgram {
    alt_version: u32,
    definitions: Vec<WDefinition>,
    main: WMain,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WDefinition {
    #[serde(rename = "abstract")]
    is_abstract: bool,
    head: Option<WHead>,
    body: Option<WFormula>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WMain {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    head: Option<WHead>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    body: Option<WFormula>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    formula: Option<WFormula>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WCollection {
    head: Option<WHead>,
    body: Option<WFormula>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WHead {
    relation: String,
    attributes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
enum WFormula {
    Quantified(Box<WQuantified>),
    And(Vec<WFormula>),
    Or(Vec<WFormula>),
    Not(Box<WFormula>),
    Atom(WPredicate),
    TrueLit {},
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WQuantified {
    polarity: WPolarity,
    bindings: Vec<WBinding>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    grouping: Option<WGrouping>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    joins: Option<WJoin>,
    body: WFormula,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
enum WPolarity {
    Exists,
    NotExists,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WGrouping {
    keys: Vec<WAttr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WBinding {
    var: String,
    source: WSource,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
enum WSource {
    Relation(String),
    Collection(Box<WCollection>),
    External(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
enum WJoin {
    Leaf(String),
    Literal { value: WValue, var: String },
    Inner(Vec<WJoin>),
    Left(Box<WJoin>, Box<WJoin>),
    Full(Box<WJoin>, Box<WJoin>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
enum WPredicate {
    Compare {
        op: String,
        left: WTerm,
        right: WTerm,
    },
    IsNull {
        term: WTerm,
        negated: bool,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WAttr {
    var: String,
    attr: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
enum WTerm {
    Const(WValue),
    Attr(WAttr),
    Arith {
        op: String,
        left: Box<WTerm>,
        right: Box<WTerm>,
    },
    Aggregate {
        #[serde(rename = "fn")]
        func: String,
        arg: Box<WTerm>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
enum WValue {
    Int(String),
    Dec(String),
    Text(String),
    Bool(bool),
    Null {},
}

// ---------- AST -> wire ----------

fn w_value(v: &Value) -> WValue {
    match v {
        Value::Int(i) => WValue::Int(i.to_string()),
        Value::Dec(d) => WValue::Dec(Value::dec_literal(d)),
        Value::Text(s) => WValue::Text(s.clone()),
        Value::Bool(b) => WValue::Bool(*b),
        Value::Null => WValue::Null {},
    }
}

fn w_attr(a: &AttributeRef) -> WAttr {
    WAttr {
        var: a.var.clone(),
        attr: a.attr.clone(),
    }
}

fn w_term(t: &Term) -> WTerm {
    match t {
        Term::Const(v) => WTerm::Const(w_value(v)),
        Term::Attr(a) => WTerm::Attr(w_attr(a)),
        Term::Arith { op, left, right } => WTerm::Arith {
            op: op.symbol().to_string(),
            left: Box::new(w_term(left)),
            right: Box::new(w_term(right)),
        },
        Term::Agg { func, arg } => WTerm::Aggregate {
            func: func.name().to_string(),
            arg: Box::new(w_term(arg)),
        },
    }
}

fn w_join(j: &JoinTree) -> WJoin {
    match j {
        JoinTree::Leaf(v) => WJoin::Leaf(v.clone()),
        JoinTree::Literal { value, var, .. } => WJoin::Literal {
            value: w_value(value),
            var: var.clone(),
        },
        JoinTree::Inner(cs) => WJoin::Inner(cs.iter().map(w_join).collect()),
        JoinTree::Left(l, r) => WJoin::Left(Box::new(w_join(l)), Box::new(w_join(r))),
        JoinTree::Full(l, r) => WJoin::Full(Box::new(w_join(l)), Box::new(w_join(r))),
    }
}

fn w_formula(f: &Formula) -> WFormula {
    match f {
        Formula::Quantified(q) => WFormula::Quantified(Box::new(WQuantified {
            polarity: match q.polarity {
                Polarity::Exists => WPolarity::Exists,
                Polarity::NotExists => WPolarity::NotExists,
            },
            bindings: q
                .bindings
                .iter()
                .map(|b| WBinding {
                    var: b.var.clone(),
                    source: match &b.source {
                        BindingSource::Named(n) => WSource::Relation(n.clone()),
                        BindingSource::External(n) => WSource::External(n.clone()),
                        BindingSource::Nested(c) => WSource::Collection(Box::new(w_collection(c))),
                    },
                })
                .collect(),
            grouping: q.grouping.as_ref().map(|g| WGrouping {
                keys: g.keys.iter().map(w_attr).collect(),
            }),
            joins: q.joins.as_ref().map(w_join),
            body: w_formula(&q.body),
        })),
        Formula::And(cs) => WFormula::And(cs.iter().map(w_formula).collect()),
        Formula::Or(cs) => WFormula::Or(cs.iter().map(w_formula).collect()),
        Formula::Not(c) => WFormula::Not(Box::new(w_formula(c))),
        Formula::Atom(p) => WFormula::Atom(match &p.kind {
            PredicateKind::Compare { op, left, right } => WPredicate::Compare {
                op: op.symbol().to_string(),
                left: w_term(left),
                right: w_term(right),
            },
            PredicateKind::IsNull { term, negated } => WPredicate::IsNull {
                term: w_term(term),
                negated: *negated,
            },
        }),
        Formula::True => WFormula::TrueLit {},
    }
}

fn w_head(h: &HeadSpec) -> WHead {
    WHead {
        relation: h.relation.clone(),
        attributes: h.attributes.clone(),
    }
}

fn w_collection(c: &CollectionExpr) -> WCollection {
    WCollection {
        head: Some(w_head(&c.head)),
        body: Some(w_formula(&c.body)),
    }
}

/// Serializes a program to its canonical JSON value.
pub fn to_json_value(p: &Program) -> serde_json::Value {
    let w = WProgram {
        alt_version: ALT_VERSION,
        definitions: p
            .definitions
            .iter()
            .map(|d| WDefinition {
                is_abstract: d.is_abstract,
                head: Some(w_head(&d.collection.head)),
                body: Some(w_formula(&d.collection.body)),
            })
            .collect(),
        main: match &p.main {
            Main::Query(c) => WMain {
                head: Some(w_head(&c.head)),
                body: Some(w_formula(&c.body)),
                formula: None,
            },
            Main::Sentence(f) => WMain {
                head: None,
                body: None,
                formula: Some(w_formula(f)),
            },
        },
    };
    serde_json::to_value(w).expect("ALT wire types always serialize")
}

/// Serializes a program to canonical, pretty-printed JSON text.
pub fn serialize_alt(p: &Program) -> String {
    let mut s = serde_json::to_string_pretty(&to_json_value(p)).expect("JSON values always print");
    s.push('\n');
    s
}

// ---------- wire -> AST ----------

fn schema_err(path: &str, reason: impl Into<String>) -> SchemaError {
    SchemaError {
        path: path.to_string(),
        reason: reason.into(),
    }
}

fn r_value(v: WValue, path: &str) -> Result<Value, SchemaError> {
    Ok(match v {
        WValue::Int(s) => {
            Value::parse_int(&s).ok_or_else(|| schema_err(path, format!("bad integer `{s}`")))?
        }
        WValue::Dec(s) => {
            Value::parse_dec(&s).ok_or_else(|| schema_err(path, format!("bad decimal `{s}`")))?
        }
        WValue::Text(s) => Value::Text(s),
        WValue::Bool(b) => Value::Bool(b),
        WValue::Null {} => Value::Null,
    })
}

fn r_attr(a: WAttr) -> AttributeRef {
    AttributeRef::new(a.var, a.attr)
}

fn r_term(t: WTerm, path: &str) -> Result<Term, SchemaError> {
    Ok(match t {
        WTerm::Const(v) => Term::Const(r_value(v, &format!("{path}.const"))?),
        WTerm::Attr(a) => Term::Attr(r_attr(a)),
        WTerm::Arith { op, left, right } => {
            let p = format!("{path}.arith");
            Term::Arith {
                op: ArithOp::from_symbol(&op).ok_or_else(|| {
                    schema_err(&format!("{p}.op"), format!("unknown operator `{op}`"))
                })?,
                left: Box::new(r_term(*left, &format!("{p}.left"))?),
                right: Box::new(r_term(*right, &format!("{p}.right"))?),
            }
        }
        WTerm::Aggregate { func, arg } => {
            let p = format!("{path}.aggregate");
            Term::Agg {
                func: AggFn::from_name(&func).ok_or_else(|| {
                    schema_err(&format!("{p}.fn"), format!("unknown aggregate `{func}`"))
                })?,
                arg: Box::new(r_term(*arg, &format!("{p}.arg"))?),
            }
        }
    })
}

fn r_join(j: WJoin, path: &str) -> Result<JoinTree, SchemaError> {
    Ok(match j {
        WJoin::Leaf(v) => JoinTree::Leaf(v),
        WJoin::Literal { value, var } => JoinTree::Literal {
            value: r_value(value, &format!("{path}.literal.value"))?,
            var,
            meta: Meta::default(),
        },
        WJoin::Inner(cs) => JoinTree::Inner(
            cs.into_iter()
                .enumerate()
                .map(|(i, c)| r_join(c, &format!("{path}.inner[{i}]")))
                .collect::<Result<_, _>>()?,
        ),
        WJoin::Left(l, r) => JoinTree::left(
            r_join(*l, &format!("{path}.left[0]"))?,
            r_join(*r, &format!("{path}.left[1]"))?,
        ),
        WJoin::Full(l, r) => JoinTree::full(
            r_join(*l, &format!("{path}.full[0]"))?,
            r_join(*r, &format!("{path}.full[1]"))?,
        ),
    })
}

fn r_formula(f: WFormula, path: &str) -> Result<Formula, SchemaError> {
    Ok(match f {
        WFormula::Quantified(q) => {
            let p = format!("{path}.quantified");
            let q = *q;
            let mut bindings = Vec::new();
            for (i, b) in q.bindings.into_iter().enumerate() {
                let bp = format!("{p}.bindings[{i}].source");
                let source = match b.source {
                    WSource::Relation(n) => BindingSource::Named(n),
                    WSource::External(n) => BindingSource::External(n),
                    WSource::Collection(c) => BindingSource::Nested(Box::new(r_collection(
                        *c,
                        &format!("{bp}.collection"),
                    )?)),
                };
                bindings.push(Binding {
                    var: b.var,
                    source,
                    meta: Meta::default(),
                });
            }
            Formula::Quantified(Quantified {
                polarity: match q.polarity {
                    WPolarity::Exists => Polarity::Exists,
                    WPolarity::NotExists => Polarity::NotExists,
                },
                bindings,
                grouping: q.grouping.map(|g| GroupingOp {
                    keys: g.keys.into_iter().map(r_attr).collect(),
                }),
                joins: q
                    .joins
                    .map(|j| r_join(j, &format!("{p}.joins")))
                    .transpose()?,
                body: Box::new(r_formula(q.body, &format!("{p}.body"))?),
                meta: Meta::default(),
            })
        }
        WFormula::And(cs) => Formula::And(
            cs.into_iter()
                .enumerate()
                .map(|(i, c)| r_formula(c, &format!("{path}.and[{i}]")))
                .collect::<Result<_, _>>()?,
        ),
        WFormula::Or(cs) => Formula::Or(
            cs.into_iter()
                .enumerate()
                .map(|(i, c)| r_formula(c, &format!("{path}.or[{i}]")))
                .collect::<Result<_, _>>()?,
        ),
        WFormula::Not(c) => Formula::not(r_formula(*c, &format!("{path}.not"))?),
        WFormula::Atom(p) => {
            let ap = format!("{path}.atom");
            Formula::Atom(match p {
                WPredicate::Compare { op, left, right } => {
                    let cp = format!("{ap}.compare");
                    Predicate::compare(
                        CmpOp::from_symbol(&op).ok_or_else(|| {
                            schema_err(&format!("{cp}.op"), format!("unknown operator `{op}`"))
                        })?,
                        r_term(left, &format!("{cp}.left"))?,
                        r_term(right, &format!("{cp}.right"))?,
                    )
                }
                WPredicate::IsNull { term, negated } => {
                    Predicate::is_null(r_term(term, &format!("{ap}.isNull.term"))?, negated)
                }
            })
        }
        WFormula::TrueLit {} => Formula::True,
    })
}

fn r_head(h: Option<WHead>, path: &str) -> Result<HeadSpec, SchemaError> {
    let h = h.ok_or_else(|| schema_err(&format!("{path}.head"), "missing field"))?;
    Ok(HeadSpec {
        relation: h.relation,
        attributes: h.attributes,
    })
}

fn r_parts(
    head: Option<WHead>,
    body: Option<WFormula>,
    path: &str,
) -> Result<CollectionExpr, SchemaError> {
    let head = r_head(head, path)?;
    let body = body.ok_or_else(|| schema_err(&format!("{path}.body"), "missing field"))?;
    Ok(CollectionExpr::new(
        head,
        r_formula(body, &format!("{path}.body"))?,
    ))
}

fn r_collection(c: WCollection, path: &str) -> Result<CollectionExpr, SchemaError> {
    r_parts(c.head, c.body, path)
}

/// Converts a serde path such as `main.body.quantified.bindings[0]` plus a
/// message into a [`SchemaError`], folding "missing field `x`" into the path.
fn from_serde(e: serde_path_to_error::Error<serde_json::Error>) -> SchemaError {
    let mut path = e.path().to_string();
    let msg = e.inner().to_string();
    let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
    if let Some(rest) = msg.strip_prefix("missing field `") {
        let field = rest.trim_end_matches('`');
        path = if path == "." || path.is_empty() {
            field.to_string()
        } else {
            format!("{path}.{field}")
        };
        return schema_err(&path, "missing field");
    }
    if path == "." {
        path = "$".to_string();
    }
    schema_err(&path, msg)
}

/// Parses ALT JSON text, rejecting unknown fields and invariant violations.
pub fn deserialize_alt(text: &str) -> Result<Program, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let w: WProgram = serde_path_to_error::deserialize(de).map_err(from_serde)?;
    if w.alt_version != ALT_VERSION {
        return Err(schema_err(
            "alt_version",
            format!(
                "unsupported version {} (expected {ALT_VERSION})",
                w.alt_version
            ),
        ));
    }
    let mut definitions = Vec::new();
    for (i, d) in w.definitions.into_iter().enumerate() {
        let path = format!("definitions[{i}]");
        definitions.push(Definition {
            is_abstract: d.is_abstract,
            collection: r_parts(d.head, d.body, &path)?,
        });
    }
    let m = w.main;
    let main = match (m.head, m.body, m.formula) {
        (None, None, Some(f)) => Main::Sentence(r_formula(f, "main.formula")?),
        (head, body, None) => Main::Query(r_parts(head, body, "main")?),
        _ => return Err(schema_err("main", "either head/body or formula, not both")),
    };
    let mut p = Program { definitions, main };
    p.validate().map_err(|e| schema_err(&e.path, e.reason))?;
    p.renumber();
    Ok(p)
}
