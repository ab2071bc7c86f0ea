//! Pretty-printer for the ARC comprehension syntax.

use std::fmt::Write;

use crate::alt::{
    BindingSource, CollectionExpr, Formula, JoinTree, Main, Polarity, Predicate, PredicateKind,
    Program, Quantified, Term,
};
use crate::lex::{is_ident_char, is_ident_start};
use crate::value::{ArithOp, Value};

/// Prints a program as ARC text; `parse_arc` of the result is structurally
/// equal to the input.
pub fn print_arc(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.definitions {
        if d.is_abstract {
            out.push_str("abstract ");
        }
        let _ = write!(out, "def {} := ", name(d.name()));
        collection(&d.collection, &mut out);
        out.push('\n');
    }
    match &p.main {
        Main::Query(c) => collection(c, &mut out),
        Main::Sentence(f) => formula(f, 0, &mut out),
    }
    out.push('\n');
    out
}

/// Prints a single formula.
pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    formula(f, 0, &mut out);
    out
}

/// Prints a single term.
pub fn print_term(t: &Term) -> String {
    let mut out = String::new();
    term(t, 0, &mut out);
    out
}

/// Prints a join annotation.
pub fn print_join_tree(j: &JoinTree) -> String {
    let mut out = String::new();
    join_tree(j, &mut out);
    out
}

/// Prints a single predicate.
pub fn print_predicate(p: &Predicate) -> String {
    let mut out = String::new();
    predicate(p, &mut out);
    out
}

/// Identifiers that are not plain words are double-quoted.
pub fn name(s: &str) -> String {
    let mut chars = s.chars();
    let plain = chars.next().is_some_and(is_ident_start) && chars.all(is_ident_char);
    if plain {
        s.to_string()
    } else {
        format!("\"{}\"", s.replace('"', "\"\""))
    }
}

pub fn value(v: &Value) -> String {
    match v {
        Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
        other => other.to_string(),
    }
}

fn collection(c: &CollectionExpr, out: &mut String) {
    let attrs: Vec<String> = c.head.attributes.iter().map(|a| name(a)).collect();
    let _ = write!(
        out,
        "{{ {}({}) | ",
        name(&c.head.relation),
        attrs.join(", ")
    );
    formula(&c.body, 0, out);
    out.push_str(" }");
}

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Or(_) => 1,
        Formula::And(_) => 2,
        _ => 3,
    }
}

fn formula(f: &Formula, min: u8, out: &mut String) {
    let paren = prec(f) < min;
    if paren {
        out.push('(');
    }
    match f {
        Formula::Or(cs) => join(cs, " or ", 2, out),
        Formula::And(cs) => join(cs, " and ", 3, out),
        Formula::Not(c) => {
            out.push_str("not (");
            formula(c, 0, out);
            out.push(')');
        }
        Formula::Atom(p) => predicate(p, out),
        Formula::True => out.push_str("true"),
        Formula::Quantified(q) => quantified(q, out),
    }
    if paren {
        out.push(')');
    }
}

fn join(cs: &[Formula], sep: &str, min: u8, out: &mut String) {
    for (i, c) in cs.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        formula(c, min, out);
    }
}

fn quantified(q: &Quantified, out: &mut String) {
    out.push_str(match q.polarity {
        Polarity::Exists => "exists ",
        Polarity::NotExists => "not exists ",
    });
    for (i, b) in q.bindings.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{} in ", name(&b.var));
        match &b.source {
            BindingSource::Named(n) => out.push_str(&name(n)),
            BindingSource::External(n) => {
                let _ = write!(out, "ext {}", name(n));
            }
            BindingSource::Nested(c) => collection(c, out),
        }
    }
    if let Some(g) = &q.grouping {
        let keys: Vec<String> = g
            .keys
            .iter()
            .map(|k| format!("{}.{}", name(&k.var), name(&k.attr)))
            .collect();
        let _ = write!(out, ", group({})", keys.join(", "));
    }
    if let Some(j) = &q.joins {
        out.push_str(", ");
        join_tree(j, out);
    }
    out.push_str(" [ ");
    formula(&q.body, 0, out);
    out.push_str(" ]");
}

fn join_tree(j: &JoinTree, out: &mut String) {
    let (kw, children): (&str, Vec<&JoinTree>) = match j {
        JoinTree::Leaf(v) => {
            out.push_str(&name(v));
            return;
        }
        JoinTree::Literal { value: v, var, .. } => {
            let _ = write!(out, "lit {} as {}", value(v), name(var));
            return;
        }
        JoinTree::Inner(cs) => ("inner", cs.iter().collect()),
        JoinTree::Left(l, r) => ("left", vec![l, r]),
        JoinTree::Full(l, r) => ("full", vec![l, r]),
    };
    out.push_str(kw);
    out.push('(');
    for (i, c) in children.into_iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        join_tree(c, out);
    }
    out.push(')');
}

fn predicate(p: &Predicate, out: &mut String) {
    match &p.kind {
        PredicateKind::Compare { op, left, right } => {
            term(left, 0, out);
            let _ = write!(out, " {} ", op.symbol());
            term(right, 0, out);
        }
        PredicateKind::IsNull { term: t, negated } => {
            term(t, 0, out);
            out.push_str(if *negated { " is not null" } else { " is null" });
        }
    }
}

fn term_prec(t: &Term) -> u8 {
    match t {
        Term::Arith {
            op: ArithOp::Add | ArithOp::Sub,
            ..
        } => 1,
        Term::Arith { .. } => 2,
        _ => 3,
    }
}

fn term(t: &Term, min: u8, out: &mut String) {
    let p = term_prec(t);
    let paren = p < min;
    if paren {
        out.push('(');
    }
    match t {
        Term::Const(v) => out.push_str(&value(v)),
        Term::Attr(a) => {
            let _ = write!(out, "{}.{}", name(&a.var), name(&a.attr));
        }
        Term::Arith { op, left, right } => {
            term(left, p, out);
            let _ = write!(out, " {} ", op.symbol());
            term(right, p + 1, out);
        }
        Term::Agg { func, arg } => {
            let _ = write!(out, "{}(", func.name());
            term(arg, 0, out);
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}
