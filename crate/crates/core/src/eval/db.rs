//! In-memory relations and their JSON form.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::str::FromStr;

use serde_json::{Map, Number};

use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub schema: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Database {
    pub relations: BTreeMap<String, Relation>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DbError {
    #[error("database is not valid JSON: {0}")]
    Json(String),
    #[error("database: {0}")]
    Shape(String),
    #[error("relation `{relation}` row {row}: expected {expected} values, found {found}")]
    Arity {
        relation: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("relation `{relation}` row {row}: unsupported value `{value}`")]
    BadValue {
        relation: String,
        row: usize,
        value: String,
    },
    #[error("relation `{0}` has duplicate attribute names")]
    DuplicateAttribute(String),
}

impl Relation {
    pub fn new(name: impl Into<String>, schema: &[&str], rows: Vec<Vec<Value>>) -> Relation {
        Relation {
            name: name.into(),
            schema: schema.iter().map(|s| s.to_string()).collect(),
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows in ascending value order; multiplicities are kept.
    pub fn sorted(mut self) -> Relation {
        self.rows.sort();
        self
    }

    /// Removes duplicate rows, keeping first occurrences.
    pub fn dedup(mut self) -> Relation {
        let mut seen = BTreeSet::new();
        self.rows.retain(|r| seen.insert(r.clone()));
        self
    }

    /// Number of occurrences of `row`.
    pub fn multiplicity(&self, row: &[Value]) -> usize {
        self.rows.iter().filter(|r| r.as_slice() == row).count()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows = self
            .rows
            .iter()
            .map(|r| serde_json::Value::Array(r.iter().map(value_to_json).collect()))
            .collect();
        serde_json::json!({ "schema": self.schema, "rows": serde_json::Value::Array(rows) })
    }

    /// Aligned text table with a header line.
    pub fn to_table(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|v| v.to_string()).collect())
            .collect();
        let mut widths: Vec<usize> = self.schema.iter().map(|s| s.chars().count()).collect();
        for r in &cells {
            for (i, c) in r.iter().enumerate() {
                widths[i] = widths[i].max(c.chars().count());
            }
        }
        let line = |vals: &[String]| {
            let parts: Vec<String> = vals
                .iter()
                .enumerate()
                .map(|(i, v)| format!("{v:<w$}", w = widths[i]))
                .collect();
            parts.join(" | ").trim_end().to_string()
        };
        let mut out = String::new();
        let _ = writeln!(out, "{}", line(&self.schema));
        let sep: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        let _ = writeln!(out, "{}", sep.join("-+-"));
        for r in &cells {
            let _ = writeln!(out, "{}", line(r));
        }
        let n = self.rows.len();
        let _ = writeln!(out, "({n} row{})", if n == 1 { "" } else { "s" });
        out
    }
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    pub fn with(mut self, r: Relation) -> Database {
        self.insert(r);
        self
    }

    pub fn insert(&mut self, r: Relation) {
        self.relations.insert(r.name.clone(), r);
    }

    pub fn get(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn from_json(text: &str) -> Result<Database, DbError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| DbError::Json(e.to_string()))?;
        let shape = |m: &str| DbError::Shape(m.to_string());
        let root = v
            .as_object()
            .ok_or_else(|| shape("root must be an object"))?;
        if root.keys().any(|k| k != "relations") {
            return Err(shape("root may only contain `relations`"));
        }
        let rels = root
            .get("relations")
            .and_then(|r| r.as_object())
            .ok_or_else(|| shape("`relations` must be an object"))?;
        let mut db = Database::new();
        for (name, body) in rels {
            let body = body
                .as_object()
                .ok_or_else(|| DbError::Shape(format!("relation `{name}` must be an object")))?;
            if body.keys().any(|k| k != "schema" && k != "rows") {
                return Err(DbError::Shape(format!(
                    "relation `{name}` may only contain `schema` and `rows`"
                )));
            }
            let schema: Vec<String> = body
                .get("schema")
                .and_then(|s| s.as_array())
                .ok_or_else(|| DbError::Shape(format!("relation `{name}` needs a `schema` array")))?
                .iter()
                .map(|a| a.as_str().map(String::from))
                .collect::<Option<_>>()
                .ok_or_else(|| {
                    DbError::Shape(format!("relation `{name}` schema must list strings"))
                })?;
            if schema.iter().collect::<BTreeSet<_>>().len() != schema.len() {
                return Err(DbError::DuplicateAttribute(name.clone()));
            }
            let rows_json = match body.get("rows") {
                None => Vec::new(),
                Some(r) => r
                    .as_array()
                    .ok_or_else(|| {
                        DbError::Shape(format!("relation `{name}` rows must be an array"))
                    })?
                    .clone(),
            };
            let mut rows = Vec::new();
            for (i, row) in rows_json.iter().enumerate() {
                let cells = row.as_array().ok_or_else(|| {
                    DbError::Shape(format!("relation `{name}` row {i} must be an array"))
                })?;
                if cells.len() != schema.len() {
                    return Err(DbError::Arity {
                        relation: name.clone(),
                        row: i,
                        expected: schema.len(),
                        found: cells.len(),
                    });
                }
                let vals = cells
                    .iter()
                    .map(|c| {
                        value_from_json(c).ok_or_else(|| DbError::BadValue {
                            relation: name.clone(),
                            row: i,
                            value: c.to_string(),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                rows.push(vals);
            }
            db.insert(Relation {
                name: name.clone(),
                schema,
                rows,
            });
        }
        Ok(db)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut rels = Map::new();
        for (n, r) in &self.relations {
            rels.insert(n.clone(), r.to_json());
        }
        serde_json::json!({ "relations": rels })
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("database serializes");
        s.push('\n');
        s
    }
}

/// JSON scalar to value: integers become `int`, numbers with a fraction or
/// exponent become `dec`.
pub fn value_from_json(v: &serde_json::Value) -> Option<Value> {
    match v {
        serde_json::Value::Null => Some(Value::Null),
        serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
        serde_json::Value::String(s) => Some(Value::text(s.as_str())),
        serde_json::Value::Number(n) => {
            let s = n.to_string();
            if s.contains(['.', 'e', 'E']) {
                Value::parse_dec(&s)
            } else {
                Value::parse_int(&s)
            }
        }
        _ => None,
    }
}

pub fn value_to_json(v: &Value) -> serde_json::Value {
    match v {
        Value::Null => serde_json::Value::Null,
        Value::Bool(b) => serde_json::Value::Bool(*b),
        Value::Text(s) => serde_json::Value::String(s.clone()),
        Value::Int(_) | Value::Dec(_) => serde_json::Value::Number(
            Number::from_str(&v.to_string()).expect("numeric literal is valid JSON"),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_and_writes_relations() {
        let db = Database::from_json(
            r#"{"relations":{"R":{"schema":["id","q"],"rows":[[9,0],[1,2.50],["x",null]]}}}"#,
        )
        .unwrap();
        let r = db.get("R").unwrap();
        assert_eq!(r.rows[0], vec![Value::int(9), Value::int(0)]);
        assert_eq!(r.rows[1][1], Value::parse_dec("2.5").unwrap());
        assert_eq!(r.rows[2], vec![Value::text("x"), Value::Null]);
        let again = Database::from_json(&db.to_json_string()).unwrap();
        assert_eq!(again, db);
    }

    #[test]
    fn arity_is_checked() {
        let e = Database::from_json(r#"{"relations":{"R":{"schema":["a"],"rows":[[1,2]]}}}"#)
            .unwrap_err();
        assert!(matches!(
            e,
            DbError::Arity {
                expected: 1,
                found: 2,
                ..
            }
        ));
    }

    #[test]
    fn table_layout() {
        let r = Relation::new("Q", &["A", "sm"], vec![vec![Value::int(1), Value::Null]]);
        assert_eq!(r.to_table(), "A | sm\n--+-----\n1 | null\n(1 row)\n");
    }
}
