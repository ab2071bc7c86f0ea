//! External relations: declared attributes, access patterns and built-in
//! semantics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::value::{ArithOp, CmpOp, Value, ValueError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalSemantics {
    Minus,
    Add,
    Mul,
    CmpGt,
    CmpLt,
    Like,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub name: String,
    pub attributes: Vec<String>,
    /// Admissible access patterns over `b` (bound) and `f` (free), one
    /// character per attribute.
    pub patterns: Vec<String>,
    pub semantics: ExternalSemantics,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("registry file is not valid: {0}")]
    Json(String),
    #[error("external `{name}`: {reason}")]
    Invalid { name: String, reason: String },
    #[error("cannot read registry `{path}`: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalRegistry {
    specs: BTreeMap<String, ExternalSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    externals: Vec<ExternalSpec>,
}

impl Default for ExternalRegistry {
    fn default() -> Self {
        let mut r = ExternalRegistry::empty();
        let builtin = [
            (
                "Minus",
                &["left", "right", "out"][..],
                &["bbf", "bbb"][..],
                ExternalSemantics::Minus,
            ),
            (
                "-",
                &["left", "right", "out"],
                &["bbf", "bbb"],
                ExternalSemantics::Minus,
            ),
            (
                "+",
                &["left", "right", "out"],
                &["bbf", "bfb", "fbb", "bbb"],
                ExternalSemantics::Add,
            ),
            (">", &["left", "right"], &["bb"], ExternalSemantics::CmpGt),
            ("<", &["left", "right"], &["bb"], ExternalSemantics::CmpLt),
            (
                "Add",
                &["left", "right", "out"],
                &["bbf", "bfb", "fbb", "bbb"],
                ExternalSemantics::Add,
            ),
            (
                "*",
                &["$1", "$2", "out"],
                &["bbf", "bbb"],
                ExternalSemantics::Mul,
            ),
            (
                "Mul",
                &["left", "right", "out"],
                &["bbf", "bbb"],
                ExternalSemantics::Mul,
            ),
            (
                "Bigger",
                &["left", "right"],
                &["bb"],
                ExternalSemantics::CmpGt,
            ),
            (
                "Smaller",
                &["left", "right"],
                &["bb"],
                ExternalSemantics::CmpLt,
            ),
            ("Like", &["left", "right"], &["bb"], ExternalSemantics::Like),
        ];
        for (name, attrs, patterns, semantics) in builtin {
            r.insert(ExternalSpec {
                name: name.to_string(),
                attributes: attrs.iter().map(|s| s.to_string()).collect(),
                patterns: patterns.iter().map(|s| s.to_string()).collect(),
                semantics,
            })
            .expect("built-in registry is well-formed");
        }
        r
    }
}

impl ExternalRegistry {
    pub fn empty() -> ExternalRegistry {
        ExternalRegistry {
            specs: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, spec: ExternalSpec) -> Result<(), RegistryError> {
        let bad = |reason: &str| RegistryError::Invalid {
            name: spec.name.clone(),
            reason: reason.to_string(),
        };
        let arity = match spec.semantics {
            ExternalSemantics::CmpGt | ExternalSemantics::CmpLt | ExternalSemantics::Like => 2,
            _ => 3,
        };
        if spec.attributes.len() != arity {
            return Err(bad(&format!("semantics needs {arity} attributes")));
        }
        if spec.patterns.is_empty() {
            return Err(bad("no access patterns"));
        }
        for p in &spec.patterns {
            if p.len() != arity || !p.chars().all(|c| c == 'b' || c == 'f') {
                return Err(bad(&format!("bad access pattern `{p}`")));
            }
            if !semantics_supports(spec.semantics, p) {
                return Err(bad(&format!(
                    "access pattern `{p}` is not computable by this semantics"
                )));
            }
        }
        self.specs.insert(spec.name.clone(), spec);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ExternalSpec> {
        self.specs.get(name)
    }

    pub fn specs(&self) -> impl Iterator<Item = &ExternalSpec> {
        self.specs.values()
    }

    /// Parses `{"externals": [...]}` and adds its entries to the built-ins.
    pub fn from_json(text: &str) -> Result<ExternalRegistry, RegistryError> {
        let file: RegistryFile =
            serde_json::from_str(text).map_err(|e| RegistryError::Json(e.to_string()))?;
        let mut r = ExternalRegistry::default();
        for s in file.externals {
            r.insert(s)?;
        }
        Ok(r)
    }

    /// The built-in registry, extended by the file named in
    /// `ARC_EXTERNAL_REGISTRY` when set.
    pub fn from_env() -> Result<ExternalRegistry, RegistryError> {
        match std::env::var("ARC_EXTERNAL_REGISTRY") {
            Ok(path) if !path.is_empty() => {
                let text = std::fs::read_to_string(&path).map_err(|e| RegistryError::Io {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
                ExternalRegistry::from_json(&text)
            }
            _ => Ok(ExternalRegistry::default()),
        }
    }
}

fn semantics_supports(sem: ExternalSemantics, pattern: &str) -> bool {
    match sem {
        ExternalSemantics::Minus | ExternalSemantics::Add => {
            pattern.chars().filter(|c| *c == 'f').count() <= 1
        }
        ExternalSemantics::Mul => pattern == "bbf" || pattern == "bbb",
        ExternalSemantics::CmpGt | ExternalSemantics::CmpLt | ExternalSemantics::Like => {
            pattern == "bb"
        }
    }
}

/// Computes the tuples of an external relation consistent with `bound`
/// (one entry per attribute; `None` for free positions).
pub fn invoke(
    sem: ExternalSemantics,
    bound: &[Option<Value>],
    div_zero_is_error: bool,
) -> Result<Vec<Vec<Value>>, ValueError> {
    let get = |i: usize| bound[i].clone();
    let row = |vals: Vec<Value>| Ok(vec![vals]);
    match sem {
        ExternalSemantics::Minus | ExternalSemantics::Add | ExternalSemantics::Mul => {
            let (fwd, inv) = match sem {
                ExternalSemantics::Minus => (ArithOp::Sub, ArithOp::Add),
                ExternalSemantics::Add => (ArithOp::Add, ArithOp::Sub),
                _ => (ArithOp::Mul, ArithOp::Div),
            };
            match (get(0), get(1), get(2)) {
                (Some(l), Some(r), out) => {
                    let v = l.arith(fwd, &r, div_zero_is_error)?;
                    match out {
                        None => row(vec![l, r, v]),
                        Some(o) if v.compare(CmpOp::Eq, &o)? => row(vec![l, r, o]),
                        Some(_) => Ok(Vec::new()),
                    }
                }
                (Some(l), None, Some(o)) => {
                    // out = l op r  =>  r = out inv l   (Minus: r = l - out)
                    let r = match sem {
                        ExternalSemantics::Minus => l.arith(ArithOp::Sub, &o, div_zero_is_error)?,
                        _ => o.arith(inv, &l, div_zero_is_error)?,
                    };
                    row(vec![l, r, o])
                }
                (None, Some(r), Some(o)) => {
                    let l = o.arith(inv, &r, div_zero_is_error)?;
                    row(vec![l, r, o])
                }
                _ => Ok(Vec::new()),
            }
        }
        ExternalSemantics::CmpGt | ExternalSemantics::CmpLt => {
            let (Some(l), Some(r)) = (get(0), get(1)) else {
                return Ok(Vec::new());
            };
            let op = if sem == ExternalSemantics::CmpGt {
                CmpOp::Gt
            } else {
                CmpOp::Lt
            };
            if l.compare(op, &r)? {
                row(vec![l, r])
            } else {
                Ok(Vec::new())
            }
        }
        ExternalSemantics::Like => {
            let (Some(l), Some(r)) = (get(0), get(1)) else {
                return Ok(Vec::new());
            };
            match (&l, &r) {
                (Value::Text(s), Value::Text(p)) if like_matches(s, p) => {
                    row(vec![l.clone(), r.clone()])
                }
                (Value::Text(_), Value::Text(_)) | (Value::Null, _) | (_, Value::Null) => {
                    Ok(Vec::new())
                }
                _ => Err(ValueError::Type {
                    op: "like".into(),
                    left: l.describe(),
                    right: r.describe(),
                }),
            }
        }
    }
}

/// SQL `LIKE` with `%` and `_` wildcards.
pub fn like_matches(s: &str, pattern: &str) -> bool {
    let mut re = String::from("^");
    for c in pattern.chars() {
        match c {
            '%' => re.push_str(".*"),
            '_' => re.push('.'),
            c => re.push_str(&regex::escape(&c.to_string())),
        }
    }
    re.push('$');
    regex::Regex::new(&re)
        .map(|r| r.is_match(s))
        .unwrap_or(false)
}
