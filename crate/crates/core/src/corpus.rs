//! Golden fixtures.
//!
//! Each fixture is a directory holding `fixture.toml`, `query.arc` and
//! optionally `query.sql`, `db.json`, `expected.json` and `expected.dot`.
//! `manifest.toml` at the corpus root lists the topics the corpus must cover.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::alt::Program;
use crate::alt_json::{deserialize_alt, serialize_alt};
use crate::binder::{analyze, ExternalRegistry, LinkedProgram};
use crate::conventions::{CollectionSemantics, Conventions, EmptyAggregate};
use crate::eval::{Database, Relation};
use crate::pattern::{canonicalize, classify_aggregation, first_difference};
use crate::render::{to_dot, to_higraph, RenderOptions};
use crate::run::{evaluate_program, Answer};
use crate::sql::{parse_sql, sql_roundtrip_eval, SqlTranslator};
use crate::syntax::{parse_arc, print_arc};
use crate::value::Value;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("E_FIXTURE_MALFORMED: {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::Malformed { .. } => "E_FIXTURE_MALFORMED",
            CorpusError::Io { .. } => "E_IO",
        }
    }
}

/// How an expected output was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// Stated outright in the published example.
    Published,
    /// Computed by hand from the evaluation rules.
    HandDerived,
    /// Follows from the definitions with no computation.
    Elementary,
    /// Fixed on the first reviewed render.
    Golden,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureMeta {
    pub description: String,
    pub basis: Basis,
    #[serde(default)]
    pub covers: Vec<String>,
    #[serde(default = "default_conventions")]
    pub conventions: String,
    pub semantics: Option<String>,
    pub agg_empty: Option<String>,
    /// Whether the SQL translation must share the calculus text's pattern.
    #[serde(default = "yes")]
    pub sql_pattern: bool,
    /// Error codes the analysis must report.
    #[serde(default)]
    pub diagnostics: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub classify: Vec<String>,
    #[serde(default)]
    pub pattern_equal: Vec<String>,
    #[serde(default)]
    pub pattern_differs: Vec<String>,
    /// Abstract relations collapsed in the rendered diagram.
    #[serde(default)]
    pub collapse: Vec<String>,
}

fn default_conventions() -> String {
    "sql".to_string()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    Rows(Relation),
    Truth(bool),
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub id: String,
    pub dir: PathBuf,
    pub meta: FixtureMeta,
    pub arc: String,
    pub sql: Option<String>,
    pub db: Option<Database>,
    pub expected: Option<Expected>,
    pub dot: Option<String>,
}

impl Fixture {
    pub fn conventions(&self) -> Result<Conventions, CorpusError> {
        let bad = |m: String| CorpusError::Malformed {
            path: self.dir.join("fixture.toml"),
            message: m,
        };
        let mut c = match self.meta.conventions.as_str() {
            "sql" => Conventions::sql(),
            "souffle" => Conventions::souffle(),
            other => return Err(bad(format!("unknown conventions `{other}`"))),
        };
        if let Some(s) = &self.meta.semantics {
            c = c.with_semantics(
                s.parse::<CollectionSemantics>()
                    .map_err(|e| bad(e.to_string()))?,
            );
        }
        if let Some(s) = &self.meta.agg_empty {
            c = c.with_empty_aggregate(
                s.parse::<EmptyAggregate>()
                    .map_err(|e| bad(e.to_string()))?,
            );
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureResult {
    pub id: String,
    pub failures: Vec<String>,
}

impl FixtureResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct CorpusReport {
    pub results: Vec<FixtureResult>,
}

impl CorpusReport {
    pub fn passed(&self) -> usize {
        self.results.iter().filter(|r| r.passed()).count()
    }

    pub fn failed(&self) -> usize {
        self.results.len() - self.passed()
    }

    pub fn all_passed(&self) -> bool {
        self.failed() == 0
    }
}

impl fmt::Display for CorpusReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            if r.passed() {
                writeln!(f, "PASS {}", r.id)?;
            } else {
                writeln!(f, "FAIL {}", r.id)?;
                for m in &r.failures {
                    for line in m.lines() {
                        writeln!(f, "     {line}")?;
                    }
                }
            }
        }
        writeln!(f, "{} passed, {} failed", self.passed(), self.failed())
    }
}

/// The corpus shipped with this crate.
pub fn default_corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_opt(path: &Path) -> Result<Option<String>, CorpusError> {
    if path.exists() {
        read(path).map(Some)
    } else {
        Ok(None)
    }
}

fn malformed(path: &Path, message: impl Into<String>) -> CorpusError {
    CorpusError::Malformed {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    topics: BTreeMap<String, String>,
}

/// Topics the corpus must cover, with their descriptions.
pub fn load_manifest(root: &Path) -> Result<BTreeMap<String, String>, CorpusError> {
    let path = root.join("manifest.toml");
    let m: Manifest = toml::from_str(&read(&path)?).map_err(|e| malformed(&path, e.to_string()))?;
    Ok(m.topics)
}

pub fn load_fixture(dir: &Path) -> Result<Fixture, CorpusError> {
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| malformed(dir, "fixture directory has no name"))?
        .to_string();
    let meta_path = dir.join("fixture.toml");
    let meta: FixtureMeta =
        toml::from_str(&read(&meta_path)?).map_err(|e| malformed(&meta_path, e.to_string()))?;
    if meta.description.trim().is_empty() {
        return Err(malformed(&meta_path, "description is empty"));
    }
    let db = match read_opt(&dir.join("db.json"))? {
        Some(t) => Some(
            Database::from_json(&t).map_err(|e| malformed(&dir.join("db.json"), e.to_string()))?,
        ),
        None => None,
    };
    let expected = match read_opt(&dir.join("expected.json"))? {
        Some(t) => Some(parse_expected(&t).map_err(|m| malformed(&dir.join("expected.json"), m))?),
        None => None,
    };
    if expected.is_some() && db.is_none() {
        return Err(malformed(dir, "expected.json needs a db.json"));
    }
    Ok(Fixture {
        id,
        dir: dir.to_path_buf(),
        arc: read(&dir.join("query.arc"))?,
        sql: read_opt(&dir.join("query.sql"))?,
        dot: read_opt(&dir.join("expected.dot"))?,
        meta,
        db,
        expected,
    })
}

/// `{"schema": [...], "rows": [...]}` or `{"truth": bool}`.
fn parse_expected(text: &str) -> Result<Expected, String> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if let Some(b) = v.get("truth") {
        return b
            .as_bool()
            .map(Expected::Truth)
            .ok_or_else(|| "`truth` must be a Boolean".to_string());
    }
    let wrapped = serde_json::json!({ "relations": { "Q": v } });
    let db = Database::from_json(&wrapped.to_string()).map_err(|e| e.to_string())?;
    Ok(Expected::Rows(
        db.get("Q").expect("wrapped relation").clone().sorted(),
    ))
}

/// Fixtures whose id matches the glob `filter`; an empty filter matches all.
pub fn load_corpus(root: &Path, filter: &str) -> Result<Vec<Fixture>, CorpusError> {
    let pattern = glob::Pattern::new(if filter.is_empty() { "*" } else { filter })
        .map_err(|e| malformed(root, format!("bad filter: {e}")))?;
    let entries = fs::read_dir(root).map_err(|source| CorpusError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| pattern.matches(n))
        })
        .collect();
    dirs.sort();
    dirs.iter().map(|d| load_fixture(d)).collect()
}

/// Runs every fixture matching `filter` in id order.
pub fn run_corpus(root: &Path, filter: &str) -> Result<CorpusReport, CorpusError> {
    let fixtures = load_corpus(root, filter)?;
    let topics = load_manifest(root)?;
    let mut all: BTreeMap<String, Fixture> = BTreeMap::new();
    for f in load_corpus(root, "")? {
        all.insert(f.id.clone(), f);
    }
    let mut report = CorpusReport::default();
    for f in &fixtures {
        for t in &f.meta.covers {
            if !topics.contains_key(t) {
                return Err(malformed(
                    &f.dir.join("fixture.toml"),
                    format!("unknown topic `{t}`"),
                ));
            }
        }
        let failures = check_fixture(f, &all)?;
        report.results.push(FixtureResult {
            id: f.id.clone(),
            failures,
        });
    }
    Ok(report)
}

/// Manifest topics that no fixture covers.
pub fn uncovered_topics(root: &Path) -> Result<Vec<String>, CorpusError> {
    let topics = load_manifest(root)?;
    let covered: BTreeSet<String> = load_corpus(root, "")?
        .into_iter()
        .flat_map(|f| f.meta.covers)
        .collect();
    Ok(topics
        .into_keys()
        .filter(|t| !covered.contains(t))
        .collect())
}

fn bound(p: &Program) -> Result<LinkedProgram, String> {
    analyze(p, &ExternalRegistry::default()).map_err(|ds| {
        ds.iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    })
}

fn check_fixture(f: &Fixture, all: &BTreeMap<String, Fixture>) -> Result<Vec<String>, CorpusError> {
    let mut fails = Vec::new();
    let conv = f.conventions()?;
    let program = match parse_arc(&f.arc) {
        Ok(p) => p,
        Err(e) => return Ok(vec![format!("query.arc does not parse: {e}")]),
    };
    let printed = print_arc(&program);
    match parse_arc(&printed) {
        Ok(again) if again == program && print_arc(&again) == printed => {}
        Ok(_) => fails.push("printing and reparsing changes the program".to_string()),
        Err(e) => fails.push(format!("printed form does not parse: {e}")),
    }
    match deserialize_alt(&serialize_alt(&program)) {
        Ok(back) if back == program => {}
        Ok(_) => fails.push("JSON round trip changes the program".to_string()),
        Err(e) => fails.push(format!("JSON round trip fails: {e}")),
    }

    let registry = ExternalRegistry::default();
    let analysis = analyze(&program, &registry);
    if !f.meta.diagnostics.is_empty() {
        let codes: BTreeSet<&str> = match &analysis {
            Ok(_) => BTreeSet::new(),
            Err(ds) => ds.iter().filter(|d| d.is_error()).map(|d| d.code).collect(),
        };
        for want in &f.meta.diagnostics {
            if !codes.contains(want.as_str()) {
                fails.push(format!("expected diagnostic {want}, got {codes:?}"));
            }
        }
        return Ok(fails);
    }
    let lp = match analysis {
        Ok(lp) => lp,
        Err(ds) => {
            fails.push(format!(
                "analysis fails: {}",
                ds.iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join("; ")
            ));
            return Ok(fails);
        }
    };
    let warned: BTreeSet<&str> = lp.warnings.iter().map(|d| d.code).collect();
    for w in &f.meta.warnings {
        if !warned.contains(w.as_str()) {
            fails.push(format!("expected warning {w}, got {warned:?}"));
        }
    }

    if let (Some(db), Some(expected)) = (&f.db, &f.expected) {
        match evaluate_program(&program, &registry, db, &conv) {
            Ok(answer) => {
                if let Some(m) = compare(&answer, expected, true) {
                    fails.push(format!("calculus result: {m}"));
                }
            }
            Err(e) => fails.push(format!("evaluation fails: {e}")),
        }
    }

    if let Some(sql) = &f.sql {
        check_sql(f, sql, &lp, &conv, &mut fails);
    }

    if !f.meta.classify.is_empty() {
        let got: Vec<String> = classify_aggregation(&lp)
            .iter()
            .map(|(_, p)| p.to_string())
            .collect();
        if got != f.meta.classify {
            fails.push(format!(
                "classification: expected {:?}, got {got:?}",
                f.meta.classify
            ));
        }
    }

    let canon = canonicalize(&lp);
    for (other, want_equal) in f
        .meta
        .pattern_equal
        .iter()
        .map(|o| (o, true))
        .chain(f.meta.pattern_differs.iter().map(|o| (o, false)))
    {
        let Some(of) = all.get(other) else {
            return Err(malformed(
                &f.dir.join("fixture.toml"),
                format!("unknown fixture `{other}`"),
            ));
        };
        let olp = match parse_arc(&of.arc)
            .map_err(|e| e.to_string())
            .and_then(|p| bound(&p))
        {
            Ok(l) => l,
            Err(e) => {
                fails.push(format!("{other} does not bind: {e}"));
                continue;
            }
        };
        let oc = canonicalize(&olp);
        if (canon == oc) != want_equal {
            let rel = if want_equal { "equal" } else { "differ from" };
            let detail = first_difference(&canon, &oc)
                .map(|d| format!("\n{d}"))
                .unwrap_or_default();
            fails.push(format!("pattern should {rel} {other}{detail}"));
        }
    }

    if let Some(golden) = &f.dot {
        let opts = RenderOptions {
            collapse: f.meta.collapse.iter().cloned().collect(),
        };
        let dot = to_dot(&to_higraph(&lp, &opts));
        if &dot != golden {
            fails.push("rendered DOT differs from expected.dot".to_string());
        }
    }
    Ok(fails)
}

fn check_sql(
    f: &Fixture,
    sql: &str,
    lp: &LinkedProgram,
    conv: &Conventions,
    fails: &mut Vec<String>,
) {
    let ast = match parse_sql(sql) {
        Ok(a) => a,
        Err(e) => {
            fails.push(format!("query.sql does not parse: {e}"));
            return;
        }
    };
    let registry = ExternalRegistry::default();
    let mut tr = SqlTranslator::new(&registry);
    if let Some(db) = &f.db {
        tr = tr.with_schemas(db);
    }
    let t = match tr.translate(&ast) {
        Ok(t) => t,
        Err(e) => {
            fails.push(format!("SQL translation fails: {e}"));
            return;
        }
    };
    let slp = match bound(&t.program) {
        Ok(l) => l,
        Err(e) => {
            fails.push(format!("SQL translation does not bind: {e}"));
            return;
        }
    };
    if f.meta.sql_pattern {
        let (a, b) = (canonicalize(&slp), canonicalize(lp));
        if let Some(d) = first_difference(&a, &b) {
            fails.push(format!("SQL translation has a different pattern\n{d}"));
        }
    }
    if let (Some(db), Some(expected)) = (&f.db, &f.expected) {
        match sql_roundtrip_eval(sql, db, conv) {
            Ok(rel) => {
                let answer = match expected {
                    Expected::Truth(_) => Answer::Truth(
                        rel.rows.first().and_then(|r| r.first()) == Some(&Value::Bool(true)),
                    ),
                    Expected::Rows(_) => Answer::Rows(rel),
                };
                if let Some(m) = compare(&answer, expected, false) {
                    fails.push(format!("SQL result: {m}"));
                }
            }
            Err(e) => fails.push(format!("SQL evaluation fails: {e}")),
        }
    }
}

/// Compares an answer with the expectation; rows are compared as multisets.
fn compare(answer: &Answer, expected: &Expected, check_schema: bool) -> Option<String> {
    match (answer, expected) {
        (Answer::Truth(a), Expected::Truth(e)) => {
            (a != e).then(|| format!("expected {e}, got {a}"))
        }
        (Answer::Rows(r), Expected::Rows(e)) => {
            let got = r.clone().sorted();
            if check_schema && got.schema != e.schema {
                return Some(format!(
                    "expected schema {:?}, got {:?}",
                    e.schema, got.schema
                ));
            }
            (got.rows != e.rows)
                .then(|| format!("expected\n{}got\n{}", e.to_table(), got.to_table()))
        }
        (Answer::Truth(_), Expected::Rows(_)) => {
            Some("expected rows, got a truth value".to_string())
        }
        (Answer::Rows(_), Expected::Truth(_)) => {
            Some("expected a truth value, got rows".to_string())
        }
    }
}
