//! A SQL subset and its pattern-preserving translation into ARC.

mod parse;
mod translate;

#[cfg(test)]
mod tests;

pub use parse::parse_sql;
pub use translate::{translate_sql, SqlTranslator, Translation};

use crate::alt::{AggFn, SourceSpan};
use crate::binder::{analyze, Diagnostic, ExternalRegistry};
use crate::conventions::Conventions;
use crate::eval::{eval_query, eval_sentence, Database, EvalError, Relation};
use crate::syntax::ParseError;
use crate::value::{ArithOp, CmpOp, Value};

/// One `SELECT` statement.
#[derive(Debug, Clone, PartialEq)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub into: Option<String>,
    pub from: Vec<FromItem>,
    pub where_clause: Option<SqlExpr>,
    pub group_by: Vec<SqlExpr>,
    pub having: Option<SqlExpr>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Star(SourceSpan),
    Expr {
        expr: SqlExpr,
        alias: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinKind {
    Inner,
    Left,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FromItem {
    Table {
        name: String,
        alias: Option<String>,
        span: SourceSpan,
    },
    Subquery {
        query: Box<Select>,
        alias: String,
        lateral: bool,
        span: SourceSpan,
    },
    Join {
        kind: JoinKind,
        left: Box<FromItem>,
        right: Box<FromItem>,
        on: SqlExpr,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SqlExpr {
    Column {
        qualifier: Option<String>,
        name: String,
        span: SourceSpan,
    },
    Lit(Value, SourceSpan),
    Arith {
        op: ArithOp,
        left: Box<SqlExpr>,
        right: Box<SqlExpr>,
    },
    /// `arg` is `None` for `count(*)`.
    Agg {
        func: AggFn,
        arg: Option<Box<SqlExpr>>,
        span: SourceSpan,
    },
    Cmp {
        op: CmpOp,
        left: Box<SqlExpr>,
        right: Box<SqlExpr>,
    },
    And(Vec<SqlExpr>),
    Or(Vec<SqlExpr>),
    Not(Box<SqlExpr>),
    IsNull {
        expr: Box<SqlExpr>,
        negated: bool,
    },
    In {
        expr: Box<SqlExpr>,
        query: Box<Select>,
        negated: bool,
    },
    Exists(Box<Select>),
    Subquery(Box<Select>),
}

impl SqlExpr {
    pub fn span(&self) -> SourceSpan {
        match self {
            SqlExpr::Column { span, .. } | SqlExpr::Lit(_, span) | SqlExpr::Agg { span, .. } => {
                *span
            }
            SqlExpr::Arith { left, right, .. } | SqlExpr::Cmp { left, right, .. } => {
                left.span().to(right.span())
            }
            SqlExpr::And(xs) | SqlExpr::Or(xs) => match (xs.first(), xs.last()) {
                (Some(a), Some(b)) => a.span().to(b.span()),
                _ => SourceSpan::default(),
            },
            SqlExpr::Not(e) | SqlExpr::IsNull { expr: e, .. } | SqlExpr::In { expr: e, .. } => {
                e.span()
            }
            SqlExpr::Exists(q) | SqlExpr::Subquery(q) => q.span,
        }
    }

    pub fn contains_aggregate(&self) -> bool {
        match self {
            SqlExpr::Agg { .. } => true,
            SqlExpr::Column { .. }
            | SqlExpr::Lit(..)
            | SqlExpr::Exists(_)
            | SqlExpr::Subquery(_) => false,
            SqlExpr::Arith { left, right, .. } | SqlExpr::Cmp { left, right, .. } => {
                left.contains_aggregate() || right.contains_aggregate()
            }
            SqlExpr::And(xs) | SqlExpr::Or(xs) => xs.iter().any(|x| x.contains_aggregate()),
            SqlExpr::Not(e) | SqlExpr::IsNull { expr: e, .. } | SqlExpr::In { expr: e, .. } => {
                e.contains_aggregate()
            }
        }
    }
}

impl FromItem {
    pub fn has_outer_join(&self) -> bool {
        match self {
            FromItem::Join {
                kind, left, right, ..
            } => *kind != JoinKind::Inner || left.has_outer_join() || right.has_outer_join(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SqlError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{span}: E_UNSUPPORTED_SQL: {construct} is not supported")]
    Unsupported { construct: String, span: SourceSpan },
    #[error("{span}: {message}")]
    Invalid { message: String, span: SourceSpan },
    #[error("translated program does not bind: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Bind(Vec<Diagnostic>),
    #[error("{0}")]
    Eval(#[from] EvalError),
}

impl SqlError {
    pub fn code(&self) -> &'static str {
        match self {
            SqlError::Parse(_) => "E_PARSE",
            SqlError::Unsupported { .. } => "E_UNSUPPORTED_SQL",
            SqlError::Invalid { .. } => "E_SQL_INVALID",
            SqlError::Bind(_) => "E_BIND",
            SqlError::Eval(e) => e.code(),
        }
    }

    pub(crate) fn unsupported(construct: impl Into<String>, span: SourceSpan) -> SqlError {
        SqlError::Unsupported {
            construct: construct.into(),
            span,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>, span: SourceSpan) -> SqlError {
        SqlError::Invalid {
            message: message.into(),
            span,
        }
    }
}

/// Parses, translates (with `db` as the schema catalog), binds and evaluates
/// a SQL statement. A Boolean statement yields a one-row relation `Q(exists)`.
pub fn sql_roundtrip_eval(
    text: &str,
    db: &Database,
    conv: &Conventions,
) -> Result<Relation, SqlError> {
    let ast = parse_sql(text)?;
    let registry = ExternalRegistry::default();
    let t = SqlTranslator::new(&registry)
        .with_schemas(db)
        .translate(&ast)?;
    let lp = analyze(&t.program, &registry).map_err(SqlError::Bind)?;
    if t.program.main.is_sentence() {
        let b = eval_sentence(&lp, db, conv)?;
        return Ok(Relation::new("Q", &["exists"], vec![vec![Value::Bool(b)]]));
    }
    Ok(eval_query(&lp, db, conv)?)
}
