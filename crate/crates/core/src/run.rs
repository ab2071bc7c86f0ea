//! End-to-end evaluation of a program: abstract relations are inlined, the
//! result is analyzed and then evaluated as a query or a sentence.

use std::fmt;

use crate::alt::Program;
use crate::binder::{analyze, Diagnostic, ExternalRegistry};
use crate::conventions::Conventions;
use crate::eval::{eval_query, eval_sentence, Database, EvalError, Relation};
use crate::expand::{expand_abstract, ExpandError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Rows(Relation),
    Truth(bool),
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Rows(r) => f.write_str(&r.to_table()),
            Answer::Truth(b) => writeln!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Expand(#[from] ExpandError),
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Bind(Vec<Diagnostic>),
    #[error("{0}")]
    Eval(#[from] EvalError),
}

impl RunError {
    pub fn code(&self) -> &'static str {
        match self {
            RunError::Expand(_) => "E_ABSTRACT_UNEXPANDED",
            RunError::Bind(ds) => ds
                .iter()
                .find(|d| d.is_error())
                .map_or("E_BIND", |d| d.code),
            RunError::Eval(e) => e.code(),
        }
    }
}

pub fn evaluate_program(
    p: &Program,
    registry: &ExternalRegistry,
    db: &Database,
    conv: &Conventions,
) -> Result<Answer, RunError> {
    let expanded = expand_abstract(p)?;
    let lp = analyze(&expanded, registry).map_err(RunError::Bind)?;
    if expanded.main.is_sentence() {
        Ok(Answer::Truth(eval_sentence(&lp, db, conv)?))
    } else {
        Ok(Answer::Rows(eval_query(&lp, db, conv)?))
    }
}
