//! Abstract Relational Calculus toolkit.
//!
//! Parse comprehension syntax or a SQL subset into the ALT, bind and check it,
//! evaluate it under switchable conventions, render the higraph modality as
//! DOT, and compare queries by relational pattern.

pub mod alt;
pub mod alt_json;
pub mod binder;
pub mod conventions;
pub mod corpus;
pub mod eval;
pub mod expand;
pub mod lex;
pub mod pattern;
pub mod render;
pub mod run;
pub mod sql;
pub mod syntax;
pub mod value;

pub use alt::*;
pub use alt_json::{deserialize_alt, serialize_alt, SchemaError};
pub use binder::{analyze, bind, Diagnostic, ExternalRegistry, LinkedProgram, Severity};
pub use conventions::{empty_aggregate_value, CollectionSemantics, Conventions, EmptyAggregate};
pub use eval::{
    eval_aggregate, eval_fixpoint, eval_query, eval_sentence, Database, EvalError, Relation,
};
pub use expand::{expand_abstract, ExpandError};
pub use pattern::{
    canonicalize, classify_aggregation, first_difference, pattern_equal, AggregationPattern,
    CanonicalForm, Difference,
};
pub use render::{to_dot, to_higraph, HigraphDoc, RenderOptions};
pub use run::{evaluate_program, Answer, RunError};
pub use sql::{parse_sql, sql_roundtrip_eval, translate_sql, SqlError, SqlTranslator};
pub use syntax::{parse_arc, print_arc, ParseError};
pub use value::{ArithOp, CmpOp, Value, ValueError};
