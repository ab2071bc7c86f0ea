//! Relational patterns: canonical forms, pattern equality and the
//! aggregation-pattern classifier.

mod canon;
mod classify;

#[cfg(test)]
mod tests;

pub use canon::{
    canonicalize, canonicalize_program, first_difference, pattern_equal, CanonicalForm, Difference,
};
pub use classify::{classify_aggregation, AggregationPattern};
