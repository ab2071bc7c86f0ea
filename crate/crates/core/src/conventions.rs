//! Environment-level semantic switches.

use std::fmt;
use std::str::FromStr;

use crate::alt::AggFn;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollectionSemantics {
    Set,
    Bag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmptyAggregate {
    Null,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivisionByZero {
    Null,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Conventions {
    pub semantics: CollectionSemantics,
    pub empty_aggregate: EmptyAggregate,
    pub fixpoint_cap: u32,
    pub division_by_zero: DivisionByZero,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConventionError {
    #[error("E_NO_NEUTRAL: {0} over no values has no neutral element under the zero convention")]
    NoNeutral(&'static str),
    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },
    #[error("fixpoint iteration cap must be at least 1")]
    ZeroCap,
}

impl Conventions {
    /// SQL: bags, NULL for aggregates over nothing, NULL on division by zero.
    pub fn sql() -> Conventions {
        Conventions {
            semantics: CollectionSemantics::Bag,
            empty_aggregate: EmptyAggregate::Null,
            fixpoint_cap: 10_000,
            division_by_zero: DivisionByZero::Null,
        }
    }

    /// Datalog in the style of Soufflé: sets, zero for empty sums, errors on
    /// division by zero.
    pub fn souffle() -> Conventions {
        Conventions {
            semantics: CollectionSemantics::Set,
            empty_aggregate: EmptyAggregate::Zero,
            fixpoint_cap: 10_000,
            division_by_zero: DivisionByZero::Error,
        }
    }

    pub fn with_semantics(mut self, s: CollectionSemantics) -> Conventions {
        self.semantics = s;
        self
    }

    pub fn with_empty_aggregate(mut self, e: EmptyAggregate) -> Conventions {
        self.empty_aggregate = e;
        self
    }

    pub fn with_fixpoint_cap(mut self, cap: u32) -> Result<Conventions, ConventionError> {
        if cap == 0 {
            return Err(ConventionError::ZeroCap);
        }
        self.fixpoint_cap = cap;
        Ok(self)
    }

    pub fn is_set(&self) -> bool {
        self.semantics == CollectionSemantics::Set
    }

    pub fn div_zero_is_error(&self) -> bool {
        self.division_by_zero == DivisionByZero::Error
    }
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions::sql()
    }
}

/// Value of an aggregate over no (non-null) inputs.
pub fn empty_aggregate_value(func: AggFn, conv: &Conventions) -> Result<Value, ConventionError> {
    match (func, conv.empty_aggregate) {
        (AggFn::Count | AggFn::CountDistinct, _) => Ok(Value::int(0)),
        (_, EmptyAggregate::Null) => Ok(Value::Null),
        (AggFn::Sum, EmptyAggregate::Zero) => Ok(Value::int(0)),
        (f, EmptyAggregate::Zero) => Err(ConventionError::NoNeutral(f.name())),
    }
}

impl FromStr for CollectionSemantics {
    type Err = ConventionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "set" => Ok(CollectionSemantics::Set),
            "bag" => Ok(CollectionSemantics::Bag),
            _ => Err(ConventionError::Unknown {
                what: "semantics",
                value: s.to_string(),
            }),
        }
    }
}

impl FromStr for EmptyAggregate {
    type Err = ConventionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "null" => Ok(EmptyAggregate::Null),
            "zero" => Ok(EmptyAggregate::Zero),
            _ => Err(ConventionError::Unknown {
                what: "empty-aggregate convention",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for CollectionSemantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CollectionSemantics::Set => "set",
            CollectionSemantics::Bag => "bag",
        })
    }
}

impl fmt::Display for EmptyAggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmptyAggregate::Null => "null",
            EmptyAggregate::Zero => "zero",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let s = Conventions::sql();
        assert_eq!(s.semantics, CollectionSemantics::Bag);
        assert_eq!(s.empty_aggregate, EmptyAggregate::Null);
        assert_eq!(s.fixpoint_cap, 10_000);
        assert_eq!(s.division_by_zero, DivisionByZero::Null);
        let d = Conventions::souffle();
        assert_eq!(d.semantics, CollectionSemantics::Set);
        assert_eq!(d.empty_aggregate, EmptyAggregate::Zero);
        assert_eq!(d.division_by_zero, DivisionByZero::Error);
    }

    #[test]
    fn empty_values() {
        let (sql, dl) = (Conventions::sql(), Conventions::souffle());
        for f in AggFn::ALL {
            if matches!(f, AggFn::Count | AggFn::CountDistinct) {
                assert_eq!(empty_aggregate_value(f, &sql).unwrap(), Value::int(0));
                assert_eq!(empty_aggregate_value(f, &dl).unwrap(), Value::int(0));
            }
        }
        assert_eq!(
            empty_aggregate_value(AggFn::Sum, &sql).unwrap(),
            Value::Null
        );
        assert_eq!(
            empty_aggregate_value(AggFn::Sum, &dl).unwrap(),
            Value::int(0)
        );
        assert_eq!(
            empty_aggregate_value(AggFn::Avg, &sql).unwrap(),
            Value::Null
        );
        assert_eq!(
            empty_aggregate_value(AggFn::Max, &dl).unwrap_err(),
            ConventionError::NoNeutral("max")
        );
    }

    #[test]
    fn zero_cap_rejected() {
        assert!(Conventions::sql().with_fixpoint_cap(0).is_err());
    }
}
