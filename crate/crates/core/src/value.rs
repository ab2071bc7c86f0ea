//! Scalar values carried by tuples and constants.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use bigdecimal::BigDecimal;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};

/// A dynamically tagged scalar.
///
/// `Eq`, `Hash` and `Ord` are structural: they are used for grouping,
/// deduplication and deterministic output order. Query-level comparison goes
/// through [`Value::compare`], which treats null as incomparable.
#[derive(Debug, Clone)]
pub enum Value {
    Int(BigInt),
    Dec(BigDecimal),
    Text(String),
    Bool(bool),
    Null,
}

/// Arithmetic operators available in terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }

    pub fn from_symbol(s: &str) -> Option<ArithOp> {
        Some(match s {
            "+" => ArithOp::Add,
            "-" => ArithOp::Sub,
            "*" => ArithOp::Mul,
            "/" => ArithOp::Div,
            _ => return None,
        })
    }
}

/// Comparison operators available in predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        Some(match s {
            "=" => CmpOp::Eq,
            "<>" | "!=" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            _ => return None,
        })
    }

    /// The operator obtained by swapping the operands.
    pub fn flipped(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }

    /// The complementary operator on two-valued, non-null operands.
    pub fn negated(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

/// Errors raised by value-level operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValueError {
    #[error("E_TYPE: cannot apply `{op}` to {left} and {right}")]
    Type {
        op: String,
        left: String,
        right: String,
    },
    #[error("E_DIV_ZERO: division by zero")]
    DivZero,
}

impl Value {
    pub fn int(i: i64) -> Value {
        Value::Int(BigInt::from(i))
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    /// Builds a decimal value in normalized form.
    pub fn dec(d: BigDecimal) -> Value {
        Value::Dec(d.normalized())
    }

    /// Parses a decimal literal such as `1.5`.
    pub fn parse_dec(s: &str) -> Option<Value> {
        BigDecimal::from_str(s).ok().map(Value::dec)
    }

    pub fn parse_int(s: &str) -> Option<Value> {
        BigInt::from_str(s).ok().map(Value::Int)
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Dec(_) => "dec",
            Value::Text(_) => "text",
            Value::Bool(_) => "bool",
            Value::Null => "null",
        }
    }

    fn as_decimal(&self) -> Option<BigDecimal> {
        match self {
            Value::Int(i) => Some(BigDecimal::from(i.clone())),
            Value::Dec(d) => Some(d.clone()),
            _ => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Dec(_))
    }

    fn type_error(op: &str, l: &Value, r: &Value) -> ValueError {
        ValueError::Type {
            op: op.to_string(),
            left: l.describe(),
            right: r.describe(),
        }
    }

    /// Short description used in error messages.
    pub fn describe(&self) -> String {
        format!("{} {}", self.tag(), self)
    }

    /// Query-level ordering: `None` when either side is null, `Err` when the
    /// tags are incomparable.
    pub fn partial_order(&self, other: &Value, op: &str) -> Result<Option<Ordering>, ValueError> {
        match (self, other) {
            (Value::Null, _) | (_, Value::Null) => Ok(None),
            (Value::Int(a), Value::Int(b)) => Ok(Some(a.cmp(b))),
            (Value::Text(a), Value::Text(b)) => Ok(Some(a.cmp(b))),
            (Value::Bool(a), Value::Bool(b)) => Ok(Some(a.cmp(b))),
            (a, b) if a.is_numeric() && b.is_numeric() => {
                Ok(Some(a.as_decimal().unwrap().cmp(&b.as_decimal().unwrap())))
            }
            (a, b) => Err(Value::type_error(op, a, b)),
        }
    }

    /// Two-valued comparison: any null operand makes the comparison false.
    /// Equality between different non-null, non-numeric tags is false; ordering
    /// between them is a type error.
    pub fn compare(&self, op: CmpOp, other: &Value) -> Result<bool, ValueError> {
        if self.is_null() || other.is_null() {
            return Ok(false);
        }
        let comparable = self.tag() == other.tag() || (self.is_numeric() && other.is_numeric());
        if !comparable {
            return match op {
                CmpOp::Eq => Ok(false),
                CmpOp::Ne => Ok(true),
                _ => Err(Value::type_error(op.symbol(), self, other)),
            };
        }
        let ord = self.partial_order(other, op.symbol())?;
        Ok(ord.map(|o| op.holds(o)).unwrap_or(false))
    }

    /// Arithmetic with int→dec widening. Null operands propagate null.
    /// Integer division yields an exact decimal. Division by zero yields
    /// null or an error depending on `div_zero_is_error`.
    pub fn arith(
        &self,
        op: ArithOp,
        other: &Value,
        div_zero_is_error: bool,
    ) -> Result<Value, ValueError> {
        if self.is_null() || other.is_null() {
            if self.is_numeric() || other.is_numeric() || (self.is_null() && other.is_null()) {
                return Ok(Value::Null);
            }
            return Err(Value::type_error(op.symbol(), self, other));
        }
        if !self.is_numeric() || !other.is_numeric() {
            return Err(Value::type_error(op.symbol(), self, other));
        }
        if let (Value::Int(a), Value::Int(b)) = (self, other) {
            match op {
                ArithOp::Add => return Ok(Value::Int(a + b)),
                ArithOp::Sub => return Ok(Value::Int(a - b)),
                ArithOp::Mul => return Ok(Value::Int(a * b)),
                ArithOp::Div => {}
            }
        }
        let a = self.as_decimal().unwrap();
        let b = other.as_decimal().unwrap();
        Ok(match op {
            ArithOp::Add => Value::dec(a + b),
            ArithOp::Sub => Value::dec(a - b),
            ArithOp::Mul => Value::dec(a * b),
            ArithOp::Div => {
                if b.is_zero() {
                    return if div_zero_is_error {
                        Err(ValueError::DivZero)
                    } else {
                        Ok(Value::Null)
                    };
                }
                Value::dec(a / b)
            }
        })
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Bool(_) => 1,
            Value::Int(_) | Value::Dec(_) => 2,
            Value::Text(_) => 3,
        }
    }

    /// Renders a decimal so that it reads back as a decimal (always has a
    /// fractional point or exponent).
    pub fn dec_literal(d: &BigDecimal) -> String {
        let s = d.normalized().to_string();
        if s.contains('.') || s.contains('e') || s.contains('E') {
            s
        } else {
            format!("{s}.0")
        }
    }

    pub fn is_negative_number(&self) -> bool {
        match self {
            Value::Int(i) => i.is_negative(),
            Value::Dec(d) => d.is_negative(),
            _ => false,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Null, Value::Null) => Ordering::Equal,
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Dec(a), Value::Dec(b)) => a.cmp(b),
            (Value::Int(_), Value::Dec(_)) | (Value::Dec(_), Value::Int(_)) => {
                let a = self.as_decimal().unwrap();
                let b = other.as_decimal().unwrap();
                a.cmp(&b).then_with(|| {
                    if matches!(self, Value::Int(_)) {
                        Ordering::Less
                    } else {
                        Ordering::Greater
                    }
                })
            }
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.tag().hash(state);
        match self {
            Value::Int(i) => i.hash(state),
            Value::Dec(d) => d.normalized().to_string().hash(state),
            Value::Text(s) => s.hash(state),
            Value::Bool(b) => b.hash(state),
            Value::Null => {}
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Dec(d) => write!(f, "{}", Value::dec_literal(d)),
            Value::Text(s) => write!(f, "{s}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Null => write!(f, "null"),
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::int(i)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::text(s)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}
