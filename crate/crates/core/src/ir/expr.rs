use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::scalar::format_rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        }
    }
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

/// Expression tree shared by guards, assignment right-hand sides,
/// probabilities and labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    /// Constant probability, parsed exactly from a decimal literal or a
    /// literal fraction.
    Prob(BigRational),
    Var(String),
    Neg(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// Integer numerator over integer denominator; only valid as a probability.
    Ratio(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprType {
    Int,
    Bool,
    Prob,
}

impl fmt::Display for ExprType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExprType::Int => "integer",
            ExprType::Bool => "boolean",
            ExprType::Prob => "probability",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("expected {expected} expression, found `{found}`")]
    TypeMismatch { expected: ExprType, found: String },
    #[error("integer overflow in `{0}`")]
    Overflow(String),
    #[error("zero denominator in probability `{0}`")]
    ZeroDenominator(String),
    #[error("probability `{expr}` evaluates to {value}, outside [0, 1]")]
    ProbabilityOutOfRange { expr: String, value: String },
}

/// Read access to variable values during evaluation.
pub trait Env {
    fn value(&self, name: &str) -> Option<i64>;
}

/// Total map from declared variables to their current values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarEval(BTreeMap<String, i64>);

impl VarEval {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: impl Into<String>, value: i64) {
        self.0.insert(name.into(), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<(S, i64)> for VarEval {
    fn from_iter<I: IntoIterator<Item = (S, i64)>>(iter: I) -> Self {
        VarEval(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

impl Env for VarEval {
    fn value(&self, name: &str) -> Option<i64> {
        self.get(name)
    }
}

/// An environment extended with the control-flow variable.
pub struct Scope<'a, E: ?Sized> {
    pub env: &'a E,
    pub cf_var: &'a str,
    pub cf_value: i64,
}

impl<'a, E: Env + ?Sized> Scope<'a, E> {
    pub fn new(env: &'a E, cf_var: &'a str, cf_value: i64) -> Self {
        Scope { env, cf_var, cf_value }
    }
}

impl<E: Env + ?Sized> Env for Scope<'_, E> {
    fn value(&self, name: &str) -> Option<i64> {
        if name == self.cf_var {
            Some(self.cf_value)
        } else {
            self.env.value(name)
        }
    }
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn arith(op: ArithOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Arith(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn cmp(op: CmpOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Cmp(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn eq(lhs: Expr, rhs: Expr) -> Expr {
        Expr::cmp(CmpOp::Eq, lhs, rhs)
    }

    pub fn and(lhs: Expr, rhs: Expr) -> Expr {
        Expr::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Or(Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Expr) -> Expr {
        Expr::Not(Box::new(inner))
    }

    pub fn ratio(num: Expr, den: Expr) -> Expr {
        Expr::Ratio(Box::new(num), Box::new(den))
    }

    /// Left-folds a list of conjuncts; the empty list is `true`.
    pub fn conjunction(parts: impl IntoIterator<Item = Expr>) -> Expr {
        parts.into_iter().reduce(Expr::and).unwrap_or(Expr::Bool(true))
    }

    /// Top-level conjuncts of a left- or right-nested `&` chain.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        fn walk<'e>(e: &'e Expr, out: &mut Vec<&'e Expr>) {
            match e {
                Expr::And(l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Expr::Bool(true))
    }

    /// Collects every variable name referenced in the expression.
    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Prob(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(e) | Expr::Not(e) => e.collect_vars(out),
            Expr::Arith(_, l, r) | Expr::Cmp(_, l, r) | Expr::And(l, r) | Expr::Or(l, r) | Expr::Ratio(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    /// Replaces variable references for which `map` yields a new name.
    pub fn rename<'m>(&self, map: &impl Fn(&str) -> Option<&'m str>) -> Expr {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Prob(_) => self.clone(),
            Expr::Var(name) => Expr::Var(map(name).map_or_else(|| name.clone(), str::to_owned)),
            Expr::Neg(e) => Expr::Neg(Box::new(e.rename(map))),
            Expr::Not(e) => Expr::Not(Box::new(e.rename(map))),
            Expr::Arith(op, l, r) => Expr::Arith(*op, Box::new(l.rename(map)), Box::new(r.rename(map))),
            Expr::Cmp(op, l, r) => Expr::Cmp(*op, Box::new(l.rename(map)), Box::new(r.rename(map))),
            Expr::And(l, r) => Expr::and(l.rename(map), r.rename(map)),
            Expr::Or(l, r) => Expr::or(l.rename(map), r.rename(map)),
            Expr::Ratio(l, r) => Expr::ratio(l.rename(map), r.rename(map)),
        }
    }

    /// Infers the type of the expression, checking operand types.
    /// `known` decides whether a variable name is in scope.
    pub fn infer_type(&self, known: &impl Fn(&str) -> bool) -> Result<ExprType, String> {
        let expect = |e: &Expr, want: ExprType| -> Result<(), String> {
            let got = e.infer_type(known)?;
            if got == want {
                Ok(())
            } else {
                Err(format!("expected {want} operand, found {got} `{e}`"))
            }
        };
        match self {
            Expr::Int(_) => Ok(ExprType::Int),
            Expr::Bool(_) => Ok(ExprType::Bool),
            Expr::Prob(_) => Ok(ExprType::Prob),
            Expr::Var(name) => {
                if known(name) {
                    Ok(ExprType::Int)
                } else {
                    Err(format!("unknown variable `{name}`"))
                }
            }
            Expr::Neg(e) => expect(e, ExprType::Int).map(|_| ExprType::Int),
            Expr::Arith(_, l, r) => {
                expect(l, ExprType::Int)?;
                expect(r, ExprType::Int)?;
                Ok(ExprType::Int)
            }
            Expr::Cmp(_, l, r) => {
                expect(l, ExprType::Int)?;
                expect(r, ExprType::Int)?;
                Ok(ExprType::Bool)
            }
            Expr::And(l, r) | Expr::Or(l, r) => {
                expect(l, ExprType::Bool)?;
                expect(r, ExprType::Bool)?;
                Ok(ExprType::Bool)
            }
            Expr::Not(e) => expect(e, ExprType::Bool).map(|_| ExprType::Bool),
            Expr::Ratio(l, r) => {
                expect(l, ExprType::Int)?;
                expect(r, ExprType::Int)?;
                Ok(ExprType::Prob)
            }
        }
    }

    /// Standard integer evaluation.
    pub fn eval_int(&self, env: &(impl Env + ?Sized)) -> Result<i64, EvalError> {
        let overflow = || EvalError::Overflow(self.to_string());
        match self {
            Expr::Int(v) => Ok(*v),
            Expr::Var(name) => env.value(name).ok_or_else(|| EvalError::UnboundVariable(name.clone())),
            Expr::Neg(e) => e.eval_int(env)?.checked_neg().ok_or_else(overflow),
            Expr::Arith(op, l, r) => {
                let (a, b) = (l.eval_int(env)?, r.eval_int(env)?);
                match op {
                    ArithOp::Add => a.checked_add(b),
                    ArithOp::Sub => a.checked_sub(b),
                    ArithOp::Mul => a.checked_mul(b),
                }
                .ok_or_else(overflow)
            }
            _ => Err(EvalError::TypeMismatch {
                expected: ExprType::Int,
                found: self.to_string(),
            }),
        }
    }

    /// Truth value of a boolean expression.
    pub fn eval_bool(&self, env: &(impl Env + ?Sized)) -> Result<bool, EvalError> {
        match self {
            Expr::Bool(b) => Ok(*b),
            Expr::Cmp(op, l, r) => Ok(op.holds(l.eval_int(env)?, r.eval_int(env)?)),
            Expr::And(l, r) => Ok(l.eval_bool(env)? && r.eval_bool(env)?),
            Expr::Or(l, r) => Ok(l.eval_bool(env)? || r.eval_bool(env)?),
            Expr::Not(e) => Ok(!e.eval_bool(env)?),
            _ => Err(EvalError::TypeMismatch {
                expected: ExprType::Bool,
                found: self.to_string(),
            }),
        }
    }

    /// Exact value of a probability expression, checked to lie in `[0, 1]`.
    pub fn eval_prob(&self, env: &(impl Env + ?Sized)) -> Result<BigRational, EvalError> {
        let value = match self {
            Expr::Prob(p) => p.clone(),
            Expr::Ratio(num, den) => {
                let n = num.eval_int(env)?;
                let d = den.eval_int(env)?;
                if d == 0 {
                    return Err(EvalError::ZeroDenominator(self.to_string()));
                }
                BigRational::new(BigInt::from(n), BigInt::from(d))
            }
            Expr::Int(_) | Expr::Var(_) | Expr::Neg(_) | Expr::Arith(..) => {
                BigRational::from_integer(BigInt::from(self.eval_int(env)?))
            }
            _ => {
                return Err(EvalError::TypeMismatch {
                    expected: ExprType::Prob,
                    found: self.to_string(),
                })
            }
        };
        if value < BigRational::zero() || value > BigRational::one() {
            return Err(EvalError::ProbabilityOutOfRange {
                expr: self.to_string(),
                value: format_rational(&value),
            });
        }
        Ok(value)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Not(_) => 3,
            Expr::Cmp(..) => 4,
            Expr::Arith(ArithOp::Add | ArithOp::Sub, ..) => 5,
            Expr::Arith(ArithOp::Mul, ..) => 6,
            Expr::Ratio(..) => 6,
            Expr::Neg(_) => 7,
            Expr::Int(v) if *v < 0 => 7,
            Expr::Prob(p) if !p.is_integer() && format_rational(p).contains('/') => 6,
            _ => 8,
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Renders in the concrete model syntax; binary operators associate to the
/// left, so right operands of equal precedence are parenthesized.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Prob(p) => f.write_str(&format_rational(p)),
            Expr::Var(name) => f.write_str(name),
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.fmt_operand(f, 8)
            }
            Expr::Not(e) => {
                f.write_str("!")?;
                e.fmt_operand(f, 8)
            }
            Expr::Arith(op, l, r) => {
                let p = self.precedence();
                l.fmt_operand(f, p)?;
                f.write_str(op.symbol())?;
                r.fmt_operand(f, p + 1)
            }
            Expr::Cmp(op, l, r) => {
                l.fmt_operand(f, 5)?;
                f.write_str(op.symbol())?;
                r.fmt_operand(f, 5)
            }
            Expr::And(l, r) => {
                l.fmt_operand(f, 2)?;
                f.write_str(" & ")?;
                r.fmt_operand(f, 3)
            }
            Expr::Or(l, r) => {
                l.fmt_operand(f, 1)?;
                f.write_str(" | ")?;
                r.fmt_operand(f, 2)
            }
            Expr::Ratio(l, r) => {
                l.fmt_operand(f, 8)?;
                f.write_str("/")?;
                r.fmt_operand(f, 8)
            }
        }
    }
}
