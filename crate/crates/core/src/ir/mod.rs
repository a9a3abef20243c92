//! In-memory representation of probabilistic control-flow programs.

mod expr;
mod program;

pub use expr::{ArithOp, CmpOp, Env, EvalError, Expr, ExprType, Scope, VarEval};
pub use program::{Assignment, Command, Program, RenameError, StochUpdate, VarDecl, DEFAULT_CF_VAR};
