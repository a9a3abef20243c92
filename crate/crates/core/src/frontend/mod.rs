//! Textual model format: a single-module DTMC subset of the PRISM language
//! in which every command fixes a control-flow location.
//!
//! ```text
//! dtmc
//!
//! module bsp
//!   cf : [0..3] init 0;
//!   x : [0..1] init 1;
//!
//!   [] cf=0 & x=1 -> 1:(cf'=1)&(x'=0);
//! endmodule
//!
//! label "fail" = cf=0 & x=0;
//! ```
//!
//! Probabilities are decimal literals or `num/den` and are read exactly.

mod lexer;
mod parser;

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::ir::{Expr, Program, DEFAULT_CF_VAR};

/// Position in the source text; `line` and `column` are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub offset: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub message: String,
    pub span: SourceSpan,
}

impl ParseError {
    pub(crate) fn new(message: impl Into<String>, span: SourceSpan) -> Self {
        ParseError {
            message: message.into(),
            span,
        }
    }
}

/// Parses a model whose control-flow variable is `cf_var`.
pub fn parse(text: &str, cf_var: &str) -> Result<Program, ParseError> {
    parser::Parser::new(text, cf_var)?.program()
}

/// Parses with the default control-flow variable name `cf`.
pub fn parse_default(text: &str) -> Result<Program, ParseError> {
    parse(text, DEFAULT_CF_VAR)
}

/// Renders a program in the format accepted by [`parse`].
pub fn print(program: &Program) -> String {
    let mut out = String::new();
    let cf = &program.cf_var;
    let (lo, hi) = program.cf_domain;
    let _ = writeln!(out, "dtmc\n\nmodule {}", program.module_name);
    let _ = writeln!(out, "  {cf} : [{lo}..{hi}] init 0;");
    for d in &program.decls {
        let _ = writeln!(out, "  {} : [{}..{}] init {};", d.name, d.lo, d.hi, d.init);
    }
    if !program.commands.is_empty() {
        out.push('\n');
    }
    for c in &program.commands {
        let _ = write!(out, "  [] {cf}={}", c.location);
        if !c.guard.is_true() {
            match &c.guard {
                Expr::Or(..) => {
                    let _ = write!(out, " & ({})", c.guard);
                }
                g => {
                    let _ = write!(out, " & {g}");
                }
            }
        }
        out.push_str(" -> ");
        for (i, u) in c.updates.iter().enumerate() {
            if i > 0 {
                out.push_str(" + ");
            }
            let _ = write!(out, "{}:({cf}'={})", u.prob, u.target);
            for a in &u.assigns {
                let _ = write!(out, "&({}'={})", a.target, a.expr);
            }
        }
        out.push_str(";\n");
    }
    out.push_str("endmodule\n");
    if !program.labels.is_empty() {
        out.push('\n');
    }
    for (name, expr) in &program.labels {
        let _ = writeln!(out, "label \"{name}\" = {expr};");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{ArithOp, Assignment, StochUpdate};
    use crate::models::BSP_SOURCE;
    use crate::scalar::ratio;

    #[test]
    fn parses_the_running_example() {
        let p = parse_default(BSP_SOURCE).unwrap();
        assert_eq!(p.commands.len(), 4);
        assert_eq!(p.cf_domain, (0, 3));
        assert_eq!(p.decls.len(), 2);
        assert_eq!(p.commands[3].updates[0].prob, Expr::Prob(ratio(3, 10)));
        assert_eq!(p.commands[1].location, 1);
        assert_eq!(p.commands[1].guard.to_string(), "x=0");
        assert!(p.commands[2].guard.is_true());
    }

    #[test]
    fn round_trip() {
        let p = parse_default(BSP_SOURCE).unwrap();
        let text = print(&p);
        assert_eq!(parse_default(&text).unwrap(), p);
        assert_eq!(print(&parse_default(&text).unwrap()), text);
    }

    #[test]
    fn command_without_location_is_rejected() {
        let src = "dtmc module m cf : [0..1] init 0; x : [0..1] init 0;\n [] x=0 -> 1:(x'=1); endmodule";
        let err = parse_default(src).unwrap_err();
        assert!(err.message.contains("non-control-flow command"), "{err}");
        assert_eq!(err.span.line, 2);
    }

    #[test]
    fn empty_module_is_rejected() {
        let err = parse_default("dtmc module m cf : [0..0] init 0; endmodule").unwrap_err();
        assert!(err.message.contains("no command at location 0"), "{err}");
    }

    #[test]
    fn non_literal_target_is_rejected() {
        let src = "dtmc module m cf : [0..1] init 0; x : [0..1] init 0;\n [] cf=0 -> 1:(cf'=x); endmodule";
        let err = parse_default(src).unwrap_err();
        assert!(err.message.contains("integer literal"), "{err}");
    }

    #[test]
    fn unknown_variable_is_rejected_with_span() {
        let src = "dtmc\nmodule m\n cf : [0..1] init 0;\n [] cf=0 & z=1 -> 1:(cf'=0);\nendmodule";
        let err = parse_default(src).unwrap_err();
        assert!(err.message.contains("unknown variable `z`"));
        assert_eq!((err.span.line, err.span.column), (4, 12));
    }

    #[test]
    fn custom_control_flow_name_and_variable_probability() {
        let src = "dtmc module m pc : [0..2] init 0; x : [1..3] init 1;\n\
                   [] x>0 & pc=0 -> x/(1+x):(pc'=1)&(x'=1) + 1/(1+x):(pc'=2);\n\
                   [] pc=1 -> (pc'=0);\n endmodule";
        let p = parse(src, "pc").unwrap();
        assert_eq!(p.commands[0].location, 0);
        assert_eq!(p.commands[0].guard.to_string(), "x>0");
        assert_eq!(p.commands[0].updates[0].prob.to_string(), "x/(1+x)");
        assert_eq!(p.commands[1].updates[0].prob, Expr::Prob(ratio(1, 1)));
        assert_eq!(parse(&print(&p), "pc").unwrap(), p);
    }

    #[test]
    fn probabilities_print_as_decimals_when_exact() {
        let mut p = parse_default(BSP_SOURCE).unwrap();
        p.commands[1].updates[0].prob = Expr::Prob(ratio(1, 3));
        p.commands[1].updates[1].prob = Expr::Prob(ratio(2, 3));
        let text = print(&p);
        assert!(text.contains("1/3:(cf'=2)"), "{text}");
        assert!(text.contains("0.3:(cf'=0)"));
        assert_eq!(parse_default(&text).unwrap(), p);
    }

    #[test]
    fn nested_guards_survive_round_trip() {
        let mut p = parse_default(BSP_SOURCE).unwrap();
        let x = || Expr::var("x");
        p.commands[2].guard = Expr::and(
            Expr::or(Expr::eq(x(), Expr::Int(0)), Expr::eq(x(), Expr::Int(1))),
            Expr::and(Expr::Bool(true), Expr::not(Expr::eq(x(), Expr::Int(-1)))),
        );
        p.commands[2].updates[0] = StochUpdate::new(
            Expr::Prob(ratio(1, 1)),
            0,
            vec![Assignment::new(
                "x",
                Expr::arith(
                    ArithOp::Sub,
                    Expr::Int(1),
                    Expr::arith(ArithOp::Mul, x(), Expr::Int(-1)),
                ),
            )],
        );
        let text = print(&p);
        assert_eq!(parse_default(&text).unwrap(), p, "{text}");
    }

    #[test]
    fn crlf_input_is_accepted() {
        let src = BSP_SOURCE.replace('\n', "\r\n");
        assert_eq!(parse_default(&src).unwrap(), parse_default(BSP_SOURCE).unwrap());
    }
}
