use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use super::expr::{Expr, ExprType, VarEval};
use crate::scalar::format_rational;

pub const DEFAULT_CF_VAR: &str = "cf";

/// A bounded integer variable with its initial value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
    pub init: i64,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, lo: i64, hi: i64, init: i64) -> Self {
        VarDecl {
            name: name.into(),
            lo,
            hi,
            init,
        }
    }

    pub fn contains(&self, value: i64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub target: String,
    pub expr: Expr,
}

impl Assignment {
    pub fn new(target: impl Into<String>, expr: Expr) -> Self {
        Assignment {
            target: target.into(),
            expr,
        }
    }
}

/// `prob : (cf'=target) & (x'=e) & ...`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StochUpdate {
    pub prob: Expr,
    pub target: i64,
    pub assigns: Vec<Assignment>,
}

impl StochUpdate {
    pub fn new(prob: Expr, target: i64, assigns: Vec<Assignment>) -> Self {
        StochUpdate { prob, target, assigns }
    }

    pub fn assigned(&self) -> impl Iterator<Item = &str> {
        self.assigns.iter().map(|a| a.target.as_str())
    }

    pub fn assignment(&self, var: &str) -> Option<&Assignment> {
        self.assigns.iter().find(|a| a.target == var)
    }
}

/// A guarded command enabled at a single control-flow location. The
/// `cf = location` conjunct is implicit and not part of `guard`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Command {
    pub id: usize,
    pub location: i64,
    pub guard: Expr,
    pub updates: Vec<StochUpdate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub module_name: String,
    pub cf_var: String,
    /// Inclusive bounds of the control-flow variable; its initial value is 0.
    pub cf_domain: (i64, i64),
    pub decls: Vec<VarDecl>,
    pub commands: Vec<Command>,
    pub labels: BTreeMap<String, Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenameError {
    #[error("cannot rename `{0}` onto the control-flow variable")]
    ControlFlowTarget(String),
    #[error("cannot rename the control-flow variable `{0}`")]
    ControlFlowSource(String),
    #[error("`{0}` is not a declared variable")]
    Undeclared(String),
}

impl Program {
    pub fn decl(&self, name: &str) -> Option<&VarDecl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn var_names(&self) -> impl Iterator<Item = &str> {
        self.decls.iter().map(|d| d.name.as_str())
    }

    pub fn var_index(&self) -> HashMap<&str, usize> {
        self.decls
            .iter()
            .enumerate()
            .map(|(i, d)| (d.name.as_str(), i))
            .collect()
    }

    /// The unique initial evaluation read off the declarations.
    pub fn initial_eval(&self) -> VarEval {
        self.decls.iter().map(|d| (d.name.clone(), d.init)).collect()
    }

    /// The initial guard as a conjunction of `name = init`.
    pub fn initial_guard(&self) -> Expr {
        Expr::conjunction(
            self.decls
                .iter()
                .map(|d| Expr::eq(Expr::var(&d.name), Expr::Int(d.init))),
        )
    }

    pub fn commands_at(&self, location: i64) -> impl Iterator<Item = &Command> {
        self.commands.iter().filter(move |c| c.location == location)
    }

    /// Variables referenced by any label.
    pub fn label_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for expr in self.labels.values() {
            expr.collect_vars(&mut out);
        }
        out.remove(&self.cf_var);
        out
    }

    /// Renames variables in guards, probabilities, and both sides of
    /// assignments. Declarations are renamed in place; when several
    /// variables map onto one name, the first declaration is kept and the
    /// caller is expected to rewrite it. Labels are left untouched.
    pub fn rename_vars(&self, mapping: &BTreeMap<String, String>) -> Result<Program, RenameError> {
        for (from, to) in mapping {
            if *from == self.cf_var {
                return Err(RenameError::ControlFlowSource(from.clone()));
            }
            if *to == self.cf_var {
                return Err(RenameError::ControlFlowTarget(from.clone()));
            }
            if self.decl(from).is_none() {
                return Err(RenameError::Undeclared(from.clone()));
            }
        }
        let map = |name: &str| mapping.get(name).map(String::as_str);
        let commands = self
            .commands
            .iter()
            .map(|c| Command {
                id: c.id,
                location: c.location,
                guard: c.guard.rename(&map),
                updates: c
                    .updates
                    .iter()
                    .map(|u| StochUpdate {
                        prob: u.prob.rename(&map),
                        target: u.target,
                        assigns: u
                            .assigns
                            .iter()
                            .map(|a| Assignment {
                                target: map(&a.target).unwrap_or(&a.target).to_owned(),
                                expr: a.expr.rename(&map),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        let mut seen = BTreeSet::new();
        let decls = self
            .decls
            .iter()
            .map(|d| VarDecl {
                name: map(&d.name).unwrap_or(&d.name).to_owned(),
                ..d.clone()
            })
            .filter(|d| seen.insert(d.name.clone()))
            .collect();
        Ok(Program {
            module_name: self.module_name.clone(),
            cf_var: self.cf_var.clone(),
            cf_domain: self.cf_domain,
            decls,
            commands,
            labels: self.labels.clone(),
        })
    }

    /// Checks every structural side condition and returns one
    /// human-readable diagnostic per violation.
    pub fn well_formed(&self) -> Vec<String> {
        let mut diags = Vec::new();
        let (cf_lo, cf_hi) = self.cf_domain;
        if !(cf_lo <= 0 && 0 <= cf_hi) {
            diags.push(format!(
                "control-flow domain [{cf_lo}..{cf_hi}] does not contain the initial location 0"
            ));
        }

        let mut names = BTreeSet::new();
        for d in &self.decls {
            if d.name == self.cf_var {
                diags.push(format!(
                    "control-flow variable `{}` must not be declared as a program variable",
                    d.name
                ));
            }
            if !names.insert(d.name.as_str()) {
                diags.push(format!("variable `{}` declared twice", d.name));
            }
            if !(d.lo <= d.init && d.init <= d.hi) {
                diags.push(format!(
                    "variable `{}`: initial value {} outside [{}..{}]",
                    d.name, d.init, d.lo, d.hi
                ));
            }
        }

        let declared = |n: &str| names.contains(n);
        let in_scope = |n: &str| n == self.cf_var || names.contains(n);
        let check_type = |diags: &mut Vec<String>, ctx: &str, e: &Expr, want: &[ExprType]| match e.infer_type(&in_scope)
        {
            Ok(t) if want.contains(&t) => {}
            Ok(t) => diags.push(format!("{ctx}: expected {} expression, found {t} `{e}`", want[0])),
            Err(msg) => diags.push(format!("{ctx}: {msg}")),
        };

        let mut ids = BTreeSet::new();
        for c in &self.commands {
            let ctx = format!("command {}", c.id);
            if !ids.insert(c.id) {
                diags.push(format!("{ctx}: duplicate command id"));
            }
            if c.location < cf_lo || c.location > cf_hi {
                diags.push(format!(
                    "{ctx}: location {} outside control-flow domain [{cf_lo}..{cf_hi}]",
                    c.location
                ));
            }
            check_type(&mut diags, &format!("{ctx} guard"), &c.guard, &[ExprType::Bool]);
            if c.updates.is_empty() {
                diags.push(format!("{ctx}: no stochastic updates"));
            }
            let mut constant_sum = Some(BigRational::from_integer(0.into()));
            for (i, u) in c.updates.iter().enumerate() {
                let uctx = format!("{ctx} update {}", i + 1);
                if u.target < cf_lo || u.target > cf_hi {
                    diags.push(format!(
                        "{uctx}: control-flow target {} outside [{cf_lo}..{cf_hi}]",
                        u.target
                    ));
                }
                check_type(
                    &mut diags,
                    &format!("{uctx} probability"),
                    &u.prob,
                    &[ExprType::Prob, ExprType::Int],
                );
                constant_sum = match (constant_sum, &u.prob) {
                    (Some(sum), Expr::Prob(p)) => Some(sum + p),
                    (Some(sum), Expr::Int(v)) => Some(sum + BigRational::from_integer((*v).into())),
                    _ => None,
                };
                let mut targets = BTreeSet::new();
                for a in &u.assigns {
                    if a.target == self.cf_var {
                        diags.push(format!(
                            "{uctx}: control-flow variable assigned outside the jump target"
                        ));
                    } else if !declared(&a.target) {
                        diags.push(format!("{uctx}: assignment to undeclared variable `{}`", a.target));
                    }
                    if !targets.insert(a.target.as_str()) {
                        diags.push(format!("{uctx}: variable `{}` assigned more than once", a.target));
                    }
                    check_type(
                        &mut diags,
                        &format!("{uctx} assignment to `{}`", a.target),
                        &a.expr,
                        &[ExprType::Int],
                    );
                }
            }
            if let Some(sum) = constant_sum {
                if !c.updates.is_empty() && !sum.is_one() {
                    diags.push(format!(
                        "{ctx}: constant probabilities sum to {}, not 1",
                        format_rational(&sum)
                    ));
                }
            }
        }
        if !self.commands.iter().any(|c| c.location == 0) {
            diags.push("no command at location 0".to_owned());
        }
        for (name, expr) in &self.labels {
            check_type(&mut diags, &format!("label \"{name}\""), expr, &[ExprType::Bool]);
        }
        diags
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::expr::{ArithOp, Expr};
    use crate::scalar::ratio;

    fn tiny() -> Program {
        Program {
            module_name: "m".into(),
            cf_var: "cf".into(),
            cf_domain: (0, 1),
            decls: vec![VarDecl::new("x", 0, 2, 0), VarDecl::new("y", 0, 2, 1)],
            commands: vec![Command {
                id: 0,
                location: 0,
                guard: Expr::eq(Expr::var("x"), Expr::Int(0)),
                updates: vec![
                    StochUpdate::new(
                        Expr::Prob(ratio(1, 2)),
                        1,
                        vec![Assignment::new(
                            "x",
                            Expr::arith(ArithOp::Add, Expr::var("y"), Expr::Int(1)),
                        )],
                    ),
                    StochUpdate::new(Expr::Prob(ratio(1, 2)), 0, vec![]),
                ],
            }],
            labels: BTreeMap::new(),
        }
    }

    #[test]
    fn valid_program_has_no_diagnostics() {
        assert!(tiny().well_formed().is_empty());
    }

    #[test]
    fn target_outside_domain_is_diagnosed() {
        let mut p = tiny();
        p.commands[0].updates[1].target = 7;
        assert_eq!(p.well_formed().len(), 1);
    }

    #[test]
    fn duplicate_assignment_is_diagnosed() {
        let mut p = tiny();
        p.commands[0].updates[1].assigns = vec![Assignment::new("y", Expr::Int(0)), Assignment::new("y", Expr::Int(1))];
        let diags = p.well_formed();
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert!(diags[0].contains("more than once"));
    }

    #[test]
    fn missing_initial_location_and_bad_sum() {
        let mut p = tiny();
        p.commands[0].location = 1;
        p.commands[0].updates[0].prob = Expr::Prob(ratio(1, 3));
        let diags = p.well_formed();
        assert!(diags.iter().any(|d| d.contains("no command at location 0")));
        assert!(diags.iter().any(|d| d.contains("sum to 5/6")));
    }

    #[test]
    fn undeclared_reference_is_diagnosed() {
        let mut p = tiny();
        p.commands[0].guard = Expr::eq(Expr::var("z"), Expr::Int(0));
        assert!(p.well_formed()[0].contains("unknown variable `z`"));
    }

    #[test]
    fn rename_identity_and_inverse() {
        let p = tiny();
        assert_eq!(p.rename_vars(&BTreeMap::new()).unwrap(), p);
        let fwd: BTreeMap<_, _> = [("x".to_owned(), "a".to_owned()), ("y".to_owned(), "b".to_owned())].into();
        let back: BTreeMap<_, _> = fwd.iter().map(|(k, v)| (v.clone(), k.clone())).collect();
        let renamed = p.rename_vars(&fwd).unwrap();
        assert!(renamed.decl("a").is_some());
        assert_eq!(renamed.rename_vars(&back).unwrap(), p);
    }

    #[test]
    fn rename_onto_control_flow_fails() {
        let p = tiny();
        let bad: BTreeMap<_, _> = [("x".to_owned(), "cf".to_owned())].into();
        assert_eq!(p.rename_vars(&bad), Err(RenameError::ControlFlowTarget("x".into())));
    }

    #[test]
    fn initial_guard_and_eval() {
        let p = tiny();
        assert_eq!(p.initial_guard().to_string(), "x=0 & y=1");
        assert_eq!(p.initial_eval().get("y"), Some(1));
    }
}
