//! Source-to-source reductions driven by live range analysis.
//!
//! * Reset value optimization ([`rvo`]) assigns a fixed reset value to every
//!   variable that is dead after an update, so that states differing only in
//!   dead values coincide.
//! * Register allocation optimization ([`rao`]) colors the interference graph
//!   and merges each color class into a single variable.
//!
//! Both passes leave variables in the exclude set untouched, which keeps
//! properties over those variables intact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::interference::{build_ig, welsh_powell, ColorAssignment};
use crate::ir::{Assignment, Expr, Program, StochUpdate, VarDecl, VarEval};
use crate::liveness::{lra, LivenessMap, VarSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("reset value {value} for `{var}` outside its domain [{lo}..{hi}]")]
    ResetOutOfDomain { var: String, value: i64, lo: i64, hi: i64 },
    #[error("no reset value for `{0}`")]
    MissingReset(String),
    #[error("`{0}` is not a declared variable")]
    UnknownVariable(String),
    #[error("label \"{label}\" reads `{var}`: label variable must be excluded")]
    LabelNotExcluded { label: String, var: String },
    #[error("unknown pass `{0}` (expected identity, rvo, rvo-as-written, rvo-aggressive, rao or rvo+rao)")]
    UnknownPass(String),
    #[error("unknown RVO mode `{0}` (expected aggressive or as-written)")]
    UnknownMode(String),
}

/// Which variables an update may reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RvoMode {
    /// Only variables live at the command itself that are dead at the
    /// update's target location.
    AsWritten,
    /// Every variable dead at the update's target location.
    #[default]
    Aggressive,
}

impl fmt::Display for RvoMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RvoMode::AsWritten => "as-written",
            RvoMode::Aggressive => "aggressive",
        })
    }
}

impl FromStr for RvoMode {
    type Err = ReduceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as-written" => Ok(RvoMode::AsWritten),
            "aggressive" => Ok(RvoMode::Aggressive),
            other => Err(ReduceError::UnknownMode(other.to_owned())),
        }
    }
}

/// Values dead variables are reset to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResetEvaluation(VarEval);

impl ResetEvaluation {
    /// Resets every variable to its declared initial value.
    pub fn initial(program: &Program) -> Self {
        ResetEvaluation(program.initial_eval())
    }

    pub fn new(eval: VarEval) -> Self {
        ResetEvaluation(eval)
    }

    pub fn with_override(mut self, var: impl Into<String>, value: i64) -> Self {
        self.0.set(var, value);
        self
    }

    pub fn get(&self, var: &str) -> Option<i64> {
        self.0.get(var)
    }

    fn validate(&self, program: &Program) -> Result<(), ReduceError> {
        for (name, _) in self.0.iter() {
            if program.decl(name).is_none() {
                return Err(ReduceError::UnknownVariable(name.to_owned()));
            }
        }
        for d in &program.decls {
            let value = self
                .get(&d.name)
                .ok_or_else(|| ReduceError::MissingReset(d.name.clone()))?;
            if !d.contains(value) {
                return Err(ReduceError::ResetOutOfDomain {
                    var: d.name.clone(),
                    value,
                    lo: d.lo,
                    hi: d.hi,
                });
            }
        }
        Ok(())
    }
}

/// Variables exempt from both passes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExcludeSet(BTreeSet<String>);

impl ExcludeSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The given variables plus every variable read by a label.
    pub fn with_label_vars<S: Into<String>>(program: &Program, vars: impl IntoIterator<Item = S>) -> Self {
        let mut set: BTreeSet<String> = vars.into_iter().map(Into::into).collect();
        set.extend(program.label_vars());
        ExcludeSet(set)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.0.contains(var)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn validate(&self, program: &Program) -> Result<(), ReduceError> {
        match self.0.iter().find(|v| program.decl(v).is_none()) {
            Some(v) => Err(ReduceError::UnknownVariable(v.clone())),
            None => Ok(()),
        }
    }
}

impl<S: Into<String>> FromIterator<S> for ExcludeSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        ExcludeSet(iter.into_iter().map(Into::into).collect())
    }
}

/// Reset value optimization, repeated until the program no longer changes.
///
/// A single sweep can make further resets possible: new resets turn
/// variables into written-in-every-update variables, which shrinks live
/// ranges upstream. Iterating makes the pass idempotent.
pub fn rvo(program: &Program, reset: &ResetEvaluation, ex: &ExcludeSet, mode: RvoMode) -> Result<Program, ReduceError> {
    let mut current = rvo_pass(program, reset, ex, mode)?;
    loop {
        let next = rvo_pass(&current, reset, ex, mode)?;
        if next == current {
            return Ok(current);
        }
        current = next;
    }
}

/// One sweep of reset value optimization over all updates.
pub fn rvo_pass(
    program: &Program,
    reset: &ResetEvaluation,
    ex: &ExcludeSet,
    mode: RvoMode,
) -> Result<Program, ReduceError> {
    reset.validate(program)?;
    ex.validate(program)?;
    let live = lra(program);
    let mut out = program.clone();
    let mut live_at_target: BTreeMap<i64, VarSet> = BTreeMap::new();
    for (pos, command) in out.commands.iter_mut().enumerate() {
        for update in &mut command.updates {
            let after = live_at_target
                .entry(update.target)
                .or_insert_with(|| live.at_location(program, update.target));
            let candidates: Vec<&VarDecl> = program
                .decls
                .iter()
                .filter(|d| match mode {
                    RvoMode::AsWritten => live.at(pos).contains(&d.name),
                    RvoMode::Aggressive => true,
                })
                .filter(|d| !ex.contains(&d.name) && !after.contains(&d.name))
                .collect();
            for d in candidates {
                let value = Expr::Int(reset.get(&d.name).expect("validated reset"));
                match update.assigns.iter_mut().find(|a| a.target == d.name) {
                    Some(a) => a.expr = value,
                    None => update.assigns.push(Assignment::new(&d.name, value)),
                }
            }
        }
    }
    Ok(out)
}

/// Removes syntactically repeated top-level conjuncts, keeping the first
/// occurrence of each.
pub fn simplify_duplicate_conjuncts(expr: &Expr) -> Expr {
    let mut seen = Vec::new();
    for c in expr.conjuncts() {
        if !seen.contains(&c) {
            seen.push(c);
        }
    }
    if seen.len() == expr.conjuncts().len() {
        return expr.clone();
    }
    Expr::conjunction(seen.into_iter().cloned())
}

/// A group of variables merged into one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeClass {
    pub color: usize,
    pub name: String,
    pub members: Vec<String>,
}

/// Result of register allocation optimization with its intermediate data.
#[derive(Debug, Clone)]
pub struct RaoOutcome {
    pub program: Program,
    pub liveness: LivenessMap,
    pub coloring: ColorAssignment,
    pub classes: Vec<MergeClass>,
    /// Original variable name to the variable it was merged into.
    pub renaming: BTreeMap<String, String>,
}

/// Register allocation optimization, repeated until no variables merge.
///
/// Merging drops writes that a live class-mate would otherwise see, which
/// can leave further variables unread, so a second application may merge
/// more. Iterating makes the pass idempotent.
pub fn rao(program: &Program, ex: &ExcludeSet) -> Result<Program, ReduceError> {
    let mut current = rao_with_outcome(program, ex)?.program;
    loop {
        let next = rao_with_outcome(&current, ex)?.program;
        if next == current {
            return Ok(current);
        }
        current = next;
    }
}

/// A single application of register allocation optimization.
pub fn rao_with_outcome(program: &Program, ex: &ExcludeSet) -> Result<RaoOutcome, ReduceError> {
    ex.validate(program)?;
    for (label, expr) in &program.labels {
        if let Some(var) = expr
            .vars()
            .into_iter()
            .find(|v| *v != program.cf_var && !ex.contains(v))
        {
            return Err(ReduceError::LabelNotExcluded {
                label: label.clone(),
                var,
            });
        }
    }

    let live = lra(program);
    let graph = build_ig(program, &live);
    let coloring = welsh_powell(&graph);

    let mut by_color: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, d) in program.decls.iter().enumerate() {
        if !ex.contains(&d.name) {
            by_color.entry(coloring.color(i)).or_default().push(d.name.clone());
        }
    }
    let mut taken: BTreeSet<String> = program
        .decls
        .iter()
        .filter(|d| ex.contains(&d.name))
        .map(|d| d.name.clone())
        .collect();
    taken.insert(program.cf_var.clone());
    for members in by_color.values().filter(|m| m.len() == 1) {
        taken.insert(members[0].clone());
    }
    let mut classes = Vec::new();
    let mut renaming = BTreeMap::new();
    for (&color, members) in &by_color {
        let name = if members.len() == 1 {
            members[0].clone()
        } else {
            let mut name = format!("m{color}");
            while taken.contains(&name) || program.decl(&name).is_some_and(|_| !members.contains(&name)) {
                name.push('_');
            }
            taken.insert(name.clone());
            name
        };
        for m in members {
            renaming.insert(m.clone(), name.clone());
        }
        classes.push(MergeClass {
            color,
            name,
            members: members.clone(),
        });
    }

    let initial_live = live.at_location(program, 0);
    let mut decls = Vec::new();
    for d in &program.decls {
        let Some(class) = classes.iter().find(|c| c.members.contains(&d.name)) else {
            decls.push(d.clone());
            continue;
        };
        if class.members.len() == 1 {
            decls.push(d.clone());
            continue;
        }
        if class.members[0] != d.name {
            continue;
        }
        let members: Vec<&VarDecl> = class
            .members
            .iter()
            .map(|m| program.decl(m).expect("class member declared"))
            .collect();
        let init_from = members
            .iter()
            .find(|m| initial_live.contains(&m.name))
            .unwrap_or(&members[0]);
        decls.push(VarDecl {
            name: class.name.clone(),
            lo: members.iter().map(|m| m.lo).min().unwrap_or(d.lo),
            hi: members.iter().map(|m| m.hi).max().unwrap_or(d.hi),
            init: init_from.init,
        });
    }

    // Resolve writes within each merged class before renaming: per update,
    // at most one member's value may flow into the merged variable.
    let mut resolved = program.clone();
    for command in &mut resolved.commands {
        for update in &mut command.updates {
            let after = live.at_location(program, update.target);
            resolve_class_writes(update, &classes, &after);
        }
    }
    let map = |name: &str| renaming.get(name).map(String::as_str);
    for command in &mut resolved.commands {
        command.guard = command.guard.rename(&map);
        for update in &mut command.updates {
            update.prob = update.prob.rename(&map);
            for a in &mut update.assigns {
                a.expr = a.expr.rename(&map);
                if let Some(new) = map(&a.target) {
                    a.target = new.to_owned();
                }
            }
        }
    }
    resolved.decls = decls;

    Ok(RaoOutcome {
        program: resolved,
        liveness: live,
        coloring,
        classes,
        renaming,
    })
}

/// Keeps, for every merged class, only the assignment whose value matters
/// after the update:
/// * the assigned member that is live at the target location, if any;
/// * otherwise none at all when another member is live there, since the
///   merged variable already carries that member's value;
/// * otherwise the declaration-first assigned member.
fn resolve_class_writes(update: &mut StochUpdate, classes: &[MergeClass], live_after: &VarSet) {
    let mut dropped: BTreeSet<String> = BTreeSet::new();
    for class in classes.iter().filter(|c| c.members.len() > 1) {
        let assigned: Vec<&String> = class
            .members
            .iter()
            .filter(|m| update.assignment(m).is_some())
            .collect();
        if assigned.is_empty() {
            continue;
        }
        let keep = if let Some(live) = assigned.iter().find(|m| live_after.contains(m.as_str())) {
            Some(*live)
        } else if class.members.iter().any(|m| live_after.contains(m)) {
            None
        } else {
            Some(assigned[0])
        };
        dropped.extend(assigned.into_iter().filter(|m| Some(*m) != keep).cloned());
    }
    update.assigns.retain(|a| !dropped.contains(&a.target));
}

/// A reduction pipeline selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pass {
    Identity,
    Rvo(RvoMode),
    Rao,
    RvoRao(RvoMode),
}

impl Pass {
    /// The four passes exercised by the preservation campaign.
    pub const ALL: [Pass; 4] = [
        Pass::Rvo(RvoMode::AsWritten),
        Pass::Rvo(RvoMode::Aggressive),
        Pass::Rao,
        Pass::RvoRao(RvoMode::Aggressive),
    ];

    /// Parses `rvo`, `rao`, `rvo+rao` (using `mode` for RVO) as well as the
    /// mode-qualified names `rvo-as-written`, `rvo-aggressive+rao`, ...
    pub fn parse_with_mode(name: &str, mode: RvoMode) -> Result<Pass, ReduceError> {
        let qualified = |rest: &str| -> Option<RvoMode> {
            match rest {
                "" => Some(mode),
                "-as-written" => Some(RvoMode::AsWritten),
                "-aggressive" => Some(RvoMode::Aggressive),
                _ => None,
            }
        };
        if name == "identity" {
            return Ok(Pass::Identity);
        }
        if name == "rao" {
            return Ok(Pass::Rao);
        }
        if let Some(rest) = name.strip_prefix("rvo") {
            if let Some(rest) = rest.strip_suffix("+rao") {
                if let Some(m) = qualified(rest) {
                    return Ok(Pass::RvoRao(m));
                }
            } else if let Some(m) = qualified(rest) {
                return Ok(Pass::Rvo(m));
            }
        }
        Err(ReduceError::UnknownPass(name.to_owned()))
    }

    /// Runs the pass with resets defaulting to initial values.
    pub fn apply(&self, program: &Program, ex: &ExcludeSet) -> Result<Program, ReduceError> {
        self.apply_with_reset(program, ex, &ResetEvaluation::initial(program))
    }

    pub fn apply_with_reset(
        &self,
        program: &Program,
        ex: &ExcludeSet,
        reset: &ResetEvaluation,
    ) -> Result<Program, ReduceError> {
        match *self {
            Pass::Identity => Ok(program.clone()),
            Pass::Rvo(mode) => rvo(program, reset, ex, mode),
            Pass::Rao => rao(program, ex),
            Pass::RvoRao(mode) => rao(&rvo(program, reset, ex, mode)?, ex),
        }
    }
}

impl fmt::Display for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pass::Identity => f.write_str("identity"),
            Pass::Rvo(m) => write!(f, "rvo-{m}"),
            Pass::Rao => f.write_str("rao"),
            Pass::RvoRao(m) => write!(f, "rvo-{m}+rao"),
        }
    }
}

impl FromStr for Pass {
    type Err = ReduceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pass::parse_with_mode(s, RvoMode::default())
    }
}
