//! Explicit-state Markov-chain semantics of programs.
//!
//! A state is a control-flow location together with a value for every
//! declared variable. In each state one of the enabled commands is picked
//! uniformly at random, then one of its stochastic updates fires with the
//! update's probability. States without enabled commands are deadlocks.

mod bisim;
mod reach;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::ir::{Env, EvalError, Expr, Program, Scope, VarEval};
use crate::scalar::{format_rational, Scalar};

pub use bisim::{check_bisimilar, quotient_blocks};
pub use reach::{
    bounded_reach, bounded_reach_in, bounded_reach_many, check_preservation, PreservationReport, PreservationRow,
    RoundBound,
};

pub const DEFAULT_MAX_STATES: usize = 10_000_000;

/// Proposition attached to states at location 0 by [`Dtmc::label_sets`].
pub const INITIAL_LOCATION_PROP: &str = "@initial-location";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DtmcError {
    #[error("state {state}, command {command}: `{var}` := {value} outside [{lo}..{hi}]")]
    OutOfRange {
        state: String,
        command: usize,
        var: String,
        value: i64,
        lo: i64,
        hi: i64,
    },
    #[error("state {state}, command {command}: update probabilities sum to {sum}, not 1")]
    Distribution { state: String, command: usize, sum: String },
    #[error("state space exceeds the limit of {max} states")]
    Capacity { max: usize },
    #[error("state {state}, command {command}: {source}")]
    Eval {
        state: String,
        command: usize,
        source: EvalError,
    },
    #[error("label: {0}")]
    Label(EvalError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub location: i64,
    /// Values in declaration order.
    pub values: Vec<i64>,
}

struct StateEnv<'a> {
    index: &'a HashMap<String, usize>,
    values: &'a [i64],
}

impl Env for StateEnv<'_> {
    fn value(&self, name: &str) -> Option<i64> {
        self.index.get(name).map(|&i| self.values[i])
    }
}

/// A finite Markov chain reachable from a single initial state.
#[derive(Debug, Clone)]
pub struct Dtmc<P> {
    cf_var: String,
    var_names: Vec<String>,
    states: Vec<State>,
    initial: usize,
    transitions: Vec<Vec<(usize, P)>>,
    deadlocks: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DtmcStats {
    pub states: usize,
    pub transitions: usize,
    pub deadlocks: usize,
}

impl<P: Scalar> Dtmc<P> {
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn transitions(&self, state: usize) -> &[(usize, P)] {
        &self.transitions[state]
    }

    pub fn deadlocks(&self) -> &[usize] {
        &self.deadlocks
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn stats(&self) -> DtmcStats {
        DtmcStats {
            states: self.states.len(),
            transitions: self.transitions.iter().map(Vec::len).sum(),
            deadlocks: self.deadlocks.len(),
        }
    }

    /// The variable evaluation of a state.
    pub fn eval_of(&self, state: usize) -> VarEval {
        self.var_names
            .iter()
            .cloned()
            .zip(self.states[state].values.iter().copied())
            .collect()
    }

    /// Renders a state as `(cf=0, x=0, y=0)`.
    pub fn describe(&self, state: usize) -> String {
        describe_state(&self.cf_var, &self.var_names, &self.states[state])
    }

    pub fn find(&self, location: i64, values: &[i64]) -> Option<usize> {
        self.states
            .iter()
            .position(|s| s.location == location && s.values == values)
    }

    /// Which states satisfy a boolean expression over variables and `cf`.
    pub fn satisfying(&self, expr: &Expr) -> Result<Vec<bool>, DtmcError> {
        let index: HashMap<String, usize> = self.var_names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        self.states
            .iter()
            .map(|s| {
                let env = StateEnv {
                    index: &index,
                    values: &s.values,
                };
                expr.eval_bool(&Scope::new(&env, &self.cf_var, s.location))
                    .map_err(DtmcError::Label)
            })
            .collect()
    }

    /// Per-state proposition sets for the given labels, optionally marking
    /// states at the initial location with [`INITIAL_LOCATION_PROP`].
    pub fn label_sets(
        &self,
        labels: &BTreeMap<String, Expr>,
        mark_initial_location: bool,
    ) -> Result<Vec<BTreeSet<String>>, DtmcError> {
        let mut out = vec![BTreeSet::new(); self.states.len()];
        for (name, expr) in labels {
            for (i, holds) in self.satisfying(expr)?.into_iter().enumerate() {
                if holds {
                    out[i].insert(name.clone());
                }
            }
        }
        if mark_initial_location {
            for (i, s) in self.states.iter().enumerate() {
                if s.location == 0 {
                    out[i].insert(INITIAL_LOCATION_PROP.to_owned());
                }
            }
        }
        Ok(out)
    }

    /// Converts the transition weights to another scalar type.
    pub fn map_scalar<Q: Scalar>(&self, f: impl Fn(&P) -> Q) -> Dtmc<Q> {
        Dtmc {
            cf_var: self.cf_var.clone(),
            var_names: self.var_names.clone(),
            states: self.states.clone(),
            initial: self.initial,
            transitions: self
                .transitions
                .iter()
                .map(|row| row.iter().map(|(t, p)| (*t, f(p))).collect())
                .collect(),
            deadlocks: self.deadlocks.clone(),
        }
    }
}

fn describe_state(cf_var: &str, names: &[String], state: &State) -> String {
    let mut parts = vec![format!("{cf_var}={}", state.location)];
    parts.extend(names.iter().zip(&state.values).map(|(n, v)| format!("{n}={v}")));
    format!("({})", parts.join(", "))
}

impl<P: Scalar> fmt::Display for Dtmc<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.transitions.iter().enumerate() {
            write!(f, "{i} {}", self.describe(i))?;
            if row.is_empty() {
                writeln!(f, " deadlock")?;
                continue;
            }
            writeln!(f)?;
            for (t, p) in row {
                writeln!(f, "  -> {t} [{}]", p.to_f64())?;
            }
        }
        Ok(())
    }
}

/// Breadth-first exploration of the reachable state space.
///
/// Probabilities are computed exactly and converted into `P` afterwards,
/// so distribution checks never depend on floating-point rounding.
pub fn build_dtmc<P: Scalar>(program: &Program, max_states: usize) -> Result<Dtmc<P>, DtmcError> {
    let var_names: Vec<String> = program.decls.iter().map(|d| d.name.clone()).collect();
    let index: HashMap<String, usize> = var_names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let mut by_location: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, c) in program.commands.iter().enumerate() {
        by_location.entry(c.location).or_default().push(i);
    }

    let initial = State {
        location: 0,
        values: program.decls.iter().map(|d| d.init).collect(),
    };
    let mut states = vec![initial.clone()];
    let mut lookup: HashMap<State, usize> = HashMap::from([(initial, 0)]);
    let mut transitions: Vec<Vec<(usize, BigRational)>> = Vec::new();
    let mut deadlocks = Vec::new();

    let mut next = 0;
    while next < states.len() {
        let state = states[next].clone();
        let describe = || describe_state(&program.cf_var, &var_names, &state);
        let env = StateEnv {
            index: &index,
            values: &state.values,
        };
        let scope = Scope::new(&env, &program.cf_var, state.location);

        let mut enabled = Vec::new();
        for &ci in by_location.get(&state.location).map(Vec::as_slice).unwrap_or(&[]) {
            let command = &program.commands[ci];
            let holds = command.guard.eval_bool(&scope).map_err(|source| DtmcError::Eval {
                state: describe(),
                command: command.id,
                source,
            })?;
            if holds {
                enabled.push(command);
            }
        }

        let mut row: Vec<(usize, BigRational)> = Vec::new();
        if enabled.is_empty() {
            deadlocks.push(next);
        }
        let choice = BigRational::new(1.into(), enabled.len().max(1).into());
        for command in &enabled {
            let eval_err = |source| DtmcError::Eval {
                state: describe(),
                command: command.id,
                source,
            };
            let mut sum = BigRational::zero();
            for update in &command.updates {
                let p = update.prob.eval_prob(&scope).map_err(eval_err)?;
                sum += &p;
                if p.is_zero() {
                    continue;
                }
                let mut values = state.values.clone();
                for a in &update.assigns {
                    let value = a.expr.eval_int(&scope).map_err(eval_err)?;
                    let slot = index[&a.target];
                    let decl = &program.decls[slot];
                    if !decl.contains(value) {
                        return Err(DtmcError::OutOfRange {
                            state: describe(),
                            command: command.id,
                            var: a.target.clone(),
                            value,
                            lo: decl.lo,
                            hi: decl.hi,
                        });
                    }
                    values[slot] = value;
                }
                let succ = State {
                    location: update.target,
                    values,
                };
                let target = match lookup.get(&succ) {
                    Some(&t) => t,
                    None => {
                        if states.len() >= max_states {
                            return Err(DtmcError::Capacity { max: max_states });
                        }
                        let t = states.len();
                        lookup.insert(succ.clone(), t);
                        states.push(succ);
                        t
                    }
                };
                let weight = p * &choice;
                match row.iter_mut().find(|(t, _)| *t == target) {
                    Some((_, w)) => *w += weight,
                    None => row.push((target, weight)),
                }
            }
            if !sum.is_one() {
                return Err(DtmcError::Distribution {
                    state: describe(),
                    command: command.id,
                    sum: format_rational(&sum),
                });
            }
        }
        transitions.push(row);
        next += 1;
    }

    Ok(Dtmc {
        cf_var: program.cf_var.clone(),
        var_names,
        states,
        initial: 0,
        transitions: transitions
            .into_iter()
            .map(|row| row.iter().map(|(t, p)| (*t, P::from_rational(p))).collect())
            .collect(),
        deadlocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_default;
    use crate::models::{BSP_MERGED_SOURCE, BSP_RESET_SOURCE, BSP_SOURCE};
    use crate::ExactDtmc;

    fn exact(src: &str) -> ExactDtmc {
        build_dtmc(&parse_default(src).unwrap(), DEFAULT_MAX_STATES).unwrap()
    }

    #[test]
    fn running_example_has_seven_states_and_one_deadlock() {
        let d = exact(BSP_SOURCE);
        assert_eq!(d.stats().states, 7);
        assert_eq!(d.deadlocks().len(), 1);
        assert_eq!(d.describe(d.deadlocks()[0]), "(cf=0, x=0, y=0)");
        assert_eq!(d.describe(d.initial()), "(cf=0, x=1, y=1)");
    }

    #[test]
    fn merged_example_has_five_states() {
        assert_eq!(exact(BSP_MERGED_SOURCE).stats().states, 5);
    }

    #[test]
    fn hand_reset_example_state_count() {
        // The hand-written reset variant keeps (cf=1, x=0, y=1) and
        // (cf=1, x=0, y=0) apart, so it has six states.
        assert_eq!(exact(BSP_RESET_SOURCE).stats().states, 6);
    }

    #[test]
    fn rows_sum_to_one() {
        let d = exact(BSP_SOURCE);
        for s in 0..d.state_count() {
            let row = d.transitions(s);
            if !row.is_empty() {
                let total: BigRational = row.iter().map(|(_, p)| p.clone()).sum();
                assert!(total.is_one());
            }
        }
    }

    #[test]
    fn unsatisfiable_initial_guard_gives_single_deadlock() {
        let d = exact("dtmc module m cf : [0..0] init 0; x : [0..1] init 0;\n [] cf=0 & x=1 -> 1:(cf'=0); endmodule");
        assert_eq!(
            d.stats(),
            DtmcStats {
                states: 1,
                transitions: 0,
                deadlocks: 1
            }
        );
    }

    #[test]
    fn uniform_choice_between_enabled_commands() {
        let d = exact(
            "dtmc module m cf : [0..2] init 0;\n [] cf=0 -> 1:(cf'=1); [] cf=0 -> 0.5:(cf'=2) + 0.5:(cf'=1);\n\
             [] cf=1 -> (cf'=1); [] cf=2 -> (cf'=2); endmodule",
        );
        let row = d.transitions(0);
        assert_eq!(row.len(), 2);
        assert_eq!(row[0].1, crate::scalar::ratio(3, 4));
        assert_eq!(row[1].1, crate::scalar::ratio(1, 4));
    }

    #[test]
    fn out_of_range_assignment_is_an_error() {
        let p = parse_default(
            "dtmc module m cf : [0..0] init 0; x : [0..1] init 0;\n [] cf=0 -> 1:(cf'=0)&(x'=x+1); endmodule",
        )
        .unwrap();
        let err = build_dtmc::<BigRational>(&p, 100).unwrap_err();
        assert!(matches!(err, DtmcError::OutOfRange { value: 2, .. }), "{err}");
        assert!(err.to_string().contains("(cf=0, x=1)"));
    }

    #[test]
    fn variable_distribution_must_sum_to_one() {
        let p = parse_default(
            "dtmc module m cf : [0..0] init 0; x : [0..2] init 1;\n [] cf=0 -> x/2:(cf'=0) + 1/4:(cf'=0); endmodule",
        )
        .unwrap();
        let err = build_dtmc::<BigRational>(&p, 100).unwrap_err();
        assert!(
            matches!(err, DtmcError::Distribution { ref sum, .. } if sum == "0.75"),
            "{err}"
        );
    }

    #[test]
    fn capacity_limit() {
        let p = parse_default(BSP_SOURCE).unwrap();
        assert_eq!(
            build_dtmc::<BigRational>(&p, 3).unwrap_err(),
            DtmcError::Capacity { max: 3 }
        );
    }

    #[test]
    fn float_chain_matches_exact_structure() {
        let p = parse_default(BSP_SOURCE).unwrap();
        let e: ExactDtmc = build_dtmc(&p, 100).unwrap();
        let f: crate::FloatDtmc = build_dtmc(&p, 100).unwrap();
        assert_eq!(e.states(), f.states());
        for s in 0..e.state_count() {
            for ((t1, p1), (t2, p2)) in e.transitions(s).iter().zip(f.transitions(s)) {
                assert_eq!(t1, t2);
                assert!((p1.to_f64() - p2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn labels_and_initial_location_marks() {
        let p = parse_default(BSP_SOURCE).unwrap();
        let d: ExactDtmc = build_dtmc(&p, 100).unwrap();
        let sets = d.label_sets(&p.labels, true).unwrap();
        let dead = d.deadlocks()[0];
        assert!(sets[dead].contains("fail"));
        assert!(sets[dead].contains(INITIAL_LOCATION_PROP));
        assert_eq!(sets.iter().filter(|s| s.contains("fail")).count(), 1);
    }
}
