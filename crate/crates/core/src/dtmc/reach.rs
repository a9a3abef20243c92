//! Round-bounded reachability.
//!
//! Rounds count returns to location 0: the initial state is in round 0 and
//! every transition entering location 0 starts the next round. A path
//! satisfies "reach within k rounds" if it visits a target state while its
//! round index is below k.
//!
//! With `j` rounds remaining, the value of a state is 1 on targets and
//! otherwise the expectation over successors, where successors at location 0
//! are valued with `j - 1` rounds remaining. Each round layer is a linear
//! system over the transitions that stay away from location 0; it is solved
//! one strongly connected component at a time, sinks first, and the
//! elimination for each component is shared by all rounds.

use std::collections::HashMap;

use num_rational::BigRational;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use super::{build_dtmc, Dtmc, DtmcError};
use crate::ir::{Expr, Program};
use crate::linalg::FixpointFactors;
use crate::scalar::{format_rational, Scalar};

/// Number of rounds `k` in "reach within k rounds".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RoundBound(pub u32);

/// Exact probability of reaching `label` within `bound` rounds.
pub fn bounded_reach(
    program: &Program,
    label: &Expr,
    bound: RoundBound,
    max_states: usize,
) -> Result<BigRational, DtmcError> {
    let dtmc: Dtmc<BigRational> = build_dtmc(program, max_states)?;
    let target = dtmc.satisfying(label)?;
    Ok(bounded_reach_in(&dtmc, &target, bound))
}

/// Reachability probability from the initial state of an explored chain.
pub fn bounded_reach_in<P: Scalar>(dtmc: &Dtmc<P>, target: &[bool], bound: RoundBound) -> P {
    bounded_reach_many(dtmc, target, &[bound]).pop().unwrap_or_else(P::zero)
}

/// Probabilities for several bounds, sharing the per-round work.
pub fn bounded_reach_many<P: Scalar>(dtmc: &Dtmc<P>, target: &[bool], bounds: &[RoundBound]) -> Vec<P> {
    let max = bounds.iter().map(|b| b.0).max().unwrap_or(0);
    let layers = RoundLayers::new(dtmc, target);
    let mut by_remaining = vec![vec![P::zero(); dtmc.state_count()]];
    for _ in 0..max {
        let previous = by_remaining.last().expect("nonempty");
        let next = layers.solve_layer(previous);
        by_remaining.push(next);
    }
    bounds
        .iter()
        .map(|b| by_remaining[b.0 as usize][dtmc.initial()].clone())
        .collect()
}

/// Where a transition out of an unknown state leads.
enum Exit<P> {
    /// Into location 0, valued with one round less remaining.
    NextRound(usize, P),
    /// To a state whose value in this round is known by the time the
    /// component is solved.
    Settled(usize, P),
}

/// Unknown states of one component and their factored equations.
struct ComponentSystem<P> {
    unknowns: Vec<usize>,
    exits: Vec<Vec<Exit<P>>>,
    factors: FixpointFactors<P>,
}

/// The within-round equations, factored once and solved for each round.
struct RoundLayers<P> {
    n: usize,
    /// Per component in solving order (sinks first); states not listed as
    /// unknowns are settled up front.
    systems: Vec<ComponentSystem<P>>,
    /// Values that hold in every round: 1 on targets, 0 on states that can
    /// neither reach a target nor leave the round.
    fixed: Vec<Option<P>>,
}

fn enters_new_round<P: Scalar>(dtmc: &Dtmc<P>, state: usize) -> bool {
    dtmc.states()[state].location == 0
}

impl<P: Scalar> RoundLayers<P> {
    fn new(dtmc: &Dtmc<P>, target: &[bool]) -> Self {
        let n = dtmc.state_count();
        let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
        let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut productive = vec![false; n];
        let mut stack = Vec::new();
        for s in 0..n {
            if target[s] {
                productive[s] = true;
                stack.push(s);
                continue;
            }
            for (t, p) in dtmc.transitions(s) {
                if p.is_zero() {
                    continue;
                }
                if enters_new_round(dtmc, *t) {
                    if !productive[s] {
                        productive[s] = true;
                        stack.push(s);
                    }
                } else {
                    graph.add_edge(nodes[s], nodes[*t], ());
                    reverse[*t].push(s);
                }
            }
        }
        while let Some(t) = stack.pop() {
            for &s in &reverse[t] {
                if !productive[s] {
                    productive[s] = true;
                    stack.push(s);
                }
            }
        }
        let fixed: Vec<Option<P>> = (0..n)
            .map(|s| {
                if target[s] {
                    Some(P::one())
                } else if !productive[s] {
                    Some(P::zero())
                } else {
                    None
                }
            })
            .collect();

        let mut systems = Vec::new();
        for component in tarjan_scc(&graph) {
            let unknowns: Vec<usize> = component
                .into_iter()
                .map(|v| v.index())
                .filter(|&s| fixed[s].is_none())
                .collect();
            if unknowns.is_empty() {
                continue;
            }
            let local: HashMap<usize, usize> = unknowns.iter().enumerate().map(|(i, &s)| (s, i)).collect();
            let mut coefficients = vec![Vec::new(); unknowns.len()];
            let mut exits = Vec::with_capacity(unknowns.len());
            for (row, &s) in unknowns.iter().enumerate() {
                let mut out = Vec::new();
                for (t, p) in dtmc.transitions(s) {
                    if enters_new_round(dtmc, *t) {
                        out.push(Exit::NextRound(*t, p.clone()));
                    } else if let Some(&col) = local.get(t) {
                        coefficients[row].push((col, p.clone()));
                    } else {
                        out.push(Exit::Settled(*t, p.clone()));
                    }
                }
                exits.push(out);
            }
            let factors = FixpointFactors::new(coefficients)
                .expect("states that can leave their component give a regular system");
            systems.push(ComponentSystem {
                unknowns,
                exits,
                factors,
            });
        }
        RoundLayers { n, systems, fixed }
    }

    /// Values with one more round remaining than `next_round`.
    fn solve_layer(&self, next_round: &[P]) -> Vec<P> {
        let mut value: Vec<P> = (0..self.n)
            .map(|s| self.fixed[s].clone().unwrap_or_else(P::zero))
            .collect();
        for system in &self.systems {
            let rhs: Vec<P> = system
                .exits
                .iter()
                .map(|exits| {
                    exits.iter().fold(P::zero(), |acc, exit| match exit {
                        Exit::NextRound(t, p) => acc + p.clone() * next_round[*t].clone(),
                        Exit::Settled(t, p) => acc + p.clone() * value[*t].clone(),
                    })
                })
                .collect();
            for (&s, v) in system.unknowns.iter().zip(system.factors.solve(rhs)) {
                value[s] = v;
            }
        }
        value
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreservationRow {
    pub k: u32,
    #[serde(serialize_with = "serialize_rational")]
    pub original: BigRational,
    #[serde(serialize_with = "serialize_rational")]
    pub reduced: BigRational,
    pub equal: bool,
}

/// Per-bound comparison of two programs' reachability probabilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreservationReport {
    pub rows: Vec<PreservationRow>,
    pub pass: bool,
}

fn serialize_rational<S: serde::Serializer>(value: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(value))
}

/// Compares `Pr[reach label within k rounds]` of two programs for each `k`.
pub fn check_preservation(
    original: &Program,
    reduced: &Program,
    label: &Expr,
    ks: &[RoundBound],
    max_states: usize,
) -> Result<PreservationReport, DtmcError> {
    let probabilities = |program: &Program| -> Result<Vec<BigRational>, DtmcError> {
        let dtmc: Dtmc<BigRational> = build_dtmc(program, max_states)?;
        let target = dtmc.satisfying(label)?;
        Ok(bounded_reach_many(&dtmc, &target, ks))
    };
    let left = probabilities(original)?;
    let right = probabilities(reduced)?;
    let rows: Vec<PreservationRow> = ks
        .iter()
        .zip(left.into_iter().zip(right))
        .map(|(k, (o, r))| PreservationRow {
            k: k.0,
            equal: o == r,
            original: o,
            reduced: r,
        })
        .collect();
    let pass = rows.iter().all(|r| r.equal);
    Ok(PreservationReport { rows, pass })
}
