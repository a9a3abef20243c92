//! Command-level live range analysis.
//!
//! A variable is live at a command if some control-flow path starting at the
//! command may read it before every update along the path has overwritten it.
//! Liveness is tracked per command, not per variable evaluation, so it is a
//! conservative approximation of semantic liveness.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::ir::{Command, Program};

pub type VarSet = BTreeSet<String>;

/// Variables read by `c`: in its guard, any probability, or any
/// assignment right-hand side. Never contains the control-flow variable.
pub fn reads(c: &Command, cf_var: &str) -> VarSet {
    let mut out = c.guard.vars();
    for u in &c.updates {
        u.prob.collect_vars(&mut out);
        for a in &u.assigns {
            a.expr.collect_vars(&mut out);
        }
    }
    out.remove(cf_var);
    out
}

/// Variables assigned in every stochastic update of `c`.
pub fn writes(c: &Command) -> VarSet {
    let mut updates = c.updates.iter();
    let Some(first) = updates.next() else {
        return VarSet::new();
    };
    let mut out: VarSet = first.assigned().map(str::to_owned).collect();
    for u in updates {
        out.retain(|v| u.assignment(v).is_some());
    }
    out
}

pub fn cf_of(c: &Command) -> i64 {
    c.location
}

/// Successor and predecessor relation between commands, by position in
/// `Program::commands`.
#[derive(Debug, Clone)]
pub struct ControlFlow {
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

impl ControlFlow {
    pub fn new(program: &Program) -> Self {
        let mut by_location: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, c) in program.commands.iter().enumerate() {
            by_location.entry(c.location).or_default().push(i);
        }
        let n = program.commands.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for (i, c) in program.commands.iter().enumerate() {
            let targets: BTreeSet<i64> = c.updates.iter().map(|u| u.target).collect();
            let mut next: Vec<usize> = targets
                .iter()
                .filter_map(|t| by_location.get(t))
                .flatten()
                .copied()
                .collect();
            next.sort_unstable();
            for &j in &next {
                pred[j].push(i);
            }
            succ[i] = next;
        }
        ControlFlow { succ, pred }
    }

    pub fn succ(&self, pos: usize) -> &[usize] {
        &self.succ[pos]
    }

    pub fn pred(&self, pos: usize) -> &[usize] {
        &self.pred[pos]
    }
}

/// Live variables per command, keyed by command id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LivenessMap {
    ids: Vec<usize>,
    live: Vec<VarSet>,
}

impl LivenessMap {
    /// Live set of the command with the given id.
    pub fn get(&self, id: usize) -> Option<&VarSet> {
        self.ids.iter().position(|&i| i == id).map(|p| &self.live[p])
    }

    /// Live set by position in `Program::commands`.
    pub fn at(&self, pos: usize) -> &VarSet {
        &self.live[pos]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &VarSet)> {
        self.ids.iter().copied().zip(self.live.iter())
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    /// Union of the live sets of all commands enabled at `location`.
    pub fn at_location(&self, program: &Program, location: i64) -> VarSet {
        self.union_of(
            program
                .commands
                .iter()
                .enumerate()
                .filter(|(_, c)| c.location == location)
                .map(|(i, _)| i),
        )
    }

    /// Union of the live sets of the given command positions.
    pub fn union_of(&self, positions: impl IntoIterator<Item = usize>) -> VarSet {
        let mut out = VarSet::new();
        for p in positions {
            out.extend(self.live[p].iter().cloned());
        }
        out
    }

    pub fn into_map(self) -> BTreeMap<usize, VarSet> {
        self.ids.into_iter().zip(self.live).collect()
    }
}

/// Worklist live range analysis, picking commands first-in first-out.
pub fn lra(program: &Program) -> LivenessMap {
    lra_with_picker(program, |_| 0)
}

/// Worklist live range analysis with a caller-chosen pick order.
/// `pick` receives the pending commands (positions, in insertion order) and
/// returns the index of the one to process next.
pub fn lra_with_picker(program: &Program, mut pick: impl FnMut(&[usize]) -> usize) -> LivenessMap {
    let cf = ControlFlow::new(program);
    let n = program.commands.len();
    let writes: Vec<VarSet> = program.commands.iter().map(writes).collect();
    let mut live: Vec<VarSet> = program.commands.iter().map(|c| reads(c, &program.cf_var)).collect();

    let mut pending: VecDeque<usize> = (0..n).collect();
    let mut queued = vec![true; n];
    while !pending.is_empty() {
        let slice = pending.make_contiguous();
        let idx = pick(slice).min(slice.len() - 1);
        let Some(current) = pending.remove(idx) else {
            break;
        };
        queued[current] = false;
        for &p in cf.pred(current) {
            let added: Vec<String> = live[current]
                .iter()
                .filter(|v| !writes[p].contains(*v) && !live[p].contains(*v))
                .cloned()
                .collect();
            if !added.is_empty() {
                live[p].extend(added);
                if !queued[p] {
                    queued[p] = true;
                    pending.push_back(p);
                }
            }
        }
    }
    LivenessMap {
        ids: program.commands.iter().map(|c| c.id).collect(),
        live,
    }
}
