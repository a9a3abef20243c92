//! Independent reference implementations used to cross-check the library.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{One, Zero};

use pcfp_core::dtmc::Dtmc;
use pcfp_core::harness::{generate, GenParams};
use pcfp_core::ir::{Command, Program};

/// Generator settings for the shared random corpus: 100 small programs and
/// 60 medium ones.
pub fn corpus_params() -> Vec<GenParams> {
    (0..100)
        .map(GenParams::small)
        .chain((1000..1060).map(GenParams::medium))
        .collect()
}

pub fn corpus() -> Vec<(u64, Program)> {
    corpus_params().iter().map(|p| (p.seed, generate(p))).collect()
}

fn command_reads(c: &Command, cf: &str) -> BTreeSet<String> {
    let mut out = c.guard.vars();
    for u in &c.updates {
        out.extend(u.prob.vars());
        for a in &u.assigns {
            out.extend(a.expr.vars());
        }
    }
    out.remove(cf);
    out
}

fn command_writes(c: &Command) -> BTreeSet<String> {
    let sets: Vec<BTreeSet<String>> = c
        .updates
        .iter()
        .map(|u| u.assigns.iter().map(|a| a.target.clone()).collect())
        .collect();
    match sets.split_first() {
        None => BTreeSet::new(),
        Some((first, rest)) => first
            .iter()
            .filter(|v| rest.iter().all(|s| s.contains(*v)))
            .cloned()
            .collect(),
    }
}

fn command_succ(program: &Program, c: &Command) -> Vec<usize> {
    program
        .commands
        .iter()
        .enumerate()
        .filter(|(_, d)| c.updates.iter().any(|u| u.target == d.location))
        .map(|(i, _)| i)
        .collect()
}

/// One-step right-hand side of the liveness equations for command `pos`.
pub fn liveness_rhs(program: &Program, live: &[BTreeSet<String>], pos: usize) -> BTreeSet<String> {
    let c = &program.commands[pos];
    let w = command_writes(c);
    let mut out = command_reads(c, &program.cf_var);
    for s in command_succ(program, c) {
        out.extend(live[s].iter().filter(|v| !w.contains(*v)).cloned());
    }
    out
}

/// Least fixpoint by repeated full sweeps, starting from empty sets.
pub fn naive_liveness(program: &Program) -> Vec<BTreeSet<String>> {
    let mut live = vec![BTreeSet::new(); program.commands.len()];
    loop {
        let mut changed = false;
        for pos in 0..live.len() {
            let next = liveness_rhs(program, &live, pos);
            if next != live[pos] {
                live[pos] = next;
                changed = true;
            }
        }
        if !changed {
            return live;
        }
    }
}

fn gauss_jordan(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Vec<BigRational> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).find(|&r| !a[r][col].is_zero()).expect("regular system");
        a.swap(col, p);
        b.swap(col, p);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x = &*x * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pivot = a[col].clone();
                for (x, y) in a[r].iter_mut().zip(&pivot) {
                    *x -= &f * y;
                }
                let d = &f * &b[col];
                b[r] -= d;
            }
        }
    }
    b
}

/// Reachability within `k` rounds by one dense solve over all
/// (state, round) pairs.
pub fn product_reach(d: &Dtmc<BigRational>, target: &[bool], k: u32) -> BigRational {
    if k == 0 {
        return BigRational::zero();
    }
    let n = d.state_count();
    let k = k as usize;
    let idx = |s: usize, r: usize| r * n + s;
    let succ = |s: usize, r: usize| -> Vec<(Option<usize>, BigRational)> {
        d.transitions(s)
            .iter()
            .map(|(t, p)| {
                let r2 = if d.states()[*t].location == 0 { r + 1 } else { r };
                ((r2 < k).then(|| idx(*t, r2)), p.clone())
            })
            .collect()
    };
    let total = n * k;
    // Product states that can reach a target; all others have value 0.
    let mut can = vec![false; total];
    for r in 0..k {
        for s in 0..n {
            can[idx(s, r)] = target[s];
        }
    }
    loop {
        let mut changed = false;
        for r in 0..k {
            for s in 0..n {
                let i = idx(s, r);
                if !can[i]
                    && succ(s, r)
                        .iter()
                        .any(|(t, p)| !p.is_zero() && t.is_some_and(|t| can[t]))
                {
                    can[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    if !can[idx(d.initial(), 0)] {
        return BigRational::zero();
    }
    let unknowns: Vec<usize> = (0..total).filter(|&i| can[i]).collect();
    let pos: BTreeMap<usize, usize> = unknowns.iter().enumerate().map(|(j, &i)| (i, j)).collect();
    let m = unknowns.len();
    let mut a = vec![vec![BigRational::zero(); m]; m];
    let mut b = vec![BigRational::zero(); m];
    for (row, &i) in unknowns.iter().enumerate() {
        a[row][row] = BigRational::one();
        let (s, r) = (i % n, i / n);
        if target[s] {
            b[row] = BigRational::one();
            continue;
        }
        for (t, p) in succ(s, r) {
            if let Some(col) = t.and_then(|t| pos.get(&t)) {
                a[row][*col] -= p;
            }
        }
    }
    gauss_jordan(a, b)[pos[&idx(d.initial(), 0)]].clone()
}

/// Lower and upper bounds on reachability within `k` rounds from
/// enumerating every path of at most `depth` steps.
pub fn path_bounds(d: &Dtmc<BigRational>, target: &[bool], k: u32, depth: usize) -> (BigRational, BigRational) {
    let mut lower = BigRational::zero();
    let mut pending = BigRational::zero();
    // (state, round, probability of the path so far)
    let mut frontier = vec![(d.initial(), 0u32, BigRational::one())];
    for step in 0..=depth {
        let mut next = Vec::new();
        for (s, r, p) in frontier {
            if r >= k {
                continue;
            }
            if target[s] {
                lower += p;
                continue;
            }
            if step == depth {
                pending += p;
                continue;
            }
            for (t, q) in d.transitions(s) {
                let r2 = if d.states()[*t].location == 0 { r + 1 } else { r };
                next.push((*t, r2, &p * q));
            }
        }
        frontier = next;
    }
    let upper = &lower + pending;
    (lower, upper)
}
