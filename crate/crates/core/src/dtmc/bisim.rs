//! Probabilistic bisimulation by signature-based partition refinement.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use super::Dtmc;
use crate::scalar::Scalar;

/// Coarsest probabilistic bisimulation on the disjoint union of two chains.
///
/// Returns block ids for the states of `d1` followed by those of `d2`.
/// Blocks start as label classes and are split by the total probability
/// each state moves into every block, until no block splits.
pub fn quotient_blocks<P, L>(d1: &Dtmc<P>, d2: &Dtmc<P>, labels1: &[L], labels2: &[L]) -> Vec<usize>
where
    P: Scalar + Eq + Hash,
    L: Eq + Hash + Clone,
{
    let n1 = d1.state_count();
    let n = n1 + d2.state_count();
    let successors = |s: usize| -> Vec<(usize, P)> {
        if s < n1 {
            d1.transitions(s).to_vec()
        } else {
            d2.transitions(s - n1)
                .iter()
                .map(|(t, p)| (t + n1, p.clone()))
                .collect()
        }
    };
    let rows: Vec<Vec<(usize, P)>> = (0..n).map(successors).collect();

    let mut ids: HashMap<&L, usize> = HashMap::new();
    let mut block: Vec<usize> = labels1
        .iter()
        .chain(labels2)
        .map(|l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect();
    let mut count = ids.len();

    loop {
        let mut signatures: HashMap<(usize, Vec<(usize, P)>), usize> = HashMap::new();
        let refined: Vec<usize> = (0..n)
            .map(|s| {
                let mut into: BTreeMap<usize, P> = BTreeMap::new();
                for (t, p) in &rows[s] {
                    let entry = into.entry(block[*t]).or_insert_with(P::zero);
                    *entry = entry.clone() + p.clone();
                }
                let key = (block[s], into.into_iter().filter(|(_, p)| !p.is_zero()).collect());
                let next = signatures.len();
                *signatures.entry(key).or_insert(next)
            })
            .collect();
        let refined_count = signatures.len();
        block = refined;
        if refined_count == count {
            return block;
        }
        count = refined_count;
    }
}

/// Whether the initial states of two labelled chains are probabilistically
/// bisimilar.
pub fn check_bisimilar<P, L>(d1: &Dtmc<P>, d2: &Dtmc<P>, labels1: &[L], labels2: &[L]) -> bool
where
    P: Scalar + Eq + Hash,
    L: Eq + Hash + Clone,
{
    let blocks = quotient_blocks(d1, d2, labels1, labels2);
    blocks[d1.initial()] == blocks[d1.state_count() + d2.initial()]
}
