mod common;

use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use pcfp_core::dtmc::{bounded_reach_many, build_dtmc, check_bisimilar, RoundBound, DEFAULT_MAX_STATES};
use pcfp_core::frontend::{parse_default, print};
use pcfp_core::harness::{generate, GenParams};
use pcfp_core::ir::Program;
use pcfp_core::reduce::{rao, rvo, ExcludeSet, Pass, ResetEvaluation, RvoMode};
use pcfp_core::{ExactDtmc, Scalar};

fn chain(p: &Program) -> ExactDtmc {
    build_dtmc(p, DEFAULT_MAX_STATES).unwrap()
}

fn fail_target(p: &Program, d: &ExactDtmc) -> Vec<bool> {
    d.satisfying(&p.labels["fail"]).unwrap()
}

fn ks(range: std::ops::RangeInclusive<u32>) -> Vec<RoundBound> {
    range.map(RoundBound).collect()
}

#[test]
fn layered_solver_matches_product_chain_oracle() {
    let mut checked = 0;
    for (seed, p) in common::corpus() {
        let d = chain(&p);
        if d.state_count() > 60 {
            continue;
        }
        let target = fail_target(&p, &d);
        let got = bounded_reach_many(&d, &target, &ks(0..=4));
        for (k, v) in got.iter().enumerate() {
            assert_eq!(*v, common::product_reach(&d, &target, k as u32), "seed {seed} k={k}");
        }
        checked += 1;
    }
    assert!(checked >= 100, "only {checked} chains checked");
}

#[test]
fn path_enumeration_brackets_small_chains() {
    let mut checked = 0;
    for (seed, p) in common::corpus() {
        let d = chain(&p);
        if d.state_count() > 12 {
            continue;
        }
        let target = fail_target(&p, &d);
        for k in 0..=3u32 {
            let exact = bounded_reach_many(&d, &target, &[RoundBound(k)]).remove(0);
            let (lo, hi) = common::path_bounds(&d, &target, k, 12);
            assert!(lo <= exact && exact <= hi, "seed {seed} k={k}: {lo} <= {exact} <= {hi}");
        }
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} chains checked");
}

#[test]
fn rows_are_distributions_and_exploration_is_deterministic() {
    for (seed, p) in common::corpus() {
        let d = chain(&p);
        for s in 0..d.state_count() {
            let row = d.transitions(s);
            if row.is_empty() {
                assert!(d.deadlocks().contains(&s));
                continue;
            }
            let total = row.iter().fold(BigRational::zero(), |acc, (_, q)| acc + q);
            assert!(total.is_one(), "seed {seed} state {s} sums to {total}");
        }
        assert_eq!(chain(&p).states(), d.states(), "seed {seed}");
    }
}

#[test]
fn monotone_in_k_and_zero_at_zero() {
    for (seed, p) in common::corpus() {
        let d = chain(&p);
        let values = bounded_reach_many(&d, &fail_target(&p, &d), &ks(0..=6));
        assert!(values[0].is_zero(), "seed {seed}");
        for w in values.windows(2) {
            assert!(w[0] <= w[1], "seed {seed}");
        }
        assert!(values[6] <= BigRational::one());
    }
}

#[test]
fn floating_point_chains_track_exact_values() {
    for (seed, p) in common::corpus().into_iter().take(60) {
        let d = chain(&p);
        let target = fail_target(&p, &d);
        let exact = bounded_reach_many(&d, &target, &ks(1..=3));
        let approx = bounded_reach_many(&d.map_scalar(|q| q.to_f64()), &target, &ks(1..=3));
        for (e, a) in exact.iter().zip(approx) {
            assert!((e.to_f64() - a).abs() < 1e-9, "seed {seed}");
        }
    }
}

#[test]
fn rvo_is_idempotent() {
    for (seed, p) in common::corpus() {
        let ex = ExcludeSet::with_label_vars(&p, Vec::<String>::new());
        let reset = ResetEvaluation::initial(&p);
        for mode in [RvoMode::AsWritten, RvoMode::Aggressive] {
            let once = rvo(&p, &reset, &ex, mode).unwrap();
            let twice = rvo(&once, &reset, &ex, mode).unwrap();
            assert_eq!(once, twice, "seed {seed} {mode}");
        }
    }
}

#[test]
fn rao_is_idempotent() {
    for (seed, p) in common::corpus() {
        let ex = ExcludeSet::with_label_vars(&p, Vec::<String>::new());
        let once = rao(&p, &ex).unwrap();
        let twice = rao(&once, &ex).unwrap();
        assert_eq!(once, twice, "seed {seed}");
    }
}

#[test]
fn reduced_programs_are_well_formed_and_print_faithfully() {
    for (seed, p) in common::corpus() {
        let ex = ExcludeSet::with_label_vars(&p, Vec::<String>::new());
        for pass in Pass::ALL {
            let r = pass.apply(&p, &ex).unwrap();
            assert!(r.well_formed().is_empty(), "seed {seed} {pass}: {:?}", r.well_formed());
            assert_eq!(parse_default(&print(&r)).unwrap(), r, "seed {seed} {pass}");
        }
    }
}

#[test]
fn bisimilarity_implies_preservation() {
    let bounds = ks(1..=5);
    for (seed, p) in common::corpus() {
        let ex = ExcludeSet::with_label_vars(&p, Vec::<String>::new());
        let d1 = chain(&p);
        let l1 = d1.label_sets(&p.labels, true).unwrap();
        let v1 = bounded_reach_many(&d1, &fail_target(&p, &d1), &bounds);
        for pass in Pass::ALL {
            let r = pass.apply(&p, &ex).unwrap();
            let d2 = chain(&r);
            let l2 = d2.label_sets(&r.labels, true).unwrap();
            if check_bisimilar(&d1, &d2, &l1, &l2) {
                let v2 = bounded_reach_many(&d2, &fail_target(&r, &d2), &bounds);
                assert_eq!(v1, v2, "seed {seed} {pass}");
            }
        }
    }
}

#[test]
fn excluded_variables_keep_their_declarations() {
    for (seed, p) in common::corpus() {
        let ex = ExcludeSet::with_label_vars(&p, Vec::<String>::new());
        for pass in Pass::ALL {
            let r = pass.apply(&p, &ex).unwrap();
            for v in ex.iter() {
                assert_eq!(r.decl(v), p.decl(v), "seed {seed} {pass} {v}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_pass_preserves_reachability(seed in 0u64..1_000_000, medium in any::<bool>()) {
        let params = if medium { GenParams::medium(seed) } else { GenParams::small(seed) };
        let p = generate(&params);
        let d = build_dtmc::<BigRational>(&p, 20_000);
        prop_assume!(d.is_ok() && d.as_ref().unwrap().state_count() <= 400);
        let d = d.unwrap();
        let bounds = ks(1..=3);
        let reference = bounded_reach_many(&d, &fail_target(&p, &d), &bounds);
        let ex = ExcludeSet::with_label_vars(&p, Vec::<String>::new());
        for pass in Pass::ALL {
            let r = pass.apply(&p, &ex).unwrap();
            let dr = chain(&r);
            prop_assert_eq!(&bounded_reach_many(&dr, &fail_target(&r, &dr), &bounds), &reference, "{}", pass);
        }
    }

    #[test]
    fn generation_is_reproducible(seed in any::<u64>()) {
        let params = GenParams::medium(seed);
        prop_assert_eq!(generate(&params), generate(&params));
    }
}
