//! Random program generation and batch preservation campaigns.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dtmc::{bounded_reach_many, build_dtmc, check_bisimilar, Dtmc, PreservationRow, RoundBound};
use crate::frontend::print;
use crate::ir::{ArithOp, Assignment, CmpOp, Command, Expr, Program, StochUpdate, VarDecl};
use crate::reduce::{ExcludeSet, Pass};
use crate::scalar::ratio;

/// Name of the flag variable set when a generated program fails.
pub const FAIL_FLAG: &str = "err";

/// Shape of a generated program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GenParams {
    pub seed: u64,
    pub num_locations: usize,
    /// Program variables besides the failure flag; at least 2.
    pub num_vars: usize,
    pub commands_per_location: usize,
    pub max_branching: usize,
    /// Probabilities are multiples of `1 / prob_denominator`.
    pub prob_denominator: u32,
    /// Variables range over `[0..domain_max]`.
    pub domain_max: i64,
}

impl GenParams {
    /// Small programs whose shape varies with the seed: up to five
    /// locations and four variables over `[0..1]` or `[0..2]`.
    pub fn small(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
        GenParams {
            seed,
            num_locations: rng.gen_range(2..=5),
            num_vars: rng.gen_range(2..=4),
            commands_per_location: rng.gen_range(1..=2),
            max_branching: rng.gen_range(1..=3),
            prob_denominator: *[2u32, 4, 5, 10].choose(&mut rng).expect("nonempty"),
            domain_max: rng.gen_range(1..=2),
        }
    }

    /// Larger programs: three to five locations and variables, two or three
    /// commands per location and branching of two or three.
    pub fn medium(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3ed1_0000);
        GenParams {
            seed,
            num_locations: rng.gen_range(3..=5),
            num_vars: rng.gen_range(3..=5),
            commands_per_location: rng.gen_range(2..=3),
            max_branching: rng.gen_range(2..=3),
            prob_denominator: *[4u32, 5, 10].choose(&mut rng).expect("nonempty"),
            domain_max: rng.gen_range(1..=2),
        }
    }

    fn normalized(&self) -> GenParams {
        GenParams {
            seed: self.seed,
            num_locations: self.num_locations.max(1),
            num_vars: self.num_vars.max(2),
            commands_per_location: self.commands_per_location.max(1),
            max_branching: self.max_branching.max(1),
            prob_denominator: self.prob_denominator.max(1),
            domain_max: self.domain_max.max(1),
        }
    }
}

struct Generator {
    rng: ChaCha8Rng,
    params: GenParams,
    /// Variables readable anywhere.
    regular: Vec<String>,
    /// Written on every update entering `scratch_location`, read only there.
    scratch: Option<String>,
    scratch_location: i64,
    /// Written but never read.
    unread: String,
}

/// Deterministic random program for the given parameters.
///
/// Every program declares a failure flag `err`, labelled `fail`, plus one
/// variable that is never read and (with three or more variables) one that
/// is overwritten before each read.
pub fn generate(params: &GenParams) -> Program {
    let params = params.normalized();
    let n = params.num_vars;
    let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let (regular, scratch, unread) = if n >= 3 {
        (
            names[..n - 2].to_vec(),
            Some(names[n - 2].clone()),
            names[n - 1].clone(),
        )
    } else {
        (names[..n - 1].to_vec(), None, names[n - 1].clone())
    };
    let scratch_location = if params.num_locations > 1 { 1 } else { 0 };
    let mut g = Generator {
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        params,
        regular,
        scratch,
        scratch_location,
        unread,
    };
    g.program(names)
}

impl Generator {
    fn program(&mut self, names: Vec<String>) -> Program {
        let hi = self.params.domain_max;
        let mut decls: Vec<VarDecl> = names
            .iter()
            .map(|n| VarDecl::new(n, 0, hi, self.rng.gen_range(0..=hi)))
            .collect();
        decls.push(VarDecl::new(FAIL_FLAG, 0, 1, 0));

        let mut commands = Vec::new();
        for location in 0..self.params.num_locations as i64 {
            for _ in 0..self.params.commands_per_location {
                let id = commands.len();
                commands.push(self.command(id, location));
            }
        }
        let labels = BTreeMap::from([("fail".to_owned(), Expr::eq(Expr::var(FAIL_FLAG), Expr::Int(1)))]);
        Program {
            module_name: format!("gen{}", self.params.seed),
            cf_var: "cf".to_owned(),
            cf_domain: (0, self.params.num_locations as i64 - 1),
            decls,
            commands,
            labels,
        }
    }

    fn readable_at(&self, location: i64) -> Vec<String> {
        let mut vars = self.regular.clone();
        if location == self.scratch_location {
            vars.extend(self.scratch.clone());
        }
        vars
    }

    fn command(&mut self, id: usize, location: i64) -> Command {
        let hi = self.params.domain_max;
        let readable = self.readable_at(location);
        let mut fixed: BTreeMap<String, i64> = BTreeMap::new();
        let mut conjuncts = Vec::new();
        for _ in 0..self.rng.gen_range(0..=2) {
            let var = readable.choose(&mut self.rng).expect("some readable variable").clone();
            if fixed.contains_key(&var) {
                continue;
            }
            let value = self.rng.gen_range(0..=hi);
            let op = match self.rng.gen_range(0..10) {
                0 => CmpOp::Ne,
                1 => CmpOp::Le,
                _ => {
                    fixed.insert(var.clone(), value);
                    CmpOp::Eq
                }
            };
            conjuncts.push(Expr::cmp(op, Expr::var(var), Expr::Int(value)));
        }
        if location == 0 && self.rng.gen_bool(0.2) {
            conjuncts.push(Expr::eq(Expr::var(FAIL_FLAG), Expr::Int(0)));
        }

        let den = self.params.prob_denominator;
        let branches = self.rng.gen_range(1..=self.params.max_branching).min(den as usize);
        let probs = self.probabilities(branches, &readable);
        let updates = probs
            .into_iter()
            .map(|prob| {
                let target = self.rng.gen_range(0..self.params.num_locations as i64);
                let assigns = self.assignments(target, &readable, &fixed);
                StochUpdate::new(prob, target, assigns)
            })
            .collect();
        Command {
            id,
            location,
            guard: Expr::conjunction(conjuncts),
            updates,
        }
    }

    fn probabilities(&mut self, branches: usize, readable: &[String]) -> Vec<Expr> {
        let hi = self.params.domain_max;
        if branches == 2 && self.rng.gen_bool(0.2) {
            let v = readable.choose(&mut self.rng).expect("some readable variable");
            return vec![
                Expr::ratio(Expr::var(v), Expr::Int(hi)),
                Expr::ratio(Expr::arith(ArithOp::Sub, Expr::Int(hi), Expr::var(v)), Expr::Int(hi)),
            ];
        }
        let den = self.params.prob_denominator as i64;
        // Random composition of `den` into `branches` positive parts.
        let mut cuts: BTreeSet<i64> = BTreeSet::new();
        let all: Vec<i64> = (1..den).collect();
        for c in all.choose_multiple(&mut self.rng, branches - 1) {
            cuts.insert(*c);
        }
        let mut bounds = vec![0];
        bounds.extend(cuts);
        bounds.push(den);
        bounds.windows(2).map(|w| Expr::Prob(ratio(w[1] - w[0], den))).collect()
    }

    fn assignments(&mut self, target: i64, readable: &[String], fixed: &BTreeMap<String, i64>) -> Vec<Assignment> {
        let hi = self.params.domain_max;
        let mut out = Vec::new();
        for var in self.regular.clone() {
            if !self.rng.gen_bool(0.35) {
                continue;
            }
            let expr = match self.rng.gen_range(0..4) {
                0 | 1 => Expr::Int(self.rng.gen_range(0..=hi)),
                2 => {
                    let src = readable.choose(&mut self.rng).expect("some readable variable");
                    Expr::var(src)
                }
                _ => {
                    let incrementable: Vec<(&String, &i64)> = fixed.iter().filter(|(_, v)| **v < hi).collect();
                    match incrementable.choose(&mut self.rng) {
                        Some((src, _)) => Expr::arith(ArithOp::Add, Expr::var(*src), Expr::Int(1)),
                        None => Expr::Int(self.rng.gen_range(0..=hi)),
                    }
                }
            };
            out.push(Assignment::new(var, expr));
        }
        if let Some(scratch) = self.scratch.clone() {
            if target == self.scratch_location || self.rng.gen_bool(0.2) {
                let expr = if self.rng.gen_bool(0.5) {
                    Expr::Int(self.rng.gen_range(0..=hi))
                } else {
                    Expr::var(self.regular.choose(&mut self.rng).expect("some regular variable"))
                };
                out.push(Assignment::new(scratch, expr));
            }
        }
        if self.rng.gen_bool(0.4) {
            out.push(Assignment::new(
                self.unread.clone(),
                Expr::Int(self.rng.gen_range(0..=hi)),
            ));
        }
        match self.rng.gen_range(0..20) {
            0..=2 => out.push(Assignment::new(FAIL_FLAG, Expr::Int(1))),
            3 => out.push(Assignment::new(FAIL_FLAG, Expr::Int(0))),
            _ => {}
        }
        out
    }
}

/// One program and pass in a campaign.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseReport {
    pub name: String,
    pub seed: Option<u64>,
    pub pass: String,
    pub original_states: usize,
    pub reduced_states: usize,
    pub original_variables: usize,
    pub reduced_variables: usize,
    /// Original over reduced state count.
    pub factor: f64,
    pub preservation: Vec<PreservationRow>,
    pub bisimilar: bool,
    pub ok: bool,
    pub error: Option<String>,
    /// Source of the original program, kept for failing cases only.
    pub program: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CampaignSummary {
    pub cases: usize,
    pub passed: usize,
    pub preservation_failures: usize,
    pub bisimulation_failures: usize,
    pub errors: usize,
    /// Cases where the pass removed at least one state.
    pub reduced_cases: usize,
    pub mean_factor: f64,
    pub max_factor: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CampaignReport {
    pub seeds: Vec<u64>,
    pub passes: Vec<String>,
    pub ks: Vec<u32>,
    pub cases: Vec<CaseReport>,
    pub summary: CampaignSummary,
}

impl CampaignReport {
    pub fn all_passed(&self) -> bool {
        self.summary.passed == self.summary.cases
    }
}

/// A named program to run through a campaign.
#[derive(Debug, Clone)]
pub struct CampaignInput {
    pub name: String,
    pub seed: Option<u64>,
    pub program: Program,
}

/// Generates one program per parameter set and runs every pass on it.
pub fn campaign(params: &[GenParams], passes: &[Pass], ks: &[RoundBound], max_states: usize) -> CampaignReport {
    let inputs: Vec<CampaignInput> = params
        .iter()
        .map(|p| CampaignInput {
            name: format!("seed-{}", p.seed),
            seed: Some(p.seed),
            program: generate(p),
        })
        .collect();
    campaign_programs(&inputs, passes, ks, max_states)
}

/// Runs every pass on every program, checking each reachability label of the
/// program for every bound, and bisimilarity of the initial states.
///
/// Label variables are always excluded. Cases run in parallel; the report
/// is ordered by input, then by pass.
pub fn campaign_programs(
    inputs: &[CampaignInput],
    passes: &[Pass],
    ks: &[RoundBound],
    max_states: usize,
) -> CampaignReport {
    let cases: Vec<CaseReport> = inputs
        .par_iter()
        .flat_map_iter(|input| run_program(input, passes, ks, max_states))
        .collect();

    let mut summary = CampaignSummary {
        cases: cases.len(),
        ..CampaignSummary::default()
    };
    let mut factor_sum = 0.0;
    for c in &cases {
        if c.ok {
            summary.passed += 1;
        }
        if c.error.is_some() {
            summary.errors += 1;
            continue;
        }
        if c.preservation.iter().any(|r| !r.equal) {
            summary.preservation_failures += 1;
        }
        if !c.bisimilar {
            summary.bisimulation_failures += 1;
        }
        if c.reduced_states < c.original_states {
            summary.reduced_cases += 1;
        }
        factor_sum += c.factor;
        summary.max_factor = summary.max_factor.max(c.factor);
    }
    let measured = cases.len() - summary.errors;
    if measured > 0 {
        summary.mean_factor = factor_sum / measured as f64;
    }

    let mut seeds: Vec<u64> = inputs.iter().filter_map(|i| i.seed).collect();
    seeds.sort_unstable();
    CampaignReport {
        seeds,
        passes: passes.iter().map(Pass::to_string).collect(),
        ks: ks.iter().map(|k| k.0).collect(),
        cases,
        summary,
    }
}

fn run_program(input: &CampaignInput, passes: &[Pass], ks: &[RoundBound], max_states: usize) -> Vec<CaseReport> {
    let program = &input.program;
    let failed = |pass: &Pass, error: String| CaseReport {
        name: input.name.clone(),
        seed: input.seed,
        pass: pass.to_string(),
        original_states: 0,
        reduced_states: 0,
        original_variables: program.decls.len(),
        reduced_variables: 0,
        factor: 0.0,
        preservation: Vec::new(),
        bisimilar: false,
        ok: false,
        error: Some(error),
        program: Some(print(program)),
    };
    let original = match Analysed::new(program, ks, max_states) {
        Ok(a) => a,
        Err(e) => return passes.iter().map(|p| failed(p, e.clone())).collect(),
    };
    let ex = ExcludeSet::with_label_vars(program, Vec::<String>::new());
    passes
        .iter()
        .map(|pass| {
            let reduced_program = match pass.apply(program, &ex) {
                Ok(r) => r,
                Err(e) => return failed(pass, e.to_string()),
            };
            let reduced = match Analysed::new(&reduced_program, ks, max_states) {
                Ok(a) => a,
                Err(e) => return failed(pass, e),
            };
            let mut preservation = Vec::new();
            for (label, values) in &original.reach {
                let Some(other) = reduced.reach.get(label) else {
                    return failed(pass, format!("label \"{label}\" missing after reduction"));
                };
                for ((k, o), r) in ks.iter().zip(values).zip(other) {
                    preservation.push(PreservationRow {
                        k: k.0,
                        original: o.clone(),
                        reduced: r.clone(),
                        equal: o == r,
                    });
                }
            }
            let bisimilar = check_bisimilar(&original.dtmc, &reduced.dtmc, &original.labels, &reduced.labels);
            let ok = bisimilar && preservation.iter().all(|r| r.equal);
            let (o, r) = (original.dtmc.state_count(), reduced.dtmc.state_count());
            CaseReport {
                name: input.name.clone(),
                seed: input.seed,
                pass: pass.to_string(),
                original_states: o,
                reduced_states: r,
                original_variables: program.decls.len(),
                reduced_variables: reduced_program.decls.len(),
                factor: o as f64 / r as f64,
                preservation,
                bisimilar,
                ok,
                error: None,
                program: (!ok).then(|| print(program)),
            }
        })
        .collect()
}

struct Analysed {
    dtmc: Dtmc<BigRational>,
    labels: Vec<BTreeSet<String>>,
    reach: BTreeMap<String, Vec<BigRational>>,
}

impl Analysed {
    fn new(program: &Program, ks: &[RoundBound], max_states: usize) -> Result<Self, String> {
        let dtmc: Dtmc<BigRational> = build_dtmc(program, max_states).map_err(|e| e.to_string())?;
        let labels = dtmc.label_sets(&program.labels, true).map_err(|e| e.to_string())?;
        let mut reach = BTreeMap::new();
        for (name, expr) in &program.labels {
            let target = dtmc.satisfying(expr).map_err(|e| e.to_string())?;
            reach.insert(name.clone(), bounded_reach_many(&dtmc, &target, ks));
        }
        Ok(Analysed { dtmc, labels, reach })
    }
}
