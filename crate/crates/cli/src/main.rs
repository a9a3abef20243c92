use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Read, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pcfp_core::dtmc::{
    bounded_reach_many, build_dtmc, check_bisimilar, DtmcStats, PreservationReport, PreservationRow, RoundBound,
    DEFAULT_MAX_STATES,
};
use pcfp_core::frontend::{parse, print};
use pcfp_core::harness::{campaign, GenParams};
use pcfp_core::interference::{build_ig, welsh_powell};
use pcfp_core::ir::{Program, DEFAULT_CF_VAR};
use pcfp_core::liveness::lra;
use pcfp_core::reduce::{ExcludeSet, Pass, ResetEvaluation, RvoMode};
use pcfp_core::scalar::format_rational;
use pcfp_core::{ExactDtmc, Probability};

/// Property checked by `verify` on every input: reaching a deadlock state.
const DEADLOCK_PROPERTY: &str = "deadlock";

#[derive(Parser)]
#[command(
    name = "pcfp",
    version,
    about = "Control-flow-aware state reduction for probabilistic programs"
)]
struct Cli {
    /// Name of the control-flow variable.
    #[arg(long = "cf", global = true, default_value = DEFAULT_CF_VAR)]
    cf_var: String,
    /// State cap for explicit exploration (default: $PCFP_MAX_STATES or 10000000).
    #[arg(long, global = true)]
    max_states: Option<usize>,
    /// Emit structured output as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and print it in canonical form.
    Parse { input: PathBuf },
    /// Print live variables per command, the interference graph and its coloring.
    Analyze {
        input: PathBuf,
        /// Print the interference graph in DOT format.
        #[arg(long)]
        ig: bool,
    },
    /// Reduce a program.
    Reduce {
        input: PathBuf,
        #[command(flatten)]
        reduction: ReductionArgs,
        /// Write the reduced program here instead of stdout; stats go to `<out>.json`.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Explicit path for the JSON stats sidecar.
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Print state, transition and deadlock counts, optionally after a reduction.
    Stats {
        input: PathBuf,
        #[arg(long)]
        pass: Option<String>,
        #[arg(long, default_value_t = RvoMode::default())]
        rvo_mode: RvoMode,
        #[command(flatten)]
        ex: ExclusionArgs,
    },
    /// Check that a reduction preserves round-bounded reachability.
    Verify {
        input: PathBuf,
        #[command(flatten)]
        reduction: ReductionArgs,
        /// Round bounds to check.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u32, 2, 5])]
        k: Vec<u32>,
        /// Extra property `NAME=EXPR`, added to the program's labels.
        #[arg(long = "label")]
        labels: Vec<String>,
        /// Also check bisimilarity of the two chains.
        #[arg(long)]
        bisim: bool,
    },
    /// Run the preservation campaign on generated programs.
    Fuzz {
        /// Seed range `a..b` (inclusive) or a single seed.
        #[arg(long, default_value = "0..99")]
        seeds: String,
        /// Passes to run (default: rvo-as-written, rvo-aggressive, rao, rvo-aggressive+rao).
        #[arg(long, value_delimiter = ',')]
        passes: Vec<String>,
        #[arg(long, default_value_t = RvoMode::default())]
        rvo_mode: RvoMode,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u32, 2, 5])]
        k: Vec<u32>,
        /// Generator preset.
        #[arg(long, value_enum, default_value_t = Size::Small)]
        size: Size,
        /// Write the JSON report here.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Size {
    Small,
    Medium,
}

#[derive(Args)]
struct ExclusionArgs {
    /// Variables to keep untouched, comma separated.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    /// Do not add the variables of labels to the excluded set.
    #[arg(long)]
    unsafe_no_auto_exclude: bool,
}

#[derive(Args)]
struct ReductionArgs {
    /// rvo, rao or rvo+rao.
    #[arg(long, default_value = "rvo+rao")]
    pass: String,
    #[arg(long, default_value_t = RvoMode::default())]
    rvo_mode: RvoMode,
    /// Reset values `x=1,y=0` overriding the initial values.
    #[arg(long, value_delimiter = ',')]
    reset: Vec<String>,
    #[command(flatten)]
    ex: ExclusionArgs,
}

impl ExclusionArgs {
    fn exclude_set(&self, program: &Program) -> ExcludeSet {
        if self.unsafe_no_auto_exclude {
            eprintln!("warning: label variables are not excluded; reduced labels may not be preserved");
            self.exclude.iter().cloned().collect()
        } else {
            ExcludeSet::with_label_vars(program, self.exclude.iter().cloned())
        }
    }
}

impl ReductionArgs {
    fn apply(&self, program: &Program) -> Result<(Pass, Program)> {
        let pass = Pass::parse_with_mode(&self.pass, self.rvo_mode)?;
        let mut reset = ResetEvaluation::initial(program);
        for item in &self.reset {
            let (var, value) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("reset `{item}` is not of the form VAR=VALUE"))?;
            let value: i64 = value
                .trim()
                .parse()
                .with_context(|| format!("reset value in `{item}`"))?;
            reset = reset.with_override(var.trim(), value);
        }
        let ex = self.ex.exclude_set(program);
        let reduced = pass.apply_with_reset(program, &ex, &reset)?;
        Ok((pass, reduced))
    }
}

struct Settings {
    cf_var: String,
    max_states: usize,
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let max_states = match cli.max_states {
        Some(n) => n,
        None => match std::env::var("PCFP_MAX_STATES") {
            Ok(v) => v.parse().with_context(|| format!("PCFP_MAX_STATES={v}"))?,
            Err(_) => DEFAULT_MAX_STATES,
        },
    };
    let ctx = Settings {
        cf_var: cli.cf_var,
        max_states,
        json: cli.json,
    };
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Parse { input } => cmd_parse(&ctx, &input, &mut out),
        Command::Analyze { input, ig } => cmd_analyze(&ctx, &input, ig, &mut out),
        Command::Reduce {
            input,
            reduction,
            out: path,
            sidecar,
        } => cmd_reduce(&ctx, &input, &reduction, path.as_deref(), sidecar.as_deref(), &mut out),
        Command::Stats {
            input,
            pass,
            rvo_mode,
            ex,
        } => cmd_stats(&ctx, &input, pass.as_deref(), rvo_mode, &ex, &mut out),
        Command::Verify {
            input,
            reduction,
            k,
            labels,
            bisim,
        } => cmd_verify(&ctx, &input, &reduction, &k, &labels, bisim, &mut out),
        Command::Fuzz {
            seeds,
            passes,
            rvo_mode,
            k,
            size,
            out: path,
        } => cmd_fuzz(&ctx, &seeds, &passes, rvo_mode, &k, size, path.as_deref(), &mut out),
    }
}

fn read_source(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        Ok(text)
    } else {
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
    }
}

fn load(ctx: &Settings, path: &Path) -> Result<Program> {
    let text = read_source(path)?;
    parse(&text, &ctx.cf_var).map_err(|e| anyhow!("{}:{e}", path.display()))
}

fn explore(ctx: &Settings, program: &Program) -> Result<ExactDtmc> {
    Ok(build_dtmc(program, ctx.max_states)?)
}

fn write_json(out: &mut impl Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct ProgramSummary<'a> {
    module: &'a str,
    variables: Vec<&'a str>,
    commands: usize,
    labels: Vec<&'a str>,
}

fn cmd_parse(ctx: &Settings, input: &Path, out: &mut impl Write) -> Result<ExitCode> {
    let program = load(ctx, input)?;
    if ctx.json {
        write_json(
            out,
            &ProgramSummary {
                module: &program.module_name,
                variables: program.decls.iter().map(|d| d.name.as_str()).collect(),
                commands: program.commands.len(),
                labels: program.labels.keys().map(String::as_str).collect(),
            },
        )?;
    } else {
        write!(out, "{}", print(&program))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(ctx: &Settings, input: &Path, ig: bool, out: &mut impl Write) -> Result<ExitCode> {
    let program = load(ctx, input)?;
    let live = lra(&program);
    let graph = build_ig(&program, &live);
    if ig {
        write!(out, "{}", graph.to_dot())?;
        return Ok(ExitCode::SUCCESS);
    }
    if ctx.json {
        let map: BTreeMap<String, &BTreeSet<String>> = live.iter().map(|(id, vars)| (id.to_string(), vars)).collect();
        write_json(out, &map)?;
        return Ok(ExitCode::SUCCESS);
    }
    writeln!(out, "live variables:")?;
    for (pos, (id, vars)) in live.iter().enumerate() {
        let names: Vec<&str> = vars.iter().map(String::as_str).collect();
        writeln!(
            out,
            "  c{id} ({}={}): {{{}}}",
            program.cf_var,
            program.commands[pos].location,
            names.join(", ")
        )?;
    }
    writeln!(out, "interference edges: {}", graph.edge_count())?;
    for (a, b) in graph.edges() {
        writeln!(out, "  {} -- {}", graph.name(a), graph.name(b))?;
    }
    let coloring = welsh_powell(&graph);
    writeln!(out, "colors: {}", coloring.color_count())?;
    for (v, name) in graph.names().iter().enumerate() {
        writeln!(out, "  {name}: {}", coloring.color(v))?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Reduction {
    pass: String,
    original_states: usize,
    reduced_states: usize,
    factor: f64,
}

#[derive(Serialize)]
struct StatsReport {
    #[serde(flatten)]
    stats: DtmcStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    reduction: Option<Reduction>,
}

impl StatsReport {
    fn plain(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "states: {}", self.stats.states)?;
        writeln!(out, "transitions: {}", self.stats.transitions)?;
        writeln!(out, "deadlocks: {}", self.stats.deadlocks)?;
        if let Some(r) = &self.reduction {
            writeln!(
                out,
                "{}: {} -> {} states (factor {:.3})",
                r.pass, r.original_states, r.reduced_states, r.factor
            )?;
        }
        Ok(())
    }
}

fn reduction_report(ctx: &Settings, pass: Pass, original: &Program, reduced: &Program) -> Result<StatsReport> {
    let before = explore(ctx, original)?.stats();
    let after = explore(ctx, reduced)?.stats();
    Ok(StatsReport {
        reduction: Some(Reduction {
            pass: pass.to_string(),
            original_states: before.states,
            reduced_states: after.states,
            factor: before.states as f64 / after.states as f64,
        }),
        stats: after,
    })
}

fn cmd_reduce(
    ctx: &Settings,
    input: &Path,
    args: &ReductionArgs,
    path: Option<&Path>,
    sidecar: Option<&Path>,
    out: &mut impl Write,
) -> Result<ExitCode> {
    let program = load(ctx, input)?;
    let (pass, reduced) = args.apply(&program)?;
    let text = print(&reduced);
    let report = reduction_report(ctx, pass, &program, &reduced)?;
    match path {
        Some(p) => fs::write(p, &text).with_context(|| format!("cannot write {}", p.display()))?,
        None => write!(out, "{text}")?,
    }
    let sidecar = sidecar.map(Path::to_path_buf).or_else(|| {
        path.map(|p| {
            let mut s = p.as_os_str().to_owned();
            s.push(".json");
            PathBuf::from(s)
        })
    });
    if let Some(s) = sidecar {
        let json = serde_json::to_string_pretty(&report)? + "\n";
        fs::write(&s, json).with_context(|| format!("cannot write {}", s.display()))?;
    }
    if !ctx.json {
        if let Some(r) = &report.reduction {
            eprintln!("{}: {} -> {} states", r.pass, r.original_states, r.reduced_states);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_stats(
    ctx: &Settings,
    input: &Path,
    pass: Option<&str>,
    mode: RvoMode,
    ex: &ExclusionArgs,
    out: &mut impl Write,
) -> Result<ExitCode> {
    let program = load(ctx, input)?;
    let report = match pass {
        Some(name) => {
            let pass = Pass::parse_with_mode(name, mode)?;
            let reduced = pass.apply(&program, &ex.exclude_set(&program))?;
            reduction_report(ctx, pass, &program, &reduced)?
        }
        None => StatsReport {
            stats: explore(ctx, &program)?.stats(),
            reduction: None,
        },
    };
    if ctx.json {
        write_json(out, &report)?;
    } else {
        report.plain(out)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct VerifyReport {
    pass: String,
    properties: BTreeMap<String, PreservationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bisimilar: Option<bool>,
    ok: bool,
}

/// Adds `NAME=EXPR` labels by re-parsing the source with the label appended,
/// so the expressions get the same checks and error positions as the file.
fn with_extra_labels(ctx: &Settings, input: &Path, labels: &[String]) -> Result<Program> {
    if labels.is_empty() {
        return load(ctx, input);
    }
    let mut text = read_source(input)?;
    text.push('\n');
    for item in labels {
        let (name, expr) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("label `{item}` is not of the form NAME=EXPR"))?;
        text.push_str(&format!("label \"{}\" = {};\n", name.trim(), expr.trim()));
    }
    parse(&text, &ctx.cf_var).map_err(|e| anyhow!("{} (with --label):{e}", input.display()))
}

fn property_values(
    dtmc: &ExactDtmc,
    program: &Program,
    ks: &[RoundBound],
) -> Result<BTreeMap<String, Vec<Probability>>> {
    let mut values = BTreeMap::new();
    let mut deadlocks = vec![false; dtmc.state_count()];
    for &d in dtmc.deadlocks() {
        deadlocks[d] = true;
    }
    values.insert(DEADLOCK_PROPERTY.to_owned(), bounded_reach_many(dtmc, &deadlocks, ks));
    for (name, expr) in &program.labels {
        let target = dtmc.satisfying(expr)?;
        values.insert(name.clone(), bounded_reach_many(dtmc, &target, ks));
    }
    Ok(values)
}

fn proposition_sets(dtmc: &ExactDtmc, program: &Program) -> Result<Vec<BTreeSet<String>>> {
    let mut sets = dtmc.label_sets(&program.labels, true)?;
    for &d in dtmc.deadlocks() {
        sets[d].insert(format!("@{DEADLOCK_PROPERTY}"));
    }
    Ok(sets)
}

fn cmd_verify(
    ctx: &Settings,
    input: &Path,
    args: &ReductionArgs,
    k: &[u32],
    labels: &[String],
    bisim: bool,
    out: &mut impl Write,
) -> Result<ExitCode> {
    if k.is_empty() {
        bail!("--k needs at least one bound");
    }
    let program = with_extra_labels(ctx, input, labels)?;
    let (pass, reduced) = args.apply(&program)?;
    let ks: Vec<RoundBound> = k.iter().copied().map(RoundBound).collect();
    let d1 = explore(ctx, &program)?;
    let d2 = explore(ctx, &reduced)?;
    let left = property_values(&d1, &program, &ks)?;
    let right = property_values(&d2, &reduced, &ks)?;

    let mut properties = BTreeMap::new();
    for (name, before) in left {
        let after = right
            .get(&name)
            .ok_or_else(|| anyhow!("label \"{name}\" is missing from the reduced program"))?;
        let rows: Vec<PreservationRow> = ks
            .iter()
            .zip(before.into_iter().zip(after.iter().cloned()))
            .map(|(k, (o, r))| PreservationRow {
                k: k.0,
                equal: o == r,
                original: o,
                reduced: r,
            })
            .collect();
        let pass = rows.iter().all(|r| r.equal);
        properties.insert(name, PreservationReport { rows, pass });
    }
    let bisimilar = if bisim {
        let l1 = proposition_sets(&d1, &program)?;
        let l2 = proposition_sets(&d2, &reduced)?;
        Some(check_bisimilar(&d1, &d2, &l1, &l2))
    } else {
        None
    };
    let ok = properties.values().all(|p| p.pass) && bisimilar != Some(false);
    let report = VerifyReport {
        pass: pass.to_string(),
        properties,
        bisimilar,
        ok,
    };
    if ctx.json {
        write_json(out, &report)?;
    } else {
        writeln!(
            out,
            "pass {}: {} -> {} states",
            report.pass,
            d1.state_count(),
            d2.state_count()
        )?;
        for (name, p) in &report.properties {
            for row in &p.rows {
                writeln!(
                    out,
                    "  {name} k={}: {} vs {} {}",
                    row.k,
                    format_rational(&row.original),
                    format_rational(&row.reduced),
                    if row.equal { "ok" } else { "MISMATCH" }
                )?;
            }
        }
        if let Some(b) = report.bisimilar {
            writeln!(out, "  bisimilar: {b}")?;
        }
        writeln!(out, "{}", if report.ok { "preserved" } else { "NOT preserved" })?;
    }
    Ok(if report.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn parse_seeds(text: &str) -> Result<RangeInclusive<u64>> {
    let parse = |s: &str| -> Result<u64> { s.trim().parse().with_context(|| format!("bad seed `{s}`")) };
    let range = match text.split_once("..") {
        Some((a, b)) => parse(a)?..=parse(b.strip_prefix('=').unwrap_or(b))?,
        None => {
            let s = parse(text)?;
            s..=s
        }
    };
    if range.is_empty() {
        bail!("empty seed range `{text}`");
    }
    Ok(range)
}

#[allow(clippy::too_many_arguments)]
fn cmd_fuzz(
    ctx: &Settings,
    seeds: &str,
    passes: &[String],
    mode: RvoMode,
    k: &[u32],
    size: Size,
    path: Option<&Path>,
    out: &mut impl Write,
) -> Result<ExitCode> {
    let seeds = parse_seeds(seeds)?;
    let passes: Vec<Pass> = if passes.is_empty() {
        Pass::ALL.to_vec()
    } else {
        passes
            .iter()
            .map(|p| Pass::parse_with_mode(p.trim(), mode))
            .collect::<Result<_, _>>()?
    };
    let ks: Vec<RoundBound> = k.iter().copied().map(RoundBound).collect();
    let preset = match size {
        Size::Small => GenParams::small,
        Size::Medium => GenParams::medium,
    };
    let params: Vec<GenParams> = seeds.map(preset).collect();
    let report = campaign(&params, &passes, &ks, ctx.max_states);
    if let Some(p) = path {
        let json = serde_json::to_string_pretty(&report)? + "\n";
        fs::write(p, json).with_context(|| format!("cannot write {}", p.display()))?;
    }
    let s = &report.summary;
    if ctx.json && path.is_none() {
        write_json(out, &report)?;
    } else if ctx.json {
        write_json(out, s)?;
    } else {
        writeln!(
            out,
            "{} cases, {} passed, {} preservation failures, {} bisimulation failures, {} errors",
            s.cases, s.passed, s.preservation_failures, s.bisimulation_failures, s.errors
        )?;
        writeln!(
            out,
            "reduced {} cases, mean factor {:.3}, max factor {:.3}",
            s.reduced_cases, s.mean_factor, s.max_factor
        )?;
        for c in report.cases.iter().filter(|c| !c.ok) {
            writeln!(
                out,
                "FAILED {} {}: {}",
                c.name,
                c.pass,
                c.error.as_deref().unwrap_or("mismatch")
            )?;
        }
    }
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
