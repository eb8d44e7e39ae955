//! Command-line front end: parse a litmus test, explore it, and report
//! verdicts, coverage and generated tests.
//!
//! Exit codes: 0 success or invariant holds, 1 outcome violated (or an allowed
//! outcome unreachable, or a suite test failing), 2 parse, validation or
//! usage error, 3 state limit exceeded, 4 generation target unreachable.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value as Json};
use weakmem::coverage::{cover, coverage_json, event_coverage, fired_events, CoverageRelation};
use weakmem::explore::{check_outcome_detailed, trace_json, verdict_json, DEFAULT_MAX_STATES};
use weakmem::litmus::{self, LitmusError, LitmusTest};
use weakmem::testgen::doc::TestDoc;
use weakmem::testgen::{
    emit_test, find_trace, generalize, generate_suite, parse_goal, verify_test, Bounds, ProgramClass, SyncPolicy,
    TestTarget, TestgenError,
};
use weakmem::{EventName, ExploreError, ExploreOptions, InstrKind, MasterId, OutcomeMode, Verdict};

#[derive(Parser)]
#[command(name = "weakmem", version, about = "Explore litmus tests against a weak memory model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ExploreFlags {
    /// Abort once this many distinct states have been found.
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    /// Threads used to expand each breadth-first level.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

impl ExploreFlags {
    fn options(&self) -> ExploreOptions {
        ExploreOptions { max_states: self.max_states, workers: self.workers.max(1), ..Default::default() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the test's outcome condition holds.
    Check {
        file: PathBuf,
        #[arg(long)]
        json: bool,
        /// Write the counterexample or witness trace here as JSON.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[command(flatten)]
        explore: ExploreFlags,
    },
    /// Report which register-value combinations the watched masters reach.
    Cover {
        file: PathBuf,
        /// Comma-separated masters, e.g. M2,M3. Defaults to every master with a load.
        #[arg(long, value_delimiter = ',')]
        watch: Vec<String>,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        explore: ExploreFlags,
    },
    /// Generate a test whose trace reaches a target.
    Gen {
        file: PathBuf,
        /// `M2:C0,M3:C1` register combinations or an outcome expression.
        #[arg(long)]
        target: String,
        /// Events that must all fire on the trace.
        #[arg(long, value_delimiter = ',')]
        cover_events: Vec<String>,
        /// Fire no observe event outside --cover-events.
        #[arg(long)]
        only: bool,
        /// Write the test document here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        explore: ExploreFlags,
    },
    /// Sample programs from the class of the test and write a test suite.
    Fuzz {
        file: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        min_len: usize,
        /// Defaults to the longest program of the test.
        #[arg(long)]
        max_len: Option<usize>,
        /// Comma-separated mnemonics (ST, LD, FENCE, SCST.REL, SCLD.ACQ). Defaults to all.
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<String>,
        /// free, none or fence-after-first-load.
        #[arg(long, default_value = "free")]
        policy: String,
        /// Use the test itself as the only member of the class.
        #[arg(long)]
        singleton: bool,
        #[command(flatten)]
        explore: ExploreFlags,
    },
    /// Replay test documents and explore litmus files in a directory, then
    /// report event coverage.
    Suite {
        dir: PathBuf,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        explore: ExploreFlags,
    },
    /// Print the canonical form of a litmus file.
    Fmt {
        file: PathBuf,
        /// Exit with 1 if the file is not in canonical form.
        #[arg(long, conflicts_with = "write")]
        check: bool,
        /// Rewrite the file in place.
        #[arg(long)]
        write: bool,
    },
}

/// A failed command: exit code and message for standard error.
struct Failure(u8, String);

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure(2, msg.into())
    }
}

impl From<ExploreError> for Failure {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::StateLimitExceeded(_) => Failure(3, e.to_string()),
            e => Failure(2, e.to_string()),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn parse_error(path: &Path, e: &LitmusError) -> Failure {
    let lines: Vec<String> = e.diagnostics().iter().map(|d| format!("{}:{d}", path.display())).collect();
    Failure::usage(lines.join("\n"))
}

fn load(path: &Path) -> Result<LitmusTest, Failure> {
    let text = read(path)?;
    litmus::parse(&text).map_err(|e| parse_error(path, &e))
}

fn pretty(doc: &Json) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("JSON values serialise");
    s.push('\n');
    s
}

fn run_check(file: &Path, json: bool, trace_out: Option<&Path>, flags: &ExploreFlags) -> Outcome {
    let test = load(file)?;
    let (verdict, result) = check_outcome_detailed(&test, &flags.options())?;
    if let (Some(path), Some(c)) = (trace_out, verdict.counterexample()) {
        write(path, &pretty(&trace_json(&test.config, &c.trace)))?;
    }
    if json {
        print!("{}", pretty(&verdict_json(&test, &verdict, &result)));
    } else {
        let summary = match (&verdict, test.mode) {
            (Verdict::Holds { .. }, OutcomeMode::Forbidden) => "forbidden outcome is unreachable",
            (Verdict::Holds { .. }, _) => "required outcome holds in every run",
            (Verdict::Violated(_), OutcomeMode::Forbidden) => "forbidden outcome is reachable",
            (Verdict::Violated(_), _) => "required outcome fails in some run",
            (Verdict::Reachable(_), _) => "allowed outcome is reachable",
            (Verdict::Unreachable { .. }, _) => "allowed outcome is unreachable",
        };
        println!("{}: {} ({summary})", test.name, verdict.label());
        println!("states: {}, transitions: {}", result.state_count, result.transition_count);
        if let Some(c) = verdict.counterexample() {
            let what = if matches!(verdict, Verdict::Violated(_)) { "counterexample" } else { "witness" };
            println!("{what} ({} steps):", c.trace.len());
            for (i, ev) in c.trace.iter().enumerate() {
                println!("  {:>3}. {}", i + 1, ev.display(&test.config));
            }
        }
    }
    Ok(if verdict.passed() { 0 } else { 1 })
}

fn watched_masters(test: &LitmusTest, names: &[String]) -> Result<Vec<MasterId>, Failure> {
    let cfg = &test.config;
    if names.is_empty() {
        return Ok(cfg
            .master_ids()
            .filter(|&m| cfg.program(m).iter().any(|&i| cfg.instr(i).kind.is_load()))
            .collect());
    }
    names
        .iter()
        .map(|n| cfg.master_by_name(n.trim()).ok_or_else(|| Failure::usage(format!("unknown master `{n}`"))))
        .collect()
}

fn run_cover(file: &Path, watch: &[String], json: bool, flags: &ExploreFlags) -> Outcome {
    let test = load(file)?;
    let masters = watched_masters(&test, watch)?;
    let opts = ExploreOptions { watched: Some(test.watched_loads.clone()), ..flags.options() };
    let result = weakmem::explore(&test.config, &opts)?;
    let rel = cover(&test, &result, &masters);
    if json {
        print!("{}", pretty(&coverage_json(&test, &rel)));
        return Ok(0);
    }
    let cfg = &test.config;
    let names: Vec<_> = masters.iter().map(|&m| cfg.master_name(m)).collect();
    println!(
        "{}: {}/{} combinations covered for ({})",
        test.name,
        rel.covered.len(),
        rel.total(),
        names.join(", ")
    );
    for (i, combo) in rel.combos.iter().enumerate() {
        let regs: Vec<_> = cfg.registers().iter().zip(combo).map(|(r, v)| format!("{r}={v}")).collect();
        println!("  C{i} = {{{}}}", regs.join(", "));
    }
    let uncovered = rel.uncovered();
    if !uncovered.is_empty() {
        let list: Vec<_> = uncovered.iter().map(|t| format!("({})", CoverageRelation::label(t))).collect();
        println!("uncovered: {}", list.join(" "));
    }
    Ok(0)
}

fn parse_events(names: &[String]) -> Result<BTreeSet<EventName>, Failure> {
    names
        .iter()
        .filter(|n| !n.trim().is_empty())
        .map(|n| n.trim().parse::<EventName>().map_err(|e| Failure::usage(e.to_string())))
        .collect()
}

fn run_gen(file: &Path, target: &str, events: &[String], only: bool, out: Option<&Path>, flags: &ExploreFlags) -> Outcome {
    let test = load(file)?;
    let goal = parse_goal(target, &test.config).map_err(|e| match e {
        TestgenError::Litmus(e) => Failure::usage(format!(
            "--target: {}",
            e.diagnostics().iter().map(|d| d.message.clone()).collect::<Vec<_>>().join("; ")
        )),
        e => Failure::usage(format!("--target: {e}")),
    })?;
    let target = TestTarget { goal, must_cover: parse_events(events)?, only_these: only };
    let tc = match find_trace(&test, &target, &flags.options()) {
        Ok(tc) => tc,
        Err(e @ TestgenError::Unreachable { .. }) => return Err(Failure(4, e.to_string())),
        Err(e @ TestgenError::StateLimitExceeded(_)) => return Err(Failure(3, e.to_string())),
        Err(e) => return Err(Failure::usage(e.to_string())),
    };
    let doc = serde_json::to_value(emit_test(&tc)).expect("test documents serialise");
    match out {
        Some(path) => {
            write(path, &pretty(&doc))?;
            let issues = tc.trace.iter().filter(|e| e.name.is_issue()).count();
            println!(
                "{}: wrote {} ({} steps, {} issue events)",
                test.name,
                path.display(),
                tc.trace.len(),
                issues
            );
        }
        None => print!("{}", pretty(&doc)),
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn run_fuzz(
    file: &Path,
    count: usize,
    seed: Option<u64>,
    out: &Path,
    min_len: usize,
    max_len: Option<usize>,
    kinds: &[String],
    policy: &str,
    singleton: bool,
    flags: &ExploreFlags,
) -> Outcome {
    let seed = seed.ok_or_else(|| Failure::usage("fuzz needs --seed so that the suite can be reproduced"))?;
    let test = load(file)?;
    let class = if singleton {
        ProgramClass::singleton(&test)
    } else {
        let kinds = if kinds.is_empty() {
            InstrKind::ALL.into_iter().collect()
        } else {
            kinds
                .iter()
                .map(|k| InstrKind::from_mnemonic(k.trim()).ok_or_else(|| Failure::usage(format!("unknown instruction kind `{k}`"))))
                .collect::<Result<_, _>>()?
        };
        let policy = SyncPolicy::parse(policy).ok_or_else(|| Failure::usage(format!("unknown policy `{policy}`")))?;
        let cfg = &test.config;
        let longest = cfg.master_ids().map(|m| cfg.program(m).len()).max().unwrap_or(0);
        let bounds = Bounds { min_len, max_len: max_len.unwrap_or(longest), kinds, policy };
        generalize(&test, bounds).map_err(|e| Failure::usage(e.to_string()))?
    };
    let suite = generate_suite(&class, count, seed, &flags.options());
    fs::create_dir_all(out).map_err(|e| Failure::usage(format!("{}: {e}", out.display())))?;
    for tc in &suite.tests {
        let doc = serde_json::to_value(emit_test(tc)).expect("test documents serialise");
        write(&out.join(format!("{}.json", tc.name)), &pretty(&doc))?;
    }
    let manifest = json!({
        "source": test.name,
        "seed": suite.seed,
        "count": count,
        "class": {
            "singleton": singleton,
            "minLength": class.bounds.min_len,
            "maxLength": class.bounds.max_len,
            "kinds": class.bounds.kinds.iter().map(|k| k.mnemonic()).collect::<Vec<_>>(),
            "policy": class.bounds.policy,
        },
        "samples": suite.manifest,
    });
    write(&out.join("manifest.json"), &pretty(&manifest))?;
    let skipped = suite.manifest.iter().filter(|r| r.skipped.is_some()).count();
    println!("{}: wrote {} tests to {} ({skipped} samples skipped)", test.name, suite.tests.len(), out.display());
    Ok(0)
}

fn run_suite(dir: &Path, json: bool, flags: &ExploreFlags) -> Outcome {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let ext = p.extension().and_then(|x| x.to_str());
            let manifest = p.file_name().is_some_and(|n| n == "manifest.json");
            matches!(ext, Some("json") | Some("litmus")) && !manifest
        })
        .collect();
    files.sort();

    let mut per_file = Vec::new();
    let mut fired_sets = Vec::new();
    let mut failures = 0;
    for path in &files {
        let (ok, detail, fired) = if path.extension().is_some_and(|x| x == "litmus") {
            let test = load(path)?;
            let result = weakmem::explore(&test.config, &flags.options())?;
            (true, format!("explored {} states", result.state_count), fired_events(&result))
        } else {
            let text = read(path)?;
            let doc: TestDoc = serde_json::from_str(&text)
                .map_err(|e| Failure::usage(format!("{}: not a test document: {e}", path.display())))?;
            let fired = doc.steps.iter().filter_map(|s| s.event.parse::<EventName>().ok()).collect();
            match verify_test(&doc) {
                Ok(tc) => (true, format!("replayed {} steps", tc.trace.len()), fired),
                Err(e) => (false, e.to_string(), BTreeSet::new()),
            }
        };
        if !ok {
            failures += 1;
        }
        per_file.push(json!({ "file": path.display().to_string(), "pass": ok, "detail": detail }));
        fired_sets.push(fired);
    }
    let coverage = event_coverage(fired_sets);
    if json {
        print!("{}", pretty(&json!({ "tests": per_file, "eventCoverage": coverage.to_json() })));
    } else {
        for entry in &per_file {
            let status = if entry["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
            println!("{status} {} ({})", entry["file"].as_str().unwrap_or_default(), entry["detail"].as_str().unwrap_or_default());
        }
        println!("event coverage: {}", coverage.verdict());
        let missing = coverage.uncovered();
        if !missing.is_empty() {
            let names: Vec<_> = missing.iter().map(|e| e.as_str()).collect();
            println!("uncovered events: {}", names.join(", "));
        }
    }
    Ok(if failures == 0 { 0 } else { 1 })
}

fn run_fmt(file: &Path, check: bool, write_back: bool) -> Outcome {
    let text = read(file)?;
    let test = litmus::parse(&text).map_err(|e| parse_error(file, &e))?;
    let canonical = litmus::format(&test);
    if check {
        if canonical == text {
            return Ok(0);
        }
        eprintln!("{}: not in canonical form", file.display());
        return Ok(1);
    }
    if write_back {
        write(file, &canonical)?;
    } else {
        print!("{canonical}");
    }
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Check { file, json, trace_out, explore } => run_check(&file, json, trace_out.as_deref(), &explore),
        Command::Cover { file, watch, json, explore } => run_cover(&file, &watch, json, &explore),
        Command::Gen { file, target, cover_events, only, out, explore } => {
            run_gen(&file, &target, &cover_events, only, out.as_deref(), &explore)
        }
        Command::Fuzz { file, count, seed, out, min_len, max_len, kinds, policy, singleton, explore } => {
            run_fuzz(&file, count, seed, &out, min_len, max_len, &kinds, &policy, singleton, &explore)
        }
        Command::Suite { dir, json, explore } => run_suite(&dir, json, &explore),
        Command::Fmt { file, check, write } => run_fmt(&file, check, write),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
