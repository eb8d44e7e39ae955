//! Exhaustive breadth-first exploration of every interleaving.
//!
//! States are deduplicated on [`canonical_key`]. Each BFS level may be
//! expanded by several worker threads; successors are merged back in frontier
//! order, so counts, verdicts and counterexamples do not depend on the number
//! of workers.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::config::{InstrId, SystemConfig};
use crate::event::{EventDescriptor, EventName};
use crate::kernel::{enabled_events, fire, KernelError};
use crate::litmus::{LitmusTest, OutcomeMode};
use crate::state::{check_state_invariants, init_state, MachineState, RegisterMap, Violation};

pub const DEFAULT_MAX_STATES: usize = 10_000_000;

pub type Trace = Vec<EventDescriptor>;

#[derive(Debug, Clone)]
pub struct ExploreOptions {
    pub max_states: usize,
    pub check_invariants: bool,
    pub workers: usize,
    /// Loads whose observation makes a state a trigger state; all loads when `None`.
    pub watched: Option<BTreeSet<InstrId>>,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions { max_states: DEFAULT_MAX_STATES, check_invariants: false, workers: 1, watched: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub trace: Trace,
    pub state: MachineState,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplorationResult {
    pub state_count: usize,
    pub transition_count: usize,
    /// States with no enabled event.
    pub final_states: Vec<MachineState>,
    pub final_register_maps: BTreeSet<RegisterMap>,
    /// Register files of every state in which all watched loads are observed.
    pub trigger_register_maps: BTreeSet<RegisterMap>,
    /// First (shortest) state matching the monitor, if one was given.
    pub violation: Option<Counterexample>,
    pub event_tally: BTreeMap<EventName, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("state limit of {0} states exceeded")]
    StateLimitExceeded(usize),
    #[error("state invariant violated after {} steps: {}", trace.len(), violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvariantViolated { violations: Vec<Violation>, trace: Trace },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("replay failed at step {step}: {source}")]
pub struct ReplayError {
    pub step: usize,
    pub source: KernelError,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Byte encoding of a state; equal states and only equal states share a key.
///
/// Sets and maps are written in sorted order with length prefixes, so the key
/// does not depend on the order in which elements were inserted.
pub fn canonical_key(state: &MachineState) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    let set = |out: &mut Vec<u8>, s: &BTreeSet<InstrId>| {
        put_u32(out, s.len() as u32);
        for x in s {
            put_u32(out, x.0);
        }
    };
    set(&mut out, &state.issued);
    set(&mut out, &state.observed);
    put_u32(&mut out, state.observers.len() as u32);
    for (x, ms) in &state.observers {
        put_u32(&mut out, x.0);
        let mask = ms.iter().fold(0u64, |acc, m| acc | (1u64 << m.0));
        out.extend_from_slice(&mask.to_le_bytes());
    }
    for table in [&state.lov, &state.rf] {
        put_u32(&mut out, table.len() as u32);
        for row in table {
            put_u32(&mut out, row.len() as u32);
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    set(&mut out, &state.issued_fences);
    put_u32(&mut out, state.after.len() as u32);
    for (s, ls) in &state.after {
        put_u32(&mut out, s.0);
        set(&mut out, ls);
    }
    put_u32(&mut out, state.cursor.len() as u32);
    for c in &state.cursor {
        put_u32(&mut out, *c as u32);
    }
    put_u32(&mut out, state.atomic_order.len() as u32);
    for x in &state.atomic_order {
        put_u32(&mut out, x.0);
    }
    out
}

struct Expansion {
    events: Vec<EventDescriptor>,
    successors: Vec<(EventDescriptor, MachineState, Vec<u8>)>,
}

fn expand(state: &MachineState, config: &SystemConfig) -> Result<Expansion, KernelError> {
    let events = enabled_events(state, config);
    let successors = events
        .iter()
        .map(|ev| {
            let next = fire(state, config, ev)?;
            let key = canonical_key(&next);
            Ok((*ev, next, key))
        })
        .collect::<Result<_, KernelError>>()?;
    Ok(Expansion { events, successors })
}

fn expand_level(
    level: &[usize],
    states: &[MachineState],
    config: &SystemConfig,
    workers: usize,
) -> Result<Vec<Expansion>, KernelError> {
    if workers <= 1 || level.len() < 2 {
        return level.iter().map(|&i| expand(&states[i], config)).collect();
    }
    let chunk = level.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = level
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || part.iter().map(|&i| expand(&states[i], config)).collect::<Result<Vec<_>, _>>())
            })
            .collect();
        let mut out = Vec::with_capacity(level.len());
        for h in handles {
            out.extend(h.join().expect("exploration worker panicked")?);
        }
        Ok(out)
    })
}

fn trace_to(parents: &[Option<(usize, EventDescriptor)>], mut idx: usize) -> Trace {
    let mut trace = Vec::new();
    while let Some((p, ev)) = parents[idx] {
        trace.push(ev);
        idx = p;
    }
    trace.reverse();
    trace
}

fn watched_set(config: &SystemConfig, opts: &ExploreOptions) -> BTreeSet<InstrId> {
    opts.watched.clone().unwrap_or_else(|| config.loads().collect())
}

/// Breadth-first closure of `fire` from the initial state. `monitor` is
/// evaluated on every reachable state; the first state it accepts, in BFS
/// order, is reported as the violation.
pub fn explore_with<M>(config: &SystemConfig, opts: &ExploreOptions, monitor: Option<M>) -> Result<ExplorationResult, ExploreError>
where
    M: Fn(&MachineState) -> bool,
{
    let watched = watched_set(config, opts);
    let init = init_state(config)?;
    let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
    index.insert(canonical_key(&init), 0);
    let mut states = vec![init];
    let mut parents: Vec<Option<(usize, EventDescriptor)>> = vec![None];

    let mut result = ExplorationResult {
        state_count: 0,
        transition_count: 0,
        final_states: Vec::new(),
        final_register_maps: BTreeSet::new(),
        trigger_register_maps: BTreeSet::new(),
        violation: None,
        event_tally: BTreeMap::new(),
    };

    let visit = |idx: usize, states: &[MachineState], parents: &[Option<(usize, EventDescriptor)>], result: &mut ExplorationResult| -> Result<(), ExploreError> {
        let s = &states[idx];
        if opts.check_invariants {
            let violations = check_state_invariants(s, config);
            if !violations.is_empty() {
                return Err(ExploreError::InvariantViolated { violations, trace: trace_to(parents, idx) });
            }
        }
        if watched.is_subset(&s.observed) {
            result.trigger_register_maps.insert(s.rf.clone());
        }
        if result.violation.is_none() && monitor.as_ref().is_some_and(|m| m(s)) {
            result.violation = Some(Counterexample { trace: trace_to(parents, idx), state: s.clone() });
        }
        Ok(())
    };
    visit(0, &states, &parents, &mut result)?;

    let mut level = vec![0usize];
    while !level.is_empty() {
        let expansions = expand_level(&level, &states, config, opts.workers)?;
        let mut next_level = Vec::new();
        for (&src, exp) in level.iter().zip(expansions) {
            if exp.events.is_empty() {
                result.final_register_maps.insert(states[src].rf.clone());
                result.final_states.push(states[src].clone());
            }
            for ev in &exp.events {
                *result.event_tally.entry(ev.name).or_default() += 1;
            }
            result.transition_count += exp.successors.len();
            for (ev, next, key) in exp.successors {
                if index.contains_key(&key) {
                    continue;
                }
                if states.len() >= opts.max_states {
                    return Err(ExploreError::StateLimitExceeded(opts.max_states));
                }
                let idx = states.len();
                index.insert(key, idx);
                states.push(next);
                parents.push(Some((src, ev)));
                visit(idx, &states, &parents, &mut result)?;
                next_level.push(idx);
            }
        }
        level = next_level;
    }
    result.state_count = states.len();
    Ok(result)
}

/// Explores every interleaving of `config`.
pub fn explore(config: &SystemConfig, opts: &ExploreOptions) -> Result<ExplorationResult, ExploreError> {
    explore_with(config, opts, None::<fn(&MachineState) -> bool>)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Forbidden/required outcome invariant holds in every reachable state.
    Holds { states: usize, transitions: usize },
    /// Forbidden/required outcome invariant fails; shortest counterexample.
    Violated(Counterexample),
    /// Allowed outcome reached; shortest witness.
    Reachable(Counterexample),
    /// Allowed outcome never reached.
    Unreachable { states: usize, transitions: usize },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Holds { .. } => "holds",
            Verdict::Violated(_) => "violated",
            Verdict::Reachable(_) => "reachable",
            Verdict::Unreachable { .. } => "unreachable",
        }
    }

    /// Whether the test's expectation is met.
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Holds { .. } | Verdict::Reachable(_))
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            Verdict::Violated(c) | Verdict::Reachable(c) => Some(c),
            _ => None,
        }
    }
}

/// Evaluates the outcome invariant `watched ⊆ observed ⇒ predicate` (adjusted
/// for the test's mode) at every reachable state.
pub fn check_outcome_detailed(test: &LitmusTest, opts: &ExploreOptions) -> Result<(Verdict, ExplorationResult), ExploreError> {
    let opts = ExploreOptions { watched: Some(test.watched_loads.clone()), ..opts.clone() };
    let watched = &test.watched_loads;
    let monitor = |s: &MachineState| {
        watched.is_subset(&s.observed)
            && match test.mode {
                OutcomeMode::Forbidden | OutcomeMode::Allowed => test.outcome.eval(&s.rf),
                OutcomeMode::Required => !test.outcome.eval(&s.rf),
            }
    };
    let result = explore_with(&test.config, &opts, Some(monitor))?;
    let (states, transitions) = (result.state_count, result.transition_count);
    let verdict = match (test.mode, result.violation.clone()) {
        (OutcomeMode::Allowed, Some(c)) => Verdict::Reachable(c),
        (OutcomeMode::Allowed, None) => Verdict::Unreachable { states, transitions },
        (_, Some(c)) => Verdict::Violated(c),
        (_, None) => Verdict::Holds { states, transitions },
    };
    Ok((verdict, result))
}

pub fn check_outcome(test: &LitmusTest, opts: &ExploreOptions) -> Result<Verdict, ExploreError> {
    check_outcome_detailed(test, opts).map(|(v, _)| v)
}

/// Folds `fire` over `trace` from the initial state.
pub fn replay(config: &SystemConfig, trace: &[EventDescriptor]) -> Result<MachineState, ReplayError> {
    let mut state = init_state(config).map_err(|source| ReplayError { step: 0, source })?;
    for (step, ev) in trace.iter().enumerate() {
        state = fire(&state, config, ev).map_err(|source| ReplayError { step, source })?;
    }
    Ok(state)
}

/// Register files keyed by master and register name.
pub fn register_map_json(config: &SystemConfig, rf: &RegisterMap) -> Json {
    let mut obj = serde_json::Map::new();
    for m in config.master_ids() {
        let regs: serde_json::Map<String, Json> = config
            .registers()
            .iter()
            .zip(&rf[m.index()])
            .map(|(r, v)| (r.clone(), json!(v)))
            .collect();
        obj.insert(config.master_name(m).to_owned(), Json::Object(regs));
    }
    Json::Object(obj)
}

pub fn trace_json(config: &SystemConfig, trace: &[EventDescriptor]) -> Json {
    Json::Array(trace.iter().map(|ev| serde_json::to_value(ev.to_named(config)).unwrap()).collect())
}

pub fn exploration_json(config: &SystemConfig, result: &ExplorationResult) -> Json {
    json!({
        "stateCount": result.state_count,
        "transitions": result.transition_count,
        "finalStateCount": result.final_states.len(),
        "finalRegisterMaps": result.final_register_maps.iter().map(|rf| register_map_json(config, rf)).collect::<Vec<_>>(),
        "eventTally": result.event_tally.iter().map(|(k, v)| (k.as_str().to_owned(), json!(v))).collect::<serde_json::Map<_, _>>(),
    })
}

pub fn verdict_json(test: &LitmusTest, verdict: &Verdict, result: &ExplorationResult) -> Json {
    let mut doc = exploration_json(&test.config, result);
    let obj = doc.as_object_mut().unwrap();
    obj.insert("test".into(), json!(test.name));
    obj.insert("mode".into(), json!(test.mode.keyword()));
    obj.insert("verdict".into(), json!(verdict.label()));
    obj.insert(
        "counterexample".into(),
        match verdict.counterexample() {
            Some(c) => trace_json(&test.config, &c.trace),
            None => Json::Null,
        },
    );
    doc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InstrSpec, Op, ProgramSpec};
    use crate::litmus::parse;

    fn single_store() -> SystemConfig {
        SystemConfig::new(
            vec![
                ProgramSpec {
                    master: "M1".into(),
                    instrs: vec![InstrSpec { id: "I1".into(), op: Op::Store { address: "a1".into(), value: 1 } }],
                },
                ProgramSpec { master: "M2".into(), instrs: vec![] },
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn empty_config_has_one_state() {
        let r = explore(&SystemConfig::empty(), &ExploreOptions::default()).unwrap();
        assert_eq!((r.state_count, r.transition_count), (1, 0));
        assert_eq!(r.final_states.len(), 1);
    }

    #[test]
    fn single_store_lattice() {
        // init, issued, then one state per non-empty observer subset of {M1, M2}
        let r = explore(&single_store(), &ExploreOptions::default()).unwrap();
        assert_eq!(r.state_count, 5);
        assert_eq!(r.transition_count, 1 + 2 + 2);
    }

    #[test]
    fn state_limit_is_an_error() {
        let opts = ExploreOptions { max_states: 3, ..Default::default() };
        assert_eq!(explore(&single_store(), &opts), Err(ExploreError::StateLimitExceeded(3)));
    }

    #[test]
    fn canonical_key_ignores_insertion_order() {
        let cfg = single_store();
        let s = replay(&cfg, &[EventDescriptor::issue(EventName::IssueStore, InstrId(0))]).unwrap();
        let a = fire(&s, &cfg, &EventDescriptor::observe(EventName::ObserveStoreWithoutFence, InstrId(0), crate::MasterId(0))).unwrap();
        let ab = fire(&a, &cfg, &EventDescriptor::observe(EventName::ObserveStoreWithoutFence, InstrId(0), crate::MasterId(1))).unwrap();
        let b = fire(&s, &cfg, &EventDescriptor::observe(EventName::ObserveStoreWithoutFence, InstrId(0), crate::MasterId(1))).unwrap();
        let ba = fire(&b, &cfg, &EventDescriptor::observe(EventName::ObserveStoreWithoutFence, InstrId(0), crate::MasterId(0))).unwrap();
        assert_eq!(canonical_key(&ab), canonical_key(&ba));
        assert_ne!(canonical_key(&a), canonical_key(&b));
        let init = init_state(&cfg).unwrap();
        assert_eq!(canonical_key(&init), canonical_key(&init_state(&cfg).unwrap()));
        let mut tweaked = init.clone();
        tweaked.lov[1][0] = 1;
        assert_ne!(canonical_key(&init), canonical_key(&tweaked));
    }

    #[test]
    fn never_written_location_reads_initial_value() {
        let t = parse("litmus \"r\" master M1 { } master M2 { I21: LD R1 a1; } required M2:R1 = 0").unwrap();
        assert!(matches!(check_outcome(&t, &ExploreOptions::default()).unwrap(), Verdict::Holds { .. }));
    }

    #[test]
    fn replay_reports_failing_step() {
        let cfg = single_store();
        assert_eq!(replay(&cfg, &[]).unwrap(), init_state(&cfg).unwrap());
        let trace = [
            EventDescriptor::observe(EventName::ObserveStoreWithoutFence, InstrId(0), crate::MasterId(0)),
        ];
        let err = replay(&cfg, &trace).unwrap_err();
        assert_eq!(err.step, 0);
    }
}
