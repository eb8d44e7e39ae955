//! Model-checking-based test generation.
//!
//! [`find_trace`] searches breadth-first for the shortest trace that reaches a
//! goal while firing a required set of events. [`doc`] turns the result into
//! a replayable JSON document, and [`class`] samples whole programs from a
//! class generalised from a seed test.

pub mod class;
pub mod doc;

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::config::{MasterId, SystemConfig};
use crate::coverage::reg_combos;
use crate::event::{EventDescriptor, EventName};
use crate::explore::{canonical_key, ExploreOptions, Trace, DEFAULT_MAX_STATES};
use crate::kernel::{enabled_events, fire, KernelError};
use crate::litmus::{parse_predicate, LitmusError, LitmusTest, OutcomePredicate};
use crate::state::{init_state, MachineState, RegisterMap};

pub use class::{generalize, generate_suite, Bounds, ProgramClass, SampleRecord, Suite, SyncPolicy};
pub use doc::{emit_test, load_test, verify_test, DocError, VerifyError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Goal {
    /// Per-master register combinations, `Ci` indices into
    /// [`reg_combos`] over the test's registers and values.
    Combos(Vec<(MasterId, usize)>),
    Predicate(OutcomePredicate),
}

impl Goal {
    pub fn to_predicate(&self, config: &SystemConfig) -> Result<OutcomePredicate, TestgenError> {
        match self {
            Goal::Predicate(p) => Ok(p.clone()),
            Goal::Combos(parts) => {
                let combos = reg_combos(config.registers().len(), config.values());
                let mut atoms = Vec::new();
                for &(m, c) in parts {
                    let combo = combos
                        .get(c)
                        .ok_or_else(|| TestgenError::InvalidTarget(format!("no combination C{c}")))?;
                    for (r, &v) in combo.iter().enumerate() {
                        atoms.push(OutcomePredicate::atom(m, crate::config::RegId(r as u16), v));
                    }
                }
                OutcomePredicate::all(atoms)
                    .ok_or_else(|| TestgenError::InvalidTarget("target names no register".into()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestTarget {
    pub goal: Goal,
    /// Events that must all fire on the trace.
    pub must_cover: BTreeSet<EventName>,
    /// When set, no observe event outside `must_cover` may fire. Issue events
    /// are always allowed.
    pub only_these: bool,
}

impl TestTarget {
    pub fn new(goal: Goal) -> Self {
        TestTarget { goal, must_cover: BTreeSet::new(), only_these: false }
    }
}

/// Parses `M2:C0,M3:C1` as register combinations, anything else as an
/// outcome predicate.
pub fn parse_goal(text: &str, config: &SystemConfig) -> Result<Goal, TestgenError> {
    let combos: Option<Vec<_>> = text
        .split(',')
        .map(|part| {
            let (m, c) = part.trim().split_once(':')?;
            let c = c.trim().strip_prefix('C')?.parse::<usize>().ok()?;
            Some((m.trim(), c))
        })
        .collect();
    match combos {
        Some(parts) => parts
            .into_iter()
            .map(|(m, c)| {
                config
                    .master_by_name(m)
                    .map(|m| (m, c))
                    .ok_or_else(|| TestgenError::InvalidTarget(format!("unknown master `{m}`")))
            })
            .collect::<Result<_, _>>()
            .map(Goal::Combos),
        None => Ok(Goal::Predicate(parse_predicate(text, config)?)),
    }
}

/// How the expected outcome of a test is stated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expected {
    /// The register file the trace must produce.
    Exact(RegisterMap),
    /// Every register file a run of the test may legally end with.
    Allowed(BTreeSet<RegisterMap>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub name: String,
    pub test: LitmusTest,
    pub trace: Trace,
    pub expected: Expected,
    /// Must hold, with every watched load observed, at the end of the trace.
    pub goal: OutcomePredicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestgenError {
    #[error("target unreachable ({explored} states explored)")]
    Unreachable { explored: usize },
    #[error("state limit of {0} states exceeded")]
    StateLimitExceeded(usize),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error(transparent)]
    Litmus(#[from] LitmusError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

fn event_mask(events: &BTreeSet<EventName>) -> u16 {
    events.iter().fold(0, |acc, e| acc | e.bit())
}

/// Search node: state, mask of required events fired so far, parent and the
/// event that led here.
type Node = (MachineState, u16, Option<(usize, EventDescriptor)>);

/// Shortest trace reaching a state where every watched load is observed, the
/// goal holds, and every `must_cover` event has fired.
///
/// The search runs over pairs of machine state and fired-event set, so a
/// state reached with different fired sets is explored once per set.
pub fn find_trace(test: &LitmusTest, target: &TestTarget, opts: &ExploreOptions) -> Result<TestCase, TestgenError> {
    let cfg = &test.config;
    let goal = target.goal.to_predicate(cfg)?;
    let want = event_mask(&target.must_cover);
    let allowed = |e: EventName| !target.only_these || e.is_issue() || target.must_cover.contains(&e);
    let max_states = if opts.max_states == 0 { DEFAULT_MAX_STATES } else { opts.max_states };
    let reached = |s: &MachineState, mask: u16| {
        mask & want == want && test.watched_loads.is_subset(&s.observed) && goal.eval(&s.rf)
    };

    let init = init_state(cfg)?;
    let mut nodes: Vec<Node> = vec![(init, 0, None)];
    let mut seen: HashMap<(Vec<u8>, u16), usize> = HashMap::new();
    seen.insert((canonical_key(&nodes[0].0), 0), 0);

    let found = |nodes: &[Node], mut i: usize| {
        let state = nodes[i].0.clone();
        let mut trace = Vec::new();
        while let Some((p, ev)) = nodes[i].2 {
            trace.push(ev);
            i = p;
        }
        trace.reverse();
        TestCase {
            name: format!("{}-gen", test.name),
            test: test.clone(),
            trace,
            expected: Expected::Exact(state.rf),
            goal: goal.clone(),
        }
    };

    if reached(&nodes[0].0, 0) {
        return Ok(found(&nodes, 0));
    }
    let mut head = 0;
    while head < nodes.len() {
        let (state, mask) = (nodes[head].0.clone(), nodes[head].1);
        for ev in enabled_events(&state, cfg) {
            if !allowed(ev.name) {
                continue;
            }
            let next = fire(&state, cfg, &ev)?;
            let next_mask = mask | (ev.name.bit() & want);
            let key = (canonical_key(&next), next_mask);
            if seen.contains_key(&key) {
                continue;
            }
            if nodes.len() >= max_states {
                return Err(TestgenError::StateLimitExceeded(max_states));
            }
            seen.insert(key, nodes.len());
            let hit = reached(&next, next_mask);
            nodes.push((next, next_mask, Some((head, ev))));
            if hit {
                return Ok(found(&nodes, nodes.len() - 1));
            }
        }
        head += 1;
    }
    Err(TestgenError::Unreachable { explored: nodes.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explore::replay;
    use crate::litmus::parse;

    const IRIW: &str = "litmus \"iriw-fence\" master M1 { I11: ST a1 #1; I12: ST a2 #1; } \
        master M2 { I21: LD R1 a1; I22: FENCE; I23: LD R2 a2; } \
        master M3 { I31: LD R1 a2; I32: FENCE; I33: LD R2 a1; } \
        forbidden ( M2:R1 = 1 /\\ M3:R1 = 1 /\\ M2:R2 = 0 /\\ M3:R2 = 0 )";

    #[test]
    fn goal_parsing() {
        let t = parse(IRIW).unwrap();
        let cfg = &t.config;
        let (m2, m3) = (cfg.master_by_name("M2").unwrap(), cfg.master_by_name("M3").unwrap());
        assert_eq!(parse_goal("M2:C0, M3:C2", cfg).unwrap(), Goal::Combos(vec![(m2, 0), (m3, 2)]));
        assert!(matches!(parse_goal("M2:R1 = 1", cfg).unwrap(), Goal::Predicate(_)));
        assert!(matches!(parse_goal("M9:C0", cfg), Err(TestgenError::InvalidTarget(_))));
        let p = Goal::Combos(vec![(m2, 2)]).to_predicate(cfg).unwrap();
        assert_eq!(p.render(cfg), "M2:R1 = 1 /\\ M2:R2 = 0");
        assert!(Goal::Combos(vec![(m2, 4)]).to_predicate(cfg).is_err());
    }

    #[test]
    fn all_zero_target_needs_six_issues() {
        let t = parse(IRIW).unwrap();
        let goal = parse_goal("M2:C0,M3:C0", &t.config).unwrap();
        let tc = find_trace(&t, &TestTarget::new(goal), &ExploreOptions::default()).unwrap();
        let issues = tc.trace.iter().filter(|e| e.name.is_issue()).count();
        assert_eq!(issues, 6);
        assert_eq!(tc.trace.len(), 10);
        let end = replay(&t.config, &tc.trace).unwrap();
        assert_eq!(Expected::Exact(end.rf), tc.expected);
    }

    #[test]
    fn forbidden_pair_is_unreachable() {
        let t = parse(IRIW).unwrap();
        let goal = parse_goal("M2:C2,M3:C2", &t.config).unwrap();
        let err = find_trace(&t, &TestTarget::new(goal), &ExploreOptions::default()).unwrap_err();
        assert!(matches!(err, TestgenError::Unreachable { explored } if explored > 1000));
    }

    #[test]
    fn trivial_goal_gives_empty_trace() {
        let mut t = parse("litmus \"z\" master M1 { I1: LD R1 a; } allowed M1:R1 = 0").unwrap();
        t.watched_loads.clear();
        let goal = parse_goal("M1:R1 = 0", &t.config).unwrap();
        let tc = find_trace(&t, &TestTarget::new(goal), &ExploreOptions::default()).unwrap();
        assert!(tc.trace.is_empty());
    }

    #[test]
    fn must_cover_and_only_these() {
        let t = parse(IRIW).unwrap();
        let goal = parse_goal("M2:C0,M3:C0", &t.config).unwrap();
        let mut target = TestTarget::new(goal);
        target.must_cover = [EventName::ObserveStoreWithoutFence].into();
        let tc = find_trace(&t, &target, &ExploreOptions::default()).unwrap();
        assert!(tc.trace.iter().any(|e| e.name == EventName::ObserveStoreWithoutFence));

        target.must_cover = [EventName::ObserveLoadHappensBeforeWithFence].into();
        target.only_these = true;
        let tc = find_trace(&t, &target, &ExploreOptions::default()).unwrap();
        assert!(tc.trace.iter().all(|e| e.name.is_issue() || e.name == EventName::ObserveLoadHappensBeforeWithFence));

        // reading 1 needs a store observation, which only_these rules out
        let goal = parse_goal("M2:C3,M3:C3", &t.config).unwrap();
        target.goal = goal;
        assert!(matches!(find_trace(&t, &target, &ExploreOptions::default()), Err(TestgenError::Unreachable { .. })));
    }
}
