//! Shared helpers for the integration tests: the corpus, an independent
//! enumerator of reachable outcomes, and random configurations.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use weakmem::config::{InstrSpec, Op, ProgramSpec};
use weakmem::litmus::{parse, LitmusTest};
use weakmem::{fire, init_state, EventDescriptor, EventName, InstrId, InstrKind, MachineState, MasterId, RegisterMap, SystemConfig};

pub fn corpus_dir() -> PathBuf {
    let here = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let own = here.join("tests/corpus");
    if own.is_dir() {
        own
    } else {
        here.join("../core/tests/corpus")
    }
}

/// Every corpus file as (file stem, source text), sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "litmus"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect()
}

pub fn load(name: &str) -> LitmusTest {
    let text = std::fs::read_to_string(corpus_dir().join(format!("{name}.litmus"))).unwrap();
    parse(&text).unwrap()
}

/// Every syntactically possible event instance, whether enabled or not.
///
/// This deliberately ignores the kernel's own candidate generation: the
/// guards of `fire` alone decide which of these can happen.
pub fn all_event_instances(config: &SystemConfig) -> Vec<EventDescriptor> {
    let instrs: Vec<InstrId> = config.instr_ids().collect();
    let masters: Vec<MasterId> = config.master_ids().collect();
    let fences: Vec<Option<InstrId>> = std::iter::once(None)
        .chain(instrs.iter().filter(|&&i| config.instr(i).kind == InstrKind::Fence).map(|&i| Some(i)))
        .collect();
    let stores: Vec<Option<InstrId>> = std::iter::once(None)
        .chain(instrs.iter().filter(|&&i| config.instr(i).kind.is_store()).map(|&i| Some(i)))
        .collect();
    let mut out = Vec::new();
    for name in EventName::ALL {
        for &x in &instrs {
            if name.is_issue() {
                out.push(EventDescriptor::issue(name, x));
                continue;
            }
            for &m in &masters {
                for &f in &fences {
                    for &s in &stores {
                        out.push(EventDescriptor::observe(name, x, m).with_fence(f).with_store(s));
                    }
                }
            }
        }
    }
    out
}

pub struct OracleResult {
    pub finals: BTreeSet<RegisterMap>,
    /// Register files of states in which every watched load is observed.
    pub triggers: BTreeSet<RegisterMap>,
    pub states: usize,
    pub fired: BTreeSet<EventName>,
}

/// Depth-first enumeration of every reachable state, trying every event
/// instance against the guards.
///
/// States are remembered by structural equality, not by the explorer's
/// canonical key. Without that memory the interleavings of an 8-instruction
/// test number in the billions.
pub fn oracle(config: &SystemConfig, watched: &BTreeSet<InstrId>) -> OracleResult {
    let events = all_event_instances(config);
    let init = init_state(config).unwrap();
    let mut seen: HashSet<MachineState> = HashSet::new();
    let mut out = OracleResult { finals: BTreeSet::new(), triggers: BTreeSet::new(), states: 0, fired: BTreeSet::new() };
    let mut stack = vec![init.clone()];
    seen.insert(init);
    while let Some(s) = stack.pop() {
        if watched.is_subset(&s.observed) {
            out.triggers.insert(s.rf.clone());
        }
        let mut terminal = true;
        for ev in &events {
            if let Ok(next) = fire(&s, config, ev) {
                terminal = false;
                out.fired.insert(ev.name);
                if seen.insert(next.clone()) {
                    stack.push(next);
                }
            }
        }
        if terminal {
            out.finals.insert(s.rf.clone());
        }
    }
    out.states = seen.len();
    out
}

/// Final register files over every interleaving, with no state memory at
/// all. Only usable on very small configurations.
pub fn naive_finals(config: &SystemConfig) -> BTreeSet<RegisterMap> {
    fn go(s: &MachineState, config: &SystemConfig, events: &[EventDescriptor], out: &mut BTreeSet<RegisterMap>) {
        let mut terminal = true;
        for ev in events {
            if let Ok(next) = fire(s, config, ev) {
                terminal = false;
                go(&next, config, events, out);
            }
        }
        if terminal {
            out.insert(s.rf.clone());
        }
    }
    let events = all_event_instances(config);
    let mut out = BTreeSet::new();
    go(&init_state(config).unwrap(), config, &events, &mut out);
    out
}

/// A random configuration of 1 to 3 masters with up to `max_len`
/// instructions each over two addresses and values 1 and 2.
pub fn random_config(rng: &mut ChaCha8Rng, max_len: usize) -> SystemConfig {
    let masters = rng.gen_range(1..=3);
    let addrs = ["a1", "a2"];
    let programs = (0..masters)
        .map(|m| {
            let len = rng.gen_range(0..=max_len);
            let instrs = (0..len)
                .map(|p| {
                    let address = addrs[rng.gen_range(0..2)].to_string();
                    let register = format!("R{}", rng.gen_range(1..=2));
                    let value = rng.gen_range(1..=2);
                    let op = match rng.gen_range(0..5) {
                        0 => Op::Store { address, value },
                        1 => Op::Load { register, address },
                        2 => Op::Fence,
                        3 => Op::ScRelStore { address, value },
                        _ => Op::ScAcqLoad { register, address },
                    };
                    InstrSpec { id: format!("I{}{}", m + 1, p + 1), op }
                })
                .collect();
            ProgramSpec { master: format!("M{}", m + 1), instrs }
        })
        .collect();
    SystemConfig::new(programs, vec![("a1".into(), 0), ("a2".into(), 0)]).unwrap()
}

/// Projects register files onto the given masters.
pub fn project(maps: &BTreeSet<RegisterMap>, masters: &[MasterId]) -> BTreeSet<Vec<Vec<u64>>> {
    maps.iter().map(|rf| masters.iter().map(|m| rf[m.index()].clone()).collect()).collect()
}
