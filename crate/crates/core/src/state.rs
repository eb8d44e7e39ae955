//! Machine state of the observation model and its structural invariants.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::config::{InstrId, InstrKind, MasterId, SystemConfig, Value};
use crate::kernel::KernelError;

/// One snapshot of the machine.
///
/// `lov` is indexed `[master][address]` and `rf` is indexed
/// `[master][register]`; both are total on their domains. `cursor` holds the
/// 1-based program position each master will issue next.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MachineState {
    pub issued: BTreeSet<InstrId>,
    pub observed: BTreeSet<InstrId>,
    pub observers: BTreeMap<InstrId, BTreeSet<MasterId>>,
    pub lov: Vec<Vec<Value>>,
    pub rf: Vec<Vec<Value>>,
    pub issued_fences: BTreeSet<InstrId>,
    pub after: BTreeMap<InstrId, BTreeSet<InstrId>>,
    pub cursor: Vec<usize>,
    pub atomic_order: Vec<InstrId>,
}

/// Register files of every master, `[master][register]`.
pub type RegisterMap = Vec<Vec<Value>>;

impl MachineState {
    pub fn observers_of(&self, x: InstrId) -> Option<&BTreeSet<MasterId>> {
        self.observers.get(&x)
    }

    pub fn has_observed(&self, m: MasterId, x: InstrId) -> bool {
        self.observers.get(&x).is_some_and(|o| o.contains(&m))
    }

    pub fn after_of(&self, s: InstrId) -> Option<&BTreeSet<InstrId>> {
        self.after.get(&s)
    }

    pub fn register_map(&self) -> &RegisterMap {
        &self.rf
    }
}

/// Builds the initial state: nothing issued, every master's view of memory is
/// the initial memory, and every register holds 0.
pub fn init_state(config: &SystemConfig) -> Result<MachineState, KernelError> {
    config.validate()?;
    let masters = config.masters().len();
    Ok(MachineState {
        issued: BTreeSet::new(),
        observed: BTreeSet::new(),
        observers: BTreeMap::new(),
        lov: vec![config.initial_memory().to_vec(); masters],
        rf: vec![vec![0; config.registers().len()]; masters],
        issued_fences: BTreeSet::new(),
        after: BTreeMap::new(),
        cursor: vec![1; masters],
        atomic_order: Vec::new(),
    })
}

/// A broken state invariant together with the offending elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

/// Returns every broken invariant of `state`; empty means the state is sound.
pub fn check_state_invariants(state: &MachineState, config: &SystemConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |invariant: &'static str, detail: String| out.push(Violation { invariant, detail });
    let name = |x: InstrId| {
        config
            .get_instr(x)
            .map(|i| i.name.clone())
            .unwrap_or_else(|| format!("#{}", x.0))
    };
    let masters = config.masters().len();

    for &x in &state.issued {
        match config.get_instr(x) {
            Some(i) if i.kind.is_access() => {}
            _ => push("inv1", format!("{} is issued but is not a memory access of the configuration", name(x))),
        }
    }
    for &x in &state.observed {
        if !state.issued.contains(&x) {
            push("inv2", format!("{} is observed but not issued", name(x)));
        }
    }
    for &x in &state.issued {
        if !state.observers.contains_key(&x) {
            push("observers-domain", format!("issued {} has no observers entry", name(x)));
        }
    }
    for (&x, obs) in &state.observers {
        if !state.issued.contains(&x) {
            push("observers-domain", format!("{} has observers but is not issued", name(x)));
        }
        if let Some(m) = obs.iter().find(|m| m.index() >= masters) {
            push("observers-range", format!("{} observed by unknown master #{}", name(x), m.0));
        }
        if let Some(i) = config.get_instr(x) {
            if i.kind.is_load() && obs.iter().any(|&m| m != i.issuer) {
                push("grd4", format!("load {} observed by a master other than its issuer", name(x)));
            }
            if !obs.is_empty() && !state.observed.contains(&x) {
                push("observed-flag", format!("{} has observers but is not in observed", name(x)));
            }
        }
    }
    for (&s, loads) in &state.after {
        let store = config.get_instr(s);
        if !state.issued.contains(&s) || !store.is_some_and(|i| i.kind.is_store()) {
            push("after-domain", format!("after({}) defined but {} is not an issued store", name(s), name(s)));
        }
        for &l in loads {
            let load = config.get_instr(l);
            let ok = state.issued.contains(&l)
                && load.is_some_and(|i| i.kind.is_load())
                && load.map(|i| i.address) == store.map(|i| i.address);
            if !ok {
                push("after-range", format!("{} in after({}) is not an issued load of the same address", name(l), name(s)));
            }
        }
    }
    for &f in &state.issued_fences {
        if !config.get_instr(f).is_some_and(|i| i.kind == InstrKind::Fence) {
            push("issuedfence", format!("{} is in issuedfence but is not a fence", name(f)));
        }
    }
    if state.lov.len() != masters || state.lov.iter().any(|v| v.len() != config.addresses().len()) {
        push("lov-total", "lov is not total on masters x addresses".into());
    }
    if state.rf.len() != masters || state.rf.iter().any(|v| v.len() != config.registers().len()) {
        push("rf-total", "rf is not total on masters x registers".into());
    }
    if state.cursor.len() != masters {
        push("cursor-range", "cursor is not total on masters".into());
    } else {
        for m in config.master_ids() {
            let c = state.cursor[m.index()];
            if c == 0 || c > config.program(m).len() + 1 {
                push("cursor-range", format!("cursor({}) = {} out of range", config.master_name(m), c));
            }
        }
    }
    for &x in &state.atomic_order {
        if !state.observed.contains(&x) || !config.get_instr(x).is_some_and(|i| i.kind.is_atomic()) {
            push("atomic-order", format!("{} in atomicOrder is not an observed atomic", name(x)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InstrSpec, Op, ProgramSpec};

    fn config() -> SystemConfig {
        SystemConfig::new(
            vec![
                ProgramSpec {
                    master: "M1".into(),
                    instrs: vec![InstrSpec { id: "I11".into(), op: Op::Store { address: "a1".into(), value: 1 } }],
                },
                ProgramSpec {
                    master: "M2".into(),
                    instrs: vec![InstrSpec {
                        id: "I21".into(),
                        op: Op::Load { register: "R1".into(), address: "a1".into() },
                    }],
                },
            ],
            vec![("a1".into(), 1)],
        )
        .unwrap()
    }

    #[test]
    fn init_copies_initial_memory_to_every_master() {
        let cfg = config();
        let s = init_state(&cfg).unwrap();
        assert_eq!(s.lov, vec![vec![1], vec![1]]);
        assert_eq!(s.rf, vec![vec![0], vec![0]]);
        assert_eq!(s.cursor, vec![1, 1]);
        assert!(check_state_invariants(&s, &cfg).is_empty());
    }

    #[test]
    fn empty_config_gives_empty_state() {
        let s = init_state(&SystemConfig::empty()).unwrap();
        assert!(s.issued.is_empty() && s.lov.is_empty() && s.rf.is_empty() && s.cursor.is_empty());
    }

    #[test]
    fn observed_outside_issued_is_inv2() {
        let cfg = config();
        let mut s = init_state(&cfg).unwrap();
        s.observed.insert(InstrId(0));
        let v = check_state_invariants(&s, &cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].invariant, "inv2");
    }

    #[test]
    fn load_observed_by_other_master_is_flagged() {
        let cfg = config();
        let mut s = init_state(&cfg).unwrap();
        let l = InstrId(1);
        s.issued.insert(l);
        s.observed.insert(l);
        s.observers.insert(l, [MasterId(0)].into());
        let v = check_state_invariants(&s, &cfg);
        assert!(v.iter().any(|v| v.invariant == "grd4"), "{v:?}");
    }
}
