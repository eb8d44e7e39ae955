//! Guarded transitions of the observation model.
//!
//! Every event is a pair of guard and action. [`fire`] checks the guards of
//! an event instance and returns the successor state; [`enabled_events`]
//! enumerates the candidate instances of each event and keeps those whose
//! guards hold, so the two can never disagree.
//!
//! Ordering rules, in the terms the guards use:
//!
//! * An access is *performed for* master `m` when `m` has observed it (stores),
//!   or when it has been observed at all (loads, which only their issuer ever
//!   observes).
//! * A fence `f` orders every access of its issuer that lies after it in
//!   program order behind every access ahead of it: the later access becomes
//!   observable to `m` only once all earlier ones are performed for `m`.
//!   The fence checked is the *governing* one: the nearest issued fence
//!   preceding the access, or, when the access precedes every issued fence,
//!   the earliest issued fence (for which the check is vacuous).
//! * A release store is observable to `m` only once every earlier access of
//!   its issuer is performed for `m`; an acquire load must be observed before
//!   any later access of its issuer is observable to anyone.
//! * Atomics join `atomic_order` at their first observation and every master
//!   observes atomic stores in that order.
//! * A load observed *before* a store `s` it could have read leaves `s`
//!   untouched; a load observed *after* `s` joins `after(s)`. Fenced and
//!   acquire loads may only be observed before `s` while `after(s)` is empty.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::config::{ConfigError, InstrId, InstrKind, Instruction, MasterId, SystemConfig, Value};
use crate::event::{EventDescriptor, EventName};
use crate::state::MachineState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error(transparent)]
    InvalidConfig(#[from] ConfigError),
    #[error("{0} is not a fence")]
    NotAFence(String),
    #[error("{event}: guard {guard} failed")]
    GuardFailed { event: EventName, guard: &'static str },
    #[error("{event}: bad parameters ({detail})")]
    BadParams { event: EventName, detail: &'static str },
    #[error("unknown instruction #{0}")]
    UnknownInstruction(u32),
    #[error("unknown master #{0}")]
    UnknownMaster(u16),
    #[error("{0} is not a load of the given master")]
    UnknownLoad(String),
}

/// Memory accesses of the fence's issuer that precede it in program order.
pub fn ahead_of(config: &SystemConfig, fence: InstrId) -> Result<BTreeSet<InstrId>, KernelError> {
    let f = config.get_instr(fence).ok_or(KernelError::UnknownInstruction(fence.0))?;
    if f.kind != InstrKind::Fence {
        return Err(KernelError::NotAFence(f.name.clone()));
    }
    Ok(config.program(f.issuer)[..f.index - 1]
        .iter()
        .copied()
        .filter(|&a| config.instr(a).kind.is_access())
        .collect())
}

/// The value a load issued by `m` would return now.
pub fn load_return_value(
    state: &MachineState,
    config: &SystemConfig,
    m: MasterId,
    l: InstrId,
) -> Result<Value, KernelError> {
    let instr = config.get_instr(l).ok_or(KernelError::UnknownInstruction(l.0))?;
    if !instr.kind.is_load() || instr.issuer != m {
        return Err(KernelError::UnknownLoad(instr.name.clone()));
    }
    Ok(state.lov[m.index()][instr.address.unwrap().index()])
}

fn performed_for(state: &MachineState, config: &SystemConfig, a: InstrId, m: MasterId) -> bool {
    if config.instr(a).kind.is_store() {
        state.has_observed(m, a)
    } else {
        state.observed.contains(&a)
    }
}

fn has_issued_fence(state: &MachineState, config: &SystemConfig, m: MasterId) -> bool {
    state.issued_fences.iter().any(|&f| config.instr(f).issuer == m)
}

/// The issued fence whose ordering applies to access `x`.
pub fn governing_fence(state: &MachineState, config: &SystemConfig, x: InstrId) -> Option<InstrId> {
    let xi = config.instr(x);
    let fences = state
        .issued_fences
        .iter()
        .copied()
        .filter(|&f| config.instr(f).issuer == xi.issuer);
    let mut before = None;
    let mut first_after = None;
    for f in fences {
        let fi = config.instr(f).index;
        if fi < xi.index {
            if before.is_none_or(|b: InstrId| config.instr(b).index < fi) {
                before = Some(f);
            }
        } else if first_after.is_none_or(|a: InstrId| config.instr(a).index > fi) {
            first_after = Some(f);
        }
    }
    before.or(first_after)
}

/// `x ∉ ahead(f) ⇒ every issued access ahead of f is performed for m`.
fn fence_orders(state: &MachineState, config: &SystemConfig, x: InstrId, f: InstrId, m: MasterId) -> bool {
    let fi = config.instr(f);
    if config.instr(x).index < fi.index {
        return true;
    }
    config.program(fi.issuer)[..fi.index - 1].iter().all(|&a| {
        !config.instr(a).kind.is_access() || !state.issued.contains(&a) || performed_for(state, config, a, m)
    })
}

/// Every earlier acquire load of `x`'s issuer has been observed.
fn acquires_done(state: &MachineState, config: &SystemConfig, x: InstrId) -> bool {
    let xi = config.instr(x);
    config.program(xi.issuer)[..xi.index - 1]
        .iter()
        .all(|&q| config.instr(q).kind != InstrKind::ScAcqLoad || state.observed.contains(&q))
}

/// Every earlier issued access of the release store's issuer is performed for `m`.
fn release_done(state: &MachineState, config: &SystemConfig, s: InstrId, m: MasterId) -> bool {
    let si = config.instr(s);
    config.program(si.issuer)[..si.index - 1].iter().all(|&a| {
        !config.instr(a).kind.is_access() || !state.issued.contains(&a) || performed_for(state, config, a, m)
    })
}

/// `m` has observed every atomic store that precedes `s` in the atomic order
/// (all of them, if `s` has not been observed yet).
fn sc_order_respected(state: &MachineState, config: &SystemConfig, s: InstrId, m: MasterId) -> bool {
    let end = state
        .atomic_order
        .iter()
        .position(|&x| x == s)
        .unwrap_or(state.atomic_order.len());
    state.atomic_order[..end]
        .iter()
        .all(|&t| !config.instr(t).kind.is_store() || state.has_observed(m, t))
}

fn issue_kind(name: EventName) -> Option<InstrKind> {
    Some(match name {
        EventName::IssueStore => InstrKind::Store,
        EventName::IssueLoad => InstrKind::Load,
        EventName::IssueFence => InstrKind::Fence,
        EventName::IssueScRelStore => InstrKind::ScRelStore,
        EventName::IssueScAcqLoad => InstrKind::ScAcqLoad,
        _ => return None,
    })
}

fn issue_event_for(kind: InstrKind) -> EventName {
    match kind {
        InstrKind::Store => EventName::IssueStore,
        InstrKind::Load => EventName::IssueLoad,
        InstrKind::Fence => EventName::IssueFence,
        InstrKind::ScRelStore => EventName::IssueScRelStore,
        InstrKind::ScAcqLoad => EventName::IssueScAcqLoad,
    }
}

struct Guards {
    event: EventName,
}

impl Guards {
    fn check(&self, cond: bool, guard: &'static str) -> Result<(), KernelError> {
        if cond {
            Ok(())
        } else {
            Err(KernelError::GuardFailed { event: self.event, guard })
        }
    }

    fn params(&self, cond: bool, detail: &'static str) -> Result<(), KernelError> {
        if cond {
            Ok(())
        } else {
            Err(KernelError::BadParams { event: self.event, detail })
        }
    }
}

fn instr_of(config: &SystemConfig, x: InstrId) -> Result<&Instruction, KernelError> {
    config.get_instr(x).ok_or(KernelError::UnknownInstruction(x.0))
}

/// Fence guards shared by the observe events: with a fence the event must
/// name the governing fence and its ordering must hold, without one the
/// issuer must not have issued any fence.
fn check_fence(
    g: &Guards,
    state: &MachineState,
    config: &SystemConfig,
    ev: &EventDescriptor,
    x: InstrId,
    m: MasterId,
    with_fence: bool,
) -> Result<(), KernelError> {
    let issuer = config.instr(x).issuer;
    if !with_fence {
        g.params(ev.fence.is_none(), "unexpected fence parameter")?;
        return g.check(!has_issued_fence(state, config, issuer), "grd-nofence");
    }
    let f = ev.fence.ok_or(KernelError::BadParams { event: ev.name, detail: "missing fence parameter" })?;
    let fi = instr_of(config, f)?;
    g.check(fi.kind == InstrKind::Fence && state.issued_fences.contains(&f), "grd5")?;
    g.check(fi.issuer == issuer, "grd6")?;
    g.check(governing_fence(state, config, x) == Some(f), "grd6-governing")?;
    g.check(fence_orders(state, config, x, f, m), "grd7")
}

/// Guards of the witness store of a load observation.
///
/// `Before` forms need a store to the load's address not yet observed by `m`
/// (issued or not), or, when no store to that address exists at all, no
/// witness. `After` forms need an issued store to that address that `m` has
/// observed.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Witness {
    Before { hb: bool },
    After,
}

fn check_witness(
    g: &Guards,
    state: &MachineState,
    config: &SystemConfig,
    ev: &EventDescriptor,
    l: &Instruction,
    m: MasterId,
    witness: Witness,
) -> Result<(), KernelError> {
    let address = l.address;
    match (witness, ev.store) {
        (Witness::Before { .. }, None) => g.check(config.stores_to(address.unwrap()).next().is_none(), "grd8-no-store"),
        (Witness::After, None) => Err(KernelError::BadParams { event: ev.name, detail: "missing store parameter" }),
        (Witness::Before { hb }, Some(s)) => {
            let si = instr_of(config, s)?;
            g.check(si.kind.is_store(), "grd8")?;
            g.check(si.address == address, "grd9")?;
            g.check(!state.has_observed(m, s), "grd10")?;
            if hb {
                g.check(state.after_of(s).is_none_or(BTreeSet::is_empty), "grd11")?;
            }
            Ok(())
        }
        (Witness::After, Some(s)) => {
            let si = instr_of(config, s)?;
            g.check(state.issued.contains(&s), "grd8")?;
            g.check(si.kind.is_store(), "grd9")?;
            g.check(si.address == address, "grd10")?;
            g.check(state.has_observed(m, s), "grd11")
        }
    }
}

/// Checks every guard of `ev` in `state`.
pub fn check_guards(state: &MachineState, config: &SystemConfig, ev: &EventDescriptor) -> Result<(), KernelError> {
    let g = Guards { event: ev.name };
    let x = ev.target;
    let xi = instr_of(config, x)?;

    if let Some(kind) = issue_kind(ev.name) {
        g.params(ev.master.is_none() && ev.fence.is_none() && ev.store.is_none(), "issue events take one parameter")?;
        g.check(xi.kind == kind, "grd1")?;
        let fresh = if kind == InstrKind::Fence {
            !state.issued_fences.contains(&x)
        } else {
            !state.issued.contains(&x)
        };
        g.check(fresh, "grd2")?;
        return g.check(state.cursor[xi.issuer.index()] == xi.index, "grd-program-order");
    }

    let m = ev.master.ok_or(KernelError::BadParams { event: ev.name, detail: "missing master parameter" })?;
    if m.index() >= config.masters().len() {
        return Err(KernelError::UnknownMaster(m.0));
    }

    match ev.name {
        EventName::ObserveStoreWithFence | EventName::ObserveStoreWithoutFence => {
            g.params(ev.store.is_none(), "unexpected witness parameter")?;
            g.check(state.issued.contains(&x), "grd1")?;
            g.check(xi.kind == InstrKind::Store, "grd2")?;
            g.check(!state.has_observed(m, x), "grd3")?;
            check_fence(&g, state, config, ev, x, m, ev.name == EventName::ObserveStoreWithFence)?;
            g.check(acquires_done(state, config, x), "grd-acquire")
        }
        EventName::ObserveScRelStore => {
            g.params(ev.store.is_none() && ev.fence.is_none(), "unexpected parameter")?;
            g.check(state.issued.contains(&x), "grd1")?;
            g.check(xi.kind == InstrKind::ScRelStore, "grd2")?;
            g.check(!state.has_observed(m, x), "grd3")?;
            g.check(release_done(state, config, x, m), "grd-release")?;
            g.check(sc_order_respected(state, config, x, m), "grd-sc-order")
        }
        EventName::ObserveLoadHappensBeforeWithFence
        | EventName::ObserveLoadAfterStoreWithFence
        | EventName::ObserveLoadWithoutFence
        | EventName::ObserveLoadAfterStoreWithoutFence => {
            g.check(state.issued.contains(&x), "grd1")?;
            g.check(xi.kind == InstrKind::Load, "grd2")?;
            g.check(!state.has_observed(m, x), "grd3")?;
            g.check(xi.issuer == m, "grd4")?;
            let (with_fence, witness) = match ev.name {
                EventName::ObserveLoadHappensBeforeWithFence => (true, Witness::Before { hb: true }),
                EventName::ObserveLoadAfterStoreWithFence => (true, Witness::After),
                EventName::ObserveLoadWithoutFence => (false, Witness::Before { hb: false }),
                _ => (false, Witness::After),
            };
            check_fence(&g, state, config, ev, x, m, with_fence)?;
            check_witness(&g, state, config, ev, xi, m, witness)?;
            g.check(acquires_done(state, config, x), "grd-acquire")
        }
        EventName::ObserveScAcqLoad => {
            g.check(state.issued.contains(&x), "grd1")?;
            g.check(xi.kind == InstrKind::ScAcqLoad, "grd2")?;
            g.check(!state.has_observed(m, x), "grd3")?;
            g.check(xi.issuer == m, "grd4")?;
            let fenced = has_issued_fence(state, config, m);
            check_fence(&g, state, config, ev, x, m, fenced)?;
            let witness = match ev.store {
                Some(s) if state.has_observed(m, s) => Witness::After,
                _ => Witness::Before { hb: true },
            };
            check_witness(&g, state, config, ev, xi, m, witness)?;
            g.check(acquires_done(state, config, x), "grd-acquire")
        }
        _ => unreachable!("issue events handled above"),
    }
}

/// Fires `ev`, returning the successor state. `state` is left untouched.
pub fn fire(state: &MachineState, config: &SystemConfig, ev: &EventDescriptor) -> Result<MachineState, KernelError> {
    check_guards(state, config, ev)?;
    apply(state, config, ev)
}

/// Performs the actions of `ev` without checking its guards.
///
/// Only the parameters needed by the actions are validated, so the result of
/// applying a disabled event may break the state invariants. Used to
/// re-enact traces that are not necessarily legal.
pub fn apply(state: &MachineState, config: &SystemConfig, ev: &EventDescriptor) -> Result<MachineState, KernelError> {
    let mut next = state.clone();
    let x = ev.target;
    let xi = instr_of(config, x)?;
    if issue_kind(ev.name).is_none() {
        let m = ev.master.ok_or(KernelError::BadParams { event: ev.name, detail: "missing master parameter" })?;
        if m.index() >= config.masters().len() {
            return Err(KernelError::UnknownMaster(m.0));
        }
        if !xi.kind.is_access() {
            return Err(KernelError::BadParams { event: ev.name, detail: "fences are not observed" });
        }
        if xi.kind.is_load() && matches!(ev.name, EventName::ObserveLoadAfterStoreWithFence | EventName::ObserveLoadAfterStoreWithoutFence) {
            let s = ev.store.ok_or(KernelError::BadParams { event: ev.name, detail: "missing store parameter" })?;
            instr_of(config, s)?;
        }
    }

    if issue_kind(ev.name).is_some() {
        if xi.kind == InstrKind::Fence {
            next.issued_fences.insert(x);
        } else {
            next.issued.insert(x);
            next.observers.insert(x, BTreeSet::new());
        }
        next.cursor[xi.issuer.index()] += 1;
        return Ok(next);
    }

    let m = ev.master.expect("validated above");
    let addr = xi.address.expect("observed transactions are accesses").index();
    next.observed.insert(x);
    next.observers.entry(x).or_default().insert(m);
    if xi.kind.is_store() {
        next.lov[m.index()][addr] = xi.value.expect("stores carry a value");
    } else {
        let reg = xi.register.expect("loads carry a register").index();
        next.rf[m.index()][reg] = state.lov[m.index()][addr];
        let joins_after = match ev.name {
            EventName::ObserveLoadAfterStoreWithFence | EventName::ObserveLoadAfterStoreWithoutFence => true,
            EventName::ObserveScAcqLoad => ev.store.is_some_and(|s| state.has_observed(m, s)),
            _ => false,
        };
        if joins_after {
            next.after.entry(ev.store.expect("validated above")).or_default().insert(x);
        }
    }
    if xi.kind.is_atomic() && !next.atomic_order.contains(&x) {
        next.atomic_order.push(x);
    }
    Ok(next)
}

/// Witness candidates for observing load `l` by its issuer `m`: every store to
/// the load's address, or no witness when there is none.
fn witness_candidates(config: &SystemConfig, l: &Instruction) -> Vec<Option<InstrId>> {
    let stores: Vec<_> = config.stores_to(l.address.unwrap()).map(Some).collect();
    if stores.is_empty() {
        vec![None]
    } else {
        stores
    }
}

/// Every event instance enabled in `state`, sorted and without duplicates.
pub fn enabled_events(state: &MachineState, config: &SystemConfig) -> Vec<EventDescriptor> {
    let mut candidates = Vec::new();

    for m in config.master_ids() {
        if let Some(x) = config.at(m, state.cursor[m.index()]) {
            candidates.push(EventDescriptor::issue(issue_event_for(config.instr(x).kind), x));
        }
    }

    for &x in &state.issued {
        let xi = config.instr(x);
        let fence = governing_fence(state, config, x);
        match xi.kind {
            InstrKind::Store | InstrKind::ScRelStore => {
                for m in config.master_ids() {
                    if state.has_observed(m, x) {
                        continue;
                    }
                    let ev = match (xi.kind, fence) {
                        (InstrKind::ScRelStore, _) => EventDescriptor::observe(EventName::ObserveScRelStore, x, m),
                        (_, Some(f)) => {
                            EventDescriptor::observe(EventName::ObserveStoreWithFence, x, m).with_fence(Some(f))
                        }
                        (_, None) => EventDescriptor::observe(EventName::ObserveStoreWithoutFence, x, m),
                    };
                    candidates.push(ev);
                }
            }
            InstrKind::Load | InstrKind::ScAcqLoad => {
                if state.observed.contains(&x) {
                    continue;
                }
                let m = xi.issuer;
                for s in witness_candidates(config, xi) {
                    let seen = s.is_some_and(|s| state.has_observed(m, s));
                    let name = match (xi.kind, fence.is_some(), seen) {
                        (InstrKind::ScAcqLoad, _, _) => EventName::ObserveScAcqLoad,
                        (_, true, false) => EventName::ObserveLoadHappensBeforeWithFence,
                        (_, true, true) => EventName::ObserveLoadAfterStoreWithFence,
                        (_, false, false) => EventName::ObserveLoadWithoutFence,
                        (_, false, true) => EventName::ObserveLoadAfterStoreWithoutFence,
                    };
                    candidates.push(EventDescriptor::observe(name, x, m).with_fence(fence).with_store(s));
                }
            }
            InstrKind::Fence => {}
        }
    }

    candidates.retain(|ev| check_guards(state, config, ev).is_ok());
    candidates.sort();
    candidates.dedup();
    candidates
}
