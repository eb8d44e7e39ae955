//! Trace-level checks of the three observation orderings.
//!
//! * **po**: for accesses of one issuer that a fence, a release store or an
//!   acquire load synchronises, every master performs them in index order.
//! * **co**: every load returns the last value its issuer observed for the
//!   address, or the initial value.
//! * **hb**: a fenced or acquire load that read before store `s` is observed
//!   before every load that read after `s`.
//!
//! The checks work on the event sequence itself and re-enact it with
//! [`apply`], so they also judge traces the guards would reject.

use std::collections::BTreeMap;
use std::fmt;

use crate::config::{InstrId, InstrKind, MasterId, SystemConfig, Value};
use crate::event::{EventDescriptor, EventName};
use crate::explore::ReplayError;
use crate::kernel::apply;
use crate::state::init_state;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyStatus {
    Pass,
    Fail { step: usize, detail: String },
    /// The trace contains nothing the property constrains.
    NotApplicable,
}

impl PropertyStatus {
    pub fn is_fail(&self) -> bool {
        matches!(self, PropertyStatus::Fail { .. })
    }
}

impl fmt::Display for PropertyStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyStatus::Pass => f.write_str("pass"),
            PropertyStatus::Fail { step, detail } => write!(f, "fail at step {step}: {detail}"),
            PropertyStatus::NotApplicable => f.write_str("not applicable"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderingReport {
    pub po: PropertyStatus,
    pub co: PropertyStatus,
    pub hb: PropertyStatus,
}

impl OrderingReport {
    pub fn all_hold(&self) -> bool {
        !(self.po.is_fail() || self.co.is_fail() || self.hb.is_fail())
    }
}

/// Pairs `(a, b)` of one issuer, `a` before `b`, that must be performed in order.
fn synchronised_pairs(config: &SystemConfig) -> Vec<(InstrId, InstrId)> {
    let mut pairs = Vec::new();
    for m in config.master_ids() {
        let prog = config.program(m);
        for (i, &a) in prog.iter().enumerate() {
            let ak = config.instr(a).kind;
            if !ak.is_access() {
                continue;
            }
            for (j, &b) in prog.iter().enumerate().skip(i + 1) {
                let bk = config.instr(b).kind;
                if !bk.is_access() {
                    continue;
                }
                let fenced = prog[i + 1..j].iter().any(|&f| config.instr(f).kind == InstrKind::Fence);
                if fenced || bk == InstrKind::ScRelStore || ak == InstrKind::ScAcqLoad {
                    pairs.push((a, b));
                }
            }
        }
    }
    pairs
}

struct Timeline {
    /// Step at which each master observed each access.
    seen: BTreeMap<(InstrId, MasterId), usize>,
    /// Step of the first observation of each access.
    first: BTreeMap<InstrId, usize>,
}

impl Timeline {
    /// Step from which `a` counts as performed for `m`.
    fn performed(&self, config: &SystemConfig, a: InstrId, m: MasterId) -> Option<usize> {
        if config.instr(a).kind.is_store() {
            self.seen.get(&(a, m)).copied()
        } else {
            self.first.get(&a).copied()
        }
    }
}

fn check_po(config: &SystemConfig, timeline: &Timeline) -> PropertyStatus {
    let pairs = synchronised_pairs(config);
    if pairs.is_empty() {
        return PropertyStatus::NotApplicable;
    }
    let mut worst: Option<(usize, String)> = None;
    for (a, b) in pairs {
        for m in config.master_ids() {
            let Some(tb) = timeline.seen.get(&(b, m)).copied() else { continue };
            let ok = timeline.performed(config, a, m).is_some_and(|ta| ta < tb);
            if !ok && worst.as_ref().is_none_or(|(s, _)| tb < *s) {
                let detail = format!(
                    "{} observed {} before {} was performed for it",
                    config.master_name(m),
                    config.instr(b).name,
                    config.instr(a).name
                );
                worst = Some((tb, detail));
            }
        }
    }
    match worst {
        Some((step, detail)) => PropertyStatus::Fail { step, detail },
        None => PropertyStatus::Pass,
    }
}

#[derive(Clone, Copy)]
struct LoadObservation {
    step: usize,
    load: InstrId,
    store: Option<InstrId>,
    /// The witness store had already been observed by the load's issuer.
    read_after: bool,
    hb_guarded: bool,
}

fn check_hb(config: &SystemConfig, loads: &[LoadObservation]) -> PropertyStatus {
    let mut applicable = false;
    for l1 in loads.iter().filter(|l| l.hb_guarded && !l.read_after && l.store.is_some()) {
        applicable = true;
        let early = loads
            .iter()
            .find(|l2| l2.read_after && l2.store == l1.store && l2.step < l1.step);
        if let Some(l2) = early {
            return PropertyStatus::Fail {
                step: l1.step,
                detail: format!(
                    "{} read before {} after {} had already read after it",
                    config.instr(l1.load).name,
                    config.instr(l1.store.unwrap()).name,
                    config.instr(l2.load).name
                ),
            };
        }
    }
    if applicable {
        PropertyStatus::Pass
    } else {
        PropertyStatus::NotApplicable
    }
}

/// Checks po, co and hb on a concrete trace.
pub fn check_trace_orderings(config: &SystemConfig, trace: &[EventDescriptor]) -> Result<OrderingReport, ReplayError> {
    let mut state = init_state(config).map_err(|source| ReplayError { step: 0, source })?;
    let mut timeline = Timeline { seen: BTreeMap::new(), first: BTreeMap::new() };
    let mut last: BTreeMap<(MasterId, usize), Value> = BTreeMap::new();
    let mut loads = Vec::new();
    let mut co = PropertyStatus::NotApplicable;

    for (step, ev) in trace.iter().enumerate() {
        let next = apply(&state, config, ev).map_err(|source| ReplayError { step, source })?;
        if !ev.name.is_issue() {
            let m = ev.master.expect("apply validates the master");
            let xi = config.instr(ev.target);
            let addr = xi.address.expect("only accesses are observed").index();
            timeline.seen.entry((ev.target, m)).or_insert(step);
            timeline.first.entry(ev.target).or_insert(step);
            if xi.kind.is_store() {
                last.insert((m, addr), xi.value.unwrap());
            } else {
                let expected = last.get(&(m, addr)).copied().unwrap_or(config.initial_value(xi.address.unwrap()));
                let got = next.rf[m.index()][xi.register.unwrap().index()];
                if got != expected && !co.is_fail() {
                    co = PropertyStatus::Fail {
                        step,
                        detail: format!("{} returned {got}, expected {expected}", xi.name),
                    };
                } else if co == PropertyStatus::NotApplicable {
                    co = PropertyStatus::Pass;
                }
                let read_after = ev.store.is_some_and(|s| timeline.seen.get(&(s, m)).is_some_and(|&t| t < step));
                loads.push(LoadObservation {
                    step,
                    load: ev.target,
                    store: ev.store,
                    read_after,
                    hb_guarded: matches!(ev.name, EventName::ObserveLoadHappensBeforeWithFence | EventName::ObserveScAcqLoad),
                });
            }
        }
        state = next;
    }

    Ok(OrderingReport { po: check_po(config, &timeline), co, hb: check_hb(config, &loads) })
}
