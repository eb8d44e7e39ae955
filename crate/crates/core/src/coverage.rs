//! Register-value coverage of a single test and event coverage of a suite.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value as Json};

use crate::config::{MasterId, SystemConfig, Value};
use crate::event::EventName;
use crate::explore::ExplorationResult;
use crate::litmus::LitmusTest;

/// Values of every register of one master, in register order.
pub type RegCombo = Vec<Value>;

/// Every assignment of `values` to `registers` registers, in lexicographic
/// order; position `i` is combination `Ci`.
pub fn reg_combos(registers: usize, values: &[Value]) -> Vec<RegCombo> {
    let mut out = vec![Vec::new()];
    for _ in 0..registers {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push(*v);
                    c
                })
            })
            .collect();
    }
    out
}

/// Reached combinations for an ordered tuple of watched masters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageRelation {
    pub watched: Vec<MasterId>,
    /// Every combination of the test's registers over its value domain.
    pub combos: Vec<RegCombo>,
    /// Reached tuples, as indices into `combos`.
    pub covered: BTreeSet<Vec<usize>>,
}

impl CoverageRelation {
    pub fn total(&self) -> usize {
        self.combos.len().pow(self.watched.len() as u32)
    }

    /// Every tuple of combination indices, in lexicographic order.
    pub fn universe(&self) -> Vec<Vec<usize>> {
        let indices: Vec<Value> = (0..self.combos.len() as Value).collect();
        reg_combos(self.watched.len(), &indices)
            .into_iter()
            .map(|t| t.into_iter().map(|i| i as usize).collect())
            .collect()
    }

    pub fn uncovered(&self) -> Vec<Vec<usize>> {
        self.universe().into_iter().filter(|t| !self.covered.contains(t)).collect()
    }

    pub fn label(tuple: &[usize]) -> String {
        tuple.iter().map(|i| format!("C{i}")).collect::<Vec<_>>().join(",")
    }
}

/// Records, for every explored state in which all watched loads have been
/// observed, the register combinations of the watched masters.
///
/// `result` must come from exploring `test` with its watched loads (the
/// default when the test watches all of its loads).
pub fn cover(test: &LitmusTest, result: &ExplorationResult, watched: &[MasterId]) -> CoverageRelation {
    let cfg = &test.config;
    let combos = reg_combos(cfg.registers().len(), cfg.values());
    let index: BTreeMap<&RegCombo, usize> = combos.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let covered = result
        .trigger_register_maps
        .iter()
        .map(|rf| watched.iter().map(|m| index[&rf[m.index()]]).collect())
        .collect();
    CoverageRelation { watched: watched.to_vec(), combos, covered }
}

fn combo_json(cfg: &SystemConfig, combo: &RegCombo) -> Json {
    Json::Object(cfg.registers().iter().zip(combo).map(|(r, v)| (r.clone(), json!(v))).collect())
}

pub fn coverage_json(test: &LitmusTest, rel: &CoverageRelation) -> Json {
    let cfg = &test.config;
    let tuple = |t: &Vec<usize>| t.iter().map(|i| format!("C{i}")).collect::<Vec<_>>();
    json!({
        "test": test.name,
        "watched": rel.watched.iter().map(|&m| cfg.master_name(m)).collect::<Vec<_>>(),
        "combos": rel.combos.iter().enumerate().map(|(i, c)| (format!("C{i}"), combo_json(cfg, c))).collect::<serde_json::Map<_, _>>(),
        "covered": rel.covered.iter().map(tuple).collect::<Vec<_>>(),
        "uncovered": rel.uncovered().iter().map(tuple).collect::<Vec<_>>(),
        "total": rel.total(),
    })
}

/// Which kernel events fired, per test and across the suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventCoverage {
    pub per_test: Vec<BTreeSet<EventName>>,
    pub fired: BTreeMap<EventName, bool>,
}

impl EventCoverage {
    pub fn is_full(&self) -> bool {
        self.fired.values().all(|&b| b)
    }

    pub fn verdict(&self) -> &'static str {
        if self.is_full() {
            "FULL"
        } else {
            "NOT-FULL"
        }
    }

    pub fn uncovered(&self) -> Vec<EventName> {
        self.fired.iter().filter(|(_, &b)| !b).map(|(&e, _)| e).collect()
    }

    pub fn to_json(&self) -> Json {
        json!({
            "verdict": self.verdict(),
            "fired": self.fired.iter().map(|(e, b)| (e.as_str().to_owned(), json!(b))).collect::<serde_json::Map<_, _>>(),
            "uncovered": self.uncovered().iter().map(|e| e.as_str()).collect::<Vec<_>>(),
        })
    }
}

/// Events that fired at least once during an exploration.
pub fn fired_events(result: &ExplorationResult) -> BTreeSet<EventName> {
    result.event_tally.iter().filter(|(_, &n)| n > 0).map(|(&e, _)| e).collect()
}

pub fn event_coverage(per_test: impl IntoIterator<Item = BTreeSet<EventName>>) -> EventCoverage {
    let per_test: Vec<_> = per_test.into_iter().collect();
    let fired = EventName::ALL
        .iter()
        .map(|&e| (e, per_test.iter().any(|s| s.contains(&e))))
        .collect();
    EventCoverage { per_test, fired }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explore::{explore, ExploreOptions};
    use crate::litmus::parse;

    #[test]
    fn combos_are_lexicographic() {
        assert_eq!(reg_combos(2, &[0, 1]), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(reg_combos(1, &[7]), vec![vec![7]]);
        assert_eq!(reg_combos(1, &[0, 1, 2]).len(), 3);
        assert_eq!(reg_combos(0, &[0, 1]), vec![Vec::<Value>::new()]);
    }

    #[test]
    fn universe_and_labels() {
        let rel = CoverageRelation { watched: vec![MasterId(0), MasterId(1)], combos: reg_combos(2, &[0, 1]), covered: BTreeSet::new() };
        assert_eq!(rel.total(), 16);
        assert_eq!(rel.universe().len(), 16);
        assert_eq!(rel.universe()[10], vec![2, 2]);
        assert_eq!(CoverageRelation::label(&[2, 2]), "C2,C2");
    }

    #[test]
    fn unobservable_trigger_covers_nothing() {
        let mut t = parse("litmus \"s\" master M1 { I1: ST a #1; F: FENCE; } master M2 { I2: LD R1 a; } allowed M2:R1 = 1")
            .unwrap();
        let r = explore(&t.config, &ExploreOptions::default()).unwrap();
        assert_eq!(cover(&t, &r, &[MasterId(1)]).covered.len(), 2);

        // fences never enter `observed`, so this trigger is never met
        t.watched_loads = [t.config.instr_by_name("F").unwrap()].into();
        let opts = ExploreOptions { watched: Some(t.watched_loads.clone()), ..Default::default() };
        let r = explore(&t.config, &opts).unwrap();
        let rel = cover(&t, &r, &[MasterId(1)]);
        assert!(rel.covered.is_empty());
        assert_eq!(rel.uncovered().len(), 2);
    }

    #[test]
    fn empty_suite_covers_no_event() {
        let ec = event_coverage(Vec::new());
        assert_eq!(ec.uncovered().len(), EventName::ALL.len());
        assert_eq!(ec.verdict(), "NOT-FULL");
    }
}
