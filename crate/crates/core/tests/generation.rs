mod support;

use std::collections::BTreeSet;

use weakmem::coverage::{cover, event_coverage, fired_events};
use weakmem::testgen::{emit_test, parse_goal, verify_test};
use weakmem::{find_trace, EventName, ExploreOptions, MasterId, TestTarget, TestgenError};

fn watched(t: &weakmem::LitmusTest) -> Vec<MasterId> {
    ["M2", "M3"].iter().map(|n| t.config.master_by_name(n).unwrap()).collect()
}

#[test]
fn every_pair_is_generated_exactly_when_explored_as_covered() {
    for name in ["iriw-fence", "iriw-atomic"] {
        let t = support::load(name);
        let m = watched(&t);
        let r = weakmem::explore(&t.config, &ExploreOptions::default()).unwrap();
        let rel = cover(&t, &r, &m);
        for tuple in rel.universe() {
            let goal = parse_goal(&format!("M2:C{},M3:C{}", tuple[0], tuple[1]), &t.config).unwrap();
            let found = find_trace(&t, &TestTarget::new(goal), &ExploreOptions::default());
            match found {
                Ok(tc) => {
                    assert!(rel.covered.contains(&tuple), "{name} {tuple:?}");
                    verify_test(&emit_test(&tc)).unwrap();
                }
                Err(TestgenError::Unreachable { .. }) => assert!(!rel.covered.contains(&tuple), "{name} {tuple:?}"),
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn only_these_restricts_observe_events() {
    let t = support::load("iriw-fence");
    let goal = parse_goal("M2:C3,M3:C3", &t.config).unwrap();
    let must: BTreeSet<_> = [EventName::ObserveStoreWithoutFence, EventName::ObserveLoadAfterStoreWithFence].into();
    let target = TestTarget { goal, must_cover: must.clone(), only_these: true };
    let tc = find_trace(&t, &target, &ExploreOptions::default()).unwrap();
    let fired: BTreeSet<_> = tc.trace.iter().map(|e| e.name).collect();
    assert!(fired.iter().all(|e| e.is_issue() || must.contains(e)));
    assert!(must.is_subset(&fired));
    verify_test(&emit_test(&tc)).unwrap();
}

#[test]
fn shortest_traces_are_no_longer_than_unrestricted_ones() {
    let t = support::load("mp-fence");
    let goal = parse_goal("M2:R1 = 1", &t.config).unwrap();
    let free = find_trace(&t, &TestTarget::new(goal.clone()), &ExploreOptions::default()).unwrap();
    let mut target = TestTarget::new(goal);
    target.must_cover = [EventName::ObserveStoreWithFence].into();
    let constrained = find_trace(&t, &target, &ExploreOptions::default()).unwrap();
    assert!(free.trace.len() <= constrained.trace.len());
}

#[test]
fn writer_side_fence_completes_event_coverage() {
    let suite = ["iriw-fence", "iriw-nofence", "iriw-atomic", "mp-fence"];
    let fired = suite.iter().map(|n| {
        let t = support::load(n);
        fired_events(&weakmem::explore(&t.config, &ExploreOptions::default()).unwrap())
    });
    let ec = event_coverage(fired);
    assert!(ec.is_full(), "{:?}", ec.uncovered());
}

#[test]
fn iriw_fence_alone_misses_atomic_events() {
    let t = support::load("iriw-fence");
    let ec = event_coverage([fired_events(&weakmem::explore(&t.config, &ExploreOptions::default()).unwrap())]);
    assert_eq!(ec.verdict(), "NOT-FULL");
    let missing = ec.uncovered();
    for e in [EventName::IssueScRelStore, EventName::IssueScAcqLoad, EventName::ObserveScRelStore, EventName::ObserveScAcqLoad] {
        assert!(missing.contains(&e));
    }
}
