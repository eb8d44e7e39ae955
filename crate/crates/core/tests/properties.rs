mod support;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weakmem::explore::explore_with;
use weakmem::{
    canonical_key, check_state_invariants, check_trace_orderings, enabled_events, fire, init_state, replay,
    EventDescriptor, ExploreOptions, MachineState, SystemConfig,
};

/// Walks a uniformly random path to a final state, checking every state on
/// the way. Returns the trace.
fn random_walk(config: &SystemConfig, rng: &mut ChaCha8Rng) -> Vec<EventDescriptor> {
    let mut state = init_state(config).unwrap();
    let mut trace = Vec::new();
    // last value each master observed per address, tracked outside the kernel
    let mut last: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    loop {
        let violations = check_state_invariants(&state, config);
        assert!(violations.is_empty(), "{violations:?} after {trace:?}");
        for m in config.master_ids() {
            for (a, _) in config.addresses().iter().enumerate() {
                let expected = last.get(&(m.index(), a)).copied().unwrap_or(config.initial_memory()[a]);
                assert_eq!(state.lov[m.index()][a], expected);
            }
        }
        let events = enabled_events(&state, config);
        if events.is_empty() {
            return trace;
        }
        let ev = events[rng.gen_range(0..events.len())];
        let next = fire(&state, config, &ev).unwrap();
        let x = config.instr(ev.target);
        if !ev.name.is_issue() && x.kind.is_store() {
            last.insert((ev.master.unwrap().index(), x.address.unwrap().index()), x.value.unwrap());
        }
        assert!(next.issued.is_superset(&state.issued));
        assert!(next.observed.is_superset(&state.observed));
        state = next;
        trace.push(ev);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_traces_preserve_invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = support::random_config(&mut rng, 3);
        for _ in 0..8 {
            let trace = random_walk(&config, &mut rng);
            let end = replay(&config, &trace).unwrap();
            prop_assert!(enabled_events(&end, &config).is_empty());
            let report = check_trace_orderings(&config, &trace).unwrap();
            prop_assert!(report.all_hold(), "{report:?}");
        }
    }

    #[test]
    fn explorer_matches_oracle_on_random_configs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = support::random_config(&mut rng, 2);
        let watched = config.loads().collect();
        let r = weakmem::explore(&config, &ExploreOptions::default()).unwrap();
        let o = support::oracle(&config, &watched);
        prop_assert_eq!(&r.final_register_maps, &o.finals);
        prop_assert_eq!(&r.trigger_register_maps, &o.triggers);
        prop_assert_eq!(r.state_count, o.states);
    }

    #[test]
    fn memoised_oracle_matches_plain_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = support::random_config(&mut rng, 2);
        prop_assume!(config.instructions().len() <= 3);
        let o = support::oracle(&config, &config.loads().collect());
        prop_assert_eq!(support::naive_finals(&config), o.finals);
    }

    #[test]
    fn canonical_key_identifies_states(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = support::random_config(&mut rng, 2);
        let by_key: RefCell<HashMap<Vec<u8>, MachineState>> = RefCell::default();
        let collect = |s: &MachineState| {
            by_key.borrow_mut().entry(canonical_key(s)).and_modify(|prev| assert_eq!(prev, s)).or_insert_with(|| s.clone());
            false
        };
        let r = explore_with(&config, &ExploreOptions::default(), Some(collect)).unwrap();
        prop_assert_eq!(by_key.borrow().len(), r.state_count);
    }

    #[test]
    fn worker_count_does_not_change_results(seed in any::<u64>(), workers in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = support::random_config(&mut rng, 2);
        let opts = ExploreOptions { max_states: 200_000, ..Default::default() };
        let one = weakmem::explore(&config, &opts).unwrap();
        let many = weakmem::explore(&config, &ExploreOptions { workers, ..opts }).unwrap();
        prop_assert_eq!(one, many);
    }
}

#[test]
fn single_store_lattice_matches_brute_force() {
    let t = support::load("single-store");
    // a store and an idle master: issue, then any non-empty observer subset
    let config = SystemConfig::new(
        vec![
            weakmem::config::ProgramSpec {
                master: "M1".into(),
                instrs: vec![weakmem::config::InstrSpec {
                    id: "I11".into(),
                    op: weakmem::config::Op::Store { address: "a1".into(), value: 1 },
                }],
            },
            weakmem::config::ProgramSpec { master: "M2".into(), instrs: vec![] },
        ],
        vec![],
    )
    .unwrap();
    let r = weakmem::explore(&config, &ExploreOptions::default()).unwrap();
    let o = support::oracle(&config, &Default::default());
    assert_eq!(r.state_count, o.states);
    assert_eq!(r.state_count, 5);
    // the corpus variant adds a load on M2
    let r = weakmem::explore(&t.config, &ExploreOptions::default()).unwrap();
    assert_eq!(r.state_count, support::oracle(&t.config, &t.watched_loads).states);
}
