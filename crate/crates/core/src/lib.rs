//! Executable operational model of weakly consistent memory in the style of
//! the HSA observation semantics.
//!
//! Masters issue memory transactions into a memory system; each transaction
//! is later *observed* by masters, possibly in different orders by different
//! masters. Fences and acquire/release atomics constrain those orders. On top
//! of the transition kernel the crate provides a litmus-test language, an
//! exhaustive explorer, register-value and event coverage, and
//! model-checking-based test generation.

pub mod config;
pub mod coverage;
pub mod event;
pub mod explore;
pub mod kernel;
pub mod litmus;
pub mod ordering;
pub mod state;
pub mod testgen;

pub use config::{AddrId, InstrId, InstrKind, Instruction, MasterId, RegId, SystemConfig, Value};
pub use event::{EventDescriptor, EventName, NamedEvent};
pub use coverage::{cover, event_coverage, reg_combos, CoverageRelation, EventCoverage, RegCombo};
pub use explore::{
    canonical_key, check_outcome, explore, replay, Counterexample, ExploreError, ExploreOptions, ExplorationResult, ReplayError,
    Trace, Verdict,
};
pub use kernel::{ahead_of, apply, enabled_events, fire, load_return_value, KernelError};
pub use litmus::{LitmusError, LitmusTest, OutcomeMode, OutcomePredicate};
pub use ordering::{check_trace_orderings, OrderingReport, PropertyStatus};
pub use state::{check_state_invariants, init_state, MachineState, RegisterMap, Violation};
pub use testgen::{find_trace, Expected, Goal, TestCase, TestTarget, TestgenError};
