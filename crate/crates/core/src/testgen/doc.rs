//! JSON test documents and their replay check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Expected, TestCase};
use crate::config::{SystemConfig, Value};
use crate::event::{NamedEvent, ResolveError};
use crate::explore::{replay, ReplayError};
use crate::litmus::{self, parse_predicate, LitmusError};
use crate::state::RegisterMap;

/// Register values keyed by master, then register name.
pub type NamedRegisters = BTreeMap<String, BTreeMap<String, Value>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpectedDoc {
    Exact(NamedRegisters),
    Allowed(Vec<NamedRegisters>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestDoc {
    pub name: String,
    /// Canonical litmus source of the test.
    pub litmus: String,
    pub steps: Vec<NamedEvent>,
    pub expected: ExpectedDoc,
    /// Outcome expression that must hold at the end of the steps.
    pub goal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DocError {
    #[error("litmus source: {0}")]
    Litmus(#[from] LitmusError),
    #[error("step {step}: {source}")]
    Step { step: usize, source: ResolveError },
    #[error("expected registers: {0}")]
    Registers(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Doc(#[from] DocError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("register file differs from the expected one")]
    Mismatch { expected: NamedRegisters, actual: NamedRegisters },
    #[error("final register file is not among the allowed outcomes")]
    NotAllowed { actual: NamedRegisters },
    #[error("not every watched load is observed at the end of the steps")]
    LoadsPending,
    #[error("goal does not hold at the end of the steps")]
    GoalNotMet,
}

pub fn named_registers(config: &SystemConfig, rf: &RegisterMap) -> NamedRegisters {
    config
        .master_ids()
        .map(|m| {
            let regs = config.registers().iter().cloned().zip(rf[m.index()].iter().copied()).collect();
            (config.master_name(m).to_owned(), regs)
        })
        .collect()
}

fn register_map(config: &SystemConfig, named: &NamedRegisters) -> Result<RegisterMap, DocError> {
    let mut rf = vec![vec![0; config.registers().len()]; config.masters().len()];
    for (m, regs) in named {
        let mi = config
            .master_by_name(m)
            .ok_or_else(|| DocError::Registers(format!("unknown master `{m}`")))?;
        for (r, v) in regs {
            let ri = config
                .register_by_name(r)
                .ok_or_else(|| DocError::Registers(format!("unknown register `{r}`")))?;
            rf[mi.index()][ri.index()] = *v;
        }
    }
    let complete = config.master_ids().all(|m| {
        named
            .get(config.master_name(m))
            .is_some_and(|regs| config.registers().iter().all(|r| regs.contains_key(r)))
    });
    if !complete {
        return Err(DocError::Registers("every register of every master must be given".into()));
    }
    Ok(rf)
}

pub fn emit_test(tc: &TestCase) -> TestDoc {
    let cfg = &tc.test.config;
    TestDoc {
        name: tc.name.clone(),
        litmus: litmus::format(&tc.test),
        steps: tc.trace.iter().map(|ev| ev.to_named(cfg)).collect(),
        expected: match &tc.expected {
            Expected::Exact(rf) => ExpectedDoc::Exact(named_registers(cfg, rf)),
            Expected::Allowed(set) => ExpectedDoc::Allowed(set.iter().map(|rf| named_registers(cfg, rf)).collect()),
        },
        goal: tc.goal.render(cfg),
    }
}

pub fn load_test(doc: &TestDoc) -> Result<TestCase, DocError> {
    let test = litmus::parse(&doc.litmus)?;
    let cfg = &test.config;
    let trace = doc
        .steps
        .iter()
        .enumerate()
        .map(|(step, ev)| ev.resolve(cfg).map_err(|source| DocError::Step { step, source }))
        .collect::<Result<_, _>>()?;
    let expected = match &doc.expected {
        ExpectedDoc::Exact(named) => Expected::Exact(register_map(cfg, named)?),
        ExpectedDoc::Allowed(list) => {
            Expected::Allowed(list.iter().map(|n| register_map(cfg, n)).collect::<Result<_, _>>()?)
        }
    };
    let goal = parse_predicate(&doc.goal, cfg)?;
    Ok(TestCase { name: doc.name.clone(), test, trace, expected, goal })
}

/// Replays the document's steps and checks the expected registers and goal.
pub fn verify_test(doc: &TestDoc) -> Result<TestCase, VerifyError> {
    let tc = load_test(doc)?;
    let cfg = &tc.test.config;
    let end = replay(cfg, &tc.trace)?;
    match &tc.expected {
        Expected::Exact(rf) if *rf != end.rf => {
            return Err(VerifyError::Mismatch {
                expected: named_registers(cfg, rf),
                actual: named_registers(cfg, &end.rf),
            })
        }
        Expected::Allowed(set) if !set.contains(&end.rf) => {
            return Err(VerifyError::NotAllowed { actual: named_registers(cfg, &end.rf) })
        }
        _ => {}
    }
    if !tc.test.watched_loads.is_subset(&end.observed) {
        return Err(VerifyError::LoadsPending);
    }
    if !tc.goal.eval(&end.rf) {
        return Err(VerifyError::GoalNotMet);
    }
    Ok(tc)
}
