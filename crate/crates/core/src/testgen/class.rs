//! Program classes generalised from a seed test and seeded suite sampling.
//!
//! A class keeps the seed's masters, addresses, registers and values and lets
//! each master run any program within the length bounds, drawn from the
//! allowed instruction kinds and subject to a synchronisation policy.
//!
//! Sampling uses ChaCha8 seeded from the suite seed; the generator's first
//! `count` outputs are the per-sample seeds, and each sample is drawn from a
//! fresh ChaCha8 seeded with its own seed, so any sample can be regenerated
//! alone from the manifest.

use std::collections::BTreeSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Expected, TestCase, TestgenError};
use crate::config::{InstrKind, InstrSpec, Op, ProgramSpec, SystemConfig, Value};
use crate::explore::{explore_with, ExploreError, ExploreOptions};
use crate::kernel::enabled_events;
use crate::litmus::{LitmusTest, OutcomeMode, OutcomePredicate};
use crate::state::MachineState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyncPolicy {
    /// Fences and atomics may appear anywhere the kinds allow.
    Free,
    /// No fences and no atomics.
    None,
    /// A master's first load, unless it is its last instruction, is
    /// immediately followed by a fence.
    FenceAfterFirstLoad,
}

impl SyncPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "free" => Some(SyncPolicy::Free),
            "none" => Some(SyncPolicy::None),
            "fence-after-first-load" => Some(SyncPolicy::FenceAfterFirstLoad),
            _ => None,
        }
    }

    /// Whether one master's program, given as instruction kinds, obeys the policy.
    pub fn admits(self, program: &[InstrKind]) -> bool {
        match self {
            SyncPolicy::Free => true,
            SyncPolicy::None => program.iter().all(|k| *k == InstrKind::Store || *k == InstrKind::Load),
            SyncPolicy::FenceAfterFirstLoad => match program.iter().position(|k| k.is_load()) {
                Some(i) if i + 1 < program.len() => program[i + 1] == InstrKind::Fence,
                _ => true,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bounds {
    pub min_len: usize,
    pub max_len: usize,
    pub kinds: BTreeSet<InstrKind>,
    pub policy: SyncPolicy,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { min_len: 0, max_len: 3, kinds: InstrKind::ALL.into_iter().collect(), policy: SyncPolicy::Free }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramClass {
    pub name: String,
    pub masters: Vec<String>,
    pub addresses: Vec<String>,
    pub registers: Vec<String>,
    /// Values stores may write.
    pub values: Vec<Value>,
    pub initial: Vec<(String, Value)>,
    pub bounds: Bounds,
    /// When set, the class holds exactly this test.
    pub singleton: Option<LitmusTest>,
}

impl ProgramClass {
    /// The class containing only `seed`.
    pub fn singleton(seed: &LitmusTest) -> Self {
        let mut class = generalize(seed, Bounds::default()).unwrap_or_else(|_| unreachable!("default bounds are valid"));
        class.singleton = Some(seed.clone());
        class
    }

    /// Whether `config` is a member of the class.
    pub fn admits(&self, config: &SystemConfig) -> bool {
        if let Some(seed) = &self.singleton {
            return seed.config == *config;
        }
        if config.masters() != self.masters.as_slice() {
            return false;
        }
        config.master_ids().all(|m| {
            let kinds: Vec<_> = config.program(m).iter().map(|&i| config.instr(i).kind).collect();
            let b = &self.bounds;
            (b.min_len..=b.max_len).contains(&kinds.len())
                && kinds.iter().all(|k| b.kinds.contains(k))
                && b.policy.admits(&kinds)
                && config.program(m).iter().all(|&i| {
                    let ins = config.instr(i);
                    ins.address.is_none_or(|a| self.addresses.iter().any(|x| x == config.address_name(a)))
                        && ins.register.is_none_or(|r| self.registers.iter().any(|x| x == config.register_name(r)))
                        && ins.value.is_none_or(|v| self.values.contains(&v))
                })
        })
    }

    fn instr_id(&self, master: usize, pos: usize) -> String {
        if self.masters.len() < 10 && self.bounds.max_len < 10 {
            format!("I{}{}", master + 1, pos + 1)
        } else {
            format!("I{}_{}", master + 1, pos + 1)
        }
    }

    fn sample_op(&self, rng: &mut ChaCha8Rng, kind: InstrKind) -> Op {
        let address = self.addresses[rng.gen_range(0..self.addresses.len())].clone();
        let value = self.values[rng.gen_range(0..self.values.len())];
        let register = self.registers[rng.gen_range(0..self.registers.len())].clone();
        match kind {
            InstrKind::Store => Op::Store { address, value },
            InstrKind::ScRelStore => Op::ScRelStore { address, value },
            InstrKind::Load => Op::Load { register, address },
            InstrKind::ScAcqLoad => Op::ScAcqLoad { register, address },
            InstrKind::Fence => Op::Fence,
        }
    }

    /// Draws one program per master.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> SystemConfig {
        if let Some(seed) = &self.singleton {
            return seed.config.clone();
        }
        let kinds: Vec<InstrKind> = self.bounds.kinds.iter().copied().collect();
        let programs = self
            .masters
            .iter()
            .enumerate()
            .map(|(mi, master)| {
                let len = rng.gen_range(self.bounds.min_len..=self.bounds.max_len);
                let mut chosen: Vec<InstrKind> = Vec::with_capacity(len);
                for _ in 0..len {
                    let forced_fence = self.bounds.policy == SyncPolicy::FenceAfterFirstLoad
                        && chosen.iter().filter(|k| k.is_load()).count() == 1
                        && chosen.last().is_some_and(|k| k.is_load());
                    let kind = if forced_fence {
                        InstrKind::Fence
                    } else {
                        kinds[rng.gen_range(0..kinds.len())]
                    };
                    chosen.push(kind);
                }
                let instrs = chosen
                    .into_iter()
                    .enumerate()
                    .map(|(pos, kind)| InstrSpec { id: self.instr_id(mi, pos), op: self.sample_op(rng, kind) })
                    .collect();
                ProgramSpec { master: master.clone(), instrs }
            })
            .collect();
        SystemConfig::new(programs, self.initial.clone()).expect("sampled programs use fresh ids and known names")
    }
}

/// Generalises `seed` into a class with its masters, addresses, registers and
/// values and free instruction mix within `bounds`.
pub fn generalize(seed: &LitmusTest, bounds: Bounds) -> Result<ProgramClass, TestgenError> {
    let cfg = &seed.config;
    if bounds.min_len > bounds.max_len {
        return Err(TestgenError::InvalidBounds(format!(
            "minimum length {} exceeds maximum {}",
            bounds.min_len, bounds.max_len
        )));
    }
    if bounds.max_len > 0 && bounds.kinds.is_empty() {
        return Err(TestgenError::InvalidBounds("no instruction kinds allowed".into()));
    }
    let needs_fence = bounds.policy == SyncPolicy::FenceAfterFirstLoad
        && bounds.max_len >= 2
        && bounds.kinds.iter().any(|k| k.is_load());
    if needs_fence && !bounds.kinds.contains(&InstrKind::Fence) {
        return Err(TestgenError::InvalidBounds("policy requires fences but FENCE is not an allowed kind".into()));
    }
    if bounds.policy == SyncPolicy::None && bounds.kinds.iter().any(|k| *k == InstrKind::Fence || k.is_atomic()) {
        return Err(TestgenError::InvalidBounds("policy forbids fences and atomics but the kinds include them".into()));
    }
    let uses = |pred: fn(InstrKind) -> bool| bounds.kinds.iter().any(|&k| pred(k));
    if uses(InstrKind::is_access) && cfg.addresses().is_empty() {
        return Err(TestgenError::InvalidBounds("the seed has no addresses".into()));
    }
    let mut registers = cfg.registers().to_vec();
    if registers.is_empty() {
        registers.push("R1".into());
    }
    let mut values: Vec<Value> = cfg.values().iter().copied().filter(|&v| v != 0).collect();
    if values.is_empty() {
        values.push(1);
    }
    Ok(ProgramClass {
        name: seed.name.clone(),
        masters: cfg.masters().to_vec(),
        addresses: cfg.addresses().to_vec(),
        registers,
        values,
        initial: cfg.addresses().iter().cloned().zip(cfg.initial_memory().iter().copied()).collect(),
        bounds,
        singleton: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub seed: u64,
    /// Name of the generated test, or why the sample was skipped.
    pub test: Option<String>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suite {
    pub seed: u64,
    pub tests: Vec<TestCase>,
    pub manifest: Vec<SampleRecord>,
}

const RESAMPLE_LIMIT: usize = 64;

/// Explores one sampled program and packages a witness run together with the
/// full set of allowed final register files.
pub fn sample_test(class: &ProgramClass, index: usize, seed: u64, opts: &ExploreOptions) -> Result<TestCase, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = (0..RESAMPLE_LIMIT)
        .map(|_| class.sample(&mut rng))
        .find(|c| c.loads().next().is_some())
        .ok_or_else(|| format!("no program with a load in {RESAMPLE_LIMIT} draws"))?;

    let is_final = |s: &MachineState| enabled_events(s, &config).is_empty();
    let result = explore_with(&config, opts, Some(is_final)).map_err(|e| match e {
        ExploreError::StateLimitExceeded(n) => format!("state limit of {n} states exceeded"),
        e => e.to_string(),
    })?;
    let witness = result.violation.expect("every finite exploration has a final state");

    // the witness outcome over every register some load of its master writes
    let atoms = config.master_ids().flat_map(|m| {
        let regs: BTreeSet<_> = config.program(m).iter().filter_map(|&i| config.instr(i).register).collect();
        let rf = &witness.state.rf;
        regs.into_iter().map(move |r| OutcomePredicate::atom(m, r, rf[m.index()][r.index()]))
    });
    let goal = OutcomePredicate::all(atoms).expect("the program has a load");
    let name = format!("{}-{index:03}", class.name);
    let test = LitmusTest::new(name.clone(), config, goal.clone(), OutcomeMode::Allowed);
    Ok(TestCase { name, test, trace: witness.trace, expected: Expected::Allowed(result.final_register_maps), goal })
}

/// Samples `count` programs from `class`, reproducibly for a given `seed`.
/// Samples that cannot be explored are skipped and recorded in the manifest.
pub fn generate_suite(class: &ProgramClass, count: usize, seed: u64, opts: &ExploreOptions) -> Suite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..count).map(|_| rng.next_u64()).collect();
    let mut tests = Vec::new();
    let mut manifest = Vec::new();
    for (index, &s) in seeds.iter().enumerate() {
        match sample_test(class, index, s, opts) {
            Ok(tc) => {
                manifest.push(SampleRecord { index, seed: s, test: Some(tc.name.clone()), skipped: None });
                tests.push(tc);
            }
            Err(reason) => manifest.push(SampleRecord { index, seed: s, test: None, skipped: Some(reason) }),
        }
    }
    Suite { seed, tests, manifest }
}
