//! Litmus configurations: masters, their programs, initial memory and the
//! finite address/register/value domains the machine ranges over.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Values stored in memory and registers.
pub type Value = u64;

/// Index of an instruction within [`SystemConfig::instructions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstrId(pub u32);

/// Index of a master within [`SystemConfig::masters`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MasterId(pub u16);

/// Index into the address domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AddrId(pub u16);

/// Index into the register domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegId(pub u16);

impl InstrId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl MasterId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl AddrId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RegId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Transaction kinds. Everything except `Fence` is a memory access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InstrKind {
    Store,
    Load,
    ScRelStore,
    ScAcqLoad,
    Fence,
}

impl InstrKind {
    pub const ALL: [InstrKind; 5] = [
        InstrKind::Store,
        InstrKind::Load,
        InstrKind::ScRelStore,
        InstrKind::ScAcqLoad,
        InstrKind::Fence,
    ];

    pub fn is_access(self) -> bool {
        self != InstrKind::Fence
    }

    pub fn is_store(self) -> bool {
        matches!(self, InstrKind::Store | InstrKind::ScRelStore)
    }

    pub fn is_load(self) -> bool {
        matches!(self, InstrKind::Load | InstrKind::ScAcqLoad)
    }

    pub fn is_atomic(self) -> bool {
        matches!(self, InstrKind::ScRelStore | InstrKind::ScAcqLoad)
    }

    /// The litmus keyword for this kind.
    pub fn mnemonic(self) -> &'static str {
        match self {
            InstrKind::Store => "ST",
            InstrKind::Load => "LD",
            InstrKind::ScRelStore => "SCST.REL",
            InstrKind::ScAcqLoad => "SCLD.ACQ",
            InstrKind::Fence => "FENCE",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<InstrKind> {
        InstrKind::ALL.into_iter().find(|k| k.mnemonic() == s)
    }
}

impl fmt::Display for InstrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// A single transaction of some master's program.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub name: String,
    pub kind: InstrKind,
    pub issuer: MasterId,
    /// 1-based program position.
    pub index: usize,
    pub address: Option<AddrId>,
    pub value: Option<Value>,
    pub register: Option<RegId>,
}

/// Name-level description of an instruction, used to build a [`SystemConfig`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    Store { address: String, value: Value },
    Load { register: String, address: String },
    ScRelStore { address: String, value: Value },
    ScAcqLoad { register: String, address: String },
    Fence,
}

impl Op {
    pub fn kind(&self) -> InstrKind {
        match self {
            Op::Store { .. } => InstrKind::Store,
            Op::Load { .. } => InstrKind::Load,
            Op::ScRelStore { .. } => InstrKind::ScRelStore,
            Op::ScAcqLoad { .. } => InstrKind::ScAcqLoad,
            Op::Fence => InstrKind::Fence,
        }
    }

    pub fn address(&self) -> Option<&str> {
        match self {
            Op::Store { address, .. }
            | Op::Load { address, .. }
            | Op::ScRelStore { address, .. }
            | Op::ScAcqLoad { address, .. } => Some(address),
            Op::Fence => None,
        }
    }

    pub fn register(&self) -> Option<&str> {
        match self {
            Op::Load { register, .. } | Op::ScAcqLoad { register, .. } => Some(register),
            _ => None,
        }
    }

    pub fn value(&self) -> Option<Value> {
        match self {
            Op::Store { value, .. } | Op::ScRelStore { value, .. } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstrSpec {
    pub id: String,
    pub op: Op,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProgramSpec {
    pub master: String,
    pub instrs: Vec<InstrSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("duplicate master `{0}`")]
    DuplicateMaster(String),
    #[error("duplicate instruction id `{0}`")]
    DuplicateInstruction(String),
    #[error("duplicate initial value for address `{0}`")]
    DuplicateInit(String),
    #[error("configuration too large: {0}")]
    TooLarge(&'static str),
    #[error("invalid configuration: {0}")]
    Invariant(String),
}

/// The litmus "context": masters, programs, initial memory and domains.
///
/// Domains are inferred: addresses and registers are those mentioned anywhere,
/// values are `0` plus every stored or initial value. Addresses and registers
/// are kept in natural order (`a2` before `a10`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SystemConfig {
    masters: Vec<String>,
    instructions: Vec<Instruction>,
    programs: Vec<Vec<InstrId>>,
    addresses: Vec<String>,
    registers: Vec<String>,
    values: Vec<Value>,
    initial: Vec<Value>,
}

impl SystemConfig {
    pub fn new(programs: Vec<ProgramSpec>, init: Vec<(String, Value)>) -> Result<Self, ConfigError> {
        let mut seen_masters = BTreeSet::new();
        let mut seen_ids = BTreeSet::new();
        for p in &programs {
            if !seen_masters.insert(p.master.as_str()) {
                return Err(ConfigError::DuplicateMaster(p.master.clone()));
            }
            for i in &p.instrs {
                if !seen_ids.insert(i.id.as_str()) {
                    return Err(ConfigError::DuplicateInstruction(i.id.clone()));
                }
            }
        }
        if programs.len() > 64 {
            return Err(ConfigError::TooLarge("at most 64 masters"));
        }
        if seen_ids.len() > u32::MAX as usize {
            return Err(ConfigError::TooLarge("too many instructions"));
        }

        let mut init_map = BTreeMap::new();
        for (a, v) in &init {
            if init_map.insert(a.clone(), *v).is_some() {
                return Err(ConfigError::DuplicateInit(a.clone()));
            }
        }

        let mut addr_set: BTreeSet<&str> = init_map.keys().map(String::as_str).collect();
        let mut reg_set = BTreeSet::new();
        let mut values: BTreeSet<Value> = init_map.values().copied().collect();
        values.insert(0);
        for p in &programs {
            for i in &p.instrs {
                if let Some(a) = i.op.address() {
                    addr_set.insert(a);
                }
                if let Some(r) = i.op.register() {
                    reg_set.insert(r);
                }
                if let Some(v) = i.op.value() {
                    values.insert(v);
                }
            }
        }
        let mut addresses: Vec<String> = addr_set.into_iter().map(str::to_owned).collect();
        addresses.sort_by(|a, b| natural_cmp(a, b));
        let mut registers: Vec<String> = reg_set.into_iter().map(str::to_owned).collect();
        registers.sort_by(|a, b| natural_cmp(a, b));
        if addresses.len() > u16::MAX as usize || registers.len() > u16::MAX as usize {
            return Err(ConfigError::TooLarge("domain exceeds 65535 entries"));
        }

        let addr_of = |name: &str| AddrId(addresses.iter().position(|a| a == name).unwrap() as u16);
        let reg_of = |name: &str| RegId(registers.iter().position(|r| r == name).unwrap() as u16);

        let mut instructions = Vec::new();
        let mut program_ids = Vec::new();
        let mut masters = Vec::new();
        for (m, p) in programs.iter().enumerate() {
            masters.push(p.master.clone());
            let mut ids = Vec::new();
            for (pos, i) in p.instrs.iter().enumerate() {
                let id = InstrId(instructions.len() as u32);
                instructions.push(Instruction {
                    name: i.id.clone(),
                    kind: i.op.kind(),
                    issuer: MasterId(m as u16),
                    index: pos + 1,
                    address: i.op.address().map(addr_of),
                    value: i.op.value(),
                    register: i.op.register().map(reg_of),
                });
                ids.push(id);
            }
            program_ids.push(ids);
        }
        let initial = addresses
            .iter()
            .map(|a| init_map.get(a).copied().unwrap_or(0))
            .collect();

        Ok(SystemConfig {
            masters,
            instructions,
            programs: program_ids,
            addresses,
            registers,
            values: values.into_iter().collect(),
            initial,
        })
    }

    /// A configuration with no masters at all.
    pub fn empty() -> Self {
        SystemConfig::new(Vec::new(), Vec::new()).expect("empty config is valid")
    }

    /// Re-checks the structural invariants of the configuration.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invariant(msg));
        if self.programs.len() != self.masters.len() {
            return bad("programs and masters differ in length".into());
        }
        let mut names = BTreeSet::new();
        for (m, prog) in self.programs.iter().enumerate() {
            for (pos, id) in prog.iter().enumerate() {
                let Some(instr) = self.instructions.get(id.index()) else {
                    return bad(format!("program of {} references unknown instruction", self.masters[m]));
                };
                if instr.issuer.index() != m || instr.index != pos + 1 {
                    return bad(format!("instruction {} is misplaced in its program", instr.name));
                }
            }
        }
        for instr in &self.instructions {
            if !names.insert(instr.name.as_str()) {
                return Err(ConfigError::DuplicateInstruction(instr.name.clone()));
            }
            let shape_ok = match instr.kind {
                InstrKind::Store | InstrKind::ScRelStore => {
                    instr.address.is_some() && instr.value.is_some() && instr.register.is_none()
                }
                InstrKind::Load | InstrKind::ScAcqLoad => {
                    instr.address.is_some() && instr.value.is_none() && instr.register.is_some()
                }
                InstrKind::Fence => instr.address.is_none() && instr.value.is_none() && instr.register.is_none(),
            };
            if !shape_ok {
                return bad(format!("instruction {} has fields inconsistent with {}", instr.name, instr.kind));
            }
            if instr.address.is_some_and(|a| a.index() >= self.addresses.len())
                || instr.register.is_some_and(|r| r.index() >= self.registers.len())
            {
                return bad(format!("instruction {} is outside the declared domains", instr.name));
            }
        }
        if self.initial.len() != self.addresses.len() {
            return bad("initial memory is not total on addresses".into());
        }
        Ok(())
    }

    pub fn masters(&self) -> &[String] {
        &self.masters
    }

    pub fn master_ids(&self) -> impl Iterator<Item = MasterId> + '_ {
        (0..self.masters.len()).map(|m| MasterId(m as u16))
    }

    pub fn master_name(&self, m: MasterId) -> &str {
        &self.masters[m.index()]
    }

    pub fn master_by_name(&self, name: &str) -> Option<MasterId> {
        self.masters.iter().position(|m| m == name).map(|m| MasterId(m as u16))
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn instr(&self, id: InstrId) -> &Instruction {
        &self.instructions[id.index()]
    }

    pub fn get_instr(&self, id: InstrId) -> Option<&Instruction> {
        self.instructions.get(id.index())
    }

    pub fn instr_ids(&self) -> impl Iterator<Item = InstrId> + '_ {
        (0..self.instructions.len()).map(|i| InstrId(i as u32))
    }

    pub fn instr_by_name(&self, name: &str) -> Option<InstrId> {
        self.instructions
            .iter()
            .position(|i| i.name == name)
            .map(|i| InstrId(i as u32))
    }

    pub fn program(&self, m: MasterId) -> &[InstrId] {
        &self.programs[m.index()]
    }

    /// The instruction at 1-based position `index` of master `m`.
    pub fn at(&self, m: MasterId, index: usize) -> Option<InstrId> {
        index.checked_sub(1).and_then(|i| self.programs[m.index()].get(i)).copied()
    }

    pub fn addresses(&self) -> &[String] {
        &self.addresses
    }

    pub fn address_name(&self, a: AddrId) -> &str {
        &self.addresses[a.index()]
    }

    pub fn address_by_name(&self, name: &str) -> Option<AddrId> {
        self.addresses.iter().position(|a| a == name).map(|a| AddrId(a as u16))
    }

    pub fn registers(&self) -> &[String] {
        &self.registers
    }

    pub fn register_name(&self, r: RegId) -> &str {
        &self.registers[r.index()]
    }

    pub fn register_by_name(&self, name: &str) -> Option<RegId> {
        self.registers.iter().position(|r| r == name).map(|r| RegId(r as u16))
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn initial_value(&self, a: AddrId) -> Value {
        self.initial[a.index()]
    }

    pub fn initial_memory(&self) -> &[Value] {
        &self.initial
    }

    pub fn loads(&self) -> impl Iterator<Item = InstrId> + '_ {
        self.instr_ids().filter(|&i| self.instr(i).kind.is_load())
    }

    pub fn stores_to(&self, a: AddrId) -> impl Iterator<Item = InstrId> + '_ {
        self.instr_ids()
            .filter(move |&i| self.instr(i).kind.is_store() && self.instr(i).address == Some(a))
    }

    /// Converts back to the name-level description.
    pub fn to_specs(&self) -> (Vec<ProgramSpec>, Vec<(String, Value)>) {
        let programs = self
            .master_ids()
            .map(|m| ProgramSpec {
                master: self.master_name(m).to_owned(),
                instrs: self
                    .program(m)
                    .iter()
                    .map(|&id| {
                        let i = self.instr(id);
                        let addr = || self.address_name(i.address.unwrap()).to_owned();
                        let reg = || self.register_name(i.register.unwrap()).to_owned();
                        let op = match i.kind {
                            InstrKind::Store => Op::Store { address: addr(), value: i.value.unwrap() },
                            InstrKind::Load => Op::Load { register: reg(), address: addr() },
                            InstrKind::ScRelStore => Op::ScRelStore { address: addr(), value: i.value.unwrap() },
                            InstrKind::ScAcqLoad => Op::ScAcqLoad { register: reg(), address: addr() },
                            InstrKind::Fence => Op::Fence,
                        };
                        InstrSpec { id: i.name.clone(), op }
                    })
                    .collect(),
            })
            .collect();
        let init = self
            .addresses
            .iter()
            .cloned()
            .zip(self.initial.iter().copied())
            .collect();
        (programs, init)
    }
}

/// Orders identifiers by alphabetic prefix, then by trailing number.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn split(s: &str) -> (&str, Option<u128>) {
        let cut = s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (head, digits) = s.split_at(cut);
        (head, digits.parse().ok())
    }
    let (ha, na) = split(a);
    let (hb, nb) = split(b);
    ha.cmp(hb).then(na.cmp(&nb)).then(a.cmp(b))
}
