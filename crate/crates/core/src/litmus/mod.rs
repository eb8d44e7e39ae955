//! The litmus-test language.
//!
//! ```text
//! litmus "iriw-fence"
//! init { a1 = 0; a2 = 0; }
//! master M1 { I11: ST a1 #1; I12: ST a2 #1; }
//! master M2 { I21: LD R1 a1; I22: FENCE; I23: LD R2 a2; }
//! master M3 { I31: LD R1 a2; I32: FENCE; I33: LD R2 a1; }
//! forbidden ( M2:R1 = 1 /\ M3:R1 = 1 /\ M2:R2 = 0 /\ M3:R2 = 0 )
//! ```
//!
//! Addresses missing from `init` start at 0. Registers are per master, so
//! outcome atoms name both (`M2:R1`). `V0`/`V1` may be written for 0 and 1.

mod format;
mod lexer;
mod parser;
mod predicate;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::config::{InstrId, SystemConfig};

pub use format::format;
pub use parser::{parse, parse_predicate};
pub use predicate::OutcomePredicate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeMode {
    /// The predicate must never hold once the watched loads are observed.
    Forbidden,
    /// The predicate must always hold once the watched loads are observed.
    Required,
    /// The predicate must hold in at least one reachable outcome.
    Allowed,
}

impl OutcomeMode {
    pub fn keyword(self) -> &'static str {
        match self {
            OutcomeMode::Forbidden => "forbidden",
            OutcomeMode::Required => "required",
            OutcomeMode::Allowed => "allowed",
        }
    }
}

impl fmt::Display for OutcomeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LitmusTest {
    pub name: String,
    pub config: SystemConfig,
    pub outcome: OutcomePredicate,
    pub mode: OutcomeMode,
    /// Loads whose observation triggers outcome evaluation.
    pub watched_loads: BTreeSet<InstrId>,
}

impl LitmusTest {
    pub fn new(name: impl Into<String>, config: SystemConfig, outcome: OutcomePredicate, mode: OutcomeMode) -> Self {
        let watched_loads = config.loads().collect();
        LitmusTest { name: name.into(), config, outcome, mode, watched_loads }
    }
}

/// The machine configuration a litmus test describes.
pub fn to_config(test: &LitmusTest) -> SystemConfig {
    test.config.clone()
}

/// A message anchored at a source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LitmusError {
    #[error("parse error at {0}")]
    Parse(Diagnostic),
    #[error("invalid litmus test: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Diagnostic>),
}

impl LitmusError {
    pub fn diagnostics(&self) -> Vec<&Diagnostic> {
        match self {
            LitmusError::Parse(d) => vec![d],
            LitmusError::Validation(ds) => ds.iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::InstrKind;

    pub(crate) const IRIW_FENCE: &str = r#"litmus "iriw-fence"
init { a1 = 0; a2 = 0; }
master M1 { I11: ST a1 #1; I12: ST a2 #1; }
master M2 { I21: LD R1 a1; I22: FENCE; I23: LD R2 a2; }
master M3 { I31: LD R1 a2; I32: FENCE; I33: LD R2 a1; }
forbidden ( M2:R1 = 1 /\ M3:R1 = 1 /\ M2:R2 = 0 /\ M3:R2 = 0 )
"#;

    #[test]
    fn parses_iriw_fence() {
        let t = parse(IRIW_FENCE).unwrap();
        assert_eq!(t.name, "iriw-fence");
        assert_eq!(t.mode, OutcomeMode::Forbidden);
        let cfg = to_config(&t);
        let sizes: Vec<_> = cfg.master_ids().map(|m| cfg.program(m).len()).collect();
        assert_eq!(sizes, [2, 3, 3]);
        let i22 = cfg.instr(cfg.instr_by_name("I22").unwrap());
        assert_eq!((i22.kind, i22.index, cfg.master_name(i22.issuer)), (InstrKind::Fence, 2, "M2"));
        assert_eq!(t.watched_loads.len(), 4);
    }

    #[test]
    fn format_is_canonical_for_the_corpus_layout() {
        assert_eq!(format(&parse(IRIW_FENCE).unwrap()), IRIW_FENCE);
    }

    #[test]
    fn format_fills_in_default_init_and_keeps_mode() {
        let t = parse("litmus \"t\" master M1 { S: ST x #2; L: SCLD.ACQ R1 y; } required M1:R1 = 0").unwrap();
        assert_eq!(
            format(&t),
            "litmus \"t\"\ninit { x = 0; y = 0; }\nmaster M1 { S: ST x #2; L: SCLD.ACQ R1 y; }\nrequired M1:R1 = 0\n"
        );
        assert_eq!(t.config.instr(t.config.instr_by_name("L").unwrap()).kind, InstrKind::ScAcqLoad);
    }

    #[test]
    fn single_store_gives_single_program() {
        let t = parse("litmus \"one\" master M1 { I1: ST a #1; } allowed ~ M1:R1 = 0").unwrap_err();
        // no loads means no registers, so the outcome cannot name one
        assert!(matches!(t, LitmusError::Validation(_)));
        let t = parse("litmus \"one\" master M1 { I1: ST a #1; I2: LD R1 a; } allowed M1:R1 = 1").unwrap();
        assert_eq!(t.config.masters().len(), 1);
        assert_eq!(t.config.program(crate::config::MasterId(0)).len(), 2);
    }

    #[test]
    fn duplicate_instruction_id_is_reported_with_position() {
        let err = parse("litmus \"d\"\nmaster M1 { I1: LD R1 a; }\nmaster M2 { I1: LD R1 a; }\nallowed M1:R1 = 0")
            .unwrap_err();
        let LitmusError::Validation(ds) = err else { panic!("{err:?}") };
        assert_eq!(ds.len(), 1);
        assert!(ds[0].message.contains("I1"));
        assert_eq!((ds[0].line, ds[0].column), (3, 13));
    }

    #[test]
    fn undeclared_names_in_outcome_are_rejected() {
        for (outcome, needle) in [("M9:R1 = 0", "M9"), ("M1:R7 = 0", "R7"), ("M1:R1 = 5", "5")] {
            let src = format!("litmus \"u\" master M1 {{ I1: LD R1 a; }} forbidden {outcome}");
            let err = parse(&src).unwrap_err();
            let LitmusError::Validation(ds) = &err else { panic!("{err:?}") };
            assert!(ds[0].message.contains(needle), "{ds:?}");
        }
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = parse("litmus \"x\"\nmaster M1 { I1 ST a #1; }").unwrap_err();
        let LitmusError::Parse(d) = err else { panic!() };
        assert_eq!((d.line, d.column), (2, 16));
    }

    #[test]
    fn v_constants_are_values() {
        let t = parse("litmus \"v\" init { a = V1; } master M1 { I1: ST a #V0; I2: LD R1 a; } allowed M1:R1 = V1")
            .unwrap();
        assert_eq!(t.config.initial_memory(), [1]);
        assert_eq!(t.config.values(), [0, 1]);
    }
}
