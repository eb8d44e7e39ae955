use std::fmt::Write;

use super::{LitmusTest, OutcomePredicate};
use crate::config::InstrKind;

/// Canonical source text: one line per section, every address initialised
/// explicitly, masters in declaration order.
pub fn format(test: &LitmusTest) -> String {
    let cfg = &test.config;
    let mut out = String::new();
    writeln!(out, "litmus \"{}\"", test.name).unwrap();

    out.push_str("init {");
    for (a, v) in cfg.addresses().iter().zip(cfg.initial_memory()) {
        write!(out, " {a} = {v};").unwrap();
    }
    out.push_str(" }\n");

    for m in cfg.master_ids() {
        write!(out, "master {} {{", cfg.master_name(m)).unwrap();
        for &id in cfg.program(m) {
            let i = cfg.instr(id);
            write!(out, " {}: {}", i.name, i.kind.mnemonic()).unwrap();
            match i.kind {
                InstrKind::Store | InstrKind::ScRelStore => {
                    write!(out, " {} #{}", cfg.address_name(i.address.unwrap()), i.value.unwrap()).unwrap()
                }
                InstrKind::Load | InstrKind::ScAcqLoad => write!(
                    out,
                    " {} {}",
                    cfg.register_name(i.register.unwrap()),
                    cfg.address_name(i.address.unwrap())
                )
                .unwrap(),
                InstrKind::Fence => {}
            }
            out.push(';');
        }
        out.push_str(" }\n");
    }

    let body = test.outcome.render(cfg);
    match test.outcome {
        OutcomePredicate::And(..) | OutcomePredicate::Or(..) => {
            writeln!(out, "{} ( {} )", test.mode, body).unwrap()
        }
        _ => writeln!(out, "{} {}", test.mode, body).unwrap(),
    }
    out
}
