use crate::config::{MasterId, RegId, SystemConfig, Value};

/// Boolean expression over register contents, `M:R = v` atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OutcomePredicate {
    Atom { master: MasterId, register: RegId, value: Value },
    Not(Box<OutcomePredicate>),
    And(Box<OutcomePredicate>, Box<OutcomePredicate>),
    Or(Box<OutcomePredicate>, Box<OutcomePredicate>),
}

impl OutcomePredicate {
    pub fn atom(master: MasterId, register: RegId, value: Value) -> Self {
        OutcomePredicate::Atom { master, register, value }
    }

    /// Left-nested conjunction of `parts`; `None` when empty.
    pub fn all(parts: impl IntoIterator<Item = OutcomePredicate>) -> Option<Self> {
        parts
            .into_iter()
            .reduce(|acc, p| OutcomePredicate::And(Box::new(acc), Box::new(p)))
    }

    /// Evaluates against register files indexed `[master][register]`.
    pub fn eval(&self, rf: &[Vec<Value>]) -> bool {
        match self {
            OutcomePredicate::Atom { master, register, value } => rf[master.index()][register.index()] == *value,
            OutcomePredicate::Not(p) => !p.eval(rf),
            OutcomePredicate::And(a, b) => a.eval(rf) && b.eval(rf),
            OutcomePredicate::Or(a, b) => a.eval(rf) || b.eval(rf),
        }
    }

    /// Renders in litmus syntax with the fewest parentheses that parse back
    /// to the same tree (`~` binds tighter than `/\`, which binds tighter
    /// than `\/`; both binary operators associate to the left).
    pub fn render(&self, config: &SystemConfig) -> String {
        let mut out = String::new();
        self.write(config, &mut out);
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            OutcomePredicate::Or(..) => 1,
            OutcomePredicate::And(..) => 2,
            OutcomePredicate::Not(..) | OutcomePredicate::Atom { .. } => 3,
        }
    }

    fn write_child(&self, config: &SystemConfig, out: &mut String, min: u8) {
        if self.precedence() < min {
            out.push_str("( ");
            self.write(config, out);
            out.push_str(" )");
        } else {
            self.write(config, out);
        }
    }

    fn write(&self, config: &SystemConfig, out: &mut String) {
        match self {
            OutcomePredicate::Atom { master, register, value } => {
                out.push_str(&format!(
                    "{}:{} = {}",
                    config.master_name(*master),
                    config.register_name(*register),
                    value
                ));
            }
            OutcomePredicate::Not(p) => {
                out.push_str("~ ");
                p.write_child(config, out, 3);
            }
            OutcomePredicate::And(a, b) | OutcomePredicate::Or(a, b) => {
                let (prec, op) = if matches!(self, OutcomePredicate::And(..)) { (2, "/\\") } else { (1, "\\/") };
                a.write_child(config, out, prec);
                out.push(' ');
                out.push_str(op);
                out.push(' ');
                b.write_child(config, out, prec + 1);
            }
        }
    }
}
