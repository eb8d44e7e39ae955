use std::collections::BTreeMap;

use super::lexer::{tokenize, Pos, Tok, Token};
use super::{Diagnostic, LitmusError, LitmusTest, OutcomeMode, OutcomePredicate};
use crate::config::{InstrKind, InstrSpec, Op, ProgramSpec, SystemConfig, Value};

#[derive(Debug)]
enum RawPred {
    Atom { master: (String, Pos), register: (String, Pos), value: (Value, Pos) },
    Not(Box<RawPred>),
    And(Box<RawPred>, Box<RawPred>),
    Or(Box<RawPred>, Box<RawPred>),
}

struct RawInstr {
    id: String,
    pos: Pos,
    op: Op,
}

/// Name, initial values, masters, mode and outcome, before validation.
type RawTest = (String, Vec<(String, Value, Pos)>, Vec<RawMaster>, OutcomeMode, RawPred);

struct RawMaster {
    name: String,
    pos: Pos,
    instrs: Vec<RawInstr>,
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

fn diag(pos: Pos, message: impl Into<String>) -> Diagnostic {
    Diagnostic { line: pos.line, column: pos.column, message: message.into() }
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if t.tok != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, LitmusError> {
        let t = self.peek();
        Err(LitmusError::Parse(diag(t.pos, format!("expected {expected}, found {}", t.tok.describe()))))
    }

    fn expect(&mut self, tok: Tok) -> Result<Pos, LitmusError> {
        if self.peek().tok == tok {
            Ok(self.bump().pos)
        } else {
            self.error(&tok.describe())
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos, LitmusError> {
        if self.is_keyword(kw) {
            Ok(self.bump().pos)
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Pos), LitmusError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                Ok((s, self.bump().pos))
            }
            _ => self.error(what),
        }
    }

    fn value(&mut self) -> Result<(Value, Pos), LitmusError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Int(v) => {
                self.bump();
                Ok((*v, t.pos))
            }
            Tok::Ident(s) if s.len() > 1 && s.starts_with('V') && s[1..].bytes().all(|b| b.is_ascii_digit()) => {
                match s[1..].parse() {
                    Ok(v) => {
                        self.bump();
                        Ok((v, t.pos))
                    }
                    Err(_) => Err(LitmusError::Parse(diag(t.pos, format!("value `{s}` out of range")))),
                }
            }
            _ => self.error("a value"),
        }
    }

    fn test(&mut self) -> Result<RawTest, LitmusError> {
        self.keyword("litmus")?;
        let name = match &self.peek().tok {
            Tok::Str(s) => {
                let s = s.clone();
                self.bump();
                s
            }
            _ => return self.error("a quoted test name"),
        };
        let mut init = Vec::new();
        if self.is_keyword("init") {
            self.bump();
            self.expect(Tok::LBrace)?;
            while self.peek().tok != Tok::RBrace {
                let (addr, pos) = self.ident("an address or `}`")?;
                self.expect(Tok::Eq)?;
                let (v, _) = self.value()?;
                self.expect(Tok::Semi)?;
                init.push((addr, v, pos));
            }
            self.bump();
        }
        let mut masters = Vec::new();
        while self.is_keyword("master") {
            masters.push(self.master()?);
        }
        if masters.is_empty() {
            return self.error("`master`");
        }
        let mode = match &self.peek().tok {
            Tok::Ident(s) if s == "forbidden" => OutcomeMode::Forbidden,
            Tok::Ident(s) if s == "required" => OutcomeMode::Required,
            Tok::Ident(s) if s == "allowed" => OutcomeMode::Allowed,
            _ => return self.error("`master`, `forbidden`, `required` or `allowed`"),
        };
        self.bump();
        let pred = self.or()?;
        if self.peek().tok != Tok::Eof {
            return self.error("end of input");
        }
        Ok((name, init, masters, mode, pred))
    }

    fn master(&mut self) -> Result<RawMaster, LitmusError> {
        self.keyword("master")?;
        let (name, pos) = self.ident("a master name")?;
        self.expect(Tok::LBrace)?;
        let mut instrs = Vec::new();
        while self.peek().tok != Tok::RBrace {
            let (id, pos) = self.ident("an instruction id or `}`")?;
            self.expect(Tok::Colon)?;
            let op = self.instr()?;
            self.expect(Tok::Semi)?;
            instrs.push(RawInstr { id, pos, op });
        }
        self.bump();
        Ok(RawMaster { name, pos, instrs })
    }

    fn instr(&mut self) -> Result<Op, LitmusError> {
        let t = self.peek().clone();
        let kind = match &t.tok {
            Tok::Ident(s) => InstrKind::from_mnemonic(s),
            _ => None,
        };
        let Some(kind) = kind else {
            return self.error("an instruction (ST, LD, SCST.REL, SCLD.ACQ, FENCE)");
        };
        self.bump();
        Ok(match kind {
            InstrKind::Store | InstrKind::ScRelStore => {
                let (address, _) = self.ident("an address")?;
                self.expect(Tok::Hash)?;
                let (value, _) = self.value()?;
                if kind == InstrKind::Store {
                    Op::Store { address, value }
                } else {
                    Op::ScRelStore { address, value }
                }
            }
            InstrKind::Load | InstrKind::ScAcqLoad => {
                let (register, _) = self.ident("a register")?;
                let (address, _) = self.ident("an address")?;
                if kind == InstrKind::Load {
                    Op::Load { register, address }
                } else {
                    Op::ScAcqLoad { register, address }
                }
            }
            InstrKind::Fence => Op::Fence,
        })
    }

    fn or(&mut self) -> Result<RawPred, LitmusError> {
        let mut lhs = self.and()?;
        while self.peek().tok == Tok::Or {
            self.bump();
            lhs = RawPred::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<RawPred, LitmusError> {
        let mut lhs = self.unary()?;
        while self.peek().tok == Tok::And {
            self.bump();
            lhs = RawPred::And(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<RawPred, LitmusError> {
        match self.peek().tok {
            Tok::Not => {
                self.bump();
                Ok(RawPred::Not(Box::new(self.unary()?)))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.or()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            _ => {
                let master = self.ident("an outcome atom `M:R = v`")?;
                self.expect(Tok::Colon)?;
                let register = self.ident("a register")?;
                self.expect(Tok::Eq)?;
                let value = self.value()?;
                Ok(RawPred::Atom { master, register, value })
            }
        }
    }
}

fn resolve(raw: &RawPred, config: &SystemConfig, errors: &mut Vec<Diagnostic>) -> Option<OutcomePredicate> {
    Some(match raw {
        RawPred::Atom { master, register, value } => {
            let m = config.master_by_name(&master.0);
            if m.is_none() {
                errors.push(diag(master.1, format!("undeclared master `{}` in outcome", master.0)));
            }
            let r = config.register_by_name(&register.0);
            if r.is_none() {
                errors.push(diag(register.1, format!("register `{}` is not loaded by any instruction", register.0)));
            }
            if !config.values().contains(&value.0) {
                errors.push(diag(value.1, format!("value {} is never stored or initial", value.0)));
            }
            OutcomePredicate::atom(m?, r?, value.0)
        }
        RawPred::Not(p) => OutcomePredicate::Not(Box::new(resolve(p, config, errors)?)),
        RawPred::And(a, b) => {
            let (a, b) = (resolve(a, config, errors), resolve(b, config, errors));
            OutcomePredicate::And(Box::new(a?), Box::new(b?))
        }
        RawPred::Or(a, b) => {
            let (a, b) = (resolve(a, config, errors), resolve(b, config, errors));
            OutcomePredicate::Or(Box::new(a?), Box::new(b?))
        }
    })
}

/// Parses and validates a litmus test.
pub fn parse(text: &str) -> Result<LitmusTest, LitmusError> {
    let mut p = Parser { toks: tokenize(text)?, at: 0 };
    let (name, init, masters, mode, pred) = p.test()?;

    let mut errors = Vec::new();
    let mut seen_init = BTreeMap::new();
    for (addr, _, pos) in &init {
        if seen_init.insert(addr.as_str(), *pos).is_some() {
            errors.push(diag(*pos, format!("address `{addr}` initialised twice")));
        }
    }
    let mut seen_masters = BTreeMap::new();
    let mut seen_ids = BTreeMap::new();
    for m in &masters {
        if seen_masters.insert(m.name.as_str(), m.pos).is_some() {
            errors.push(diag(m.pos, format!("duplicate master `{}`", m.name)));
        }
        for i in &m.instrs {
            if seen_ids.insert(i.id.as_str(), i.pos).is_some() {
                errors.push(diag(i.pos, format!("duplicate instruction id `{}`", i.id)));
            }
        }
    }
    if !errors.is_empty() {
        return Err(LitmusError::Validation(errors));
    }

    let programs = masters
        .into_iter()
        .map(|m| ProgramSpec {
            master: m.name,
            instrs: m.instrs.into_iter().map(|i| InstrSpec { id: i.id, op: i.op }).collect(),
        })
        .collect();
    let config = SystemConfig::new(programs, init.into_iter().map(|(a, v, _)| (a, v)).collect())
        .map_err(|e| LitmusError::Validation(vec![diag(Pos { line: 1, column: 1 }, e.to_string())]))?;
    let outcome = resolve(&pred, &config, &mut errors);
    match outcome {
        Some(outcome) if errors.is_empty() => Ok(LitmusTest::new(name, config, outcome, mode)),
        _ => Err(LitmusError::Validation(errors)),
    }
}

/// Parses a standalone outcome expression against an existing configuration.
pub fn parse_predicate(text: &str, config: &SystemConfig) -> Result<OutcomePredicate, LitmusError> {
    let mut p = Parser { toks: tokenize(text)?, at: 0 };
    let raw = p.or()?;
    if p.peek().tok != Tok::Eof {
        return p.error("end of input");
    }
    let mut errors = Vec::new();
    match resolve(&raw, config, &mut errors) {
        Some(pred) if errors.is_empty() => Ok(pred),
        _ => Err(LitmusError::Validation(errors)),
    }
}
