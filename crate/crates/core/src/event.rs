//! Event instances of the transition system.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{InstrId, MasterId, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventName {
    IssueStore,
    IssueLoad,
    IssueFence,
    IssueScRelStore,
    IssueScAcqLoad,
    ObserveStoreWithFence,
    ObserveStoreWithoutFence,
    ObserveLoadHappensBeforeWithFence,
    ObserveLoadAfterStoreWithFence,
    ObserveLoadWithoutFence,
    ObserveLoadAfterStoreWithoutFence,
    ObserveScRelStore,
    ObserveScAcqLoad,
}

impl EventName {
    pub const ALL: [EventName; 13] = [
        EventName::IssueStore,
        EventName::IssueLoad,
        EventName::IssueFence,
        EventName::IssueScRelStore,
        EventName::IssueScAcqLoad,
        EventName::ObserveStoreWithFence,
        EventName::ObserveStoreWithoutFence,
        EventName::ObserveLoadHappensBeforeWithFence,
        EventName::ObserveLoadAfterStoreWithFence,
        EventName::ObserveLoadWithoutFence,
        EventName::ObserveLoadAfterStoreWithoutFence,
        EventName::ObserveScRelStore,
        EventName::ObserveScAcqLoad,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventName::IssueStore => "IssueStore",
            EventName::IssueLoad => "IssueLoad",
            EventName::IssueFence => "IssueFence",
            EventName::IssueScRelStore => "IssueScRelStore",
            EventName::IssueScAcqLoad => "IssueScAcqLoad",
            EventName::ObserveStoreWithFence => "ObserveStoreWithFence",
            EventName::ObserveStoreWithoutFence => "ObserveStoreWithoutFence",
            EventName::ObserveLoadHappensBeforeWithFence => "ObserveLoadHappensBeforeWithFence",
            EventName::ObserveLoadAfterStoreWithFence => "ObserveLoadAfterStoreWithFence",
            EventName::ObserveLoadWithoutFence => "ObserveLoadWithoutFence",
            EventName::ObserveLoadAfterStoreWithoutFence => "ObserveLoadAfterStoreWithoutFence",
            EventName::ObserveScRelStore => "ObserveScRelStore",
            EventName::ObserveScAcqLoad => "ObserveScAcqLoad",
        }
    }

    pub fn is_issue(self) -> bool {
        matches!(
            self,
            EventName::IssueStore
                | EventName::IssueLoad
                | EventName::IssueFence
                | EventName::IssueScRelStore
                | EventName::IssueScAcqLoad
        )
    }

    /// Bit position used for event-set masks.
    pub fn bit(self) -> u16 {
        1 << (self as u16)
    }

    /// Name of the parameter bound to [`EventDescriptor::target`].
    pub fn target_param(self) -> &'static str {
        match self {
            EventName::IssueFence => "f",
            e if e.is_issue() => "ma",
            EventName::ObserveStoreWithFence | EventName::ObserveStoreWithoutFence | EventName::ObserveScRelStore => "s",
            _ => "l",
        }
    }
}

impl fmt::Display for EventName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown event name `{0}`")]
pub struct UnknownEventName(pub String);

impl FromStr for EventName {
    type Err = UnknownEventName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventName::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| UnknownEventName(s.to_owned()))
    }
}

/// An event together with its parameter bindings.
///
/// `target` is the transaction being issued or observed (`ma`/`f` for issue
/// events, `s` for store observations, `l` for load observations). `master` is
/// the observing master `m`, `fence` the fence `f` whose ordering is checked,
/// and `store` the witness store `s` of a load observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventDescriptor {
    pub name: EventName,
    pub target: InstrId,
    pub master: Option<MasterId>,
    pub fence: Option<InstrId>,
    pub store: Option<InstrId>,
}

impl EventDescriptor {
    pub fn issue(name: EventName, target: InstrId) -> Self {
        EventDescriptor { name, target, master: None, fence: None, store: None }
    }

    pub fn observe(name: EventName, target: InstrId, master: MasterId) -> Self {
        EventDescriptor { name, target, master: Some(master), fence: None, store: None }
    }

    pub fn with_fence(mut self, fence: Option<InstrId>) -> Self {
        self.fence = fence;
        self
    }

    pub fn with_store(mut self, store: Option<InstrId>) -> Self {
        self.store = store;
        self
    }

    /// Parameter bindings with instruction and master names.
    pub fn named_params(&self, config: &SystemConfig) -> BTreeMap<String, String> {
        let instr = |x: InstrId| {
            config
                .get_instr(x)
                .map(|i| i.name.clone())
                .unwrap_or_else(|| format!("#{}", x.0))
        };
        let mut params = BTreeMap::new();
        params.insert(self.name.target_param().to_owned(), instr(self.target));
        if let Some(m) = self.master {
            params.insert("m".into(), config.masters().get(m.index()).cloned().unwrap_or_else(|| format!("#{}", m.0)));
        }
        if let Some(f) = self.fence {
            params.insert("f".into(), instr(f));
        }
        if let Some(s) = self.store {
            params.insert("s".into(), instr(s));
        }
        params
    }

    pub fn to_named(&self, config: &SystemConfig) -> NamedEvent {
        NamedEvent { event: self.name.as_str().to_owned(), params: self.named_params(config) }
    }

    pub fn display<'a>(&'a self, config: &'a SystemConfig) -> impl fmt::Display + 'a {
        DisplayEvent { ev: self, config }
    }
}

struct DisplayEvent<'a> {
    ev: &'a EventDescriptor,
    config: &'a SystemConfig,
}

impl fmt::Display for DisplayEvent<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.ev.name)?;
        let params = self.ev.named_params(self.config);
        for (i, (k, v)) in params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

/// Serializable, name-level form of an [`EventDescriptor`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedEvent {
    pub event: String,
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error(transparent)]
    UnknownEvent(#[from] UnknownEventName),
    #[error("event {event}: unknown {what} `{name}`")]
    UnknownName { event: String, what: &'static str, name: String },
    #[error("event {event}: missing parameter `{param}`")]
    MissingParam { event: String, param: &'static str },
    #[error("event {event}: unexpected parameter `{param}`")]
    UnexpectedParam { event: String, param: String },
}

impl NamedEvent {
    /// Resolves names against `config`. Shape checks beyond name resolution are
    /// left to the kernel, which reports them as guard or parameter errors.
    pub fn resolve(&self, config: &SystemConfig) -> Result<EventDescriptor, ResolveError> {
        let name: EventName = self.event.parse()?;
        let target_param = name.target_param();
        let lookup_instr = |param: &str| -> Result<Option<InstrId>, ResolveError> {
            match self.params.get(param) {
                None => Ok(None),
                Some(n) => config.instr_by_name(n).map(Some).ok_or_else(|| ResolveError::UnknownName {
                    event: self.event.clone(),
                    what: "instruction",
                    name: n.clone(),
                }),
            }
        };
        for key in self.params.keys() {
            let known = key == target_param || (!name.is_issue() && matches!(key.as_str(), "m" | "f" | "s"));
            if !known {
                return Err(ResolveError::UnexpectedParam { event: self.event.clone(), param: key.clone() });
            }
        }
        let target = lookup_instr(target_param)?.ok_or(ResolveError::MissingParam {
            event: self.event.clone(),
            param: target_param,
        })?;
        if name.is_issue() {
            return Ok(EventDescriptor::issue(name, target));
        }
        let master = match self.params.get("m") {
            None => return Err(ResolveError::MissingParam { event: self.event.clone(), param: "m" }),
            Some(n) => config.master_by_name(n).ok_or_else(|| ResolveError::UnknownName {
                event: self.event.clone(),
                what: "master",
                name: n.clone(),
            })?,
        };
        let (fence, store) = if target_param == "s" {
            (lookup_instr("f")?, None)
        } else {
            (lookup_instr("f")?, lookup_instr("s")?)
        };
        Ok(EventDescriptor { name, target, master: Some(master), fence, store })
    }
}
