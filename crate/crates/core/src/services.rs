//! Services and service families.
//!
//! A service is a functional unit paired with a current state, or the empty
//! service that rejects every method. A family maps foci to services;
//! composing two families that share a focus collapses that focus to the
//! empty service.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::funit::FunctionalUnit;
use crate::isa::is_ident;
use crate::Natural;

/// Reply values `T`, `F` and `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reply {
    T,
    F,
    D,
}

impl Reply {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Reply::T
        } else {
            Reply::F
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Reply::T => Some(true),
            Reply::F => Some(false),
            Reply::D => None,
        }
    }
}

impl fmt::Display for Reply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reply::T => "T",
            Reply::F => "F",
            Reply::D => "D",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("state {0} is outside the unit's state space")]
    StateOutOfRange(Natural),
    #[error("`{0}` is not a valid focus")]
    InvalidFocus(String),
}

/// `H(s)`, or the empty service.
#[derive(Debug, Clone, PartialEq)]
pub enum Service {
    Empty,
    Unit { unit: Arc<FunctionalUnit>, state: Natural },
}

impl Service {
    pub fn new(unit: Arc<FunctionalUnit>, state: Natural) -> Result<Self, ServiceError> {
        if !unit.space().contains(&state) {
            return Err(ServiceError::StateOutOfRange(state));
        }
        Ok(Service::Unit { unit, state })
    }

    pub fn state(&self) -> Option<&Natural> {
        match self {
            Service::Empty => None,
            Service::Unit { state, .. } => Some(state),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Service::Empty)
    }
}

impl fmt::Display for Service {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Service::Empty => f.write_str("empty"),
            Service::Unit { state, .. } => write!(f, "{state}"),
        }
    }
}

/// Processes method `m`: reply plus the service it turns into.
pub fn service_step(s: &Service, m: &str) -> (Reply, Service) {
    match s {
        Service::Unit { unit, state } => match unit.get(m) {
            Some(op) => {
                let (b, next) = op.apply(state);
                (Reply::from_bool(b), Service::Unit { unit: Arc::clone(unit), state: next })
            }
            None => (Reply::D, Service::Empty),
        },
        Service::Empty => (Reply::D, Service::Empty),
    }
}

/// A finite map from foci to services.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServiceFamily {
    entries: BTreeMap<String, Service>,
}

impl ServiceFamily {
    /// The empty family `∅`.
    pub fn empty() -> Self {
        ServiceFamily::default()
    }

    /// `f.H`.
    pub fn singleton(focus: impl Into<String>, service: Service) -> Result<Self, ServiceError> {
        let focus = focus.into();
        if !is_ident(&focus) {
            return Err(ServiceError::InvalidFocus(focus));
        }
        Ok(ServiceFamily { entries: BTreeMap::from([(focus, service)]) })
    }

    /// `u ⊕ v`: union, with shared foci collapsing to the empty service.
    pub fn compose(&self, other: &ServiceFamily) -> ServiceFamily {
        let mut entries = self.entries.clone();
        for (f, s) in &other.entries {
            entries.entry(f.clone()).and_modify(|e| *e = Service::Empty).or_insert_with(|| s.clone());
        }
        ServiceFamily { entries }
    }

    /// `∂_F(u)`: drops every focus in `foci`.
    pub fn encapsulate(&self, foci: &BTreeSet<String>) -> ServiceFamily {
        let entries =
            self.entries.iter().filter(|(f, _)| !foci.contains(*f)).map(|(f, s)| (f.clone(), s.clone())).collect();
        ServiceFamily { entries }
    }

    pub fn get(&self, focus: &str) -> Option<&Service> {
        self.entries.get(focus)
    }

    pub fn foci(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Service)> {
        self.entries.iter().map(|(f, s)| (f.as_str(), s))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Replaces the service at an existing focus; used by execution, where
    /// `f.H ⊕ ∂_{f}(u)` becomes `f.H' ⊕ ∂_{f}(u)`.
    pub(crate) fn replace(&mut self, focus: &str, service: Service) {
        if let Some(slot) = self.entries.get_mut(focus) {
            *slot = service;
        }
    }
}

impl fmt::Display for ServiceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (focus, s)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{focus} -> {s}")?;
        }
        f.write_str("}")
    }
}

pub fn singleton(focus: impl Into<String>, service: Service) -> Result<ServiceFamily, ServiceError> {
    ServiceFamily::singleton(focus, service)
}

pub fn compose(u: &ServiceFamily, v: &ServiceFamily) -> ServiceFamily {
    u.compose(v)
}

pub fn encapsulate(foci: &BTreeSet<String>, u: &ServiceFamily) -> ServiceFamily {
    u.encapsulate(foci)
}
