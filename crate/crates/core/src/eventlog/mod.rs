//! Traces, event logs and stochastic languages.

pub mod tabular;
pub mod xes;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tabular::{parse_csv, write_csv, CsvColumns};
pub use xes::{parse_xes, write_xes};

/// A finite sequence of activity symbols. The empty trace is allowed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace(Vec<String>);

impl Trace {
    pub fn new(events: Vec<String>) -> Self {
        Trace(events)
    }

    pub fn empty() -> Self {
        Trace(Vec::new())
    }

    /// One activity per character: `Trace::from_chars("abc")` is ⟨a,b,c⟩.
    pub fn from_chars(s: &str) -> Self {
        Trace(s.chars().map(String::from).collect())
    }

    pub fn events(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, activity: impl Into<String>) {
        self.0.push(activity.into());
    }
}

impl<S: Into<String>> FromIterator<S> for Trace {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Trace(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}⟩", self.0.join(","))
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("event log is empty")]
    EmptyLog,
    #[error("malformed XES: {0}")]
    MalformedXes(String),
    #[error("event {event} of trace {trace} has no concept:name attribute")]
    MissingConceptName { trace: usize, event: usize },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}: unparseable timestamp {value:?}")]
    UnparseableTimestamp { row: usize, value: String },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// A multiset of traces.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    entries: BTreeMap<Trace, u64>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `frequency` occurrences of `trace`; zero is a no-op.
    pub fn add(&mut self, trace: Trace, frequency: u64) {
        if frequency > 0 {
            *self.entries.entry(trace).or_default() += frequency;
        }
    }

    pub fn entries(&self) -> &BTreeMap<Trace, u64> {
        &self.entries
    }

    pub fn frequency(&self, trace: &Trace) -> u64 {
        self.entries.get(trace).copied().unwrap_or(0)
    }

    /// Number of distinct traces.
    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    /// Number of traces counted with multiplicity.
    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.entries.keys().flat_map(|t| t.events().iter().cloned()).collect()
    }
}

impl FromIterator<Trace> for EventLog {
    fn from_iter<I: IntoIterator<Item = Trace>>(iter: I) -> Self {
        let mut log = EventLog::new();
        for t in iter {
            log.add(t, 1);
        }
        log
    }
}

/// Tolerance on `Σ probs + residual = 1`.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
#[error("invalid stochastic language: {0}")]
pub struct LanguageError(String);

/// A finite map from traces to probabilities, plus the mass not accounted
/// for (`residual`). A language with zero residual is complete.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StochasticLanguage {
    probs: BTreeMap<Trace, f64>,
    residual: f64,
}

impl StochasticLanguage {
    pub fn new(probs: BTreeMap<Trace, f64>, residual: f64) -> Result<Self, LanguageError> {
        if let Some((t, p)) = probs.iter().find(|(_, p)| !(0.0..=1.0 + MASS_TOLERANCE).contains(*p)) {
            return Err(LanguageError(format!("probability {p} of {t} outside [0,1]")));
        }
        if !(0.0..=1.0 + MASS_TOLERANCE).contains(&residual) {
            return Err(LanguageError(format!("residual {residual} outside [0,1]")));
        }
        let total: f64 = probs.values().sum::<f64>() + residual;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(LanguageError(format!("total mass {total} differs from 1")));
        }
        Ok(StochasticLanguage { probs, residual })
    }

    /// Builds a language whose residual absorbs whatever `probs` leaves out.
    pub fn defective(probs: BTreeMap<Trace, f64>) -> Result<Self, LanguageError> {
        let mass: f64 = probs.values().sum();
        Self::new(probs, (1.0 - mass).max(0.0))
    }

    pub fn probs(&self) -> &BTreeMap<Trace, f64> {
        &self.probs
    }

    pub fn prob(&self, trace: &Trace) -> f64 {
        self.probs.get(trace).copied().unwrap_or(0.0)
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn mass(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn is_complete(&self) -> bool {
        self.residual == 0.0
    }

    /// Traces with nonzero probability, in trace order.
    pub fn support(&self) -> Vec<&Trace> {
        self.probs.iter().filter(|(_, &p)| p > 0.0).map(|(t, _)| t).collect()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Rescaled to total mass 1 with zero residual; `None` when the mass is zero.
    pub fn normalized(&self) -> Option<Self> {
        let mass = self.mass();
        if mass <= 0.0 {
            return None;
        }
        let probs = self.probs.iter().map(|(t, p)| (t.clone(), p / mass)).collect();
        Some(StochasticLanguage { probs, residual: 0.0 })
    }

    /// Shannon entropy in nats of the listed probabilities.
    pub fn entropy(&self) -> f64 {
        -self.probs.values().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }
}

/// Empirical stochastic language: each trace's frequency over the total.
pub fn log_language(log: &EventLog) -> Result<StochasticLanguage, LogError> {
    let total = log.total();
    if total == 0 {
        return Err(LogError::EmptyLog);
    }
    let probs = log
        .entries
        .iter()
        .map(|(t, &f)| (t.clone(), f as f64 / total as f64))
        .collect();
    Ok(StochasticLanguage { probs, residual: 0.0 })
}
