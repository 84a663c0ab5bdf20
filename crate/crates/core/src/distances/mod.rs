//! Divergences between an event log's stochastic language and a model's.

mod levenshtein;
pub mod transport;

use serde::Serialize;
use thiserror::Error;

use crate::eventlog::{StochasticLanguage, Trace, MASS_TOLERANCE};
use crate::semantics::AnnotatedRG;
use crate::unfolding::{unfold_language, LanguageBudget, UnfoldResult};

pub use levenshtein::{levenshtein, normalized_levenshtein};
pub use transport::{Flow, TransportError, TransportPlan};

/// Probabilities below this are clamped inside the logarithm.
pub const PROB_CLAMP: f64 = 1e-12;
/// Model mass on the log's support below this counts as zero.
pub const MASS_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DistanceError {
    #[error("distributions must each have total mass 1 (got {source_mass} and {target_mass})")]
    InfeasibleMarginals { source_mass: f64, target_mass: f64 },
    #[error("model assigns mass {mass:e} to the log's traces")]
    ZeroModelMass { mass: f64 },
    #[error("target language is not complete (residual {0})")]
    IncompleteTarget(f64),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Pairwise trace costs, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: Vec<Trace>,
    cols: Vec<Trace>,
    cost: Vec<f64>,
}

impl CostMatrix {
    pub fn normalized_levenshtein(rows: Vec<Trace>, cols: Vec<Trace>) -> Self {
        let cost = rows
            .iter()
            .flat_map(|r| cols.iter().map(move |c| normalized_levenshtein(r.events(), c.events())))
            .collect();
        CostMatrix { rows, cols, cost }
    }

    pub fn rows(&self) -> &[Trace] {
        &self.rows
    }

    pub fn cols(&self) -> &[Trace] {
        &self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.cols.len() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.cost
    }
}

/// Earth mover's distance from `p` (over the cost rows) to `q` (over the
/// columns). Traces outside the rows or columns must carry no mass.
pub fn emd(p: &StochasticLanguage, q: &StochasticLanguage, cost: &CostMatrix) -> Result<TransportPlan, DistanceError> {
    let supply: Vec<f64> = cost.rows.iter().map(|t| p.prob(t)).collect();
    let demand: Vec<f64> = cost.cols.iter().map(|t| q.prob(t)).collect();
    let (sm, dm) = (supply.iter().sum::<f64>(), demand.iter().sum::<f64>());
    if (sm - 1.0).abs() > MASS_TOLERANCE || (dm - 1.0).abs() > MASS_TOLERANCE {
        return Err(DistanceError::InfeasibleMarginals { source_mass: sm, target_mass: dm });
    }
    Ok(transport::solve(&supply, &demand, &cost.cost)?)
}

/// Negated log-likelihood of the log under the model, in nats:
/// `-Σ L_E(t) ln max(L_N(t), PROB_CLAMP)`.
pub fn log_likelihood_divergence(target: &StochasticLanguage, model_probs: &UnfoldResult) -> f64 {
    log_likelihood_with(target, |t| model_probs.prob(t))
}

pub fn log_likelihood_with(target: &StochasticLanguage, model: impl Fn(&Trace) -> f64) -> f64 {
    -target
        .probs()
        .iter()
        .filter(|(_, &p)| p > 0.0)
        .map(|(t, &p)| p * model(t).max(PROB_CLAMP).ln())
        .sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DistanceKind {
    #[serde(rename = "LH")]
    Lh,
    #[serde(rename = "rEMD")]
    Remd,
    #[serde(rename = "tEMD")]
    Temd,
}

impl std::fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DistanceKind::Lh => "LH",
            DistanceKind::Remd => "rEMD",
            DistanceKind::Temd => "tEMD",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceReport {
    pub kind: DistanceKind,
    pub value: f64,
    /// Model mass on the log's support before renormalisation (rEMD).
    pub model_mass_on_log: Option<f64>,
    /// Model mass actually unfolded (tEMD).
    pub coverage_used: Option<f64>,
    /// Set when a tEMD budget bound before the requested coverage.
    pub partial: bool,
}

/// rEMD against a fixed log, with the cost matrix over the log's support
/// built once.
#[derive(Clone, Debug)]
pub struct RestrictedEmd {
    target: Vec<f64>,
    cost: CostMatrix,
}

impl RestrictedEmd {
    pub fn new(target: &StochasticLanguage) -> Result<Self, DistanceError> {
        if target.residual() > MASS_TOLERANCE {
            return Err(DistanceError::IncompleteTarget(target.residual()));
        }
        let support: Vec<Trace> = target.support().into_iter().cloned().collect();
        let probs = support.iter().map(|t| target.prob(t)).collect();
        Ok(RestrictedEmd { target: probs, cost: CostMatrix::normalized_levenshtein(support.clone(), support) })
    }

    pub fn support(&self) -> &[Trace] {
        self.cost.rows()
    }

    pub fn evaluate(&self, model: impl Fn(&Trace) -> f64) -> Result<DistanceReport, DistanceError> {
        let restricted: Vec<f64> = self.support().iter().map(model).collect();
        let mass: f64 = restricted.iter().sum();
        if mass < MASS_FLOOR {
            return Err(DistanceError::ZeroModelMass { mass });
        }
        let demand: Vec<f64> = restricted.iter().map(|p| p / mass).collect();
        let plan = transport::solve(&self.target, &demand, self.cost.values())?;
        Ok(DistanceReport {
            kind: DistanceKind::Remd,
            value: plan.cost.clamp(0.0, 1.0),
            model_mass_on_log: Some(mass),
            coverage_used: None,
            partial: false,
        })
    }
}

pub fn restricted_emd(target: &StochasticLanguage, model_probs: &UnfoldResult) -> Result<DistanceReport, DistanceError> {
    RestrictedEmd::new(target)?.evaluate(|t| model_probs.prob(t))
}

/// tEMD: unfolds the model up to `budget.coverage`, renormalises and
/// compares over the union of supports.
pub fn truncated_emd(
    target: &StochasticLanguage,
    model: &AnnotatedRG<'_>,
    budget: LanguageBudget,
) -> Result<DistanceReport, DistanceError> {
    if target.residual() > MASS_TOLERANCE {
        return Err(DistanceError::IncompleteTarget(target.residual()));
    }
    let unfolded = unfold_language(model, budget);
    let mass = unfolded.language.mass();
    let normalized = unfolded.language.normalized().ok_or(DistanceError::ZeroModelMass { mass })?;
    let rows: Vec<Trace> = target.support().into_iter().cloned().collect();
    let cols: Vec<Trace> = normalized.support().into_iter().cloned().collect();
    let cost = CostMatrix::normalized_levenshtein(rows, cols);
    let plan = emd(target, &normalized, &cost)?;
    Ok(DistanceReport {
        kind: DistanceKind::Temd,
        value: plan.cost.clamp(0.0, 1.0),
        model_mass_on_log: None,
        coverage_used: Some(mass),
        partial: !unfolded.coverage_reached,
    })
}
