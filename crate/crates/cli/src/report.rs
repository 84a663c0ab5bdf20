use std::time::Duration;

use serde::Serialize;
use swn_core::eventlog::Trace;
use swn_core::net::LabeledPetriNet;
use swn_core::optimizer::{Measure, Method, StopReason};
use swn_core::unfolding::{LanguageUnfolding, UnfoldResult};
use swn_core::WeightVector;

#[derive(Serialize)]
pub struct Discover {
    pub schema: &'static str,
    pub command: &'static str,
    pub measure: Measure,
    pub method: Method,
    pub seed: u64,
    pub n0: usize,
    pub max_iter: usize,
    pub delta: f64,
    pub final_value: f64,
    pub start_value: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub evaluations: usize,
    pub weights: Vec<Weight>,
    pub distances: FinalDistances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

#[derive(Serialize)]
pub struct Weight {
    pub transition: String,
    pub label: Option<String>,
    pub weight: f64,
}

#[derive(Serialize)]
pub struct FinalDistances {
    pub lh: f64,
    /// Absent when the model gives the log's traces no mass.
    pub remd: Option<f64>,
    pub dropped_mass: f64,
}

#[derive(Serialize)]
pub struct Timings {
    pub unfold_ms: f64,
    pub lh_ms: f64,
    pub remd_ms: f64,
    pub optimization_ms: f64,
}

pub fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn weights(net: &LabeledPetriNet, w: &WeightVector) -> Vec<Weight> {
    net.transitions()
        .iter()
        .zip(w.values())
        .map(|(t, &weight)| Weight { transition: t.id.clone(), label: t.label.activity().map(str::to_string), weight })
        .collect()
}

#[derive(Serialize)]
pub struct TraceProb<'a> {
    pub trace: &'a Trace,
    pub prob: f64,
}

#[derive(Serialize)]
pub struct Unfolded<'a> {
    pub traces: Vec<TraceProb<'a>>,
    pub dropped_mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_reached: Option<bool>,
}

impl<'a> Unfolded<'a> {
    pub fn from_result(r: &'a UnfoldResult) -> Self {
        Unfolded {
            traces: r.probs.iter().map(|(trace, &prob)| TraceProb { trace, prob }).collect(),
            dropped_mass: r.dropped_mass,
            residual: None,
            coverage_reached: None,
        }
    }

    pub fn from_language(u: &'a LanguageUnfolding) -> Self {
        Unfolded {
            traces: u.language.probs().iter().map(|(trace, &prob)| TraceProb { trace, prob }).collect(),
            dropped_mass: u.dropped_mass,
            residual: Some(u.language.residual()),
            coverage_reached: Some(u.coverage_reached),
        }
    }
}
