//! Weight estimation: pick the best of `n0` random starts, then descend on
//! the chosen divergence in log-weight space.

mod local;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distances::{log_likelihood_divergence, DistanceError, RestrictedEmd};
use crate::eventlog::{StochasticLanguage, MASS_TOLERANCE};
use crate::net::{WeightVector, WorkflowNet};
use crate::semantics::{annotate, build_rg, ReachabilityGraph, SemanticsError};
use crate::unfolding::{trace_probabilities, PrefixIndex, UnfoldLimits, UnfoldResult};

pub use local::central_difference;

/// Objective value standing in for starts where rEMD is undefined.
pub const INVALID_PENALTY: f64 = 1e12;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error("every one of the {0} random starts gives the log's traces zero probability")]
    AllStartsInvalid(usize),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("target language must be complete and non-empty")]
    BadTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Lh,
    Remd,
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lh" => Ok(Measure::Lh),
            "remd" => Ok(Measure::Remd),
            other => Err(format!("unknown measure `{other}` (expected lh or remd)")),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Lh => "lh",
            Measure::Remd => "remd",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "fd-quasi-newton")]
    FdQuasiNewton,
    #[serde(rename = "derivative-free")]
    DerivativeFree,
}

impl Method {
    /// Smooth LH goes to the gradient method, piecewise-linear rEMD to the
    /// derivative-free one.
    pub fn default_for(measure: Measure) -> Method {
        match measure {
            Measure::Lh => Method::FdQuasiNewton,
            Measure::Remd => Method::DerivativeFree,
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fd-quasi-newton" | "bfgs" => Ok(Method::FdQuasiNewton),
            "derivative-free" | "powell" => Ok(Method::DerivativeFree),
            other => Err(format!("unknown method `{other}` (expected fd-quasi-newton or derivative-free)")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::FdQuasiNewton => "fd-quasi-newton",
            Method::DerivativeFree => "derivative-free",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StopReason {
    MaxIter,
    DeltaConverged,
    NoImprovement,
}

/// Everything the objective needs, prepared once per run.
#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    measure: Measure,
    rg: ReachabilityGraph,
    target: StochasticLanguage,
    index: PrefixIndex,
    limits: UnfoldLimits,
    remd: RestrictedEmd,
}

impl ObjectiveSpec {
    pub fn new(
        measure: Measure,
        net: &WorkflowNet,
        target: StochasticLanguage,
        limits: UnfoldLimits,
        state_cap: usize,
    ) -> Result<Self, OptimizerError> {
        Self::from_graph(measure, build_rg(net, state_cap)?, target, limits)
    }

    pub fn from_graph(
        measure: Measure,
        rg: ReachabilityGraph,
        target: StochasticLanguage,
        limits: UnfoldLimits,
    ) -> Result<Self, OptimizerError> {
        if target.residual() > MASS_TOLERANCE || target.support().is_empty() {
            return Err(OptimizerError::BadTarget);
        }
        let index = PrefixIndex::from_traces(target.support());
        let remd = RestrictedEmd::new(&target)?;
        Ok(ObjectiveSpec { measure, rg, target, index, limits, remd })
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn with_measure(&self, measure: Measure) -> Self {
        ObjectiveSpec { measure, ..self.clone() }
    }

    pub fn rg(&self) -> &ReachabilityGraph {
        &self.rg
    }

    pub fn target(&self) -> &StochasticLanguage {
        &self.target
    }

    pub fn transition_count(&self) -> usize {
        self.rg.transition_count()
    }

    /// Model probabilities of the log's traces under `w`.
    pub fn unfold(&self, w: &WeightVector) -> UnfoldResult {
        trace_probabilities(&annotate(&self.rg, w), &self.index, self.limits)
    }

    pub fn evaluate(&self, w: &WeightVector) -> Result<f64, OptimizerError> {
        let probs = self.unfold(w);
        match self.measure {
            Measure::Lh => Ok(log_likelihood_divergence(&self.target, &probs)),
            Measure::Remd => Ok(self.remd.evaluate(|t| probs.prob(t))?.value),
        }
    }

    /// [`ObjectiveSpec::evaluate`] with undefined values replaced by
    /// [`INVALID_PENALTY`].
    fn penalized(&self, w: &WeightVector) -> f64 {
        match self.evaluate(w) {
            Ok(v) => v,
            Err(_) => INVALID_PENALTY,
        }
    }
}

pub fn evaluate_objective(spec: &ObjectiveSpec, w: &WeightVector) -> Result<f64, OptimizerError> {
    spec.evaluate(w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub n0: usize,
    pub max_iter: usize,
    pub delta: f64,
    pub seed: u64,
    /// Box on every weight during descent.
    pub bounds: (f64, f64),
    /// Random starts are uniform on `(init_low, 1]`.
    pub init_low: f64,
    /// `None` picks [`Method::default_for`] the measure.
    pub method: Option<Method>,
    /// Evaluate the random starts on the rayon pool.
    pub parallel: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            n0: 10,
            max_iter: 50,
            delta: 1e-3,
            seed: 0,
            bounds: (1e-6, 1e6),
            init_low: 1e-3,
            method: None,
            parallel: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: &str| Err(OptimizerError::InvalidConfig(m.to_string()));
        let (lo, hi) = self.bounds;
        if self.n0 == 0 {
            return bad("n0 must be at least 1");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return bad("bounds must satisfy 0 < low < high");
        }
        if !(self.init_low > 0.0 && self.init_low < 1.0) {
            return bad("init_low must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn method_for(&self, measure: Measure) -> Method {
        self.method.unwrap_or_else(|| Method::default_for(measure))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizationResult {
    /// Optimised weights scaled so the largest is 1.
    pub weights: WeightVector,
    pub final_value: f64,
    pub start_value: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub method: Method,
    /// `(iteration, value)` after every accepted iteration, starting with
    /// iteration 0 at the start point.
    pub trace: Vec<(usize, f64)>,
    pub evaluations: usize,
}

/// Draws the `n0` starts in order from the seeded generator.
pub fn draw_starts(transitions: usize, config: &OptimizerConfig) -> Vec<WeightVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let span = 1.0 - config.init_low;
    (0..config.n0)
        .map(|_| {
            // 1 - U[0,1) lies in (0, 1]
            let w = (0..transitions).map(|_| 1.0 - rng.random::<f64>() * span).collect();
            WeightVector::new(w).expect("draws are positive")
        })
        .collect()
}

/// The best random start and its objective value; the earliest draw wins ties.
pub fn select_start(spec: &ObjectiveSpec, config: &OptimizerConfig) -> Result<(WeightVector, f64), OptimizerError> {
    config.validate()?;
    let starts = draw_starts(spec.transition_count(), config);
    let values: Vec<f64> = if config.parallel {
        starts.par_iter().map(|w| spec.penalized(w)).collect()
    } else {
        starts.iter().map(|w| spec.penalized(w)).collect()
    };
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    if values[best] >= INVALID_PENALTY {
        return Err(OptimizerError::AllStartsInvalid(config.n0));
    }
    let value = values[best];
    Ok((starts.into_iter().nth(best).expect("n0 >= 1"), value))
}

pub fn minimize(spec: &ObjectiveSpec, w0: &WeightVector, config: &OptimizerConfig) -> Result<OptimizationResult, OptimizerError> {
    config.validate()?;
    let method = config.method_for(spec.measure);
    let (lo, hi) = config.bounds;
    let log_bounds = (lo.ln(), hi.ln());
    let x0: Vec<f64> = w0.values().iter().map(|w| w.ln().clamp(log_bounds.0, log_bounds.1)).collect();
    let mut evaluations = 0;
    let mut objective = |x: &[f64]| {
        evaluations += 1;
        let w = WeightVector::new(x.iter().map(|v| v.exp()).collect()).expect("exp is positive");
        spec.penalized(&w)
    };
    let run = local::descend(&mut objective, x0, log_bounds, method, config);
    let weights = WeightVector::new(run.x.iter().map(|v| v.exp()).collect()).expect("exp is positive").normalized_max();
    let final_value = run.trace.last().expect("trace starts with the start point").1;
    Ok(OptimizationResult {
        weights,
        final_value,
        start_value: run.trace[0].1,
        iterations: run.trace.len() - 1,
        stop_reason: run.stop_reason,
        method,
        trace: run.trace,
        evaluations,
    })
}

/// Random-restart selection followed by local descent.
pub fn optimized_weights(spec: &ObjectiveSpec, config: &OptimizerConfig) -> Result<OptimizationResult, OptimizerError> {
    let (w0, _) = select_start(spec, config)?;
    let mut result = minimize(spec, &w0, config)?;
    result.evaluations += config.n0;
    Ok(result)
}

/// The convergence trace as `iteration,value` CSV.
pub fn convergence_csv(trace: &[(usize, f64)]) -> String {
    let mut out = String::from("iteration,value\n");
    for (i, v) in trace {
        out.push_str(&format!("{i},{v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::{log_language, Trace};
    use crate::fixtures;
    use crate::semantics::DEFAULT_STATE_CAP;

    fn parallel_choice(measure: Measure) -> ObjectiveSpec {
        let target = log_language(&fixtures::parallel_choice_log()).unwrap();
        ObjectiveSpec::new(measure, &fixtures::parallel_choice_net(), target, UnfoldLimits::default(), DEFAULT_STATE_CAP)
            .unwrap()
    }

    fn nested_loop(measure: Measure) -> ObjectiveSpec {
        let target = log_language(&fixtures::nested_loop_log()).unwrap();
        ObjectiveSpec::new(measure, &fixtures::nested_loop_net(), target, UnfoldLimits::default(), DEFAULT_STATE_CAP)
            .unwrap()
    }

    /// LH of the parallel-choice net in closed form, over log weights.
    fn parallel_choice_lh(x: &[f64]) -> f64 {
        let (b, c, d) = (x[1].exp(), x[2].exp(), x[3].exp());
        let s = b + c + d;
        let p = [b / s * c / (c + d), c / s, b / s * d / (c + d), d / s];
        let e = [0.15, 0.35, 0.15, 0.35];
        -p.iter().zip(e).map(|(p, e)| e * p.ln()).sum::<f64>()
    }

    #[test]
    fn objective_examples() {
        let w = fixtures::parallel_choice_weights();
        let lh = parallel_choice(Measure::Lh).evaluate(&w).unwrap();
        assert!((lh - 1.3040115).abs() < 1e-7);
        assert_eq!(parallel_choice(Measure::Remd).evaluate(&w).unwrap(), 0.0);
        let x: Vec<f64> = w.values().iter().map(|v| v.ln()).collect();
        assert!((lh - parallel_choice_lh(&x)).abs() < 1e-12);
    }

    #[test]
    fn scale_gauge() {
        for spec in [parallel_choice(Measure::Lh), parallel_choice(Measure::Remd), nested_loop(Measure::Lh), nested_loop(Measure::Remd)] {
            for w in draw_starts(spec.transition_count(), &OptimizerConfig { n0: 5, seed: 3, ..OptimizerConfig::default() }) {
                let base = spec.evaluate(&w).unwrap();
                for c in [0.1, 10.0] {
                    assert!((spec.evaluate(&w.scaled(c)).unwrap() - base).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn finite_differences_decay_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let spec = parallel_choice(Measure::Lh);
        let f = |x: &[f64]| {
            spec.evaluate(&WeightVector::new(x.iter().map(|v| v.exp()).collect()).unwrap()).unwrap()
        };
        for _ in 0..10 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let exact = analytic_gradient(&x);
            let g1 = central_difference(&f, &x, 1e-2);
            let g2 = central_difference(&f, &x, 5e-3);
            for k in 1..4 {
                let ratio = (g1[k] - exact[k]).abs() / (g2[k] - exact[k]).abs();
                assert!((ratio - 4.0).abs() <= 0.8, "coordinate {k}: ratio {ratio}");
            }
        }
    }

    fn analytic_gradient(x: &[f64]) -> Vec<f64> {
        let (b, c, d) = (x[1].exp(), x[2].exp(), x[3].exp());
        let s = b + c + d;
        // LH = -Σ e·ln p with ln p(abc) = ln b - ln s + ln c - ln(c+d), etc.
        // d/dx_k = w_k · d/dw_k
        let db = -(0.15 / b + 0.15 / b) + 1.0 / s;
        let dc = -(0.15 / c + 0.35 / c) + 1.0 / s + 0.3 / (c + d);
        let dd = -(0.15 / d + 0.35 / d) + 1.0 / s + 0.3 / (c + d);
        vec![0.0, b * db, c * dc, d * dd, 0.0]
    }

    #[test]
    fn select_start_rules() {
        let spec = parallel_choice(Measure::Lh);
        let one = OptimizerConfig { n0: 1, seed: 9, ..OptimizerConfig::default() };
        let (w, _) = select_start(&spec, &one).unwrap();
        assert_eq!(w, draw_starts(5, &one)[0]);
        let cfg = OptimizerConfig { n0: 10, seed: 9, ..OptimizerConfig::default() };
        assert_eq!(select_start(&spec, &cfg).unwrap(), select_start(&spec, &cfg).unwrap());
        let sequential = OptimizerConfig { parallel: false, ..cfg.clone() };
        assert_eq!(select_start(&spec, &cfg).unwrap(), select_start(&spec, &sequential).unwrap());
        for w in draw_starts(5, &cfg) {
            assert!(w.values().iter().all(|&v| v > 1e-3 && v <= 1.0));
        }
    }

    #[test]
    fn constant_objective_picks_first_draw() {
        // the log's trace is the only one the net can produce, so every start scores 0
        let net = crate::net::NetBuilder::new()
            .place("i", 1)
            .place("o", 0)
            .transition("a", crate::net::Label::Activity("a".into()))
            .transition("b", crate::net::Label::Activity("a".into()))
            .arc("i", "a")
            .arc("a", "o")
            .arc("i", "b")
            .arc("b", "o")
            .build()
            .unwrap();
        let wn = WorkflowNet::infer(net).unwrap();
        let mut log = crate::eventlog::EventLog::new();
        log.add(Trace::from_chars("a"), 3);
        let spec =
            ObjectiveSpec::new(Measure::Remd, &wn, log_language(&log).unwrap(), UnfoldLimits::default(), DEFAULT_STATE_CAP)
                .unwrap();
        let cfg = OptimizerConfig { n0: 6, seed: 1, max_iter: 1, ..OptimizerConfig::default() };
        let (w, v) = select_start(&spec, &cfg).unwrap();
        assert_eq!(w, draw_starts(2, &cfg)[0]);
        assert_eq!(v, 0.0);
        let r = minimize(&spec, &w, &cfg).unwrap();
        assert!(matches!(r.stop_reason, StopReason::DeltaConverged | StopReason::NoImprovement | StopReason::MaxIter));
        assert_eq!(r.weights, w.normalized_max());
    }

    #[test]
    fn recovers_parallel_choice() {
        let cfg = OptimizerConfig { seed: 42, ..OptimizerConfig::default() };
        let remd = optimized_weights(&parallel_choice(Measure::Remd), &cfg).unwrap();
        assert!(remd.final_value <= 1e-3, "{remd:?}");
        let lh = optimized_weights(&parallel_choice(Measure::Lh), &cfg).unwrap();
        assert!((lh.final_value - 1.3040115).abs() <= 1e-3, "{lh:?}");
        let again = optimized_weights(&parallel_choice(Measure::Remd), &cfg).unwrap();
        assert_eq!(remd, again);
    }

    #[test]
    fn all_starts_invalid() {
        let mut log = crate::eventlog::EventLog::new();
        log.add(Trace::from_chars("zz"), 1);
        let spec = ObjectiveSpec::new(
            Measure::Remd,
            &fixtures::parallel_choice_net(),
            log_language(&log).unwrap(),
            UnfoldLimits::default(),
            DEFAULT_STATE_CAP,
        )
        .unwrap();
        assert!(matches!(
            optimized_weights(&spec, &OptimizerConfig::default()),
            Err(OptimizerError::AllStartsInvalid(10))
        ));
    }

    #[test]
    fn traces_never_increase() {
        for spec in [parallel_choice(Measure::Lh), parallel_choice(Measure::Remd), nested_loop(Measure::Lh), nested_loop(Measure::Remd)] {
            for seed in 1..=3 {
                let r = optimized_weights(&spec, &OptimizerConfig { seed, ..OptimizerConfig::default() }).unwrap();
                assert!(r.trace.windows(2).all(|w| w[1].1 <= w[0].1), "{:?}", r.trace);
                assert_eq!(r.final_value, r.trace.last().unwrap().1);
                assert!(r.final_value <= r.start_value);
                assert_eq!(r.weights.values().iter().cloned().fold(0.0, f64::max), 1.0);
            }
        }
    }

    #[test]
    fn nested_loop_improves_on_uniform() {
        let spec = nested_loop(Measure::Lh);
        let uniform = spec.evaluate(&WeightVector::uniform(9)).unwrap();
        let r = minimize(&spec, &WeightVector::uniform(9), &OptimizerConfig::default()).unwrap();
        assert!(r.final_value <= uniform);
        assert_eq!(r.start_value, uniform);
    }

    #[test]
    fn convergence_csv_format() {
        assert_eq!(convergence_csv(&[(0, 0.5), (1, 0.25)]), "iteration,value\n0,0.5\n1,0.25\n");
    }
}
