//! Monte-Carlo token game: samples runs of a stochastic workflow net by
//! repeatedly firing an enabled transition with probability proportional to
//! its weight. Works on the net directly, without a reachability graph.

use std::collections::BTreeMap;

use rand::Rng;

use crate::eventlog::Trace;
use crate::net::StochasticWorkflowNet;
use crate::semantics::{enabled, fire, Marking};

/// How a sampled run ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    /// Reached the marking with a single token on the sink.
    Completed(Trace),
    /// Hit a marking without enabled transitions other than the sink.
    Deadlocked,
    /// Exceeded the step limit.
    Truncated,
}

pub fn sample_run<R: Rng + ?Sized>(swn: &StochasticWorkflowNet, rng: &mut R, max_steps: usize) -> RunOutcome {
    let wn = swn.workflow();
    let net = wn.net();
    let n = net.places().len();
    let sink = Marking::from_places(n, [wn.sink()]);
    let mut marking = Marking::from_places(n, [wn.source()]);
    let mut trace = Trace::empty();
    let weights = swn.weights();
    for _ in 0..max_steps {
        if marking == sink {
            return RunOutcome::Completed(trace);
        }
        let candidates = enabled(&marking, net);
        if candidates.is_empty() {
            return RunOutcome::Deadlocked;
        }
        let total: f64 = candidates.iter().map(|&t| weights[t]).sum();
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = *candidates.last().expect("non-empty");
        for &t in &candidates {
            if pick < weights[t] {
                chosen = t;
                break;
            }
            pick -= weights[t];
        }
        if let Some(a) = net.transitions()[chosen].label.activity() {
            trace.push(a);
        }
        marking = match fire(&marking, chosen, net) {
            Ok(m) => m,
            Err(_) => return RunOutcome::Deadlocked,
        };
    }
    if marking == sink {
        RunOutcome::Completed(trace)
    } else {
        RunOutcome::Truncated
    }
}

/// Counts of completed traces over `runs` samples.
#[derive(Clone, Debug, Default)]
pub struct SampleCounts {
    pub runs: u64,
    pub completed: BTreeMap<Trace, u64>,
    pub deadlocked: u64,
    pub truncated: u64,
}

pub fn sample_language<R: Rng + ?Sized>(
    swn: &StochasticWorkflowNet,
    rng: &mut R,
    runs: u64,
    max_steps: usize,
) -> SampleCounts {
    let mut counts = SampleCounts { runs, ..SampleCounts::default() };
    for _ in 0..runs {
        match sample_run(swn, rng, max_steps) {
            RunOutcome::Completed(t) => *counts.completed.entry(t).or_default() += 1,
            RunOutcome::Deadlocked => counts.deadlocked += 1,
            RunOutcome::Truncated => counts.truncated += 1,
        }
    }
    counts
}
