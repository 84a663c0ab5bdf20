//! Breadth-first unfolding of an annotated reachability graph into trace
//! probabilities.
//!
//! Keys are `(state, trace)` pairs grouped by level, where the level counts
//! arcs traversed. All arcs advance the level by one, so each level is a
//! complete bucket: once the loop reaches it, no more mass can flow into it.

mod prefix;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use serde::Serialize;

use crate::eventlog::{StochasticLanguage, Trace};
use crate::semantics::AnnotatedRG;

pub use prefix::{NodeId, PrefixIndex, SymbolId};

pub const DEFAULT_PROB_FLOOR: f64 = 1e-12;

/// Cutoffs that turn a possibly infinite unfolding into a truncated one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnfoldLimits {
    /// Keys past this level are dropped. `None` picks
    /// `(1 + longest target) * |states|`.
    pub max_level: Option<usize>,
    /// Keys whose probability falls below this are dropped.
    pub prob_floor: f64,
}

impl Default for UnfoldLimits {
    fn default() -> Self {
        UnfoldLimits { max_level: None, prob_floor: DEFAULT_PROB_FLOOR }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnfoldResult {
    pub probs: BTreeMap<Trace, f64>,
    /// Mass discarded by the level and probability cutoffs.
    pub dropped_mass: f64,
    /// Number of levels expanded, counting level 0.
    pub levels_explored: usize,
}

impl UnfoldResult {
    pub fn prob(&self, trace: &Trace) -> f64 {
        self.probs.get(trace).copied().unwrap_or(0.0)
    }

    pub fn mass(&self) -> f64 {
        self.probs.values().sum()
    }
}

/// One AddOrIncrease into the bucket of `to_level`, made while expanding a
/// key of `from_level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Merge {
    pub from_level: usize,
    pub to_level: usize,
    pub state: usize,
}

enum Index<'a> {
    Fixed(&'a PrefixIndex),
    Growable(&'a mut PrefixIndex),
}

impl Index<'_> {
    fn extend(&mut self, node: NodeId, sym: SymbolId) -> Option<NodeId> {
        match self {
            Index::Fixed(ix) => ix.extend_existing(node, sym),
            Index::Growable(ix) => ix.extend(node, sym),
        }
    }

    fn is_member(&self, node: NodeId) -> bool {
        match self {
            Index::Fixed(ix) => ix.is_member_node(node),
            Index::Growable(ix) => ix.is_member_node(node),
        }
    }

    fn depth(&self, node: NodeId) -> usize {
        match self {
            Index::Fixed(ix) => ix.depth(node),
            Index::Growable(ix) => ix.depth(node),
        }
    }
}

/// How a transition's label moves through the index.
#[derive(Clone, Copy)]
enum Step {
    Silent,
    Symbol(SymbolId),
    /// The label occurs in no target, so every extension leaves the prefixes.
    Outside,
}

struct Budget {
    max_level: usize,
    prob_floor: f64,
    max_trace_len: usize,
    coverage: Option<f64>,
    deadline: Option<Instant>,
}

struct Outcome {
    found: IndexMap<NodeId, f64>,
    dropped_mass: f64,
    pending_mass: f64,
    levels_explored: usize,
    timed_out: bool,
}

fn run(
    arg: &AnnotatedRG<'_>,
    mut index: Index<'_>,
    steps: &[Step],
    budget: &Budget,
    observer: &mut dyn FnMut(Merge),
) -> Outcome {
    let rg = arg.rg();
    let probs = arg.arc_prob();
    let sink = rg.sink_state();
    let mut found: IndexMap<NodeId, f64> = IndexMap::new();
    let mut found_mass = 0.0;
    let mut dropped_mass = 0.0;
    let mut level = 0;
    let mut current: IndexMap<(usize, NodeId), f64> = IndexMap::new();
    current.insert((rg.initial(), PrefixIndex::ROOT), 1.0);
    if Some(rg.initial()) == sink {
        // the empty net: the initial marking already is the final one
        current.clear();
        if index.is_member(PrefixIndex::ROOT) {
            found.insert(PrefixIndex::ROOT, 1.0);
        }
    }

    let mut timed_out = false;
    while !current.is_empty() {
        if budget.coverage.is_some_and(|c| found_mass >= c) {
            break;
        }
        if budget.deadline.is_some_and(|d| Instant::now() >= d) {
            timed_out = true;
            break;
        }
        let mut next: IndexMap<(usize, NodeId), f64> = IndexMap::new();
        for (&(state, node), &p) in &current {
            for i in rg.outgoing(state) {
                let arc = &rg.arcs()[i];
                let np = p * probs[i];
                let child = match steps[arc.transition] {
                    Step::Silent => Some(node),
                    Step::Symbol(sym) => index.extend(node, sym),
                    Step::Outside => None,
                };
                let Some(child) = child else { continue };
                if level + 1 > budget.max_level || np < budget.prob_floor || index.depth(child) > budget.max_trace_len
                {
                    dropped_mass += np;
                    continue;
                }
                if Some(arc.to) == sink {
                    if index.is_member(child) {
                        *found.entry(child).or_insert(0.0) += np;
                        found_mass += np;
                    }
                } else {
                    observer(Merge { from_level: level, to_level: level + 1, state: arc.to });
                    *next.entry((arc.to, child)).or_insert(0.0) += np;
                }
            }
        }
        current = next;
        level += 1;
    }
    Outcome { found, dropped_mass, pending_mass: current.values().sum(), levels_explored: level, timed_out }
}

fn steps_for(arg: &AnnotatedRG<'_>, mut symbol: impl FnMut(&str) -> Option<SymbolId>) -> Vec<Step> {
    let rg = arg.rg();
    (0..rg.transition_count())
        .map(|t| match rg.label(t).activity() {
            None => Step::Silent,
            Some(a) => symbol(a).map_or(Step::Outside, Step::Symbol),
        })
        .collect()
}

fn default_max_level(arg: &AnnotatedRG<'_>, longest: usize) -> usize {
    (1 + longest).saturating_mul(arg.rg().state_count().max(1))
}

/// Probabilities of the target traces in `targets`. Only keys whose trace is
/// a prefix of some target are expanded.
pub fn trace_probabilities(arg: &AnnotatedRG<'_>, targets: &PrefixIndex, limits: UnfoldLimits) -> UnfoldResult {
    trace_probabilities_observed(arg, targets, limits, &mut |_| {})
}

/// [`trace_probabilities`] with a callback on every merge into a bucket.
pub fn trace_probabilities_observed(
    arg: &AnnotatedRG<'_>,
    targets: &PrefixIndex,
    limits: UnfoldLimits,
    observer: &mut dyn FnMut(Merge),
) -> UnfoldResult {
    assert!(!targets.is_growable(), "targets must be a fixed index");
    let steps = steps_for(arg, |a| targets.symbol_id(a));
    let budget = Budget {
        max_level: limits.max_level.unwrap_or_else(|| default_max_level(arg, targets.max_member_len())),
        prob_floor: limits.prob_floor,
        max_trace_len: usize::MAX,
        coverage: None,
        deadline: None,
    };
    let out = run(arg, Index::Fixed(targets), &steps, &budget, observer);
    UnfoldResult {
        probs: out.found.iter().map(|(&n, &p)| (targets.trace(n), p)).collect(),
        dropped_mass: out.dropped_mass,
        levels_explored: out.levels_explored,
    }
}

/// Budget for the unrestricted unfolding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LanguageBudget {
    /// Stop once completed traces hold at least this much mass.
    pub coverage: f64,
    pub max_trace_len: usize,
    /// `None` picks `(1 + max_trace_len) * |states|`.
    pub max_level: Option<usize>,
    pub prob_floor: f64,
    /// Wall-clock limit, checked between levels.
    pub time_limit: Option<Duration>,
}

impl Default for LanguageBudget {
    fn default() -> Self {
        LanguageBudget { coverage: 1.0, max_trace_len: 64, max_level: None, prob_floor: DEFAULT_PROB_FLOOR, time_limit: None }
    }
}

impl LanguageBudget {
    pub fn with_coverage(coverage: f64) -> Self {
        LanguageBudget { coverage, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LanguageUnfolding {
    /// Completed traces; the residual is everything else.
    pub language: StochasticLanguage,
    pub coverage_reached: bool,
    pub dropped_mass: f64,
    /// Mass still in the queue when the unfolding stopped.
    pub pending_mass: f64,
    pub levels_explored: usize,
    /// The time limit stopped the unfolding.
    pub timed_out: bool,
}

/// The model's stochastic language, unfolded until `budget.coverage` of the
/// mass sits on completed traces or a budget binds.
pub fn unfold_language(arg: &AnnotatedRG<'_>, budget: LanguageBudget) -> LanguageUnfolding {
    let mut index = PrefixIndex::growable();
    let steps = steps_for(arg, |a| index.symbol(a));
    let b = Budget {
        max_level: budget.max_level.unwrap_or_else(|| default_max_level(arg, budget.max_trace_len)),
        prob_floor: budget.prob_floor,
        max_trace_len: budget.max_trace_len,
        coverage: Some(budget.coverage),
        deadline: budget.time_limit.map(|t| Instant::now() + t),
    };
    let out = run(arg, Index::Growable(&mut index), &steps, &b, &mut |_| {});
    let probs: BTreeMap<Trace, f64> = out.found.iter().map(|(&n, &p)| (index.trace(n), p)).collect();
    let mass: f64 = probs.values().sum();
    let language = StochasticLanguage::defective(probs).expect("unfolded mass is at most one");
    LanguageUnfolding {
        language,
        coverage_reached: mass >= budget.coverage,
        dropped_mass: out.dropped_mass,
        pending_mass: out.pending_mass,
        levels_explored: out.levels_explored,
        timed_out: out.timed_out,
    }
}
