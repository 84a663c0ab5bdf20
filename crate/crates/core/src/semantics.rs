//! Token game and reachability graphs of 1-safe workflow nets.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Range;

use thiserror::Error;

use crate::net::{Label, LabeledPetriNet, PlaceIdx, TransitionIdx, WeightVector, WorkflowNet};

pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("transition {0:?} is not enabled")]
    NotEnabled(String),
    #[error("firing {transition:?} puts a second token on place {place:?}")]
    NotOneSafe { transition: String, place: String },
    #[error("reachability graph exceeds {0} states")]
    StateCapExceeded(usize),
}

/// Set of marked places, stored as a bitset.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking(Box<[u64]>);

impl Marking {
    pub fn empty(places: usize) -> Self {
        Marking(vec![0; places.div_ceil(64).max(1)].into_boxed_slice())
    }

    pub fn from_places(places: usize, marked: impl IntoIterator<Item = PlaceIdx>) -> Self {
        let mut m = Marking::empty(places);
        for p in marked {
            m.insert(p);
        }
        m
    }

    pub fn contains(&self, p: PlaceIdx) -> bool {
        self.0[p / 64] >> (p % 64) & 1 == 1
    }

    pub fn insert(&mut self, p: PlaceIdx) {
        self.0[p / 64] |= 1 << (p % 64);
    }

    pub fn remove(&mut self, p: PlaceIdx) {
        self.0[p / 64] &= !(1 << (p % 64));
    }

    pub fn places(&self) -> impl Iterator<Item = PlaceIdx> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits >> b & 1 == 1).map(move |b| w * 64 + b)
        })
    }

    pub fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Concatenated names of the marked places, e.g. `p2p4`.
    pub fn label(&self, net: &LabeledPetriNet) -> String {
        self.places().map(|p| net.places()[p].display_name()).collect()
    }
}

pub fn is_enabled(marking: &Marking, t: TransitionIdx, net: &LabeledPetriNet) -> bool {
    net.preset(t).iter().all(|&p| marking.contains(p))
}

/// Transitions enabled at `marking`, in declaration order.
pub fn enabled(marking: &Marking, net: &LabeledPetriNet) -> Vec<TransitionIdx> {
    (0..net.transitions().len()).filter(|&t| is_enabled(marking, t, net)).collect()
}

pub fn fire(marking: &Marking, t: TransitionIdx, net: &LabeledPetriNet) -> Result<Marking, SemanticsError> {
    if !is_enabled(marking, t, net) {
        return Err(SemanticsError::NotEnabled(net.transitions()[t].id.clone()));
    }
    let mut next = marking.clone();
    for &p in net.preset(t) {
        next.remove(p);
    }
    for &p in net.postset(t) {
        if next.contains(p) {
            return Err(SemanticsError::NotOneSafe {
                transition: net.transitions()[t].id.clone(),
                place: net.places()[p].id.clone(),
            });
        }
        next.insert(p);
    }
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RgArc {
    pub from: usize,
    pub to: usize,
    pub transition: TransitionIdx,
}

/// Markings reachable from the initial one. States are numbered in
/// breadth-first discovery order; arcs are grouped by source state.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachabilityGraph {
    states: Vec<Marking>,
    arcs: Vec<RgArc>,
    out: Vec<Range<usize>>,
    sink_state: Option<usize>,
    labels: Vec<Label>,
}

impl ReachabilityGraph {
    pub fn initial(&self) -> usize {
        0
    }

    pub fn states(&self) -> &[Marking] {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn arcs(&self) -> &[RgArc] {
        &self.arcs
    }

    /// Indices into [`ReachabilityGraph::arcs`] of the arcs leaving `state`.
    pub fn outgoing(&self, state: usize) -> Range<usize> {
        self.out[state].clone()
    }

    /// The state marking exactly the sink place, if reachable.
    pub fn sink_state(&self) -> Option<usize> {
        self.sink_state
    }

    pub fn transition_count(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, t: TransitionIdx) -> &Label {
        &self.labels[t]
    }

    pub fn is_acyclic(&self) -> bool {
        // Kahn's algorithm
        let mut indegree = vec![0usize; self.states.len()];
        for a in &self.arcs {
            indegree[a.to] += 1;
        }
        let mut stack: Vec<usize> = (0..self.states.len()).filter(|&s| indegree[s] == 0).collect();
        let mut seen = 0;
        while let Some(s) = stack.pop() {
            seen += 1;
            for a in &self.arcs[self.out[s].clone()] {
                indegree[a.to] -= 1;
                if indegree[a.to] == 0 {
                    stack.push(a.to);
                }
            }
        }
        seen == self.states.len()
    }

    /// Graphviz rendering; states are labelled with their marked places.
    pub fn to_dot(&self, net: &LabeledPetriNet) -> String {
        let mut s = String::from("digraph rg {\n  rankdir=LR;\n");
        for (i, m) in self.states.iter().enumerate() {
            let shape = if Some(i) == self.sink_state { "doublecircle" } else { "ellipse" };
            let _ = writeln!(s, "  s{i} [label=\"{}\", shape={shape}];", m.label(net));
        }
        for a in &self.arcs {
            let t = &net.transitions()[a.transition];
            let _ = writeln!(s, "  s{} -> s{} [label=\"{} ({})\"];", a.from, a.to, t.label, t.id);
        }
        s.push_str("}\n");
        s
    }
}

/// Breadth-first exploration from the initial marking.
pub fn build_rg(wn: &WorkflowNet, state_cap: usize) -> Result<ReachabilityGraph, SemanticsError> {
    let net = wn.net();
    let n_places = net.places().len();
    let initial = Marking::from_places(n_places, [wn.source()]);
    let sink_marking = Marking::from_places(n_places, [wn.sink()]);

    let mut index: HashMap<Marking, usize> = HashMap::new();
    let mut states = vec![initial.clone()];
    index.insert(initial, 0);
    let mut arcs = Vec::new();
    let mut out = Vec::new();
    let mut next = 0;
    while next < states.len() {
        let start = arcs.len();
        let current = states[next].clone();
        for t in enabled(&current, net) {
            let target = fire(&current, t, net)?;
            let to = match index.get(&target) {
                Some(&i) => i,
                None => {
                    if states.len() >= state_cap {
                        return Err(SemanticsError::StateCapExceeded(state_cap));
                    }
                    let i = states.len();
                    index.insert(target.clone(), i);
                    states.push(target);
                    i
                }
            };
            arcs.push(RgArc { from: next, to, transition: t });
        }
        out.push(start..arcs.len());
        next += 1;
    }
    let sink_state = index.get(&sink_marking).copied();
    let labels = net.transitions().iter().map(|t| t.label.clone()).collect();
    Ok(ReachabilityGraph { states, arcs, out, sink_state, labels })
}

/// A reachability graph with a firing probability on every arc.
#[derive(Clone, Debug)]
pub struct AnnotatedRG<'a> {
    rg: &'a ReachabilityGraph,
    arc_prob: Vec<f64>,
}

impl<'a> AnnotatedRG<'a> {
    pub fn rg(&self) -> &'a ReachabilityGraph {
        self.rg
    }

    pub fn arc_prob(&self) -> &[f64] {
        &self.arc_prob
    }
}

/// Each arc gets its transition's weight over the total weight leaving its state.
pub fn annotate<'a>(rg: &'a ReachabilityGraph, weights: &WeightVector) -> AnnotatedRG<'a> {
    assert_eq!(weights.len(), rg.transition_count(), "weights not aligned with the net");
    let mut arc_prob = vec![0.0; rg.arcs.len()];
    for range in &rg.out {
        let total: f64 = rg.arcs[range.clone()].iter().map(|a| weights[a.transition]).sum();
        for i in range.clone() {
            arc_prob[i] = weights[rg.arcs[i].transition] / total;
        }
    }
    AnnotatedRG { rg, arc_prob }
}
