//! Labelled Petri nets, workflow nets and their stochastic (weighted) variant.
//!
//! A [`LabeledPetriNet`] is an immutable value built through [`NetBuilder`].
//! [`validate_workflow`] promotes it to a [`WorkflowNet`] once the structural
//! workflow conditions hold, and a [`StochasticWorkflowNet`] pairs that with a
//! strictly positive [`WeightVector`].

pub mod pnml;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

pub type PlaceIdx = usize;
pub type TransitionIdx = usize;

/// Transition label: an activity symbol or the silent action.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Silent,
    Activity(String),
}

impl Label {
    pub fn activity(&self) -> Option<&str> {
        match self {
            Label::Silent => None,
            Label::Activity(a) => Some(a),
        }
    }

    pub fn is_silent(&self) -> bool {
        matches!(self, Label::Silent)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Silent => write!(f, "τ"),
            Label::Activity(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Place {
    pub id: String,
    pub name: Option<String>,
}

impl Place {
    /// Display name, falling back to the id.
    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    pub label: Label,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Place(PlaceIdx),
    Transition(TransitionIdx),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arc {
    pub source: Node,
    pub target: Node,
    pub multiplicity: u32,
}

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("duplicate node id {0:?}")]
    DuplicateId(String),
    #[error("arc {from:?} -> {to:?} references undeclared node {missing:?}")]
    DanglingArc {
        from: String,
        to: String,
        missing: String,
    },
    #[error("arc {from:?} -> {to:?} must connect a place and a transition")]
    InvalidArc { from: String, to: String },
    #[error("arc {from:?} -> {to:?} has zero multiplicity")]
    ZeroMultiplicity { from: String, to: String },
    #[error("not a workflow net: {0}")]
    NotAWorkflowNet(WorkflowViolation),
    #[error("weight vector has {got} entries but the net has {expected} transitions")]
    WeightLength { expected: usize, got: usize },
    #[error("weight {value} at position {index} is not strictly positive and finite")]
    NonPositiveWeight { index: usize, value: f64 },
}

/// The specific workflow-net clause a net fails.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WorkflowViolation {
    SourceEqualsSink,
    SourceHasIncomingArc,
    SinkHasOutgoingArc,
    MultipleSources(Vec<String>),
    MultipleSinks(Vec<String>),
    NonUnitMultiplicity { from: String, to: String, multiplicity: u32 },
    BadInitialMarking,
    NotStronglyConnectable,
    NoSource,
    NoSink,
    AmbiguousSource(Vec<String>),
    AmbiguousSink(Vec<String>),
}

impl fmt::Display for WorkflowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use WorkflowViolation::*;
        match self {
            SourceEqualsSink => write!(f, "source and sink must be distinct places"),
            SourceHasIncomingArc => write!(f, "source has incoming arc"),
            SinkHasOutgoingArc => write!(f, "sink has outgoing arc"),
            MultipleSources(ps) => write!(f, "multiple places without incoming arcs: {}", ps.join(", ")),
            MultipleSinks(ps) => write!(f, "multiple places without outgoing arcs: {}", ps.join(", ")),
            NonUnitMultiplicity { from, to, multiplicity } => {
                write!(f, "arc {from} -> {to} has multiplicity {multiplicity}, expected 1")
            }
            BadInitialMarking => write!(f, "initial marking must be one token on source and none elsewhere"),
            NotStronglyConnectable => write!(f, "net is not strongly connected after adding sink -> source"),
            NoSource => write!(f, "no place without incoming arcs"),
            NoSink => write!(f, "no place without outgoing arcs"),
            AmbiguousSource(ps) => write!(f, "source is ambiguous: {}", ps.join(", ")),
            AmbiguousSink(ps) => write!(f, "sink is ambiguous: {}", ps.join(", ")),
        }
    }
}

/// Incremental constructor resolving string ids to indices.
#[derive(Default, Debug)]
pub struct NetBuilder {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    initial: Vec<u32>,
    ids: HashMap<String, Node>,
    pending_arcs: Vec<(String, String, u32)>,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn place(mut self, id: &str, tokens: u32) -> Self {
        self.add_place(id, None, tokens);
        self
    }

    pub fn transition(mut self, id: &str, label: Label) -> Self {
        self.add_transition(id, label);
        self
    }

    pub fn arc(mut self, from: &str, to: &str) -> Self {
        self.add_arc(from, to, 1);
        self
    }

    /// Records a place, returning its index. Duplicates surface in `build`.
    pub fn add_place(&mut self, id: &str, name: Option<String>, tokens: u32) -> PlaceIdx {
        let idx = self.places.len();
        self.places.push(Place { id: id.to_string(), name });
        self.initial.push(tokens);
        self.register(id, Node::Place(idx));
        idx
    }

    pub fn add_transition(&mut self, id: &str, label: Label) -> TransitionIdx {
        let idx = self.transitions.len();
        self.transitions.push(Transition { id: id.to_string(), label });
        self.register(id, Node::Transition(idx));
        idx
    }

    pub fn add_arc(&mut self, from: &str, to: &str, multiplicity: u32) {
        self.pending_arcs.push((from.to_string(), to.to_string(), multiplicity));
    }

    fn register(&mut self, id: &str, node: Node) {
        // keep the first registration; the duplicate is reported by `build`
        self.ids.entry(id.to_string()).or_insert(node);
    }

    pub fn build(self) -> Result<LabeledPetriNet, NetError> {
        let mut seen = BTreeSet::new();
        for id in self
            .places
            .iter()
            .map(|p| &p.id)
            .chain(self.transitions.iter().map(|t| &t.id))
        {
            if !seen.insert(id.as_str()) {
                return Err(NetError::DuplicateId(id.clone()));
            }
        }
        let mut arcs = Vec::with_capacity(self.pending_arcs.len());
        for (from, to, multiplicity) in self.pending_arcs {
            let lookup = |id: &str| {
                self.ids.get(id).copied().ok_or_else(|| NetError::DanglingArc {
                    from: from.clone(),
                    to: to.clone(),
                    missing: id.to_string(),
                })
            };
            let source = lookup(&from)?;
            let target = lookup(&to)?;
            match (source, target) {
                (Node::Place(_), Node::Transition(_)) | (Node::Transition(_), Node::Place(_)) => {}
                _ => return Err(NetError::InvalidArc { from, to }),
            }
            if multiplicity == 0 {
                return Err(NetError::ZeroMultiplicity { from, to });
            }
            arcs.push(Arc { source, target, multiplicity });
        }
        Ok(LabeledPetriNet::assemble(self.places, self.transitions, arcs, self.initial))
    }
}

/// A labelled place/transition net. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPetriNet {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    arcs: Vec<Arc>,
    initial_marking: Vec<u32>,
    alphabet: BTreeSet<String>,
    preset: Vec<Vec<PlaceIdx>>,
    postset: Vec<Vec<PlaceIdx>>,
}

impl LabeledPetriNet {
    fn assemble(places: Vec<Place>, transitions: Vec<Transition>, arcs: Vec<Arc>, initial_marking: Vec<u32>) -> Self {
        let alphabet = transitions
            .iter()
            .filter_map(|t| t.label.activity().map(str::to_string))
            .collect();
        let mut preset = vec![Vec::new(); transitions.len()];
        let mut postset = vec![Vec::new(); transitions.len()];
        for arc in &arcs {
            match (arc.source, arc.target) {
                (Node::Place(p), Node::Transition(t)) => preset[t].push(p),
                (Node::Transition(t), Node::Place(p)) => postset[t].push(p),
                _ => unreachable!("validated by the builder"),
            }
        }
        for set in preset.iter_mut().chain(postset.iter_mut()) {
            set.sort_unstable();
            set.dedup();
        }
        LabeledPetriNet { places, transitions, arcs, initial_marking, alphabet, preset, postset }
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn initial_marking(&self) -> &[u32] {
        &self.initial_marking
    }

    pub fn alphabet(&self) -> &BTreeSet<String> {
        &self.alphabet
    }

    /// Input places of `t`, sorted and deduplicated.
    pub fn preset(&self, t: TransitionIdx) -> &[PlaceIdx] {
        &self.preset[t]
    }

    /// Output places of `t`, sorted and deduplicated.
    pub fn postset(&self, t: TransitionIdx) -> &[PlaceIdx] {
        &self.postset[t]
    }

    pub fn place_index(&self, id: &str) -> Option<PlaceIdx> {
        self.places.iter().position(|p| p.id == id)
    }

    pub fn transition_index(&self, id: &str) -> Option<TransitionIdx> {
        self.transitions.iter().position(|t| t.id == id)
    }

    fn node_id(&self, node: Node) -> &str {
        match node {
            Node::Place(p) => &self.places[p].id,
            Node::Transition(t) => &self.transitions[t].id,
        }
    }

    fn place_degrees(&self) -> (Vec<usize>, Vec<usize>) {
        let mut incoming = vec![0; self.places.len()];
        let mut outgoing = vec![0; self.places.len()];
        for arc in &self.arcs {
            if let Node::Place(p) = arc.target {
                incoming[p] += 1;
            }
            if let Node::Place(p) = arc.source {
                outgoing[p] += 1;
            }
        }
        (incoming, outgoing)
    }

    /// Source and sink candidates: places with no incoming, respectively no
    /// outgoing, arcs. Each is `Ok` only when exactly one candidate exists.
    pub fn infer_source_sink(&self) -> (Result<PlaceIdx, WorkflowViolation>, Result<PlaceIdx, WorkflowViolation>) {
        let (incoming, outgoing) = self.place_degrees();
        let pick = |deg: &[usize], none: WorkflowViolation, many: fn(Vec<String>) -> WorkflowViolation| {
            let cands: Vec<PlaceIdx> = (0..deg.len()).filter(|&p| deg[p] == 0).collect();
            match cands.as_slice() {
                [] => Err(none),
                [p] => Ok(*p),
                _ => Err(many(cands.iter().map(|&p| self.places[p].id.clone()).collect())),
            }
        };
        (
            pick(&incoming, WorkflowViolation::NoSource, WorkflowViolation::AmbiguousSource),
            pick(&outgoing, WorkflowViolation::NoSink, WorkflowViolation::AmbiguousSink),
        )
    }
}

/// A labelled net satisfying the workflow-net conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkflowNet {
    net: LabeledPetriNet,
    source: PlaceIdx,
    sink: PlaceIdx,
}

impl WorkflowNet {
    pub fn net(&self) -> &LabeledPetriNet {
        &self.net
    }

    pub fn source(&self) -> PlaceIdx {
        self.source
    }

    pub fn sink(&self) -> PlaceIdx {
        self.sink
    }

    pub fn transition_count(&self) -> usize {
        self.net.transitions.len()
    }

    /// Validates `net` with structurally inferred source and sink.
    pub fn infer(net: LabeledPetriNet) -> Result<Self, NetError> {
        let (source, sink) = net.infer_source_sink();
        let source = source.map_err(NetError::NotAWorkflowNet)?;
        let sink = sink.map_err(NetError::NotAWorkflowNet)?;
        validate_workflow(net, source, sink)
    }
}

/// Checks the workflow-net clauses, reporting the first violated one.
pub fn validate_workflow(net: LabeledPetriNet, source: PlaceIdx, sink: PlaceIdx) -> Result<WorkflowNet, NetError> {
    let fail = |v| Err(NetError::NotAWorkflowNet(v));
    if source == sink {
        return fail(WorkflowViolation::SourceEqualsSink);
    }
    let mut multiplicity: HashMap<(Node, Node), u32> = HashMap::new();
    for arc in &net.arcs {
        *multiplicity.entry((arc.source, arc.target)).or_default() += arc.multiplicity;
    }
    for arc in &net.arcs {
        let m = multiplicity[&(arc.source, arc.target)];
        if m != 1 {
            return fail(WorkflowViolation::NonUnitMultiplicity {
                from: net.node_id(arc.source).to_string(),
                to: net.node_id(arc.target).to_string(),
                multiplicity: m,
            });
        }
    }
    let (incoming, outgoing) = net.place_degrees();
    if incoming[source] > 0 {
        return fail(WorkflowViolation::SourceHasIncomingArc);
    }
    if outgoing[sink] > 0 {
        return fail(WorkflowViolation::SinkHasOutgoingArc);
    }
    let others = |deg: &[usize], keep: PlaceIdx| -> Vec<String> {
        (0..deg.len())
            .filter(|&p| p != keep && deg[p] == 0)
            .map(|p| net.places[p].id.clone())
            .collect()
    };
    let extra_sources = others(&incoming, source);
    if !extra_sources.is_empty() {
        let mut all = vec![net.places[source].id.clone()];
        all.extend(extra_sources);
        return fail(WorkflowViolation::MultipleSources(all));
    }
    let extra_sinks = others(&outgoing, sink);
    if !extra_sinks.is_empty() {
        let mut all = vec![net.places[sink].id.clone()];
        all.extend(extra_sinks);
        return fail(WorkflowViolation::MultipleSinks(all));
    }
    let marking_ok = net
        .initial_marking
        .iter()
        .enumerate()
        .all(|(p, &m)| m == u32::from(p == source));
    if !marking_ok {
        return fail(WorkflowViolation::BadInitialMarking);
    }
    if !strongly_connected_with_reset(&net, source, sink) {
        return fail(WorkflowViolation::NotStronglyConnectable);
    }
    Ok(WorkflowNet { net, source, sink })
}

fn strongly_connected_with_reset(net: &LabeledPetriNet, source: PlaceIdx, sink: PlaceIdx) -> bool {
    let np = net.places.len();
    let nt = net.transitions.len();
    let node = |n: Node| match n {
        Node::Place(p) => p,
        Node::Transition(t) => np + t,
    };
    let mut g = DiGraph::<(), ()>::new();
    let ids: Vec<_> = (0..np + nt + 1).map(|_| g.add_node(())).collect();
    for arc in &net.arcs {
        g.add_edge(ids[node(arc.source)], ids[node(arc.target)], ());
    }
    let reset = ids[np + nt];
    g.add_edge(ids[sink], reset, ());
    g.add_edge(reset, ids[source], ());
    kosaraju_scc(&g).len() == 1
}

/// Strictly positive weights aligned with a net's transition order.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self, NetError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(NetError::NonPositiveWeight { index, value });
        }
        Ok(WeightVector(values))
    }

    pub fn uniform(len: usize) -> Self {
        WeightVector(vec![1.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiplies every weight by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite());
        WeightVector(self.0.iter().map(|w| w * factor).collect())
    }

    /// Rescales so the largest weight equals 1.
    pub fn normalized_max(&self) -> Self {
        let max = self.0.iter().cloned().fold(0.0_f64, f64::max);
        if max > 0.0 {
            WeightVector(self.0.iter().map(|w| w / max).collect())
        } else {
            self.clone()
        }
    }
}

impl std::ops::Index<TransitionIdx> for WeightVector {
    type Output = f64;
    fn index(&self, t: TransitionIdx) -> &f64 {
        &self.0[t]
    }
}

/// A workflow net whose transitions carry positive weights.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticWorkflowNet {
    wn: WorkflowNet,
    weights: WeightVector,
}

impl StochasticWorkflowNet {
    pub fn new(wn: WorkflowNet, weights: WeightVector) -> Result<Self, NetError> {
        if weights.len() != wn.transition_count() {
            return Err(NetError::WeightLength { expected: wn.transition_count(), got: weights.len() });
        }
        Ok(StochasticWorkflowNet { wn, weights })
    }

    pub fn workflow(&self) -> &WorkflowNet {
        &self.wn
    }

    pub fn net(&self) -> &LabeledPetriNet {
        &self.wn.net
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn with_weights(&self, weights: WeightVector) -> Result<Self, NetError> {
        StochasticWorkflowNet::new(self.wn.clone(), weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn act(a: &str) -> Label {
        Label::Activity(a.to_string())
    }

    #[test]
    fn parallel_choice_net_is_a_workflow_net() {
        let wn = fixtures::parallel_choice_net();
        assert_eq!(wn.net().places().len(), 6);
        assert_eq!(wn.net().transitions().len(), 5);
        assert_eq!(wn.net().places()[wn.source()].id, "source");
        assert_eq!(wn.net().places()[wn.sink()].id, "sink");
        let alphabet: Vec<_> = wn.net().alphabet().iter().cloned().collect();
        assert_eq!(alphabet, ["a", "b", "c", "d"]);
    }

    #[test]
    fn single_place_is_rejected() {
        let net = NetBuilder::new().place("p", 1).build().unwrap();
        let err = validate_workflow(net, 0, 0).unwrap_err();
        assert_eq!(err, NetError::NotAWorkflowNet(WorkflowViolation::SourceEqualsSink));
    }

    #[test]
    fn extra_arc_into_source_is_rejected() {
        let mut b = fixtures::parallel_choice_builder();
        b.add_transition("back", Label::Silent);
        b.add_arc("p2", "back", 1);
        b.add_arc("back", "source", 1);
        let net = b.build().unwrap();
        let source = net.place_index("source").unwrap();
        let sink = net.place_index("sink").unwrap();
        let err = validate_workflow(net, source, sink).unwrap_err();
        assert_eq!(err, NetError::NotAWorkflowNet(WorkflowViolation::SourceHasIncomingArc));
        assert_eq!(err.to_string(), "not a workflow net: source has incoming arc");
    }

    #[test]
    fn bad_marking_and_multiplicity() {
        let net = NetBuilder::new()
            .place("i", 2)
            .place("o", 0)
            .transition("t", act("a"))
            .arc("i", "t")
            .arc("t", "o")
            .build()
            .unwrap();
        assert_eq!(
            validate_workflow(net, 0, 1).unwrap_err(),
            NetError::NotAWorkflowNet(WorkflowViolation::BadInitialMarking)
        );

        let mut b = NetBuilder::new().place("i", 1).place("o", 0).transition("t", act("a"));
        b.add_arc("i", "t", 2);
        b.add_arc("t", "o", 1);
        let err = validate_workflow(b.build().unwrap(), 0, 1).unwrap_err();
        assert!(matches!(err, NetError::NotAWorkflowNet(WorkflowViolation::NonUnitMultiplicity { multiplicity: 2, .. })));
    }

    #[test]
    fn disconnected_component_is_rejected() {
        // an isolated cycle p <-> t hangs off the main path
        let net = NetBuilder::new()
            .place("i", 1)
            .place("o", 0)
            .place("p", 0)
            .transition("t", act("a"))
            .transition("u", act("b"))
            .arc("i", "t")
            .arc("t", "o")
            .arc("p", "u")
            .arc("u", "p")
            .build()
            .unwrap();
        assert_eq!(
            validate_workflow(net, 0, 1).unwrap_err(),
            NetError::NotAWorkflowNet(WorkflowViolation::NotStronglyConnectable)
        );
    }

    #[test]
    fn builder_errors() {
        let dup = NetBuilder::new().place("x", 0).transition("x", Label::Silent).build();
        assert_eq!(dup.unwrap_err(), NetError::DuplicateId("x".into()));
        let dangling = NetBuilder::new().place("p", 0).arc("p", "ghost").build();
        assert!(matches!(dangling.unwrap_err(), NetError::DanglingArc { missing, .. } if missing == "ghost"));
        let pp = NetBuilder::new().place("p", 0).place("q", 0).arc("p", "q").build();
        assert!(matches!(pp.unwrap_err(), NetError::InvalidArc { .. }));
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(WeightVector::new(vec![1.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(WeightVector::new(vec![1e-9, 3.0]).is_ok());
        let w = WeightVector::new(vec![0.5, 2.0]).unwrap();
        assert_eq!(w.normalized_max().values(), &[0.25, 1.0]);
        let wn = fixtures::parallel_choice_net();
        assert!(matches!(
            StochasticWorkflowNet::new(wn, WeightVector::uniform(2)),
            Err(NetError::WeightLength { expected: 5, got: 2 })
        ));
    }
}
