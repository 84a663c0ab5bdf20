//! Random block-structured workflow nets, for property tests and benchmarks.
//!
//! Nets are built from random process trees (sequence, exclusive choice,
//! parallel and loop operators over activity leaves), which keeps them sound
//! and 1-safe by construction.

use rand::Rng;

use crate::net::{Label, NetBuilder, StochasticWorkflowNet, WeightVector, WorkflowNet};

#[derive(Clone, Debug)]
pub struct TreeShape {
    /// Upper bound on the number of transitions, silent ones included.
    pub max_transitions: usize,
    pub max_depth: usize,
    pub max_children: usize,
    pub allow_loops: bool,
    /// Activity symbols are drawn from the first `alphabet_size` letters.
    pub alphabet_size: usize,
    /// Probability that a leaf is silent.
    pub silent_leaf_prob: f64,
    /// Weights are drawn uniformly from this range.
    pub weight_range: (f64, f64),
}

impl Default for TreeShape {
    fn default() -> Self {
        TreeShape {
            max_transitions: 12,
            max_depth: 4,
            max_children: 3,
            allow_loops: false,
            alphabet_size: 4,
            silent_leaf_prob: 0.1,
            weight_range: (0.1, 2.0),
        }
    }
}

#[derive(Clone, Debug)]
pub enum ProcessTree {
    Leaf(Label),
    Sequence(Vec<ProcessTree>),
    Choice(Vec<ProcessTree>),
    Parallel(Vec<ProcessTree>),
    /// Body, then any number of (redo, body) repetitions.
    Loop(Box<ProcessTree>, Box<ProcessTree>),
}

pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, shape: &TreeShape, depth: usize) -> ProcessTree {
    let leaf = |rng: &mut R| {
        if rng.random_bool(shape.silent_leaf_prob) {
            ProcessTree::Leaf(Label::Silent)
        } else {
            let c = (b'a' + rng.random_range(0..shape.alphabet_size.clamp(1, 26)) as u8) as char;
            ProcessTree::Leaf(Label::Activity(c.to_string()))
        }
    };
    if depth >= shape.max_depth || rng.random_bool(0.35) {
        return leaf(rng);
    }
    let ops = if shape.allow_loops { 4 } else { 3 };
    let arity = rng.random_range(2..=shape.max_children.max(2));
    let children = |rng: &mut R| (0..arity).map(|_| random_tree(rng, shape, depth + 1)).collect();
    match rng.random_range(0..ops) {
        0 => ProcessTree::Sequence(children(rng)),
        1 => ProcessTree::Choice(children(rng)),
        2 => ProcessTree::Parallel(children(rng)),
        _ => ProcessTree::Loop(
            Box::new(random_tree(rng, shape, depth + 1)),
            Box::new(random_tree(rng, shape, depth + 1)),
        ),
    }
}

struct Emitter {
    builder: NetBuilder,
    places: usize,
    transitions: usize,
}

impl Emitter {
    fn place(&mut self) -> String {
        self.places += 1;
        let id = format!("p{}", self.places);
        self.builder.add_place(&id, None, 0);
        id
    }

    fn transition(&mut self, label: Label, inputs: &[&str], outputs: &[&str]) {
        self.transitions += 1;
        let id = format!("t{}", self.transitions);
        self.builder.add_transition(&id, label);
        for p in inputs {
            self.builder.add_arc(p, &id, 1);
        }
        for p in outputs {
            self.builder.add_arc(&id, p, 1);
        }
    }

    /// Emits `tree` so that it consumes from `input` and produces into
    /// `output`, never the other way around.
    fn emit(&mut self, tree: &ProcessTree, input: &str, output: &str) {
        match tree {
            ProcessTree::Leaf(label) => self.transition(label.clone(), &[input], &[output]),
            ProcessTree::Sequence(children) => {
                let mut from = input.to_string();
                for (i, c) in children.iter().enumerate() {
                    let to = if i + 1 == children.len() { output.to_string() } else { self.place() };
                    self.emit(c, &from, &to);
                    from = to;
                }
            }
            ProcessTree::Choice(children) => {
                for c in children {
                    if let ProcessTree::Leaf(_) = c {
                        self.emit(c, input, output);
                    } else {
                        let (i, o) = (self.place(), self.place());
                        self.transition(Label::Silent, &[input], &[&i]);
                        self.emit(c, &i, &o);
                        self.transition(Label::Silent, &[&o], &[output]);
                    }
                }
            }
            ProcessTree::Parallel(children) => {
                let ends: Vec<(String, String)> = children.iter().map(|_| (self.place(), self.place())).collect();
                let starts: Vec<&str> = ends.iter().map(|(s, _)| s.as_str()).collect();
                self.transition(Label::Silent, &[input], &starts);
                for (c, (s, e)) in children.iter().zip(&ends) {
                    self.emit(c, s, e);
                }
                let finals: Vec<&str> = ends.iter().map(|(_, e)| e.as_str()).collect();
                self.transition(Label::Silent, &finals, &[output]);
            }
            ProcessTree::Loop(body, redo) => {
                let (b_in, b_out) = (self.place(), self.place());
                self.transition(Label::Silent, &[input], &[&b_in]);
                self.emit(body, &b_in, &b_out);
                self.emit(redo, &b_out, &b_in);
                self.transition(Label::Silent, &[&b_out], &[output]);
            }
        }
    }
}

pub fn tree_to_net(tree: &ProcessTree) -> WorkflowNet {
    let mut e = Emitter { builder: NetBuilder::new(), places: 0, transitions: 0 };
    e.builder.add_place("source", None, 1);
    e.builder.add_place("sink", None, 0);
    e.emit(tree, "source", "sink");
    let net = e.builder.build().expect("generated ids are unique");
    WorkflowNet::infer(net).expect("block-structured nets are workflow nets")
}

fn transition_count(tree: &ProcessTree) -> usize {
    match tree {
        ProcessTree::Leaf(_) => 1,
        ProcessTree::Sequence(cs) => cs.iter().map(transition_count).sum(),
        ProcessTree::Choice(cs) => cs
            .iter()
            .map(|c| match c {
                ProcessTree::Leaf(_) => 1,
                other => transition_count(other) + 2,
            })
            .sum(),
        ProcessTree::Parallel(cs) => cs.iter().map(transition_count).sum::<usize>() + 2,
        ProcessTree::Loop(b, r) => transition_count(b) + transition_count(r) + 2,
    }
}

/// Draws trees until one fits `shape.max_transitions`, then weights it.
pub fn random_workflow_net<R: Rng + ?Sized>(rng: &mut R, shape: &TreeShape) -> StochasticWorkflowNet {
    let tree = loop {
        let t = random_tree(rng, shape, 0);
        if transition_count(&t) <= shape.max_transitions {
            break t;
        }
    };
    let wn = tree_to_net(&tree);
    let (lo, hi) = shape.weight_range;
    let weights = (0..wn.transition_count()).map(|_| rng.random_range(lo..=hi)).collect();
    StochasticWorkflowNet::new(wn, WeightVector::new(weights).expect("positive range")).expect("aligned")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{build_rg, DEFAULT_STATE_CAP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_nets_are_safe_and_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for allow_loops in [false, true] {
            let shape = TreeShape { allow_loops, max_transitions: 16, ..TreeShape::default() };
            for _ in 0..50 {
                let swn = random_workflow_net(&mut rng, &shape);
                assert!(swn.net().transitions().len() <= 16);
                let rg = build_rg(swn.workflow(), DEFAULT_STATE_CAP).unwrap();
                assert!(rg.sink_state().is_some());
                if !allow_loops {
                    assert!(rg.is_acyclic());
                }
                // the only deadlock is the sink
                for s in 0..rg.state_count() {
                    assert!(!rg.outgoing(s).is_empty() || Some(s) == rg.sink_state());
                }
            }
        }
    }
}
